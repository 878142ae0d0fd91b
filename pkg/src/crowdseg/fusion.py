"""Merging multiple crowd segmentations of one image into a single mask.

Methods:
  * plain per-pixel majority voting;
  * confidence-weighted majority voting: accepted masks are weighted by a
    normalized confidence kappa = (s_hat - eps_t) / (1 - eps_t), the
    weighted votes are accumulated and thresholded at
    psi = (sum of kappas) / lambda * mu, where mu = floor(lambda/2) + 1 is
    the smallest integer majority. With equal confidences this reduces
    exactly to plain majority voting;
  * STAPLE: binary EM jointly estimating the consensus mask and per-rater
    sensitivity/specificity, optionally preceded by discarding annotations
    whose estimated quality falls below the acceptance threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import GeometryError, Mask


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class QualityEstimate:
    """Estimated DSC of one annotation and its confidence above eps_t."""

    s_hat: float
    kappa: float | None = None  # defined only when s_hat >= eps_t

    def __post_init__(self):
        if not 0.0 <= self.s_hat <= 1.0:
            raise FusionError("estimated DSC must lie in [0, 1]")
        if self.kappa is not None and not 0.0 <= self.kappa <= 1.0:
            raise FusionError("confidence must lie in [0, 1]")


FUSION_METHODS = ("mv", "cw-mv", "staple", "staple-qc")


@dataclass(frozen=True)
class FusionConfig:
    epsilon_t: float = 0.9
    lam: int = 3  # annotations fused per image
    method: str = "cw-mv"

    def __post_init__(self):
        if not 0.0 <= self.epsilon_t < 1.0:
            raise FusionError("epsilon_t must lie in [0, 1)")
        if self.lam < 1:
            raise FusionError("lambda must be >= 1")
        if self.method not in FUSION_METHODS:
            raise FusionError(f"unknown fusion method {self.method!r}")


def confidence(s_hat: float, epsilon_t: float) -> float:
    """kappa(s_hat) = (s_hat - eps_t) / (1 - eps_t), defined for s_hat >= eps_t."""
    if epsilon_t >= 1.0:
        raise FusionError("epsilon_t must be < 1")
    if s_hat < epsilon_t:
        raise FusionError("confidence undefined below the acceptance threshold")
    return (s_hat - epsilon_t) / (1.0 - epsilon_t)


def filter_by_threshold(masks, s_hats, epsilon_t: float):
    """Keep annotations with estimated DSC >= eps_t (boundary inclusive).

    Returns (accepted masks, their s_hat values, rejection count).
    """
    masks = list(masks)
    s_hats = list(s_hats)
    if len(masks) != len(s_hats):
        raise FusionError("each mask needs exactly one quality estimate")
    kept_masks = []
    kept_s = []
    rejected = 0
    for mask, s in zip(masks, s_hats):
        if s >= epsilon_t:
            kept_masks.append(mask)
            kept_s.append(s)
        else:
            rejected += 1
    return kept_masks, kept_s, rejected


def _checked(masks):
    if not masks:
        raise FusionError("no masks to fuse")
    shape = masks[0].bits.shape
    for m in masks[1:]:
        if m.bits.shape != shape:
            raise GeometryError("masks to fuse must share dimensions")
    return masks


def _stack(masks) -> np.ndarray:
    return np.stack([m.bits for m in _checked(masks)]).astype(np.float64)


def majority_mu(lam: int) -> int:
    """Smallest integer count representing a majority of lam voters."""
    return lam // 2 + 1


def majority_vote(masks) -> Mask:
    """Pixel set when strictly more than half of the masks set it."""
    stack = _stack(masks)
    votes = stack.sum(axis=0)
    return Mask((votes >= majority_mu(len(masks))).astype(np.uint8))


def confidence_weighted_mv(masks, s_hats, epsilon_t: float = 0.9) -> Mask:
    """Fuse accepted masks, weighting each by its confidence.

    All ``s_hats`` must already be >= ``epsilon_t``. For a single mask the
    result is that mask itself. When every confidence is zero (all
    estimates exactly at the threshold) there is no evidence to weigh and
    the empty mask is returned.

    A pixel is set when its accumulated confidence reaches
    psi = (sum of all kappas) / lambda * mu. The comparison is evaluated in
    exact rational arithmetic per distinct vote pattern, so boundary cases
    (e.g. equal confidences, where the method must coincide with plain
    majority voting) never depend on float rounding.
    """
    masks = list(masks)
    s_hats = list(s_hats)
    if len(masks) != len(s_hats):
        raise FusionError("each mask needs exactly one quality estimate")
    lam = len(masks)
    if lam == 0:
        raise FusionError("no accepted masks to fuse")
    kappas = [confidence(s, epsilon_t) for s in s_hats]
    if lam == 1:
        return Mask(masks[0].bits.copy())
    if sum(kappas) == 0.0:
        return Mask(np.zeros_like(masks[0].bits))
    kf = [Fraction(k) for k in kappas]
    total = sum(kf)
    mu = majority_mu(lam)
    bits = np.stack([m.bits for m in _checked(masks)])  # (lam, h, w)
    votes = bits.reshape(lam, -1).T  # (pixels, lam)
    patterns, inverse = np.unique(votes, axis=0, return_inverse=True)
    accept = np.array(
        [
            # accumulated >= psi  <=>  accumulated * lam >= total * mu
            sum(k for k, v in zip(kf, row) if v) * lam >= total * mu
            for row in patterns.tolist()
        ],
        dtype=np.uint8,
    )
    return Mask(accept[inverse].reshape(masks[0].bits.shape))


@dataclass(frozen=True)
class StapleResult:
    mask: Mask
    sensitivity: np.ndarray  # p_j per rater
    specificity: np.ndarray  # q_j per rater
    iterations: int
    converged: bool


_P_INIT = 0.99999
_PROB_CLAMP = 1e-6


def staple(masks, tol: float = 1e-6, max_iter: int = 100) -> StapleResult:
    """Binary STAPLE EM over >= 2 equally sized masks.

    The stationary foreground prior is the mean foreground fraction of the
    inputs; sensitivities/specificities start at 0.99999 and are clamped to
    [1e-6, 1 - 1e-6]. Iteration stops when no parameter moved more than
    ``tol``. The consensus mask thresholds the posterior at 0.5.
    """
    masks = list(masks)
    if len(masks) < 2:
        raise FusionError("STAPLE needs at least 2 masks")
    stack = _stack(masks)  # (J, h, w) float
    J = len(masks)
    D = stack.reshape(J, -1)
    prior = float(D.mean())
    if prior == 0.0:
        # degenerate: nobody marked anything
        return StapleResult(
            mask=Mask(np.zeros_like(masks[0].bits)),
            sensitivity=np.full(J, _PROB_CLAMP),
            specificity=np.full(J, 1.0 - _PROB_CLAMP),
            iterations=0,
            converged=True,
        )
    prior = min(max(prior, _PROB_CLAMP), 1.0 - _PROB_CLAMP)
    p = np.full(J, _P_INIT)
    q = np.full(J, _P_INIT)
    w = np.zeros(D.shape[1])
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # E-step: posterior foreground probability per pixel
        a = prior * np.prod(np.where(D == 1.0, p[:, None], 1.0 - p[:, None]), axis=0)
        b = (1.0 - prior) * np.prod(
            np.where(D == 1.0, 1.0 - q[:, None], q[:, None]), axis=0
        )
        w = a / (a + b)
        # M-step: per-rater sensitivity and specificity
        w_sum = w.sum()
        not_w_sum = (1.0 - w).sum()
        new_p = (D @ w) / w_sum if w_sum > 0 else np.ones(J)
        new_q = ((1.0 - D) @ (1.0 - w)) / not_w_sum if not_w_sum > 0 else np.ones(J)
        new_p = np.clip(new_p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
        new_q = np.clip(new_q, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
        change = max(np.abs(new_p - p).max(), np.abs(new_q - q).max())
        p, q = new_p, new_q
        if change < tol:
            converged = True
            break
    out = (w >= 0.5).astype(np.uint8).reshape(masks[0].bits.shape)
    return StapleResult(
        mask=Mask(out),
        sensitivity=p,
        specificity=q,
        iterations=iterations,
        converged=converged,
    )


def staple_qc(
    masks, s_hats, epsilon_t: float = 0.9, tol: float = 1e-6, max_iter: int = 100
) -> StapleResult:
    """Quality-filtered STAPLE: discard below-threshold annotations first."""
    kept, _, _ = filter_by_threshold(masks, s_hats, epsilon_t)
    if not kept:
        raise FusionError("no annotations survived the quality threshold")
    if len(kept) == 1:
        return StapleResult(
            mask=Mask(kept[0].bits.copy()),
            sensitivity=np.array([1.0 - _PROB_CLAMP]),
            specificity=np.array([1.0 - _PROB_CLAMP]),
            iterations=0,
            converged=True,
        )
    return staple(kept, tol=tol, max_iter=max_iter)
