"""Campaign cost approximations and break-even analysis.

All costs are measured in annotation-task units (a currency conversion is
just a multiplier, applied in the CLI). Every cost function is affine in
the number of requested segmentations ``a``, which break_even exploits to
solve for the crossover point in closed form.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields

logger = logging.getLogger(__name__)


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    a: float = 0.0  # requested segmentations
    a_mv: float = 1.0  # annotations per merged result
    a_t: float = 0.0  # annotations spent training the regressor
    s: float = 0.0  # expected spam fraction
    a_w: float = 2.0  # period of interleaved quality-control tasks
    a_r: float = 0.0  # reference annotations for the baseline
    n_c: float = 0.0  # categories annotations are requested for
    n_w: float = 0.0  # recruited workers
    n_aw: float = 0.0  # approved workers
    A_aw: float = 0.0  # average annotations per approved worker
    r: float = 0.0  # banned approved workers
    v: float = 0.0  # verification-stage cost

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise CostError(f"{f.name} must be non-negative")
        if not self.s < 1.0:
            raise CostError("spam fraction s must be < 1")
        if self.a_w < 2:
            raise CostError("a_w must be >= 2")


def load_cost_params(mapping) -> CostParams:
    """Build params from a plain dict; absent optional keys default with a warning."""
    known = {f.name for f in fields(CostParams)}
    unknown = set(mapping) - known
    if unknown:
        raise CostError(f"unknown cost parameter(s): {sorted(unknown)}")
    missing = sorted(known - set(mapping))
    if missing:
        logger.warning("cost parameters defaulted: %s", ", ".join(missing))
    return CostParams(**{k: float(v) for k, v in mapping.items()})


def _coefficients(method: str, p: CostParams) -> tuple[float, float]:
    """(slope, intercept) of cost(a) for the given method."""
    if method == "proposed":
        return p.a_mv / (1.0 - p.s), p.a_t
    if method == "baseline":
        return p.a_mv + p.a_mv / (p.a_w - 1.0), p.a_r
    if method == "manual-grading":
        return 1.0 / (1.0 - p.s), p.n_c * p.n_w + p.A_aw * p.n_aw * p.r + p.v
    raise CostError(f"unknown cost method {method!r}")


def cost_proposed(p: CostParams) -> float:
    """a_t + (a + s/(1-s) * a) * a_mv: regressor training plus the extra
    annotations drawn to replace the expected spam share."""
    return p.a_t + (p.a + p.s / (1.0 - p.s) * p.a) * p.a_mv


def cost_baseline(p: CostParams) -> float:
    """a_mv*a + a_mv*a/(a_w - 1) + a_r: majority voting with one known-
    reference quality-control task interleaved every a_w annotations."""
    return p.a_mv * p.a + p.a_mv * p.a / (p.a_w - 1.0) + p.a_r


def cost_manual_grading(p: CostParams) -> float:
    """a/(1-s) + n_c*n_w + A_aw*n_aw*r + v: one annotation per image with
    peer verification, worker recruiting and banned-worker overheads."""
    return p.a / (1.0 - p.s) + p.n_c * p.n_w + p.A_aw * p.n_aw * p.r + p.v


COST_METHODS = {
    "proposed": cost_proposed,
    "baseline": cost_baseline,
    "manual-grading": cost_manual_grading,
}


def evaluate(method: str, p: CostParams, a: float) -> float:
    from dataclasses import replace

    return COST_METHODS[method](replace(p, a=a))


def break_even(
    p: CostParams, methods: tuple[str, str], p_second: CostParams | None = None
) -> int | None:
    """Smallest integer a with cost_first(a) <= cost_second(a), or None.

    ``p_second`` lets the second method use its own parameter binding (the
    typical comparison runs the proposed method at lambda = 1 against a
    baseline needing a_mv = 3 annotations per merge). Solved in closed form
    from the affine coefficients and verified by evaluating both cost
    functions at a* and a* - 1.
    """
    first, second = methods
    q = p if p_second is None else p_second
    s1, i1 = _coefficients(first, p)
    s2, i2 = _coefficients(second, q)
    if i1 <= i2:
        return 0  # already cheaper (or equal) with no requests
    if s1 >= s2:
        return None  # starts above and never catches up
    a_star = math.ceil((i1 - i2) / (s2 - s1))
    # guard against float edge cases right at the crossover
    while a_star > 0 and evaluate(first, p, a_star - 1) <= evaluate(second, q, a_star - 1):
        a_star -= 1
    while evaluate(first, p, a_star) > evaluate(second, q, a_star):
        a_star += 1
    assert evaluate(first, p, a_star) <= evaluate(second, q, a_star)
    return a_star
