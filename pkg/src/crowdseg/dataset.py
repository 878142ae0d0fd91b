"""On-disk layout for simulated (or ingested) annotation datasets.

    <root>/
      manifest.tsv            image_id, worker_id, archetype, file names, DSC
      <image_id>/
        image.pgm             the annotated grayscale image
        reference.pgm         reference mask (object = 255)
        decoy.pgm             optional decoy reference
        <worker_id>.clicks.jsonl
        <worker_id>.poly.txt
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .clickstream import Clickstream, load_clickstream, save_clickstream
from .geometry import Mask, Polygon, read_polygon, write_polygon
from .imaging import (
    GrayImage,
    load_gray_pgm,
    load_mask_pgm,
    save_gray_pgm,
    save_mask_pgm,
)
from .simulator import SimulatedDataset


class DatasetError(ValueError):
    pass


MANIFEST = "manifest.tsv"
_MANIFEST_HEADER = "image_id\tworker_id\tarchetype\tclickstream\tpolygon\ttrue_dsc"


@dataclass(frozen=True)
class DatasetRow:
    image_id: str
    worker_id: str
    archetype: str
    stream: Clickstream
    polygon: Polygon
    true_dsc: float


@dataclass(frozen=True)
class Dataset:
    root: Path
    images: dict[str, GrayImage]
    references: dict[str, Mask]
    rows: tuple[DatasetRow, ...]

    def image_ids(self) -> list[str]:
        return sorted(self.references)

    def rows_for_image(self, image_id: str) -> list[DatasetRow]:
        return [r for r in self.rows if r.image_id == image_id]


def write_dataset(out_dir, dataset: SimulatedDataset) -> Path:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for image_id in sorted(dataset.scenes):
        scene = dataset.scenes[image_id]
        img_dir = root / image_id
        img_dir.mkdir(exist_ok=True)
        save_gray_pgm(img_dir / "image.pgm", scene.image)
        save_mask_pgm(img_dir / "reference.pgm", scene.reference)
        if scene.decoy_reference is not None:
            save_mask_pgm(img_dir / "decoy.pgm", scene.decoy_reference)
    with open(root / MANIFEST, "w", encoding="utf-8") as fh:
        fh.write(_MANIFEST_HEADER + "\n")
        for row in dataset.rows:
            clicks_name = f"{row.worker_id}.clicks.jsonl"
            poly_name = f"{row.worker_id}.poly.txt"
            img_dir = root / row.image_id
            save_clickstream(img_dir / clicks_name, row.stream)
            write_polygon(img_dir / poly_name, row.polygon)
            fh.write(
                f"{row.image_id}\t{row.worker_id}\t{row.archetype}"
                f"\t{row.image_id}/{clicks_name}\t{row.image_id}/{poly_name}"
                f"\t{row.true_dsc!r}\n"
            )
    return root


def load_dataset(root) -> Dataset:
    root = Path(root)
    manifest = root / MANIFEST
    if not manifest.is_file():
        raise DatasetError(f"no {MANIFEST} in {root}")
    rows: list[DatasetRow] = []
    images: dict[str, GrayImage] = {}
    references: dict[str, Mask] = {}
    with open(manifest, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != _MANIFEST_HEADER:
            raise DatasetError(f"{manifest}: unexpected manifest header")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 6:
                raise DatasetError(f"{manifest}:{lineno}: expected 6 columns")
            image_id, worker_id, arch, clicks_rel, poly_rel, dsc = cells
            if image_id not in images:
                images[image_id] = load_gray_pgm(root / image_id / "image.pgm")
                references[image_id] = load_mask_pgm(root / image_id / "reference.pgm")
            rows.append(
                DatasetRow(
                    image_id=image_id,
                    worker_id=worker_id,
                    archetype=arch,
                    stream=load_clickstream(root / clicks_rel),
                    polygon=read_polygon(root / poly_rel),
                    true_dsc=float(dsc),
                )
            )
    return Dataset(root=root, images=images, references=references, rows=tuple(rows))


def dataset_from_memory(dataset: SimulatedDataset) -> Dataset:
    """Adapt a freshly simulated dataset without touching the filesystem."""
    return Dataset(
        root=Path("."),
        images={iid: s.image for iid, s in dataset.scenes.items()},
        references={iid: s.reference for iid, s in dataset.scenes.items()},
        rows=tuple(
            DatasetRow(
                image_id=r.image_id,
                worker_id=r.worker_id,
                archetype=r.archetype,
                stream=r.stream,
                polygon=r.polygon,
                true_dsc=r.true_dsc,
            )
            for r in dataset.rows
        ),
    )


def checksum_tree(root) -> dict[str, bytes]:
    """Map of relative path -> raw bytes for byte-identity comparisons."""
    root = Path(root)
    out: dict[str, bytes] = {}
    for dirpath, _, filenames in os.walk(root):
        for name in sorted(filenames):
            p = Path(dirpath) / name
            out[str(p.relative_to(root))] = p.read_bytes()
    return out
