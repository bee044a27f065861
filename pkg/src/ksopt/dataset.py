"""Synthetic phantom volumes, coil sensitivity maps, and dataset splits.

Phantoms stand in for anatomical slices: random-intensity ellipses with a
smooth low-order polynomial phase, lightly blurred, normalized so the
99th-percentile magnitude is 1 (this normalization fixes the meaning of
the measurement-noise sigma throughout the package).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .containers import load_array, save_array
from .numerics import RngStream


@dataclass
class CoilSet:
    """C complex sensitivity maps, per-pixel sum-of-squares normalized to 1."""

    maps: np.ndarray  # (C, h, w) complex

    @property
    def count(self) -> int:
        return self.maps.shape[0]

    @property
    def shape(self) -> tuple:
        return self.maps.shape[1:]


@dataclass
class VolumeRecord:
    """One ground-truth image with its coil maps."""

    image: np.ndarray  # (h, w) complex
    coils: CoilSet
    id: str = ""


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def all_ids(self):
        return list(self.train) + list(self.val) + list(self.test)


def make_phantom(rng: RngStream, height: int, width: int, n_ellipses: int) -> np.ndarray:
    """Random ellipse-sum phantom with smooth polynomial phase.

    99th-percentile magnitude is normalized to 1 and magnitudes are clipped
    at 2 (overlapping ellipses can stack above the normalization point).
    """
    if height < 2 or width < 2:
        raise ValueError(f"degenerate phantom dims ({height}, {width})")
    if n_ellipses < 1:
        raise ValueError("n_ellipses must be >= 1")
    yy = (np.arange(height) - height // 2) / (height / 2)
    xx = (np.arange(width) - width // 2) / (width / 2)
    Y, X = np.meshgrid(yy, xx, indexing="ij")
    mag = np.zeros((height, width))
    params = rng.uniform(7 * n_ellipses).reshape(n_ellipses, 7)
    for cy, cx, a, b, ang, amp, _ in params:
        cy = (cy - 0.5) * 0.8
        cx = (cx - 0.5) * 0.8
        a = 0.15 + 0.35 * a
        b = 0.15 + 0.35 * b
        t = ang * np.pi
        ct, st = np.cos(t), np.sin(t)
        u = (Y - cy) * ct + (X - cx) * st
        v = -(Y - cy) * st + (X - cx) * ct
        mag += (0.3 + 0.7 * amp) * ((u / a) ** 2 + (v / b) ** 2 <= 1.0)
    mag = gaussian_filter(mag, sigma=0.8, mode="nearest")
    p99 = np.percentile(mag, 99)
    if p99 <= 0:
        p99 = max(mag.max(), 1e-12)
    mag = np.minimum(mag / p99, 2.0)
    # low-order polynomial phase, smooth across the FOV
    c = rng.uniform(6, -1.0, 1.0)
    phase = c[0] + c[1] * Y + c[2] * X + c[3] * Y * X + c[4] * Y**2 + c[5] * X**2
    return (mag * np.exp(1j * np.pi * phase)).astype(np.complex128)


def make_coils(height: int, width: int, n_coils: int, mode: str = "gaussian-array",
               seed: int = 2024) -> CoilSet:
    """Synthetic coil maps.

    `uniform` is the emulated single-coil setting (one all-ones map);
    `gaussian-array` places smooth complex Gaussian lobes around the FOV
    perimeter with mild deterministic phase ramps, then normalizes the
    per-pixel sum of squares to 1.
    """
    if n_coils < 1:
        raise ValueError("coil count must be >= 1")
    if mode == "uniform":
        if n_coils != 1:
            raise ValueError("uniform mode implies a single coil")
        return CoilSet(np.ones((1, height, width), dtype=np.complex128))
    if mode != "gaussian-array":
        raise ValueError(f"unknown coil mode {mode!r}")
    yy = (np.arange(height) - height // 2) / (height / 2)
    xx = (np.arange(width) - width // 2) / (width / 2)
    Y, X = np.meshgrid(yy, xx, indexing="ij")
    rng = RngStream(seed)
    ramps = rng.uniform(3 * n_coils, -1.5, 1.5).reshape(n_coils, 3)
    w = 0.6 * 2.0  # lobe width = 0.6 x FOV in normalized [-1, 1] units
    maps = np.empty((n_coils, height, width), dtype=np.complex128)
    for i in range(n_coils):
        ang = 2 * np.pi * i / n_coils
        cy, cx = np.sin(ang), np.cos(ang)
        env = np.exp(-((Y - cy) ** 2 + (X - cx) ** 2) / (2 * (w / 2) ** 2))
        a, b, c0 = ramps[i]
        maps[i] = env * np.exp(1j * (a * Y + b * X + c0))
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    maps /= rss[None]
    return CoilSet(maps)


def make_volume(rng: RngStream, height: int, width: int, n_coils: int,
                n_ellipses: int = 6, coil_mode: str = "gaussian-array",
                record_id: str = "") -> VolumeRecord:
    img = make_phantom(rng, height, width, n_ellipses)
    mode = "uniform" if n_coils == 1 else coil_mode
    coils = make_coils(height, width, n_coils, mode)
    return VolumeRecord(image=img, coils=coils, id=record_id)


def make_dataset(seed: int, n_volumes: int, height: int, width: int, n_coils: int,
                 n_ellipses: int = 6) -> list:
    """Deterministic list of synthetic volume records."""
    base = RngStream(seed)
    records = []
    for i in range(n_volumes):
        rec = make_volume(base.child(i), height, width, n_coils,
                          n_ellipses=n_ellipses, record_id=f"vol{i:04d}")
        records.append(rec)
    return records


def split_records(ids, seed: int, n_val: int, n_test: int) -> DatasetSplit:
    """Disjoint train/val/test partition of record ids, deterministic in seed."""
    ids = list(ids)
    if n_val + n_test >= len(ids):
        raise ValueError("not enough records for the requested val/test sizes")
    shuffled = RngStream(seed).shuffled(ids)
    return DatasetSplit(
        train=sorted(shuffled[n_val + n_test:]),
        val=sorted(shuffled[:n_val]),
        test=sorted(shuffled[n_val:n_val + n_test]),
    )


def save_volume(dirpath, rec: VolumeRecord) -> None:
    d = Path(dirpath)
    save_array(d / f"{rec.id}_image", rec.image.astype(np.complex128))
    save_array(d / f"{rec.id}_coils", rec.coils.maps.astype(np.complex128))


def load_volume(dirpath, record_id: str) -> VolumeRecord:
    d = Path(dirpath)
    image = load_array(d / f"{record_id}_image")
    coils = load_array(d / f"{record_id}_coils")
    return VolumeRecord(image=image, coils=CoilSet(coils), id=record_id)


def save_manifest(dirpath, split: DatasetSplit, meta: dict) -> Path:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "records": split.all_ids(),
        "split": {"train": split.train, "val": split.val, "test": split.test},
        "meta": meta,
    }
    out = d / "manifest.json"
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_manifest(dirpath):
    d = Path(dirpath)
    manifest = json.loads((d / "manifest.json").read_text())
    sp = manifest["split"]
    return DatasetSplit(train=sp["train"], val=sp["val"], test=sp["test"]), manifest["meta"]
