"""Sampling-pattern characterization: point spread functions and Voronoi areas.

The PSF is the adjoint transform of an all-ones measurement vector,
normalized to unit peak magnitude. When every sample sits exactly on a
Cartesian grid location the adjoint reduces to an inverse FFT of the
binary (multiplicity-weighted) mask, which is evaluated exactly; fully
sampled patterns then produce a numerically clean delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .numerics import ifft2c
from .nufft import KbParams, NufftOperator
from .patterns import SamplingPattern


@dataclass
class PsfResult:
    psf: np.ndarray                 # (h, w) complex, unit peak magnitude
    profile: np.ndarray             # |psf| along the horizontal center line
    peak_sidelobe_db: float


@dataclass
class VoronoiSummary:
    areas: np.ndarray               # per-point cell area (k-space units)
    radii: np.ndarray               # per-point |k|
    domain_area: float


def _on_grid_mask(pattern: SamplingPattern) -> bool:
    gx = pattern.points[:, 0] * pattern.grid_h
    gy = pattern.points[:, 1] * pattern.grid_w
    return bool(np.all(np.abs(gx - np.round(gx)) < 1e-9)
                and np.all(np.abs(gy - np.round(gy)) < 1e-9))


def psf(pattern: SamplingPattern, grid: tuple = None, kb: KbParams = KbParams()) -> PsfResult:
    """Point spread function of a sampling pattern on the target grid."""
    if pattern.m == 0:
        raise ValueError("empty pattern")
    gh, gw = grid if grid is not None else (pattern.grid_h, pattern.grid_w)
    pts = pattern.expanded_points()
    if _on_grid_mask(pattern):
        mask = np.zeros((gh, gw), dtype=np.complex128)
        ix = (np.round(pts[:, 0] * gh).astype(int) + gh // 2) % gh
        iy = (np.round(pts[:, 1] * gw).astype(int) + gw // 2) % gw
        np.add.at(mask, (ix, iy), 1.0)
        img = ifft2c(mask)
    else:
        op = NufftOperator(pts, gh, gw, kb)
        img = op.adjoint(np.ones(len(pts), dtype=np.complex128))
    img = img / np.max(np.abs(img))
    profile = np.abs(img[gh // 2, :])
    return PsfResult(psf=img, profile=profile,
                     peak_sidelobe_db=peak_sidelobe_db(profile, gw // 2))


def peak_sidelobe_db(profile: np.ndarray, center: int) -> float:
    """Peak sidelobe of a unit-peak profile, in dB.

    The main lobe extends to the first local minimum on each side of the
    center; the sidelobe level is the maximum beyond it.
    """
    n = len(profile)
    right = n - 1
    for i in range(center + 1, n - 1):
        if profile[i + 1] > profile[i]:
            right = i
            break
    left = 0
    for i in range(center - 1, 0, -1):
        if profile[i - 1] > profile[i]:
            left = i
            break
    outside = np.concatenate([profile[:left + 1], profile[right:]]) if right > left else profile
    peak = float(np.max(outside)) if len(outside) else 0.0
    if peak <= 0:
        return -np.inf
    return float(20.0 * np.log10(peak))


def voronoi_areas(pattern: SamplingPattern, raster_dim: int = 1024) -> VoronoiSummary:
    """Rasterized nearest-neighbor Voronoi cell areas.

    The domain (square, or the inscribed ellipse under corner cutting) is
    rasterized at raster_dim^2 cells; each cell is assigned to its nearest
    pattern point. Exact duplicate points resolve to the lowest index.
    """
    pts = pattern.points
    if len(np.unique(pts, axis=0)) < 2:
        raise ValueError("need at least 2 distinct points")
    uniq, first_idx = np.unique(pts, axis=0, return_index=True)
    # lowest original index wins for duplicates
    owner = np.full(len(uniq), -1, dtype=np.int64)
    for i, row in enumerate(uniq):
        matches = np.nonzero((pts == row).all(axis=1))[0]
        owner[i] = matches.min()
    ax = (np.arange(raster_dim) + 0.5) / raster_dim - 0.5
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    cells = np.stack([X.ravel(), Y.ravel()], axis=1)
    if pattern.corner_cut:
        keep = (cells[:, 0] / 0.5) ** 2 + (cells[:, 1] / 0.5) ** 2 <= 1.0
        cells = cells[keep]
    tree = cKDTree(uniq)
    _, nearest = tree.query(cells, workers=-1)
    cell_area = 1.0 / raster_dim**2
    counts = np.bincount(nearest, minlength=len(uniq))
    areas = np.zeros(len(pts))
    areas[owner] = counts * cell_area
    return VoronoiSummary(areas=areas, radii=pattern.radii(),
                          domain_area=len(cells) * cell_area)


def radial_density_fit(vs: VoronoiSummary, calib_radius: float = 0.0) -> float:
    """Least-squares slope of log(area) vs log(radius) outside the calibration radius."""
    keep = (vs.radii > max(calib_radius, 1e-9)) & (vs.areas > 0)
    if keep.sum() < 10:
        raise ValueError("need at least 10 points outside the calibration radius")
    lr = np.log(vs.radii[keep])
    la = np.log(vs.areas[keep])
    if np.ptp(lr) < 1e-12:
        raise ValueError("all radii identical; slope undefined")
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    coef, *_ = np.linalg.lstsq(A, la, rcond=None)
    return float(coef[0])


def save_profile_csv(path, result: PsfResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("index,magnitude,power\n")
        for i, v in enumerate(result.profile):
            f.write(f"{i},{v:.17g},{v * v:.17g}\n")
    return path


def save_voronoi_csv(path, vs: VoronoiSummary) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("k_r,area\n")
        for r, a in zip(vs.radii, vs.areas):
            f.write(f"{r:.17g},{a:.17g}\n")
    return path


def save_pgm(path, image_mag: np.ndarray) -> Path:
    """16-bit binary PGM of a magnitude image (max scaled to 65535)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(image_mag, dtype=np.float64)
    peak = arr.max() if arr.max() > 0 else 1.0
    pix = np.round(arr / peak * 65535).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode())
        f.write(pix.tobytes())
    return path
