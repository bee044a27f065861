"""Sampling-pattern generation, projection, discretization, and file I/O.

All patterns are ordered lists of continuous k-space coordinates in
[-0.5, 0.5)^2 with a fully sampled Cartesian calibration block at the
center. Calibration points are stored first (rows 0 .. calib^2 - 1), which
is how files round-trip the calibration identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .numerics import RngStream


@dataclass
class SamplingPattern:
    points: np.ndarray            # (M, 2) float64, columns (kx, ky)
    accel: float
    calib: int
    corner_cut: bool
    grid_h: int
    grid_w: int
    frozen: np.ndarray = None     # (M,) bool
    mult: np.ndarray = None       # (M,) int, sample multiplicities
    seed: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        m = len(self.points)
        if self.frozen is None:
            self.frozen = np.zeros(m, dtype=bool)
        else:
            self.frozen = np.asarray(self.frozen, dtype=bool)
        if self.mult is None:
            self.mult = np.ones(m, dtype=np.int64)
        else:
            self.mult = np.asarray(self.mult, dtype=np.int64)

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def calib_mask(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[: self.calib**2] = True
        return mask

    def expanded_points(self) -> np.ndarray:
        """Points with multiplicities unrolled into repeated rows."""
        if np.all(self.mult == 1):
            return self.points
        return np.repeat(self.points, self.mult, axis=0)

    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])


def target_count(grid_h: int, grid_w: int, accel: float) -> int:
    return int(round(grid_h * grid_w / accel))


def calib_points(calib: int, grid_h: int, grid_w: int) -> np.ndarray:
    """The calib x calib Cartesian block centered on the k-space origin."""
    if calib == 0:
        return np.zeros((0, 2))
    offs = np.arange(calib) - calib // 2
    kx = offs / grid_h
    ky = offs / grid_w
    return np.stack(np.meshgrid(kx, ky, indexing="ij"), axis=-1).reshape(-1, 2)


def _in_ellipse(pts: np.ndarray) -> np.ndarray:
    return (pts[:, 0] / 0.5) ** 2 + (pts[:, 1] / 0.5) ** 2 <= 1.0


def _check_budget(n_random: int, calib: int):
    if n_random < 0:
        raise ValueError(
            f"accel too low: calibration block ({calib}x{calib}) already exceeds the sample budget"
        )


def gen_uniform(rng: RngStream, grid: tuple, accel: float, radius_frac: float = 1.0,
                corner_cut: bool = True, calib: int = 20) -> SamplingPattern:
    """Uniform random pattern: on a disc (corner-cut) or the full square."""
    if accel < 1:
        raise ValueError("accel must be >= 1")
    gh, gw = grid
    m_total = target_count(gh, gw, accel)
    n_random = m_total - calib**2
    _check_budget(n_random, calib)
    if corner_cut:
        r = 0.5 * radius_frac * np.sqrt(rng.uniform(n_random))
        th = rng.uniform(n_random, 0.0, 2 * np.pi)
        pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    else:
        half = 0.5 * radius_frac
        pts = np.stack(
            [rng.uniform(n_random, -half, half), rng.uniform(n_random, -half, half)], axis=1
        )
    pts = project(pts)
    points = np.concatenate([calib_points(calib, gh, gw), pts], axis=0)
    return SamplingPattern(points, accel, calib, corner_cut, gh, gw, seed=rng.seed)


def gen_vd_gaussian(rng: RngStream, grid: tuple, accel: float, std_frac: float = 0.25,
                    corner_cut: bool = True, calib: int = 20,
                    max_draws_per_point: int = 10**6) -> SamplingPattern:
    """Variable-density pattern from a truncated isotropic Gaussian.

    Draws are rejection-resampled to the k-space square and, with
    corner_cut, to the inscribed ellipse.
    """
    if std_frac <= 0:
        raise ValueError("std_frac must be > 0")
    gh, gw = grid
    m_total = target_count(gh, gw, accel)
    n_random = m_total - calib**2
    _check_budget(n_random, calib)
    std = std_frac * 1.0  # k-space width is 1.0
    kept = []
    need = n_random
    draws = 0
    while need > 0:
        batch = max(4 * need, 1024)
        draws += batch
        if draws > max_draws_per_point * max(n_random, 1):
            raise RuntimeError("gaussian rejection loop exceeded the draw budget")
        cand = std * rng.normal(2 * batch).reshape(batch, 2)
        ok = (np.abs(cand) < 0.5).all(axis=1)
        if corner_cut:
            ok &= _in_ellipse(cand)
        cand = cand[ok][:need]
        kept.append(cand)
        need -= len(cand)
    pts = project(np.concatenate(kept, axis=0)) if kept else np.zeros((0, 2))
    points = np.concatenate([calib_points(calib, gh, gw), pts], axis=0)
    return SamplingPattern(points, accel, calib, corner_cut, gh, gw, seed=rng.seed)


@numba.njit(cache=True)
def _poisson_core(base, slope, corner_cut, calib_half_x, calib_half_y, uniforms, k_tries):  # pragma: no cover
    """Variable-density dart throwing (Bridson-style active list).

    Local radius at x is base * (1 + slope * |x|); a candidate is accepted
    when no existing point is closer than the local radius evaluated at the
    pair midpoint. Returns the accepted points.
    """
    cell = base / np.sqrt(2.0)
    gdim = int(np.ceil(1.0 / cell)) + 1
    grid_idx = -np.ones((gdim, gdim), dtype=np.int64)
    cap = 8 * gdim * gdim
    pts = np.empty((cap, 2))
    n_pts = 0
    active = np.empty(cap, dtype=np.int64)
    n_active = 0
    iu = 0

    def radius_at(r):
        return base * (1.0 + slope * r)

    # initial point: rejection-sample a valid location
    for _ in range(1000):
        x = uniforms[iu] - 0.5
        y = uniforms[iu + 1] - 0.5
        iu += 2
        r2 = (x / 0.5) ** 2 + (y / 0.5) ** 2
        in_calib = abs(x) < calib_half_x and abs(y) < calib_half_y
        if (not corner_cut or r2 <= 1.0) and not in_calib:
            pts[0, 0] = x
            pts[0, 1] = y
            n_pts = 1
            active[0] = 0
            n_active = 1
            gi = int((x + 0.5) / cell)
            gj = int((y + 0.5) / cell)
            grid_idx[gi, gj] = 0
            break
    if n_pts == 0:
        return pts[:0]

    while n_active > 0 and iu + 3 * k_tries + 4 < len(uniforms):
        pick = int(uniforms[iu] * n_active)
        if pick >= n_active:
            pick = n_active - 1
        iu += 1
        pi = active[pick]
        px, py = pts[pi, 0], pts[pi, 1]
        rp = radius_at(np.hypot(px, py))
        found = False
        for _ in range(k_tries):
            ang = 2.0 * np.pi * uniforms[iu]
            rad = rp * (1.0 + uniforms[iu + 1])
            iu += 2
            cx = px + rad * np.cos(ang)
            cy = py + rad * np.sin(ang)
            if cx < -0.5 or cx >= 0.5 or cy < -0.5 or cy >= 0.5:
                continue
            if corner_cut and (cx / 0.5) ** 2 + (cy / 0.5) ** 2 > 1.0:
                continue
            if abs(cx) < calib_half_x and abs(cy) < calib_half_y:
                continue
            rc = radius_at(np.hypot(cx, cy))
            # farthest rejection distance around the candidate
            dmax = base * (1.0 + slope * (np.hypot(cx, cy) + 0.5)) / max(1e-9, 1.0 - slope * base / 2.0)
            win = int(np.ceil(dmax / cell))
            gi = int((cx + 0.5) / cell)
            gj = int((cy + 0.5) / cell)
            ok = True
            for ii in range(max(0, gi - win), min(gdim, gi + win + 1)):
                for jj in range(max(0, gj - win), min(gdim, gj + win + 1)):
                    qi = grid_idx[ii, jj]
                    if qi < 0:
                        continue
                    qx, qy = pts[qi, 0], pts[qi, 1]
                    d = np.hypot(cx - qx, cy - qy)
                    rmid = radius_at(np.hypot(0.5 * (cx + qx), 0.5 * (cy + qy)))
                    if d < rmid:
                        ok = False
                        break
                if not ok:
                    break
            if ok and n_pts < cap:
                pts[n_pts, 0] = cx
                pts[n_pts, 1] = cy
                grid_idx[gi, gj] = n_pts
                active[n_active] = n_pts
                n_active += 1
                n_pts += 1
                found = True
                break
        if not found:
            active[pick] = active[n_active - 1]
            n_active -= 1
    return pts[:n_pts].copy()


def gen_vd_poisson(rng: RngStream, grid: tuple, accel: float, tol: float = 0.02,
                   corner_cut: bool = True, calib: int = 20,
                   max_iters: int = 50) -> SamplingPattern:
    """Variable-density Poisson-disc pattern (density ~ 1/(1 + s|r|)).

    The local minimum distance grows linearly with k-space radius; the
    slope s is bisected until the achieved sample count is within
    `tol * target` of the target. The random stream is re-derived per
    generator call (not per bisection step), so the count is a
    deterministic function of s and bisection is well posed.
    """
    if accel < 1:
        raise ValueError("accel must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    gh, gw = grid
    m_total = target_count(gh, gw, accel)
    n_random = m_total - calib**2
    _check_budget(n_random, calib)
    base = 1.0 / max(gh, gw)
    calib_half_x = calib / (2 * gh)
    calib_half_y = calib / (2 * gw)
    uniforms = rng.child(0).uniform(min(3_000_000, 600 * gh * gw + 100_000))

    def count_at(s):
        pts = _poisson_core(base, s, corner_cut, calib_half_x, calib_half_y, uniforms, 20)
        return pts

    lo, hi = 0.0, 2.0
    pts_lo = count_at(lo)
    if len(pts_lo) < n_random * (1 - tol):
        raise RuntimeError(
            f"cannot reach target count {n_random}: saturation gives {len(pts_lo)} points"
        )
    # grow hi until the count drops below target
    while len(count_at(hi)) > n_random and hi < 1e4:
        hi *= 2.0
    best = None
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        pts = count_at(mid)
        err = abs(len(pts) - n_random)
        if best is None or err < best[0]:
            best = (err, mid, pts)
        if err <= tol * max(n_random, 1):
            break
        if len(pts) > n_random:
            lo = mid
        else:
            hi = mid
    else:
        if best[0] > tol * max(n_random, 1):
            raise RuntimeError(
                f"slope bisection failed after {max_iters} iterations "
                f"(best count {n_random - best[0]} vs target {n_random})"
            )
    _, slope, pts = best
    points = np.concatenate([calib_points(calib, gh, gw), project(pts)], axis=0)
    pat = SamplingPattern(points, accel, calib, corner_cut, gh, gw, seed=rng.seed)
    pat.fitted_slope = slope
    return pat


def project(pts: np.ndarray) -> np.ndarray:
    """Clamp coordinates to the valid box [-0.5, 0.5 - 2^-20]; idempotent."""
    return np.clip(np.asarray(pts, dtype=np.float64), -0.5, 0.5 - 2.0**-20)


def discretize(pattern: SamplingPattern, grid: tuple = None) -> SamplingPattern:
    """Snap every coordinate to the nearest Cartesian grid location.

    Exact duplicates after snapping collapse to one row with their
    multiplicities summed, so the acquisition model can weight repeats.
    """
    gh, gw = grid if grid is not None else (pattern.grid_h, pattern.grid_w)
    pts = pattern.points.copy()
    pts[:, 0] = np.round(pts[:, 0] * gh) / gh
    pts[:, 1] = np.round(pts[:, 1] * gw) / gw
    # 0.5 is the same frequency as -0.5 on the periodic grid
    pts[pts >= 0.5] -= 1.0
    _, first_idx, inverse = np.unique(
        pts.round(decimals=12), axis=0, return_index=True, return_inverse=True
    )
    order = np.argsort(first_idx)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse]
    m_new = len(first_idx)
    out_pts = np.zeros((m_new, 2))
    out_mult = np.zeros(m_new, dtype=np.int64)
    out_frozen = np.zeros(m_new, dtype=bool)
    out_pts[new_index] = pts
    np.add.at(out_mult, new_index, pattern.mult)
    np.logical_or.at(out_frozen, new_index, pattern.frozen)
    return SamplingPattern(out_pts, pattern.accel, pattern.calib, pattern.corner_cut,
                           gh, gw, frozen=out_frozen, mult=out_mult, seed=pattern.seed)


def save_pattern(path, pattern: SamplingPattern) -> Path:
    """Write `<path>.csv` (kx,ky,frozen; multiplicities as repeated rows) + JSON sidecar."""
    stem = Path(path)
    if stem.suffix == ".csv":
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    rows = np.repeat(np.arange(pattern.m), pattern.mult)
    with open(stem.with_suffix(".csv"), "w") as f:
        f.write("kx,ky,frozen\n")
        for i in rows:
            f.write(f"{pattern.points[i, 0]:.17g},{pattern.points[i, 1]:.17g},{int(pattern.frozen[i])}\n")
    sidecar = {
        "R": pattern.accel,
        "calib": pattern.calib,
        "corner_cut": bool(pattern.corner_cut),
        "grid_h": pattern.grid_h,
        "grid_w": pattern.grid_w,
        "seed": int(pattern.seed),
    }
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return stem


def load_pattern(path) -> SamplingPattern:
    stem = Path(path)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    sidecar = json.loads(stem.with_suffix(".json").read_text())
    raw = np.genfromtxt(stem.with_suffix(".csv"), delimiter=",", skip_header=1)
    raw = np.atleast_2d(raw)
    pts, first_idx, inverse = np.unique(raw[:, :2], axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first_idx)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse]
    m = len(pts)
    out_pts = np.zeros((m, 2))
    out_pts[new_index] = raw[:, :2]
    mult = np.bincount(new_index, minlength=m).astype(np.int64)
    frozen = np.zeros(m, dtype=bool)
    np.logical_or.at(frozen, new_index, raw[:, 2] > 0.5)
    return SamplingPattern(out_pts, sidecar["R"], sidecar["calib"], sidecar["corner_cut"],
                           sidecar["grid_h"], sidecar["grid_w"], frozen=frozen, mult=mult,
                           seed=sidecar.get("seed", 0))
