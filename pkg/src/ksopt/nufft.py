"""Kaiser-Bessel gridding transform with exact adjoint and coordinate gradients.

The transform evaluates centered unitary Fourier samples at continuous
k-space coordinates in [-0.5, 0.5)^2 (cycles per pixel; Cartesian grid
locations sit at (j - n//2) / n).

Accuracy design
---------------
Gridding interpolates an oversampled FFT with on-the-fly Kaiser-Bessel
weights (no lookup table). Two refinements make the operator meet a 1e-3
oracle-equivalence budget at the low oversampling factor used here (1.25),
where classical 1/FT apodization stalls around 1e-2:

* The interpolation weights are the KB kernel minus a value-and-slope
  matched parabola, so they reach zero smoothly at the support edge. The
  truncated kernel's edge discontinuity otherwise caps accuracy (its
  aliasing ghosts decay only like 1/l) and puts derivative kinks at
  on-grid sample positions. A symmetric (width+1)-tap window keeps the
  operator exactly even around Cartesian locations.

* Instead of a closed-form apodization, the per-dimension interpolation
  transfer  T(rho, tau) = sum_d w(d - rho) exp(-2j pi (d - rho) tau)
  (`rho` = window-relative offset in [-0.5, 0.5], `tau` = pixel coordinate
  over oversampled dim) is inverted by a Chebyshev expansion in rho:
  1/T = sum_p c_p(tau) P_p(rho). Each retained term becomes one extra
  weighted FFT pass whose per-sample factor P_p(rho_m) rides along with the
  kernel weights; the expansion converges geometrically because T is
  analytic in rho up to a tiny C2 break at rho = 0.

The adjoint mirrors the same term structure factor by factor, so dot tests
pass at machine precision independently of the fit order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.sparse import csr_matrix
from scipy.special import i0 as _i0, i1 as _i1


def beatty_beta(width: float, os: float) -> float:
    """Kernel shape parameter from the Beatty closed form."""
    return float(np.pi * np.sqrt((width / os) ** 2 * (os - 0.5) ** 2 - 0.8))


@dataclass(frozen=True)
class KbParams:
    """Gridding kernel parameters (width in oversampled grid units)."""

    width: int = 4
    os: float = 1.25
    beta: float = field(default=0.0)
    fit_order: int = 10

    def __post_init__(self):
        if self.width < 2 or self.width % 2:
            raise ValueError(f"kernel width must be an even integer >= 2, got {self.width}")
        if self.os <= 1.0:
            raise ValueError(f"oversampling factor must be > 1, got {self.os}")
        if self.beta == 0.0:
            object.__setattr__(self, "beta", beatty_beta(self.width, self.os))
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.fit_order < 2:
            raise ValueError("fit_order must be >= 2")


def kb_eval(u, p: KbParams = KbParams()) -> np.ndarray:
    """Kaiser-Bessel weight I0(beta*sqrt(1-(2u/W)^2)) / I0(beta), zero outside |u| <= W/2."""
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= p.width / 2
    arg = np.clip(1.0 - (2.0 * u / p.width) ** 2, 0.0, None)
    return np.where(inside, _i0(p.beta * np.sqrt(arg)) / _i0(p.beta), 0.0)


def kb_deriv(u, p: KbParams = KbParams()) -> np.ndarray:
    """Analytic derivative of :func:`kb_eval`; zero outside the support.

    Uses I0' = I1 and the small-argument series of I1(x)/x near the support
    edge, where the direct quotient is 0/0 but the limit is finite.
    """
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= p.width / 2
    s2 = np.clip(1.0 - (2.0 * u / p.width) ** 2, 0.0, None)
    s = np.sqrt(s2)
    x = p.beta * s
    # I1(x)/s = beta * I1(x)/x; series for small x: I1(x)/x = 1/2 + x^2/16 + x^4/384
    small = x < 1e-4
    ratio = np.where(
        small,
        p.beta * (0.5 + x**2 / 16.0 + x**4 / 384.0),
        _i1(np.where(small, 1.0, x)) / np.where(small, 1.0, s),
    )
    out = -(4.0 * p.beta * u / (p.width**2 * _i0(p.beta))) * ratio
    return np.where(inside, out, 0.0)


def _taper_coeffs(p: KbParams) -> tuple[float, float]:
    """Polynomial taper coefficients matching kb value, slope and curvature
    at the support edge (kb'(W/2) = -beta^2/(W I0), kb''(W/2) = (beta^4/2 - 2 beta^2)/(W^2 I0))."""
    w, b = p.width, p.beta
    a2 = b**2 / (w**2 * _i0(b))
    kpp = (b**4 / 2.0 - 2.0 * b**2) / (w**2 * _i0(b))
    a4 = -(kpp + 2.0 * a2) / (2.0 * w**2)
    return a2, a4


def _w_eval(u, p: KbParams) -> np.ndarray:
    """Edge-smoothed interpolation weight (C2 at the support boundary)."""
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= p.width / 2
    edge = 1.0 / _i0(p.beta)
    a2, a4 = _taper_coeffs(p)
    q = u**2 - (p.width / 2) ** 2
    w = kb_eval(u, p) - edge + a2 * q + a4 * q**2
    return np.where(inside, w, 0.0)


def _w_deriv(u, p: KbParams) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= p.width / 2
    a2, a4 = _taper_coeffs(p)
    q = u**2 - (p.width / 2) ** 2
    return np.where(inside, kb_deriv(u, p) + 2.0 * a2 * u + 4.0 * a4 * u * q, 0.0)


def _os_dim(n: int, os: float) -> int:
    g = int(round(os * n))
    return g + (g % 2)


def _cheb_basis(rho: np.ndarray, order: int, deriv: bool = False):
    """Chebyshev polynomials of z = 2*rho (rho in [-0.5, 0.5]); shape (order, ...)."""
    z = 2.0 * np.asarray(rho, dtype=np.float64)
    t = np.empty((order,) + z.shape)
    t[0] = 1.0
    if order > 1:
        t[1] = z
    for k in range(2, order):
        t[k] = 2.0 * z * t[k - 1] - t[k - 2]
    if not deriv:
        return t
    dt = np.empty_like(t)
    dt[0] = 0.0
    if order > 1:
        dt[1] = 1.0
    for k in range(2, order):
        dt[k] = 2.0 * t[k - 1] + 2.0 * z * dt[k - 1] - dt[k - 2]
    return t, dt * 2.0


def _transfer_exact(rho: np.ndarray, tau: np.ndarray, p: KbParams) -> np.ndarray:
    """Per-dimension gridding transfer T(rho, tau); shapes (Nr,), (Nt,) -> (Nr, Nt)."""
    d = np.arange(p.width + 1) - p.width // 2
    u = d[None, None, :] - np.asarray(rho)[:, None, None]
    ph = np.exp(-2j * np.pi * u * np.asarray(tau)[None, :, None])
    return np.sum(_w_eval(u, p) * ph, axis=-1)


# retained cross terms (p, q) beyond the two single-axis families
_CROSS_TERMS = ((1, 1), (1, 2), (2, 1), (2, 2))
_FIT_NODES = 48

_PLAN_CACHE: dict = {}


class GridPlan:
    """Cached per-(shape, KbParams) gridding tables.

    Holds the oversampled dims, the per-dimension Chebyshev coefficient
    tables c_p(tau) of 1/T, the term list (p, q) with combined image-domain
    weights (FFT-shift signs folded in so the hot path uses raw FFTs), and
    the measured fit residual max |fit * T - 1| on a dense rho grid.
    """

    def __init__(self, h: int, w: int, p: KbParams):
        if h < 1 or w < 1:
            raise ValueError(f"degenerate image dims ({h}, {w})")
        self.h, self.w, self.params = h, w, p
        self.gh = _os_dim(h, p.os)
        self.gw = _os_dim(w, p.os)
        cr, res_r = self._fit_dim(h, self.gh, p)
        cc, res_c = self._fit_dim(w, self.gw, p)
        self.fit_residual = max(res_r, res_c)

        order = p.fit_order
        self.terms = [(0, 0)]
        self.terms += [(q, 0) for q in range(1, order)]
        self.terms += [(0, q) for q in range(1, order)]
        self.terms += [t for t in _CROSS_TERMS if t[0] < order and t[1] < order]

        # image-domain weights per term, with the centered-FFT input sign
        # pattern and global phase folded in (valid because gh, gw are even)
        self.pad_r = self.gh // 2 - h // 2
        self.pad_c = self.gw // 2 - w // 2
        sign_r = (-1.0) ** (np.arange(h) + self.pad_r)
        sign_c = (-1.0) ** (np.arange(w) + self.pad_c)
        gphase = (-1.0) ** ((self.gh + self.gw) // 2)
        scale = gphase * np.sqrt(self.gh * self.gw / (h * w))
        self.wimg = np.stack(
            [scale * np.outer(cr[a] * sign_r, cc[b] * sign_c) for (a, b) in self.terms]
        )

    def _fit_dim(self, n, g, p):
        theta = np.pi * (np.arange(_FIT_NODES) + 0.5) / _FIT_NODES
        rho = np.cos(theta) / 2.0
        tau = (np.arange(n) - n // 2) / g
        R = 1.0 / _transfer_exact(rho, tau, p)
        coef = np.empty((p.fit_order, n), dtype=np.complex128)
        for k in range(p.fit_order):
            coef[k] = (2.0 - (k == 0)) / _FIT_NODES * np.sum(
                R * np.cos(k * theta)[:, None], axis=0
            )
        rho_d = np.linspace(-0.5, 0.5, 513)
        fit = np.einsum("pn,pr->rn", coef, _cheb_basis(rho_d, p.fit_order))
        resid = float(np.max(np.abs(fit * _transfer_exact(rho_d, tau, p) - 1.0)))
        return coef, resid


def get_plan(h: int, w: int, p: KbParams) -> GridPlan:
    key = (h, w, p.width, p.os, p.beta, p.fit_order)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = GridPlan(h, w, p)
        _PLAN_CACHE[key] = plan
    return plan


def _check_points(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (M, 2), got {pts.shape}")
    if pts.size and (pts.min() < -0.5 or pts.max() >= 0.5):
        bad = pts[(pts < -0.5).any(axis=1) | (pts >= 0.5).any(axis=1)][0]
        raise ValueError(f"k-space coordinate out of [-0.5, 0.5): {tuple(bad)}")
    return pts


class NufftOperator:
    """Gridding transform bound to one point set; reusable forward/adjoint/VJP.

    Per-point tap data (kernel weights, gather indices, Chebyshev factors)
    is computed once at construction, so repeated applications inside an
    unrolled reconstruction amortize that cost.
    """

    def __init__(self, pts, h: int, w: int, p: KbParams = KbParams()):
        self.pts = _check_points(pts)
        self.params = p
        self.plan = plan = get_plan(h, w, p)
        M = len(self.pts)
        self.m = M
        gx = (self.pts[:, 0] + 0.5) * plan.gh
        gy = (self.pts[:, 1] + 0.5) * plan.gw
        jx0 = np.round(gx).astype(np.int64)
        jy0 = np.round(gy).astype(np.int64)
        d = np.arange(p.width + 1) - p.width // 2
        ux = jx0[:, None] + d[None, :] - gx[:, None]
        uy = jy0[:, None] + d[None, :] - gy[:, None]
        wx = _w_eval(ux, p)
        wy = _w_eval(uy, p)
        ix = (jx0[:, None] + d[None, :]) % plan.gh
        iy = (jy0[:, None] + d[None, :]) % plan.gw
        K = (p.width + 1) ** 2
        flat = (ix[:, :, None] * plan.gw + iy[:, None, :]).reshape(M, K)
        # output-side centered-FFT sign pattern folded into the tap weights
        sgn = (-1.0) ** ((ix[:, :, None] + iy[:, None, :]).reshape(M, K))
        wk = (wx[:, :, None] * wy[:, None, :]).reshape(M, K) * sgn
        dwx = _w_deriv(ux, p)
        dwy = _w_deriv(uy, p)
        wk_dx = (dwx[:, :, None] * wy[:, None, :]).reshape(M, K) * sgn
        wk_dy = (wx[:, :, None] * dwy[:, None, :]).reshape(M, K) * sgn
        # sparse interpolators: rows = oversampled grid bins, cols = points
        n_grid = plan.gh * plan.gw
        rows = flat.ravel()
        cols = np.repeat(np.arange(M), K)
        shape = (n_grid, M)
        self._sp = csr_matrix((wk.ravel(), (rows, cols)), shape=shape)
        self._sp_t = csr_matrix(self._sp.T)
        self._sp_t_dx = csr_matrix(csr_matrix((wk_dx.ravel(), (rows, cols)), shape=shape).T)
        self._sp_t_dy = csr_matrix(csr_matrix((wk_dy.ravel(), (rows, cols)), shape=shape).T)
        bx, dbx = _cheb_basis(gx - jx0, p.fit_order, deriv=True)
        by, dby = _cheb_basis(gy - jy0, p.fit_order, deriv=True)
        self.bb = np.stack([bx[a] * by[b] for (a, b) in plan.terms])     # (T, M)
        self.bb_dx = np.stack([dbx[a] * by[b] for (a, b) in plan.terms])
        self.bb_dy = np.stack([bx[a] * dby[b] for (a, b) in plan.terms])

    # -- internals ---------------------------------------------------------

    def _term_ffts(self, imgs: np.ndarray) -> np.ndarray:
        """FFT of each weighted padded image -> (gh*gw, B*T), grid-major.

        Grid bins lead so the subsequent sparse gather works on contiguous
        columns without internal copies.
        """
        plan = self.plan
        B = imgs.shape[0]
        T = len(plan.terms)
        pads = np.zeros((plan.gh, plan.gw, B * T), dtype=np.complex128)
        pads[plan.pad_r:plan.pad_r + plan.h, plan.pad_c:plan.pad_c + plan.w] = np.einsum(
            "bhw,thw->hwbt", imgs, plan.wimg
        ).reshape(plan.h, plan.w, B * T)
        U = scipy.fft.fft2(pads, axes=(0, 1), norm="ortho", workers=-1)
        return U.reshape(-1, B * T)

    # -- public API --------------------------------------------------------

    def forward(self, img: np.ndarray) -> np.ndarray:
        """Sample the centered unitary spectrum of `img` at the bound points.

        `img` may carry leading batch axes; they are preserved in the output.
        """
        img = np.asarray(img, dtype=np.complex128)
        batch_shape = img.shape[:-2]
        imgs = img.reshape((-1,) + img.shape[-2:])
        B = imgs.shape[0]
        T = len(self.plan.terms)
        U = self._term_ffts(imgs)                            # (n_grid, B*T)
        pt = (self._sp_t @ U).reshape(self.m, B, T)
        out = np.einsum("mbt,tm->bm", pt, self.bb)
        return out.reshape(batch_shape + (self.m,))

    def adjoint(self, vec: np.ndarray) -> np.ndarray:
        """Exact adjoint of :func:`forward` (no density compensation)."""
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape[-1] != self.m:
            raise ValueError(f"vector length {vec.shape[-1]} != {self.m} points")
        plan = self.plan
        batch_shape = vec.shape[:-1]
        v = vec.reshape(-1, self.m)
        B = v.shape[0]
        T = len(plan.terms)
        w = np.einsum("bm,tm->mbt", v, self.bb).reshape(self.m, B * T)
        grids = (self._sp @ w).reshape(plan.gh, plan.gw, B, T)
        u = scipy.fft.ifft2(grids, axes=(0, 1), norm="ortho", workers=-1)
        crop = u[plan.pad_r:plan.pad_r + plan.h, plan.pad_c:plan.pad_c + plan.w]
        out = np.einsum("rcbt,trc->brc", crop, np.conj(plan.wimg), optimize=True)
        return out.reshape(batch_shape + (plan.h, plan.w))

    def coord_vjp(self, img: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        """Gradient of Re<upstream, forward(img)> w.r.t. each (kx, ky).

        Batched leading axes of `img`/`upstream` are summed over (multi-coil
        use accumulates coil contributions). Returns an (M, 2) float array.
        """
        img = np.asarray(img, dtype=np.complex128)
        up = np.asarray(upstream, dtype=np.complex128)
        imgs = img.reshape((-1,) + img.shape[-2:])
        ups = up.reshape(-1, self.m)
        if imgs.shape[0] != ups.shape[0]:
            raise ValueError("img/upstream batch mismatch")
        plan = self.plan
        B = imgs.shape[0]
        T = len(plan.terms)
        U = self._term_ffts(imgs)                            # (n_grid, B*T)
        # d(forward)/d(gx): kernel-weight derivative term plus Chebyshev term
        a0 = (self._sp_t @ U).reshape(self.m, B, T)
        ax = (self._sp_t_dx @ U).reshape(self.m, B, T)
        ay = (self._sp_t_dy @ U).reshape(self.m, B, T)
        dy_dgx = np.einsum("tm,mbt->bm", self.bb, -ax) + np.einsum(
            "tm,mbt->bm", self.bb_dx, a0
        )
        dy_dgy = np.einsum("tm,mbt->bm", self.bb, -ay) + np.einsum(
            "tm,mbt->bm", self.bb_dy, a0
        )
        gkx = plan.gh * np.sum(np.real(np.conj(ups) * dy_dgx), axis=0)
        gky = plan.gw * np.sum(np.real(np.conj(ups) * dy_dgy), axis=0)
        return np.stack([gkx, gky], axis=1)


def nufft_forward(img, pts, p: KbParams = KbParams()) -> np.ndarray:
    """Functional forward transform (builds a one-shot operator)."""
    img = np.asarray(img)
    return NufftOperator(pts, img.shape[-2], img.shape[-1], p).forward(img)


def nufft_adjoint(vec, pts, p: KbParams, h: int, w: int) -> np.ndarray:
    """Functional adjoint transform."""
    return NufftOperator(pts, h, w, p).adjoint(vec)


def nufft_coord_vjp(img, pts, p: KbParams, upstream) -> np.ndarray:
    """Functional coordinate VJP; see :meth:`NufftOperator.coord_vjp`."""
    img = np.asarray(img)
    return NufftOperator(pts, img.shape[-2], img.shape[-1], p).coord_vjp(img, upstream)
