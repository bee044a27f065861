"""Multi-coil acquisition model: coil-weighted gridding with noise injection.

Forward: column i of the measurement array samples the spectrum of
S_i * x at the pattern points. The adjoint combines coil columns with
conjugate sensitivities (SENSE combination under sum-of-squares
normalized maps). No density compensation is applied anywhere; the
reconstruction is expected to compensate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CoilSet
from .numerics import RngStream, cgauss
from .nufft import KbParams, NufftOperator
from .patterns import SamplingPattern


@dataclass
class KspaceData:
    samples: np.ndarray       # (M, C) complex
    sigma_used: float
    pattern_ref: str = ""


class AcquisitionModel:
    """Pattern + coils bound into a reusable linear operator A and its adjoint."""

    def __init__(self, pattern: SamplingPattern, coils: CoilSet,
                 kb: KbParams = KbParams(), sigma: float = 0.0):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        h, w = coils.shape
        if (pattern.grid_h, pattern.grid_w) != (h, w):
            raise ValueError(
                f"pattern grid {(pattern.grid_h, pattern.grid_w)} != coil dims {(h, w)}"
            )
        self.pattern = pattern
        self.coils = coils
        self.kb = kb
        self.sigma = float(sigma)
        self.op = NufftOperator(pattern.expanded_points(), h, w, kb)
        self.m = self.op.m
        self.c = coils.count

    def forward(self, img: np.ndarray) -> KspaceData:
        """Noiseless measurements, one column per coil."""
        img = np.asarray(img, dtype=np.complex128)
        if img.shape != self.coils.shape:
            raise ValueError(f"image shape {img.shape} != {self.coils.shape}")
        cols = [self.op.forward(self.coils.maps[i] * img) for i in range(self.c)]
        return KspaceData(np.stack(cols, axis=1), sigma_used=0.0)

    def measure(self, img: np.ndarray, rng: RngStream) -> KspaceData:
        """Forward plus a fresh i.i.d. complex Gaussian noise draw."""
        data = self.forward(img)
        noise = cgauss(rng, self.m * self.c, self.sigma).reshape(self.m, self.c)
        return KspaceData(data.samples + noise, sigma_used=self.sigma)

    def adjoint(self, data) -> np.ndarray:
        """SENSE-combined adjoint: sum_i conj(S_i) * nufft_adjoint(column i)."""
        samples = data.samples if isinstance(data, KspaceData) else np.asarray(data)
        if samples.shape != (self.m, self.c):
            raise ValueError(f"data shape {samples.shape} != ({self.m}, {self.c})")
        out = np.zeros(self.coils.shape, dtype=np.complex128)
        for i in range(self.c):
            out += np.conj(self.coils.maps[i]) * self.op.adjoint(samples[:, i])
        return out

    def normal_op_norm(self, n_iters: int = 20, seed: int = 1234) -> float:
        """Largest eigenvalue of A^H A estimated by power iteration."""
        rng = RngStream(seed)
        v = (rng.normal(np.prod(self.coils.shape))
             + 1j * rng.normal(np.prod(self.coils.shape))).reshape(self.coils.shape)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(n_iters):
            w = self.adjoint(self.forward(v))
            lam = float(np.real(np.vdot(v, w)))
            nw = np.linalg.norm(w)
            if nw == 0:
                return 0.0
            v = w / nw
        return lam

    def coord_vjp(self, img: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        """d Re<upstream, A(phi) img> / d(kx, ky), summed over coils -> (M, 2)."""
        imgs = np.stack([self.coils.maps[i] * img for i in range(self.c)])
        ups = np.asarray(upstream)
        return self.op.coord_vjp(imgs, np.moveaxis(ups, -1, 0))

    def coord_vjp_adjoint(self, data_vec: np.ndarray, upstream_img: np.ndarray) -> np.ndarray:
        """d Re<upstream_img, A(phi)^H data_vec> / d(kx, ky) -> (M, 2).

        Uses Re<u, A^H y> = Re<A u, y>, so the same kernel-derivative path
        as the forward VJP applies with the roles swapped.
        """
        imgs = np.stack([self.coils.maps[i] * upstream_img for i in range(self.c)])
        return self.op.coord_vjp(imgs, np.moveaxis(np.asarray(data_vec), -1, 0))
