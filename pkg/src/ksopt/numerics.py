"""Deterministic complex-array primitives: centered unitary FFTs and seeded RNG.

All floating point here is 64-bit. The FFT convention places DC at index
``n // 2`` in every axis ("grid-centered"), and both directions carry the
unitary 1/sqrt(N) normalization so the adjoint of ``fft2c`` is ``ifft2c``.
"""

from __future__ import annotations

import numpy as np
import scipy.fft


def _check_2d(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"zero-sized input rejected: shape {img.shape}")
    return img


def fft2c(img: np.ndarray) -> np.ndarray:
    """Centered, unitary 2-D DFT (DC at the grid center)."""
    img = _check_2d(img)
    return scipy.fft.fftshift(
        scipy.fft.fft2(scipy.fft.ifftshift(img), norm="ortho")
    )


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`; also its adjoint (unitary normalization)."""
    ksp = _check_2d(ksp)
    return scipy.fft.fftshift(
        scipy.fft.ifft2(scipy.fft.ifftshift(ksp), norm="ortho")
    )


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Complex inner product sum(a * conj(b)) over flattened arrays."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return complex(np.sum(a * np.conj(b)))


class RngStream:
    """Counter-based random stream: every draw is a pure function of (seed, counter).

    Each draw call opens a fresh Philox generator keyed by the stream seed
    with the counter placed in the high words, so draws never overlap and the
    sequence is reproducible across platforms regardless of draw sizes.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self.counter = int(counter)

    def _next_gen(self) -> np.random.Generator:
        bg = np.random.Philox(key=self.seed, counter=self.counter << 128)
        self.counter += 1
        return np.random.Generator(bg)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._next_gen().uniform(low, high, size=n)

    def normal(self, n: int) -> np.ndarray:
        return self._next_gen().standard_normal(n)

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        return self._next_gen().integers(low, high, size=n)

    def shuffled(self, items):
        """Deterministically shuffled copy of a sequence."""
        items = list(items)
        perm = self._next_gen().permutation(len(items))
        return [items[i] for i in perm]

    def child(self, index: int) -> "RngStream":
        """Independent stream for worker/record `index`, derived from this seed."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(index),))
        return RngStream(int(ss.generate_state(1, dtype=np.uint64)[0]))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"


def cgauss(rng: RngStream, n: int, sigma: float) -> np.ndarray:
    """I.i.d. circular complex Gaussian draws, variance sigma**2 per complex entry."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        rng._next_gen()  # keep the counter advancing identically
        return np.zeros(n, dtype=np.complex128)
    g = rng._next_gen()
    re_im = g.standard_normal((2, n)) * (sigma / np.sqrt(2.0))
    return re_im[0] + 1j * re_im[1]
