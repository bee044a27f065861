"""Independent brute-force oracles used by the test suite.

These stay deliberately naive (direct summation, O(N^2) / O(N*M) loops) so
they share no code path with the implementations they check.
"""

import numpy as np


def dft2_centered_oracle(img):
    """Directly summed centered unitary 2-D DFT."""
    img = np.asarray(img, dtype=np.complex128)
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for p in range(h):
        for q in range(w):
            acc = 0.0 + 0.0j
            for r in range(h):
                for c in range(w):
                    ph = -2j * np.pi * (
                        (p - h // 2) * (r - h // 2) / h + (q - w // 2) * (c - w // 2) / w
                    )
                    acc += img[r, c] * np.exp(ph)
            out[p, q] = acc
    return out / np.sqrt(h * w)


def nudft_oracle(img, pts):
    """Directly summed non-uniform DFT at continuous coordinates."""
    img = np.asarray(img, dtype=np.complex128)
    h, w = img.shape
    pts = np.asarray(pts, dtype=np.float64)
    r = np.arange(h) - h // 2
    c = np.arange(w) - w // 2
    out = np.zeros(len(pts), dtype=np.complex128)
    for m, (kx, ky) in enumerate(pts):
        ph = np.exp(-2j * np.pi * (kx * r[:, None] + ky * c[None, :]))
        out[m] = np.sum(img * ph)
    return out / np.sqrt(h * w)


def nudft_adjoint_oracle(vec, pts, h, w):
    """Exact adjoint of :func:`nudft_oracle`."""
    vec = np.asarray(vec, dtype=np.complex128)
    pts = np.asarray(pts, dtype=np.float64)
    r = np.arange(h) - h // 2
    c = np.arange(w) - w // 2
    out = np.zeros((h, w), dtype=np.complex128)
    for m, (kx, ky) in enumerate(pts):
        out += vec[m] * np.exp(+2j * np.pi * (kx * r[:, None] + ky * c[None, :]))
    return out / np.sqrt(h * w)


def inner_oracle(a, b):
    """Naive summation inner product sum(a_k * conj(b_k))."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    acc = 0.0 + 0.0j
    for x, y in zip(a, b):
        acc += x * np.conj(y)
    return acc


def central_diff(fn, x0, h=1e-5):
    """Central finite-difference gradient of scalar fn at flat float array x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g
