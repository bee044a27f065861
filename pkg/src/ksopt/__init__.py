"""Joint optimization of non-Cartesian k-space sampling and unrolled reconstruction.

The package is organized around a differentiable gridding transform
(:mod:`ksopt.nufft`), sampling-pattern generators (:mod:`ksopt.patterns`),
a multi-coil acquisition model (:mod:`ksopt.acquisition`), unrolled and
compressed-sensing decoders (:mod:`ksopt.recon`), hand-written reverse-mode
gradients (:mod:`ksopt.grad`) and an Adam-based joint trainer
(:mod:`ksopt.trainer`).
"""

__version__ = "0.1.0"
