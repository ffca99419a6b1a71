"""Shared primitives: error types, seeded RNG streams, CSI validation and SGCS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "NumericalError",
    "RngStream",
    "as_csi",
    "complex_gaussian",
    "normalize_columns",
    "sgcs",
    "sgcs_per_sample",
]

CSI_NORM_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid configuration (bad counts, unknown keys, infeasible sizes)."""


class DegenerateInputError(ValueError):
    """Input that is well-formed but numerically degenerate, e.g. a zero column."""


class NumericalError(ArithmeticError):
    """An iterative solver or factorization failed to produce a usable result."""


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by ``(base_seed, path)``.

    Children are derived by extending the path, so any node of the
    task/UE/slot hierarchy can be regenerated independently of the others.
    """

    base_seed: int
    path: tuple[int, ...] = ()

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.base_seed, self.path + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.base_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def complex_gaussian(rng: RngStream | np.random.Generator, n) -> np.ndarray:
    """Draw CN(0, 1) samples: real and imaginary parts each N(0, 1/2).

    ``n`` may be an int or a shape tuple.
    """
    shape = (n,) if np.isscalar(n) else tuple(n)
    if len(shape) == 0 or min(shape) < 1:
        raise ValueError(f"need at least one sample, got shape {shape}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    draws = gen.standard_normal(shape + (2,))
    return (draws[..., 0] + 1j * draws[..., 1]) * np.sqrt(0.5)


def normalize_columns(w: np.ndarray, tiny: float = 1e-300) -> np.ndarray:
    """Scale every column (last-but-one axis summed) to unit l2 norm."""
    norms = np.sqrt(np.sum(np.abs(w) ** 2, axis=-2, keepdims=True))
    if np.any(norms < tiny):
        raise DegenerateInputError("cannot normalize a zero column")
    return w / norms


def as_csi(w, n_t: int | None = None, n_sb: int | None = None) -> np.ndarray:
    """Validate a CSI matrix (or a stack of them) and return it as complex128."""
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim < 2:
        raise ValueError(f"CSI matrix must be at least 2-D, got shape {w.shape}")
    if n_t is not None and w.shape[-2] != n_t or n_sb is not None and w.shape[-1] != n_sb:
        raise ValueError(f"expected CSI shape (..., {n_t}, {n_sb}), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("CSI matrix has non-finite entries")
    norms = np.sqrt(np.sum(np.abs(w) ** 2, axis=-2))
    if np.max(np.abs(norms - 1.0)) > CSI_NORM_TOL:
        raise ValueError("CSI columns must have unit l2 norm")
    return w


def _check_pair(w, w_hat):
    w = np.asarray(w, dtype=np.complex128)
    w_hat = np.asarray(w_hat, dtype=np.complex128)
    if w.shape != w_hat.shape or w.ndim < 2:
        raise ValueError(f"dimension mismatch: {w.shape} vs {w_hat.shape}")
    if np.any(np.sum(np.abs(w_hat) ** 2, axis=-2) == 0.0):
        raise DegenerateInputError("reconstructed CSI has a zero column")
    if np.any(np.sum(np.abs(w) ** 2, axis=-2) == 0.0):
        raise DegenerateInputError("reference CSI has a zero column")
    return w, w_hat


def sgcs_per_sample(w, w_hat) -> np.ndarray:
    """SGCS of each matrix in a stack of shape ``(batch, N_t, N_sb)``."""
    w, w_hat = _check_pair(w, w_hat)
    squeeze = w.ndim == 2
    if squeeze:
        w, w_hat = w[None], w_hat[None]
    vals = kernels.sgcs_columns(
        np.ascontiguousarray(w.reshape(-1, *w.shape[-2:])),
        np.ascontiguousarray(w_hat.reshape(-1, *w.shape[-2:])),
    ).mean(axis=1)
    vals = vals.reshape(w.shape[:-2])
    return vals[0] if squeeze else vals


def sgcs(w, w_hat) -> float:
    """Squared generalized cosine similarity, averaged over subbands (and samples)."""
    return float(np.mean(sgcs_per_sample(w, w_hat)))
