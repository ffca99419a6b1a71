"""Spatial and frequency orthogonal basis construction (DFT, SVD, Gram-Schmidt)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .core import NumericalError, RngStream, complex_gaussian

METHODS = ("dft", "svd", "smt")
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class BasisSet:
    """``spatial`` has shape (P, N_t, N_t); ``frequency`` has shape (N_sb, N_sb)."""

    spatial: np.ndarray
    frequency: np.ndarray
    method: str
    oversampling: tuple[int, int] | None = None

    @property
    def n_groups(self) -> int:
        return self.spatial.shape[0]

    @property
    def n_t(self) -> int:
        return self.spatial.shape[1]

    @property
    def n_sb(self) -> int:
        return self.frequency.shape[0]

    def group(self, p: int) -> np.ndarray:
        """Spatial group by 1-based index."""
        if not 1 <= p <= self.n_groups:
            raise IndexError(f"group index {p} outside 1..{self.n_groups}")
        return self.spatial[p - 1]

    def max_unitarity_residual(self) -> float:
        return max(
            max(unitarity_residual(s) for s in self.spatial),
            unitarity_residual(self.frequency),
        )


def unitarity_residual(u: np.ndarray) -> float:
    """``max |U^H U - I|``."""
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def _dual_pol(groups: np.ndarray) -> np.ndarray:
    p, n, _ = groups.shape
    out = np.zeros((p, 2 * n, 2 * n), dtype=np.complex128)
    out[:, :n, :n] = groups
    out[:, n:, n:] = groups
    return out


def steering_vector(n: int, index: int, oversampling: int = 1) -> np.ndarray:
    """Unnormalized DFT steering vector ``exp(j 2 pi k index / (n O))``, k = 0..n-1."""
    k = np.arange(n)
    return np.exp(2j * np.pi * k * index / (n * oversampling))


def dft_basis(
    n_h: int, n_v: int, n_sb: int, o_h: int = 1, o_v: int = 1, dual_pol: bool = False
) -> BasisSet:
    """Oversampled DFT grid split into ``O_h * O_v`` orthogonal groups.

    Group ``(oh, ov)`` (flattened as ``oh * O_v + ov``) holds the beams
    ``x = oh + i O_h``, ``y = ov + k O_v``; column ``i * N_v + k`` is
    ``a_h(x) kron a_v(y)`` scaled to unit norm.
    """
    for name, val in (("n_h", n_h), ("n_v", n_v), ("n_sb", n_sb), ("o_h", o_h), ("o_v", o_v)):
        if val < 1:
            raise ValueError(f"{name} must be >= 1, got {val}")
    n_t = n_h * n_v
    groups = np.empty((o_h * o_v, n_t, n_t), dtype=np.complex128)
    for oh in range(o_h):
        for ov in range(o_v):
            cols = [
                np.kron(steering_vector(n_h, oh + i * o_h, o_h), steering_vector(n_v, ov + k * o_v, o_v))
                for i in range(n_h)
                for k in range(n_v)
            ]
            groups[oh * o_v + ov] = np.stack(cols, axis=1) / np.sqrt(n_t)
    freq = np.stack([steering_vector(n_sb, l) for l in range(n_sb)], axis=1) / np.sqrt(n_sb)
    if dual_pol:
        groups = _dual_pol(groups)
    return BasisSet(groups, freq, "dft", (o_h, o_v))


def svd_unitary(x: np.ndarray) -> np.ndarray:
    """Left singular basis of a square matrix."""
    u, _, _ = np.linalg.svd(x)
    return u


def smt_unitary(x: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of a square matrix by modified Gram-Schmidt."""
    q, pivot = kernels.mgs(np.asarray(x, dtype=np.complex128))
    if pivot < 1e-12:
        raise NumericalError(f"rank-deficient input to Gram-Schmidt (pivot {pivot:.3g})")
    return q


def _random_unitary(rng: RngStream, n: int, factor: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    for attempt in range(2):
        x = complex_gaussian(rng.child(attempt), (n, n))
        try:
            return factor(x)
        except (np.linalg.LinAlgError, NumericalError):
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def _random_basis(n_h, n_v, n_sb, p, rng, factor, method, dual_pol):
    if p < 1:
        raise ValueError(f"need at least one group, got P={p}")
    groups = np.empty((p, n_h * n_v, n_h * n_v), dtype=np.complex128)
    for g in range(p):
        u_h = _random_unitary(rng.child(g, 0), n_h, factor)
        u_v = _random_unitary(rng.child(g, 1), n_v, factor)
        groups[g] = np.kron(u_h, u_v)
    freq = _random_unitary(rng.child(p, 2), n_sb, factor)
    if dual_pol:
        groups = _dual_pol(groups)
    return BasisSet(groups, freq, method)


def svd_basis(n_h: int, n_v: int, n_sb: int, p: int, rng: RngStream, dual_pol: bool = False) -> BasisSet:
    """Groups ``U_h kron U_v`` from left singular bases of CN(0,1) draws."""
    return _random_basis(n_h, n_v, n_sb, p, rng, svd_unitary, "svd", dual_pol)


def smt_basis(n_h: int, n_v: int, n_sb: int, p: int, rng: RngStream, dual_pol: bool = False) -> BasisSet:
    """Same as :func:`svd_basis` but orthonormalizing by Gram-Schmidt."""
    return _random_basis(n_h, n_v, n_sb, p, rng, smt_unitary, "smt", dual_pol)


def make_basis(
    method: str,
    n_h: int,
    n_v: int,
    n_sb: int,
    o_h: int = 2,
    o_v: int = 2,
    p: int | None = None,
    rng: RngStream | None = None,
    dual_pol: bool = False,
) -> BasisSet:
    """Dispatch on ``method``; random methods default to ``P = O_h * O_v`` groups."""
    if method == "dft":
        return dft_basis(n_h, n_v, n_sb, o_h, o_v, dual_pol)
    if method not in METHODS:
        raise ValueError(f"unknown basis method {method!r}")
    if rng is None:
        raise ValueError(f"{method} basis needs an RNG stream")
    p = o_h * o_v if p is None else p
    build = svd_basis if method == "svd" else smt_basis
    return build(n_h, n_v, n_sb, p, rng, dual_pol)
