"""Synthetic meta task environment built from shared spatial/frequency bases.

Index sets in :class:`TaskSpec` and :class:`UeSpec` are 1-based, as are group
indices; conversion to array offsets happens at the point of use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .basis import BasisSet
from .core import ConfigError, DegenerateInputError, NumericalError, RngStream, complex_gaussian, sgcs


@dataclass(frozen=True)
class MetaEnvConfig:
    basis: BasisSet
    n_tasks: int = 8000
    max_ue: int = 16
    max_slot: int = 16
    l_task: int = 6
    m_task: int = 6
    alpha: float = 0.75
    beta: float = 0.75
    # (S~, F~): restrict task supports to the first S~ spatial / F~ frequency vectors
    incomplete_basis: tuple[int, int] | None = None

    def __post_init__(self):
        n_t, n_sb = self.basis.n_t, self.basis.n_sb
        if self.n_tasks < 0:
            raise ConfigError(f"n_tasks must be >= 0, got {self.n_tasks}")
        if self.max_ue < 1 or self.max_slot < 1:
            raise ConfigError("max_ue and max_slot must be >= 1")
        if not 1 <= self.l_task <= n_t:
            raise ConfigError(f"l_task must lie in 1..{n_t}, got {self.l_task}")
        if not 1 <= self.m_task <= n_sb:
            raise ConfigError(f"m_task must lie in 1..{n_sb}, got {self.m_task}")
        if not (0 < self.alpha <= 1 and 0 < self.beta <= 1):
            raise ConfigError("alpha and beta must lie in (0, 1]")
        if self.incomplete_basis is not None:
            s_pool, f_pool = self.incomplete_basis
            if not (1 <= s_pool <= n_t and 1 <= f_pool <= n_sb):
                raise ConfigError(f"incomplete basis {self.incomplete_basis} exceeds ({n_t}, {n_sb})")

    @property
    def pools(self) -> tuple[int, int]:
        if self.incomplete_basis is None:
            return self.basis.n_t, self.basis.n_sb
        return self.incomplete_basis


@dataclass(frozen=True)
class UeSpec:
    s_ue: tuple[int, ...]
    f_ue: tuple[int, ...]

    @property
    def l_m(self) -> int:
        return len(self.s_ue)

    @property
    def m_m(self) -> int:
        return len(self.f_ue)


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    group: int
    s_task: tuple[int, ...]
    f_task: tuple[int, ...]
    n_ue: int
    n_slot: int
    ues: tuple[UeSpec, ...] = field(default=())


@dataclass
class Task:
    spec: TaskSpec
    samples: np.ndarray  # (n_ue * n_slot, N_t, N_sb), UE-major

    def __len__(self) -> int:
        return self.samples.shape[0]


def _draw(gen: np.random.Generator, pool, k: int) -> tuple[int, ...]:
    pool = np.asarray(pool)
    if k > pool.size:
        raise ConfigError(f"cannot draw {k} distinct indices from a pool of {pool.size}")
    return tuple(int(i) for i in np.sort(gen.choice(pool, size=k, replace=False)))


def _scaled(frac: float, n: int) -> int:
    return max(1, math.ceil(round(frac * n, 9)))


def sample_task_spec(cfg: MetaEnvConfig, rng: RngStream, j: int) -> TaskSpec:
    """Draw the task/UE structure of task ``j`` from ``rng.child(j, 0)``."""
    gen = rng.child(j, 0).generator()
    n_ue = int(gen.integers(1, cfg.max_ue + 1))
    n_slot = int(gen.integers(1, cfg.max_slot + 1))
    group = int(gen.integers(1, cfg.basis.n_groups + 1))
    s_pool, f_pool = cfg.pools
    s_task = _draw(gen, np.arange(1, s_pool + 1), cfg.l_task)
    f_task = _draw(gen, np.arange(1, f_pool + 1), cfg.m_task)
    ues = []
    for _ in range(n_ue):
        l_m = int(gen.integers(1, cfg.l_task + 1))
        m_m = int(gen.integers(1, cfg.m_task + 1))
        ues.append(UeSpec(_draw(gen, s_task, l_m), _draw(gen, f_task, m_m)))
    return TaskSpec(j, group, s_task, f_task, n_ue, n_slot, tuple(ues))


def generate_csi_sample(
    cfg: MetaEnvConfig, spec: TaskSpec, ue: UeSpec, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """One slot: ``S_p(:, S) E F(:, F)^H`` with CN(0,1) ``E``, columns normalized."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    s_sel = np.asarray(_draw(gen, ue.s_ue, _scaled(cfg.alpha, ue.l_m))) - 1
    f_sel = np.asarray(_draw(gen, ue.f_ue, _scaled(cfg.beta, ue.m_m))) - 1
    s_mat = cfg.basis.group(spec.group)[:, s_sel]
    f_mat = cfg.basis.frequency[:, f_sel]
    for _attempt in range(2):
        e_hat = complex_gaussian(gen, (s_sel.size, f_sel.size))
        w = s_mat @ e_hat @ f_mat.conj().T
        norms = np.sqrt(np.sum(np.abs(w) ** 2, axis=0))
        if np.all(norms >= 1e-300):
            return w / norms
    raise DegenerateInputError(f"zero subband column in task {spec.task_id} after resampling")


def generate_task(cfg: MetaEnvConfig, rng: RngStream, j: int) -> Task:
    spec = sample_task_spec(cfg, rng, j)
    out = np.empty((spec.n_ue * spec.n_slot, cfg.basis.n_t, cfg.basis.n_sb), dtype=np.complex128)
    k = 0
    for m, ue in enumerate(spec.ues):
        gen = rng.child(j, 1, m).generator()
        for _ in range(spec.n_slot):
            out[k] = generate_csi_sample(cfg, spec, ue, gen)
            k += 1
    return Task(spec, out)


def build_meta_env(cfg: MetaEnvConfig, rng: RngStream) -> Iterator[Task]:
    """Lazily yield tasks ``0 .. n_tasks-1``; each depends only on ``(rng, j)``."""
    for j in range(cfg.n_tasks):
        yield generate_task(cfg, rng, j)


@dataclass(frozen=True)
class BoundCheck:
    """Both sides of the dominant-support approximation bound.

    ``rhs`` uses the ``(N_t - |S|)(N_sb - |F|)`` count of neglected
    coefficients; ``rhs_full`` counts every coefficient outside ``S x F``.
    """

    lhs: float
    rhs: float
    holds: bool
    rhs_full: float
    holds_full: bool
    off_support_energy: float


def theorem1_bound_check(
    w: np.ndarray, basis: BasisSet, p: int, s_set, f_set, sigma: float
) -> BoundCheck:
    """Compare ``1 - SGCS(W, S E' F^H)`` with ``(2/N_sb) S_bar F_bar sigma^2``.

    ``E' `` keeps the coefficients of ``E = S_p^H W F`` on ``s_set x f_set``
    (1-based) and zeroes the rest. The reconstruction is not renormalized.
    """
    s_p = basis.group(p)
    f = basis.frequency
    n_t, n_sb = w.shape
    s_idx = np.asarray(sorted(set(int(i) for i in s_set))) - 1
    f_idx = np.asarray(sorted(set(int(i) for i in f_set))) - 1
    if s_idx.size == 0 or f_idx.size == 0:
        raise ValueError("support sets must be nonempty")
    if s_idx.min() < 0 or s_idx.max() >= n_t or f_idx.min() < 0 or f_idx.max() >= n_sb:
        raise ValueError("support index out of range")
    e = s_p.conj().T @ w @ f
    mask = np.zeros(e.shape, dtype=bool)
    mask[np.ix_(s_idx, f_idx)] = True
    off = np.where(mask, 0.0, np.abs(e))
    if off.max() > sigma * (1 + 1e-12):
        v, l = np.unravel_index(np.argmax(off), off.shape)
        raise ValueError(
            f"|E({v + 1},{l + 1})| = {off[v, l]:.6g} exceeds sigma = {sigma} outside the support"
        )
    w_hat = s_p @ np.where(mask, e, 0.0) @ f.conj().T
    lhs = 1.0 - sgcs(w, w_hat)
    s_bar, f_bar = n_t - s_idx.size, n_sb - f_idx.size
    rhs = 2.0 / n_sb * s_bar * f_bar * sigma**2
    rhs_full = 2.0 / n_sb * (n_t * n_sb - s_idx.size * f_idx.size) * sigma**2
    return BoundCheck(
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs + 1e-12,
        rhs_full=rhs_full,
        holds_full=lhs <= rhs_full + 1e-12,
        off_support_energy=float(np.sum(off**2)),
    )


def random_bound_instance(basis: BasisSet, rng: RngStream, sigma: float, max_tries: int = 200):
    """Draw ``(W, p, S, F)`` meeting the bound precondition.

    Support sizes are uniform over ``1..N_t`` and ``1..N_sb``; on-support
    coefficients are CN(0,1), off-support ones have uniform magnitude in
    ``[0, sigma]`` and uniform phase. Off-support coefficients are shrunk
    until column normalization keeps them within ``sigma``.

    A unit-norm subband outside ``F`` would need ``N_t`` coefficients of
    magnitude at most ``sigma``, which is impossible when ``N_t sigma^2 < 1``;
    in that regime ``F`` is always the full subband set.
    """
    gen = rng.generator()
    n_t, n_sb = basis.n_t, basis.n_sb
    p = int(gen.integers(1, basis.n_groups + 1))
    s_size = int(gen.integers(1, n_t + 1))
    f_size = int(gen.integers(1, n_sb + 1)) if n_t * sigma**2 >= 1.0 else n_sb
    s_set = _draw(gen, np.arange(1, n_t + 1), s_size)
    f_set = _draw(gen, np.arange(1, n_sb + 1), f_size)
    mask = np.zeros((n_t, n_sb), dtype=bool)
    mask[np.ix_(np.asarray(s_set) - 1, np.asarray(f_set) - 1)] = True
    core = complex_gaussian(gen, (n_t, n_sb))
    off = sigma * gen.random((n_t, n_sb)) * np.exp(2j * np.pi * gen.random((n_t, n_sb)))
    s_p, f = basis.group(p), basis.frequency
    for _ in range(max_tries):
        w = s_p @ np.where(mask, core, off) @ f.conj().T
        w = w / np.sqrt(np.sum(np.abs(w) ** 2, axis=0))
        e = s_p.conj().T @ w @ f
        if mask.all() or np.abs(e[~mask]).max() <= sigma:
            return w, p, s_set, f_set
        off = off * 0.9
    raise NumericalError("could not satisfy the off-support magnitude constraint")
