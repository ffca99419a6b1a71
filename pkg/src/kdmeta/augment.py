"""Statistics-driven channel augmentation from a handful of seeded channels.

Per UE, the per-delay power and the transmit/receive spatial covariances are
estimated from the seeds; new channels are drawn as coloured Gaussian vectors
and pushed through the usual frequency/eigenvector pipeline.

Vectorization is row-major: element ``(r, t)`` of an ``N_r x N_t`` tap maps to
index ``r * N_t + t``. Under that ordering a channel whose transmit Gram
matrix ``E[H^H H]`` is proportional to ``R_tx`` has vector covariance
``R_rx kron conj(R_tx)``, which is what :attr:`StatProfile.r_joint` stores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import channels_to_csi
from .core import RngStream, complex_gaussian


@dataclass(frozen=True)
class StatProfile:
    power: np.ndarray  # (N_d,)
    r_tx: np.ndarray  # (N_d, N_t, N_t), trace N_t
    r_rx: np.ndarray  # (N_d, N_r, N_r), trace N_r
    ue_id: int = 0
    degenerate: np.ndarray | None = None  # (N_d,) taps with no energy in the seeds

    def __post_init__(self):
        n_d = self.power.shape[0]
        if self.r_tx.shape[0] != n_d or self.r_rx.shape[0] != n_d:
            raise ValueError("power, r_tx and r_rx disagree on the number of taps")
        if np.any(self.power < 0):
            raise ValueError("tap powers must be non-negative")
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(n_d, dtype=bool))
        r = np.stack([np.kron(rx, tx.conj()) for rx, tx in zip(self.r_rx, self.r_tx)])
        r = 0.5 * (r + np.swapaxes(r.conj(), -1, -2))
        vals, vecs = np.linalg.eigh(r)
        object.__setattr__(self, "r_joint", r)
        object.__setattr__(self, "eigvals", np.clip(vals, 0.0, None))
        object.__setattr__(self, "eigvecs", vecs)

    @property
    def n_d(self) -> int:
        return self.power.shape[0]

    @property
    def n_t(self) -> int:
        return self.r_tx.shape[1]

    @property
    def n_r(self) -> int:
        return self.r_rx.shape[1]


def _trace_normalized(g: np.ndarray, n: int) -> tuple[np.ndarray, bool]:
    tr = float(np.real(np.trace(g)))
    if tr <= 0.0:
        return np.eye(n, dtype=np.complex128), True
    r = n * g / tr
    return 0.5 * (r + r.conj().T), False


def estimate_profile(samples, ue_id: int = 0) -> StatProfile:
    """Power-delay profile and trace-normalized covariances from seeded channels.

    ``samples`` is a sequence (or stack) of channels shaped (N_r, N_t, N_d).
    """
    h = np.asarray(samples, dtype=np.complex128)
    if h.ndim != 4 or h.shape[0] < 1:
        raise ValueError(f"expected a nonempty stack of (N_r, N_t, N_d) channels, got {h.shape}")
    n_slot, n_r, n_t, n_d = h.shape
    power = np.sum(np.abs(h) ** 2, axis=(0, 1, 2)) / (n_t * n_r * n_slot)
    g_tx = np.einsum("srtd,srud->dtu", h.conj(), h)
    g_rx = np.einsum("srtd,sqtd->drq", h, h.conj())
    r_tx = np.empty((n_d, n_t, n_t), dtype=np.complex128)
    r_rx = np.empty((n_d, n_r, n_r), dtype=np.complex128)
    degenerate = np.zeros(n_d, dtype=bool)
    for d in range(n_d):
        r_tx[d], bad_t = _trace_normalized(g_tx[d], n_t)
        r_rx[d], bad_r = _trace_normalized(g_rx[d], n_r)
        degenerate[d] = bad_t or bad_r
    power[degenerate] = 0.0
    return StatProfile(power, r_tx, r_rx, ue_id, degenerate)


def vectorize(h: np.ndarray) -> np.ndarray:
    """(..., N_r, N_t) -> (..., N_r * N_t), row-major."""
    return h.reshape(*h.shape[:-2], h.shape[-2] * h.shape[-1])


def unvectorize(x: np.ndarray, n_r: int, n_t: int) -> np.ndarray:
    return x.reshape(*x.shape[:-1], n_r, n_t)


def augment_channels(profile: StatProfile, n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``n`` channels ``sqrt(p_d) U_d D_d^(1/2) n`` per tap, shape (n, N_r, N_t, N_d)."""
    dim = profile.n_r * profile.n_t
    z = complex_gaussian(rng, (n, profile.n_d, dim))
    colour = profile.eigvecs * np.sqrt(profile.eigvals)[:, None, :]  # U D^(1/2)
    h = np.einsum("dij,sdj->sdi", colour, z) * np.sqrt(profile.power)[None, :, None]
    h = unvectorize(h, profile.n_r, profile.n_t)  # (n, N_d, N_r, N_t)
    return np.ascontiguousarray(np.moveaxis(h, 1, -1))


def augment_channel(profile: StatProfile, rng: RngStream | np.random.Generator) -> np.ndarray:
    """One augmented channel of shape (N_r, N_t, N_d)."""
    return augment_channels(profile, 1, rng)[0]


def augment_from_profiles(
    profiles, n_aug: int, rng: RngStream, n_sc: int, n_gran: int
) -> np.ndarray:
    """``len(profiles) * n_aug`` CSI matrices, UE-major; UE ``q`` draws from ``rng.child(q)``."""
    if n_aug < 1:
        raise ValueError(f"n_aug must be >= 1, got {n_aug}")
    out = [
        channels_to_csi(augment_channels(prof, n_aug, rng.child(q)), n_sc, n_gran)
        for q, prof in enumerate(profiles)
    ]
    return np.concatenate(out, axis=0)


def build_target_dataset(seed_channels, n_aug: int, rng: RngStream, n_sc: int, n_gran: int) -> np.ndarray:
    """Estimate one profile per seeded UE and draw ``n_aug`` CSI samples from each."""
    profiles = [estimate_profile(h, ue_id=q) for q, h in enumerate(seed_channels)]
    return augment_from_profiles(profiles, n_aug, rng, n_sc, n_gran)
