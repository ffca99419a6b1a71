"""Parametric multipath channels and the subband eigenvector pipeline.

The generator is a small clustered-delay stand-in: an exponential power-delay
profile, one angular cluster per tap, Laplacian ray spread around the cluster
mean, and CN(0,1) ray gains. Channels are arrays of shape (N_r, N_t, N_d);
frequency responses are (N_r, N_t, N_sc). Leading batch axes are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import NumericalError, RngStream, complex_gaussian

EIG_TOL = 1e-12
EIG_MAXITER = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    """Per-UE large-scale parameters; angles in radians."""

    n_h: int
    n_v: int
    n_r: int
    tap_powers: tuple[float, ...]
    tap_azimuth: tuple[float, ...]
    tap_zenith: tuple[float, ...]
    azimuth_spread: float = 0.1
    zenith_spread: float = 0.05
    rays_per_tap: int = 8
    dual_pol: bool = False
    scenario_id: str = ""

    def __post_init__(self):
        p = np.asarray(self.tap_powers, dtype=float)
        if p.size < 1 or np.any(p <= 0):
            raise ValueError("tap powers must be positive and nonempty")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"tap powers must sum to 1, got {p.sum()!r}")
        if not len(self.tap_azimuth) == len(self.tap_zenith) == p.size:
            raise ValueError("need one cluster angle pair per tap")
        if self.azimuth_spread <= 0 or self.zenith_spread <= 0:
            raise ValueError("angular spreads must be positive")
        if self.rays_per_tap < 1:
            raise ValueError("need at least one ray per tap")

    @property
    def n_t(self) -> int:
        return self.n_h * self.n_v * (2 if self.dual_pol else 1)

    @property
    def n_d(self) -> int:
        return len(self.tap_powers)


@dataclass(frozen=True)
class ScenarioPreset:
    """Distribution of UE configurations within one deployment scenario."""

    name: str
    n_d: int
    decay: float  # e-folding length of the power-delay profile, in taps
    azimuth_center: float
    azimuth_width: float  # UE cluster means drawn uniformly over this width
    zenith_center: float = np.pi / 2
    zenith_width: float = 0.2
    tap_jitter: float = 0.15  # per-tap cluster offset around the UE mean
    azimuth_spread: float = 0.08
    zenith_spread: float = 0.04
    rays_per_tap: int = 8


# Short and long delay-spread presets; qualitative stand-ins for CDL-C30 / CDL-A300.
# UE cluster means cover a 120 degree sector, so neither scenario favours a
# particular subset of beams.
SECTOR = 2 * np.pi / 3
PRESETS = {
    "short_delay": ScenarioPreset("short_delay", n_d=4, decay=0.7, azimuth_center=0.0, azimuth_width=SECTOR),
    "long_delay": ScenarioPreset(
        "long_delay", n_d=8, decay=3.0, azimuth_center=0.0, azimuth_width=SECTOR, tap_jitter=0.3
    ),
}


def exponential_pdp(n_d: int, decay: float) -> tuple[float, ...]:
    p = np.exp(-np.arange(n_d) / decay)
    return tuple(float(x) for x in p / p.sum())


def make_ue_config(
    preset: ScenarioPreset, n_h: int, n_v: int, n_r: int, rng: RngStream, dual_pol: bool = False
) -> ScenarioConfig:
    """Draw one UE's cluster angles from a scenario preset."""
    gen = rng.generator()
    az = preset.azimuth_center + preset.azimuth_width * (gen.random() - 0.5)
    zen = preset.zenith_center + preset.zenith_width * (gen.random() - 0.5)
    tap_az = az + preset.tap_jitter * gen.standard_normal(preset.n_d)
    tap_zen = zen + 0.5 * preset.tap_jitter * gen.standard_normal(preset.n_d)
    return ScenarioConfig(
        n_h=n_h,
        n_v=n_v,
        n_r=n_r,
        tap_powers=exponential_pdp(preset.n_d, preset.decay),
        tap_azimuth=tuple(float(a) for a in tap_az),
        tap_zenith=tuple(float(z) for z in tap_zen),
        azimuth_spread=preset.azimuth_spread,
        zenith_spread=preset.zenith_spread,
        rays_per_tap=preset.rays_per_tap,
        dual_pol=dual_pol,
        scenario_id=preset.name,
    )


def tx_steering(n_h: int, n_v: int, azimuth, zenith) -> np.ndarray:
    """Unit-modulus UPA responses, shape (..., N_h * N_v), horizontal index outer."""
    u = np.sin(zenith) * np.sin(azimuth)
    v = np.cos(zenith)
    a_h = np.exp(1j * np.pi * np.multiply.outer(u, np.arange(n_h)))
    a_v = np.exp(1j * np.pi * np.multiply.outer(v, np.arange(n_v)))
    return (a_h[..., :, None] * a_v[..., None, :]).reshape(*np.shape(u), n_h * n_v)


def rx_steering(n_r: int, angle) -> np.ndarray:
    return np.exp(1j * np.pi * np.multiply.outer(np.sin(angle), np.arange(n_r)))


def gen_multipath_channel(cfg: ScenarioConfig, rng: RngStream | np.random.Generator) -> np.ndarray:
    """One time-domain channel realization, ``E ||H||_F^2 = N_r N_t``."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    n_d, n_rays = cfg.n_d, cfg.rays_per_tap
    az = np.asarray(cfg.tap_azimuth)[:, None] + gen.laplace(0.0, cfg.azimuth_spread, (n_d, n_rays))
    zen = np.asarray(cfg.tap_zenith)[:, None] + gen.laplace(0.0, cfg.zenith_spread, (n_d, n_rays))
    aoa = gen.uniform(-np.pi / 2, np.pi / 2, (n_d, n_rays))
    a_t = tx_steering(cfg.n_h, cfg.n_v, az, zen)  # (n_d, rays, N_h N_v)
    a_r = rx_steering(cfg.n_r, aoa)  # (n_d, rays, N_r)
    scale = np.sqrt(np.asarray(cfg.tap_powers) / n_rays)[:, None]
    if cfg.dual_pol:
        g = complex_gaussian(gen, (n_d, n_rays, 2)) * scale[..., None]
        h_pol = np.einsum("drp,dri,drt->dipt", g, a_r, a_t)
        h = h_pol.reshape(n_d, cfg.n_r, cfg.n_t)
    else:
        g = complex_gaussian(gen, (n_d, n_rays)) * scale
        h = np.einsum("dr,dri,drt->dit", g, a_r, a_t)
    return np.ascontiguousarray(np.moveaxis(h, 0, -1))


def gen_ue_channels(cfg: ScenarioConfig, n_slot: int, rng: RngStream) -> np.ndarray:
    """``n_slot`` i.i.d. realizations for one UE, shape (n_slot, N_r, N_t, N_d)."""
    gen = rng.generator()
    return np.stack([gen_multipath_channel(cfg, gen) for _ in range(n_slot)])


def gen_population(
    preset: ScenarioPreset,
    n_h: int,
    n_v: int,
    n_r: int,
    n_ue: int,
    n_slot: int,
    rng: RngStream,
    dual_pol: bool = False,
) -> list[np.ndarray]:
    """Channels for ``n_ue`` UEs of one scenario; UE ``q`` uses ``rng.child(q, *)``."""
    out = []
    for q in range(n_ue):
        ue = make_ue_config(preset, n_h, n_v, n_r, rng.child(q, 0), dual_pol)
        out.append(gen_ue_channels(ue, n_slot, rng.child(q, 1)))
    return out


def time_to_freq(h: np.ndarray, n_sc: int) -> np.ndarray:
    """``H_k = sum_d H_d exp(-j 2 pi k d / N_sc)`` over the trailing delay axis."""
    n_d = h.shape[-1]
    if n_sc < n_d:
        raise ValueError(f"need N_sc >= N_d, got {n_sc} < {n_d}")
    return np.fft.fft(h, n=n_sc, axis=-1)


def subband_covariances(h_f: np.ndarray, n_gran: int) -> np.ndarray:
    """``A_l = (1/N_gran) sum_k H_k^H H_k`` per subband, shape (..., N_sb, N_t, N_t)."""
    *lead, n_r, n_t, n_sc = h_f.shape
    if n_gran < 1 or n_sc % n_gran:
        raise ValueError(f"N_sc={n_sc} is not divisible by N_gran={n_gran}")
    blocks = h_f.reshape(*lead, n_r, n_t, n_sc // n_gran, n_gran)
    return np.einsum("...rtlg,...rslg->...lts", blocks.conj(), blocks) / n_gran


def canonical_phase(w: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive."""
    idx = np.argmax(np.abs(w), axis=-2)
    pivot = np.take_along_axis(w, idx[..., None, :], axis=-2)
    out = w * (pivot.conj() / np.abs(pivot))
    np.put_along_axis(out, idx[..., None, :], np.abs(pivot), axis=-2)
    return out


def extract_csi(h_f: np.ndarray, n_gran: int) -> tuple[np.ndarray, np.ndarray]:
    """Principal eigenvector and eigenvalue of every subband.

    Returns ``(W, lam)`` with ``W`` of shape (..., N_t, N_sb), unit-norm
    phase-canonical columns, and ``lam`` of shape (..., N_sb).
    """
    a = subband_covariances(h_f, n_gran)
    lead, n_sb, n_t = a.shape[:-3], a.shape[-3], a.shape[-1]
    flat = np.ascontiguousarray(a.reshape(-1, n_t, n_t))
    vecs, vals, iters = kernels.principal_eigh(flat, EIG_TOL, EIG_MAXITER)
    if np.any(iters < 0):
        bad = int(np.flatnonzero(iters < 0)[0])
        raise NumericalError(f"eigen-solver did not converge on subband {bad % n_sb}")
    w = np.swapaxes(vecs.reshape(*lead, n_sb, n_t), -1, -2)
    return canonical_phase(w), vals.reshape(*lead, n_sb)


def channels_to_csi(h: np.ndarray, n_sc: int, n_gran: int) -> np.ndarray:
    """Time-domain channels -> CSI matrices, keeping leading axes."""
    w, _ = extract_csi(time_to_freq(h, n_sc), n_gran)
    return w
