import numpy as np
import pytest

from kdmeta import kernels
from kdmeta.channel import (
    PRESETS,
    ScenarioConfig,
    canonical_phase,
    channels_to_csi,
    exponential_pdp,
    extract_csi,
    gen_multipath_channel,
    gen_population,
    make_ue_config,
    subband_covariances,
    time_to_freq,
    tx_steering,
)
from kdmeta.core import NumericalError, RngStream, complex_gaussian, sgcs_per_sample
from oracles import dft_sum, principal_eigvec_dense


def ue(preset="short_delay", seed=0, **kw):
    return make_ue_config(PRESETS[preset], 4, 2, 2, RngStream(seed), **kw)


def test_pdp_normalized_and_decaying():
    p = np.array(exponential_pdp(8, 3.0))
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(p) < 0)
    assert p[1] / p[0] == pytest.approx(np.exp(-1 / 3.0))


def test_scenario_config_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        ScenarioConfig(4, 2, 2, (0.5, 0.4), (0.0, 0.0), (1.5, 1.5))
    with pytest.raises(ValueError, match="angle"):
        ScenarioConfig(4, 2, 2, (0.5, 0.5), (0.0,), (1.5, 1.5))


def test_steering_unit_modulus_and_layout():
    a = tx_steering(4, 2, 0.3, 1.2)
    assert a.shape == (8,)
    np.testing.assert_allclose(np.abs(a), 1.0)
    # horizontal index is the outer one
    u, v = np.sin(1.2) * np.sin(0.3), np.cos(1.2)
    assert a[2 * 2 + 1] == pytest.approx(np.exp(1j * np.pi * (2 * u + v)))


def test_channel_shape_and_energy():
    cfg = ue("long_delay")
    gen = np.random.default_rng(0)
    h = np.stack([gen_multipath_channel(cfg, gen) for _ in range(2000)])
    assert h.shape == (2000, 2, 8, 8)
    energy = np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2, 3)))
    assert energy == pytest.approx(2 * 8, rel=0.05)
    tap_energy = np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2)), axis=0) / 16
    np.testing.assert_allclose(tap_energy, cfg.tap_powers, rtol=0.15)


def test_dual_pol_channel_shape():
    cfg = ue(dual_pol=True)
    assert cfg.n_t == 16
    assert gen_multipath_channel(cfg, RngStream(0)).shape == (2, 16, 4)


def test_population_deterministic_and_per_ue():
    a = gen_population(PRESETS["short_delay"], 4, 2, 2, 3, 5, RngStream(1))
    b = gen_population(PRESETS["short_delay"], 4, 2, 2, 3, 5, RngStream(1))
    assert len(a) == 3 and a[0].shape == (5, 2, 8, 4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    # UE 1 regenerates alone from its own stream
    c = gen_population(PRESETS["short_delay"], 4, 2, 2, 2, 5, RngStream(1))
    np.testing.assert_array_equal(c[1], a[1])


def test_time_to_freq_matches_sum():
    h = complex_gaussian(RngStream(2), (2, 3, 5))
    np.testing.assert_allclose(time_to_freq(h, 16), dft_sum(h, 16), atol=1e-12)
    with pytest.raises(ValueError):
        time_to_freq(h, 4)


def test_ref_dims_subband_count():
    h = complex_gaussian(RngStream(3), (4, 8, 6))
    w, lam = extract_csi(time_to_freq(h, 624), 48)
    assert w.shape == (8, 13) and lam.shape == (13,)


def test_subband_covariance_indivisible():
    with pytest.raises(ValueError, match="divisible"):
        subband_covariances(np.zeros((2, 4, 30), dtype=complex), 4)


def test_extract_csi_matches_dense_oracle():
    h = complex_gaussian(RngStream(4), (2, 8, 4))
    h_f = time_to_freq(h, 32)
    w, lam = extract_csi(h_f, 4)
    ref = principal_eigvec_dense(h_f, 4)
    np.testing.assert_allclose(sgcs_per_sample(w.T[:, :, None], ref.T[:, :, None]), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(w, axis=0), 1.0, atol=1e-12)
    a = subband_covariances(h_f, 4)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(a)[:, -1], rtol=1e-10)


def test_canonical_phase():
    w = complex_gaussian(RngStream(5), (6, 3))
    c = canonical_phase(w)
    idx = np.argmax(np.abs(c), axis=0)
    pivots = c[idx, np.arange(3)]
    assert np.all(pivots.imag == 0) and np.all(pivots.real > 0)
    np.testing.assert_allclose(np.abs(c), np.abs(w))
    np.testing.assert_allclose(canonical_phase(w * np.exp(1j * 0.7)), c, atol=1e-14)


def test_batched_csi_pipeline():
    h = np.stack([gen_multipath_channel(ue(), RngStream(6, (i,))) for i in range(3)])
    w = channels_to_csi(h, 32, 4)
    assert w.shape == (3, 8, 8)
    np.testing.assert_array_equal(w[1], channels_to_csi(h[1], 32, 4))


def test_nonconvergence_names_subband(monkeypatch):
    def never(a, tol, maxiter):
        n = a.shape[0]
        iters = np.zeros(n, dtype=np.int64)
        iters[5] = -1
        return np.zeros((n, a.shape[1]), complex), np.zeros(n), iters

    monkeypatch.setattr(kernels, "principal_eigh", never)
    h_f = time_to_freq(complex_gaussian(RngStream(7), (2, 8, 4)), 32)
    with pytest.raises(NumericalError, match="subband 5"):
        extract_csi(h_f, 4)
