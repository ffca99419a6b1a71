import numpy as np
import pytest

from kdmeta.augment import (
    StatProfile,
    augment_channel,
    augment_channels,
    augment_from_profiles,
    build_target_dataset,
    estimate_profile,
    unvectorize,
    vectorize,
)
from kdmeta.core import RngStream, complex_gaussian


def kron_channels(n, n_r=2, n_t=4, n_d=3, seed=0):
    """H_d = sqrt(p_d) A_d G B_d with i.i.d. G: a known Kronecker-structured channel."""
    gen = np.random.default_rng(seed)
    a = gen.standard_normal((n_d, n_r, n_r)) + 1j * gen.standard_normal((n_d, n_r, n_r))
    b = gen.standard_normal((n_d, n_t, n_t)) + 1j * gen.standard_normal((n_d, n_t, n_t))
    p = np.array([0.6, 0.3, 0.1])[:n_d]
    g = complex_gaussian(RngStream(seed), (n, n_d, n_r, n_t))
    h = np.einsum("dij,sdjk,dkl->sild", a, g, b) * np.sqrt(p)[None, None, None, :]
    return h, a, b, p


def test_vectorize_row_major():
    h = np.arange(6).reshape(2, 3)
    np.testing.assert_array_equal(vectorize(h), [0, 1, 2, 3, 4, 5])
    np.testing.assert_array_equal(unvectorize(vectorize(h), 2, 3), h)


def test_profile_normalization():
    h, *_ = kron_channels(50)
    prof = estimate_profile(h)
    np.testing.assert_allclose(np.trace(prof.r_tx, axis1=1, axis2=2).real, 4)
    np.testing.assert_allclose(np.trace(prof.r_rx, axis1=1, axis2=2).real, 2)
    for r in (prof.r_tx, prof.r_rx, prof.r_joint):
        np.testing.assert_allclose(r, np.swapaxes(r.conj(), 1, 2), atol=1e-12)
    np.testing.assert_allclose(prof.power.sum(), np.mean(np.abs(h) ** 2) * 3, rtol=1e-12)
    assert np.all(prof.eigvals >= 0)


def test_joint_covariance_matches_kronecker_truth():
    h, a, b, p = kron_channels(40_000, seed=1)
    prof = estimate_profile(h)
    for d in range(3):
        r_rx = a[d] @ a[d].conj().T
        r_tx = b[d].conj().T @ b[d]
        truth = np.kron(r_rx / np.trace(r_rx).real * 2, (r_tx / np.trace(r_tx).real * 4).conj())
        err = np.linalg.norm(prof.r_joint[d] - truth) / np.linalg.norm(truth)
        assert err < 0.05
        # the empirical vector covariance agrees with the stored model
        x = vectorize(h[..., d])
        emp = x.T @ x.conj() / len(x)
        model = prof.power[d] * prof.r_joint[d]
        assert np.linalg.norm(emp - model) / np.linalg.norm(model) < 0.05


def test_augmented_covariance_fixed_point():
    h, *_ = kron_channels(5_000, seed=2)
    prof = estimate_profile(h)
    aug = augment_channels(prof, 40_000, RngStream(3))
    assert aug.shape == (40_000, 2, 4, 3)
    for d in range(3):
        x = vectorize(aug[..., d])
        emp = x.T @ x.conj() / len(x)
        model = prof.power[d] * prof.r_joint[d]
        assert np.linalg.norm(emp - model) / np.linalg.norm(model) < 0.05


def test_degenerate_tap():
    h, *_ = kron_channels(20, seed=4)
    h[..., 1] = 0
    prof = estimate_profile(h)
    assert prof.degenerate.tolist() == [False, True, False]
    assert prof.power[1] == 0.0
    np.testing.assert_array_equal(prof.r_tx[1], np.eye(4))
    aug = augment_channel(prof, RngStream(0))
    assert aug.shape == (2, 4, 3)
    assert np.all(aug[..., 1] == 0)


def test_profile_validation():
    with pytest.raises(ValueError):
        estimate_profile(np.zeros((2, 4, 3)))
    eye = np.eye(2, dtype=complex)[None]
    with pytest.raises(ValueError, match="non-negative"):
        StatProfile(np.array([-1.0]), eye, eye)
    with pytest.raises(ValueError, match="taps"):
        StatProfile(np.array([1.0, 1.0]), eye, eye)


def test_target_dataset_counts_and_determinism():
    seeds = [kron_channels(4, seed=s)[0] for s in range(3)]
    out = build_target_dataset(seeds, 5, RngStream(9), 16, 4)
    assert out.shape == (15, 4, 4)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(out, build_target_dataset(seeds, 5, RngStream(9), 16, 4))
    assert build_target_dataset(seeds, 1, RngStream(9), 16, 4).shape[0] == 3
    with pytest.raises(ValueError):
        build_target_dataset(seeds, 0, RngStream(9), 16, 4)


def test_per_ue_streams_are_independent_of_ue_count():
    profs = [estimate_profile(kron_channels(4, seed=s)[0], ue_id=s) for s in range(3)]
    full = augment_from_profiles(profs, 4, RngStream(1), 16, 4)
    first_two = augment_from_profiles(profs[:2], 4, RngStream(1), 16, 4)
    np.testing.assert_array_equal(full[:8], first_two)
