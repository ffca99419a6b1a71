import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdmeta.core import (
    DegenerateInputError,
    RngStream,
    as_csi,
    complex_gaussian,
    normalize_columns,
    sgcs,
    sgcs_per_sample,
)
from oracles import sgcs_loop


def random_csi(seed, n_t=4, n_sb=3):
    return normalize_columns(complex_gaussian(RngStream(seed), (n_t, n_sb)))


class TestRngStream:
    def test_same_path_same_draws(self):
        a = RngStream(5, (1, 2)).generator().standard_normal(8)
        b = RngStream(5, (1, 2)).generator().standard_normal(8)
        assert np.array_equal(a, b)

    def test_child_equals_extended_path(self):
        assert RngStream(3).child(4, 7) == RngStream(3, (4, 7))
        assert RngStream(3, (4,)).child(7) == RngStream(3, (4, 7))

    def test_distinct_paths_differ(self):
        a = RngStream(5, (1, 2)).generator().standard_normal(8)
        b = RngStream(5, (2, 1)).generator().standard_normal(8)
        c = RngStream(6, (1, 2)).generator().standard_normal(8)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_sibling_streams_uncorrelated(self):
        xs = np.stack([RngStream(0, (i,)).generator().standard_normal(4000) for i in range(4)])
        corr = np.corrcoef(xs)
        assert np.max(np.abs(corr - np.eye(4))) < 0.06


class TestComplexGaussian:
    def test_moments(self):
        z = complex_gaussian(RngStream(1), 200_000)
        assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
        assert abs(np.mean(z.real**2) - 0.5) < 0.01
        assert abs(np.mean(z.real * z.imag)) < 0.01
        assert abs(np.mean(z)) < 0.01

    def test_shape(self):
        assert complex_gaussian(RngStream(0), (2, 3)).shape == (2, 3)
        assert complex_gaussian(np.random.default_rng(0), 5).shape == (5,)

    @pytest.mark.parametrize("n", [0, (0, 3), ()])
    def test_empty_rejected(self, n):
        with pytest.raises(ValueError):
            complex_gaussian(RngStream(0), n)


class TestSgcs:
    def test_identity(self):
        w = random_csi(0)
        assert sgcs(w, w) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal_columns(self):
        w = np.eye(3, dtype=complex)
        assert sgcs(w, np.roll(w, 1, axis=0)) == 0.0

    def test_phase_and_scale_invariance(self):
        w = random_csi(1)
        rot = np.exp(1j * np.array([0.3, -2.0, 1.1])) * np.array([2.0, 0.5, 7.0])
        assert sgcs(w, w * rot) == pytest.approx(1.0, abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 5))
    def test_matches_loop_oracle(self, seed, n_t, n_sb):
        w = random_csi(seed, n_t, n_sb)
        w_hat = complex_gaussian(RngStream(seed, (1,)), (n_t, n_sb))
        got = sgcs(w, w_hat)
        assert got == pytest.approx(sgcs_loop(w, w_hat), abs=1e-12)
        assert 0.0 <= got <= 1.0 + 1e-12

    def test_per_sample_stack(self):
        w = np.stack([random_csi(s) for s in range(5)])
        w_hat = np.stack([random_csi(s + 10) for s in range(5)])
        vals = sgcs_per_sample(w, w_hat)
        assert vals.shape == (5,)
        for i in range(5):
            assert vals[i] == pytest.approx(sgcs_loop(w[i], w_hat[i]), abs=1e-12)
        assert sgcs(w, w_hat) == pytest.approx(vals.mean())

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            sgcs(random_csi(0, 4, 3), random_csi(0, 4, 2))

    def test_zero_column(self):
        w = random_csi(0)
        w_hat = w.copy()
        w_hat[:, 1] = 0
        with pytest.raises(DegenerateInputError):
            sgcs(w, w_hat)


class TestValidation:
    def test_as_csi_accepts_unit_columns(self):
        w = random_csi(2, 8, 4)
        assert as_csi(w, 8, 4) is not None

    def test_as_csi_rejects(self):
        w = random_csi(2, 8, 4)
        with pytest.raises(ValueError, match="unit"):
            as_csi(2 * w)
        with pytest.raises(ValueError, match="shape"):
            as_csi(w, 4, 8)
        bad = w.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            as_csi(bad)

    def test_normalize_zero_column(self):
        with pytest.raises(DegenerateInputError):
            normalize_columns(np.zeros((3, 2)))
