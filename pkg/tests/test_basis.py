import itertools

import numpy as np
import pytest

from kdmeta import basis as basis_mod
from kdmeta.basis import (
    UNITARY_TOL,
    dft_basis,
    make_basis,
    smt_basis,
    smt_unitary,
    svd_basis,
    unitarity_residual,
)
from kdmeta.core import NumericalError, RngStream
from oracles import dft_column


@pytest.fixture(scope="module")
def ref_dft():
    return dft_basis(8, 2, 13, 2, 2)


def test_ref_dft_shape(ref_dft):
    assert ref_dft.n_groups == 4
    assert ref_dft.spatial.shape == (4, 16, 16)
    assert ref_dft.frequency.shape == (13, 13)


@pytest.mark.parametrize("method", ["dft", "svd", "smt"])
def test_unitary_groups(method):
    b = make_basis(method, 8, 2, 13, 2, 2, rng=RngStream(0))
    assert b.n_groups == 4
    assert b.max_unitarity_residual() <= UNITARY_TOL


def test_dft_columns_match_oracle(ref_dft):
    for oh, ov in itertools.product(range(2), range(2)):
        group = ref_dft.group(oh * 2 + ov + 1)
        for i, k in [(0, 0), (3, 1), (7, 0), (7, 1)]:
            np.testing.assert_allclose(group[:, i * 2 + k], dft_column(8, 2, 2, 2, oh, ov, i, k), atol=1e-14)


def test_dft_frequency_is_normalized_dft_matrix(ref_dft):
    n = 13
    ref = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    np.testing.assert_allclose(ref_dft.frequency, ref, atol=1e-14)


def test_cross_group_overlap(ref_dft):
    # half-bin vertical offset with N_v = 2 gives |sin(pi/2) / (2 sin(pi/4))| = 1/sqrt(2)
    best = max(
        np.abs(ref_dft.group(a).conj().T @ ref_dft.group(b)).max()
        for a, b in itertools.combinations(range(1, 5), 2)
    )
    assert best > 0.1
    assert best == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_no_oversampling_single_group():
    b = dft_basis(4, 2, 8)
    assert b.n_groups == 1
    assert unitarity_residual(b.group(1)) < 1e-12


def test_dual_pol_block_diagonal():
    b = dft_basis(4, 2, 8, 2, 2, dual_pol=True)
    assert b.n_t == 16
    g = b.group(2)
    np.testing.assert_array_equal(g[:8, 8:], 0)
    np.testing.assert_array_equal(g[:8, :8], g[8:, 8:])
    assert unitarity_residual(g) < 1e-12


def test_group_index_is_one_based(ref_dft):
    np.testing.assert_array_equal(ref_dft.group(1), ref_dft.spatial[0])
    with pytest.raises(IndexError):
        ref_dft.group(0)
    with pytest.raises(IndexError):
        ref_dft.group(5)


@pytest.mark.parametrize("build", [svd_basis, smt_basis])
def test_random_bases_deterministic_and_distinct(build):
    a = build(4, 2, 8, 3, RngStream(1))
    b = build(4, 2, 8, 3, RngStream(1))
    np.testing.assert_array_equal(a.spatial, b.spatial)
    # independent groups span different subspaces column by column
    overlap = np.abs(a.group(1).conj().T @ a.group(2))
    assert overlap.max() < 1 - 1e-6
    assert not np.allclose(a.spatial, build(4, 2, 8, 3, RngStream(2)).spatial)


def test_random_group_is_kronecker():
    b = svd_basis(4, 2, 8, 1, RngStream(3))
    g = b.group(1)
    # rank-1 rearrangement test: reshape (h v, h' v') -> (h h', v v')
    r = g.reshape(4, 2, 4, 2).transpose(0, 2, 1, 3).reshape(16, 4)
    s = np.linalg.svd(r, compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_make_basis_defaults_p_from_oversampling():
    assert make_basis("svd", 4, 2, 8, 3, 2, rng=RngStream(0)).n_groups == 6
    assert make_basis("smt", 4, 2, 8, p=5, rng=RngStream(0)).n_groups == 5


def test_make_basis_errors():
    with pytest.raises(ValueError, match="unknown"):
        make_basis("qr", 4, 2, 8)
    with pytest.raises(ValueError, match="RNG"):
        make_basis("svd", 4, 2, 8)
    with pytest.raises(ValueError):
        dft_basis(0, 2, 8)


def test_smt_rank_deficient_rejected():
    x = np.ones((3, 3), dtype=complex)
    with pytest.raises(NumericalError):
        smt_unitary(x)


def test_smt_redraws_once_then_fails(monkeypatch):
    calls = []

    def degenerate_then_good(rng, shape):
        calls.append(rng.path)
        if len(calls) == 1:
            return np.ones(shape, dtype=complex)
        return np.eye(shape[0], dtype=complex)

    monkeypatch.setattr(basis_mod, "complex_gaussian", degenerate_then_good)
    b = smt_basis(2, 1, 2, 1, RngStream(0))
    assert b.max_unitarity_residual() < 1e-12
    assert calls[0][-1] == 0 and calls[1][-1] == 1

    monkeypatch.setattr(basis_mod, "complex_gaussian", lambda rng, shape: np.ones(shape, dtype=complex))
    with pytest.raises(NumericalError):
        smt_basis(2, 1, 2, 1, RngStream(0))
