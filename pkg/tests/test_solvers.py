"""Dense oracle, lowest/window Krylov solvers, inertia certification."""

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import TWO_PI, op_from_dense, torus_constant_setup
from magspec import (assemble_H, build_lattice, count_below, dense_spectrum,
                     lowest_eigs, read_slice, trivial_links, window_eigs,
                     write_slice, zero_potential)
from magspec.errors import (ConvergenceError, DenseSizeError,
                            NotHermitianError, WindowError)
from magspec.solvers import CERTIFIED, HEURISTIC


def test_dense_tiny_cases():
    sl = dense_spectrum(op_from_dense([[2.0]]))
    assert sl.values[0] == pytest.approx(2.0)
    sl = dense_spectrum(op_from_dense([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(sl.values, [-1.0, 1.0])
    assert sl.residuals.max() <= 1e-14
    assert sl.certificate == CERTIFIED


def test_dense_guards():
    # the guard fires on dimension alone; no need to materialize 4097^2
    from magspec.operators import SparseHermitian
    op = SparseHermitian(matrix=sp.identity(4097, dtype=complex, format="csr"),
                         p=1, spacing=(1.0, 1.0), rank=1, hermitian=True)
    with pytest.raises(DenseSizeError):
        dense_spectrum(op)
    flagless = op_from_dense(np.eye(3), hermitian=False)
    with pytest.raises(NotHermitianError):
        dense_spectrum(flagless)


def test_lowest_free_field_ground_state():
    lat = build_lattice("torus", TWO_PI, TWO_PI, 16, 16)
    H = assemble_H(lat, trivial_links(lat, 2), zero_potential(lat), 2)
    sl = lowest_eigs(H, 1)
    assert abs(sl.values[0]) <= sl.tol
    u = sl.vectors[:, 0]
    overlap = abs(np.vdot(u, np.ones(H.n) / np.sqrt(H.n)))
    assert overlap == pytest.approx(1.0, abs=1e-8)


def test_lowest_free_field_first_excited_level():
    n_side, p = 20, 2
    lat = build_lattice("torus", TWO_PI, TWO_PI, n_side, n_side)
    H = assemble_H(lat, trivial_links(lat, p), zero_potential(lat), p)
    sl = lowest_eigs(H, 6)
    h = lat.spacing_x
    lam2 = (1 / p) * (2 / h**2) * (1 - np.cos(TWO_PI / n_side))
    assert np.allclose(sl.values[1:5], lam2, rtol=1e-10)  # 4-fold degenerate
    assert sl.values[5] > sl.values[4] * 1.5


def test_lowest_matches_dense_oracle():
    lat, spec, b, links, V, H = torus_constant_setup(nx=16, p=4)
    dense = dense_spectrum(H)
    sl = lowest_eigs(H, 20)
    assert np.abs(sl.values - dense.values[:20]).max() <= 1e-8
    gram = sl.vectors.conj().T @ sl.vectors
    assert np.abs(gram - np.eye(20)).max() <= 1e-8
    assert np.all(sl.residuals <= sl.tol)


def test_lowest_cluster_count_certified():
    lat, spec, b, links, V, H = torus_constant_setup(nx=32, p=8)
    bval = 1 / TWO_PI
    sl = window_eigs(H, (0.6 * bval, 1.4 * bval))
    assert len(sl) == 8
    assert sl.certificate == CERTIFIED


def test_cluster_count_scales_with_chern_number():
    # two flux quanta: the lowest cluster holds 2p states
    lat, spec, b, links, V, H = torus_constant_setup(nx=32, p=4, c1=2)
    bval = 2 / TWO_PI
    sl = window_eigs(H, (0.6 * bval, 1.4 * bval))
    assert len(sl) == 8
    assert sl.certificate == CERTIFIED


def test_window_empty_certified():
    lat, spec, b, links, V, H = torus_constant_setup(nx=24, p=4)
    bval = 1 / TWO_PI
    dense = dense_spectrum(H)
    window = (1.6 * bval, 2.4 * bval)  # inside the first gap
    assert not np.any((dense.values >= window[0]) & (dense.values <= window[1]))
    sl = window_eigs(H, window)
    assert len(sl) == 0
    assert sl.certificate == CERTIFIED


def test_window_single_interior_eigenvalue():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((60, 60)) + 1j * rng.standard_normal((60, 60))
    op = op_from_dense((a + a.conj().T) / 2)
    w = dense_spectrum(op).values
    lam = w[3]
    eps = 0.4 * min(lam - w[2], w[4] - lam)
    sl = window_eigs(op, (lam - eps, lam + eps))
    assert len(sl) == 1
    assert sl.values[0] == pytest.approx(lam, abs=1e-10)
    assert sl.certificate == CERTIFIED


def test_window_shift_jitter_on_singular_factorization():
    # the midpoint shift hits an exact eigenvalue of a diagonal matrix; the
    # solver must jitter the shift and still find the pair
    op = op_from_dense(np.diag([0.0, 1.0, 2.0, 3.0, 4.0]))
    sl = window_eigs(op, (-0.5, 0.5))
    assert len(sl) == 1
    assert sl.values[0] == pytest.approx(0.0, abs=1e-10)


def test_window_validation():
    op = op_from_dense(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(WindowError):
        window_eigs(op, (2.0, 1.0))
    with pytest.raises(NotHermitianError):
        window_eigs(op_from_dense(np.eye(3), hermitian=False), (0.0, 1.0))


def test_count_below_matches_dense():
    rng = np.random.default_rng(17)
    a = rng.standard_normal((80, 80)) + 1j * rng.standard_normal((80, 80))
    op = op_from_dense((a + a.conj().T) / 2)
    w = dense_spectrum(op).values
    for q in (5, 25, 50, 75, 95):
        sigma = np.percentile(w, q) + 1e-9
        count, trusted = count_below(op, sigma)
        assert trusted
        assert count == int(np.sum(w < sigma))


def test_inertia_consistency_on_assembled_operator():
    lat, spec, b, links, V, H = torus_constant_setup(nx=16, p=4)
    dense = dense_spectrum(H)
    bval = 1 / TWO_PI
    sl = window_eigs(H, (0.5 * bval, 3.5 * bval))
    expect = np.sum((dense.values >= 0.5 * bval) & (dense.values <= 3.5 * bval))
    assert len(sl) == expect
    assert sl.certificate == CERTIFIED


def test_convergence_error_carries_partial():
    lat, spec, b, links, V, H = torus_constant_setup(nx=24, p=4)
    with pytest.raises(ConvergenceError):
        lowest_eigs(H, 40, maxiter=1)


def test_folded_fallback_heuristic():
    lat, spec, b, links, V, H = torus_constant_setup(nx=12, p=4)
    bval = 1 / TWO_PI
    dense = dense_spectrum(H)
    sl = window_eigs(H, (0.5 * bval, 1.5 * bval), use_folded=True)
    assert sl.certificate == HEURISTIC
    expect = dense.values[np.abs(dense.values - bval) < 0.5 * bval]
    assert len(sl) == expect.size
    assert np.allclose(sl.values, expect, atol=1e-7)


def test_eigenvector_dump_round_trip(tmp_path):
    lat, spec, b, links, V, H = torus_constant_setup(nx=12, p=4)
    sl = lowest_eigs(H, 5)
    path = tmp_path / "vecs.bsev"
    write_slice(sl, path)
    back = read_slice(path)
    assert np.allclose(back.values, sl.values)
    assert np.allclose(back.vectors, sl.vectors)
    assert np.allclose(back.residuals, sl.residuals)
