import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatstep.errors import InvalidInput, NotConverged
from flatstep.hodge import (
    Cochain,
    Complex2D,
    adjoint,
    coboundary,
    curvature_cochain,
    gauge_reduce,
    inner,
    norm2,
)
from flatstep.operator_core import OperatorPair, curvature_energy
from flatstep.rng import generator


def _random(cx, degree, d, rng):
    return Cochain(degree, rng.normal(size=(cx.n_cells(degree), d, d)))


def _sym(rng, d):
    A = rng.normal(size=(d, d))
    return 0.5 * (A + A.T)


def _dense_harmonic(cx, c):
    # vectorised system with the Kronecker matrix, solved by QR-based lstsq
    d = c.d
    A = np.kron(cx.incidence.toarray(), np.eye(d * d))
    y = c.values.reshape(-1)
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return (y - A @ x).reshape(c.values.shape), x


# --- coboundary --------------------------------------------------------------


@pytest.mark.parametrize("periodic", [False, True])
def test_constant_edge_cochain_is_closed(periodic):
    cx = Complex2D(4, 3, periodic)
    M = generator(1).normal(size=(2, 2))
    xi = Cochain(1, np.broadcast_to(M, (cx.n_edges, 2, 2)))
    assert np.abs(coboundary(cx, xi).values).max() == 0.0


@pytest.mark.parametrize("periodic", [False, True])
def test_single_edge_locality(periodic):
    cx = Complex2D(4, 5, periodic)
    for e in range(cx.n_edges):
        vals = np.zeros((cx.n_edges, 2, 2))
        vals[e] = np.eye(2)
        out = coboundary(cx, Cochain(1, vals)).values
        touched = np.flatnonzero(np.abs(out).sum(axis=(1, 2)))
        assert 1 <= len(touched) <= 2
        for f in touched:
            assert np.allclose(np.abs(out[f]), np.eye(2))


def test_single_edge_boundary_vs_interior():
    cx = Complex2D(3, 3)
    assert np.count_nonzero(cx.incidence[:, cx.h(0, 0)].toarray()) == 1
    assert np.count_nonzero(cx.incidence[:, cx.h(1, 1)].toarray()) == 2


@pytest.mark.parametrize("periodic", [False, True])
def test_coboundary_squares_to_zero(periodic):
    cx = Complex2D(5, 4, periodic)
    phi = _random(cx, 0, 3, generator(2, int(periodic)))
    xi = coboundary(cx, phi)
    assert xi.degree == 1
    # the edge orientation: h(i, j) runs from (i, j) to (i+1, j)
    e = cx.h(1, 2)
    assert np.allclose(xi.values[e], phi.values[cx.vertex(2, 2)] - phi.values[cx.vertex(1, 2)])
    e = cx.v(3, 1)
    assert np.allclose(xi.values[e], phi.values[cx.vertex(3, 2)] - phi.values[cx.vertex(3, 1)])
    assert np.abs(coboundary(cx, xi).values).max() <= 1e-14


def test_hand_assembled_2x2():
    # faces f(i, j) = 2i + j; h(i, j) = 3i + j; v(i, j) = 6 + 2i + j
    D = np.zeros((4, 12))
    for f, (hp, vp, hm, vm) in enumerate([(0, 8, 1, 6), (1, 9, 2, 7), (3, 10, 4, 8), (4, 11, 5, 9)]):
        D[f, [hp, vp]] = 1.0
        D[f, [hm, vm]] = -1.0
    cx = Complex2D(2, 2)
    np.testing.assert_array_equal(cx.incidence.toarray(), D)
    rng = generator(3)
    c = Cochain(2, rng.normal(size=(4, 1, 1)))
    xi, harm, energy = gauge_reduce(cx, c, tol=1e-14)
    # dense normal equations; xi is unique only up to ker(delta), so compare coboundaries
    x_ref = np.linalg.pinv(D.T @ D) @ (D.T @ c.values.ravel())
    np.testing.assert_allclose(D @ xi.values.ravel(), D @ x_ref, atol=1e-10)
    np.testing.assert_allclose(D.T @ D @ xi.values.ravel(), D.T @ c.values.ravel(), atol=1e-10)
    assert energy <= 1e-28


def test_wrong_cell_count_rejected():
    cx = Complex2D(2, 2)
    with pytest.raises(InvalidInput):
        coboundary(cx, Cochain(1, np.zeros((cx.n_edges - 1, 2, 2))))
    with pytest.raises(InvalidInput):
        coboundary(cx, Cochain(2, np.zeros((cx.n_faces, 2, 2))))
    with pytest.raises(InvalidInput):
        Cochain(1, np.zeros((3, 2, 3)))
    with pytest.raises(InvalidInput):
        Complex2D(0, 3)


# --- gauge reduction ---------------------------------------------------------


@pytest.mark.parametrize("periodic", [False, True])
def test_exact_cocycle_reduces_to_zero(periodic):
    for seed in range(5):
        rng = generator(4, seed, int(periodic))
        cx = Complex2D(int(rng.integers(2, 9)), int(rng.integers(2, 9)), periodic)
        c = coboundary(cx, _random(cx, 1, 3, rng))
        _, harm, energy = gauge_reduce(cx, c, tol=1e-14)
        assert energy <= 1e-16 * norm2(c)


def test_planar_grid_has_no_harmonic_part():
    for seed in range(5):
        rng = generator(5, seed)
        cx = Complex2D(int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        c = _random(cx, 2, 2, rng)
        harm_ref, _ = _dense_harmonic(cx, c)
        assert np.sum(harm_ref ** 2) <= 1e-20 * norm2(c)
        _, _, energy = gauge_reduce(cx, c, tol=1e-14)
        assert energy <= 1e-16 * norm2(c)


def test_torus_harmonic_is_face_mean():
    cx = Complex2D(6, 5, periodic=True)
    rng = generator(6)
    c = _random(cx, 2, 3, rng)
    mean = c.values.mean(axis=0)
    _, harm, energy = gauge_reduce(cx, c, tol=1e-13)
    np.testing.assert_allclose(harm.values, np.broadcast_to(mean, harm.values.shape), atol=1e-10)
    assert energy == pytest.approx(cx.n_faces * np.sum(mean ** 2), rel=1e-10)


def test_projected_input_keeps_its_energy():
    # a cochain orthogonal to im(delta), built by explicit dense projection
    cx = Complex2D(5, 4, periodic=True)
    rng = generator(7)
    c0 = _random(cx, 2, 2, rng)
    p, _ = _dense_harmonic(cx, c0)
    p = Cochain(2, p)
    assert norm2(p) > 1e-2
    _, harm, energy = gauge_reduce(cx, p, tol=1e-12)
    assert energy == pytest.approx(norm2(p), abs=1e-10)


@pytest.mark.parametrize("shape,periodic,d", [((6, 5), False, 3), ((7, 7), True, 3), ((8, 9), False, 2), ((4, 4), True, 1)])
def test_cg_matches_dense_oracle(shape, periodic, d):
    cx = Complex2D(*shape, periodic)
    assert cx.n_edges * d * d <= 1000
    rng = generator(8, *shape, d)
    c = _random(cx, 2, d, rng)
    harm_ref, x_ref = _dense_harmonic(cx, c)
    xi, harm, energy = gauge_reduce(cx, c, tol=1e-13)
    np.testing.assert_allclose(harm.values, harm_ref, atol=1e-8)
    assert energy == pytest.approx(float(np.sum(harm_ref ** 2)), abs=1e-8)
    # both solutions have the same coboundary even when xi is not unique
    np.testing.assert_allclose(coboundary(cx, xi).values.reshape(-1),
                               np.kron(cx.incidence.toarray(), np.eye(d * d)) @ x_ref, atol=1e-8)


@pytest.mark.parametrize("periodic", [False, True])
def test_optimality_split_and_energy_drop(periodic):
    tol = 1e-10
    for seed in range(5):
        rng = generator(9, seed, int(periodic))
        cx = Complex2D(int(rng.integers(2, 10)), int(rng.integers(2, 10)), periodic)
        c = _random(cx, 2, 2, rng)
        xi, harm, energy, info = gauge_reduce(cx, c, tol=tol, return_info=True)
        cn = math.sqrt(norm2(c))
        for _ in range(50):
            d_eta = coboundary(cx, _random(cx, 1, 2, rng))
            assert abs(inner(harm, d_eta)) <= tol * cn * math.sqrt(norm2(d_eta))
        dx = coboundary(cx, xi)
        assert abs(norm2(c) - norm2(dx) - energy) <= tol * norm2(c)
        assert energy <= norm2(c)
        assert info["relative_residual"] <= tol
        # |delta^*| <= 2 sqrt(2) on this grid
        assert info["adjoint_residual"] <= 2 * math.sqrt(2) * tol


def test_energy_unchanged_iff_adjoint_vanishes():
    cx = Complex2D(4, 4, periodic=True)
    c = Cochain(2, np.broadcast_to(np.diag([1.0, -2.0]), (cx.n_faces, 2, 2)))
    assert norm2(adjoint(cx, c)) == 0.0
    xi, _, energy, info = gauge_reduce(cx, c, return_info=True)
    assert energy == norm2(c) and info["iterations"] == 0
    c2 = Cochain(2, c.values + 0.1 * generator(10).normal(size=c.values.shape))
    assert gauge_reduce(cx, c2)[2] < norm2(c2)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.booleans(), st.integers(1, 3), st.integers(0, 2**31))
def test_split_property(n_t, n_s, periodic, d, seed):
    if periodic and (n_t < 2 or n_s < 2):
        return
    cx = Complex2D(n_t, n_s, periodic)
    c = _random(cx, 2, d, generator(seed))
    xi, harm, energy = gauge_reduce(cx, c, tol=1e-12)
    assert abs(norm2(c) - norm2(coboundary(cx, xi)) - energy) <= 1e-10 * norm2(c)
    np.testing.assert_allclose(harm.values, c.values - coboundary(cx, xi).values, atol=1e-14)


def test_not_converged_carries_iterate():
    cx = Complex2D(20, 20)
    c = _random(cx, 2, 2, generator(11))
    with pytest.raises(NotConverged) as err:
        gauge_reduce(cx, c, tol=1e-14, max_iter=2)
    xi, harm, energy = err.value.result
    assert xi.degree == 1 and harm.degree == 2
    assert energy < norm2(c)
    with pytest.raises(InvalidInput):
        gauge_reduce(cx, c, tol=0.0)


# --- curvature cochain -------------------------------------------------------


def test_commuting_faces_give_zero_cochain():
    cx = Complex2D(3, 2)
    rng = generator(12)
    pairs = []
    for _ in range(cx.n_faces):
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        pairs.append(OperatorPair(Q @ np.diag(rng.uniform(0, 1, 3)) @ Q.T, Q @ np.diag(rng.uniform(0, 1, 3)) @ Q.T))
    c, _ = curvature_cochain(pairs, 0.1, cx)
    assert np.abs(c.values).max() <= 1e-12


def test_single_noncommuting_face_is_local():
    cx = Complex2D(3, 3)
    rng = generator(13)
    flat = OperatorPair(np.diag([1.0, 2.0]), np.diag([0.5, 0.1]))
    pairs = {f: flat for f in range(cx.n_faces)}
    pairs[4] = OperatorPair(_sym(rng, 2), _sym(rng, 2))
    c, reports = curvature_cochain(pairs, 0.1, cx)
    norms = np.sum(c.values ** 2, axis=(1, 2))
    assert norms[4] > 1e-6
    assert np.delete(norms, 4).max() <= 1e-24


def test_cochain_energy_matches_curvature_energy():
    rng = generator(14)
    cx = Complex2D(4, 3)
    pairs = [OperatorPair(_sym(rng, 3), _sym(rng, 3)) for _ in range(cx.n_faces)]
    c, reports = curvature_cochain(pairs, 0.05, cx)
    assert norm2(c) == pytest.approx(curvature_energy(reports), rel=1e-14)
    _, _, energy = gauge_reduce(cx, c)
    assert energy <= 1e-16 * norm2(c)


def test_curvature_cochain_validation():
    cx = Complex2D(2, 2)
    p2 = OperatorPair(np.eye(2), np.eye(2))
    with pytest.raises(InvalidInput):
        curvature_cochain({0: p2}, 0.1, cx)
    with pytest.raises(InvalidInput):
        curvature_cochain({0: p2}, 0.1)
    with pytest.raises(InvalidInput):
        curvature_cochain([p2, p2, p2, OperatorPair(np.eye(3), np.eye(3))], 0.1)
    with pytest.raises(InvalidInput):
        curvature_cochain([p2] * 3, 0.1, cx)
    with pytest.raises(InvalidInput):
        curvature_cochain([p2] * 4, -0.1, cx)
