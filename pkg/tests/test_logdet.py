import math

import numpy as np
import pytest

from flatstep.errors import InvalidInput, NotSPD
from flatstep.logdet import (
    MAContext,
    ProbeConfig,
    hutchinson_trace,
    lanczos,
    logdet_chol,
    ma_residual,
    residual_printed,
    slq_logdet,
    trust_region_update,
)
from flatstep.rng import generator


def _spd(n, seed, shift=0.5):
    rng = generator(seed, n)
    X = rng.normal(size=(n, n))
    return X @ X.T / n + shift * np.eye(n)


def test_logdet_chol_examples():
    assert logdet_chol(np.eye(5)) == 0.0
    assert logdet_chol(np.diag([1.0, 4.0])) == pytest.approx(math.log(4), abs=1e-15)
    for seed in range(10):
        A = _spd(20, seed)
        assert logdet_chol(A) == pytest.approx(np.sum(np.log(np.linalg.eigvalsh(A))), abs=1e-10)


def test_logdet_chol_ill_conditioned():
    # D B D with B well conditioned: condition ~1e10, log-det known exactly,
    # and forming the product only perturbs entries componentwise
    B = _spd(30, 4, shift=1.0)
    d = np.logspace(-2.5, 2.5, 30)
    A = d[:, None] * B * d[None, :]
    assert np.linalg.cond(A) > 1e9
    exact = logdet_chol(B) + 2 * math.fsum(np.log(d))
    assert abs(logdet_chol(A) - exact) <= 1e-12 * max(1.0, abs(exact))


def test_logdet_chol_rejects():
    with pytest.raises(NotSPD):
        logdet_chol(np.diag([1.0, -1.0]))


def test_gl_character_identity():
    G = _spd(6, 1)
    T = generator(2).normal(size=(6, 6))
    lhs = logdet_chol(T.T @ G @ T)
    assert lhs == pytest.approx(logdet_chol(G) + 2 * math.log(abs(np.linalg.det(T))), abs=1e-9)


def test_probe_config_validation():
    with pytest.raises(InvalidInput):
        ProbeConfig(n_probes=0)
    with pytest.raises(InvalidInput):
        ProbeConfig(probe_kind="cauchy")
    with pytest.raises(InvalidInput):
        ProbeConfig(lanczos_steps=1)


def test_hutchinson_identity_and_diagonal():
    est, se = hutchinson_trace(lambda z: z, 10, ProbeConfig(16, "rademacher", 1))
    assert est == 10.0 and se == 0.0
    d = np.arange(1.0, 8.0)
    est, se = hutchinson_trace(lambda z: d * z, 7, ProbeConfig(16, "rademacher", 2))
    assert est == pytest.approx(d.sum(), abs=1e-13) and se == pytest.approx(0.0, abs=1e-13)


def test_hutchinson_coverage():
    hits = 0
    for trial in range(1000):
        rng = generator(70, trial)
        X = rng.normal(size=(12, 12))
        M = X + X.T
        est, se = hutchinson_trace(lambda z: M @ z, 12, ProbeConfig(100, "rademacher", trial))
        hits += abs(est - np.trace(M)) <= 3 * se
    assert hits >= 990


@pytest.mark.parametrize("kind", ["rademacher", "gaussian"])
def test_hutchinson_large_runs(kind):
    M = _spd(30, 5) - 0.3 * np.eye(30)
    for seed in range(3):
        est, se = hutchinson_trace(lambda z: M @ z, 30, ProbeConfig(10_000, kind, seed))
        assert abs(est - np.trace(M)) <= 4 * se


def test_hutchinson_orthogonal_blocks_exact():
    M = _spd(9, 3)
    est, se = hutchinson_trace(lambda z: M @ z, 9, ProbeConfig(20, "orthogonal", 0))
    assert est == pytest.approx(np.trace(M), rel=1e-13)


def test_lanczos_tridiagonal_and_breakdown():
    A = _spd(12, 7)
    alpha, beta, broke = lanczos(A, np.ones(12), 12)
    assert not broke
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    np.testing.assert_allclose(np.linalg.eigvalsh(T), np.linalg.eigvalsh(A), rtol=1e-10)
    # start vector in a 2-dimensional invariant subspace
    alpha, beta, broke = lanczos(np.diag([1.0, 2.0, 3.0, 4.0]), np.array([1.0, 1.0, 0.0, 0.0]), 4)
    assert broke and len(alpha) == 2


def test_slq_identity_and_diagonal():
    est, _ = slq_logdet(np.eye(8), ProbeConfig(4, "rademacher", 0, 4))
    assert abs(est) <= 1e-14
    est, se, info = slq_logdet(np.diag(np.arange(1.0, 11.0)), ProbeConfig(64, "rademacher", 0, 10), return_info=True)
    exact = math.log(math.factorial(10))
    assert exact == pytest.approx(15.1044, abs=1e-4)
    assert abs(est - exact) <= 3 * se + 1e-10
    assert info["n_probes"] == 64


def test_slq_breakdown_flagged():
    est, _, info = slq_logdet(np.diag([2.0, 2.0, 3.0, 3.0]), ProbeConfig(3, "rademacher", 0, 4), return_info=True)
    assert info["breakdowns"] == 3
    assert est == pytest.approx(2 * math.log(2) + 2 * math.log(3))


def test_slq_bias_decreases_with_steps():
    rng = generator(21)
    Q, _ = np.linalg.qr(rng.normal(size=(40, 40)))
    A = (Q * np.logspace(-2, 2, 40)) @ Q.T
    A = 0.5 * (A + A.T)
    exact = logdet_chol(A)
    errs = [abs(slq_logdet(A, ProbeConfig(40, "orthogonal", 1, m))[0] - exact) / abs(exact) for m in (4, 8, 12)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("dim", [8, 32, 64])
def test_slq_orthogonal_matches_cholesky(dim):
    A = _spd(dim, 11)
    est, _ = slq_logdet(A, ProbeConfig(256, "orthogonal", 2, dim))
    exact = logdet_chol(A)
    assert abs(est - exact) <= 1e-6 * abs(exact)


def test_slq_rejects():
    with pytest.raises(InvalidInput):
        slq_logdet(np.eye(3), ProbeConfig(2, "rademacher", 0, 4))
    with pytest.raises(NotSPD):
        slq_logdet(np.diag([1.0, -1.0, 2.0]), ProbeConfig(2, "rademacher", 0, 3))


def test_ma_residual_fixed_points():
    H = _spd(4, 1)
    dH = math.exp(logdet_chol(H))
    c, S = 0.7, 1.3
    assert ma_residual(MAContext(dH * math.exp(c * S), c, S, H)) == pytest.approx(0.0, abs=1e-12)
    assert ma_residual(MAContext(dH, 0.0, 5.0, H)) == pytest.approx(0.0, abs=1e-12)
    ctx = MAContext(2.0, 0.1, 0.4, H)
    assert ma_residual(MAContext(2.0, 0.1, 0.4, 3.0 * H)) - ma_residual(ctx) == pytest.approx(4 * math.log(3))
    assert residual_printed(ctx) == pytest.approx(-ma_residual(ctx) + 2 * 0.1 * 0.4)


def test_trust_region_update():
    n = 2
    H = np.diag([2.0, 0.5])
    # r = log w - logdet H + cS = 1 with logdet H = 0
    ctx = MAContext(math.e, 0.0, 0.0, H)
    assert residual_printed(ctx) == pytest.approx(1.0)
    Hn = trust_region_update(ctx, 0.25)
    assert residual_printed(MAContext(ctx.w, ctx.c, ctx.S_val, Hn)) == pytest.approx(0.5, abs=1e-15)
    # fixed point
    fixed = MAContext(1.0, 0.0, 0.0, np.eye(n))
    np.testing.assert_allclose(trust_region_update(fixed, 0.3), np.eye(n), atol=0)


def test_trust_region_contraction_and_eigenvectors():
    H = _spd(6, 9)
    ctx = MAContext(3.0, 0.2, -1.5, H)
    n = 6
    _, U0 = np.linalg.eigh(H)
    for eta in (0.05, 1 / 6, 0.3):
        c = ctx
        r = residual_printed(c)
        for _ in range(10):
            Hn = trust_region_update(c, eta)
            c = MAContext(c.w, c.c, c.S_val, Hn)
            r_new = residual_printed(c)
            assert r_new == pytest.approx((1 - n * eta) * r, abs=1e-13 * max(1, abs(r)))
            if abs(r) > 1e-12:
                assert abs(r_new) < abs(r)
            r = r_new
        _, U = np.linalg.eigh(c.H)
        np.testing.assert_allclose(np.abs(U.T @ U0), np.eye(n), atol=1e-8)


def test_trust_region_rejects_nonpositive_eta():
    with pytest.raises(InvalidInput):
        trust_region_update(MAContext(1.0, 0.0, 0.0, np.eye(2)), 0.0)
