"""Quantitative acceptance checks.

Each ``criterion_*`` function runs one desk-scale experiment and returns
a :class:`Criterion` whose ``checks`` list every individual comparison
with its measured value and tolerance.  A criterion passes only if all
of its checks pass.  :func:`run_all` runs them in order; the test suite
and ``flatstep acceptance`` both consume it.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np
import scipy.optimize

from .calibration import (
    apply_order,
    calibrated_step_A,
    calibrated_step_B,
    curvature_filtered_step,
    gauge,
    order_diagnostic,
    plain_step,
    reference_map,
    sylvester_eigen,
    sylvester_schur,
)
from .ellipsoid import (
    bulk_shrink,
    ellipsoid_step,
    initial_state,
    iteration_bound,
    logdet_factor,
    random_polytope,
    run_feasibility,
)
from .hodge import Cochain, Complex2D, coboundary, gauge_reduce, norm2
from .logdet import MAContext, ProbeConfig, hutchinson_trace, logdet_chol, residual_printed, slq_logdet, \
    trust_region_update
from .multistep import (
    MethodCoefficients,
    SpectralMeasure,
    chebyshev_extrema,
    chebyshev_filter,
    companion,
    empirical_decay_rate,
    gd_residual_rate,
    jury_stable_m1,
    modal_energy_constant,
    modal_multipliers_m1,
    oscillatory_interval_m1,
    ringing_frequency,
    simulate_deterministic,
    stability_report,
    stationary_points_m1,
    theta_m1,
    theta_prime_m1,
)
from .operator_core import OperatorPair, holonomy
from .rng import generator
from .stochastic import (
    NoiseModel,
    burn_in,
    expectation_bound,
    lyap_vec,
    noise_floor,
    p11_closed_m1,
    psd_variance,
    simulate_modal,
)

__all__ = ["Check", "Criterion", "CRITERIA", "run_all", "run_one"]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: object
    passed: bool

    def as_dict(self):
        return {"name": self.name, "value": _jsonable(self.value), "tolerance": _jsonable(self.tolerance),
                "passed": bool(self.passed)}


@dataclass
class Criterion:
    number: int
    title: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0
    notes: str = ""

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name, value, tolerance, passed):
        self.checks.append(Check(name, _jsonable(value), tolerance, bool(passed)))

    def line(self):
        worst = [c for c in self.checks if not c.passed]
        tail = "; ".join(f"{c.name}={_fmt(c.value)} (tol {_fmt(c.tolerance)})" for c in (worst or self.checks)[:3])
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} {self.title}: {tail}"


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _spd(rng, n, lo=0.5, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(rng.uniform(lo, hi, n)) @ Q.T


def _commuting(rng, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T, Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T


def _stable_m1(rng, lam_range=(0.1, 1.0), rho_cap=0.98):
    while True:
        c = MethodCoefficients.m1(rng.uniform(0.1, 1.5), rng.uniform(-0.3, 0.3), rng.uniform(0.0, 0.9))
        if stability_report(c, *lam_range, 50).rho_bar < rho_cap:
            return c


# ---------------------------------------------------------------------------


def criterion_1(seed=1):
    """Local error slopes of the calibrated, filtered and plain steps."""
    cr = Criterion(1, "calibration order")
    hs = np.logspace(-3, -1, 9)
    for p in range(5):
        rng = generator(seed, p)
        n = 8
        pair = OperatorPair(_spd(rng, n), _spd(rng, n))
        Z = gauge(pair).Z
        Zr = gauge(pair, reverse=True).Z
        g = rng.standard_normal(n)
        x = rng.standard_normal(n)
        errs = {k: [] for k in ("A", "B", "filtered", "plain")}
        for h in hs:
            R, Rr = reference_map(pair, h, Z, Zr)
            ref = x + (R - np.eye(n)) @ g
            B = calibrated_step_B(pair, g, h, x).x_next
            errs["A"].append(np.linalg.norm(calibrated_step_A(pair, g, h, Z, x, form="increment").x_next - B))
            errs["B"].append(np.linalg.norm(B - ref))
            errs["filtered"].append(np.linalg.norm(
                curvature_filtered_step(pair, g, h, 1.0, x).x_next - (x + (Rr - np.eye(n)) @ g)))
            errs["plain"].append(np.linalg.norm(plain_step(pair, g, h, x, composite=True).x_next - ref))
        for k, target in (("A", 3.0), ("B", 3.0), ("filtered", 3.0), ("plain", 2.0)):
            s = _slope(hs, errs[k])
            cr.add(f"pair{p}.slope_{k}", s, f"{target}+-0.15", abs(s - target) <= 0.15)
    return cr


def criterion_2(seed=2):
    """Holonomy log-norm slope and flatness of commuting pairs."""
    cr = Criterion(2, "holonomy scaling")
    hs = np.logspace(-3, -1, 7)
    for p in range(5):
        rng = generator(seed, p)
        pair = OperatorPair(_spd(rng, 6), _spd(rng, 6))
        s = _slope(hs, [np.linalg.norm(holonomy(pair, h).log_hol) for h in hs])
        cr.add(f"pair{p}.slope", s, "2.0+-0.05", abs(s - 2.0) <= 0.05)
    worst = 0.0
    for p in range(5):
        H, E = _commuting(generator(seed, 100 + p), 6)
        for h in hs:
            worst = max(worst, float(np.linalg.norm(holonomy(OperatorPair(H, E), h).log_hol)))
    cr.add("commuting.max_log_hol", worst, 1e-12, worst <= 1e-12)
    return cr


def criterion_3(seed=3):
    """Sylvester residual and Schur/eigen agreement."""
    cr = Criterion(3, "Sylvester correctness")
    worst_res, worst_gap = 0.0, 0.0
    for i in range(100):
        rng = generator(seed, i)
        n = int(rng.integers(3, 13))
        lam = 0.5 + np.cumsum(rng.uniform(0.1, 1.0, n))
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        S = (Q * lam) @ Q.T
        S = 0.5 * (S + S.T)
        X = rng.standard_normal((n, n))
        H = 0.5 * (X + X.T)
        E = S - H
        C = 0.5 * (H @ E - E @ H)
        zs = sylvester_schur(S, C)
        ze = sylvester_eigen(S, C)
        worst_res = max(worst_res, zs.residual, ze.residual)
        worst_gap = max(worst_gap, float(np.linalg.norm(zs.Z - ze.Z) / max(1.0, np.linalg.norm(zs.Z))))
    cr.add("max_residual", worst_res, 1e-10, worst_res <= 1e-10)
    cr.add("max_schur_eigen_gap", worst_gap, 1e-10, worst_gap <= 1e-10)
    return cr


def _random_m1(rng):
    return MethodCoefficients.m1(rng.uniform(0.01, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 1.0))


def criterion_4(seed=4):
    """m = 1 roots, Jury verdicts and stationary points."""
    cr = Criterion(4, "m=1 spectra")
    rng = generator(seed, 0)
    worst, mismatch, checked = 0.0, 0, 0
    for _ in range(10_000):
        c = _random_m1(rng)
        lam = rng.uniform(0.01, 3.0)
        mm = modal_multipliers_m1(c, lam)
        ev = np.linalg.eigvals(companion(c, lam))
        cf = mm.roots
        worst = max(worst, min(abs(cf[0] - ev[0]) + abs(cf[1] - ev[1]), abs(cf[0] - ev[1]) + abs(cf[1] - ev[0])))
        if abs(mm.rho_max - 1.0) >= 1e-8:
            checked += 1
            mismatch += jury_stable_m1(c, lam) != (mm.rho_max < 1.0)
    cr.add("roots_vs_companion", worst, 1e-12, worst <= 1e-12)
    cr.add("jury_mismatches", mismatch, 0, mismatch == 0 and checked > 0)
    rng = generator(seed, 1)
    worst_star, found = 0.0, 0
    while found < 100:
        c = MethodCoefficients.m1(rng.uniform(0.2, 2.0), rng.uniform(0.0, 1.0), rng.uniform(0.1, 0.99))
        iv = oscillatory_interval_m1(c)
        if iv is None:
            continue
        lo, hi = iv
        interior = [p for p in stationary_points_m1(c) if lo < p < hi]
        if not interior:
            continue
        ls = interior[0]
        a, b = ls - 0.05 * (ls - lo), ls + 0.05 * (hi - ls)
        if theta_prime_m1(c, a) * theta_prime_m1(c, b) >= 0:
            continue
        root = scipy.optimize.brentq(lambda t: theta_prime_m1(c, t), a, b, xtol=1e-14)
        worst_star = max(worst_star, abs(root - ls))
        found += 1
    cr.add("lambda_star_vs_bisection", worst_star, 1e-8, worst_star <= 1e-8)
    return cr


def criterion_5():
    """Decay rate and ringing frequency of a simulated oscillatory mode."""
    cr = Criterion(5, "decay/ringing")
    for coeffs, lam in (((0.1, 0.05, 0.95), 1.0), ((0.2, 0.1, 0.9), 0.5), ((0.3, 0.02, 0.97), 0.8)):
        c = MethodCoefficients.m1(*coeffs)
        mm = modal_multipliers_m1(c, lam)
        if not mm.oscillatory:
            cr.add(f"{coeffs}.oscillatory", 0, 1, False)
            continue
        y = simulate_deterministic(c, lam, [1.0, 0.0], 201)
        rate = empirical_decay_rate(y, 100, 199)
        pred = abs(c.gamma[0] - c.eta[1] * lam)
        rel = abs(rate - pred) / pred
        cr.add(f"{coeffs}@{lam}.rate_rel_err", rel, 0.01, rel <= 0.01)
        freq, bw = ringing_frequency(y[100:200], math.sqrt(rate))
        off = abs(freq - theta_m1(c, lam) / (2 * math.pi)) / bw
        cr.add(f"{coeffs}@{lam}.freq_err_bins", off, 1.0, off <= 1.0)
    return cr


def criterion_6(seed=6, steps=1_000_000):
    """Noise floor: closed form, Lyapunov, PSD and Monte Carlo plateau."""
    cr = Criterion(6, "noise floor")
    rng = generator(seed, 0)
    worst_cf, worst_psd, worst_mc = 0.0, 0.0, 0.0
    for inst in range(10):
        c = _stable_m1(rng)
        lam = float(rng.uniform(0.1, 1.0))
        sigma2 = float(rng.uniform(0.1, 2.0))
        p_vec = lyap_vec(c, lam, sigma2).p11
        worst_cf = max(worst_cf, abs(p11_closed_m1(c, lam, sigma2) - p_vec) / max(1.0, p_vec))
        worst_psd = max(worst_psd, abs(psd_variance(c, lam, sigma2) - p_vec) / p_vec)
        nu = SpectralMeasure.single(lam)
        noise = NoiseModel(sigma2, seed=seed * 1000 + inst)
        floor = noise_floor(c, nu, noise)
        y = simulate_modal(c, lam, noise, [0.0, 0.0], steps)[burn_in(c, lam):]
        plateau = 0.5 * lam * float(np.mean(y * y))
        worst_mc = max(worst_mc, abs(plateau - floor) / floor)
    cr.add("p11_closed_vs_vec", worst_cf, 1e-10, worst_cf <= 1e-10)
    cr.add("psd_vs_p11_rel", worst_psd, 1e-6, worst_psd <= 1e-6)
    cr.add("mc_plateau_rel_gap", worst_mc, 0.10, worst_mc <= 0.10)
    return cr


def criterion_7(seed=7, replicas=4000):
    """Expectation bound against Monte Carlo at k in {10, 50, 200}."""
    cr = Criterion(7, "expectation bound")
    violations, total, min_ratio = 0, 0, math.inf
    for inst in range(20):
        rng = generator(seed, inst)
        c = _stable_m1(rng)
        lams = np.sort(rng.uniform(0.1, 1.0, 3))
        nu = SpectralMeasure(tuple((float(l), 1.0) for l in lams), 0.1, 1.0)
        noise = NoiseModel(float(rng.uniform(0.01, 0.1)), seed=seed * 1000 + inst)
        x0 = rng.normal(size=3)
        x0 /= np.linalg.norm(x0)
        hist = [[x, x] for x in x0]
        C = modal_energy_constant(c, nu, hist)
        ys = [simulate_modal(c, l, noise, h, 200, replicas=replicas, stream=i)
              for i, (l, h) in enumerate(zip(lams, hist))]
        for k in (10, 50, 200):
            mc = sum(0.5 * l * float(np.mean(y[:, k - 1] ** 2)) for l, y in zip(lams, ys))
            bound = expectation_bound(c, nu, noise, C, k)
            total += 1
            violations += mc > bound
            min_ratio = min(min_ratio, bound / mc)
    cr.add("violations", violations, 0, violations == 0 and total == 60)
    cr.add("min_bound_over_mc", min_ratio, ">=1", min_ratio >= 1.0)
    return cr


def criterion_8(seed=8):
    """Ellipsoid determinant identity, shrink table and feasibility runs."""
    cr = Criterion(8, "ellipsoid determinant identity")
    worst = 0.0
    for chain in range(100):
        rng = generator(seed, chain)
        n = int(rng.integers(2, 9))
        s = initial_state(rng.normal(size=n), rng.uniform(1, 10))
        for _ in range(10):
            t = ellipsoid_step(s, rng.normal(size=n))
            worst = max(worst, abs((t.logdetP - s.logdetP) - logdet_factor(n)))
            s = t
    cr.add("logdet_step_identity_1000", worst, 1e-10, worst <= 1e-10)
    s = initial_state(np.zeros(2), 1.0)
    t = ellipsoid_step(s, [0.3, -1.2])
    d = abs(math.exp(t.logdetP - s.logdetP) - 16 / 27)
    cr.add("n2_det_ratio", d, 1e-12, d <= 1e-12)
    bad = [n for n in range(2, 51) if not bulk_shrink(n) < -1.0 / (2 * n + 2)]
    cr.add("shrink_violations_n2_50", len(bad), 0, not bad)
    b = iteration_bound(2, 10, 1)
    cr.add("bound_n2_R10", b, 18, b == 18)
    over, missed = 0, 0
    for i in range(100):
        rng = generator(seed, 1000 + i)
        n = int(rng.integers(2, 9))
        R = float(rng.uniform(2 * math.sqrt(n), 100.0))
        oracle, A, bb, _ = random_polytope(n, R, 1.0, seed=seed * 1000 + i)
        found, state, _ = run_feasibility(oracle, np.zeros(n), R, 1.0)
        missed += not (found and np.all(A @ state.x <= bb))
        over += state.k > iteration_bound(n, R, 1.0)
    cr.add("polytopes_not_found", missed, 0, missed == 0)
    cr.add("polytopes_over_bound", over, 0, over == 0)
    return cr


def criterion_9(seed=9):
    """SLQ accuracy, Hutchinson coverage and the trust-region recursion."""
    cr = Criterion(9, "log-det estimators")
    worst, worst_rad = 0.0, 0.0
    for dim in (8, 16, 32, 64):
        rng = generator(seed, dim)
        X = rng.normal(size=(dim, dim))
        A = X @ X.T / dim + 0.5 * np.eye(dim)
        exact = logdet_chol(A)
        est, _ = slq_logdet(A, ProbeConfig(256, "orthogonal", seed, dim))
        worst = max(worst, abs(est - exact) / abs(exact))
        est_r, _ = slq_logdet(A, ProbeConfig(256, "rademacher", seed, dim))
        worst_rad = max(worst_rad, abs(est_r - exact) / abs(exact))
    cr.add("slq_orthogonal_rel_err", worst, 1e-6, worst <= 1e-6)
    cr.notes = f"rademacher probes at the same budget: rel err {worst_rad:.3g}"
    misses, runs = 0, 0
    for kind in ("rademacher", "gaussian"):
        for r in range(5):
            rng = generator(seed, 500, r)
            X = rng.normal(size=(30, 30))
            M = X + X.T
            est, se = hutchinson_trace(lambda z: M @ z, 30, ProbeConfig(10_000, kind, seed * 100 + r))
            runs += 1
            misses += abs(est - np.trace(M)) > 4 * se
    cr.add("hutchinson_outside_4se", misses, 0, misses == 0 and runs == 10)
    n = 6
    rng = generator(seed, 900)
    X = rng.normal(size=(n, n))
    ctx = MAContext(3.0, 0.2, -1.5, X @ X.T / n + 0.5 * np.eye(n))
    worst_rec = 0.0
    for eta in (0.05, 1 / 6, 0.3):
        cur = ctx
        r = residual_printed(cur)
        for _ in range(10):
            cur = MAContext(cur.w, cur.c, cur.S_val, trust_region_update(cur, eta))
            r_new = residual_printed(cur)
            worst_rec = max(worst_rec, abs(r_new - (1 - n * eta) * r) / max(1.0, abs(r)))
            r = r_new
    cr.add("trust_region_recursion", worst_rec, 1e-13, worst_rec <= 1e-13)
    return cr


def criterion_10(seed=10):
    """Hodge reduction: exact inputs, dense oracle, orthogonal split."""
    cr = Criterion(10, "Hodge reduction")
    tol = 1e-12
    worst_exact = 0.0
    for i in range(10):
        rng = generator(seed, i)
        cx = Complex2D(int(rng.integers(2, 12)), int(rng.integers(2, 12)), bool(i % 2))
        c = coboundary(cx, Cochain(1, rng.normal(size=(cx.n_edges, 3, 3))))
        worst_exact = max(worst_exact, gauge_reduce(cx, c, tol=1e-14)[2] / norm2(c))
    cr.add("exact_energy_over_norm2", worst_exact, 1e-16, worst_exact <= 1e-16)
    worst_oracle, worst_split = 0.0, 0.0
    for i, (shape, periodic, d) in enumerate((((6, 5), False, 3), ((7, 7), True, 3), ((8, 9), False, 2),
                                             ((10, 10), True, 2), ((4, 4), True, 1))):
        rng = generator(seed, 100 + i)
        cx = Complex2D(*shape, periodic)
        c = Cochain(2, rng.normal(size=(cx.n_faces, d, d)))
        A = np.kron(cx.incidence.toarray(), np.eye(d * d))
        y = c.values.reshape(-1)
        x, *_ = np.linalg.lstsq(A, y, rcond=None)
        xi, harm, energy = gauge_reduce(cx, c, tol=tol)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(harm.values.reshape(-1) - (y - A @ x)))))
        split = abs(norm2(c) - norm2(coboundary(cx, xi)) - energy) / norm2(c)
        worst_split = max(worst_split, split)
    cr.add("cg_vs_dense_qr", worst_oracle, 1e-8, worst_oracle <= 1e-8)
    cr.add("split_rel_err", worst_split, tol, worst_split <= tol)
    return cr


def criterion_11(Ns=(200, 300, 600, 1000), mu=1.0, L=100.0):
    """Chebyshev equioscillation and N-th root rate against 9/11."""
    cr = Criterion(11, "Chebyshev comparison")
    target = (math.sqrt(L / mu) - 1) / (math.sqrt(L / mu) + 1)
    gd = gd_residual_rate(mu, L)
    for N in Ns:
        f = chebyshev_filter(N, mu, L)
        pos, vals = chebyshev_extrema(f)
        alt = bool(np.all(np.sign(vals[1:]) == -np.sign(vals[:-1])))
        dev = float(np.max(np.abs(np.abs(vals) - f.sup_exact)) / f.sup_exact)
        cr.add(f"N{N}.extrema", len(pos), N + 1, len(pos) == N + 1 and alt)
        cr.add(f"N{N}.equiosc_rel_dev", dev, 1e-8, dev <= 1e-8)
        err = abs(f.rate - target)
        cr.add(f"N{N}.rate_err", err, 1e-3, err <= 1e-3)
        cr.add(f"N{N}.beats_gd", f.rate, f"<{gd:.6g}", f.rate < gd)
    return cr


def criterion_12(seed=12):
    """Order diagnostic slope for commuting pairs and the Armijo window."""
    cr = Criterion(12, "order selection")
    hs = np.logspace(-3, -1, 7)
    for p in range(3):
        rng = generator(seed, p)
        A, B = _commuting(rng, 6)
        g = rng.standard_normal(6)
        deltas = np.array([order_diagnostic(lambda v: A @ v, lambda v: B @ v, g, h)[0] for h in hs])
        if np.all(deltas > 0):
            s = _slope(hs, deltas)
            cr.add(f"commuting{p}.delta_slope", s, "1.0+-0.1", abs(s - 1.0) <= 0.1)
        else:
            cr.add(f"commuting{p}.delta_slope", float("nan"), "1.0+-0.1", False)
        cr.add(f"commuting{p}.max_delta", float(deltas.max()), "info", True)
    rng = generator(seed, 50)
    A, B = _spd(rng, 6), _spd(rng, 6)
    g = rng.standard_normal(6)
    s = _slope(hs, [order_diagnostic(lambda v: A @ v, lambda v: B @ v, g, h)[0] for h in hs])
    cr.add("noncommuting.delta_slope", s, "info", True)
    sigma = 0.1
    viol = 0
    for inst in range(5):
        rng = generator(seed, 100 + inst)
        A, B = _spd(rng, 8), _spd(rng, 8)
        S = A + B
        h = 2 * (1 - sigma) / float(np.linalg.eigvalsh(S)[-1])
        for _ in range(100):
            x = rng.standard_normal(8)
            gx = S @ x
            fx = 0.5 * x @ S @ x
            for order in ("dr", "rd"):
                xp = apply_order(lambda v: A @ v, lambda v: B @ v, x, h, order)
                viol += 0.5 * xp @ S @ xp > fx - sigma * h * (gx @ gx)
            xg = x - h * gx
            viol += 0.5 * xg @ S @ xg > fx - sigma * h * (gx @ gx)
    cr.add("armijo_violations", viol, 0, viol == 0)
    return cr


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}


def run_one(number):
    t0 = time.perf_counter()
    cr = CRITERIA[number]()
    cr.seconds = time.perf_counter() - t0
    return cr


def run_all(numbers=None):
    return [run_one(n) for n in (numbers or sorted(CRITERIA))]
