"""Command-line experiment runner.

Usage::

    flatstep list
    flatstep acceptance [--only 1,5,9] [--out report.json]
    flatstep <experiment> [--config path.json] [--seed N] [--out path.csv] [--param key=value ...]

Each experiment writes a CSV (first line ``# schema=<experiment>/v1``,
then a header row, floats in shortest round-trip form) to ``--out``
(default ``<experiment>.csv``) and a JSON summary next to it with the
suffix ``.json``.  The summary holds ``inputs`` (the resolved
configuration, which re-parses to the same configuration), ``derived``
scalars and a ``checks`` array.

The configuration file is JSON with the keys ``experiment``, ``seed``,
``params`` and ``out``; command-line flags override it and unknown keys
are rejected.  Exit codes: 0 success, 2 invalid input, 3 numerical
failure; ``acceptance`` exits 1 when a criterion fails.  Errors are
written to standard error as one JSON object per line.

``FLATSTEP_THREADS`` caps the worker threads used for independent
replicas (default 1); results do not depend on it.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from .errors import FlatstepError, InvalidInput, ValidationError

__all__ = ["ExperimentConfig", "EXPERIMENTS", "parse_config", "run", "main"]

REQUIRED = object()


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, bool, str, floats, ints, strs
    default: object = REQUIRED
    help: str = ""


@dataclass(frozen=True)
class Experiment:
    name: str
    columns: tuple
    params: dict
    func: object
    help: str


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    out_path: str = None

    def as_dict(self):
        return {"experiment": self.experiment, "seed": self.seed, "params": dict(self.params),
                "out": self.out_path}


# ---------------------------------------------------------------------------
# Parameter handling


def _coerce(name, kind, value):
    def scalar(k, v):
        if k == "int":
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise InvalidInput(f"param {name!r} must be an integer")
            return int(v)
        if k == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidInput(f"param {name!r} must be a number")
            return float(v)
        if k == "bool":
            if isinstance(v, bool):
                return v
            if v in ("true", "false"):
                return v == "true"
            raise InvalidInput(f"param {name!r} must be true or false")
        if not isinstance(v, str):
            raise InvalidInput(f"param {name!r} must be a string")
        return v

    if kind in ("floats", "ints", "strs"):
        if not isinstance(value, (list, tuple)):
            value = [value]
        return [scalar(kind[:-1], v) for v in value]
    return scalar(kind, value)


def _parse_flag_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(experiment, config_path=None, seed=None, out=None, param_flags=()):
    """Merge a JSON config file with command-line overrides and validate.

    Raises
    ------
    InvalidInput
        Unknown experiment, unknown or malformed keys, or a missing
        required parameter (named in the message).
    """
    if experiment not in EXPERIMENTS:
        raise InvalidInput(f"unknown experiment {experiment!r}")
    entry = EXPERIMENTS[experiment]
    data = {}
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInput("config must be a JSON object")
        unknown = set(data) - {"experiment", "seed", "params", "out"}
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        if data.get("experiment", experiment) != experiment:
            raise InvalidInput(f"config is for experiment {data['experiment']!r}, not {experiment!r}")
    raw = dict(data.get("params") or {})
    if not isinstance(raw, dict):
        raise InvalidInput("params must be a JSON object")
    for flag in param_flags:
        key, sep, val = flag.partition("=")
        if not sep or not key:
            raise InvalidInput(f"--param expects key=value, got {flag!r}")
        raw[key] = _parse_flag_value(val)
    unknown = set(raw) - set(entry.params)
    if unknown:
        raise InvalidInput(f"unknown params for {experiment}: {sorted(unknown)}")
    params = {}
    for name, p in entry.params.items():
        if name in raw:
            params[name] = _coerce(name, p.kind, raw[name])
        elif p.default is REQUIRED:
            raise InvalidInput(f"missing required param {name!r}")
        else:
            params[name] = p.default
    s = seed if seed is not None else data.get("seed", 0)
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise InvalidInput("seed must be a nonnegative integer")
    o = out if out is not None else data.get("out")
    if o is None:
        o = f"{experiment}.csv"
    return ExperimentConfig(experiment, int(s), params, str(o))


def _threads():
    raw = os.environ.get("FLATSTEP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInput(f"FLATSTEP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InvalidInput("FLATSTEP_THREADS must be a positive integer")
    return n


def _pmap(fn, items):
    items = list(items)
    n = min(_threads(), len(items)) if items else 1
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _check(name, value, tolerance, passed):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        value = repr(value)
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed)}


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _spd(rng, n, lo=0.5, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(rng.uniform(lo, hi, n)) @ Q.T


def _need(cond, msg):
    if not cond:
        raise InvalidInput(msg)


# ---------------------------------------------------------------------------
# Experiments; each returns (rows, derived, checks)


def exp_calibrate_slopes(seed, p):
    from .calibration import calibrated_step_A, calibrated_step_B, curvature_filtered_step, gauge, plain_step, \
        reference_map
    from .operator_core import OperatorPair

    n = p["n"]
    _need(n >= 2, "n must be at least 2")
    _need(0 < p["h_min"] < p["h_max"], "need 0 < h_min < h_max")
    _need(p["n_h"] >= 3, "n_h must be at least 3")
    from .rng import generator
    rng = generator(seed, 0)
    pair = OperatorPair(_spd(rng, n), _spd(rng, n))
    g = rng.standard_normal(n)
    x = rng.standard_normal(n)
    Z = gauge(pair).Z
    Zr = gauge(pair, reverse=True).Z
    hs = np.logspace(math.log10(p["h_min"]), math.log10(p["h_max"]), p["n_h"])
    rows = []
    for h in hs:
        R, Rr = reference_map(pair, h, Z, Zr)
        ref = x + (R - np.eye(n)) @ g
        B = calibrated_step_B(pair, g, h, x).x_next
        rows.append([
            float(h),
            float(np.linalg.norm(plain_step(pair, g, h, x, composite=True).x_next - ref)),
            float(np.linalg.norm(calibrated_step_A(pair, g, h, Z, x, form="increment").x_next - B)),
            float(np.linalg.norm(B - ref)),
            float(np.linalg.norm(curvature_filtered_step(pair, g, h, 1.0, x).x_next - (x + (Rr - np.eye(n)) @ g))),
        ])
    arr = np.array(rows)
    slopes = {k: _slope(hs, arr[:, i]) for i, k in enumerate(("plain", "A", "B", "filtered"), start=1)}
    checks = [_check(f"slope_{k}", v, f"{3.0 if k != 'plain' else 2.0}+-0.15",
                     abs(v - (2.0 if k == "plain" else 3.0)) <= 0.15) for k, v in slopes.items()]
    return rows, {"slopes": slopes}, checks


def exp_order_select(seed, p):
    from .calibration import apply_order, order_diagnostic, select_order
    from .rng import generator

    n = p["n"]
    _need(n >= 2, "n must be at least 2")
    _need(0 < p["sigma"] < 0.5, "sigma must lie in (0, 1/2)")
    rng = generator(seed, 0)
    if p["commuting"]:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T
        B = Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T
    else:
        A, B = _spd(rng, n), _spd(rng, n)
    fa, fb = (lambda v: A @ v), (lambda v: B @ v)
    g = rng.standard_normal(n)
    hs = np.logspace(-3, -1, p["n_h"])
    deltas = [order_diagnostic(fa, fb, g, h)[0] for h in hs]
    rows = [[float(h), float(d)] for h, d in zip(hs, deltas)]
    sel = select_order(fa, fb, g, p["h_max"], p["sigma"], p["tau_diag"])
    S = A + B
    h_win = 2 * (1 - p["sigma"]) / float(np.linalg.eigvalsh(S)[-1])
    viol = 0
    for _ in range(p["n_x"]):
        x = rng.standard_normal(n)
        gx = S @ x
        target = 0.5 * x @ S @ x - p["sigma"] * h_win * (gx @ gx)
        for order in ("dr", "rd"):
            xp = apply_order(fa, fb, x, h_win, order)
            viol += 0.5 * xp @ S @ xp > target
    derived = {"h": sel.h, "lambda_hat": sel.lambda_hat, "delta": sel.delta, "order_chosen": sel.order_chosen,
               "halvings": sel.halvings, "converged": sel.converged, "armijo_h": h_win,
               "max_delta": float(max(deltas))}
    checks = [_check("selection_converged", sel.converged, True, sel.converged),
              _check("armijo_violations", int(viol), 0, viol == 0)]
    if p["commuting"]:
        checks.append(_check("max_delta", float(max(deltas)), 1e-12, max(deltas) <= 1e-12))
    else:
        s = _slope(hs, deltas)
        derived["delta_slope"] = s
        checks.append(_check("delta_slope", s, "1.0+-0.1", abs(s - 1.0) <= 0.1))
    return rows, derived, checks


def exp_stability_map(seed, p):
    from .multistep import MethodCoefficients, jury_endpoints_m1

    mu, L, eta1 = p["mu"], p["L"], p["eta1"]
    _need(0 < mu < L, "need 0 < mu < L")
    _need(p["n_eta0"] >= 1 and p["n_gamma1"] >= 1 and p["n_lambda"] >= 2, "grid sizes must be positive")
    _need(p["eta0_max"] > 0, "eta0_max must be positive")
    eta0s = p["eta0_max"] * np.arange(1, p["n_eta0"] + 1) / p["n_eta0"]
    gammas = np.linspace(p["gamma1_min"], p["gamma1_max"], p["n_gamma1"])
    lams = np.linspace(mu, L, p["n_lambda"])
    rows = []
    mismatch = 0
    for e0 in eta0s:
        # closed-form root moduli on the lambda grid, vectorised over gamma1
        a = 1.0 - e0 * lams[None, :] + gammas[:, None]
        b = gammas[:, None] - eta1 * lams[None, :]
        disc = a * a - 4 * b
        sq = np.sqrt(np.abs(disc))
        real_max = 0.5 * np.maximum(np.abs(a + sq), np.abs(a - sq))
        modulus = np.where(disc < 0, np.sqrt(np.abs(b)), real_max)
        rho_bar = modulus.max(axis=1)
        for g1, rb in zip(gammas, rho_bar):
            verdict = jury_endpoints_m1(MethodCoefficients.m1(float(e0), eta1, float(g1)), mu, L)
            if abs(rb - 1.0) > 1e-8 and verdict != (rb < 1.0):
                mismatch += 1
            rows.append([float(e0), float(g1), int(verdict), float(rb)])
    stable = sum(r[2] for r in rows)
    return rows, {"n_points": len(rows), "n_stable": stable}, [
        _check("jury_vs_root_modulus_mismatches", mismatch, 0, mismatch == 0)]


def exp_decay_ringing(seed, p):
    from .errors import OutOfDomain
    from .multistep import MethodCoefficients, empirical_decay_rate, modal_multipliers_m1, ringing_frequency, \
        simulate_deterministic, theta_m1

    c = MethodCoefficients.m1(p["eta0"], p["eta1"], p["gamma1"])
    lam = p["lam"]
    k0, k1 = p["k0"], p["k1"]
    _need(1 <= k0 < k1 and k1 + 1 <= p["k"], "need 1 <= k0 < k1 < k")
    mm = modal_multipliers_m1(c, lam)
    if not mm.oscillatory:
        raise OutOfDomain(f"mode at lambda={lam} is not oscillatory")
    y = simulate_deterministic(c, lam, [1.0, 0.0], p["k"])
    rows = [[k + 1, float(v)] for k, v in enumerate(y)]
    rate = empirical_decay_rate(y, k0, k1)
    pred = abs(p["gamma1"] - p["eta1"] * lam)
    freq, bw = ringing_frequency(y[k0:k1 + 1], math.sqrt(rate))
    fpred = theta_m1(c, lam) / (2 * math.pi)
    derived = {"rate_predicted": pred, "rate_measured": rate, "freq_predicted": fpred, "freq_measured": freq,
               "bin_width": bw}
    checks = [_check("rate_rel_err", abs(rate - pred) / pred, 0.01, abs(rate - pred) <= 0.01 * pred),
              _check("freq_err_bins", abs(freq - fpred) / bw, 1.0, abs(freq - fpred) <= bw)]
    return rows, derived, checks


def exp_noise_floor(seed, p):
    from .multistep import MethodCoefficients, SpectralMeasure
    from .stochastic import NoiseModel, burn_in, floor_upper_bound, lyap_shared, lyap_vec, noise_floor, \
        p11_closed_m1, psd_variance, simulate_modal

    c = MethodCoefficients.m1(p["eta0"], p["eta1"], p["gamma1"])
    lams, ws = p["lams"], p["weights"]
    _need(len(lams) == len(ws) and lams, "lams and weights must be nonempty and of equal length")
    _need(p["steps"] >= 1000, "steps must be at least 1000")
    nu = SpectralMeasure(tuple(zip(lams, ws)), min(lams), max(lams))
    noise = NoiseModel(p["sigma2"], seed=seed, innovations=p["innovations"])
    fresh = p["innovations"] == "fresh"

    def atom(i):
        lam = lams[i]
        cov = lyap_vec(c, lam, p["sigma2"]) if fresh else lyap_shared(c, lam, p["sigma2"])
        closed = p11_closed_m1(c, lam, p["sigma2"]) if fresh else float("nan")
        psd = psd_variance(c, lam, p["sigma2"], innovations=p["innovations"])
        y = simulate_modal(c, lam, noise, [0.0, 0.0], p["steps"], stream=i)[burn_in(c, lam):]
        return [float(lam), float(ws[i]), closed, cov.p11, psd, float(np.mean(y * y))]

    rows = _pmap(atom, range(len(lams)))
    floor = noise_floor(c, nu, noise)
    plateau = 0.5 * math.fsum(w * lam * r[5] for (lam, w), r in zip(nu.atoms, rows))
    derived = {"floor": floor, "mc_plateau": plateau, "rel_gap": abs(plateau - floor) / floor}
    checks = []
    if fresh:
        derived["upper_bound"] = floor_upper_bound(c, nu, noise)
        derived["upper_bound_certified"] = floor_upper_bound(c, nu, noise, certified=True)
        cf = max(abs(r[2] - r[3]) / max(1.0, r[3]) for r in rows)
        checks.append(_check("p11_closed_vs_lyapunov", cf, 1e-10, cf <= 1e-10))
        checks.append(_check("certified_bound_ge_floor", derived["upper_bound_certified"], f">={floor!r}",
                             derived["upper_bound_certified"] >= floor * (1 - 1e-12)))
    ps = max(abs(r[4] - r[3]) / r[3] for r in rows)
    checks.append(_check("psd_vs_lyapunov", ps, 1e-6, ps <= 1e-6))
    checks.append(_check("mc_plateau_rel_gap", derived["rel_gap"], 0.1, derived["rel_gap"] <= 0.1))
    return rows, derived, checks


def exp_ellipsoid_run(seed, p):
    from .ellipsoid import bulk_shrink, iteration_bound, random_polytope, run_feasibility

    n, R, r = p["n"], p["R"], p["r"]
    oracle, A, b, _ = random_polytope(n, R, r, seed=seed)
    found, state, ledger = run_feasibility(oracle, np.zeros(n), R, r, p["max_iter"])
    rows = [[e.k, e.delta_log_tau_bulk, int(e.switch), e.switch_jump, e.degenerate or ""] for e in ledger.entries]
    bound = iteration_bound(n, R, r)
    ident = max((abs(e.delta_log_tau_bulk - bulk_shrink(n)) for e in ledger.entries), default=0.0)
    derived = {"found": found, "iterations": state.k, "bound": bound, "bulk_total": ledger.bulk_total,
               "jump_total": ledger.jump_total, "switches": len(ledger.switches), "x": state.x.tolist()}
    checks = [_check("found", found, True, found),
              _check("iterations_within_bound", state.k, bound, state.k <= bound),
              _check("point_feasible", float(np.max(A @ state.x - b)), "<=0", bool(np.all(A @ state.x <= b))),
              _check("bulk_step_identity", ident, 1e-10, ident <= 1e-10)]
    return rows, derived, checks


def exp_logdet_bench(seed, p):
    from .logdet import PROBE_KINDS, ProbeConfig, logdet_chol, slq_logdet
    from .rng import generator

    dim = p["dim"]
    _need(dim >= 2, "dim must be at least 2")
    m = p["lanczos_steps"] or dim
    for k in p["kinds"]:
        _need(k in PROBE_KINDS, f"unknown probe kind {k!r}")
    rng = generator(seed, 0)
    X = rng.normal(size=(dim, dim))
    A = X @ X.T / dim + p["shift"] * np.eye(dim)
    exact = logdet_chol(A)

    def one(kind):
        est, se, info = slq_logdet(A, ProbeConfig(p["n_probes"], kind, seed, m), return_info=True)
        return [kind, info["n_probes"], m, est, se, exact, abs(est - exact) / abs(exact)]

    rows = _pmap(one, p["kinds"])
    checks = []
    for r in rows:
        if r[0] == "orthogonal" and m == dim:
            checks.append(_check("orthogonal_rel_err", r[6], 1e-6, r[6] <= 1e-6))
        elif m == dim:
            checks.append(_check(f"{r[0]}_within_4se", abs(r[3] - exact) / r[4] if r[4] > 0 else 0.0, 4.0,
                                 abs(r[3] - exact) <= 4 * r[4]))
    return rows, {"exact": exact}, checks


def exp_hodge_demo(seed, p):
    from .hodge import Cochain, Complex2D, coboundary, curvature_cochain, gauge_reduce, norm2
    from .operator_core import OperatorPair, curvature_energy
    from .rng import generator

    cx = Complex2D(p["n_t"], p["n_s"], p["periodic"])
    d = p["d"]
    _need(d >= 1, "d must be positive")
    rng = generator(seed, 0)

    def sym():
        X = rng.normal(size=(d, d))
        return 0.5 * (X + X.T)

    pairs = [OperatorPair(sym(), sym()) for _ in range(cx.n_faces)]
    c, reports = curvature_cochain(pairs, p["h"], cx)
    xi, harm, energy, info = gauge_reduce(cx, c, tol=p["tol"], return_info=True)
    rows = []
    for i in range(cx.n_t):
        for j in range(cx.n_s):
            f = cx.face(i, j)
            rows.append([f, i, j, float(np.sum(c.values[f] ** 2)), float(np.sum(harm.values[f] ** 2))])
    total = norm2(c)
    exact_in = coboundary(cx, Cochain(1, rng.normal(size=(cx.n_edges, d, d))))
    exact_ratio = gauge_reduce(cx, exact_in, tol=1e-14)[2] / norm2(exact_in)
    split = abs(total - norm2(coboundary(cx, xi)) - energy) / total if total > 0 else 0.0
    ce = curvature_energy(reports)
    derived = {"curvature_energy": ce, "harmonic_energy": energy, "iterations": info["iterations"],
               "relative_residual": info["relative_residual"], "adjoint_residual": info["adjoint_residual"],
               "exact_input_energy_ratio": exact_ratio}
    checks = [_check("cochain_energy_vs_curvature_energy", abs(total - ce) / max(ce, 1e-300), 1e-12,
                     abs(total - ce) <= 1e-12 * max(ce, 1e-300)),
              _check("orthogonal_split", split, p["tol"], split <= p["tol"]),
              _check("exact_input_energy_ratio", exact_ratio, 1e-16, exact_ratio <= 1e-16)]
    return rows, derived, checks


def exp_chebyshev_compare(seed, p):
    from .multistep import chebyshev_extrema, chebyshev_filter, gd_residual_rate

    mu, L = p["mu"], p["L"]
    _need(0 < mu < L, "need 0 < mu < L")
    target = (math.sqrt(L / mu) - 1) / (math.sqrt(L / mu) + 1)
    gd = gd_residual_rate(mu, L)

    def one(N):
        f = chebyshev_filter(N, mu, L)
        pos, vals = chebyshev_extrema(f)
        dev = float(np.max(np.abs(np.abs(vals) - f.sup_exact)) / f.sup_exact)
        alt = bool(np.all(np.sign(vals[1:]) == -np.sign(vals[:-1])))
        return [N, f.sup_exact, f.rate, gd, len(pos), dev, int(alt)]

    rows = _pmap(one, p["Ns"])
    checks = []
    for r in rows:
        checks.append(_check(f"N{r[0]}_equioscillation", r[5], 1e-8, r[4] == r[0] + 1 and r[6] and r[5] <= 1e-8))
        checks.append(_check(f"N{r[0]}_beats_gd", r[2], gd, r[2] < gd))
        if r[0] >= 200:
            checks.append(_check(f"N{r[0]}_rate_err", abs(r[2] - target), 1e-3, abs(r[2] - target) <= 1e-3))
    return rows, {"target_rate": target, "gd_rate": gd}, checks


def exp_adaptive_precond(seed, p):
    from .calibration import adaptive_update, inverse_recursion, parallel_sum
    from .operator_core import commutator
    from .rng import generator

    n = p["n"]
    _need(n >= 2 and p["steps"] >= 1, "need n >= 2 and steps >= 1")
    rng = generator(seed, 0)
    H, E = _spd(rng, n), _spd(rng, n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Ht = Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T
    Et = Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T
    rows = [[0, float(np.linalg.norm(commutator(E, H))), float(np.linalg.norm(parallel_sum(H, E))), 0.0]]
    worst = 0.0
    for k in range(1, p["steps"] + 1):
        Ginv = inverse_recursion(H, E, Ht, Et, p["eta"], p["zeta"])
        H, E, G = adaptive_update(H, E, Ht, Et, p["eta"], p["zeta"])
        err = float(np.linalg.norm(G @ Ginv - np.eye(n)))
        worst = max(worst, err)
        rows.append([k, float(np.linalg.norm(commutator(E, H))), float(np.linalg.norm(G)), err])
    checks = [_check("inverse_recursion_err", worst, 1e-8, worst <= 1e-8),
              _check("commutator_decreased", rows[-1][1], f"<{rows[0][1]!r}", rows[-1][1] < rows[0][1])]
    return rows, {"commutator_initial": rows[0][1], "commutator_final": rows[-1][1]}, checks


EXPERIMENTS = {e.name: e for e in (
    Experiment("calibrate-slopes", ("h", "err_plain", "err_A", "err_B", "err_filtered"), {
        "n": Param("int", 8, "dimension of the random SPD pair"),
        "h_min": Param("float", 1e-3), "h_max": Param("float", 1e-1), "n_h": Param("int", 9),
    }, exp_calibrate_slopes, "one-step errors of plain, A, B and filtered steps; fitted slopes"),
    Experiment("order-select", ("h", "delta"), {
        "n": Param("int", 6), "sigma": Param("float", 0.1), "tau_diag": Param("float", 1e-3),
        "h_max": Param("float", 1.0), "commuting": Param("bool", False), "n_h": Param("int", 7),
        "n_x": Param("int", 100, "random points for the Armijo window check"),
    }, exp_order_select, "order diagnostic delta(h), step selection and Armijo window"),
    Experiment("stability-map", ("eta0", "gamma1", "schur_stable", "rho_bar"), {
        "eta1": Param("float", help="fixed eta_1"), "mu": Param("float"), "L": Param("float"),
        "eta0_max": Param("float", 4.0), "gamma1_min": Param("float", -1.0), "gamma1_max": Param("float", 1.0),
        "n_eta0": Param("int", 200), "n_gamma1": Param("int", 200), "n_lambda": Param("int", 64),
    }, exp_stability_map, "Schur verdicts and worst root modulus over an (eta0, gamma1) grid"),
    Experiment("decay-ringing", ("k", "y"), {
        "eta0": Param("float", 0.1), "eta1": Param("float", 0.05), "gamma1": Param("float", 0.95),
        "lam": Param("float", 1.0), "k": Param("int", 201), "k0": Param("int", 100), "k1": Param("int", 199),
    }, exp_decay_ringing, "simulated mode; measured vs predicted decay rate and ringing frequency"),
    Experiment("noise-floor", ("lam", "weight", "p11_closed", "p11_lyapunov", "p11_psd", "p11_mc"), {
        "eta0": Param("float", 0.4), "eta1": Param("float", 0.05), "gamma1": Param("float", 0.5),
        "lams": Param("floats", [0.5, 1.5]), "weights": Param("floats", [1.0, 1.0]),
        "sigma2": Param("float", 1.0), "steps": Param("int", 1_000_000),
        "innovations": Param("str", "fresh"),
    }, exp_noise_floor, "stationary variances per atom; analytic floor, bounds and Monte Carlo plateau"),
    Experiment("ellipsoid-run", ("k", "delta_log_tau_bulk", "switch", "switch_jump", "degenerate"), {
        "n": Param("int", 4), "R": Param("float", 40.0), "r": Param("float", 1.0),
        "max_iter": Param("int", 10_000),
    }, exp_ellipsoid_run, "central-cut run on a random polytope with its tau ledger"),
    Experiment("logdet-bench", ("probe_kind", "n_probes", "lanczos_steps", "estimate", "stderr", "exact",
                                "rel_error"), {
        "dim": Param("int", 64), "n_probes": Param("int", 256),
        "kinds": Param("strs", ["orthogonal", "rademacher", "gaussian"]),
        "lanczos_steps": Param("int", 0, "0 means dim"), "shift": Param("float", 0.5),
    }, exp_logdet_bench, "SLQ log-det estimates per probe kind against Cholesky"),
    Experiment("hodge-demo", ("face", "i", "j", "curvature_norm2", "harmonic_norm2"), {
        "n_t": Param("int", 6), "n_s": Param("int", 6), "d": Param("int", 3),
        "periodic": Param("bool", False), "h": Param("float", 0.05), "tol": Param("float", 1e-12),
    }, exp_hodge_demo, "curvature cochain of random pairs and its gauge reduction"),
    Experiment("chebyshev-compare", ("N", "sup", "rate", "gd_rate", "n_extrema", "equiosc_rel_dev",
                                     "alternating"), {
        "mu": Param("float", 1.0), "L": Param("float", 100.0), "Ns": Param("ints", [10, 50, 100, 200, 600]),
    }, exp_chebyshev_compare, "Chebyshev residual sup, N-th root rate and extrema vs gradient descent"),
    Experiment("adaptive-precond", ("step", "commutator_norm", "G_norm", "inverse_recursion_err"), {
        "n": Param("int", 6), "eta": Param("float", 0.2), "zeta": Param("float", 0.2), "steps": Param("int", 10),
    }, exp_adaptive_precond, "parallel-sum preconditioner updates toward commuting targets"),
)}


# ---------------------------------------------------------------------------
# Output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(experiment, rows):
    buf = io.StringIO()
    buf.write(f"# schema={experiment}/v1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPERIMENTS[experiment].columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def run(config):
    """Run one experiment and write its CSV and JSON summary.

    Returns the summary dict.  Errors propagate as :class:`FlatstepError`.
    """
    entry = EXPERIMENTS[config.experiment]
    rows, derived, checks = entry.func(config.seed, config.params)
    out = Path(config.out_path)
    summary = {
        "experiment": config.experiment,
        "schema": f"{config.experiment}/v1",
        "inputs": config.as_dict(),
        "derived": derived,
        "checks": checks,
        "all_checks_passed": all(c["passed"] for c in checks),
        "csv": str(out),
    }
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    out.write_text(render_csv(config.experiment, rows))
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    return summary


# ---------------------------------------------------------------------------
# Entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInput(message)


def _error_line(exc, code):
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code})


def _build_parser():
    parser = _Parser(prog="flatstep", description="Run flatstep experiments and the acceptance suite.",
                     formatter_class=argparse.RawDescriptionHelpFormatter,
                     epilog="CSV schemas:\n" + "\n".join(
                         f"  {e.name}: {', '.join(e.columns)}" for e in EXPERIMENTS.values()))
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list experiments, their CSV columns and parameters")
    acc = sub.add_parser("acceptance", help="run the acceptance criteria")
    acc.add_argument("--only", help="comma-separated criterion numbers")
    acc.add_argument("--out", help="write a JSON report here")
    for e in EXPERIMENTS.values():
        p = sub.add_parser(e.name, help=e.help, description=f"{e.help}. CSV columns: {', '.join(e.columns)}")
        p.add_argument("--config", help="JSON file with experiment, seed, params, out")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"CSV path (default {e.name}.csv); summary goes to the .json sibling")
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="override a parameter; values are parsed as JSON when possible")
    return parser


def _cmd_list():
    for e in EXPERIMENTS.values():
        print(f"{e.name}  schema={e.name}/v1  columns: {', '.join(e.columns)}")
        for name, p in e.params.items():
            default = "required" if p.default is REQUIRED else f"default {p.default!r}"
            print(f"    {name} ({p.kind}, {default}){': ' + p.help if p.help else ''}")
    return 0


def _cmd_acceptance(args):
    from .acceptance import CRITERIA, run_all

    numbers = None
    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",")]
        except ValueError:
            raise InvalidInput("--only expects comma-separated integers") from None
        bad = [n for n in numbers if n not in CRITERIA]
        if bad:
            raise InvalidInput(f"unknown criteria {bad}")
    results = run_all(numbers)
    for cr in results:
        print(f"{cr.line()}  [{cr.seconds:.1f}s]")
    if args.out:
        report = [{"number": cr.number, "title": cr.title, "passed": cr.passed, "seconds": cr.seconds,
                   "notes": cr.notes, "checks": [c.as_dict() for c in cr.checks]} for cr in results]
        Path(args.out).write_text(json.dumps(report, indent=2, default=_json_default) + "\n")
    return 0 if all(cr.passed for cr in results) else 1


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        _threads()
        if args.command == "list":
            return _cmd_list()
        if args.command == "acceptance":
            return _cmd_acceptance(args)
        config = parse_config(args.command, args.config, args.seed, args.out, args.param)
        summary = run(config)
        print(json.dumps({"experiment": config.experiment, "csv": summary["csv"],
                          "json": str(Path(summary["csv"]).with_suffix(".json")),
                          "all_checks_passed": summary["all_checks_passed"]}))
        return 0
    except ValidationError as exc:
        print(_error_line(exc, 2), file=sys.stderr)
        return 2
    except (FlatstepError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(_error_line(exc, 3), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
