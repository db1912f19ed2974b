"""Noise analysis of m-step methods on quadratic modes.

With gradient noise the modal recursion becomes an ARMA process::

    y_{k+1} = sum_j alpha_j y_{k-j} + zeta_k,   zeta_k = -sum_j eta_j xi_{k-j}

where ``alpha`` is the first row of the companion matrix.  Here the
m = 1 recursion is written ``y_{k+1} = a y_k + b y_{k-1} + zeta_k`` with
``b = -(gamma_1 - eta_1 lambda)``, the opposite sign to
:mod:`flatstep.multistep`; the state matrix ``[[a, b], [1, 0]]`` is the
same companion matrix in both modules.

Two innovation models are supported:

``"fresh"`` (default)
    Each ``eta_j`` term sees an independent draw, so ``zeta_k`` is white
    with variance ``sigma**2 * sum(eta**2)``.  The stationary covariance
    then solves the pure Lyapunov equation
    ``P = A P A^T + sigma**2 sum(eta**2) e1 e1^T`` exactly.
``"shared"``
    The same draw ``xi_k`` is reused by later steps, so ``zeta`` is an
    MA(m) process.  Its covariance needs the state augmented with
    ``xi_{k-1..k-m}``; see :func:`lyap_shared`.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.signal

from .errors import InvalidInput, NumericalError, OutOfDomain, Unstable
from .multistep import companion, roots
from .rng import generator

__all__ = [
    "NoiseModel",
    "StationaryCovariance",
    "INNOVATIONS",
    "simulate_modal",
    "p11_closed_m1",
    "lyap_vec",
    "lyap_shared",
    "noise_floor",
    "floor_upper_bound",
    "psd_variance",
    "psd_curve",
    "expectation_bound",
    "expectation_bound_terms",
    "second_moment_exact",
    "fit_damped_cosine",
    "burn_in",
]

INNOVATIONS = ("fresh", "shared")


@dataclass(frozen=True)
class NoiseModel:
    """Per-atom noise variance and base seed.

    ``sigma2`` may be a scalar (same variance on every mode), a mapping
    ``lambda -> variance`` or a callable.
    """

    sigma2: object = 1.0
    seed: int = 0
    innovations: str = "fresh"

    def __post_init__(self):
        if self.innovations not in INNOVATIONS:
            raise InvalidInput(f"innovations must be one of {INNOVATIONS}")

    def variance(self, lam):
        s = self.sigma2
        if callable(s):
            v = s(lam)
        elif isinstance(s, dict):
            try:
                v = s[lam]
            except KeyError as exc:
                raise InvalidInput(f"no noise variance for lambda={lam}") from exc
        else:
            v = s
        v = float(v)
        if not (math.isfinite(v) and v >= 0):
            raise InvalidInput("noise variance must be finite and nonnegative")
        return v


@dataclass(frozen=True)
class StationaryCovariance:
    lambda_: float
    P: np.ndarray
    p11: float
    residual: float = 0.0


def _state_matrix(coeffs, lam):
    A = companion(coeffs, lam)
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    return A, rho


def _require_stable(rho, lam):
    if rho >= 1.0:
        raise Unstable(f"spectral radius {rho} >= 1 at lambda={lam}")


def burn_in(coeffs, lam):
    """Steps discarded before stationary statistics: ``10 / (1 - rho_max)``."""
    _, rho = _state_matrix(coeffs, lam)
    _require_stable(rho, lam)
    return int(math.ceil(10.0 / (1.0 - rho)))


def simulate_modal(coeffs, lam, noise, y_init, k, replicas=None, stream=0):
    """Simulate the noisy modal recursion.

    Parameters
    ----------
    y_init : sequence
        History ``[y_0, y_-1, ..., y_-m]``.
    k : int
        Number of steps; the returned trajectory is ``y_1..y_k``.
    replicas : int, optional
        If given, simulate that many independent copies (rows).
    stream : int
        Extra index folded into the seed (e.g. the atom index).

    Noise before step 0 is taken as zero.
    """
    m = coeffs.m
    u0 = np.asarray(y_init, dtype=float)
    if u0.shape != (m + 1,):
        raise InvalidInput(f"y_init must have length m+1={m + 1}")
    if k < 1:
        raise InvalidInput("k must be at least 1")
    sigma = math.sqrt(noise.variance(lam))
    A = companion(coeffs, lam)
    den = np.concatenate([[1.0], -A[0, :]])
    zi = scipy.signal.lfiltic([1.0], den, u0)
    R = 1 if replicas is None else int(replicas)
    rng = generator(noise.seed, stream)
    eta = np.asarray(coeffs.eta)
    if noise.innovations == "fresh":
        zeta = -sigma * math.sqrt(float(np.sum(eta**2))) * rng.standard_normal((R, k))
    else:
        xi = sigma * rng.standard_normal((R, k))
        zeta = -scipy.signal.lfilter(eta, [1.0], xi, axis=1)
    y = scipy.signal.lfilter([1.0], den, zeta, axis=1, zi=np.tile(zi, (R, 1)))[0]
    return y[0] if replicas is None else y


def _check_resid(P, A, Q):
    return float(np.linalg.norm(P - A @ P @ A.T - Q))


def lyap_vec(coeffs, lam, sigma2):
    """Stationary covariance of the fresh-innovation state by a Kronecker solve.

    ``vec P = (I - A kron A)^{-1} vec Q`` with
    ``Q = sigma2 * sum(eta**2) * e1 e1^T`` (row-major ``vec``).
    """
    A, rho = _state_matrix(coeffs, lam)
    _require_stable(rho, lam)
    n = A.shape[0]
    Q = np.zeros((n, n))
    Q[0, 0] = sigma2 * float(np.sum(np.square(coeffs.eta)))
    P = np.linalg.solve(np.eye(n * n) - np.kron(A, A), Q.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    return StationaryCovariance(float(lam), P, float(P[0, 0]), _check_resid(P, A, Q))


def _augmented(coeffs, lam):
    m = coeffs.m
    A = companion(coeffs, lam)
    eta = np.asarray(coeffs.eta)
    n = 2 * m + 1
    F = np.zeros((n, n))
    F[:m + 1, :m + 1] = A
    F[0, m + 1:] = -eta[1:]
    if m > 1:
        F[m + 2:, m + 1:n - 1] = np.eye(m - 1)
    G = np.zeros(n)
    G[0] = -eta[0]
    G[m + 1] = 1.0
    return F, G


def lyap_shared(coeffs, lam, sigma2):
    """Stationary covariance with shared innovations (augmented state).

    The state ``[y_k..y_{k-m}, xi_{k-1}..xi_{k-m}]`` is driven by white
    ``xi_k``; the returned ``P`` is the ``(m+1) x (m+1)`` block for ``y``.
    """
    F, G = _augmented(coeffs, lam)
    rho = float(np.max(np.abs(np.linalg.eigvals(companion(coeffs, lam)))))
    _require_stable(rho, lam)
    n = F.shape[0]
    Q = sigma2 * np.outer(G, G)
    P = np.linalg.solve(np.eye(n * n) - np.kron(F, F), Q.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    m1 = coeffs.m + 1
    return StationaryCovariance(float(lam), P[:m1, :m1], float(P[0, 0]), _check_resid(P, F, Q))


def p11_closed_m1(coeffs, lam, sigma2):
    """Closed-form stationary variance for m = 1 (fresh innovations).

    ``p11 = sigma2 (eta_0**2 + eta_1**2) / D`` with
    ``D = 1 - a**2 - b**2 - 2 a**2 b / (1 - b)``, ``a = 1 - eta_0 lambda + gamma_1``
    and ``b = -(gamma_1 - eta_1 lambda)``.
    """
    if coeffs.m != 1:
        raise OutOfDomain("closed form is for m = 1")
    e0, e1 = coeffs.eta
    a = 1.0 - e0 * lam + coeffs.gamma[0]
    b = -(coeffs.gamma[0] - e1 * lam)
    if b == 1.0:
        raise OutOfDomain("b = 1")
    rho = float(np.max(np.abs(roots(coeffs, lam))))
    if rho >= 1.0:
        raise OutOfDomain(f"not Schur stable at lambda={lam}")
    D = 1.0 - a * a - b * b - 2.0 * a * a * b / (1.0 - b)
    return sigma2 * (e0 * e0 + e1 * e1) / D


def _cov(coeffs, lam, sigma2, innovations):
    if innovations == "fresh":
        return lyap_vec(coeffs, lam, sigma2)
    return lyap_shared(coeffs, lam, sigma2)


def noise_floor(coeffs, nu, noise):
    """Stationary ``E[f - f*] = (1/2) sum_atoms w lambda p11(lambda)``."""
    return 0.5 * math.fsum(
        w * lam * _cov(coeffs, lam, noise.variance(lam), noise.innovations).p11 for lam, w in nu.atoms)


def floor_upper_bound(coeffs, nu, noise, certified=False):
    """Spectral-radius bound ``(1/2) sum w lambda sigma2 sum(eta**2) / (1 - rho(A)**2)``.

    The plain form is only valid when ``A`` is normal enough; for
    strongly non-normal companions (near-double roots) it can fall below
    the exact floor.  With ``certified=True`` each atom is multiplied by
    ``cond(V)**2`` where ``A = V D V^{-1}``, which is a true upper bound
    because ``||A^j||_2 <= cond(V) rho**j``.
    """
    if noise.innovations != "fresh":
        raise InvalidInput("the spectral-radius bound is for fresh innovations")
    q = float(np.sum(np.square(coeffs.eta)))
    total = 0.0
    for lam, w in nu.atoms:
        A, rho = _state_matrix(coeffs, lam)
        _require_stable(rho, lam)
        factor = 1.0
        if certified:
            _, V = np.linalg.eig(A)
            factor = np.linalg.cond(V) ** 2
            if not math.isfinite(factor) or factor > 1e24:
                raise NumericalError("companion matrix is defective; certified bound unavailable")
        total += 0.5 * w * lam * noise.variance(lam) * q * factor / (1.0 - rho * rho)
    return total


def psd_curve(coeffs, lam, sigma2, omega, innovations="fresh"):
    """Power spectral density ``S_y(omega)`` of the modal process."""
    A, rho = _state_matrix(coeffs, lam)
    _require_stable(rho, lam)
    alpha = A[0, :]
    z1 = np.exp(-1j * np.asarray(omega, dtype=float))
    den = 1.0 - sum(alpha[j] * z1 ** (j + 1) for j in range(len(alpha)))
    eta = np.asarray(coeffs.eta)
    if innovations == "fresh":
        num = float(np.sum(eta**2))
    else:
        num = np.abs(sum(eta[j] * z1**j for j in range(len(eta)))) ** 2
    return sigma2 * num / np.abs(den) ** 2


def psd_variance(coeffs, lam, sigma2, n_omega=2**14, innovations="fresh"):
    """Variance as ``(1/2 pi) int S_y`` by the periodic trapezoid rule.

    On a uniform periodic grid the trapezoid rule is the plain mean and
    converges geometrically for this analytic integrand.
    """
    if n_omega < 256:
        raise InvalidInput("n_omega must be at least 256")
    omega = -np.pi + 2 * np.pi * np.arange(n_omega) / n_omega
    return float(np.mean(psd_curve(coeffs, lam, sigma2, omega, innovations)))


def _tail_atom(coeffs, lam, sigma2):
    A, rho = _state_matrix(coeffs, lam)
    rts = roots(coeffs, lam)
    r_plus = rts[np.argmax(np.abs(rts) + 1e-15 * rts.imag)]
    b = A[0, coeffs.m]
    ma = sum(e * r_plus**j for j, e in enumerate(coeffs.eta))
    return lam * sigma2 * abs(ma) ** 2 / ((1.0 - rho * rho) * (1.0 - b))


def expectation_bound_terms(coeffs, nu, noise, C_det, k):
    """All terms of the noisy bound at step ``k``.

    Returns a dict with

    ``det``
        ``sum w rho_max(lambda)**(2k) C_det`` (measure-resolved envelope).
    ``det_product``
        ``exp(k int sum_i log|r_i|**2 dnu) C_det``, the product-of-roots
        form; zero roots are skipped.  Not used in the bound because it
        decays faster than the slowest mode.
    ``floor``
        Exact stationary floor.
    ``tail``
        ``sum w lambda sigma2 |sum eta_j r+**j|**2 / ((1 - rho**2)(1 - b))``
        with ``r+`` the largest root and ``b`` the last companion entry.
    ``tail_heuristic``
        True for m >= 2, where the tail form is extrapolated.
    """
    if k < 0:
        raise InvalidInput("k must be nonnegative")
    det = 0.0
    logsum = 0.0
    for lam, w in nu.atoms:
        rts = roots(coeffs, lam)
        mods = np.abs(rts)
        if mods.max() >= 1.0:
            raise Unstable(f"max root modulus {mods.max()} at lambda={lam}")
        det += w * mods.max() ** (2 * k)
        logsum += w * float(np.sum(np.log(mods[mods > 1e-300] ** 2)))
    floor = noise_floor(coeffs, nu, noise)
    tail = math.fsum(w * _tail_atom(coeffs, lam, noise.variance(lam)) for lam, w in nu.atoms)
    return {
        "det": det * C_det,
        "det_product": math.exp(k * logsum) * C_det,
        "floor": floor,
        "tail": tail,
        "tail_heuristic": coeffs.m >= 2,
    }


def expectation_bound(coeffs, nu, noise, C_det, k):
    """Upper bound on ``E[f(x_k) - f*]``: envelope term + exact floor + tail.

    ``C_det`` should dominate the noise-free modal energies; use
    :func:`flatstep.multistep.modal_energy_constant`.
    """
    t = expectation_bound_terms(coeffs, nu, noise, C_det, k)
    return t["det"] + t["floor"] + t["tail"]


def second_moment_exact(coeffs, lam, sigma2, y_init, k):
    """Exact ``E[y_j**2]`` for ``j = 1..k`` (fresh innovations, zero pre-sample noise).

    Propagates mean and covariance of the modal state.
    """
    A = companion(coeffs, lam)
    n = A.shape[0]
    Q = np.zeros((n, n))
    Q[0, 0] = sigma2 * float(np.sum(np.square(coeffs.eta)))
    mean = np.asarray(y_init, dtype=float)
    P = np.zeros((n, n))
    out = np.empty(k)
    for j in range(k):
        mean = A @ mean
        P = A @ P @ A.T + Q
        out[j] = mean[0] ** 2 + P[0, 0]
    return out


def fit_damped_cosine(d, rho, theta, k0=1):
    """Least-squares fit of ``d_k`` by ``rho**(2k)`` times a cosine series.

    Basis: ``rho**(2k) * {1, cos(theta k), sin(theta k), cos(2 theta k), sin(2 theta k)}``
    for ``k = k0, k0+1, ...``.  Squared modes oscillate at ``2 theta``,
    cross terms at ``theta``.  Returns ``(coefficients, R**2)``.
    """
    d = np.asarray(d, dtype=float)
    k = np.arange(k0, k0 + len(d), dtype=float)
    env = rho ** (2 * k)
    X = np.column_stack([env, env * np.cos(theta * k), env * np.sin(theta * k),
                         env * np.cos(2 * theta * k), env * np.sin(2 * theta * k)])
    coef, *_ = np.linalg.lstsq(X, d, rcond=None)
    resid = d - X @ coef
    ss_tot = float(np.sum((d - d.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return coef, r2
