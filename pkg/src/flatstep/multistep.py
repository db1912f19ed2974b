"""Spectral analysis of linear m-step methods on quadratic modes.

On a single curvature mode ``lambda`` the method reduces to the scalar
recursion::

    y_{k+1} = a y_k + sum_{j=1}^{m-1} (gamma_{j+1} - eta_j lambda) y_{k-j}
              - (gamma_m - eta_m lambda) y_{k-m},
    a = 1 - eta_0 lambda + gamma_1,

whose characteristic polynomial is::

    chi(r) = r^{m+1} - a r^m - sum_{j=1}^{m-1} (gamma_{j+1} - eta_j lambda) r^{m-j}
             + (gamma_m - eta_m lambda).

For ``m = 1`` this is ``r**2 - a r + b`` with ``b = gamma_1 - eta_1 lambda``,
so ``r+ r- = b`` and in the oscillatory zone ``|r|**2 = b``.  Note that
the noise module writes the same recursion as an AR(2) with the
opposite sign convention for ``b``.

Polynomials are stored highest degree first (``numpy.polyval`` order).
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.optimize

from .errors import (
    DegenerateStationaryPoint,
    InvalidInput,
    NotAWall,
    NumericalError,
    OutOfDomain,
    PoleAtWall,
    Unstable,
    Unsupported,
)

__all__ = [
    "MethodCoefficients",
    "SpectralMeasure",
    "ModalMultipliers",
    "StabilityReport",
    "ChebyshevFilter",
    "char_poly",
    "companion",
    "roots",
    "modal_multipliers_m1",
    "jury_stable_m1",
    "jury_endpoints_m1",
    "stability_report",
    "bulk_exponent",
    "theta_m1",
    "theta_prime_m1",
    "oscillatory_interval_m1",
    "stationary_points_m1",
    "airy_amplitude",
    "stokes_jump_m1",
    "stokes_jump",
    "nonasymptotic_bound",
    "modal_energy_constant",
    "simulate_deterministic",
    "empirical_decay_rate",
    "ringing_frequency",
    "chebyshev_filter",
    "chebyshev_extrema",
    "gd_residual_rate",
]

IMAG_TOL = 1e-12
ZERO_ROOT = 1e-300
WALL_TOL = 1e-8


@dataclass(frozen=True)
class MethodCoefficients:
    """Coefficients ``eta_0..eta_m`` and ``gamma_1..gamma_m``."""

    eta: tuple
    gamma: tuple

    def __post_init__(self):
        eta = tuple(float(v) for v in self.eta)
        gamma = tuple(float(v) for v in self.gamma)
        if len(gamma) < 1:
            raise InvalidInput("need at least one gamma (m >= 1)")
        if len(eta) != len(gamma) + 1:
            raise InvalidInput(f"eta needs m+1={len(gamma) + 1} entries, got {len(eta)}")
        if not all(math.isfinite(v) for v in eta + gamma):
            raise InvalidInput("coefficients must be finite")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def m(self):
        return len(self.gamma)

    @classmethod
    def m1(cls, eta0, eta1, gamma1):
        return cls((eta0, eta1), (gamma1,))


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete spectral measure: atoms ``(lambda, weight)`` on ``[mu, L]``."""

    atoms: tuple
    mu: float
    L: float

    def __post_init__(self):
        atoms = tuple((float(l), float(w)) for l, w in self.atoms)
        if not self.mu > 0 or not self.L >= self.mu:
            raise InvalidInput("need 0 < mu <= L")
        for lam, w in atoms:
            if not (self.mu <= lam <= self.L):
                raise InvalidInput(f"atom {lam} outside [{self.mu}, {self.L}]")
            if not w > 0:
                raise InvalidInput("atom weights must be positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "L", float(self.L))

    @classmethod
    def single(cls, lam, weight=1.0):
        return cls(((lam, weight),), lam, lam)


@dataclass(frozen=True)
class ModalMultipliers:
    lambda_: float
    roots: np.ndarray
    rho_max: float
    oscillatory: bool
    rho: float = None
    cos_theta: float = None


@dataclass(frozen=True)
class StabilityReport:
    schur_stable: bool
    rho_bar: float
    violations: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Polynomials and roots


def _poly_parts(coeffs):
    """Return ``(c0, c1)`` with ``chi = c0 + lambda * c1`` coefficientwise."""
    m = coeffs.m
    eta, gamma = coeffs.eta, coeffs.gamma
    c0 = np.zeros(m + 2)
    c1 = np.zeros(m + 2)
    c0[0] = 1.0
    c0[1] = -(1.0 + gamma[0])
    c1[1] = eta[0]
    for j in range(1, m):
        c0[1 + j] = -gamma[j]
        c1[1 + j] = eta[j]
    c0[m + 1] += gamma[m - 1]
    c1[m + 1] += -eta[m]
    return c0, c1


def char_poly(coeffs, lam):
    """Monic coefficients of ``chi_lambda`` (degree ``m + 1``, highest first)."""
    c0, c1 = _poly_parts(coeffs)
    return c0 + lam * c1


def companion(coeffs, lam):
    """Companion matrix with ``det(rI - C) = chi_lambda(r)``.

    The first row is ``-c[1:]`` and the subdiagonal is ones, so the
    state ``(y_k, ..., y_{k-m})`` advances by ``C``.  For ``m = 1`` this
    is ``[[a, -b], [1, 0]]``.
    """
    c = char_poly(coeffs, lam)
    n = coeffs.m + 1
    C = np.zeros((n, n))
    C[0, :] = -c[1:]
    C[np.arange(1, n), np.arange(n - 1)] = 1.0
    return C


def roots(coeffs, lam):
    """All ``m + 1`` roots; exact zero roots are split off before root finding."""
    c = char_poly(coeffs, lam)
    nz = 0
    while nz < len(c) - 1 and c[len(c) - 1 - nz] == 0.0:
        nz += 1
    core = c[:len(c) - nz]
    r = np.roots(core) if len(core) > 1 else np.array([], dtype=complex)
    return np.concatenate([r.astype(complex), np.zeros(nz, dtype=complex)])


def _ab(coeffs, lam):
    eta, gamma = coeffs.eta, coeffs.gamma
    return 1.0 - eta[0] * lam + gamma[0], gamma[0] - eta[1] * lam


def _require_m1(coeffs):
    if coeffs.m != 1:
        raise Unsupported("this operation is specific to m = 1")


def modal_multipliers_m1(coeffs, lam):
    """Closed-form roots of ``r**2 - a r + b``.

    Real roots use the cancellation-free pair ``r1 = (a + sign(a) sqrt(D)) / 2``,
    ``r2 = b / r1``.  For ``D < 0`` the record also carries
    ``rho = sqrt(b)`` and ``cos(theta) = a / (2 sqrt(b))``.
    """
    _require_m1(coeffs)
    a, b = _ab(coeffs, lam)
    disc = a * a - 4.0 * b
    rho = cos_theta = None
    if disc >= 0:
        s = math.sqrt(disc)
        r1 = 0.5 * (a + math.copysign(s, a))
        r2 = b / r1 if r1 != 0 else 0.0
        rts = np.array([r1, r2], dtype=complex)
    else:
        im = 0.5 * math.sqrt(-disc)
        rts = np.array([complex(0.5 * a, im), complex(0.5 * a, -im)])
        rho = math.sqrt(b)
        cos_theta = a / (2.0 * rho)
    osc = bool(np.max(np.abs(rts.imag)) > IMAG_TOL)
    return ModalMultipliers(lambda_=float(lam), roots=rts, rho_max=float(np.max(np.abs(rts))),
                            oscillatory=osc, rho=rho, cos_theta=cos_theta)


def jury_stable_m1(coeffs, lam):
    """Jury test for ``r**2 - a r + b``: ``1-b>0``, ``1+a+b>0``, ``1-a+b>0``."""
    _require_m1(coeffs)
    a, b = _ab(coeffs, lam)
    return bool(1.0 - b > 0 and 1.0 + a + b > 0 and 1.0 - a + b > 0)


def jury_endpoints_m1(coeffs, mu, L):
    """Jury test on a whole band ``[mu, L]`` from its endpoints.

    The three Jury quantities are affine in ``lambda``, so they are
    positive on the band exactly when they are positive at both ends.
    """
    return jury_stable_m1(coeffs, mu) and jury_stable_m1(coeffs, L)


def _rho_max(coeffs, lam):
    if coeffs.m == 1:
        return modal_multipliers_m1(coeffs, lam).rho_max
    return float(np.max(np.abs(np.linalg.eigvals(companion(coeffs, lam)))))


def stability_report(coeffs, mu, L, grid):
    """Worst root modulus over ``grid`` equispaced points of ``[mu, L]``.

    Companion eigenvalues are used for every ``m``.
    """
    if grid < 2:
        raise InvalidInput("grid must be at least 2")
    lams = np.linspace(mu, L, int(grid))
    mods = np.array([np.max(np.abs(np.linalg.eigvals(companion(coeffs, l)))) for l in lams])
    rho_bar = float(mods.max())
    violations = [float(l) for l, r in zip(lams, mods) if r >= 1.0]
    return StabilityReport(schur_stable=rho_bar < 1.0 - 1e-12, rho_bar=rho_bar, violations=violations)


def bulk_exponent(coeffs, nu):
    """Bulk decay exponent ``sum_atoms w * sum_i log(1 / |r_i|)``.

    Roots with modulus at most ``1e-300`` (exact annihilation in one
    step) are left out.  For ``m = 1`` the split form is used: an
    oscillatory pair contributes ``log(1 / b)``, real roots contribute
    individually.
    """
    total = 0.0
    for lam, w in nu.atoms:
        if coeffs.m == 1:
            mm = modal_multipliers_m1(coeffs, lam)
            if mm.rho_max >= 1.0:
                raise Unstable(f"max root modulus {mm.rho_max} at lambda={lam}")
            if mm.oscillatory:
                total += w * math.log(1.0 / (mm.rho ** 2))
                continue
            mods = np.abs(mm.roots)
        else:
            mods = np.abs(roots(coeffs, lam))
            if np.max(mods) >= 1.0:
                raise Unstable(f"max root modulus {np.max(mods)} at lambda={lam}")
        total += w * float(np.sum(np.log(1.0 / mods[mods > ZERO_ROOT])))
    return total


# ---------------------------------------------------------------------------
# Phase, stationary points, Airy amplitude


def oscillatory_interval_m1(coeffs, mu=None, L=None):
    """Interval of ``lambda`` where ``a**2 - 4b < 0``, clipped to ``[mu, L]``.

    The discriminant is a quadratic in ``lambda`` with leading
    coefficient ``eta_0**2``.  Returns ``(lo, hi)`` or ``None``.
    """
    _require_m1(coeffs)
    e0, e1 = coeffs.eta
    g1 = coeffs.gamma[0]
    # D(lambda) = (1 + g1 - e0 lambda)^2 - 4 (g1 - e1 lambda)
    qa = e0 * e0
    qb = -2.0 * e0 * (1.0 + g1) + 4.0 * e1
    qc = (1.0 + g1) ** 2 - 4.0 * g1
    if qa == 0:
        if qb == 0:
            lo, hi = (-math.inf, math.inf) if qc < 0 else (None, None)
        elif qb > 0:
            lo, hi = -math.inf, -qc / qb
        else:
            lo, hi = -qc / qb, math.inf
    else:
        disc = qb * qb - 4 * qa * qc
        if disc <= 0:
            return None
        s = math.sqrt(disc)
        lo, hi = (-qb - s) / (2 * qa), (-qb + s) / (2 * qa)
    if lo is None:
        return None
    if mu is not None:
        lo = max(lo, mu)
    if L is not None:
        hi = min(hi, L)
    return (lo, hi) if lo < hi else None


def theta_m1(coeffs, lam):
    """Phase ``theta = arccos(a / (2 sqrt(b)))`` of the oscillatory pair."""
    mm = modal_multipliers_m1(coeffs, lam)
    if not mm.oscillatory:
        raise OutOfDomain(f"lambda={lam} is outside the oscillatory set")
    return math.acos(max(-1.0, min(1.0, mm.cos_theta)))


def theta_prime_m1(coeffs, lam):
    """Derivative of the phase in ``lambda``::

        theta' = -(1 / sqrt(1 - xi**2)) * (-2 eta_0 b + eta_1 a) / (4 b**1.5)

    with ``xi = a / (2 sqrt(b))``.
    """
    mm = modal_multipliers_m1(coeffs, lam)
    if not mm.oscillatory:
        raise OutOfDomain(f"lambda={lam} is outside the oscillatory set")
    a, b = _ab(coeffs, lam)
    e0, e1 = coeffs.eta
    xi = mm.cos_theta
    return -(-2.0 * e0 * b + e1 * a) / (4.0 * b ** 1.5 * math.sqrt(1.0 - xi * xi))


def stationary_points_m1(coeffs, mu=None, L=None):
    """Interior stationary point of the phase plus oscillatory-set endpoints.

    Setting the numerator of ``theta'`` to zero gives::

        lambda* = (2 eta_0 gamma_1 - eta_1 (1 + gamma_1)) / (eta_0 eta_1)

    It is kept only if it lies in the oscillatory set (and in
    ``[mu, L]`` when given).  The endpoints of the oscillatory interval
    inside the band are appended.  With ``eta_0 eta_1 = 0`` only the
    endpoints are returned.
    """
    _require_m1(coeffs)
    e0, e1 = coeffs.eta
    g1 = coeffs.gamma[0]
    out = []
    iv = oscillatory_interval_m1(coeffs, mu, L)
    if e0 * e1 != 0 and iv is not None:
        lam_star = (2.0 * e0 * g1 - e1 * (1.0 + g1)) / (e0 * e1)
        if iv[0] < lam_star < iv[1]:
            out.append(lam_star)
    if iv is not None:
        out.extend(v for v in iv if math.isfinite(v))
    return sorted(out)


def airy_amplitude(coeffs, lambda_star, step=1e-5):
    """Airy-type amplitude at an interior stationary point.

    ``c = (1/sqrt(pi)) sqrt(rho / (1 - rho**2)) |theta''|**-0.5`` with
    ``theta''`` from central differences of :func:`theta_prime_m1`
    (step ``1e-5``, one Richardson extrapolation).  Returns ``(c, pi/4)``.
    """
    mm = modal_multipliers_m1(coeffs, lambda_star)
    if not mm.oscillatory:
        raise OutOfDomain("lambda_star is outside the oscillatory set")
    rho = mm.rho
    if rho >= 1:
        raise OutOfDomain("rho(lambda_star) must be below 1")

    def central(hh):
        return (theta_prime_m1(coeffs, lambda_star + hh) - theta_prime_m1(coeffs, lambda_star - hh)) / (2 * hh)

    d2 = (4.0 * central(step / 2) - central(step)) / 3.0
    if abs(d2) < 1e-10:
        raise DegenerateStationaryPoint(f"|theta''| = {abs(d2):.3e}")
    c = math.sqrt(rho / (1.0 - rho * rho)) / math.sqrt(math.pi) / math.sqrt(abs(d2))
    return c, math.pi / 4


# ---------------------------------------------------------------------------
# Walls


def stokes_jump(coeffs, lambda_wall, r_wall):
    """Jump at a wall point for any ``m``.

    The ratio ``(d chi / d lambda) / (d chi / d r)`` at ``(lambda, r)``
    gives ``log|det S| = arg(ratio) / (2 pi)`` and ``arg det S = arg(ratio)``
    (principal branch).

    Raises
    ------
    NotAWall
        If ``r`` is not a root, or is neither on the unit circle nor a
        repeated root (to ``1e-8``).
    PoleAtWall
        If ``d chi / d r`` vanishes.
    """
    r = complex(r_wall)
    c0, c1 = _poly_parts(coeffs)
    c = c0 + lambda_wall * c1
    scale = max(1.0, float(np.max(np.abs(c)))) * max(1.0, abs(r)) ** (len(c) - 1)
    if abs(np.polyval(c, r)) > WALL_TOL * scale:
        raise NotAWall("r_wall is not a root of the characteristic polynomial")
    dr = np.polyval(np.polyder(c), r)
    on_circle = abs(abs(r) - 1.0) <= WALL_TOL
    if coeffs.m == 1:
        a, b = _ab(coeffs, lambda_wall)
        collision = abs(a * a - 4 * b) <= WALL_TOL
    else:
        collision = abs(dr) <= WALL_TOL * scale
    if not (on_circle or collision):
        raise NotAWall("point is neither on |r| = 1 nor a root collision")
    if abs(dr) <= 1e-12 * scale:
        raise PoleAtWall("d chi / d r vanishes at the wall point")
    ratio = np.polyval(c1, r) / dr
    arg = math.atan2(ratio.imag, ratio.real)
    return arg / (2.0 * math.pi), arg


def stokes_jump_m1(coeffs, lambda_wall, r_wall):
    """m = 1 wall jump with ratio ``(eta_0 r - eta_1) / (2r - a)``."""
    _require_m1(coeffs)
    return stokes_jump(coeffs, lambda_wall, r_wall)


# ---------------------------------------------------------------------------
# Bounds and simulation


def nonasymptotic_bound(coeffs, nu, C_init, k, stokes_product=1.0, uniform=False):
    """Determinantal bound on ``f(x_k) - f*``.

    Measure-resolved form ``sum_atoms w rho_max(lambda)**(2k) C_init * stokes``;
    with ``uniform=True`` the form ``rho_bar**(2k) C_init * stokes`` with
    ``rho_bar`` the worst atom.  ``C_init`` must dominate the modal
    energies, see :func:`modal_energy_constant`.
    """
    if k < 0:
        raise InvalidInput("k must be nonnegative")
    rhos = np.array([_rho_max(coeffs, lam) for lam, _ in nu.atoms])
    w = np.array([w for _, w in nu.atoms])
    if uniform:
        return float(np.max(rhos) ** (2 * k) * C_init * stokes_product)
    return float(np.sum(w * rhos ** (2 * k)) * C_init * stokes_product)


def modal_energy_constant(coeffs, nu, y_hist):
    """Smallest ``C`` of the form used by the bound that is valid for all ``k``.

    For each atom the trajectory is expanded as ``y_k = sum_i c_i r_i**k``
    from the companion eigendecomposition, and
    ``C = max_atoms (lambda / 2) (sum_i |c_i|)**2`` so that
    ``sum w (lambda/2) y_k**2 <= C sum w rho_max**(2k)``.

    Parameters
    ----------
    y_hist : sequence of sequences
        Per atom, the initial history ``[y_0, y_-1, ..., y_-m]``.
    """
    best = 0.0
    for (lam, _), hist in zip(nu.atoms, y_hist):
        u0 = np.asarray(hist, dtype=float)
        if u0.shape != (coeffs.m + 1,):
            raise InvalidInput("each history needs m+1 values")
        rts, V = np.linalg.eig(companion(coeffs, lam))
        if np.linalg.cond(V) > 1e12:
            raise NumericalError("repeated multiplier: modal expansion is ill-conditioned")
        c = V[0, :] * np.linalg.solve(V, u0.astype(complex))
        best = max(best, 0.5 * lam * float(np.sum(np.abs(c))) ** 2)
    return best


def simulate_deterministic(coeffs, lam, y_hist, k):
    """Noise-free modal trajectory ``y_1..y_k`` from history ``[y_0, ..., y_-m]``."""
    C = companion(coeffs, lam)
    u = np.asarray(y_hist, dtype=float).copy()
    out = np.empty(k)
    for i in range(k):
        u = C @ u
        out[i] = u[0]
    return out


def empirical_decay_rate(y, k0, k1):
    """Measured per-step decay factor of the energy ``y**2`` on ``[k0, k1]``.

    Uses the Casorati determinant ``D_k = y_k**2 - y_{k-1} y_{k+1}``.  For
    a two-term trajectory ``c1 r1**k + c2 r2**k`` it equals
    ``const * (r1 r2)**k`` exactly, so for an oscillatory pair it tracks
    the envelope ``rho**(2k)`` without the oscillation.
    Returns ``(D_k1 / D_k0) ** (1 / (k1 - k0))``.
    """
    y = np.asarray(y, dtype=float)

    def cas(k):
        return y[k] ** 2 - y[k - 1] * y[k + 1]

    return float((cas(k1) / cas(k0)) ** (1.0 / (k1 - k0)))


def ringing_frequency(y, damping=None):
    """Peak frequency (cycles per step) of the real FFT, with the bin width.

    With ``damping`` given, ``y_k`` is first multiplied by ``damping**-k``
    so that the envelope does not broaden the peak.
    """
    y = np.asarray(y, dtype=float)
    if damping is not None:
        y = y * float(damping) ** (-np.arange(len(y), dtype=float))
    power = np.abs(np.fft.rfft(y - y.mean()))
    freqs = np.fft.rfftfreq(len(y))
    return float(freqs[int(np.argmax(power))]), 1.0 / len(y)


# ---------------------------------------------------------------------------
# Chebyshev residual polynomials


@dataclass(frozen=True)
class ChebyshevFilter:
    """Degree-``N`` Chebyshev residual polynomial on ``[mu, L]``.

    ``poly`` is a ``numpy.polynomial.Chebyshev`` series with domain
    ``[mu, L]``; evaluating it at ``lambda`` gives ``p_N(lambda)``.
    """

    N: int
    mu: float
    L: float
    poly: object
    sup_exact: float
    sup_grid: float
    sup_exp_gap: float = None

    @property
    def rate(self):
        return self.sup_exact ** (1.0 / self.N)

    def __call__(self, lam):
        return self.poly(lam)


def chebyshev_filter(N, mu, L, h=None, n_grid=10_000):
    """Residual polynomial of the degree-``N`` Chebyshev semi-iteration.

    ``p_N(lambda) = T_N((L + mu - 2 lambda) / (L - mu)) / T_N((L + mu) / (L - mu))``,
    normalised by ``p_N(0) = 1``.  Since the numpy domain map sends
    ``[mu, L]`` to ``[-1, 1]`` increasingly, the series coefficient is
    ``(-1)**N / T_N(x0)``.  Also reports the sup over an ``n_grid``
    grid and, when ``h`` is given, ``sup |p_N - exp(-N h lambda)|``.
    """
    if N < 1:
        raise InvalidInput("N must be at least 1")
    if not 0 < mu < L:
        raise InvalidInput("need 0 < mu < L")
    x0 = (L + mu) / (L - mu)
    tn = math.cosh(N * math.acosh(x0))
    coef = np.zeros(N + 1)
    coef[N] = (-1) ** N / tn
    poly = np.polynomial.Chebyshev(coef, domain=[mu, L])
    grid = np.linspace(mu, L, n_grid)
    vals = poly(grid)
    gap = None
    if h is not None:
        gap = float(np.max(np.abs(vals - np.exp(-N * h * grid))))
    return ChebyshevFilter(N=int(N), mu=float(mu), L=float(L), poly=poly,
                           sup_exact=1.0 / tn, sup_grid=float(np.max(np.abs(vals))),
                           sup_exp_gap=gap)


def chebyshev_extrema(filt, n_grid=None):
    """Local extrema of ``|p_N|`` on ``[mu, L]`` refined to machine precision.

    A fine grid locates candidate extrema (interior local maxima of
    ``|p|`` plus the two endpoints); each interior candidate is refined
    by bounded scalar minimisation of ``-|p|`` on its grid cell pair.
    The grid is uniform in ``arccos`` of the mapped variable, so it
    clusters near ``mu`` and ``L`` where polynomial extrema crowd
    together like ``1 / N**2``.

    Returns
    -------
    (positions, values) : ndarrays in increasing ``lambda``.
    """
    n = n_grid or max(10_000, 50 * filt.N)
    t = np.linspace(0.0, math.pi, n)
    grid = filt.mu + 0.5 * (filt.L - filt.mu) * (1.0 - np.cos(t))
    grid[0], grid[-1] = filt.mu, filt.L
    v = np.abs(filt.poly(grid))
    idx = [0]
    inner = np.nonzero((v[1:-1] >= v[:-2]) & (v[1:-1] > v[2:]))[0] + 1
    idx.extend(inner.tolist())
    idx.append(n - 1)
    pos = []
    for i in idx:
        if i in (0, n - 1):
            pos.append(grid[i])
            continue
        # offset from the grid point: the bounded search adds sqrt(eps) * |x| to its tolerance
        c = grid[i]
        res = scipy.optimize.minimize_scalar(lambda s: -abs(filt.poly(c + s)), bounds=(grid[i - 1] - c, grid[i + 1] - c),
                                             method="bounded", options={"xatol": 1e-14 * filt.L})
        pos.append(c + res.x)
    pos = np.array(pos)
    return pos, filt.poly(pos)


def gd_residual_rate(mu, L):
    """Per-step contraction ``(L - mu) / (L + mu)`` of GD with ``eta = 2 / (L + mu)``."""
    return (L - mu) / (L + mu)
