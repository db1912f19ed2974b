"""Central-cut ellipsoid method with determinantal tau bookkeeping.

The ellipsoid ``E(x, P) = {y : (y - x)^T P^{-1} (y - x) <= 1}`` is cut
through its centre by the half-space ``g^T (y - x) <= 0``.  With
``gt = g / sqrt(g^T P g)``::

    x+ = x - P gt / (n + 1)
    P+ = n**2 / (n**2 - 1) * (P - 2 / (n + 1) * P gt gt^T P)

so ``log det P+ - log det P = n log(n**2 / (n**2 - 1)) + log(1 - 2/(n+1))``
whatever ``g`` is.  The tau potential is ``log tau = (1/2) log det P``
up to a constant, and a run stops when it has fallen by
``n log(R / r)``: at that point the ellipsoid is too small to contain a
ball of radius ``r``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import (
    DegenerateSwitch,
    InvalidInput,
    NumericalError,
    OracleContractViolation,
    PoleAtWall,
)
from .rng import generator

__all__ = [
    "EllipsoidState",
    "SeparationOracleResult",
    "TauEntry",
    "TauLedger",
    "initial_state",
    "ellipsoid_step",
    "logdet_factor",
    "bulk_shrink",
    "iteration_bound",
    "switch_jump",
    "run_feasibility",
    "ball_oracle",
    "constant_cut_oracle",
    "random_polytope",
]

SWITCH_ANGLE = 1e-6


@dataclass(frozen=True)
class EllipsoidState:
    x: np.ndarray
    P: np.ndarray
    logdetP: float
    k: int = 0
    J: np.ndarray = None

    @property
    def n(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class SeparationOracleResult:
    """Oracle answer; ``tag`` optionally identifies the active face."""

    feasible: bool
    g: np.ndarray = None
    tag: object = None


@dataclass(frozen=True)
class TauEntry:
    k: int
    delta_log_tau_bulk: float
    switch_jump: float = 0.0
    switch: bool = False
    degenerate: str = None


@dataclass
class TauLedger:
    entries: list = field(default_factory=list)

    @property
    def bulk_total(self):
        return math.fsum(e.delta_log_tau_bulk for e in self.entries)

    @property
    def jump_total(self):
        return math.fsum(e.switch_jump for e in self.entries)

    @property
    def switches(self):
        return [e for e in self.entries if e.switch]


def _logdet(J):
    # J^T = Q R gives P = J J^T = R^T R, so |diag R| is the Cholesky diagonal
    d = np.abs(np.diag(np.linalg.qr(J.T, mode="r")))
    if not np.all(d > 0):
        raise NumericalError("ellipsoid matrix lost positive definiteness")
    return 2.0 * float(np.sum(np.log(d)))


def initial_state(x0, R):
    """Ball of radius ``R`` around ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    if n < 2:
        raise InvalidInput("dimension must be at least 2")
    if not R > 0:
        raise InvalidInput("R must be positive")
    P = (R * R) * np.eye(n)
    return EllipsoidState(x0.copy(), P, 2.0 * n * math.log(R), 0, R * np.eye(n))


def logdet_factor(n):
    """``n log(n**2/(n**2-1)) + log(1 - 2/(n+1))``, the per-step change of ``log det P``."""
    if n < 2:
        raise InvalidInput("n must be at least 2")
    return n * math.log(n * n / (n * n - 1.0)) + math.log1p(-2.0 / (n + 1))


def bulk_shrink(n):
    """Per-step change of ``log tau``: half of :func:`logdet_factor`.

    Always below ``-1 / (2n + 2)``; ``n = 2`` gives ``log(16/27) / 2``.
    """
    return 0.5 * logdet_factor(n)


def ellipsoid_step(state, g):
    """One central-cut update.

    The update is carried out on a factor ``P = J J^T``:
    ``J+ = c J (I - (1 - sqrt((n-1)/(n+1))) p p^T)`` with
    ``p = J^T g / |J^T g|`` and ``c = n / sqrt(n**2 - 1)``, which equals
    the rank-one formula for ``P+`` but cannot lose definiteness when
    the same cut is repeated.  ``logdetP`` is recomputed from the
    Cholesky factor of ``P+``, obtained as the triangular factor of a QR
    decomposition of ``J+^T`` so that it survives condition numbers far
    beyond ``1e16``.
    """
    g = np.asarray(g, dtype=float)
    n = state.n
    if g.shape != (n,):
        raise InvalidInput(f"cut must have shape ({n},)")
    J = state.J if state.J is not None else np.linalg.cholesky(state.P)
    q = J.T @ g
    qn = float(np.linalg.norm(q))
    if not qn > 0 or not math.isfinite(qn):
        raise NumericalError("g^T P g must be positive")
    p = q / qn
    Jp = J @ p
    x = state.x - Jp / (n + 1)
    J_new = (n / math.sqrt(n * n - 1.0)) * (J - (1.0 - math.sqrt((n - 1.0) / (n + 1.0))) * np.outer(Jp, p))
    P = J_new @ J_new.T
    return EllipsoidState(x, P, _logdet(J_new), state.k + 1, J_new)


def iteration_bound(n, R, r, stokes_sum=0.0):
    """``ceil((2n log(R/r) - stokes_sum) / |logdet_factor(n)|)``.

    ``n = 2, R/r = 10`` gives 18.  The absolute value in the denominator
    makes the count positive; it grows like ``n**2 log(R/r)``.
    """
    if n < 2:
        raise InvalidInput("n must be at least 2")
    if not R > r > 0:
        raise InvalidInput("need R > r > 0")
    return int(math.ceil((2 * n * math.log(R / r) - stokes_sum) / abs(logdet_factor(n))))


def switch_jump(u1, u2, a, b, alpha_n):
    """Jump ``(1/2 pi) arg(alpha_n <u2, u1> / (a - b))`` on the principal branch.

    The ratio is real, so the result is 0 for a positive ratio and 1/2
    for a negative one.

    Raises
    ------
    PoleAtWall
        If ``a == b``.
    DegenerateSwitch
        If the cut directions are orthogonal, where the branch is undefined.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    for u in (u1, u2):
        if abs(np.linalg.norm(u) - 1.0) > 1e-8:
            raise InvalidInput("switch directions must be unit vectors")
    if a == b:
        raise PoleAtWall("a == b")
    ip = float(u2 @ u1)
    if abs(ip) <= 1e-12:
        raise DegenerateSwitch("orthogonal cut directions")
    ratio = complex(alpha_n * ip / (a - b))
    return math.atan2(ratio.imag, ratio.real) / (2 * math.pi)


def _as_result(res):
    if isinstance(res, SeparationOracleResult):
        return res
    feasible, g = res[0], res[1]
    tag = res[2] if len(res) > 2 else None
    return SeparationOracleResult(bool(feasible), g, tag)


def run_feasibility(oracle, x0, R, r, max_iter=10_000):
    """Run the central-cut method until a feasible centre is found.

    The oracle is queried at each centre.  The run stops with
    ``found=False`` once the accumulated bulk decrease of ``log tau``
    reaches ``n log(R / r)`` or after ``max_iter`` cuts.  Each cut adds a
    ledger entry with the measured ``(1/2) delta log det P``; a switch
    (cut direction rotated by more than ``1e-6`` rad and face tag
    changed) also records :func:`switch_jump` with ``alpha_n = 2/(n+1)``
    and ``a, b`` the projections of the two centres on the new cut
    direction.  Degenerate switches are flagged, not raised.

    Returns
    -------
    (found, state, ledger)
    """
    state = initial_state(x0, R)
    n = state.n
    if not r > 0:
        raise InvalidInput("r must be positive")
    target = -n * math.log(R / r)
    alpha_n = 2.0 / (n + 1)
    ledger = TauLedger()
    prev = None  # (unit cut, tag, centre)
    log_tau = 0.0
    for _ in range(max_iter + 1):
        res = _as_result(oracle(state.x))
        if res.feasible:
            return True, state, ledger
        if log_tau <= target or state.k >= max_iter:
            return False, state, ledger
        g = np.asarray(res.g, dtype=float) if res.g is not None else None
        if g is None or not np.any(g):
            raise OracleContractViolation("oracle returned a zero cut at an infeasible point")
        u = g / np.linalg.norm(g)
        new = ellipsoid_step(state, g)
        d_tau = 0.5 * (new.logdetP - state.logdetP)
        jump, switched, degenerate = 0.0, False, None
        if prev is not None:
            u_prev, tag_prev, x_prev = prev
            angle = math.acos(max(-1.0, min(1.0, float(u @ u_prev))))
            if angle > SWITCH_ANGLE and res.tag is not None and res.tag != tag_prev:
                switched = True
                try:
                    jump = switch_jump(u_prev, u, float(x_prev @ u), float(state.x @ u), alpha_n)
                except PoleAtWall:
                    degenerate = "pole"
                except DegenerateSwitch:
                    degenerate = "orthogonal"
        ledger.entries.append(TauEntry(new.k, d_tau, jump, switched, degenerate))
        log_tau += d_tau
        prev = (u, res.tag, state.x)
        state = new
    return False, state, ledger


# ---------------------------------------------------------------------------
# Test oracles


def ball_oracle(center, radius):
    """Separation oracle of a closed Euclidean ball."""
    c = np.asarray(center, dtype=float)

    def oracle(x):
        d = x - c
        if float(d @ d) <= radius * radius:
            return SeparationOracleResult(True)
        return SeparationOracleResult(False, d)

    return oracle


def constant_cut_oracle(g):
    """Oracle of an empty set: every point is cut by the same ``g``."""
    g = np.asarray(g, dtype=float)

    def oracle(x):
        return SeparationOracleResult(False, g, 0)

    return oracle


def random_polytope(n, R, r, seed, n_facets=None):
    """Random polytope inside ``B(0, R)`` containing a ball of radius ``r``.

    A centre ``c`` with ``|c| <= R/2`` carries a cube of half-width
    ``R / (2 sqrt(n))`` (so the cube lies in ``B(0, R)``), cut further by
    random half-spaces at distance at least ``r`` from ``c``.  Requires
    ``R / r >= 2 sqrt(n)`` so that ``B(c, r)`` fits in the cube.

    Returns ``(oracle, A, b, c)`` for ``{y : A y <= b}``; the oracle
    reports the most violated constraint, tagged by its row index.
    """
    if R / r < 2 * math.sqrt(n):
        raise InvalidInput("need R / r >= 2 sqrt(n)")
    rng = generator(seed, n)
    c = rng.normal(size=n)
    c *= rng.uniform(0, R / 2) / np.linalg.norm(c)
    s = R / (2 * math.sqrt(n))
    A = [np.eye(n), -np.eye(n)]
    b = [c + s, -(c - s)]
    m = n_facets if n_facets is not None else 2 * n
    normals = rng.normal(size=(m, n))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    dist = rng.uniform(r, s, size=m)
    A.append(normals)
    b.append(normals @ c + dist)
    A = np.vstack(A)
    b = np.concatenate(b)

    def oracle(x):
        viol = A @ x - b
        i = int(np.argmax(viol))
        if viol[i] <= 0:
            return SeparationOracleResult(True)
        return SeparationOracleResult(False, A[i].copy(), i)

    return oracle, A, b, c
