"""Dense matrix algebra for two-channel step operators.

A one-step optimization update is modelled as the composition of a
drift update ``r(h)`` and a diffusion update ``d(h)``.  This module
provides the matrix exponential and logarithm used to move between
updates and their generators, commutators, the holonomy of the
elementary ``(h, h)`` rectangle, truncated Baker-Campbell-Hausdorff
composition of jet series, jet-flatness tests and curvature energies.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg

from ._checks import as_matrix, is_symmetric
from .errors import BranchError, InvalidInput, StepTooLarge, Unsupported

__all__ = [
    "OperatorPair",
    "JetSeries",
    "HolonomyReport",
    "expm",
    "logm",
    "commutator",
    "holonomy",
    "bch_compose",
    "jet_flatness_order",
    "curvature_energy",
    "axis_energies",
]


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class OperatorPair:
    """Symmetric drift generator ``H`` and diffusion generator ``E``."""

    H: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        E = as_matrix(self.E, "E")
        if H.shape != E.shape:
            raise InvalidInput(f"H and E differ in shape: {H.shape} vs {E.shape}")
        if not is_symmetric(H):
            raise InvalidInput("H is not symmetric")
        if not is_symmetric(E):
            raise InvalidInput("E is not symmetric")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "E", E)

    @property
    def dim(self):
        return self.H.shape[0]


@dataclass(frozen=True)
class JetSeries:
    """Truncated matrix series ``X(h) = sum_{k=1}^{order} h**k X_k``.

    ``coeffs[k - 1]`` holds the coefficient of ``h**k``; the series has
    no constant term because it is the logarithm of a near-identity
    update.  Use :meth:`coeff` to read a degree without index shifting.
    """

    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise InvalidInput("a jet needs at least one coefficient")
        mats = tuple(as_matrix(c, f"coeff[{i}]") for i, c in enumerate(self.coeffs))
        if len({m.shape for m in mats}) != 1:
            raise InvalidInput("jet coefficients must share one shape")
        object.__setattr__(self, "coeffs", mats)

    @property
    def order(self):
        return len(self.coeffs)

    @property
    def dim(self):
        return self.coeffs[0].shape[0]

    def coeff(self, k):
        """Coefficient of ``h**k`` (zero outside ``1..order``)."""
        if 1 <= k <= self.order:
            return self.coeffs[k - 1]
        return np.zeros((self.dim, self.dim))

    def evaluate(self, h):
        """Sum the series at step ``h``."""
        out = np.zeros((self.dim, self.dim))
        for k in range(self.order, 0, -1):
            out = h * (out + self.coeffs[k - 1])
        return out


@dataclass(frozen=True)
class HolonomyReport:
    h: float
    log_hol: np.ndarray
    leading_commutator: np.ndarray
    energy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "energy", float(np.sum(np.abs(self.log_hol) ** 2)))


# ---------------------------------------------------------------------------
# Exponential

# Diagonal Pade approximants of exp and the 1-norm thresholds below which
# each degree reaches double precision (Higham, 2005).
_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(A, m):
    b = _PADE_B[m]
    n = A.shape[0]
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    if m < 13:
        powers = [ident, A2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ A2)
        U = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
        V = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
        return A @ U, V
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def expm(A):
    """Matrix exponential by scaling and squaring.

    The scaled matrix ``A / 2**s`` is exponentiated with a diagonal
    Pade approximant of degree 3, 5, 7, 9 or 13 chosen from its 1-norm,
    then squared ``s`` times.

    Parameters
    ----------
    A : (n, n) array_like
        Finite square matrix (real or complex).

    Returns
    -------
    ndarray
        ``exp(A)`` with the dtype of ``A`` promoted to floating point.
    """
    A = np.asarray(A)
    A = as_matrix(A, "A", dtype=np.result_type(A.dtype, float))
    norm1 = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_uv(A, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13])))) if norm1 > 0 else 0
    As = A / 2.0 ** s
    U, V = _pade_uv(As, 13)
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


# ---------------------------------------------------------------------------
# Logarithm

# Gauss-Legendre nodes on [0, 1]: log(I + X) = int_0^1 X (I + tX)^{-1} dt.
# Eight nodes give the [8/8] Pade approximant, accurate to unit roundoff
# for ||X|| <= 0.25.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_LOG_THETA = 0.25
_MAX_ROOTS = 64


def _log_near_identity(A):
    n = A.shape[0]
    X = A - np.eye(n)
    out = np.zeros_like(X)
    for t, w in zip(_GL_T, _GL_W):
        out += w * np.linalg.solve((np.eye(n) + t * X).T, X.T).T
    return out


def _sqrtm_triu(T):
    """Principal square root of an upper triangular matrix."""
    n = T.shape[0]
    R = np.zeros_like(T)
    d = np.sqrt(np.diag(T))
    R[np.arange(n), np.arange(n)] = d
    for j in range(1, n):
        for i in range(j - 1, -1, -1):
            s = T[i, j] - R[i, i + 1:j] @ R[i + 1:j, j]
            R[i, j] = s / (d[i] + d[j])
    return R


def logm(A):
    """Principal matrix logarithm by inverse scaling and squaring.

    Near-identity input (``||A - I||_1 <= 0.25``) is handled directly
    by the Pade approximant of ``log(I + X)``.  Otherwise ``A`` is
    reduced to complex Schur form, square-rooted until the triangular
    factor is within the same radius of the identity, and the result is
    scaled back by ``2**s``.

    Raises
    ------
    BranchError
        If an eigenvalue lies on the closed negative real axis.
    """
    A = np.asarray(A)
    A = as_matrix(A, "A", dtype=np.result_type(A.dtype, float))
    n = A.shape[0]
    if np.linalg.norm(A - np.eye(n), 1) <= _LOG_THETA:
        return _log_near_identity(A)
    T, Q = scipy.linalg.schur(A.astype(complex), output="complex")
    ev = np.diag(T)
    scale = max(np.max(np.abs(ev)), np.finfo(float).tiny)
    on_cut = (np.abs(ev.imag) <= 1e-14 * scale) & (ev.real <= 0)
    if np.any(on_cut) or np.any(np.abs(ev) == 0):
        raise BranchError("eigenvalue on the closed negative real axis")
    s = 0
    while np.linalg.norm(T - np.eye(n), 1) > _LOG_THETA:
        if s >= _MAX_ROOTS:
            raise BranchError("square-root sequence did not approach the identity")
        T = _sqrtm_triu(T)
        s += 1
    L = Q @ (_log_near_identity(T) * 2.0 ** s) @ Q.conj().T
    if np.isrealobj(A):
        return L.real
    return L


# ---------------------------------------------------------------------------
# Brackets, holonomy, jets


def commutator(A, B):
    """Return ``AB - BA``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"commutator needs equal square shapes, got {A.shape}, {B.shape}")
    return A @ B - B @ A


def _resolvent_factor(M, h, name):
    n = M.shape[0]
    K = np.eye(n) + h * M
    smin = np.linalg.svd(K, compute_uv=False)[-1]
    if smin <= n * np.finfo(float).eps * max(1.0, np.linalg.norm(K, 2)):
        raise StepTooLarge(f"I + h*{name} is singular at h={h}")
    return K


def holonomy(pair, h):
    """Holonomy of the elementary rectangle for resolvent updates.

    With ``r = (I + hH)^{-1}`` and ``d = (I + hE)^{-1}`` the holonomy is
    the group commutator ``d r d^{-1} r^{-1}``.  Its logarithm starts
    with ``h**2 [E, H]`` (generators ``-E`` and ``-H``).

    Parameters
    ----------
    pair : OperatorPair
    h : float
        Positive step size.

    Returns
    -------
    HolonomyReport
    """
    if not h > 0:
        raise InvalidInput("h must be positive")
    KH = _resolvent_factor(pair.H, h, "H")
    KE = _resolvent_factor(pair.E, h, "E")
    hol = np.linalg.solve(KE, np.linalg.solve(KH, KE @ KH))
    log_hol = logm(hol)
    lead = h * h * commutator(-pair.E, -pair.H)
    return HolonomyReport(h=float(h), log_hol=log_hol, leading_commutator=lead)


def _bracket_series(P, Q, order):
    n = P[1].shape[0]
    out = [np.zeros((n, n)) for _ in range(order + 1)]
    for i in range(1, order + 1):
        for j in range(1, order + 1 - i):
            out[i + j] += P[i] @ Q[j] - Q[j] @ P[i]
    return out


def bch_compose(X, Y, order):
    """Jet of ``log(exp X(h) exp Y(h))`` through ``h**order``.

    Uses the Dynkin expansion through degree four::

        X + Y + [X,Y]/2 + ([X,[X,Y]] - [Y,[X,Y]])/12 - [Y,[X,[X,Y]]]/24

    Since neither jet has a constant term, a bracket word of degree ``d``
    starts at ``h**d`` and the truncation is exact through ``order <= 4``.
    """
    if order > 4:
        raise Unsupported("BCH composition is implemented through degree 4")
    if order < 1:
        raise InvalidInput("order must be at least 1")
    if X.dim != Y.dim:
        raise InvalidInput("jets differ in dimension")
    P = [None] + [X.coeff(k) for k in range(1, order + 1)]
    Q = [None] + [Y.coeff(k) for k in range(1, order + 1)]
    XY = _bracket_series(P, Q, order)
    XXY = _bracket_series(P, XY, order)
    YXY = _bracket_series(Q, XY, order)
    YXXY = _bracket_series(Q, XXY, order)
    coeffs = []
    for k in range(1, order + 1):
        coeffs.append(P[k] + Q[k] + 0.5 * XY[k] + (XXY[k] - YXY[k]) / 12.0
                      - YXXY[k] / 24.0)
    return JetSeries(tuple(coeffs))


def jet_flatness_order(X, Y, alpha, tol):
    """Flatness class of a pair of jets.

    Returns the largest ``m <= alpha`` such that every mixed bracket
    ``[X_k, Y_l]`` with ``k + l <= m`` has Frobenius norm at most
    ``tol``.  A pair whose first-order generators already fail to
    commute gets ``1``; a fully commuting pair gets ``alpha``.  When
    ``m < alpha`` the first nonvanishing bracket has total degree
    ``m + 1`` and the log-holonomy is ``O(h**(m + 1))``.
    """
    best = 1
    for m in range(2, alpha + 1):
        ok = True
        for k in range(1, m):
            l = m - k
            if np.linalg.norm(commutator(X.coeff(k), Y.coeff(l))) > tol:
                ok = False
                break
        if not ok:
            break
        best = m
    return best


def curvature_energy(reports):
    """Sum of ``||log Hol||_F**2`` over a list of holonomy reports."""
    return math.fsum(r.energy for r in reports)


def axis_energies(jets_t, jets_s, h=1.0):
    """One-axis curvature energies along a sequence of jets.

    With ``Omega_k = jets_t[k](h)`` and ``Psi_k = jets_s[k](h)``::

        S_t = sum_k || [Psi_{k+1} - Psi_k, Omega_k] / 2 ||_F**2
        S_s = sum_k || [Psi_k, Omega_{k+1} - Omega_k] / 2 ||_F**2

    Parameters
    ----------
    jets_t, jets_s : sequence of JetSeries
        Drift and diffusion jets, equal length at least 2.
    h : float, default 1.0
        Step at which the jets are summed.

    Returns
    -------
    (float, float)
    """
    if len(jets_t) != len(jets_s):
        raise InvalidInput("jet sequences differ in length")
    if len(jets_t) < 2:
        raise InvalidInput("need at least two jets per axis")
    Om = [j.evaluate(h) for j in jets_t]
    Ps = [j.evaluate(h) for j in jets_s]
    S_t = []
    S_s = []
    for k in range(len(Om) - 1):
        S_t.append(np.sum((0.5 * commutator(Ps[k + 1] - Ps[k], Om[k])) ** 2))
        S_s.append(np.sum((0.5 * commutator(Ps[k], Om[k + 1] - Om[k])) ** 2))
    return math.fsum(S_t), math.fsum(S_s)
