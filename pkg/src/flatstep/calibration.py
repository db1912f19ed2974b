"""Gauge calibration of drift/diffusion pairs.

For a symmetric pair ``(H, E)`` with ``S = H + E`` and
``C = [H, E] / 2`` the composed resolvent step carries an ``h**2``
commutator defect.  Conjugating by ``W(h) = exp(hZ)`` with ``Z`` solving
the Sylvester equation ``SZ - ZS = C`` absorbs it.  This module solves
that equation (Schur back-substitution or symmetric eigenbasis), applies
the calibrated steps, the matrix-free curvature-filtered step, the
finite-``h`` order selection loop and the parallel-sum preconditioner
update.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._checks import as_matrix, as_vector, is_symmetric, require_spd
from .errors import InvalidInput, NumericalError
from .operator_core import OperatorPair, commutator

__all__ = [
    "GaugeSolution",
    "StepResult",
    "OrderSelection",
    "gauge_data",
    "gauge",
    "sylvester_schur",
    "sylvester_eigen",
    "calibrated_step_A",
    "calibrated_step_B",
    "curvature_filtered_step",
    "plain_step",
    "reference_map",
    "order_diagnostic",
    "select_order",
    "apply_order",
    "parallel_sum",
    "adaptive_update",
    "inverse_recursion",
]

# Eigenvalue differences below this multiple of ||S||_2 are treated as
# exact resonances: the matching right-hand-side entries lie in the
# centralizer of S and are projected out instead of divided.
RESONANCE_RTOL = 1e-13


@dataclass(frozen=True)
class GaugeSolution:
    """Solution of ``SZ - ZS = C``.

    ``residual`` is ``||SZ - ZS - C||_F / ||C||_F`` recomputed in the
    original basis (0 when ``C = 0``).  ``centralizer_norm`` is the
    Frobenius norm of the resonant part of ``C`` that no ``Z`` can reach.
    """

    Z: np.ndarray
    residual: float
    damping: float
    centralizer_norm: float = 0.0


@dataclass(frozen=True)
class StepResult:
    x_next: np.ndarray
    variant: str
    h: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OrderSelection:
    h: float
    lambda_hat: float
    delta: float
    order_chosen: str
    halvings: int
    converged: bool = True
    calls: dict = field(default_factory=dict)


def gauge_data(pair):
    """Return ``S = H + E`` and ``C = [H, E] / 2``."""
    return pair.H + pair.E, 0.5 * commutator(pair.H, pair.E)


def _relative_residual(S, Z, C):
    nc = np.linalg.norm(C)
    res = np.linalg.norm(S @ Z - Z @ S - C)
    return 0.0 if nc == 0 else float(res / nc)


def sylvester_schur(S, C, eps=0.0):
    """Solve ``SZ - ZS = C`` by Bartels-Stewart back-substitution.

    ``S = Q T Q^*`` is reduced to complex Schur form and
    ``T Zh - Zh T = Q^* C Q`` is solved entry by entry, from the last row
    upward and the first column rightward::

        (t_ii - t_jj) Zh_ij = Ch_ij - sum_{k>i} t_ik Zh_kj + sum_{k<j} Zh_ik t_kj

    Division uses ``d + tau * sign(d)`` with ``tau = eps * ||S||_2`` so
    damping shrinks near-resonant entries without ever dividing by zero.
    Exactly resonant entries (including the diagonal) are set to zero
    and the unreachable right-hand side is reported.

    Parameters
    ----------
    S, C : (n, n) array_like
    eps : float, default 0.0
        Relative damping.

    Returns
    -------
    GaugeSolution
    """
    S = as_matrix(S, "S")
    C = as_matrix(C, "C")
    if S.shape != C.shape:
        raise InvalidInput("S and C differ in shape")
    n = S.shape[0]
    s_norm = np.linalg.norm(S, 2)
    tau = float(eps) * s_norm
    res_tol = RESONANCE_RTOL * max(s_norm, np.finfo(float).tiny)
    T, Q = scipy.linalg.schur(S.astype(complex), output="complex")
    Ch = Q.conj().T @ C @ Q
    Zh = np.zeros((n, n), dtype=complex)
    unreachable = 0.0
    t = np.diag(T)
    for j in range(n):
        for i in range(n - 1, -1, -1):
            rhs = Ch[i, j] - T[i, i + 1:] @ Zh[i + 1:, j] + Zh[i, :j] @ T[:j, j]
            d = t[i] - t[j]
            if abs(d) <= res_tol:
                unreachable += abs(rhs) ** 2
                continue
            Zh[i, j] = rhs / (d + tau * d / abs(d))
    Z = Q @ Zh @ Q.conj().T
    if np.isrealobj(S) and np.isrealobj(C):
        Z = Z.real
    return GaugeSolution(Z=Z, residual=_relative_residual(S, Z, C), damping=tau,
                         centralizer_norm=float(np.sqrt(unreachable)))


def sylvester_eigen(S, C, tau=0.0):
    """Solve ``SZ - ZS = C`` in the eigenbasis of a symmetric ``S``.

    With ``S = U diag(lam) U^T`` and ``Ct = U^T C U``::

        Zt_ij = Ct_ij (lam_i - lam_j) / ((lam_i - lam_j)**2 + tau**2)

    Entries with ``lam_i = lam_j`` (to ``RESONANCE_RTOL``) are set to zero.
    """
    S = as_matrix(S, "S")
    C = as_matrix(C, "C")
    if S.shape != C.shape:
        raise InvalidInput("S and C differ in shape")
    if not is_symmetric(S):
        raise InvalidInput("S must be symmetric")
    try:
        lam, U = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from None
    Ct = U.T @ C @ U
    d = lam[:, None] - lam[None, :]
    resonant = np.abs(d) <= RESONANCE_RTOL * max(np.max(np.abs(lam)), np.finfo(float).tiny)
    den = d * d + float(tau) ** 2
    Zt = np.where(resonant, 0.0, Ct * d / np.where(resonant, 1.0, den))
    Z = U @ Zt @ U.T
    return GaugeSolution(Z=Z, residual=_relative_residual(S, Z, C), damping=float(tau),
                         centralizer_norm=float(np.linalg.norm(Ct[resonant])))


def _step_inputs(pair, g, x):
    g = as_vector(g, "g", pair.dim)
    x = np.zeros(pair.dim) if x is None else as_vector(x, "x", pair.dim)
    return g, x


def gauge(pair, solver="schur", damping=0.0, reverse=False):
    """Gauge generator ``Z`` with ``[Z, S] = ZS - SZ = C``.

    This is the sign for which ``W (I - hS) W^{-1}`` with ``W = exp(hZ)``
    reproduces the ``-h**2 C`` defect of the ``dr`` composition (drift
    first).  In terms of the solvers it is ``SZ - ZS = -C``.  With
    ``reverse=True`` the gauge of the ``rd`` composition (``[Z, S] = -C``)
    is returned instead.

    Parameters
    ----------
    pair : OperatorPair
    solver : {"schur", "eigen"}
    damping : float
        ``eps`` for the Schur solver, ``tau`` for the eigen solver.
    reverse : bool
    """
    S, C = gauge_data(pair)
    rhs = C if reverse else -C
    if solver == "schur":
        return sylvester_schur(S, rhs, damping)
    if solver == "eigen":
        return sylvester_eigen(S, rhs, damping)
    raise InvalidInput(f"unknown solver {solver!r}")


def _apply_w(Z, v, h, sign):
    Zv = Z @ v
    return v + sign * h * Zv + 0.5 * h * h * (Z @ Zv)


def calibrated_step_A(pair, g, h, Z, x=None, form="verbatim"):
    """Explicit-gauge step built on ``M = W (I - hS) W^{-1}``.

    ``W^{+-1} v`` is applied by the truncated series
    ``v +- hZv + (h**2 / 2) Z**2 v`` with ``Z`` from :func:`gauge`.

    ``form="verbatim"`` returns ``x+ = M (x - h g)``.
    ``form="increment"`` returns ``x+ = x + (M - I) g``, the gradient-map
    reading that agrees with :func:`calibrated_step_B` up to ``O(h**3)``.
    ``x`` defaults to the origin.
    """
    g, x = _step_inputs(pair, g, x)
    Z = as_matrix(Z, "Z")
    S = pair.H + pair.E
    if form == "verbatim":
        u = x - h * g
    elif form == "increment":
        u = g
    else:
        raise InvalidInput(f"unknown form {form!r}")
    v = _apply_w(Z, u, h, -1.0)
    v = v - h * (S @ v)
    Mu = _apply_w(Z, v, h, 1.0)
    plain = u - h * (S @ u)
    x_next = Mu if form == "verbatim" else x + (Mu - u)
    return StepResult(x_next=x_next, variant="A", h=float(h),
                      diagnostics={"gauge_norm": float(np.linalg.norm(Z)),
                                   "commutator_term": float(np.linalg.norm(Mu - plain))})


def calibrated_step_B(pair, g, h, x=None):
    """Commutator-corrected step ``x+ = x - h S g - h**2 C g``."""
    g, x = _step_inputs(pair, g, x)
    Hg = pair.H @ g
    Eg = pair.E @ g
    Cg = 0.5 * (pair.H @ Eg - pair.E @ Hg)
    x_next = x - h * (Hg + Eg) - h * h * Cg
    return StepResult(x_next=x_next, variant="B", h=float(h),
                      diagnostics={"commutator_term": float(np.linalg.norm(Cg))})


def curvature_filtered_step(pair, g, h, rho=1.0, x=None, jet_scaled=True):
    """Matrix-free curvature-filtered step using four matvecs.

    The step is ``dx = -h (S g - kappa [H, E] g)`` built from ``Hg``,
    ``Eg``, ``H(Eg)`` and ``E(Hg)``.  With ``jet_scaled=True`` the
    commutator carries the first-jet weight ``kappa = h / 2``, which is
    what cancels the ``h**2`` holonomy term and gives an ``O(h**3)``
    local error.  ``jet_scaled=False`` uses the unscaled ``kappa = 1/2``.

    The commutator term is multiplied by
    ``min(1, rho ||S g|| / ||kappa [H, E] g||)`` so that it never
    exceeds ``rho`` times the plain direction.
    """
    if not 0 < rho <= 1:
        raise InvalidInput("rho must lie in (0, 1]")
    g, x = _step_inputs(pair, g, x)
    Hg = pair.H @ g
    Eg = pair.E @ g
    HEg = pair.H @ Eg
    EHg = pair.E @ Hg
    Sg = Hg + Eg
    kappa = 0.5 * h if jet_scaled else 0.5
    comm = kappa * (HEg - EHg)
    cn = np.linalg.norm(comm)
    sn = np.linalg.norm(Sg)
    scale = 1.0 if cn == 0 else min(1.0, rho * sn / cn)
    x_next = x - h * (Sg - scale * comm)
    return StepResult(x_next=x_next, variant="Filtered", h=float(h), diagnostics={
        "safeguard_scale": float(scale),
        "commutator_term": float(scale * cn),
        "norm_Hg": float(np.linalg.norm(Hg)),
        "norm_Eg": float(np.linalg.norm(Eg)),
        "norm_HEg": float(np.linalg.norm(HEg)),
        "norm_EHg": float(np.linalg.norm(EHg)),
    })


def plain_step(pair, g, h, x=None, composite=False):
    """Uncalibrated step.

    ``composite=False`` gives ``x - h S g``; ``composite=True`` gives the
    split product ``x + ((I - hE)(I - hH) - I) g``.
    """
    g, x = _step_inputs(pair, g, x)
    if composite:
        u = g - h * (pair.H @ g)
        u = u - h * (pair.E @ u)
        x_next = x + (u - g)
    else:
        x_next = x - h * ((pair.H + pair.E) @ g)
    return StepResult(x_next=x_next, variant="Plain", h=float(h),
                      diagnostics={"composite": float(composite)})


def reference_map(pair, h, Z, Z_reversed=None):
    """Gauge-conjugated reference ``W (I - hS) W^{-1}`` with full exponentials.

    ``W = expm(hZ)`` is formed with ``scipy.linalg.expm`` so the result is
    independent of the truncated series used by the steps.  With ``Z``
    from ``gauge(pair)`` the reference is ``I - hS - h**2 C + O(h**3)``.
    Returns ``(R, R_rev)`` where ``R_rev`` uses ``Z_reversed`` (from
    ``gauge(pair, reverse=True)``, giving ``I - hS + h**2 C + O(h**3)``)
    or ``None``.
    """
    S = pair.H + pair.E
    n = S.shape[0]
    out = []
    for Zk in (Z, Z_reversed):
        if Zk is None:
            out.append(None)
            continue
        W = scipy.linalg.expm(h * Zk)
        Wi = scipy.linalg.expm(-h * Zk)
        out.append(W @ (np.eye(n) - h * S) @ Wi)
    return tuple(out)


def order_diagnostic(applyA, applyB, g, h):
    """Return ``(delta, u1, u2)`` for the two first-order composition orders.

    ``u1 = (I - hB)(I - hA) g`` (order ``dr``) and
    ``u2 = (I - hA)(I - hB) g`` (order ``rd``);
    ``delta = ||u1 - u2|| / (h ||g||)``.
    """
    g = np.asarray(g, dtype=float)
    a = g - h * applyA(g)
    u1 = a - h * applyB(a)
    b = g - h * applyB(g)
    u2 = b - h * applyA(b)
    delta = np.linalg.norm(u1 - u2) / (h * np.linalg.norm(g))
    return float(delta), u1, u2


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, v):
        self.calls += 1
        return np.asarray(self.fn(v), dtype=float)


def select_order(applyA, applyB, g, h_max, sigma, tau_diag, max_halvings=20):
    """Matrix-free step size and composition order selection.

    Two power-iteration steps on ``A + B`` from ``g / ||g||`` give
    ``lambda_hat``; the initial step is
    ``h = min(h_max, 2 (1 - sigma) / lambda_hat)``, halved while the
    order diagnostic ``delta`` exceeds ``tau_diag``.  The cheaper order
    by callback count is chosen; ties go to ``dr`` (``A`` first, then
    ``B``).  When the cap is hit ``converged`` is ``False``.
    """
    g = as_vector(g, "g")
    gn = np.linalg.norm(g)
    if gn == 0:
        raise InvalidInput("g must be nonzero")
    if not 0 < sigma < 0.5:
        raise InvalidInput("sigma must lie in (0, 1/2)")
    A = _Counted(applyA)
    B = _Counted(applyB)
    v = g / gn
    for _ in range(2):
        w = A(v) + B(v)
        wn = np.linalg.norm(w)
        if wn == 0:
            break
        v = w / wn
    lam = float(v @ (A(v) + B(v)))
    h = float(h_max) if lam <= 0 else min(float(h_max), 2.0 * (1.0 - sigma) / lam)
    cost = {"dr": 0, "rd": 0}
    halvings = 0
    while True:
        a0, b0 = A.calls, B.calls
        t = g - h * A(g)
        u1 = t - h * B(t)
        cost["dr"] += (A.calls - a0) + (B.calls - b0)
        a0, b0 = A.calls, B.calls
        t = g - h * B(g)
        u2 = t - h * A(t)
        cost["rd"] += (A.calls - a0) + (B.calls - b0)
        delta = float(np.linalg.norm(u1 - u2) / (h * gn))
        if delta <= tau_diag or halvings >= max_halvings:
            break
        h *= 0.5
        halvings += 1
    order = "rd" if cost["rd"] < cost["dr"] else "dr"
    return OrderSelection(h=h, lambda_hat=lam, delta=delta, order_chosen=order,
                          halvings=halvings, converged=delta <= tau_diag,
                          calls={"A": A.calls, "B": B.calls})


def apply_order(applyA, applyB, x, h, order):
    """Apply ``(I - hB)(I - hA)`` (``dr``) or ``(I - hA)(I - hB)`` (``rd``) to ``x``."""
    first, second = (applyA, applyB) if order == "dr" else (applyB, applyA)
    if order not in ("dr", "rd"):
        raise InvalidInput(f"unknown order {order!r}")
    y = x - h * np.asarray(first(x))
    return y - h * np.asarray(second(y))


def parallel_sum(A, B):
    """Parallel sum ``(A^{-1} + B^{-1})^{-1}`` of two SPD matrices.

    Evaluated as ``A (A + B)^{-1} B`` and symmetrized.
    """
    require_spd(A, "A", exc=InvalidInput)
    require_spd(B, "B", exc=InvalidInput)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    X = A @ np.linalg.solve(A + B, B)
    return 0.5 * (X + X.T)


def _spd_inverse(M, name):
    L = require_spd(M, name, exc=InvalidInput)
    Li = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return Li.T @ Li


def _parallel_projection(M, Mi, T, Ti, w):
    if w == 0:
        return M.copy()
    if w == 1:
        return T.copy()
    X = (1.0 - w) * Mi + w * Ti
    out = _spd_inverse(0.5 * (X + X.T), "blend")
    return 0.5 * (out + out.T)


def inverse_recursion(H, E, H_target, E_target, eta, zeta):
    """Inverse of the updated parallel sum in closed form.

    Returns ``G^{-1} - eta (H^{-1} - Ht^{-1}) - zeta (E^{-1} - Et^{-1})``
    with ``G = H [] E``.  This equals ``(H+ [] E+)^{-1}`` exactly.
    """
    Hi = _spd_inverse(H, "H")
    Ei = _spd_inverse(E, "E")
    return Hi + Ei - eta * (Hi - _spd_inverse(H_target, "H_target")) \
        - zeta * (Ei - _spd_inverse(E_target, "E_target"))


def adaptive_update(H, E, H_target, E_target, eta, zeta, rtol=1e-8):
    """Parallel-projection update of both channels.

    ``H+ = ((1 - eta) H^{-1} + eta Ht^{-1})^{-1}``, likewise ``E+`` with
    ``zeta``, and ``G+ = H+ [] E+``.  ``G+`` is checked against
    :func:`inverse_recursion` to relative tolerance ``rtol``.

    Returns
    -------
    (H+, E+, G+)
    """
    for name, w in (("eta", eta), ("zeta", zeta)):
        if not 0 <= w <= 1:
            raise InvalidInput(f"{name} must lie in [0, 1]")
    mats = {}
    for name, M in (("H", H), ("E", E), ("H_target", H_target), ("E_target", E_target)):
        require_spd(M, name, exc=InvalidInput)
        mats[name] = np.asarray(M, dtype=float)
    Hp = _parallel_projection(mats["H"], _spd_inverse(H, "H"), mats["H_target"],
                              _spd_inverse(H_target, "H_target"), eta)
    Ep = _parallel_projection(mats["E"], _spd_inverse(E, "E"), mats["E_target"],
                              _spd_inverse(E_target, "E_target"), zeta)
    Gp = parallel_sum(Hp, Ep)
    Ginv = inverse_recursion(H, E, H_target, E_target, eta, zeta)
    err = np.linalg.norm(Gp @ Ginv - np.eye(Gp.shape[0]))
    if err > rtol * np.linalg.cond(Gp):
        raise NumericalError(f"parallel-sum recursion mismatch {err:.3e}")
    return Hp, Ep, Gp
