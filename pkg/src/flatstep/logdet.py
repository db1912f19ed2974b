"""Log-determinants, trace estimators and the determinant-calibrating update.

Stochastic estimators take a :class:`ProbeConfig`.  Probe ``i`` draws
from its own stream ``generator(seed, i)`` so results do not depend on
evaluation order.  Besides i.i.d. Rademacher and Gaussian probes there
is ``"orthogonal"``: blocks of ``dim`` Haar-orthonormal columns scaled
by ``sqrt(dim)``.  Each block still satisfies ``E[z z^T] = I``, and a
full block sums the quadratic forms to the exact trace.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
import scipy.linalg
import scipy.stats

from ._checks import as_matrix, is_symmetric, require_spd
from .errors import InvalidInput, NotSPD
from .rng import generator

__all__ = [
    "ProbeConfig",
    "MAContext",
    "PROBE_KINDS",
    "logdet_chol",
    "hutchinson_trace",
    "lanczos",
    "slq_logdet",
    "ma_residual",
    "residual_printed",
    "trust_region_update",
]

log = logging.getLogger(__name__)

PROBE_KINDS = ("rademacher", "gaussian", "orthogonal")
BREAKDOWN = 1e-14


@dataclass(frozen=True)
class ProbeConfig:
    n_probes: int = 64
    probe_kind: str = "rademacher"
    seed: int = 0
    lanczos_steps: int = 20

    def __post_init__(self):
        if self.n_probes < 1:
            raise InvalidInput("n_probes must be at least 1")
        if self.probe_kind not in PROBE_KINDS:
            raise InvalidInput(f"probe_kind must be one of {PROBE_KINDS}")
        if self.lanczos_steps < 2:
            raise InvalidInput("lanczos_steps must be at least 2")


@dataclass(frozen=True)
class MAContext:
    """Quadratic-model data at a point: weight ``w``, constant ``c``, potential ``S``, Hessian ``H``."""

    w: float
    c: float
    S_val: float
    H: np.ndarray

    def __post_init__(self):
        if not self.w > 0:
            raise InvalidInput("w must be positive")
        H = as_matrix(self.H, "H")
        require_spd(H, "H")
        object.__setattr__(self, "H", H)


def logdet_chol(A):
    """``2 sum log diag(L)`` for the Cholesky factor ``L`` of ``A``."""
    A = as_matrix(A, "A")
    L = require_spd(A, "A")
    return 2.0 * math.fsum(np.log(np.diag(L)))


def _probes(cfg, dim):
    """Yield ``(block_id, z)``; i.i.d. kinds use one block per probe."""
    if cfg.probe_kind == "orthogonal":
        n_blocks = -(-cfg.n_probes // dim)
        for b in range(n_blocks):
            Q = scipy.stats.ortho_group.rvs(dim, random_state=generator(cfg.seed, b)) if dim > 1 else np.ones((1, 1))
            for j in range(dim):
                yield b, math.sqrt(dim) * Q[:, j]
        return
    for i in range(cfg.n_probes):
        rng = generator(cfg.seed, i)
        if cfg.probe_kind == "rademacher":
            z = rng.integers(0, 2, size=dim) * 2.0 - 1.0
        else:
            z = rng.standard_normal(dim)
        yield i, z


def _mean_stderr(samples, blocks):
    samples = np.asarray(samples)
    blocks = np.asarray(blocks)
    ids = np.unique(blocks)
    if len(ids) < len(samples):
        means = np.array([samples[blocks == b].mean() for b in ids])
    else:
        means = samples
    est = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0
    return est, se


def hutchinson_trace(applyM, dim, cfg):
    """Hutchinson estimate ``mean <z, M z>`` and its standard error.

    For ``"orthogonal"`` probes the number of probes is rounded up to
    whole blocks of ``dim`` and the standard error is taken over block
    means.
    """
    samples, blocks = [], []
    for b, z in _probes(cfg, dim):
        samples.append(float(z @ np.asarray(applyM(z), dtype=float)))
        blocks.append(b)
    return _mean_stderr(samples, blocks)


def lanczos(A, q1, m):
    """Lanczos tridiagonalisation with full reorthogonalisation.

    Returns ``(alpha, beta, breakdown)``: diagonal, off-diagonal and
    whether the recurrence stopped early because ``beta < 1e-14``
    (an invariant subspace was found, so the quadrature is exact).
    """
    n = A.shape[0]
    m = min(m, n)
    Q = np.zeros((n, m))
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    q = q1 / np.linalg.norm(q1)
    for j in range(m):
        Q[:, j] = q
        w = A @ q
        alpha[j] = q @ w
        w = w - Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        w = w - Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        if j == m - 1:
            break
        b = np.linalg.norm(w)
        if b < BREAKDOWN:
            return alpha[:j + 1], beta[:j], True
        beta[j] = b
        q = w / b
    return alpha, beta, False


def slq_logdet(A, cfg, return_info=False):
    """Stochastic Lanczos quadrature estimate of ``log det A``.

    Per probe: ``|z|**2 * e1^T log(T_m) e1`` from ``m = lanczos_steps``
    Lanczos steps started at ``z / |z|``.  This is the full log-det,
    twice the half-log-det potential.

    Returns
    -------
    (estimate, stderr) or (estimate, stderr, info) with ``info`` holding
    the number of probes used and of early-terminated recurrences.
    """
    A = as_matrix(A, "A")
    dim = A.shape[0]
    if cfg.lanczos_steps > dim:
        raise InvalidInput("lanczos_steps must not exceed the dimension")
    if not is_symmetric(A, 1e-10):
        raise NotSPD("A must be symmetric")
    samples, blocks = [], []
    breakdowns = 0
    for b, z in _probes(cfg, dim):
        alpha, beta, broke = lanczos(A, z, cfg.lanczos_steps)
        if broke:
            breakdowns += 1
        theta, U = scipy.linalg.eigh_tridiagonal(alpha, beta)
        if theta[0] <= 0:
            raise NotSPD("Lanczos found a nonpositive Ritz value")
        samples.append(float(z @ z) * float(np.sum(U[0, :] ** 2 * np.log(theta))))
        blocks.append(b)
    if breakdowns:
        log.info("slq_logdet: %d of %d probes terminated early", breakdowns, len(samples))
    est, se = _mean_stderr(samples, blocks)
    if return_info:
        return est, se, {"n_probes": len(samples), "breakdowns": breakdowns}
    return est, se


def ma_residual(ctx):
    """``log det H - log w + c S``; zero when the step map preserves the density."""
    return logdet_chol(ctx.H) - math.log(ctx.w) + ctx.c * ctx.S_val


def residual_printed(ctx):
    """``log w - log det H + c S``, the residual driving :func:`trust_region_update`."""
    return math.log(ctx.w) - logdet_chol(ctx.H) + ctx.c * ctx.S_val


def trust_region_update(ctx, eta):
    """``H+ = exp(log H + eta r I)`` with ``r`` from :func:`residual_printed`.

    Applied on the eigendecomposition ``H = U diag(l) U^T`` as
    ``U diag(exp(log l + eta r)) U^T``; eigenvectors are unchanged and
    the residual contracts as ``r+ = (1 - n eta) r``.
    """
    if not (eta > 0 and math.isfinite(eta)):
        raise InvalidInput("eta must be positive")
    r = residual_printed(ctx)
    lam, U = np.linalg.eigh(ctx.H)
    Hn = (U * np.exp(np.log(lam) + eta * r)) @ U.T
    return 0.5 * (Hn + Hn.T)
