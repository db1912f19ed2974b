"""Rectangular 2-complex with matrix-valued cochains and least-squares gauge reduction.

Vertices are ``(i, j)`` with ``0 <= i <= n_t`` and ``0 <= j <= n_s``.
Edges are oriented along the axes::

    h(i, j): (i, j) -> (i+1, j)      v(i, j): (i, j) -> (i, j+1)

and each face ``f(i, j) = [i, i+1] x [j, j+1]`` is traversed
counterclockwise, so

    (delta xi)(f) = xi(h(i, j)) + xi(v(i+1, j)) - xi(h(i, j+1)) - xi(v(i, j)).

With ``periodic=True`` indices wrap (a torus).  On the planar grid
every 2-cochain is a coboundary; on the torus the coboundaries are
exactly the cochains with zero face sum, so the harmonic part of ``c``
is its face mean.

Cochain values are ``(n_cells, d, d)`` arrays, paired by the summed
Frobenius inner product.  The coboundary acts entrywise on the matrix
values, so it is a sparse incidence matrix applied to ``(n_cells, d*d)``.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse

from .errors import InvalidInput, NotConverged
from .operator_core import holonomy

__all__ = [
    "Complex2D",
    "Cochain",
    "coboundary",
    "adjoint",
    "vertex_coboundary",
    "gauge_reduce",
    "curvature_cochain",
    "inner",
    "norm2",
]


class Complex2D:
    """Oriented rectangular 2-complex with ``n_t x n_s`` faces."""

    def __init__(self, n_t, n_s, periodic=False):
        if n_t < 1 or n_s < 1:
            raise InvalidInput("grid needs at least one face in each direction")
        if periodic and (n_t < 2 or n_s < 2):
            raise InvalidInput("periodic grid needs at least 2 faces per direction")
        self.n_t = int(n_t)
        self.n_s = int(n_s)
        self.periodic = bool(periodic)
        self.vt = n_t if periodic else n_t + 1
        self.vs = n_s if periodic else n_s + 1
        self.n_vertices = self.vt * self.vs
        self.n_h = n_t * self.vs
        self.n_v = self.vt * n_s
        self.n_edges = self.n_h + self.n_v
        self.n_faces = n_t * n_s
        self._D = self._build_faces()
        self._D0 = self._build_edges()
        self.edge_degree = np.asarray(abs(self._D).sum(axis=0)).ravel()

    def vertex(self, i, j):
        return (i % self.vt) * self.vs + (j % self.vs)

    def h(self, i, j):
        return (i % self.vt if self.periodic else i) * self.vs + (j % self.vs)

    def v(self, i, j):
        return self.n_h + (i % self.vt) * self.n_s + (j % self.n_s if self.periodic else j)

    def face(self, i, j):
        return i * self.n_s + j

    def _build_faces(self):
        rows, cols, vals = [], [], []
        for i in range(self.n_t):
            for j in range(self.n_s):
                f = self.face(i, j)
                for e, s in ((self.h(i, j), 1.0), (self.v(i + 1, j), 1.0),
                             (self.h(i, j + 1), -1.0), (self.v(i, j), -1.0)):
                    rows.append(f)
                    cols.append(e)
                    vals.append(s)
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_faces, self.n_edges))

    def _build_edges(self):
        rows, cols, vals = [], [], []
        for i in range(self.n_t):
            for j in range(self.vs):
                e = self.h(i, j)
                rows += [e, e]
                cols += [self.vertex(i + 1, j), self.vertex(i, j)]
                vals += [1.0, -1.0]
        for i in range(self.vt):
            for j in range(self.n_s):
                e = self.v(i, j)
                rows += [e, e]
                cols += [self.vertex(i, j + 1), self.vertex(i, j)]
                vals += [1.0, -1.0]
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_edges, self.n_vertices))

    @property
    def incidence(self):
        """Sparse face-by-edge matrix of the coboundary."""
        return self._D

    @property
    def edge_incidence(self):
        """Sparse edge-by-vertex matrix of the vertex coboundary."""
        return self._D0

    def n_cells(self, degree):
        return {0: self.n_vertices, 1: self.n_edges, 2: self.n_faces}[degree]


@dataclass(frozen=True)
class Cochain:
    """Matrix-valued cochain: ``values[cell]`` is a ``d x d`` matrix."""

    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise InvalidInput("degree must be 0, 1 or 2")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise InvalidInput("values must have shape (n_cells, d, d)")
        object.__setattr__(self, "values", v)

    @property
    def d(self):
        return self.values.shape[1]

    def flat(self):
        return self.values.reshape(self.values.shape[0], -1)


def inner(a, b):
    """Summed Frobenius pairing of two cochains of the same degree."""
    return float(np.sum(a.values * b.values))


def norm2(a):
    return inner(a, a)


def _check(cx, co, degree):
    if co.degree != degree:
        raise InvalidInput(f"expected a degree-{degree} cochain")
    if co.values.shape[0] != cx.n_cells(degree):
        raise InvalidInput(f"cochain has {co.values.shape[0]} values, complex has {cx.n_cells(degree)} cells")


def _wrap(flat, degree, d):
    return Cochain(degree, np.asarray(flat).reshape(-1, d, d))


def coboundary(cx, xi):
    """``delta: C^1 -> C^2`` (``C^0 -> C^1`` for degree-0 input)."""
    if xi.degree == 0:
        _check(cx, xi, 0)
        return _wrap(cx.edge_incidence @ xi.flat(), 1, xi.d)
    _check(cx, xi, 1)
    return _wrap(cx.incidence @ xi.flat(), 2, xi.d)


vertex_coboundary = coboundary


def adjoint(cx, c):
    """``delta^*: C^2 -> C^1`` for the Frobenius pairing."""
    _check(cx, c, 2)
    return _wrap(cx.incidence.T @ c.flat(), 1, c.d)


def gauge_reduce(cx, c, tol=1e-12, max_iter=None, return_info=False):
    """Least-squares gauge reduction ``min_xi |c - delta xi|**2``.

    Solves ``delta^* delta xi = delta^* c`` by conjugate gradients on the
    edge space with the Frobenius inner product, preconditioned by the
    edge degree (the diagonal of ``delta^* delta``), starting from zero.
    Stops at relative residual ``|delta^* (c - delta xi)| <= tol |delta^* c|``.

    Returns
    -------
    (xi_star, harmonic, energy) and, with ``return_info``, a dict with
    iterations, relative residual and ``|delta^* harmonic| / |c|``.

    Raises
    ------
    NotConverged
        After ``max_iter`` iterations (default: number of edges); the
        exception's ``result`` holds the best triple.
    """
    _check(cx, c, 2)
    if not tol > 0:
        raise InvalidInput("tol must be positive")
    D = cx.incidence
    C = c.flat()
    b = D.T @ C
    Minv = (1.0 / np.maximum(cx.edge_degree, 1.0))[:, None]
    X = np.zeros_like(b)
    bnorm = math.sqrt(float(np.sum(b * b)))
    max_iter = cx.n_edges if max_iter is None else int(max_iter)
    Rk = b.copy()
    it = 0
    rel = 0.0
    if bnorm > 0:
        Z = Minv * Rk
        Pk = Z.copy()
        rz = float(np.sum(Rk * Z))
        while True:
            rel = math.sqrt(float(np.sum(Rk * Rk))) / bnorm
            if rel <= tol:
                break
            if it >= max_iter:
                result = _finish(cx, c, X, C)
                raise NotConverged(f"CG stopped at relative residual {rel:.3e} after {it} iterations",
                                   result=result)
            Ap = D.T @ (D @ Pk)
            alpha = rz / float(np.sum(Pk * Ap))
            X += alpha * Pk
            Rk -= alpha * Ap
            Z = Minv * Rk
            rz_new = float(np.sum(Rk * Z))
            Pk = Z + (rz_new / rz) * Pk
            rz = rz_new
            it += 1
    xi, harm, energy = _finish(cx, c, X, C)
    if not return_info:
        return xi, harm, energy
    cn = math.sqrt(norm2(c))
    adj = math.sqrt(norm2(adjoint(cx, harm)))
    info = {"iterations": it, "relative_residual": rel,
            "adjoint_residual": adj / cn if cn > 0 else 0.0}
    return xi, harm, energy, info


def _finish(cx, c, X, C):
    d = c.d
    xi = _wrap(X, 1, d)
    H = C - cx.incidence @ X
    harm = _wrap(H, 2, d)
    return xi, harm, float(np.sum(H * H))


def curvature_cochain(pairs, h, cx=None):
    """Degree-2 cochain of face log-holonomies.

    Parameters
    ----------
    pairs : sequence or dict
        ``OperatorPair`` per face (a dict maps face index to pair).
    h : float
        Step passed to :func:`flatstep.operator_core.holonomy`.
    cx : Complex2D, optional
        Needed when ``pairs`` is a dict, to know the number of faces.

    Returns
    -------
    (cochain, reports)
    """
    if isinstance(pairs, dict):
        if cx is None:
            raise InvalidInput("a dict of pairs needs the complex")
        missing = set(range(cx.n_faces)) - set(pairs)
        if missing:
            raise InvalidInput(f"no pair for faces {sorted(missing)[:5]}")
        seq = [pairs[f] for f in range(cx.n_faces)]
    else:
        seq = list(pairs)
        if cx is not None and len(seq) != cx.n_faces:
            raise InvalidInput("one pair per face required")
    if not seq:
        raise InvalidInput("no faces")
    dims = {p.dim for p in seq}
    if len(dims) != 1:
        raise InvalidInput("all pairs must have the same dimension")
    reports = [holonomy(p, h) for p in seq]
    values = np.stack([r.log_hol for r in reports])
    return Cochain(2, values), reports
