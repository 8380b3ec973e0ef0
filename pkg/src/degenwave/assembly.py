"""Weighted P1 finite element matrices and the discrete inequality checkers.

Three sparse symmetric matrices are assembled per mesh: the stiffness
K[i,j] = int w grad(phi_i) . grad(phi_j) dx with weight w = |x|^alpha, the
unweighted mass M[i,j] = int phi_i phi_j dx, and the Hardy Gram matrix
G[i,j] = int |x|^(alpha-2) phi_i phi_j dx whose integrand is singular but
integrable at the origin for alpha > 0.

Quadrature: triangles away from the origin use a 7-point degree-5 Gauss
rule.  Triangles with a vertex at the origin are handled by the Duffy
substitution x = u * ((1-v) a + v b), which absorbs the radial power
exactly (the u-integrals of u^(alpha-1) u^k are closed-form) and leaves a
smooth 1-D v-integral evaluated by adaptive 32-point Gauss-Legendre with a
bounded subdivision budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import TriMesh

DIM = 2  # ambient dimension N; formulas keep the symbol explicit

_MAX_SUBDIV = 12
_V_TOL = 1e-13


class QuadratureOverflow(Exception):
    """Adaptive v-integration exceeded its subdivision budget."""


# Degree-5 rule on the reference triangle (barycentric coordinates, weights
# summing to 1).
_G7_W = np.array([0.225,
                  0.132394152788506, 0.132394152788506, 0.132394152788506,
                  0.125939180544827, 0.125939180544827, 0.125939180544827])
_a1 = 0.059715871789770
_b1 = 0.470142064105115
_a2 = 0.797426985353087
_b2 = 0.101286507323456
_G7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
    [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2],
])

_GL32_X, _GL32_W = np.polynomial.legendre.leggauss(32)


@dataclass
class WeightedOperator:
    """Assembled matrices for one mesh at one weight exponent."""

    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    hardy_gram: sparse.csr_matrix
    alpha: float
    mesh_id: str
    interior: np.ndarray           # indices of non-Dirichlet dofs
    tri_weight: np.ndarray         # per-triangle int_T |x|^alpha dx

    @property
    def num_dofs(self) -> int:
        return self.stiffness.shape[0]

    def restrict(self, mat: sparse.csr_matrix) -> sparse.csc_matrix:
        return mat[self.interior][:, self.interior].tocsc()

    def stiffness_interior(self) -> sparse.csc_matrix:
        return self.restrict(self.stiffness)

    def mass_interior(self) -> sparse.csc_matrix:
        return self.restrict(self.mass)

    def embed(self, u_int: np.ndarray) -> np.ndarray:
        """Interior coefficient vector -> full nodal vector (zero on boundary)."""
        u = np.zeros(self.num_dofs)
        u[self.interior] = u_int
        return u


def _p1_gradients(mesh: TriMesh):
    """Constant P1 gradients and areas per triangle.

    grads[t, i] is the gradient of the hat function of local vertex i.
    """
    p = mesh.vertices[mesh.triangles]
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    rot = lambda e: np.stack([-e[:, 1], e[:, 0]], axis=1)
    grads = np.stack([rot(e0), rot(e1), rot(e2)], axis=1)
    grads /= (2.0 * area)[:, None, None]
    return grads, area


def _gauss_points(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qi,tix->tqx", _G7_BARY, p)


def _adaptive_v_integral(f, lo: float, hi: float, depth: int = _MAX_SUBDIV):
    """Vector-valued adaptive Gauss-Legendre on [lo, hi]."""
    def gl(a, b):
        x = 0.5 * (b - a) * _GL32_X + 0.5 * (a + b)
        return 0.5 * (b - a) * (f(x) @ _GL32_W)

    def rec(a, b, coarse, d):
        m = 0.5 * (a + b)
        left = gl(a, m)
        right = gl(m, b)
        fine = left + right
        err = np.max(np.abs(fine - coarse))
        if err <= _V_TOL * (1.0 + np.max(np.abs(fine))):
            return fine
        if d == 0:
            raise QuadratureOverflow(
                f"v-integral did not converge (residual {err:.2e})")
        return rec(a, m, left, d - 1) + rec(m, b, right, d - 1)

    return rec(lo, hi, gl(lo, hi), depth)


def _origin_triangle_integrals(a: np.ndarray, b: np.ndarray, area: float,
                               alpha: float):
    """Weight and Hardy-Gram integrals on a triangle with a vertex at 0.

    Local vertex 0 is the origin; a and b are the other two vertices.  With
    x = u ((1-v) a + v b), |x| = u q(v), dx = 2 area u du dv:

      int |x|^alpha dx           = 2A/(2+alpha) int q^alpha dv
      int |x|^(alpha-2) li lj dx = 2A int q^(alpha-2) [U_ij](v) dv

    where the u-moments U_ij are closed-form in alpha (barycentric l0 = 1-u,
    l1 = u(1-v), l2 = uv).
    """
    al = alpha
    m = {0: 1.0 / al, 1: 1.0 / (al + 1.0), 2: 1.0 / (al + 2.0)}
    # int_0^1 u^(alpha-1) * {u-polynomial of each pair} du
    u00 = m[0] - 2.0 * m[1] + m[2]
    u01 = m[1] - m[2]
    u22 = m[2]

    def integrand(v):
        d = (1.0 - v)[:, None] * a[None, :] + v[:, None] * b[None, :]
        q = np.linalg.norm(d, axis=1)
        qa = q ** al
        qh = q ** (al - 2.0)
        one_m_v = 1.0 - v
        rows = np.stack([
            qa,                                    # weight integrand
            qh * u00,                              # (0,0)
            qh * u01 * one_m_v,                    # (0,1)
            qh * u01 * v,                          # (0,2)
            qh * u22 * one_m_v ** 2,               # (1,1)
            qh * u22 * one_m_v * v,                # (1,2)
            qh * u22 * v ** 2,                     # (2,2)
        ], axis=0)
        return rows

    vals = 2.0 * area * _adaptive_v_integral(integrand, 0.0, 1.0)
    weight = vals[0] / (2.0 + al)
    gram = np.empty((3, 3))
    gram[0, 0] = vals[1]
    gram[0, 1] = gram[1, 0] = vals[2]
    gram[0, 2] = gram[2, 0] = vals[3]
    gram[1, 1] = vals[4]
    gram[1, 2] = gram[2, 1] = vals[5]
    gram[2, 2] = vals[6]
    return weight, gram


def assemble(mesh: TriMesh, alpha: float) -> WeightedOperator:
    """Assemble stiffness, mass, and Hardy-Gram matrices on a mesh.

    Parameters
    ----------
    mesh : TriMesh
        Conforming triangulation; if the origin is a vertex, its adjacent
        triangles get the exact-in-u Duffy treatment.
    alpha : float
        Weight exponent in (0, 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    nv = mesh.num_vertices
    tris = mesh.triangles
    grads, area = _p1_gradients(mesh)
    gpts = _gauss_points(mesh)

    r = np.linalg.norm(mesh.vertices, axis=1)
    origin_vertex = np.flatnonzero(r == 0.0)
    touches = np.zeros(tris.shape[0], dtype=bool)
    local0 = np.zeros(tris.shape[0], dtype=np.int64)
    if origin_vertex.size:
        iv = origin_vertex[0]
        for k in range(3):
            sel = tris[:, k] == iv
            touches |= sel
            local0[sel] = k

    # Per-triangle integral of the weight; Gauss away from the origin.
    gr = np.linalg.norm(gpts, axis=2)
    tri_weight = area * (gr ** alpha @ _G7_W)

    # Hardy-Gram elements by Gauss away from the origin.
    phi = _G7_BARY                                       # (7, 3)
    hardy_w = gr ** (alpha - 2.0)                        # (nt, 7)
    ge = np.einsum("q,tq,qi,qj->tij", _G7_W, hardy_w, phi, phi) * area[:, None, None]

    # Replace origin-adjacent triangles by the Duffy evaluation, permuting
    # so the origin is local vertex 0.
    for t in np.flatnonzero(touches):
        k = local0[t]
        perm = [k, (k + 1) % 3, (k + 2) % 3]
        pa = mesh.vertices[tris[t, perm[1]]]
        pb = mesh.vertices[tris[t, perm[2]]]
        w_t, g_perm = _origin_triangle_integrals(pa, pb, float(area[t]), alpha)
        tri_weight[t] = w_t
        g_full = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                g_full[perm[i], perm[j]] = g_perm[i, j]
        ge[t] = g_full

    ke = np.einsum("tix,tjx->tij", grads, grads) * tri_weight[:, None, None]
    me = (np.full((3, 3), 1.0) + np.eye(3)) / 12.0
    me = me[None, :, :] * area[:, None, None]

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()

    def to_csr(el):
        mat = sparse.coo_matrix((el.ravel(), (rows, cols)), shape=(nv, nv))
        return mat.tocsr()

    stiffness = to_csr(ke)
    mass = to_csr(me)
    hardy = to_csr(ge)
    interior = mesh.interior_vertices()
    return WeightedOperator(stiffness, mass, hardy, alpha, mesh.mesh_id,
                            interior, tri_weight)


@dataclass(frozen=True)
class HardyCheck:
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    tol: float


@dataclass(frozen=True)
class PoincareCheck:
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    constant: float
    tol: float


def _require_dirichlet(op: WeightedOperator, u: np.ndarray) -> None:
    if u.shape != (op.num_dofs,):
        raise ValueError("coefficient vector does not match the dof count")
    mask = np.ones(op.num_dofs, dtype=bool)
    mask[op.interior] = False
    if np.any(u[mask] != 0.0):
        raise ValueError("vector must vanish on boundary dofs")


def check_hardy(op: WeightedOperator, u: np.ndarray,
                hardy_tol: float = 1e-8) -> HardyCheck:
    """Discrete Hardy inequality for a conforming zero-boundary vector.

    lhs = (N - 2 + alpha) ||x|^(alpha/2 - 1) u||, rhs = 2 ||grad u||_w.
    Holds for every member of the discrete space because P1 functions with
    zero trace belong to the weighted Sobolev space; the tolerance covers
    quadrature only.
    """
    _require_dirichlet(op, u)
    lhs = (DIM - 2.0 + op.alpha) * np.sqrt(u @ (op.hardy_gram @ u))
    rhs = 2.0 * np.sqrt(u @ (op.stiffness @ u))
    ratio = lhs / rhs if rhs > 0 else 0.0
    return HardyCheck(float(lhs), float(rhs), float(ratio),
                      bool(lhs <= rhs * (1.0 + hardy_tol)), hardy_tol)


def check_poincare(op: WeightedOperator, u: np.ndarray, M: float,
                   tol: float = 1e-8) -> PoincareCheck:
    """Discrete Poincare inequality with the explicit constant in M.

    lhs = ||u||^2, rhs = 4 M^(2-alpha) / (N - 2 + alpha)^2 * ||grad u||_w^2.
    The constant used is reported so that deliberately undersized M shows up
    in the result rather than silently failing.
    """
    _require_dirichlet(op, u)
    const = 4.0 * M ** (2.0 - op.alpha) / (DIM - 2.0 + op.alpha) ** 2
    lhs = float(u @ (op.mass @ u))
    rhs = const * float(u @ (op.stiffness @ u))
    ratio = lhs / rhs if rhs > 0 else 0.0
    return PoincareCheck(lhs, rhs, float(ratio),
                         bool(lhs <= rhs * (1.0 + tol)), const, tol)


def export_matrix(mat: sparse.spmatrix, path) -> None:
    """Write a matrix in (row, col, value) coordinate text format."""
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# coo {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")
