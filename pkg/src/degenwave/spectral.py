"""Leading eigenpairs of the weighted operator on interior dofs.

Solves K Phi = lambda M Phi by shift-invert ARPACK with shift zero (K is
positive definite after Dirichlet elimination, so the factorization is
safe).  Eigenvectors are mass-orthonormal; signs are fixed so the first
coefficient above a relative threshold is positive, keeping golden outputs
stable across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .assembly import WeightedOperator


class EigsNoConverge(Exception):
    """ARPACK failed; carries the iteration diagnostics message."""


@dataclass
class ModalBasis:
    """Mass-orthonormal eigenpairs of one weighted operator.

    ``eigenvectors[:, n]`` holds interior-dof coefficients; use
    ``to_nodal`` to embed modal coordinates as a full nodal vector with
    zeros on the Dirichlet boundary.
    """

    eigenvalues: np.ndarray        # ascending, (m,)
    eigenvectors: np.ndarray       # (n_interior, m)
    residuals: np.ndarray          # (m,)
    interior: np.ndarray
    num_dofs: int
    mesh_id: str
    alpha: float

    @property
    def m(self) -> int:
        return self.eigenvalues.shape[0]

    def to_nodal(self, coords: np.ndarray) -> np.ndarray:
        """Modal coordinates -> full nodal vector (zero boundary trace)."""
        u = np.zeros(self.num_dofs)
        u[self.interior] = self.eigenvectors @ coords
        return u

    def nodal_mode(self, n: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[n] = 1.0
        return self.to_nodal(e)


def solve_eigs(op: WeightedOperator, m: int) -> ModalBasis:
    """Compute the m smallest eigenpairs of K Phi = lambda M Phi.

    Deterministic: a fixed ARPACK starting vector is supplied and the sign
    convention is applied afterwards.  Residuals are measured as
    ||K v - lambda M v|| / ||M v||.

    Raises
    ------
    EigsNoConverge
        If ARPACK does not converge within its iteration budget.
    """
    kint = op.stiffness_interior()
    mint = op.mass_interior()
    n = kint.shape[0]
    if not 1 <= m <= n - 1:
        raise ValueError(f"m must lie in [1, {n - 1}]")
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        vals, vecs = eigsh(kint, k=m, M=mint, sigma=0.0, which="LM", v0=v0,
                           maxiter=max(1000, 40 * m))
    except ArpackNoConvergence as exc:
        raise EigsNoConverge(str(exc)) from exc
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]

    # Sign convention: first coefficient of nonnegligible size positive.
    for j in range(m):
        v = vecs[:, j]
        big = np.flatnonzero(np.abs(v) > 1e-10 * np.max(np.abs(v)))
        if big.size and v[big[0]] < 0:
            vecs[:, j] = -v

    kv = kint @ vecs
    mv = mint @ vecs
    res = np.linalg.norm(kv - vals[None, :] * mv, axis=0) / \
        np.linalg.norm(mv, axis=0)
    if vals[0] <= 0.0:
        raise EigsNoConverge(f"nonpositive leading eigenvalue {vals[0]:g}")
    return ModalBasis(vals, vecs, res, op.interior, op.num_dofs,
                      op.mesh_id, op.alpha)


def project(basis: ModalBasis, op: WeightedOperator, u: np.ndarray
            ) -> np.ndarray:
    """Modal coordinates of a nodal vector: c_n = Phi_n^T M u."""
    if u.shape != (op.num_dofs,):
        raise ValueError("nodal vector does not match the dof count")
    mu = (op.mass @ u)[op.interior]
    return basis.eigenvectors.T @ mu


def reconstruct(basis: ModalBasis, coords: np.ndarray) -> np.ndarray:
    return basis.to_nodal(coords)


def modal_energy_norm_sq(basis: ModalBasis, coords: np.ndarray) -> float:
    """Energy (stiffness) norm squared of a modal expansion: sum lambda c^2."""
    return float(np.sum(basis.eigenvalues * coords ** 2))


def lambda1_lower_bound(alpha: float, M: float, dim: int = 2) -> float:
    """Variational lower bound (N - 2 + alpha)^2 / (4 M^(2-alpha))."""
    return (dim - 2.0 + alpha) ** 2 / (4.0 * M ** (2.0 - alpha))


def write_eigen_report(basis: ModalBasis, path: str | Path) -> None:
    lines = ["n,lambda,residual"]
    for n in range(basis.m):
        lines.append(f"{n + 1},{float(basis.eigenvalues[n])!r},"
                     f"{float(basis.residuals[n])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
