"""Boundary observation energies and the explicit observability certificate.

The observation functional is the squared normal derivative integrated over
the positive-sign boundary and time.  For cut domains the multiplier
argument yields the explicit lower bound

    quotient = obs_energy / E(0) >= 2 (a T - 2 b) / (theta M^(2 alpha))

once T exceeds 2b/a.  The report compares the discrete quotient against
that bound with a configured discretization allowance; below the threshold
time the theorem is silent and the verdict is INCONCLUSIVE rather than a
failure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from .assembly import WeightedOperator, assemble, _p1_gradients
from .geometry import DomainSpec, cut_domain
from .mesh import OUTER_GAMMA0, TriMesh, triangulate
from .multiplier import MultiplierConstants, compute_constants, _phi_x_moments
from .spectral import ModalBasis, project, solve_eigs
from .wave import WaveProblem, WaveTrajectory, sample_initial_bump, solve_modal

VERDICT_PASS = "PASS"
VERDICT_FAIL = "FAIL"
VERDICT_INCONCLUSIVE = "INCONCLUSIVE"


class EmptyFacetSet(Exception):
    """No boundary facet carries the requested tag."""


def facet_flux_series(traj: WaveTrajectory, mesh: TriMesh,
                      facet_mask: np.ndarray, weighted: bool,
                      alpha: float) -> np.ndarray:
    """Normal derivative per selected facet and output time.

    P1 gradients are constant per triangle; the facet flux is the attached
    triangle's gradient dotted with the outward normal, weighted by
    w(midpoint) for the conormal variant.
    """
    basis = traj.basis
    grads, _ = _p1_gradients(mesh)
    tris = mesh.triangles
    sel = np.flatnonzero(facet_mask)
    if sel.size == 0:
        raise EmptyFacetSet("facet filter selected nothing")
    nodal = np.zeros((mesh.num_vertices, traj.times.shape[0]))
    nodal[basis.interior] = basis.eigenvectors @ traj.modal_pos
    ftri = mesh.facet_tri[sel]
    nu = mesh.facet_normals()[sel]
    g_facet = np.einsum("fiq,fix->fxq", nodal[tris[ftri]], grads[ftri])
    flux = np.einsum("fxq,fx->fq", g_facet, nu)
    if weighted:
        w_mid = np.linalg.norm(mesh.facet_midpoints()[sel], axis=1) ** alpha
        flux = w_mid[:, None] * flux
    return flux


def trace_energy(traj: WaveTrajectory, mesh: TriMesh, op: WeightedOperator,
                 tags=(OUTER_GAMMA0,), weighted: bool = False,
                 facet_mask: np.ndarray | None = None) -> float:
    """Squared-flux energy on tagged facets over the trajectory window.

    Facet integrals use midpoint values times facet length; the time
    integral is composite Simpson on the output grid.
    """
    if facet_mask is None:
        facet_mask = np.isin(mesh.facet_tags, tags)
    flux = facet_flux_series(traj, mesh, facet_mask, weighted, op.alpha)
    length = mesh.facet_lengths()[facet_mask]
    per_time = length @ (flux ** 2)
    return float(simpson(per_time, x=traj.times))


def modal_initial_energy(basis: ModalBasis, y0_modal: np.ndarray,
                         y1_modal: np.ndarray) -> float:
    """E(0) in the exact modal (Parseval) form."""
    return 0.5 * float(np.sum(basis.eigenvalues * y0_modal ** 2)
                       + np.sum(y1_modal ** 2))


def observability_lower_bound(constants: MultiplierConstants, T: float,
                              M: float) -> float:
    """2 (a T - 2 b) / (theta M^(2 alpha)), clamped to zero below threshold."""
    raw = 2.0 * (constants.a * T - 2.0 * constants.b) / (
        constants.theta * M ** (2.0 * constants.alpha))
    return max(raw, 0.0)


@dataclass(frozen=True)
class InitialBump:
    """Mollifier initial datum: position or velocity component."""

    center: tuple[float, float]
    radius: float
    amplitude: float = 1.0
    field: str = "position"          # or "velocity"


@dataclass
class ObservabilityReport:
    T: float
    E0: float
    obs_energy: float
    quotient: float
    bound: float
    margin: float
    verdict: str
    obs_slack: float
    epsilon: float
    m: int
    mesh_id: str
    constants: MultiplierConstants

    def to_dict(self) -> dict:
        return {
            "T": self.T, "E0": self.E0, "obs_energy": self.obs_energy,
            "quotient": self.quotient, "bound": self.bound,
            "margin": self.margin, "verdict": self.verdict,
            "obs_slack": self.obs_slack, "epsilon": self.epsilon,
            "m": self.m, "mesh_id": self.mesh_id,
            "constants": self.constants.to_dict(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def modal_data_from_bumps(bumps, mesh: TriMesh, op: WeightedOperator,
                          basis: ModalBasis, domain) -> tuple:
    y0 = np.zeros(basis.m)
    y1 = np.zeros(basis.m)
    for b in bumps:
        nodal = b.amplitude * sample_initial_bump(b.center, b.radius, mesh,
                                                  domain)
        coords = project(basis, op, nodal)
        if b.field == "velocity":
            y1 += coords
        else:
            y0 += coords
    return y0, y1


def observability_report(domain: DomainSpec, epsilon: float, alpha: float,
                         initial, T: float, m: int, h_max: float,
                         obs_slack: float = 0.15, grading: float = 1.0,
                         cache: dict | None = None) -> ObservabilityReport:
    """End-to-end certificate: solve on the cut domain and compare.

    ``initial`` is a sequence of InitialBump descriptors (data supported
    away from the boundary, so restriction to the cut domain is the
    identity).  The observation is the unweighted normal derivative on the
    positive-sign boundary; f = 0 throughout.  A cache dict may be supplied
    to share the mesh, operator, eigenbasis, and constants across report
    calls (for example over a grid of horizons T).
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    cache = cache if cache is not None else {}
    key = (domain.name, epsilon, alpha, h_max, grading, m)
    if key not in cache:
        cut = cut_domain(domain, epsilon)
        mesh = triangulate(cut, h_max=h_max, grading=grading)
        op = assemble(mesh, alpha)
        basis = solve_eigs(op, m)
        consts = compute_constants(domain, cut, alpha)
        cache[key] = (cut, mesh, op, basis, consts)
    cut, mesh, op, basis, consts = cache[key]

    y0_modal, y1_modal = modal_data_from_bumps(initial, mesh, op, basis, cut)
    traj = solve_modal(WaveProblem(basis, y0_modal, y1_modal, T=T))
    e0 = modal_initial_energy(basis, y0_modal, y1_modal)
    obs = trace_energy(traj, mesh, op, tags=(OUTER_GAMMA0,), weighted=False)
    quotient = obs / e0 if e0 > 0 else 0.0
    bound = observability_lower_bound(consts, T, domain.M)
    if T <= consts.T_min:
        verdict = VERDICT_INCONCLUSIVE
    else:
        verdict = VERDICT_PASS if quotient >= bound * (1.0 - obs_slack) \
            else VERDICT_FAIL
    return ObservabilityReport(
        T=T, E0=e0, obs_energy=obs, quotient=quotient, bound=bound,
        margin=quotient - bound, verdict=verdict, obs_slack=obs_slack,
        epsilon=epsilon, m=m, mesh_id=mesh.mesh_id, constants=consts)


def hidden_regularity_ratio(traj: WaveTrajectory, mesh: TriMesh,
                            op: WeightedOperator, R0: float,
                            data_norms: tuple[float, float] | None = None
                            ) -> float:
    """Weighted trace energy away from the origin over the data norm.

    Returns int w (dy/dnu)^2 over facets with midpoint outside B(0, R0),
    divided by ||y0||^2 in the gradient norm plus ||y1||^2; zero data gives
    zero by convention.  The a-priori estimate promises this stays bounded
    under refinement; the ratio itself is the reportable certificate.
    """
    if data_norms is None:
        basis = traj.basis
        h1 = float(np.sum(basis.eigenvalues * traj.modal_pos[:, 0] ** 2))
        l2 = float(np.sum(traj.modal_vel[:, 0] ** 2))
    else:
        h1, l2 = data_norms
    denom = h1 + l2
    if denom == 0.0:
        return 0.0
    mask = np.linalg.norm(mesh.facet_midpoints(), axis=1) >= R0
    # Weighted conormal trace: dy/dnu_eps = w dy/dnu; the estimate carries
    # one factor of w, so integrate w (dy/dnu)^2 = (dy/dnu_eps)(dy/dnu).
    flux = facet_flux_series(traj, mesh, mask, weighted=False, alpha=op.alpha)
    w_mid = np.linalg.norm(mesh.facet_midpoints()[mask], axis=1) ** op.alpha
    length = mesh.facet_lengths()[mask]
    per_time = (length * w_mid) @ (flux ** 2)
    return float(simpson(per_time, x=traj.times)) / denom


def momentum_cross_term(traj: WaveTrajectory, op: WeightedOperator,
                        mesh: TriMesh, constants: MultiplierConstants,
                        k: int) -> float:
    """(dy/dt, H(y) + P y / 2) in L2 at output index k, by exact quadrature.

    The integrand is quadratic per triangle (P1 velocity times a linear
    field), so per-triangle moment integrals evaluate it exactly; the
    multiplier bound caps its absolute value by b E(0).
    """
    basis = traj.basis
    grads, area = _p1_gradients(mesh)
    tris = mesh.triangles
    vel = np.zeros(mesh.num_vertices)
    vel[basis.interior] = basis.eigenvectors @ traj.modal_vel[:, k]
    pos = np.zeros(mesh.num_vertices)
    pos[basis.interior] = basis.eigenvectors @ traj.modal_pos[:, k]
    g = np.einsum("ti,tix->tx", pos[tris], grads)
    mom = _phi_x_moments(mesh, area)
    radial = np.einsum("ti,tix,tx->", vel[tris], mom, g)
    mass_part = 0.5 * constants.P * float(vel @ (op.mass @ pos))
    return radial + mass_part


def write_summary_csv(reports, path: str | Path) -> None:
    lines = ["T,quotient,bound,margin,verdict"]
    for r in reports:
        lines.append(f"{float(r.T)!r},{float(r.quotient)!r},"
                     f"{float(r.bound)!r},{float(r.margin)!r},{r.verdict}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
