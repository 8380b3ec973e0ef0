"""Wave evolution in the modal basis with exact per-mode oscillators.

Each mode satisfies y_n'' + lambda_n y_n = f_n(t); with zero forcing the
closed form y_n(t) = y_n(0) cos(w t) + y_n'(0) sin(w t) / w is evaluated
directly at the output times, so the discrete energy

    E(t) = 1/2 sum_n (y_n'(t)^2 + lambda_n y_n(t)^2)

is conserved to rounding and energy conservation is a sharp test rather
than a property of a timestepping scheme.  Forced problems add a Duhamel
convolution evaluated by trapezoid on a fine forcing grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Arc, CutDomainSpec, DomainSpec
from .mesh import TriMesh
from .spectral import ModalBasis


class NegativeEigenvalue(Exception):
    """Defensive: a modal basis with lambda <= 0 reached the solver."""


class BumpTouchesBoundary(Exception):
    """Requested mollifier support is not compactly inside the domain."""


@dataclass
class WaveProblem:
    basis: ModalBasis
    y0_modal: np.ndarray
    y1_modal: np.ndarray
    T: float
    dt_output: float | None = None           # default T / 1024
    forcing_times: np.ndarray | None = None  # (nf,), includes 0 and T
    forcing_modal: np.ndarray | None = None  # (m, nf)

    def output_times(self) -> np.ndarray:
        dt = self.dt_output if self.dt_output is not None else self.T / 1024.0
        n = max(1, int(round(self.T / dt)))
        return np.linspace(0.0, self.T, n + 1)


@dataclass
class WaveTrajectory:
    times: np.ndarray        # (nt,)
    modal_pos: np.ndarray    # (m, nt)
    modal_vel: np.ndarray    # (m, nt)
    energy: np.ndarray       # (nt,)
    basis: ModalBasis

    @property
    def initial_energy(self) -> float:
        return float(self.energy[0])

    def nodal_at(self, k: int) -> np.ndarray:
        return self.basis.to_nodal(self.modal_pos[:, k])

    def nodal_velocity_at(self, k: int) -> np.ndarray:
        return self.basis.to_nodal(self.modal_vel[:, k])


def modal_energy(basis: ModalBasis, pos: np.ndarray, vel: np.ndarray
                 ) -> np.ndarray:
    return 0.5 * (np.sum(vel ** 2, axis=0)
                  + np.sum(basis.eigenvalues[:, None] * pos ** 2, axis=0))


def solve_modal(problem: WaveProblem) -> WaveTrajectory:
    """Evolve every mode exactly (plus trapezoidal Duhamel under forcing).

    The zero-forcing path touches no quadrature at all: positions and
    velocities come straight from the oscillator closed form at the output
    times.
    """
    basis = problem.basis
    if np.any(basis.eigenvalues <= 0.0):
        raise NegativeEigenvalue("modal basis carries a nonpositive eigenvalue")
    if problem.T <= 0.0:
        raise ValueError("final time must be positive")
    t = problem.output_times()
    w = np.sqrt(basis.eigenvalues)[:, None]          # (m, 1)
    wt = w * t[None, :]
    c, s = np.cos(wt), np.sin(wt)
    y0 = problem.y0_modal[:, None]
    y1 = problem.y1_modal[:, None]
    pos = y0 * c + (y1 / w) * s
    vel = -y0 * w * s + y1 * c

    if problem.forcing_modal is not None:
        pos_f, vel_f = _duhamel(basis, problem.forcing_times,
                                problem.forcing_modal, t)
        pos = pos + pos_f
        vel = vel + vel_f

    return WaveTrajectory(t, pos, vel, modal_energy(basis, pos, vel), basis)


def _duhamel(basis: ModalBasis, ft: np.ndarray, fm: np.ndarray,
             t_out: np.ndarray):
    """Trapezoidal particular solution evaluated on the forcing grid.

    Uses y_p(t) = (sin(wt) Ic(t) - cos(wt) Is(t)) / w with the cumulative
    integrals Ic = int cos(ws) f(s) ds and Is = int sin(ws) f(s) ds, then
    interpolates to the output times (second order in the forcing step).
    """
    if ft is None or fm is None:
        raise ValueError("forcing table requires both times and values")
    if ft[0] != 0.0:
        raise ValueError("forcing table must start at t = 0")
    w = np.sqrt(basis.eigenvalues)[:, None]
    wt = w * ft[None, :]
    cos_wt, sin_wt = np.cos(wt), np.sin(wt)
    dt = np.diff(ft)[None, :]
    ic = np.concatenate([np.zeros((basis.m, 1)), np.cumsum(
        0.5 * dt * (cos_wt[:, 1:] * fm[:, 1:] + cos_wt[:, :-1] * fm[:, :-1]),
        axis=1)], axis=1)
    is_ = np.concatenate([np.zeros((basis.m, 1)), np.cumsum(
        0.5 * dt * (sin_wt[:, 1:] * fm[:, 1:] + sin_wt[:, :-1] * fm[:, :-1]),
        axis=1)], axis=1)
    pos_f = (sin_wt * ic - cos_wt * is_) / w
    vel_f = cos_wt * ic + sin_wt * is_
    pos_out = np.stack([np.interp(t_out, ft, pos_f[n]) for n in range(basis.m)])
    vel_out = np.stack([np.interp(t_out, ft, vel_f[n]) for n in range(basis.m)])
    return pos_out, vel_out


def mollifier_bump(points: np.ndarray, center, radius: float) -> np.ndarray:
    """Standard mollifier exp(1 - 1/(1 - |x-c|^2/r^2)), one at the center."""
    d2 = np.sum((points - np.asarray(center, dtype=float)) ** 2, axis=-1) \
        / radius ** 2
    out = np.zeros(points.shape[0])
    inside = d2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - d2[inside]))
    return out


def _distance_to_curve(curve, point: np.ndarray, n: int = 2048) -> float:
    if isinstance(curve, Arc):
        # Exact: the circle's nearest point if its angle lies on the arc,
        # otherwise the nearer endpoint.
        c = np.asarray(curve.center, dtype=float)
        d_center = float(np.linalg.norm(point - c))
        theta = math.atan2(point[1] - c[1], point[0] - c[0])
        if not math.isnan(curve.param_of_angle(theta)):
            return abs(d_center - curve.radius)
        return min(
            float(np.linalg.norm(np.asarray(curve.position(0.0)) - point)),
            float(np.linalg.norm(np.asarray(curve.position(1.0)) - point)))
    s = np.linspace(0.0, 1.0, n)
    return float(np.min(np.linalg.norm(curve.position(s) - point, axis=-1)))


def sample_initial_bump(center, radius: float, mesh: TriMesh,
                        domain: DomainSpec | CutDomainSpec) -> np.ndarray:
    """Nodal interpolant of a mollifier bump compactly supported in the domain.

    Requires dist(center, boundary) >= 1.5 * radius so the support keeps a
    margin of radius/2 from every boundary curve; raises
    BumpTouchesBoundary otherwise.  The result vanishes on all boundary
    dofs by construction.
    """
    c = np.asarray(center, dtype=float)
    for curve in domain.all_curves():
        if _distance_to_curve(curve, c) < 1.5 * radius:
            raise BumpTouchesBoundary(
                f"support B({tuple(c)}, {radius:g}) too close to the boundary")
    u = mollifier_bump(mesh.vertices, c, radius)
    u[mesh.boundary_vertex_mask()] = 0.0
    return u


def write_energy_series(traj: WaveTrajectory, path: str | Path) -> None:
    lines = ["t,E"]
    for t, e in zip(traj.times, traj.energy):
        lines.append(f"{float(t)!r},{float(e)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_modal_states(traj: WaveTrajectory, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# modes {traj.basis.m} times {traj.times.shape[0]}\n")
        for k, t in enumerate(traj.times):
            pos = " ".join(repr(float(v)) for v in traj.modal_pos[:, k])
            vel = " ".join(repr(float(v)) for v in traj.modal_vel[:, k])
            fh.write(f"t {float(t)!r}\n{pos}\n{vel}\n")
