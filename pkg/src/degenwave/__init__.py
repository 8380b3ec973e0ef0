"""Numerical laboratory for a wave equation degenerating at a boundary point.

Modules cover the full pipeline: admissible geometry and its certification,
nested graded meshes, weighted finite element assembly, the eigenbasis of
the weighted operator, exact modal wave evolution, the Riemannian
multiplier identities, the cut-domain convergence sweep, and boundary
observability certificates.
"""

__version__ = "0.1.0"

from .geometry import (CutDomainSpec, DomainSpec, certify_domain, cut_domain,
                       compute_gamma0, load_domain, make_convex_disk,
                       make_pinched_annulus)
from .mesh import TriMesh, build_epsilon_ladder, triangulate
from .assembly import WeightedOperator, assemble, check_hardy, check_poincare
from .spectral import ModalBasis, project, solve_eigs
from .wave import WaveProblem, WaveTrajectory, sample_initial_bump, solve_modal
from .multiplier import (MultiplierConstants, compute_constants,
                         gradient_field_identity_residual,
                         multiplier_identity_residual,
                         radial_field_dilation_ratio)
from .observability import (InitialBump, ObservabilityReport,
                            observability_report, trace_energy)
from .shape import SweepResult, extend_by_zero, run_sweep

__all__ = [
    "CutDomainSpec", "DomainSpec", "certify_domain", "cut_domain",
    "compute_gamma0", "load_domain", "make_convex_disk",
    "make_pinched_annulus",
    "TriMesh", "build_epsilon_ladder", "triangulate",
    "WeightedOperator", "assemble", "check_hardy", "check_poincare",
    "ModalBasis", "project", "solve_eigs",
    "WaveProblem", "WaveTrajectory", "sample_initial_bump", "solve_modal",
    "MultiplierConstants", "compute_constants",
    "gradient_field_identity_residual", "multiplier_identity_residual",
    "radial_field_dilation_ratio",
    "InitialBump", "ObservabilityReport", "observability_report",
    "trace_energy",
    "SweepResult", "extend_by_zero", "run_sweep",
]
