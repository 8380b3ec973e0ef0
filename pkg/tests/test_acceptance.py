"""Acceptance gates for the full pipeline at fixture resolution.

Run with ``pytest -s tests/test_acceptance.py`` to see one line per
criterion.  Every tolerance is pinned here; the runtime ceilings are the
laptop-scale budgets and the measured times sit far below them.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from degenwave import assembly as asm
from degenwave import cli
from degenwave import geometry as geo
from degenwave import mesh as msh
from degenwave import multiplier as mult
from degenwave import observability as obs
from degenwave import shape
from degenwave import spectral as sp
from degenwave import wave as wv

REPO = Path(__file__).resolve().parents[1]

H_FIXTURE = 0.05
ALPHA = 0.5
M_MODES = 64
BUMPS = [obs.InitialBump((0.0, 1.5), 0.4)]


def report(num, name, ok, elapsed, budget):
    line = (f"ACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} "
            f"({elapsed:.2f}s / budget {budget:.0f}s)")
    print(line)
    assert ok, line
    assert elapsed <= budget, f"runtime {elapsed:.1f}s over budget {budget}s"


@pytest.fixture(scope="module")
def fixture_domain():
    return geo.make_pinched_annulus()


@pytest.fixture(scope="module")
def fine_setup(fixture_domain):
    mesh = msh.triangulate(fixture_domain, h_max=H_FIXTURE, grading=1.0)
    op = asm.assemble(mesh, ALPHA)
    basis = sp.solve_eigs(op, M_MODES)
    return mesh, op, basis


def test_criterion_1_geometry_certification(fixture_domain):
    t0 = time.time()
    cert = geo.certify_domain(fixture_domain, samples=10_000, sign_tol=1e-9)
    ok = cert.passed
    ok &= cert.clause("SIGN_CONDITION_NEAR_ORIGIN").worst_value <= 1e-9
    counter = geo.certify_domain(geo.make_convex_disk(), samples=10_000)
    ok &= not counter.passed
    ok &= not counter.clause("SIGN_CONDITION_NEAR_ORIGIN").passed
    report(1, "geometry certification", bool(ok), time.time() - t0, 1.0)


def test_criterion_2_tensor_identities():
    t0 = time.time()
    rng = np.random.default_rng(20240917)
    worst_ratio = 0.0
    worst_resid = 0.0
    n = 0
    while n < 1000:
        x = rng.uniform(-2.0, 2.0, 2)
        if np.linalg.norm(x) < 1e-2:
            continue
        n += 1
        X = rng.standard_normal(2)
        alpha = rng.choice([0.1, 0.5, 0.9])
        worst_ratio = max(worst_ratio, abs(
            mult.radial_field_dilation_ratio(x, X, alpha)
            - 0.5 * (2.0 - alpha)))
        a_mat = rng.standard_normal((2, 2))
        a_mat = a_mat + a_mat.T
        b_vec = rng.standard_normal(2)
        j_mat = rng.standard_normal((2, 2))
        h0 = rng.standard_normal(2)

        def probe(xx):
            return (0.5 * xx @ a_mat @ xx + b_vec @ xx,
                    a_mat @ xx + b_vec, a_mat)

        def fld(xx):
            return j_mat @ xx + h0, j_mat

        worst_resid = max(worst_resid, mult.gradient_field_identity_residual(
            x, probe, fld, alpha))
    ok = worst_ratio <= 1e-11 and worst_resid <= 1e-10
    report(2, "pointwise multiplier tensor identities", bool(ok),
           time.time() - t0, 1.0)


def test_criterion_3_hardy_poincare(fine_setup):
    mesh, op, basis = fine_setup
    t0 = time.time()
    rng = np.random.default_rng(20240917)
    ok = True
    for _ in range(1000):
        u = op.embed(rng.standard_normal(len(op.interior)))
        ok &= asm.check_hardy(op, u, hardy_tol=1e-8).passed
        ok &= asm.check_poincare(op, u, M=4.0, tol=1e-8).passed
    for n in range(16):
        u = basis.nodal_mode(n)
        ok &= asm.check_hardy(op, u, hardy_tol=1e-8).passed
        ok &= asm.check_poincare(op, u, M=4.0, tol=1e-8).passed
    report(3, "discrete Hardy and Poincare inequalities", bool(ok),
           time.time() - t0, 10.0)


def test_criterion_4_spectrum(fixture_domain, fine_setup):
    mesh, op, basis = fine_setup
    t0 = time.time()
    ok = bool(basis.eigenvalues[0] >= 0.0078125)
    ok &= bool(np.max(basis.residuals) <= 1e-9)
    gram = basis.eigenvectors.T @ (op.mass_interior() @ basis.eigenvectors)
    ok &= bool(np.max(np.abs(gram - np.eye(M_MODES))) <= 1e-10)
    stiff = basis.eigenvectors.T @ (op.stiffness_interior()
                                    @ basis.eigenvectors)
    err = np.abs(stiff - np.diag(basis.eigenvalues))
    ok &= bool(np.max(err) <= 1e-8 * np.max(basis.eigenvalues))

    # alpha -> 0 consistency against the unweighted Laplacian oracle.
    from test_assembly import unweighted_p1_stiffness
    from scipy.sparse.linalg import eigsh

    op_small = asm.assemble(mesh, alpha=1e-4)
    lam_small = sp.solve_eigs(op_small, 1).eigenvalues[0]
    k_lap = unweighted_p1_stiffness(mesh)
    interior = mesh.interior_vertices()
    lam_oracle = eigsh(k_lap[interior][:, interior].tocsc(), k=1,
                       M=op_small.mass_interior(), sigma=0.0, which="LM",
                       return_eigenvectors=False)[0]
    ok &= bool(abs(lam_small - lam_oracle) <= 0.01 * lam_oracle)
    report(4, "spectrum gates at h_max = 0.05", bool(ok),
           time.time() - t0, 60.0)


def test_criterion_5_energy_conservation(fixture_domain, fine_setup):
    mesh, op, basis = fine_setup
    t0 = time.time()
    ok = True
    trajectories = []
    y0, y1 = obs.modal_data_from_bumps(BUMPS, mesh, op, basis,
                                       fixture_domain)
    trajectories.append(wv.WaveProblem(basis, y0, y1, T=8.0))
    e1 = np.zeros(M_MODES)
    e1[0] = 1.0
    trajectories.append(wv.WaveProblem(basis, e1, np.zeros(M_MODES), T=8.0))
    e2 = np.zeros(M_MODES)
    e2[1] = 1.0
    trajectories.append(wv.WaveProblem(basis, np.zeros(M_MODES), e2, T=8.0))
    for prob in trajectories:
        traj = wv.solve_modal(prob)
        e0 = traj.energy[0]
        drift = np.max(np.abs(traj.energy - e0)) / e0
        ok &= bool(drift <= 1e-10)
    report(5, "modal energy conservation", bool(ok), time.time() - t0, 5.0)


def test_criterion_6_integral_identities(fixture_domain):
    t0 = time.time()
    cut = geo.cut_domain(fixture_domain, 0.04)
    series = {mult.IDENTITY_1: [], mult.IDENTITY_2: []}
    for h in (4 * H_FIXTURE, 2 * H_FIXTURE, H_FIXTURE):
        mesh = msh.triangulate(cut, h_max=h, grading=1.0)
        op = asm.assemble(mesh, ALPHA)
        basis = sp.solve_eigs(op, M_MODES)
        y0 = np.zeros(M_MODES)
        y0[0] = 1.0
        traj = wv.solve_modal(wv.WaveProblem(basis, y0, np.zeros(M_MODES),
                                             T=4.0))
        for which in series:
            res = mult.multiplier_identity_residual(traj, op, mesh, which)
            series[which].append(res.relative_residual)
    ok = True
    for which, vals in series.items():
        ok &= vals[-1] <= 0.02
        decreasing = all(b < a for a, b in zip(vals, vals[1:]))
        # Identity 2 with constant coefficient is exact discretely: its
        # residual sits at the time-quadrature floor at every level.
        at_floor = all(v <= 1e-6 for v in vals)
        ok &= decreasing or at_floor
    print(f"    identity residuals: {series}")
    report(6, "space-time multiplier identities", bool(ok),
           time.time() - t0, 600.0)


def test_criterion_7_shape_design_sweep(fixture_domain):
    t0 = time.time()
    ladder = msh.build_epsilon_ladder(fixture_domain, [0.04, 0.02, 0.01],
                                      h_max=H_FIXTURE)
    # Extension-by-zero exactness on the finest cut.
    op_parent = asm.assemble(ladder.parent, ALPHA)
    mesh_c = ladder.cut_meshes[-1]
    op_c = asm.assemble(mesh_c, ALPHA)
    rng = np.random.default_rng(7)
    ok = True
    for _ in range(3):
        u = rng.standard_normal(mesh_c.num_vertices)
        u[mesh_c.boundary_vertex_mask()] = 0.0
        eu = shape.extend_by_zero(u, mesh_c, ladder.parent.num_vertices)
        a = u @ (op_c.stiffness @ u)
        b = eu @ (op_parent.stiffness @ eu)
        ok &= bool(abs(a - b) <= 1e-14 * a)

    result = shape.run_sweep(fixture_domain, [0.04, 0.02, 0.01], ALPHA,
                             BUMPS, T=4.0, m=M_MODES, h_max=H_FIXTURE,
                             ladder=ladder)
    ok &= result.energy_monotone()
    ok &= all(b < a for a, b in zip(result.dt_gap, result.dt_gap[1:]))
    ok &= result.trace_monotone()
    ok &= result.final_trace_fraction() <= 0.05
    print(f"    energy_gap={result.energy_gap} trace_gap={result.trace_gap} "
          f"final_fraction={result.final_trace_fraction():.4f}")
    report(7, "cut-domain convergence sweep", bool(ok), time.time() - t0,
           600.0)


def test_criterion_8_observability(fixture_domain):
    t0 = time.time()
    cache = {}
    rep8 = obs.observability_report(fixture_domain, 0.02, ALPHA, BUMPS,
                                    T=8.0, m=M_MODES, h_max=H_FIXTURE,
                                    obs_slack=0.15, cache=cache)
    ok = rep8.verdict == obs.VERDICT_PASS
    ok &= abs(rep8.bound - 0.41598) <= 2e-4      # 2(aT - 2b)/(theta M^(2a))
    ok &= rep8.constants.T_min == pytest.approx(6.0787, abs=2e-4)
    ok &= rep8.quotient >= rep8.bound * (1.0 - 0.15)
    rep4 = obs.observability_report(fixture_domain, 0.02, ALPHA, BUMPS,
                                    T=4.0, m=M_MODES, h_max=H_FIXTURE,
                                    obs_slack=0.15, cache=cache)
    ok &= rep4.verdict == obs.VERDICT_INCONCLUSIVE and rep4.bound == 0.0

    # Cross-term bound |(dy/dt, H(y) + P y / 2)| <= b E(0) at t in {0, T}.
    cut, mesh, op, basis, consts = cache[next(iter(cache))]
    y0, y1 = obs.modal_data_from_bumps(BUMPS, mesh, op, basis, cut)
    traj = wv.solve_modal(wv.WaveProblem(basis, y0, y1, T=8.0))
    e0 = obs.modal_initial_energy(basis, y0, y1)
    for k in (0, traj.times.shape[0] - 1):
        v = obs.momentum_cross_term(traj, op, mesh, consts, k)
        ok &= bool(abs(v) <= consts.b * e0 * (1.0 + 1e-6))
    print(f"    quotient={rep8.quotient:.4f} bound={rep8.bound:.5f} "
          f"T_min={rep8.constants.T_min:.4f}")
    report(8, "observability certificate", bool(ok), time.time() - t0, 300.0)


def test_criterion_8b_stability_gates(fixture_domain):
    # Companion stability certificates: the hidden-regularity ratio and the
    # observability quotient stay bounded across mesh refinement.
    t0 = time.time()
    ratios = []
    quotients = []
    for h in (0.2, 0.1, 0.05):
        cut = geo.cut_domain(fixture_domain, 0.02)
        mesh = msh.triangulate(cut, h_max=h)
        op = asm.assemble(mesh, ALPHA)
        basis = sp.solve_eigs(op, 48)
        y0, y1 = obs.modal_data_from_bumps(BUMPS, mesh, op, basis, cut)
        traj = wv.solve_modal(wv.WaveProblem(basis, y0, y1, T=8.0))
        ratios.append(obs.hidden_regularity_ratio(traj, mesh, op,
                                                  R0=fixture_domain.R0))
        quotients.append(
            obs.trace_energy(traj, mesh, op)
            / obs.modal_initial_energy(basis, y0, y1))
    spread = (max(ratios) - min(ratios)) / max(ratios)
    ok = spread <= 0.20
    qspread = (max(quotients) - min(quotients)) / max(quotients)
    ok &= qspread <= 0.20
    print(f"    hidden-regularity ratios {ratios} (spread {spread:.3f}); "
          f"quotients {quotients} (spread {qspread:.3f})")
    report("8b", "trace stability under refinement", bool(ok),
           time.time() - t0, 300.0)


def test_criterion_9_reproducibility(tmp_path):
    t0 = time.time()
    quick = str(REPO / "configs" / "quick.json")
    rc1 = cli.main(["all", "--config", quick, "--out", str(tmp_path / "a")])
    rc2 = cli.main(["all", "--config", quick, "--out", str(tmp_path / "b")])
    ok = rc1 == 0 and rc2 == 0
    m1 = (tmp_path / "a" / "MANIFEST").read_text()
    m2 = (tmp_path / "b" / "MANIFEST").read_text()
    ok &= m1 == m2
    report(9, "bit-reproducible artifacts", bool(ok), time.time() - t0,
           600.0)
