import numpy as np
import pytest

from degenwave import assembly as asm
from degenwave import geometry as geo
from degenwave import mesh as msh
from degenwave import spectral as sp
from degenwave import wave as wv


@pytest.fixture(scope="module")
def setup():
    dom = geo.make_pinched_annulus()
    mesh = msh.triangulate(dom, h_max=0.1)
    op = asm.assemble(mesh, alpha=0.5)
    basis = sp.solve_eigs(op, 64)
    return dom, mesh, op, basis


def unit(m, n):
    e = np.zeros(m)
    e[n] = 1.0
    return e


def test_single_mode_cosine(setup):
    _, _, _, basis = setup
    traj = wv.solve_modal(wv.WaveProblem(
        basis, unit(64, 0), np.zeros(64), T=8.0))
    lam1 = basis.eigenvalues[0]
    exact = np.cos(np.sqrt(lam1) * traj.times)
    assert np.max(np.abs(traj.modal_pos[0] - exact)) == 0.0
    assert np.max(np.abs(traj.modal_pos[1:])) == 0.0
    assert traj.energy[0] == pytest.approx(lam1 / 2.0, rel=1e-14)


def test_zero_data_zero_trajectory(setup):
    _, _, _, basis = setup
    traj = wv.solve_modal(wv.WaveProblem(
        basis, np.zeros(64), np.zeros(64), T=4.0))
    assert np.max(np.abs(traj.modal_pos)) == 0.0
    assert np.max(np.abs(traj.modal_vel)) == 0.0
    assert np.max(traj.energy) == 0.0


def test_velocity_mode_energy(setup):
    _, _, _, basis = setup
    traj = wv.solve_modal(wv.WaveProblem(
        basis, np.zeros(64), unit(64, 1), T=8.0))
    assert traj.energy[0] == pytest.approx(0.5, abs=1e-15)
    assert np.max(np.abs(traj.energy - 0.5)) <= 1e-12


def test_energy_conservation_generic_data(setup):
    _, _, _, basis = setup
    rng = np.random.default_rng(9)
    traj = wv.solve_modal(wv.WaveProblem(
        basis, rng.standard_normal(64), rng.standard_normal(64), T=8.0))
    drift = np.max(np.abs(traj.energy - traj.energy[0])) / traj.energy[0]
    assert drift <= 1e-10


def test_linearity(setup):
    _, _, _, basis = setup
    rng = np.random.default_rng(2)
    y0 = rng.standard_normal(64)
    y1 = rng.standard_normal(64)
    t1 = wv.solve_modal(wv.WaveProblem(basis, y0, y1, T=3.0))
    t2 = wv.solve_modal(wv.WaveProblem(basis, 2.5 * y0, 2.5 * y1, T=3.0))
    assert np.allclose(t2.modal_pos, 2.5 * t1.modal_pos, rtol=0, atol=1e-12)
    assert np.allclose(t2.modal_vel, 2.5 * t1.modal_vel, rtol=0, atol=1e-12)


def test_manufactured_forcing_second_order(setup):
    # y = sin(t) Phi_1 solves the problem with f = (lambda_1 - 1) sin(t),
    # y(0) = 0, y'(0) = Phi_1; trapezoidal Duhamel converges at order 2.
    _, _, _, basis = setup
    lam1 = basis.eigenvalues[0]
    errs = []
    for nf in (1024, 2048):
        ft = np.linspace(0.0, 8.0, nf + 1)
        fm = np.zeros((64, nf + 1))
        fm[0] = (lam1 - 1.0) * np.sin(ft)
        traj = wv.solve_modal(wv.WaveProblem(
            basis, np.zeros(64), unit(64, 0), T=8.0,
            forcing_times=ft, forcing_modal=fm))
        errs.append(np.max(np.abs(traj.modal_pos[0] - np.sin(traj.times))))
    assert errs[1] < errs[0]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] < 2e-5


def test_weak_form_residual(setup):
    # Space-time weak identity against test functions psi in the modal span
    # with psi(T) = dpsi(T) = 0: integrals reduce to per-mode time
    # quadrature thanks to orthonormality.
    from scipy.integrate import simpson

    _, _, _, basis = setup
    rng = np.random.default_rng(31)
    y0 = rng.standard_normal(64)
    y1 = rng.standard_normal(64)
    T = 4.0
    traj = wv.solve_modal(wv.WaveProblem(basis, y0, y1, T=T,
                                         dt_output=T / 4096))
    t = traj.times
    lam = basis.eigenvalues

    for trial in range(3):
        coeff = rng.standard_normal(8)
        # psi_n(t) = c_n (T - t)^2 cos(t): smooth, vanishing value and slope
        # at t = T.
        base = (T - t) ** 2 * np.cos(t)
        dbase = -2.0 * (T - t) * np.cos(t) - (T - t) ** 2 * np.sin(t)
        ddbase = (2.0 * np.cos(t) + 2.0 * (T - t) * np.sin(t)
                  + 2.0 * (T - t) * np.sin(t) - (T - t) ** 2 * np.cos(t))
        lhs = 0.0
        rhs = 0.0
        for n in range(8):
            yn = traj.modal_pos[n]
            psi_dd = coeff[n] * ddbase
            psi = coeff[n] * base
            lhs += simpson(yn * psi_dd, x=t) + lam[n] * simpson(yn * psi, x=t)
            rhs += -y0[n] * coeff[n] * dbase[0] + y1[n] * coeff[n] * base[0]
        scale = abs(lhs) + abs(rhs)
        assert abs(lhs - rhs) <= 1e-6 * max(scale, 1.0)


def test_bump_fixture_is_valid(setup):
    dom, mesh, op, _ = setup
    u = wv.sample_initial_bump((0.0, 1.5), 0.4, mesh, dom)
    assert np.all(u[mesh.boundary_vertex_mask()] == 0.0)
    assert np.max(u) <= 1.0
    assert np.max(u) > 0.5  # some vertex well inside the bump


def test_bump_center_value_is_one():
    val = wv.mollifier_bump(np.array([[0.3, 1.1]]), (0.3, 1.1), 0.2)
    assert val[0] == 1.0


def test_bump_touching_boundary_rejected(setup):
    dom, mesh, _, _ = setup
    with pytest.raises(wv.BumpTouchesBoundary):
        wv.sample_initial_bump((0.0, 0.0), 0.2, mesh, dom)
    with pytest.raises(wv.BumpTouchesBoundary):
        wv.sample_initial_bump((0.0, 2.9), 0.2, mesh, dom)


def test_negative_time_rejected(setup):
    _, _, _, basis = setup
    with pytest.raises(ValueError):
        wv.solve_modal(wv.WaveProblem(basis, unit(64, 0), np.zeros(64), T=0.0))


def test_energy_series_export(setup, tmp_path):
    _, _, _, basis = setup
    traj = wv.solve_modal(wv.WaveProblem(basis, unit(64, 0), np.zeros(64),
                                         T=1.0))
    path = tmp_path / "energy.csv"
    wv.write_energy_series(traj, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,E"
    assert len(lines) == traj.times.shape[0] + 1


def test_modal_states_export(setup, tmp_path):
    _, _, _, basis = setup
    y0 = np.zeros(64)
    y0[0] = 1.0
    traj = wv.solve_modal(wv.WaveProblem(basis, y0, np.zeros(64), T=1.0,
                                         dt_output=0.25))
    path = tmp_path / "states.txt"
    wv.write_modal_states(traj, path)
    text = path.read_text().strip().split("\n")
    assert text[0] == f"# modes 64 times {traj.times.shape[0]}"
    # One time header plus positions plus velocities per output time.
    assert len(text) == 1 + 3 * traj.times.shape[0]
    first_pos = [float(v) for v in text[2].split()]
    assert first_pos[0] == 1.0


def test_negative_eigenvalue_defensive(setup):
    _, _, _, basis = setup
    import dataclasses
    bad = dataclasses.replace(basis, eigenvalues=basis.eigenvalues - 1e6)
    with pytest.raises(wv.NegativeEigenvalue):
        wv.solve_modal(wv.WaveProblem(bad, np.zeros(64), np.zeros(64), T=1.0))
