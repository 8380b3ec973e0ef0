import numpy as np
import pytest

from degenwave import assembly as asm
from degenwave import geometry as geo
from degenwave import mesh as msh
from degenwave import spectral as sp


@pytest.fixture(scope="module")
def omega_mesh():
    return msh.triangulate(geo.make_pinched_annulus(), h_max=0.1)


@pytest.fixture(scope="module")
def op(omega_mesh):
    return asm.assemble(omega_mesh, alpha=0.5)


@pytest.fixture(scope="module")
def basis(op):
    return sp.solve_eigs(op, 64)


def test_lambda1_above_variational_bound(basis):
    # (N - 2 + alpha)^2 / (4 M^(2-alpha)) with N=2, alpha=0.5, M=4.
    assert sp.lambda1_lower_bound(0.5, 4.0) == pytest.approx(0.0078125)
    assert basis.eigenvalues[0] >= 0.0078125


def test_residuals(basis):
    assert np.max(basis.residuals) <= 1e-9


def test_eigenvalues_ascending_positive(basis):
    assert basis.eigenvalues[0] > 0.0
    assert np.all(np.diff(basis.eigenvalues) >= 0.0)


def test_mass_orthonormality(basis, op):
    g = basis.eigenvectors.T @ (op.mass_interior() @ basis.eigenvectors)
    assert np.max(np.abs(g - np.eye(basis.m))) <= 1e-10


def test_stiffness_orthogonality(basis, op):
    s = basis.eigenvectors.T @ (op.stiffness_interior() @ basis.eigenvectors)
    err = np.abs(s - np.diag(basis.eigenvalues))
    assert np.max(err) <= 1e-8 * np.max(basis.eigenvalues)


def test_sign_convention_and_determinism(basis, op):
    again = sp.solve_eigs(op, 64)
    assert np.array_equal(again.eigenvalues, basis.eigenvalues)
    assert np.array_equal(again.eigenvectors, basis.eigenvectors)
    for j in range(basis.m):
        v = basis.eigenvectors[:, j]
        big = np.flatnonzero(np.abs(v) > 1e-10 * np.max(np.abs(v)))
        assert v[big[0]] > 0.0


def test_alpha_to_zero_matches_unweighted(omega_mesh):
    # Independent oracle: generalized eigenproblem of the plain Laplacian on
    # the same mesh (cotangent formula), solved by the same ARPACK backend.
    from test_assembly import unweighted_p1_stiffness
    from scipy.sparse.linalg import eigsh

    op_small = asm.assemble(omega_mesh, alpha=1e-4)
    b_small = sp.solve_eigs(op_small, 1)
    k_lap = unweighted_p1_stiffness(omega_mesh)
    interior = omega_mesh.interior_vertices()
    kint = k_lap[interior][:, interior].tocsc()
    mint = op_small.mass_interior()
    lam = eigsh(kint, k=1, M=mint, sigma=0.0, which="LM",
                return_eigenvectors=False)
    assert b_small.eigenvalues[0] == pytest.approx(lam[0], rel=0.01)


def test_rayleigh_never_beats_lambda1(basis, op):
    kint = op.stiffness_interior()
    mint = op.mass_interior()
    rng = np.random.default_rng(11)
    lam1 = basis.eigenvalues[0]
    for _ in range(200):
        u = rng.standard_normal(kint.shape[0])
        q = (u @ (kint @ u)) / (u @ (mint @ u))
        assert q >= lam1 * (1.0 - 1e-9)
    # Restricted to the eigenspace the minimum is attained.
    q1 = (basis.eigenvectors[:, 0] @ (kint @ basis.eigenvectors[:, 0]))
    assert q1 == pytest.approx(lam1, rel=1e-9)


def test_project_unit_vectors(basis, op):
    u = basis.nodal_mode(2)
    c = sp.project(basis, op, u)
    expected = np.zeros(basis.m)
    expected[2] = 1.0
    assert np.max(np.abs(c - expected)) < 1e-10
    assert np.max(np.abs(sp.project(basis, op, np.zeros(op.num_dofs)))) == 0.0


def test_project_bessel(basis, op):
    rng = np.random.default_rng(3)
    u = op.embed(rng.standard_normal(len(op.interior)))
    c = sp.project(basis, op, u)
    # Bessel: modal energy of the projection never exceeds the full energy.
    assert sp.modal_energy_norm_sq(basis, c) <= u @ (op.stiffness @ u) + 1e-10


def test_full_basis_reconstructs(omega_mesh):
    # On a coarse mesh, the complete basis reproduces any interior vector.
    coarse = msh.triangulate(geo.make_pinched_annulus(), h_max=0.4)
    op = asm.assemble(coarse, alpha=0.5)
    n = len(op.interior)
    full = sp.solve_eigs(op, n - 1)
    # n-1 modes (ARPACK bound); reconstruct a vector in their span.
    rng = np.random.default_rng(0)
    c = rng.standard_normal(n - 1)
    u = sp.reconstruct(full, c)
    c2 = sp.project(full, op, u)
    assert np.max(np.abs(c2 - c)) < 1e-10


def test_parseval_energy(basis, op):
    rng = np.random.default_rng(23)
    c = rng.standard_normal(basis.m)
    u = sp.reconstruct(basis, c)
    direct = u @ (op.stiffness @ u)
    modal = sp.modal_energy_norm_sq(basis, c)
    assert direct == pytest.approx(modal, rel=1e-8)


def test_domain_monotonicity_of_lambda1():
    # Nested discretizations: extension by zero makes the cut-domain space a
    # subspace of the parent's, so lambda1 can only go up on the cut domain.
    dom = geo.make_pinched_annulus()
    lad = msh.build_epsilon_ladder(dom, [0.04], h_max=0.12)
    op_parent = asm.assemble(lad.parent, alpha=0.5)
    op_cut = asm.assemble(lad.cut_meshes[0], alpha=0.5)
    l_parent = sp.solve_eigs(op_parent, 1).eigenvalues[0]
    l_cut = sp.solve_eigs(op_cut, 1).eigenvalues[0]
    assert l_cut >= l_parent * (1.0 - 1e-12)


def test_m_out_of_range(op):
    with pytest.raises(ValueError):
        sp.solve_eigs(op, 0)


def test_eigen_report(basis, tmp_path):
    path = tmp_path / "eigs.csv"
    sp.write_eigen_report(basis, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "n,lambda,residual"
    assert len(lines) == basis.m + 1
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(basis.eigenvalues[0])


def test_eigenvalues_decrease_under_refinement():
    # Conforming refinement drives every eigenvalue down toward the
    # continuum value; the two finest levels agree within 2% for n <= 10.
    dom = geo.make_pinched_annulus()
    lams = {}
    for h in (0.2, 0.1, 0.05):
        mesh = msh.triangulate(dom, h_max=h)
        op = asm.assemble(mesh, alpha=0.5)
        lams[h] = sp.solve_eigs(op, 10).eigenvalues
    assert np.all(lams[0.1] <= lams[0.2] * (1.0 + 1e-12))
    assert np.all(lams[0.05] <= lams[0.1] * (1.0 + 1e-12))
    cauchy = np.max(np.abs(lams[0.1] - lams[0.05]) / lams[0.05])
    assert cauchy <= 0.02
