import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from levy_galerkin import fem
from levy_galerkin.fem import FemMesh, SpectralTruncation
from levy_galerkin.spectral import eigenvalues, synthesize, unit_vector


def closed_form_lambda_h(M):
    h = 1.0 / (M + 1)
    i = np.arange(1, M + 1)
    c = np.cos(i * np.pi * h)
    return 6.0 / h**2 * (1 - c) / (2 + c)


def test_p1_matrices_small():
    op = fem.assemble_p1(1)
    assert op.stiffness.tolist() == [[4.0]]
    assert op.mass[0, 0] == pytest.approx(1.0 / 3.0)
    op = fem.assemble_p1(2)
    assert np.allclose(op.stiffness, 3.0 * np.array([[2, -1], [-1, 2]]))
    assert np.allclose(op.mass, np.array([[4, 1], [1, 4]]) / 18.0)
    with pytest.raises(ValueError):
        fem.assemble_p1(0)


def test_single_node_eigenvalue():
    assert fem.discrete_eigenvalues(FemMesh(1))[0] == pytest.approx(12.0, rel=1e-14)


@pytest.mark.parametrize("M", [2, 7, 31, 127])
def test_discrete_eigenvalues_closed_form(M):
    lam_h = fem.discrete_eigenvalues(FemMesh(M))
    assert np.allclose(lam_h, closed_form_lambda_h(M), rtol=1e-10)
    # min-max: the conforming approximation overestimates each eigenvalue
    assert np.all(lam_h >= eigenvalues(M) * (1 - 1e-12))


def test_eigenvectors_mass_orthonormal():
    op, eig = fem.fem_system(15)
    V = eig.vectors
    assert np.allclose(V.T @ op.mass @ V, np.eye(15), atol=1e-12)
    assert np.allclose(V.T @ op.stiffness @ V, np.diag(eig.lambdas), atol=1e-9)


def test_spectral_truncation_h():
    assert SpectralTruncation(4).h == pytest.approx(1 / (4 * np.pi))
    with pytest.raises(ValueError):
        SpectralTruncation(0)


def _nodal_function(c, M, x):
    nodes = np.linspace(0, 1, M + 2)
    return np.interp(x, nodes, np.r_[0.0, c, 0.0])


def test_hat_loads_against_quadrature():
    M, dim = 5, 12
    B = fem.hat_loads(M, dim)
    x = np.linspace(0, 1, 200001)
    for i in (0, 2, 4):
        c = np.zeros(M)
        c[i] = 1.0
        phi = _nodal_function(c, M, x)
        for k in (1, 5, 12):
            ek = np.sqrt(2) * np.sin(k * np.pi * x)
            assert B[i, k - 1] == pytest.approx(trapezoid(phi * ek, x), abs=1e-9)


def test_h_distance_against_quadrature():
    M = 7
    disc = FemMesh(M)
    rng = np.random.default_rng(3)
    c = rng.standard_normal(M)
    v = rng.standard_normal(10) / np.arange(1, 11)
    x = np.linspace(0, 1, 400001)
    diff = _nodal_function(c, M, x) - synthesize(v, x)
    assert fem.h_distance(c, disc, v) == pytest.approx(np.sqrt(trapezoid(diff**2, x)), rel=1e-7)


def test_projection_galerkin_orthogonality():
    M = 9
    disc = FemMesh(M)
    v = 1.0 / np.arange(1, 41) ** 2
    c = fem.p_h_project(v, disc)
    op, _ = fem.fem_system(M)
    # <P_h v - v, phi_i> = 0 for every hat function
    assert np.allclose(op.mass @ c, fem.hat_loads(M, v.size) @ v, atol=1e-14)
    r = fem.r_h_project(v, disc)
    # a(R_h v - v, phi_i) = 0
    assert np.allclose(op.stiffness @ r, fem.hat_loads(M, v.size) @ (eigenvalues(v.size) * v),
                       atol=1e-12)


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_projection_self_adjoint_and_idempotent(M, seed):
    disc = FemMesh(M)
    rng = np.random.default_rng(seed)
    u, w = rng.standard_normal((2, 20))
    pu, pw = fem.p_h_project(u, disc), fem.p_h_project(w, disc)
    assert fem.h_inner_mixed(pu, disc, w) == pytest.approx(fem.h_inner_mixed(pw, disc, u),
                                                           rel=1e-9, abs=1e-12)
    # P_h of a V_h element is itself: project its sine expansion to many modes
    back = fem.p_h_project(fem.to_spectral(pu, disc, 64 * (M + 1)), disc)
    assert np.allclose(back, pu, rtol=1e-3, atol=1e-3 * np.abs(pu).max())


@given(st.integers(1, 40))
@settings(max_examples=20, deadline=None)
def test_projection_minimises_error(M):
    disc = FemMesh(M)
    v = 1.0 / np.arange(1, 60) ** 1.5
    best = fem.h_distance(fem.p_h_project(v, disc), disc, v)
    assert best <= fem.h_distance(fem.r_h_project(v, disc), disc, v) * (1 + 1e-10)


def test_spectral_projection_is_truncation():
    disc = SpectralTruncation(3)
    assert np.array_equal(fem.p_h_project([1.0, 2.0, 3.0, 4.0], disc), [1.0, 2.0, 3.0])
    assert np.array_equal(fem.r_h_project([1.0], disc), [1.0, 0.0, 0.0])


def test_ritz_ratio_bounded():
    ratios = []
    for M in (7, 15, 31, 63, 127):
        disc = FemMesh(M)
        e1 = unit_vector(1, 1)
        err = fem.h_distance(fem.r_h_project(e1, disc), disc, e1)
        ratios.append(err / (disc.h**2 * np.pi**2))
    assert max(ratios) / min(ratios) < 2.0
    assert max(ratios) < 1.0


def test_discrete_semigroup_matches_modal():
    disc = FemMesh(6)
    c = np.arange(1.0, 7.0)
    assert np.allclose(fem.apply_discrete_semigroup(0.0, c, disc), c)
    s = fem.apply_discrete_semigroup(0.3, fem.apply_discrete_semigroup(0.2, c, disc), disc)
    assert np.allclose(s, fem.apply_discrete_semigroup(0.5, c, disc))


def _dense_norm(t, M, R):
    """||F_h(t)|| from an explicitly assembled Gram matrix of F_h(t) e_j."""
    disc = FemMesh(M)
    op, _ = fem.fem_system(M)
    B = fem.hat_loads(M, R)
    s = np.exp(-eigenvalues(R) * t)
    W = np.column_stack([fem.apply_discrete_semigroup(t, fem.p_h_project(unit_vector(j, R), disc), disc)
                         for j in range(1, R + 1)])
    cross = W.T @ B  # <w_i, e_j>
    G = W.T @ op.mass @ W - cross * s[None, :] - (cross * s[None, :]).T + np.diag(s**2)
    return np.sqrt(np.linalg.eigvalsh(G)[-1])


@pytest.mark.parametrize("t", [0.01, 0.1])
def test_operator_norm_against_dense(t):
    est = fem.operator_norm_F_h(t, FemMesh(7), 64)
    assert est == pytest.approx(_dense_norm(t, 7, 64), rel=1e-6)


def test_operator_norm_spectral_closed_form():
    N, t = 8, 0.02
    est = fem.operator_norm_F_h(t, SpectralTruncation(N), 64)
    assert est == pytest.approx(np.exp(-eigenvalues(N + 1)[-1] * t), rel=1e-8)


def test_operator_norm_rejects_t_zero():
    with pytest.raises(ValueError):
        fem.operator_norm_F_h(0.0, FemMesh(3), 16)


def test_operator_norm_reports_nonconvergence():
    with pytest.raises(fem.ComputationError):
        fem.operator_norm_F_h(0.01, FemMesh(15), 128, rtol=0.0, max_iter=3)
