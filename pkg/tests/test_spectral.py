import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import trapezoid

from levy_galerkin import spectral as sp

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 40), elements=finite)


def test_eigenvalue_values():
    assert sp.eigenvalue(1) == pytest.approx(np.pi**2, rel=1e-15)
    assert sp.eigenvalue(3) == pytest.approx(9 * np.pi**2, rel=1e-15)
    with pytest.raises(ValueError):
        sp.eigenvalue(0)


def test_basis_values():
    assert sp.evaluate_basis(1, 0.5) == pytest.approx(np.sqrt(2), rel=1e-15)
    assert abs(sp.evaluate_basis(2, 0.5)) < 1e-15
    assert sp.evaluate_basis(4, 0.0) == 0.0 and abs(sp.evaluate_basis(4, 1.0)) < 1e-14
    with pytest.raises(ValueError):
        sp.evaluate_basis(1, 1.5)


def test_basis_orthonormal_by_quadrature():
    x = np.linspace(0.0, 1.0, 4001)
    E = np.array([sp.evaluate_basis(k, x) for k in range(1, 6)])
    G = trapezoid(E[:, None, :] * E[None, :, :], x, axis=-1)
    assert np.allclose(G, np.eye(5), atol=1e-6)


def test_semigroup_examples():
    assert np.allclose(sp.apply_semigroup(0.0, [1.0, 2.0]), [1.0, 2.0])
    out = sp.apply_semigroup(0.1, sp.unit_vector(1, 3))
    assert out[0] == pytest.approx(np.exp(-np.pi**2 * 0.1), rel=1e-14)
    assert np.all(out[1:] == 0.0)
    with pytest.raises(ValueError):
        sp.apply_semigroup(-1.0, [1.0])


def test_fractional_norm_examples():
    e2 = sp.unit_vector(2, 4)
    assert sp.hs_fractional_norm(2, e2) == pytest.approx(4 * np.pi**2, rel=1e-14)
    assert sp.hs_fractional_norm(1, e2) == pytest.approx(2 * np.pi, rel=1e-14)
    assert sp.hs_fractional_norm(0, [3.0, 4.0]) == pytest.approx(5.0)


def test_inner_with_padding():
    assert sp.h_inner([1.0, 2.0], [3.0]) == 3.0
    assert sp.h_norm([3.0, 0.0, 4.0]) == 5.0


@given(vectors, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=60, deadline=None)
def test_semigroup_property(v, s, t):
    lhs = sp.apply_semigroup(s, sp.apply_semigroup(t, v))
    rhs = sp.apply_semigroup(s + t, v)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


@given(vectors, st.floats(0.0, 5.0))
@settings(max_examples=60, deadline=None)
def test_semigroup_contraction(v, t):
    assert sp.h_norm(sp.apply_semigroup(t, v)) <= sp.h_norm(v) * (1 + 1e-14)


@given(vectors, st.floats(1e-3, 1.0))
@settings(max_examples=60, deadline=None)
def test_smoothing_estimate(v, t):
    # ||A S(t) v|| <= (e t)^-1 ||v||
    lhs = sp.hs_fractional_norm(2, sp.apply_semigroup(t, v))
    assert lhs <= sp.h_norm(v) / (np.e * t) * (1 + 1e-12) + 1e-300


def test_synthesize_matches_basis():
    x = np.linspace(0, 1, 11)
    v = np.array([0.5, -1.0, 2.0])
    ref = sum(c * sp.evaluate_basis(k + 1, x) for k, c in enumerate(v))
    assert np.allclose(sp.synthesize(v, x), ref)
