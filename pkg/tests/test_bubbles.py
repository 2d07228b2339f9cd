import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.stats import ortho_group

from fracbn.bubbles import (BubbleSpec, boundary_spec, boundary_test_function, bubble_extension_w1, bubble_trace,
                            choose_beta, cutoff, cutoff_profile, diagonalizing_map, interior_spec,
                            interior_test_function, kernel_constant, kernel_constant_closed_form, kernel_mass,
                            poisson_kernel, u1_profile, w1_gradient, w1_profile)
from fracbn.domain import CoefficientField, Disc, Interval, build_grid
from fracbn.exceptions import ContainmentError, HypothesisViolation, PreconditionError
from fracbn.extension import make_cylinder, solve_extension

NS = [(1, 0.3), (2, 0.4), (2, 0.5), (3, 0.7)]


def test_bubble_center_values():
    assert bubble_trace(BubbleSpec(2, 0.4, 1.0), [0.0, 0.0]) == 1.0
    eps = 0.03
    assert bubble_trace(BubbleSpec(2, 0.4, eps), [0.0, 0.0]) == pytest.approx(eps ** -0.6)


@given(st.floats(1e-3, 10), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_bubble_scaling(eps, x):
    spec = BubbleSpec(2, 0.4, eps, (0.1, -0.2))
    x = np.array(x)
    ref = eps ** (-spec.exponent) * u1_profile(2, 0.4, np.linalg.norm(x - spec.center) / eps)
    assert bubble_trace(spec, x) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n,s", NS)
def test_kernel_normalization(n, s):
    for y in (0.1, 1.0, 10.0):
        assert kernel_mass(n, s, y) == pytest.approx(1.0, abs=1e-8)
    assert kernel_constant(n, s) == pytest.approx(kernel_constant_closed_form(n, s), rel=1e-10)


@given(st.floats(0.05, 20), st.lists(st.floats(-4, 4), min_size=2, max_size=2))
def test_kernel_scaling(y, x):
    x = np.array(x)
    assert poisson_kernel(2, 0.4, x, y) == pytest.approx(y**-2 * poisson_kernel(2, 0.4, x / y, 1.0), rel=1e-12)


def test_kernel_radially_nonincreasing():
    r = np.linspace(0, 10, 200)
    vals = poisson_kernel(2, 0.3, np.column_stack([r, 0 * r]), 0.7)
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("n,s", NS)
def test_w1_trace(n, s):
    rho = np.linspace(0, 6, 13)
    np.testing.assert_array_equal(w1_profile(n, s, rho, 0.0), u1_profile(n, s, rho))
    x = np.zeros(n)
    x[0] = 1.3
    assert bubble_extension_w1(n, s, x, 0.0) == pytest.approx(u1_profile(n, s, 1.3))
    assert w1_profile(n, s, 1.3, 1e-9) == pytest.approx(u1_profile(n, s, 1.3), rel=1e-5)


def _w1_mpmath(n, s, rho, y):
    import mpmath as mp

    from fracbn.bubbles import _w1_consts

    mp.mp.dps = 40
    m1, m2, C = _w1_consts(n, s)
    y, rho = mp.mpf(y), mp.mpf(rho)
    f = lambda u: (1 - u) ** (m1 - 1) * u ** (m2 - 1) * ((1 - u) * y**2 + u + u * (1 - u) * rho**2) ** (-mp.mpf(n) / 2)
    pts = [0] + [mp.mpf(10) ** -k for k in range(30, 0, -1)] + [mp.mpf(1) / 2, 1]
    return float(C * y ** (2 * s) * mp.quad(f, pts))


@pytest.mark.parametrize("n,s", NS)
def test_w1_against_high_precision(n, s):
    for rho, y in [(1.3, 1e-4), (0.0, 1e-2), (3.0, 1.0), (10.0, 0.5)]:
        assert w1_profile(n, s, rho, y) == pytest.approx(_w1_mpmath(n, s, rho, y), rel=1e-10)


@pytest.mark.parametrize("n,s", NS)
def test_w1_parameter_integral_matches_real_space(n, s):
    for rho, y in [(0.0, 0.5), (0.7, 0.2), (2.0, 1.0), (5.0, 0.05), (1.0, 4.0)]:
        x = np.zeros(n)
        x[0] = rho
        assert w1_profile(n, s, rho, y) == pytest.approx(bubble_extension_w1(n, s, x, y), rel=1e-8)


@pytest.mark.parametrize("n,s", NS)
def test_w1_far_field_refinement(n, s):
    from fracbn.bubbles import QuadSpec

    coarse = bubble_extension_w1(n, s, np.zeros(n), 10.0, QuadSpec(epsrel=1e-6)) * 10 ** (n - 2 * s)
    fine = bubble_extension_w1(n, s, np.zeros(n), 10.0, QuadSpec(epsrel=1e-12)) * 10 ** (n - 2 * s)
    assert coarse == pytest.approx(fine, rel=0.2)
    assert w1_profile(n, s, 0.0, 100.0) < w1_profile(n, s, 0.0, 10.0)


@pytest.mark.parametrize("n,s", NS)
def test_w1_gradient_finite_differences(n, s):
    rho = np.array([0.3, 1.0, 2.5, 0.01])
    y = np.array([0.4, 0.05, 1.5, 0.2])
    v, dr, dy = w1_gradient(n, s, rho, y)
    h = 1e-5
    np.testing.assert_allclose(dr, (w1_profile(n, s, rho + h, y) - w1_profile(n, s, rho - h, y)) / (2 * h),
                               rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(dy, (w1_profile(n, s, rho, y + h) - w1_profile(n, s, rho, y - h)) / (2 * h),
                               rtol=1e-5, atol=1e-9)
    with pytest.raises(PreconditionError):
        w1_gradient(n, s, 1.0, 0.0)


def test_w1_agrees_with_extension_solver_1d():
    s = 0.3
    g = build_grid(Interval(-40.0, 40.0), 801)
    f = CoefficientField.constant([[1.0]])
    cyl = make_cylinder(g, s, f, y_max=400.0)
    x = g.interior[:, 0]
    w = solve_extension(cyl, f, s, u1_profile(1, s, x))
    near = np.abs(x) <= 5
    for y in (0.1, 0.5, 1.0):
        m = int(np.argmin(np.abs(cyl.y - y)))
        exact = w1_profile(1, s, x[near], cyl.y[m])
        assert np.linalg.norm(w.values[m][near] - exact) <= 0.05 * np.linalg.norm(exact)


def test_cutoff_values():
    assert cutoff(2.0, (np.array([0.6]), 0.0)) == 1.0
    assert cutoff(2.0, (np.array([0.0, 3.0]), 0.0)) == 0.0
    t = np.linspace(0, 1.2, 500)
    assert np.all(np.diff(cutoff_profile(t)) <= 0)
    phi, dphi = cutoff_profile(t, derivative=True)
    assert np.all(dphi <= 0)
    np.testing.assert_allclose(dphi[1:-1], np.gradient(phi, t)[1:-1], atol=0.05)


def test_diagonalizing_map_examples():
    m = diagonalizing_map(np.eye(2))
    np.testing.assert_allclose(m.a, 1.0)
    np.testing.assert_allclose(m.O @ m.O.T, np.eye(2), atol=1e-14)
    m = diagonalizing_map(np.diag([4.0, 1.0]))
    xt = m.forward([[2.0, 3.0]])[0]
    big = int(np.argmax(m.a))
    assert abs(xt[big]) == pytest.approx(1.0) and abs(xt[1 - big]) == pytest.approx(3.0)
    assert m.jacobian == pytest.approx(2.0)
    with pytest.raises(PreconditionError):
        diagonalizing_map(np.diag([1.0, -1.0]))


@given(st.integers(0, 2**32 - 1))
def test_diagonalizing_map_round_trip(seed):
    rng = np.random.default_rng(seed)
    Q = ortho_group.rvs(3, random_state=rng)
    A0 = Q @ np.diag(rng.uniform(0.2, 5.0, 3)) @ Q.T
    m = diagonalizing_map(A0)
    np.testing.assert_allclose(m.O.T @ m.O, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(m.matrix(), A0, atol=1e-12 * np.abs(A0).max())
    x = rng.standard_normal((5, 3))
    np.testing.assert_allclose(m.inverse(m.forward(x)), x, atol=1e-12)
    xt = m.forward(x)
    # the form of A0^-1 becomes Euclidean
    np.testing.assert_allclose(np.sum(xt**2, axis=1), np.einsum("ij,jk,ik->i", x, np.linalg.inv(A0), x), rtol=1e-10)


@pytest.mark.parametrize("r", [2.0, 4.0])
def test_jacobian_power_is_one_half(r):
    # int f(Phi x)^r dx = det(A0)^(1/2) int f^r, for every r
    A0 = np.array([[3.0, 1.0], [1.0, 2.0]])
    m = diagonalizing_map(A0)
    t = np.linspace(-8, 8, 801)
    X = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    f = np.exp(-np.sum(m.forward(X) ** 2, axis=1))
    lhs = np.sum(f**r) * (t[1] - t[0]) ** 2
    assert lhs == pytest.approx(m.jacobian * np.pi / r, rel=1e-8)


def test_interior_test_function_examples():
    tf = interior_spec(2, 0.4, 0.05, [0.0, 0.0], np.eye(2), 0.5, domain=Disc())
    assert interior_test_function(tf, [[0.0, 0.0]], 0.0)[0] == pytest.approx(0.05 ** -0.6)
    assert interior_test_function(tf, [[0.4, 0.3]], 0.0)[0] == 0.0
    assert interior_test_function(tf, [[0.1, 0.0]], 0.5)[0] == 0.0
    with pytest.raises(PreconditionError):
        boundary_test_function(tf, [[0.0, 0.0]], 0.0)


@given(st.floats(0, 2 * np.pi), st.floats(0, 0.4), st.floats(0, 0.3))
def test_interior_identity_map_reduces_to_euclidean(theta, r, y):
    eps, rad = 0.05, 0.5
    tf = interior_spec(2, 0.4, eps, [0.1, 0.0], np.eye(2), rad)
    x = np.array([[0.1 + r * np.cos(theta), r * np.sin(theta)]])
    ref = cutoff(rad, (x[0] - [0.1, 0.0], y)) * eps**-0.6 * w1_profile(2, 0.4, r / eps, y / eps)
    assert interior_test_function(tf, x, y)[0] == pytest.approx(float(ref), rel=1e-12, abs=1e-300)


def test_interior_support_on_boundary_is_zero():
    g = build_grid(Disc(), 33)
    tf = interior_spec(2, 0.4, 0.05, [0.0, 0.0], np.eye(2), 0.9, domain=Disc())
    for y in (0.0, 0.1, 1.0):
        np.testing.assert_array_equal(interior_test_function(tf, g.boundary, y), 0.0)
    with pytest.raises(ContainmentError):
        interior_spec(2, 0.4, 0.05, [0.5, 0.0], np.eye(2), 0.6, domain=Disc())


def test_anisotropic_support_checked_in_mapped_coordinates():
    A0 = np.diag([4.0, 1.0])
    # mapped ball of radius 0.45 stretches to 0.9 along the first axis
    interior_spec(2, 0.4, 0.05, [0.0, 0.0], A0, 0.45, domain=Disc())
    with pytest.raises(ContainmentError):
        interior_spec(2, 0.4, 0.05, [0.0, 0.0], A0, 0.55, domain=Disc())


def _cusp_spec(j, reading="default"):
    from fracbn.domain import Cusp

    xj = np.array([0.0, 2.0**-j])
    return boundary_spec(2, 0.25, [0.0, 0.0], xj, 2.0, 4.0, 0.25, np.eye(2), j=j, domain=Cusp(), reading=reading)


def test_boundary_center_and_support():
    tf = _cusp_spec(3)
    eps_j = 2.0**-3
    assert tf.eps_j == eps_j
    assert boundary_test_function(tf, [tf.center], 0.0)[0] == pytest.approx(eps_j ** (-4 * 0.75))
    far = tf.center + np.array([2 * 0.25 * eps_j**2, 0.0])
    assert boundary_test_function(tf, [far], 0.0)[0] == 0.0
    lit = _cusp_spec(3, "literal")
    assert lit.eps_j == pytest.approx(eps_j**2)


@given(st.integers(0, 2**32 - 1))
def test_boundary_rescaling_identity(seed):
    tf = _cusp_spec(4)
    e = tf.eps_j
    rng = np.random.default_rng(seed)
    x = tf.center + rng.uniform(-1, 1, (6, 2)) * 0.3 * e**2
    y = rng.uniform(0, 0.3 * e**2, 6)
    inner = interior_spec(2, 0.25, e ** (4 - 2), [0.0, 0.0], np.eye(2), 0.25)
    ref = (e**2) ** ((0.5 - 2) / 2) * interior_test_function(inner, (x - tf.center) / e**2, y / e**2)
    np.testing.assert_allclose(boundary_test_function(tf, x, y), ref, rtol=1e-10, atol=0)


def test_boundary_spec_preconditions():
    with pytest.raises(PreconditionError):
        boundary_spec(2, 0.25, [0, 0], [0, 0.5], 2.0, 1.5, 0.25, np.eye(2))
    with pytest.raises(PreconditionError):
        boundary_spec(2, 0.25, [0, 0], [0, 0.5], 2.0, 4.0, 0.25, np.eye(2), reading="other")


def test_choose_beta_example():
    assert choose_beta(2, 0.25, 1.0, 1.0) == pytest.approx(1.75)
    with pytest.raises(HypothesisViolation):
        choose_beta(2, 0.25, 0.75, 1.0)
    with pytest.raises(HypothesisViolation):
        choose_beta(2, 0.25, 1.0, 4.0 / 3.0)


@given(st.sampled_from([2, 3]), st.floats(0.05, 0.7), st.floats(0.0, 1.0), st.floats(0.0, 0.999))
def test_choose_beta_property(n, s, u, v):
    assume(n > 4 * s)
    smin = 2 * s * (n - 2 * s) / (n - 4 * s)
    sigma = smin * (1.001 + 3 * u)
    amax = sigma * (n - 4 * s) / (2 * s * (n - 2 * s))
    alpha = 1 + v * (amax - 1)
    assume(alpha < amax * (1 - 1e-9))
    beta = choose_beta(n, s, sigma, alpha)
    assert beta > alpha
    assert 2 * s * beta < min(sigma, (n - 2 * s) * (beta - alpha))
