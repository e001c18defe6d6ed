import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stekopt import corpus as C
from stekopt.exceptions import EstimatorFailure, IndefiniteHessianError
from stekopt.model import (
    RegularizedSurrogate,
    check_hessian_sandwich,
    solve_spd,
    surrogate_gradient,
    surrogate_hessian,
    surrogate_value,
)
from stekopt.smoothing import (
    AveragingDomain,
    EstimatorConfig,
    double_average_gradient,
    double_average_value,
    gradient_norm_bound_constant,
)
from stekopt.solver import newton_step

Q = EstimatorConfig("quadrature", quadrature_points_per_axis=64)
MC = EstimatorConfig("monte_carlo", 1024, 4096, seed=3)


def sur(spec, r=1.0, anchor=0.0, lam=1.0, cfg=Q, shape="cube"):
    dom = AveragingDomain(shape, r, spec.dim)
    return RegularizedSurrogate(spec, dom, cfg, np.broadcast_to(anchor, (spec.dim,)), lam)


def test_surrogate_is_immutable():
    s = sur(C.make_abs1d(), anchor=0.3)
    with pytest.raises(Exception):
        s.reg_weight = 2.0
    with pytest.raises(ValueError):
        s.anchor[0] = 1.0
    with pytest.raises(ValueError):
        sur(C.make_abs1d(), lam=-1.0)


@pytest.mark.parametrize("cfg", [Q, MC], ids=["quad", "mc"])
def test_anchor_identities_exact(cfg):
    spec = C.make_l1(2)
    x = np.array([0.3, -0.8])
    s = sur(spec, anchor=x, lam=5.0, cfg=cfg)
    assert surrogate_value(s, x) == double_average_value(spec, s.domain, x, cfg).payload
    np.testing.assert_array_equal(surrogate_gradient(s, x), double_average_gradient(spec, s.domain, x, cfg).payload)


def test_value_example_quad_1d():
    spec = C.make_quad(1, [[1.0]])
    s = sur(spec, anchor=0.0, lam=0.5)
    phi1 = double_average_value(spec, s.domain, 1.0, Q).payload
    assert surrogate_value(s, 1.0) == pytest.approx(phi1 + 0.5)
    # averaging x**2/2 twice over [-1, 1] adds (1/3 + 1/3)/2
    assert phi1 == pytest.approx(0.5 + 1 / 3, abs=1e-4)


def test_lambda_zero_is_plain_average():
    spec = C.make_abs1d()
    s = sur(spec, anchor=0.0, lam=0.0)
    assert surrogate_value(s, 0.7) == double_average_value(spec, s.domain, 0.7, Q).payload


def test_gradient_example_abs1d():
    # the double average has slope 1 - 2 P(u + v < -1/2) = 7/16 at 1/2;
    # 1/2 is the slope of the single average
    s = sur(C.make_abs1d(), anchor=0.0, lam=1.0)
    assert surrogate_gradient(s, 0.5)[0] == pytest.approx(0.4375 + 1.0, abs=1e-12)


def test_hessian_examples():
    s = sur(C.make_quad(2, np.eye(2)), lam=0.5)
    np.testing.assert_allclose(surrogate_hessian(s, [0.4, 0.1]), 2 * np.eye(2), atol=1e-9)
    s = sur(C.make_abs1d(), anchor=0.0, lam=1.0)
    assert surrogate_hessian(s, 0.0)[0, 0] == pytest.approx(3.0, abs=1e-2)
    H = surrogate_hessian(sur(C.make_linf(2), cfg=MC), [0.2, 0.1])
    np.testing.assert_array_equal(H, H.T)


FD_CASES = [
    (C.make_abs1d(), EstimatorConfig()),
    (C.make_l1(2), EstimatorConfig()),
    (C.make_huberized_l1(3), EstimatorConfig()),
    (C.make_maxlin(), EstimatorConfig("quadrature", quadrature_points_per_axis=2000)),
    (C.make_linf(2), EstimatorConfig("quadrature", quadrature_points_per_axis=400)),
]


@pytest.mark.parametrize("spec,cfg", FD_CASES, ids=lambda v: getattr(v, "name", getattr(v, "method", "")))
def test_derivatives_match_finite_differences(spec, cfg):
    # the lattice value rule is piecewise linear between nodes, so its
    # differences are only meaningful at steps of about one lattice cell
    rng = np.random.default_rng(0)
    r = 0.8
    s = sur(spec, r=r, anchor=np.zeros(spec.dim), lam=0.3, cfg=cfg)
    y = rng.uniform(-1, 1, spec.dim)
    h = 1e-5 if cfg.method != "quadrature" else 2 * r / cfg.quadrature_points_per_axis
    E = np.eye(spec.dim)
    g_fd = np.array([(surrogate_value(s, y + h * e) - surrogate_value(s, y - h * e)) / (2 * h) for e in E])
    g = surrogate_gradient(s, y)
    assert np.linalg.norm(g - g_fd) <= 1e-3 * max(np.linalg.norm(g), spec.lipschitz_const)
    h = 1e-3
    H_fd = np.array([(surrogate_gradient(s, y + h * e) - surrogate_gradient(s, y - h * e)) / (2 * h) for e in E])
    H = surrogate_hessian(s, y)
    assert np.linalg.norm(H - H_fd) <= 1e-3 * np.linalg.norm(H)


# -- sandwich ----------------------------------------------------------------------


def test_sandwich_quad_at_upper_boundary():
    dom = AveragingDomain("cube", 1.0, 2)
    spec0 = C.make_quad(2, np.eye(2))
    Ls = gradient_norm_bound_constant(dom, spec0.lipschitz_const)
    spec = C.make_quad(2, Ls * np.eye(2))
    c = check_hessian_sandwich(sur(spec, lam=Ls), [0.1, 0.2], Ls)
    assert c.lower_ok and c.upper_ok and c.floor_ok
    assert c.eig_min == pytest.approx(3 * Ls) and c.eig_max == pytest.approx(3 * Ls)


def test_sandwich_zero_objective():
    spec = C.make_affine([0.0, 0.0])
    c = check_hessian_sandwich(sur(spec, lam=0.25), [3.0, -1.0], 0.25)
    assert c.eig_min == c.eig_max == pytest.approx(0.5)
    assert c.lower_ok and c.upper_ok and c.floor_ok


def test_sandwich_upper_bound_fails_on_abs_kink():
    # Phi''(0) = 1/r = 2 L_s, so the top eigenvalue is 4 L_s, above the nominal 3 L_s
    spec, dom = C.make_abs1d(), AveragingDomain("cube", 1.0, 1)
    Ls = gradient_norm_bound_constant(dom, 1.0)
    c = check_hessian_sandwich(sur(spec, lam=Ls), 0.0, Ls)
    assert c.lower_ok and not c.upper_ok
    assert c.eig_max == pytest.approx(4 * Ls, rel=1e-3)
    assert check_hessian_sandwich(sur(spec, lam=Ls), 0.0, Ls, upper_bound=1.0).upper_ok


def test_sandwich_rejects_nonfinite():
    spec = C.make_quad(1, [[1.0]])
    s = sur(spec, lam=1.0)
    with np.errstate(invalid="ignore", over="ignore"), pytest.raises(EstimatorFailure):
        check_hessian_sandwich(s, 1e200, 1.0)


@settings(max_examples=25, deadline=None)
@given(y=st.lists(st.floats(-4, 4), min_size=2, max_size=2), r=st.floats(0.2, 2.0))
def test_spectral_floor(y, r):
    for spec in (C.make_l1(2), C.make_linf(2), C.make_huberized_l1(2), C.make_quad(2)):
        dom = AveragingDomain("cube", r, 2)
        Ls = gradient_norm_bound_constant(dom, spec.lipschitz_const)
        c = check_hessian_sandwich(sur(spec, r=r, anchor=y, lam=Ls), y, Ls)
        assert c.floor_ok and c.lower_ok


# -- linear algebra ------------------------------------------------------------------


def test_solve_spd():
    H = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    np.testing.assert_allclose(solve_spd(H, b), np.linalg.solve(H, b))


def test_solve_spd_jitter_rescues_semidefinite():
    H = np.diag([1.0, 0.0])
    x = solve_spd(H, np.array([1.0, 0.0]))
    assert x[0] == pytest.approx(1.0)


def test_solve_spd_indefinite():
    with pytest.raises(IndefiniteHessianError):
        solve_spd(np.diag([1.0, -1.0]), np.ones(2))


def test_newton_step_examples():
    s = sur(C.make_quad(3, np.eye(3)), lam=0.0, anchor=np.zeros(3))
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(newton_step(s, x), -x, atol=1e-12)
    np.testing.assert_allclose(newton_step(s, np.zeros(3)), 0.0, atol=1e-15)
    s = sur(C.make_quad(1, [[1.0]]), lam=0.5, anchor=1.0)
    assert newton_step(s, 1.0)[0] == pytest.approx(-0.5)


@settings(max_examples=30, deadline=None)
@given(x=st.lists(st.floats(-3, 3), min_size=2, max_size=2), lam=st.floats(0.1, 5.0))
def test_newton_step_norm_bound(x, lam):
    s = sur(C.make_huberized_l1(2), anchor=x, lam=lam)
    step = newton_step(s, x)
    g = surrogate_gradient(s, x)
    eig_min = np.linalg.eigvalsh(surrogate_hessian(s, x))[0]
    assert np.linalg.norm(step) <= np.linalg.norm(g) / eig_min * (1 + 1e-9) + 1e-15
