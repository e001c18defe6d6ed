import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stekopt import corpus as C
from stekopt.exceptions import CapabilityError, DegenerateDomainError, EstimatorFailure
from stekopt.smoothing import (
    AveragingDomain,
    EstimatorConfig,
    SmoothingEstimate,
    certified_hessian_bound,
    diameter,
    double_average_gradient,
    double_average_hessian,
    double_average_value,
    gradient_norm_bound_constant,
    hessian_lipschitz_constant,
    measure,
    resolve_method,
    single_average_gradient,
    single_average_value,
)

Q = EstimatorConfig("quadrature", quadrature_points_per_axis=64)
MC = EstimatorConfig("monte_carlo", 2048, 8192, seed=7)
ALL_FNS = (single_average_value, single_average_gradient, double_average_value,
           double_average_gradient, double_average_hessian)


def cube(r=1.0, n=1):
    return AveragingDomain("cube", r, n)


def ball(r=1.0, n=1):
    return AveragingDomain("ball", r, n)


# -- domain geometry -------------------------------------------------------------


def test_measure_examples():
    assert measure(cube(1.0, 1)) == 2.0
    assert measure(cube(0.5, 3)) == 1.0
    assert measure(ball(1.0, 2)) == pytest.approx(math.pi)


def test_ball_measure_known_dims():
    assert measure(ball(2.0, 3)) == pytest.approx(4 / 3 * math.pi * 8)
    assert measure(ball(1.0, 1)) == pytest.approx(2.0)


def test_diameter_examples():
    assert diameter(ball(1.0)) == 2.0
    assert diameter(cube(1.0, 4)) == 4.0
    assert diameter(ball(0.25)) == 0.5


def test_domain_validation():
    with pytest.raises(ValueError):
        AveragingDomain("cube", 0.0, 1)
    with pytest.raises(ValueError):
        AveragingDomain("simplex", 1.0, 1)
    with pytest.raises(ValueError):
        AveragingDomain("ball", 1.0, 0)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(1e-3, 1e3), n=st.integers(1, 10), shape=st.sampled_from(["ball", "cube"]))
def test_domain_invariants(r, n, shape):
    d = AveragingDomain(shape, r, n)
    assert measure(d) > 0
    assert diameter(d) == pytest.approx(2 * r * (math.sqrt(n) if shape == "cube" else 1.0))


# -- constants --------------------------------------------------------------------


def test_hessian_lipschitz_constant_examples():
    assert hessian_lipschitz_constant(ball(1.0, 2), 1.0) == 0.5
    assert hessian_lipschitz_constant(ball(1.0, 2), 2.0) == 1.0
    assert hessian_lipschitz_constant(ball(0.5, 2), 1.0) == 2.0


def test_gradient_norm_bound_examples():
    assert gradient_norm_bound_constant(ball(0.5), 1.0) == 1.0
    assert gradient_norm_bound_constant(ball(0.25), 1.0) == 2.0
    assert gradient_norm_bound_constant(cube(0.5, 4), 3.0) == 1.5


def test_certified_bound_is_attained_by_abs():
    dom = cube(0.7, 1)
    H = C.reference_smoothed(C.make_abs1d(), dom, 0.0, "hessian", "double")[0, 0]
    assert H == pytest.approx(certified_hessian_bound(dom, 1.0))
    # the ball formula reduces to 1 in one dimension and to 4/pi in two
    assert certified_hessian_bound(ball(1.0, 1), 1.0) == pytest.approx(1.0)
    assert certified_hessian_bound(ball(1.0, 2), 1.0) == pytest.approx(4 / math.pi)


def test_constants_reject_nonpositive_L():
    with pytest.raises(ValueError):
        hessian_lipschitz_constant(ball(), 0.0)


# -- estimator config ------------------------------------------------------------


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig("bogus")
    with pytest.raises(ValueError):
        EstimatorConfig(fd_step_factor=1.0)
    with pytest.raises(ValueError):
        EstimatorConfig(seed=-1)
    with pytest.raises(ValueError):
        EstimatorConfig(outer_samples=0)
    assert EstimatorConfig(outer_samples=3, inner_samples=5).scaled(4).inner_samples == 20


def test_resolve_method():
    assert resolve_method(C.make_abs1d(), cube(), EstimatorConfig()) == "closed_form"
    assert resolve_method(C.make_linf(2), cube(1, 2), EstimatorConfig()) == "quadrature"
    assert resolve_method(C.make_linf(6), cube(1, 6), EstimatorConfig()) == "monte_carlo"
    assert resolve_method(C.make_l1(2), ball(1, 2), EstimatorConfig()) == "quadrature"


# -- examples ----------------------------------------------------------------------


@pytest.mark.parametrize("cfg", [Q, MC], ids=["quad", "mc"])
@pytest.mark.parametrize("dom", [cube(0.7, 2), ball(0.7, 2)], ids=["cube", "ball"])
def test_constant_is_exact(cfg, dom):
    const = C.make_affine([0.0, 0.0], 3.25)
    for fn in (single_average_value, double_average_value):
        assert fn(const, dom, [0.4, -9.0], cfg).payload == 3.25
    np.testing.assert_array_equal(double_average_gradient(const, dom, [0.4, -9.0], cfg).payload, 0.0)


@pytest.mark.parametrize("dom", [cube(0.5, 3), ball(0.5, 3), ball(1.3, 2)], ids=str)
def test_affine_reproduction(dom):
    a = np.arange(1.0, dom.dim + 1) * [1, -1, 0.5][: dom.dim]
    aff = C.make_affine(a, -0.7)
    x = np.linspace(-1, 2, dom.dim)
    exact = float(a @ x - 0.7)
    for fn in (single_average_value, double_average_value):
        assert fn(aff, dom, x, Q).payload == pytest.approx(exact, abs=1e-10)
        e = fn(aff, dom, x, MC)
        assert abs(e.payload - exact) <= 3 * e.stderr_estimate + 1e-12
    for fn in (single_average_gradient, double_average_gradient):
        np.testing.assert_allclose(fn(aff, dom, x, Q).payload, a, atol=1e-10)


@pytest.mark.parametrize("cfg", [Q, MC], ids=["quad", "mc"])
def test_abs1d_examples(cfg):
    spec, dom = C.make_abs1d(), cube()
    for fn, x, want in ((single_average_value, 0.0, 0.5), (double_average_value, 0.0, 2 / 3),
                        (single_average_gradient, 0.0, 0.0), (double_average_gradient, 0.0, 0.0),
                        (single_average_gradient, 0.5, 0.5)):
        e = fn(spec, dom, x, cfg)
        tol = 3 * e.stderr_estimate + 1e-12 if cfg is MC else 1e-3  # kink error ~ 1/P**2
        assert np.all(np.abs(np.asarray(e.payload) - want) <= tol), (fn.__name__, x)


def test_double_gradient_matches_fd_of_value_at_quarter():
    spec, dom = C.make_abs1d(), cube()
    cfg = EstimatorConfig("quadrature", quadrature_points_per_axis=2000)
    h = 1e-4
    fd = (double_average_value(spec, dom, 0.25 + h, cfg).payload
          - double_average_value(spec, dom, 0.25 - h, cfg).payload) / (2 * h)
    g = double_average_gradient(spec, dom, 0.25, cfg).payload[0]
    assert g == pytest.approx(fd, rel=1e-3)
    assert g == pytest.approx(0.234375, abs=1e-12)


def test_hessian_examples():
    spec, dom = C.make_abs1d(), cube()
    assert double_average_hessian(spec, dom, 0.0, Q).payload[0, 0] == pytest.approx(1.0, abs=1e-3)
    quad = C.make_quad(3)
    A = np.diag([1.0, 2.0, 3.0])
    for cfg in (Q, EstimatorConfig("quadrature", quadrature_points_per_axis=16, hessian_rule="fd"), MC):
        H = double_average_hessian(quad, cube(0.5, 3), [0.3, -0.1, 2.0], cfg).payload
        np.testing.assert_allclose(H, A, atol=1e-4 * np.linalg.norm(A))


def test_fd_hessian_bias_at_kink_is_documented():
    # central differences of the gradient with step 0.1 r flatten the kink
    cfg = EstimatorConfig("quadrature", quadrature_points_per_axis=2000, hessian_rule="fd")
    H = double_average_hessian(C.make_abs1d(), cube(), 0.0, cfg).payload[0, 0]
    assert H == pytest.approx(0.975, abs=1e-3)


def test_quad_gradient_is_Ax_all_methods():
    spec = C.make_quad(2)
    x = np.array([0.7, -1.1])
    for dom in (cube(0.4, 2), ball(0.4, 2)):
        for cfg in (Q, MC):
            for fn in (single_average_gradient, double_average_gradient):
                e = fn(spec, dom, x, cfg)
                err = np.abs(e.payload - np.array([0.7, -2.2]))
                assert np.all(err <= 3 * e.stderr + 1e-9)


def test_mc_hessian_rules_agree():
    spec, dom = C.make_l1(2), cube(1.0, 2)
    x = [0.3, -0.6]
    ref = C.reference_smoothed(spec, dom, x, "hessian", "double")
    for rule in ("flux", "fd"):
        e = double_average_hessian(spec, dom, x, EstimatorConfig("monte_carlo", 2**13, 2**13, hessian_rule=rule))
        if rule == "flux":
            assert np.all(np.abs(e.payload - ref) <= 4 * e.stderr + 1e-12)
        else:
            assert np.abs(e.payload - ref).max() < 0.1


def test_ball_mc_hessian_flux():
    spec = C.make_quad(2)
    e = double_average_hessian(spec, ball(0.5, 2), [0.1, 0.2], MC)
    assert np.all(np.abs(e.payload - np.diag([1.0, 2.0])) <= 4 * e.stderr + 1e-9)


def test_ball_in_one_dimension_equals_interval():
    spec = C.make_abs1d()
    for fn in ALL_FNS:
        a = fn(spec, ball(0.8), 0.3, Q).payload
        b = fn(spec, cube(0.8), 0.3, Q).payload
        np.testing.assert_allclose(a, b, atol=1e-12)


# -- errors ------------------------------------------------------------------------


def test_quadrature_capability_limit():
    with pytest.raises(CapabilityError):
        single_average_value(C.make_l1(5), cube(1, 5), np.zeros(5), Q)


def test_degenerate_radius_for_hessian():
    with pytest.raises(DegenerateDomainError):
        double_average_hessian(C.make_abs1d(), cube(1e-9), 0.0, Q)


def test_domain_dim_mismatch():
    with pytest.raises(CapabilityError):
        single_average_value(C.make_l1(2), cube(1, 3), [0, 0], Q)


def test_estimate_symmetrizes_and_rejects_nonfinite():
    e = SmoothingEstimate("hessian", [[1.0, 2.0], [0.0, 1.0]], 0)
    np.testing.assert_array_equal(e.payload, e.payload.T)
    with pytest.raises(EstimatorFailure):
        SmoothingEstimate("value", np.nan, 0)


# -- properties --------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(x1=st.floats(-5, 5), x2=st.floats(-5, 5), r=st.floats(0.05, 2.0))
def test_lipschitz_preservation_1d(x1, x2, r):
    dom = cube(r)
    for spec in (C.make_abs1d(), C.make_maxlin()):
        for fn in (single_average_value, double_average_value):
            a, b = fn(spec, dom, x1, Q).payload, fn(spec, dom, x2, Q).payload
            assert abs(a - b) <= spec.lipschitz_const * abs(x1 - x2) + 1e-12


@settings(max_examples=20, deadline=None)
@given(x=st.lists(st.floats(-3, 3), min_size=2, max_size=2), r=st.floats(0.1, 2.0))
def test_convexity_preservation_2d(x, r):
    for spec in (C.make_l1(2), C.make_linf(2), C.make_huberized_l1(2), C.make_maxlin(2)):
        dom = cube(r, 2)
        Ls = gradient_norm_bound_constant(dom, spec.lipschitz_const)
        H = double_average_hessian(spec, dom, x, EstimatorConfig("quadrature", quadrature_points_per_axis=24)).payload
        # the lattice rule is only O(1/P**2) accurate across an oblique kink
        assert np.linalg.eigvalsh(H)[0] >= -1e-3 * Ls


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), x=st.floats(-2, 2))
def test_mc_determinism(seed, x):
    cfg = EstimatorConfig("monte_carlo", 512, 2048, seed=seed)
    spec, dom = C.make_abs1d(), ball(0.6)
    for fn in ALL_FNS:
        a, b = fn(spec, dom, x, cfg), fn(spec, dom, x, cfg)
        np.testing.assert_array_equal(a.payload, b.payload)
        np.testing.assert_array_equal(a.stderr, b.stderr)


def test_mc_common_random_numbers_across_points():
    # same samples at every query point: the difference of two affine-shifted
    # queries of a linear function carries no noise at all
    aff = C.make_affine([2.0, -1.0])
    e1 = double_average_value(aff, ball(1.0, 2), [0.0, 0.0], MC).payload
    e2 = double_average_value(aff, ball(1.0, 2), [0.5, 0.0], MC).payload
    assert e2 - e1 == pytest.approx(1.0, abs=1e-12)


def test_mc_seed_changes_samples():
    spec, dom = C.make_abs1d(), cube()
    a = single_average_value(spec, dom, 0.1, EstimatorConfig("monte_carlo", 64, 256, seed=1)).payload
    b = single_average_value(spec, dom, 0.1, EstimatorConfig("monte_carlo", 64, 256, seed=2)).payload
    assert a != b


def test_mc_stderr_shrinks_with_budget():
    spec, dom = C.make_abs1d(), cube()
    small = single_average_value(spec, dom, 0.2, EstimatorConfig("monte_carlo", 64, 1024)).stderr_estimate
    big = single_average_value(spec, dom, 0.2, EstimatorConfig("monte_carlo", 64, 16384)).stderr_estimate
    assert big == pytest.approx(small / 4, rel=0.15)


def test_samples_used_reported():
    spec, dom = C.make_abs1d(), cube()
    assert single_average_value(spec, dom, 0.0, EstimatorConfig("monte_carlo", 10, 100)).samples_used == 101
    assert single_average_value(spec, dom, 0.0, EstimatorConfig("closed_form")).samples_used == 0
