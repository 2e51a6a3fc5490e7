import math

import numpy as np
import pytest
from scipy.special import erfcx

from vord.caputo_oracle import mittag_leffler
from vord.contour import (ContourSpec, QuadratureError, build_contour, default_theta,
                          evaluate_components, evaluate_solution, ray_truncation)
from vord.contour import _variable_order_pieces
from vord.grid import Domain, GridFunction, l2_norm
from vord.order_field import build_order_field

from conftest import gaussian, piecewise


def test_default_theta():
    assert default_theta(0.5) == pytest.approx(2 * math.pi / 3)
    assert default_theta(0.9) == pytest.approx(math.pi / 1.8)
    assert default_theta(0.999999) > math.pi / 2
    with pytest.raises(ValueError):
        default_theta(1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        ContourSpec(theta=math.pi / 2)
    with pytest.raises(ValueError):
        ContourSpec(theta=2.0, quad_tol=1.0)
    with pytest.raises(ValueError):
        build_contour(0.0, ContourSpec(theta=2.0))


def test_truncation_radius():
    theta = 2 * math.pi / 3
    assert ray_truncation(1.0, theta, 1e-16) == pytest.approx(73.68, abs=0.01)
    r = ray_truncation(3.0, theta, 1e-12)
    assert math.exp(3.0 * r * math.cos(theta)) == pytest.approx(1e-12, rel=1e-9)


@pytest.mark.parametrize("t", [0.01, 1.0, 50.0])
def test_node_geometry(t):
    spec = ContourSpec(theta=2 * math.pi / 3)
    nodes = build_contour(t, spec)
    arc = [nd for nd in nodes if nd.piece == "zero"]
    assert len(arc) == spec.n_arc
    assert all(nd.p.r == pytest.approx(1 / t, rel=1e-15) for nd in arc)
    for nd in nodes:
        if nd.piece == "plus":
            assert nd.p.beta == spec.theta
        elif nd.piece == "minus":
            assert nd.p.beta == -spec.theta
    plus = [nd for nd in nodes if nd.piece == "plus"]
    minus = [nd for nd in nodes if nd.piece == "minus"]
    # lower ray is the mirror image of the upper ray, traversed the other way
    for a, b in zip(plus, minus[::-1]):
        assert a.p.r == b.p.r
        assert b.weight == pytest.approx(np.conj(a.weight), rel=1e-14)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0, 100.0])
def test_heaviside_oracle(t):
    # (1 / 2 pi i) int e^{tp} / p dp = 1 for t > 0
    nodes = build_contour(t, ContourSpec(theta=2 * math.pi / 3))
    total = sum(nd.weight * np.exp(t * nd.p.value) / nd.p.value for nd in nodes)
    assert abs(total - 1.0) <= 1e-8


@pytest.mark.parametrize("t", [0.5, 3.0])
def test_scalar_mittag_leffler(t):
    # constant order, lambda = 2: (1 / 2 pi i) int e^{tp} p^{a-1} / (lam + p^a) dp = E_a(-lam t^a)
    a, lam = 0.6, 2.0
    nodes = build_contour(t, ContourSpec(theta=default_theta(a)))
    total = 0.0
    for nd in nodes:
        pa = nd.p.r ** a * np.exp(1j * a * nd.p.beta)
        total += nd.weight * np.exp(t * nd.p.value) * pa / nd.p.value / (lam + pa)
    assert abs(total - mittag_leffler(a, -lam * t ** a)) <= 1e-10


def test_constant_order_mode():
    dom = Domain(2, 2 * math.pi, 16)
    x, _ = dom.coords()
    u0 = GridFunction(np.exp(1j * x), dom)
    fld = build_order_field(dom, 0.5, 0.5, 0.5)
    for t in (0.1, 5.0):
        u, rep = evaluate_solution(dom, fld, u0, t, ContourSpec(theta=default_theta(0.5)))
        exact = erfcx(math.sqrt(t))  # E_{1/2}(-z) = erfcx(z)
        assert np.linalg.norm(u.values - exact * u0.values) <= 1e-9 * np.linalg.norm(u0.values)
        assert rep.converged


def test_zero_data(dom16):
    fld = piecewise(dom16)
    u, rep = evaluate_solution(dom16, fld, GridFunction(np.zeros(dom16.shape), dom16), 1.0,
                               ContourSpec(theta=2 * math.pi / 3))
    assert not np.any(u.values) and rep.n_nodes == 0


@pytest.fixture(scope="module")
def vo_setup():
    dom = Domain(2, 8.0, 16)
    return dom, piecewise(dom), gaussian(dom)


def test_components_sum_and_symmetry(vo_setup):
    dom, fld, u0 = vo_setup
    spec = ContourSpec(theta=2 * math.pi / 3)
    um, uz, up, rep = evaluate_components(dom, fld, u0, 1.0, spec)
    u, _ = evaluate_solution(dom, fld, u0, 1.0, spec)
    total = um.values + uz.values + up.values
    assert np.linalg.norm(total - u.values) <= 1e-10 * np.linalg.norm(u.values)
    assert np.abs(um.values - np.conj(up.values)).max() <= 1e-10 * np.abs(up.values).max()
    # real data gives a real solution
    assert rep.imag_ratio <= 1e-8
    assert np.abs(u.values.imag).max() <= 1e-8 * l2_norm(u)


def test_contour_independence(vo_setup):
    dom, fld, u0 = vo_setup
    base, _ = evaluate_solution(dom, fld, u0, 1.0, ContourSpec(theta=2 * math.pi / 3))
    ref = np.linalg.norm(base.values)
    for spec in (ContourSpec(theta=2 * math.pi / 3, epsilon_scale=2.0),
                 ContourSpec(theta=0.9 * 2 * math.pi / 3)):
        other, _ = evaluate_solution(dom, fld, u0, 1.0, spec)
        assert np.linalg.norm(other.values - base.values) <= 1e-7 * ref


def test_initial_condition_recovery(vo_setup):
    dom, fld, u0 = vo_setup
    u, _ = evaluate_solution(dom, fld, u0, 1e-3, ContourSpec(theta=2 * math.pi / 3))
    assert l2_norm(GridFunction(u.values - u0.values, dom)) <= 0.05 * l2_norm(u0)


def test_worker_count_does_not_change_bits(vo_setup):
    dom, fld, u0 = vo_setup
    spec = ContourSpec(theta=2 * math.pi / 3)
    a, _ = evaluate_solution(dom, fld, u0, 2.0, spec, workers=1)
    b, _ = evaluate_solution(dom, fld, u0, 2.0, spec, workers=4)
    assert np.array_equal(a.values, b.values)


def test_ray_contribution_decays_like_inverse_t(vo_setup):
    # rays of a contour with arc radius 1 carry exactly the r in [1, inf)
    # part; the arc itself is dropped (it would need e^t cancellation)
    dom, fld, u0 = vo_setup
    times = [4.0, 16.0, 64.0]
    vals = []
    for t in times:
        prev = None
        for n_ray in (64, 128):
            nodes = [nd for nd in build_contour(t, ContourSpec(theta=2 * math.pi / 3, epsilon=1.0, n_ray=n_ray))
                     if nd.piece != "zero"]
            acc, _ = _variable_order_pieces(dom, fld, u0.values, t, nodes, 1e-12, 1)
            cur = l2_norm(GridFunction(acc["minus"], dom)) + l2_norm(GridFunction(acc["plus"], dom))
            if prev is not None:
                assert abs(cur - prev) <= 1e-8 * cur
            prev = cur
        vals.append(cur * t)
    # ||u^-|| + ||u^+|| <= C / t with C from the first sample
    assert max(vals[1:]) <= 1.1 * vals[0]


def test_refinement_cap_raises(vo_setup):
    dom, fld, u0 = vo_setup
    spec = ContourSpec(theta=2 * math.pi / 3, n_arc=2, n_ray=8, max_doublings=1, refine_tol=1e-14)
    with pytest.raises(QuadratureError):
        evaluate_solution(dom, fld, u0, 1.0, spec)
