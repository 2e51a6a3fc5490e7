import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vord.asymptotics import (DecayReport, envelope_check, fit_slope, long_time_exponent, sample_decay,
                              short_time_exponent, write_decay_csv)
from vord.contour import ContourSpec
from vord.grid import Ball, Domain, GridFunction
from vord.order_field import Bump, OrderFieldError, build_order_field


@pytest.fixture
def dom():
    return Domain(2, 8.0, 16)


def test_exponents(dom):
    const = build_order_field(dom, 0.5, 0.5, 0.5)
    assert long_time_exponent(const) == pytest.approx(0.125)
    vo = build_order_field(dom, 0.5, 0.5, 0.7, Ball((0.0, 0.0), 1.6), 0.7)
    assert long_time_exponent(vo) == pytest.approx(0.125)
    assert long_time_exponent(build_order_field(dom, 0.5, 0.5, 0.5, s=100)) == pytest.approx(0.01)
    assert short_time_exponent(const) == 0.0
    assert short_time_exponent(vo) == pytest.approx(-0.2)
    with pytest.raises(OrderFieldError):
        long_time_exponent(build_order_field(dom, 0.8, 0.5, 0.8))


def test_short_exponent_of_bump():
    dom = Domain(2, 8.0, 32)
    fld = build_order_field(dom, 0.5, 0.5, 0.7, Ball((0.0, 0.0), 2.0), Bump(0.5, 0.2))
    assert short_time_exponent(fld) == pytest.approx(0.5 - fld.values.max())
    assert -0.2 < short_time_exponent(fld) < 0


@settings(max_examples=60, deadline=None)
@given(a_star=st.floats(0.05, 0.95), gap=st.floats(0, 0.04), top=st.floats(0, 0.04))
def test_exponent_ranges(a_star, gap, top):
    dom = Domain(2, 8.0, 8)
    fld = build_order_field(dom, a_star, a_star - gap * a_star, min(0.99, a_star + top), s=8.0)
    ok = fld.alpha_m > fld.alpha_star * 0.75
    if ok:
        assert long_time_exponent(fld) > 0
    assert -1 < short_time_exponent(fld) <= 0


def synthetic(slope, exponent, regime, times=None):
    times = np.geomspace(2, 1024, 10) if times is None else times
    norms = 3.0 * times ** slope
    rep = DecayReport(times, norms, fit_slope(times, norms, regime == "long_time"), exponent, 0.0, regime)
    rep.envelope_constant = float(rep.envelope_values().max())
    return rep


def test_exact_power_law_passes():
    res = envelope_check(synthetic(-0.125, 0.125, "long_time"))
    assert res.passed and abs(res.margin) < 1e-12


def test_faster_decay_passes():
    res = envelope_check(synthetic(-0.6, 0.125, "long_time"))
    assert res.passed and res.margin < 0


def test_shallower_decay_fails():
    assert not envelope_check(synthetic(-0.025, 0.125, "long_time")).passed


def test_short_time_semantics():
    t = np.geomspace(1e-2, 1, 10)
    # bounded data never fails a blow-up bound
    assert envelope_check(synthetic(0.0, -0.2, "short_time", t)).passed
    assert envelope_check(synthetic(-0.2, -0.2, "short_time", t)).passed
    # blow-up faster than t^-0.2 fails
    assert not envelope_check(synthetic(-0.35, -0.2, "short_time", t)).passed


@settings(max_examples=60, deadline=None)
@given(extra=st.floats(0.0, 2.0), exponent=st.floats(0.01, 0.5))
def test_one_sided(extra, exponent):
    assert envelope_check(synthetic(-exponent - extra, exponent, "long_time")).passed
    t = np.geomspace(1e-3, 1, 12)
    assert envelope_check(synthetic(-exponent + extra, -exponent, "short_time", t)).passed


def test_report_validation():
    with pytest.raises(ValueError):
        DecayReport([2.0, 1.0], [1.0, 1.0], 0.0, 0.1, 1.0, "long_time")
    with pytest.raises(ValueError):
        DecayReport([1.0], [-1.0], 0.0, 0.1, 1.0, "long_time")
    with pytest.raises(ValueError):
        DecayReport([], [], 0.0, 0.1, 1.0, "long_time")


def test_zero_data_is_trivial(dom, tmp_path):
    fld = build_order_field(dom, 0.5, 0.5, 0.5)
    rep = sample_decay(dom, fld, GridFunction(np.zeros(dom.shape), dom), [2.0, 4.0],
                       ContourSpec(theta=2 * math.pi / 3))
    assert rep.trivial and np.all(rep.norms == 0)
    assert envelope_check(rep).passed
    write_decay_csv(rep, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "t,norm,envelope_value"


def test_regime_checks(dom):
    fld = build_order_field(dom, 0.5, 0.5, 0.5)
    u0 = GridFunction(np.ones(dom.shape), dom)
    spec = ContourSpec(theta=2 * math.pi / 3)
    with pytest.raises(ValueError):
        sample_decay(dom, fld, u0, [0.5, 2.0], spec)
    with pytest.raises(ValueError):
        sample_decay(dom, fld, u0, [0.5], spec, regime="long_time")
    with pytest.raises(ValueError):
        sample_decay(dom, fld, u0, [], spec)


def test_constant_order_mode_tail():
    # E_a(-lam t^a) ~ t^-a / (lam Gamma(1-a)): slope tends to -a
    dom = Domain(1, math.pi, 8)
    x = dom.axis()
    fld = build_order_field(dom, 0.5, 0.5, 0.5)
    u0 = GridFunction(np.exp(1j * x), dom)
    times = np.geomspace(2, 1024, 10)
    rep = sample_decay(dom, fld, u0, times, ContourSpec(theta=2 * math.pi / 3))
    assert rep.fitted_slope == pytest.approx(-0.5, abs=0.02)
    res = envelope_check(rep)
    assert res.passed
    env = rep.envelope_values()
    assert np.all(np.diff(env) < 0)
