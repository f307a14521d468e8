import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowlab import DomainError, LookupFailure, SaturationError, catalog, catalog_names, eval_f, get_entry
from blowlab.nonlinearity import (monotone_threshold, slow_variation_index, sobolev_exponent,
                                  verify_regular_variation)

import frozen

ENTRIES = catalog_names()


def test_pure_power_value():
    assert eval_f(get_entry("pure_power", p=3.0), 2.0) == 8.0


def test_f_vanishes_at_zero():
    assert eval_f(get_entry("log", p=3.0), 0.0) == 0.0


def test_log_value_against_oracle():
    assert eval_f(get_entry("log", p=3.0), 10.0) == pytest.approx(frozen.F_LOG_10, rel=1e-14)


def test_negative_argument_rejected():
    with pytest.raises(DomainError):
        eval_f(get_entry("log"), -1.0)


def test_saturation_guard():
    nl = get_entry("pure_power", p=3.0)
    with pytest.raises(SaturationError) as exc:
        eval_f(nl, 1e120)
    assert exc.value.guard == 1e300
    # log space above 1e15 still returns finite values
    assert eval_f(nl, 1e50) == pytest.approx(1e150, rel=1e-13)


def test_index_closed_forms():
    assert slow_variation_index(get_entry("pure_power"), 123.0) == 0.0
    assert slow_variation_index(get_entry("log", a=1.0, K=math.e), 10.0) == pytest.approx(
        frozen.SIGMA_LOG_10, rel=1e-13)
    osc = get_entry("osc_sin", a=0.5, nu=0.3)
    val = slow_variation_index(osc, math.exp(10))
    assert val == pytest.approx(frozen.SIGMA_OSC_E10, rel=1e-10)
    bound = 0.5 * 0.3 * math.log(2 + math.exp(10)) ** (0.3 - 1) / (1 - 0.5)
    assert abs(val) <= bound


def test_index_below_range():
    with pytest.raises(DomainError):
        slow_variation_index(get_entry("log"), 0.5)


@pytest.mark.parametrize("name", ENTRIES)
def test_closed_form_derivative_matches_differences(name):
    nl = get_entry(name)
    u = np.geomspace(max(nl.u_min_regular, 1.0) * 1.5, 1e12, 20)
    h = 1e-5 * u
    fd = (nl.L(u + h) - nl.L(u - h)) / (2 * h)
    assert np.max(np.abs(nl.dL(u) - fd) / np.abs(nl.L(u))) <= 1e-6


@pytest.mark.parametrize("name", ENTRIES)
def test_positive_on_regular_range(name):
    nl = get_entry(name)
    u = np.geomspace(max(nl.u_min_regular, 1e-3), 1e14, 200)
    assert np.all(nl.L(u) > 0) and np.all(nl.f(u) > 0)


@pytest.mark.parametrize("name", ENTRIES)
def test_blend_near_zero_is_continuous(name):
    nl = get_entry(name)
    u = np.linspace(0, 3 * max(nl.u_min_regular, 1.0), 2001)
    f = nl.f(u)
    assert f[0] == 0.0 and np.all(np.isfinite(f)) and np.all(f >= 0)
    assert np.max(np.abs(np.diff(nl.L(u)))) < 0.05 * np.max(nl.L(u))


@pytest.mark.parametrize("name", ENTRIES)
def test_f_equals_u_p_times_L(name):
    nl = get_entry(name)
    for u in (nl.u_min_regular + 1.0, 37.5, 1e6, 1e14):
        assert eval_f(nl, u) == pytest.approx(u**nl.p * float(nl.L(np.array([u]))[0]), rel=1e-14)


@pytest.mark.parametrize("name", ENTRIES)
def test_catalog_regular_variation(name):
    nl = get_entry(name)
    rep = verify_regular_variation(nl, 1e2, 1e12, burn_in=1e5)
    assert rep.passes and math.isfinite(rep.sup_weighted)


def test_regular_variation_examples():
    rep = verify_regular_variation(get_entry("pure_power", alpha=1.0), 1e2, 1e12)
    assert rep.passes and rep.sup_weighted == 0.0
    rep = verify_regular_variation(get_entry("log"), 1e2, 1e12)
    assert rep.passes and 0.9 < rep.sup_weighted < 1.3
    # exp(|log s|^0.7) decays like |log s|^-0.3: alpha = 1/2 is too optimistic
    rep = verify_regular_variation(get_entry("exp_power", nu=0.7, alpha=0.5), 1e2, 1e300)
    assert not rep.passes


def test_regular_variation_preconditions():
    with pytest.raises(DomainError):
        verify_regular_variation(get_entry("log"), 1e2, 1e12, n_samples=8)
    with pytest.raises(DomainError):
        verify_regular_variation(get_entry("log"), 1e12, 1e2)


@pytest.mark.parametrize("name", ENTRIES)
def test_monotone_combinations(name):
    nl = get_entry(name)
    s0 = monotone_threshold(nl)
    s = np.geomspace(s0, 1e200, 4000)
    lf = nl.log_f(s)
    q, m = (1 + nl.p) / 2, nl.p + 1
    assert np.all(np.diff(lf - q * np.log(s)) >= -1e-12)
    assert np.all(np.diff(lf - m * np.log(s)) <= 1e-12)


def test_catalog_contents():
    names = {nl.name for nl in catalog()}
    assert {"pure_power", "log", "iterated_log", "exp_power", "osc_log_power", "osc_sin"} <= names
    assert get_entry("pure_power").alpha == math.inf
    lg = get_entry("log", a=2.0, K=2.0)
    u = np.array([5.0, 50.0])
    assert np.allclose(lg.L(u), np.log(2 + u) ** 2, rtol=1e-14)
    osc = get_entry("osc_sin", a=0.5, nu=0.3)
    assert np.allclose(osc.L(u), 1 + 0.5 * np.sin(np.log(2 + u) ** 0.3), rtol=1e-14)
    assert all(nl.alpha > 0.5 for nl in catalog())


def test_unknown_entry():
    with pytest.raises(LookupFailure):
        get_entry("nonsense")
    with pytest.raises(DomainError):
        get_entry("log", nu=0.2)


def test_exponent_preconditions():
    with pytest.raises(DomainError):
        get_entry("pure_power", p=1.0)
    assert sobolev_exponent(1) == math.inf and sobolev_exponent(3) == 5.0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ENTRIES), st.floats(3.0, 30.0))
def test_log_space_agrees_with_direct(name, lu):
    nl = get_entry(name)
    u = math.exp(lu)
    direct = u**nl.p * float(nl.L(np.array([u]))[0])
    assert float(nl.log_f(np.array([u]))[0]) == pytest.approx(math.log(direct), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ENTRIES), st.floats(1.0, 1e3), st.floats(1.0, 1e6))
def test_f_increasing_beyond_threshold(name, lam, step):
    nl = get_entry(name)
    s0 = max(monotone_threshold(nl), 1.0)
    u = s0 * lam
    assert eval_f(nl, u * (1 + step * 1e-6)) > eval_f(nl, u)
