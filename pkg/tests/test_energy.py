import math
from dataclasses import replace

import numpy as np
import pytest

from blowlab import ContractError, DomainError, EstimationError
from blowlab.energy import (boundary_term, build_series, energy_E, energy_G, estimate_C1, eta, gaussian_tail,
                            l2_bound_check, l2_constants_bounded, limit_classify, monotonicity_report,
                            series_csv, sphere_area)
from blowlab.similarity import RescaledFrame

import frozen
import oracles
from runs import bump_run, ode_run


def _frame(w, wy=None, s=10.0, n=1, Y=8.0, H=None, ws=None, p=3.0):
    radial = n > 1
    y = np.linspace(0 if radial else -Y, Y, w.size)
    if wy is None:
        wy = np.zeros_like(w)
    return RescaledFrame(a=0.0, s=s, y=y, w=w, w_y=wy, rho=np.exp(-y**2 / 4), h=1 / (p - 1), p=p, n=n,
                         radial=radial, y_limit=Y, H=H, w_s=ws)


def _gauss_frame(nodes):
    y = np.linspace(-8, 8, nodes)
    w = np.exp(-y**2)
    return _frame(w, -2 * y * w)


# ---------------------------------------------------------------------------
# E, G and eta


def test_energy_of_zero_and_one():
    assert energy_E(_frame(np.zeros(257)), 0.5, 3.0) == 0.0
    E1 = energy_E(_frame(np.ones(257)), 0.5, 3.0)
    assert E1 == pytest.approx(math.sqrt(4 * math.pi) / 8, rel=1e-6)
    assert eta(1, 3.0) == pytest.approx(0.44311, abs=5e-6)


def test_gaussian_energy_against_oracle():
    assert energy_E(_gauss_frame(257), 0.5, 3.0) == pytest.approx(frozen.ENERGY_GAUSS, rel=1e-6)
    # ten times the resolution agrees as well
    fine = energy_E(_gauss_frame(2561), 0.5, 3.0)
    assert energy_E(_gauss_frame(257), 0.5, 3.0) == pytest.approx(fine, rel=1e-6)


def test_gaussian_oracle_routes_agree():
    assert oracles.energy_gauss_closed() == pytest.approx(frozen.ENERGY_GAUSS, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("p", [2.0, 3.0])
def test_eta_consistency(n, p):
    beta = 1 / (p - 1)
    E = energy_E(_frame(np.ones(257), n=n), beta, p)
    truncated = eta(n, p) * (1 - gaussian_tail(8.0, n) / (4 * math.pi) ** (n / 2))
    assert E == pytest.approx(truncated, rel=1e-8)
    assert abs(E - eta(n, p)) / eta(n, p) <= 1e-5
    assert eta(n, p) == (4 * math.pi) ** (n / 2) / (2 * (p + 1))


def test_sphere_area_and_tail():
    assert sphere_area(1) == pytest.approx(2.0, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert gaussian_tail(8.0, 1) == pytest.approx(math.sqrt(4 * math.pi) - frozen.GAUSS_MASS_8, abs=1e-15)


def test_energy_requires_derivatives():
    f = replace(_frame(np.ones(65)), w_y=None)
    with pytest.raises(ContractError):
        energy_E(f, 0.5, 3.0)


def test_energy_G_arithmetic():
    assert energy_G(0.0, 3.0, 0.0, 0.5) == 0.0
    assert energy_G(0.4, 4.0, 1.0, 0.5) == pytest.approx(0.9, rel=1e-15)
    assert energy_G(eta(1, 3.0), 1e12, 1e-6, 0.5) == pytest.approx(0.44311, abs=5e-6)
    with pytest.raises(DomainError):
        energy_G(0.0, 0.0, 1.0, 0.5)


# ---------------------------------------------------------------------------
# C1


def test_C1_synthetic_closed_form():
    # H = 1/s, w = 1, alpha = 1: gamma = 1/2 and both budgets peak at s = 4
    frames = [_frame(np.ones(257), s=s, H=np.full(257, 1 / s)) for s in (4.0, 5.0, 6.0, 7.0, 8.0)]
    C1 = estimate_C1(frames, 1.0, 0.5, 2.0, alpha=1.0)
    m = frozen.GAUSS_MASS_8
    first = 0.5 * (1 / 16) * m * 4**1.5 / 0.5
    second = 2 * (1 / 4) * m * 4**0.5
    assert C1 == pytest.approx(1.1 * max(first, second), rel=1e-9)
    assert C1 == pytest.approx(1.1 * m, rel=1e-9)


def test_C1_preconditions():
    frames = [_frame(np.ones(65), s=s, H=np.zeros(65)) for s in range(4, 9)]
    with pytest.raises(EstimationError):
        estimate_C1(frames[:4], 1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        estimate_C1(frames, 0.0, 0.5, 1.0)
    with pytest.raises(ContractError):
        estimate_C1([replace(f, H=None) for f in frames], 1.0, 0.5, 1.0)


def test_C1_pure_power_is_boundary_only():
    an = bump_run().analysis
    frames, _ = an.frames(0.0)
    small = estimate_C1(frames, an.M_run(), 0.5, 0.5, alpha=1.0)
    large = estimate_C1(frames, an.M_run(), 0.5, 2.0, alpha=1.0)
    assert large <= small and large <= 1e-10
    expect = max(boundary_term(f, 0.5) * f.s**1.5 / 0.5 for f in frames) * 1.1
    assert small == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_C1_log_stable_under_halving():
    an = bump_run("log").analysis
    frames, _ = an.frames(0.0)
    nl = an.profile.nl
    gam = min(nl.alpha, 1.0) - 0.5
    delta = an.traj.grid.distance_to_boundary(0.0) / 2
    full = estimate_C1(frames, an.M_run(), gam, delta, nl.alpha)
    half = estimate_C1(frames[::2], an.M_run(), gam, delta, nl.alpha)
    assert math.isfinite(full) and full > 0
    assert abs(half - full) <= 0.2 * full


# ---------------------------------------------------------------------------
# monotonicity


def _stationary_series(C1=1.0):
    s = np.linspace(4.0, 8.0, 9)
    frames = [_frame(np.ones(257), s=x) for x in s]
    mids = [_frame(np.ones(257), s=(a + b) / 2, ws=np.zeros(257)) for a, b in zip(s[:-1], s[1:])]
    return build_series(frames, mids, C1, 0.5, 1, 3.0)


def test_stationary_frames_pass():
    ser = _stationary_series()
    rep = monotonicity_report(ser)
    assert rep.passes and np.all(rep.increments < 0) and np.all(ser.dissipation == 0)


def test_bump_series_has_no_violations():
    ser = bump_run().analysis.series(0.0)
    sel = ser.s_values >= 6.0
    assert sel.sum() >= 3
    rep = monotonicity_report(ser)
    assert rep.violations == [] and ser.G_values.min() >= -1e-3


def test_fault_injection_flags_one_violation():
    ser = bump_run().analysis.series(0.0)
    k = ser.s_values.size // 2
    G = ser.G_values.copy()
    G[k] += 10 * ser.tolerance[k - 1]
    rep = monotonicity_report(replace(ser, G_values=G))
    assert rep.violations == [k - 1]


def test_series_preconditions():
    s = [4.0, 5.0, 6.0]
    frames = [_frame(np.ones(65), s=x) for x in s]
    mids = [_frame(np.ones(65), s=x + 0.5, ws=np.zeros(65)) for x in s[:-1]]
    with pytest.raises(ContractError):
        build_series(frames, mids[:1], 1.0, 0.5, 1, 3.0)
    with pytest.raises(ContractError):
        build_series(frames[::-1], mids, 1.0, 0.5, 1, 3.0)
    with pytest.raises(ContractError):
        build_series(frames, [replace(m, w_s=None) for m in mids], 1.0, 0.5, 1, 3.0)
    ser = build_series(frames, mids, 0.0, -0.1, 1, 3.0)
    assert not ser.valid and "alpha" in ser.warning
    assert not monotonicity_report(ser).passes
    with pytest.raises(EstimationError):
        monotonicity_report(build_series(frames[:2], mids[:1], 1.0, 0.5, 1, 3.0))


# ---------------------------------------------------------------------------
# L2 bound and classification


def test_l2_bound_examples():
    lhs, c = l2_bound_check(_frame(np.zeros(257)), 0.0, 1, 3.0)
    assert lhs == 0.0 and math.isnan(c)
    lhs, c = l2_bound_check(_frame(np.ones(257)), eta(1, 3.0), 1, 3.0)
    assert lhs == pytest.approx(frozen.GAUSS_MASS_8, rel=1e-9)
    assert c == pytest.approx(frozen.L2_CONSTANT_UNIT, rel=1e-6)
    assert oracles.l2_constant_unit() == pytest.approx(frozen.L2_CONSTANT_UNIT, rel=1e-15)
    _, c = l2_bound_check(_frame(np.ones(65)), 0.0, 1, 3.0)
    assert math.isinf(c)


def test_l2_constant_bounded_on_bump():
    assert l2_constants_bounded(bump_run().analysis.series(0.0))


def test_limit_classes():
    an = ode_run(c=2.0, nodes=2049).analysis
    fr, _ = an.frames(0.0)
    assert limit_classify(an.series(0.0), fr[-1]) == "plus_one"
    zero = _stationary_series(C1=0.0)
    zero = replace(zero, G_values=np.zeros_like(zero.G_values))
    assert limit_classify(zero, _frame(np.zeros(257))) == "zero"
    bump = bump_run().analysis
    fr, _ = bump.frames(0.0)
    assert limit_classify(bump.series(0.0), fr[-1]) == "plus_one"
    fr, _ = bump.frames(3.0)
    assert limit_classify(bump.series(3.0), fr[-1]) == "zero"
    minus = replace(an.series(0.0))
    f = an.frames(0.0)[0][-1]
    flipped = replace(f, w=-f.w)
    assert limit_classify(minus, flipped) == "undetermined"
    assert limit_classify(minus, flipped, signed=True) == "minus_one"


def test_series_csv():
    ser = _stationary_series()
    lines = series_csv(ser, [2]).splitlines()
    assert lines[0] == "s,E,G,dissipation,violations" and len(lines) == ser.s_values.size + 1
    assert lines[3].endswith(",1") and lines[1].endswith(",0")
