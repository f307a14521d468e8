"""Gaussian-weighted energy of similarity frames and its Liapunov variant.

``E[w] = int (|grad w|^2/2 + beta w^2/2 - beta |w|^{p+1}/(p+1)) rho dy`` and
``G = E + C1 s^{-gamma}`` with ``gamma = alpha - 1/2``.  Along the rescaled
flow ``dG/ds <= -(1/2) int w_s^2 rho``; the series tools check this on
sampled frames with an explicit error budget.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.special import gamma as gamma_fn, gammaincc

from .errors import ContractError, DomainError, EstimationError
from .similarity import RescaledFrame

LIMIT_CLASSES = ("zero", "plus_one", "minus_one", "undetermined")


def eta(n: int, p: float) -> float:
    """Energy of the constant state ``w = 1``: ``(4 pi)^{n/2} / (2 (p+1))``."""
    return (4 * math.pi) ** (n / 2) / (2 * (p + 1))


def sphere_area(n: int) -> float:
    """``|S^{n-1}|``; equals 2 for ``n = 1``."""
    return 2 * math.pi ** (n / 2) / gamma_fn(n / 2)


def _measure(frame: RescaledFrame) -> np.ndarray:
    """Weight ``rho`` times the radial surface factor when needed."""
    if frame.radial:
        return frame.rho * sphere_area(frame.n) * frame.y ** (frame.n - 1)
    return frame.rho


def weighted_integral(frame: RescaledFrame, values) -> float:
    """``int values rho dy`` over the frame by composite Simpson."""
    values = np.asarray(values, dtype=float)
    if frame.y.size < 3:
        return 0.0
    return float(simpson(values * _measure(frame), x=frame.y))


def energy_E(frame: RescaledFrame, beta: float, p: float) -> float:
    if frame.w is None or frame.w_y is None or frame.rho is None:
        raise ContractError("frame needs w, w_y and rho")
    w, wy = frame.w, frame.w_y
    dens = 0.5 * wy**2 + 0.5 * beta * w**2 - beta / (p + 1) * np.abs(w) ** (p + 1)
    return weighted_integral(frame, dens)


def energy_G(E: float, s: float, C1: float, gamma: float) -> float:
    if not s > 0:
        raise DomainError("s must be positive")
    return E + C1 * s ** (-gamma)


def effective_alpha(alpha: float) -> float:
    """Decay exponent used in the bookkeeping; capped at 1 (pure power: inf)."""
    return min(alpha, 1.0)


def gaussian_tail(Y: float, n: int = 1) -> float:
    """``int_{|y| > Y} rho dy`` over ``R^n``."""
    return (4 * math.pi) ** (n / 2) * gammaincc(n / 2, Y * Y / 4)


def boundary_term(frame: RescaledFrame, delta: float) -> float:
    """``|S^{n-1}| sup |w_y|^2 exp(-delta^2 e^s / 8)`` at the truncation edge."""
    if frame.w_y.size == 0:
        return 0.0
    edge = [abs(frame.w_y[-1])] if frame.radial else [abs(frame.w_y[0]), abs(frame.w_y[-1])]
    return sphere_area(frame.n) * max(edge) ** 2 * math.exp(-delta**2 * math.exp(frame.s) / 8)


def estimate_C1(frames, M_run: float, gamma: float, delta: float, alpha: float | None = None,
                safety: float = 1.1) -> float:
    """Smallest ``C1`` making both perturbation budgets hold on every frame.

    ``(1/2) int H^2 rho + B(s) <= gamma C1 s^{-alpha-1/2}`` and
    ``2 M int |H| rho <= C1 s^{-gamma}``, where ``B`` is the boundary term.
    The result is multiplied by ``safety``.
    """
    frames = list(frames)
    if len(frames) < 5:
        raise EstimationError("need >= 5 frames to estimate C1")
    if not M_run > 0:
        raise DomainError("M_run must be positive")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    a = gamma + 0.5 if alpha is None else effective_alpha(alpha)
    best = 0.0
    for f in frames:
        if f.H is None:
            raise ContractError("frames need H")
        s = f.s
        first = (0.5 * weighted_integral(f, f.H**2) + boundary_term(f, delta)) * s ** (a + 0.5) / gamma
        second = 2 * M_run * weighted_integral(f, np.abs(f.H)) * s**gamma
        best = max(best, first, second)
    return safety * best


@dataclass
class EnergySeries:
    a: float
    s_values: np.ndarray
    E_values: np.ndarray
    G_values: np.ndarray
    C1: float
    gamma: float
    dissipation: np.ndarray  # per interval, (1/2) int int w_s^2 rho
    tolerance: np.ndarray  # per interval
    eta: float
    n: int = 1
    p: float = 3.0
    valid: bool = True
    warning: str = ""
    limit_class: str = "undetermined"
    l2_constants: np.ndarray = field(default_factory=lambda: np.zeros(0))


def build_series(frames, mid_frames, C1: float, gamma: float, n: int, p: float,
                 M_run: float = 1.0, alpha: float | None = None) -> EnergySeries:
    """Assemble ``E``, ``G``, dissipation and tolerances.

    ``mid_frames[k]`` sits at the midpoint of ``frames[k]`` and
    ``frames[k+1]`` and carries ``w_s``; the dissipation over the interval
    is the midpoint rule.
    """
    frames = list(frames)
    mid_frames = list(mid_frames)
    if len(mid_frames) != len(frames) - 1:
        raise ContractError("need one midpoint frame per interval")
    beta = 1.0 / (p - 1.0)
    s = np.array([f.s for f in frames])
    if np.any(np.diff(s) <= 0):
        raise ContractError("frames must have increasing s")
    E = np.array([energy_E(f, beta, p) for f in frames])
    valid = gamma > 0
    G = np.array([energy_G(e, x, C1, gamma) for e, x in zip(E, s)]) if valid else E.copy()
    diss = np.zeros(len(mid_frames))
    tol = np.zeros(len(mid_frames))
    for k, m in enumerate(mid_frames):
        if m.w_s is None:
            raise ContractError("midpoint frames need w_s")
        width = s[k + 1] - s[k]
        diss[k] = 0.5 * weighted_integral(m, m.w_s**2) * width
        tail = M_run**2 * gaussian_tail(min(frames[k].y_limit, frames[k + 1].y_limit), n)
        proxy = weighted_integral(m, np.abs(m.w_s)) * m.w_s_err * width
        tol[k] = 1e-3 * (1 + abs(G[k])) + proxy + tail
    warning = "" if valid else "alpha <= 1/2: no monotonicity contract"
    l2 = np.array([l2_bound_check(f, g, n, p)[1] for f, g in zip(frames, G)])
    return EnergySeries(frames[0].a, s, E, G, C1, gamma, diss, tol, eta(n, p), n, p, valid, warning,
                        l2_constants=l2)


@dataclass
class MonotonicityReport:
    violations: list
    increments: np.ndarray
    bounds: np.ndarray
    applicable: bool = True

    @property
    def passes(self) -> bool:
        return self.applicable and not self.violations


def monotonicity_report(series: EnergySeries) -> MonotonicityReport:
    """Intervals where ``G(s_{k+1}) - G(s_k) > -dissipation + tol``."""
    if series.s_values.size < 3:
        raise EstimationError("need >= 3 s-points")
    inc = np.diff(series.G_values)
    bound = -series.dissipation + series.tolerance
    bad = [int(k) for k in np.nonzero(inc > bound)[0]]
    return MonotonicityReport(bad, inc, bound, series.valid)


def l2_bound_check(frame: RescaledFrame, G: float, n: int, p: float):
    """``(int w^2 rho, int w^2 rho / G^{2/(p+1)})``; constant is nan if undefined."""
    lhs = weighted_integral(frame, frame.w**2)
    if G <= 0:
        return lhs, (math.inf if lhs > 1e-12 else math.nan)
    return lhs, lhs / G ** (2 / (p + 1))


def l2_constants_bounded(series: EnergySeries) -> bool:
    c = series.l2_constants[np.isfinite(series.l2_constants)]
    if c.size == 0:
        return not np.any(np.isinf(series.l2_constants))
    return bool(np.all(np.isfinite(series.l2_constants) | np.isnan(series.l2_constants))
                and c.max() <= 3 * np.median(c))


def sup_deviation(frame: RescaledFrame, target: float, C_box: float = 1.0) -> float:
    """``sup_{|y| <= C_box} |w - target|``."""
    m = np.abs(frame.y) <= C_box + 1e-12
    if not np.any(m):
        raise DomainError("no frame nodes inside the box")
    return float(np.max(np.abs(frame.w[m] - target)))


def limit_classify(series: EnergySeries, final_frame: RescaledFrame, signed: bool = False) -> str:
    """Classify the limit of ``w`` from the final energy and the final frame."""
    G = float(series.G_values[-1])
    e = series.eta
    if 0.5 * e <= G <= 1.5 * e and sup_deviation(final_frame, 1.0) <= 0.2:
        return "plus_one"
    if signed and 0.5 * e <= G <= 1.5 * e and sup_deviation(final_frame, -1.0) <= 0.2:
        return "minus_one"
    if G <= 0.1 * e and sup_deviation(final_frame, 0.0) <= 0.1:
        return "zero"
    return "undetermined"


def series_csv(series: EnergySeries, violations=()) -> str:
    bad = set(violations)
    buf = io.StringIO()
    buf.write("s,E,G,dissipation,violations\n")
    for k, (s, E, G) in enumerate(zip(series.s_values, series.E_values, series.G_values)):
        d = series.dissipation[k] if k < series.dissipation.size else 0.0
        buf.write(f"{float(s)!r},{float(E)!r},{float(G)!r},{float(d)!r},{int(k in bad)}\n")
    return buf.getvalue()
