"""The spatially flat blow-up profile ``psi`` of ``u' = f(u)``.

Everything is computed from the tail integral ``F(X) = int_X^inf ds/f(s)``
written in scaled form::

    F(X) = X**(1-p) / L(X) * J(X),
    J(X) = int_0^inf exp(-(p-1) t) L(X) / L(X e^t) dt,

so that ``J`` is of order ``beta = 1/(p-1)`` for every ``X`` and all
arithmetic stays in log space.  ``psi(t) = F^{-1}(T - t)`` is obtained by
Newton iteration in ``log X`` using ``d log F / d log X = -1/J``.

The profile also carries a tabulated ``log J`` on a uniform grid in
``log u``.  The heat solver uses it for the exact reaction flow
``u -> F^{-1}(F(u) - dt)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import AccuracyError, DomainError, SaturationError
from .nonlinearity import OVERFLOW_GUARD, Nonlinearity, monotone_threshold

F_TABLE_NODES = 512
FLOW_LOG_MIN = math.log(1e-10)
FLOW_LOG_MAX = math.log(1e40)
FLOW_SPACING = 0.02
# the blend below u_min has large high derivatives
FLOW_SPACING_BLEND = 0.002
#: target relative accuracy of F
F_RTOL = 1e-10


def default_A(nl: Nonlinearity) -> float:
    """Smallest admissible lower limit: regular range, monotone range, and 1."""
    return float(max(1.0, nl.u_min_regular, monotone_threshold(nl)))


def tail_bound_J(nl: Nonlinearity, ell: float, t_c):
    """Bound on the part of ``J(e^ell)`` beyond ``t_c`` (in J units).

    Uses ``(f(X)/X) F(X) <= 1/(q-1)`` with ``q = (1+p)/2``, valid once
    ``s**-q f`` is nondecreasing, i.e. for ``X e^t_c >= A``.
    """
    q = (1 + nl.p) / 2
    t_c = np.asarray(t_c, dtype=float)
    return np.exp(-(nl.p - 1) * t_c + nl.log_L_ell(ell) - nl.log_L_ell(ell + t_c)) / (q - 1)


def _J_scalar(nl: Nonlinearity, ell: float, rtol: float = 1e-13):
    """``J(e^ell)`` by adaptive Gauss-Kronrod panels with a certified tail stop."""
    if nl.is_pure_power:
        return nl.beta, 0.0
    lL0 = float(nl.log_L_ell(np.array([ell]))[0])
    pm1 = nl.p - 1

    def g(t):
        return math.exp(-pm1 * t + lL0 - float(nl.log_L_ell(np.array([ell + t]))[0]))

    total, err = 0.0, 0.0
    a, width = 0.0, 1.0 / pm1
    for _ in range(200):
        b = a + width
        val, e = quad(g, a, b, epsabs=0.0, epsrel=rtol, limit=200)
        total += val
        err += e
        bound = float(tail_bound_J(nl, ell, b))
        if bound < 0.1 * rtol * total:
            break
        a, width = b, 2 * width
    else:
        raise AccuracyError("tail of F did not become negligible", err + bound)
    err += bound
    return total, err


def compute_log_F(nl: Nonlinearity, X: float) -> float:
    """``log F(X)``.  Pre: ``X >= A``; no overflow for ``X`` up to 1e300."""
    A = default_A(nl)
    if not (X >= A) or not math.isfinite(X):
        raise DomainError(f"F is evaluated for X >= A = {A:g}, got {X}")
    ell = math.log(X)
    J, err = _J_scalar(nl, ell)
    if err > F_RTOL * J:
        raise AccuracyError(f"F({X:g}) error estimate {err / J:.2e} exceeds {F_RTOL:g}", err / J)
    return (1 - nl.p) * ell - float(nl.log_L_ell(np.array([ell]))[0]) + math.log(J)


def compute_F(nl: Nonlinearity, X: float) -> float:
    """``F(X) = int_X^inf ds/f(s)`` to relative accuracy ``1e-10``."""
    return math.exp(compute_log_F(nl, X))


def J_table(nl: Nonlinearity, ells: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Vectorized ``J`` on many nodes at once (one adaptive vector quadrature)."""
    ells = np.asarray(ells, dtype=float)
    if nl.is_pure_power:
        return np.full_like(ells, nl.beta)
    pm1 = nl.p - 1
    lL0 = nl.log_L_ell(ells)
    # the tail bound needs X e^t_c >= A at every node
    t_c = max(1.0, math.log(default_A(nl)) - float(ells.min()) + 1.0)
    while np.max(tail_bound_J(nl, ells, t_c)) > 1e-3 * rtol * nl.beta / 4:
        t_c *= 1.5

    def g(t):
        return np.exp(-pm1 * t + lL0 - nl.log_L_ell(ells + t))

    val, err = quad_vec(g, 0.0, t_c, epsabs=0.0, epsrel=rtol, norm="max", limit=10000)
    if not np.all(np.isfinite(val)):
        raise AccuracyError("non-finite J table", float("inf"))
    return val


def _J_below(nl: Nonlinearity, ells: np.ndarray, J_top: float) -> np.ndarray:
    """``J`` on an ascending grid that ends at ``log u_min_regular``.

    Uses ``F(e^ell) = F(e^top) + int_ell^top e^{-(p-1) v - log L(v)} dv`` with
    Gauss-Legendre on each grid cell; the cells avoid the blend kink.
    """
    nodes, weights = np.polynomial.legendre.leggauss(10)
    a, b = ells[:-1], ells[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    v = mid[:, None] + half[:, None] * nodes[None, :]
    lw = -(nl.p - 1) * v - nl.log_L_ell(v.ravel()).reshape(v.shape)
    # scale each cell by its left end to keep the numbers O(1)
    cell = half * np.sum(weights * np.exp(lw - lw[:, :1]), axis=1)
    top = ells[-1]
    log_F_top = (1 - nl.p) * top - float(nl.log_L_ell(np.array([top]))[0]) + math.log(J_top)
    # all terms are positive: accumulate from the top without cancellation
    parts = np.append(cell * np.exp(lw[:, 0]), math.exp(log_F_top))
    F = np.cumsum(parts[::-1])[::-1]
    return F * np.exp((nl.p - 1) * ells + nl.log_L_ell(ells))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _FlowTable:
    """Piecewise cubic ``log J`` on a uniform grid in ``ell = log u``.

    Split at ``log u_min_regular`` where ``log L`` is only C^1.
    """

    pieces: tuple
    lo: float
    hi: float
    logJ_lo: float
    logJ_hi: float

    def logJ(self, ell, nu=0):
        ell = np.asarray(ell, dtype=float)
        out = np.empty_like(ell)
        below, above = ell < self.lo, ell > self.hi
        out[below] = self.logJ_lo if nu == 0 else 0.0
        out[above] = self.logJ_hi if nu == 0 else 0.0
        mid = ~(below | above)
        for a, b, spl in self.pieces:
            m = mid & (ell >= a) & (ell <= b)
            out[m] = spl(ell[m], nu)
        return out


def _build_flow_table(nl: Nonlinearity) -> _FlowTable:
    lo, hi = FLOW_LOG_MIN, FLOW_LOG_MAX
    if nl.is_pure_power:
        lb = math.log(nl.beta)
        spl = CubicSpline([lo, hi], [lb, lb])
        return _FlowTable(((lo, hi, spl),), lo, hi, lb, lb)
    cuts = [lo, hi]
    if nl.u_min_regular > 0 and lo < math.log(nl.u_min_regular) < hi:
        cuts = [lo, math.log(nl.u_min_regular), hi]
    grids = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        h = FLOW_SPACING if b == hi else FLOW_SPACING_BLEND
        n = max(8, int(math.ceil((b - a) / h)) + 1)
        grids.append(np.linspace(a, b, n))
    J_reg = J_table(nl, grids[-1])
    values = [J_reg]
    if len(grids) == 2:
        values.insert(0, _J_below(nl, grids[0], float(J_reg[0])))
    pieces = tuple((g[0], g[-1], CubicSpline(g, np.log(J))) for g, J in zip(grids, values))
    return _FlowTable(pieces, lo, hi, float(pieces[0][2](lo)), float(pieces[-1][2](hi)))


@dataclass(frozen=True)
class OdeProfile:
    """Tables and constants describing ``psi`` for a given ``(p, L, T)``."""

    nl: Nonlinearity
    T: float
    A: float
    beta: float
    kappa: float
    s0: float
    F_A: float
    table_log_X: np.ndarray = field(repr=False)
    table_log_F: np.ndarray = field(repr=False)
    _inverse: PchipInterpolator = field(repr=False, compare=False)
    flow: _FlowTable = field(repr=False, compare=False)

    # -- fast vectorized F from the flow table --------------------------------

    def log_F_fast(self, ell):
        """Tabulated ``log F(e^ell)``: valid for every real ``ell``."""
        ell = np.asarray(ell, dtype=float)
        return (1 - self.nl.p) * ell - self.nl.log_L_ell(ell) + self.flow.logJ(ell)

    def dlog_F_fast(self, ell):
        ell = np.asarray(ell, dtype=float)
        return (1 - self.nl.p) - self.nl.sigma_ell(ell) + self.flow.logJ(ell, 1)

    def F_fast(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.exp(self.log_F_fast(np.log(u)))

    def reaction_flow(self, u, dt):
        """Exact flow of ``u' = f(u)`` over ``dt`` for the tabulated ``F``.

        Returns ``(u_new, ok)``; ``ok`` is False where the flow leaves every
        finite value within ``dt`` (``F(u) <= dt``), and ``u_new`` is ``inf``
        there.  ``u = 0`` is a fixed point.
        """
        u = np.asarray(u, dtype=float)
        out = u.copy()
        pos = u > 0
        if not np.any(pos) or dt == 0:
            return out, np.ones(u.shape, dtype=bool)
        up = u[pos]
        ell = np.log(up)
        lF = self.log_F_fast(ell)
        with np.errstate(over="ignore"):
            x = dt * np.exp(-lF)
        ok_pos = x < 1
        # solve log F(u e^d) - log F(u) = log(1 - x) for the increment d,
        # written as a sum of small differences to avoid losing digits
        target = np.log1p(-np.where(ok_pos, x, 0.0))
        lL0, lJ0 = self.nl.log_L_ell(ell), self.flow.logJ(ell)
        pm1 = self.nl.p - 1
        d = -target * np.exp(lJ0)
        if not self.nl.is_pure_power:
            for _ in range(20):
                e1 = ell + d
                r = -pm1 * d - (self.nl.log_L_ell(e1) - lL0) + (self.flow.logJ(e1) - lJ0) - target
                slope = -pm1 - self.nl.sigma_ell(e1) + self.flow.logJ(e1, 1)
                corr = np.where(ok_pos, r / slope, 0.0)
                d = d - corr
                if np.max(np.abs(corr)) <= 4e-16 * max(1.0, float(np.max(np.abs(d)))):
                    break
        with np.errstate(over="ignore"):
            out[pos] = np.where(ok_pos, up * np.exp(d), np.inf)
        ok = np.ones(u.shape, dtype=bool)
        ok[pos] = ok_pos
        return out, ok

    def summary(self) -> dict:
        return {
            "p": self.nl.p,
            "L": self.nl.name,
            "params": {k: v for k, v in self.nl.params},
            "alpha": self.nl.alpha,
            "T": self.T,
            "A": self.A,
            "beta": self.beta,
            "kappa": self.kappa,
            "s0": self.s0,
            "F_A": self.F_A,
            "table_sha256": self.table_checksum(),
        }

    def table_checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.table_log_X, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.table_log_F, dtype="<f8").tobytes())
        return h.hexdigest()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _compute_s0(nl: Nonlinearity, F_A: float) -> float:
    # bookkeeping exponent capped at 1 (pure power has alpha = inf)
    a = min(nl.alpha, 1.0)
    beta = nl.beta
    s = np.round(np.arange(2.0, 400.0, 0.1), 10)
    cond = (beta * s >= 4 * a * np.log(s)) & (4 * a * np.log(s) >= math.log(16.0))
    cond &= np.exp(-s) < F_A
    bad = np.nonzero(~cond)[0]
    if bad.size == 0:
        return float(s[0])
    if bad[-1] == s.size - 1:
        raise DomainError("no admissible s0 found below s = 400")
    return float(s[bad[-1] + 1])


@lru_cache(maxsize=32)
def _profile_cached(nl: Nonlinearity, T: float) -> OdeProfile:
    A = default_A(nl)
    x_hi = OVERFLOW_GUARD
    log_X = np.linspace(math.log(A), math.log(x_hi), F_TABLE_NODES)
    log_F = (1 - nl.p) * log_X - nl.log_L_ell(log_X) + np.log(J_table(nl, log_X))
    if not np.all(np.diff(log_F) < 0):
        raise AccuracyError("F table is not strictly decreasing", float("nan"))
    # inverse map -log F -> log X, increasing in its argument
    inverse = PchipInterpolator(-log_F, log_X)
    F_A = compute_F(nl, A)
    return OdeProfile(
        nl=nl,
        T=float(T),
        A=A,
        beta=nl.beta,
        kappa=nl.beta**nl.beta,
        s0=_compute_s0(nl, F_A),
        F_A=F_A,
        table_log_X=log_X,
        table_log_F=log_F,
        _inverse=inverse,
        flow=_build_flow_table(nl),
    )


def build_profile(nl: Nonlinearity, T: float = 1.0) -> OdeProfile:
    """Profile of ``u' = f(u)`` blowing up at time ``T``."""
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"T must be positive and finite, got {T}")
    return _profile_cached(nl, float(T))


def invert_F(profile: OdeProfile, tau: float) -> float:
    """``X`` with ``F(X) = tau``.  Pre: ``0 < tau <= F(A)``."""
    return math.exp(invert_log_F(profile, math.log(tau) if tau > 0 else -math.inf))


def invert_log_F(profile: OdeProfile, log_tau: float) -> float:
    """``log X`` with ``log F(X) = log_tau`` (Newton in ``log X``).

    Bracketed by the monotone table, polished on the fast table, then
    refined with the adaptive quadrature until the residual in ``log F`` is
    at round-off level.  Results are memoized per profile.
    """
    memo = profile.__dict__.setdefault("_inverse_memo", {})
    if log_tau in memo:
        return memo[log_tau]
    nl = profile.nl
    if not (log_tau <= math.log(profile.F_A) + 1e-14) or not math.isfinite(log_tau):
        raise DomainError(f"tau must satisfy 0 < tau <= F(A) = {profile.F_A:.6g}")
    lF_min = float(profile.table_log_F[-1])
    if log_tau < lF_min:
        raise SaturationError("F^{-1}(tau) lies beyond the overflow guard", OVERFLOW_GUARD)
    lo, hi = float(profile.table_log_X[0]), float(profile.table_log_X[-1])
    ell = float(np.clip(profile._inverse(-log_tau), lo, hi))
    if profile.flow.lo <= ell <= profile.flow.hi:
        for _ in range(4):
            e = np.array([ell])
            r = float(profile.log_F_fast(e)[0]) - log_tau
            ell = min(max(ell - r / float(profile.dlog_F_fast(e)[0]), lo), hi)
    for _ in range(40):
        J, _err = _J_scalar(nl, ell)
        lF = (1 - nl.p) * ell - float(nl.log_L_ell(np.array([ell]))[0]) + math.log(J)
        r = lF - log_tau
        new = min(max(ell + J * r, lo), hi)
        if abs(r) <= 1e-14 * max(1.0, abs(log_tau)):
            out = new if abs(new - ell) < 1e-12 else ell
            if len(memo) < 100_000:
                memo[log_tau] = out
            return out
        ell = new
    raise AccuracyError(f"inversion of F did not converge (residual {r:.2e})", abs(r))


def psi(profile: OdeProfile, t: float) -> float:
    """``F^{-1}(T - t)``.  Pre: ``T - F(A) <= t < T``."""
    tau = profile.T - t
    if not (0 < tau <= profile.F_A * (1 + 1e-14)):
        raise DomainError(f"psi is defined for T - F(A) <= t < T, got t = {t}")
    return invert_F(profile, min(tau, profile.F_A))


def log_psi1(profile: OdeProfile, s: float) -> float:
    """``log psi(T - e^{-s})``."""
    return invert_log_F(profile, -s)


def psi1(profile: OdeProfile, s: float) -> float:
    return math.exp(log_psi1(profile, s))


def s_min(profile: OdeProfile) -> float:
    """Smallest similarity time at which ``psi1`` is defined."""
    return -math.log(profile.F_A)


def ode_residual(profile: OdeProfile, t: float) -> float:
    """Relative residual ``|psi'(t) - f(psi(t))| / f(psi(t))``.

    ``psi'`` from a five-point centered stencil with step ``1e-3 (T - t)``.
    """
    tau = profile.T - t
    h = 1e-3 * tau
    if not (0 < tau and tau + 2 * h <= profile.F_A):
        raise DomainError("stencil leaves the domain of psi")
    lp = [invert_log_F(profile, math.log(tau - k * h)) for k in (-2, -1, 1, 2)]
    # differences of exp(log psi) relative to psi(t), to avoid overflow
    l0 = invert_log_F(profile, math.log(tau))
    v = [math.expm1(x - l0) for x in lp]
    dpsi_rel = (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h)
    lf = nl_log_f(profile.nl, l0)
    # psi'/f = (psi'/psi) * psi / f
    return abs(dpsi_rel * math.exp(l0 - lf) - 1.0)


def nl_log_f(nl: Nonlinearity, ell: float) -> float:
    return nl.p * ell + float(nl.log_L_ell(np.array([ell]))[0])


def log_h_of_s(profile: OdeProfile, s: float) -> float:
    """``log h(s)`` with ``h = e^{-s} psi1**(p-1) L(psi1)``."""
    lp = log_psi1(profile, s)
    nl = profile.nl
    return -s + (nl.p - 1) * lp + float(nl.log_L_ell(np.array([lp]))[0])


def h_of_s(profile: OdeProfile, s: float) -> float:
    """Coefficient ``h(s)``; tends to ``beta``.  Pre: ``psi1(s)`` defined."""
    return math.exp(log_h_of_s(profile, s))


@dataclass
class HTrend:
    s: np.ndarray
    deviation: np.ndarray
    C_fit: float
    head_max: float
    tail_max: float
    passes: bool


def h_trend(profile: OdeProfile, s_lo: float = 10.0, s_hi: float = 40.0, n: int = 64,
            floor: float = 1e-12) -> HTrend:
    """Sample ``|h - beta|`` and fit ``C`` with ``|h - beta| <= C s**-alpha``.

    Samples are log-spaced.  Passes when the last-quartile maximum is below
    the first-quartile maximum; deviations under ``floor`` (round-off) count
    as zero.
    """
    s = np.geomspace(s_lo, s_hi, n)
    dev = np.array([abs(h_of_s(profile, x) - profile.beta) for x in s])
    dev = np.where(dev < floor * profile.beta, 0.0, dev)
    a = min(profile.nl.alpha, 1.0)
    C = float(np.max(dev * s**a))
    q = n // 4
    head, tail = float(dev[:q].max()), float(dev[-q:].max())
    passes = bool(tail < head or (head == 0.0 and tail == 0.0))
    return HTrend(s, dev, C, head, tail, passes)


def growth_bound_holds(profile: OdeProfile, s_values) -> bool:
    """Whether ``psi1(s) >= exp(beta s / 2)`` at every given ``s``."""
    return all(log_psi1(profile, s) >= profile.beta * s / 2 for s in s_values)
