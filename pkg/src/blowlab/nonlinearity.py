"""Nonlinearities ``f(u) = u**p * L(u)`` with slowly varying factors ``L``.

Every catalog factor is described by two closed forms on its regular range
``u >= u_min_regular``: ``log L(u)`` and the slow-variation index
``sigma(u) = u L'(u) / L(u)``.  Below ``u_min_regular`` the factor is
continued by a C^1 cubic Hermite blend of ``log L`` that reaches
``L = 1`` (with zero slope) at ``u = 0``, so that ``f`` is defined, positive
and C^1 on ``(0, inf)`` with ``f(0) = 0``.

Example
-------
>>> nl = get_entry("log", p=3.0, a=1.0, K=math.e)
>>> round(eval_f(nl, 10.0), 2)
2543.04
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, LookupFailure, SaturationError

#: f is evaluated through its logarithm above this argument.
LOG_SPACE_ABOVE = 1e15
#: Values of f beyond this are reported as saturated.
OVERFLOW_GUARD = 1e300
_LOG_GUARD = math.log(OVERFLOW_GUARD)


def sobolev_exponent(n: int) -> float:
    """Critical Sobolev exponent ``(n+2)/(n-2)``, infinite for ``n <= 2``."""
    return math.inf if n <= 2 else (n + 2) / (n - 2)


@dataclass(frozen=True)
class _Factor:
    log_L: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Nonlinearity:
    """The pair ``(p, L)``.

    ``alpha`` is the certified decay exponent of ``sigma`` (``inf`` for the
    pure power).  ``params`` holds the catalog parameters other than ``p`` as
    sorted ``(key, value)`` pairs and identifies the entry together with
    ``name``.
    """

    name: str
    p: float
    params: tuple
    alpha: float
    u_min_regular: float
    _factor: _Factor = field(repr=False, compare=False)

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"exponent p must satisfy p > 1, got {self.p}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")

    @property
    def beta(self) -> float:
        return 1.0 / (self.p - 1.0)

    @property
    def is_pure_power(self) -> bool:
        return self.name == "pure_power"

    @property
    def energy_valid(self) -> bool:
        """Whether the weighted-energy construction applies (alpha > 1/2)."""
        return self.alpha > 0.5

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    # closed forms in ell = log u, with the blend below u_min_regular

    def _blend_coefficients(self):
        ell_min = math.log(self.u_min_regular)
        at = np.array([ell_min])
        return ell_min, float(self._factor.log_L(at)[0]), float(self._factor.sigma(at)[0])

    def _split(self, ell):
        ell = np.asarray(ell, dtype=float)
        if self.u_min_regular > 0:
            reg = ell >= math.log(self.u_min_regular)
        else:
            reg = ell > -np.inf
        return ell, reg, (~reg) & (ell > -np.inf)

    def log_L_ell(self, ell):
        """``log L(exp(ell))``; finite for every real ``ell``."""
        ell, reg, low = self._split(ell)
        out = np.zeros_like(ell)
        if np.any(reg):
            out[reg] = self._factor.log_L(ell[reg])
        if np.any(low):
            ell_min, g1, s1 = self._blend_coefficients()
            x = np.exp(ell[low] - ell_min)
            out[low] = g1 * (3 * x**2 - 2 * x**3) + s1 * (x**3 - x**2)
        return out

    def sigma_ell(self, ell):
        """Slow-variation index at ``u = exp(ell)``."""
        ell, reg, low = self._split(ell)
        out = np.zeros_like(ell)
        if np.any(reg):
            out[reg] = self._factor.sigma(ell[reg])
        if np.any(low):
            ell_min, g1, s1 = self._blend_coefficients()
            x = np.exp(ell[low] - ell_min)
            out[low] = x * (g1 * (6 * x - 6 * x**2) + s1 * (3 * x**2 - 2 * x))
        return out

    def log_L(self, u):
        """``log L(u)`` for ``u >= 0`` (array in, array out)."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.log_L_ell(np.log(u))

    def sigma(self, u):
        """Slow-variation index ``u L'(u)/L(u)``; zero at ``u = 0``."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.sigma_ell(np.log(u))

    def L(self, u):
        return np.exp(self.log_L(u))

    def dL(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u > 0, self.L(u) * self.sigma(u) / np.where(u > 0, u, 1.0), 0.0)
        return out

    def log_f(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.p * np.log(u) + self.log_L(u)

    def f(self, u):
        """Vectorized ``f``; raises :class:`SaturationError` past the guard."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("f is defined for u >= 0 only")
        out = np.zeros_like(u)
        small = (u > 0) & (u <= LOG_SPACE_ABOVE)
        out[small] = u[small] ** self.p * self.L(u[small])
        big = u > LOG_SPACE_ABOVE
        if np.any(big):
            lf = self.log_f(u[big])
            if np.any(lf > _LOG_GUARD):
                raise SaturationError("f exceeds the overflow guard", OVERFLOW_GUARD)
            out[big] = np.exp(lf)
        return out

    def summary(self) -> dict:
        return {
            "name": self.name,
            "p": self.p,
            "params": {k: v for k, v in self.params},
            "alpha": self.alpha,
            "u_min_regular": self.u_min_regular,
        }


def eval_f(nl: Nonlinearity, u: float) -> float:
    """``u**p L(u)``, computed in log space above ``1e15``."""
    if u < 0 or math.isnan(u):
        raise DomainError(f"f is defined for u >= 0 only, got {u}")
    if u == 0:
        return 0.0
    if u > LOG_SPACE_ABOVE:
        lf = float(nl.log_f(np.array([u]))[0])
        if lf > _LOG_GUARD:
            raise SaturationError(f"f({u:g}) exceeds the overflow guard", OVERFLOW_GUARD)
        return math.exp(lf)
    return u**nl.p * float(nl.L(np.array([u]))[0])


def slow_variation_index(nl: Nonlinearity, s: float) -> float:
    """Closed-form ``s L'(s)/L(s)`` on the regular range."""
    if s < nl.u_min_regular or s <= 0:
        raise DomainError(f"s={s} is below the regular range (u_min_regular={nl.u_min_regular})")
    return float(nl._factor.sigma(np.array([math.log(s)]))[0])


# ---------------------------------------------------------------------------
# catalog


def _shifted_log(ell, K):
    # log(K + s) for s = exp(ell), stable for large ell
    return ell + np.log1p(K * np.exp(-ell))


def _log_factor(a, K):
    def log_L(ell):
        return a * np.log(_shifted_log(ell, K))

    def sigma(ell):
        return a / ((1 + K * np.exp(-ell)) * _shifted_log(ell, K))

    return _Factor(log_L, sigma)


def _iterated_log_factor(m, K):
    def chain(ell):
        logs = [_shifted_log(ell, K)]
        for _ in range(m - 1):
            logs.append(np.log(logs[-1]))
        return logs

    def log_L(ell):
        return np.log(chain(ell)[-1])

    def sigma(ell):
        prod = np.ones_like(ell)
        for v in chain(ell):
            prod = prod * v
        return 1 / ((1 + K * np.exp(-ell)) * prod)

    return _Factor(log_L, sigma)


def _exp_power_factor(nu):
    def log_L(ell):
        return np.abs(ell) ** nu

    def sigma(ell):
        return nu * np.abs(ell) ** (nu - 1) * np.sign(ell)

    return _Factor(log_L, sigma)


def _exp_cos_factor(nu, gamma):
    def log_L(ell):
        ls = np.abs(ell)
        return ls**nu * np.cos(ls**gamma)

    def sigma(ell):
        ls = np.abs(ell)
        return np.sign(ell) * (nu * ls ** (nu - 1) * np.cos(ls**gamma)
                               - gamma * ls ** (nu + gamma - 1) * np.sin(ls**gamma))

    return _Factor(log_L, sigma)


def _osc_log_power_factor():
    # L = log(3+s) ** sin(log log(3+s))
    def log_L(ell):
        ll = np.log(_shifted_log(ell, 3.0))
        return np.sin(ll) * ll

    def sigma(ell):
        l3 = _shifted_log(ell, 3.0)
        ll = np.log(l3)
        return (ll * np.cos(ll) + np.sin(ll)) / ((1 + 3 * np.exp(-ell)) * l3)

    return _Factor(log_L, sigma)


def _osc_sin_factor(a, nu):
    def log_L(ell):
        return np.log1p(a * np.sin(_shifted_log(ell, 2.0) ** nu))

    def sigma(ell):
        l2 = _shifted_log(ell, 2.0)
        phase = l2**nu
        return a * np.cos(phase) * nu * l2 ** (nu - 1) / ((1 + 2 * np.exp(-ell)) * (1 + a * np.sin(phase)))

    return _Factor(log_L, sigma)


def _iterated_exp_zero(m):
    v = 0.0
    for _ in range(m):
        v = math.exp(v)
    return v


_DEFAULTS = {
    "pure_power": {},
    "log": {"a": 1.0, "K": math.e},
    "iterated_log": {"m": 2, "K": math.e**2},
    "exp_power": {"nu": 0.25},
    "exp_cos": {"nu": 0.2, "gamma": 0.2},
    "osc_log_power": {},
    "osc_sin": {"a": 0.5, "nu": 0.3},
}


def catalog_names() -> list[str]:
    return list(_DEFAULTS)


def default_params(name: str) -> dict:
    if name not in _DEFAULTS:
        raise LookupFailure(f"unknown nonlinearity {name!r}; known: {', '.join(_DEFAULTS)}")
    return dict(_DEFAULTS[name])


def get_entry(name: str, p: float = 3.0, alpha: float | None = None, **params) -> Nonlinearity:
    """Build the named catalog entry.

    ``alpha`` overrides the certified exponent (an uncertified claim that
    :func:`verify_regular_variation` can then test).
    """
    if name not in _DEFAULTS:
        raise LookupFailure(f"unknown nonlinearity {name!r}; known: {', '.join(_DEFAULTS)}")
    unknown = set(params) - set(_DEFAULTS[name])
    if unknown:
        raise DomainError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    prm = {**_DEFAULTS[name], **params}
    p = float(p)
    if name == "pure_power":
        factor = _Factor(np.zeros_like, np.zeros_like)
        cert, u_min = math.inf, 0.0
    elif name == "log":
        a, K = float(prm["a"]), float(prm["K"])
        if not K > 1:
            raise DomainError("log factor requires K > 1")
        factor, cert, u_min = _log_factor(a, K), 1.0, 1.0
        prm = {"a": a, "K": K}
    elif name == "iterated_log":
        m, K = int(prm["m"]), float(prm["K"])
        if m < 1:
            raise DomainError("iterated_log requires m >= 1")
        if not K > _iterated_exp_zero(m):
            raise DomainError(f"iterated_log with m={m} requires K > {_iterated_exp_zero(m):g}")
        factor, cert, u_min = _iterated_log_factor(m, K), 1.0, math.e * math.e
        prm = {"m": m, "K": K}
    elif name == "exp_power":
        nu = float(prm["nu"])
        if not 0 < nu < 1:
            raise DomainError("exp_power requires 0 < nu < 1")
        factor, cert, u_min = _exp_power_factor(nu), 1.0 - nu, 2.0
        prm = {"nu": nu}
    elif name == "exp_cos":
        nu, gamma = float(prm["nu"]), float(prm["gamma"])
        if not (nu > 0 and gamma > 0 and nu + gamma < 0.5):
            raise DomainError("exp_cos requires nu, gamma > 0 and nu + gamma < 1/2")
        factor, cert, u_min = _exp_cos_factor(nu, gamma), 1.0 - nu - gamma, 2.0
        prm = {"nu": nu, "gamma": gamma}
    elif name == "osc_log_power":
        # sigma = O(loglog s / log s): any exponent below 1 is provable
        factor, cert, u_min = _osc_log_power_factor(), 0.75, 2.0
    else:
        a, nu = float(prm["a"]), float(prm["nu"])
        if not (abs(a) < 1 and 0 < nu < 0.5):
            raise DomainError("osc_sin requires |a| < 1 and 0 < nu < 1/2")
        factor, cert, u_min = _osc_sin_factor(a, nu), 1.0 - nu, 2.0
        prm = {"a": a, "nu": nu}
    return Nonlinearity(
        name=name,
        p=p,
        params=tuple(sorted(prm.items())),
        alpha=float(cert if alpha is None else alpha),
        u_min_regular=u_min,
        _factor=factor,
    )


def catalog(p: float = 3.0) -> list[Nonlinearity]:
    """Every catalog entry with default parameters."""
    return [get_entry(name, p=p) for name in _DEFAULTS]


# ---------------------------------------------------------------------------
# checks


@dataclass
class SlowVariationReport:
    grid: np.ndarray
    sigma: np.ndarray
    weighted: np.ndarray
    sup_weighted: float
    head_max: float
    tail_max: float
    burn_in: float
    passes: bool


def verify_regular_variation(nl: Nonlinearity, s_min: float, s_max: float,
                             n_samples: int = 256, burn_in: float | None = None) -> SlowVariationReport:
    """Sample ``|sigma(s)| log(s)**alpha`` and test that it stays bounded.

    The grid is uniform in ``log log s``: growth like a power of ``log s``
    is then visible as a trend across the grid.  The check passes when the
    sampled supremum is finite and the maximum over the last quarter of the
    post-burn-in samples is at most twice the maximum over the first quarter.
    """
    if not (nl.u_min_regular <= s_min < s_max):
        raise DomainError("need u_min_regular <= s_min < s_max")
    if s_min <= 1:
        raise DomainError("the log-log grid needs s_min > 1")
    if n_samples < 16:
        raise DomainError("n_samples must be >= 16")
    grid = np.exp(np.exp(np.linspace(math.log(math.log(s_min)), math.log(math.log(s_max)), n_samples)))
    grid[0], grid[-1] = s_min, s_max
    sig = nl._factor.sigma(np.log(grid))
    with np.errstate(invalid="ignore", over="ignore"):
        weighted = np.where(sig == 0, 0.0, np.abs(sig) * np.log(grid) ** nl.alpha)
    burn = s_min if burn_in is None else float(burn_in)
    kept = weighted[grid >= burn]
    sup = float(np.max(weighted))
    if kept.size < 8:
        raise DomainError("burn-in leaves fewer than 8 samples")
    quarter = kept.size // 4
    head, tail = float(np.max(kept[:quarter])), float(np.max(kept[-quarter:]))
    passes = bool(np.isfinite(sup) and tail <= 2.0 * head + 1e-300)
    return SlowVariationReport(grid, sig, weighted, sup, head, tail, burn, passes)


def monotone_threshold(nl: Nonlinearity, q: float | None = None, m: float | None = None,
                       s_max: float = 1e300, n: int = 4096) -> float:
    """Point beyond which ``s**-q f`` is nondecreasing and ``s**-m f`` nonincreasing.

    Defaults ``q = (1+p)/2`` and ``m = p+1``.  Uses the closed-form index:
    ``(s**-q f)' >= 0`` iff ``sigma >= q - p``.
    """
    q = (1 + nl.p) / 2 if q is None else q
    m = nl.p + 1 if m is None else m
    lo = max(nl.u_min_regular, 1e-12)
    grid = np.geomspace(lo, s_max, n)
    sig = nl.sigma(grid)
    bad = (sig < q - nl.p) | (sig > m - nl.p)
    if not np.any(bad):
        return float(lo)
    last = int(np.nonzero(bad)[0][-1])
    if last == n - 1:
        raise DomainError("monotonicity fails up to s_max")
    return float(grid[last + 1])
