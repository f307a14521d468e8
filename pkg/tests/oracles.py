"""Independent reference computations for the frozen test values.

Nothing here imports ``blowlab``.  Run ``python tests/oracles.py`` to print
the values frozen in ``tests/frozen.py``.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np


def f_log_at_10() -> float:
    """``10^3 log(e + 10)`` at 30 digits."""
    mpmath.mp.dps = 30
    return float(1000 * mpmath.log(mpmath.e + 10))


def sigma_log_at_10() -> float:
    """``s L'/L`` for ``L = log(e + s)`` at ``s = 10``."""
    mpmath.mp.dps = 30
    s = mpmath.mpf(10)
    return float(s / ((mpmath.e + s) * mpmath.log(mpmath.e + s)))


def sigma_osc_sin(s_log: float = 10.0, a: float = 0.5, nu: float = 0.3) -> float:
    """``s L'/L`` for ``L = 1 + a sin(log^nu(2+s))`` by high-precision differentiation."""
    mpmath.mp.dps = 40
    s = mpmath.e ** mpmath.mpf(s_log)

    def L(x):
        return 1 + a * mpmath.sin(mpmath.log(2 + x) ** nu)

    return float(s * mpmath.diff(L, s) / L(s))


def F_log_at_10(panels: int = 10**7, chunk: int = 10**6) -> float:
    """``int_10^inf ds / (s^3 log(e+s))``.

    Midpoint Riemann sum with ``panels`` cells on ``[10, 1e6]`` in the
    variable ``v = log s``, plus the power-law tail beyond ``1e6`` where
    ``log(e+s)`` is frozen two terms deep.
    """
    lo, hi = math.log(10.0), math.log(1e6)
    h = (hi - lo) / panels
    total = 0.0
    for start in range(0, panels, chunk):
        k = np.arange(start, min(start + chunk, panels), dtype=float)
        v = lo + (k + 0.5) * h
        s = np.exp(v)
        total += float(np.sum(s / (s**3 * np.log(np.e + s)))) * h
    X = 1e6
    lx = math.log(math.e + X)
    tail = 1.0 / (2 * X**2 * lx) * (1 - 1 / (2 * lx))
    return total + tail


def energy_gauss(panels: int = 10**6, Y: float = 8.0) -> float:
    """``E[w]`` for ``w = exp(-y^2)``, ``n = 1``, ``p = 3`` by midpoint rule."""
    h = 2 * Y / panels
    y = -Y + (np.arange(panels) + 0.5) * h
    w = np.exp(-(y**2))
    wy = -2 * y * w
    beta, p = 0.5, 3.0
    dens = 0.5 * wy**2 + 0.5 * beta * w**2 - beta / (p + 1) * w ** (p + 1)
    return float(np.sum(dens * np.exp(-(y**2) / 4)) * h)


def energy_gauss_closed() -> float:
    """Same energy from Gaussian moments on the whole line (tail below 1e-60)."""
    pi = math.pi
    c1, c2 = 2.25, 4.25
    grad = 0.5 * 4 * math.sqrt(pi) / (2 * c1**1.5)
    return grad + 0.25 * math.sqrt(pi / c1) - 0.125 * math.sqrt(pi / c2)


def truncated_gauss_mass(Y: float = 8.0) -> float:
    """``int_{|y|<Y} exp(-y^2/4) dy`` in one dimension."""
    return math.sqrt(4 * math.pi) * math.erf(Y / 2)


def l2_constant_unit(p: float = 3.0) -> float:
    """``int rho / eta^{2/(p+1)}`` for ``w = 1``, ``n = 1``."""
    mass = math.sqrt(4 * math.pi)
    eta = mass / (2 * (p + 1))
    return mass / eta ** (2 / (p + 1))


def h_osc_sin(s_val: float, a: float = 0.5, nu: float = 0.3) -> float:
    """``h(s) - 1/2`` for ``p = 3``, ``L = 1 + a sin(log^nu(2+u))``, ``T = 1``.

    ``F`` by mpmath quadrature in ``log u``, inverted with ``findroot``.
    """
    mp = mpmath.mp
    mp.dps = 30

    def L(x):
        return 1 + a * mpmath.sin(mpmath.log(2 + x) ** nu)

    def log_F(lx):
        g = lambda v: mpmath.e ** (-2 * v) / L(mpmath.e**v)  # noqa: E731
        return mpmath.log(mpmath.quad(g, [lx, lx + 5, lx + 20, lx + 80, mpmath.inf]))

    s = mpmath.mpf(s_val)
    lx = mpmath.findroot(lambda l: log_F(l) + s, s / 2)
    return float(mpmath.e ** (-s) * mpmath.e ** (2 * lx) * L(mpmath.e**lx) - mpmath.mpf(1) / 2)


if __name__ == "__main__":
    print("F_LOG_10 =", repr(f_log_at_10()))
    print("SIGMA_LOG_10 =", repr(sigma_log_at_10()))
    print("SIGMA_OSC_E10 =", repr(sigma_osc_sin()))
    print("F_INTEGRAL_LOG_10 =", repr(F_log_at_10()))
    print("ENERGY_GAUSS =", repr(energy_gauss()))
    print("ENERGY_GAUSS_CLOSED =", repr(energy_gauss_closed()))
    print("GAUSS_MASS_8 =", repr(truncated_gauss_mass()))
    print("L2_CONSTANT_UNIT =", repr(l2_constant_unit()))
    print("H_DEV_OSC_10 =", repr(h_osc_sin(10.0)))
    print("H_DEV_OSC_40 =", repr(h_osc_sin(40.0)))
