"""Similarity frames ``w_a(y, s) = u(a + y e^{-s/2}, T - e^{-s}) / psi1(s)``.

A frame is built from the two snapshots whose similarity times bracket
``s``.  Each snapshot is rescaled with its own ``s_k`` (monotone cubic
interpolation in space), then the two rescaled profiles are blended
linearly in ``s``.  Rescaled profiles vary slowly in ``s`` while ``u``
itself grows like ``psi``, so this is far more accurate than interpolating
``u`` in ``t``.

``T`` is always the trajectory's ``T_est``.  ``psi1`` does not depend on
``T``, so any profile of the right nonlinearity can be passed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ContractError, DomainError, ResolutionError
from .heat_solver import Trajectory
from .ode_profile import OdeProfile, h_of_s, log_psi1

Y_MAX = 8.0
N_Y = 257
DS = 0.05


@dataclass(frozen=True)
class RescaledFrame:
    a: float
    s: float
    y: np.ndarray
    w: np.ndarray
    w_y: np.ndarray
    rho: np.ndarray
    h: float
    p: float
    n: int = 1
    radial: bool = False
    log_psi1: float = 0.0
    y_limit: float = Y_MAX
    w_s: Optional[np.ndarray] = None
    w_s_err: float = 0.0
    H: Optional[np.ndarray] = None
    H1: Optional[np.ndarray] = None
    H2: Optional[np.ndarray] = None
    blended: Optional[np.ndarray] = None

    @property
    def beta(self) -> float:
        return 1.0 / (self.p - 1.0)

    @property
    def t(self) -> float:
        """Physical time of the frame relative to ``T``: ``-e^{-s}``."""
        return -math.exp(-self.s)

    @property
    def psi1(self) -> float:
        return math.exp(self.log_psi1)


# ---------------------------------------------------------------------------


def _similarity_times(traj: Trajectory) -> np.ndarray:
    if traj.T_est is None:
        raise ContractError("trajectory has no blow-up time estimate")
    tau = traj.T_est - traj.times
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(tau > 0, -np.log(tau), np.inf)


def _interpolant(traj: Trajectory, k: int) -> PchipInterpolator:
    cache = traj.__dict__.setdefault("_pchip", {})
    if k not in cache:
        cache[k] = PchipInterpolator(traj.grid.nodes, traj.snapshots[k].u, extrapolate=False)
    return cache[k]


def _y_grid(traj: Trajectory, a: float, s: float, Y_max: float, n_y: int):
    grid = traj.grid
    dy = 2 * Y_max / (n_y - 1) if not grid.geometry == "radial_ball" else Y_max / (n_y - 1)
    scale = math.exp(s / 2)
    if grid.geometry == "radial_ball":
        y_hi = min(Y_max, scale * grid.nodes[-1])
        k = int(math.floor(y_hi / dy + 1e-9))
        return dy * np.arange(k + 1), y_hi
    y_lo = min(Y_max, scale * (a - grid.nodes[0]))
    y_hi = min(Y_max, scale * (grid.nodes[-1] - a))
    k0 = int(math.floor(y_lo / dy + 1e-9))
    k1 = int(math.floor(y_hi / dy + 1e-9))
    return dy * np.arange(-k0, k1 + 1), min(y_lo, y_hi)


def _rescaled(traj, k, a, y, s_k, lp):
    x = a + y * math.exp(-s_k / 2)
    if traj.grid.geometry == "radial_ball":
        x = np.abs(x)
    v = _interpolant(traj, k)(x)
    v = np.where(np.isnan(v), 0.0, v)
    return v / math.exp(lp)


def rescaled_profile(traj: Trajectory, a: float, profile: OdeProfile, s: float, y: np.ndarray) -> np.ndarray:
    """``w(y, s)`` at the given ``y`` by blending the bracketing snapshots."""
    sk = _similarity_times(traj)
    j = int(np.searchsorted(sk, s, side="right"))
    if j == 0 or j >= sk.size or not math.isfinite(sk[j]):
        if j > 0 and sk[j - 1] == s:
            return _rescaled(traj, j - 1, a, y, s, log_psi1(profile, s))
        raise ResolutionError(f"s = {s} lies outside the recorded snapshots", float(sk[np.isfinite(sk)].max()))
    i = j - 1
    wi = _rescaled(traj, i, a, y, sk[i], log_psi1(profile, sk[i]))
    wj = _rescaled(traj, j, a, y, sk[j], log_psi1(profile, sk[j]))
    lam = (s - sk[i]) / (sk[j] - sk[i])
    return (1 - lam) * wi + lam * wj


def resolved_window(traj: Trajectory, a: float, profile: Optional[OdeProfile] = None):
    """``(s_lo, s_max)``: frames may be built for ``s_lo <= s <= s_max``."""
    sk = _similarity_times(traj)
    s_lo = float(sk[0])
    if profile is not None:
        s_lo = max(s_lo, -math.log(profile.F_A))
    return s_lo, traj.s_max(a)


def to_similarity(traj: Trajectory, a: float, profile: OdeProfile, s: float, Y_max: float = Y_MAX,
                  n_y: int = N_Y, ds: float = DS, with_ws: bool = True) -> RescaledFrame:
    """Frame of the trajectory at focus ``a`` and similarity time ``s``.

    ``w_s`` is the symmetric difference of frames at ``s +- ds/2``; its
    error proxy ``w_s_err`` is the largest change against the ``2 ds``
    estimate.
    """
    grid = traj.grid
    if grid.geometry == "radial_ball" and a != 0.0:
        raise DomainError("radial frames are centred at a = 0")
    if not grid.contains(a) and not (grid.geometry == "radial_ball"):
        raise DomainError(f"a = {a} lies outside the domain")
    s_lo, s_max = resolved_window(traj, a, profile)
    if not (s_lo <= s <= s_max + 1e-12):
        raise ResolutionError(f"s = {s:.4f} outside the resolved window [{s_lo:.4f}, {s_max:.4f}]", s_max)
    # truncate with the earliest snapshot any evaluation below will read
    sk = _similarity_times(traj)
    s_read = max(s - ds, s_lo) if with_ws else s
    j = int(np.searchsorted(sk, s_read, side="right"))
    y, y_lim = _y_grid(traj, a, min(s, float(sk[max(j - 1, 0)])), Y_max, n_y)
    w = rescaled_profile(traj, a, profile, s, y)
    dy = y[1] - y[0]
    w_y = np.gradient(w, dy, edge_order=2)
    if grid.geometry == "radial_ball":
        w_y[0] = 0.0
    rho = np.exp(-y**2 / 4)
    lp = log_psi1(profile, s)
    h = h_of_s(profile, s)
    frame = RescaledFrame(a=float(a), s=float(s), y=y, w=w, w_y=w_y, rho=rho, h=h, p=profile.nl.p,
                          n=grid.n, radial=grid.geometry == "radial_ball", log_psi1=lp, y_limit=y_lim)
    if with_ws:
        ws, err = _time_derivative(traj, a, profile, s, y, ds, s_lo)
        frame = replace(frame, w_s=ws, w_s_err=err)
    return frame


def _time_derivative(traj, a, profile, s, y, ds, s_lo):
    def w_at(x):
        return rescaled_profile(traj, a, profile, x, y)

    lo = max(s - ds, s_lo)
    # symmetric when possible, otherwise one-sided at the lower end
    if s - ds / 2 >= s_lo:
        d1 = (w_at(s + ds / 2) - w_at(s - ds / 2)) / ds
    else:
        d1 = (w_at(s + ds / 2) - w_at(s)) / (ds / 2)
    if s - ds >= s_lo:
        d2 = (w_at(s + ds) - w_at(s - ds)) / (2 * ds)
    else:
        d2 = (w_at(s + ds) - w_at(lo)) / (s + ds - lo)
    return d1, float(np.max(np.abs(d1 - d2)))


def frame_sensitivity(traj: Trajectory, a: float, profile: OdeProfile, s: float) -> float:
    """Largest change of ``w`` between ``T_est - unc`` and ``T_est + unc``."""
    unc = traj.T_unc or 0.0
    out = []
    for sign in (-1, 1):
        shifted = replace(traj, T_est=traj.T_est + sign * unc)
        shifted.__dict__["_pchip"] = traj.__dict__.get("_pchip", {})
        out.append(to_similarity(shifted, a, profile, s, with_ws=False).w)
    n = min(out[0].size, out[1].size)
    return float(np.max(np.abs(out[0][:n] - out[1][:n]))) if n else 0.0


def reconstruct_u(frame: RescaledFrame) -> np.ndarray:
    """Physical values ``psi1(s) w`` at ``x = a + y e^{-s/2}``."""
    return frame.psi1 * frame.w


def frame_x(frame: RescaledFrame) -> np.ndarray:
    return frame.a + frame.y * math.exp(-frame.s / 2)


# ---------------------------------------------------------------------------


def compute_H(frame: RescaledFrame, profile: OdeProfile) -> RescaledFrame:
    """Fill ``H1 = (h - beta)(|w|^{p-1} - 1) w`` and ``H2``, ``H = H1 + H2``.

    ``H2 = h |w|^{p-1} w (L(psi1 |w|)/L(psi1) - 1)`` with the ratio taken in
    log space; ``H2 = 0`` where ``w = 0``.  ``blended`` flags nodes where
    ``psi1 |w|`` falls below the regular range of ``L``.
    """
    nl = profile.nl
    if abs(nl.p - frame.p) > 0:
        raise ContractError("profile does not match the frame's nonlinearity")
    w = frame.w
    p, beta, h = nl.p, nl.beta, frame.h
    aw = np.abs(w)
    pw = aw ** (p - 1)
    H1 = (h - beta) * (pw - 1) * w
    nz = aw > 0
    H2 = np.zeros_like(w)
    blended = np.zeros(w.shape, dtype=bool)
    if np.any(nz) and not nl.is_pure_power:
        ell = frame.log_psi1 + np.log(aw[nz])
        dlog = nl.log_L_ell(ell) - float(nl.log_L_ell(np.array([frame.log_psi1]))[0])
        H2[nz] = h * pw[nz] * w[nz] * np.expm1(dlog)
        if nl.u_min_regular > 0:
            blended[nz] = ell < math.log(nl.u_min_regular)
    return replace(frame, H=H1 + H2, H1=H1, H2=H2, blended=blended)


def rescaled_residual(frame: RescaledFrame) -> float:
    """Residual of ``w_s = Lap w - y/2 . grad w - beta w + beta |w|^{p-1} w + H``.

    Interior nodes only (two-node margin), normalized by ``max(1, max |w_s|)``.
    """
    if frame.w_s is None or frame.H is None:
        raise ContractError("frame needs w_s and H")
    y, w, beta, p = frame.y, frame.w, frame.beta, frame.p
    dy = y[1] - y[0]
    sl = slice(2, -2)
    w_yy = (w[3:-1] - 2 * w[2:-2] + w[1:-3]) / dy**2
    lap = w_yy
    if frame.radial and frame.n > 1:
        lap = lap + (frame.n - 1) / y[sl] * frame.w_y[sl]
    r = (frame.w_s[sl] - lap + 0.5 * y[sl] * frame.w_y[sl] + beta * w[sl]
         - beta * np.abs(w[sl]) ** (p - 1) * w[sl] - frame.H[sl])
    return float(np.max(np.abs(r)) / max(1.0, float(np.max(np.abs(frame.w_s)))))


@dataclass
class HDecayReport:
    s: np.ndarray
    m: np.ndarray
    scaled: np.ndarray
    C0: float
    verdict: str  # pass | fail | inconclusive
    reason: str = ""


def check_H_decay(frames, alpha: float) -> HDecayReport:
    """Fit ``C0`` in ``max |H| <= C0 s^{-alpha} log s`` and test the trend.

    The trend passes when the last scaled value ``m s^alpha / log s`` is at
    most 1.5 times the median.  Fewer than 5 frames, or a span below 3, is
    inconclusive.
    """
    frames = sorted(frames, key=lambda f: f.s)
    if any(f.H is None for f in frames):
        raise ContractError("frames need H")
    s = np.array([f.s for f in frames])
    m = np.array([float(np.max(np.abs(f.H))) if f.H.size else 0.0 for f in frames])
    a = min(alpha, 1.0) if math.isinf(alpha) else alpha
    if len(frames) < 5 or s[-1] - s[0] < 3:
        return HDecayReport(s, m, m * 0, float("nan"), "inconclusive", "need >= 5 frames spanning >= 3")
    scaled = m * s**a / np.log(s)
    C0 = float(np.max(scaled))
    med = float(np.median(scaled))
    ok = bool(np.isfinite(C0) and scaled[-1] <= 1.5 * med + 1e-300)
    return HDecayReport(s, m, scaled, C0, "pass" if ok else "fail")


def frame_csv(frame: RescaledFrame) -> str:
    buf = io.StringIO()
    buf.write("y,w,w_y,w_s,H,rho\n")
    ws = frame.w_s if frame.w_s is not None else np.full_like(frame.w, np.nan)
    H = frame.H if frame.H is not None else np.full_like(frame.w, np.nan)
    for row in zip(frame.y, frame.w, frame.w_y, ws, H, frame.rho):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()
