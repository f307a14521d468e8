"""Integrator for ``u_t = Laplacian(u) + f(u)`` up to the blow-up regime.

Space is a vertex-centred finite-volume discretization on a 1-D interval or
on the radius of an ``n``-ball (Laplacian ``u_rr + (n-1)/r u_r``).  Time
stepping is Strang splitting::

    u -> R(dt/2) -> D(dt) -> R(dt/2)

where ``R`` is the exact flow of ``u' = f(u)`` (``u -> F^{-1}(F(u) - dt)``,
evaluated pointwise from the tabulated ``F``) and ``D`` is one backward Euler
step of the diffusion with the optional source.  Both maps are monotone, so
the discrete solution keeps ``u >= 0`` and the comparison ``u <= psi_c``.

A step size ``dt = c_dt * F(u_max)`` shrinks geometrically as the solution
approaches blow-up; each step advances the similarity time by about
``c_dt``.
"""

from __future__ import annotations

import hashlib
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from .errors import ContractError, DomainError, EstimationError, NumericalError, SaturationError
from .nonlinearity import Nonlinearity
from .ode_profile import OdeProfile, build_profile

GEOMETRIES = ("interval", "radial_ball")
BOUNDARIES = ("dirichlet", "neumann", "periodic")
STATUSES = ("blew_up", "global_bound_reached", "max_steps")
MIN_INTERIOR = 33


@dataclass(frozen=True)
class SpatialGrid:
    """Nodes of a 1-D interval or of the radius ``[0, R]`` of an ``n``-ball.

    Neumann and periodic boundaries are test-only options.
    """

    geometry: str
    nodes: np.ndarray
    n: int = 1
    boundary: str = "dirichlet"
    spacing: str = "uniform"
    focus: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", x)
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"geometry must be one of {GEOMETRIES}")
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"boundary must be one of {BOUNDARIES}")
        if x.ndim != 1 or x.size - 2 < MIN_INTERIOR:
            raise DomainError(f"need at least {MIN_INTERIOR} interior nodes")
        if not np.all(np.diff(x) > 0):
            raise DomainError("nodes must be strictly increasing")
        if self.geometry == "radial_ball":
            if x[0] != 0.0:
                raise DomainError("radial grids start at r = 0")
            if self.n < 1:
                raise DomainError("dimension n must be >= 1")
            if self.boundary == "periodic":
                raise DomainError("periodic boundary needs an interval")
        elif self.n != 1:
            raise DomainError("interval geometry has n = 1")
        if self.spacing == "graded" and not _monotone_spacing(x, self.focus):
            raise DomainError("graded spacing must grow monotonically away from the focus")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def mirror_symmetric(self) -> bool:
        """True for intervals whose nodes are exactly antisymmetric about 0."""
        x = self.nodes
        return self.geometry == "interval" and x.size % 2 == 1 and np.array_equal(x, -x[::-1])

    def local_dx(self, a: float) -> float:
        """Largest spacing adjacent to the point ``a``."""
        x = self.nodes
        i = int(np.clip(np.searchsorted(x, a), 1, x.size - 1))
        h = self.h
        return float(max(h[i - 1], h[min(i, h.size - 1)]))

    def distance_to_boundary(self, a: float) -> float:
        if self.geometry == "radial_ball":
            return float(self.nodes[-1] - abs(a))
        return float(min(a - self.nodes[0], self.nodes[-1] - a))

    def contains(self, a: float) -> bool:
        lo = -self.nodes[-1] if self.geometry == "radial_ball" else self.nodes[0]
        return bool(lo < a < self.nodes[-1])

    def to_dict(self) -> dict:
        return {"geometry": self.geometry, "n": self.n, "boundary": self.boundary,
                "spacing": self.spacing, "focus": self.focus, "nodes": int(self.size)}


def _monotone_spacing(x, focus):
    h = np.diff(x)
    mid = (x[:-1] + x[1:]) / 2
    left, right = h[mid < focus], h[mid >= focus]
    tol = 1e-12 * h.max()
    return bool(np.all(np.diff(left) <= tol) and np.all(np.diff(right) >= -tol))


def uniform_interval(a: float, b: float, nodes: int, boundary: str = "dirichlet") -> SpatialGrid:
    if not b > a:
        raise DomainError("need a < b")
    N = nodes - 1
    if a == -b:
        # exact antisymmetry about 0
        x = b * (np.arange(nodes) - N / 2) / (N / 2)
    else:
        x = np.linspace(a, b, nodes)
    x[0], x[-1] = a, b
    return SpatialGrid("interval", x, 1, boundary, "uniform", (a + b) / 2)


def graded_interval(a: float, b: float, nodes: int, focus: float | None = None,
                    lam: float = 2.5, boundary: str = "dirichlet") -> SpatialGrid:
    """Sinh-graded nodes clustered at ``focus`` (default: the midpoint).

    ``x = focus + c sinh(lam (xi - xi_f))`` for uniform ``xi`` in [0, 1];
    adjacent spacings differ by a factor of about ``1 + lam/N``.
    """
    if not b > a:
        raise DomainError("need a < b")
    f = (a + b) / 2 if focus is None else float(focus)
    if not a < f < b:
        raise DomainError("focus must lie inside the interval")
    N = nodes - 1
    if lam <= 0:
        return uniform_interval(a, b, nodes, boundary)
    if a == -b and f == 0.0:
        t = (np.arange(nodes) - N / 2) / N
        x = np.sign(t) * b * np.sinh(lam * 2 * np.abs(t)) / math.sinh(lam)
    else:
        ratio = (f - a) / (b - f)
        xi_f = brentq(lambda z: math.sinh(lam * z) / math.sinh(lam * (1 - z)) - ratio, 1e-12, 1 - 1e-12)
        c = (b - f) / math.sinh(lam * (1 - xi_f))
        x = f + c * np.sinh(lam * (np.arange(nodes) / N - xi_f))
    x[0], x[-1] = a, b
    grid = SpatialGrid("interval", x, 1, boundary, "graded", f)
    if np.max(grid.h[1:] / grid.h[:-1]) > 1.05 or np.min(grid.h[1:] / grid.h[:-1]) < 1 / 1.05:
        raise DomainError("grading too strong: adjacent spacing ratio exceeds 1.05")
    return grid


def radial_grid(R: float, nodes: int, n: int, lam: float = 0.0,
                boundary: str = "dirichlet") -> SpatialGrid:
    """Radius grid on ``[0, R]``; ``lam > 0`` clusters nodes at the centre."""
    if not R > 0:
        raise DomainError("radius must be positive")
    xi = np.arange(nodes) / (nodes - 1)
    r = R * xi if lam <= 0 else R * np.sinh(lam * xi) / math.sinh(lam)
    r[0], r[-1] = 0.0, R
    return SpatialGrid("radial_ball", r, n, boundary, "graded" if lam > 0 else "uniform", 0.0)


# ---------------------------------------------------------------------------
# snapshots


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    u: np.ndarray
    u_max: float
    grad_max: float

    @classmethod
    def make(cls, t: float, u, grid: SpatialGrid) -> "FieldSnapshot":
        u = np.asarray(u, dtype=float)
        if u.shape != grid.nodes.shape:
            raise ContractError("nodal values do not match the grid")
        grad = np.abs(np.diff(u)) / grid.h
        return cls(float(t), u, float(np.max(u)), float(np.max(grad)))


def initial_snapshot(grid: SpatialGrid, u0: Callable | np.ndarray, t0: float = 0.0) -> FieldSnapshot:
    u = np.asarray(u0(grid.nodes) if callable(u0) else u0, dtype=float).copy()
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise DomainError("initial data must be finite and nonnegative")
    if grid.boundary == "dirichlet":
        u[-1] = 0.0
        if grid.geometry == "interval":
            u[0] = 0.0
    elif grid.boundary == "periodic":
        u[-1] = u[0]
    return FieldSnapshot.make(t0, u, grid)


# ---------------------------------------------------------------------------
# diffusion


@dataclass(frozen=True)
class _Operator:
    """Finite-volume weights: ``V_i du_i/dt = sum of c (u_j - u_i)``."""

    volume: np.ndarray
    cond: np.ndarray  # conductance of cell faces i+1/2


@dataclass
class Diagnostics:
    steps: int = 0
    clamped: int = 0
    min_undershoot: float = 0.0
    comparison_violations: int = 0


def _operator(grid: SpatialGrid) -> _Operator:
    x, h = grid.nodes, grid.h
    if grid.geometry == "interval":
        cond = 1.0 / h
        vol = np.empty_like(x)
        vol[1:-1] = (h[:-1] + h[1:]) / 2
        vol[0], vol[-1] = h[0] / 2, h[-1] / 2
        if grid.boundary == "periodic":
            vol[0] = vol[-1] = (h[0] + h[-1]) / 2
        return _Operator(vol, cond)
    n = grid.n
    face = (x[:-1] + x[1:]) / 2
    cond = face ** (n - 1) / h
    edges = np.concatenate([[0.0], face, [x[-1]]])
    vol = (edges[1:] ** n - edges[:-1] ** n) / n
    return _Operator(vol, cond)


def _solve_tridiagonal(lower, diag, upper, rhs, symmetric):
    """Solve ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``.

    When ``symmetric`` holds and the right-hand side is exactly mirror
    symmetric, only the half system is solved and the result mirrored, so the
    solution is mirror symmetric bit for bit.
    """
    m = diag.size
    if symmetric and m % 2 == 1 and np.array_equal(rhs, rhs[::-1]):
        k = m // 2
        ab = np.zeros((3, k + 1))
        ab[0, 1:] = upper[: k]
        ab[1] = diag[: k + 1]
        ab[2, :-1] = lower[1: k + 1]
        ab[2, k - 1] = lower[k] + upper[k]
        half = solve_banded((1, 1), ab, rhs[: k + 1], check_finite=False)
        return np.concatenate([half, half[-2::-1]])
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def diffusion_step(u: np.ndarray, grid: SpatialGrid, dt: float, source: Optional[np.ndarray] = None,
                   op: Optional[_Operator] = None) -> np.ndarray:
    """One backward Euler step of ``u_t = Laplacian(u) + source``."""
    op = _operator(grid) if op is None else op
    V, c = op.volume, op.cond
    N = u.size
    rhs_full = V * u / dt + (0.0 if source is None else V * source)
    if grid.boundary == "periodic":
        M = N - 1
        cl = c[np.arange(M) - 1]  # face i-1/2, wrapping to the last face
        cr = c[:M]
        d = V[:M] / dt + cl + cr
        A = diags([d, -cr[:-1], -cl[1:]], [0, 1, -1], shape=(M, M), format="lil")
        A[0, M - 1] = -cl[0]
        A[M - 1, 0] = -cr[M - 1]
        sol = spsolve(A.tocsr(), rhs_full[:M])
        out = np.append(sol, sol[0])
    else:
        lo = 0 if (grid.geometry == "radial_ball" or grid.boundary == "neumann") else 1
        hi = N if grid.boundary == "neumann" else N - 1
        idx = np.arange(lo, hi)
        cl = np.where(idx > 0, c[np.maximum(idx - 1, 0)], 0.0)
        cr = np.where(idx < N - 1, c[np.minimum(idx, N - 2)], 0.0)
        d = V[idx] / dt + cl + cr
        sol = _solve_tridiagonal(-cl, d, -cr, rhs_full[idx],
                                 grid.mirror_symmetric and grid.boundary != "periodic")
        out = np.zeros_like(u)
        out[lo:hi] = sol
    if not np.all(np.isfinite(out)):
        raise NumericalError("diffusion solve produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# stepping


def _as_profile(nl) -> OdeProfile:
    if isinstance(nl, OdeProfile):
        return nl
    if isinstance(nl, Nonlinearity):
        return build_profile(nl)
    raise ContractError("expected a Nonlinearity or an OdeProfile")


def _react(profile, u, dt):
    out, ok = profile.reaction_flow(u, dt)
    if not np.all(ok):
        raise SaturationError("the reaction flow blows up within the step", float("inf"))
    return out


def step(state: FieldSnapshot, grid: SpatialGrid, nl, dt: float,
         source: Optional[Callable] = None, diagnostics: Optional[Diagnostics] = None,
         _op: Optional[_Operator] = None) -> FieldSnapshot:
    """Advance one Strang step of length ``dt``.

    ``nl`` is a :class:`Nonlinearity` or a prebuilt :class:`OdeProfile`.
    ``source(x, t)``, if given, is added to the diffusion stage at the step
    midpoint.  Raises :class:`SaturationError` when some node would blow up
    inside the step.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be positive and finite, got {dt}")
    profile = _as_profile(nl)
    u = _react(profile, state.u, dt / 2)
    g = None if source is None else np.asarray(source(grid.nodes, state.t + dt / 2), dtype=float)
    u = diffusion_step(u, grid, dt, g, _op)
    u = _react(profile, u, dt / 2)
    neg = u < 0
    if np.any(neg):
        if diagnostics is not None:
            diagnostics.clamped += int(np.count_nonzero(neg))
            diagnostics.min_undershoot = min(diagnostics.min_undershoot, float(u.min()))
        u = np.where(neg, 0.0, u)
    if grid.boundary == "periodic":
        u[-1] = u[0]
    if diagnostics is not None:
        diagnostics.steps += 1
    return FieldSnapshot.make(state.t + dt, u, grid)


@dataclass(frozen=True)
class StepPolicy:
    c_dt: float = 0.05
    dt_max: float = 1e-2
    u_stop: float = 1e8
    max_steps: int = 200_000
    t_max: float = 50.0
    snapshot_ratio: float = 0.9  # keep a snapshot when F(u_max) drops by this factor

    def __post_init__(self):
        if not (0 < self.c_dt < 1):
            raise DomainError("c_dt must lie in (0, 1)")
        if not (0 < self.snapshot_ratio < 1):
            raise DomainError("snapshot_ratio must lie in (0, 1)")
        if not (self.dt_max > 0 and self.u_stop > 0 and self.t_max > 0 and self.max_steps > 0):
            raise DomainError("policy bounds must be positive")


@dataclass
class Trajectory:
    grid: SpatialGrid
    snapshots: list
    status: str
    T_est: Optional[float] = None
    T_unc: Optional[float] = None
    nl_summary: dict = field(default_factory=dict)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def u_max(self) -> np.ndarray:
        return np.array([s.u_max for s in self.snapshots])

    @property
    def grad_max(self) -> np.ndarray:
        return np.array([s.grad_max for s in self.snapshots])

    def s_max(self, a: float) -> float:
        """End of the resolved similarity window at ``a``.

        ``sqrt(T - t) >= 4 dx_local`` and no later than the last snapshot.
        """
        if self.T_est is None:
            raise EstimationError("no blow-up time estimate")
        by_grid = -2.0 * math.log(4.0 * self.grid.local_dx(a))
        gap = self.T_est - self.snapshots[-1].t
        by_data = -math.log(gap) if gap > 0 else math.inf
        return min(by_grid, by_data)

    def s_min(self) -> float:
        if self.T_est is None:
            raise EstimationError("no blow-up time estimate")
        return -math.log(self.T_est - self.snapshots[0].t)

    def theta(self, profile: OdeProfile) -> np.ndarray:
        return self.times + profile.F_fast(self.u_max)


def run_to_blowup(u0: FieldSnapshot, grid: SpatialGrid, nl, policy: StepPolicy = StepPolicy(),
                  source: Optional[Callable] = None) -> Trajectory:
    """Integrate until ``u_max >= u_stop``, ``t >= t_max`` or ``max_steps``.

    Snapshots are kept at geometrically spaced values of ``F(u_max)``.
    For Dirichlet runs without a source, each snapshot is compared against
    the spatially flat solution started from ``max u0`` (maximum principle).
    """
    profile = _as_profile(nl)
    op = _operator(grid)
    diag = Diagnostics()
    snaps = [u0]
    state = u0
    c = u0.u_max
    F0 = float(profile.F_fast(np.array([c]))[0]) if c > 0 else math.inf
    F_last = float(profile.F_fast(np.array([max(u0.u_max, 1e-300)]))[0])
    status = None
    while status is None:
        if state.u_max >= policy.u_stop:
            status = "blew_up"
            break
        if state.u_max == 0.0 or state.t >= policy.t_max:
            status = "global_bound_reached"
            break
        if diag.steps >= policy.max_steps:
            status = "max_steps"
            break
        Fu = float(profile.F_fast(np.array([max(state.u_max, profile.A)]))[0])
        dt = min(policy.c_dt * Fu, policy.dt_max, policy.t_max - state.t + 1e-300)
        try:
            state = step(state, grid, profile, dt, source, diag, op)
        except SaturationError:
            status = "blew_up"
            break
        F_now = float(profile.F_fast(np.array([state.u_max]))[0]) if state.u_max > 0 else math.inf
        if F_now <= policy.snapshot_ratio * F_last or state.u_max >= policy.u_stop:
            snaps.append(state)
            F_last = F_now
    if snaps[-1] is not state:
        snaps.append(state)
    traj = Trajectory(grid, snaps, status, nl_summary=profile.nl.summary(), diagnostics=diag)
    if source is None and c > 0 and grid.boundary == "dirichlet":
        diag.comparison_violations = comparison_violations(traj, profile, c, F0)
    if status == "blew_up":
        try:
            traj.T_est, traj.T_unc = estimate_blowup_time(traj, profile)
        except EstimationError:
            pass
    return traj


def comparison_violations(traj: Trajectory, profile: OdeProfile, c: float, F_c: float | None = None,
                          rtol: float = 1e-8) -> int:
    """Snapshots with ``u_max > psi_c(t) (1 + rtol)`` where ``psi_c(0) = c``."""
    if F_c is None:
        F_c = float(profile.F_fast(np.array([c]))[0])
    t0 = traj.snapshots[0].t
    count = 0
    for snap in traj.snapshots:
        tau = F_c - (snap.t - t0)
        if tau <= 0:
            continue
        bound = _flat_solution(profile, c, snap.t - t0)
        if snap.u_max > bound * (1 + rtol):
            count += 1
    return count


def _flat_solution(profile, c, t):
    out, ok = profile.reaction_flow(np.array([c]), t)
    return float(out[0]) if ok[0] else math.inf


def estimate_blowup_time(traj: Trajectory, profile, u_min: float = 1e3, min_snapshots: int = 8):
    """Blow-up time from ``theta = t + F(u_max)`` on late snapshots.

    Fits ``theta`` linearly against ``F(u_max)`` and returns the intercept
    together with the largest fit residual.  Presumes type-I growth at the
    rate of the flat solution.
    """
    profile = _as_profile(profile)
    if traj.status != "blew_up":
        raise EstimationError("blow-up time is only defined for blown-up runs")
    late = [s for s in traj.snapshots if s.u_max >= u_min]
    if len(late) < min_snapshots:
        raise EstimationError(f"need >= {min_snapshots} snapshots with u_max >= {u_min:g}, have {len(late)}")
    t = np.array([s.t for s in late])
    Fu = profile.F_fast(np.array([s.u_max for s in late]))
    theta = t + Fu
    # fit relative to the last theta to keep the numbers small
    ref = theta[-1]
    X = np.column_stack([np.ones_like(Fu), Fu / Fu.max()])
    coef, *_ = np.linalg.lstsq(X, theta - ref, rcond=None)
    resid = theta - ref - X @ coef
    T_est = float(ref + coef[0])
    unc = float(np.max(np.abs(resid)))
    floor = t[-1] + Fu[-1] * 1e-3
    if not T_est > t[-1]:
        T_est = float(max(floor, t[-1] + np.finfo(float).eps * abs(t[-1])))
    return T_est, unc


# ---------------------------------------------------------------------------
# export


def trajectory_csv(traj: Trajectory, profile) -> str:
    profile = _as_profile(profile)
    theta = traj.theta(profile)
    buf = io.StringIO()
    buf.write("t,u_max,grad_max,theta\n")
    for snap, th in zip(traj.snapshots, theta):
        buf.write(f"{snap.t!r},{snap.u_max!r},{snap.grad_max!r},{float(th)!r}\n")
    return buf.getvalue()


_MAGIC = b"BLWPACK\0"
_VERSION = 1
_HEADER = struct.Struct("<8sIBBBxIQQ")


def write_pack(traj: Trajectory) -> bytes:
    """Binary snapshot pack, little-endian, with a sha256 trailer.

    Header: magic, version, geometry, boundary, status, n, node count,
    snapshot count; then node coordinates; then per snapshot ``t`` followed by
    the nodal values, all as 64-bit floats.
    """
    g = traj.grid
    head = _HEADER.pack(_MAGIC, _VERSION, GEOMETRIES.index(g.geometry), BOUNDARIES.index(g.boundary),
                        STATUSES.index(traj.status), g.n, g.size, len(traj.snapshots))
    parts = [head, np.ascontiguousarray(g.nodes, dtype="<f8").tobytes()]
    for snap in traj.snapshots:
        parts.append(np.array([snap.t], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(snap.u, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def read_pack(data: bytes, spacing: str = "uniform", focus: float = 0.0) -> Trajectory:
    """Inverse of :func:`write_pack`; ``T_est`` is left for the caller."""
    if len(data) < _HEADER.size + 32:
        raise ContractError("pack is truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ContractError("pack checksum mismatch")
    magic, version, geo, bnd, status, n, size, count = _HEADER.unpack_from(body, 0)
    if magic != _MAGIC:
        raise ContractError("not a snapshot pack")
    if version != _VERSION:
        raise ContractError(f"unsupported pack version {version}")
    off = _HEADER.size
    expected = off + 8 * size + count * 8 * (size + 1)
    if len(body) != expected:
        raise ContractError("pack length does not match its header")
    nodes = np.frombuffer(body, dtype="<f8", count=size, offset=off).astype(float)
    off += 8 * size
    grid = SpatialGrid(GEOMETRIES[geo], nodes, n, BOUNDARIES[bnd], spacing, focus)
    snaps = []
    for _ in range(count):
        rec = np.frombuffer(body, dtype="<f8", count=size + 1, offset=off).astype(float)
        off += 8 * (size + 1)
        snaps.append(FieldSnapshot.make(rec[0], rec[1:], grid))
    return Trajectory(grid, snaps, STATUSES[status])
