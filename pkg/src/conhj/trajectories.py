"""Optimal paths of the dynamic-programming representation

    u(x, t) = sup { u0(g(0)) + int_0^t (-g'^2/4 + R(g(s), I(s))) ds : g(t) = x }.

Maximisers solve the Euler-Lagrange system ``g'' + 2 R_x(g, I(s)) = 0`` with
transversality ``g'(0) = -2 u0'(g(0))``.  Paths ending at a maximum point of
u arrive with zero velocity, so they can be integrated backward exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import HorizonMismatch, LeftDomain, NoHit, Saturated
from .model import ModelSpec, zero_level_x


@dataclass(frozen=True)
class MultiplierPath:
    """Piecewise-linear I(s) on ``[0, horizon]``, flat beyond the data."""

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.size == 0:
            raise ValueError("times and values must be equal-length and non-empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("multiplier times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, s):
        return np.interp(s, self.times, self.values)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "MultiplierPath":
        return cls(np.array([0.0, horizon]), np.array([value, value]), horizon)

    @classmethod
    def from_solution(cls, sol) -> "MultiplierPath":
        """From a LimitSolution (``I_times``/``I``) or ViscousSolution (``times``/``I``)."""
        times = getattr(sol, "I_times", None)
        if times is None:
            times = sol.times
        return cls(np.asarray(times), np.asarray(sol.I), float(sol.config.time.t_final))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    action: float = float("nan")
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.times)
        if len(self.positions) != n or len(self.velocities) != n:
            raise ValueError("times, positions and velocities must share one length")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("trajectory samples must be finite")

    @property
    def endpoint(self) -> tuple:
        return float(self.positions[-1]), float(self.times[-1])

    @property
    def initial_point(self) -> float:
        return float(self.positions[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


def action(traj: Trajectory, I_path: MultiplierPath, model: ModelSpec) -> float:
    """``u0(g(0)) + int (-g'^2/4 + R(g, I)) ds`` by the trapezoid rule."""
    t = np.asarray(traj.times)
    if t[0] < -1e-12 or t[-1] > I_path.horizon + 1e-9:
        raise HorizonMismatch(f"trajectory covers [{t[0]}, {t[-1]}], multiplier path ends at {I_path.horizon}")
    I = np.clip(I_path(t), 0.0, None)
    lag = -0.25 * np.asarray(traj.velocities) ** 2 + model.R(traj.positions, I)
    integral = float(np.trapezoid(lag, t)) if t.size > 1 else 0.0
    return float(model.u0(traj.positions[0])) + integral


def with_action(traj: Trajectory, I_path: MultiplierPath, model: ModelSpec) -> Trajectory:
    return replace(traj, action=action(traj, I_path, model))


# -- Euler-Lagrange integration -------------------------------------------------


def _rk4(y, v, t0, t1, n_steps, I_path, model, window):
    """Integrate g'' = -2 R_x(g, I(s)) from t0 to t1 (either direction).

    ``y`` and ``v`` may be arrays (independent shots).  Shots that leave the
    window become NaN.
    """
    y = np.array(y, dtype=float, ndmin=1)
    v = np.array(v, dtype=float, ndmin=1)
    h = (t1 - t0) / n_steps
    lo, hi = window
    P = np.empty((n_steps + 1, y.size))
    V = np.empty_like(P)
    P[0], V[0] = y, v

    def acc(pos, s):
        I = max(float(I_path(s)), 0.0)
        return -2.0 * model.R_x(pos, I)

    s = t0
    for k in range(n_steps):
        k1y, k1v = v, acc(y, s)
        k2y, k2v = v + 0.5 * h * k1v, acc(y + 0.5 * h * k1y, s + 0.5 * h)
        k3y, k3v = v + 0.5 * h * k2v, acc(y + 0.5 * h * k2y, s + 0.5 * h)
        k4y, k4v = v + h * k3v, acc(y + h * k3y, s + h)
        y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        out = (y < lo) | (y > hi) | ~np.isfinite(y)
        if np.any(out):
            y = np.where(out, np.nan, y)
            v = np.where(out, np.nan, v)
        s = t0 + (k + 1) * h
        P[k + 1], V[k + 1] = y, v
    return P, V


def default_steps(t: float) -> int:
    return max(10, int(math.ceil(400 * t)))


def shoot_from_initial(y: float, I_path: MultiplierPath, model: ModelSpec, t: float,
                       n_steps: int | None = None, window=None) -> Trajectory:
    """Forward shot from ``g(0) = y`` with the transversality velocity."""
    n_steps = default_steps(t) if n_steps is None else n_steps
    if n_steps < 10:
        raise ValueError("n_steps must be >= 10")
    window = window or model.domain_hint
    v0 = -2.0 * float(model.u0_prime(y))
    P, V = _rk4(y, v0, 0.0, t, n_steps, I_path, model, window)
    if not np.all(np.isfinite(P)):
        raise LeftDomain(f"shot from y={y} leaves {window} before t={t}")
    traj = Trajectory(np.linspace(0.0, t, n_steps + 1), P[:, 0], V[:, 0])
    return with_action(traj, I_path, model)


def _terminal(ys, I_path, model, t, n_steps, window):
    v0 = -2.0 * model.u0_prime(ys)
    P, _ = _rk4(ys, v0, 0.0, t, n_steps, I_path, model, window)
    return P[-1]


def optimize_endpoint(x: float, t: float, I_path: MultiplierPath, model: ModelSpec, scan=None,
                      n_steps: int | None = None, window=None, tol: float = 1e-12) -> Trajectory:
    """Best Euler-Lagrange shot reaching ``x`` at time ``t``.

    Every sign change of the terminal miss over the scan grid is refined by
    Brent's method; the hit with the largest action wins.  Near-ties (within
    1e-10) go to the smaller initial point and are flagged in ``meta``.
    """
    n_steps = default_steps(t) if n_steps is None else n_steps
    window = window or model.domain_hint
    if scan is None:
        scan = np.linspace(window[0], window[1], 801)
    scan = np.asarray(scan, dtype=float)
    miss = _terminal(scan, I_path, model, t, n_steps, window) - x

    def f(y):
        return float(_terminal(np.array([y]), I_path, model, t, n_steps, window)[0]) - x

    roots = []
    for i in range(scan.size - 1):
        a, b = miss[i], miss[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0:
            roots.append(float(scan[i]))
        elif a * b < 0:
            roots.append(brentq(f, scan[i], scan[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps))
    if np.isfinite(miss[-1]) and miss[-1] == 0:
        roots.append(float(scan[-1]))
    if not roots:
        raise NoHit(f"no scanned shot reaches x={x} at t={t}")
    cands = [shoot_from_initial(y, I_path, model, t, n_steps, window) for y in roots]
    best = max(c.action for c in cands)
    close = [c for c in cands if best - c.action <= 1e-10]
    chosen = min(close, key=lambda c: c.initial_point)
    meta = {
        "candidates": [{"y": c.initial_point, "action": c.action} for c in cands],
        "tie": len(close) > 1,
        "terminal_miss": abs(chosen.positions[-1] - x),
    }
    return replace(chosen, meta=meta)


def integrate_backward(x_end: float, t: float, I_path: MultiplierPath, model: ModelSpec,
                       n_steps: int | None = None, window=None) -> Trajectory:
    """Euler-Lagrange path with ``g(t) = x_end`` and ``g'(t) = 0``."""
    window = window or model.domain_hint
    if t <= 0:
        traj = Trajectory(np.array([0.0]), np.array([x_end]), np.array([0.0]))
        return replace(with_action(traj, I_path, model), meta={"transversality_residual": abs(float(model.u0_prime(x_end)) * 2.0)})
    n_steps = default_steps(t) if n_steps is None else n_steps
    P, V = _rk4(x_end, 0.0, t, 0.0, n_steps, I_path, model, window)
    if not np.all(np.isfinite(P)):
        raise LeftDomain(f"backward path from x={x_end} leaves {window}")
    traj = Trajectory(np.linspace(0.0, t, n_steps + 1), P[::-1, 0].copy(), V[::-1, 0].copy())
    traj = with_action(traj, I_path, model)
    resid = abs(traj.velocities[0] + 2.0 * float(model.u0_prime(traj.positions[0])))
    return replace(traj, meta={"transversality_residual": float(resid)})


def max_point_trajectory(solution, model: ModelSpec | None, t: float, n_steps: int | None = None) -> Trajectory:
    """Backward path from the maximum point of a limit solution at time t."""
    model = model or solution.model
    T = solution.config.time.t_final
    if not 0 <= t <= T + 1e-12:
        raise ValueError(f"t={t} outside the solution horizon [0, {T}]")
    I_path = MultiplierPath.from_solution(solution)
    if t <= 0:
        from .numerics import argmax_refined

        xbar = argmax_refined(solution.snapshots[0], solution.grid).x_star
    else:
        ts = np.concatenate([[0.0], solution.step_times])
        from .numerics import argmax_refined

        x0 = argmax_refined(solution.snapshots[0], solution.grid).x_star
        xs = np.concatenate([[x0], solution.x_argmax])
        xbar = float(np.interp(t, ts, xs))
    if xbar < 0:
        raise ValueError(f"maximum point {xbar} is negative")
    traj = integrate_backward(xbar, t, I_path, model, n_steps)
    return replace(traj, meta={**traj.meta, "xbar": xbar})


def transversality_residual(traj: Trajectory, model: ModelSpec) -> float:
    return float(abs(traj.velocities[0] + 2.0 * model.u0_prime(traj.positions[0])))


def truncate_plus(traj: Trajectory, I_path: MultiplierPath, model: ModelSpec) -> Trajectory:
    """Clip the path at 0 from below and zero the velocity where clipped."""
    neg = traj.positions <= 0
    pos = np.where(neg, 0.0, traj.positions)
    vel = np.where(neg, 0.0, traj.velocities)
    return with_action(Trajectory(traj.times, pos, vel), I_path, model)


@dataclass
class PathLevelReport:
    margin: float
    s_at_min: float
    tolerance: float
    passed: bool
    boundary_case: bool


def check_path_above_zero_level(traj: Trajectory, solution=None, *, I_path: MultiplierPath | None = None,
                                model: ModelSpec | None = None, dx: float | None = None,
                                window=(0.05, 0.95)) -> PathLevelReport:
    """``min (g(s) - x(s))`` over the inner part of the horizon, where x(s)
    is the zero level of R(., I(s))."""
    if solution is not None:
        I_path = I_path or MultiplierPath.from_solution(solution)
        model = model or solution.model
        dx = solution.grid.dx if dx is None else dx
    t = traj.horizon
    m = (traj.times >= window[0] * t - 1e-12) & (traj.times <= window[1] * t + 1e-12)
    s = traj.times[m]
    zl = np.empty(s.size)
    for i, si in enumerate(s):
        I = min(max(float(I_path(si)), 0.0), model.I_max)
        try:
            zl[i] = zero_level_x(model, I)
        except Saturated:
            zl[i] = np.inf
    gap = traj.positions[m] - zl
    j = int(np.argmin(gap))
    margin = float(gap[j])
    return PathLevelReport(margin, float(s[j]), float(dx), margin >= -dx, margin == 0.0)
