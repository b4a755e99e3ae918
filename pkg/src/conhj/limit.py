"""Constrained limit problem ``u_t = u_x^2 + R(x, I(t))``, ``max_x u = 0``.

Two independent routes produce the pair (u, I):

* ``fd_monotone`` -- explicit monotone finite differences (Godunov upwind
  Hamiltonian by default, Lax-Friedrichs optional);
* ``lax_oleinik`` -- the one-step dynamic-programming hop
  ``max_i [u_i - (x_j - x_i)^2 / (4 dt)]`` evaluated with the linear-time
  parabola envelope.

In both routes the multiplier of step k is found by bisection on
``I -> max_j advance(u^k, I)_j``, which is decreasing because R is.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionsFailed,
    ConhjError,
    InfeasibleLow,
    MonotonicityViolated,
    PreconditionFailed,
    Saturated,
    SaturatedHigh,
)
from .model import ModelSpec, check_assumptions, default_assumption_grids, zero_level_x
from .numerics import (
    Grid1D,
    SampledFunction,
    TimeGrid,
    argmax_refined,
    bisect_monotone,
    godunov_hamiltonian,
    second_differences,
    upper_envelope_quadratic,
)

log = logging.getLogger(__name__)

ROUTES = ("fd_monotone", "lax_oleinik")
FLUXES = ("godunov", "lax_friedrichs")

# Step-size rules for the default time grids (see default_time_grids).
FD_COURANT = 0.25
LAX_STEP_COEFF = 0.5


@dataclass(frozen=True)
class LimitConfig:
    model: ModelSpec
    grid: Grid1D
    time: TimeGrid
    route: str = "fd_monotone"
    constraint_tol: float = 1e-10
    lf_dissipation: float | str = "auto"
    flux: str = "godunov"
    lax_source: str = "trapezoid"
    save_every: int = 1

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"route must be one of {ROUTES}, got {self.route!r}")
        if self.flux not in FLUXES:
            raise ValueError(f"flux must be one of {FLUXES}, got {self.flux!r}")
        if self.lax_source not in ("trapezoid", "endpoint"):
            raise ValueError(f"lax_source must be 'trapezoid' or 'endpoint', got {self.lax_source!r}")
        if not self.constraint_tol > 0:
            raise ValueError("constraint_tol must be positive")
        if self.lf_dissipation != "auto":
            a = float(self.lf_dissipation)
            if not a > 0:
                raise ValueError("lf_dissipation must be positive or 'auto'")
            if self.route == "fd_monotone" and self.time.dt * a / self.grid.dx > 1.0:
                raise MonotonicityViolated(
                    f"dt*lf_dissipation/dx = {self.time.dt * a / self.grid.dx:.3f} > 1"
                )
        if int(self.save_every) < 1:
            raise ValueError("save_every must be >= 1")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n_points": self.grid.n_points},
            "time": {"t_final": self.time.t_final, "n_steps": self.time.n_steps},
            "route": self.route,
            "constraint_tol": self.constraint_tol,
            "lf_dissipation": self.lf_dissipation,
            "flux": self.flux,
            "lax_source": self.lax_source,
            "save_every": self.save_every,
        }


@dataclass
class LimitSolution:
    config: LimitConfig
    snapshot_times: np.ndarray
    snapshots: np.ndarray  # (n_saved, n_points)
    I_times: np.ndarray  # representative time of each step's multiplier
    I: np.ndarray
    step_times: np.ndarray  # t_{k+1} for each step
    x_argmax: np.ndarray  # refined argmax of u^{k+1}
    max_u: np.ndarray
    semiconvexity_min: np.ndarray
    x_zero: np.ndarray = field(default=None)
    flags: list = field(default_factory=list)
    valid: bool = True
    error: str | None = None

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    @property
    def model(self) -> ModelSpec:
        return self.config.model

    def I_at(self, t):
        """Piecewise-linear multiplier through the recorded step values."""
        return np.interp(t, self.I_times, self.I)

    def u_at(self, t: float) -> np.ndarray:
        """Field at time t, linearly interpolated between snapshots."""
        ts = self.snapshot_times
        if t <= ts[0]:
            return self.snapshots[0]
        if t >= ts[-1]:
            return self.snapshots[-1]
        k = int(np.searchsorted(ts, t)) - 1
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1 - w) * self.snapshots[k] + w * self.snapshots[k + 1]


# -- single-step operators ----------------------------------------------------


def _lf_parts(u, dx):
    p = np.empty_like(u)
    p[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
    p[0] = (u[1] - u[0]) / dx
    p[-1] = (u[-1] - u[-2]) / dx
    lap = np.empty_like(u)
    lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
    lap[0] = lap[1]
    lap[-1] = lap[-2]
    return p, lap


def auto_dissipation(u, dx: float) -> float:
    """Running max of |u_x| times two, plus a 0.5 margin."""
    return 2.0 * float(np.max(np.abs(np.diff(u)))) / dx + 0.5


def advance_field_fd(u, I, model: ModelSpec, dt: float, lf_dissipation="auto", *, grid: Grid1D | None = None,
                     flux: str = "godunov"):
    """One explicit monotone step of ``u_t = u_x^2 + R(x, I)``.

    Accepts a SampledFunction (returns one) or a bare array with ``grid``.
    """
    sampled = isinstance(u, SampledFunction)
    if sampled:
        grid, v = u.grid, u.values
    else:
        v = np.asarray(u, dtype=float)
    dx = grid.dx
    x = grid.x
    alpha = auto_dissipation(v, dx) if lf_dissipation == "auto" else float(lf_dissipation)
    if dt * alpha / dx > 1.0 + 1e-12:
        raise MonotonicityViolated(f"dt*alpha/dx = {dt * alpha / dx:.4f} > 1")
    if flux == "godunov":
        H, speed = godunov_hamiltonian(v, dx)
        if dt * float(speed.max()) / dx > 1.0 + 1e-12:
            raise MonotonicityViolated(f"upwind weight 1 - dt*2|p|/dx < 0 (max speed {speed.max():.4f})")
        out = v + dt * (H + model.R(x, I))
    elif flux == "lax_friedrichs":
        p, lap = _lf_parts(v, dx)
        if alpha < 2.0 * float(np.max(np.abs(p))) - 1e-12:
            raise MonotonicityViolated(f"dissipation {alpha:.4f} below 2 max|u_x| = {2 * np.abs(p).max():.4f}")
        out = v + dt * (p * p + model.R(x, I)) + dt * alpha / (2 * dx) * lap
    else:
        raise ValueError(f"unknown flux {flux!r}")
    return SampledFunction(grid, out) if sampled else out


def advance_field_lax(u, I, model: ModelSpec, dt: float, *, grid: Grid1D | None = None, source: str = "trapezoid"):
    """One dynamic-programming hop followed by the reaction source.

    ``source="endpoint"`` adds ``dt * R(x_j, I)`` after the hop.
    ``source="trapezoid"`` splits the source into half steps before and after
    the hop, i.e. integrates R along the straight hop by the trapezoid rule.
    """
    sampled = isinstance(u, SampledFunction)
    if sampled:
        grid, v = u.grid, u.values
    else:
        v = np.asarray(u, dtype=float)
    x = grid.x
    r = model.R(x, I)
    kappa = 1.0 / (4.0 * dt)
    if source == "endpoint":
        out = upper_envelope_quadratic(v, x, kappa) + dt * r
    elif source == "trapezoid":
        out = upper_envelope_quadratic(v + 0.5 * dt * r, x, kappa) + 0.5 * dt * r
    else:
        raise ValueError(f"unknown source rule {source!r}")
    return SampledFunction(grid, out) if sampled else out


def enforce_constraint(u, model: ModelSpec, dt: float, *, grid: Grid1D, route: str = "fd_monotone",
                       constraint_tol: float = 1e-10, lf_dissipation="auto", flux: str = "godunov",
                       lax_source: str = "trapezoid", check_pre: bool = True):
    """Advance one step choosing I so that ``max u^{k+1} = 0``.

    Returns ``(u_next, I)``.
    """
    v = u.values if isinstance(u, SampledFunction) else np.asarray(u, dtype=float)
    if check_pre and abs(float(v.max())) > max(constraint_tol, 1e-8):
        raise PreconditionFailed(f"max u^k = {v.max():.3e} is not on the constraint")

    def advance(I):
        if route == "fd_monotone":
            return advance_field_fd(v, I, model, dt, lf_dissipation, grid=grid, flux=flux)
        return advance_field_lax(v, I, model, dt, grid=grid, source=lax_source)

    if model.separable:
        # R(x, I) = r0(x) - Q(I): the I-dependence is a uniform shift.
        base = advance(0.0)
        top = float(base.max())

        def field_at(I):
            return base - dt * float(model.Q(I))

        def g(I):
            return top - dt * float(model.Q(I))
    else:  # pragma: no cover - every registered family is separable
        field_at = advance

        def g(I):
            return float(advance(I).max())

    g0 = g(0.0)
    if g0 < -constraint_tol:
        raise InfeasibleLow(f"max advance(u, 0) = {g0:.3e} < 0: the constraint cannot be met with I >= 0")
    if abs(g0) <= constraint_tol:
        return field_at(0.0), 0.0
    gM = g(model.I_max)
    if gM > constraint_tol:
        raise SaturatedHigh(f"max advance(u, I_max) = {gM:.3e} > 0")
    slope = dt * max(model.family.q_slope, 1e-300)
    tol_I = constraint_tol / slope
    I = bisect_monotone(g, 0.0, model.I_max, tol_I)
    for _ in range(8):
        if abs(g(I)) <= constraint_tol:
            break
        tol_I /= 16.0
        I = bisect_monotone(g, 0.0, model.I_max, tol_I)
    return field_at(I), float(I)


# -- time grids -----------------------------------------------------------------


def default_time_grids(grid: Grid1D, t_final: float) -> dict:
    """Aligned default time grids for both routes and the viscous solver.

    The hop route takes N macro steps with dt = 0.5 sqrt(dx); the explicit
    routes take an integer number of substeps per macro step with
    dt <= 0.25 dx.  Returns ``{route: (TimeGrid, save_every)}`` so that
    every route saves snapshots at the same macro times.
    """
    dx = grid.dx
    n_macro = max(1, math.ceil(t_final / (LAX_STEP_COEFF * math.sqrt(dx)) - 1e-9))
    sub = max(1, math.ceil((t_final / n_macro) / (FD_COURANT * dx) - 1e-9))
    return {
        "lax_oleinik": (TimeGrid(t_final, n_macro), 1),
        "fd_monotone": (TimeGrid(t_final, n_macro * sub), sub),
        "viscous": (TimeGrid(t_final, n_macro * sub), sub),
    }


def make_limit_config(model: ModelSpec, grid: Grid1D, t_final: float = 2.0, route: str = "fd_monotone",
                      **kw) -> LimitConfig:
    tg, save = default_time_grids(grid, t_final)[route]
    kw.setdefault("save_every", save)
    return LimitConfig(model=model, grid=grid, time=tg, route=route, **kw)


def require_assumptions(model: ModelSpec):
    rep = check_assumptions(model, *default_assumption_grids(model))
    if not rep.passed:
        raise AssumptionsFailed(f"model {model.family_id} fails assumptions {rep.failing()}")
    return rep


# -- full run -------------------------------------------------------------------


def run_limit(config: LimitConfig) -> LimitSolution:
    model, grid, tg = config.model, config.grid, config.time
    require_assumptions(model)
    x = grid.x
    dx, dt = grid.dx, tg.dt
    u = model.u0(x)
    am = argmax_refined(u, grid)
    if abs(am.f_star) > 1e-8:
        raise PreconditionFailed(f"max u0 on the grid is {am.f_star:.3e}, expected 0")

    n = tg.n_steps
    I = np.empty(n)
    xa = np.empty(n)
    mx = np.empty(n)
    sc = np.empty(n)
    snaps = [u.copy()]
    snap_t = [0.0]
    valid, err = True, None
    done = 0
    for k in range(n):
        try:
            u, I[k] = enforce_constraint(
                u, model, dt, grid=grid, route=config.route, constraint_tol=config.constraint_tol,
                lf_dissipation=config.lf_dissipation, flux=config.flux, lax_source=config.lax_source,
            )
        except ConhjError as exc:
            log.error("limit run stopped at step %d: %s", k, exc)
            valid, err = False, f"{type(exc).__name__}: {exc}"
            break
        am = argmax_refined(u, grid)
        xa[k] = am.x_star
        mx[k] = float(u.max())
        sc[k] = float(second_differences(u, dx).min())
        done = k + 1
        if (k + 1) % config.save_every == 0 or k + 1 == n:
            snaps.append(u.copy())
            snap_t.append((k + 1) * dt)

    steps = np.arange(1, done + 1) * dt
    if config.route == "lax_oleinik" and config.lax_source == "trapezoid":
        I_times = (np.arange(done) + 0.5) * dt
    else:
        I_times = np.arange(done) * dt
    sol = LimitSolution(
        config=config,
        snapshot_times=np.array(snap_t),
        snapshots=np.array(snaps),
        I_times=I_times,
        I=I[:done].copy(),
        step_times=steps,
        x_argmax=xa[:done].copy(),
        max_u=mx[:done].copy(),
        semiconvexity_min=sc[:done].copy(),
        valid=valid,
        error=err,
    )
    sol.x_zero = _zero_levels(sol)
    lim = 10.0 * dx
    for t, xa_, xz in zip(sol.step_times, sol.x_argmax, sol.x_zero):
        if np.isfinite(xz) and abs(xa_ - xz) > lim:
            sol.flags.append({"t": float(t), "x_argmax": float(xa_), "x_zero_level": float(xz)})
    return sol


def _zero_levels(sol: LimitSolution) -> np.ndarray:
    out = np.empty(sol.step_times.size)
    if sol.I.size == 0:
        return out
    Is = sol.I_at(sol.step_times)
    for i, I in enumerate(Is):
        try:
            out[i] = zero_level_x(sol.model, min(max(float(I), 0.0), sol.model.I_max))
        except Saturated:
            out[i] = np.nan
    return out


def zero_reaction_residual(solution: LimitSolution, model: ModelSpec | None = None):
    """``|R(xbar(t), I(t))|`` at every step, including ``t = 0``.

    Returns ``(times, residuals)``; the multiplier at each time is read from
    the piecewise-linear I path.
    """
    model = model or solution.model
    xbar0 = argmax_refined(solution.snapshots[0], solution.grid).x_star
    t = np.concatenate([[0.0], solution.step_times])
    xs = np.concatenate([[xbar0], solution.x_argmax])
    Is = np.clip(solution.I_at(t), 0.0, None)
    return t, np.abs(model.R(xs, Is))
