"""Vanishing-viscosity approximation in Hopf-Cole variables.

The population density ``n = exp(u/eps)`` of the nonlocal Lotka-Volterra
model is evolved through ``u`` itself,

    u_t = eps u_xx + u_x^2 + R(x, I_eps(t)),   I_eps = int psi exp(u/eps) dx,

so that nothing underflows when eps is small.  Each step splits into an
explicit upwind update of the Hamiltonian and the source, followed by an
implicit (backward Euler) diffusion solve with reflecting ends.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConhjError, CflViolation, OverflowDetected
from .limit import default_time_grids, require_assumptions
from .model import ModelSpec
from .numerics import (
    Grid1D,
    SampledFunction,
    TimeGrid,
    argmax_refined,
    godunov_hamiltonian,
    second_differences,
    solve_tridiagonal,
)

log = logging.getLogger(__name__)

# exp() overflows just above 709.78.
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class ViscousConfig:
    model: ModelSpec
    grid: Grid1D
    time: TimeGrid
    epsilon: float
    cfl: float = 0.9
    picard_iters: int = 2
    save_every: int = 1
    concentration_width: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.picard_iters < 0:
            raise ValueError("picard_iters must be >= 0")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n_points": self.grid.n_points},
            "time": {"t_final": self.time.t_final, "n_steps": self.time.n_steps},
            "epsilon": self.epsilon,
            "cfl": self.cfl,
            "picard_iters": self.picard_iters,
            "save_every": self.save_every,
        }


@dataclass
class ViscousSolution:
    config: ViscousConfig
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    times: np.ndarray  # t_0 .. t_N
    I: np.ndarray  # I_eps(t_k) computed from u at t_k
    x_max: np.ndarray  # refined argmax of u at t_k
    u_max: np.ndarray
    concentration: np.ndarray  # mass fraction within the configured width of x_max
    semiconvexity_min: np.ndarray
    valid: bool = True
    error: str | None = None
    notes: list = field(default_factory=list)

    @property
    def epsilon(self) -> float:
        return self.config.epsilon


def hopf_cole_density(u, epsilon: float):
    """Pointwise ``exp(u / eps)``; refuses exponents that would overflow."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    v = u.values if isinstance(u, SampledFunction) else np.asarray(u, dtype=float)
    z = v / epsilon
    if np.any(z > _EXP_LIMIT):
        raise OverflowDetected(f"u/eps reaches {z.max():.3g}; exp would overflow")
    n = np.exp(z)
    return SampledFunction(u.grid, n) if isinstance(u, SampledFunction) else n


def compute_I_eps(u, epsilon: float, model: ModelSpec, grid: Grid1D | None = None) -> float:
    if isinstance(u, SampledFunction):
        grid, v = u.grid, u.values
    else:
        v = np.asarray(u, dtype=float)
    n = hopf_cole_density(v, epsilon)
    return float(np.trapezoid(model.psi(grid.x) * n, dx=grid.dx))


class _Diffusion:
    """Backward-Euler operator ``(1 - eps dt D_xx)`` with reflecting ends."""

    def __init__(self, n: int, r: float):
        self.lower = np.full(n, -r)
        self.upper = np.full(n, -r)
        self.diag = np.full(n, 1.0 + 2.0 * r)
        # Mirror ghost nodes: u_{-1} = u_1, u_{N} = u_{N-2}.
        self.upper[0] = -2.0 * r
        self.lower[-1] = -2.0 * r

    def solve(self, rhs):
        return solve_tridiagonal(self.lower, self.diag, self.upper, rhs)


def step_viscous(u, config: ViscousConfig, *, epsilon: float | None = None, reaction: bool = True,
                 gradient: bool = True, diffusion: bool = True, I_fixed: float | None = None,
                 _op: _Diffusion | None = None):
    """Advance ``u`` by one time step.

    Returns ``(u_next, I)`` where ``I`` is ``I_eps`` of the incoming state
    (zero when the reaction is switched off).  ``epsilon`` overrides the
    configured value; ``epsilon=0`` drops the diffusion solve.  ``I_fixed``
    freezes the reaction at that multiplier instead of coupling it to ``u``.
    """
    eps = config.epsilon if epsilon is None else epsilon
    grid, model = config.grid, config.model
    dx, dt = grid.dx, config.time.dt
    v = u.values if isinstance(u, SampledFunction) else np.asarray(u, dtype=float)
    x = grid.x

    if gradient:
        H, speed = godunov_hamiltonian(v, dx)
        if dt * float(speed.max()) > config.cfl * dx:
            raise CflViolation(
                f"dt*2max|u_x|/dx = {dt * speed.max() / dx:.3f} exceeds cfl {config.cfl}"
            )
    else:
        H = 0.0

    use_diff = diffusion and eps > 0
    if use_diff and _op is None:
        _op = _Diffusion(v.size, eps * dt / dx**2)

    def advance(I):
        rhs = v + dt * (H + (model.R(x, I) if reaction else 0.0))
        return _op.solve(rhs) if use_diff else rhs

    if not reaction:
        return advance(0.0), 0.0
    if I_fixed is not None:
        return advance(I_fixed), float(I_fixed)
    I0 = compute_I_eps(v, eps, model, grid)
    I_eff = I0
    new = advance(I_eff)
    for _ in range(config.picard_iters):
        I_eff = 0.5 * (I0 + compute_I_eps(new, eps, model, grid))
        new = advance(I_eff)
    return new, I0


def _mass_fraction(u, x, psi, eps, center, width, dx):
    w = psi * np.exp((u - u.max()) / eps)
    total = np.trapezoid(w, dx=dx)
    near = np.trapezoid(w * (np.abs(x - center) <= width), dx=dx)
    return float(near / total) if total > 0 else 0.0


def run_viscous(config: ViscousConfig) -> ViscousSolution:
    model, grid, tg = config.model, config.grid, config.time
    require_assumptions(model)
    x, dx, dt = grid.x, grid.dx, tg.dt
    psi = model.psi(x)
    eps = config.epsilon
    op = _Diffusion(grid.n_points, eps * dt / dx**2)
    u = model.u0(x)
    n = tg.n_steps
    I = np.empty(n + 1)
    xm = np.empty(n + 1)
    um = np.empty(n + 1)
    conc = np.empty(n + 1)
    sc = np.empty(n + 1)
    snaps, snap_t = [u.copy()], [0.0]
    valid, err = True, None

    def record(k, v, Ik):
        am = argmax_refined(v, grid)
        I[k] = Ik
        xm[k] = am.x_star
        um[k] = float(v.max())
        conc[k] = _mass_fraction(v, x, psi, eps, am.x_star, config.concentration_width, dx)
        sc[k] = float(second_differences(v, dx).min())

    done = 0
    for k in range(n):
        try:
            new, Ik = step_viscous(u, config, _op=op)
        except ConhjError as exc:
            log.error("viscous run (eps=%g) stopped at step %d: %s", eps, k, exc)
            valid, err = False, f"{type(exc).__name__}: {exc}"
            break
        record(k, u, Ik)
        u = new
        done = k + 1
        if (k + 1) % config.save_every == 0 or k + 1 == n:
            snaps.append(u.copy())
            snap_t.append((k + 1) * dt)
    if valid:
        try:
            record(n, u, compute_I_eps(u, eps, model, grid))
            m = n + 1
        except ConhjError as exc:
            valid, err, m = False, f"{type(exc).__name__}: {exc}", n
    else:
        m = done
    return ViscousSolution(
        config=config,
        snapshot_times=np.array(snap_t),
        snapshots=np.array(snaps),
        times=np.arange(m) * dt,
        I=I[:m].copy(),
        x_max=xm[:m].copy(),
        u_max=um[:m].copy(),
        concentration=conc[:m].copy(),
        semiconvexity_min=sc[:m].copy(),
        valid=valid,
        error=err,
    )


def make_viscous_config(model: ModelSpec, grid: Grid1D, epsilon: float, t_final: float = 2.0, **kw) -> ViscousConfig:
    tg, save = default_time_grids(grid, t_final)["viscous"]
    kw.setdefault("save_every", save)
    return ViscousConfig(model=model, grid=grid, time=tg, epsilon=epsilon, **kw)
