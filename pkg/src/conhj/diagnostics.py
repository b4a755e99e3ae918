"""Named consistency checks over a bundle of limit and viscous runs.

Every tolerance is a multiple of the grid spacing unless it guards a
floating-point identity.  The multiples live in :class:`Tolerances` so a
report can echo exactly what it was judged against.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputMismatch
from .limit import LimitSolution, default_time_grids
from .model import ModelSpec, semiconvexity_constant
from .numerics import Grid1D, argmax_refined
from .trajectories import (
    MultiplierPath,
    Trajectory,
    action,
    check_path_above_zero_level,
    max_point_trajectory,
    optimize_endpoint,
    truncate_plus,
)
from .viscous import ViscousSolution, make_viscous_config, run_viscous

log = logging.getLogger(__name__)

CHECKS = (
    "constraint_max",
    "zero_reaction",
    "multiplier_bounds",
    "multiplier_start",
    "multiplier_monotone",
    "maxpoint_consistency",
    "semiconvexity",
    "derivative_at_max",
    "cross_route_uniqueness",
    "q_integral_identity",
    "variational_agreement",
    "path_above_zero_level",
    "eps_convergence",
    "dirac_concentration",
    "rho_consistency",
)

PASS, FAIL, NA = "pass", "fail", "not-applicable"


@dataclass(frozen=True)
class Tolerances:
    constraint_abs: float = 1e-10
    burn_in: float = 0.1
    zero_reaction_dx: float = 10.0
    maxpoint_dx: float = 10.0
    I_first: float = 0.05
    I_bound_slack: float = 1e-8
    I_monotone: float = 1e-6
    semiconvexity_slack: float = 0.1
    derivative_dx: float = 10.0
    transversality: float = 0.05
    cross_I_dx: float = 5.0
    cross_u_dx: float = 20.0
    q_window_dx: float = 10.0
    variational_dx: float = 20.0
    path_dx: float = 1.0
    eps_ratio: float = 0.9
    concentration: float = 0.95
    concentration_eps: float = 0.025
    concentration_width: float = 0.5
    rho_factor: float = 2.0
    truncation_paths: int = 100


@dataclass
class CheckEntry:
    name: str
    verdict: str
    measured: dict
    tolerance: dict
    provenance: list
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL


@dataclass
class DiagnosticsReport:
    entries: dict
    tolerances: Tolerances

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def failing(self) -> list:
        return [n for n, e in self.entries.items() if e.verdict == FAIL]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerances": asdict(self.tolerances),
            "entries": {n: asdict(e) for n, e in self.entries.items()},
        }

    def rows(self):
        for n, e in self.entries.items():
            for key, value in e.measured.items():
                yield n, e.verdict, key, value, e.tolerance.get(key, float("nan"))


def label(run) -> str:
    g = run.config.grid
    if isinstance(run, LimitSolution):
        return f"limit:{run.config.route}:n={g.n_points}"
    return f"viscous:eps={run.config.epsilon:g}:n={g.n_points}"


def _entry(name, ok, measured, tolerance, runs, **detail):
    measured = {k: float(v) for k, v in measured.items()}
    return CheckEntry(name, PASS if ok else FAIL, measured, tolerance, [label(r) for r in runs], detail)


def _na(name, reason, runs=()):
    return CheckEntry(name, NA, {}, {}, [label(r) for r in runs], {"reason": reason})


def _I_clip(I):
    return np.clip(np.asarray(I, dtype=float), 0.0, None)


# -- single-run checks ------------------------------------------------------------


def _constraint_max(limits, tol):
    worst = max(float(np.max(np.abs(r.max_u))) for r in limits)
    return _entry("constraint_max", worst <= tol.constraint_abs, {"max_abs_max_u": worst},
                  {"max_abs_max_u": tol.constraint_abs}, limits)


def _zero_reaction(limits, model, tol):
    worst, tols = 0.0, []
    for r in limits:
        m = r.step_times >= tol.burn_in
        res = np.abs(model.R(r.x_argmax[m], _I_clip(r.I_at(r.step_times[m]))))
        worst = max(worst, float(res.max()) if res.size else 0.0)
        tols.append(tol.zero_reaction_dx * r.grid.dx)
    lim = min(tols)
    return _entry("zero_reaction", worst <= lim, {"sup_abs_R_at_max": worst}, {"sup_abs_R_at_max": lim}, limits)


def _multiplier_bounds(limits, model, tol):
    lo = min(float(r.I.min()) for r in limits)
    over = max(float(r.I.max()) for r in limits) - model.I_max
    ok = lo >= 0 and over <= tol.I_bound_slack
    return _entry("multiplier_bounds", ok, {"min_I": lo, "max_I_minus_I_max": over},
                  {"min_I": 0.0, "max_I_minus_I_max": tol.I_bound_slack}, limits)


def _multiplier_start(limits, tol):
    first = max(float(r.I[0]) for r in limits)
    return _entry("multiplier_start", first <= tol.I_first, {"I_first_step": first},
                  {"I_first_step": tol.I_first}, limits)


def _multiplier_monotone(limits, tol):
    drop = min(float(np.diff(r.I).min()) if r.I.size > 1 else 0.0 for r in limits)
    return _entry("multiplier_monotone", drop >= -tol.I_monotone, {"min_step_increment": drop},
                  {"min_step_increment": -tol.I_monotone}, limits)


def _maxpoint_consistency(limits, tol):
    worst, lim = 0.0, math.inf
    for r in limits:
        m = (r.step_times >= tol.burn_in) & np.isfinite(r.x_zero)
        if np.any(m):
            worst = max(worst, float(np.max(np.abs(r.x_argmax[m] - r.x_zero[m]))))
        lim = min(lim, tol.maxpoint_dx * r.grid.dx)
    return _entry("maxpoint_consistency", worst <= lim, {"sup_argmax_minus_zero_level": worst},
                  {"sup_argmax_minus_zero_level": lim}, limits)


def _semiconvexity(limits, viscous, model, tol):
    worst = math.inf
    where = None
    for r in limits:
        C = np.array([semiconvexity_constant(model, t) for t in r.step_times])
        margin = r.semiconvexity_min + C
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, where = float(margin[k]), (label(r), float(r.step_times[k]))
    for v in viscous:
        C = np.array([semiconvexity_constant(model, t) for t in v.times])
        margin = v.semiconvexity_min + C
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, where = float(margin[k]), (label(v), float(v.times[k]))
    return _entry("semiconvexity", worst >= -tol.semiconvexity_slack,
                  {"min_second_difference_plus_bound": worst},
                  {"min_second_difference_plus_bound": -tol.semiconvexity_slack},
                  list(limits) + list(viscous), worst_at=where)


def centered_slope_at_max(u, grid: Grid1D) -> tuple:
    am = argmax_refined(u, grid)
    du = np.gradient(u, grid.dx)
    return am.x_star, float(np.interp(am.x_star, grid.x, du))


def _derivative_at_max(primary, limits, tol):
    worst, lim = 0.0, math.inf
    for r in limits:
        for t, u in zip(r.snapshot_times[1:], r.snapshots[1:]):
            worst = max(worst, abs(centered_slope_at_max(u, r.grid)[1]))
        lim = min(lim, tol.derivative_dx * r.grid.dx)
    t_tr = min(1.0, primary.config.time.t_final)
    traj = max_point_trajectory(primary, None, t_tr)
    resid = traj.meta["transversality_residual"]
    ok = worst <= lim and resid <= tol.transversality
    return _entry("derivative_at_max", ok,
                  {"sup_abs_slope_at_max": worst, "transversality_residual": resid},
                  {"sup_abs_slope_at_max": lim, "transversality_residual": tol.transversality},
                  limits, transversality_time=t_tr, xbar=traj.meta["xbar"])


# -- cross-route checks ---------------------------------------------------------


def route_pair(limits):
    """First fd/lax pair sharing one grid, or None."""
    for a in limits:
        for b in limits:
            if (a.config.route == "fd_monotone" and b.config.route == "lax_oleinik"
                    and a.grid == b.grid):
                return a, b
    return None


def route_gaps(a: LimitSolution, b: LimitSolution) -> dict:
    """sup |I_a - I_b| at the labels of the sparser run, and sup |u_a - u_b|
    at the snapshot times of the sparser run."""
    sparse, dense = (a, b) if a.I.size <= b.I.size else (b, a)
    gI = float(np.max(np.abs(sparse.I - dense.I_at(sparse.I_times))))
    sparse, dense = (a, b) if a.snapshot_times.size <= b.snapshot_times.size else (b, a)
    gu = max(float(np.max(np.abs(u - dense.u_at(t)))) for t, u in zip(sparse.snapshot_times, sparse.snapshots))
    return {"sup_I_gap": gI, "sup_u_gap": gu}


def _cross_route(pair, tol):
    if pair is None:
        return _na("cross_route_uniqueness", "needs fd_monotone and lax_oleinik runs on one grid")
    a, b = pair
    gaps = route_gaps(a, b)
    dx = a.grid.dx
    lim = {"sup_I_gap": tol.cross_I_dx * dx, "sup_u_gap": tol.cross_u_dx * dx}
    ok = gaps["sup_I_gap"] <= lim["sup_I_gap"] and gaps["sup_u_gap"] <= lim["sup_u_gap"]
    return _entry("cross_route_uniqueness", ok, gaps, lim, [a, b])


def q_window_integrals(a: LimitSolution, b: LimitSolution, model: ModelSpec, n_time: int = 801, n_ends: int = 41):
    """Worst ``|int_w (Q(I_a) - Q(I_b))| / |w|`` over sliding windows ``w``.

    Returns ``(full_horizon_value, worst_ratio, worst_window)``.
    """
    T = a.config.time.t_final
    s = np.linspace(0.0, T, n_time)
    dq = model.Q(_I_clip(a.I_at(s))) - model.Q(_I_clip(b.I_at(s)))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dq[1:] + dq[:-1]) * np.diff(s))])
    idx = np.linspace(0, n_time - 1, n_ends).round().astype(int)
    te, ce = s[idx], cum[idx]
    i, j = np.triu_indices(n_ends, k=1)
    ratio = np.abs(ce[j] - ce[i]) / (te[j] - te[i])
    k = int(np.argmax(ratio))
    return float(cum[-1]), float(ratio[k]), (float(te[i[k]]), float(te[j[k]]))


def _q_integral(pair, model, tol):
    if pair is None:
        return _na("q_integral_identity", "needs fd_monotone and lax_oleinik runs on one grid")
    a, b = pair
    full, worst, window = q_window_integrals(a, b, model)
    T = a.config.time.t_final
    lim = tol.q_window_dx * a.grid.dx
    ok = abs(full) <= lim * T and worst <= lim
    return _entry("q_integral_identity", ok,
                  {"full_horizon_integral": abs(full), "worst_window_rate": worst},
                  {"full_horizon_integral": lim * T, "worst_window_rate": lim},
                  [a, b], worst_window=window)


# -- trajectory checks ------------------------------------------------------------


def sample_points(T: float):
    """Ten (x, t) pairs at t = T/4, T/2, T (0.5, 1, 2 for T = 2)."""
    xs = (-1.0, 0.3, 1.0, 2.5)
    pts = [(x, 0.25 * T) for x in xs]
    pts += [(x, 0.5 * T) for x in xs[:3]]
    pts += [(x, T) for x in xs[1:]]
    return pts


def _variational(primary, model, tol):
    I_path = MultiplierPath.from_solution(primary)
    g = primary.grid
    worst, rows = 0.0, []
    for x, t in sample_points(primary.config.time.t_final):
        traj = optimize_endpoint(x, t, I_path, model)
        ug = float(np.interp(x, g.x, primary.u_at(t)))
        d = abs(traj.action - ug)
        rows.append({"x": x, "t": t, "action": traj.action, "grid_u": ug, "y": traj.initial_point})
        worst = max(worst, d)
    lim = tol.variational_dx * g.dx
    return _entry("variational_agreement", worst <= lim, {"sup_action_minus_grid_u": worst},
                  {"sup_action_minus_grid_u": lim}, [primary], samples=rows)


def random_paths(n: int, t: float, rng: np.random.Generator, n_time: int = 201):
    """Smooth random paths dipping on both sides of the origin."""
    s = np.linspace(0.0, t, n_time)
    out = []
    for _ in range(n):
        c0, c1 = rng.uniform(-2.0, 3.0), rng.uniform(-1.5, 1.5)
        k = np.arange(1, 5)
        amp = rng.normal(0.0, 1.0, k.size) / k
        w = k * np.pi / t
        pos = c0 + c1 * s + np.sin(np.outer(s, w)) @ amp
        vel = c1 + np.cos(np.outer(s, w)) @ (amp * w)
        out.append(Trajectory(s, pos, vel))
    return out


def truncation_gains(I_path: MultiplierPath, model: ModelSpec, n: int, t: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    gains = []
    for p in random_paths(n, t, rng):
        gains.append(truncate_plus(p, I_path, model).action - action(p, I_path, model))
    return np.array(gains)


def _path_above(primary, model, tol):
    T = primary.config.time.t_final
    margins, rows = [], []
    for t in (0.25 * T, 0.5 * T, T):
        traj = max_point_trajectory(primary, model, t)
        rep = check_path_above_zero_level(traj, primary)
        margins.append(rep.margin)
        rows.append({"t": t, "margin": rep.margin, "s_at_min": rep.s_at_min, "boundary_case": rep.boundary_case})
    gains = truncation_gains(MultiplierPath.from_solution(primary), model, tol.truncation_paths, T)
    m, gmin = min(margins), float(gains.min())
    lim = -tol.path_dx * primary.grid.dx
    ok = m >= lim and gmin >= -1e-12
    return _entry("path_above_zero_level", ok, {"min_margin": m, "min_truncation_gain": gmin},
                  {"min_margin": lim, "min_truncation_gain": -1e-12}, [primary], paths=rows)


# -- viscous checks ---------------------------------------------------------------


def eps_errors(viscous, reference: LimitSolution) -> np.ndarray:
    return np.array([float(np.max(np.abs(v.I - reference.I_at(v.times)))) for v in viscous])


def field_errors(viscous, reference: LimitSolution) -> np.ndarray:
    out = []
    for v in viscous:
        out.append(max(float(np.max(np.abs(u - reference.u_at(t))))
                       for t, u in zip(v.snapshot_times, v.snapshots)))
    return np.array(out)


def _by_eps(viscous):
    return sorted(viscous, key=lambda v: -v.config.epsilon)


def _eps_convergence(viscous, primary, tol):
    if len(viscous) < 2:
        return _na("eps_convergence", "needs at least two viscous runs", viscous)
    vs = _by_eps(viscous)
    e = eps_errors(vs, primary)
    ratios = e[1:] / e[:-1]
    ok = bool(np.all(np.diff(e) < 0) and np.all(ratios <= tol.eps_ratio))
    return _entry("eps_convergence", ok, {"max_ratio": float(ratios.max())}, {"max_ratio": tol.eps_ratio},
                  vs + [primary], eps=[v.config.epsilon for v in vs], e=e.tolist())


def late_concentration(v: ViscousSolution, t_from: float) -> float:
    m = v.times >= t_from - 1e-12
    return float(v.concentration[m].min())


def _dirac(viscous, tol):
    """Mass near the maximum point grows as eps falls; once eps reaches the
    configured scale the mass fraction must clear the threshold."""
    if not viscous:
        return _na("dirac_concentration", "no viscous runs")
    vs = _by_eps(viscous)
    T = vs[0].config.time.t_final
    c = np.array([late_concentration(v, 0.25 * T) for v in vs])
    trend = float(np.min(np.diff(c))) if c.size > 1 else 0.0
    small = vs[-1].config.epsilon
    measured = {"trend_min_increment": trend}
    limits = {"trend_min_increment": -1e-3}
    ok = trend >= -1e-3
    if small <= tol.concentration_eps + 1e-15:
        measured["mass_fraction_smallest_eps"] = c[-1]
        limits["mass_fraction_smallest_eps"] = tol.concentration
        ok = ok and c[-1] >= tol.concentration
    return _entry("dirac_concentration", ok, measured, limits, vs,
                  eps=[v.config.epsilon for v in vs], mass_fraction=c.tolist(), width=tol.concentration_width)


def _rho(viscous, primary, model, tol):
    if not viscous:
        return _na("rho_consistency", "no viscous runs")
    lo, hi = model.params["psi_lo"], model.params["psi_hi"]
    worst_excess, rows = -math.inf, []
    for v in _by_eps(viscous):
        e = float(eps_errors([v], primary)[0])
        m = (v.x_max >= lo) & (v.x_max <= hi)
        rho = v.I[m] / model.psi(v.x_max[m])
        d = float(np.max(np.abs(rho - primary.I_at(v.times[m])))) if np.any(m) else 0.0
        rows.append({"eps": v.config.epsilon, "sup_rho_gap": d, "e": e})
        worst_excess = max(worst_excess, d - tol.rho_factor * e)
    return _entry("rho_consistency", worst_excess <= 0, {"max_gap_minus_budget": worst_excess},
                  {"max_gap_minus_budget": 0.0}, list(viscous) + [primary], per_eps=rows)


# -- suite ------------------------------------------------------------------------


def _check_inputs(limits, viscous, model):
    if not limits:
        raise InputMismatch("at least one limit run is required")
    ref = model.to_dict()
    T = limits[0].config.time.t_final
    for r in list(limits) + list(viscous):
        if r.config.model.to_dict() != ref:
            raise InputMismatch(f"{label(r)} uses a different model")
        if abs(r.config.time.t_final - T) > 1e-12:
            raise InputMismatch(f"{label(r)} has horizon {r.config.time.t_final}, expected {T}")


def primary_limit(limits):
    for r in limits:
        if r.config.route == "fd_monotone":
            return r
    return limits[0]


def diag_suite(viscous, limits, model: ModelSpec, tolerances: Tolerances | None = None) -> DiagnosticsReport:
    tol = tolerances or Tolerances()
    viscous, limits = list(viscous), list(limits)
    _check_inputs(limits, viscous, model)
    primary = primary_limit(limits)
    pair = route_pair(limits)
    e = {
        "constraint_max": _constraint_max(limits, tol),
        "zero_reaction": _zero_reaction(limits, model, tol),
        "multiplier_bounds": _multiplier_bounds(limits, model, tol),
        "multiplier_start": _multiplier_start(limits, tol),
        "multiplier_monotone": _multiplier_monotone(limits, tol),
        "maxpoint_consistency": _maxpoint_consistency(limits, tol),
        "semiconvexity": _semiconvexity(limits, viscous, model, tol),
        "derivative_at_max": _derivative_at_max(primary, limits, tol),
        "cross_route_uniqueness": _cross_route(pair, tol),
        "q_integral_identity": _q_integral(pair, model, tol),
        "variational_agreement": _variational(primary, model, tol),
        "path_above_zero_level": _path_above(primary, model, tol),
        "eps_convergence": _eps_convergence(viscous, primary, tol),
        "dirac_concentration": _dirac(viscous, tol),
        "rho_consistency": _rho(viscous, primary, model, tol),
    }
    for name, entry in e.items():
        if entry.verdict == FAIL:
            log.warning("check %s failed: %s vs %s", name, entry.measured, entry.tolerance)
    return DiagnosticsReport({n: e[n] for n in CHECKS}, tol)


# -- epsilon sweep ----------------------------------------------------------------


@dataclass
class SweepTable:
    eps: list
    e_I: list
    e_u: list
    ratio: list  # e_I ratio to the previous eps; nan for the first
    runs: list = field(default_factory=list, repr=False)

    @property
    def trend_ok(self) -> bool:
        e = np.array(self.e_I)
        return bool(np.all(np.diff(e) < 0) and np.all(np.array(self.ratio[1:]) <= 0.9))

    def rows(self):
        return zip(self.eps, self.e_I, self.e_u, self.ratio)


def _viscous_job(args):
    model, grid, eps, t_final = args
    return run_viscous(make_viscous_config(model, grid, eps, t_final))


def run_viscous_ladder(model, grid, eps_list, t_final=2.0, jobs: int = 1):
    args = [(model, grid, e, t_final) for e in eps_list]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as ex:
            return list(ex.map(_viscous_job, args))
    return [_viscous_job(a) for a in args]


def sweep_eps(model: ModelSpec, grid: Grid1D, eps_list, reference: LimitSolution, *, t_final: float | None = None,
              jobs: int = 1, runs=None) -> SweepTable:
    """Viscous runs along a decreasing eps ladder against a limit solution."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ValueError("an eps sweep needs at least two values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps values must be strictly decreasing, got {eps_list}")
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps values must be positive")
    T = reference.config.time.t_final if t_final is None else t_final
    runs = runs if runs is not None else run_viscous_ladder(model, grid, eps_list, T, jobs)
    eI = eps_errors(runs, reference)
    eu = field_errors(runs, reference)
    ratio = [float("nan")] + (eI[1:] / eI[:-1]).tolist()
    return SweepTable(eps_list, eI.tolist(), eu.tolist(), ratio, runs)


__all__ = [
    "CHECKS",
    "CheckEntry",
    "DiagnosticsReport",
    "SweepTable",
    "Tolerances",
    "default_time_grids",
    "diag_suite",
    "q_window_integrals",
    "route_gaps",
    "sweep_eps",
    "truncation_gains",
]
