"""Command-line entry point.

Exit status: 0 success, 1 execution or configuration error, 2 a check failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import plotting, store
from .config import RunConfig, assemble, parse_value
from .diagnostics import (
    Tolerances,
    diag_suite,
    route_gaps,
    run_viscous_ladder,
    sweep_eps,
)
from .errors import ConfigInvalid, ConhjError, Saturated
from .limit import make_limit_config, run_limit
from .model import check_assumptions, default_assumption_grids, zero_level_x
from .trajectories import (
    MultiplierPath,
    check_path_above_zero_level,
    max_point_trajectory,
    optimize_endpoint,
)
from .viscous import make_viscous_config, run_viscous

log = logging.getLogger("conhj")

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for failed checks.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), parse_value(v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file or a previous run's manifest.json")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--model", dest="model.family", help="model family")
    common.add_argument("--param", action="append", type=_key_value, default=[], metavar="NAME=VALUE",
                        help="model parameter override (repeatable)")
    common.add_argument("--x-min", dest="grid.x_min", type=float)
    common.add_argument("--x-max", dest="grid.x_max", type=float)
    common.add_argument("--n-points", dest="grid.n_points", type=int)
    common.add_argument("--t-final", dest="time.t_final", type=float)
    common.add_argument("--jobs", dest="jobs", type=int, help="worker processes for independent runs")
    common.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    common.add_argument("--set", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                        help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="conhj", description="Constrained Hamilton-Jacobi solvers and diagnostics.")
    sub = p.add_subparsers(dest="mode", required=True)
    sub.add_parser("check-model", parents=[common], help="sample the model assumptions")
    lim = sub.add_parser("limit", parents=[common], help="solve the constrained limit problem")
    lim.add_argument("--route", dest="limit.route")
    lim.add_argument("--flux", dest="limit.flux")
    lim.add_argument("--lax-source", dest="limit.lax_source")
    vis = sub.add_parser("viscous", parents=[common], help="solve the viscous problem for one eps")
    vis.add_argument("--eps", dest="viscous.epsilon", type=float)
    tr = sub.add_parser("traj", parents=[common], help="optimal or maximum-point trajectory")
    tr.add_argument("--x", dest="traj.x", type=float, help="endpoint; omit for the maximum-point path")
    tr.add_argument("--t", dest="traj.t", type=float)
    tr.add_argument("--from", dest="traj.from", help="directory of a saved limit run")
    ver = sub.add_parser("verify", parents=[common], help="run the full diagnostics suite")
    ver.add_argument("--eps-list", dest="verify.eps", type=_floats)
    sw = sub.add_parser("sweep-eps", parents=[common], help="viscous convergence table")
    sw.add_argument("--eps-list", dest="sweep.eps", type=_floats)
    cmp_ = sub.add_parser("compare", parents=[common], help="fd and Lax-Oleinik routes side by side")
    cmp_.add_argument("--no-ladder", dest="compare.ladder", action="store_const", const=False)
    return p


def config_from_args(args) -> RunConfig:
    skip = {"config", "param", "set", "verbose"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    for name, value in args.param:
        overrides[f"model.{name}"] = value
    for key, value in args.set:
        overrides[key] = value
    return assemble(args.config, overrides)


# -- modes --------------------------------------------------------------------------


def _limit_job(args):
    model, grid, t_final, route, kw = args
    return run_limit(make_limit_config(model, grid, t_final, route, **kw))


def _limit_runs(cfg: RunConfig, grids, routes):
    kw = {"flux": cfg.flux, "lax_source": cfg.lax_source}
    jobs = [(cfg.model, g, cfg.t_final, r, kw) for g in grids for r in routes]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(jobs))) as ex:
            return list(ex.map(_limit_job, jobs))
    return [_limit_job(j) for j in jobs]


def mode_check_model(cfg, out):
    x, I = default_assumption_grids(cfg.model)
    rep = check_assumptions(cfg.model, x, I)
    rows = []
    for name, e in rep.entries.items():
        w = e.witness or (None, None)
        rows.append((name, e.status, w[0], w[1], e.note))
        print(f"{name}\t{e.status}")
    store.write_csv(out / "series.csv", store.ASSUMPTION_COLUMNS, rows)
    store.write_json(out / "report.json", {"passed": rep.passed, "assumptions": rep.to_dict()})
    return (EXIT_OK if rep.passed else EXIT_CHECK), ["series.csv", "report.json"]


def _limit_summary(sol):
    return {
        "valid": sol.valid,
        "error": sol.error,
        "steps": int(sol.I.size),
        "max_abs_max_u": float(np.max(np.abs(sol.max_u))) if sol.I.size else None,
        "I_first": float(sol.I[0]) if sol.I.size else None,
        "I_last": float(sol.I[-1]) if sol.I.size else None,
        "maxpoint_flags": sol.flags,
    }


def mode_limit(cfg, out):
    sol = _limit_runs(cfg, [cfg.grid], [cfg.route])[0]
    files = store.save_limit(out, sol)
    store.write_json(out / "report.json", _limit_summary(sol))
    files.append("report.json")
    if cfg.plots and sol.I.size:
        files += plotting.limit_figures(out, {cfg.route: sol})
    print(f"route\t{cfg.route}\nsteps\t{sol.I.size}\nvalid\t{sol.valid}")
    if not sol.valid:
        log.error("limit run failed: %s", sol.error)
        return EXIT_ERROR, files
    print(f"I_final\t{float(sol.I[-1])!r}\nx_argmax_final\t{float(sol.x_argmax[-1])!r}")
    return EXIT_OK, files


def mode_viscous(cfg, out):
    sol = run_viscous(make_viscous_config(cfg.model, cfg.grid, cfg.epsilon, cfg.t_final))
    files = store.save_viscous(out, sol)
    store.write_json(out / "report.json", {
        "valid": sol.valid, "error": sol.error, "epsilon": sol.epsilon,
        "I_final": float(sol.I[-1]) if sol.I.size else None,
        "concentration_final": float(sol.concentration[-1]) if sol.I.size else None,
    })
    files.append("report.json")
    if cfg.plots and sol.I.size:
        files += plotting.viscous_figures(out, sol)
    print(f"eps\t{sol.epsilon!r}\nsteps\t{sol.I.size}\nvalid\t{sol.valid}")
    return (EXIT_OK if sol.valid else EXIT_ERROR), files


def mode_traj(cfg, out):
    if cfg.traj_from:
        sol = store.load_limit(cfg.traj_from)
    else:
        sol = _limit_runs(cfg, [cfg.grid], ["fd_monotone"])[0]
    if not sol.valid:
        raise ConhjError(f"source limit run is invalid: {sol.error}")
    model, t = sol.model, cfg.traj_t
    I_path = MultiplierPath.from_solution(sol)
    if cfg.traj_x is None:
        traj = max_point_trajectory(sol, model, t)
        level = check_path_above_zero_level(traj, sol)
        report = {
            "kind": "maximum_point",
            "xbar": traj.meta["xbar"],
            "transversality_residual": traj.meta["transversality_residual"],
            "min_margin_above_zero_level": level.margin,
        }
    else:
        traj = optimize_endpoint(cfg.traj_x, t, I_path, model)
        ug = float(np.interp(cfg.traj_x, sol.grid.x, sol.u_at(t)))
        report = {
            "kind": "endpoint",
            "x": cfg.traj_x,
            "grid_u": ug,
            "action_minus_grid_u": traj.action - ug,
            "candidates": traj.meta["candidates"],
            "tie": traj.meta["tie"],
        }
    report.update({"t": t, "action": traj.action, "initial_point": traj.initial_point})
    store.write_csv(out / "series.csv", store.TRAJ_COLUMNS, zip(traj.times, traj.positions, traj.velocities))
    store.write_json(out / "report.json", report)
    files = ["series.csv", "report.json"]
    if cfg.plots:
        zl = []
        for s in traj.times:
            try:
                zl.append(zero_level_x(model, min(max(float(I_path(s)), 0.0), model.I_max)))
            except Saturated:
                zl.append(np.nan)
        files += plotting.trajectory_figure(out, traj, (traj.times, np.array(zl)))
    print(f"action\t{traj.action!r}\ninitial_point\t{traj.initial_point!r}")
    return EXIT_OK, files


def mode_verify(cfg, out):
    limits = _limit_runs(cfg, [cfg.grid], ["fd_monotone", "lax_oleinik"])
    viscous = run_viscous_ladder(cfg.model, cfg.grid, cfg.verify_eps, cfg.t_final, cfg.jobs)
    files = []
    for sol in limits:
        files += store.save_limit(out, sol, prefix=f"{sol.config.route}_")
    for v in viscous:
        files += store.save_viscous(out, v, prefix=f"eps{v.epsilon:g}_")
    bad = [s for s in list(limits) + list(viscous) if not s.valid]
    if bad:
        raise ConhjError(f"{len(bad)} run(s) failed: {bad[0].error}")
    rep = diag_suite(viscous, limits, cfg.model, Tolerances())
    store.write_csv(out / "series.csv", store.VERIFY_COLUMNS, rep.rows())
    store.write_json(out / "report.json", rep.to_dict())
    files += ["series.csv", "report.json"]
    if cfg.plots:
        files += plotting.limit_figures(out, {s.config.route: s for s in limits})
        series = {s.config.route: (s.I_times, s.I) for s in limits}
        series.update({f"eps = {v.epsilon:g}": (v.times, v.I) for v in viscous})
        files.append(plotting.line_chart(out / "I_all.svg", series, xlabel="t", ylabel="I").name)
    for name, e in rep.entries.items():
        vals = ", ".join(f"{k}={v:.4g}" for k, v in e.measured.items())
        print(f"{name}\t{e.verdict}\t{vals}")
    return (EXIT_OK if rep.passed else EXIT_CHECK), files


def mode_sweep(cfg, out):
    ref = _limit_runs(cfg, [cfg.grid], ["fd_monotone"])[0]
    table = sweep_eps(cfg.model, cfg.grid, cfg.sweep_eps, ref, jobs=cfg.jobs)
    store.write_csv(out / "series.csv", store.SWEEP_COLUMNS, table.rows())
    store.write_json(out / "report.json", {"eps": table.eps, "e_I": table.e_I, "e_u": table.e_u,
                                           "ratio": table.ratio, "trend_ok": table.trend_ok})
    files = ["series.csv", "report.json"]
    if cfg.plots:
        files.append(plotting.line_chart(out / "e_vs_eps.svg", {"e_I": (table.eps, table.e_I),
                                                                "e_u": (table.eps, table.e_u)},
                                         xlabel="eps", ylabel="sup error").name)
    for row in table.rows():
        print("\t".join(store.format_cell(v) for v in row))
    return (EXIT_OK if table.trend_ok else EXIT_CHECK), files


def mode_compare(cfg, out):
    tol = Tolerances()
    grids = [cfg.grid] + ([cfg.grid.refined(2)] if cfg.compare_ladder else [])
    runs = _limit_runs(cfg, grids, ["fd_monotone", "lax_oleinik"])
    rows, ok, prev = [], True, None
    for i, g in enumerate(grids):
        fd, lx = runs[2 * i], runs[2 * i + 1]
        if not (fd.valid and lx.valid):
            raise ConhjError(f"limit run failed: {fd.error or lx.error}")
        gaps = route_gaps(fd, lx)
        ok &= gaps["sup_I_gap"] <= tol.cross_I_dx * g.dx and gaps["sup_u_gap"] <= tol.cross_u_dx * g.dx
        rI = prev["sup_I_gap"] / gaps["sup_I_gap"] if prev else float("nan")
        ru = prev["sup_u_gap"] / gaps["sup_u_gap"] if prev else float("nan")
        if prev:
            ok &= 1.5 <= rI <= 3.0 and 1.5 <= ru <= 3.0
        rows.append((g.n_points, g.dx, gaps["sup_I_gap"], gaps["sup_u_gap"], rI, ru))
        prev = gaps
    store.write_csv(out / "series.csv", store.COMPARE_COLUMNS, rows)
    store.write_json(out / "report.json", {"rows": [dict(zip(store.COMPARE_COLUMNS, r)) for r in rows], "passed": ok})
    files = ["series.csv", "report.json"]
    files += store.save_limit(out, runs[0], prefix="fd_monotone_") + store.save_limit(out, runs[1], prefix="lax_oleinik_")
    if cfg.plots:
        files += plotting.limit_figures(out, {"fd_monotone": runs[0], "lax_oleinik": runs[1]})
    for r in rows:
        print("\t".join(store.format_cell(v) for v in r))
    return (EXIT_OK if ok else EXIT_CHECK), files


MODES = {
    "check-model": mode_check_model,
    "limit": mode_limit,
    "viscous": mode_viscous,
    "traj": mode_traj,
    "verify": mode_verify,
    "sweep-eps": mode_sweep,
    "compare": mode_compare,
}


def run(cfg: RunConfig) -> int:
    """Execute one configured mode and write its manifest."""
    out = store.prepare_dir(cfg.output_dir)
    t0 = time.perf_counter()
    status, files = MODES[cfg.mode](cfg, out)
    store.write_json(out / "manifest.json", {
        "mode": cfg.mode,
        "config": {**cfg.flat, "mode": cfg.mode},
        "versions": store.versions(),
        "wall_time_s": time.perf_counter() - t0,
        "outputs": sorted(set(files)),
        "exit_status": status,
    })
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ConhjError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
