"""Flat-file outputs.  Floats are written with ``repr`` so repeated runs of the
same configuration produce byte-identical files."""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .limit import LimitConfig, LimitSolution
from .model import resolve_model
from .numerics import Grid1D, TimeGrid

LIMIT_COLUMNS = ("step", "t", "I_time", "I", "x_argmax", "x_zero_level", "max_u", "semiconvexity_min")
VISCOUS_COLUMNS = ("step", "t", "I_eps", "x_max", "u_max", "concentration", "semiconvexity_min")
TRAJ_COLUMNS = ("s", "gamma", "gamma_dot")
VERIFY_COLUMNS = ("check", "verdict", "quantity", "measured", "tolerance")
SWEEP_COLUMNS = ("eps", "e_I", "e_u", "ratio")
COMPARE_COLUMNS = ("n_points", "dx", "sup_I_gap", "sup_u_gap", "ratio_I", "ratio_u")
ASSUMPTION_COLUMNS = ("assumption", "status", "witness_x", "witness_I", "note")


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])
    return path


def read_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) if r[i] else np.nan for r in body]) for i, h in enumerate(header)}


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable, allow_nan=True) + "\n")
    return path


def write_snapshots(path, times, snapshots) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for t, u in zip(times, snapshots):
            fh.write(json.dumps({"t": float(t), "u": [float(v) for v in u]}) + "\n")
    return path


def read_snapshots(path):
    times, snaps = [], []
    with Path(path).open() as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                times.append(rec["t"])
                snaps.append(rec["u"])
    return np.array(times), np.array(snaps)


def versions() -> dict:
    import matplotlib
    import scipy

    from . import __version__

    return {
        "conhj": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def prepare_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigInvalid("output_dir", f"{path} is not writable: {exc}") from exc
    return path


def limit_rows(sol: LimitSolution):
    for k in range(sol.I.size):
        yield (k + 1, sol.step_times[k], sol.I_times[k], sol.I[k], sol.x_argmax[k], sol.x_zero[k],
               sol.max_u[k], sol.semiconvexity_min[k])


def viscous_rows(sol):
    for k in range(sol.I.size):
        yield (k, sol.times[k], sol.I[k], sol.x_max[k], sol.u_max[k], sol.concentration[k],
               sol.semiconvexity_min[k])


def save_limit(run_dir, sol: LimitSolution, prefix: str = "") -> list:
    run_dir = Path(run_dir)
    write_csv(run_dir / f"{prefix}series.csv", LIMIT_COLUMNS, limit_rows(sol))
    write_snapshots(run_dir / f"{prefix}snapshots.ndjson", sol.snapshot_times, sol.snapshots)
    write_json(run_dir / f"{prefix}solution.json", {"limit_config": sol.config.to_dict(), "valid": sol.valid,
                                                    "error": sol.error, "flags": sol.flags})
    return [f"{prefix}series.csv", f"{prefix}snapshots.ndjson", f"{prefix}solution.json"]


def save_viscous(run_dir, sol, prefix: str = "") -> list:
    run_dir = Path(run_dir)
    write_csv(run_dir / f"{prefix}series.csv", VISCOUS_COLUMNS, viscous_rows(sol))
    write_snapshots(run_dir / f"{prefix}snapshots.ndjson", sol.snapshot_times, sol.snapshots)
    return [f"{prefix}series.csv", f"{prefix}snapshots.ndjson"]


def load_limit(run_dir, prefix: str = "") -> LimitSolution:
    """Rebuild a LimitSolution written by :func:`save_limit`."""
    run_dir = Path(run_dir)
    try:
        meta = json.loads((run_dir / f"{prefix}solution.json").read_text())
        series = read_csv(run_dir / f"{prefix}series.csv")
        times, snaps = read_snapshots(run_dir / f"{prefix}snapshots.ndjson")
    except (OSError, json.JSONDecodeError, KeyError, IndexError) as exc:
        raise ConfigInvalid("traj.from", f"{run_dir} does not hold a readable limit run: {exc}") from exc
    c = meta["limit_config"]
    model = resolve_model(c["model"]["family"], c["model"]["params"])
    cfg = LimitConfig(
        model=model,
        grid=Grid1D(**c["grid"]),
        time=TimeGrid(**c["time"]),
        route=c["route"],
        constraint_tol=c["constraint_tol"],
        lf_dissipation=c["lf_dissipation"],
        flux=c["flux"],
        lax_source=c["lax_source"],
        save_every=c["save_every"],
    )
    return LimitSolution(
        config=cfg,
        snapshot_times=times,
        snapshots=snaps,
        I_times=series["I_time"],
        I=series["I"],
        step_times=series["t"],
        x_argmax=series["x_argmax"],
        max_u=series["max_u"],
        semiconvexity_min=series["semiconvexity_min"],
        x_zero=series["x_zero_level"],
        flags=meta.get("flags", []),
        valid=meta.get("valid", True),
        error=meta.get("error"),
    )
