"""Run configuration: a flat dotted-key mapping, read from TOML or from a
previous run's ``manifest.json``."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigInvalid, ConhjError
from .limit import FLUXES, ROUTES
from .model import FAMILIES, ModelSpec, resolve_model
from .numerics import Grid1D

MODES = ("check-model", "viscous", "limit", "traj", "verify", "sweep-eps", "compare")

# Needed in every config file; the built-in defaults fill them only when no
# file is given.
REQUIRED = ("model.family", "grid.x_min", "grid.x_max", "grid.n_points", "time.t_final")

DEFAULTS = {
    "mode": "verify",
    "model.family": "satexp",
    "grid.x_min": -5.0,
    "grid.x_max": 15.0,
    "grid.n_points": 2001,
    "time.t_final": 2.0,
    "limit.route": "fd_monotone",
    "limit.flux": "godunov",
    "limit.lax_source": "trapezoid",
    "viscous.epsilon": 0.05,
    "sweep.eps": [0.25, 0.1, 0.05],
    "verify.eps": [0.25, 0.1, 0.05, 0.025],
    "compare.ladder": True,
    "traj.x": None,
    "traj.t": 1.0,
    "traj.from": None,
    "output_dir": "conhj-out",
    "jobs": 1,
    "plots": True,
}

OPTIONAL = {k: v for k, v in DEFAULTS.items() if k not in REQUIRED}


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def read_flat(path) -> dict:
    """Dotted keys from a TOML file, or the ``config`` block of a manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid("config", f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("config", f"{path} is not valid JSON: {exc}") from exc
        data = data.get("config", data)
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid("config", f"{path} is not valid TOML: {exc}") from exc
    return flatten(data)


def parse_value(text: str):
    """Interpret a ``--set key=value`` right-hand side as a TOML value, or
    as a bare string when it does not parse."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


@dataclass(frozen=True)
class RunConfig:
    mode: str
    model: ModelSpec
    grid: Grid1D
    t_final: float
    route: str
    flux: str
    lax_source: str
    epsilon: float
    sweep_eps: tuple
    verify_eps: tuple
    compare_ladder: bool
    traj_x: float | None
    traj_t: float
    traj_from: str | None
    output_dir: Path
    jobs: int
    plots: bool
    flat: dict = field(compare=False, repr=False)


def _num(flat, key, kind=float, positive=False):
    v = flat.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(key, f"expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigInvalid(key, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigInvalid(key, "must be finite")
    if positive and v <= 0:
        raise ConfigInvalid(key, f"must be positive, got {v}")
    return v


def _choice(flat, key, options):
    v = flat.get(key)
    if v not in options:
        raise ConfigInvalid(key, f"expected one of {list(options)}, got {v!r}")
    return v


def _eps_list(flat, key):
    v = flat.get(key)
    if not isinstance(v, list) or not v:
        raise ConfigInvalid(key, "expected a non-empty list of numbers")
    out = []
    for e in v:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0:
            raise ConfigInvalid(key, f"entries must be positive numbers, got {e!r}")
        out.append(float(e))
    return tuple(out)


def build_config(flat: dict) -> RunConfig:
    """Validate a complete flat mapping; errors name the offending key.

    Model parameters may be given as ``model.<name>`` or ``model.params.<name>``.
    """
    for key in REQUIRED:
        if key not in flat or flat[key] is None:
            raise ConfigInvalid(key, "missing")
    known = set(DEFAULTS)
    family = flat["model.family"]
    if family not in FAMILIES:
        raise ConfigInvalid("model.family", f"unknown family {family!r}")
    params = {}
    for key, value in flat.items():
        if key.startswith("model.") and key != "model.family":
            name = key[len("model."):]
            params[name[len("params."):] if name.startswith("params.") else name] = value
        elif key not in known:
            raise ConfigInvalid(key, "unknown key")
    try:
        model = resolve_model(family, params)
    except ConhjError as exc:
        name = getattr(exc, "name", "params")
        raise ConfigInvalid(f"model.{name}", str(exc)) from exc

    x_min, x_max = _num(flat, "grid.x_min"), _num(flat, "grid.x_max")
    n = _num(flat, "grid.n_points", int)
    if n < 3:
        raise ConfigInvalid("grid.n_points", "must be at least 3")
    if not x_min < x_max:
        raise ConfigInvalid("grid.x_max", "must exceed grid.x_min")
    traj_x = flat.get("traj.x")
    if traj_x is not None:
        traj_x = _num(flat, "traj.x")
    traj_from = flat.get("traj.from")
    if traj_from is not None and not isinstance(traj_from, str):
        raise ConfigInvalid("traj.from", "expected a path")
    out = flat.get("output_dir")
    if not isinstance(out, str) or not out:
        raise ConfigInvalid("output_dir", "expected a path")
    for key in ("compare.ladder", "plots"):
        if not isinstance(flat.get(key), bool):
            raise ConfigInvalid(key, "expected true or false")
    return RunConfig(
        mode=_choice(flat, "mode", MODES),
        model=model,
        grid=Grid1D(x_min, x_max, n),
        t_final=_num(flat, "time.t_final", positive=True),
        route=_choice(flat, "limit.route", ROUTES),
        flux=_choice(flat, "limit.flux", FLUXES),
        lax_source=_choice(flat, "limit.lax_source", ("trapezoid", "endpoint")),
        epsilon=_num(flat, "viscous.epsilon", positive=True),
        sweep_eps=_eps_list(flat, "sweep.eps"),
        verify_eps=_eps_list(flat, "verify.eps"),
        compare_ladder=flat["compare.ladder"],
        traj_x=traj_x,
        traj_t=_num(flat, "traj.t", positive=True),
        traj_from=traj_from,
        output_dir=Path(out),
        jobs=_num(flat, "jobs", int, positive=True),
        plots=flat["plots"],
        flat=dict(flat),
    )


def assemble(file_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults (or file values on top of the optional defaults), then overrides."""
    flat = dict(DEFAULTS) if file_path is None else {**OPTIONAL, **read_flat(file_path)}
    flat.update({k: v for k, v in (overrides or {}).items()})
    return build_config(flat)
