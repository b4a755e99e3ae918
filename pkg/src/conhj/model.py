"""Reaction models: growth b, saturation Q, weight psi and initial datum u0.

A model is one member of a closed registry of parametric families.  On the
right half-line the reaction is ``R(x, I) = b(x) - Q(I)``; on the left it is
``-Q(I)``, which glues C^2-smoothly to the right branch because every built-in
``b`` vanishes to third order at the origin.

Every built-in family is *separable*: ``R(x, I) = r(x) - Q(I)`` with
``r = b`` on ``x >= 0`` and ``r = 0`` on ``x < 0``.  The solvers exploit this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import NegativeI, ParamOutOfRange, Saturated, UnknownFamily

ASSUMPTIONS = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8")

# Divided-difference bounds above this count as unbounded.
_BOUND_CAP = 1e6


def _smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10.0 - 15.0 * z + 6.0 * z * z)


# -- growth profiles ---------------------------------------------------------
# Each profile returns values for x >= 0 only; callers mask x < 0.


def _satexp_b(x):
    return -np.expm1(-(x**3))


def _satexp_bp(x):
    return 3.0 * x**2 * np.exp(-(x**3))


def _satexp_bpp(x):
    return (6.0 * x - 9.0 * x**4) * np.exp(-(x**3))


def _satexp_log_tail(x):
    return -(x**3)


def _cubicsat_b(x):
    x3 = x**3
    return x3 / (1.0 + x3)


def _cubicsat_bp(x):
    return 3.0 * x**2 / (1.0 + x**3) ** 2


def _cubicsat_bpp(x):
    return (6.0 * x - 12.0 * x**4) / (1.0 + x**3) ** 3


def _cubicsat_log_tail(x):
    return -np.log1p(x**3)


def _zero(x):
    return np.zeros_like(x)


def _zero_log_tail(x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class Family:
    name: str
    b: Callable
    b_prime: Callable
    b_second: Callable
    log_b_tail: Callable  # log(sup b - b(x)), strictly decreasing iff b strictly increasing
    b_sup: float
    q_slope: float
    defaults: Mapping[str, float]
    u0_kind: str = "well"  # "well" or "quadratic"
    oracle_only: bool = False
    domain_hint: tuple = (-5.0, 15.0)
    doc: str = ""


_WELL_DEFAULTS = {
    "I_max": 1.0,
    "u0_depth": 1.5,
    "u0_width": 2.0,
    "u0_power": 4.0,
    "u0_shift": 0.0,
    "psi_lo": -2.0,
    "psi_hi": 8.0,
    "psi_collar": 1.0,
}

FAMILIES: dict[str, Family] = {
    "satexp": Family(
        name="satexp",
        b=_satexp_b,
        b_prime=_satexp_bp,
        b_second=_satexp_bpp,
        log_b_tail=_satexp_log_tail,
        b_sup=1.0,
        q_slope=1.0,
        defaults=MappingProxyType(dict(_WELL_DEFAULTS)),
        doc="b(x) = 1 - exp(-x^3), Q(I) = I",
    ),
    "cubicsat": Family(
        name="cubicsat",
        b=_cubicsat_b,
        b_prime=_cubicsat_bp,
        b_second=_cubicsat_bpp,
        log_b_tail=_cubicsat_log_tail,
        b_sup=1.0,
        q_slope=1.0,
        defaults=MappingProxyType(dict(_WELL_DEFAULTS)),
        doc="b(x) = x^3 / (1 + x^3), Q(I) = I",
    ),
    # Hopf-Lax oracle fixture: R = 0 and u0 = -k x^2.  It deliberately fails
    # the growth assumptions and is rejected by the solver gates.
    "free_quadratic": Family(
        name="free_quadratic",
        b=_zero,
        b_prime=_zero,
        b_second=_zero,
        log_b_tail=_zero_log_tail,
        b_sup=0.0,
        q_slope=0.0,
        defaults=MappingProxyType(
            {"I_max": 1.0, "u0_curvature": 1.0, "u0_shift": 0.0,
             "psi_lo": -2.0, "psi_hi": 8.0, "psi_collar": 1.0}
        ),
        u0_kind="quadratic",
        oracle_only=True,
        doc="R = 0, u0(x) = -k x^2",
    ),
}


def _check_params(family: Family, params: dict) -> None:
    def positive(name):
        v = params[name]
        if not (math.isfinite(v) and v > 0):
            raise ParamOutOfRange(name, v, "must be positive and finite")

    for name, v in params.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ParamOutOfRange(name, v, "must be a finite real")
    positive("I_max")
    positive("psi_collar")
    if params["psi_lo"] >= params["psi_hi"]:
        raise ParamOutOfRange("psi_lo", params["psi_lo"], "must be below psi_hi")
    if family.u0_kind == "well":
        positive("u0_depth")
        positive("u0_width")
        p = params["u0_power"]
        if p not in (2.0, 4.0, 6.0, 8.0):
            raise ParamOutOfRange("u0_power", p, "must be one of 2, 4, 6, 8")
    else:
        positive("u0_curvature")


@dataclass(frozen=True)
class ModelSpec:
    """An immutable, fully-resolved reaction model."""

    family_id: str
    params: Mapping[str, float]
    I_max: float
    domain_hint: tuple = field(default=(-5.0, 15.0))

    @property
    def family(self) -> Family:
        return FAMILIES[self.family_id]

    @property
    def separable(self) -> bool:
        return True

    def __reduce__(self):
        # MappingProxyType does not pickle; rebuild through the registry.
        return _rebuild_model, (self.family_id, dict(self.params))

    def to_dict(self) -> dict:
        return {
            "family": self.family_id,
            "params": dict(self.params),
            "I_max": self.I_max,
            "domain_hint": list(self.domain_hint),
        }

    # ---- components ---------------------------------------------------
    def r0(self, x):
        """I-independent part of R (b on the right, 0 on the left)."""
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        return np.where(x >= 0, self.family.b(xp), 0.0)

    def b(self, x):
        return self.r0(x)

    def b_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.family.b_prime(np.maximum(x, 0.0)), 0.0)

    def b_second(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.family.b_second(np.maximum(x, 0.0)), 0.0)

    def Q(self, I):
        I = np.asarray(I, dtype=float)
        if np.any(I < 0):
            raise NegativeI(f"multiplier must be nonnegative, got min {I.min()}")
        return self.family.q_slope * I

    def R(self, x, I):
        return self.r0(x) - self.Q(I)

    def R_x(self, x, I):
        self.Q(I)
        return self.b_prime(x)

    def R_xx(self, x, I):
        self.Q(I)
        return self.b_second(x)

    def u0(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family.u0_kind == "quadratic":
            return p["u0_shift"] - p["u0_curvature"] * x**2
        a, s, n = p["u0_depth"], p["u0_width"], p["u0_power"]
        xn = x**n
        return p["u0_shift"] - a * xn / (s**n + xn)

    def u0_prime(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family.u0_kind == "quadratic":
            return -2.0 * p["u0_curvature"] * x
        a, s, n = p["u0_depth"], p["u0_width"], p["u0_power"]
        g = s**n + x**n
        return -a * s**n * n * x ** (n - 1) / g**2

    def u0_second(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family.u0_kind == "quadratic":
            return np.full_like(x, -2.0 * p["u0_curvature"])
        a, s, n = p["u0_depth"], p["u0_width"], p["u0_power"]
        xn = x**n
        g = s**n + xn
        return -a * s**n * n * x ** (n - 2) * ((n - 1) * g - 2.0 * n * xn) / g**3

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        c = p["psi_collar"]
        return _smoothstep((x - (p["psi_lo"] - c)) / c) * _smoothstep(((p["psi_hi"] + c) - x) / c)


def resolve_model(family_id: str, params: Mapping[str, float] | None = None) -> ModelSpec:
    """Build a ModelSpec from a registered family and parameter overrides."""
    try:
        family = FAMILIES[family_id]
    except KeyError:
        raise UnknownFamily(f"unknown model family {family_id!r}; known: {sorted(FAMILIES)}") from None
    merged = dict(family.defaults)
    for name, value in (params or {}).items():
        if name not in merged:
            raise ParamOutOfRange(name, value, f"unknown parameter for family {family_id!r}")
        merged[name] = value
    _check_params(family, merged)
    merged = {k: float(v) for k, v in merged.items()}
    return ModelSpec(
        family_id=family_id,
        params=MappingProxyType(merged),
        I_max=merged["I_max"],
        domain_hint=family.domain_hint,
    )


# -- functional evaluation API ------------------------------------------------


def eval_R(model: ModelSpec, x, I):
    return model.R(x, I)


def eval_R_x(model: ModelSpec, x, I):
    return model.R_x(x, I)


def eval_R_xx(model: ModelSpec, x, I):
    return model.R_xx(x, I)


def eval_b(model: ModelSpec, x):
    return model.b(x)


def eval_b_prime(model: ModelSpec, x):
    return model.b_prime(x)


def eval_Q(model: ModelSpec, I):
    return model.Q(I)


def eval_u0(model: ModelSpec, x):
    return model.u0(x)


def eval_u0_prime(model: ModelSpec, x):
    return model.u0_prime(x)


def eval_psi(model: ModelSpec, x):
    return model.psi(x)


def zero_level_x(model: ModelSpec, I: float, tol: float = 1e-10) -> float:
    """Return the unique x >= 0 with b(x) = Q(I)."""
    from .numerics import bisect_monotone

    I = float(I)
    q = float(model.Q(I))
    if q >= model.family.b_sup:
        raise Saturated(f"Q({I}) = {q} >= sup b = {model.family.b_sup}; the zero level is at infinity")
    if q == 0.0:
        return 0.0
    hi = 1.0
    while float(model.b(hi)) <= q:
        hi *= 2.0
        if hi > 1e8:
            raise Saturated(f"no root of b(x) = {q} below x = 1e8")
    return bisect_monotone(lambda x: q - float(model.b(x)), 0.0, hi, tol)


def semiconvexity_constant(model: ModelSpec, t: float, x=None) -> float:
    """``||u0''||_inf + t * sup_I ||R_xx(., I)||_inf`` sampled on the domain hint.

    For separable models R_xx does not depend on I.
    """
    if x is None:
        x = np.linspace(*model.domain_hint, 20001)
    return float(np.max(np.abs(model.u0_second(x))) + t * np.max(np.abs(model.b_second(x))))


# -- assumption checker --------------------------------------------------------


@dataclass
class AssumptionEntry:
    status: str  # "pass" | "fail" | "not-applicable"
    witness: tuple | None = None
    sampled_bound: dict = field(default_factory=dict)
    note: str = ""


@dataclass
class AssumptionReport:
    entries: dict

    @property
    def passed(self) -> bool:
        return all(e.status == "pass" for e in self.entries.values())

    def failing(self) -> list[str]:
        return [k for k, e in self.entries.items() if e.status == "fail"]

    def to_dict(self) -> dict:
        out = {}
        for k in ASSUMPTIONS:
            e = self.entries[k]
            out[k] = {
                "status": e.status,
                "witness": None if e.witness is None else list(e.witness),
                "sampled_bound": e.sampled_bound,
                "note": e.note,
            }
        return out


def _first(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def check_assumptions(model: ModelSpec, x_grid, I_samples) -> AssumptionReport:
    """Sample each assumption A1..A8 on the given grids.

    Strict inequalities are checked with zero margin: a tie fails.  Strict
    growth of b is compared through ``log(sup b - b)``, which keeps ties that
    are only floating-point saturation of b from being reported.
    """
    x = np.sort(np.asarray(x_grid, dtype=float))
    Is = np.sort(np.asarray(I_samples, dtype=float))
    if x.size == 0 or Is.size == 0:
        raise ValueError("sampling grids must be non-empty")
    I_max = model.I_max
    fam = model.family
    E: dict[str, AssumptionEntry] = {}

    # A1: R(., I) < 0 on x < 0 for I > 0.
    xl = x[x < 0]
    Ipos = Is[Is > 0]
    witness = None
    worst = -np.inf
    for I in Ipos:
        r = model.R(xl, I)
        if r.size:
            worst = max(worst, float(r.max()))
            j = _first(r >= 0)
            if j is not None and witness is None:
                witness = (float(xl[j]), float(I))
    trunc = -np.inf
    for I in Ipos:
        if xl.size:
            trunc = max(trunc, float(np.max(model.R(xl, I) + model.Q(I))))
    E["A1"] = AssumptionEntry(
        "fail" if witness else "pass",
        witness,
        {"max_R_left": worst, "max_R_left_plus_Q": trunc},
        note="reads R'(., I) < 0 as a statement about values",
    )

    # A2: bounded W^{2,inf} norm and strict decrease in I.
    witness = None
    sup_r = sup_rx = sup_rxx = sup_dd = 0.0
    dx = np.diff(x)
    for I in Is:
        r = model.R(x, I)
        rx = model.R_x(x, I)
        rxx = model.R_xx(x, I)
        dd = np.abs(np.diff(rx)) / dx if x.size > 1 else np.zeros(1)
        sup_r = max(sup_r, float(np.max(np.abs(r))))
        sup_rx = max(sup_rx, float(np.max(np.abs(rx))))
        sup_rxx = max(sup_rxx, float(np.max(np.abs(rxx))))
        sup_dd = max(sup_dd, float(np.max(dd)))
    bounded = all(np.isfinite(v) and v < _BOUND_CAP for v in (sup_r, sup_rx, sup_rxx, sup_dd))
    if not bounded:
        witness = (float(x[int(np.argmax(np.abs(model.R_xx(x, Is[-1]))))]), float(Is[-1]))
    for I0, I1 in zip(Is[:-1], Is[1:]):
        if I1 == I0:
            continue
        bad = _first(model.R(x, I1) >= model.R(x, I0))
        if bad is not None and witness is None:
            witness = (float(x[bad]), float(I1))
            break
    E["A2"] = AssumptionEntry(
        "fail" if witness else "pass",
        witness,
        {"sup_R": sup_r, "sup_R_x": sup_rx, "sup_R_xx": sup_rxx, "sup_divided_diff_R_x": sup_dd},
    )

    # A3: Q(0) = 0, Q >= 0, strictly increasing.
    q = model.Q(Is)
    witness = None
    if float(model.Q(0.0)) != 0.0:
        witness = (None, 0.0)
    else:
        j = _first(q < 0)
        if j is None:
            j = _first(np.diff(q) <= 0)
            if j is not None:
                j += 1
        if j is not None:
            witness = (None, float(Is[j]))
    E["A3"] = AssumptionEntry("fail" if witness else "pass", witness, {"Q0": float(model.Q(0.0)), "Q_at_I_max": float(model.Q(I_max))})

    # A4: sup R(., I_max) = 0, approached as the grid extends right.
    r = model.R(x, I_max)
    j = _first(r > 0)
    probes = x[-1] * np.array([1.0, 10.0, 100.0, 1000.0])
    probe_vals = model.R(np.abs(probes) + 1.0, I_max)
    approaches = float(np.max(probe_vals)) >= -1e-6
    if j is not None:
        witness = (float(x[j]), float(I_max))
    elif not approaches:
        witness = (float(probes[-1]), float(I_max))
    else:
        witness = None
    E["A4"] = AssumptionEntry(
        "fail" if witness else "pass",
        witness,
        {"max_R_at_I_max": float(r.max()), "far_right_R": [float(v) for v in probe_vals]},
    )

    # A5: min R(., 0) = 0.
    r0 = model.R(x, 0.0)
    m = float(r0.min())
    witness = None
    if abs(m) > 1e-12:
        witness = (float(x[int(np.argmin(r0))]), 0.0)
    E["A5"] = AssumptionEntry("fail" if witness else "pass", witness, {"min_R_at_0": m, "argmin": float(x[int(np.argmin(r0))])})

    # A6: b(0) = 0, b strictly increasing on x >= 0.
    xr = x[x >= 0]
    witness = None
    if float(model.b(0.0)) != 0.0:
        witness = (0.0, None)
    else:
        lt = fam.log_b_tail(xr)
        j = _first(np.diff(lt) >= 0)
        if j is not None:
            witness = (float(xr[j + 1]), None)
    E["A6"] = AssumptionEntry("fail" if witness else "pass", witness, {"b0": float(model.b(0.0)), "b_max_sampled": float(model.b(xr).max()) if xr.size else 0.0})

    # A7: b' Lipschitz and nonnegative.
    bp = model.b_prime(xr)
    witness = None
    lip = float(np.max(np.abs(np.diff(bp)) / np.diff(xr))) if xr.size > 1 else 0.0
    j = _first(bp < 0)
    if j is not None:
        witness = (float(xr[j]), None)
    elif not (np.isfinite(lip) and lip < _BOUND_CAP):
        witness = (float(xr[int(np.argmax(np.abs(np.diff(bp))))]), None)
    E["A7"] = AssumptionEntry("fail" if witness else "pass", witness, {"lipschitz_b_prime": lip, "min_b_prime": float(bp.min()) if bp.size else 0.0})

    # A8: u0 in C^2, max u0 = u0(0) = 0, u0 < 0 elsewhere.
    u = model.u0(x)
    u_at_0 = float(model.u0(0.0))
    witness = None
    if abs(u_at_0) > 1e-12:
        witness = (0.0, None)
    else:
        j = _first((u >= 0) & (x != 0))
        if j is not None:
            witness = (float(x[j]), None)
    d2 = np.abs(np.diff(u, 2)) / np.diff(x)[:-1] ** 2 if x.size > 2 else np.zeros(1)
    sup_d2 = float(d2.max())
    if witness is None and not (np.isfinite(sup_d2) and sup_d2 < _BOUND_CAP):
        witness = (float(x[int(np.argmax(d2)) + 1]), None)
    E["A8"] = AssumptionEntry(
        "fail" if witness else "pass",
        witness,
        {"u0_at_0": u_at_0, "max_u0_sampled": float(u.max()), "sup_second_difference": sup_d2},
    )
    return AssumptionReport(E)


def default_assumption_grids(model: ModelSpec):
    lo, hi = model.domain_hint
    x = np.linspace(lo, hi, int(round((hi - lo) / 0.01)) + 1)
    I = np.linspace(0.0, model.I_max, 5)
    return x, I


def _rebuild_model(family_id, params):
    return resolve_model(family_id, params)
