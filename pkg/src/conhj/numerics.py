"""Grids, quadrature, interpolation, linear solves, root finding and the
linear-time upper envelope of downward parabolas."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import BracketInvalid, NotDiagonallyDominant, OutOfDomain, SingularPivot


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"n_points must be an integer >= 3, got {self.n_points}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def refined(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, (self.n_points - 1) * factor + 1)


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass(frozen=True)
class SampledFunction:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        object.__setattr__(self, "values", v)


def trapezoid(f: SampledFunction) -> float:
    return float(np.trapezoid(f.values, dx=f.grid.dx))


def interp_linear(f: SampledFunction, x: float) -> float:
    g = f.grid
    if not (g.x_min <= x <= g.x_max):
        raise OutOfDomain(f"x={x} outside [{g.x_min}, {g.x_max}]")
    return float(np.interp(x, g.x, f.values))


@dataclass(frozen=True)
class ArgmaxResult:
    x_star: float
    f_star: float
    index: int
    refined: bool
    tie: bool

    def __iter__(self):
        yield self.x_star
        yield self.f_star


def argmax_refined(f: SampledFunction | np.ndarray, grid: Grid1D | None = None) -> ArgmaxResult:
    """Sub-grid maximum by a three-point quadratic fit around the best node.

    Ties between equal node values resolve toward smaller x and are flagged.
    """
    if isinstance(f, SampledFunction):
        v, grid = f.values, f.grid
    else:
        v = np.asarray(f, dtype=float)
    x = grid.x
    j = int(np.argmax(v))  # first occurrence, i.e. smallest x
    tie = bool(np.count_nonzero(v == v[j]) > 1)
    if j == 0 or j == v.size - 1:
        return ArgmaxResult(float(x[j]), float(v[j]), j, False, tie)
    fm, f0, fp = v[j - 1], v[j], v[j + 1]
    curv = fm - 2.0 * f0 + fp
    if curv >= 0:
        return ArgmaxResult(float(x[j]), float(f0), j, False, tie)
    shift = 0.5 * (fm - fp) / curv  # in cells
    if abs(shift) > 1.0:
        return ArgmaxResult(float(x[j]), float(f0), j, False, tie)
    f_star = f0 - 0.25 * (fm - fp) * shift
    return ArgmaxResult(float(x[j] + shift * grid.dx), float(max(f_star, f0)), j, True, tie)


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a diagonally dominant tridiagonal system.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` unused) and
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused).
    """
    a = np.asarray(lower, dtype=float)
    d = np.asarray(diag, dtype=float)
    c = np.asarray(upper, dtype=float)
    r = np.asarray(rhs, dtype=float)
    n = d.size
    if not (a.size == c.size == r.size == n):
        raise ValueError("tridiagonal bands and rhs must share one length")
    off = np.zeros(n)
    off[1:] += np.abs(a[1:])
    off[:-1] += np.abs(c[:-1])
    if np.any(d == 0):
        raise SingularPivot(f"zero diagonal entry at row {int(np.flatnonzero(d == 0)[0])}")
    margin = np.abs(d) - off
    if np.any(margin < 0) or not np.any(margin > 0):
        raise NotDiagonallyDominant("matrix is not diagonally dominant")
    ab = np.zeros((3, n))
    ab[0, 1:] = c[:-1]
    ab[1] = d
    ab[2, :-1] = a[1:]
    try:
        return solve_banded((1, 1), ab, r, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularPivot(str(exc)) from exc


def tridiagonal_matvec(lower, diag, upper, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(diag) * x
    y[1:] += np.asarray(lower)[1:] * x[:-1]
    y[:-1] += np.asarray(upper)[:-1] * x[1:]
    return y


def bisect_monotone(g, lo: float, hi: float, tol: float, *, max_iter: int | None = None) -> float:
    """Root of a decreasing function with ``g(lo) >= 0 >= g(hi)``."""
    if not hi > lo:
        raise BracketInvalid(f"need lo < hi, got [{lo}, {hi}]")
    glo, ghi = g(lo), g(hi)
    if not (glo >= 0 >= ghi):
        raise BracketInvalid(f"g(lo)={glo}, g(hi)={ghi} do not bracket a root")
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    n = max(0, math.ceil(math.log2((hi - lo) / tol))) if tol > 0 else 200
    if max_iter is not None:
        n = min(n, max_iter)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid
        if gm > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def upper_envelope_quadratic(values, grid: Grid1D | np.ndarray, curvature: float) -> np.ndarray:
    """``out[j] = max_i values[i] - curvature * (x[j] - x[i])**2`` in O(N).

    Felzenszwalb-Huttenlocher lower envelope applied to the negated data;
    works on any strictly increasing node set.
    """
    if not curvature > 0:
        raise ValueError("curvature must be positive")
    x = grid.x if isinstance(grid, Grid1D) else np.asarray(grid, dtype=float)
    vals = np.asarray(values, dtype=float)
    f = (-vals / curvature).tolist()  # minimise f_i + (x - x_i)^2
    vl = vals.tolist()
    xs = x.tolist()
    n = len(xs)
    v = [0] * n  # parabola indices on the envelope
    z = [0.0] * (n + 1)  # boundaries between consecutive parabolas
    k = 0
    z[0] = -math.inf
    z[1] = math.inf
    for q in range(1, n):
        xq = xs[q]
        sq = f[q] + xq * xq
        while True:
            p = v[k]
            s = (sq - (f[p] + xs[p] * xs[p])) / (2.0 * (xq - xs[p]))
            if s <= z[k]:
                k -= 1
                continue
            break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    top = k
    out = np.empty(n)
    k = 0
    for j in range(n):
        xj = xs[j]
        while z[k + 1] < xj:
            k += 1
        # Re-score the neighbouring envelope pieces in the caller's units so
        # breakpoint rounding cannot lose an ulp against the direct scan.
        best = -math.inf
        for m in (k - 1, k, k + 1):
            if 0 <= m <= top:
                p = v[m]
                d = xj - xs[p]
                val = vl[p] - curvature * (d * d)
                if val > best:
                    best = val
        out[j] = best
    return np.maximum(out, vals)


def upper_envelope_bruteforce(values, x, curvature: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.max(v[None, :] - curvature * (x[:, None] - x[None, :]) ** 2, axis=1)


def one_sided_differences(u, dx: float):
    """Backward and forward differences with copied closures at the ends."""
    d = np.diff(u) / dx
    back = np.empty_like(u)
    fwd = np.empty_like(u)
    back[1:] = d
    back[0] = d[0]
    fwd[:-1] = d
    fwd[-1] = d[-1]
    return back, fwd


def godunov_hamiltonian(u, dx: float):
    """Upwind approximation of ``u_x**2`` for ``u_t = u_x**2 + ...``.

    Returns ``(H, speed)`` where ``speed`` is the largest |H'(p)| = 2|p| seen
    by the active branch at each node; the explicit step is monotone while
    ``dt * speed / dx <= 1``.  The end nodes see a zero-gradient ghost node,
    so the missing outward difference is 0 and monotonicity holds there too.
    """
    back, fwd = one_sided_differences(u, dx)
    back[0] = 0.0
    fwd[-1] = 0.0
    left = np.minimum(back, 0.0)
    right = np.maximum(fwd, 0.0)
    H = np.maximum(left * left, right * right)
    speed = 2.0 * np.maximum(-left, right)
    return H, speed


def second_differences(u, dx: float):
    return (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
