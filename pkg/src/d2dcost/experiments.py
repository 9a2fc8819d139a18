"""Sweeps over the repair interval and the cost ratio.

E(C) is not monotone in the repair interval, so the break-even search scans
a log grid for the last sub-break-even point before bisecting, and the
optimizer refines around the best grid point only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import analytic
from .model import NetworkParams, StorageCode
from .simulate import SimConfig, replicate, run

__all__ = [
    "CURVE_HEADER",
    "CurveRow",
    "CurveTable",
    "DeltaMaxResult",
    "OptimalDelta",
    "RhoRow",
    "sweep_delta",
    "find_delta_max",
    "find_optimal_delta",
    "optimization_grid",
    "sweep_rho",
    "parse_grid",
    "bisect",
    "golden_section",
]

CURVE_HEADER = ("delta", "mu_delta", "repair", "download", "total", "normalized_total")

# search range and density, in units of mean node lifetime (mu * delta)
MU_DELTA_MIN = 1e-4
MU_DELTA_MAX = 20.0
GRID_POINTS = 400


class CurveRow(NamedTuple):
    delta: float
    mu_delta: float
    repair: float
    download: float
    total: float
    normalized_total: float


@dataclass
class CurveTable:
    rows: list[CurveRow]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        deltas = [r.delta for r in self.rows]
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("curve rows must be strictly increasing in delta")

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def write_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for row in self.rows:
            writer.writerow([repr(float(v)) for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class DeltaMaxResult:
    """Largest repair interval at which storing in the cell still beats the BS.

    ``delta_max`` is None when no grid point beats the BS, and ``inf`` when
    the cost is still below the BS cost at the end of the search range.
    """

    delta_max: float | None
    bracket: tuple[float, float] | None
    grid_resolution: int
    residual: float | None = None

    @property
    def exists(self) -> bool:
        return self.delta_max is not None


class OptimalDelta(NamedTuple):
    delta_star: float
    cost_star: float


class RhoRow(NamedTuple):
    rho: float
    code: str
    mu_delta_max: float | None


def parse_grid(spec: str) -> np.ndarray:
    """Parse ``lin:a:b:n`` or ``log:a:b:n`` into an array of ``n`` points."""
    try:
        kind, a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ValueError(f"bad grid {spec!r}; expected lin:a:b:n or log:a:b:n") from None
    if n < 1:
        raise ValueError("grid needs at least one point")
    if kind == "lin":
        return np.linspace(a, b, n)
    if kind == "log":
        if a <= 0 or b <= 0:
            raise ValueError("log grid bounds must be > 0")
        return np.geomspace(a, b, n)
    raise ValueError(f"unknown grid kind {kind!r}")


def _row(delta, mu, cost: analytic.CostBreakdown | None = None, **values) -> CurveRow:
    if cost is not None:
        values = dict(repair=cost.repair, download=cost.download, total=cost.total,
                      normalized_total=cost.normalized_total)
    return CurveRow(float(delta), float(mu * delta), **values)


def sweep_delta(code: StorageCode, params: NetworkParams, delta_grid: Iterable[float],
                engine: str = "analytic", *, horizon_intervals: int = 2000,
                replications: int = 1, seed: int = 0) -> CurveTable:
    """Cost curve over repair intervals ``delta_grid`` (t.u.).

    The simulated engine gives each grid point its own seed, ``seed + index``.
    """
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise ValueError("empty delta grid")
    if engine not in ("analytic", "simulated"):
        raise ValueError(f"unknown engine {engine!r}")
    rows = []
    for idx, delta in enumerate(grid):
        if engine == "analytic":
            rows.append(_row(delta, params.mu, analytic.total_cost(code, params, delta)))
            continue
        if delta <= 0:
            raise ValueError("the simulated engine needs delta > 0")
        cfg = SimConfig(code, params, delta, horizon_intervals, seed + idx, replications)
        res = replicate(cfg) if replications > 1 else run(cfg)
        rows.append(_row(delta, params.mu, repair=res.repair_cost_rate,
                         download=res.download_cost_rate, total=res.total_cost_rate,
                         normalized_total=res.normalized_total))
    meta = {"code": code.label, "engine": engine, "params": params.__dict__.copy()}
    if engine == "simulated":
        meta.update(seed=seed, horizon_intervals=horizon_intervals, replications=replications)
    return CurveTable(rows, meta)


def bisect(f, lo: float, hi: float, tol: float, max_iter: int = 200) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` with ``f(lo) < 0 <= f(hi)`` until it is narrower than ``tol``."""
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section(f, lo: float, hi: float, tol: float, max_iter: int = 200) -> tuple[float, float]:
    """Minimize ``f`` on ``[lo, hi]``, assumed unimodal there; returns ``(x, f(x))``."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _total(code, params):
    return lambda delta: analytic.total_cost(code, params, delta).total


def find_delta_max(code: StorageCode, params: NetworkParams, tol: float = 1e-9,
                   grid_points: int = GRID_POINTS) -> DeltaMaxResult:
    """Break-even repair interval against always downloading from the BS.

    ``tol`` is the width (t.u.) of the final bisection bracket.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    limit = analytic.limit_delta_infinity(params)
    gap = lambda d: analytic.total_cost(code, params, d).total - limit
    grid = np.geomspace(MU_DELTA_MIN, MU_DELTA_MAX, grid_points) / params.mu
    below = [i for i, d in enumerate(grid) if gap(d) < 0]
    if not below:
        return DeltaMaxResult(None, None, grid_points)
    last = below[-1]
    if last == len(grid) - 1:
        return DeltaMaxResult(math.inf, (float(grid[-1]), math.inf), grid_points)
    lo, hi = bisect(gap, float(grid[last]), float(grid[last + 1]), tol)
    mid = 0.5 * (lo + hi)
    return DeltaMaxResult(mid, (lo, hi), grid_points, residual=gap(mid))


def optimization_grid(params: NetworkParams, upper: float,
                      grid_points: int = GRID_POINTS) -> np.ndarray:
    """Scan points used by :func:`find_optimal_delta`: zero plus a log grid up to ``upper``."""
    lower = MU_DELTA_MIN / params.mu
    if upper <= lower:
        return np.array([0.0, upper])
    return np.concatenate([[0.0], np.geomspace(lower, upper, grid_points)])


def find_optimal_delta(code: StorageCode, params: NetworkParams, tol: float = 1e-9,
                       grid_points: int = GRID_POINTS) -> OptimalDelta:
    """Repair interval minimizing the expected total cost.

    The search runs over ``[0, delta_max]`` (or up to ``mu * delta = 20`` when
    there is no finite break-even point).  Zero wins unless a positive
    interval is strictly cheaper.
    """
    dmax = find_delta_max(code, params, tol, grid_points).delta_max
    upper = dmax if dmax is not None and math.isfinite(dmax) else MU_DELTA_MAX / params.mu
    grid = optimization_grid(params, upper, grid_points)
    f = _total(code, params)
    costs = np.array([f(d) for d in grid])
    best = int(np.argmin(costs))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    x, fx = golden_section(f, max(lo, tol), hi, tol) if hi > lo else (grid[best], costs[best])
    if fx < costs[best]:
        return OptimalDelta(float(x), float(fx))
    return OptimalDelta(float(grid[best]), float(costs[best]))


def sweep_rho(codes: Sequence[StorageCode], params: NetworkParams, rho_grid: Iterable[float],
              tol: float = 1e-9) -> list[RhoRow]:
    """Normalized break-even interval per (rho, code), with the D2D cost fixed at 1."""
    rows = []
    for rho in rho_grid:
        rho = float(rho)
        if not 1 <= rho <= 1000:
            raise ValueError(f"rho={rho} outside [1, 1000]")
        p = replace(params, rho_bs=rho, rho_d2d=1.0)
        for code in codes:
            res = find_delta_max(code, p, tol)
            value = None if res.delta_max is None else res.delta_max * p.mu
            rows.append(RhoRow(rho, code.label, value))
    return rows
