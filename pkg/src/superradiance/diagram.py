"""Phase-diagram scans over oscillator-strength planes and volumes."""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .meanfield import (
    DEFAULT_SETTINGS,
    X_TOL,
    GroundState,
    MinimizerSettings,
    _make_state,
    local_minima,
    minimize_arrays,
    populations,
)
from .model import InvalidParameterError, ModelParams, TrkCoupling, trk_check, trk_feasible_mask

AXES = ("f01", "f02", "f12")
# Upper limit on scanned strengths; the ladder TRK region reaches f12 = 2.
MAX_STRENGTH = 2.0

JUMP_TOL = 1e-3
BISECT_TOL = 1e-10
COEXIST_ENERGY_TOL = 1e-6
COEXIST_X_GAP = 0.01

CSV_HEADER = ["axis1", "axis2", "x", "abs_x", "y", "z", "energy", "p0", "p1", "p2",
              "phase", "trk_feasible"]
BOUNDARY_HEADER = ["axis1", "axis2", "jump", "order"]


class BoundaryNotFound(LookupError):
    """A scan line has no Normal/Superradiant flip."""


class Order(str, enum.Enum):
    FIRST = "First"
    SECOND = "Second"
    AMBIGUOUS = "Ambiguous"


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int = 201

    def __post_init__(self) -> None:
        if self.name not in AXES:
            raise InvalidParameterError(f"axis must be one of {AXES}, got {self.name!r}")
        lo, hi = float(self.lo), float(self.hi)
        if not (0.0 <= lo <= hi <= MAX_STRENGTH):
            raise InvalidParameterError(
                f"axis {self.name} range [{lo}, {hi}] must lie within [0, {MAX_STRENGTH}]")
        if int(self.steps) < 1:
            raise InvalidParameterError("axis needs at least one step")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class ScanSpec:
    """Rectangular scan of two oscillator strengths; the third comes from ``base``."""

    base: ModelParams
    axis1: Axis
    axis2: Axis

    def __post_init__(self) -> None:
        if not isinstance(self.base.coupling, TrkCoupling):
            raise InvalidParameterError("scans need a base model in oscillator-strength mode")
        if self.axis1.name == self.axis2.name:
            raise InvalidParameterError("axis1 and axis2 must differ")
        if self.axis1.steps < 2 or self.axis2.steps < 2:
            raise InvalidParameterError("each scan axis needs at least 2 steps")

    @property
    def fixed_axis(self) -> str:
        return next(a for a in AXES if a not in (self.axis1.name, self.axis2.name))

    @property
    def fixed_value(self) -> float:
        return getattr(self.base.coupling, self.fixed_axis)

    def to_dict(self) -> dict:
        return {
            "omega10": self.base.omega10,
            "omega21": self.base.omega21,
            "D": self.base.D,
            "axis1": [self.axis1.name, self.axis1.lo, self.axis1.hi, self.axis1.steps],
            "axis2": [self.axis2.name, self.axis2.lo, self.axis2.hi, self.axis2.steps],
            self.fixed_axis: self.fixed_value,
        }


def _rabi_arrays(base: ModelParams, f01, f02, f12):
    D = base.D
    return (np.sqrt(f01 * base.omega10 * D), np.sqrt(f02 * base.omega20 * D),
            np.sqrt(f12 * base.omega21 * D))


@contextmanager
def _executor(threads: int | None):
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex


def _solve_strengths(base: ModelParams, f01, f02, f12, settings: MinimizerSettings,
                     threads: int | None = 1):
    if base.D == 0 and (np.any(f01) or np.any(f02) or np.any(f12)):
        raise InvalidParameterError("oscillator-strength scans need D > 0")
    O01, O02, O12 = _rabi_arrays(base, f01, f02, f12)
    with _executor(threads) as ex:
        return minimize_arrays(base.omega10, base.omega21, base.D, O01, O02, O12,
                               settings=settings, executor=ex)


@dataclass
class PhaseGrid:
    """Ground states on a ``steps1 x steps2`` grid; arrays are indexed ``[i1, i2]``."""

    spec: ScanSpec
    values1: np.ndarray
    values2: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    energy: np.ndarray
    trk_feasible: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    @property
    def superradiant(self) -> np.ndarray:
        return np.abs(self.x) > X_TOL

    @property
    def sr_trk_mask(self) -> np.ndarray:
        return self.superradiant & self.trk_feasible

    @property
    def sr_trk_count(self) -> int:
        return int(self.sr_trk_mask.sum())

    def strengths(self, i: int, j: int) -> dict[str, float]:
        out = {self.spec.fixed_axis: self.spec.fixed_value}
        out[self.spec.axis1.name] = float(self.values1[i])
        out[self.spec.axis2.name] = float(self.values2[j])
        return out

    def cell(self, i: int, j: int) -> tuple[GroundState, bool]:
        state = _make_state(float(self.x[i, j]), float(self.y[i, j]), float(self.z[i, j]),
                            float(self.energy[i, j]))
        return state, bool(self.trk_feasible[i, j])

    def area(self, mask: np.ndarray | None = None) -> float:
        """Area of ``mask`` (default SR and TRK-feasible) by trapezoidal node weights."""
        mask = self.sr_trk_mask if mask is None else mask
        w1 = np.full(self.values1.size, self.values1[1] - self.values1[0])
        w2 = np.full(self.values2.size, self.values2[1] - self.values2[0])
        w1[[0, -1]] *= 0.5
        w2[[0, -1]] *= 0.5
        return float(np.sum(mask * np.outer(w1, w2)))

    def rows(self) -> Iterable[list[str]]:
        for i, a in enumerate(self.values1):
            for j, b in enumerate(self.values2):
                x, y, z = self.x[i, j], self.y[i, j], self.z[i, j]
                p0, p1, p2 = populations(float(y), float(z))
                yield [_fmt(a), _fmt(b), _fmt(x), _fmt(abs(x)), _fmt(y), _fmt(z),
                       _fmt(self.energy[i, j]), _fmt(p0), _fmt(p1), _fmt(p2),
                       "SR" if abs(x) > X_TOL else "N", "1" if self.trk_feasible[i, j] else "0"]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self.rows())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _grid_strengths(spec: ScanSpec, v1: np.ndarray, v2: np.ndarray):
    A, B = np.meshgrid(v1, v2, indexing="ij")
    f = {spec.axis1.name: A, spec.axis2.name: B,
         spec.fixed_axis: np.full(A.shape, spec.fixed_value)}
    return f["f01"], f["f02"], f["f12"]


def scan_2d(spec: ScanSpec, *, settings: MinimizerSettings = DEFAULT_SETTINGS,
            threads: int | None = 1) -> PhaseGrid:
    v1, v2 = spec.axis1.values, spec.axis2.values
    f01, f02, f12 = _grid_strengths(spec, v1, v2)
    res = _solve_strengths(spec.base, f01.ravel(), f02.ravel(), f12.ravel(), settings, threads)
    shape = f01.shape
    return PhaseGrid(spec, v1, v2, res.x.reshape(shape), res.y.reshape(shape),
                     res.z.reshape(shape), res.energy.reshape(shape),
                     trk_feasible_mask(f01, f02, f12))


# ---------------------------------------------------------------------------
# Boundaries


@dataclass(frozen=True)
class Crossing:
    """A refined Normal/Superradiant crossing on one scan line."""

    axis1: float
    axis2: float
    jump: float
    order: Order
    trk_feasible: bool
    coexistence: bool | None = None
    energy_gap: float | None = None


@dataclass(frozen=True)
class BoundarySegment:
    points: tuple[Crossing, ...]

    @property
    def order(self) -> Order:
        orders = {p.order for p in self.points}
        return orders.pop() if len(orders) == 1 else Order.AMBIGUOUS

    def __len__(self) -> int:
        return len(self.points)


def locate_crossings(abs_x: Callable[[np.ndarray], np.ndarray], lo, hi, *,
                     tol: float = BISECT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Bisect many phase flips at once.

    ``abs_x(t)`` returns ``|x|`` for each bracket ``k`` at parameter ``t[k]``;
    every bracket ``[lo[k], hi[k]]`` must have different phases at its ends.
    Returns the crossing positions and the jump ``| |x(hi)| - |x(lo)| |``
    across the final bracket of width ``<= tol``.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo, lo.copy()
    x_lo = np.asarray(abs_x(lo), dtype=float)
    x_hi = np.asarray(abs_x(hi), dtype=float)
    sr_lo = x_lo > X_TOL
    if np.any(sr_lo == (x_hi > X_TOL)):
        raise BoundaryNotFound("bracket ends share the same phase")
    width = np.max(np.abs(hi - lo))
    n_steps = max(0, int(np.ceil(np.log2(width / tol)))) if width > tol else 0
    for _ in range(n_steps):
        mid = 0.5 * (lo + hi)
        x_mid = np.asarray(abs_x(mid), dtype=float)
        same_as_lo = (x_mid > X_TOL) == sr_lo
        lo = np.where(same_as_lo, mid, lo)
        x_lo = np.where(same_as_lo, x_mid, x_lo)
        hi = np.where(same_as_lo, hi, mid)
        x_hi = np.where(same_as_lo, x_hi, x_mid)
    return 0.5 * (lo + hi), np.abs(x_hi - x_lo)


def order_from_jump(jump: float, coexistence: bool | None = None) -> Order:
    """Second below ``JUMP_TOL``; First above it (and, if checked, with coexisting minima)."""
    if jump < JUMP_TOL:
        return Order.SECOND
    if coexistence is None or coexistence:
        return Order.FIRST
    return Order.AMBIGUOUS


def coexisting_minima(params: ModelParams, *,
                      settings: MinimizerSettings = DEFAULT_SETTINGS) -> tuple[bool, float | None]:
    """Two nearly degenerate minima with clearly different ``|x|``?

    Returns the verdict and the energy gap between the lowest minimum and its
    closest competitor with a different ``|x|``.
    """
    minima = local_minima(params, settings=settings)
    if len(minima) < 2:
        return False, None
    best = minima[0]
    others = [m for m in minima[1:] if abs(m.abs_x - best.abs_x) > COEXIST_X_GAP]
    if not others:
        return False, None
    gap = others[0].energy_per_atom - best.energy_per_atom
    return gap < COEXIST_ENERGY_TOL, gap


def _line_flips(grid: PhaseGrid, axis: str, lines: Iterable[int]):
    sr = grid.superradiant
    out = []
    for line in lines:
        along = sr[line, :] if axis == "axis2" else sr[:, line]
        for k in np.flatnonzero(along[1:] != along[:-1]):
            out.append((line, int(k)))
    return out


def _refine(grid: PhaseGrid, axis: str, flips, settings: MinimizerSettings,
            check_coexistence: bool) -> list[Crossing]:
    if axis not in ("axis1", "axis2"):
        raise ValueError("axis must be 'axis1' or 'axis2'")
    spec = grid.spec
    vary, fixed_vals = ((spec.axis2.name, grid.values1) if axis == "axis2"
                        else (spec.axis1.name, grid.values2))
    other = spec.axis1.name if axis == "axis2" else spec.axis2.name
    along = grid.values2 if axis == "axis2" else grid.values1
    line_idx = np.array([f[0] for f in flips], dtype=int)
    k_idx = np.array([f[1] for f in flips], dtype=int)
    other_vals = fixed_vals[line_idx]

    def strengths(t):
        f = {vary: t, other: other_vals, spec.fixed_axis: np.full(t.shape, spec.fixed_value)}
        return f["f01"], f["f02"], f["f12"]

    def abs_x(t):
        return np.abs(_solve_strengths(spec.base, *strengths(t), settings).x)

    pos, jump = locate_crossings(abs_x, along[k_idx], along[k_idx + 1])
    f01, f02, f12 = strengths(pos)
    out = []
    for n in range(pos.size):
        coexist, gap = None, None
        if check_coexistence and jump[n] >= JUMP_TOL:
            params = replace(spec.base, coupling=TrkCoupling(f01[n], f02[n], f12[n]))
            coexist, gap = coexisting_minima(params, settings=settings)
        a1, a2 = (other_vals[n], pos[n]) if axis == "axis2" else (pos[n], other_vals[n])
        out.append(Crossing(float(a1), float(a2), float(jump[n]),
                            order_from_jump(float(jump[n]), coexist),
                            trk_check(f01[n], f02[n], f12[n]).feasible, coexist, gap))
    return out


def refine_boundary(grid: PhaseGrid, line_index: int, axis: str = "axis2", *,
                    check_coexistence: bool = False,
                    settings: MinimizerSettings = DEFAULT_SETTINGS) -> BoundarySegment:
    """Refine every crossing on one scan line.

    ``axis`` names the coordinate that varies along the line; ``line_index``
    indexes the other one.
    """
    flips = _line_flips(grid, axis, [line_index])
    if not flips:
        raise BoundaryNotFound(f"no phase flip on {axis} line {line_index}")
    return BoundarySegment(tuple(_refine(grid, axis, flips, settings, check_coexistence)))


def classify_order(grid: PhaseGrid, axis: str = "axis2", *,
                   settings: MinimizerSettings = DEFAULT_SETTINGS) -> list[Crossing]:
    """Refine and label every crossing on every scan line of ``grid``."""
    n_lines = grid.shape[0] if axis == "axis2" else grid.shape[1]
    flips = _line_flips(grid, axis, range(n_lines))
    if not flips:
        return []
    return _refine(grid, axis, flips, settings, check_coexistence=True)


def order_tally(crossings: Iterable[Crossing]) -> dict[str, int]:
    counts = Counter(c.order.value for c in crossings)
    return {o.value: counts.get(o.value, 0) for o in Order}


def write_boundary_csv(crossings: Iterable[Crossing], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(BOUNDARY_HEADER)
    for c in crossings:
        writer.writerow([_fmt(c.axis1), _fmt(c.axis2), _fmt(c.jump), c.order.value])


def summary(grid: PhaseGrid, crossings: Iterable[Crossing] = (), config: dict | None = None) -> dict:
    crossings = list(crossings)
    return {
        "config": config if config is not None else grid.spec.to_dict(),
        "cells": int(grid.x.size),
        "superradiant_cells": int(grid.superradiant.sum()),
        "trk_feasible_cells": int(grid.trk_feasible.sum()),
        "sr_trk_cells": grid.sr_trk_count,
        "boundary_orders": order_tally(crossings),
        "boundary_orders_in_trk": order_tally(c for c in crossings if c.trk_feasible),
    }


def dump_summary(data: dict, fh) -> None:
    json.dump(data, fh, indent=2, sort_keys=True)
    fh.write("\n")


# ---------------------------------------------------------------------------
# Volumes


@dataclass
class VoxelSet:
    """Sparse set of voxels that are superradiant and TRK-feasible."""

    axes: dict[str, np.ndarray]
    points: np.ndarray  # (n, 3) columns f01, f02, f12
    evaluated: int  # TRK-feasible voxels, the only ones minimised
    total: int
    base: ModelParams = field(repr=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    def nearest_voxel(self, f01: float, f02: float, f12: float) -> tuple[float, float, float]:
        target = {"f01": f01, "f02": f02, "f12": f12}
        return tuple(float(self.axes[a][np.argmin(np.abs(self.axes[a] - target[a]))])
                     for a in AXES)

    def contains(self, f01: float, f02: float, f12: float) -> bool:
        """Whether the voxel nearest to the given strengths is in the set."""
        v = np.array(self.nearest_voxel(f01, f02, f12))
        return bool(np.any(np.all(np.isclose(self.points, v, rtol=0, atol=1e-12), axis=1)))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["f01", "f02", "f12"])
        for row in self.points:
            writer.writerow([_fmt(v) for v in row])


def scan_3d(base: ModelParams, steps: int | tuple[int, int, int] = 41,
            ranges: tuple[float, float] | dict[str, tuple[float, float]] = (0.0, 1.0), *,
            settings: MinimizerSettings = DEFAULT_SETTINGS,
            threads: int | None = 1) -> VoxelSet:
    """Voxels of the ``(f01, f02, f12)`` cube that are superradiant and TRK-feasible."""
    if isinstance(steps, int):
        steps = (steps,) * 3
    if not isinstance(ranges, dict):
        ranges = {a: tuple(ranges) for a in AXES}
    axes = {a: Axis(a, *ranges[a], steps=n).values for a, n in zip(AXES, steps)}
    F01, F02, F12 = np.meshgrid(axes["f01"], axes["f02"], axes["f12"], indexing="ij")
    f01, f02, f12 = F01.ravel(), F02.ravel(), F12.ravel()
    feasible = trk_feasible_mask(f01, f02, f12)
    sr = np.zeros(f01.size, dtype=bool)
    if feasible.any():
        sel = np.flatnonzero(feasible)
        res = _solve_strengths(base, f01[sel], f02[sel], f12[sel], settings, threads)
        sr[sel] = res.superradiant
    keep = sr & feasible
    points = np.column_stack([f01[keep], f02[keep], f12[keep]])
    return VoxelSet(axes, points, int(feasible.sum()), int(f01.size), base)


# ---------------------------------------------------------------------------
# Lines in direct-coupling mode

RABI_AXES = ("Omega01", "Omega02", "Omega12")


@dataclass
class RabiLine:
    """Ground states along one Rabi frequency with the other couplings fixed."""

    base: ModelParams
    axis: str
    values: np.ndarray
    x: np.ndarray
    energy: np.ndarray
    crossings: list[tuple[float, float, Order]]  # (position, jump, order)

    @property
    def superradiant(self) -> np.ndarray:
        return np.abs(self.x) > X_TOL


def scan_rabi_line(base: ModelParams, axis: str = "Omega01", lo: float = 0.0, hi: float = 1.0,
                   steps: int = 101, *,
                   settings: MinimizerSettings = DEFAULT_SETTINGS) -> RabiLine:
    """Scan and refine a line in direct-coupling mode (``D`` may be zero)."""
    if axis not in RABI_AXES:
        raise InvalidParameterError(f"axis must be one of {RABI_AXES}, got {axis!r}")
    if not (0.0 <= lo < hi) or steps < 2:
        raise InvalidParameterError("need 0 <= lo < hi and at least 2 steps")
    fixed = dict(zip(RABI_AXES, base.rabi))

    def solve(t):
        t = np.asarray(t, dtype=float)
        O = {a: (t if a == axis else np.full(t.shape, fixed[a])) for a in RABI_AXES}
        return minimize_arrays(base.omega10, base.omega21, base.D, O["Omega01"], O["Omega02"],
                               O["Omega12"], settings=settings)

    values = np.linspace(lo, hi, steps)
    res = solve(values)
    sr = np.abs(res.x) > X_TOL
    k = np.flatnonzero(sr[1:] != sr[:-1])
    crossings = []
    if k.size:
        pos, jump = locate_crossings(lambda t: np.abs(solve(t).x), values[k], values[k + 1])
        for p, j in zip(pos, jump):
            coexist = None
            if j >= JUMP_TOL:
                O = {a: (float(p) if a == axis else fixed[a]) for a in RABI_AXES}
                params = ModelParams.from_rabi(O["Omega01"], O["Omega02"], O["Omega12"],
                                               D=base.D, omega10=base.omega10,
                                               omega21=base.omega21)
                coexist, _ = coexisting_minima(params, settings=settings)
            crossings.append((float(p), float(j), order_from_jump(float(j), coexist)))
    return RabiLine(base, axis, values, res.x, res.energy, crossings)
