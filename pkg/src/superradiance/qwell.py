"""Bound states of 1D piecewise-constant potentials and their oscillator strengths.

Lengths are in units of ``L`` and energies in units of ``E_c = hbar**2/(2 m L**2)``,
so the Hamiltonian is ``-d^2/dx^2 + V(x)`` and the oscillator strength of the
``i -> j`` transition reduces to ``f_ij = (E_j - E_i) * d_ij**2``.

The domain ends are hard walls.  The Hamiltonian is discretised with
second-order central differences on a uniform grid; the potential at each node
is the average of ``V`` over the node's cell, which keeps the discrete problem
continuous in the breakpoint positions (needed when fitting geometries).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import least_squares, minimize
from scipy.stats import qmc

from .model import InvalidParameterError, trk_check

MIN_GRID = 200


class InsufficientSpectrumError(RuntimeError):
    def __init__(self, found: int, needed: int = 3):
        super().__init__(f"potential binds {found} state(s) below the continuum edge, need {needed}")
        self.found = found
        self.needed = needed


@dataclass(frozen=True)
class PotentialSpec:
    """Piecewise-constant potential: ``values[k]`` holds between breakpoints ``k-1`` and ``k``.

    ``values[0]`` and ``values[-1]`` are the exterior levels reaching the hard
    walls at ``domain``.  A potential with a single value is a box.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    domain: tuple[float, float]

    def __post_init__(self) -> None:
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        lo, hi = (float(d) for d in self.domain)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidParameterError(f"bad domain ({lo}, {hi})")
        if len(vals) != len(bp) + 1:
            raise InvalidParameterError("need exactly one more value than breakpoints")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError("potential values must be finite")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        if bp and not (lo < bp[0] and bp[-1] < hi):
            raise InvalidParameterError("breakpoints must lie inside the domain")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def continuum_edge(self) -> float:
        """Lowest exterior level; ``inf`` for a box without exterior regions."""
        if len(self.values) == 1:
            return math.inf
        return min(self.values[0], self.values[-1])

    def cell_average(self, x: np.ndarray, h: float) -> np.ndarray:
        """Mean of the potential over ``[x - h/2, x + h/2]`` for every node ``x``."""
        V = np.full(x.shape, self.values[0])
        for k, b in enumerate(self.breakpoints):
            frac = np.clip((x + 0.5 * h - b) / h, 0.0, 1.0)
            V += frac * (self.values[k + 1] - self.values[k])
        return V

    def to_text(self) -> str:
        lo, hi = self.domain
        lines = [f"domain {lo!r} {hi!r}", f"{lo!r} {self.values[0]!r}"]
        lines += [f"{b!r} {v!r}" for b, v in zip(self.breakpoints, self.values[1:])]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "PotentialSpec":
        """Read the plain-text format written by :meth:`to_text`.

        The header is ``domain x_lo x_hi``; each following ``position value``
        line sets the potential from ``position`` onward, the first position
        being ``x_lo``.  Blank lines and ``#`` comments are ignored.
        """
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
        if not rows or rows[0][0] != "domain" or len(rows[0]) != 3:
            raise InvalidParameterError("first line must be 'domain x_lo x_hi'")
        lo, hi = float(rows[0][1]), float(rows[0][2])
        pairs = []
        for r in rows[1:]:
            if len(r) != 2:
                raise InvalidParameterError(f"expected 'position value', got {' '.join(r)!r}")
            pairs.append((float(r[0]), float(r[1])))
        if not pairs or pairs[0][0] != lo:
            raise InvalidParameterError("first position must equal the domain start")
        return cls(tuple(p for p, _ in pairs[1:]), tuple(v for _, v in pairs), (lo, hi))

    @classmethod
    def read(cls, path: str | Path) -> "PotentialSpec":
        return cls.parse(Path(path).read_text())


def infinite_well(width: float = 1.0) -> PotentialSpec:
    return PotentialSpec((), (0.0,), (0.0, width))


@dataclass
class Spectrum:
    energies: np.ndarray
    x: np.ndarray  # node offsets from the domain centre
    psi: np.ndarray  # (n_grid, k), normalised so that h * sum(psi**2) = 1
    h: float
    centre: float

    def dipole(self, i: int, j: int) -> float:
        # psi_i * psi_j first so that d_ij == d_ji bit for bit
        return float(self.h * np.sum((self.psi[:, i] * self.psi[:, j]) * self.x))

    def strength(self, i: int, j: int) -> float:
        return float((self.energies[j] - self.energies[i]) * self.dipole(i, j) ** 2)


def spectrum(pot: PotentialSpec, n_grid: int = 2000, n_states: int = 3) -> Spectrum:
    """Lowest ``n_states`` eigenpairs of the finite-difference Hamiltonian.

    ``n_grid`` interior nodes; the wavefunction vanishes on the walls.
    """
    if n_grid < MIN_GRID:
        raise InvalidParameterError(f"n_grid must be >= {MIN_GRID}")
    lo, hi = pot.domain
    h = (hi - lo) / (n_grid + 1)
    centre = 0.5 * (lo + hi)
    # symmetric node offsets keep mirror-symmetric potentials exactly symmetric
    x = (np.arange(1, n_grid + 1) - 0.5 * (n_grid + 1)) * h
    V = pot.cell_average(centre + x, h)
    diag = 2.0 / h**2 + V
    off = np.full(n_grid - 1, -1.0 / h**2)
    E, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_states - 1))
    psi = vecs / math.sqrt(h)
    for k in range(psi.shape[1]):
        col = psi[:, k]
        first = np.flatnonzero(np.abs(col) > 1e-3 * np.max(np.abs(col)))[0]
        if col[first] < 0:
            psi[:, k] = -col
    return Spectrum(E, x, psi, h, centre)


@dataclass
class WellSolution:
    energies: tuple[float, float, float]
    x: np.ndarray = field(repr=False)
    wavefunctions: np.ndarray = field(repr=False)  # (n_grid, 3)
    dipoles: tuple[float, float, float]  # d01, d02, d12
    strengths: tuple[float, float, float]  # f01, f02, f12
    anharmonicity: float

    def to_dict(self) -> dict:
        d01, d02, d12 = self.dipoles
        f01, f02, f12 = self.strengths
        return {
            "energies": list(self.energies),
            "dipoles": {"d01": d01, "d02": d02, "d12": d12},
            "strengths": {"f01": f01, "f02": f02, "f12": f12},
            "anharmonicity": self.anharmonicity,
            "n_grid": int(self.x.size),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_wavefunctions_csv(self, fh) -> None:
        fh.write("x,psi0,psi1,psi2\n")
        for xi, row in zip(self.x, self.wavefunctions):
            fh.write(",".join(format(float(v), ".9g") for v in (xi, *row)) + "\n")


def solve_bound_states(pot: PotentialSpec, n_grid: int = 2000) -> WellSolution:
    spec = spectrum(pot, n_grid, 3)
    found = int(np.sum(spec.energies < pot.continuum_edge))
    if found < 3:
        raise InsufficientSpectrumError(found)
    E = spec.energies
    dipoles = (spec.dipole(0, 1), spec.dipole(0, 2), spec.dipole(1, 2))
    strengths = (spec.strength(0, 1), spec.strength(0, 2), spec.strength(1, 2))
    return WellSolution(
        energies=(float(E[0]), float(E[1]), float(E[2])),
        x=spec.x + spec.centre,
        wavefunctions=spec.psi,
        dipoles=dipoles,
        strengths=strengths,
        anharmonicity=float((E[1] - E[0]) / (E[2] - E[1])),
    )


def strengths_from_potential(pot: PotentialSpec, n_grid: int = 2000
                             ) -> tuple[float, float, float, float]:
    """``(f01, f02, f12, omega10/omega21)`` of the three lowest bound states."""
    sol = solve_bound_states(pot, n_grid)
    return (*sol.strengths, sol.anharmonicity)


def ground_sum_rule(pot: PotentialSpec, n_states: int = 10, n_grid: int = 2000) -> float:
    """Truncated TRK sum ``sum_j f_0j`` over the lowest ``n_states`` states."""
    spec = spectrum(pot, n_grid, n_states)
    return float(sum(spec.strength(0, j) for j in range(1, n_states)))


# ---------------------------------------------------------------------------
# Inverse design


class WellFamily(Protocol):
    names: tuple[str, ...]
    x_scale: np.ndarray

    def build(self, params: np.ndarray) -> PotentialSpec: ...

    def valid(self, params: np.ndarray) -> bool: ...

    def starts(self) -> np.ndarray: ...


@dataclass(frozen=True)
class SingleWellFamily:
    """Hard-wall box of adjustable width (all ratios are width independent)."""

    names: tuple[str, ...] = ("width",)

    @property
    def x_scale(self) -> np.ndarray:
        return np.array([0.1])

    def build(self, params) -> PotentialSpec:
        return infinite_well(float(params[0]))

    def valid(self, params) -> bool:
        return bool(params[0] > 0.05)

    def starts(self) -> np.ndarray:
        return np.array([[1.0]])


@dataclass(frozen=True)
class TwoWellFamily:
    """Two square wells separated by a square barrier, inside a flat exterior at 0.

    Left well bottom at ``-depth``; barrier top at ``-depth + barrier_height``;
    right well bottom at ``-depth + depth_offset``.  ``pad`` of exterior
    separates the structure from each hard wall.
    """

    depth: float = 100.0
    pad: float = 2.0
    names: tuple[str, ...] = ("width1", "width2", "barrier_width", "barrier_height",
                              "depth_offset")
    lower: tuple[float, ...] = (0.05, 0.05, 0.02, 0.0, -90.0)
    upper: tuple[float, ...] = (1.0, 1.0, 0.5, 200.0, 90.0)

    @property
    def x_scale(self) -> np.ndarray:
        return np.array([0.1, 0.1, 0.1, 10.0, 10.0])

    def build(self, params) -> PotentialSpec:
        a, c, b, height, offset = (float(p) for p in params)
        total = a + b + c
        return PotentialSpec(
            (0.0, a, a + b, total),
            (0.0, -self.depth, -self.depth + height, -self.depth + offset, 0.0),
            (-self.pad, total + self.pad),
        )

    def valid(self, params) -> bool:
        a, c, b, height, offset = params
        return bool(min(a, c) > 0.01 and b > 0.005 and height >= 0 and abs(offset) < self.depth)

    def starts(self) -> np.ndarray:
        sampler = qmc.Sobol(d=5, scramble=True, seed=20121)
        return qmc.scale(sampler.random(256), self.lower, self.upper)


DEFAULT_WEIGHTS = (1.0, 1.0, 1.0, 5.0)


@dataclass
class FitResult:
    potential: PotentialSpec
    params: dict[str, float]
    achieved: tuple[float, float, float, float]
    targets: tuple[float, float, float, float]
    residual: float
    success: bool

    def to_dict(self) -> dict:
        names = ("f01", "f02", "f12", "anharmonicity")
        return {
            "params": self.params,
            "targets": dict(zip(names, self.targets)),
            "achieved": dict(zip(names, self.achieved)),
            "residual": self.residual,
            "success": self.success,
            "potential": self.potential.to_text(),
        }


_PENALTY = 10.0


def _weighted_errors(family: WellFamily, params, targets, weights, n_grid) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if not family.valid(params):
        return np.full(4, _PENALTY)
    pot = family.build(params)
    spec = spectrum(pot, n_grid, 3)
    E = spec.energies
    if E[2] >= pot.continuum_edge:
        return np.full(4, _PENALTY + float(E[2] - pot.continuum_edge))
    got = np.array([spec.strength(0, 1), spec.strength(0, 2), spec.strength(1, 2),
                    (E[1] - E[0]) / (E[2] - E[1])])
    return np.asarray(weights) * (got - targets)


def fit_potential(targets: Sequence[float], family: WellFamily | None = None, *,
                  n_grid: int = 1500, weights: Sequence[float] = DEFAULT_WEIGHTS,
                  tol: float = 1e-2, n_refine: int = 4) -> FitResult:
    """Fit a well geometry to ``(f01, f02, f12, anharmonicity)``.

    The weighted residual is ``|w * (achieved - targets)|``; by default the
    anharmonicity error counts five times.  Starts from ``family.starts()`` are
    screened, the best ``n_refine`` are refined by simplex descent, and the
    winner is polished by a trust-region least-squares step.  ``success`` is
    ``residual < tol``; the best effort is returned either way.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (4,) or not np.all(np.isfinite(targets)):
        raise InvalidParameterError("targets must be (f01, f02, f12, anharmonicity)")
    report = trk_check(*targets[:3])
    if not report.feasible:
        raise InvalidParameterError(f"targets violate the TRK inequalities: {report.summary()}")
    if targets[3] <= 0:
        raise InvalidParameterError("anharmonicity target must be positive")
    family = TwoWellFamily() if family is None else family

    def errors(p):
        return _weighted_errors(family, p, targets, weights, n_grid)

    def norm(p):
        return float(np.linalg.norm(errors(p)))

    starts = family.starts()
    screened = sorted(((norm(p), tuple(p)) for p in starts))[:n_refine]
    refined = []
    for _, p0 in screened:
        p = np.array(p0)
        # simplex restarts recover from early collapse in five dimensions
        for _ in range(3):
            res = minimize(norm, p, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 1500})
            p = res.x
        refined.append((float(res.fun), tuple(p)))
    refined.sort()
    best = np.array(refined[0][1])
    if len(best) > 0:
        polish = least_squares(errors, best, x_scale=family.x_scale, xtol=1e-14, ftol=1e-14)
        if np.linalg.norm(polish.fun) < norm(best) and family.valid(polish.x):
            best = polish.x
    residual = norm(best)
    pot = family.build(best)
    spec = spectrum(pot, n_grid, 3)
    E = spec.energies
    achieved = (spec.strength(0, 1), spec.strength(0, 2), spec.strength(1, 2),
                float((E[1] - E[0]) / (E[2] - E[1])))
    return FitResult(
        potential=pot,
        params={k: float(v) for k, v in zip(family.names, best)},
        achieved=tuple(float(a) for a in achieved),
        targets=tuple(float(t) for t in targets),
        residual=residual,
        success=residual < tol,
    )
