"""Mean-field ground state of N three-level atoms in a single cavity mode.

After rescaling by ``sqrt(N)`` the state is described by the photon amplitude
``x`` and the atomic coherences ``(y, z)`` relative to the reference level 1,
constrained to the unit disk ``y**2 + z**2 <= 1``.  The photon amplitude is
eliminated analytically, leaving the reduced energy

    E(y, z) = -omega10*y**2 + omega21*z**2 + omega10 - 4/(1 + 4D) * B(y, z)**2
    B(y, z) = (Omega01*y + Omega12*z) * sqrt(1 - y**2 - z**2) + Omega02*y*z

whose global minimum over the disk is the ground state.

Minimisation works on the sphere of single-atom amplitudes
``(y, w, z) = (sin t cos p, cos t, sin t sin p)``.  The map ``(t, p) -> (y, z)``
covers the disk (``t > pi/2`` is the overall sign flip of the atomic state,
which leaves the energy unchanged), and the energy is smooth in ``(t, p)``
including at the rim, so no box constraint is needed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._simplex import nelder_mead_batch
from .model import OMEGA_CAV, ModelParams, rabi_from_trk

X_TOL = 1e-6
DEDUP_DIST = 1e-3
RIM_EPS = 1e-12


class OutOfDomainError(ValueError):
    """Raised when a coherence point lies outside the region an operation accepts."""


class Phase(str, enum.Enum):
    NORMAL = "N"
    SUPERRADIANT = "SR"


@dataclass(frozen=True)
class CoherencePoint:
    y: float
    z: float

    def __post_init__(self) -> None:
        y, z = float(self.y), float(self.z)
        if not (math.isfinite(y) and math.isfinite(z)):
            raise OutOfDomainError(f"non-finite coherence ({y}, {z})")
        if y * y + z * z > 1 + RIM_EPS:
            raise OutOfDomainError(f"({y}, {z}) lies outside the unit disk")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def w(self) -> float:
        """Amplitude of the reference level, ``sqrt(1 - y**2 - z**2)``."""
        return math.sqrt(max(0.0, 1.0 - self.y * self.y - self.z * self.z))


@dataclass(frozen=True)
class GroundState:
    x: float
    coherence: CoherencePoint
    energy_per_atom: float
    populations: tuple[float, float, float]
    phase: Phase

    @property
    def y(self) -> float:
        return self.coherence.y

    @property
    def z(self) -> float:
        return self.coherence.z

    @property
    def abs_x(self) -> float:
        return abs(self.x)

    @property
    def is_superradiant(self) -> bool:
        return self.phase is Phase.SUPERRADIANT


@dataclass(frozen=True)
class MinimizerSettings:
    """Knobs of the multistart scheme.

    ``n_rho`` rings per hemisphere times ``n_theta`` azimuths form the start
    lattice; every lattice point that is a discrete local minimum (up to
    ``max_candidates`` per problem, lowest first) is refined by simplex descent.
    """

    n_rho: int = 24
    n_theta: int = 24
    max_candidates: int = 8
    xatol: float = 1e-8
    fatol: float = 1e-12
    maxiter: int = 3000
    chunk: int = 512

    def __post_init__(self) -> None:
        if self.n_rho < 2 or self.n_theta < 4 or self.n_theta % 2:
            raise ValueError("need n_rho >= 2 and an even n_theta >= 4")


DEFAULT_SETTINGS = MinimizerSettings()


# ---------------------------------------------------------------------------
# Point evaluations on the disk


def _couplings(params: ModelParams) -> tuple[float, float, float, float]:
    O01, O02, O12 = rabi_from_trk(params)
    return O01, O02, O12, 4.0 / (OMEGA_CAV + 4.0 * params.D)


def _bracket(y: float, z: float, w: float, O01: float, O02: float, O12: float) -> float:
    return (O01 * y + O12 * z) * w + O02 * y * z


def _as_point(p) -> CoherencePoint:
    return p if isinstance(p, CoherencePoint) else CoherencePoint(*p)


def coupling_bracket(p: CoherencePoint | Sequence[float], params: ModelParams) -> float:
    """``B(y, z)``, the atomic polarisation that drives the photon field."""
    p = _as_point(p)
    O01, O02, O12, _ = _couplings(params)
    return _bracket(p.y, p.z, p.w, O01, O02, O12)


def photon_amplitude(p: CoherencePoint | Sequence[float], params: ModelParams) -> float:
    """Optimal photon amplitude for fixed atomic coherences, ``-2B/(omega_cav + 4D)``."""
    return -2.0 * coupling_bracket(p, params) / (OMEGA_CAV + 4.0 * params.D)


def full_energy(x: float, p: CoherencePoint | Sequence[float], params: ModelParams) -> float:
    """Energy per atom before eliminating the photon amplitude."""
    p = _as_point(p)
    B = coupling_bracket(p, params)
    return ((OMEGA_CAV + 4.0 * params.D) * x * x - params.omega10 * p.y ** 2
            + params.omega21 * p.z ** 2 + params.omega10 + 4.0 * x * B)


def reduced_energy(p: CoherencePoint | Sequence[float], params: ModelParams) -> float:
    p = _as_point(p)
    O01, O02, O12, c = _couplings(params)
    B = _bracket(p.y, p.z, p.w, O01, O02, O12)
    # omega10*(1 - y^2) written without the cancellation near y = +-1
    return (params.omega10 * (1.0 - p.y) * (1.0 + p.y) + params.omega21 * p.z ** 2
            - c * B * B)


def reduced_gradient(p: CoherencePoint | Sequence[float], params: ModelParams) -> tuple[float, float]:
    """Analytic ``(dE/dy, dE/dz)`` of :func:`reduced_energy`; interior points only."""
    p = _as_point(p)
    y, z = p.y, p.z
    w2 = 1.0 - y * y - z * z
    if w2 <= RIM_EPS:
        raise OutOfDomainError(f"gradient undefined on the rim, got ({y}, {z})")
    w = math.sqrt(w2)
    O01, O02, O12, c = _couplings(params)
    lin = O01 * y + O12 * z
    B = lin * w + O02 * y * z
    dB_dy = O01 * w - lin * y / w + O02 * z
    dB_dz = O12 * w - lin * z / w + O02 * y
    return (-2.0 * params.omega10 * y - 2.0 * c * B * dB_dy,
            2.0 * params.omega21 * z - 2.0 * c * B * dB_dz)


def normal_state_stable(params: ModelParams) -> bool:
    """Whether ``(y, z) = (1, 0)`` is a strict local minimum.

    Around the normal state the energy is the quadratic form
    ``omega10*w**2 + omega20*z**2 - c*(Omega01*w + Omega02*z)**2``.
    """
    O01, O02, _, c = _couplings(params)
    a = params.omega10 - c * O01 * O01
    d = params.omega20 - c * O02 * O02
    b = -c * O01 * O02
    return a > 0 and a * d - b * b > 0


def populations(y: float, z: float) -> tuple[float, float, float]:
    p0, p2 = y * y, z * z
    return (p0, max(0.0, 1.0 - (p0 + p2)), p2)


# ---------------------------------------------------------------------------
# Batched minimisation


class _Batch(NamedTuple):
    omega10: np.ndarray
    omega21: np.ndarray
    omega20: np.ndarray
    O01: np.ndarray
    O02: np.ndarray
    O12: np.ndarray
    c: np.ndarray

    def take(self, idx) -> "_Batch":
        return _Batch(*(a[idx] for a in self))

    def __len__(self) -> int:  # type: ignore[override]
        return self.omega10.shape[0]


def _batch_from_arrays(omega10, omega21, D, O01, O02, O12) -> _Batch:
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float).ravel() for a in
                                   (omega10, omega21, D, O01, O02, O12)))
    w10, w21, D, O01, O02, O12 = (np.ascontiguousarray(a) for a in arrays)
    return _Batch(w10, w21, w10 + w21, O01, O02, O12, 4.0 / (OMEGA_CAV + 4.0 * D))


def _batch_from_params(params: Sequence[ModelParams]) -> _Batch:
    rabi = np.array([rabi_from_trk(p) for p in params], dtype=float).reshape(-1, 3)
    return _batch_from_arrays([p.omega10 for p in params], [p.omega21 for p in params],
                              [p.D for p in params], rabi[:, 0], rabi[:, 1], rabi[:, 2])


def _sphere_energy(b: _Batch, y, w, z):
    B = w * (b.O01 * y + b.O12 * z) + b.O02 * y * z
    return b.omega10 * w * w + b.omega20 * z * z - b.c * B * B


class _Lattice:
    def __init__(self, n_rho: int, n_theta: int):
        self.n_rho, self.n_theta = n_rho, n_theta
        self.t = (np.arange(2 * n_rho) + 0.5) * (np.pi / (2 * n_rho))
        self.p = np.arange(n_theta) * (2 * np.pi / n_theta)
        T, P = np.meshgrid(self.t, self.p, indexing="ij")
        self.T, self.P = T, P
        self.y = np.sin(T) * np.cos(P)
        self.w = np.cos(T)
        self.z = np.sin(T) * np.sin(P)
        self.dt = np.pi / (2 * n_rho)
        self.dp = 2 * np.pi / n_theta


_LATTICES: dict[tuple[int, int], _Lattice] = {}


def _lattice(settings: MinimizerSettings) -> _Lattice:
    key = (settings.n_rho, settings.n_theta)
    if key not in _LATTICES:
        _LATTICES[key] = _Lattice(*key)
    return _LATTICES[key]


def _lattice_candidates(b: _Batch, lat: _Lattice, k_max: int):
    """Discrete local minima of the lattice energy, mapped onto ``w >= 0``."""
    E = _sphere_energy(
        _Batch(*(a[:, None, None] for a in b)), lat.y[None], lat.w[None], lat.z[None]
    )
    pad = np.full(E.shape[:1] + (1,) + E.shape[2:], np.inf)
    Ep = np.concatenate([pad, E, pad], axis=1)
    is_min = np.ones(E.shape, dtype=bool)
    for dt in (-1, 0, 1):
        rows = Ep[:, 1 + dt:Ep.shape[1] - 1 + dt]
        for dp in (-1, 0, 1):
            if dt == 0 and dp == 0:
                continue
            is_min &= E <= np.roll(rows, -dp, axis=2)
    n = lat.n_rho
    upper = is_min[:, :n]
    mirrored = np.roll(is_min[:, n:][:, ::-1], lat.n_theta // 2, axis=2)
    cand = upper | mirrored
    Ec = np.where(cand, E[:, :n], np.inf).reshape(len(b), -1)
    k = min(k_max, Ec.shape[1])
    order = np.argsort(Ec, axis=1, kind="stable")[:, :k]
    valid = np.isfinite(np.take_along_axis(Ec, order, axis=1))
    t0 = lat.T[:n].ravel()[order]
    p0 = lat.P[:n].ravel()[order]
    return t0, p0, valid


def _refine(b: _Batch, owner: np.ndarray, t0: np.ndarray, p0: np.ndarray,
            lat: _Lattice, settings: MinimizerSettings):
    def objective(idx, X):
        s = np.sin(X[:, 0])
        sub = b.take(owner[idx])
        return _sphere_energy(sub, s * np.cos(X[:, 1]), np.cos(X[:, 0]), s * np.sin(X[:, 1]))

    x0 = np.column_stack([t0, p0])
    step = np.array([lat.dt, lat.dp]) * 0.5
    kw = dict(xatol=settings.xatol, fatol=settings.fatol, maxiter=settings.maxiter)
    X, _, _ = nelder_mead_batch(objective, x0, step, **kw)
    # one restart from the converged point guards against a collapsed simplex
    X, F, _ = nelder_mead_batch(objective, X, step * 0.02, **kw)
    s = np.sin(X[:, 0])
    y, w, z = s * np.cos(X[:, 1]), np.cos(X[:, 0]), s * np.sin(X[:, 1])
    flip = w < 0
    y, w, z = np.where(flip, -y, y), np.abs(w), np.where(flip, -z, z)
    return y, z, F


def _symmetry_flips(O01: float, O02: float, O12: float) -> list[tuple[float, float]]:
    """Sign changes of ``(y, z)`` that leave the energy invariant and flip ``x``."""
    flips = []
    if O02 == 0:
        flips.append((-1.0, -1.0))
    if O12 == 0:
        flips.append((-1.0, 1.0))
    if O01 == 0:
        flips.append((1.0, -1.0))
    return flips


@dataclass
class _Candidates:
    """Refined stationary points for a batch of problems, flattened."""

    owner: np.ndarray
    y: np.ndarray
    z: np.ndarray
    energy: np.ndarray


def _normal_mode_starts(b: _Batch, lat: _Lattice):
    """Starts displaced from the normal state along its softest direction.

    Superradiant minima close to a continuous onset sit in this direction,
    often closer to the normal state than the lattice spacing.
    """
    a = b.omega10 - b.c * b.O01 * b.O01
    d = b.omega20 - b.c * b.O02 * b.O02
    off = -b.c * b.O01 * b.O02
    # lowest eigenpair of [[a, off], [off, d]] in tangent coordinates (w, z)
    half_tr, half_gap = 0.5 * (a + d), np.hypot(0.5 * (a - d), off)
    lam = half_tr - half_gap
    vw = np.where(np.abs(off) > 0, off, np.where(a <= d, 1.0, 0.0))
    vz = np.where(np.abs(off) > 0, lam - a, np.where(a <= d, 0.0, 1.0))
    norm = np.hypot(vw, vz)
    vw, vz = vw / norm, vz / norm
    unstable = lam <= 0
    owners, ts, ps = [], [], []
    for delta in (0.05, -0.05, 0.3, -0.3):
        y, w, z = np.ones_like(vw), delta * vw, delta * vz
        r = np.sqrt(1.0 + delta * delta)
        y, w, z = y / r, w / r, z / r
        sgn = np.where(w < 0, -1.0, 1.0)
        y, w, z = sgn * y, sgn * w, sgn * z
        owners.append(np.flatnonzero(unstable))
        ts.append(np.arccos(np.clip(w, -1, 1))[unstable])
        ps.append(np.arctan2(z, y)[unstable])
    return np.concatenate(owners), np.concatenate(ts), np.concatenate(ps)


def _search(b: _Batch, settings: MinimizerSettings) -> _Candidates:
    lat = _lattice(settings)
    t0, p0, valid = _lattice_candidates(b, lat, settings.max_candidates)
    owner = np.broadcast_to(np.arange(len(b))[:, None], valid.shape)[valid]
    o2, t2, p2 = _normal_mode_starts(b, lat)
    owner = np.concatenate([owner, o2])
    y, z, F = _refine(b, owner, np.concatenate([t0[valid], t2]),
                      np.concatenate([p0[valid], p2]), lat, settings)
    return _Candidates(owner, y, z, F)


def _x_of(b: _Batch, y, z):
    w = np.sqrt(np.maximum(0.0, 1.0 - y * y - z * z))
    B = (b.O01 * y + b.O12 * z) * w + b.O02 * y * z
    return -0.5 * b.c * B  # -2B/(omega_cav + 4D)


def _energy_of(b: _Batch, y, z):
    w = np.sqrt(np.maximum(0.0, 1.0 - y * y - z * z))
    B = (b.O01 * y + b.O12 * z) * w + b.O02 * y * z
    return b.omega10 * (1.0 - y) * (1.0 + y) + b.omega21 * z * z - b.c * B * B


@dataclass
class BatchResult:
    """Global minima for many parameter points, as flat arrays."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    energy: np.ndarray

    @property
    def superradiant(self) -> np.ndarray:
        return np.abs(self.x) > X_TOL

    def __len__(self) -> int:
        return self.x.shape[0]

    def state(self, i: int) -> GroundState:
        return _make_state(float(self.x[i]), float(self.y[i]), float(self.z[i]),
                           float(self.energy[i]))


def _make_state(x: float, y: float, z: float, energy: float) -> GroundState:
    phase = Phase.SUPERRADIANT if abs(x) > X_TOL else Phase.NORMAL
    # adding 0.0 turns a signed zero into +0.0
    return GroundState(x + 0.0, CoherencePoint(y, z), energy, populations(y, z), phase)


def _global_chunk(b: _Batch, settings: MinimizerSettings) -> BatchResult:
    n = len(b)
    cands = _search(b, settings)
    cb = b.take(cands.owner)
    cx = _x_of(cb, cands.y, cands.z)
    # the exact normal state (1, 0) with energy 0 and x = 0 is the fallback
    best_i = np.full(n, -1)
    eligible = np.flatnonzero((cands.energy < 0) & (np.abs(cx) > X_TOL))
    if eligible.size:
        order = eligible[np.lexsort((cands.energy[eligible], cands.owner[eligible]))]
        owners, first = np.unique(cands.owner[order], return_index=True)
        best_i[owners] = order[first]
    has = best_i >= 0
    y = np.where(has, cands.y[best_i], 1.0)
    z = np.where(has, cands.z[best_i], 0.0)
    # deterministic representative of a symmetric pair: x <= 0
    x = np.where(has, cx[best_i], 0.0)
    flip_y = np.ones(n)
    flip_z = np.ones(n)
    pos = x > 0
    ladder = pos & (b.O02 == 0)
    vee = pos & ~ladder & (b.O12 == 0)
    lam = pos & ~ladder & ~vee & (b.O01 == 0)
    flip_y[ladder | vee] = -1.0
    flip_z[ladder | lam] = -1.0
    y, z = y * flip_y, z * flip_z
    x = np.where(has, _x_of(b, y, z), 0.0)
    energy = np.where(has, _energy_of(b, y, z), 0.0)
    return BatchResult(x, y, z, energy)


def _chunks(n: int, size: int) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def _minimize_batch(b: _Batch, settings: MinimizerSettings, executor=None) -> BatchResult:
    jobs = [b.take(s) for s in _chunks(len(b), settings.chunk)]
    if executor is None:
        parts = [_global_chunk(j, settings) for j in jobs]
    else:
        parts = list(executor.map(lambda j: _global_chunk(j, settings), jobs))
    if not parts:
        empty = np.zeros(0)
        return BatchResult(empty, empty, empty, empty)
    return BatchResult(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in ("x", "y", "z", "energy")))


def minimize_arrays(omega10, omega21, D, Omega01, Omega02, Omega12, *,
                    settings: MinimizerSettings = DEFAULT_SETTINGS,
                    executor=None) -> BatchResult:
    """Global minimisation for many parameter points given as arrays.

    Work is split into fixed chunks of ``settings.chunk`` points, so the result
    is bit-identical whether chunks run serially or on an executor.
    """
    b = _batch_from_arrays(omega10, omega21, D, Omega01, Omega02, Omega12)
    return _minimize_batch(b, settings, executor)


def minimize_many(params: Sequence[ModelParams], *,
                  settings: MinimizerSettings = DEFAULT_SETTINGS) -> list[GroundState]:
    res = _minimize_batch(_batch_from_params(params), settings)
    return [res.state(i) for i in range(len(res))]


def minimize_global(params: ModelParams, *,
                    settings: MinimizerSettings = DEFAULT_SETTINGS) -> GroundState:
    """Ground state: the lowest of the refined minima and the normal state."""
    return minimize_many([params], settings=settings)[0]


def local_minima(params: ModelParams, *,
                 settings: MinimizerSettings = DEFAULT_SETTINGS) -> list[GroundState]:
    """Distinct local minima found by the multistart search, lowest energy first.

    Minima related by an exact sign symmetry of the energy, or by the overall
    sign of the atomic state on the rim, are reported once.
    """
    b = _batch_from_params([params])
    cands = _search(b, settings)
    O01, O02, O12 = (float(a[0]) for a in (b.O01, b.O02, b.O12))
    points = [(float(y), float(z)) for y, z in zip(cands.y, cands.z)]
    if normal_state_stable(params):
        points.append((1.0, 0.0))
    states = []
    for y, z in points:
        states.append(_make_state(photon_amplitude((y, z), params), y, z,
                                  reduced_energy((y, z), params)))
    states.sort(key=lambda s: (s.energy_per_atom, s.y, s.z))
    flips = [(1.0, 1.0)] + _symmetry_flips(O01, O02, O12)
    kept: list[GroundState] = []
    for s in states:
        if any(_same_minimum(s, k, flips) for k in kept):
            continue
        kept.append(s)
    return [_canonical(s, params, flips[1:]) for s in kept]


def _same_minimum(a: GroundState, b: GroundState, flips) -> bool:
    for sy, sz in flips:
        if math.hypot(a.y - sy * b.y, a.z - sz * b.z) <= DEDUP_DIST:
            return True
    on_rim = a.populations[1] < 1e-6 and b.populations[1] < 1e-6
    if on_rim and math.hypot(a.y + b.y, a.z + b.z) <= DEDUP_DIST:
        return True
    return False


def _canonical(s: GroundState, params: ModelParams, flips) -> GroundState:
    if s.x <= 0 or not flips:
        return s
    sy, sz = flips[0]
    y, z = sy * s.y, sz * s.z
    return _make_state(photon_amplitude((y, z), params), y, z, reduced_energy((y, z), params))
