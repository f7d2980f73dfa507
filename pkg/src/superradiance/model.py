"""Physical parameters of the three-level cavity model and the TRK sum-rule checks.

All frequencies are measured in units of the cavity frequency, so
``OMEGA_CAV == 1``.  Level energies follow ``omega_0 = 0``, which gives
``omega_1 = omega10`` and ``omega_2 = omega10 + omega21``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

OMEGA_CAV = 1.0

# Slack on the TRK inequalities so that grid values such as 0.3 + 0.7 are
# not rejected by floating-point rounding.
TRK_TOL = 1e-12


class InvalidParameterError(ValueError):
    """Raised for physically meaningless or inconsistent model input."""


def _check_finite_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    if value < 0:
        raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class TrkCoupling:
    """Couplings given as oscillator strengths of the upward transitions."""

    f01: float = 0.0
    f02: float = 0.0
    f12: float = 0.0

    def __post_init__(self) -> None:
        for name in ("f01", "f02", "f12"):
            object.__setattr__(self, name, _check_finite_nonneg(name, getattr(self, name)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.f01, self.f02, self.f12)


@dataclass(frozen=True)
class DirectCoupling:
    """Couplings given directly as collective vacuum Rabi frequencies."""

    Omega01: float = 0.0
    Omega02: float = 0.0
    Omega12: float = 0.0

    def __post_init__(self) -> None:
        for name in ("Omega01", "Omega02", "Omega12"):
            object.__setattr__(self, name, _check_finite_nonneg(name, getattr(self, name)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.Omega01, self.Omega02, self.Omega12)


CouplingSpec = Union[TrkCoupling, DirectCoupling]


@dataclass(frozen=True)
class ModelParams:
    omega10: float
    omega21: float
    D: float
    coupling: CouplingSpec = field(default_factory=TrkCoupling)

    def __post_init__(self) -> None:
        for name in ("omega10", "omega21"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "D", _check_finite_nonneg("D", self.D))
        if not isinstance(self.coupling, (TrkCoupling, DirectCoupling)):
            raise InvalidParameterError(f"unsupported coupling {self.coupling!r}")
        if isinstance(self.coupling, TrkCoupling) and self.D == 0 and any(self.coupling.as_tuple()):
            raise InvalidParameterError(
                "oscillator-strength couplings need D > 0 to define the Rabi frequencies"
            )

    @property
    def omega20(self) -> float:
        return self.omega10 + self.omega21

    @property
    def level_energies(self) -> tuple[float, float, float]:
        return (0.0, self.omega10, self.omega20)

    @property
    def rabi(self) -> tuple[float, float, float]:
        return rabi_from_trk(self)

    @classmethod
    def from_strengths(cls, f01: float, f02: float, f12: float, *, D: float,
                       omega10: float, omega21: float) -> "ModelParams":
        return cls(omega10=omega10, omega21=omega21, D=D, coupling=TrkCoupling(f01, f02, f12))

    @classmethod
    def from_rabi(cls, Omega01: float, Omega02: float, Omega12: float, *, D: float,
                  omega10: float, omega21: float) -> "ModelParams":
        return cls(omega10=omega10, omega21=omega21, D=D,
                   coupling=DirectCoupling(Omega01, Omega02, Omega12))


def rabi_from_trk(params: ModelParams) -> tuple[float, float, float]:
    """Return ``(Omega01, Omega02, Omega12)`` for the given parameters.

    With oscillator strengths the map is ``Omega_ij**2 = f_ij * omega_ji * D``;
    with direct couplings the stored triple is returned unchanged.
    """
    c = params.coupling
    if isinstance(c, DirectCoupling):
        return c.as_tuple()
    if params.D == 0 and any(c.as_tuple()):
        raise InvalidParameterError("Rabi map undefined for D = 0 with nonzero oscillator strength")
    D = params.D
    return (
        math.sqrt(c.f01 * params.omega10 * D),
        math.sqrt(c.f02 * params.omega20 * D),
        math.sqrt(c.f12 * params.omega21 * D),
    )


@dataclass(frozen=True)
class TrkReport:
    feasible: bool
    ground_sum: float
    excited_sum: float
    violated_constraints: tuple[str, ...] = ()

    def summary(self) -> str:
        if self.feasible:
            return f"feasible: ground_sum={self.ground_sum:.6g} excited_sum={self.excited_sum:.6g}"
        parts = []
        if any(v.startswith("ground") for v in self.violated_constraints):
            parts.append(f"ground_sum={self.ground_sum:.6g}")
        if any(v.startswith("excited") for v in self.violated_constraints):
            parts.append(f"excited_sum={self.excited_sum:.6g}")
        return "infeasible: " + " ".join(parts)


def trk_check(f01: float, f02: float, f12: float, *, tol: float = TRK_TOL) -> TrkReport:
    """Truncated TRK inequalities for a three-level system.

    Level 0: ``0 <= f01 + f02 <= 1``.  Level 1: ``0 <= f10 + f12 <= 1`` with
    ``f10 = -f01``.  The level-1 pair only applies while the ``1 -> 2``
    transition is active (``f12 > 0``); without it the atom reduces to the
    two-level or V-type case, which is bounded by the level-0 pair alone.
    """
    f01 = _check_finite_nonneg("f01", f01)
    f02 = _check_finite_nonneg("f02", f02)
    f12 = _check_finite_nonneg("f12", f12)
    ground = f01 + f02
    excited = -f01 + f12
    violated = []
    excited_active = f12 > 0
    if ground < -tol:
        violated.append("ground_sum<0")
    if ground > 1 + tol:
        violated.append("ground_sum>1")
    if excited_active and excited < -tol:
        violated.append("excited_sum<0")
    if excited_active and excited > 1 + tol:
        violated.append("excited_sum>1")
    return TrkReport(not violated, ground, excited, tuple(violated))


def trk_feasible_mask(f01, f02, f12, *, tol: float = TRK_TOL):
    """Vectorised feasibility predicate; same inequalities as :func:`trk_check`."""
    f01, f02, f12 = (np.asarray(a, dtype=float) for a in (f01, f02, f12))
    ground = f01 + f02
    excited = f12 - f01
    excited_ok = (f12 <= 0) | ((excited >= -tol) & (excited <= 1 + tol))
    return (ground >= -tol) & (ground <= 1 + tol) & excited_ok
