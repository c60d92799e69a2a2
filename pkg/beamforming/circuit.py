"""
RIS unit-element circuit model.

Each element is a resonant network: inductor L1 in parallel with a branch of
inductor L2, resistor R0 and a tunable capacitor c. The element reflects with
coefficient (Z - zeta0) / (Z + zeta0), where Z is the network impedance.

Public functions take capacitances in farads. Capacitor state (CapacitorVector)
and every capacitance gradient in the package are kept in picofarads.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ConfigError, DegenerateInputError

logger = logging.getLogger(__name__)

KAPPA = 2.0 * np.pi
PICOFARAD = 1e-12
POLE_THRESHOLD = 1e-30

CALIBRATION_GRID_POINTS = 512
CALIBRATION_TOL_FRACTION = 1e-4
CALIBRATION_XATOL_PF = 1e-9

ArrayLike = Union[float, complex, np.ndarray]


@dataclass(frozen=True)
class CircuitParams:
    """Circuit constants shared by every RIS element (SI units)."""

    L1: float = 1.7143e-9
    L2: float = 0.48e-9
    R0: float = 1.0
    zeta0: float = 50.0
    c_min: float = 0.01e-12
    c_max: float = 3.0e-12

    def validate(self) -> "CircuitParams":
        if not self.L1 > 0:
            raise ConfigError("L1 must be positive", key="circuit.L1")
        if not self.L2 >= 0:
            raise ConfigError("L2 must be non-negative", key="circuit.L2")
        if not self.R0 >= 0:
            raise ConfigError("R0 must be non-negative", key="circuit.R0")
        if not self.zeta0 > 0:
            raise ConfigError("zeta0 must be positive", key="circuit.zeta0")
        if not self.c_min > 0:
            raise ConfigError("c_min must be positive", key="circuit.c_min")
        if not self.c_min < self.c_max:
            raise ConfigError(
                f"c_min ({self.c_min}) must be below c_max ({self.c_max})",
                key="circuit.c_min",
            )
        return self

    @property
    def c_min_pf(self) -> float:
        return self.c_min / PICOFARAD

    @property
    def c_max_pf(self) -> float:
        return self.c_max / PICOFARAD

    @property
    def c_mid_pf(self) -> float:
        return 0.5 * (self.c_min_pf + self.c_max_pf)

    @property
    def span_pf(self) -> float:
        return self.c_max_pf - self.c_min_pf


@dataclass
class CapacitorVector:
    """Tunable capacitances of all RIS elements, RIS-major, in picofarads."""

    pf: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.pf = np.asarray(self.pf, dtype=float).reshape(-1)

    @classmethod
    def from_farads(cls, values: Iterable[float]) -> "CapacitorVector":
        return cls(np.asarray(values, dtype=float) / PICOFARAD)

    @classmethod
    def midpoint(cls, size: int, params: CircuitParams) -> "CapacitorVector":
        return cls(np.full(size, params.c_mid_pf))

    @classmethod
    def uniform(cls, size: int, params: CircuitParams, rng: np.random.Generator) -> "CapacitorVector":
        return cls(rng.uniform(params.c_min_pf, params.c_max_pf, size=size))

    @property
    def farads(self) -> np.ndarray:
        return self.pf * PICOFARAD

    def __len__(self) -> int:
        return self.pf.size

    def copy(self) -> "CapacitorVector":
        return CapacitorVector(self.pf.copy())

    def clipped(self, params: CircuitParams) -> "CapacitorVector":
        return CapacitorVector(np.clip(self.pf, params.c_min_pf, params.c_max_pf))

    def in_box(self, params: CircuitParams, atol: float = 1e-12) -> bool:
        return bool(
            np.all(self.pf >= params.c_min_pf - atol) and np.all(self.pf <= params.c_max_pf + atol)
        )


def _numerator_denominator(f: ArrayLike, c: ArrayLike, params: CircuitParams) -> Tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(f <= 0):
        raise DegenerateInputError("frequency must be positive")
    if np.any(c <= 0):
        raise DegenerateInputError("capacitance must be positive")
    jw = 1j * KAPPA * f
    capacitive = 1.0 / (jw * c)
    numerator = jw * params.L1 * (jw * params.L2 + params.R0 + capacitive)
    denominator = jw * (params.L1 + params.L2) + params.R0 + capacitive
    return numerator, denominator


def _check_pole(value: np.ndarray, what: str) -> None:
    if np.any(np.abs(value) < POLE_THRESHOLD):
        raise DegenerateInputError(f"{what} vanishes (resonance pole)")


def impedance(f: ArrayLike, c: ArrayLike, params: CircuitParams) -> ArrayLike:
    """Network impedance Z(f, c) in ohms; c in farads. Broadcasts over f and c."""
    numerator, denominator = _numerator_denominator(f, c, params)
    _check_pole(denominator, "impedance denominator")
    return numerator / denominator


def reflection(f: ArrayLike, c: ArrayLike, params: CircuitParams) -> ArrayLike:
    """Reflection coefficient (Z - zeta0) / (Z + zeta0); c in farads."""
    numerator, denominator = _numerator_denominator(f, c, params)
    _check_pole(denominator, "impedance denominator")
    matched = numerator + params.zeta0 * denominator
    _check_pole(matched, "Z + zeta0")
    return (numerator - params.zeta0 * denominator) / matched


def reflection_derivative(
    f: ArrayLike, c: ArrayLike, params: CircuitParams, per_picofarad: bool = False
) -> ArrayLike:
    """
    Derivative of the reflection coefficient with respect to the capacitance.

    Returned per farad, or per picofarad when `per_picofarad` is set. Uses
    dN/dc = -L1 / c^2 and dD/dc = j / (kappa f c^2) for the impedance
    numerator N and denominator D.
    """
    numerator, denominator = _numerator_denominator(f, c, params)
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float)
    matched = numerator + params.zeta0 * denominator
    _check_pole(matched, "N + zeta0 * D")

    d_numerator = -params.L1 / c**2
    d_denominator = 1j / (KAPPA * f * c**2)
    derivative = (
        2.0 * params.zeta0 * (d_numerator * denominator - numerator * d_denominator) / matched**2
    )
    if per_picofarad:
        derivative = derivative * PICOFARAD
    return derivative


def build_phi(f_k: float, caps: CapacitorVector, params: CircuitParams) -> np.ndarray:
    """Diagonal of the stacked reflection matrix at one subcarrier, length R*M."""
    return np.asarray(reflection(f_k, caps.farads, params), dtype=complex).reshape(-1)


def build_phi_grid(f_grid: np.ndarray, caps: CapacitorVector, params: CircuitParams) -> np.ndarray:
    """Reflection coefficients for every subcarrier, shape (K, R*M)."""
    f_grid = np.asarray(f_grid, dtype=float)
    return reflection(f_grid[:, None], caps.farads[None, :], params)


def build_phi_derivative_grid(
    f_grid: np.ndarray, caps: CapacitorVector, params: CircuitParams
) -> np.ndarray:
    """Per-picofarad reflection derivatives, shape (K, R*M)."""
    f_grid = np.asarray(f_grid, dtype=float)
    return reflection_derivative(f_grid[:, None], caps.farads[None, :], params, per_picofarad=True)


def calibrate_capacitor(target: complex, f: float, params: CircuitParams) -> Tuple[float, float]:
    """
    Capacitance in [c_min, c_max] whose reflection at `f` is closest to `target`.

    A uniform grid scan locates the best cell, then a bounded scalar search
    refines inside the neighbouring cells. Returns (capacitance in farads,
    achieved complex-plane distance).
    """
    if abs(target) > 1.0 + 1e-9:
        logger.warning(f"Calibration target {target:.4g} lies outside the unit disc")

    grid_pf = np.linspace(params.c_min_pf, params.c_max_pf, CALIBRATION_GRID_POINTS)
    distances = np.abs(reflection(f, grid_pf * PICOFARAD, params) - target) ** 2
    best = int(np.argmin(distances))
    best_pf, best_dist = grid_pf[best], distances[best]

    lo = grid_pf[max(best - 1, 0)]
    hi = grid_pf[min(best + 1, grid_pf.size - 1)]

    def objective(c_pf: float) -> float:
        return float(np.abs(reflection(f, c_pf * PICOFARAD, params) - target) ** 2)

    result = minimize_scalar(
        objective,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": min(CALIBRATION_TOL_FRACTION * params.span_pf, CALIBRATION_XATOL_PF)},
    )
    if result.success and result.fun <= best_dist:
        best_pf, best_dist = float(result.x), float(result.fun)

    residual = float(np.sqrt(best_dist))
    logger.debug(f"Calibrated target {target:.4g} -> {best_pf:.6g} pF (residual {residual:.3g})")
    return best_pf * PICOFARAD, residual


def calibrate_capacitors(targets: np.ndarray, f: float, params: CircuitParams) -> Tuple[CapacitorVector, np.ndarray]:
    """Element-wise calibrate_capacitor over a vector of target responses."""
    targets = np.asarray(targets, dtype=complex).reshape(-1)
    values = np.empty(targets.size)
    residuals = np.empty(targets.size)
    for n, target in enumerate(targets):
        values[n], residuals[n] = calibrate_capacitor(target, f, params)
    return CapacitorVector.from_farads(values), residuals
