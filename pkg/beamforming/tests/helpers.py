"""Shared instances and finite-difference oracles for the beamforming tests."""

from dataclasses import replace
from typing import Callable

import numpy as np

from beamforming.channel import ChannelRealization, Cluster, GeometryConfig, complex_gaussian
from beamforming.circuit import CapacitorVector, CircuitParams
from beamforming.config import ExperimentConfig, SweepSettings
from beamforming.orchestrator import AlgoParams
from beamforming.system_model import SystemConfig

SMALL_SYSTEM = SystemConfig(B=2, N=2, U=2, R=1, M=4, K=2)


def small_config(t_max: int = 20, **system_overrides) -> ExperimentConfig:
    """Physical-geometry config sized for fast tests."""
    system = replace(SMALL_SYSTEM, **system_overrides)
    ris_positions = ((65.0, 60.0, 6.0), (85.0, 60.0, 6.0))[: system.R]
    first = (system.U + 1) // 2
    clusters = (Cluster((67.5, 57.5), 2.0, first), Cluster((82.5, 57.5), 2.0, system.U - first))
    return ExperimentConfig(
        system=system,
        geometry=GeometryConfig(ris_positions=ris_positions, clusters=clusters),
        algorithm=AlgoParams(t_max=t_max),
        experiment=SweepSettings(sweep=(30.0,), realizations=1, timing=False),
    ).validate()


def random_channels(seed: int, system: SystemConfig = SMALL_SYSTEM) -> ChannelRealization:
    """Unit-variance channels (no pathloss), well conditioned for gradient checks."""
    rng = np.random.default_rng(seed)
    B, U, R, M, N, K = system.B, system.U, system.R, system.M, system.N, system.K
    return ChannelRealization(
        h=complex_gaussian(rng, (B, U, K, N)),
        H=complex_gaussian(rng, (B, R, K, M, N)),
        g=complex_gaussian(rng, (R, U, K, M)),
    )


def random_precoders(seed: int, system: SystemConfig = SMALL_SYSTEM) -> np.ndarray:
    rng = np.random.default_rng(seed + 7919)
    return complex_gaussian(rng, (system.B, system.U, system.K, system.N))


def random_caps(seed: int, size: int, params: CircuitParams = CircuitParams()) -> CapacitorVector:
    return CapacitorVector.uniform(size, params, np.random.default_rng(seed + 104729))


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Gradient of a real function of a real vector, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for n in range(x.size):
        step = rel_step * max(abs(x[n]), 1.0)
        up, down = x.copy(), x.copy()
        up[n] += step
        down[n] -= step
        grad[n] = (fn(up) - fn(down)) / (2.0 * step)
    return grad


def wirtinger_difference(fn: Callable[[np.ndarray], float], w: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Conjugate gradient d/dw* of a real function of a complex vector: (d/dRe + j d/dIm) / 2."""
    w = np.asarray(w, dtype=complex)
    grad = np.zeros_like(w)
    for n in range(w.size):
        unit = np.zeros_like(w)
        unit[n] = 1.0
        d_re = (fn(w + step * unit) - fn(w - step * unit)) / (2.0 * step)
        d_im = (fn(w + 1j * step * unit) - fn(w - 1j * step * unit)) / (2.0 * step)
        grad[n] = 0.5 * (d_re + 1j * d_im)
    return grad


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(expected)), 1e-300)
    return float(np.linalg.norm(np.asarray(actual) - np.asarray(expected)) / scale)
