"""Error types raised by the simulator."""

from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the beamforming package."""


class DegenerateInputError(SimulationError, ValueError):
    """An input sits on a pole, a zero denominator or outside its domain."""


class ConfigError(SimulationError, ValueError):
    """Invalid experiment configuration; `key` names the offending dotted key."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)


class ConsistencyError(SimulationError, ArithmeticError):
    """An internal identity that must hold by construction was violated."""


class ConvergenceError(SimulationError, RuntimeError):
    """An iterative sub-solver exhausted its iteration budget."""


class GraphError(SimulationError, ValueError):
    """Invalid or disconnected consensus graph."""
