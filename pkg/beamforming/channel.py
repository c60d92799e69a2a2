"""
Node geometry, pathloss and wideband Rayleigh channel generation.

Channel tensors are indexed as
    h[b, u, k]  -> (N,)      direct BS-UE link
    H[b, r, k]  -> (M, N)    BS-RIS link
    g[r, u, k]  -> (M,)      RIS-UE link
Every generator takes an explicit seed; there is no module-level RNG.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, DegenerateInputError

if TYPE_CHECKING:
    from .system_model import SystemConfig

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence, None]
Point = Tuple[float, ...]


class LinkType(str, Enum):
    BS_UE = "bs_ue"
    BS_RIS = "bs_ris"
    RIS_UE = "ris_ue"


@dataclass(frozen=True)
class PathlossModel:
    """Distance-dependent pathloss PL0 * (d / d0) ** (-alpha) per link type."""

    pl0_db: float = -30.0
    d0: float = 1.0
    exp_bs_ue: float = 3.8
    exp_bs_ris: float = 2.4
    exp_ris_ue: float = 2.2

    def validate(self) -> "PathlossModel":
        if not self.d0 > 0:
            raise ConfigError("d0 must be positive", key="pathloss.d0")
        for name in ("exp_bs_ue", "exp_bs_ris", "exp_ris_ue"):
            if not getattr(self, name) > 0:
                raise ConfigError("pathloss exponents must be positive", key=f"pathloss.{name}")
        return self

    def exponent(self, link_type: Union[LinkType, str]) -> float:
        return {
            LinkType.BS_UE: self.exp_bs_ue,
            LinkType.BS_RIS: self.exp_bs_ris,
            LinkType.RIS_UE: self.exp_ris_ue,
        }[LinkType(link_type)]


@dataclass(frozen=True)
class Cluster:
    """A disc of users: center (x, y) in meters, radius in meters, user count."""

    center: Tuple[float, float]
    radius: float
    count: int


@dataclass(frozen=True)
class GeometryConfig:
    """Placement rules; `bs_positions=None` places BS b at (50 b, 0, 5) m (b from 0)."""

    bs_positions: Optional[Tuple[Point, ...]] = None
    ris_positions: Tuple[Point, ...] = ((65.0, 60.0, 6.0), (85.0, 60.0, 6.0))
    clusters: Tuple[Cluster, ...] = (
        Cluster((67.5, 57.5), 2.0, 2),
        Cluster((82.5, 57.5), 2.0, 2),
    )
    ue_height: float = 1.5
    bs_spacing: float = 50.0
    bs_height: float = 5.0

    def resolved_bs_positions(self, num_bs: int) -> np.ndarray:
        if self.bs_positions is not None:
            return np.asarray(self.bs_positions, dtype=float)
        return np.array([[self.bs_spacing * b, 0.0, self.bs_height] for b in range(num_bs)])

    def validate(self, system: "SystemConfig") -> "GeometryConfig":
        if self.bs_positions is not None and len(self.bs_positions) != system.B:
            raise ConfigError(
                f"{len(self.bs_positions)} BS positions given for B={system.B}",
                key="geometry.bs_positions",
            )
        if len(self.ris_positions) != system.R:
            raise ConfigError(
                f"{len(self.ris_positions)} RIS positions given for R={system.R}",
                key="geometry.ris_positions",
            )
        for cluster in self.clusters:
            if cluster.radius < 0:
                raise ConfigError("cluster radius must be non-negative", key="geometry.clusters")
            if cluster.count < 0:
                raise ConfigError("cluster count must be non-negative", key="geometry.clusters")
        total = sum(cluster.count for cluster in self.clusters)
        if total != system.U:
            raise ConfigError(
                f"cluster counts sum to {total} but U={system.U}", key="geometry.clusters"
            )
        return self


@dataclass(frozen=True)
class ChannelModelConfig:
    """Tapped-delay-line length and the per-subcarrier i.i.d. comparison mode."""

    taps: int = 4
    iid_subcarriers: bool = False

    def validate(self, system: "SystemConfig") -> "ChannelModelConfig":
        if not 1 <= self.taps <= system.K:
            raise ConfigError(f"taps must lie in [1, K={system.K}]", key="channel.taps")
        return self


@dataclass(frozen=True)
class CsiErrorModel:
    """Relative CSI error: estimate = x + e, e ~ CN(0, delta |x|^2)."""

    delta: float = 0.2

    def validate(self) -> "CsiErrorModel":
        if not self.delta >= 0:
            raise ConfigError("delta must be non-negative", key="csi.delta")
        return self


@dataclass
class Geometry:
    bs_positions: np.ndarray
    ris_positions: np.ndarray
    ue_positions: np.ndarray
    clusters: Tuple[Cluster, ...] = ()

    @staticmethod
    def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)

    @property
    def bs_ue_distances(self) -> np.ndarray:
        return self._pairwise(self.bs_positions, self.ue_positions)

    @property
    def bs_ris_distances(self) -> np.ndarray:
        return self._pairwise(self.bs_positions, self.ris_positions)

    @property
    def ris_ue_distances(self) -> np.ndarray:
        return self._pairwise(self.ris_positions, self.ue_positions)


@dataclass
class ChannelRealization:
    """Per-subcarrier channel tensors (true or CSI-perturbed)."""

    h: np.ndarray
    H: np.ndarray
    g: np.ndarray

    @property
    def dims(self) -> dict:
        B, U, K, N = self.h.shape
        R, M = self.H.shape[1], self.H.shape[3]
        return {"B": B, "U": U, "K": K, "N": N, "R": R, "M": M}

    def stacked_H(self) -> np.ndarray:
        """BS-RIS channels stacked over RISs, shape (B, K, R*M, N)."""
        B, R, K, M, N = self.H.shape
        return self.H.transpose(0, 2, 1, 3, 4).reshape(B, K, R * M, N)

    def stacked_g(self) -> np.ndarray:
        """RIS-UE channels stacked over RISs, shape (U, K, R*M)."""
        R, U, K, M = self.g.shape
        return self.g.transpose(1, 2, 0, 3).reshape(U, K, R * M)

    def for_bs(self, b: int) -> "ChannelRealization":
        """The links a single BS sees: its own direct and BS-RIS channels, plus g."""
        return ChannelRealization(self.h[b : b + 1], self.H[b : b + 1], self.g)

    def copy(self) -> "ChannelRealization":
        return ChannelRealization(self.h.copy(), self.H.copy(), self.g.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.g)))


def complex_gaussian(rng: np.random.Generator, shape: Sequence[int]) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def pathloss(d: Union[float, np.ndarray], link_type: Union[LinkType, str], model: PathlossModel):
    """Linear power gain of a link of length `d` meters."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DegenerateInputError("link distance must be positive")
    gain = 10.0 ** (model.pl0_db / 10.0) * (d / model.d0) ** (-model.exponent(link_type))
    return float(gain) if gain.ndim == 0 else gain


def build_geometry(seed: Seed, config: GeometryConfig, system: "SystemConfig") -> Geometry:
    """BS/RIS positions from the config; UEs uniform over the area of their cluster disc."""
    config.validate(system)
    rng = np.random.default_rng(seed)

    ue_positions = []
    for cluster in config.clusters:
        radius = cluster.radius * np.sqrt(rng.uniform(size=cluster.count))
        angle = rng.uniform(0.0, 2.0 * np.pi, size=cluster.count)
        for rad, ang in zip(radius, angle):
            ue_positions.append(
                [cluster.center[0] + rad * np.cos(ang), cluster.center[1] + rad * np.sin(ang), config.ue_height]
            )

    geometry = Geometry(
        bs_positions=config.resolved_bs_positions(system.B),
        ris_positions=np.asarray(config.ris_positions, dtype=float).reshape(system.R, 3),
        ue_positions=np.asarray(ue_positions, dtype=float).reshape(system.U, 3),
        clusters=tuple(config.clusters),
    )
    for name in ("bs_ue_distances", "bs_ris_distances", "ris_ue_distances"):
        if np.any(getattr(geometry, name) <= 0):
            raise DegenerateInputError(f"co-located nodes ({name} contains zero)")
    return geometry


def _frequency_response(
    rng: np.random.Generator, shape: Tuple[int, ...], gain: np.ndarray, num_sc: int, model: ChannelModelConfig
) -> np.ndarray:
    # gain broadcasts against `shape`; the subcarrier axis is appended last
    scale = np.sqrt(np.asarray(gain, dtype=float))[..., None]
    if model.iid_subcarriers:
        return scale * complex_gaussian(rng, shape + (num_sc,))
    taps = scale * complex_gaussian(rng, shape + (model.taps,)) / np.sqrt(model.taps)
    response = np.fft.fft(taps, n=num_sc, axis=-1)
    return np.fft.fftshift(response, axes=-1)


def draw_channels(
    seed: Seed,
    geometry: Geometry,
    model: PathlossModel,
    system: "SystemConfig",
    channel_model: Optional[ChannelModelConfig] = None,
) -> ChannelRealization:
    """Wideband Rayleigh realization with per-SC entry variance equal to the link's pathloss gain."""
    channel_model = (channel_model or ChannelModelConfig()).validate(system)
    rng = np.random.default_rng(seed)
    B, U, R, M, N, K = system.B, system.U, system.R, system.M, system.N, system.K

    gain_bs_ue = pathloss(geometry.bs_ue_distances, LinkType.BS_UE, model)
    gain_bs_ris = pathloss(geometry.bs_ris_distances, LinkType.BS_RIS, model)
    gain_ris_ue = pathloss(geometry.ris_ue_distances, LinkType.RIS_UE, model)

    h = _frequency_response(rng, (B, U, N), np.asarray(gain_bs_ue)[:, :, None], K, channel_model)
    H = _frequency_response(rng, (B, R, M, N), np.asarray(gain_bs_ris)[:, :, None, None], K, channel_model)
    g = _frequency_response(rng, (R, U, M), np.asarray(gain_ris_ue)[:, :, None], K, channel_model)

    realization = ChannelRealization(
        h=np.ascontiguousarray(np.moveaxis(h, -1, 2)),
        H=np.ascontiguousarray(np.moveaxis(H, -1, 2)),
        g=np.ascontiguousarray(np.moveaxis(g, -1, 2)),
    )
    logger.debug(f"Drew channels B={B} U={U} R={R} M={M} N={N} K={K} taps={channel_model.taps}")
    return realization


def perturb_csi(seed: Seed, channels: ChannelRealization, err: CsiErrorModel) -> ChannelRealization:
    """Independent relative-variance CSI error on every scalar entry."""
    if err.delta == 0:
        return channels.copy()
    rng = np.random.default_rng(seed)
    std = np.sqrt(err.delta)

    def noisy(x: np.ndarray) -> np.ndarray:
        return x + std * np.abs(x) * complex_gaussian(rng, x.shape)

    return ChannelRealization(noisy(channels.h), noisy(channels.H), noisy(channels.g))