"""
Effective channels, link statistics, rates and transmit powers.

Array layout:
    f[b, u, k, :]          effective channel f_{b,u,k}, length N
    w[b, u, k, :]          precoder w_{b,u,k}, length N
    amp[b, i, j, k]        f_{b,i,k}^H w_{b,j,k}, user i receiving stream j through BS b
    cross[i, j, k]         sum over b of amp[b, i, j, k]
"""

import logging
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np

from .channel import ChannelRealization
from .circuit import CapacitorVector, CircuitParams, build_phi_grid
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Network dimensions, OFDM grid and power levels; powers in dBm."""

    B: int = 4
    N: int = 2
    U: int = 4
    R: int = 2
    M: int = 144
    K: int = 16
    f_c: float = 3.5e9
    bandwidth: float = 100e6
    noise_dbm: float = -90.0
    p_max_dbm: float = 30.0

    def validate(self) -> "SystemConfig":
        for name in ("B", "N", "U", "R", "M", "K"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer", key=f"system.{name}")
        if not self.f_c > 0:
            raise ConfigError("f_c must be positive", key="system.f_c")
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive", key="system.bandwidth")
        if self.bandwidth / 2 >= self.f_c:
            raise ConfigError("bandwidth must stay below 2 f_c", key="system.bandwidth")
        if not np.isfinite(self.noise_dbm):
            raise ConfigError("noise_dbm must be finite", key="system.noise_dbm")
        return self

    @property
    def RM(self) -> int:
        return self.R * self.M

    @property
    def noise_var(self) -> float:
        """Noise power per (user, subcarrier) in watts."""
        return dbm_to_watt(self.noise_dbm)

    @property
    def p_max(self) -> float:
        """Per-BS transmit power budget in watts."""
        return dbm_to_watt(self.p_max_dbm)

    def with_power(self, p_max_dbm: float) -> "SystemConfig":
        return replace(self, p_max_dbm=float(p_max_dbm))

    def subcarrier_frequencies(self) -> np.ndarray:
        """Centered uniform grid f_k = f_c + (k - (K+1)/2) BW/K, k = 1..K."""
        k = np.arange(1, self.K + 1)
        return self.f_c + (k - (self.K + 1) / 2.0) * self.bandwidth / self.K


@dataclass
class PrecoderSet:
    w: np.ndarray

    @classmethod
    def zeros(cls, B: int, U: int, K: int, N: int) -> "PrecoderSet":
        return cls(np.zeros((B, U, K, N), dtype=complex))

    def copy(self) -> "PrecoderSet":
        return PrecoderSet(self.w.copy())

    def powers(self) -> np.ndarray:
        return np.array([tx_power(self, b) for b in range(self.w.shape[0])])

    def is_feasible(self, p_max: float, rtol: float = 1e-8) -> bool:
        return bool(np.all(self.powers() <= p_max * (1.0 + rtol) + 1e-300))


@dataclass
class EffectiveChannel:
    f: np.ndarray


@dataclass
class LinkStats:
    """Per-user scalars at the current iterate; everything a BS needs beyond its own vectors."""

    beta: np.ndarray
    mui: np.ndarray
    snr: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    r_cross: np.ndarray
    cross: np.ndarray
    amp: np.ndarray
    noise_var: float

    @property
    def alpha(self) -> np.ndarray:
        return self.mui + self.f1


def effective_channel_single(
    h: np.ndarray, H_stacked: np.ndarray, g_stacked: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """
    f_{u,k} = h_{u,k} + H_k^H conj(phi_k) * g_{u,k} for one BS.

    h: (U, K, N), H_stacked: (K, RM, N), g_stacked: (U, K, RM), phi: (K, RM).
    """
    reflected = np.conj(phi)[None, :, :] * g_stacked
    return h + np.einsum("kmn,ukm->ukn", np.conj(H_stacked), reflected)


def effective_channels(
    channels: ChannelRealization,
    caps: CapacitorVector,
    f_grid: np.ndarray,
    params: CircuitParams = CircuitParams(),
) -> EffectiveChannel:
    """Composite channels of every BS with one common capacitor vector."""
    phi = build_phi_grid(f_grid, caps, params)
    return effective_channels_from_phi(channels, phi)


def effective_channels_from_phi(channels: ChannelRealization, phi: np.ndarray) -> EffectiveChannel:
    H_stacked = channels.stacked_H()
    g_stacked = channels.stacked_g()
    f = np.stack(
        [effective_channel_single(channels.h[b], H_stacked[b], g_stacked, phi) for b in range(channels.h.shape[0])]
    )
    return EffectiveChannel(f)


def amplitudes(f_b: np.ndarray, w_b: np.ndarray) -> np.ndarray:
    """amp[i, j, k] = f_{i,k}^H w_{j,k} for one BS; f_b and w_b are (U, K, N)."""
    return np.einsum("ikn,jkn->ijk", np.conj(f_b), w_b)


def link_stats_from_amplitudes(amp: np.ndarray, noise_var: float) -> LinkStats:
    """Assemble LinkStats from per-BS amplitude tables, summed over BSs in index order."""
    cross = np.zeros(amp.shape[1:], dtype=complex)
    for b in range(amp.shape[0]):
        cross = cross + amp[b]

    U = cross.shape[0]
    users = np.arange(U)
    beta = cross[users, users, :]
    power = np.abs(cross) ** 2
    interference = power.sum(axis=1) - power[users, users, :]
    mui = noise_var + interference
    f1 = np.abs(beta) ** 2
    snr = f1 / mui

    # r_cross[b, u, q, k]: stream u at user q through every BS except b
    r_cross = np.transpose(cross, (1, 0, 2))[None, :, :, :] - np.transpose(amp, (0, 2, 1, 3))
    return LinkStats(
        beta=beta,
        mui=mui,
        snr=snr,
        f1=f1,
        f2=mui.copy(),
        r_cross=r_cross,
        cross=cross,
        amp=amp,
        noise_var=float(noise_var),
    )


def link_stats(eff: EffectiveChannel, w: PrecoderSet, noise_var: float) -> LinkStats:
    if not noise_var > 0:
        raise ConfigError("noise variance must be positive", key="system.noise_dbm")
    amp = np.stack([amplitudes(eff.f[b], w.w[b]) for b in range(eff.f.shape[0])])
    return link_stats_from_amplitudes(amp, noise_var)


def sum_rate(stats: LinkStats) -> Tuple[np.ndarray, float]:
    """Per-user rates summed over subcarriers (bits/s/Hz) and their total."""
    per_user = np.log2(1.0 + stats.snr).sum(axis=1)
    return per_user, float(per_user.sum())


def tx_power(w: PrecoderSet, b: int) -> float:
    return float(np.sum(np.abs(w.w[b]) ** 2))


def matched_filter(f_b: np.ndarray, p_max: float) -> np.ndarray:
    """Per-(u,k) matched filters with an equal power split summing to p_max."""
    U, K, _ = f_b.shape
    norms = np.linalg.norm(f_b, axis=-1, keepdims=True)
    directions = np.divide(f_b, norms, out=np.zeros_like(f_b), where=norms > 0)
    return np.sqrt(p_max / (U * K)) * directions


def disagreement(copies: Sequence[CapacitorVector]) -> float:
    """Largest pairwise infinity-norm gap between capacitor copies, in picofarads."""
    stacked = np.stack([c.pf for c in copies])
    return float(np.max(stacked.max(axis=0) - stacked.min(axis=0))) if len(copies) > 1 else 0.0
