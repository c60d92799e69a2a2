"""
Local precoder subproblem of one BS.

All complex gradients here are conjugate (Wirtinger) gradients d/dw*. A real
objective J changes by 2 Re{grad^H dw} under a small step dw, so linear
gradient terms enter the surrogate as 2 Re{grad^H (w - w_t)}.

Every per-(u,k) subproblem has the form
    maximize  Re{q^H w} - w^H Q w - lambda ||w||^2
with maximizer w = (Q + lambda I)^{-1} q / 2, and the per-BS power budget
couples them only through lambda.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import ConsistencyError, ConvergenceError
from .system_model import LN2, LinkStats

logger = logging.getLogger(__name__)

DIVISION_GUARD = 1e-30
BISECTION_MAX_STEPS = 200
BISECTION_RTOL = 1e-8


@dataclass
class SurrogateCoeffs:
    alpha: np.ndarray
    beta: np.ndarray
    c_coef: np.ndarray
    e_coef: np.ndarray


@dataclass
class PrecoderLocalState:
    """Memory of one BS: its current precoders and the accumulated gradient, both (U, K, N)."""

    w_prev: np.ndarray
    d_w: np.ndarray = field(default=None)
    pi_w: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.d_w is None:
            self.d_w = np.zeros_like(self.w_prev)
        if self.pi_w is None:
            self.pi_w = np.zeros_like(self.w_prev)

    def copy(self) -> "PrecoderLocalState":
        return PrecoderLocalState(self.w_prev.copy(), self.d_w.copy(), self.pi_w.copy())


@dataclass
class Subproblem:
    """Batched concave quadratics of one BS: Q is (U, K, N, N), q is (U, K, N)."""

    Q: np.ndarray
    q: np.ndarray

    def value(self, w: np.ndarray) -> float:
        linear = np.real(np.sum(np.conj(self.q) * w))
        quadratic = np.real(np.einsum("ukm,ukmn,ukn->", np.conj(w), self.Q, w))
        return float(linear - quadratic)


def surrogate_coeffs(stats: LinkStats, noise_var: Optional[float] = None) -> SurrogateCoeffs:
    """Coefficients of the concave minorant of each user's rate, tight at the current iterate."""
    beta = stats.beta
    alpha = stats.mui + np.abs(beta) ** 2
    gap = alpha - np.abs(beta) ** 2
    if np.any(gap < DIVISION_GUARD):
        raise ConsistencyError("alpha - |beta|^2 vanished; noise variance must be positive")
    c_coef = np.abs(beta) ** 2 / (alpha * gap) / LN2
    e_coef = beta / gap / LN2
    return SurrogateCoeffs(alpha=alpha, beta=beta, c_coef=c_coef, e_coef=e_coef)


def pricing_weights(stats: LinkStats) -> np.ndarray:
    """snr_q / ((1 + snr_q) MUI_q) per (q, k)."""
    return stats.snr / ((1.0 + stats.snr) * stats.mui)


def pricing_all(stats: LinkStats, f_b: np.ndarray) -> np.ndarray:
    """
    Pricing vectors of one BS for every (u, k), shape (U, K, N).

    pi_{u,k} = -(1/ln 2) sum_{q != u} w_q cross[q, u, k] f_{b,q,k}, the gradient of the
    other users' rates with respect to w_{b,u,k}.
    """
    U = stats.cross.shape[0]
    coef = pricing_weights(stats)[:, None, :] * stats.cross
    coef = coef * (1.0 - np.eye(U))[:, :, None]
    return -np.einsum("quk,qkn->ukn", coef, f_b) / LN2


def pricing_w(stats: LinkStats, eff, b: int, u: int, k: int) -> np.ndarray:
    """Pricing vector of BS b for user u on subcarrier k."""
    return pricing_all(stats, eff.f[b])[u, k]


def own_gradient(stats: LinkStats, f_b: np.ndarray) -> np.ndarray:
    """Gradient of R_u with respect to w_{b,u,k}: beta f / (ln 2 (1 + snr) MUI)."""
    scale = stats.beta / ((1.0 + stats.snr) * stats.mui) / LN2
    return scale[:, :, None] * f_b


def accum_w_update(
    state: PrecoderLocalState, pricing: np.ndarray, own_grad_term: np.ndarray, rho_t: float
) -> np.ndarray:
    state.d_w = (1.0 - rho_t) * state.d_w + rho_t * (pricing + own_grad_term)
    state.pi_w = pricing
    return state.d_w


def assemble_subproblem(
    coeffs: SurrogateCoeffs,
    pricing: np.ndarray,
    d_w: np.ndarray,
    w_prev: np.ndarray,
    f_b: np.ndarray,
    r_self: np.ndarray,
    rho_t: float,
    tau: float,
    scale_linear_surrogate: bool = True,
) -> Subproblem:
    """
    Quadratic model of the local surrogate for every (u, k) of one BS.

    r_self[u, k] is the part of beta_{u,k} contributed by the other BSs. With
    `scale_linear_surrogate` off, the 2 (e - c r) f term is used without the
    rho factor.
    """
    U, K, N = f_b.shape
    outer = np.einsum("ukm,ukn->ukmn", f_b, np.conj(f_b))
    Q = rho_t * coeffs.c_coef[:, :, None, None] * outer + 0.5 * tau * np.eye(N)[None, None, :, :]
    Q = 0.5 * (Q + np.conj(np.swapaxes(Q, -1, -2)))

    linear_scale = rho_t if scale_linear_surrogate else 1.0
    surrogate_linear = 2.0 * linear_scale * (coeffs.e_coef - coeffs.c_coef * r_self)[:, :, None] * f_b
    q = surrogate_linear + 2.0 * rho_t * pricing + 2.0 * (1.0 - rho_t) * d_w + tau * w_prev
    return Subproblem(Q=Q, q=q)


def solve_precoder(Q: np.ndarray, q: np.ndarray, lam: float) -> np.ndarray:
    """(Q + lambda I)^{-1} q / 2; broadcasts over leading batch axes."""
    N = Q.shape[-1]
    return 0.5 * np.linalg.solve(Q + lam * np.eye(N), q[..., None])[..., 0]


class PowerProfile:
    """power(lambda) of a batched subproblem, from one eigendecomposition of every Q."""

    def __init__(self, sub: Subproblem):
        self.eigvals, self.eigvecs = np.linalg.eigh(sub.Q)
        self.z = np.einsum("ukmn,ukm->ukn", np.conj(self.eigvecs), sub.q)
        self.z2 = np.abs(self.z) ** 2

    def power(self, lam: float) -> float:
        return float(0.25 * np.sum(self.z2 / (self.eigvals + lam) ** 2))

    def precoders(self, lam: float) -> np.ndarray:
        scaled = 0.5 * self.z / (self.eigvals + lam)
        return np.einsum("ukmn,ukn->ukm", self.eigvecs, scaled)


def bisect_power(sub: Subproblem, p_max: float, tol: float = BISECTION_RTOL) -> Tuple[float, np.ndarray]:
    """
    Smallest multiplier lambda >= 0 whose solution meets the power budget.

    Returns (lambda, w) with w of shape (U, K, N). The returned point satisfies
    |power - p_max| <= tol * p_max whenever the budget is active.
    """
    if p_max <= 0:
        return 0.0, np.zeros_like(sub.q)

    profile = PowerProfile(sub)
    if profile.power(0.0) <= p_max:
        return 0.0, profile.precoders(0.0)

    lo = 0.0
    hi = max(float(np.sqrt(profile.z2.sum() / (4.0 * p_max))), 1e-300)
    steps = 0
    while profile.power(hi) > p_max:
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > BISECTION_MAX_STEPS:
            raise ConvergenceError("could not bracket the power multiplier")

    for _ in range(BISECTION_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        power = profile.power(mid)
        if abs(power - p_max) <= tol * p_max:
            return mid, profile.precoders(mid)
        if power > p_max:
            lo = mid
        else:
            hi = mid
        if abs(profile.power(hi) - p_max) <= tol * p_max:
            return hi, profile.precoders(hi)

    raise ConvergenceError(
        f"power bisection did not converge in {BISECTION_MAX_STEPS} steps (lambda in [{lo:.6g}, {hi:.6g}])"
    )


def surrogate_value(sub: Subproblem, w: np.ndarray) -> float:
    """Local surrogate objective of one BS up to an additive constant."""
    return sub.value(w)


def best_response(
    stats: LinkStats,
    state: PrecoderLocalState,
    f_b: np.ndarray,
    b: int,
    rho_t: float,
    tau: float,
    p_max: float,
    cooperation: bool = True,
    scale_linear_surrogate: bool = True,
) -> Tuple[np.ndarray, Subproblem, float]:
    """
    Updates the accumulation memory of BS b and solves its precoder subproblem.

    Returns (w_hat, subproblem, lambda).
    """
    coeffs = surrogate_coeffs(stats)
    pricing = pricing_all(stats, f_b) if cooperation else np.zeros_like(f_b)
    accum_w_update(state, pricing, own_gradient(stats, f_b), rho_t)

    U = f_b.shape[0]
    r_self = stats.r_cross[b, np.arange(U), np.arange(U), :]
    sub = assemble_subproblem(
        coeffs, pricing, state.d_w, state.w_prev, f_b, r_self, rho_t, tau, scale_linear_surrogate
    )
    lam, w_hat = bisect_power(sub, p_max)
    return w_hat, sub, lam
