"""
Capacitor subproblem of one BS and the consensus machinery around it.

Each BS keeps its own copy of the capacitor vector. Gradients are taken with
respect to that copy, in picofarads, through the BS's own effective channels
only; summing them over BSs gives the gradient with respect to a shared
capacitor vector.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .circuit import CapacitorVector, CircuitParams, build_phi_derivative_grid, build_phi_grid
from .exceptions import ConsistencyError, GraphError
from .system_model import LN2, LinkStats

logger = logging.getLogger(__name__)

IMAG_RESIDUE_RTOL = 1e-9
STOCHASTIC_ATOL = 1e-12

GRAPH_KINDS = ("complete", "ring", "path", "custom")


@dataclass
class ConsensusGraph:
    """Undirected BS communication graph with its Metropolis-Hastings mixing matrix."""

    graph: nx.Graph
    V: np.ndarray

    @property
    def size(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.graph.edges())

    def neighbors(self, b: int) -> List[int]:
        return sorted(self.graph.neighbors(b))

    def row(self, b: int) -> np.ndarray:
        return self.V[b]

    @classmethod
    def build(cls, kind: str, B: int, edges: Optional[Iterable[Sequence[int]]] = None) -> "ConsensusGraph":
        graph = build_graph(kind, B, edges)
        return cls(graph=graph, V=metropolis_weights(list(graph.edges()), B))


def build_graph(kind: str, B: int, edges: Optional[Iterable[Sequence[int]]] = None) -> nx.Graph:
    if kind == "complete":
        graph = nx.complete_graph(B)
    elif kind == "ring":
        graph = nx.cycle_graph(B) if B > 2 else nx.path_graph(B)
    elif kind == "path":
        graph = nx.path_graph(B)
    elif kind == "custom":
        graph = nx.empty_graph(B)
        for edge in edges or ():
            if len(edge) != 2:
                raise GraphError(f"edge {edge!r} must name exactly two BSs")
            i, j = int(edge[0]), int(edge[1])
            if not (0 <= i < B and 0 <= j < B) or i == j:
                raise GraphError(f"edge ({i}, {j}) is not a valid pair of distinct BSs in [0, {B})")
            graph.add_edge(i, j)
    else:
        raise GraphError(f"unknown graph kind '{kind}', expected one of {GRAPH_KINDS}")
    return graph


def metropolis_weights(edges: Iterable[Sequence[int]], B: int) -> np.ndarray:
    """V_bi = 1 / (1 + max(deg_b, deg_i)) on edges, self-weights fill each row to one."""
    graph = nx.empty_graph(B)
    graph.add_edges_from((int(i), int(j)) for i, j in edges if int(i) != int(j))
    if B < 1 or not nx.is_connected(graph):
        raise GraphError(f"consensus graph over {B} BSs is not connected")

    degree = dict(graph.degree())
    V = np.zeros((B, B))
    for i, j in graph.edges():
        weight = 1.0 / (1.0 + max(degree[i], degree[j]))
        V[i, j] = weight
        V[j, i] = weight
    V[np.diag_indices(B)] = 1.0 - V.sum(axis=1)

    if np.any(V < -STOCHASTIC_ATOL) or not (
        np.allclose(V.sum(axis=0), 1.0, atol=STOCHASTIC_ATOL, rtol=0)
        and np.allclose(V.sum(axis=1), 1.0, atol=STOCHASTIC_ATOL, rtol=0)
    ):
        raise ConsistencyError("Metropolis weights are not doubly stochastic")
    return V


@dataclass
class RisLocalState:
    """Capacitor copy of one BS plus its tracking and accumulation memory, all length R*M."""

    caps: CapacitorVector
    q_c: np.ndarray = field(default=None)
    d_c: np.ndarray = field(default=None)
    pi_c: np.ndarray = field(default=None)
    gamma: np.ndarray = field(default=None)
    grad_prev: np.ndarray = field(default=None)

    def __post_init__(self):
        size = len(self.caps)
        for name in ("q_c", "d_c", "pi_c", "gamma", "grad_prev"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(size))

    def copy(self) -> "RisLocalState":
        return RisLocalState(
            self.caps.copy(),
            self.q_c.copy(),
            self.d_c.copy(),
            self.pi_c.copy(),
            self.gamma.copy(),
            self.grad_prev.copy(),
        )


@dataclass
class GradientWorkspace:
    """
    Per-BS quantities for the capacitor gradient, rebuilt every round.

    H_b: (K, RM, N) stacked BS-RIS channels; g: (U, K, RM) stacked RIS-UE
    channels; phi and D: (K, RM) reflections and their per-pF derivatives;
    w_b: (U, K, N); cross: (U, U, K) network-wide amplitudes.
    """

    H_b: np.ndarray
    g: np.ndarray
    phi: np.ndarray
    D: np.ndarray
    w_b: np.ndarray
    cross: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    @classmethod
    def build(
        cls,
        H_b: np.ndarray,
        g: np.ndarray,
        w_b: np.ndarray,
        caps: CapacitorVector,
        f_grid: np.ndarray,
        params: CircuitParams,
        stats: LinkStats,
    ) -> "GradientWorkspace":
        return cls(
            H_b=H_b,
            g=g,
            phi=build_phi_grid(f_grid, caps, params),
            D=build_phi_derivative_grid(f_grid, caps, params),
            w_b=w_b,
            cross=stats.cross,
            f1=stats.f1,
            f2=stats.f2,
        )

    def amplitude_sensitivities(self) -> np.ndarray:
        """dA[i, j, k, n]: derivative of cross[i, j, k] with respect to capacitor n."""
        v = np.einsum("kmn,jkn->jkm", self.H_b, self.w_b)
        return self.D[None, None, :, :] * np.conj(self.g)[:, None, :, :] * v[None, :, :, :]

    def conjugate_sensitivities(self) -> np.ndarray:
        """Derivative of conj(cross[i, j, k]), assembled from conj(D) and the conjugated channels."""
        v_conj = np.einsum("kmn,jkn->jkm", np.conj(self.H_b), np.conj(self.w_b))
        return np.conj(self.D)[None, None, :, :] * self.g[:, None, :, :] * v_conj[None, :, :, :]

    def power_gradients(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        (grad f1, grad f2), each (U, K, RM), from the raw complex assembly.

        The two halves of d|cross|^2 are built separately; their sum must be
        real, so an imaginary residue means they disagree.
        """
        raw = (
            np.conj(self.cross)[:, :, :, None] * self.amplitude_sensitivities()
            + self.cross[:, :, :, None] * self.conjugate_sensitivities()
        )

        scale = max(float(np.max(np.abs(raw))), 1e-300)
        residue = float(np.max(np.abs(raw.imag)))
        if residue > IMAG_RESIDUE_RTOL * scale:
            raise ConsistencyError(f"capacitor gradient has imaginary residue {residue:.3g}")
        grad_power = raw.real

        U = grad_power.shape[0]
        users = np.arange(U)
        grad_f1 = grad_power[users, users]
        grad_f2 = grad_power.sum(axis=1) - grad_f1
        return grad_f1, grad_f2

    def user_gradients(self) -> np.ndarray:
        """Per-user rate gradients, shape (U, RM), in bits/s/Hz per pF."""
        grad_f1, grad_f2 = self.power_gradients()
        f1 = self.f1[:, :, None]
        f2 = self.f2[:, :, None]
        per_sc = (f2 * grad_f1 - f1 * grad_f2) / (f2 * (f2 + f1))
        return per_sc.sum(axis=1) / LN2


def grad_caps_user(ws: GradientWorkspace, u: int) -> np.ndarray:
    return ws.user_gradients()[u]


def grad_caps_total(ws: GradientWorkspace) -> np.ndarray:
    per_user = ws.user_gradients()
    total = np.zeros(per_user.shape[1])
    for row in per_user:
        total = total + row
    return total


def tracker_update(
    state: RisLocalState,
    neighbor_trackers: Sequence[np.ndarray],
    V_row: Sequence[float],
    grad_new: np.ndarray,
    grad_prev: np.ndarray,
) -> np.ndarray:
    """q <- sum_i V_bi q_i + grad_new - grad_prev; inputs ordered by BS index."""
    if len(neighbor_trackers) != len(V_row):
        raise ValueError(f"{len(neighbor_trackers)} trackers given for {len(V_row)} weights")
    mixed = np.zeros_like(grad_new, dtype=float)
    for weight, tracker in zip(V_row, neighbor_trackers):
        if tracker.shape != grad_new.shape:
            raise ValueError(f"tracker shape {tracker.shape} does not match gradient {grad_new.shape}")
        mixed = mixed + weight * tracker
    state.q_c = mixed + grad_new - grad_prev
    state.grad_prev = grad_new.copy()
    return state.q_c


def price_and_accumulate_c(
    state: RisLocalState,
    q_new: np.ndarray,
    grad_local: np.ndarray,
    rho_t: float,
    B: int,
    cooperation: bool = True,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """pi = B q - grad, d <- (1 - rho) d + rho (gamma + pi), gamma = local sum-rate gradient."""
    state.gamma = grad_local.copy()
    state.pi_c = B * q_new - grad_local if cooperation else np.zeros_like(grad_local)
    state.d_c = (1.0 - rho_t) * state.d_c + rho_t * (state.gamma + state.pi_c)
    return state.pi_c, state.d_c, state.gamma


def caps_direction(pi_c: np.ndarray, d_c: np.ndarray, gamma: np.ndarray, rho_t: float) -> np.ndarray:
    return rho_t * (gamma + pi_c) + (1.0 - rho_t) * d_c


def solve_caps(
    state: RisLocalState,
    pi_c: np.ndarray,
    d_c: np.ndarray,
    gamma: np.ndarray,
    rho_t: float,
    tau: float,
    box: CircuitParams,
) -> CapacitorVector:
    """Maximizer of a^T (c - c_t) - tau/2 ||c - c_t||^2 over the capacitance box."""
    a = caps_direction(pi_c, d_c, gamma, rho_t)
    return CapacitorVector(state.caps.pf + a / tau).clipped(box)


def caps_surrogate_value(
    caps: CapacitorVector, reference: CapacitorVector, direction: np.ndarray, tau: float
) -> float:
    step = caps.pf - reference.pf
    return float(direction @ step - 0.5 * tau * step @ step)


def consensus_average(
    copies: Sequence[CapacitorVector], V: np.ndarray, box: Optional[CircuitParams] = None
) -> List[CapacitorVector]:
    """Row-wise convex combinations of the capacitor copies, summed in BS order."""
    averaged = []
    for b in range(len(copies)):
        mixed = np.zeros_like(copies[0].pf)
        for i, copy in enumerate(copies):
            if V[b, i] != 0.0:
                mixed = mixed + V[b, i] * copy.pf
        result = CapacitorVector(mixed)
        # rounding in the weights may step an ulp outside the box
        averaged.append(result.clipped(box) if box is not None else result)
    return averaged
