"""
Synchronous multi-agent driver of the distributed beamforming algorithm.

Each BS is an Agent. In round t every agent draws a fresh noisy sample of its
own links, publishes its amplitude table (the scalar feedback every BS may
use), computes best responses for its precoders and its capacitor copy,
smooths, and finally exchanges (tracker, capacitor) messages with its graph
neighbours. Messages sent in round t are consumed in round t + 1.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import ChannelRealization, CsiErrorModel, perturb_csi
from .circuit import CapacitorVector, CircuitParams, build_phi_grid
from .consensus_ris import (
    GRAPH_KINDS,
    ConsensusGraph,
    GradientWorkspace,
    RisLocalState,
    caps_direction,
    caps_surrogate_value,
    consensus_average,
    grad_caps_total,
    price_and_accumulate_c,
    solve_caps,
    tracker_update,
)
from .exceptions import ConfigError, SimulationError
from .precoder import PrecoderLocalState, Subproblem, best_response
from .system_model import (
    LinkStats,
    PrecoderSet,
    SystemConfig,
    amplitudes,
    disagreement,
    effective_channel_single,
    effective_channels,
    link_stats,
    link_stats_from_amplitudes,
    matched_filter,
    sum_rate,
)

if TYPE_CHECKING:
    from .config import ExperimentConfig

logger = logging.getLogger(__name__)

ASCENT_RTOL = 1e-9


@dataclass(frozen=True)
class AlgoParams:
    tau: float = 1e-2
    epsilon: float = 1e-3
    t_max: int = 2000
    cooperation: bool = True
    consensus_enabled: bool = True
    rho_exponent: float = 0.99
    graph: str = "complete"
    edges: Tuple[Tuple[int, int], ...] = ()
    scale_linear_surrogate: bool = True
    update_caps: bool = True
    agent_workers: int = 1

    def validate(self) -> "AlgoParams":
        if not self.tau > 0:
            raise ConfigError("tau must be positive", key="algorithm.tau")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive", key="algorithm.epsilon")
        if not (isinstance(self.t_max, (int, np.integer)) and self.t_max >= 1):
            raise ConfigError("t_max must be a positive integer", key="algorithm.t_max")
        if not 0 < self.rho_exponent <= 1:
            raise ConfigError("rho_exponent must lie in (0, 1]", key="algorithm.rho_exponent")
        if self.graph not in GRAPH_KINDS:
            raise ConfigError(f"graph must be one of {GRAPH_KINDS}", key="algorithm.graph")
        if self.agent_workers < 1:
            raise ConfigError("agent_workers must be at least 1", key="algorithm.agent_workers")
        return self


def step_sizes(t: int, params: AlgoParams = AlgoParams()) -> Tuple[float, float]:
    """(rho_t, alpha_t): rho_0 = 1, rho_t = (t + 2)^(-exponent) afterwards, alpha_t = 1 / (t + 2)."""
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    rho = 1.0 if t == 0 else float((t + 2.0) ** (-params.rho_exponent))
    return rho, 1.0 / (t + 2.0)


@dataclass(frozen=True)
class RoundMessage:
    sender: int
    tracker: np.ndarray
    caps: CapacitorVector


@dataclass
class LocalUpdate:
    w_hat: np.ndarray
    c_hat: CapacitorVector
    subproblem: Subproblem
    caps_direction: np.ndarray
    multiplier: float


@dataclass
class AgentState:
    b: int
    precoder: PrecoderLocalState
    ris: RisLocalState
    sample: Optional[ChannelRealization] = None
    f_b: Optional[np.ndarray] = None
    inbox: Dict[int, RoundMessage] = field(default_factory=dict)
    outbox: Optional[RoundMessage] = None

    @property
    def w(self) -> np.ndarray:
        return self.precoder.w_prev

    @property
    def caps(self) -> CapacitorVector:
        return self.ris.caps

    def iterate(self) -> np.ndarray:
        return np.concatenate([self.w.real.ravel(), self.w.imag.ravel(), self.caps.pf])


@dataclass
class IterationRecord:
    t: int
    rho: float
    alpha: float
    sum_rate: float
    disagreement: float
    surrogate_before: np.ndarray
    surrogate_after: np.ndarray
    power: np.ndarray
    multiplier: np.ndarray
    response_power: np.ndarray
    pricing_norm: float
    iterate_change: float
    wall_ms: float
    ascent_violations: int = 0


@dataclass
class RunTrace:
    initial_sum_rate: float = 0.0
    records: List[IterationRecord] = field(default_factory=list)
    ascent_violations: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.t <= self.records[-1].t:
            raise SimulationError(f"trace index {record.t} does not follow {self.records[-1].t}")
        self.records.append(record)


@dataclass
class RunContext:
    """Everything fixed for one run: true channels, constants and the consensus graph."""

    seed: int
    system: SystemConfig
    circuit: CircuitParams
    csi: CsiErrorModel
    params: AlgoParams
    channels: ChannelRealization
    graph: ConsensusGraph
    f_grid: np.ndarray

    def sample_seed(self, b: int, t: int) -> List[int]:
        # round t uses index t + 1; index 0 is the initialization sample
        return [int(self.seed), int(b), int(t) + 1]


@dataclass
class RunResult:
    precoders: PrecoderSet
    caps: CapacitorVector
    copies: List[CapacitorVector]
    trace: RunTrace
    sum_rate: float
    per_user_rates: np.ndarray
    iterations: int
    disagreement: float
    powers: np.ndarray


class Agent:
    """One BS. Methods read only the agent's own state, the scalar feedback and its inbox."""

    def __init__(self, state: AgentState, context: RunContext):
        self.state = state
        self.context = context

    @property
    def b(self) -> int:
        return self.state.b

    def observe(self, sample: ChannelRealization) -> np.ndarray:
        """Stores the noisy sample and returns the local amplitude table (U, U, K)."""
        self.state.sample = sample
        phi = build_phi_grid(self.context.f_grid, self.state.caps, self.context.circuit)
        self.state.f_b = effective_channel_single(sample.h[0], sample.stacked_H()[0], sample.stacked_g(), phi)
        return amplitudes(self.state.f_b, self.state.w)

    def best_response(self, stats: LinkStats, t: int, rho: float) -> LocalUpdate:
        params = self.context.params
        w_hat, sub, lam = best_response(
            stats,
            self.state.precoder,
            self.state.f_b,
            self.b,
            rho,
            params.tau,
            self.context.system.p_max,
            cooperation=params.cooperation,
            scale_linear_surrogate=params.scale_linear_surrogate,
        )

        ris = self.state.ris
        if not params.update_caps:
            return LocalUpdate(w_hat, ris.caps.copy(), sub, np.zeros(len(ris.caps)), lam)

        sample = self.state.sample
        ws = GradientWorkspace.build(
            sample.stacked_H()[0],
            sample.stacked_g(),
            self.state.w,
            ris.caps,
            self.context.f_grid,
            self.context.circuit,
            stats,
        )
        grad = grad_caps_total(ws)
        if t == 0 or not self.state.inbox:
            ris.q_c = grad.copy()
            ris.grad_prev = grad.copy()
        else:
            senders = sorted(self.state.inbox)
            tracker_update(
                ris,
                [self.state.inbox[i].tracker for i in senders],
                [self.context.graph.V[self.b, i] for i in senders],
                grad,
                ris.grad_prev,
            )
        pi_c, d_c, gamma = price_and_accumulate_c(
            ris, ris.q_c, grad, rho, self.context.graph.size, cooperation=params.cooperation
        )
        c_hat = solve_caps(ris, pi_c, d_c, gamma, rho, params.tau, self.context.circuit)
        return LocalUpdate(w_hat, c_hat, sub, caps_direction(pi_c, d_c, gamma, rho), lam)

    def smooth(self, update: LocalUpdate, alpha: float) -> CapacitorVector:
        """Blends both blocks toward the best response; returns the pre-consensus capacitors."""
        self.state.precoder.w_prev = (1.0 - alpha) * self.state.w + alpha * update.w_hat
        if not self.context.params.update_caps:
            return self.state.caps.copy()
        blended = CapacitorVector((1.0 - alpha) * self.state.caps.pf + alpha * update.c_hat.pf)
        return blended.clipped(self.context.circuit)

    def surrogate(self, update: LocalUpdate, w: np.ndarray, caps: CapacitorVector, reference: CapacitorVector) -> float:
        value = update.subproblem.value(w)
        if self.context.params.update_caps:
            value += caps_surrogate_value(caps, reference, update.caps_direction, self.context.params.tau)
        return value

    def outgoing(self, caps: CapacitorVector) -> RoundMessage:
        self.state.outbox = RoundMessage(self.b, self.state.ris.q_c.copy(), caps.copy())
        return self.state.outbox


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_context(
    seed: int,
    config: "ExperimentConfig",
    channels: ChannelRealization,
    params: Optional[AlgoParams] = None,
) -> RunContext:
    params = (params or config.algorithm).validate()
    system = config.system
    return RunContext(
        seed=int(seed),
        system=system,
        circuit=config.circuit,
        csi=config.csi,
        params=params,
        channels=channels,
        graph=ConsensusGraph.build(params.graph, system.B, params.edges),
        f_grid=system.subcarrier_frequencies(),
    )


def initialize(
    seed: int,
    config: "ExperimentConfig",
    channels: ChannelRealization,
    params: Optional[AlgoParams] = None,
    initial_caps: Optional[CapacitorVector] = None,
) -> List[Agent]:
    """Agents at the common starting point: midpoint capacitors, full-power matched filters."""
    context = build_context(seed, config, channels, params)
    system = context.system
    caps = initial_caps.copy() if initial_caps is not None else CapacitorVector.midpoint(system.RM, context.circuit)
    if len(caps) != system.RM:
        raise ConfigError(f"initial capacitor vector has {len(caps)} entries, expected {system.RM}")

    agents = []
    for b in range(system.B):
        sample = perturb_csi(context.sample_seed(b, -1), channels.for_bs(b), context.csi)
        phi = build_phi_grid(context.f_grid, caps, context.circuit)
        f_b = effective_channel_single(sample.h[0], sample.stacked_H()[0], sample.stacked_g(), phi)
        state = AgentState(
            b=b,
            precoder=PrecoderLocalState(matched_filter(f_b, system.p_max)),
            ris=RisLocalState(caps.copy()),
            sample=sample,
            f_b=f_b,
        )
        agents.append(Agent(state, context))
    return agents


def true_sum_rate(agents: Sequence[Agent], context: RunContext) -> Tuple[np.ndarray, float]:
    """Sum rate on the true channels with the BS-0 capacitor copy driving the RIS."""
    eff = effective_channels(context.channels, agents[0].state.caps, context.f_grid, context.circuit)
    w = PrecoderSet(np.stack([agent.state.w for agent in agents]))
    return sum_rate(link_stats(eff, w, context.system.noise_var))


def run_round(t: int, agents: Sequence[Agent], context: RunContext) -> IterationRecord:
    started = time.perf_counter()
    params = context.params
    rho, alpha = step_sizes(t, params)
    workers = params.agent_workers
    previous = [agent.state.iterate() for agent in agents]
    references = [agent.state.caps.copy() for agent in agents]

    def observe(agent: Agent) -> np.ndarray:
        sample = perturb_csi(context.sample_seed(agent.b, t), context.channels.for_bs(agent.b), context.csi)
        return agent.observe(sample)

    try:
        amp = np.stack(_parallel_map(observe, agents, workers))
        stats = link_stats_from_amplitudes(amp, context.system.noise_var)
        updates = _parallel_map(lambda agent: agent.best_response(stats, t, rho), agents, workers)
    except (SimulationError, np.linalg.LinAlgError) as exc:
        logger.error(f"Round {t} failed: {exc}")
        raise SimulationError(f"best-response step failed at iteration {t}: {exc}") from exc

    before = np.array(
        [agent.surrogate(upd, agent.state.w, ref, ref) for agent, upd, ref in zip(agents, updates, references)]
    )
    blended = [agent.smooth(upd, alpha) for agent, upd in zip(agents, updates)]
    after = np.array(
        [
            agent.surrogate(upd, agent.state.w, caps, ref)
            for agent, upd, caps, ref in zip(agents, updates, blended, references)
        ]
    )
    violations = after < before - ASCENT_RTOL * np.maximum(1.0, np.abs(before))
    for b in np.flatnonzero(violations):
        logger.warning(f"Surrogate decreased at BS {b}, iteration {t}: {before[b]:.12g} -> {after[b]:.12g}")

    messages = [agent.outgoing(caps) for agent, caps in zip(agents, blended)]
    for agent in agents:
        agent.state.inbox = {i: messages[i] for i in [agent.b] + context.graph.neighbors(agent.b)}

    if params.consensus_enabled and params.update_caps:
        mixed = consensus_average(blended, context.graph.V, context.circuit)
    else:
        mixed = blended
    for agent, caps in zip(agents, mixed):
        agent.state.ris.caps = caps

    _, total = true_sum_rate(agents, context)
    changes = [
        float(np.linalg.norm(agent.state.iterate() - prev) / max(1.0, np.linalg.norm(prev)))
        for agent, prev in zip(agents, previous)
    ]
    pricing = sum(
        float(np.sum(np.abs(agent.state.precoder.pi_w) ** 2) + np.sum(agent.state.ris.pi_c**2)) for agent in agents
    )
    record = IterationRecord(
        t=t,
        rho=rho,
        alpha=alpha,
        sum_rate=total,
        disagreement=disagreement([agent.state.caps for agent in agents]),
        surrogate_before=before,
        surrogate_after=after,
        power=np.array([float(np.sum(np.abs(agent.state.w) ** 2)) for agent in agents]),
        multiplier=np.array([upd.multiplier for upd in updates]),
        response_power=np.array([float(np.sum(np.abs(upd.w_hat) ** 2)) for upd in updates]),
        pricing_norm=float(np.sqrt(pricing)),
        iterate_change=max(changes),
        wall_ms=1e3 * (time.perf_counter() - started),
        ascent_violations=int(violations.sum()),
    )
    logger.debug(
        f"t={t} rho={rho:.4g} alpha={alpha:.4g} sum_rate={total:.6g} "
        f"disagreement={record.disagreement:.3g} change={record.iterate_change:.3g}"
    )
    return record


def converged(trace: RunTrace, agents: Sequence[Agent], epsilon: float, t_max: Optional[int] = None) -> bool:
    if t_max is not None and len(trace) >= t_max:
        return True
    if len(trace) < 2:
        return False
    return trace.records[-1].iterate_change <= epsilon


def run(
    seed: int,
    config: "ExperimentConfig",
    params: Optional[AlgoParams] = None,
    channels: Optional[ChannelRealization] = None,
    initial_caps: Optional[CapacitorVector] = None,
) -> RunResult:
    """Runs rounds until the iterate settles or t_max is reached, then evaluates on the true channels."""
    if channels is None:
        from .experiment import draw_realization

        channels = draw_realization(seed, config)
    agents = initialize(seed, config, channels, params, initial_caps)
    context = agents[0].context
    params = context.params

    trace = RunTrace()
    _, trace.initial_sum_rate = true_sum_rate(agents, context)
    logger.info(
        f"Run seed={seed} B={context.system.B} U={context.system.U} RM={context.system.RM} "
        f"K={context.system.K} p_max={context.system.p_max_dbm} dBm: initial sum rate {trace.initial_sum_rate:.6g}"
    )

    t = 0
    while True:
        record = run_round(t, agents, context)
        trace.append(record)
        trace.ascent_violations += record.ascent_violations
        if converged(trace, agents, params.epsilon, params.t_max):
            break
        t += 1

    if len(trace) >= params.t_max and trace.records[-1].iterate_change > params.epsilon:
        logger.warning(f"Run seed={seed} stopped at t_max={params.t_max} without meeting epsilon={params.epsilon}")

    per_user, total = true_sum_rate(agents, context)
    copies = [agent.state.caps.copy() for agent in agents]
    precoders = PrecoderSet(np.stack([agent.state.w for agent in agents]))
    logger.info(f"Run seed={seed} finished after {len(trace)} iterations: sum rate {total:.6g}")
    return RunResult(
        precoders=precoders,
        caps=copies[0],
        copies=copies,
        trace=trace,
        sum_rate=total,
        per_user_rates=per_user,
        iterations=len(trace),
        disagreement=disagreement(copies),
        powers=precoders.powers(),
    )
