"""
Monte-Carlo sweeps over the per-BS power budget, baselines and CSV output.
"""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .channel import ChannelRealization, build_geometry, draw_channels
from .circuit import CapacitorVector, calibrate_capacitors
from .config import MODES, ExperimentConfig, dump_config
from .exceptions import ConfigError, SimulationError
from .orchestrator import AlgoParams, RunResult, RunTrace, run

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".12g"
TRACE_HEADER = ["t", "rho", "alpha", "sum_rate", "disagreement"]


@dataclass
class ResultRow:
    mode: str
    p_max_dbm: float
    seed: int
    iterations: int
    final_sum_rate: float
    per_user_rates: np.ndarray
    final_disagreement: float
    per_bs_power: np.ndarray
    wall_ms: float
    num_subcarriers: int = 1
    initial_sum_rate: float = 0.0
    trace: Optional[RunTrace] = field(default=None, repr=False)

    @property
    def sum_rate_per_sc(self) -> float:
        return self.final_sum_rate / self.num_subcarriers

    def check(self) -> "ResultRow":
        values = [self.final_sum_rate, self.final_disagreement, self.wall_ms, *self.per_user_rates, *self.per_bs_power]
        if not np.all(np.isfinite(values)):
            raise SimulationError(f"non-finite result for seed {self.seed} at {self.p_max_dbm} dBm")
        if abs(float(np.sum(self.per_user_rates)) - self.final_sum_rate) > 1e-9 * max(1.0, abs(self.final_sum_rate)):
            raise SimulationError("per-user rates do not add up to the sum rate")
        return self


def derive_seed(master_seed: int, p_index: int, realization: int) -> int:
    """Child seed of sweep cell (p_index, realization): a splittable counter scheme over SeedSequence."""
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(p_index), int(realization)))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _streams(seed: int) -> List[np.random.SeedSequence]:
    # geometry, fading, baseline randomness
    return np.random.SeedSequence(int(seed)).spawn(3)


def draw_realization(seed: int, config: ExperimentConfig) -> ChannelRealization:
    geometry_seed, fading_seed, _ = _streams(seed)
    geometry = build_geometry(geometry_seed, config.geometry, config.system)
    return draw_channels(fading_seed, geometry, config.pathloss, config.system, config.channel)


def mode_params(mode: str, params: AlgoParams) -> AlgoParams:
    """Algorithm flags of a mode; the fixed-capacitor modes optimize precoders only."""
    if mode == "proposed":
        return params
    if mode == "no-coop":
        return replace(params, cooperation=False)
    if mode == "no-coop-no-consensus":
        return replace(params, cooperation=False, consensus_enabled=False)
    if mode in ("random-caps", "midpoint-caps", "ff-calibrated"):
        return replace(params, cooperation=False, consensus_enabled=False, update_caps=False)
    raise ConfigError(f"unknown mode '{mode}', expected one of {MODES}", key="experiment.mode")


def fixed_caps(mode: str, seed: int, config: ExperimentConfig) -> Optional[CapacitorVector]:
    size = config.system.RM
    params = config.circuit
    rng = np.random.default_rng(_streams(seed)[2])
    if mode == "random-caps":
        return CapacitorVector.uniform(size, params, rng)
    if mode == "midpoint-caps":
        return CapacitorVector.midpoint(size, params)
    if mode == "ff-calibrated":
        targets = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=size))
        caps, residuals = calibrate_capacitors(targets, config.system.f_c, params)
        logger.debug(f"Frequency-flat calibration: mean residual {residuals.mean():.4g}")
        return caps
    return None


def _row(mode: str, seed: int, config: ExperimentConfig, result: RunResult, wall_ms: float) -> ResultRow:
    return ResultRow(
        mode=mode,
        p_max_dbm=config.system.p_max_dbm,
        seed=int(seed),
        iterations=result.iterations,
        final_sum_rate=result.sum_rate,
        per_user_rates=result.per_user_rates,
        final_disagreement=result.disagreement,
        per_bs_power=result.powers,
        wall_ms=wall_ms if config.experiment.timing else 0.0,
        num_subcarriers=config.system.K,
        initial_sum_rate=result.trace.initial_sum_rate,
        trace=result.trace,
    ).check()


def run_mode(mode: str, seed: int, config: ExperimentConfig, channels: ChannelRealization) -> ResultRow:
    started = time.perf_counter()
    params = mode_params(mode, config.algorithm)
    result = run(seed, config, params, channels, initial_caps=fixed_caps(mode, seed, config))
    return _row(mode, seed, config, result, 1e3 * (time.perf_counter() - started))


def run_baseline(mode: str, seed: int, config: ExperimentConfig, channels: ChannelRealization) -> ResultRow:
    if mode == "proposed":
        raise ConfigError("run_baseline expects a baseline mode, not 'proposed'", key="experiment.mode")
    return run_mode(mode, seed, config, channels)


def run_cell(config: ExperimentConfig, p_index: int, realization: int) -> ResultRow:
    settings = config.experiment
    p_max_dbm = settings.sweep[p_index]
    cell_config = config.with_system(p_max_dbm=float(p_max_dbm))
    seed = derive_seed(settings.master_seed, p_index, realization)
    try:
        channels = draw_realization(seed, cell_config)
        return run_mode(settings.mode, seed, cell_config, channels)
    except (SimulationError, np.linalg.LinAlgError) as exc:
        logger.error(f"Cell (p_max index {p_index}, realization {realization}) failed: {exc}")
        raise SimulationError(
            f"{settings.mode} run failed at P_max={p_max_dbm} dBm (p_max index {p_index}, realization {realization}): {exc}"
        ) from exc


def run_sweep(config: ExperimentConfig, progress: bool = False) -> List[ResultRow]:
    """One row per (P_max, realization), ordered by P_max index then realization."""
    config.validate()
    settings = config.experiment
    cells = [(p, i) for p in range(len(settings.sweep)) for i in range(settings.realizations)]
    logger.info(
        f"Sweep mode={settings.mode} P_max={list(settings.sweep)} dBm realizations={settings.realizations} "
        f"workers={settings.workers}"
    )

    rows: List[Optional[ResultRow]] = [None] * len(cells)
    with tqdm(total=len(cells), desc=settings.mode, unit="run", disable=not progress) as bar:
        if settings.workers <= 1:
            for n, (p, i) in enumerate(cells):
                rows[n] = run_cell(config, p, i)
                bar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                futures = [pool.submit(run_cell, config, p, i) for p, i in cells]
                for n, future in enumerate(futures):
                    rows[n] = future.result()
                    bar.update(1)

    for p, value in enumerate(settings.sweep):
        rates = [row.final_sum_rate for row in rows if row.p_max_dbm == float(value)]
        logger.info(f"P_max={value} dBm: mean sum rate {np.mean(rates):.6g} over {len(rates)} realizations")
    return rows


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def csv_header(num_bs: int) -> List[str]:
    return (
        ["mode", "p_max_dbm", "seed", "iterations", "sum_rate_bpshz", "sum_rate_per_sc", "disagreement"]
        + [f"power_b{b}" for b in range(num_bs)]
        + ["wall_ms"]
    )


def write_csv(rows: Sequence[ResultRow], path: Union[str, Path]) -> Path:
    if not rows:
        raise SimulationError("no result rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    num_bs = len(rows[0].per_bs_power)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(csv_header(num_bs))
        for row in rows:
            if len(row.per_bs_power) != num_bs:
                raise SimulationError("rows disagree on the number of BSs")
            writer.writerow(
                [
                    row.mode,
                    _fmt(row.p_max_dbm),
                    str(row.seed),
                    str(row.iterations),
                    _fmt(row.final_sum_rate),
                    _fmt(row.sum_rate_per_sc),
                    _fmt(row.final_disagreement),
                    *(_fmt(p) for p in row.per_bs_power),
                    _fmt(row.wall_ms),
                ]
            )
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def write_trace_csv(trace: RunTrace, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for record in trace.records:
            writer.writerow(
                [str(record.t), _fmt(record.rho), _fmt(record.alpha), _fmt(record.sum_rate), _fmt(record.disagreement)]
            )
    logger.info(f"Wrote {len(trace)} trace rows to {path}")
    return path


def archive_rows(rows: Iterable[ResultRow], config: ExperimentConfig, csv_path: Union[str, Path, None] = None):
    """Stores the run and its rows in the result archive in one transaction."""
    from django.db import transaction

    from .models import SimulationRun, SweepResult

    rows = list(rows)
    with transaction.atomic():
        run_record = SimulationRun.objects.create(
            mode=config.experiment.mode,
            master_seed=str(config.experiment.master_seed),
            config_toml=dump_config(config),
            csv_path=str(csv_path or ""),
        )
        SweepResult.objects.bulk_create(
            [
                SweepResult(
                    run=run_record,
                    mode=row.mode,
                    p_max_dbm=row.p_max_dbm,
                    seed=str(row.seed),
                    iterations=row.iterations,
                    sum_rate_bpshz=row.final_sum_rate,
                    sum_rate_per_sc=row.sum_rate_per_sc,
                    initial_sum_rate=row.initial_sum_rate,
                    disagreement=row.final_disagreement,
                    per_user_rates=[float(r) for r in row.per_user_rates],
                    per_bs_power=[float(p) for p in row.per_bs_power],
                    wall_ms=row.wall_ms,
                )
                for row in rows
            ]
        )
    logger.info(f"Archived {len(rows)} rows as run {run_record.pk}")
    return run_record
