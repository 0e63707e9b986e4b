"""Trajectory engines for MbSGD, LocalSGD and SCAFFOLD, and trace metrics.

All three algorithms share one round-boundary rule: every worker keeps the
sum of the gradients it queried during the round, and the new common
iterate is ``x_round_start - (eta / n) * sum_i accumulator_i``, with the
worker sum taken in ascending worker order.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, EmptyTraceError, TraceMismatchError
from .oracle import sample_gradients
from .problem import global_grad, global_value
from .types import (
    Algorithm,
    Metric,
    ProblemInstance,
    RunConfig,
    Trace,
    TraceRecord,
    WorkerState,
)
from .utils import ordered_mean, ordered_sum

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12


class _Recorder:
    """Builds the trace and watches for divergence."""

    def __init__(self, p: ProblemInstance, cfg: RunConfig) -> None:
        self.p = p
        self.cfg = cfg
        self.trace = Trace(
            algorithm=cfg.algorithm,
            tau=cfg.tau,
            rounds=cfg.rounds,
            config=cfg.describe(),
            seed=cfg.oracle.seed,
            record_every=cfg.record_every,
        )

    def observe(self, t: int, round_index: int, states: List[WorkerState]) -> bool:
        """Record iteration ``t`` when due; return False once the run diverged."""
        iterates = np.stack([state.iterate for state in states])
        if np.all(iterates == iterates[0]):
            average = iterates[0].copy()
        else:
            average = ordered_mean(iterates)
        if not self.bounded(average):
            return False
        if t % self.cfg.record_every != 0:
            return True
        grad = global_grad(self.p, average)
        f_value = global_value(self.p, average)
        if not math.isfinite(f_value) or abs(f_value) > DIVERGENCE_THRESHOLD:
            self._flag(t)
            return False
        deviations = iterates - average
        consensus = float(np.mean(np.sum(deviations * deviations, axis=1)))
        self.trace.records.append(
            TraceRecord(
                t=t,
                round=round_index,
                grad_norm_sq=float(grad @ grad),
                f_value=f_value,
                consensus_sq=consensus,
            )
        )
        return True

    def finish(self, average: np.ndarray) -> Trace:
        if not self.trace.diverged and self.bounded(average):
            self.trace.final_iterate = np.array(average)
        return self.trace

    def bounded(self, average: np.ndarray) -> bool:
        norm = float(np.linalg.norm(average))
        if math.isfinite(norm) and norm <= DIVERGENCE_THRESHOLD:
            return True
        self._flag(None)
        return False

    def _flag(self, t: Optional[int]) -> None:
        if not self.trace.diverged:
            logger.warning(
                "%s diverged (eta=%g, seed=%d) at t=%s",
                self.cfg.algorithm.value,
                self.cfg.eta,
                self.cfg.oracle.seed,
                "end" if t is None else t,
            )
        self.trace.diverged = True


def _start(
    p: ProblemInstance, cfg: RunConfig, expected: Algorithm
) -> Tuple[np.ndarray, List[WorkerState]]:
    cfg.validate(p.dimension)
    if cfg.algorithm != expected:
        raise ConfigurationError(
            f"Run configured for {cfg.algorithm.value}, expected {expected.value}",
            field="algorithm",
            value=cfg.algorithm.value,
        )
    init = np.zeros(p.dimension) if cfg.init is None else np.asarray(cfg.init, dtype=np.float64)
    return init.copy(), [WorkerState.at(init) for _ in range(p.num_workers)]


def _query(p: ProblemInstance, cfg: RunConfig, t: int, states: List[WorkerState]) -> np.ndarray:
    iterates = np.stack([state.iterate for state in states])
    return sample_gradients(p, cfg.oracle, t, iterates)


def _communicate(start: np.ndarray, eta: float, states: List[WorkerState]) -> np.ndarray:
    accumulated = ordered_sum(np.stack([state.batch_accumulator for state in states]))
    average = start - (eta / len(states)) * accumulated
    for state in states:
        state.iterate = average.copy()
        state.batch_accumulator = np.zeros_like(average)
    return average


def _run_rounds(
    p: ProblemInstance, cfg: RunConfig, expected: Algorithm, local_steps: bool
) -> Trace:
    average, states = _start(p, cfg, expected)
    recorder = _Recorder(p, cfg)
    tau = cfg.tau
    for r in range(cfg.rounds):
        round_start = average
        for k in range(tau):
            t = r * tau + k
            if not recorder.observe(t, r, states):
                return recorder.finish(average)
            grads = _query(p, cfg, t, states)
            for state, grad in zip(states, grads):
                state.batch_accumulator += grad
                # The last local step is superseded by the boundary rule.
                if local_steps and k < tau - 1:
                    state.iterate = state.iterate - cfg.eta * grad
        average = _communicate(round_start, cfg.eta, states)
        if not recorder.bounded(average):
            return recorder.finish(average)
    return recorder.finish(average)


def run_mbsgd(p: ProblemInstance, cfg: RunConfig) -> Trace:
    """Run minibatch SGD.

    Workers query the oracle τ times at the frozen round-start point; the
    boundary step uses η times the sum of those gradients.

    Raises:
        ConfigurationError: If the configuration is invalid or not for MbSGD
    """
    return _run_rounds(p, cfg, Algorithm.MBSGD, local_steps=False)


def run_localsgd(p: ProblemInstance, cfg: RunConfig) -> Trace:
    """Run LocalSGD: τ local steps per round, then averaging.

    Raises:
        ConfigurationError: If the configuration is invalid or not for LocalSGD
    """
    return _run_rounds(p, cfg, Algorithm.LOCALSGD, local_steps=True)


def run_scaffold(p: ProblemInstance, cfg: RunConfig) -> Trace:
    """Run SCAFFOLD in double-rounds.

    Phase 1 holds every worker at the common point for τ queries and forms
    the control variates; phase 2 takes τ-1 corrected local steps, the
    last query serving the aggregation only. Protocol round indices in the
    trace are ``2r`` for phase 1 and ``2r + 1`` for phase 2.

    Raises:
        ConfigurationError: If the configuration is invalid, not for SCAFFOLD,
            or has tau < 2
    """
    average, states = _start(p, cfg, Algorithm.SCAFFOLD)
    recorder = _Recorder(p, cfg)
    tau, eta = cfg.tau, cfg.eta
    for r in range(cfg.rounds):
        base = 2 * r * tau
        for k in range(tau):
            t = base + k
            if not recorder.observe(t, 2 * r, states):
                return recorder.finish(average)
            grads = _query(p, cfg, t, states)
            for state, grad in zip(states, grads):
                state.batch_accumulator += grad
        for state in states:
            state.control_local = state.batch_accumulator / tau
            state.batch_accumulator = np.zeros_like(average)
        control = ordered_mean(np.stack([state.control_local for state in states]))

        round_start = average
        for k in range(tau, 2 * tau):
            t = base + k
            if not recorder.observe(t, 2 * r + 1, states):
                return recorder.finish(average)
            grads = _query(p, cfg, t, states)
            for state, grad in zip(states, grads):
                state.batch_accumulator += grad
                if k <= 2 * tau - 2:
                    state.iterate = state.iterate - eta * (grad - state.control_local + control)
        average = _communicate(round_start, eta, states)
        if not recorder.bounded(average):
            return recorder.finish(average)
    return recorder.finish(average)


def run_algorithm(p: ProblemInstance, cfg: RunConfig) -> Trace:
    """Dispatch to the engine named by ``cfg.algorithm``."""
    cfg.validate(p.dimension)
    engines = {
        Algorithm.MBSGD: run_mbsgd,
        Algorithm.LOCALSGD: run_localsgd,
        Algorithm.SCAFFOLD: run_scaffold,
    }
    return engines[cfg.algorithm](p, cfg)


def _require_records(trace: Trace) -> None:
    if not trace.records:
        raise EmptyTraceError("Trace has no records")


def metric_avg_grad_norm_sq(trace: Trace) -> float:
    """Mean of the recorded ``||grad f(x_bar_t)||^2``.

    Exact when every iteration was recorded; otherwise an approximation over
    the recorded iterations. Diverged traces score +inf.

    Raises:
        EmptyTraceError: If the trace has no records
    """
    if trace.diverged:
        return math.inf
    _require_records(trace)
    if trace.record_every > 1:
        logger.warning(
            "avg_grad_norm_sq from a strided trace (record_every=%d) is approximate",
            trace.record_every,
        )
    total = 0.0
    for record in trace.records:
        total += record.grad_norm_sq
    return total / len(trace.records)


def metric_scaffold_phase2(trace: Trace) -> float:
    """``(2/T) * sum`` of ``||grad f(x_bar)||^2`` over every phase-2 iteration.

    Raises:
        TraceMismatchError: If the trace is not from SCAFFOLD
        ConfigurationError: If the trace is strided
        EmptyTraceError: If the trace has no records
    """
    if trace.algorithm != Algorithm.SCAFFOLD:
        raise TraceMismatchError(
            f"Phase-2 metric requires a SCAFFOLD trace, got {trace.algorithm.value}",
            algorithm=trace.algorithm.value,
        )
    if trace.record_every != 1:
        raise ConfigurationError(
            "Phase-2 metric requires record_every=1",
            field="record_every",
            value=trace.record_every,
        )
    if trace.diverged:
        return math.inf
    _require_records(trace)
    total = 0.0
    for record in trace.records:
        if record.t % (2 * trace.tau) >= trace.tau:
            total += record.grad_norm_sq
    return 2.0 * total / trace.total_iterations


def metric_avg_suboptimality(trace: Trace, f_star: float) -> float:
    """Mean of the recorded ``f(x_bar_t)`` minus ``f_star`` (may be negative).

    Raises:
        EmptyTraceError: If the trace has no records
    """
    if trace.diverged:
        return math.inf
    _require_records(trace)
    total = 0.0
    for record in trace.records:
        total += record.f_value
    return total / len(trace.records) - f_star


def compute_metric(trace: Trace, metric: Metric, f_star: Optional[float] = None) -> float:
    """Evaluate ``metric`` on ``trace``.

    The phase-2 metric applies to SCAFFOLD traces only; other algorithms fall
    back to the average squared gradient norm.

    Raises:
        ConfigurationError: If avg_suboptimality is requested without f_star
    """
    if metric == Metric.AVG_SUBOPTIMALITY:
        if f_star is None:
            raise ConfigurationError("avg_suboptimality requires f_star", field="f_star")
        return metric_avg_suboptimality(trace, f_star)
    if metric == Metric.SCAFFOLD_PHASE2 and trace.algorithm == Algorithm.SCAFFOLD:
        return metric_scaffold_phase2(trace)
    return metric_avg_grad_norm_sq(trace)


def running_metric_curve(
    trace: Trace, metric: Metric, f_star: Optional[float] = None
) -> List[Tuple[int, float]]:
    """Metric over the prefix ending at each protocol communication round.

    Returns ``(protocol_round, value)`` pairs. SCAFFOLD points sit at even
    protocol rounds (one per double-round). A diverged trace yields +inf from
    the first round it fails to cover.

    Raises:
        ConfigurationError: If avg_suboptimality is requested without f_star
        EmptyTraceError: If the trace has no records
    """
    _require_records(trace)
    if metric == Metric.AVG_SUBOPTIMALITY and f_star is None:
        raise ConfigurationError("avg_suboptimality requires f_star", field="f_star")
    scaffold = trace.algorithm == Algorithm.SCAFFOLD
    span = 2 * trace.tau if scaffold else trace.tau
    phase2 = scaffold and metric == Metric.SCAFFOLD_PHASE2

    curve: List[Tuple[int, float]] = []
    total, count, index = 0.0, 0, 0
    records = trace.records
    for outer in range(1, trace.rounds + 1):
        end = outer * span
        while index < len(records) and records[index].t < end:
            record = records[index]
            if metric == Metric.AVG_SUBOPTIMALITY:
                total += record.f_value - f_star  # type: ignore[operator]
                count += 1
            elif not phase2 or record.t % span >= trace.tau:
                total += record.grad_norm_sq
                count += 1
            index += 1
        covered = index > 0 and (records[index - 1].t + trace.record_every >= end)
        protocol_round = 2 * outer if scaffold else outer
        if trace.diverged and not covered:
            curve.append((protocol_round, math.inf))
        elif phase2:
            curve.append((protocol_round, 2.0 * total / (end * 1.0)))
        else:
            curve.append((protocol_round, total / max(count, 1)))
    return curve


__all__ = [
    "DIVERGENCE_THRESHOLD",
    "run_mbsgd",
    "run_localsgd",
    "run_scaffold",
    "run_algorithm",
    "metric_avg_grad_norm_sq",
    "metric_scaffold_phase2",
    "metric_avg_suboptimality",
    "compute_metric",
    "running_metric_curve",
]
