"""Analytical accelerator performance model.

Estimates cycles per training step for a parallel accelerator built from
processing engines (PEs) fed by a fixed set of shared memory ports.  Each
step costs the larger of its compute time (multiply-accumulates spread over
PE lanes) and its data time (operand bytes through the ports), plus an
arbitration surcharge.  The model reproduces scaling trends, not absolute
cycle counts: PE scaling saturates once a step becomes port-bound, chunk
growth turns super-linear once the working set spills past L1, and the
optimization flags reduce port traffic by their documented factors.

Byte weights, the spill penalty, and the per-core data-movement overhead are
calibration knobs, documented next to their definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import UnknownParameter

FLOAT32_BYTES = 4

# measured end-to-end speedup contribution of each optimization, and the
# model's composition law (multiplicative)
OPTIMIZATION_SPEEDUPS = {
    "histogram_filter": 1.07,
    "product_table": 2.48,
    "broadcast_partial_compute": 3.39,
    "memoization": 1.69,
}
OVERALL_OPTIMIZATION_SPEEDUP = 15.20

# fraction of host application time spent in the kernel, per use case
ACCELERATED_FRACTIONS = {
    "error_correction": 0.9857,
    "msa": 0.5144,
    "protein_search": 0.4576,
}

# calibration knobs
TABLE_TRAFFIC_FACTOR = 0.66       # port-traffic share removed by the product table
BROADCAST_CONSUMER_DIVISOR = 4.0  # backward-consumer traffic reduction
MEMOIZATION_DIVISOR = 2.0         # transition-numerator traffic reduction
ALPHA_E_REFETCH = 0.05            # per-use operand refetch share (rest stays PE-local)
TRANS_TRAFFIC_FACTOR = 0.25       # numerator traffic share leaving the scratchpad
SPILL_MULTIPLIER = 4.0            # latency factor on traffic past L1 capacity
MOVEMENT_OVERHEAD_PER_CORE = 0.002
SCRATCHPAD_NUMERATORS_PER_UNIT = 256
L1_FIXED_OVERHEAD_BYTES = 4096
STAGING_ROWS = 8                  # forward rows prefetched from the next level


def compose_speedups(multipliers=None) -> float:
    """The model composes optimization gains multiplicatively."""
    if multipliers is None:
        multipliers = OPTIMIZATION_SPEEDUPS
    if isinstance(multipliers, dict):
        multipliers = multipliers.values()
    out = 1.0
    for m in multipliers:
        out *= m
    return out


@dataclass(frozen=True)
class AcceleratorConfig:
    cores: int = 4
    pes: int = 64
    pes_per_group: int = 4
    multipliers_per_pe: int = 4
    update_units: int = 64
    ports: int = 8
    bytes_per_cycle_per_port: int = 16
    l1_kb: int = 128
    lut_enabled: bool = True
    filter_enabled: bool = True
    partial_compute_enabled: bool = True
    memoization_enabled: bool = True
    arbitration_overhead: float = 0.05

    def __post_init__(self):
        if self.pes % self.pes_per_group != 0:
            raise ValueError("pes must be divisible by pes_per_group")
        for name in ("cores", "pes", "pes_per_group", "multipliers_per_pe", "update_units", "ports", "bytes_per_cycle_per_port", "l1_kb"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.arbitration_overhead < 1.0):
            raise ValueError("arbitration_overhead must be a small fraction")


@dataclass(frozen=True)
class WorkloadProfile:
    sequence_length: int
    active_states: int          # per timestamp, after filtering
    alphabet_size: int = 4
    avg_transitions: float = 7.0
    accelerated_fraction: float = 0.9857
    span_states: int | None = None  # graph states under the chunk window

    def __post_init__(self):
        if self.sequence_length < 0 or self.active_states < 0:
            raise ValueError("workload sizes must be non-negative")
        if not (0.0 <= self.accelerated_fraction <= 1.0):
            raise ValueError("accelerated_fraction must be in [0,1]")
        if self.span_states is None:
            object.__setattr__(self, "span_states", 3 * self.sequence_length)


def workload_for_chunk(
    chunk_length: int,
    filter_size: int = 500,
    states_per_column: int = 3,
    alphabet_size: int = 4,
    avg_transitions: float = 7.0,
    accelerated_fraction: float = ACCELERATED_FRACTIONS["error_correction"],
) -> WorkloadProfile:
    span = states_per_column * chunk_length
    return WorkloadProfile(
        sequence_length=chunk_length,
        active_states=min(span, filter_size),
        alphabet_size=alphabet_size,
        avg_transitions=avg_transitions,
        accelerated_fraction=accelerated_fraction,
        span_states=span,
    )


@dataclass(frozen=True)
class PerfReport:
    config: AcceleratorConfig
    workload: WorkloadProfile
    step_cycles: dict
    step_port_bound: dict
    total_cycles: float
    bandwidth_demand: dict       # bytes per compute cycle, per step
    speedup_vs_1pe: float
    speedup_end_to_end: float

    def row(self) -> dict:
        """Flat mapping for delimited output: all config/workload columns plus results."""
        out = {
            "cores": self.config.cores,
            "pes": self.config.pes,
            "ports": self.config.ports,
            "bytes_per_cycle_per_port": self.config.bytes_per_cycle_per_port,
            "l1_kb": self.config.l1_kb,
            "lut_enabled": int(self.config.lut_enabled),
            "filter_enabled": int(self.config.filter_enabled),
            "partial_compute_enabled": int(self.config.partial_compute_enabled),
            "memoization_enabled": int(self.config.memoization_enabled),
            "sequence_length": self.workload.sequence_length,
            "active_states": self.workload.active_states,
            "alphabet_size": self.workload.alphabet_size,
            "avg_transitions": self.workload.avg_transitions,
            "accelerated_fraction": self.workload.accelerated_fraction,
        }
        for step in ("forward", "backward", "update"):
            out[f"cycles_{step}"] = self.step_cycles[step]
            out[f"port_bound_{step}"] = int(self.step_port_bound[step])
        out["total_cycles"] = self.total_cycles
        out["speedup_vs_1pe"] = self.speedup_vs_1pe
        out["speedup_end_to_end"] = self.speedup_end_to_end
        return out


def _step_costs(config: AcceleratorConfig, workload: WorkloadProfile) -> dict:
    """Per-timestamp (ops, port bytes) for each training step."""
    a = workload.active_states
    t = workload.avg_transitions
    b32 = FLOAT32_BYTES

    sort_ops = 0.0
    if not config.filter_enabled:
        # the baseline selects best-n by sorting every timestamp
        sort_ops = a * max(1.0, math.log2(max(a, 2)))

    alpha_e = a * t * 2 * b32 * ALPHA_E_REFETCH
    if config.lut_enabled:
        alpha_e *= 1.0 - TABLE_TRAFFIC_FACTOR

    fwd_ops = a * t + a + sort_ops
    fwd_bytes = a * b32 + alpha_e
    bwd_ops = a * t + sort_ops
    bwd_bytes = a * b32 + alpha_e

    consumer = a * 4 * b32
    if config.partial_compute_enabled:
        consumer /= BROADCAST_CONSUMER_DIVISOR
    trans = a * t * 2 * b32 * TRANS_TRAFFIC_FACTOR
    if config.memoization_enabled:
        trans /= MEMOIZATION_DIVISOR
    emis = a * 4 * b32
    upd_ops = a * t + 3 * a
    upd_bytes = a * b32 + consumer + trans + emis

    return {
        "forward": (fwd_ops, fwd_bytes),
        "backward": (bwd_ops, bwd_bytes),
        "update": (upd_ops, upd_bytes),
    }


def _spill_fraction(config: AcceleratorConfig, workload: WorkloadProfile) -> float:
    span = workload.span_states
    a = workload.active_states
    demand = (
        span * (2 * workload.alphabet_size + 1) * FLOAT32_BYTES
        + 2 * a * FLOAT32_BYTES
        + STAGING_ROWS * a * FLOAT32_BYTES
        + workload.sequence_length
        + L1_FIXED_OVERHEAD_BYTES
    )
    capacity = config.l1_kb * 1024
    return max(0.0, 1.0 - capacity / demand) if demand > capacity else 0.0


def _scratch_spill_fraction(config: AcceleratorConfig, workload: WorkloadProfile) -> float:
    edges = workload.span_states * workload.avg_transitions
    capacity = config.update_units * SCRATCHPAD_NUMERATORS_PER_UNIT
    return max(0.0, 1.0 - capacity / edges) if edges > capacity else 0.0


def estimate(config: AcceleratorConfig, workload: WorkloadProfile) -> PerfReport:
    """Cycle estimate: per step, max(compute cycles, port cycles), with the
    arbitration surcharge; spilled traffic pays the spill multiplier."""
    length = workload.sequence_length
    if length == 0 or workload.active_states == 0:
        zero = {s: 0.0 for s in ("forward", "backward", "update")}
        return PerfReport(config, workload, dict(zero), {s: False for s in zero}, 0.0, dict(zero), 1.0, 1.0)

    lane_rate = config.pes * config.multipliers_per_pe
    port_rate = config.ports * config.bytes_per_cycle_per_port
    spill = _spill_fraction(config, workload)
    scratch_spill = _scratch_spill_fraction(config, workload)

    def step_cycles(cfg: AcceleratorConfig) -> tuple[dict, dict, dict]:
        costs = _step_costs(cfg, workload)
        cycles, bound, demand = {}, {}, {}
        for step, (ops, bytes_pt) in costs.items():
            extra = spill + (scratch_spill if step == "update" else 0.0)
            compute = ops / (cfg.pes * cfg.multipliers_per_pe)
            data = bytes_pt / (cfg.ports * cfg.bytes_per_cycle_per_port)
            data *= 1.0 + (SPILL_MULTIPLIER - 1.0) * extra
            cycles[step] = length * max(compute, data) * (1.0 + cfg.arbitration_overhead)
            bound[step] = data > compute
            demand[step] = bytes_pt / max(compute, 1e-12)
        return cycles, bound, demand

    cycles, bound, demand = step_cycles(config)
    total = sum(cycles.values())

    base_cycles, _, _ = step_cycles(replace(config, pes=1, pes_per_group=1))
    base_total = sum(base_cycles.values())
    speedup_1pe = base_total / total if total > 0 else 1.0

    kernel = speedup_1pe * config.cores
    movement = MOVEMENT_OVERHEAD_PER_CORE * config.cores
    end_to_end = amdahl(workload.accelerated_fraction, kernel, movement)

    return PerfReport(
        config=config,
        workload=workload,
        step_cycles=cycles,
        step_port_bound=bound,
        total_cycles=total,
        bandwidth_demand=demand,
        speedup_vs_1pe=speedup_1pe,
        speedup_end_to_end=end_to_end,
    )


def amdahl(accelerated_fraction: float, kernel_speedup: float, movement_overhead_fraction: float = 0.0) -> float:
    """End-to-end speedup when only a fraction of the application accelerates."""
    if not (0.0 <= accelerated_fraction <= 1.0):
        raise ValueError("accelerated_fraction must be in [0,1]")
    if kernel_speedup <= 0:
        raise ValueError("kernel_speedup must be positive")
    host = 1.0 - accelerated_fraction
    return 1.0 / (host + movement_overhead_fraction + accelerated_fraction / kernel_speedup)


SWEEP_PARAMETERS = ("pes", "ports", "bytes_per_cycle_per_port", "cores", "chunk")


def sweep(config: AcceleratorConfig, vary: str, values, workload: WorkloadProfile | None = None) -> list[PerfReport]:
    """One report per value of the varied parameter.

    ``chunk`` rebuilds the workload per chunk length; the other parameters
    patch the configuration.  The caller renders reports to CSV via
    :meth:`PerfReport.row`.
    """
    if vary not in SWEEP_PARAMETERS:
        raise UnknownParameter(f"cannot sweep {vary!r}; choose one of {SWEEP_PARAMETERS}")
    reports = []
    for v in values:
        if vary == "chunk":
            reports.append(estimate(config, workload_for_chunk(int(v))))
        else:
            cfg = replace(config, **{vary: int(v)})
            reports.append(estimate(cfg, workload or workload_for_chunk(650)))
    return reports
