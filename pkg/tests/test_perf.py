import dataclasses

import pytest

from aphmm.errors import UnknownParameter
from aphmm.perf import (
    ACCELERATED_FRACTIONS,
    MOVEMENT_OVERHEAD_PER_CORE,
    OPTIMIZATION_SPEEDUPS,
    OVERALL_OPTIMIZATION_SPEEDUP,
    AcceleratorConfig,
    WorkloadProfile,
    amdahl,
    compose_speedups,
    estimate,
    sweep,
    workload_for_chunk,
)

CFG = AcceleratorConfig()
WL = workload_for_chunk(650)


class TestEstimate:
    def test_empty_workload_costs_nothing(self):
        r = estimate(CFG, WorkloadProfile(sequence_length=0, active_states=0))
        assert r.total_cycles == 0.0
        assert all(v == 0.0 for v in r.step_cycles.values())

    def test_deterministic(self):
        a = estimate(CFG, WL)
        b = estimate(CFG, WL)
        assert a.total_cycles == b.total_cycles
        assert a.step_cycles == b.step_cycles

    def test_pe_doubling_gains_shrink_past_64(self):
        r32 = estimate(dataclasses.replace(CFG, pes=32), WL)
        r64 = estimate(dataclasses.replace(CFG, pes=64), WL)
        r128 = estimate(dataclasses.replace(CFG, pes=128), WL)
        gain_mid = r64.speedup_vs_1pe / r32.speedup_vs_1pe
        gain_high = r128.speedup_vs_1pe / r64.speedup_vs_1pe
        assert gain_mid > gain_high

    def test_speedup_monotone_in_resources(self):
        for field in ("pes", "ports", "bytes_per_cycle_per_port"):
            values = [4, 8, 16, 32, 64]
            reps = [estimate(dataclasses.replace(CFG, **{field: v}), WL) for v in values]
            speeds = [r.speedup_vs_1pe for r in reps]
            assert all(b >= a - 1e-12 for a, b in zip(speeds, speeds[1:])), field

    def test_each_flag_never_increases_cycles(self):
        base = estimate(CFG, WL).total_cycles
        for flag in ("lut_enabled", "filter_enabled", "partial_compute_enabled", "memoization_enabled"):
            off = estimate(dataclasses.replace(CFG, **{flag: False}), WL).total_cycles
            assert base <= off, flag

    def test_bandwidth_demand_reported(self):
        r = estimate(CFG, WL)
        assert set(r.bandwidth_demand) == {"forward", "backward", "update"}
        assert all(v > 0 for v in r.bandwidth_demand.values())


class TestSweep:
    def test_unknown_parameter(self):
        with pytest.raises(UnknownParameter):
            sweep(CFG, "frequency", [1, 2])

    def test_pe_sweep_monotone_with_shrinking_marginals(self):
        reps = sweep(CFG, "pes", [16, 32, 64, 128])
        speeds = [r.speedup_vs_1pe for r in reps]
        assert speeds == sorted(speeds)
        marginals = [b / a for a, b in zip(speeds, speeds[1:])]
        assert marginals[-1] < marginals[-2]  # past 64 the gain collapses

    def test_ports_sweep_crosses_from_port_bound_to_compute_bound(self):
        reps = sweep(CFG, "ports", [2, 4, 8, 16, 32])
        flags = [r.step_port_bound["forward"] for r in reps]
        assert flags[0] is True
        assert flags[-1] is False

    def test_chunk_sweep_linear_then_superlinear(self):
        reps = sweep(CFG, "chunk", [150, 650, 1000])
        c = [r.total_cycles for r in reps]
        assert abs((c[1] / c[0]) / (650 / 150) - 1.0) <= 0.15
        assert c[2] / c[1] > 1000 / 650

    def test_cores_sweep_prefers_four(self):
        for fraction in ACCELERATED_FRACTIONS.values():
            wl = workload_for_chunk(650, accelerated_fraction=fraction)
            reps = sweep(CFG, "cores", [1, 2, 4, 8], wl)
            best = max(reps, key=lambda r: r.speedup_end_to_end)
            assert best.config.cores == 4

    def test_rows_are_flat_and_complete(self):
        reps = sweep(CFG, "pes", [16, 32])
        row = reps[0].row()
        for key in ("pes", "ports", "total_cycles", "speedup_vs_1pe", "cycles_forward"):
            assert key in row


class TestAmdahl:
    def test_zero_fraction_gives_one(self):
        assert amdahl(0.0, 123.0) == pytest.approx(1.0)

    def test_error_correction_fraction_closed_form(self):
        # 1 / ((1 - 0.9857) + 0.9857 / 15.2) computed independently
        assert amdahl(0.9857, 15.2, 0.0) == pytest.approx(12.634, abs=0.01)

    def test_movement_overhead_lowers_speedup(self):
        assert amdahl(0.9, 20.0, 0.05) < amdahl(0.9, 20.0, 0.0)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            amdahl(1.5, 10.0)
        with pytest.raises(ValueError):
            amdahl(0.5, 0.0)


class TestCalibration:
    def test_optimization_multipliers(self):
        assert OPTIMIZATION_SPEEDUPS["histogram_filter"] == 1.07
        assert OPTIMIZATION_SPEEDUPS["product_table"] == 2.48
        assert OPTIMIZATION_SPEEDUPS["broadcast_partial_compute"] == 3.39
        assert OPTIMIZATION_SPEEDUPS["memoization"] == 1.69

    def test_composition_law_reproduces_overall(self):
        composed = compose_speedups()
        assert abs(composed / OVERALL_OPTIMIZATION_SPEEDUP - 1.0) <= 0.05

    def test_accelerated_fractions(self):
        assert ACCELERATED_FRACTIONS["error_correction"] == pytest.approx(0.9857)
        assert ACCELERATED_FRACTIONS["msa"] == pytest.approx(0.5144)
        assert ACCELERATED_FRACTIONS["protein_search"] == pytest.approx(0.4576)

    def test_defaults_match_hardware_table(self):
        assert CFG.pes == 64
        assert CFG.multipliers_per_pe == 4
        assert CFG.ports == 8
        assert CFG.bytes_per_cycle_per_port == 16
        assert CFG.l1_kb == 128
        assert CFG.cores == 4
        assert CFG.update_units == 64
        assert CFG.arbitration_overhead == 0.05
        assert MOVEMENT_OVERHEAD_PER_CORE > 0


class TestValidation:
    def test_pes_group_divisibility(self):
        with pytest.raises(ValueError):
            AcceleratorConfig(pes=66)

    def test_workload_validation(self):
        with pytest.raises(ValueError):
            WorkloadProfile(sequence_length=-1, active_states=10)
        with pytest.raises(ValueError):
            WorkloadProfile(sequence_length=10, active_states=10, accelerated_fraction=2.0)
