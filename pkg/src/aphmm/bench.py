"""Benchmark harness: synthetic data, optimized-vs-naive cross-checks, and
counter measurements for the filter and product-table mechanisms."""

from __future__ import annotations

import time

import numpy as np

from . import engine
from .apps import ReadMapping
from .filtering import FilterConfig
from .model import PhmmGraph, build_error_correction, build_traditional


def random_sequence(rng: np.random.Generator, length: int, symbols: str = "ACGT") -> str:
    return "".join(rng.choice(list(symbols), size=length))


def randomize_parameters(graph: PhmmGraph, rng: np.random.Generator) -> PhmmGraph:
    """Random row-stochastic probabilities on an existing structure."""
    prob = np.empty(graph.n_transitions)
    ptr = graph.row_ptr
    for s in range(graph.n_states):
        lo, hi = ptr[s], ptr[s + 1]
        if hi > lo:
            prob[lo:hi] = rng.dirichlet(np.ones(hi - lo))
    emis = graph.emissions.copy()
    for s in np.flatnonzero(graph.emitting_mask):
        emis[s] = rng.dirichlet(np.ones(graph.alphabet.size))
    return graph.with_parameters(trans_prob=prob, emissions=emis)


def random_instance(rng: np.random.Generator, max_columns: int = 12, max_length: int = 20):
    """Random (graph, sequence) pair, alternating designs, random parameters."""
    n_cols = int(rng.integers(2, max_columns + 1))
    rep = random_sequence(rng, n_cols)
    if rng.integers(2):
        g = build_traditional(rep)
    else:
        g = build_error_correction(rep, max_deletion=int(rng.integers(2, 5)), max_insertion=int(rng.integers(1, 3)))
    g = randomize_parameters(g, rng)
    seq = random_sequence(rng, int(rng.integers(2, max_length + 1)))
    return g, seq


def noisy_read(rng: np.random.Generator, template: str, sub: float = 0.02, indel: float = 0.01) -> str:
    out = []
    for ch in template:
        r = rng.random()
        if r < indel / 2:
            continue  # deletion
        if r < indel:
            out.append("ACGT"[rng.integers(4)])  # insertion before the base
        if rng.random() < sub:
            out.append(rng.choice([c for c in "ACGT" if c != ch]))
        else:
            out.append(ch)
    return "".join(out)


def synthetic_correction_instance(rng: np.random.Generator, length: int = 300, coverage: int = 10,
                                  errors: int = 5, read_noise: float = 0.0):
    """(true sequence, corrupted assembly, mappings) with planted errors."""
    true = random_sequence(rng, length)
    asm = list(true)
    pos = sorted(rng.choice(np.arange(20, length - 20), size=errors, replace=False))
    for p in pos[:-2]:
        asm[p] = rng.choice([c for c in "ACGT" if c != asm[p]])
    del asm[pos[-2]]
    asm.insert(pos[-1], "ACGT"[rng.integers(4)])
    assembly = "".join(asm)
    mappings = []
    for i in range(coverage):
        seg = noisy_read(rng, true, sub=read_noise, indel=read_noise / 2) if read_noise else true
        seg = seg[: len(assembly)] if len(seg) > len(assembly) else seg
        mappings.append(ReadMapping(f"read{i}", 0, "+", seg))
    return true, assembly, mappings


def _relative_error(a, b) -> float:
    denom = max(np.max(np.abs(b)), 1e-30)
    return float(np.max(np.abs(a - b)) / denom)


def bench_engine(seed: int, instances: int = 25):
    """Optimized path vs dense oracle: per-instance agreement and timings."""
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    t_naive = t_opt = 0.0
    for k in range(instances):
        g, seq = random_instance(rng)
        t0 = time.perf_counter()
        ref = engine.naive_reference(g, seq)
        t_naive += time.perf_counter() - t0
        t0 = time.perf_counter()
        g2, ll = engine.train_single(g, seq)
        t_opt += time.perf_counter() - t0
        dense = np.zeros((g.n_states, g.n_states))
        dense[g2.trans_src, g2.trans_dst] = g2.trans_prob
        err = max(
            _relative_error(dense, ref.transitions),
            _relative_error(g2.emissions, ref.emissions),
            abs(ll - ref.log_likelihood) / max(abs(ref.log_likelihood), 1e-12) if np.isfinite(ll) else 0.0,
        )
        worst = max(worst, err)
    rows.append(("engine", "oracle", "instances", instances))
    rows.append(("engine", "oracle", "worst_relative_error", worst))
    rows.append(("engine", "oracle", "within_1e-6", int(worst <= 1e-6)))
    rows.append(("engine", "oracle", "naive_seconds", round(t_naive, 4)))
    rows.append(("engine", "oracle", "optimized_seconds", round(t_opt, 4)))
    return rows


def bench_lut(seed: int, reads: int = 10, chunk: int = 300):
    """Product-table transparency and hit-rate measurement on a training run."""
    rng = np.random.default_rng(seed)
    template = random_sequence(rng, chunk)
    gr_on = build_error_correction(template)
    gr_off = gr_on
    ws_on = engine.Workspace()
    ws_off = engine.Workspace()
    identical = True
    for i in range(reads):
        read = noisy_read(rng, template, sub=0.03, indel=0.01)
        gr_on, _ = engine.train_single(gr_on, read, engine.TrainOptions(lut_enabled=True), ws_on)
        gr_off, _ = engine.train_single(gr_off, read, engine.TrainOptions(lut_enabled=False), ws_off)
        identical = identical and np.array_equal(gr_on.trans_prob, gr_off.trans_prob) and np.array_equal(
            gr_on.emissions, gr_off.emissions
        )
    c = ws_on.counters
    return [
        ("lut", "transparency", "bit_identical", int(identical)),
        ("lut", "hits", "lut_hits", c.lut_hits),
        ("lut", "hits", "product_requests", c.product_requests),
        ("lut", "hits", "build_products", c.lut_build_products),
        ("lut", "hits", "hit_ratio", round(c.lut_hit_ratio(), 6)),
    ]


def bench_filter(seed: int, chunk: int = 200, coverage: int = 8, filter_size: int = 120):
    """Histogram vs sort filtering on a small correction-style training run."""
    rng = np.random.default_rng(seed)
    template = random_sequence(rng, chunk)
    reads = [noisy_read(rng, template, sub=0.02, indel=0.01) for _ in range(coverage)]

    def run(kind: str | None):
        cfg = None if kind is None else FilterConfig(kind=kind, filter_size=filter_size)
        g = build_error_correction(template)
        ws = engine.Workspace()
        ll = float("nan")
        for read in reads:
            g, ll = engine.train_single(g, read, engine.TrainOptions(filter=cfg), ws)
        return ll, ws.counters

    t0 = time.perf_counter()
    ll_h, c_h = run("histogram")
    t_h = time.perf_counter() - t0
    t0 = time.perf_counter()
    ll_s, c_s = run("sort")
    t_s = time.perf_counter() - t0
    ll_n, c_n = run(None)
    rel = abs(ll_h - ll_s) / max(abs(ll_s), 1e-12)
    avg_h = c_h.filter_selected_total / max(c_h.filter_selections, 1)
    avg_n = 3 * chunk  # unfiltered runs keep every state active
    return [
        ("filter", "accuracy", "loglik_histogram", ll_h),
        ("filter", "accuracy", "loglik_sort", ll_s),
        ("filter", "accuracy", "loglik_unfiltered", ll_n),
        ("filter", "accuracy", "relative_difference", rel),
        ("filter", "accuracy", "within_0.2pct", int(rel <= 0.002)),
        ("filter", "size", "avg_selected_histogram", round(avg_h, 2)),
        ("filter", "size", "states_unfiltered", avg_n),
        ("filter", "time", "histogram_seconds", round(t_h, 4)),
        ("filter", "time", "sort_seconds", round(t_s, 4)),
    ]


SUITES = {"engine": bench_engine, "lut": bench_lut, "filter": bench_filter}


def run_bench(suite: str, seed: int):
    if suite == "all":
        rows = []
        for name in ("engine", "lut", "filter"):
            rows.extend(SUITES[name](seed))
        return rows
    if suite not in SUITES:
        raise ValueError(f"unknown bench suite {suite!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[suite](seed)
