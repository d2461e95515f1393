"""Baum-Welch training and scoring over pHMM graphs.

Two interchangeable paths are provided:

* the optimized path (:func:`forward`, :func:`backward_step`,
  :func:`accumulate_updates`, :func:`train_single`): sparse edge arrays, a
  product table memoizing transition*emission products, per-timestamp
  max-rescaling, optional histogram filtering, and a two-row backward buffer
  whose values are consumed by the update accumulators as soon as they are
  produced;
* :func:`naive_reference`: a dense, unscaled oracle that stores the full
  backward matrix and evaluates the update ratios directly.

Numerics: probabilities are kept in 64-bit floats.  Each forward/backward row
is divided by its maximum, so the stored row maximum is exactly 1 and long
chunks cannot underflow; log scale factors recover the true magnitudes.  The
update ratios are scale-free, so the accumulators fold the per-timestamp
scale offsets into a weight relative to the first accumulated term.

Silent deletion states consume no character: they receive probability mass
within the same timestamp, in increasing state-id order (the i <= j transition
rule makes this acyclic).  Start mass placed on a silent state is pushed
through the silent chain before the first emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import (
    AccumulatorStateMissing,
    EmptySequence,
    InstanceTooLarge,
    SequencePositionOutOfRange,
)
from .filtering import FilterConfig
from .model import KIND_MATCH, PhmmGraph, end_weight_rule

PSEUDOCOUNT = 1e-9
PRODUCT_TABLE_SLOTS = 9
CHUNK_RANGE = (150, 1000)
FLOAT_BYTES = 8


class Step(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    UPDATE = "update"


ALL_STEPS = frozenset(Step)


@dataclass(frozen=True)
class TrainOptions:
    """Knobs for one training/scoring pass.

    ``steps`` controls which stages run: Update requires Backward, Backward
    requires Forward.  ``window`` restricts where paths may start and end
    (1-based inclusive columns); states outside a window receive no posterior
    mass and keep their prior parameters.
    """

    filter: FilterConfig | None = None
    lut_enabled: bool = True
    chunk_length: int = 650
    steps: frozenset[Step] = ALL_STEPS
    window: tuple[int, int] | None = None

    def __post_init__(self):
        if not (CHUNK_RANGE[0] <= self.chunk_length <= CHUNK_RANGE[1]):
            raise ValueError(f"chunk_length must be within {CHUNK_RANGE}")
        steps = frozenset(self.steps)
        object.__setattr__(self, "steps", steps)
        if Step.UPDATE in steps and Step.BACKWARD not in steps:
            raise ValueError("the Update step requires Backward")
        if Step.BACKWARD in steps and Step.FORWARD not in steps:
            raise ValueError("the Backward step requires Forward")
        if Step.FORWARD not in steps:
            raise ValueError("at least the Forward step must be enabled")


@dataclass
class Counters:
    """Analytic operation counts for the vectorized path.

    ``multiplications`` counts executed float multiplies;
    ``product_requests`` counts transition*emission products consumed, split
    into table hits and directly computed misses.  ``bytes_moved`` tallies
    traffic between workspace regions (rows written/read, accumulator
    updates) at 8 bytes per value.
    """

    multiplications: int = 0
    product_requests: int = 0
    lut_hits: int = 0
    lut_misses: int = 0
    lut_build_products: int = 0
    filter_selections: int = 0
    filter_selected_total: int = 0
    bytes_moved: int = 0
    peak_backward_rows: int = 0
    forward_timestamps: int = 0
    backward_timestamps: int = 0

    def lut_hit_ratio(self) -> float:
        total = self.product_requests + self.lut_build_products
        return self.lut_hits / total if total else 0.0


@dataclass
class Workspace:
    """Per-sequence scratch state: counters plus the reusable filter instance."""

    counters: Counters = field(default_factory=Counters)
    state_filter: object | None = None

    def filter_for(self, config: FilterConfig | None):
        if config is None:
            return None
        if self.state_filter is None:
            self.state_filter = config.make()
        return self.state_filter


# -- compiled graph view -------------------------------------------------------


class _Compiled:
    """Edge-index arrays derived from a graph, cached on the graph instance."""

    def __init__(self, g: PhmmGraph):
        self.graph = g
        self.src = g.trans_src
        self.dst = g.trans_dst
        self.prob = g.trans_prob
        self.row_ptr = g.row_ptr
        self.emit = g.emitting_mask
        self.silent_order = g.silent_state_ids

        edge_emit_dst = self.emit[self.dst]
        self.idx_ed = np.flatnonzero(edge_emit_dst)
        self.idx_sd = np.flatnonzero(~edge_emit_dst)
        self.src_ed = self.src[self.idx_ed]
        self.dst_ed = self.dst[self.idx_ed]
        self.prob_ed = self.prob[self.idx_ed]
        self.idx_es = np.flatnonzero(self.emit[self.src])

        # per silent state: incoming edges (forward closure, ascending ids)
        self.silent_in = []
        for d in self.silent_order:
            e = np.flatnonzero(self.dst == d)
            self.silent_in.append((int(d), self.src[e], self.prob[e]))
        # per silent state: outgoing edges (backward closure, descending ids)
        self.silent_out = []
        for d in self.silent_order[::-1]:
            lo, hi = self.row_ptr[d], self.row_ptr[d + 1]
            self.silent_out.append((int(d), self.dst[lo:hi], self.prob[lo:hi], lo, hi))

        self.start_effective = _push_start_through_silent(g, g.start)

    @property
    def n_states(self) -> int:
        return self.graph.n_states


def _compiled(graph: PhmmGraph) -> _Compiled:
    comp = graph._cache.get("compiled")
    if comp is None:
        comp = _Compiled(graph)
        graph._cache["compiled"] = comp
    return comp


@lru_cache(maxsize=128)
def _encode_cached(symbols: str, sequence: str) -> np.ndarray:
    from .alphabet import Alphabet

    out = Alphabet(symbols).encode(sequence)
    out.setflags(write=False)
    return out


def _encode(graph: PhmmGraph, sequence: str) -> np.ndarray:
    return _encode_cached(graph.alphabet.symbols, sequence)


def _push_start_through_silent(graph: PhmmGraph, start: np.ndarray) -> np.ndarray:
    """Move start mass sitting on silent states onto their reachable emitting
    successors, so a path starting with a deletion still emits the first
    character at the right state.  Mass on a silent dead end is dropped."""
    silent = graph.silent_state_ids
    if len(silent) == 0 or not np.any(start[silent] > 0):
        return start.astype(np.float64, copy=True)
    work = start.astype(np.float64, copy=True)
    for d in silent:
        if work[d] == 0.0:
            continue
        tgts, probs = graph.outgoing(int(d))
        np.add.at(work, tgts, work[d] * probs)
    work[silent] = 0.0
    return work


def _geometric(count: int, decay: float = 0.5) -> np.ndarray:
    w = decay ** np.arange(1, count + 1)
    return w / w.sum()


def window_boundaries(graph: PhmmGraph, window: tuple[int, int]):
    """Start vector and end weights for training restricted to a column window."""
    lo, hi = window
    if not (1 <= lo <= hi <= graph.n_columns):
        raise ValueError(f"window {window} outside columns 1..{graph.n_columns}")
    match_at = {}
    for s in np.flatnonzero(graph.kinds == KIND_MATCH):
        match_at[int(graph.columns[s])] = int(s)
    reach = graph.max_deletion_span()
    start = np.zeros(graph.n_states)
    n_skip = min(reach, hi - lo)
    if n_skip == 0:
        start[match_at[lo]] = 1.0
    else:
        start[match_at[lo]] = 0.95
        w = _geometric(n_skip) * 0.05
        for k in range(1, n_skip + 1):
            start[match_at[lo + k]] = w[k - 1]
    end = end_weight_rule(graph.kinds, graph.columns, hi, reach)
    end[graph.columns < lo] = 0.0
    return _push_start_through_silent(graph, start), end


def _boundaries(graph: PhmmGraph, comp: _Compiled, options: TrainOptions):
    if options.window is None:
        return comp.start_effective, graph.end_weights
    return window_boundaries(graph, options.window)


# -- product table --------------------------------------------------------------


class ProductTable:
    """Memoized transition*emission products.

    For every state whose distinct transition count fits the slot budget, the
    table stores alpha_ij * e_c(v_j) for each (transition slot, symbol) pair;
    states with more transitions fall back to direct multiplication.  Entries
    are computed with the exact expression the direct path uses, so enabling
    the table never changes results.
    """

    def __init__(self, graph: PhmmGraph, max_slots: int = PRODUCT_TABLE_SLOTS):
        comp = _compiled(graph)
        self.graph = graph
        self.max_slots = max_slots
        self.enabled = True
        out_deg = np.diff(graph.row_ptr)
        state_resident = out_deg <= max_slots
        self.state_resident = state_resident
        self.resident_edge = state_resident[comp.src]
        self.resident_ed = self.resident_edge[comp.idx_ed]
        # rows for non-resident edges are left as zeros and never read
        self.products = np.zeros((graph.n_transitions, graph.alphabet.size))
        res = np.flatnonzero(self.resident_edge)
        self.products[res] = comp.prob[res, None] * graph.emissions[comp.dst[res]]
        self.products.setflags(write=False)
        self.products_ed = np.ascontiguousarray(self.products[comp.idx_ed].T)  # (n_sigma, E_ed)
        self.products_ed.setflags(write=False)
        self.build_products = int(len(res) * graph.alphabet.size)
        self.hits = 0
        self.misses = 0

    @property
    def entries_per_state(self) -> int:
        return self.max_slots * self.graph.alphabet.size


def lut_build(graph: PhmmGraph, max_slots: int = PRODUCT_TABLE_SLOTS) -> ProductTable:
    """Build (and cache on the graph) the product table."""
    key = ("product_table", max_slots)
    table = graph._cache.get(key)
    if table is None:
        table = ProductTable(graph, max_slots)
        graph._cache[key] = table
    return table


def lut_get(table: ProductTable, state: int, slot: int, symbol: int) -> float:
    """Product alpha_ij * e_symbol(v_j) for the state's slot-th transition.

    Falls back to a direct multiply (counted as a miss) for states whose
    transition count exceeds the slot budget or when the table is disabled.
    """
    g = table.graph
    lo, hi = g.row_ptr[state], g.row_ptr[state + 1]
    if slot < 0 or lo + slot >= hi:
        raise IndexError(f"state {state} has no transition slot {slot}")
    edge = lo + slot
    if table.enabled and table.resident_edge[edge]:
        table.hits += 1
        return float(table.products[edge, symbol])
    table.misses += 1
    return float(g.trans_prob[edge] * g.emissions[g.trans_dst[edge], symbol])


def _products_for_symbol(comp: _Compiled, table: ProductTable | None, sym: int, counters: Counters) -> np.ndarray:
    """alpha*e products for every emitting-target edge at one timestamp."""
    n = len(comp.idx_ed)
    counters.product_requests += n
    if table is not None and table.enabled:
        res = table.resident_ed
        if res.all():
            counters.lut_hits += n
            return table.products_ed[sym]
        prods = np.where(res, table.products_ed[sym], comp.prob_ed * comp.graph.emissions[comp.dst_ed, sym])
        n_res = int(res.sum())
        counters.lut_hits += n_res
        counters.lut_misses += n - n_res
        counters.multiplications += n - n_res
        return prods
    counters.lut_misses += n
    counters.multiplications += n
    return comp.prob_ed * comp.graph.emissions[comp.dst_ed, sym]


def _table_for(graph: PhmmGraph, options: TrainOptions, counters: Counters) -> ProductTable | None:
    if not options.lut_enabled:
        return None
    key = ("product_table", PRODUCT_TABLE_SLOTS)
    fresh = key not in graph._cache
    table = lut_build(graph)
    if fresh:
        counters.lut_build_products += table.build_products
        counters.multiplications += table.build_products
    return table


# -- forward ---------------------------------------------------------------------


@dataclass
class ForwardMatrix:
    """Scaled forward values: stored row t has maximum exactly 1 (or is all
    zero once the sequence becomes impossible); the true values are
    ``values[t] * exp(-cum_log_scales[t])``."""

    values: np.ndarray
    log_scales: np.ndarray
    log_likelihood: float
    _cum: np.ndarray | None = None

    @property
    def cum_log_scales(self) -> np.ndarray:
        if self._cum is None:
            self._cum = np.cumsum(self.log_scales)
        return self._cum


def _apply_filter(filt, row: np.ndarray, counters: Counters) -> np.ndarray:
    ids = np.flatnonzero(row)
    if len(ids) == 0:
        return row
    filt.reset()
    filt.insert_many(ids, row[ids])
    selected = filt.select()
    counters.filter_selections += 1
    counters.filter_selected_total += len(selected)
    if len(selected) == len(ids):
        return row
    masked = np.zeros_like(row)
    masked[selected] = row[selected]
    return masked


def forward(graph: PhmmGraph, sequence: str, options: TrainOptions | None = None, workspace: Workspace | None = None) -> ForwardMatrix:
    """Forward values for every timestamp, with per-timestamp rescaling.

    When filtering is enabled, states left out of a timestamp's selection
    contribute nothing to the next timestamp (their row entries are zeroed).
    The final row is never filtered; there is no next timestamp to gate.
    """
    options = options or TrainOptions()
    workspace = workspace or Workspace()
    counters = workspace.counters
    seq = _encode(graph, sequence)
    n_s = len(seq)
    if n_s == 0:
        raise EmptySequence("cannot run the forward calculation on an empty sequence")
    if n_s > options.chunk_length:
        raise ValueError(f"sequence length {n_s} exceeds chunk length {options.chunk_length}")

    comp = _compiled(graph)
    start_vec, end_vec = _boundaries(graph, comp, options)
    table = _table_for(graph, options, counters)
    filt = workspace.filter_for(options.filter)
    n = graph.n_states

    values = np.zeros((n_s, n))
    log_scales = np.zeros(n_s)
    dead = False
    for t in range(n_s):
        if dead:
            break
        if t == 0:
            raw = start_vec * graph.emissions[:, seq[0]]
            counters.multiplications += n
        else:
            prev = values[t - 1]
            prods = _products_for_symbol(comp, table, int(seq[t]), counters)
            contrib = prev[comp.src_ed] * prods
            counters.multiplications += len(contrib)
            raw = np.bincount(comp.dst_ed, weights=contrib, minlength=n)
        for d, in_src, in_prob in comp.silent_in:
            raw[d] = float(raw[in_src] @ in_prob)
            counters.multiplications += len(in_src)
        m = raw.max()
        if m <= 0.0:
            dead = True
            log_scales[t:] = 0.0
            break
        row = raw / m
        log_scales[t] = -math.log(m)
        if filt is not None and t + 1 < n_s:
            row = _apply_filter(filt, row, counters)
        values[t] = row
        counters.forward_timestamps += 1
        counters.bytes_moved += n * FLOAT_BYTES

    if dead:
        loglik = float("-inf")
    else:
        total = float(values[-1] @ end_vec)
        loglik = (math.log(total) - float(log_scales.sum())) if total > 0.0 else float("-inf")
    return ForwardMatrix(values=values, log_scales=log_scales, log_likelihood=loglik)


def score(graph: PhmmGraph, sequence: str, options: TrainOptions | None = None) -> float:
    """log P(sequence | graph) from the forward scales; -inf when impossible."""
    options = options or TrainOptions()
    if options.steps != frozenset({Step.FORWARD}):
        options = replace(options, steps=frozenset({Step.FORWARD}))
    return forward(graph, sequence, options).log_likelihood


# -- backward ---------------------------------------------------------------------


class BackwardBuffer:
    """Exactly two resident timestamp rows: B_{t+1} and B_t.

    ``rotate`` swaps the slots; the engine consumes the rows into the update
    accumulators immediately, so no full backward matrix ever exists.
    """

    def __init__(self, n_states: int):
        self.values_current = np.zeros(n_states)
        self.values_next = np.zeros(n_states)
        self.log_current = 0.0
        self.log_next = 0.0
        self.t_current: int | None = None
        self.resident_rows = 2

    def rotate(self):
        self.values_current, self.values_next = self.values_next, self.values_current
        self.log_next = self.log_current


def backward_init(graph: PhmmGraph, sequence: str, options: TrainOptions | None = None, workspace: Workspace | None = None) -> BackwardBuffer:
    """Base case: B at the final timestamp carries the virtual-end weights."""
    options = options or TrainOptions()
    workspace = workspace or Workspace()
    seq = _encode(graph, sequence)
    if len(seq) == 0:
        raise EmptySequence("cannot run the backward calculation on an empty sequence")
    comp = _compiled(graph)
    _, end_vec = _boundaries(graph, comp, options)
    buf = BackwardBuffer(graph.n_states)
    base = end_vec.astype(np.float64, copy=True)
    m = base.max()
    if m > 0.0:
        buf.values_current = base / m
        buf.log_current = -math.log(m)
    else:
        buf.values_current = base
        buf.log_current = 0.0
    buf.t_current = len(seq)
    workspace.counters.peak_backward_rows = max(workspace.counters.peak_backward_rows, buf.resident_rows)
    workspace.counters.bytes_moved += graph.n_states * FLOAT_BYTES
    return buf


def backward_step(
    graph: PhmmGraph,
    sequence: str,
    t: int,
    buffer: BackwardBuffer,
    options: TrainOptions | None = None,
    workspace: Workspace | None = None,
) -> BackwardBuffer:
    """Compute B_t from B_{t+1} (timestamps are 1-based); rotates the buffer.

    Silent states are resolved in reverse id order within the timestamp: a
    transition into a silent state consumes no character, so its term uses the
    same-timestamp backward value of the target.
    """
    options = options or TrainOptions()
    workspace = workspace or Workspace()
    counters = workspace.counters
    seq = _encode(graph, sequence)
    n_s = len(seq)
    if buffer.t_current is None or not (1 <= t < n_s) or t != buffer.t_current - 1:
        raise SequencePositionOutOfRange(f"cannot step to timestamp {t} from {buffer.t_current} (sequence length {n_s})")

    comp = _compiled(graph)
    table = _table_for(graph, options, counters)
    filt = workspace.filter_for(options.filter)
    n = graph.n_states
    sym_next = int(seq[t])  # character at timestamp t+1

    buffer.rotate()
    b_next = buffer.values_next
    raw = np.zeros(n)

    prods_ed = _products_for_symbol(comp, table, sym_next, counters)
    # silent targets first (descending ids): their value is needed by sources
    if comp.silent_out:
        prods_all = np.empty(graph.n_transitions)
        prods_all[comp.idx_ed] = prods_ed
        prods_all[comp.idx_sd] = comp.prob[comp.idx_sd]
        for d, dsts, _, lo, hi in comp.silent_out:
            tv = np.where(comp.emit[dsts], b_next[dsts], raw[dsts])
            raw[d] = float(prods_all[lo:hi] @ tv)
            counters.multiplications += hi - lo
        tv_sd = raw[comp.dst[comp.idx_sd]]
        contrib = np.empty(graph.n_transitions)
        contrib[comp.idx_ed] = prods_ed * b_next[comp.dst_ed]
        contrib[comp.idx_sd] = prods_all[comp.idx_sd] * tv_sd
        emit_src_raw = np.bincount(comp.src[comp.idx_es], weights=contrib[comp.idx_es], minlength=n)
        raw = np.where(comp.emit, emit_src_raw, raw)
        counters.multiplications += len(comp.idx_es)
    else:
        contrib = prods_ed * b_next[comp.dst_ed]
        counters.multiplications += len(contrib)
        raw = np.bincount(comp.src_ed, weights=contrib, minlength=n)

    m = raw.max()
    if m <= 0.0:
        buffer.values_current = raw
        buffer.log_current = buffer.log_next
    else:
        row = raw / m
        if filt is not None:
            row = _apply_filter(filt, row, counters)
        buffer.values_current = row
        buffer.log_current = buffer.log_next - math.log(m)
    buffer.t_current = t
    counters.backward_timestamps += 1
    counters.bytes_moved += n * FLOAT_BYTES
    counters.peak_backward_rows = max(counters.peak_backward_rows, buffer.resident_rows)
    return buffer


# -- update accumulators -----------------------------------------------------------


class TransitionAccumulator:
    """Numerator sums of the transition update, one slot per graph edge.

    The numerators of a source state occupy a contiguous slice (the CSR edge
    order), mirroring the scratchpad layout that keeps all numerators of one
    state in the same memory block.  ``capacity_hint`` bounds how many
    numerators one state may own.
    """

    def __init__(self, graph: PhmmGraph, capacity_hint: int = 256):
        out_deg = np.diff(graph.row_ptr)
        worst = int(out_deg.max()) if len(out_deg) else 0
        if worst > capacity_hint:
            state = int(np.argmax(out_deg))
            raise AccumulatorStateMissing(
                f"state {state} has {worst} transitions, accumulator capacity is {capacity_hint}"
            )
        self.graph = graph
        self.capacity_hint = capacity_hint
        self.edge_numerators = np.zeros(graph.n_transitions)
        self.ref_log: float | None = None

    def weight(self, scale_log: float) -> float:
        if self.ref_log is None:
            self.ref_log = scale_log
        delta = self.ref_log - scale_log
        if delta > 600.0:
            # incoming terms dwarf everything accumulated so far; rebase
            self.edge_numerators *= math.exp(-delta)
            self.ref_log = scale_log
            return 1.0
        return math.exp(delta)

    def denominators(self) -> np.ndarray:
        return np.bincount(self.graph.trans_src, weights=self.edge_numerators, minlength=self.graph.n_states)


class EmissionAccumulator:
    """Numerator/denominator sums of the emission update."""

    def __init__(self, graph: PhmmGraph):
        self.graph = graph
        self.numerators = np.zeros((graph.n_states, graph.alphabet.size))
        self.denominators = np.zeros(graph.n_states)
        self.ref_log: float | None = None

    def weight(self, scale_log: float) -> float:
        if self.ref_log is None:
            self.ref_log = scale_log
        delta = self.ref_log - scale_log
        if delta > 600.0:
            self.numerators *= math.exp(-delta)
            self.denominators *= math.exp(-delta)
            self.ref_log = scale_log
            return 1.0
        return math.exp(delta)


def _accumulate_emission_row(
    graph: PhmmGraph,
    comp: _Compiled,
    seq: np.ndarray,
    t: int,
    f_row: np.ndarray,
    b_row: np.ndarray,
    scale_log: float,
    eacc: EmissionAccumulator,
    counters: Counters,
) -> None:
    w = eacc.weight(scale_log)
    g = w * f_row * b_row
    if len(comp.silent_order):
        g[comp.silent_order] = 0.0
    eacc.numerators[:, int(seq[t - 1])] += g
    eacc.denominators += g
    counters.multiplications += 2 * graph.n_states
    counters.bytes_moved += 2 * graph.n_states * FLOAT_BYTES


def accumulate_updates(
    graph: PhmmGraph,
    sequence: str,
    t: int,
    fwd: ForwardMatrix,
    buffer: BackwardBuffer,
    tacc: TransitionAccumulator,
    eacc: EmissionAccumulator,
    options: TrainOptions | None = None,
    workspace: Workspace | None = None,
) -> None:
    """Add the timestamp-t terms of the transition and emission updates.

    Requires the buffer to hold both B_t and B_{t+1} (1 <= t < n_S).  The
    backward values are consumed directly from the buffer; scale offsets are
    folded into a weight so the accumulated ratios are scale-free.
    """
    options = options or TrainOptions()
    workspace = workspace or Workspace()
    counters = workspace.counters
    seq = _encode(graph, sequence)
    n_s = len(seq)
    if not (1 <= t < n_s) or buffer.t_current != t:
        raise SequencePositionOutOfRange(f"accumulate at timestamp {t} requires the buffer to hold B_{t}")

    comp = _compiled(graph)
    table = _table_for(graph, options, counters)
    cum = fwd.cum_log_scales
    log_c_t = float(cum[t - 1])
    f_row = fwd.values[t - 1]
    b_next = buffer.values_next
    b_cur = buffer.values_current

    w3 = tacc.weight(log_c_t + buffer.log_next)
    prods = _products_for_symbol(comp, table, int(seq[t]), counters)
    tacc.edge_numerators[comp.idx_ed] += w3 * f_row[comp.src_ed] * prods * b_next[comp.dst_ed]
    counters.multiplications += 3 * len(comp.idx_ed)
    counters.bytes_moved += len(comp.idx_ed) * FLOAT_BYTES
    if len(comp.idx_sd):
        # transitions into silent states pair F_t with the same-timestamp backward value
        w_sil = tacc.weight(log_c_t + buffer.log_current)
        src_sd = comp.src[comp.idx_sd]
        dst_sd = comp.dst[comp.idx_sd]
        tacc.edge_numerators[comp.idx_sd] += w_sil * f_row[src_sd] * comp.prob[comp.idx_sd] * b_cur[dst_sd]
        counters.multiplications += 3 * len(comp.idx_sd)
        counters.bytes_moved += len(comp.idx_sd) * FLOAT_BYTES

    _accumulate_emission_row(graph, comp, seq, t, f_row, b_cur, log_c_t + buffer.log_current, eacc, counters)


def _accumulate_start_transitions(
    graph: PhmmGraph,
    comp: _Compiled,
    seq: np.ndarray,
    buffer: BackwardBuffer,
    tacc: TransitionAccumulator,
    counters: Counters,
) -> None:
    """Count transition usage along silent chains traversed before the first
    emission.  Start mass on a deletion state flows through the chain and
    emits the first character downstream; those level-0 transition uses
    belong in the update sums like any other."""
    silent = comp.silent_order
    start = graph.start
    if len(silent) == 0 or not np.any(start[silent] > 0):
        return
    if buffer.t_current != 1 and buffer.t_current != len(seq):
        raise SequencePositionOutOfRange("start-transition accumulation needs the buffer at the first timestamp")
    b_first = buffer.values_current
    # pre-emission backward value: emitting states weight the first character
    b0 = graph.emissions[:, int(seq[0])] * b_first
    for d, dsts, probs, lo, hi in comp.silent_out:
        b0[d] = float(probs @ b0[dsts])
        counters.multiplications += hi - lo
    chain = np.zeros(graph.n_states)
    for d, in_src, in_prob in comp.silent_in:
        chain[d] = start[d] + float(chain[in_src] @ in_prob)
    w = tacc.weight(buffer.log_current)
    for d, dsts, probs, lo, hi in comp.silent_out:
        if chain[d] <= 0.0:
            continue
        tacc.edge_numerators[lo:hi] += w * chain[d] * probs * b0[dsts]
        counters.multiplications += 2 * (hi - lo)


def finalize_updates(
    tacc: TransitionAccumulator,
    eacc: EmissionAccumulator,
    graph: PhmmGraph,
    pseudocount: float = PSEUDOCOUNT,
) -> PhmmGraph:
    """Divide the accumulated sums into new probabilities and build the
    updated graph.  Rows whose denominator is zero keep their prior values;
    every updated row gets a pseudocount and is renormalized, so no parameter
    can become permanently zero.  Any cached product table is left behind on
    the old graph (the new graph builds its own)."""
    den = tacc.denominators()
    src = graph.trans_src
    upd_edges = den[src] > 0.0
    ratios = np.where(upd_edges, tacc.edge_numerators / np.where(den[src] > 0, den[src], 1.0), 0.0)
    smoothed = np.where(upd_edges, ratios + pseudocount, 0.0)
    row_sums = np.bincount(src, weights=smoothed, minlength=graph.n_states)
    new_prob = np.where(upd_edges, smoothed / np.where(row_sums[src] > 0, row_sums[src], 1.0), graph.trans_prob)

    emit = graph.emitting_mask
    e_upd = (eacc.denominators > 0.0) & emit
    ratios_e = eacc.numerators / np.where(eacc.denominators > 0, eacc.denominators, 1.0)[:, None]
    smoothed_e = ratios_e + pseudocount
    sums_e = smoothed_e.sum(axis=1)
    new_emis = np.where(e_upd[:, None], smoothed_e / sums_e[:, None], graph.emissions)

    return graph.with_parameters(trans_prob=new_prob, emissions=new_emis)


def train_single(
    graph: PhmmGraph,
    sequence: str,
    options: TrainOptions | None = None,
    workspace: Workspace | None = None,
) -> tuple[PhmmGraph, float]:
    """One full training pass over one sequence.

    Runs the forward calculation completely, then a single reverse sweep that
    interleaves each backward step with the update accumulation for that
    timestamp, and finally the division step.  Honors ``options.steps``:
    without the Update step the graph is returned unchanged (scoring mode).
    Returns the updated graph and the log-likelihood of the *input* graph.
    """
    options = options or TrainOptions()
    workspace = workspace or Workspace()
    fwd = forward(graph, sequence, options, workspace)
    if Step.BACKWARD not in options.steps:
        return graph, fwd.log_likelihood
    seq = _encode(graph, sequence)
    n_s = len(seq)
    comp = _compiled(graph)

    do_update = Step.UPDATE in options.steps
    buf = backward_init(graph, sequence, options, workspace)
    if do_update:
        tacc = TransitionAccumulator(graph)
        eacc = EmissionAccumulator(graph)
        cum = fwd.cum_log_scales
        _accumulate_emission_row(
            graph, comp, seq, n_s, fwd.values[n_s - 1], buf.values_current,
            float(cum[n_s - 1]) + buf.log_current, eacc, workspace.counters,
        )
    for t in range(n_s - 1, 0, -1):
        backward_step(graph, sequence, t, buf, options, workspace)
        if do_update:
            accumulate_updates(graph, sequence, t, fwd, buf, tacc, eacc, options, workspace)
    if not do_update:
        return graph, fwd.log_likelihood
    _accumulate_start_transitions(graph, comp, seq, buf, tacc, workspace.counters)
    return finalize_updates(tacc, eacc, graph), fwd.log_likelihood


# -- dense oracle -------------------------------------------------------------------


@dataclass
class NaiveResult:
    forward: np.ndarray       # (n_S, V), unscaled
    backward: np.ndarray      # (n_S, V), unscaled
    transitions: np.ndarray   # (V, V) updated probabilities, dense
    emissions: np.ndarray     # (V, n_sigma) updated probabilities
    log_likelihood: float


def naive_reference(graph: PhmmGraph, sequence: str) -> NaiveResult:
    """Dense, unscaled evaluation of the forward/backward/update equations.

    Stores the full backward matrix, uses dense matrix products, no filtering,
    no product table, no partial compute.  Intended as the correctness oracle
    for the optimized path on modest instance sizes.
    """
    n = graph.n_states
    seq = _encode(graph, sequence)
    n_s = len(seq)
    if n_s == 0:
        raise EmptySequence("cannot evaluate an empty sequence")
    if n > 10_000 or n_s > 1_000:
        raise InstanceTooLarge(f"dense oracle guard: {n} states, {n_s} timestamps")

    dense = np.zeros((n, n))
    dense[graph.trans_src, graph.trans_dst] = graph.trans_prob
    e = graph.emissions
    emit = graph.emitting_mask
    silent = graph.silent_state_ids
    end_vec = graph.end_weights

    start_eff = graph.start.astype(np.float64, copy=True)
    for d in silent:
        start_eff += start_eff[d] * dense[d]
        start_eff[d] = 0.0

    f = np.zeros((n_s, n))
    for t in range(n_s):
        row = (start_eff if t == 0 else f[t - 1] @ dense) * e[:, seq[t]]
        for d in silent:
            row[d] = row[:d] @ dense[:d, d]
        f[t] = row

    b = np.zeros((n_s, n))
    b[n_s - 1] = end_vec
    for t in range(n_s - 2, -1, -1):
        tmp = b[t + 1] * e[:, seq[t + 1]]
        for d in silent[::-1]:
            tmp[d] = dense[d] @ tmp
        row = dense @ tmp
        row[silent] = tmp[silent]
        b[t] = row

    total = float(f[n_s - 1] @ end_vec)
    loglik = math.log(total) if total > 0.0 else float("-inf")

    edge_mask = np.zeros((n, n), dtype=bool)
    edge_mask[graph.trans_src, graph.trans_dst] = True

    num = np.zeros((n, n))
    for t in range(n_s - 1):
        emit_part = b[t + 1] * e[:, seq[t + 1]]
        num += f[t][:, None] * dense * emit_part[None, :]
        if len(silent):
            silent_part = np.where(emit, 0.0, b[t])
            num += f[t][:, None] * dense * silent_part[None, :]
    if len(silent) and np.any(graph.start[silent] > 0):
        # transition usage on silent chains crossed before the first emission
        b0 = e[:, seq[0]] * b[0]
        for d in silent[::-1]:
            b0[d] = dense[d] @ b0
        chain = np.zeros(n)
        for d in silent:
            chain[d] = graph.start[d] + chain @ dense[:, d]
        num += chain[:, None] * dense * b0[None, :]
    den = num.sum(axis=1)
    upd = den > 0.0
    ratios = np.where(upd[:, None] & edge_mask, num / np.where(den > 0, den, 1.0)[:, None], 0.0)
    smoothed = np.where(edge_mask, ratios + PSEUDOCOUNT, 0.0)
    row_sums = smoothed.sum(axis=1)
    a_star = np.where(
        (upd & (row_sums > 0))[:, None],
        smoothed / np.where(row_sums > 0, row_sums, 1.0)[:, None],
        dense,
    )

    gamma = f * b
    gamma[:, silent] = 0.0
    e_num = np.zeros((n, graph.alphabet.size))
    for t in range(n_s):
        e_num[:, seq[t]] += gamma[t]
    e_den = gamma.sum(axis=0)
    e_upd = (e_den > 0.0) & emit
    ratios_e = e_num / np.where(e_den > 0, e_den, 1.0)[:, None]
    smoothed_e = ratios_e + PSEUDOCOUNT
    e_star = np.where(e_upd[:, None], smoothed_e / smoothed_e.sum(axis=1)[:, None], e)

    return NaiveResult(forward=f, backward=b, transitions=a_star, emissions=e_star, log_likelihood=loglik)
