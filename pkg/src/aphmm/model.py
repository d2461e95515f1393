"""Profile-HMM graphs: construction, validation, and the line-oriented model format.

Two graph designs are supported:

* ``traditional`` -- three states (match, insertion, deletion) per represented
  character.  Insertion states carry a self-loop, deletion states are silent
  (they emit nothing and propagate within a timestamp).
* ``error-correction`` -- no deletion states and no self-loops.  Deletions are
  encoded as skip transitions between match states, insertions as a short
  loop-free chain of insertion states per column.  This is the design used by
  the assembly-polishing pipeline.

State ids are assigned column by column so that every transition (i, j)
satisfies i <= j, which keeps the graph acyclic apart from insertion
self-loops and makes silent-state propagation well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .alphabet import DNA, Alphabet
from .errors import EmptySequence, ParseError

ROW_SUM_TOL = 1e-9

TRADITIONAL = "traditional"
ERROR_CORRECTION = "error-correction"


class StateKind(Enum):
    MATCH = "M"
    INSERTION = "I"
    DELETION = "D"

    @classmethod
    def from_letter(cls, letter: str) -> "StateKind":
        for kind in cls:
            if kind.value == letter:
                return kind
        raise ValueError(f"unknown state kind {letter!r}")


KIND_MATCH = 0
KIND_INSERTION = 1
KIND_DELETION = 2

_KIND_CODE = {StateKind.MATCH: KIND_MATCH, StateKind.INSERTION: KIND_INSERTION, StateKind.DELETION: KIND_DELETION}
_KIND_LETTER = {KIND_MATCH: "M", KIND_INSERTION: "I", KIND_DELETION: "D"}


@dataclass(frozen=True)
class PriorConfig:
    """Default probabilities used by the builders.

    ``match_forward + insertion_open + deletion_mass`` must sum to 1; the
    deletion/skip mass is split geometrically across skip lengths with ratio
    ``skip_decay``.  All values are renormalized per row wherever graph
    boundaries remove targets.
    """

    p_match: float = 0.97
    match_forward: float = 0.85
    insertion_open: float = 0.10
    deletion_mass: float = 0.05
    skip_decay: float = 0.5
    start_match: float = 0.95

    def __post_init__(self):
        if not (0.0 < self.p_match <= 1.0):
            raise ValueError("p_match must be in (0, 1]")
        if abs(self.match_forward + self.insertion_open + self.deletion_mass - 1.0) > 1e-9:
            raise ValueError("transition priors must sum to 1")
        if not (0.0 < self.skip_decay < 1.0):
            raise ValueError("skip_decay must be in (0, 1)")
        if not (0.0 < self.start_match <= 1.0):
            raise ValueError("start_match must be in (0, 1]")


class PhmmGraph:
    """Immutable pHMM graph over one represented sequence.

    Transitions are stored as parallel arrays sorted by (source, target), so
    the outgoing edges of a state occupy one contiguous slice.  Arrays are
    frozen after construction; parameter updates produce a new graph via
    :meth:`with_parameters`.
    """

    def __init__(
        self,
        design: str,
        alphabet: Alphabet,
        n_columns: int,
        kinds,
        columns,
        trans_src,
        trans_dst,
        trans_prob,
        emissions,
        start,
        end_weights=None,
    ):
        if design not in (TRADITIONAL, ERROR_CORRECTION):
            raise ValueError(f"unknown design {design!r}")
        self.design = design
        self.alphabet = alphabet
        self.n_columns = int(n_columns)

        kinds = np.asarray(kinds, dtype=np.int8)
        columns = np.asarray(columns, dtype=np.int64)
        src = np.asarray(trans_src, dtype=np.int64)
        dst = np.asarray(trans_dst, dtype=np.int64)
        prob = np.asarray(trans_prob, dtype=np.float64)
        if not (len(src) == len(dst) == len(prob)):
            raise ValueError("transition arrays must have equal length")
        if kinds.shape != columns.shape:
            raise ValueError("kinds and columns must have equal length")

        order = np.lexsort((dst, src))
        self.trans_src = src[order]
        self.trans_dst = dst[order]
        self.trans_prob = prob[order]
        self.kinds = kinds
        self.columns = columns
        self.emissions = np.asarray(emissions, dtype=np.float64)
        self.start = np.asarray(start, dtype=np.float64)
        if self.emissions.shape != (len(kinds), alphabet.size):
            raise ValueError("emission table shape mismatch")
        if self.start.shape != (len(kinds),):
            raise ValueError("start distribution shape mismatch")
        if end_weights is None:
            end_weights = _canonical_end_weights(
                self.design, self.kinds, self.columns, self.n_columns, self._raw_max_span()
            )
        self.end_weights = np.asarray(end_weights, dtype=np.float64)
        if self.end_weights.shape != (len(kinds),):
            raise ValueError("end weight vector shape mismatch")

        for arr in (
            self.trans_src,
            self.trans_dst,
            self.trans_prob,
            self.kinds,
            self.columns,
            self.emissions,
            self.start,
            self.end_weights,
        ):
            arr.setflags(write=False)
        self._cache: dict = {}

    def _raw_max_span(self) -> int:
        if len(self.trans_src) == 0:
            return 0
        gaps = self.columns[self.trans_dst] - self.columns[self.trans_src] - 1
        return max(int(gaps.max()), 0)

    # -- basic views ---------------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.kinds)

    @property
    def n_transitions(self) -> int:
        return len(self.trans_src)

    @property
    def emitting_mask(self) -> np.ndarray:
        mask = self._cache.get("emitting_mask")
        if mask is None:
            mask = self.kinds != KIND_DELETION
            mask.setflags(write=False)
            self._cache["emitting_mask"] = mask
        return mask

    @property
    def silent_state_ids(self) -> np.ndarray:
        ids = self._cache.get("silent_ids")
        if ids is None:
            ids = np.flatnonzero(~self.emitting_mask)
            ids.setflags(write=False)
            self._cache["silent_ids"] = ids
        return ids

    @property
    def row_ptr(self) -> np.ndarray:
        """CSR-style offsets: outgoing edges of state i are row_ptr[i]:row_ptr[i+1]."""
        ptr = self._cache.get("row_ptr")
        if ptr is None:
            ptr = np.searchsorted(self.trans_src, np.arange(self.n_states + 1))
            ptr.setflags(write=False)
            self._cache["row_ptr"] = ptr
        return ptr

    def out_degree(self, state: int) -> int:
        ptr = self.row_ptr
        return int(ptr[state + 1] - ptr[state])

    def outgoing(self, state: int):
        ptr = self.row_ptr
        lo, hi = ptr[state], ptr[state + 1]
        return self.trans_dst[lo:hi], self.trans_prob[lo:hi]

    def max_deletion_span(self) -> int:
        """Largest number of represented characters skipped by a single transition."""
        span = self._cache.get("max_span")
        if span is None:
            gaps = self.columns[self.trans_dst] - self.columns[self.trans_src] - 1
            span = int(gaps.max()) if len(gaps) else 0
            span = max(span, 0)
            self._cache["max_span"] = span
        return span

    @property
    def end_mask(self) -> np.ndarray:
        """States permitted to end a path (nonzero virtual-end weight)."""
        mask = self._cache.get("end_mask")
        if mask is None:
            mask = self.end_weights > 0.0
            mask.setflags(write=False)
            self._cache["end_mask"] = mask
        return mask

    # -- derived construction ------------------------------------------------

    def with_parameters(self, trans_prob=None, emissions=None) -> "PhmmGraph":
        """New graph sharing this structure with replaced probability tables."""
        return PhmmGraph(
            self.design,
            self.alphabet,
            self.n_columns,
            self.kinds,
            self.columns,
            self.trans_src,
            self.trans_dst,
            self.trans_prob if trans_prob is None else trans_prob,
            self.emissions if emissions is None else emissions,
            self.start,
            end_weights=self.end_weights,
        )

    def structurally_equal(self, other: "PhmmGraph") -> bool:
        return (
            self.design == other.design
            and self.alphabet.symbols == other.alphabet.symbols
            and self.n_columns == other.n_columns
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.columns, other.columns)
            and np.array_equal(self.trans_src, other.trans_src)
            and np.array_equal(self.trans_dst, other.trans_dst)
            and np.array_equal(self.trans_prob, other.trans_prob)
            and np.array_equal(self.emissions, other.emissions)
            and np.array_equal(self.start, other.start)
            and np.array_equal(self.end_weights, other.end_weights)
        )

    def state_label(self, state: int) -> str:
        return f"{_KIND_LETTER[int(self.kinds[state])]}{int(self.columns[state])}"

    @property
    def represented_sequence(self) -> str:
        """Per-column argmax symbol of the match-state emissions."""
        chars = []
        for col in range(1, self.n_columns + 1):
            ids = np.flatnonzero((self.kinds == KIND_MATCH) & (self.columns == col))
            chars.append(self.alphabet.symbols[int(np.argmax(self.emissions[ids[0]]))])
        return "".join(chars)


# -- virtual end ----------------------------------------------------------------
#
# Paths terminate at a virtual end sitting one column past the last represented
# character.  Each state carries a fixed end weight: the share of its nominal
# outgoing mass that a transition to the virtual end would take (a forward step
# from the last column, or a deletion skip covering the remaining characters).
# End weights are not trained; they make ending early cost like a deletion, so
# consensus decoding cannot truncate for free.


def _match_emission(alphabet: Alphabet, symbol_idx: int, p_match: float) -> np.ndarray:
    row = np.full(alphabet.size, (1.0 - p_match) / (alphabet.size - 1))
    row[symbol_idx] = p_match
    return row


def _geometric_weights(count: int, decay: float) -> np.ndarray:
    w = decay ** np.arange(1, count + 1)
    return w / w.sum()


def end_weight_rule(
    kinds: np.ndarray,
    columns: np.ndarray,
    last_col: int,
    reach: int,
    priors: PriorConfig | None = None,
) -> np.ndarray:
    """End weights from structure alone: a forward step to the virtual end for
    the last column, a decayed deletion-skip share for columns within reach.
    Used for files that do not record end weights and for training windows."""
    p = priors or PriorConfig()
    w = np.zeros(len(kinds))
    skip_w = _geometric_weights(max(reach, 1), p.skip_decay) * p.deletion_mass
    for s in range(len(kinds)):
        if kinds[s] == KIND_DELETION:
            continue
        t = int(columns[s])
        gap = last_col + 1 - t  # columns skipped to land on the virtual end
        if gap == 1:
            w[s] = p.match_forward / (p.match_forward + p.insertion_open)
        elif 2 <= gap <= reach + 1:
            end_nom = skip_w[gap - 2]
            avail = [skip_w[k - 2] for k in range(2, min(reach + 1, last_col - t) + 1)]
            real = p.match_forward + p.insertion_open + sum(avail)
            w[s] = end_nom / (end_nom + real)
    return w


def _canonical_end_weights(design: str, kinds, columns, n_columns: int, span: int) -> np.ndarray:
    reach = 0 if design == TRADITIONAL else span
    return end_weight_rule(np.asarray(kinds), np.asarray(columns), n_columns, reach)


def build_traditional(sequence: str, priors: PriorConfig | None = None, alphabet: Alphabet = DNA) -> PhmmGraph:
    """Build the traditional design: M/I/D per character.

    Connections: M -> {M, D of the next column, I of the same column},
    D -> {M, D of the next column}, I -> {I self-loop, M of the next column}.
    Match states emit their represented character with probability
    ``priors.p_match`` and split the remainder uniformly.
    """
    priors = priors or PriorConfig()
    enc = alphabet.encode(sequence)
    n = len(enc)
    if n == 0:
        raise EmptySequence("cannot build a graph for an empty sequence")

    n_states = 3 * n
    kinds = np.empty(n_states, dtype=np.int8)
    columns = np.empty(n_states, dtype=np.int64)
    emissions = np.zeros((n_states, alphabet.size))
    end_w = np.zeros(n_states)
    src, dst, prob = [], [], []

    uniform = np.full(alphabet.size, 1.0 / alphabet.size)
    for c in range(n):
        m, i, d = 3 * c, 3 * c + 1, 3 * c + 2
        kinds[m], kinds[i], kinds[d] = KIND_MATCH, KIND_INSERTION, KIND_DELETION
        columns[m] = columns[i] = columns[d] = c + 1
        emissions[m] = _match_emission(alphabet, int(enc[c]), priors.p_match)
        emissions[i] = uniform

        if c + 1 < n:
            m2, d2 = 3 * (c + 1), 3 * (c + 1) + 2
            src += [m, m, m]
            dst += [m2, d2, i]
            prob += [priors.match_forward, priors.deletion_mass, priors.insertion_open]
            src += [i, i]
            dst += [i, m2]
            prob += [priors.insertion_open, 1.0 - priors.insertion_open]
            # geometric deletion run lengths: continue with probability skip_decay
            src += [d, d]
            dst += [d2, m2]
            prob += [priors.skip_decay, 1.0 - priors.skip_decay]
        else:
            src += [m]
            dst += [i]
            prob += [1.0]
            src += [i]
            dst += [i]
            prob += [1.0]
            # the final deletion state has no outgoing transitions
            stop_share = priors.match_forward / (priors.match_forward + priors.insertion_open)
            end_w[m] = stop_share
            end_w[i] = stop_share

    start = np.zeros(n_states)
    start[0] = priors.start_match
    start[2] = 1.0 - priors.start_match

    return PhmmGraph(TRADITIONAL, alphabet, n, kinds, columns, src, dst, prob, emissions, start, end_weights=end_w)


def build_error_correction(
    sequence: str,
    max_deletion: int = 6,
    max_insertion: int = 2,
    priors: PriorConfig | None = None,
    alphabet: Alphabet = DNA,
) -> PhmmGraph:
    """Build the loop-free design used for error correction.

    Each column gets one match state plus ``max_insertion`` chained insertion
    states.  A single transition M_t -> M_{t+k} (k in 2..max_deletion+1)
    deletes k-1 characters; skips past the end of the sequence are clipped.
    Insertion chains are entered at any position: entering the chain at slot m
    and walking it to the exit emits exactly ``max_insertion - m + 1``
    insertions.  Insertion states carry the same forward/skip transitions as
    match states, which keeps per-state transition counts within the product
    table budget.
    """
    priors = priors or PriorConfig()
    if max_deletion < 1:
        raise ValueError("max_deletion must be >= 1")
    if max_insertion < 1:
        raise ValueError("max_insertion must be >= 1")
    enc = alphabet.encode(sequence)
    n = len(enc)
    if n == 0:
        raise EmptySequence("cannot build a graph for an empty sequence")

    per_col = 1 + max_insertion
    n_states = per_col * n
    kinds = np.empty(n_states, dtype=np.int8)
    columns = np.empty(n_states, dtype=np.int64)
    emissions = np.zeros((n_states, alphabet.size))
    end_w = np.zeros(n_states)
    src, dst, prob = [], [], []

    def match_id(col):  # col is 1-based
        return per_col * (col - 1)

    def ins_id(col, slot):  # slot is 1-based within the chain
        return per_col * (col - 1) + slot

    uniform = np.full(alphabet.size, 1.0 / alphabet.size)
    skip_w = _geometric_weights(max_deletion, priors.skip_decay) * priors.deletion_mass
    # entering the chain at a later slot emits fewer insertions; weight by run length
    entry_w = _geometric_weights(max_insertion, priors.skip_decay)[::-1]
    entry_w = entry_w / entry_w.sum() * priors.insertion_open

    def forward_targets(col):
        """(target id, nominal mass) pairs for the forward/skip part of a row at `col`."""
        pairs = []
        if col + 1 <= n:
            pairs.append((match_id(col + 1), priors.match_forward))
        for k in range(2, max_deletion + 2):
            if col + k <= n:
                pairs.append((match_id(col + k), skip_w[k - 2]))
        return pairs

    stop_share = priors.match_forward / (priors.match_forward + priors.insertion_open)

    def add_row(state, pairs):
        total = sum(p for _, p in pairs)
        gap = n + 1 - int(columns[state])  # landing one past the last column ends the path
        if gap == 1:
            # stopping competes with opening one more insertion on fixed terms
            end_w[state] = stop_share
        elif 2 <= gap <= max_deletion + 1:
            end_nom = float(skip_w[gap - 2])
            end_w[state] = end_nom / (end_nom + total) if (end_nom + total) > 0 else 0.0
        if total <= 0.0:
            return
        for tgt, p in pairs:
            src.append(state)
            dst.append(tgt)
            prob.append(p / total)

    for col in range(1, n + 1):
        m = match_id(col)
        kinds[m] = KIND_MATCH
        columns[m] = col
        emissions[m] = _match_emission(alphabet, int(enc[col - 1]), priors.p_match)

        m_pairs = forward_targets(col)
        for slot in range(1, max_insertion + 1):
            m_pairs.append((ins_id(col, slot), entry_w[slot - 1]))
        add_row(m, m_pairs)

        for slot in range(1, max_insertion + 1):
            i = ins_id(col, slot)
            kinds[i] = KIND_INSERTION
            columns[i] = col
            emissions[i] = uniform
            i_pairs = forward_targets(col)
            if slot < max_insertion:
                i_pairs.append((ins_id(col, slot + 1), priors.insertion_open))
            add_row(i, i_pairs)

    start = np.zeros(n_states)
    if n == 1:
        start[0] = 1.0
    else:
        start[0] = priors.start_match
        n_skip = min(max_deletion, n - 1)
        w = _geometric_weights(n_skip, priors.skip_decay) * (1.0 - priors.start_match)
        for k in range(1, n_skip + 1):
            start[match_id(1 + k)] = w[k - 1]

    return PhmmGraph(ERROR_CORRECTION, alphabet, n, kinds, columns, src, dst, prob, emissions, start, end_weights=end_w)


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    state: int | None = None
    detail: str = ""

    def __str__(self):
        where = f"(state {self.state})" if self.state is not None else ""
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.rule}{where}{tail}"


def validate(graph: PhmmGraph) -> list[Diagnostic]:
    """Check every graph invariant; returns an empty list iff the graph is valid."""
    out: list[Diagnostic] = []

    bad_order = np.flatnonzero(graph.trans_src > graph.trans_dst)
    for e in bad_order:
        out.append(Diagnostic("OrderViolation", int(graph.trans_src[e]), f"transition ({int(graph.trans_src[e])},{int(graph.trans_dst[e])})"))

    if np.any((graph.trans_prob < 0) | (graph.trans_prob > 1)):
        for e in np.flatnonzero((graph.trans_prob < 0) | (graph.trans_prob > 1)):
            out.append(Diagnostic("RangeViolation", int(graph.trans_src[e]), f"transition probability {graph.trans_prob[e]!r}"))
    if np.any((graph.emissions < 0) | (graph.emissions > 1)):
        for s in np.flatnonzero(np.any((graph.emissions < 0) | (graph.emissions > 1), axis=1)):
            out.append(Diagnostic("RangeViolation", int(s), "emission probability outside [0,1]"))
    if np.any((graph.start < 0) | (graph.start > 1)):
        out.append(Diagnostic("RangeViolation", None, "start probability outside [0,1]"))
    if np.any((graph.end_weights < 0) | (graph.end_weights > 1)):
        out.append(Diagnostic("RangeViolation", None, "end weight outside [0,1]"))
    if np.any(graph.end_weights[~graph.emitting_mask] > 0):
        for s in np.flatnonzero(graph.end_weights * ~graph.emitting_mask):
            out.append(Diagnostic("DesignViolation", int(s), "silent state carries end weight"))

    ptr = graph.row_ptr
    row_sums = np.add.reduceat(graph.trans_prob, ptr[:-1][ptr[:-1] < ptr[1:]]) if graph.n_transitions else np.array([])
    states_with_out = np.flatnonzero(ptr[:-1] < ptr[1:])
    for s, total in zip(states_with_out, row_sums):
        if abs(total - 1.0) > ROW_SUM_TOL:
            out.append(Diagnostic("RowSumViolation", int(s), f"outgoing probabilities sum to {total!r}"))

    emit = graph.emitting_mask
    esums = graph.emissions.sum(axis=1)
    for s in range(graph.n_states):
        if emit[s]:
            if abs(esums[s] - 1.0) > ROW_SUM_TOL:
                out.append(Diagnostic("EmissionSumViolation", s, f"emissions sum to {esums[s]!r}"))
        elif esums[s] != 0.0:
            out.append(Diagnostic("SilentEmissionViolation", s, "deletion state carries emission mass"))

    # duplicate transitions collapse silently in CSR form; flag them
    if graph.n_transitions:
        keys = graph.trans_src * graph.n_states + graph.trans_dst
        dup = np.flatnonzero(np.diff(keys) == 0)
        for e in dup:
            out.append(Diagnostic("DuplicateTransition", int(graph.trans_src[e]), f"({int(graph.trans_src[e])},{int(graph.trans_dst[e])})"))

    if graph.design == TRADITIONAL:
        if graph.n_states != 3 * graph.n_columns:
            out.append(Diagnostic("DesignViolation", None, f"expected {3 * graph.n_columns} states, found {graph.n_states}"))
        for col in range(1, graph.n_columns + 1):
            ids = np.flatnonzero(graph.columns == col)
            k = set(int(x) for x in graph.kinds[ids])
            if k != {KIND_MATCH, KIND_INSERTION, KIND_DELETION}:
                out.append(Diagnostic("DesignViolation", None, f"column {col} lacks the M/I/D triple"))
        for s in np.flatnonzero(graph.kinds == KIND_INSERTION):
            tgts, _ = graph.outgoing(int(s))
            if s not in tgts:
                out.append(Diagnostic("DesignViolation", int(s), "insertion state lacks a self-loop"))
    else:
        loops = np.flatnonzero(graph.trans_src == graph.trans_dst)
        for e in loops:
            out.append(Diagnostic("DesignViolation", int(graph.trans_src[e]), "self-loop in error-correction design"))
        for s in np.flatnonzero(graph.kinds == KIND_DELETION):
            out.append(Diagnostic("DesignViolation", int(s), "deletion state in error-correction design"))

    return out


# -- serialization ------------------------------------------------------------


def _fmt(p: float) -> str:
    return format(float(p), ".17g")


def serialize(graph: PhmmGraph) -> str:
    """Render a graph in the line-oriented model format.

    Record types: header ``APHMM 1 <design> <alphabet> <n_columns>``, then
    ``S <id> <kind> <col>``, ``T <i> <j> <prob>``, ``E <id> <symbol> <prob>``
    and ``P <id> <prob>`` for the start distribution.  Probabilities are
    printed with 17 significant digits so the round-trip is exact.
    """
    lines = [f"APHMM 1 {graph.design} {graph.alphabet.symbols} {graph.n_columns}"]
    for s in range(graph.n_states):
        lines.append(f"S {s} {_KIND_LETTER[int(graph.kinds[s])]} {int(graph.columns[s])}")
    for e in range(graph.n_transitions):
        lines.append(f"T {int(graph.trans_src[e])} {int(graph.trans_dst[e])} {_fmt(graph.trans_prob[e])}")
    emit = graph.emitting_mask
    for s in range(graph.n_states):
        if not emit[s]:
            continue
        for c, sym in enumerate(graph.alphabet.symbols):
            lines.append(f"E {s} {sym} {_fmt(graph.emissions[s, c])}")
    for s in np.flatnonzero(graph.start > 0):
        lines.append(f"P {int(s)} {_fmt(graph.start[s])}")
    for s in np.flatnonzero(graph.end_weights > 0):
        lines.append(f"N {int(s)} {_fmt(graph.end_weights[s])}")
    return "\n".join(lines) + "\n"


def _parse_prob(token: str, line_no: int) -> float:
    try:
        p = float(token)
    except ValueError:
        raise ParseError(line_no, f"malformed probability {token!r}") from None
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ParseError(line_no, f"probability {token} outside [0,1]")
    return p


def _parse_int(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(line_no, f"malformed {what} {token!r}") from None


def deserialize(text: str) -> PhmmGraph:
    """Parse the model format back into a graph.

    Raises ParseError with the offending line number for any structural
    problem: bad header, unknown record tags, malformed fields, out-of-range
    probabilities, references to undeclared states, or emissions attached to
    silent states.
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError(1, "missing header")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "APHMM":
        raise ParseError(1, "malformed header")
    if head[1] != "1":
        raise ParseError(1, f"unsupported format version {head[1]}")
    design = head[2]
    if design not in (TRADITIONAL, ERROR_CORRECTION):
        raise ParseError(1, f"unknown design {design!r}")
    try:
        alphabet = Alphabet(head[3])
    except ValueError as exc:
        raise ParseError(1, str(exc)) from None
    n_columns = _parse_int(head[4], 1, "column count")
    if n_columns < 1:
        raise ParseError(1, "column count must be positive")

    states: dict[int, tuple[int, int]] = {}
    trans: list[tuple[int, int, float]] = []
    emis: list[tuple[int, int, float]] = []
    start: list[tuple[int, float]] = []
    ends: list[tuple[int, float]] = []

    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "S":
            if len(parts) != 4:
                raise ParseError(line_no, "S record needs <id> <kind> <col>")
            sid = _parse_int(parts[1], line_no, "state id")
            if parts[2] not in _KIND_LETTER.values():
                raise ParseError(line_no, f"unknown state kind {parts[2]!r}")
            kind = _KIND_CODE[StateKind.from_letter(parts[2])]
            col = _parse_int(parts[3], line_no, "column")
            if not (1 <= col <= n_columns):
                raise ParseError(line_no, f"column {col} outside 1..{n_columns}")
            if sid in states:
                raise ParseError(line_no, f"duplicate state id {sid}")
            states[sid] = (kind, col)
        elif tag == "T":
            if len(parts) != 4:
                raise ParseError(line_no, "T record needs <i> <j> <prob>")
            i = _parse_int(parts[1], line_no, "state id")
            j = _parse_int(parts[2], line_no, "state id")
            trans.append((i, j, _parse_prob(parts[3], line_no)))
            if i not in states or j not in states:
                raise ParseError(line_no, f"transition ({i},{j}) references an undeclared state")
        elif tag == "E":
            if len(parts) != 4:
                raise ParseError(line_no, "E record needs <id> <symbol> <prob>")
            sid = _parse_int(parts[1], line_no, "state id")
            if sid not in states:
                raise ParseError(line_no, f"emission references undeclared state {sid}")
            if parts[2] not in alphabet.symbols:
                raise ParseError(line_no, f"symbol {parts[2]!r} not in alphabet")
            if states[sid][0] == KIND_DELETION:
                raise ParseError(line_no, f"emission attached to silent state {sid}")
            emis.append((sid, alphabet.index(parts[2]), _parse_prob(parts[3], line_no)))
        elif tag == "P":
            if len(parts) != 3:
                raise ParseError(line_no, "P record needs <id> <prob>")
            sid = _parse_int(parts[1], line_no, "state id")
            if sid not in states:
                raise ParseError(line_no, f"start mass on undeclared state {sid}")
            start.append((sid, _parse_prob(parts[2], line_no)))
        elif tag == "N":
            if len(parts) != 3:
                raise ParseError(line_no, "N record needs <id> <prob>")
            sid = _parse_int(parts[1], line_no, "state id")
            if sid not in states:
                raise ParseError(line_no, f"end weight on undeclared state {sid}")
            ends.append((sid, _parse_prob(parts[2], line_no)))
        else:
            raise ParseError(line_no, f"unknown record tag {tag!r}")

    if not states:
        raise ParseError(len(lines), "no states declared")
    n_states = max(states) + 1
    if sorted(states) != list(range(n_states)):
        raise ParseError(len(lines), "state ids must be dense starting at 0")

    kinds = np.empty(n_states, dtype=np.int8)
    columns = np.empty(n_states, dtype=np.int64)
    for sid, (kind, col) in states.items():
        kinds[sid] = kind
        columns[sid] = col
    emissions = np.zeros((n_states, alphabet.size))
    for sid, ci, p in emis:
        emissions[sid, ci] = p
    start_vec = np.zeros(n_states)
    for sid, p in start:
        start_vec[sid] = p
    end_vec = None
    if ends:  # files without N records fall back to the structural rule
        end_vec = np.zeros(n_states)
        for sid, p in ends:
            end_vec[sid] = p

    src = [t[0] for t in trans]
    dst = [t[1] for t in trans]
    prob = [t[2] for t in trans]
    return PhmmGraph(design, alphabet, n_columns, kinds, columns, src, dst, prob, emissions, start_vec, end_weights=end_vec)
