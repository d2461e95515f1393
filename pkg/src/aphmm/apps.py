"""Pipelines on top of the engine: error correction, family search, MSA.

* error correction: split an assembly into chunks, build the loop-free graph
  per chunk, train it with each overlapping read segment in input order, then
  decode the consensus sequence as the corrected chunk;
* family search: score a query against many models with the forward
  calculation only and rank by length-normalized log-likelihood;
* MSA: align each sequence to one model with Viterbi decoding; rows share the
  model's column space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Step, TrainOptions, Workspace, score, train_single
from .errors import AlphabetMismatch, MappingOutOfBounds, NoPathError
from .model import (
    ERROR_CORRECTION,
    KIND_DELETION,
    KIND_INSERTION,
    KIND_MATCH,
    PhmmGraph,
    build_error_correction,
)

NEG_INF = float("-inf")


# -- consensus decoding ---------------------------------------------------------


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else NEG_INF

def viterbi_decode(graph: PhmmGraph) -> str:
    """Consensus sequence: the maximum-probability path from the virtual start
    to the virtual end, each visited emitting state contributing its best
    emission.  Self-loops never improve the product (all factors are <= 1) and
    are excluded; ties prefer a match-state predecessor, then the lower id,
    and the argmax symbol resolves ties toward the lower symbol index.
    """
    n = graph.n_states
    emit = graph.emitting_mask
    best_sym = np.argmax(graph.emissions, axis=1)
    bonus = np.where(emit, np.log(np.maximum(graph.emissions[np.arange(n), best_sym], 1e-300)), 0.0)
    bonus[emit & (graph.emissions[np.arange(n), best_sym] <= 0.0)] = NEG_INF

    score_v = np.full(n, NEG_INF)
    parent = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        cand = _log(graph.start[s])
        cand_parent = -1
        lo, hi = graph.row_ptr[s], graph.row_ptr[s + 1]
        # incoming edges were emitted by lower ids; walk them via the CSR of sources
        for j in _incoming(graph, s):
            if j == s:
                continue
            w = score_v[j] + _log(_edge_prob(graph, j, s))
            if w > cand or (w == cand and _prefer(graph, j, cand_parent)):
                cand = w
                cand_parent = j
        score_v[s] = cand + bonus[s]
        parent[s] = cand_parent

    end_ids = np.flatnonzero(graph.end_mask)
    if len(end_ids) == 0:
        raise NoPathError("graph has no states permitted to end a path")
    best_end = -1
    best = NEG_INF
    for s in end_ids:
        total = score_v[s] + _log(float(graph.end_weights[s]))
        if total > best or (total == best and _prefer(graph, int(s), best_end)):
            best = float(total)
            best_end = int(s)
    if best == NEG_INF:
        raise NoPathError("no path reaches a state permitted to end")

    path = []
    s = best_end
    while s != -1:
        path.append(s)
        s = int(parent[s])
    path.reverse()
    return "".join(graph.alphabet.symbols[int(best_sym[s])] for s in path if emit[s])


def _incoming(graph: PhmmGraph, state: int):
    comp = graph._cache.get("incoming")
    if comp is None:
        lists: list[list[int]] = [[] for _ in range(graph.n_states)]
        for e in range(graph.n_transitions):
            lists[int(graph.trans_dst[e])].append(int(graph.trans_src[e]))
        comp = lists
        graph._cache["incoming"] = comp
    return comp[state]


def _edge_prob(graph: PhmmGraph, src: int, dst: int) -> float:
    lo, hi = graph.row_ptr[src], graph.row_ptr[src + 1]
    pos = np.searchsorted(graph.trans_dst[lo:hi], dst)
    return float(graph.trans_prob[lo + pos])


def _prefer(graph: PhmmGraph, challenger: int, incumbent: int) -> bool:
    if incumbent < 0:
        return False
    c_match = graph.kinds[challenger] == KIND_MATCH
    i_match = graph.kinds[incumbent] == KIND_MATCH
    if c_match != i_match:
        return bool(c_match)
    return challenger < incumbent


# -- observation-conditioned Viterbi ----------------------------------------------


@dataclass
class AlignmentRow:
    """State path of one sequence through the model.

    ``path`` lists (column, kind letter) per visited state; ``symbols`` holds
    the consumed character for match/insertion steps and None for deletions.
    """

    sequence_id: str
    path: list[tuple[int, str]]
    symbols: list[str | None]
    log_probability: float

    @property
    def consumed(self) -> int:
        return sum(1 for s in self.symbols if s is not None)


def align_viterbi(graph: PhmmGraph, sequence: str) -> tuple[list[int], float]:
    """Most probable state path emitting the sequence; returns (state ids, log prob).

    Silent deletion states are crossed within a timestamp (they consume
    nothing); start mass sitting on a silent state is walked through the chain
    before the first emission and the traversal appears in the returned path.
    """
    seq = graph.alphabet.encode(sequence)
    n_s = len(seq)
    n = graph.n_states
    emit = graph.emitting_mask
    silent = graph.silent_state_ids
    with np.errstate(divide="ignore"):
        log_e = np.where(graph.emissions > 0, np.log(np.maximum(graph.emissions, 1e-300)), NEG_INF)

    # pre-emission silent walk from the start distribution
    start_score = np.where(graph.start > 0, np.log(np.maximum(graph.start, 1e-300)), NEG_INF)
    pre_chain: dict[int, list[int]] = {}
    sil_score = {}
    sil_chain: dict[int, list[int]] = {}
    for d in silent:
        best, chain = start_score[d], [int(d)]
        for j in _incoming(graph, int(d)):
            if not emit[j] and j in sil_score:
                w = sil_score[j] + _log(_edge_prob(graph, j, int(d)))
                if w > best:
                    best, chain = w, sil_chain[j] + [int(d)]
        sil_score[int(d)] = best
        sil_chain[int(d)] = chain
    eff_start = start_score.copy()
    eff_start[silent] = NEG_INF
    for d in silent:
        tgts, probs = graph.outgoing(int(d))
        for j, p in zip(tgts, probs):
            if emit[j]:
                w = sil_score[int(d)] + _log(p)
                if w > eff_start[j]:
                    eff_start[j] = w
                    pre_chain[int(j)] = sil_chain[int(d)]

    delta = np.full((n_s, n), NEG_INF)
    back = np.full((n_s, n), -1, dtype=np.int64)

    def silent_closure(t: int):
        for d in silent:
            best, arg = NEG_INF, -1
            for j in _incoming(graph, int(d)):
                w = delta[t, j] + _log(_edge_prob(graph, j, int(d)))
                if w > best or (w == best and _prefer(graph, j, arg)):
                    best, arg = w, j
            delta[t, d] = best
            back[t, d] = arg

    delta[0] = eff_start + np.where(emit, log_e[:, seq[0]], 0.0)
    delta[0, ~emit] = NEG_INF
    silent_closure(0)
    for t in range(1, n_s):
        for i in range(n):
            if not emit[i]:
                continue
            best, arg = NEG_INF, -1
            for j in _incoming(graph, i):
                w = delta[t - 1, j] + _log(_edge_prob(graph, j, i))
                if w > best or (w == best and _prefer(graph, j, arg)):
                    best, arg = w, j
            delta[t, i] = best + log_e[i, seq[t]]
            back[t, i] = arg
        silent_closure(t)

    end_ids = np.flatnonzero(graph.end_mask)
    best, best_end = NEG_INF, -1
    for s in end_ids:
        total = delta[n_s - 1, s] + _log(float(graph.end_weights[s]))
        if total > best or (total == best and _prefer(graph, int(s), best_end)):
            best, best_end = float(total), int(s)
    if best == NEG_INF:
        raise NoPathError("sequence cannot be aligned to the model")

    # traceback: silent hops stay within a timestamp, emitting hops consume one
    path = []
    t, s = n_s - 1, best_end
    while True:
        path.append(s)
        prev = int(back[t, s])
        if emit[s]:
            if t == 0:
                break
            t -= 1
        s = prev
        if s < 0:
            break
    path.reverse()
    # prepend any silent walk taken before the first emission
    first = path[0]
    if first in pre_chain and not math.isinf(eff_start[first]) and eff_start[first] > start_score[first]:
        path = pre_chain[first] + path
    return path, best


def msa_align(graph: PhmmGraph, sequences: dict[str, str] | list[tuple[str, str]]) -> list[AlignmentRow]:
    """Viterbi-align each sequence against the model.

    Rows share the model's column space: stacking them yields a multiple
    sequence alignment.  Raises AlphabetMismatch when a sequence uses symbols
    outside the model alphabet.
    """
    items = sequences.items() if isinstance(sequences, dict) else sequences
    rows = []
    for sid, s in items:
        _check_alphabet(graph, sid, s)
        ids, logp = align_viterbi(graph, s)
        path = [(int(graph.columns[i]), graph.kinds[i]) for i in ids]
        symbols: list[str | None] = []
        pos = 0
        for i in ids:
            if graph.kinds[i] == KIND_DELETION:
                symbols.append(None)
            else:
                symbols.append(s[pos])
                pos += 1
        rows.append(
            AlignmentRow(
                sequence_id=sid,
                path=[(c, {KIND_MATCH: "M", KIND_INSERTION: "I", KIND_DELETION: "D"}[k]) for c, k in path],
                symbols=symbols,
                log_probability=logp,
            )
        )
    return rows


# -- family search -----------------------------------------------------------------


@dataclass(frozen=True)
class SearchHit:
    model_id: str
    log_likelihood: float
    normalized_score: float
    rank: int


def _check_alphabet(graph: PhmmGraph, seq_id: str, sequence: str):
    missing = set(sequence) - set(graph.alphabet.symbols)
    if missing:
        raise AlphabetMismatch(f"sequence {seq_id!r} uses symbols {sorted(missing)} outside the model alphabet")


def family_search(
    models: list[tuple[str, PhmmGraph]],
    queries: dict[str, str] | list[tuple[str, str]],
    options: TrainOptions | None = None,
) -> dict[str, list[SearchHit]]:
    """Score every query against every model (forward only) and rank hits.

    Hits are ordered by length-normalized log-likelihood descending, ties by
    model id ascending.  All models must share one alphabet.
    """
    options = options or TrainOptions(chunk_length=1000)
    if models:
        symbols = models[0][1].alphabet.symbols
        for mid, g in models:
            if g.alphabet.symbols != symbols:
                raise AlphabetMismatch(f"model {mid!r} uses a different alphabet")
    items = list(queries.items()) if isinstance(queries, dict) else list(queries)
    results: dict[str, list[SearchHit]] = {}
    for qid, qseq in items:
        if models:
            _check_alphabet(models[0][1], qid, qseq)
        scored = []
        for mid, g in models:
            ll = score(g, qseq, options)
            norm = ll / len(qseq) if len(qseq) else NEG_INF
            scored.append((mid, ll, norm))
        scored.sort(key=lambda h: (-h[2], h[0]))
        results[qid] = [
            SearchHit(model_id=mid, log_likelihood=ll, normalized_score=norm, rank=r + 1)
            for r, (mid, ll, norm) in enumerate(scored)
        ]
    return results


# -- error correction ----------------------------------------------------------------


@dataclass(frozen=True)
class ReadMapping:
    """One read segment anchored on the assembly.

    ``start`` is a 0-based assembly coordinate; ``strand`` is '+' or '-',
    minus-strand segments are reverse-complemented before use (DNA only).
    """

    read_id: str
    start: int
    strand: str
    segment: str


@dataclass
class Chunk:
    start: int
    end: int  # exclusive
    sequence: str
    segments: list[tuple[str, int, str]] = field(default_factory=list)  # (read id, offset in chunk, bases)

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class CorrectionOptions:
    """Error-correction pipeline knobs.

    ``passes`` repeats the sequential per-read training over a chunk's read
    set; several passes let the expectation-maximization break ties between
    equivalent indel placements, which a single pass can leave split (and a
    split posterior hides the indel from the max-probability consensus).
    """

    chunk_length: int = 650
    max_deletion: int = 6
    max_insertion: int = 2
    train: TrainOptions = TrainOptions()
    passes: int = 3
    min_segment: int = 3  # fragments shorter than this teach nothing

    def __post_init__(self):
        if not (150 <= self.chunk_length <= 1000):
            raise ValueError("chunk_length must be within [150, 1000]")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


_COMPLEMENT = {"A": "T", "C": "G", "G": "C", "T": "A"}


def reverse_complement(seq: str) -> str:
    return "".join(_COMPLEMENT.get(c, c) for c in reversed(seq))


def chunk_spans(length: int, chunk_length: int) -> list[tuple[int, int]]:
    """Near-equal windows no longer than chunk_length; short inputs stay whole."""
    if length <= chunk_length:
        return [(0, length)]
    pieces = math.ceil(length / chunk_length)
    base = length // pieces
    extra = length % pieces
    spans = []
    pos = 0
    for i in range(pieces):
        size = base + (1 if i < extra else 0)
        spans.append((pos, pos + size))
        pos += size
    return spans


def make_chunks(assembly: str, mappings: list[ReadMapping], options: CorrectionOptions) -> list[Chunk]:
    n = len(assembly)
    for m in mappings:
        if m.start < 0 or m.start + len(m.segment) > n:
            raise MappingOutOfBounds(
                f"read {m.read_id!r} maps to [{m.start}, {m.start + len(m.segment)}) outside assembly of length {n}"
            )
        if m.strand not in ("+", "-"):
            raise MappingOutOfBounds(f"read {m.read_id!r} has unknown strand {m.strand!r}")
    chunks = [Chunk(start=a, end=b, sequence=assembly[a:b]) for a, b in chunk_spans(n, options.chunk_length)]
    for m in mappings:
        seg = m.segment if m.strand == "+" else reverse_complement(m.segment)
        m_end = m.start + len(seg)
        for ch in chunks:
            lo = max(m.start, ch.start)
            hi = min(m_end, ch.end)
            if hi - lo < options.min_segment:
                continue
            piece = seg[lo - m.start : hi - m.start]
            ch.segments.append((m.read_id, lo - ch.start, piece))
    return chunks


def correct_chunk(chunk: Chunk, options: CorrectionOptions) -> str:
    """Train the chunk graph on each overlapping segment, then decode."""
    if not chunk.segments:
        return chunk.sequence
    graph = build_error_correction(
        chunk.sequence, max_deletion=options.max_deletion, max_insertion=options.max_insertion
    )
    n_cols = graph.n_columns
    base = options.train
    for _ in range(options.passes):
        for _, offset, piece in chunk.segments:
            col_lo = offset + 1
            col_hi = min(n_cols, offset + len(piece))
            window = None if (col_lo == 1 and col_hi == n_cols) else (col_lo, col_hi)
            opts = TrainOptions(
                filter=base.filter,
                lut_enabled=base.lut_enabled,
                chunk_length=max(base.chunk_length, len(piece)),
                steps=base.steps,
                window=window,
            )
            graph, _ = train_single(graph, piece, opts)
    return viterbi_decode(graph)


def correct(
    assembly: str,
    mappings: list[ReadMapping],
    options: CorrectionOptions | None = None,
    pool_map=map,
) -> str:
    """Correct an assembly with read evidence.

    The assembly is split into chunks; each chunk's graph is trained on its
    overlapping read segments sequentially (input order) and replaced by the
    decoded consensus.  Chunks are independent work units: ``pool_map`` may be
    a parallel map.  With no reads the assembly is returned unchanged.
    """
    options = options or CorrectionOptions()
    if not mappings:
        return assembly
    chunks = make_chunks(assembly, mappings, options)
    corrected = list(pool_map(lambda ch: correct_chunk(ch, options), chunks))
    return "".join(corrected)
