"""Shared helpers: random instances and independent brute-force oracles.

The enumeration oracles below deliberately avoid the engine's data layout:
they walk explicit state paths recursively, so they can disagree with both
the optimized path and the dense reference if either were wrong.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from aphmm.alphabet import DNA
from aphmm.model import KIND_MATCH, PhmmGraph, build_error_correction, build_traditional


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def randomize_parameters(graph, rng):
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


def random_seq(rng, length, symbols="ACGT"):
    return "".join(rng.choice(list(symbols), size=length))


def random_instance(rng, design=None, max_cols=8, max_len=12):
    n_cols = int(rng.integers(2, max_cols + 1))
    rep = random_seq(rng, n_cols)
    if design is None:
        design = "traditional" if rng.integers(2) else "error-correction"
    if design == "traditional":
        g = build_traditional(rep)
    else:
        g = build_error_correction(rep, max_deletion=int(rng.integers(2, 5)), max_insertion=int(rng.integers(1, 3)))
    g = randomize_parameters(g, rng)
    seq = random_seq(rng, int(rng.integers(2, max_len + 1)))
    return g, seq


def one_state_graph(emission=(1.0, 0.0, 0.0, 0.0)):
    """Single match state with a self-loop; ends with full weight."""
    return PhmmGraph(
        "traditional",
        DNA,
        1,
        [KIND_MATCH],
        [1],
        [0],
        [0],
        [1.0],
        np.array([list(emission)]),
        np.array([1.0]),
        end_weights=np.array([1.0]),
    )


def two_state_graph():
    """Hand-checkable chain: s0 -> {s0, s1}, s1 -> s1; both end-permitted."""
    return PhmmGraph(
        "traditional",
        DNA,
        1,
        [KIND_MATCH, KIND_MATCH],
        [1, 1],
        [0, 0, 1],
        [0, 1, 1],
        [0.5, 0.5, 1.0],
        np.array([[0.8, 0.2, 0.0, 0.0], [0.3, 0.7, 0.0, 0.0]]),
        np.array([0.6, 0.4]),
        end_weights=np.array([1.0, 1.0]),
    )


# -- path-enumeration oracle -----------------------------------------------------


def enumerate_forward(graph, sequence):
    """Explicit path sums: returns (forward values dict[(t, state)] -> prob,
    total end-weighted probability).  Timestamps are 1-based; silent states
    hold the mass that has consumed t characters and sits on them."""
    seq = graph.alphabet.encode(sequence)
    emit = graph.emitting_mask
    n_s = len(seq)
    values: dict[tuple[int, int], float] = {}
    total = 0.0

    def record(t, state, w):
        values[(t, state)] = values.get((t, state), 0.0) + w

    def walk(state, consumed, w):
        nonlocal total
        if w == 0.0:
            return
        if not emit[state]:
            if consumed > 0:
                record(consumed, state, w)
            tgts, probs = graph.outgoing(state)
            for j, p in zip(tgts, probs):
                if consumed >= n_s and emit[j]:
                    continue  # nothing left to emit
                walk(int(j), consumed, w * p)
            return
        w = w * float(graph.emissions[state, seq[consumed]])
        consumed += 1
        record(consumed, state, w)
        tgts, probs = graph.outgoing(state)
        if consumed == n_s:
            total += w * float(graph.end_weights[state])
            # residual mass may still settle on silent states within the timestamp
            for j, p in zip(tgts, probs):
                if not emit[j]:
                    walk(int(j), consumed, w * p)
            return
        for j, p in zip(tgts, probs):
            walk(int(j), consumed, w * p)

    for s in np.flatnonzero(graph.start > 0):
        walk(int(s), 0, float(graph.start[s]))
    return values, total


def enumerate_loglik(graph, sequence):
    _, total = enumerate_forward(graph, sequence)
    return math.log(total) if total > 0 else float("-inf")


def enumerate_best_alignment(graph, sequence):
    """Max-probability state path emitting the sequence (independent of the
    engine's Viterbi); returns (log prob, path state ids)."""
    seq = graph.alphabet.encode(sequence)
    emit = graph.emitting_mask
    n_s = len(seq)
    best = {"logp": float("-inf"), "path": None}

    def walk(state, consumed, logw, path):
        if not emit[state]:
            tgts, probs = graph.outgoing(state)
            for j, p in zip(tgts, probs):
                if p > 0:
                    walk(int(j), consumed, logw + math.log(p), path + [int(j)])
            return
        e = float(graph.emissions[state, seq[consumed]])
        if e <= 0.0:
            return
        logw += math.log(e)
        consumed += 1
        if consumed == n_s:
            wend = float(graph.end_weights[state])
            if wend > 0 and logw + math.log(wend) > best["logp"]:
                best["logp"] = logw + math.log(wend)
                best["path"] = path
            return
        tgts, probs = graph.outgoing(state)
        for j, p in zip(tgts, probs):
            if p > 0:
                walk(int(j), consumed, logw + math.log(p), path + [int(j)])

    for s in np.flatnonzero(graph.start > 0):
        walk(int(s), 0, math.log(float(graph.start[s])), [int(s)])
    return best["logp"], best["path"]


def enumerate_best_consensus(graph, max_emissions=None):
    """Max-probability path through the graph alone (no observation), each
    emitting state contributing its best emission; no self-loop may repeat."""
    emit = graph.emitting_mask
    limit = max_emissions if max_emissions is not None else graph.n_columns * 3 + 5
    best = {"logp": float("-inf"), "seq": None}

    def walk(state, logw, emitted, count):
        if count > limit:
            return
        here = logw
        e_sym = None
        if emit[state]:
            e_idx = int(np.argmax(graph.emissions[state]))
            e = float(graph.emissions[state, e_idx])
            if e <= 0.0:
                return
            here += math.log(e)
            e_sym = graph.alphabet.symbols[e_idx]
            count += 1
        emitted = emitted + (e_sym or "")
        wend = float(graph.end_weights[state])
        if wend > 0 and here + math.log(wend) > best["logp"]:
            best["logp"] = here + math.log(wend)
            best["seq"] = emitted
        tgts, probs = graph.outgoing(state)
        for j, p in zip(tgts, probs):
            if int(j) != state and p > 0:
                walk(int(j), here + math.log(p), emitted, count)

    for s in np.flatnonzero(graph.start > 0):
        walk(int(s), math.log(float(graph.start[s])), "", 0)
    return best["logp"], best["seq"]
