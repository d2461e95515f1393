"""Command-line interface.

Subcommands: build, train, score, search, align, correct, perf-sweep, bench.
Primary outputs are delimited tables (TSV/CSV) and model/FASTA files; when a
report directory is requested, counters and timings land there as a TSV with
a rendered figure next to it, and perf-sweep/bench always render a figure
alongside their delimited output.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import perf
from .alphabet import by_name
from .apps import CorrectionOptions, correct, family_search, msa_align, viterbi_decode
from .engine import Step, TrainOptions, Workspace, score, train_single
from .errors import AphmmError
from .filtering import FilterConfig
from .model import ERROR_CORRECTION, TRADITIONAL, PhmmGraph, build_error_correction, build_traditional, deserialize, serialize, validate
from .reporting import BenchReport, StepTimer, render_bench_figure, render_sweep_figure, write_report
from .seqio import format_float, read_fasta, read_mappings, save_fasta, write_table
from .seqio import FastaRecord


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; inputs fail with 1
        raise _InputError(message)


def _add_shared_flags(p: argparse.ArgumentParser, chunk_default: int = 650):
    p.add_argument("--filter-bins", type=int, default=16, help="histogram filter bin count")
    p.add_argument("--filter-size", type=int, default=500, help="states kept per timestamp")
    p.add_argument("--no-filter", action="store_true", help="disable state filtering")
    p.add_argument("--filter-kind", choices=["histogram", "sort"], default="histogram")
    p.add_argument("--no-lut", action="store_true", help="disable the transition*emission product table")
    p.add_argument("--chunk", type=int, default=chunk_default, help="chunk length (150..1000)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--report", metavar="DIR", default=None, help="write report.tsv and report.png here")
    p.add_argument("--no-timing", action="store_true", help="omit wall times from reports")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.add_argument("--seed", type=int, default=0)


def _filter_config(args) -> FilterConfig | None:
    if args.no_filter:
        return None
    return FilterConfig(kind=args.filter_kind, bin_count=args.filter_bins, filter_size=args.filter_size)


def _train_options(args, use_filter: bool = False, steps=None) -> TrainOptions:
    return TrainOptions(
        filter=_filter_config(args) if use_filter else None,
        lut_enabled=not args.no_lut,
        chunk_length=args.chunk,
        steps=frozenset(steps) if steps else frozenset(Step),
    )


def _load_model(path) -> PhmmGraph:
    return deserialize(Path(path).read_text())


def _save_model(path, graph: PhmmGraph) -> None:
    Path(path).write_text(serialize(graph))


def _load_models(paths) -> list[tuple[str, PhmmGraph]]:
    models = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.glob("*.aphmm")):
                models.append((f.stem, _load_model(f)))
        else:
            models.append((p.stem, _load_model(p)))
    return models


def _finish_report(args, report: BenchReport) -> None:
    if args.report:
        write_report(args.report, report, timing=not args.no_timing, plot=not args.no_plots)


# -- subcommands ---------------------------------------------------------------


def _cmd_build(args) -> int:
    records = read_fasta(args.input)
    if not records:
        raise _InputError(f"no FASTA records in {args.input}")
    alphabet = by_name(args.alphabet)
    out = Path(args.out)
    single_file = out.suffix == ".aphmm"
    if single_file and len(records) > 1:
        raise _InputError("multiple records need an output directory, not a single .aphmm file")
    report = BenchReport(command="build", config={"design": args.design, "alphabet": args.alphabet})
    timer = StepTimer(report)
    with timer.time("build"):
        for rec in records:
            if args.design == TRADITIONAL:
                g = build_traditional(rec.sequence, alphabet=alphabet)
            else:
                g = build_error_correction(
                    rec.sequence, max_deletion=args.max_deletion, max_insertion=args.max_insertion, alphabet=alphabet
                )
            problems = validate(g)
            if problems:
                raise AphmmError(f"built graph failed validation: {problems[:3]}")
            if single_file:
                _save_model(out, g)
            else:
                out.mkdir(parents=True, exist_ok=True)
                _save_model(out / f"{rec.id}.aphmm", g)
    report.extra["models"] = len(records)
    _finish_report(args, report)
    return 0


def _cmd_train(args) -> int:
    graph = _load_model(args.model)
    records = read_fasta(args.input)
    options = _train_options(args, use_filter=not args.no_filter)
    ws = Workspace()
    report = BenchReport(command="train", config={"iterations": args.iterations, "sequences": len(records)})
    timer = StepTimer(report)
    rows = []
    with timer.time("train"):
        for it in range(args.iterations):
            for rec in records:
                graph, ll = train_single(graph, rec.sequence, options, ws)
                rows.append((str(it), rec.id, format_float(ll)))
    _save_model(args.out, graph)
    if args.log:
        write_table(args.log, ["iteration", "sequence", "log_likelihood"], rows)
    report.counters = ws.counters
    _finish_report(args, report)
    return 0


def _cmd_score(args) -> int:
    graph = _load_model(args.model)
    records = read_fasta(args.queries)
    options = _train_options(args, steps={Step.FORWARD})
    report = BenchReport(command="score", config={"model": Path(args.model).stem})
    timer = StepTimer(report)
    rows = []
    with timer.time("score"):
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            lls = list(pool.map(lambda r: score(graph, r.sequence, options), records))
    for rec, ll in zip(records, lls):
        rows.append((rec.id, format_float(ll)))
    write_table(args.out, ["id", "log_likelihood"], rows)
    _finish_report(args, report)
    return 0


def _cmd_search(args) -> int:
    models = _load_models(args.models)
    if not models:
        raise _InputError("no models given")
    queries = [(r.id, r.sequence) for r in read_fasta(args.queries)]
    options = _train_options(args, steps={Step.FORWARD})
    report = BenchReport(command="search", config={"models": len(models), "queries": len(queries)})
    timer = StepTimer(report)
    with timer.time("search"):
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_query = list(pool.map(lambda q: (q[0], family_search(models, [q], options)[q[0]]), queries))
    rows = []
    for qid, hits in per_query:
        for h in hits:
            rows.append((qid, h.model_id, format_float(h.log_likelihood), format_float(h.normalized_score), h.rank))
    write_table(args.out, ["query", "model", "log_likelihood", "normalized_score", "rank"], rows)
    _finish_report(args, report)
    return 0


def _cmd_align(args) -> int:
    graph = _load_model(args.model)
    records = read_fasta(args.queries)
    report = BenchReport(command="align", config={"model": Path(args.model).stem, "sequences": len(records)})
    timer = StepTimer(report)
    with timer.time("align"):
        rows_obj = msa_align(graph, [(r.id, r.sequence) for r in records])
    rows = []
    for row in rows_obj:
        for step, ((col, kind), sym) in enumerate(zip(row.path, row.symbols)):
            rows.append((row.sequence_id, step, col, kind, sym if sym is not None else "-"))
    write_table(args.out, ["sequence", "step", "column", "kind", "symbol"], rows)
    _finish_report(args, report)
    return 0


def _cmd_correct(args) -> int:
    assembly_records = read_fasta(args.assembly)
    if len(assembly_records) != 1:
        raise _InputError("the assembly FASTA must hold exactly one record")
    mappings = read_mappings(args.mappings)
    options = CorrectionOptions(
        chunk_length=args.chunk,
        max_deletion=args.max_deletion,
        max_insertion=args.max_insertion,
        train=_train_options(args, use_filter=not args.no_filter),
        passes=args.passes,
    )
    report = BenchReport(command="correct", config={"chunk": args.chunk, "reads": len(mappings), "passes": args.passes})
    timer = StepTimer(report)
    with timer.time("correct"):
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            corrected = correct(assembly_records[0].sequence, mappings, options, pool_map=pool.map)
    save_fasta(args.out, [FastaRecord(assembly_records[0].id, corrected)])
    report.extra["input_length"] = len(assembly_records[0].sequence)
    report.extra["output_length"] = len(corrected)
    _finish_report(args, report)
    return 0


def _cmd_perf_sweep(args) -> int:
    config = perf.AcceleratorConfig(
        cores=args.cores,
        pes=args.pes,
        ports=args.ports,
        bytes_per_cycle_per_port=args.port_bandwidth,
        l1_kb=args.l1_kb,
        lut_enabled=not args.no_lut,
        filter_enabled=not args.no_filter,
        partial_compute_enabled=not args.no_partial_compute,
        memoization_enabled=not args.no_memoization,
    )
    values = [int(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise _InputError("--values must list at least one integer")
    workload = perf.workload_for_chunk(
        args.chunk, filter_size=args.filter_size, accelerated_fraction=args.accelerated_fraction
    )
    reports = perf.sweep(config, args.vary, values, workload)
    header = list(reports[0].row().keys())
    rows = [[format_float(v) if isinstance(v, float) else v for v in r.row().values()] for r in reports]
    write_table(args.out, header, rows, delimiter=",")
    if not args.no_plots:
        render_sweep_figure(Path(args.out).with_suffix(".png"), reports, args.vary)
    return 0


def _cmd_bench(args) -> int:
    rows = bench_mod.run_bench(args.suite, args.seed)
    write_table(args.out, ["suite", "case", "metric", "value"], rows, delimiter=",")
    if not args.no_plots:
        render_bench_figure(Path(args.out).with_suffix(".png"), rows)
    report = BenchReport(command="bench", config={"suite": args.suite, "seed": args.seed})
    report.extra.update({f"{s}:{c}:{m}": v for s, c, m, v in rows})
    _finish_report(args, report)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="aphmm", description="Profile-HMM training, inference, and accelerator modeling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a model from a FASTA record")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", required=True, help=".aphmm file (single record) or a directory")
    p.add_argument("--design", choices=[TRADITIONAL, ERROR_CORRECTION], default=TRADITIONAL)
    p.add_argument("--alphabet", choices=["dna", "protein"], default="dna")
    p.add_argument("--max-deletion", type=int, default=6)
    p.add_argument("--max-insertion", type=int, default=2)
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("train", help="train a model on FASTA sequences")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--log", default=None, help="optional per-sequence likelihood TSV")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="log-likelihood of each query under a model")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-q", "--queries", required=True)
    p.add_argument("-o", "--out", default="scores.tsv")
    _add_shared_flags(p, chunk_default=1000)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("search", help="rank models per query by normalized score")
    p.add_argument("-m", "--models", nargs="+", required=True, help="model files or directories")
    p.add_argument("-q", "--queries", required=True)
    p.add_argument("-o", "--out", default="hits.tsv")
    _add_shared_flags(p, chunk_default=1000)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("align", help="align sequences to one model (MSA rows)")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-q", "--queries", required=True)
    p.add_argument("-o", "--out", default="alignment.tsv")
    _add_shared_flags(p, chunk_default=1000)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("correct", help="correct an assembly with mapped reads")
    p.add_argument("--assembly", required=True)
    p.add_argument("--reads", default=None, help="unused reads FASTA (mappings carry the segments)")
    p.add_argument("--mappings", required=True)
    p.add_argument("-o", "--out", default="corrected.fasta")
    p.add_argument("--max-deletion", type=int, default=6)
    p.add_argument("--max-insertion", type=int, default=2)
    p.add_argument("--passes", type=int, default=3)
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("perf-sweep", help="sweep an accelerator parameter and emit CSV + figure")
    p.add_argument("--vary", required=True, choices=perf.SWEEP_PARAMETERS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("-o", "--out", default="sweep.csv")
    p.add_argument("--cores", type=int, default=4)
    p.add_argument("--pes", type=int, default=64)
    p.add_argument("--ports", type=int, default=8)
    p.add_argument("--port-bandwidth", type=int, default=16)
    p.add_argument("--l1-kb", type=int, default=128)
    p.add_argument("--accelerated-fraction", type=float, default=perf.ACCELERATED_FRACTIONS["error_correction"])
    p.add_argument("--no-partial-compute", action="store_true")
    p.add_argument("--no-memoization", action="store_true")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_perf_sweep)

    p = sub.add_parser("bench", help="run benchmark suites and emit CSV + figure")
    p.add_argument("--suite", default="all", choices=["all", "engine", "lut", "filter"])
    p.add_argument("-o", "--out", default="bench.csv")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (AphmmError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
