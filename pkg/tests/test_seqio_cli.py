import numpy as np
import pytest

from aphmm.cli import run_cli
from aphmm.errors import ParseError
from aphmm.model import deserialize
from aphmm.seqio import (
    FastaRecord,
    parse_fasta,
    parse_mappings,
    read_fasta,
    write_fasta,
)

from conftest import random_seq


class TestFasta:
    def test_two_wrapped_records(self):
        text = ">a first\nACGT\nacgt\n>b\nTTTT\n"
        recs = parse_fasta(text)
        assert len(recs) == 2
        assert recs[0] == FastaRecord("a", "ACGTACGT")
        assert recs[1] == FastaRecord("b", "TTTT")

    def test_empty_file(self):
        assert parse_fasta("") == []

    def test_invalid_symbols_pass_through(self):
        # symbol validity is a model concern, not a parsing concern
        recs = parse_fasta(">a\nACXT\n")
        assert recs[0].sequence == "ACXT"

    def test_header_without_sequence(self):
        with pytest.raises(ParseError):
            parse_fasta(">a\n>b\nACGT\n")

    def test_data_before_header(self):
        with pytest.raises(ParseError):
            parse_fasta("ACGT\n")

    def test_write_wraps_at_60(self):
        rec = FastaRecord("x", "A" * 130)
        text = write_fasta([rec])
        lines = text.splitlines()
        assert lines[0] == ">x"
        assert [len(l) for l in lines[1:]] == [60, 60, 10]

    def test_round_trip_normalizes(self, rng):
        recs = [FastaRecord(f"r{i}", random_seq(rng, int(rng.integers(1, 200)))) for i in range(5)]
        once = parse_fasta(write_fasta(recs))
        assert once == recs
        assert parse_fasta(write_fasta(once)) == once


class TestMappings:
    def test_parse(self):
        text = "#schema=1\nr1\t10\t+\tACGT\nr2\t0\t-\tacg\n"
        maps = parse_mappings(text)
        assert maps[0].read_id == "r1" and maps[0].start == 10 and maps[0].segment == "ACGT"
        assert maps[1].strand == "-" and maps[1].segment == "ACG"

    def test_bad_field_count(self):
        with pytest.raises(ParseError):
            parse_mappings("r1\t10\t+\n")

    def test_bad_strand(self):
        with pytest.raises(ParseError):
            parse_mappings("r1\t10\t*\tACGT\n")


@pytest.fixture
def workdir(tmp_path, rng):
    true = random_seq(rng, 200)
    (tmp_path / "ref.fasta").write_text(f">ref\n{true}\n")
    queries = [true, random_seq(rng, 30), random_seq(rng, 30)]
    (tmp_path / "q.fasta").write_text("".join(f">q{i}\n{s}\n" for i, s in enumerate(queries)))
    asm = true[:100] + ("A" if true[100] != "A" else "C") + true[101:]
    (tmp_path / "asm.fasta").write_text(f">asm\n{asm}\n")
    rows = ["#read_id\tstart\tstrand\tsegment"] + [f"r{i}\t0\t+\t{true}" for i in range(8)]
    (tmp_path / "map.tsv").write_text("\n".join(rows) + "\n")
    (tmp_path / "true.txt").write_text(true)
    return tmp_path


class TestCli:
    def test_unknown_flag_exits_one(self, capsys):
        assert run_cli(["--definitely-not-a-flag"]) == 1

    def test_missing_file_exits_one(self, tmp_path, capsys):
        assert run_cli(["score", "-m", str(tmp_path / "none.aphmm"), "-q", str(tmp_path / "none.fasta")]) == 1

    def test_build_then_score(self, workdir, capsys):
        model = workdir / "ref.aphmm"
        assert run_cli(["build", "-i", str(workdir / "ref.fasta"), "-o", str(model)]) == 0
        g = deserialize(model.read_text())
        assert g.n_columns == 200
        out = workdir / "scores.tsv"
        assert run_cli(["score", "-m", str(model), "-q", str(workdir / "q.fasta"), "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "#schema=1"
        assert lines[1].split("\t") == ["id", "log_likelihood"]
        assert len(lines) == 5

    def test_score_deterministic_output(self, workdir):
        model = workdir / "ref.aphmm"
        run_cli(["build", "-i", str(workdir / "ref.fasta"), "-o", str(model)])
        a = workdir / "a.tsv"
        b = workdir / "b.tsv"
        run_cli(["score", "-m", str(model), "-q", str(workdir / "q.fasta"), "-o", str(a)])
        run_cli(["score", "-m", str(model), "-q", str(workdir / "q.fasta"), "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_search_ranks_reference_first(self, workdir):
        models = workdir / "models"
        run_cli(["build", "-i", str(workdir / "ref.fasta"), "-o", str(models)])
        out = workdir / "hits.tsv"
        assert run_cli(["search", "-m", str(models), "-q", str(workdir / "q.fasta"), "-o", str(out)]) == 0
        rows = [l.split("\t") for l in out.read_text().splitlines()[2:]]
        q0 = [r for r in rows if r[0] == "q0"]
        assert q0[0][1] == "ref" and q0[0][4] == "1"

    def test_align_output(self, workdir):
        model = workdir / "ref.aphmm"
        run_cli(["build", "-i", str(workdir / "ref.fasta"), "-o", str(model)])
        out = workdir / "aln.tsv"
        assert run_cli(["align", "-m", str(model), "-q", str(workdir / "q.fasta"), "-o", str(out)]) == 0
        header = out.read_text().splitlines()[1].split("\t")
        assert header == ["sequence", "step", "column", "kind", "symbol"]

    def test_correct_pipeline(self, workdir):
        out = workdir / "fixed.fasta"
        code = run_cli([
            "correct", "--assembly", str(workdir / "asm.fasta"), "--mappings", str(workdir / "map.tsv"),
            "-o", str(out), "--report", str(workdir / "rep"), "--seed", "1",
        ])
        assert code == 0
        assert read_fasta(out)[0].sequence == (workdir / "true.txt").read_text()
        assert (workdir / "rep" / "report.tsv").exists()
        assert (workdir / "rep" / "report.png").exists()

    def test_perf_sweep_csv_and_figure(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(["perf-sweep", "--vary", "pes", "--values", "16,32,64,128", "-o", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "#schema=1"
        assert len(lines) == 6  # schema + header + 4 rows
        assert (tmp_path / "sweep.png").exists()

    def test_perf_sweep_rejects_unknown_parameter(self, tmp_path):
        assert run_cli(["perf-sweep", "--vary", "flux", "--values", "1", "-o", str(tmp_path / "x.csv")]) == 1

    def test_bench_lut_suite(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert run_cli(["bench", "--suite", "lut", "-o", str(out), "--seed", "2"]) == 0
        text = out.read_text()
        assert "bit_identical,1" in text
        assert "hit_ratio" in text
        assert (tmp_path / "bench.png").exists()

    def test_report_without_timing_is_deterministic(self, workdir):
        model = workdir / "ref.aphmm"
        run_cli(["build", "-i", str(workdir / "ref.fasta"), "-o", str(model)])
        for d in ("repA", "repB"):
            run_cli([
                "score", "-m", str(model), "-q", str(workdir / "q.fasta"), "-o", str(workdir / f"{d}.tsv"),
                "--report", str(workdir / d), "--no-timing", "--no-plots",
            ])
        a = (workdir / "repA" / "report.tsv").read_bytes()
        b = (workdir / "repB" / "report.tsv").read_bytes()
        assert a == b
