"""FASTA and delimited-file I/O."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .apps import ReadMapping
from .errors import ParseError

FASTA_WIDTH = 60


@dataclass(frozen=True)
class FastaRecord:
    id: str
    sequence: str


def parse_fasta(text: str) -> list[FastaRecord]:
    """Parse FASTA text: wrapped lines joined, lowercase uppercased, header
    id cut at the first whitespace.  Symbol validity is not checked here;
    invalid symbols surface later as UnknownSymbol when a sequence meets a
    model."""
    records: list[FastaRecord] = []
    name: str | None = None
    parts: list[str] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(">"):
            if name is not None:
                if not parts:
                    raise ParseError(line_no, f"record {name!r} has no sequence")
                records.append(FastaRecord(name, "".join(parts)))
            name = stripped[1:].split()[0] if len(stripped) > 1 and stripped[1:].split() else ""
            if not name:
                raise ParseError(line_no, "empty FASTA header")
            parts = []
        else:
            if name is None:
                raise ParseError(line_no, "sequence data before any FASTA header")
            parts.append(stripped.upper())
    if name is not None:
        if not parts:
            raise ParseError(len(text.splitlines()), f"record {name!r} has no sequence")
        records.append(FastaRecord(name, "".join(parts)))
    return records


def write_fasta(records, width: int = FASTA_WIDTH) -> str:
    out = io.StringIO()
    for rec in records:
        out.write(f">{rec.id}\n")
        seq = rec.sequence
        for i in range(0, len(seq), width):
            out.write(seq[i : i + width] + "\n")
    return out.getvalue()


def read_fasta(path) -> list[FastaRecord]:
    return parse_fasta(Path(path).read_text())


def save_fasta(path, records) -> None:
    Path(path).write_text(write_fasta(records))


def parse_mappings(text: str) -> list[ReadMapping]:
    """Read-mapping TSV: read_id, assembly start (0-based), strand, segment."""
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise ParseError(line_no, f"expected 4 tab-separated fields, found {len(parts)}")
        read_id, start_s, strand, segment = parts
        try:
            start = int(start_s)
        except ValueError:
            raise ParseError(line_no, f"malformed start coordinate {start_s!r}") from None
        if strand not in ("+", "-"):
            raise ParseError(line_no, f"strand must be + or -, found {strand!r}")
        if not segment:
            raise ParseError(line_no, "empty segment")
        out.append(ReadMapping(read_id, start, strand, segment.upper()))
    return out


def read_mappings(path) -> list[ReadMapping]:
    return parse_mappings(Path(path).read_text())


def write_mappings(path, mappings) -> None:
    lines = ["#schema=1", "#read_id\tstart\tstrand\tsegment"]
    for m in mappings:
        lines.append(f"{m.read_id}\t{m.start}\t{m.strand}\t{m.segment}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_table(path, header: list[str], rows, schema: int = 1, delimiter: str = "\t") -> None:
    """Delimited table with a schema comment and a header row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"#schema={schema}\n")
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def format_float(x: float) -> str:
    return format(float(x), ".10g")
