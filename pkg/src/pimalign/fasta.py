"""Minimal FASTA reading and writing."""

from __future__ import annotations

from dataclasses import dataclass

from .alignment import InvalidCharacter, Sequence, encode_sequence

LINE_WIDTH = 80


class FastaError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    name: str
    text: str


def parse_fasta(text: str, source: str = "<input>") -> list[Record]:
    records: list[Record] = []
    name = None
    chunks: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            if name is not None:
                records.append(Record(name, "".join(chunks)))
            name = line[1:].split()[0] if line[1:].strip() else f"record{len(records)}"
            chunks = []
        elif name is None:
            raise FastaError(f"{source}:{lineno}: sequence data before the first '>' header")
        else:
            chunks.append(line.upper())
    if name is not None:
        records.append(Record(name, "".join(chunks)))
    return records


def read_fasta(path) -> list[Record]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_fasta(fh.read(), str(path))
    except UnicodeDecodeError:
        raise FastaError(f"{path}: not a text file") from None


def format_fasta(records) -> str:
    out = []
    for rec in records:
        out.append(f">{rec.name}\n")
        for k in range(0, len(rec.text), LINE_WIDTH):
            out.append(rec.text[k:k + LINE_WIDTH] + "\n")
    return "".join(out)


def write_fasta(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_fasta(records))


def encode_records(records, source: str = "<input>") -> list[Sequence]:
    seqs = []
    for rec in records:
        try:
            seqs.append(encode_sequence(rec.text))
        except InvalidCharacter as exc:
            raise FastaError(f"{source}: record {rec.name!r}: {exc}") from None
    return seqs
