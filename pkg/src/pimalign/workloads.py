"""Synthetic inputs: random read sets and the two bundled presets.

Every generator takes an explicit seed; the same seed gives the same records.
"""

from __future__ import annotations

import numpy as np

from .alignment import ALPHABET
from .fasta import Record

_LETTERS = np.array(list(ALPHABET))

PRESETS = ("db-search", "assembly")


def random_text(rng: np.random.Generator, length: int) -> str:
    return "".join(_LETTERS[rng.integers(0, 4, length)])


def gen_records(count: int, min_len: int, max_len: int, seed: int, prefix: str = "seq") -> list[Record]:
    if count < 0:
        raise ValueError("count must be non-negative")
    if not 0 < min_len <= max_len:
        raise ValueError("need 0 < min_len <= max_len")
    rng = np.random.default_rng(seed)
    lengths = rng.integers(min_len, max_len + 1, count)
    return [Record(f"{prefix}{i}", random_text(rng, int(n))) for i, n in enumerate(lengths)]


def mutate(rng: np.random.Generator, text: str, rate: float) -> str:
    """Point substitutions at ``rate`` per character."""
    codes = np.frombuffer(text.encode(), dtype=np.uint8).copy()
    hits = rng.random(len(codes)) < rate
    codes[hits] = np.frombuffer("".join(_LETTERS[rng.integers(0, 4, int(hits.sum()))]).encode(),
                                dtype=np.uint8)
    return codes.tobytes().decode()


def db_search(seed: int = 0, num_refs: int = 32, length: int = 10_000,
              query_length: int | None = None) -> tuple[Record, list[Record]]:
    """One long query against equally long random references."""
    rng = np.random.default_rng(seed)
    query = Record("query", random_text(rng, query_length or length))
    refs = [Record(f"ref{i}", random_text(rng, length)) for i in range(num_refs)]
    return query, refs


def assembly(seed: int = 0, genome_length: int = 60_000, read_length: int = 1000,
             num_reads: int = 64, error_rate: float = 0.01) -> tuple[Record, list[Record]]:
    """Reads sampled from one random genome; the query is one more read."""
    rng = np.random.default_rng(seed)
    genome = random_text(rng, genome_length)
    starts = rng.integers(0, genome_length - read_length + 1, num_reads + 1)
    reads = [mutate(rng, genome[s:s + read_length], error_rate) for s in starts]
    return Record("query", reads[0]), [Record(f"read{i}", r) for i, r in enumerate(reads[1:])]


def preset(name: str, seed: int = 0, **kwargs) -> tuple[Record, list[Record]]:
    if name == "db-search":
        return db_search(seed, **kwargs)
    if name == "assembly":
        return assembly(seed, **kwargs)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
