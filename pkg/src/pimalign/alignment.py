"""Golden Needleman-Wunsch implementation.

Everything else in the package (the wavefront datapath, the AGU replay and
the timed simulator) is checked against the functions in this module, so
they are kept deliberately plain: a full-matrix fill with backward pointers,
a linear-memory score-only variant, and a traceback.

Sequences are DNA only and stored 2 bits per character, 16 characters per
32-bit word, first character in the least significant bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property

import numpy as np

ALPHABET = "ACGT"
CHARS_PER_WORD = 16
WORD_BYTES = 4
GAP_CHAR = "-"

# 2^26 characters keeps 32-bit cells safe for |score| <= 16
MAX_SEQUENCE_LENGTH = 1 << 26
DEFAULT_FILL_CAP = 1 << 24

_CODE_OF = {c: i for i, c in enumerate(ALPHABET)}
_CODE_OF.update({c.lower(): i for i, c in enumerate(ALPHABET)})


class InvalidCharacter(ValueError):
    def __init__(self, position: int, char: str):
        super().__init__(f"invalid character {char!r} at position {position}")
        self.position = position
        self.char = char


class InvalidScheme(ValueError):
    pass


class SizeCapExceeded(ValueError):
    pass


class Pointer(IntEnum):
    NONE = 0
    DIAG = 1
    UP = 2
    LEFT = 3


@dataclass(frozen=True)
class ScoringScheme:
    match: int = 1
    mismatch: int = -1
    gap: int = -2

    def __post_init__(self):
        for name in ("match", "mismatch", "gap"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not -(2**31) <= v < 2**31:
                raise InvalidScheme(f"{name} must be a 32-bit integer, got {v!r}")
        if not (self.match > self.mismatch and self.match > self.gap):
            raise InvalidScheme(
                f"match ({self.match}) must exceed mismatch ({self.mismatch}) and gap ({self.gap})"
            )

    @classmethod
    def parse(cls, text: str) -> "ScoringScheme":
        """Build a scheme from ``"match,mismatch,gap"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise InvalidScheme(f"expected match,mismatch,gap, got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            if isinstance(exc, InvalidScheme):
                raise
            raise InvalidScheme(f"non-integer score in {text!r}") from None


DEFAULT_SCHEME = ScoringScheme()


@dataclass(frozen=True)
class Sequence:
    """2-bit packed DNA sequence."""

    words: tuple[int, ...]
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if len(self.words) != packed_words(self.length):
            raise ValueError("word count does not match length")
        tail = self.length % CHARS_PER_WORD
        if tail and self.words[-1] >> (2 * tail):
            raise ValueError("bits beyond length must be zero")

    def __len__(self) -> int:
        return self.length

    @cached_property
    def codes(self) -> np.ndarray:
        """Unpacked codes as a read-only uint8 array."""
        if not self.length:
            out = np.zeros(0, dtype=np.uint8)
        else:
            w = np.asarray(self.words, dtype=np.uint32)
            shifts = np.arange(CHARS_PER_WORD, dtype=np.uint32) * 2
            out = ((w[:, None] >> shifts[None, :]) & 3).astype(np.uint8).ravel()[: self.length]
        out.flags.writeable = False
        return out

    def text(self) -> str:
        return decode_sequence(self)

    @property
    def nbytes(self) -> int:
        return len(self.words) * WORD_BYTES

    @classmethod
    def from_codes(cls, codes) -> "Sequence":
        codes = np.asarray(codes, dtype=np.uint32)
        if codes.size and codes.max() > 3:
            raise ValueError("codes must be in 0..3")
        n = int(codes.size)
        padded = np.zeros(packed_words(n) * CHARS_PER_WORD, dtype=np.uint32)
        padded[:n] = codes
        shifts = np.arange(CHARS_PER_WORD, dtype=np.uint32) * 2
        words = (padded.reshape(-1, CHARS_PER_WORD) << shifts).sum(axis=1, dtype=np.uint64)
        return cls(tuple(int(w) for w in words), n)


def packed_words(length: int) -> int:
    return -(-length // CHARS_PER_WORD)


def encode_sequence(text: str) -> Sequence:
    if len(text) > MAX_SEQUENCE_LENGTH:
        raise ValueError(f"sequence longer than {MAX_SEQUENCE_LENGTH} characters")
    codes = []
    for pos, ch in enumerate(text):
        code = _CODE_OF.get(ch)
        if code is None:
            raise InvalidCharacter(pos, ch)
        codes.append(code)
    return Sequence.from_codes(codes)


def decode_sequence(seq: Sequence) -> str:
    return "".join(ALPHABET[c] for c in seq.codes)


def score_pair(a: int, b: int, scheme: ScoringScheme) -> int:
    return scheme.match if a == b else scheme.mismatch


@dataclass(frozen=True)
class DpMatrix:
    cells: np.ndarray  # (m+1, n+1) int32
    pointers: np.ndarray  # (m+1, n+1) uint8, Pointer values

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    def cell(self, i: int, j: int) -> int:
        return int(self.cells[i, j])

    @property
    def score(self) -> int:
        return int(self.cells[-1, -1])


@dataclass(frozen=True)
class Alignment:
    aligned_a: str
    aligned_b: str
    score: int

    def __str__(self):
        mid = "".join(
            "|" if x == y else (" " if GAP_CHAR in (x, y) else ".")
            for x, y in zip(self.aligned_a, self.aligned_b)
        )
        return f"{self.aligned_a}\n{mid}\n{self.aligned_b}"


def _substitution_rows(b_codes: np.ndarray, scheme: ScoringScheme) -> np.ndarray:
    # one substitution row per possible character of the other sequence
    rows = np.full((4, b_codes.size), scheme.mismatch, dtype=np.int64)
    for c in range(4):
        rows[c, b_codes == c] = scheme.match
    return rows


def _next_row(prev, sub, i, gap, ramp):
    diag = prev[:-1] + sub
    up = prev[1:] + gap
    cur = np.empty_like(prev)
    cur[0] = i * gap
    np.maximum(diag, up, out=cur[1:])
    # left-dependency as a running max: cur[j] - j*gap is non-decreasing
    cur -= ramp
    np.maximum.accumulate(cur, out=cur)
    cur += ramp
    return cur, diag, up


def nw_fill(a: Sequence, b: Sequence, scheme: ScoringScheme = DEFAULT_SCHEME,
            cap: int = DEFAULT_FILL_CAP) -> DpMatrix:
    """Full (m+1)x(n+1) matrix with backward pointers.

    Ties resolve Diag, then Up (gap in ``b``), then Left (gap in ``a``).
    """
    m, n = a.length, b.length
    if m * n > cap:
        raise SizeCapExceeded(f"{m}x{n} matrix exceeds cap of {cap} cells")
    gap = scheme.gap
    ramp = np.arange(n + 1, dtype=np.int64) * gap
    cells = np.empty((m + 1, n + 1), dtype=np.int32)
    ptrs = np.zeros((m + 1, n + 1), dtype=np.uint8)
    cells[0] = ramp
    ptrs[0, 1:] = Pointer.LEFT
    ptrs[1:, 0] = Pointer.UP
    subs = _substitution_rows(b.codes, scheme)
    prev = ramp.copy()
    for i in range(1, m + 1):
        cur, diag, up = _next_row(prev, subs[a.codes[i - 1]], i, gap, ramp)
        cells[i] = cur
        body = cur[1:]
        ptrs[i, 1:] = np.where(body == diag, Pointer.DIAG,
                               np.where(body == up, Pointer.UP, Pointer.LEFT))
        prev = cur
    return DpMatrix(cells, ptrs)


def nw_score(a: Sequence, b: Sequence, scheme: ScoringScheme = DEFAULT_SCHEME) -> int:
    """Corner score of the DP matrix using two rows of storage."""
    if a.length < b.length:
        # symmetric recurrence; iterate over the shorter sequence
        a, b = b, a
    m, n = a.length, b.length
    gap = scheme.gap
    if n == 0:
        return m * gap
    ramp = np.arange(n + 1, dtype=np.int64) * gap
    subs = _substitution_rows(b.codes, scheme)
    prev = ramp.copy()
    codes = a.codes
    for i in range(1, m + 1):
        prev, _, _ = _next_row(prev, subs[codes[i - 1]], i, gap, ramp)
    return int(prev[-1])


def traceback(dp: DpMatrix, a: Sequence, b: Sequence,
              scheme: ScoringScheme = DEFAULT_SCHEME) -> Alignment:
    ta, tb = decode_sequence(a), decode_sequence(b)
    i, j = a.length, b.length
    out_a, out_b = [], []
    ptrs = dp.pointers
    while i > 0 or j > 0:
        ptr = ptrs[i, j]
        if ptr == Pointer.DIAG:
            i, j = i - 1, j - 1
            out_a.append(ta[i])
            out_b.append(tb[j])
        elif ptr == Pointer.UP:
            i -= 1
            out_a.append(ta[i])
            out_b.append(GAP_CHAR)
        else:
            j -= 1
            out_a.append(GAP_CHAR)
            out_b.append(tb[j])
    return Alignment("".join(reversed(out_a)), "".join(reversed(out_b)), dp.score)


def column_score(aligned_a: str, aligned_b: str, scheme: ScoringScheme) -> int:
    """Score an alignment column by column."""
    total = 0
    for x, y in zip(aligned_a, aligned_b, strict=True):
        if x == GAP_CHAR or y == GAP_CHAR:
            total += scheme.gap
        else:
            total += scheme.match if x == y else scheme.mismatch
    return total


def align(a: Sequence, b: Sequence, scheme: ScoringScheme = DEFAULT_SCHEME,
          cap: int = DEFAULT_FILL_CAP) -> Alignment:
    return traceback(nw_fill(a, b, scheme, cap), a, b, scheme)
