"""Independent reference computations used by the tests.

Nothing here imports the package's scoring code: the brute-force enumerator
walks every gapped alignment, the naive filler is a dict-based textbook
recurrence, and the traffic formulas are written straight from the stated
closed forms.
"""

from __future__ import annotations

import math
import random
from functools import lru_cache

ALPHABET = "ACGT"


def brute_force_score(a: str, b: str, match: int, mismatch: int, gap: int) -> int:
    """Maximum column-score sum over every gapped alignment of a and b."""

    @lru_cache(maxsize=None)
    def best(i: int, j: int) -> int:
        # enumerate the last column of every alignment of a[:i], b[:j]
        if i == 0 and j == 0:
            return 0
        options = []
        if i > 0 and j > 0:
            options.append(best(i - 1, j - 1) + (match if a[i - 1] == b[j - 1] else mismatch))
        if i > 0:
            options.append(best(i - 1, j) + gap)
        if j > 0:
            options.append(best(i, j - 1) + gap)
        return max(options)

    return best(len(a), len(b))


def enumerate_alignments(a: str, b: str):
    """Yield every gapped alignment (pairs of equal-length strings)."""
    if not a and not b:
        yield "", ""
        return
    if a and b:
        for x, y in enumerate_alignments(a[:-1], b[:-1]):
            yield x + a[-1], y + b[-1]
    if a:
        for x, y in enumerate_alignments(a[:-1], b):
            yield x + a[-1], y + "-"
    if b:
        for x, y in enumerate_alignments(a, b[:-1]):
            yield x + "-", y + b[-1]


def exhaustive_score(a: str, b: str, match: int, mismatch: int, gap: int) -> int:
    best = None
    for x, y in enumerate_alignments(a, b):
        s = sum(gap if "-" in (p, q) else (match if p == q else mismatch) for p, q in zip(x, y))
        best = s if best is None else max(best, s)
    return best


def naive_matrix(a: str, b: str, match: int, mismatch: int, gap: int) -> list[list[int]]:
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dp[i][0] = i * gap
    for j in range(n + 1):
        dp[0][j] = j * gap
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            dp[i][j] = max(dp[i - 1][j - 1] + (match if a[i - 1] == b[j - 1] else mismatch),
                           dp[i - 1][j] + gap, dp[i][j - 1] + gap)
    return dp


def boundary_traffic(n: int, m: int, p: int) -> int:
    """Boundary reads (= writes) of one alignment: (ceil(n/p) - 1) * m."""
    if n == 0 or m == 0:
        return 0
    return (math.ceil(n / p) - 1) * m


def stationary_words(n: int, p: int) -> int:
    """Words touched by each p-character block slice, block by block."""
    total = 0
    for start in range(0, n, p):
        stop = min(start + p, n)
        total += len({k // 16 for k in range(start, stop)})
    return total


def streamed_words(n: int, m: int, p: int, seq_buffer: bool) -> int:
    if n == 0 or m == 0:
        return 0
    return math.ceil(m / 16) * (1 if seq_buffer else math.ceil(n / p))


def random_dna(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(n))


def random_scheme(rng: random.Random) -> tuple[int, int, int]:
    match = rng.randint(1, 6)
    return match, rng.randint(-6, match - 1), rng.randint(-8, match - 1)
