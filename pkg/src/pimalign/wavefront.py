"""Block-based anti-diagonal datapath of the accelerator PE.

The DP matrix is cut horizontally into blocks of ``p`` rows of the blocked
(stationary) sequence. Inside a block, functional unit ``f`` owns row
``base + f + 1`` and the block sweeps the streamed sequence one anti-diagonal
per step, so a block takes ``m + p - 1`` steps. Only the block's lowermost
row leaves the PE; it becomes the north input of the next block.

Register naming follows the hardware: ``ra1`` holds the diagonal produced on
the previous step, ``ra2`` the one before it.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .alignment import DEFAULT_SCHEME, ScoringScheme, Sequence

# stationary code for padded rows; never equal to a real character
PAD_CHAR = 4


class ZeroWidth(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class WavefrontViolation(AssertionError):
    pass


@dataclass(frozen=True)
class BlockPlan:
    p: int
    n: int
    m: int
    num_blocks: int
    pad: int

    def block_rows(self, block_idx: int) -> tuple[int, int]:
        """(first row index, number of real rows) of a block, rows 0-based."""
        base = block_idx * self.p
        return base, min(self.p, self.n - base)

    def steps(self) -> int:
        return self.m + self.p - 1 if self.m else 0


def plan_blocks(n: int, p: int, m: int = 0) -> BlockPlan:
    if p <= 0:
        raise ZeroWidth("block width must be at least 1")
    if n < 0 or m < 0:
        raise ValueError("lengths must be non-negative")
    num_blocks = -(-n // p)
    pad = num_blocks * p - n
    return BlockPlan(p=p, n=n, m=m, num_blocks=num_blocks, pad=pad)


@dataclass
class AccessTrace:
    boundary_reads: int = 0
    boundary_writes: int = 0
    blocked_seq_char_reads: int = 0
    streamed_seq_char_reads: int = 0
    cell_updates: int = 0

    def __add__(self, other: "AccessTrace") -> "AccessTrace":
        return AccessTrace(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __iadd__(self, other: "AccessTrace") -> "AccessTrace":
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self


class ProcessingElement:
    """p functional units plus the RA1/RA2 register arrays.

    The PE is driven one wavefront step at a time by :meth:`step`; the caller
    supplies the streamed character and the fetched north value for the
    uppermost unit, exactly the two values the AGU fetches per step.
    """

    def __init__(self, p: int, scheme: ScoringScheme = DEFAULT_SCHEME, check_order: bool = False):
        if p <= 0:
            raise ZeroWidth("block width must be at least 1")
        self.p = p
        self.scheme = scheme
        self.ra1 = [0] * p
        self.ra2 = [0] * p
        self.stationary_chars = [PAD_CHAR] * p
        self.a_pipe = [PAD_CHAR] * p
        self.a_reg = PAD_CHAR
        self.north_reg = 0
        self.base = 0
        self.real_rows = 0
        self.m = 0
        self.t = 0
        self.check_order = check_order
        self.computed: dict[tuple[int, int], int] = {}
        self._clock = 0

    def start_block(self, base: int, stationary: list[int], m: int) -> None:
        """Latch a block's stationary characters; ``base`` is its first row (0-based)."""
        p = self.p
        self.base = base
        self.real_rows = len(stationary)
        self.stationary_chars = list(stationary) + [PAD_CHAR] * (p - len(stationary))
        self.m = m
        self.t = 0
        self.ra1 = [0] * p
        self.ra2 = [0] * p
        self.a_pipe = [PAD_CHAR] * p
        # north-west of the first column is the boundary row's column 0
        self.north_reg = base * self.scheme.gap

    def step(self, a_char: int | None = None, north: int | None = None):
        """Advance one anti-diagonal.

        Returns ``(column, value)`` when the lowermost real row of the block
        produced a cell on this step, else ``None``. Columns are 1-based.
        """
        p, m, t = self.p, self.m, self.t
        match, mismatch, gap = self.scheme.match, self.scheme.mismatch, self.scheme.gap
        ra1, ra2 = self.ra1, self.ra2
        pipe = self.a_pipe
        # systolic shift of the streamed character
        pipe[1:] = pipe[:-1]
        if t < m:
            if a_char is None or north is None:
                raise DimensionMismatch(f"step {t} needs a streamed character and a north value")
            pipe[0] = a_char
        else:
            pipe[0] = PAD_CHAR
        lo = max(0, t - m + 1)
        hi = min(p - 1, t)
        new = ra1[:]
        base = self.base
        stationary = self.stationary_chars
        f = lo
        if f == 0:
            # uppermost unit takes north from memory, north-west from its last fetch
            best = self.north_reg + (match if stationary[0] == pipe[0] else mismatch)
            up = north + gap
            if up > best:
                best = up
            left = (ra1[0] if t > 0 else (base + 1) * gap) + gap
            if left > best:
                best = left
            new[0] = best
            f = 1
        for f in range(f, hi + 1):
            j = t - f + 1
            if j > 1:
                best = ra2[f - 1] + (match if stationary[f] == pipe[f] else mismatch)
                left = ra1[f] + gap
            else:
                best = (base + f) * gap + (match if stationary[f] == pipe[f] else mismatch)
                left = (base + f + 1) * gap + gap
            up = ra1[f - 1] + gap
            if up > best:
                best = up
            if left > best:
                best = left
            new[f] = best
        if self.check_order:
            for f in range(lo, min(hi, self.real_rows - 1) + 1):
                self._record(base + f + 1, t - f + 1)
        if t < m:
            self.north_reg = north
        self.ra2 = ra1
        self.ra1 = new
        self.t = t + 1
        last = self.real_rows - 1
        j_out = t - last + 1
        if last >= 0 and lo <= last <= hi:
            return j_out, new[last]
        return None

    def _record(self, row: int, j: int) -> None:
        computed = self.computed
        for dep in ((row - 1, j), (row, j - 1), (row - 1, j - 1)):
            r, c = dep
            if r == 0 or c == 0:
                continue
            if dep not in computed:
                raise WavefrontViolation(f"cell {(row, j)} computed before its dependency {dep}")
        self._clock += 1
        computed[(row, j)] = self._clock


def gap_row(m: int, scheme: ScoringScheme) -> list[int]:
    """Analytic row 0 of the DP matrix, columns 1..m."""
    return [j * scheme.gap for j in range(1, m + 1)]


def block_traffic(plan: BlockPlan, block_idx: int) -> AccessTrace:
    _, rows = plan.block_rows(block_idx)
    last = block_idx == plan.num_blocks - 1
    return AccessTrace(
        boundary_reads=plan.m if block_idx > 0 else 0,
        boundary_writes=0 if last else plan.m,
        blocked_seq_char_reads=rows,
        streamed_seq_char_reads=plan.m,
        cell_updates=rows * plan.m,
    )


def run_block(plan: BlockPlan, block_idx: int, blocked_seq: Sequence, streamed_seq: Sequence,
              scheme: ScoringScheme, boundary_in: list[int],
              pe: ProcessingElement | None = None) -> tuple[list[int], AccessTrace]:
    """Process one block; returns its lowermost real row and the traffic it needs."""
    m = plan.m
    if len(boundary_in) != m or streamed_seq.length != m or blocked_seq.length != plan.n:
        raise DimensionMismatch(
            f"boundary row of {len(boundary_in)} cells, streamed length {streamed_seq.length}, plan m={m}"
        )
    if not 0 <= block_idx < plan.num_blocks:
        raise IndexError(f"block {block_idx} outside 0..{plan.num_blocks - 1}")
    if pe is None:
        pe = ProcessingElement(plan.p, scheme)
    base, rows = plan.block_rows(block_idx)
    pe.start_block(base, [int(c) for c in blocked_seq.codes[base:base + rows]], m)
    stream = streamed_seq.codes.tolist()
    out = [0] * m
    for t in range(plan.steps()):
        if t < m:
            res = pe.step(stream[t], boundary_in[t])
        else:
            res = pe.step()
        if res is not None:
            out[res[0] - 1] = res[1]
    return out, block_traffic(plan, block_idx)


def wavefront_score(query: Sequence, reference: Sequence, scheme: ScoringScheme = DEFAULT_SCHEME,
                    p: int = 16, stationary: str = "reference",
                    check_order: bool = False) -> tuple[int, AccessTrace]:
    """Score a pair with the block-serial wavefront dataflow.

    By default the reference is blocked (stationary) and the query streamed;
    ``stationary="query"`` swaps the roles.
    """
    if stationary == "reference":
        blocked, streamed = reference, query
    elif stationary == "query":
        blocked, streamed = query, reference
    else:
        raise ValueError(f"stationary must be 'reference' or 'query', not {stationary!r}")
    n, m = blocked.length, streamed.length
    plan = plan_blocks(n, p, m)
    trace = AccessTrace()
    if n == 0 or m == 0:
        return (n + m) * scheme.gap, trace
    pe = ProcessingElement(p, scheme, check_order=check_order)
    boundary = gap_row(m, scheme)
    for b in range(plan.num_blocks):
        boundary, delta = run_block(plan, b, blocked, streamed, scheme, boundary, pe)
        trace += delta
    return boundary[-1], trace
