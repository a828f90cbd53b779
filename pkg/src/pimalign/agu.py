"""Address generation unit.

A programmed AGU walks every reference sequence of its vault and, for each
pair (query, reference), emits the word requests the PE needs in the order
the PE consumes them:

* at the start of each block, the words holding the block's slice of the
  reference (stationary characters);
* per wavefront step ``k`` of the streamed query, a query word every 16
  characters and, after the first block, the north boundary cell;
* one boundary write per column, once the lowermost unit has produced it,
  except in the last block.

Boundary rows live in a two-row region at ``dp_addr`` whose roles swap every
block, so a block reads the row its predecessor wrote.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .alignment import CHARS_PER_WORD, DEFAULT_SCHEME, ScoringScheme, Sequence, packed_words
from .memory import WORD_BYTES, MemoryImage, MemRequest
from .wavefront import ProcessingElement

META, REF, QUERY, DP = "meta", "ref", "query", "dp"


class AddressOutOfVault(ValueError):
    pass


class OverlappingRegions(ValueError):
    pass


@dataclass(frozen=True)
class PimPacket:
    ref_db_addr: int
    query_addr: int
    metadata_addr: int
    query_len: int
    dp_addr: int


@dataclass(frozen=True)
class DbMetadata:
    lengths: tuple[int, ...]

    @property
    def num_sequences(self) -> int:
        return len(self.lengths)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, off = [], 0
        for n in self.lengths:
            out.append(off)
            off += packed_words(n) * WORD_BYTES
        return tuple(out)

    @property
    def db_bytes(self) -> int:
        return sum(packed_words(n) for n in self.lengths) * WORD_BYTES

    @property
    def nbytes(self) -> int:
        # count word followed by the length array
        return (1 + self.num_sequences) * WORD_BYTES


@dataclass(frozen=True)
class AccessCounts:
    boundary_reads: int = 0
    boundary_writes: int = 0
    stationary_word_reads: int = 0
    streamed_word_reads: int = 0
    metadata_reads: int = 0

    @property
    def reads(self) -> int:
        return (self.boundary_reads + self.stationary_word_reads
                + self.streamed_word_reads + self.metadata_reads)

    @property
    def writes(self) -> int:
        return self.boundary_writes

    @property
    def words(self) -> int:
        return self.reads + self.writes

    @property
    def bytes(self) -> int:
        return self.words * WORD_BYTES

    def __add__(self, other: "AccessCounts") -> "AccessCounts":
        return AccessCounts(
            self.boundary_reads + other.boundary_reads,
            self.boundary_writes + other.boundary_writes,
            self.stationary_word_reads + other.stationary_word_reads,
            self.streamed_word_reads + other.streamed_word_reads,
            self.metadata_reads + other.metadata_reads,
        )


def slice_words(start: int, stop: int) -> int:
    """Words spanned by characters ``[start, stop)`` of a word-aligned sequence."""
    if stop <= start:
        return 0
    return (stop - 1) // CHARS_PER_WORD - start // CHARS_PER_WORD + 1


def block_access_counts(n: int, m: int, p: int, block: int, seq_buffer: bool = False) -> AccessCounts:
    num_blocks = -(-n // p)
    base = block * p
    return AccessCounts(
        boundary_reads=m if block > 0 else 0,
        boundary_writes=m if block < num_blocks - 1 else 0,
        stationary_word_reads=slice_words(base, min(base + p, n)),
        streamed_word_reads=packed_words(m) if (block == 0 or not seq_buffer) else 0,
    )


def expected_access_counts(n: int, m: int, p: int, seq_buffer: bool = False) -> AccessCounts:
    """Closed-form word traffic of one pairwise alignment (metadata excluded)."""
    if p < 1:
        raise ValueError("block width must be at least 1")
    if n <= 0 or m <= 0:
        return AccessCounts()
    num_blocks = -(-n // p)
    boundary = (num_blocks - 1) * m
    stationary = sum(slice_words(b * p, min(b * p + p, n)) for b in range(num_blocks))
    streamed = packed_words(m) * (1 if seq_buffer else num_blocks)
    return AccessCounts(boundary, boundary, stationary, streamed)


@dataclass(frozen=True)
class VaultLayout:
    packet: PimPacket
    meta: DbMetadata
    lo: int
    hi: int

    @property
    def used_bytes(self) -> int:
        return self.packet.dp_addr + 2 * self.packet.query_len * WORD_BYTES - self.lo

    def regions(self) -> dict[str, tuple[int, int]]:
        p = self.packet
        return {
            META: (p.metadata_addr, p.metadata_addr + self.meta.nbytes),
            REF: (p.ref_db_addr, p.ref_db_addr + self.meta.db_bytes),
            QUERY: (p.query_addr, p.query_addr + packed_words(p.query_len) * WORD_BYTES),
            DP: (p.dp_addr, p.dp_addr + 2 * p.query_len * WORD_BYTES),
        }


def layout_vault(lo: int, hi: int, lengths, query_len: int) -> VaultLayout:
    """Metadata, packed references, query copy and the two-row DP region, back to back."""
    meta = DbMetadata(tuple(int(n) for n in lengths))
    metadata_addr = lo
    ref_db_addr = metadata_addr + meta.nbytes
    query_addr = ref_db_addr + meta.db_bytes
    dp_addr = query_addr + packed_words(query_len) * WORD_BYTES
    packet = PimPacket(ref_db_addr, query_addr, metadata_addr, query_len, dp_addr)
    return VaultLayout(packet, meta, lo, hi)


def write_vault_image(image: MemoryImage, layout: VaultLayout, refs, query: Sequence) -> None:
    p = layout.packet
    image.load_words(p.metadata_addr, (layout.meta.num_sequences, *layout.meta.lengths))
    for off, ref in zip(layout.meta.offsets, refs):
        image.load_words(p.ref_db_addr + off, ref.words)
    image.load_words(p.query_addr, query.words)


def _check_packet(packet: PimPacket, meta: DbMetadata, vault_range) -> None:
    regions = {
        META: (packet.metadata_addr, packet.metadata_addr + meta.nbytes),
        REF: (packet.ref_db_addr, packet.ref_db_addr + meta.db_bytes),
        QUERY: (packet.query_addr, packet.query_addr + packed_words(packet.query_len) * WORD_BYTES),
        DP: (packet.dp_addr, packet.dp_addr + 2 * packet.query_len * WORD_BYTES),
    }
    for name, (lo, hi) in regions.items():
        if lo % WORD_BYTES:
            raise AddressOutOfVault(f"{name} region at {lo:#x} is not word aligned")
        if vault_range is not None and hi > lo and not (vault_range[0] <= lo and hi <= vault_range[1]):
            raise AddressOutOfVault(f"{name} region [{lo:#x}, {hi:#x}) outside vault {vault_range}")
    spans = sorted((lo, hi, name) for name, (lo, hi) in regions.items() if hi > lo)
    for (lo1, hi1, n1), (lo2, hi2, n2) in zip(spans, spans[1:]):
        if lo2 < hi1:
            raise OverlappingRegions(f"{n1} and {n2} regions overlap")


class AguMachine:
    """Programmed AGU; :meth:`next_request` yields the request stream, then ``None``."""

    def __init__(self, packet: PimPacket, meta: DbMetadata, p: int = 16,
                 vault_range: tuple[int, int] | None = None, seq_buffer: bool = False):
        if p < 1:
            raise ValueError("block width must be at least 1")
        _check_packet(packet, meta, vault_range)
        self.packet = packet
        self.meta = meta
        self.p = p
        self.seq_buffer = seq_buffer
        self._tag = 0
        self._stream = self._program_order()
        self.done = meta.num_sequences == 0

    @property
    def pending_alignments(self) -> int:
        return self.meta.num_sequences

    def next_request(self) -> MemRequest | None:
        if self.done:
            return None
        req = next(self._stream, None)
        if req is None:
            self.done = True
            return None
        req.tag = self._tag
        self._tag += 1
        return req

    def __iter__(self):
        while (req := self.next_request()) is not None:
            yield req

    def boundary_addr(self, block: int, column: int) -> int:
        """Address of a boundary cell (column 1-based) in the row written by ``block``."""
        m = self.packet.query_len
        return self.packet.dp_addr + WORD_BYTES * ((block % 2) * m + column - 1)

    def _program_order(self):
        pk, p = self.packet, self.p
        m = pk.query_len
        yield MemRequest("R", pk.metadata_addr, purpose=META)
        for i in range(self.meta.num_sequences):
            yield MemRequest("R", pk.metadata_addr + WORD_BYTES * (1 + i), purpose=META, pair=i)
        for i, (n, off) in enumerate(zip(self.meta.lengths, self.meta.offsets)):
            if n == 0 or m == 0:
                continue
            ref_addr = pk.ref_db_addr + off
            num_blocks = -(-n // p)
            for b in range(num_blocks):
                base = b * p
                stop = min(base + p, n)
                for w in range(base // CHARS_PER_WORD, (stop - 1) // CHARS_PER_WORD + 1):
                    yield MemRequest("R", ref_addr + WORD_BYTES * w, purpose=REF, pair=i, block=b)
                fetch_query = b == 0 or not self.seq_buffer
                last = b == num_blocks - 1
                for k in range(m):
                    if fetch_query and k % CHARS_PER_WORD == 0:
                        yield MemRequest("R", pk.query_addr + WORD_BYTES * (k // CHARS_PER_WORD),
                                         purpose=QUERY, pair=i, block=b, step=k)
                    if b > 0:
                        yield MemRequest("R", self.boundary_addr(b - 1, k + 1), purpose=DP,
                                         pair=i, block=b, step=k)
                    if not last and k >= p - 1:
                        col = k - p + 2
                        yield MemRequest("W", self.boundary_addr(b, col), purpose=DP,
                                         pair=i, block=b, step=k)
                if not last:
                    for k in range(max(m, p - 1), m + p - 1):
                        col = k - p + 2
                        yield MemRequest("W", self.boundary_addr(b, col), purpose=DP,
                                         pair=i, block=b, step=k)


def program(packet: PimPacket, meta: DbMetadata, p: int = 16,
            vault_range: tuple[int, int] | None = None, seq_buffer: bool = False) -> AguMachine:
    return AguMachine(packet, meta, p, vault_range, seq_buffer)


def tally(requests) -> AccessCounts:
    counts = dict(boundary_reads=0, boundary_writes=0, stationary_word_reads=0,
                  streamed_word_reads=0, metadata_reads=0)
    key = {("R", DP): "boundary_reads", ("W", DP): "boundary_writes",
           ("R", REF): "stationary_word_reads", ("R", QUERY): "streamed_word_reads",
           ("R", META): "metadata_reads"}
    for req in requests:
        counts[key[(req.kind, req.purpose)]] += 1
    return AccessCounts(**counts)


def write_trace(requests, path) -> int:
    """Write one request per line: ``<tag> <R|W> <hex addr> <size> [hex payload]``."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for req in requests:
            fh.write(req.trace_line() + "\n")
            count += 1
    return count


def _unpack(word: int, count: int) -> list[int]:
    return [(word >> (2 * k)) & 3 for k in range(count)]


@dataclass
class PeDriver:
    """Feeds returned words into a :class:`ProcessingElement` in stream order.

    The driver mirrors the AGU schedule: it knows how many words each block
    needs, queues streamed characters and north values per step, and steps
    the datapath once a step's inputs are present. Outputs of the lowermost
    unit are held, keyed by ``(pair, block, column)``, until the matching
    boundary write collects them.
    """

    lengths: tuple[int, ...]
    m: int
    p: int
    scheme: ScoringScheme = DEFAULT_SCHEME
    seq_buffer: bool = False

    def __post_init__(self):
        self.pe = ProcessingElement(self.p, self.scheme)
        self.pairs = deque(i for i, n in enumerate(self.lengths) if n > 0 and self.m > 0)
        self.outputs: dict[tuple[int, int, int], int] = {}
        self.busy_steps = 0
        self.scores = [None if (n > 0 and self.m > 0) else (n + self.m) * self.scheme.gap
                       for n in self.lengths]
        self.pair: int | None = None
        self.block = 0
        self._kept: list[int] = []
        self._start_pair()

    def _start_pair(self):
        if not self.pairs:
            self.pair = None
            return
        self.pair = self.pairs.popleft()
        self._kept = []
        self._start_block(0)

    def _start_block(self, block: int):
        n = self.lengths[self.pair]
        self.block = block
        self._num_blocks = -(-n // self.p)
        base = block * self.p
        self._rows = min(self.p, n - base)
        self._words_needed = slice_words(base, base + self._rows)
        self._stationary: list[int] = []
        self._started = False
        self.t = 0
        self._norths: deque[int] = deque()
        self._query_words = 0
        if self.seq_buffer and block > 0:
            self._chars = deque(self._kept)
        else:
            self._chars = deque()

    @property
    def finished(self) -> bool:
        return self.pair is None

    def feed(self, req: MemRequest, data: int) -> None:
        if req.purpose == META:
            return
        if req.purpose == REF:
            self._stationary.append(data)
            if len(self._stationary) == self._words_needed:
                base = self.block * self.p
                chars = []
                for w in self._stationary:
                    chars.extend(_unpack(w, CHARS_PER_WORD))
                lo = base % CHARS_PER_WORD
                self.pe.start_block(base, chars[lo:lo + self._rows], self.m)
                self._started = True
        elif req.purpose == QUERY:
            left = self.m - self._query_words * CHARS_PER_WORD
            self._query_words += 1
            chars = _unpack(data, min(CHARS_PER_WORD, left))
            self._chars.extend(chars)
            if self.seq_buffer and self.block == 0:
                self._kept.extend(chars)
        else:
            v = data & 0xFFFFFFFF
            self._norths.append(v - (1 << 32) if v & 0x80000000 else v)

    def can_step(self) -> bool:
        if self.pair is None or not self._started:
            return False
        if self.t >= self.m:
            return True
        return bool(self._chars) and (self.block == 0 or bool(self._norths))

    def step(self) -> None:
        t = self.t
        if t < self.m:
            a = self._chars.popleft()
            north = self._norths.popleft() if self.block > 0 else (t + 1) * self.scheme.gap
            res = self.pe.step(a, north)
        else:
            res = self.pe.step()
        self.busy_steps += 1
        self.t = t + 1
        last = self.block == self._num_blocks - 1
        if res is not None:
            if last:
                if res[0] == self.m:
                    self.scores[self.pair] = res[1]
            else:
                self.outputs[(self.pair, self.block, res[0])] = res[1]
        if self.t == self.m + self.p - 1:
            if last:
                self._start_pair()
            else:
                self._start_block(self.block + 1)

    def take_output(self, req: MemRequest) -> int | None:
        col = req.step - self.p + 2
        return self.outputs.pop((req.pair, req.block, col), None)


def replay(machine: AguMachine, image: MemoryImage,
           scheme: ScoringScheme = DEFAULT_SCHEME) -> tuple[list, list[MemRequest]]:
    """Run the AGU stream against a flat memory image, untimed.

    Reads return image contents; writes carry the PE's output. Returns the
    per-reference scores and the completed request list (payloads filled).
    """
    driver = PeDriver(machine.meta.lengths, machine.packet.query_len, machine.p, scheme,
                      machine.seq_buffer)
    done = []
    for req in machine:
        if req.kind == "R":
            driver.feed(req, image.read(req.addr))
        else:
            value = driver.take_output(req)
            if value is None:
                raise RuntimeError(f"boundary write {req.tag} issued before its value was computed")
            req.payload = value
            image.write(req.addr, value)
        done.append(req)
        while driver.can_step():
            driver.step()
    if not driver.finished:
        raise RuntimeError("request stream ended before the datapath finished")
    return driver.scores, done
