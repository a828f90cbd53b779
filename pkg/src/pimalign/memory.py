"""Timed model of the stacked memory.

Each vault serves requests out of its queues under a per-cycle byte budget
(token bucket) and completes them after a fixed access latency, optionally
shortened on an open-row hit. Completions retire in service order, which is
what lets the AGU match returned data to datapath ports without tags.

The processor-side placement is modelled by :class:`ExternalLink`: one byte
budget (the effective off-chip bandwidth) shared round-robin by every PE
port, in front of an optional byte-capacity buffer.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, fields

WORD_BYTES = 4
GB = 1e9


class ConfigError(ValueError):
    pass


class AddressError(ValueError):
    pass


@dataclass(frozen=True)
class MemConfig:
    num_vaults: int = 32
    layers: int = 4
    layer_size: int = 1 << 30
    internal_bw_per_vault: float = 10 * GB
    external_bw_raw: float = 240 * GB
    packetization_overhead: float = 0.27
    clock_hz: float = 1.25e9
    access_latency: int = 50
    link_latency: int = 0
    row_buffer_size: int = 256
    row_model_enabled: bool = False
    row_hit_factor: float = 0.4
    queue_depth: int = 16
    max_outstanding: int = 512
    buffer_hit_latency: int = 1

    def __post_init__(self):
        positive = ("num_vaults", "layers", "layer_size", "internal_bw_per_vault", "external_bw_raw",
                    "clock_hz", "row_buffer_size", "queue_depth", "max_outstanding")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"mem.{name} must be positive")
        for name in ("access_latency", "link_latency", "buffer_hit_latency"):
            if getattr(self, name) < 0:
                raise ConfigError(f"mem.{name} must be non-negative")
        if not 0 <= self.packetization_overhead < 1:
            raise ConfigError("mem.packetization_overhead must be in [0, 1)")
        if not 0 < self.row_hit_factor <= 1:
            raise ConfigError("mem.row_hit_factor must be in (0, 1]")

    @property
    def capacity(self) -> int:
        return self.layers * self.layer_size

    @property
    def vault_bytes(self) -> int:
        return self.capacity // self.num_vaults

    @property
    def internal_bw_total(self) -> float:
        return self.internal_bw_per_vault * self.num_vaults

    def vault_range(self, vault: int) -> tuple[int, int]:
        lo = vault * self.vault_bytes
        return lo, lo + self.vault_bytes

    def vault_of(self, addr: int) -> int:
        return addr // self.vault_bytes


def external_effective_bw(config: MemConfig) -> float:
    return config.external_bw_raw * (1.0 - config.packetization_overhead)


class RequestClass(enum.Enum):
    AGU = "agu"
    REGULAR = "regular"
    PIM_PROGRAMMING = "pim"


class Submit(enum.Enum):
    ACCEPTED = "accepted"
    BACKPRESSURE = "backpressure"


@dataclass(slots=True)
class MemRequest:
    kind: str  # "R" or "W"
    addr: int
    size: int = WORD_BYTES
    payload: int | None = None
    tag: int = 0
    # AGU bookkeeping: what the word is and where in the schedule it belongs
    purpose: str = ""
    pair: int = -1
    block: int = -1
    step: int = -1
    hit: bool = False  # served by the processor-side buffer

    def __post_init__(self):
        if self.kind not in ("R", "W"):
            raise ValueError(f"kind must be 'R' or 'W', not {self.kind!r}")
        if self.addr < 0 or self.addr % WORD_BYTES or self.size != WORD_BYTES:
            raise AddressError(f"request at {self.addr:#x} size {self.size} is not one aligned word")

    def trace_line(self) -> str:
        line = f"{self.tag} {self.kind} {self.addr:#x} {self.size}"
        if self.kind == "W":
            line += f" {(self.payload or 0) & 0xFFFFFFFF:#x}"
        return line


@dataclass(slots=True)
class MemResponse:
    request: MemRequest
    data: int | None
    cls: RequestClass
    port: int
    ready: int = 0

    @property
    def tag(self) -> int:
        return self.request.tag


class MemoryImage:
    """Sparse word-addressed backing store (values are 32-bit two's complement)."""

    def __init__(self, lo: int = 0, hi: int | None = None):
        self.lo = lo
        self.hi = hi
        self.words: dict[int, int] = {}

    def _check(self, addr: int) -> None:
        if addr % WORD_BYTES or addr < self.lo or (self.hi is not None and addr >= self.hi):
            raise AddressError(f"address {addr:#x} outside image or unaligned")

    def read(self, addr: int) -> int:
        self._check(addr)
        return self.words.get(addr, 0)

    def write(self, addr: int, value: int) -> None:
        self._check(addr)
        self.words[addr] = value & 0xFFFFFFFF

    def read_signed(self, addr: int) -> int:
        v = self.read(addr)
        return v - (1 << 32) if v & 0x80000000 else v

    def load_words(self, addr: int, values) -> None:
        for i, v in enumerate(values):
            self.write(addr + WORD_BYTES * i, int(v))


class BoundedQueue(deque):
    def __init__(self, depth: int):
        super().__init__()
        self.depth = depth

    @property
    def full(self) -> bool:
        return len(self) >= self.depth


class Port:
    """Queues between one AGU/PE pair and the memory it talks to."""

    def __init__(self, depth: int):
        self.adr_queue = BoundedQueue(depth)
        self.store_queue = BoundedQueue(depth)
        self.load_queue = BoundedQueue(depth)
        self.inflight: deque[MemResponse] = deque()
        self.outstanding_reads = 0


@dataclass
class ChannelStats:
    bytes_served: int = 0
    reads: int = 0
    writes: int = 0
    buffer_hits: int = 0
    served_by_class: dict = field(default_factory=dict)


class _Channel:
    """Shared machinery: token bucket, arbitration, in-order retirement."""

    def __init__(self, config: MemConfig, bytes_per_second: float, latency: int,
                 num_ports: int, image: MemoryImage):
        self.config = config
        self.bytes_per_cycle = bytes_per_second / config.clock_hz
        self.latency = latency
        self.ports = [Port(config.queue_depth) for _ in range(num_ports)]
        self.memory_queue = BoundedQueue(config.queue_depth)
        self.regular_store = BoundedQueue(config.queue_depth)
        self.pim_queue = BoundedQueue(config.queue_depth)
        self.regular_inflight: deque[MemResponse] = deque()
        self.image = image
        self.cycle = 0
        self.credit = 0.0
        self.open_row: int | None = None
        self.stats = ChannelStats()
        self._rr = 0

    # submission ----------------------------------------------------------
    def submit(self, request: MemRequest, cls: RequestClass, port: int = 0) -> Submit:
        if cls is RequestClass.PIM_PROGRAMMING:
            if self.pim_queue.full:
                return Submit.BACKPRESSURE
            self.pim_queue.append(request)
            return Submit.ACCEPTED
        if cls is RequestClass.REGULAR:
            if self.memory_queue.full or (request.kind == "W" and self.regular_store.full):
                return Submit.BACKPRESSURE
            self._check_addr(request.addr)
            self.memory_queue.append(request)
            if request.kind == "W":
                self.regular_store.append(request.payload)
            return Submit.ACCEPTED
        q = self.ports[port]
        if q.adr_queue.full or (request.kind == "W" and q.store_queue.full):
            return Submit.BACKPRESSURE
        if request.kind == "R" and q.outstanding_reads >= self.config.max_outstanding:
            return Submit.BACKPRESSURE
        self._check_addr(request.addr)
        if request.kind == "R":
            q.outstanding_reads += 1
        # hits keep their queue slot so responses stay in order
        request.hit = self._filter(request)
        q.adr_queue.append(request)
        if request.kind == "W":
            q.store_queue.append(request.payload)
        return Submit.ACCEPTED

    def can_accept(self, kind: str, port: int = 0) -> bool:
        q = self.ports[port]
        if q.adr_queue.full or (kind == "W" and q.store_queue.full):
            return False
        return kind == "W" or q.outstanding_reads < self.config.max_outstanding

    def _check_addr(self, addr: int) -> None:
        self.image._check(addr)

    def _filter(self, request: MemRequest) -> bool:
        return False

    # service -------------------------------------------------------------
    def _access_latency(self, addr: int) -> int:
        lat = self.latency
        if self.config.row_model_enabled:
            row = addr // self.config.row_buffer_size
            if row == self.open_row:
                lat = max(1, round(lat * self.config.row_hit_factor))
            self.open_row = row
        return lat

    def _serve(self, request: MemRequest, payload, cls: RequestClass, port: int) -> MemResponse:
        if request.hit:
            if request.kind == "W":
                self.image.write(request.addr, payload)
                data = None
            else:
                data = self.image.read(request.addr)
            self.stats.buffer_hits += 1
            return MemResponse(request, data, cls, port, self.cycle + self.config.buffer_hit_latency)
        if request.kind == "W":
            self.image.write(request.addr, payload)
            data = None
            self.stats.writes += 1
        else:
            data = self.image.read(request.addr)
            self.stats.reads += 1
        self.stats.bytes_served += request.size
        self.stats.served_by_class[cls.value] = self.stats.served_by_class.get(cls.value, 0) + request.size
        return MemResponse(request, data, cls, port, self.cycle + self._access_latency(request.addr))

    def _next_agu_port(self):
        n = len(self.ports)
        for k in range(n):
            idx = (self._rr + k) % n
            if self.ports[idx].adr_queue:
                self._rr = (idx + 1) % n
                return idx
        return None

    def tick(self) -> list[MemResponse]:
        """One memory-clock cycle: serve within budget, then retire completions."""
        self.cycle += 1
        bpc = self.bytes_per_cycle
        self.credit += bpc
        while True:
            idx = self._next_agu_port()
            if idx is not None:
                q = self.ports[idx]
                head = q.adr_queue[0]
                cost = 0 if head.hit else head.size
                if self.credit < cost:
                    break
                req = q.adr_queue.popleft()
                payload = q.store_queue.popleft() if req.kind == "W" else None
                self.credit -= cost
                q.inflight.append(self._serve(req, payload, RequestClass.AGU, idx))
                continue
            if self.memory_queue:
                req = self.memory_queue[0]
                if self.credit < req.size:
                    break
                self.memory_queue.popleft()
                payload = self.regular_store.popleft() if req.kind == "W" else None
                self.credit -= req.size
                self.regular_inflight.append(self._serve(req, payload, RequestClass.REGULAR, -1))
                continue
            break
        if not self._has_waiting():
            # idle cycles do not bank bandwidth
            self.credit = min(self.credit, bpc)
        return self._retire()

    def _has_waiting(self) -> bool:
        return bool(self.memory_queue) or any(q.adr_queue for q in self.ports)

    def _retire(self) -> list[MemResponse]:
        done = []
        now = self.cycle
        for q in self.ports:
            inflight = q.inflight
            while inflight and inflight[0].ready <= now:
                resp = inflight[0]
                if resp.request.kind == "R":
                    if q.load_queue.full:
                        break
                    q.load_queue.append(resp)
                    q.outstanding_reads -= 1
                inflight.popleft()
                done.append(resp)
        while self.regular_inflight and self.regular_inflight[0].ready <= now:
            done.append(self.regular_inflight.popleft())
        return done

    def idle(self) -> bool:
        return not (self._has_waiting() or self.regular_inflight
                    or any(q.inflight or q.load_queue for q in self.ports))


class VaultState(_Channel):
    """One vault's controller with a single AGU port (memory-side placement)."""

    def __init__(self, config: MemConfig, vault_id: int, image: MemoryImage | None = None):
        lo, hi = config.vault_range(vault_id)
        super().__init__(config, config.internal_bw_per_vault, config.access_latency, 1,
                         image if image is not None else MemoryImage(lo, hi))
        self.vault_id = vault_id

    @property
    def adr_queue(self):
        return self.ports[0].adr_queue

    @property
    def store_queue(self):
        return self.ports[0].store_queue

    @property
    def load_queue(self):
        return self.ports[0].load_queue


class ExternalLink(_Channel):
    """Off-chip path shared by processor-side PEs, with a byte-capacity buffer.

    Addresses in ``cached_ranges`` are buffer-resident once touched: reads
    hit after the first miss and writes are absorbed. Hits cost no link
    bandwidth but still retire in order with the port's other requests.
    """

    def __init__(self, config: MemConfig, num_ports: int, image: MemoryImage,
                 bytes_per_second: float | None = None, cached_ranges=()):
        bw = external_effective_bw(config) if bytes_per_second is None else bytes_per_second
        super().__init__(config, bw, config.access_latency + config.link_latency, num_ports, image)
        self.cached_ranges = list(cached_ranges)
        self.resident: set[int] = set()

    def _cacheable(self, addr: int) -> bool:
        return any(lo <= addr < hi for lo, hi in self.cached_ranges)

    def _filter(self, request: MemRequest) -> bool:
        addr = request.addr
        if not self._cacheable(addr):
            return False
        if request.kind == "W" or addr in self.resident:
            self.resident.add(addr)
            return True
        # compulsory miss; later readers of the word hit
        self.resident.add(addr)
        return False


_MEM_KEYS = {
    "num_vaults": ("num_vaults", int),
    "layers": ("layers", int),
    "layer_size_bytes": ("layer_size", int),
    "internal_bw_per_vault_gbps": ("internal_bw_per_vault", lambda v: float(v) * GB),
    "external_bw_raw_gbps": ("external_bw_raw", lambda v: float(v) * GB),
    "packetization_overhead": ("packetization_overhead", float),
    "clock_mhz": ("clock_hz", lambda v: float(v) * 1e6),
    "access_latency_cycles": ("access_latency", int),
    "link_latency_cycles": ("link_latency", int),
    "row_buffer_bytes": ("row_buffer_size", int),
    "row_model_enabled": ("row_model_enabled", lambda v: as_bool(v)),
    "row_hit_factor": ("row_hit_factor", float),
    "queue_depth": ("queue_depth", int),
    "max_outstanding": ("max_outstanding", int),
    "buffer_hit_latency_cycles": ("buffer_hit_latency", int),
}


def mem_overrides(values: dict) -> dict:
    """Convert flat ``mem.*`` keys (GB/s, MHz, cycles) to MemConfig field values."""
    kwargs = {}
    for key, value in values.items():
        if key not in _MEM_KEYS:
            raise ConfigError(f"unknown config key mem.{key}")
        name, conv = _MEM_KEYS[key]
        try:
            kwargs[name] = conv(value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for mem.{key}: {value!r}") from None
    return kwargs


def mem_config_from_dict(values: dict) -> MemConfig:
    return MemConfig(**mem_overrides(values))


def as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes", "on"):
        return True
    if str(v).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


def mem_config_to_dict(config: MemConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(config)}
