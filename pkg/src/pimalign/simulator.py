"""End-to-end runs: shard, program, time, reduce, trace back.

Two timing fidelities share the same address layout and traffic:

``cycle``
    full co-simulation of AGUs, memory queues and PE datapaths; scores come
    out of the simulated datapath. Practical up to a few thousand characters.
``fluid``
    block-level rate model (see :mod:`pimalign.fluid`); byte counts are the
    exact AGU counts, scores come from the reference scorer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

from .agu import AguMachine, PeDriver, VaultLayout, layout_vault, program, replay, write_vault_image
from .alignment import DEFAULT_FILL_CAP, Alignment, Sequence, align, nw_score, packed_words
from .config import MEMORY_SIDE, PROCESSOR_SIDE, SimConfig
from .cosim import link_channel, run_cycle, vault_channels
from .fluid import TrafficFilter, block_segments, compulsory_query_bytes, solve_channel
from .memory import WORD_BYTES, MemoryImage, external_effective_bw
from .power import EnergyReport, energy_report

log = logging.getLogger(__name__)

# stands in for "unlimited" where the cycle model needs a finite budget
_UNLIMITED_BPS = 1e18


class CapacityExceeded(ValueError):
    pass


class NoWinner(ValueError):
    pass


@dataclass(frozen=True)
class Database:
    sequences: tuple[Sequence, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", tuple(f"seq{i}" for i in range(len(self.sequences))))
        if len(self.names) != len(self.sequences):
            raise ValueError("one name per sequence required")

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def lengths(self) -> list[int]:
        return [s.length for s in self.sequences]


@dataclass
class UnitPlan:
    """One PE: the sequences it walks and where they live."""

    pe: int
    seq_ids: list[int]
    layout: VaultLayout
    vault_range: tuple[int, int] | None
    p: int

    @property
    def lengths(self) -> tuple[int, ...]:
        return self.layout.meta.lengths

    def has_work(self) -> bool:
        m = self.layout.packet.query_len
        return m > 0 and any(n > 0 for n in self.lengths)


@dataclass
class Shards:
    shard_map: list[int]  # sequence id -> vault id
    vault_ids: list[list[int]]  # vault id -> sequence ids, increasing
    layouts: list[VaultLayout]


def shard_database(db: Database, num_vaults: int, config: SimConfig | None = None,
                   query_len: int = 0) -> Shards:
    """Round-robin sequences over vaults and lay out each vault image."""
    config = config or SimConfig()
    mem = config.mem
    if num_vaults != mem.num_vaults:
        mem = replace(mem, num_vaults=num_vaults)
    shard_map = [i % num_vaults for i in range(len(db))]
    vault_ids: list[list[int]] = [[] for _ in range(num_vaults)]
    for i, v in enumerate(shard_map):
        vault_ids[v].append(i)
    layouts = []
    for v, ids in enumerate(vault_ids):
        lo, hi = mem.vault_range(v)
        layout = layout_vault(lo, hi, [db.sequences[i].length for i in ids], query_len)
        if layout.used_bytes > hi - lo:
            raise CapacityExceeded(
                f"vault {v} needs {layout.used_bytes} bytes, its share of memory is {hi - lo}")
        layouts.append(layout)
    return Shards(shard_map, vault_ids, layouts)


def build_images(db: Database, shards: Shards, query: Sequence, mem) -> list[MemoryImage]:
    images = []
    for v, (ids, layout) in enumerate(zip(shards.vault_ids, shards.layouts)):
        lo, hi = mem.vault_range(v)
        image = MemoryImage(lo, hi)
        write_vault_image(image, layout, [db.sequences[i] for i in ids], query)
        images.append(image)
    return images


@dataclass
class BufferPlan:
    capacity: int
    query_cached: bool
    dp_cached: bool
    cached_ranges: list = field(default_factory=list)


def buffer_plan(config: SimConfig, units: list[UnitPlan], query_len: int) -> BufferPlan:
    """Perfect-reuse byte-capacity filter: query first, then every DP region."""
    cap = config.proc_buffer_bytes
    if config.placement != PROCESSOR_SIDE or not units:
        return BufferPlan(cap, False, False)
    qbytes = packed_words(query_len) * WORD_BYTES
    query_cached = 0 < qbytes <= cap
    active = [u for u in units if u.has_work()]
    dp_bytes = len(active) * 2 * query_len * WORD_BYTES
    dp_cached = bool(active) and (qbytes if query_cached else 0) + dp_bytes <= cap
    ranges = []
    if query_cached:
        q = units[0].layout.packet.query_addr
        ranges.append((q, q + qbytes))
    if dp_cached:
        for u in active:
            d = u.layout.packet.dp_addr
            ranges.append((d, d + 2 * query_len * WORD_BYTES))
    return BufferPlan(cap, query_cached, dp_cached, ranges)


def plan_units(config: SimConfig, db: Database, query_len: int) -> tuple[Shards, list[UnitPlan]]:
    mem = config.mem
    if config.placement == PROCESSOR_SIDE and config.proc_pe_layout == "monolithic":
        shards = shard_database(db, mem.num_vaults, config, query_len)
        layout = layout_vault(0, mem.capacity, db.lengths, query_len)
        if layout.used_bytes > mem.capacity:
            raise CapacityExceeded(f"database needs {layout.used_bytes} bytes, memory holds {mem.capacity}")
        return shards, [UnitPlan(0, list(range(len(db))), layout, None, config.block_width)]
    shards = shard_database(db, mem.num_vaults, config, query_len)
    units = []
    shared_q = shards.layouts[0].packet.query_addr
    for v, (ids, layout) in enumerate(zip(shards.vault_ids, shards.layouts)):
        if config.placement == PROCESSOR_SIDE:
            # one host-side query copy serves every PE
            layout = replace(layout, packet=replace(layout.packet, query_addr=shared_q))
            units.append(UnitPlan(v, ids, layout, None, config.block_width))
        else:
            units.append(UnitPlan(v, ids, layout, mem.vault_range(v), config.block_width))
    return shards, units


@lru_cache(maxsize=8192)
def cached_score(query: Sequence, ref: Sequence, scheme) -> int:
    return nw_score(query, ref, scheme)


@dataclass
class SimReport:
    placement: str
    fidelity: str
    total_time_s: float
    cycles_per_domain: dict
    gcups: float
    cell_updates_total: int
    bytes_internal: int
    bytes_external: int
    scores: list
    per_vault_local_max: list
    global_max: tuple | None
    busy_cycles_per_vault: list
    stall_cycles_per_vault: list
    energy: EnergyReport | None
    config_digest: str
    buffer: dict
    num_sequences: int
    query_length: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["global_max"] = list(self.global_max) if self.global_max else None
        d["per_vault_local_max"] = [list(x) if x else None for x in self.per_vault_local_max]
        return d


def local_maxima(scores, vault_ids) -> list:
    out = []
    for ids in vault_ids:
        best = None
        for i in ids:
            s = scores[i]
            if best is None or s > best[0]:
                best = (s, i)
        out.append(best)
    return out


def reduce_global(local) -> tuple | None:
    best = None
    for v, lm in enumerate(local):
        if lm is None:
            continue
        if best is None or (lm[0], -lm[1]) > (best[0], -best[1]):
            best = (lm[0], lm[1], v)
    return best


def _latencies(config: SimConfig, dp_cached: bool):
    mem = config.mem
    f = config.freq_hz
    lat = mem.access_latency + (mem.link_latency if config.placement == PROCESSOR_SIDE else 0)
    first = (lat + 1) / mem.clock_hz + 2 / f
    dep_lat = (mem.buffer_hit_latency if dp_cached else lat) + 1
    round_trip = dep_lat / mem.clock_hz + 2 / f
    return first, round_trip


def _channel_bw(config: SimConfig) -> float:
    if config.unlimited_bandwidth:
        return math.inf
    if config.placement == PROCESSOR_SIDE:
        return external_effective_bw(config.mem)
    return config.mem.internal_bw_per_vault


def _run_fluid(config, db, query, units, bplan):
    m = query.length
    f = config.freq_hz
    step_time = config.fu_initiation_interval / f
    first, rt = _latencies(config, bplan.dp_cached)
    bw = _channel_bw(config)
    # one boundary write plus its read; bursts from different PEs rarely
    # coincide, so a burst drains at the channel's full rate
    pair_time = 0.0 if bplan.dp_cached else 2 * WORD_BYTES / bw
    segs = []
    for u in units:
        # blocks after the first wait on the previous block's boundary row, which
        # arrives as a burst, so the leading steps are paced by delivery; the
        # read hazard also holds the AGU back, so reference fetches go out in
        # pairs of blocks and each pair pays one uncached latency
        compute = (m + u.p - 1) * step_time
        paced = (min(m, u.p) - 1) * max(0.0, pair_time - step_time)
        dep = max((u.p - 1) * step_time + rt + paced, (first + compute) / 2)
        traffic = TrafficFilter(streamed=not bplan.query_cached, boundary=not bplan.dp_cached)
        segs.append(block_segments(u.lengths, m, u.p, config.seq_buffer_enabled, dep, traffic))
    if bplan.query_cached:
        # compulsory misses: each query word crosses the link once
        for s in segs:
            if s and s[0].steps:
                s[0].nbytes += compulsory_query_bytes(m)
                break
    if config.placement == PROCESSOR_SIDE:
        res = solve_channel(segs, bw, step_time, first)
        finish, nbytes = res.finish, res.nbytes
    else:
        finish, nbytes = [], 0
        for s in segs:
            r = solve_channel([s], bw, step_time, first)
            finish.append(r.finish[0] if s else 0.0)
            nbytes += r.nbytes
    busy = [sum(x.steps for x in s) * config.fu_initiation_interval for s in segs]
    total = [max(b, round(t * f)) if s else 0 for b, t, s in zip(busy, finish, segs)]
    scores = [cached_score(query, ref, config.scheme) for ref in db.sequences]
    mem_clock = config.mem.clock_hz
    tmax = max(finish, default=0.0)
    cycles = {"pe": round(tmax * f), "mem": round(tmax * mem_clock)}
    return scores, busy, total, tmax, nbytes, cycles, 0


def _run_cycle(config, db, query, shards, units, bplan):
    m = query.length
    mem = config.mem
    seq_buffer = config.seq_buffer_enabled
    if config.unlimited_bandwidth:
        mem = replace(mem, internal_bw_per_vault=_UNLIMITED_BPS)
    cfg = replace(config, mem=mem)
    unit_defs = []
    if config.placement == MEMORY_SIDE:
        channels = vault_channels(cfg, build_images(db, shards, query, mem))
    else:
        image = MemoryImage(0, mem.capacity)
        if config.proc_pe_layout == "monolithic":
            write_vault_image(image, units[0].layout, db.sequences, query)
        else:
            for v, ids in enumerate(shards.vault_ids):
                write_vault_image(image, shards.layouts[v], [db.sequences[i] for i in ids], query)
        bw = _UNLIMITED_BPS if config.unlimited_bandwidth else None
        channels = [link_channel(cfg, len(units), image, bw, bplan.cached_ranges)]
    for k, u in enumerate(units):
        driver = PeDriver(u.lengths, m, u.p, config.scheme, seq_buffer)

        def make(u=u):
            return program(u.layout.packet, u.layout.meta, u.p, u.vault_range, seq_buffer)

        if config.placement == MEMORY_SIDE:
            unit_defs.append((make, driver, k, 0, driver.finished))
        else:
            unit_defs.append((make, driver, 0, k, True))
    res = run_cycle(unit_defs, channels, cfg)
    scores = [None] * len(db)
    for u, unit_scores in zip(units, res.scores):
        for i, s in zip(u.seq_ids, unit_scores):
            scores[i] = s
    nbytes = sum(res.bytes_served)
    cycles = {"pe": res.pe_cycles, "mem": res.mem_cycles}
    return scores, res.busy_cycles, res.total_cycles, res.finish_time_s, nbytes, cycles, res.buffer_hits


def run(config: SimConfig, db: Database, query: Sequence, verify: bool = False) -> SimReport:
    """Simulate one database search and assemble its report."""
    m = query.length
    shards, units = plan_units(config, db, m)
    bplan = buffer_plan(config, units, m)
    log.info("run placement=%s fidelity=%s seqs=%d m=%d", config.placement, config.fidelity, len(db), m)
    if config.fidelity == "cycle":
        out = _run_cycle(config, db, query, shards, units, bplan)
    else:
        out = _run_fluid(config, db, query, units, bplan)
    scores, busy, total, t, nbytes, cycles, hits = out
    if verify:
        for i, ref in enumerate(db.sequences):
            want = cached_score(query, ref, config.scheme)
            if scores[i] != want:
                raise AssertionError(f"sequence {i}: simulated score {scores[i]} != reference {want}")
    local = local_maxima(scores, shards.vault_ids)
    cells = sum(n * m for n in db.lengths)
    qbytes = packed_words(m) * WORD_BYTES
    active_vaults = sum(1 for ids in shards.vault_ids if ids)
    if config.placement == MEMORY_SIDE:
        b_int, b_ext = nbytes, qbytes * active_vaults
    else:
        b_int, b_ext = 0, nbytes + (qbytes if len(db) else 0)
    report = SimReport(
        placement=config.placement,
        fidelity=config.fidelity,
        total_time_s=t,
        cycles_per_domain=cycles,
        gcups=cells / t / 1e9 if t > 0 else 0.0,
        cell_updates_total=cells,
        bytes_internal=b_int,
        bytes_external=b_ext,
        scores=list(scores),
        per_vault_local_max=local,
        global_max=reduce_global(local),
        busy_cycles_per_vault=list(busy),
        stall_cycles_per_vault=[tot - b for tot, b in zip(total, busy)],
        energy=None,
        config_digest=config.digest(),
        buffer={"capacity": bplan.capacity, "query_cached": bplan.query_cached,
                "dp_cached": bplan.dp_cached, "hits": hits},
        num_sequences=len(db),
        query_length=m,
    )
    report.energy = energy_report(report, config.power, config)
    return report


def agu_traces(config: SimConfig, db: Database, query: Sequence):
    """Each PE's AGU request stream with write payloads filled, in PE order."""
    shards, units = plan_units(config, db, query.length)
    mem = config.mem
    if config.placement == MEMORY_SIDE:
        images = build_images(db, shards, query, mem)
    else:
        image = MemoryImage(0, mem.capacity)
        if config.proc_pe_layout == "monolithic":
            write_vault_image(image, units[0].layout, db.sequences, query)
        else:
            for v, ids in enumerate(shards.vault_ids):
                write_vault_image(image, shards.layouts[v], [db.sequences[i] for i in ids], query)
        images = [image] * len(units)
    for u, image in zip(units, images):
        machine: AguMachine = program(u.layout.packet, u.layout.meta, u.p, u.vault_range,
                                      config.seq_buffer_enabled)
        _, requests = replay(machine, image, config.scheme)
        yield u.pe, requests


def traceback_winner(report: SimReport, db: Database, query: Sequence, scheme,
                     cap: int = DEFAULT_FILL_CAP) -> Alignment:
    """Full-matrix alignment of the winning pair; SizeCapExceeded if too large."""
    if report.global_max is None or not len(db):
        raise NoWinner("database is empty; there is no winner to trace back")
    _, seq_id, _ = report.global_max
    return align(query, db.sequences[seq_id], scheme, cap=cap)


def ideal_gcups(config: SimConfig) -> float:
    return config.total_fus * config.freq_hz / config.fu_initiation_interval / 1e9


def external_for_factor(config: SimConfig, factor: float):
    """MemConfig whose effective external bandwidth is internal total / factor."""
    if factor < 1:
        raise ValueError("bandwidth factors must be >= 1")
    eff = config.mem.internal_bw_total / factor
    raw = eff / (1.0 - config.mem.packetization_overhead)
    return replace(config.mem, external_bw_raw=raw)


def sweep_bandwidth(config: SimConfig, db: Database, query: Sequence, factors) -> list[dict]:
    """Memory-side over processor-side speedup as external bandwidth shrinks.

    Internal bandwidth is fixed; at factor ``k`` the effective external
    bandwidth is the aggregate internal bandwidth divided by ``k``.
    """
    factors = list(factors)
    for k in factors:
        if k < 1:
            raise ValueError("bandwidth factors must be >= 1")
    mem_report = run(config.with_placement(MEMORY_SIDE), db, query)
    rows = []
    for k in factors:
        cfg = replace(config.with_placement(PROCESSOR_SIDE), mem=external_for_factor(config, k))
        proc = run(cfg, db, query)
        speed = proc.total_time_s / mem_report.total_time_s if mem_report.total_time_s > 0 else 0.0
        rows.append({
            "factor": k,
            "speedup": speed,
            "gcups_mem": mem_report.gcups,
            "gcups_proc": proc.gcups,
            "energy_mem_j": mem_report.energy.total_energy_j,
            "energy_proc_j": proc.energy.total_energy_j,
            "mem_report": mem_report,
            "proc_report": proc,
        })
    return rows
