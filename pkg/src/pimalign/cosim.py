"""Cycle-by-cycle co-simulation of AGUs, PEs and the memory.

Two clock domains (PE and memory) advance on a shared timeline; edges are
ordered exactly with integer arithmetic. On every PE edge each unit first
lets its AGU issue up to ``agu_issue_width`` requests, then the PE pops the
inputs of its next wavefront step off the load queue and fires if they are
all present. On every memory edge each channel serves and retires requests.

Reads run ahead of the PE. A boundary write waits in the AGU until the PE
has produced its value; a read of an address with an unissued write stalls
the read stream, and the channel's FIFO service keeps issued writes ahead of
later reads.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

from .agu import AguMachine, PeDriver
from .memory import ExternalLink, RequestClass, Submit, VaultState

AGU = RequestClass.AGU


class Deadlock(RuntimeError):
    pass


@dataclass
class CycleResult:
    scores: list  # per unit, per local sequence
    busy_cycles: list
    total_cycles: list
    finish_time_s: float
    pe_cycles: int
    mem_cycles: int
    bytes_served: list  # per channel
    buffer_hits: int


class _Unit:
    def __init__(self, idx, make_machine, driver: PeDriver, channel, port: int, programmed: bool):
        self.idx = idx
        self.make_machine = make_machine
        self.agu: AguMachine | None = make_machine() if programmed else None
        self.driver = driver
        self.channel = channel
        self.port = port
        self.peek = None
        self.pending_writes: deque = deque()
        self.pending_addrs: Counter = Counter()
        self.wait = 0
        self.busy = 0
        self.cycles = 0
        self.finish_cycle = 0 if driver.finished else None

    @property
    def idle(self) -> bool:
        return (self.driver.finished and not self.pending_writes
                and (self.agu is None or self.agu.done) and self.peek is None)

    def issue(self, width: int) -> None:
        ch, port = self.channel, self.port
        issued = 0
        pending = self.pending_writes
        while issued < width and pending:
            w = pending[0]
            if w.payload is None:
                value = self.driver.take_output(w)
                if value is None:
                    break
                w.payload = value
            if ch.submit(w, AGU, port) is Submit.BACKPRESSURE:
                break
            pending.popleft()
            self.pending_addrs[w.addr] -= 1
            issued += 1
        agu = self.agu
        while issued < width:
            req = self.peek if self.peek is not None else agu.next_request()
            if req is None:
                break
            if req.kind == "W":
                pending.append(req)
                self.pending_addrs[req.addr] += 1
                self.peek = None
                continue
            if self.pending_addrs[req.addr] or ch.submit(req, AGU, port) is Submit.BACKPRESSURE:
                self.peek = req
                break
            self.peek = None
            issued += 1

    def pe_cycle(self, cycle: int, ii: int) -> None:
        driver = self.driver
        lq = self.channel.ports[self.port].load_queue
        if driver.finished:
            lq.clear()  # metadata of a vault with nothing to align
            return
        self.cycles += 1
        if self.wait:
            self.wait -= 1
            self.busy += 1
            return
        while lq and not driver.can_step():
            resp = lq.popleft()
            driver.feed(resp.request, resp.data)
        if driver.can_step():
            driver.step()
            self.busy += 1
            self.wait = ii - 1
            if driver.finished:
                # the last issue slot still occupies the unit
                self.busy += self.wait
                self.cycles += self.wait
                self.finish_cycle = cycle + self.wait


def run_cycle(unit_defs, channels, config, max_idle_cycles: int = 200_000) -> CycleResult:
    """Co-simulate until every unit finished and all traffic drained.

    ``unit_defs`` is a list of ``(make_machine, driver, channel_index, port,
    programmed)``; memory-side units start unprogrammed and pick their PIM
    packet from their vault's ``pim_queue``.
    """
    units = [_Unit(i, mk, drv, channels[ch], port, prog)
             for i, (mk, drv, ch, port, prog) in enumerate(unit_defs)]
    for u in units:
        if u.agu is None:
            u.channel.submit(u.make_machine, RequestClass.PIM_PROGRAMMING)
    pe_hz = int(round(config.freq_hz))
    mem_hz = int(round(config.mem.clock_hz))
    width = config.agu_issue_width
    ii = config.fu_initiation_interval
    k_pe = k_mem = 0
    quiet = 0
    while True:
        if all(u.idle for u in units) and all(ch.idle() for ch in channels):
            break
        if (k_mem + 1) * pe_hz <= (k_pe + 1) * mem_hz:
            k_mem += 1
            for ch in channels:
                ch.tick()
            continue
        k_pe += 1
        progressed = False
        for u in units:
            if u.agu is None:
                if u.channel.pim_queue:
                    u.agu = u.channel.pim_queue.popleft()()
                if u.agu is None:
                    if not u.driver.finished:
                        u.cycles += 1
                    continue
            before = (u.driver.busy_steps, len(u.pending_writes), u.agu._tag)
            u.issue(width)
            u.pe_cycle(k_pe, ii)
            progressed |= before != (u.driver.busy_steps, len(u.pending_writes), u.agu._tag)
        quiet = 0 if progressed else quiet + 1
        if quiet > max_idle_cycles:
            raise Deadlock(f"no progress for {max_idle_cycles} PE cycles at cycle {k_pe}")
    finish = max((u.finish_cycle or 0) for u in units) if units else 0
    return CycleResult(
        scores=[u.driver.scores for u in units],
        busy_cycles=[u.busy for u in units],
        total_cycles=[u.cycles for u in units],
        finish_time_s=finish / pe_hz,
        pe_cycles=k_pe,
        mem_cycles=k_mem,
        bytes_served=[ch.stats.bytes_served for ch in channels],
        buffer_hits=sum(ch.stats.buffer_hits for ch in channels),
    )


def vault_channels(config, images):
    return [VaultState(config.mem, v, images[v]) for v in range(len(images))]


def link_channel(config, num_ports, image, bandwidth, cached_ranges):
    return ExternalLink(config.mem, num_ports, image, bandwidth, cached_ranges)
