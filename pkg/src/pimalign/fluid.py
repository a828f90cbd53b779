"""Rate-based timing model for full-size workloads.

Each PE's work is a list of segments. A segment has a step count, a byte
volume and a minimum duration. It cannot finish faster than its steps at one
step per initiation interval, its minimum duration or its bytes at the
bandwidth the PE is granted. PEs sharing a channel split its bandwidth
max-min fairly. Channels never interact, so each one is solved on its own.

Consecutive blocks of one alignment with the same shape are merged into one
segment; inside it the demand rate is constant, so the merge only averages
the one-word jitter in stationary reads between blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agu import block_access_counts
from .alignment import packed_words
from .memory import WORD_BYTES


@dataclass
class Segment:
    steps: int
    nbytes: int
    min_dur: float = 0.0


@dataclass
class TrafficFilter:
    """Which word classes bypass the channel (processor-side buffer)."""

    streamed: bool = True
    boundary: bool = True


def block_segments(lengths, m: int, p: int, seq_buffer: bool, min_dur_dep: float,
                   traffic: TrafficFilter | None = None) -> list[Segment]:
    """Segments for one PE, metadata words folded into the first one."""
    traffic = traffic or TrafficFilter()
    segs: list[Segment] = []
    meta_bytes = (1 + len(lengths)) * WORD_BYTES
    for n in lengths:
        if n == 0 or m == 0:
            continue
        num_blocks = -(-n // p)
        steps = m + p - 1
        run = None
        for b in range(num_blocks):
            c = block_access_counts(n, m, p, b, seq_buffer)
            words = c.stationary_word_reads
            if traffic.streamed:
                words += c.streamed_word_reads
            if traffic.boundary:
                words += c.boundary_reads + c.boundary_writes
            key = (b > 0, b == num_blocks - 1)
            md = min_dur_dep if b > 0 else 0.0
            if run is not None and run[0] == key:
                seg = run[1]
                seg.steps += steps
                seg.nbytes += words * WORD_BYTES
                seg.min_dur += md
            else:
                seg = Segment(steps, words * WORD_BYTES, md)
                segs.append(seg)
                run = (key, seg)
    if segs:
        segs[0].nbytes += meta_bytes
    elif lengths:
        segs.append(Segment(0, meta_bytes, 0.0))
    return segs


def water_fill(capacity: float, demands: list[float]) -> list[float]:
    """Max-min fair split of ``capacity`` among ``demands``."""
    alloc = [0.0] * len(demands)
    order = sorted(range(len(demands)), key=lambda i: demands[i])
    left = capacity
    k = len(order)
    for pos, i in enumerate(order):
        share = left / (k - pos)
        give = demands[i] if demands[i] <= share else share
        alloc[i] = give
        left -= give
    return alloc


@dataclass
class ChannelResult:
    finish: list[float]
    nbytes: int


def solve_channel(pe_segments: list[list[Segment]], capacity: float, step_time: float,
                  start_delay: float) -> ChannelResult:
    """Finish time of each PE on one channel of ``capacity`` bytes/s."""
    total_bytes = sum(s.nbytes for segs in pe_segments for s in segs)
    if len(pe_segments) == 1:
        segs = pe_segments[0]
        if not segs:
            return ChannelResult([0.0], 0)
        steps = np.array([s.steps for s in segs], dtype=float)
        nbytes = np.array([s.nbytes for s in segs], dtype=float)
        md = np.array([s.min_dur for s in segs], dtype=float)
        dur = np.maximum(steps * step_time, md)
        if not math.isinf(capacity):
            dur = np.maximum(dur, nbytes / capacity)
        return ChannelResult([start_delay + float(dur.sum())], total_bytes)

    npe = len(pe_segments)
    idx = [0] * npe
    rem = [1.0] * npe
    finish = [0.0 if not segs else None for segs in pe_segments]
    t = start_delay
    while True:
        live = [i for i in range(npe) if finish[i] is None]
        if not live:
            break
        tmin, demand = {}, []
        for i in live:
            s = pe_segments[i][idx[i]]
            tm = max(s.steps * step_time, s.min_dur)
            tmin[i] = tm
            demand.append(s.nbytes / tm if tm > 0 else math.inf)
        if math.isinf(capacity):
            alloc = demand
        else:
            byte_users = [k for k, i in enumerate(live) if pe_segments[i][idx[i]].nbytes > 0]
            alloc = [0.0] * len(live)
            for k, a in zip(byte_users, water_fill(capacity, [demand[k] for k in byte_users])):
                alloc[k] = a
        rates = []
        for k, i in enumerate(live):
            s = pe_segments[i][idx[i]]
            r = 1.0 / tmin[i] if tmin[i] > 0 else math.inf
            if s.nbytes > 0 and not math.isinf(alloc[k]):
                r = min(r, alloc[k] / s.nbytes)
            rates.append(r)
        dts = [rem[i] / r if r > 0 else math.inf for i, r in zip(live, rates)]
        dt = min(dts)
        if math.isinf(dt):
            raise RuntimeError("fluid model stalled: no PE can progress")
        t += dt
        for (i, r, d) in zip(live, rates, dts):
            if d <= dt * (1 + 1e-12):
                idx[i] += 1
                rem[i] = 1.0
                if idx[i] == len(pe_segments[i]):
                    finish[i] = t
            else:
                rem[i] -= r * dt
    return ChannelResult(finish, total_bytes)


def compulsory_query_bytes(m: int) -> int:
    return packed_words(m) * WORD_BYTES
