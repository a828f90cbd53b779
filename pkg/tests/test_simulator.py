import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_matrix, random_dna
from pimalign.alignment import DEFAULT_SCHEME, ScoringScheme, SizeCapExceeded, column_score, encode_sequence
from pimalign.config import SimConfig
from pimalign.memory import MemConfig
from pimalign.reports import to_json
from pimalign.simulator import (CapacityExceeded, Database, NoWinner, ideal_gcups, local_maxima, reduce_global, run,
                                shard_database, sweep_bandwidth, traceback_winner)

PROC = SimConfig(placement="processor")


def _db(rng, count, lo, hi):
    texts = [random_dna(rng, rng.randint(lo, hi)) for _ in range(count)]
    return Database(tuple(encode_sequence(t) for t in texts)), texts


def _oracle_winner(query, texts, scheme=DEFAULT_SCHEME):
    best = None
    for i, t in enumerate(texts):
        s = naive_matrix(t, query, scheme.match, scheme.mismatch, scheme.gap)[-1][-1]
        if best is None or s > best[0]:
            best = (s, i)
    return best


# sharding ------------------------------------------------------------------

def test_shard_four_over_two():
    db = Database(tuple(encode_sequence("ACGT") for _ in range(4)))
    shards = shard_database(db, 2, SimConfig(mem=MemConfig(num_vaults=2)))
    assert shards.vault_ids == [[0, 2], [1, 3]]
    assert shards.shard_map == [0, 1, 0, 1]


def test_shard_one_over_32():
    db = Database((encode_sequence("ACGT"),))
    shards = shard_database(db, 32)
    assert sum(1 for ids in shards.vault_ids if ids) == 1
    assert sum(1 for ids in shards.vault_ids if not ids) == 31


def test_shard_thousand_partition():
    rng = random.Random(0)
    db, _ = _db(rng, 1000, 0, 40)
    shards = shard_database(db, 32)
    union = [i for ids in shards.vault_ids for i in ids]
    assert sorted(union) == list(range(1000)) and len(set(union)) == 1000
    for v, ids in enumerate(shards.vault_ids):
        assert all(shards.shard_map[i] == v for i in ids)
        offs = shards.layouts[v].meta.offsets
        assert all(b >= a for a, b in zip(offs, offs[1:]))


def test_capacity_exceeded():
    tiny = MemConfig(num_vaults=2, layers=1, layer_size=8192)
    db = Database((encode_sequence("A" * 20000),))
    with pytest.raises(CapacityExceeded):
        run(SimConfig(mem=tiny, fu_per_pe=4), db, encode_sequence("ACGT"))


# results -------------------------------------------------------------------

def test_self_identical_sequence():
    q = encode_sequence("GATTACAGATTACA")
    report = run(SimConfig(), Database((q,)), q)
    assert report.global_max[0] == q.length * DEFAULT_SCHEME.match


@pytest.mark.parametrize("fidelity", ["fluid", "cycle"])
@pytest.mark.parametrize("placement", ["memory", "processor"])
def test_64_sequences_match_oracle(fidelity, placement):
    rng = random.Random(64)
    db, texts = _db(rng, 64, 1, 60)
    query = random_dna(rng, 40)
    cfg = SimConfig(placement=placement, fidelity=fidelity)
    report = run(cfg, db, encode_sequence(query), verify=True)
    score, seq = _oracle_winner(query, texts)
    assert report.global_max[:2] == (score, seq)
    assert report.global_max[2] == report_vault(report, seq)


def report_vault(report, seq_id):
    return next(v for v, lm in enumerate(report.per_vault_local_max) if lm and lm[1] == seq_id)


def test_placement_changes_timing_only():
    rng = random.Random(3)
    db, _ = _db(rng, 40, 20, 120)
    q = encode_sequence(random_dna(rng, 90))
    mem, proc = run(SimConfig(), db, q), run(PROC, db, q)
    assert mem.global_max == proc.global_max and mem.scores == proc.scores
    assert mem.total_time_s != proc.total_time_s


def test_tie_break_lowest_sequence_id():
    s = encode_sequence("ACGTACGT")
    db = Database((encode_sequence("TTTT"), s, s, s))
    report = run(SimConfig(), db, s)
    assert report.global_max == (8, 1, 1)
    assert reduce_global([None, (5, 3), (5, 2), (4, 0)]) == (5, 2, 2)
    assert local_maxima([3, 7, 7], [[0, 1, 2]]) == [(7, 1)]


def test_empty_database():
    report = run(SimConfig(), Database(()), encode_sequence("ACGT"))
    assert report.global_max is None and report.cell_updates_total == 0
    assert report.gcups == 0.0
    with pytest.raises(NoWinner):
        traceback_winner(report, Database(()), encode_sequence("ACGT"), DEFAULT_SCHEME)


# traceback -----------------------------------------------------------------

def test_traceback_identity_winner():
    q = encode_sequence("ACGTTGCA")
    db = Database((encode_sequence("AAAA"), q, encode_sequence("CCCCCC")))
    report = run(SimConfig(), db, q)
    aln = traceback_winner(report, db, q, DEFAULT_SCHEME)
    assert aln.aligned_a == aln.aligned_b == "ACGTTGCA"


def test_traceback_score_equals_global_max():
    rng = random.Random(12)
    scheme = ScoringScheme(2, -1, -2)
    for _ in range(5):
        db, _ = _db(rng, 10, 5, 80)
        q = encode_sequence(random_dna(rng, 50))
        report = run(SimConfig(scheme=scheme), db, q)
        aln = traceback_winner(report, db, q, scheme)
        assert aln.score == report.global_max[0]
        assert column_score(aln.aligned_a, aln.aligned_b, scheme) == aln.score


def test_traceback_size_cap():
    q = encode_sequence("ACGT" * 30)
    db = Database((q,))
    report = run(SimConfig(), db, q)
    with pytest.raises(SizeCapExceeded):
        traceback_winner(report, db, q, DEFAULT_SCHEME, cap=1000)
    assert report.global_max[0] == 120


# roofline and sweep --------------------------------------------------------

def test_ideal_gcups_examples():
    assert ideal_gcups(SimConfig()) == pytest.approx(1776)
    one = SimConfig(mem=MemConfig(num_vaults=1), fu_per_pe=1, pe_freq_hz=1e9)
    assert ideal_gcups(one) == pytest.approx(1)


@pytest.mark.parametrize("cfg", [SimConfig(), PROC, SimConfig(unlimited_bandwidth=True),
                                 SimConfig(fidelity="cycle", unlimited_bandwidth=True)])
def test_measured_below_ideal(cfg):
    rng = random.Random(5)
    db, _ = _db(rng, 32, 100, 300)
    report = run(cfg, db, encode_sequence(random_dna(rng, 200)))
    assert 0 < report.gcups <= ideal_gcups(cfg)


def test_sweep_monotone_and_rejects_small_factor():
    rng = random.Random(8)
    db, _ = _db(rng, 32, 1500, 2000)
    q = encode_sequence(random_dna(rng, 1500))
    rows = sweep_bandwidth(SimConfig(), db, q, [1, 2, 4])
    speeds = [r["speedup"] for r in rows]
    assert [r["factor"] for r in rows] == [1, 2, 4]
    assert speeds[0] < speeds[1] < speeds[2]
    assert all(r["mem_report"] is rows[0]["mem_report"] for r in rows)
    with pytest.raises(ValueError):
        sweep_bandwidth(SimConfig(), db, q, [0.5])


# invariants ----------------------------------------------------------------

_KNOBS = [
    SimConfig(),
    PROC,
    SimConfig(fu_per_pe=3),
    SimConfig(fu_per_pe=1),
    SimConfig(mem=MemConfig(queue_depth=2)),
    SimConfig(mem=MemConfig(internal_bw_per_vault=1e9)),
    SimConfig(unlimited_bandwidth=True),
    SimConfig(mem=MemConfig(num_vaults=4), fu_per_pe=16),
    SimConfig(mem=MemConfig(num_vaults=7), fu_per_pe=2),
    replace(PROC, proc_pe_layout="monolithic"),
    replace(PROC, proc_buffer_bytes=0),
    SimConfig(seq_buffer_enabled=True, fu_initiation_interval=3),
]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_results_independent_of_timing_knobs(seed):
    rng = random.Random(seed)
    db, _ = _db(rng, rng.randint(1, 20), 0, 50)
    q = encode_sequence(random_dna(rng, rng.randint(1, 40)))
    base = run(SimConfig(), db, q)
    for cfg in _KNOBS:
        r = run(cfg, db, q)
        assert r.global_max[:2] == base.global_max[:2]
        assert r.scores == base.scores


def test_cycle_results_independent_of_knobs():
    rng = random.Random(44)
    db, _ = _db(rng, 12, 1, 45)
    q = encode_sequence(random_dna(rng, 30))
    base = run(SimConfig(), db, q)
    for cfg in _KNOBS:
        r = run(replace(cfg, fidelity="cycle"), db, q, verify=True)
        assert r.global_max[:2] == base.global_max[:2]


@pytest.mark.parametrize("fidelity", ["fluid", "cycle"])
def test_report_deterministic(fidelity):
    rng = random.Random(2)
    db, _ = _db(rng, 20, 10, 60)
    q = encode_sequence(random_dna(rng, 30))
    cfg = SimConfig(fidelity=fidelity)
    a = to_json(run(cfg, db, q).to_dict())
    b = to_json(run(cfg, db, q).to_dict())
    assert a == b
    json.loads(a)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([SimConfig(), PROC, SimConfig(fu_initiation_interval=2)]))
def test_accounting_invariants(seed, cfg):
    rng = random.Random(seed)
    db, _ = _db(rng, rng.randint(0, 40), 0, 120)
    q = encode_sequence(random_dna(rng, rng.randint(0, 60)))
    r = run(cfg, db, q)
    assert r.cell_updates_total == sum(n * q.length for n in db.lengths)
    if r.total_time_s > 0:
        assert r.gcups == pytest.approx(r.cell_updates_total / r.total_time_s / 1e9)
    assert all(s >= 0 for s in r.stall_cycles_per_vault)
    if r.global_max is not None:
        assert r.global_max[0] == max(lm[0] for lm in r.per_vault_local_max if lm)


def test_cycle_busy_plus_stall_is_total():
    rng = random.Random(17)
    db, _ = _db(rng, 40, 10, 90)
    q = encode_sequence(random_dna(rng, 50))
    for cfg in (SimConfig(fidelity="cycle"), replace(PROC, fidelity="cycle")):
        r = run(cfg, db, q)
        assert all(s >= 0 for s in r.stall_cycles_per_vault)
        busy_steps = sum(r.busy_cycles_per_vault)
        # one PE step per cell column slot; idle vaults contribute nothing
        assert busy_steps >= sum(-(-n // cfg.block_width) * (q.length + cfg.block_width - 1)
                                 for n in db.lengths if n)
        assert r.cycles_per_domain["pe"] >= max(b + s for b, s in zip(r.busy_cycles_per_vault,
                                                                       r.stall_cycles_per_vault))


# fluid vs cycle ------------------------------------------------------------

_XVAL = [
    ("memory", SimConfig(), 100),
    ("processor", PROC, 100),
    ("processor-nocache", replace(PROC, proc_buffer_bytes=0), 100),
    ("memory-seqbuf", SimConfig(seq_buffer_enabled=True), 100),
    ("memory-ii2", SimConfig(fu_initiation_interval=2), 100),
    ("memory-shortq", SimConfig(), 10),
    ("processor-shortq", PROC, 10),
    ("processor-lowbw", replace(PROC, mem=MemConfig(external_bw_raw=40e9)), 100),
    ("memory-unlimited", SimConfig(unlimited_bandwidth=True), 100),
]


@pytest.mark.parametrize("name,cfg,m", _XVAL, ids=[x[0] for x in _XVAL])
def test_fluid_tracks_cycle(name, cfg, m):
    rng = random.Random(31)
    db, _ = _db(rng, 48, 60, 180)
    q = encode_sequence(random_dna(rng, m))
    fluid = run(cfg, db, q)
    cycle = run(replace(cfg, fidelity="cycle"), db, q, verify=True)
    assert fluid.bytes_internal == cycle.bytes_internal
    assert fluid.bytes_external == cycle.bytes_external
    assert fluid.total_time_s == pytest.approx(cycle.total_time_s, rel=0.05)
    assert fluid.scores == cycle.scores


@pytest.mark.parametrize("placement", ["memory", "processor"])
def test_fluid_ignores_queue_depth(placement):
    rng = random.Random(9)
    db, _ = _db(rng, 32, 500, 900)
    q = encode_sequence(random_dna(rng, 600))
    times = {run(SimConfig(placement=placement, mem=MemConfig(queue_depth=d)), db, q).total_time_s
             for d in (8, 16, 64)}
    assert len(times) == 1


@pytest.mark.parametrize("cfg", [SimConfig(fidelity="cycle"),
                                 replace(PROC, fidelity="cycle", proc_buffer_bytes=0)],
                         ids=["memory", "processor-nobuffer"])
def test_cycle_queue_depth_insensitive_beyond_eight(cfg):
    rng = random.Random(9)
    db, _ = _db(rng, 32, 100, 300)
    q = encode_sequence(random_dna(rng, 200))
    times = [run(replace(cfg, mem=MemConfig(queue_depth=d)), db, q).total_time_s for d in (8, 16, 64)]
    assert max(times) <= min(times) * 1.01
