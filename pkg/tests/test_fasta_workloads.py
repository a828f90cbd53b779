import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pimalign.alignment import ScoringScheme
from pimalign.config import SimConfig, config_from_dict, load_config
from pimalign.fasta import FastaError, Record, encode_records, format_fasta, parse_fasta
from pimalign.memory import ConfigError, MemConfig
from pimalign.reports import RUN_COLUMNS, to_csv, to_json
from pimalign.workloads import assembly, db_search, gen_records, mutate, preset

names = st.text(alphabet="abcdefghij0123456789_", min_size=1, max_size=12)
texts = st.text(alphabet="ACGT", max_size=300)


# fasta ---------------------------------------------------------------------

def test_parse_multiline_and_comments():
    recs = parse_fasta(";comment\n>a desc here\nAC\ngt\n\n>b\n>c\nTT\n")
    assert recs == [Record("a", "ACGT"), Record("b", ""), Record("c", "TT")]


def test_parse_rejects_orphan_sequence():
    with pytest.raises(FastaError):
        parse_fasta("ACGT\n")


def test_encode_records_reports_record_name():
    with pytest.raises(FastaError, match="'bad'"):
        encode_records([Record("bad", "ACNGT")])


@given(st.lists(st.tuples(names, texts), max_size=6))
def test_format_parse_round_trip(items):
    recs = [Record(n, t) for n, t in items]
    text = format_fasta(recs)
    assert parse_fasta(text) == recs
    assert all(len(line) <= 80 for line in text.splitlines())


# workloads -----------------------------------------------------------------

def test_gen_records_deterministic():
    assert gen_records(5, 3, 9, 42) == gen_records(5, 3, 9, 42)
    assert gen_records(5, 3, 9, 42) != gen_records(5, 3, 9, 43)
    assert all(3 <= len(r.text) <= 9 for r in gen_records(50, 3, 9, 1))
    assert gen_records(0, 1, 1, 0) == []


@pytest.mark.parametrize("args", [(-1, 1, 2), (1, 0, 2), (1, 5, 4)])
def test_gen_records_validation(args):
    with pytest.raises(ValueError):
        gen_records(*args, seed=0)


def test_db_search_shape():
    q, refs = db_search(3, num_refs=4, length=100)
    assert len(q.text) == 100 and len(refs) == 4 and all(len(r.text) == 100 for r in refs)
    assert db_search(3, num_refs=4, length=100) == (q, refs)


def test_assembly_reads_come_from_genome():
    q, reads = assembly(1, genome_length=2000, read_length=100, num_reads=10, error_rate=0.0)
    assert len(reads) == 10 and all(len(r.text) == 100 for r in reads)
    q2, reads2 = assembly(1, genome_length=2000, read_length=100, num_reads=10, error_rate=0.0)
    assert (q, reads) == (q2, reads2)


def test_mutate_rate():
    import numpy as np
    rng = np.random.default_rng(0)
    text = "A" * 20000
    changed = sum(a != b for a, b in zip(text, mutate(rng, text, 0.1)))
    # a substitution can redraw the same letter: expected 0.1 * 3/4
    assert changed / len(text) == pytest.approx(0.075, abs=0.01)


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("nope")


# config --------------------------------------------------------------------

def test_default_config():
    cfg = SimConfig()
    assert cfg.total_fus == 480 and cfg.block_width == 15 and cfg.freq_hz == 3.7e9
    assert cfg.with_placement("processor").freq_hz == 6.6e9
    assert cfg.total_fus == cfg.mem.num_vaults * cfg.fu_per_pe


def test_nested_and_dotted_keys_agree():
    nested = config_from_dict({"mem": {"num_vaults": 8, "queue_depth": 32}, "sim": {"pe_freq_ghz": 2}})
    dotted = config_from_dict({"mem.num_vaults": 8, "mem.queue_depth": 32, "sim.pe_freq_ghz": 2})
    assert nested == dotted
    assert nested.mem == MemConfig(num_vaults=8, queue_depth=32) and nested.freq_hz == 2e9


def test_power_and_scheme_keys():
    cfg = config_from_dict({"power": {"access_energy_internal_pj_per_bit": 4}, "scheme": [2, -1, -3]})
    assert cfg.power.access_energy_internal == pytest.approx(4e-12)
    assert cfg.scheme == ScoringScheme(2, -1, -3)


@pytest.mark.parametrize("tree", [{"sim": {"placement": "host"}}, {"sim": {"fidelity": "exact"}},
                                  {"nonsense": 1}, {"sim": {"fu_per_pe": "x"}}, {"scheme": "1,1,1"},
                                  {"power": {"fu_power_mw": -1}}])
def test_config_errors(tree):
    with pytest.raises(ConfigError):
        config_from_dict(tree)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("mem:\n  access_latency_cycles: 20\n")
    assert load_config(p).mem.access_latency == 20
    p.write_text("- a list\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_digest_tracks_settings():
    assert SimConfig().digest() == SimConfig().digest()
    assert SimConfig().digest() != SimConfig(fu_per_pe=16).digest()


# reports -------------------------------------------------------------------

def test_json_stable_and_clean():
    doc = {"b": 1.5, "a": [math.inf, 2]}
    text = to_json(doc)
    assert text == to_json(dict(reversed(list(doc.items()))))
    assert json.loads(text) == {"a": ["inf", 2], "b": 1.5}


def test_csv_exact_floats():
    row = dict.fromkeys(RUN_COLUMNS, 0)
    row["time_s"] = 0.1 + 0.2
    text = to_csv([row], RUN_COLUMNS)
    assert text.splitlines()[0] == ",".join(RUN_COLUMNS)
    assert "0.30000000000000004" in text
