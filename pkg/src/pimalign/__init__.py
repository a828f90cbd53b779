"""Simulator of a near-memory accelerator for pairwise DNA sequence alignment."""

from .alignment import (DEFAULT_SCHEME, Alignment, ScoringScheme, Sequence, align, decode_sequence,
                        encode_sequence, nw_score)
from .config import SimConfig, load_config
from .memory import MemConfig
from .power import EnergyReport, PowerParams, energy_report
from .simulator import Database, SimReport, ideal_gcups, run, sweep_bandwidth, traceback_winner
from .wavefront import wavefront_score

__all__ = [
    "DEFAULT_SCHEME", "Alignment", "ScoringScheme", "Sequence", "align", "decode_sequence",
    "encode_sequence", "nw_score", "SimConfig", "load_config", "MemConfig", "EnergyReport",
    "PowerParams", "energy_report", "Database", "SimReport", "ideal_gcups", "run",
    "sweep_bandwidth", "traceback_winner", "wavefront_score",
]
