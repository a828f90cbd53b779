"""Energy and average power of a finished run.

Memory energy charges every bit moved at the rate of the path it took: bits
served to logic-layer PEs at the internal rate, bits crossing the off-chip
link at the external rate (which already includes the DRAM access). PE
energy scales the per-unit synthesis power with clock frequency over the
time the units were busy.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import PowerParams, SimConfig


@dataclass(frozen=True)
class EnergyReport:
    memory_energy_j: float
    pe_energy_j: float
    static_energy_j: float
    total_energy_j: float
    avg_power_w: float


def fu_power(params: PowerParams, freq_hz: float) -> float:
    """Per-unit power at ``freq_hz``, scaled from the reference point."""
    return params.fu_power_at_ref * (freq_hz / params.ref_freq_hz) ** params.freq_exponent


def energy_report(sim, params: PowerParams, config: SimConfig) -> EnergyReport:
    """Energy of a run from its traffic and PE activity.

    ``sim`` needs ``bytes_internal``, ``bytes_external``, ``total_time_s`` and
    ``busy_cycles_per_vault`` (one entry per PE, in PE clock cycles).
    """
    memory = 8 * sim.bytes_internal * params.access_energy_internal \
        + 8 * sim.bytes_external * params.access_energy_external
    freq = config.freq_hz
    units = config.block_width
    pe = sum(units * fu_power(params, freq) * (c / freq) for c in sim.busy_cycles_per_vault)
    static = params.static_power_per_vault * config.mem.num_vaults * sim.total_time_s
    total = memory + pe + static
    avg = total / sim.total_time_s if sim.total_time_s > 0 else 0.0
    return EnergyReport(memory, pe, static, total, avg)
