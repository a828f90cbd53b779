"""Simulation configuration and config-file loading.

Config files are YAML. Keys may be nested (``mem: {num_vaults: 32}``) or
dotted (``mem.num_vaults: 32``); both flatten to the same dotted names.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import yaml

from .alignment import DEFAULT_SCHEME, InvalidScheme, ScoringScheme
from .memory import ConfigError, MemConfig, as_bool, mem_overrides

MEMORY_SIDE = "memory"
PROCESSOR_SIDE = "processor"
PLACEMENTS = (MEMORY_SIDE, PROCESSOR_SIDE)

DEFAULT_FREQ = {MEMORY_SIDE: 3.7e9, PROCESSOR_SIDE: 6.6e9}


@dataclass(frozen=True)
class PowerParams:
    access_energy_internal: float = 3.7e-12  # J/bit
    access_energy_external: float = 10e-12  # J/bit
    fu_power_at_ref: float = 0.98e-3  # W per functional unit
    ref_freq_hz: float = 14.485e9
    freq_exponent: float = 1.0
    static_power_per_vault: float = 0.0  # W, AGU/queues/leakage

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise ConfigError(f"power.{k} must be non-negative")
        if self.ref_freq_hz == 0:
            raise ConfigError("power.ref_freq_hz must be positive")


@dataclass(frozen=True)
class SimConfig:
    placement: str = MEMORY_SIDE
    pe_freq_hz: float | None = None
    fu_per_pe: int = 15
    mem: MemConfig = field(default_factory=MemConfig)
    scheme: ScoringScheme = DEFAULT_SCHEME
    seq_buffer_enabled: bool = False
    fu_initiation_interval: int = 1
    proc_buffer_bytes: int = 64 * 1024
    proc_pe_layout: str = "replicated"
    agu_issue_width: int = 4
    unlimited_bandwidth: bool = False
    fidelity: str = "fluid"
    power: PowerParams = field(default_factory=PowerParams)

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"sim.placement must be one of {PLACEMENTS}, not {self.placement!r}")
        if self.pe_freq_hz is not None and not self.pe_freq_hz > 0:
            raise ConfigError("sim.pe_freq_ghz must be positive")
        if self.fu_per_pe < 1:
            raise ConfigError("sim.fu_per_pe must be at least 1")
        if self.fu_initiation_interval < 1:
            raise ConfigError("sim.fu_initiation_interval must be at least 1")
        if self.proc_pe_layout not in ("replicated", "monolithic"):
            raise ConfigError("sim.proc_pe_layout must be 'replicated' or 'monolithic'")
        if self.fidelity not in ("fluid", "cycle"):
            raise ConfigError("sim.fidelity must be 'fluid' or 'cycle'")
        if self.agu_issue_width < 1:
            raise ConfigError("sim.agu_issue_width must be at least 1")
        if self.proc_buffer_bytes < 0:
            raise ConfigError("sim.proc_buffer_bytes must be non-negative")

    @property
    def freq_hz(self) -> float:
        return self.pe_freq_hz if self.pe_freq_hz is not None else DEFAULT_FREQ[self.placement]

    @property
    def total_fus(self) -> int:
        return self.mem.num_vaults * self.fu_per_pe

    @property
    def num_pes(self) -> int:
        if self.placement == PROCESSOR_SIDE and self.proc_pe_layout == "monolithic":
            return 1
        return self.mem.num_vaults

    @property
    def block_width(self) -> int:
        return self.total_fus // self.num_pes

    def with_placement(self, placement: str) -> "SimConfig":
        return replace(self, placement=placement)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["freq_hz"] = self.freq_hz
        d["total_fus"] = self.total_fus
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _json_default(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    raise TypeError(type(v))


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


_SIM_KEYS = {
    "placement": ("placement", str),
    "pe_freq_ghz": ("pe_freq_hz", lambda v: float(v) * 1e9),
    "fu_per_pe": ("fu_per_pe", int),
    "seq_buffer_enabled": ("seq_buffer_enabled", as_bool),
    "fu_initiation_interval": ("fu_initiation_interval", int),
    "proc_buffer_bytes": ("proc_buffer_bytes", int),
    "proc_pe_layout": ("proc_pe_layout", str),
    "agu_issue_width": ("agu_issue_width", int),
    "unlimited_bandwidth": ("unlimited_bandwidth", as_bool),
    "fidelity": ("fidelity", str),
}

_POWER_KEYS = {
    "access_energy_internal_pj_per_bit": ("access_energy_internal", lambda v: float(v) * 1e-12),
    "access_energy_external_pj_per_bit": ("access_energy_external", lambda v: float(v) * 1e-12),
    "fu_power_mw": ("fu_power_at_ref", lambda v: float(v) * 1e-3),
    "ref_freq_ghz": ("ref_freq_hz", lambda v: float(v) * 1e9),
    "freq_exponent": ("freq_exponent", float),
    "static_power_per_vault_w": ("static_power_per_vault", float),
}


def _convert(section: str, table: dict, values: dict) -> dict:
    out = {}
    for key, value in values.items():
        if key not in table:
            raise ConfigError(f"unknown config key {section}.{key}")
        name, conv = table[key]
        try:
            out[name] = conv(value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {section}.{key}: {value!r}") from None
    return out


def config_from_dict(tree: dict, base: SimConfig | None = None) -> SimConfig:
    """Overlay flattened ``mem.*``, ``sim.*``, ``power.*`` and ``scheme`` keys on ``base``."""
    base = base or SimConfig()
    flat = flatten(tree)
    groups: dict[str, dict] = {"mem": {}, "sim": {}, "power": {}}
    scheme = base.scheme
    for key, value in flat.items():
        if key == "scheme":
            try:
                scheme = ScoringScheme.parse(str(value)) if not isinstance(value, (list, tuple)) \
                    else ScoringScheme(*map(int, value))
            except InvalidScheme as exc:
                raise ConfigError(f"scheme: {exc}") from None
            continue
        section, _, rest = key.partition(".")
        if section not in groups or not rest:
            raise ConfigError(f"unknown config key {key}")
        groups[section][rest] = value
    mem = base.mem
    if groups["mem"]:
        mem = replace(mem, **mem_overrides(groups["mem"]))
    power = base.power
    if groups["power"]:
        power = replace(power, **_convert("power", _POWER_KEYS, groups["power"]))
    sim = _convert("sim", _SIM_KEYS, groups["sim"])
    return replace(base, mem=mem, power=power, scheme=scheme, **sim)


def load_config(path, base: SimConfig | None = None) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            tree = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(tree, base)
