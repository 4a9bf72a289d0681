"""Experiment configuration: a flat ``section.key = value`` text format.

Every key has a default (the baseline machine below); a file only lists what
it changes.  Sizes accept ``K``/``KB``/``KiB``, ``M``/``MB``/``MiB`` and
``G``/``GB``/``GiB`` suffixes, all binary.  List-valued keys (``sweep.*``)
are comma separated.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .cachehier import CacheConfig, HierarchyConfig, configure_l4
from .engine import CycleModel, EngineConfig, MachineConfig, NestedConfig
from .errors import ConfigError
from .tlb import TlbConfig
from .vmem import PageSize
from .walker import PwcConfig
from .workload import SynthConfig

_SUFFIX = {"": 0, "k": 10, "kb": 10, "kib": 10, "m": 20, "mb": 20, "mib": 20,
           "g": 30, "gb": 30, "gib": 30}
_SIZE_RE = re.compile(r"^(0x[0-9a-f]+|\d+)\s*([a-z]*)$")


def parse_size(text: str) -> int:
    m = _SIZE_RE.match(text.strip().lower())
    if not m or m.group(2) not in _SUFFIX:
        raise ValueError(f"invalid size {text!r}")
    return int(m.group(1), 0) << _SUFFIX[m.group(2)]


def format_size(n: int) -> str:
    for unit, shift in (("GiB", 30), ("MiB", 20), ("KiB", 10)):
        if n and n % (1 << shift) == 0:
            return f"{n >> shift}{unit}"
    return str(n)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"invalid boolean {text!r}")


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _fraction(text: str) -> Fraction:
    return Fraction(text.strip())


def _opt_int(text: str) -> int | None:
    t = text.strip().lower()
    return None if t in ("", "none") else _int(t)


def _list(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(item(p) for p in parts)
    return parse


def _fmt_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    emit: Callable[[Any], str] = _fmt_value
    doc: str = ""


def _size_key(default: int, doc: str = "") -> _Key:
    return _Key(parse_size, default, format_size, doc)


def _cache_keys(name: str, size: int, assoc: int, latency: int) -> dict[str, _Key]:
    return {
        f"cache.{name}.size": _size_key(size),
        f"cache.{name}.assoc": _Key(_int, assoc),
        f"cache.{name}.block": _size_key(64),
        f"cache.{name}.latency": _Key(_int, latency),
    }


_SYNTH = SynthConfig()
_ENGINE = EngineConfig()

SCHEMA: dict[str, _Key] = {
    "tlb.l1i.entries": _Key(_int, 64),
    "tlb.l1i.assoc": _Key(_int, 0, doc="0 = fully associative"),
    "tlb.l1d.entries": _Key(_int, 64),
    "tlb.l1d.assoc": _Key(_int, 0),
    "tlb.l2.entries": _Key(_int, 1024, doc="0 disables the L2 TLB"),
    "tlb.l2.assoc": _Key(_int, 0),
    "tlb.l2.latency": _Key(_int, 7, doc="cycles added to every walk"),
    "tlb.super.entries": _Key(_int, 32, doc="0 disables the superpage TLB"),
    "tlb.super.assoc": _Key(_int, 0),
    "tlb.super.page_size": _size_key(2 << 20),
    "tlb.policy.flush_on_switch": _Key(_bool, False),
    "walker.pwc.enabled": _Key(_bool, True),
    "walker.pwc.entries": _Key(_list(_int), (16, 16, 16), doc="PL4,PL3,PL2 or one value"),
    "walker.pwc.latency": _Key(_int, 1),
    "walker.walk_from_l2": _Key(_bool, False),
    "walker.pollution_off": _Key(_bool, False),
    "walker.nested.enabled": _Key(_bool, False),
    "walker.nested.levels": _Key(_int, 4),
    "walker.nested.guest_levels": _Key(_int, 4),
    **_cache_keys("l1i", 32 << 10, 4, 2),
    **_cache_keys("l1d", 32 << 10, 8, 4),
    **_cache_keys("l2", 256 << 10, 8, 6),
    **_cache_keys("l3", HierarchyConfig().l3.size_bytes, 12, 9),
    "cache.l4.enabled": _Key(_bool, True),
    **_cache_keys("l4", 256 << 20, 16, 20),
    "mem.latency_cycles": _Key(_int, 195),
    "vmem.frame_base": _Key(_int, 0x100),
    "vmem.region_frames": _Key(_int, 1 << 20),
    "vmem.shuffle_window": _Key(_int, 0),
    "workload.trace": _Key(str.strip, ""),
    "synth.footprint": _size_key(_SYNTH.footprint_bytes),
    "synth.page_locality": _Key(str.strip, _SYNTH.page_locality),
    "synth.zipf_s": _Key(float, _SYNTH.zipf_s),
    "synth.intra_page": _Key(str.strip, _SYNTH.intra_page),
    "synth.inst_ratio": _Key(float, _SYNTH.inst_ratio),
    "synth.write_ratio": _Key(float, _SYNTH.write_ratio),
    "synth.code_bytes": _size_key(_SYNTH.code_bytes),
    "synth.switch_period": _Key(_int, _SYNTH.switch_period),
    "synth.threads": _Key(_int, _SYNTH.threads),
    "synth.base_va": _Key(_int, _SYNTH.base_va, hex),
    "synth.superpage": _Key(_bool, False),
    "synth.events": _Key(_int, 1_000_000, doc="stream length"),
    "engine.max_events": _Key(_opt_int, None),
    "engine.ideal_tlb": _Key(_bool, False),
    "engine.base_cpi": _Key(_fraction, _ENGINE.cycle.base_cpi),
    "engine.overlap": _Key(_fraction, _ENGINE.cycle.overlap),
    "engine.hist_bucket": _Key(_int, _ENGINE.hist_bucket),
    "engine.seed": _Key(_int, 0),
    "sweep.l4.size": _Key(_list(parse_size), tuple(s << 20 for s in (64, 128, 256, 512, 1024)),
                          lambda v: ",".join(format_size(s) for s in v)),
    "sweep.l4.block": _Key(_list(parse_size), (64,),
                           lambda v: ",".join(format_size(s) for s in v)),
    "sweep.ideal_tlb": _Key(_list(_bool), (False, True)),
}


@dataclass(frozen=True)
class SweepConfig:
    l4_sizes: tuple[int, ...]
    l4_blocks: tuple[int, ...]
    ideal_modes: tuple[bool, ...]

    def points(self):
        """Cross product in a fixed order: size, then block, then mode."""
        return [(s, b, i) for s in self.l4_sizes for b in self.l4_blocks for i in self.ideal_modes]


@dataclass(frozen=True)
class ExperimentConfig:
    settings: tuple[tuple[str, Any], ...]  # every key, sorted, typed
    machine: MachineConfig
    engine: EngineConfig
    sweep: SweepConfig
    trace: str | None
    synth: SynthConfig | None
    synth_events: int

    def get(self, key: str) -> Any:
        return dict(self.settings)[key]

    def echo(self) -> tuple[tuple[str, str], ...]:
        return tuple((k, SCHEMA[k].emit(v)) for k, v in self.settings)


def _tlb(values: dict, name: str, label: str, page_size=PageSize.PAGE_4K) -> TlbConfig | None:
    entries = values[f"tlb.{name}.entries"]
    if entries == 0 and name in ("l2", "super"):
        return None
    assoc = values[f"tlb.{name}.assoc"] or None
    try:
        return TlbConfig(label, entries, assoc, page_size)
    except ValueError as exc:
        raise ConfigError(f"tlb.{name}.entries", str(exc)) from None


def _cache(values: dict, name: str) -> CacheConfig:
    p = f"cache.{name}."
    try:
        if name == "l4":
            return configure_l4(values[p + "size"], values[p + "block"],
                                values[p + "assoc"], values[p + "latency"])
        return CacheConfig(name.upper(), values[p + "size"], values[p + "assoc"],
                           values[p + "block"], values[p + "latency"])
    except ValueError as exc:
        raise ConfigError(p + "size", str(exc)) from None


def build(values: dict[str, Any], explicit: frozenset[str] = frozenset()) -> ExperimentConfig:
    """Assemble typed objects from a complete ``key -> value`` mapping.

    *explicit* names the keys the user set; it decides whether the workload
    is a trace or the synthetic generator.
    """
    v = values
    try:
        sp_size = PageSize.from_bytes(v["tlb.super.page_size"])
    except ValueError:
        raise ConfigError("tlb.super.page_size", "must be 2MiB or 1GiB") from None
    if sp_size is PageSize.PAGE_4K:
        raise ConfigError("tlb.super.page_size", "must be 2MiB or 1GiB")
    pwc_entries = v["walker.pwc.entries"]
    if len(pwc_entries) == 1:
        pwc_entries = pwc_entries * 3
    if len(pwc_entries) != 3 or min(pwc_entries) < 1:
        raise ConfigError("walker.pwc.entries", "need one or three positive counts")
    for key in ("walker.nested.levels", "walker.nested.guest_levels"):
        if v[key] not in (2, 3, 4) and not (key == "walker.nested.levels" and v[key] == 0):
            raise ConfigError(key, "levels must be 2, 3 or 4")
    for key in ("tlb.l2.latency", "walker.pwc.latency", "mem.latency_cycles",
                "vmem.shuffle_window", "synth.events", "engine.seed"):
        if v[key] < 0:
            raise ConfigError(key, "must be non-negative")
    if v["engine.hist_bucket"] < 1:
        raise ConfigError("engine.hist_bucket", "must be positive")
    if v["engine.max_events"] is not None and v["engine.max_events"] < 0:
        raise ConfigError("engine.max_events", "must be non-negative")

    caches = HierarchyConfig(
        l1i=_cache(v, "l1i"), l1d=_cache(v, "l1d"), l2=_cache(v, "l2"), l3=_cache(v, "l3"),
        l4=_cache(v, "l4") if v["cache.l4.enabled"] else None,
        mem_latency_cycles=v["mem.latency_cycles"])
    machine = MachineConfig(
        l1i_tlb=_tlb(v, "l1i", "L1I-TLB"),
        l1d_tlb=_tlb(v, "l1d", "L1D-TLB"),
        l2_tlb=_tlb(v, "l2", "L2-TLB"),
        super_tlb=_tlb(v, "super", "SP-TLB", sp_size),
        l2_tlb_latency=v["tlb.l2.latency"],
        flush_on_switch=v["tlb.policy.flush_on_switch"],
        pwc=PwcConfig(v["walker.pwc.enabled"], tuple(pwc_entries), v["walker.pwc.latency"]),
        walk_from_l2=v["walker.walk_from_l2"],
        pollution_off=v["walker.pollution_off"],
        nested=NestedConfig(v["walker.nested.enabled"], v["walker.nested.guest_levels"],
                            v["walker.nested.levels"]),
        caches=caches,
        frame_base=v["vmem.frame_base"],
        region_frames=v["vmem.region_frames"],
        shuffle_window=v["vmem.shuffle_window"],
    )
    try:
        cycle = CycleModel(v["engine.base_cpi"], v["engine.overlap"])
    except ValueError as exc:
        raise ConfigError("engine.base_cpi", str(exc)) from None
    engine = EngineConfig(max_events=v["engine.max_events"], ideal_tlb=v["engine.ideal_tlb"],
                          cycle=cycle, hist_bucket=v["engine.hist_bucket"],
                          superpage=v["synth.superpage"], seed=v["engine.seed"])
    if not v["cache.l4.enabled"] and "sweep.l4.size" in explicit:
        raise ConfigError("sweep.l4.size", "sweeping L4 needs cache.l4.enabled = true")
    sweep = SweepConfig(v["sweep.l4.size"], v["sweep.l4.block"], v["sweep.ideal_tlb"])

    trace = v["workload.trace"] or None
    synth_keys = sorted(k for k in explicit if k.startswith("synth."))
    if trace and synth_keys:
        raise ConfigError(synth_keys[0], "a trace workload takes no synth.* keys")
    synth = None
    if trace is None:
        try:
            synth = SynthConfig(
                seed=v["engine.seed"], footprint_bytes=v["synth.footprint"],
                page_locality=v["synth.page_locality"], zipf_s=v["synth.zipf_s"],
                intra_page=v["synth.intra_page"], inst_ratio=v["synth.inst_ratio"],
                write_ratio=v["synth.write_ratio"], code_bytes=v["synth.code_bytes"],
                switch_period=v["synth.switch_period"], threads=v["synth.threads"],
                base_va=v["synth.base_va"], superpage=v["synth.superpage"])
        except ValueError as exc:
            raise ConfigError("synth", str(exc)) from None
    settings = tuple(sorted(v.items()))
    return ExperimentConfig(settings, machine, engine, sweep, trace, synth, v["synth.events"])


def defaults() -> dict[str, Any]:
    return {k: entry.default for k, entry in SCHEMA.items()}


def parse_values(text: str) -> dict[str, Any]:
    """Typed values of the keys set in *text* (no defaults filled in)."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or f"line {lineno}", "expected 'key = value'")
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        if key in out:
            raise ConfigError(key, f"set twice (line {lineno})")
        try:
            out[key] = SCHEMA[key].parse(value.strip())
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    return out


def parse_config_text(text: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    given = parse_values(text)
    given.update(overrides or {})
    return build({**defaults(), **given}, frozenset(given))


def parse_config(path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    return parse_config_text(text, overrides)


def emit_config(config: ExperimentConfig, only_changed: bool = False) -> str:
    """Text that parses back to *config*.

    With ``only_changed`` keys at their default value are left out; a trace
    workload never emits ``synth.*`` keys since the two are exclusive.
    """
    lines = []
    for key, value in config.settings:
        if config.trace is not None and key.startswith("synth."):
            continue
        if only_changed and value == SCHEMA[key].default:
            continue
        lines.append(f"{key} = {SCHEMA[key].emit(value)}")
    return "\n".join(lines) + "\n"


def describe_defaults() -> str:
    """One line per key with its default, for ``--help``."""
    width = max(map(len, SCHEMA))
    rows = []
    for key, entry in SCHEMA.items():
        note = f"  ({entry.doc})" if entry.doc else ""
        default = entry.emit(entry.default) if entry.default != "" else '""'
        rows.append(f"  {key:<{width}} = {default}{note}")
    return "\n".join(rows)
