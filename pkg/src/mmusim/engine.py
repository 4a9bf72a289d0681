"""Simulation loop and metrics.

Per access: TLB lookup; on a miss, touch-allocate the page and walk the page
table (native or 2D); install the translation; access the data or
instruction line through the caches; classify the data access into one of
the four cache-outcome x TLB-outcome cases.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple

from .cachehier import AccessKind, AccessResult, CacheHierarchy, HierarchyConfig
from .errors import InvariantViolation, MismatchedRuns
from .tlb import TABLE2_TLBS, TlbConfig, TlbHierarchy, TlbLookup
from .vmem import VA_MASK, AddressSpace, PageSize, map_page, translate
from .walker import (
    PageWalkCache,
    PwcConfig,
    WalkResult,
    map_nested,
    nested_walk,
    walk,
)
from .workload import Access, Event, Switch

LOCALITY_SERVICES = ("L1", "L2", "L3", "L4", "MEM")
NATIVE_LEVELS = ("PL4", "PL3", "PL2", "PL1")
NESTED_LEVELS = ("nPL4", "nPL3", "nPL2", "nPL1")
NESTED_ASID_REGION = 4095


class InterplayCase(enum.Enum):
    """(cache outcome, TLB outcome) of a data access."""

    HIT_HIT = "HitHit"
    MISS_HIT = "MissHit"
    HIT_MISS = "HitMiss"
    MISS_MISS = "MissMiss"


# index: 2 * cache_hit + tlb_hit
_CASES = (InterplayCase.MISS_MISS, InterplayCase.MISS_HIT,
          InterplayCase.HIT_MISS, InterplayCase.HIT_HIT)


@dataclass(frozen=True)
class NestedConfig:
    enabled: bool = False
    guest_levels: int = 4
    nested_levels: int = 4


@dataclass(frozen=True)
class MachineConfig:
    l1i_tlb: TlbConfig = TABLE2_TLBS["l1i"]
    l1d_tlb: TlbConfig = TABLE2_TLBS["l1d"]
    l2_tlb: TlbConfig | None = TABLE2_TLBS["l2"]
    super_tlb: TlbConfig | None = TABLE2_TLBS["super"]
    l2_tlb_latency: int = 7
    flush_on_switch: bool = False
    pwc: PwcConfig = PwcConfig()
    walk_from_l2: bool = False
    pollution_off: bool = False
    nested: NestedConfig = NestedConfig()
    caches: HierarchyConfig = field(default_factory=HierarchyConfig)
    frame_base: int = 0x100
    region_frames: int = 1 << 20
    shuffle_window: int = 0


@dataclass(frozen=True)
class CycleModel:
    base_cpi: Fraction = Fraction(1)
    overlap: Fraction = Fraction(0)  # share of walk cycles hidden by the pipeline

    def __post_init__(self):
        object.__setattr__(self, "base_cpi", Fraction(self.base_cpi))
        object.__setattr__(self, "overlap", Fraction(self.overlap))
        if self.base_cpi <= 0 or not 0 <= self.overlap <= 1:
            raise ValueError("base_cpi must be > 0 and overlap in [0, 1]")


@dataclass(frozen=True)
class EngineConfig:
    max_events: int | None = None
    ideal_tlb: bool = False
    cycle: CycleModel = CycleModel()
    hist_bucket: int = 10
    superpage: bool = False  # touch-allocate 2 MiB leaves instead of 4 KiB
    seed: int = 0


class StepOutcome(NamedTuple):
    tlb: TlbLookup
    walk: WalkResult | None
    cache: AccessResult
    case: InterplayCase | None
    translation_cycles: int = 0


_IDEAL_HIT = TlbLookup("IDEAL")


@dataclass(frozen=True)
class Report:
    """Immutable result of one run; ``to_text`` is its canonical serialization."""

    config: tuple[tuple[str, str], ...]
    ideal_tlb: bool
    events: int
    instructions: int
    data_accesses: int
    inst_accesses: int
    switches: int
    flushed_entries: int
    walks: int
    walk_cycles: int            # translation cycles charged for TLB misses
    walker_cycles: int          # sum of WalkResult latencies alone
    walker_min: int
    walker_max: int
    access_cycles: int
    histogram: tuple[tuple[int, int, int], ...]
    locality_counts: tuple[tuple[str, tuple[int, ...]], ...]
    pte_lines: tuple[tuple[str, int], ...]
    tlb_counts: tuple[tuple[str, int, int], ...]  # structure, lookups, hits
    dtlb_lookups: int
    dtlb_hits: int
    itlb_lookups: int
    itlb_hits: int
    interplay: tuple[tuple[str, int], ...]
    l4_enabled: bool
    l4_accesses: int
    l4_hits: int
    l4_data_hits: int
    l4_data_hits_tlb_miss: int
    cache_stats: tuple[tuple[str, int, int, int, int], ...]
    base_cpi: Fraction
    overlap: Fraction

    @property
    def est_cycles(self) -> Fraction:
        return (self.instructions * self.base_cpi + self.access_cycles
                + (1 - self.overlap) * self.walk_cycles)

    @property
    def est_ipc(self) -> Fraction:
        if self.instructions == 0:
            return 1 / self.base_cpi
        return self.instructions / self.est_cycles

    @property
    def avg_walk_cycles(self) -> Fraction:
        return Fraction(self.walk_cycles, self.walks) if self.walks else Fraction(0)

    @property
    def l4_hit_rate(self) -> Fraction:
        return Fraction(self.l4_hits, self.l4_accesses) if self.l4_accesses else Fraction(0)

    @property
    def dtlb_hit_rate(self) -> Fraction:
        return Fraction(self.dtlb_hits, self.dtlb_lookups) if self.dtlb_lookups else Fraction(0)

    @property
    def itlb_hit_rate(self) -> Fraction:
        return Fraction(self.itlb_hits, self.itlb_lookups) if self.itlb_lookups else Fraction(0)

    def tlb_hit_rate(self, structure: str) -> Fraction:
        for name, lookups, hits in self.tlb_counts:
            if name == structure:
                return Fraction(hits, lookups) if lookups else Fraction(0)
        raise KeyError(structure)

    def locality(self) -> dict[str, dict[str, Fraction]]:
        """Per walk level, the fraction of its references served by each level."""
        out = {}
        for level, counts in self.locality_counts:
            total = sum(counts)
            out[level] = {s: (Fraction(c, total) if total else Fraction(0))
                          for s, c in zip(LOCALITY_SERVICES, counts)}
        return out

    def interplay_counts(self) -> dict[str, int]:
        return dict(self.interplay)

    def to_text(self) -> str:
        per1k, degenerate = l4hit_tlbmiss_per_1k(self)
        lines = [f"config.{k} = {v}" for k, v in self.config]
        scalars = [
            ("ideal_tlb", str(self.ideal_tlb).lower()),
            ("events", self.events),
            ("instructions", self.instructions),
            ("data_accesses", self.data_accesses),
            ("inst_accesses", self.inst_accesses),
            ("switches", self.switches),
            ("flushed_entries", self.flushed_entries),
            ("walks", self.walks),
            ("walk_cycles", self.walk_cycles),
            ("avg_walk_cycles", _fmt(self.avg_walk_cycles)),
            ("walker_cycles", self.walker_cycles),
            ("walker_min", self.walker_min),
            ("walker_max", self.walker_max),
            ("access_cycles", self.access_cycles),
            ("dtlb_hit_rate", _fmt(self.dtlb_hit_rate)),
            ("itlb_hit_rate", _fmt(self.itlb_hit_rate)),
        ]
        scalars += [(f"tlb.{name}.hit_rate", _fmt(Fraction(h, n) if n else Fraction(0)))
                    for name, n, h in self.tlb_counts]
        scalars += [(f"interplay.{k}", v) for k, v in self.interplay]
        scalars += [(f"pte_lines.{k}", v) for k, v in self.pte_lines]
        scalars += [(f"cache.{n}.{f}", v) for n, *vals in self.cache_stats
                    for f, v in zip(("accesses", "hits", "misses", "writebacks"), vals)]
        scalars += [
            ("l4_hit_rate", _fmt(self.l4_hit_rate)),
            ("l4_data_hits", self.l4_data_hits),
            ("l4_data_hits_tlb_miss", self.l4_data_hits_tlb_miss),
            ("l4hit_tlbmiss_per_1k", str(per1k)),
            ("l4hit_tlbmiss_per_1k_degenerate", str(degenerate).lower()),
            ("est_cycles", str(self.est_cycles)),
            ("est_ipc", _fmt(self.est_ipc)),
        ]
        lines += [f"{k} = {v}" for k, v in scalars]
        lines.append("")
        lines.append("[histogram]")
        lines.append(self.histogram_csv().rstrip("\n"))
        lines.append("")
        lines.append("[locality]")
        lines.append(self.locality_csv().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def histogram_csv(self) -> str:
        rows = ["bucket_low,bucket_high,count"]
        rows += [f"{lo},{hi},{c}" for lo, hi, c in self.histogram]
        return "\n".join(rows) + "\n"

    def locality_csv(self) -> str:
        rows = ["level,l1,l2,l3,l4,mem"]
        for level, fracs in self.locality().items():
            rows.append(level + "," + ",".join(_fmt(fracs[s]) for s in LOCALITY_SERVICES))
        return "\n".join(rows) + "\n"


def _fmt(x: Fraction) -> str:
    return f"{float(x):.10g}"


def l4hit_tlbmiss_per_1k(report: Report) -> tuple[Fraction, bool]:
    """Data accesses served by L4 whose translation missed, per 1000 L4 data hits.

    Returns ``(value, degenerate)``; with no L4 data hits the value is 0 and
    ``degenerate`` is True.
    """
    if report.l4_data_hits == 0:
        return Fraction(0), True
    return Fraction(1000 * report.l4_data_hits_tlb_miss, report.l4_data_hits), False


def check_report(report: Report) -> None:
    """Raise InvariantViolation unless *report*'s counters are consistent."""
    def need(ok: bool, what: str) -> None:
        if not ok:
            raise InvariantViolation(what)

    need(sum(c for _, _, c in report.histogram) == report.walks,
         "histogram mass differs from the walk count")
    misses = (report.dtlb_lookups - report.dtlb_hits) + (report.itlb_lookups - report.itlb_hits)
    need(report.walks == (0 if report.ideal_tlb else misses),
         "walk count differs from TLB misses")
    need(report.instructions == report.data_accesses + report.inst_accesses,
         "instruction count differs from access count")
    if report.l4_enabled:
        need(sum(n for _, n in report.interplay) == report.data_accesses,
             "interplay cases do not partition the data accesses")
    for level, fracs in report.locality().items():
        total = sum(fracs.values())
        need(total in (0, 1), f"{level} locality fractions sum to {total}")
    lines = [n for lv, n in report.pte_lines if lv in NATIVE_LEVELS]
    # a superpage leaf ends the walk early, so deeper levels may be untouched
    touched = [n for n in lines if n]
    need(touched == sorted(touched) and lines[:len(touched)] == touched,
         f"PTE line fan-out is not monotone: {lines}")


def normalized_ipc(base: Report, variant: Report) -> Fraction:
    """IPC of *variant* relative to *base* over the same event stream."""
    if base.instructions != variant.instructions:
        raise MismatchedRuns(
            f"instruction counts differ: {base.instructions} vs {variant.instructions}")
    if base.instructions == 0:
        return Fraction(1)
    return base.est_cycles / variant.est_cycles


class Simulator:
    """One simulation instance: address spaces, TLBs, PWC, caches, counters."""

    def __init__(self, machine: MachineConfig | None = None,
                 engine: EngineConfig | None = None,
                 config_echo: Iterable[tuple[str, str]] = ()):
        self.machine = m = machine or MachineConfig()
        self.engine = e = engine or EngineConfig()
        self.config_echo = tuple(config_echo)
        self.tlbs = TlbHierarchy(m.l1i_tlb, m.l1d_tlb, m.l2_tlb, m.super_tlb)
        self.pwc = PageWalkCache(m.pwc) if m.pwc.enabled else None
        self.caches = CacheHierarchy(m.caches, walk_from_l2=m.walk_from_l2,
                                     pollution_off=m.pollution_off or e.ideal_tlb)
        self.nested = m.nested.enabled and m.nested.nested_levels > 0
        if self.nested:
            self.guest_size = PageSize.from_depth(m.nested.guest_levels)
            self.nested_size = PageSize.from_depth(m.nested.nested_levels)
            self.host = self._new_space(NESTED_ASID_REGION, asid=0)
        self.page_size = PageSize.PAGE_2M if e.superpage else PageSize.PAGE_4K
        if self.nested:
            self.page_size = self.guest_size
        self.spaces: dict[int, AddressSpace] = {}
        self.tid_asid: dict[int, int] = {}
        self._ideal_frames: dict[tuple[int, int], int] = {}
        self._touched: set[int] = set()
        self._l2_penalty = m.l2_tlb_latency if m.l2_tlb is not None else 0
        self._bucket = e.hist_bucket

        self.events = 0
        self.data_accesses = 0
        self.inst_accesses = 0
        self.switches = 0
        self.flushed = 0
        self.walks = 0
        self.walk_cycles = 0
        self.walker_cycles = 0
        self.walker_min = 0
        self.walker_max = 0
        self.access_cycles = 0
        self.hist: Counter = Counter()
        self.locality: Counter = Counter()
        self.pte_lines: dict[str, set[int]] = {}
        self.dtlb = [0, 0]
        self.itlb = [0, 0]
        self.interplay = [0, 0, 0, 0]
        self.l4_data_hits = 0
        self.l4_data_hits_tlb_miss = 0

    def _new_space(self, region: int, asid: int) -> AddressSpace:
        m = self.machine
        aspace = AddressSpace.create(region, frame_base=m.frame_base,
                                     region_frames=m.region_frames,
                                     shuffle_window=m.shuffle_window, seed=self.engine.seed)
        aspace.asid = asid
        return aspace

    def space(self, asid: int) -> AddressSpace:
        aspace = self.spaces.get(asid)
        if aspace is None:
            aspace = self.spaces[asid] = self._new_space(asid, asid)
        return aspace

    def _touch(self, aspace: AddressSpace, va: int) -> None:
        key = (aspace.asid << 36) | (va >> 12)
        if key in self._touched:
            return
        self._touched.add(key)
        if self.nested:
            map_nested(aspace, self.host, va, self.guest_size, self.nested_size)
        else:
            map_page(aspace, va, self.page_size)

    def _translate_ideal(self, asid: int, va: int) -> int:
        key = (asid, va >> 12)
        frame = self._ideal_frames.get(key)
        if frame is None:
            aspace = self.space(asid)
            self._touch(aspace, va)
            pa = translate(aspace, va)
            if self.nested:
                pa = translate(self.host, pa)
            frame = self._ideal_frames[key] = pa >> 12
        return (frame << 12) | (va & 0xFFF)

    def _miss(self, asid: int, va: int, kind: AccessKind) -> WalkResult:
        aspace = self.space(asid)
        self._touch(aspace, va)
        if self.nested:
            result = nested_walk(aspace, self.host, va, self.caches)
        else:
            result = walk(aspace, va, self.caches, self.pwc)
        size = result.size
        if size is PageSize.PAGE_4K:
            self.tlbs.install(asid, va >> 12, result.ppn, size, kind)
        elif self.tlbs.superpage is not None:
            self.tlbs.install(asid, va >> size.offset_bits, result.ppn, size, kind)
        else:
            sub = (va >> 12) & (size.frames - 1)
            self.tlbs.install(asid, va >> 12, (result.ppn * size.frames) | sub,
                             PageSize.PAGE_4K, kind)
        self._record_walk(result)
        return result

    def _record_walk(self, result: WalkResult) -> None:
        lat = result.latency_cycles
        cost = self._l2_penalty + lat
        if self.walks == 0:
            self.walker_min = self.walker_max = lat
        elif lat < self.walker_min:
            self.walker_min = lat
        elif lat > self.walker_max:
            self.walker_max = lat
        self.walks += 1
        self.walker_cycles += lat
        self.walk_cycles += cost
        self.hist[cost // self._bucket] += 1
        locality = self.locality
        pte_lines = self.pte_lines
        for level, service, paddr, _, dim in result.refs:
            if dim == "nested":
                level = "n" + level
            locality[(level, service)] += 1
            lines = pte_lines.get(level)
            if lines is None:
                lines = pte_lines[level] = set()
            lines.add(paddr >> 6)

    def step(self, event: Event) -> StepOutcome | None:
        """Apply one event; Switch events return None."""
        self.events += 1
        if type(event) is Switch:
            self.switches += 1
            self.tid_asid[event.tid] = event.asid
            if self.machine.flush_on_switch:
                self.flushed += self.tlbs.flush()
                if self.pwc is not None:
                    self.pwc.flush()
            return None
        asid = self.tid_asid.get(event.tid, event.tid)
        kind = event.kind
        va = event.va & VA_MASK
        walk_result = None
        cost = 0
        if self.engine.ideal_tlb:
            look = _IDEAL_HIT
            paddr = self._translate_ideal(asid, va)
        else:
            look = self.tlbs.lookup(asid, va, kind)
            if look.level is None:
                walk_result = self._miss(asid, va, kind)
                cost = self._l2_penalty + walk_result.latency_cycles
                size, ppn = walk_result.size, walk_result.ppn
            else:
                size, ppn = look.size, look.ppn
            paddr = (ppn << size.offset_bits) | (va & (size.bytes - 1))
        res = self.caches.access(paddr, kind, event.write)
        self.access_cycles += res.cycles
        tlb_hit = walk_result is None
        case = None
        if kind is AccessKind.DATA:
            self.data_accesses += 1
            self.dtlb[0] += 1
            self.dtlb[1] += tlb_hit
            idx = 2 * (res.service != "MEM") + tlb_hit
            self.interplay[idx] += 1
            case = _CASES[idx]
            if res.service == "L4":
                self.l4_data_hits += 1
                self.l4_data_hits_tlb_miss += not tlb_hit
        else:
            self.inst_accesses += 1
            self.itlb[0] += 1
            self.itlb[1] += tlb_hit
        return StepOutcome(look, walk_result, res, case, cost)

    def run(self, events: Iterable[Event]) -> Report:
        limit = self.engine.max_events
        step = self.step
        if limit is None:
            for event in events:
                step(event)
        elif limit > 0:
            for i, event in enumerate(events, 1):
                step(event)
                if i >= limit:
                    break
        return self.report()

    def report(self) -> Report:
        width = self.engine.hist_bucket
        hist = ()
        if self.hist:
            top = max(self.hist)
            hist = tuple((b * width, (b + 1) * width, self.hist.get(b, 0))
                         for b in range(min(self.hist), top + 1))
        levels = list(NATIVE_LEVELS) + (list(NESTED_LEVELS) if self.nested else [])
        loc = tuple((lv, tuple(self.locality.get((lv, s), 0) for s in LOCALITY_SERVICES))
                    for lv in levels)
        snap = self.caches.snapshot()["levels"]
        l4 = snap.get("L4", {"accesses": 0, "hits": 0})
        return Report(
            config=self.config_echo,
            ideal_tlb=self.engine.ideal_tlb,
            events=self.events,
            instructions=self.data_accesses + self.inst_accesses,
            data_accesses=self.data_accesses,
            inst_accesses=self.inst_accesses,
            switches=self.switches,
            flushed_entries=self.flushed,
            walks=self.walks,
            walk_cycles=self.walk_cycles,
            walker_cycles=self.walker_cycles,
            walker_min=self.walker_min,
            walker_max=self.walker_max,
            access_cycles=self.access_cycles,
            histogram=hist,
            locality_counts=loc,
            pte_lines=tuple((lv, len(self.pte_lines.get(lv, ()))) for lv in levels),
            tlb_counts=tuple((name, t.lookups, t.hits)
                             for name, t in self.tlbs.structures().items()),
            dtlb_lookups=self.dtlb[0],
            dtlb_hits=self.dtlb[1],
            itlb_lookups=self.itlb[0],
            itlb_hits=self.itlb[1],
            interplay=tuple((c.value, self.interplay[_CASES.index(c)]) for c in InterplayCase),
            l4_enabled=self.machine.caches.l4 is not None,
            l4_accesses=l4["accesses"],
            l4_hits=l4["hits"],
            l4_data_hits=self.l4_data_hits,
            l4_data_hits_tlb_miss=self.l4_data_hits_tlb_miss,
            cache_stats=tuple((n, s["accesses"], s["hits"], s["misses"], s["writebacks"])
                              for n, s in snap.items()),
            base_cpi=self.engine.cycle.base_cpi,
            overlap=self.engine.cycle.overlap,
        )


def run(machine: MachineConfig | None, engine: EngineConfig | None,
        events: Iterable[Event], config_echo: Iterable[tuple[str, str]] = ()) -> Report:
    return Simulator(machine, engine, config_echo).run(events)
