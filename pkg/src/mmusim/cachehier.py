"""Set-associative writeback cache stack (L1I/L1D, L2, L3, optional L4).

Non-inclusive, allocate-on-fill everywhere: a block is installed into every
level probed above the level that supplied it.  Latency is additive: each
probed level costs its hit latency and a full miss adds the flat memory
latency.  Dirty evictions are counted but add no cycles.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import InvalidGeometry
from .kernels import CacheStack, LruSets

SERVICE_LEVELS = ("L1", "L2", "L3", "L4", "MEM")

# 50 ns DDR2 at 3.9 GHz
DEFAULT_MEM_LATENCY = 195


class AccessKind(enum.Enum):
    INSTRUCTION = "I"
    DATA = "D"
    PTW = "P"


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


@dataclass(frozen=True)
class CacheConfig:
    name: str
    size_bytes: int
    associativity: int
    block_bytes: int
    latency_cycles: int
    writeback: bool = True

    def __post_init__(self):
        if not _is_pow2(self.block_bytes):
            raise InvalidGeometry(f"{self.name}: block size {self.block_bytes} is not a power of two")
        if self.associativity < 1 or self.size_bytes < 1:
            raise InvalidGeometry(f"{self.name}: size and associativity must be positive")
        if self.size_bytes % (self.associativity * self.block_bytes):
            raise InvalidGeometry(
                f"{self.name}: {self.size_bytes} B is not a multiple of "
                f"{self.associativity} ways x {self.block_bytes} B")
        if self.latency_cycles < 0:
            raise InvalidGeometry(f"{self.name}: negative latency")

    @property
    def num_sets(self) -> int:
        return self.size_bytes // (self.associativity * self.block_bytes)

    @property
    def block_shift(self) -> int:
        return self.block_bytes.bit_length() - 1


def configure_l4(size_bytes: int, block_bytes: int = 64, assoc: int = 16,
                 latency: int = 20) -> CacheConfig:
    """Die-stacked DRAM cache geometry; the set count must be a power of two."""
    unit = assoc * block_bytes
    if unit <= 0 or size_bytes % unit or not _is_pow2(size_bytes // unit):
        raise InvalidGeometry(
            f"L4: {size_bytes} B is not a power-of-two multiple of "
            f"{assoc} ways x {block_bytes} B")
    return CacheConfig("L4", size_bytes, assoc, block_bytes, latency)


# 4 MiB is not a multiple of 12 x 64 B; 5461 sets is the largest fit.
_L3_SETS = (4 << 20) // (12 * 64)


@dataclass(frozen=True)
class HierarchyConfig:
    l1i: CacheConfig = CacheConfig("L1I", 32 << 10, 4, 64, 2)
    l1d: CacheConfig = CacheConfig("L1D", 32 << 10, 8, 64, 4)
    l2: CacheConfig = CacheConfig("L2", 256 << 10, 8, 64, 6)
    l3: CacheConfig = CacheConfig("L3", _L3_SETS * 12 * 64, 12, 64, 9)
    l4: CacheConfig | None = field(default_factory=lambda: configure_l4(256 << 20))
    mem_latency_cycles: int = DEFAULT_MEM_LATENCY


class AccessResult(NamedTuple):
    service: str
    cycles: int
    writebacks: int = 0


@dataclass
class LevelStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0


class CacheHierarchy:
    """Physical-address cache stack shared by instruction, data and walker refs.

    ``walk_from_l2`` starts page-walk references at L2 instead of L1D;
    ``pollution_off`` makes page-walk references read-only probes that never
    change any cache state.
    """

    def __init__(self, config: HierarchyConfig | None = None, *,
                 walk_from_l2: bool = False, pollution_off: bool = False):
        self.config = config or HierarchyConfig()
        self.walk_from_l2 = walk_from_l2
        self.pollution_off = pollution_off
        cfg = self.config
        shared = [cfg.l2, cfg.l3] + ([cfg.l4] if cfg.l4 is not None else [])
        self._arrays = {c.name: LruSets(c.num_sets, c.associativity)
                        for c in [cfg.l1i, cfg.l1d] + shared}
        self.level_names = ["L1"] + [c.name for c in shared]
        self.services = tuple(self.level_names) + ("MEM",)

        def stack(top):
            confs = [top] + shared
            return CacheStack([self._arrays[c.name] for c in confs],
                              [c.block_shift for c in confs],
                              [c.latency_cycles for c in confs],
                              cfg.mem_latency_cycles)

        self._istack = stack(cfg.l1i)
        self._dstack = stack(cfg.l1d)
        self._depth = len(shared) + 1
        self._counts = [0] * 64
        self._ptw_start = 1 if walk_from_l2 else 0
        self._ptw_alloc = not pollution_off

    def ptw(self, paddr: int) -> tuple[str, int]:
        """Page-walk reference; ``(service, cycles)``."""
        start = self._ptw_start
        hit, cycles, _ = self._dstack.access(start, paddr, False, self._ptw_alloc)
        self._counts[16 + 8 * start + hit] += 1
        return self.services[hit], cycles

    def access(self, paddr: int, kind: AccessKind = AccessKind.DATA,
               write: bool = False) -> AccessResult:
        if kind is AccessKind.DATA:
            hit, cycles, wb = self._dstack.access(0, paddr, write, True)
            self._counts[8 + hit] += 1
        elif kind is AccessKind.INSTRUCTION:
            hit, cycles, wb = self._istack.access(0, paddr, write, True)
            self._counts[hit] += 1
        else:
            start = self._ptw_start
            hit, cycles, wb = self._dstack.access(start, paddr, write, self._ptw_alloc)
            self._counts[16 + 8 * start + hit] += 1
        return AccessResult(self.services[hit], cycles, wb)

    def _outcomes(self):
        """Yield ``(kind, start, hit_level, count)`` for every nonzero tally."""
        for idx, count in enumerate(self._counts):
            if count:
                row, hit = divmod(idx, 8)
                if row == 0:
                    yield AccessKind.INSTRUCTION, 0, hit, count
                elif row == 1:
                    yield AccessKind.DATA, 0, hit, count
                else:
                    yield AccessKind.PTW, row - 2, hit, count

    def reset_stats(self) -> None:
        self._counts = [0] * 64
        self._istack.writebacks = [0] * self._depth
        self._dstack.writebacks = [0] * self._depth

    def _level_key(self, kind: AccessKind, level: int) -> str:
        if level == 0:
            return "L1I" if kind is AccessKind.INSTRUCTION else "L1D"
        return self.level_names[level]

    def snapshot(self) -> dict:
        """Per-level and per-(level, kind) counters; accesses = hits + misses."""
        names = ["L1I", "L1D"] + self.level_names[1:]
        levels = {n: LevelStats() for n in names}
        by_kind = {(n, k.name.lower()): LevelStats() for n in names for k in AccessKind}
        for kind, start, hit, count in self._outcomes():
            for level in range(start, min(hit, self._depth - 1) + 1):
                name = self._level_key(kind, level)
                for st in (levels[name], by_kind[(name, kind.name.lower())]):
                    st.accesses += count
                    if level == hit:
                        st.hits += count
                    else:
                        st.misses += count
        for i, n in enumerate(self.level_names):
            if i == 0:
                levels["L1I"].writebacks = self._istack.writebacks[0]
                levels["L1D"].writebacks = self._dstack.writebacks[0]
            else:
                levels[n].writebacks = self._istack.writebacks[i] + self._dstack.writebacks[i]
        return {
            "levels": {n: vars(s).copy() for n, s in levels.items()},
            "by_kind": {f"{n}.{k}": vars(s).copy() for (n, k), s in by_kind.items()},
        }

    def contains(self, level: str, paddr: int) -> bool:
        cfg = {c.name: c for c in self._configs()}[level]
        return (paddr >> cfg.block_shift) in self._arrays[level]

    def _configs(self):
        cfg = self.config
        return [c for c in (cfg.l1i, cfg.l1d, cfg.l2, cfg.l3, cfg.l4) if c is not None]

    def state_hash(self) -> str:
        """Digest of every level's content and LRU order."""
        h = hashlib.sha256()
        for name in sorted(self._arrays):
            h.update(name.encode())
            h.update(repr(self._arrays[name].state()).encode())
        return h.hexdigest()
