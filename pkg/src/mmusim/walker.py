"""Hardware page-table walker with per-level page-walk caches.

A native walk reads one PTE per level, root first, through the cache
hierarchy as ``AccessKind.PTW`` references.  The page-walk cache (PWC) holds
upper-level pointers (PL4, PL3 and PL2 entries that point at tables) keyed by
ASID and index prefix, so a hit lets the walk start at a deeper table.  The
probe cost is charged only when the PWC hits; a miss overlaps the first PTE
read.

Nested (2D) walks translate every guest table address and the final guest
physical address through the nested page table, issuing
``(g + 1) * n + g`` references for g guest and n nested levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .cachehier import AccessKind, CacheHierarchy
from .errors import PageFault
from .kernels import LruSets
from .vmem import (
    FRAME_SHIFT,
    LEVEL_NAMES,
    PTE_BYTES,
    VA_MASK,
    AddressSpace,
    PageSize,
    map_page,
    split_address,
    translate,
    walk_path,
)

_PTW = AccessKind.PTW
# bits of va >> 21 that form the PL4 / PL4+PL3 / PL4+PL3+PL2 index prefix
_PREFIX_MASK = (0x7FC0000, 0x7FFFE00, 0x7FFFFFF)
_SHIFTS = (39, 30, 21, 12)


@dataclass(frozen=True)
class PwcConfig:
    enabled: bool = True
    entries_per_level: tuple[int, int, int] = (16, 16, 16)  # PL4, PL3, PL2
    latency: int = 1


class WalkRef(NamedTuple):
    level: str    # PL4..PL1
    service: str  # L1..L4 or MEM
    paddr: int
    cycles: int
    dim: str = "native"  # "native", "guest" or "nested"


class WalkResult(NamedTuple):
    latency_cycles: int
    refs: tuple[WalkRef, ...]
    skipped_levels: int
    ppn: int
    size: PageSize
    pwc_cycles: int = 0


class PageWalkCache:
    """Three fully associative LRU arrays of upper-level table pointers.

    Level ``k`` (0 = PL4) maps ``(asid, indices[0..k])`` to the physical base
    of the table at level ``k + 1``.
    """

    def __init__(self, config: PwcConfig = PwcConfig()):
        self.config = config
        self._levels = [LruSets(1, n) for n in config.entries_per_level]
        self.lookups = 0
        self.hits = [0, 0, 0]

    def access(self, asid: int, va: int) -> tuple[int, int]:
        """Deepest cached pointer for *va*: ``(levels_skipped, table_addr)``.

        ``(0, -1)`` on a miss.  Three skipped levels means the PL2 pointer hit
        and only the PL1 entry remains to be read.
        """
        if not self.config.enabled:
            return 0, -1
        self.lookups += 1
        base = asid << 27
        prefix = (va & VA_MASK) >> 21
        levels = self._levels
        table = levels[2].get(base | prefix)
        if table != -1:
            self.hits[2] += 1
            return 3, table
        table = levels[1].get(base | (prefix & 0x7FFFE00))
        if table != -1:
            self.hits[1] += 1
            return 2, table
        table = levels[0].get(base | (prefix & 0x7FC0000))
        if table != -1:
            self.hits[0] += 1
            return 1, table
        return 0, -1

    def lookup_level(self, asid: int, va: int) -> str | None:
        """Name of the deepest level whose pointer is cached, without side effects."""
        va &= VA_MASK
        for k in (2, 1, 0):
            if self._levels[k].peek((asid << 27) | ((va >> 21) & _PREFIX_MASK[k])) != -1:
                return LEVEL_NAMES[k]
        return None

    def fill(self, asid: int, va: int, level: int, table: int) -> None:
        """Record that the level-*level* entry for *va* points at *table*."""
        if self.config.enabled and level < 3:
            key = (asid << 27) | (((va & VA_MASK) >> 21) & _PREFIX_MASK[level])
            self._levels[level].put(key, table)

    def flush(self, asid: int | None = None) -> int:
        n = 0
        for arr in self._levels:
            if asid is None:
                n += len(arr)
                arr.clear()
                continue
            for key in arr.keys():
                if key >> 27 == asid:
                    arr.remove(key)
                    n += 1
        return n


def walk(aspace: AddressSpace, va: int, hier: CacheHierarchy,
         pwc: PageWalkCache | None = None) -> WalkResult:
    """Walk *aspace*'s page table for *va*, charging each PTE read to *hier*."""
    va &= VA_MASK
    nodes = aspace.page_table.nodes
    asid = aspace.asid
    skip, table = pwc.access(asid, va) if pwc is not None else (0, -1)
    pwc_cycles = pwc.config.latency if skip else 0
    if not skip:
        table = aspace.page_table.root
    ptw = hier.ptw
    refs = []
    latency = pwc_cycles
    for level in range(skip, 4):
        idx = (va >> _SHIFTS[level]) & 0x1FF
        pte_addr = table + PTE_BYTES * idx
        service, cycles = ptw(pte_addr)
        refs.append(WalkRef(LEVEL_NAMES[level], service, pte_addr, cycles))
        latency += cycles
        entry = nodes[table][idx]
        if entry is None or not entry.present:
            raise PageFault(va, level)
        if entry.leaf:
            size = entry.size
            return WalkResult(latency, tuple(refs), skip, entry.target >> size.offset_bits,
                              size, pwc_cycles)
        table = entry.target
        if pwc is not None and level < 3:
            pwc._levels[level].put((asid << 27) | ((va >> 21) & _PREFIX_MASK[level]), table)
    raise PageFault(va, 3)


def ref_count(g: int, n: int) -> int:
    """Memory references of a full 2D walk with g guest and n nested levels."""
    if g < 1 or n < 0:
        raise ValueError("need g >= 1 and n >= 0")
    return g if n == 0 else (g + 1) * n + g


def _nested_translate(n_aspace: AddressSpace, gpa: int, hier: CacheHierarchy,
                      refs: list[WalkRef]) -> tuple[int, int, PageSize]:
    """Walk the nested table for *gpa*; returns (spa, cycles, leaf size)."""
    indices, _ = split_address(gpa)
    nodes = n_aspace.page_table.nodes
    table = n_aspace.page_table.root
    cycles = 0
    for level in range(4):
        pte_addr = table + PTE_BYTES * indices[level]
        res = hier.access(pte_addr, _PTW)
        refs.append(WalkRef(LEVEL_NAMES[level], res.service, pte_addr, res.cycles, "nested"))
        cycles += res.cycles
        entry = nodes[table][indices[level]]
        if entry is None or not entry.present:
            raise PageFault(gpa, level)
        if entry.leaf:
            size = entry.size
            return entry.target | (gpa & (size.bytes - 1)), cycles, size
        table = entry.target
    raise PageFault(gpa, 3)


def nested_walk(g_aspace: AddressSpace, n_aspace: AddressSpace, gva: int,
                hier: CacheHierarchy, pwc: PageWalkCache | None = None) -> WalkResult:
    """Two-dimensional walk of guest virtual *gva* to a system physical page.

    Each guest table address (starting with the guest root) is first
    translated through the nested table, then the guest PTE is read at the
    resulting system address; finally the guest physical data address is
    translated.  Nested walks never consult or fill *pwc*; the parameter
    only mirrors :func:`walk`.  The resulting page size is
    the smaller of the guest and nested leaf sizes.
    """
    indices, _ = split_address(gva)
    nodes = g_aspace.page_table.nodes
    refs: list[WalkRef] = []
    latency = 0
    table = g_aspace.page_table.root
    for level in range(4):
        spa_table, cyc, _ = _nested_translate(n_aspace, table, hier, refs)
        latency += cyc
        pte_addr = spa_table + PTE_BYTES * indices[level]
        res = hier.access(pte_addr, _PTW)
        refs.append(WalkRef(LEVEL_NAMES[level], res.service, pte_addr, res.cycles, "guest"))
        latency += res.cycles
        entry = nodes[table][indices[level]]
        if entry is None or not entry.present:
            raise PageFault(gva, level)
        if entry.leaf:
            gsize = entry.size
            gpa = entry.target | ((gva & VA_MASK) & (gsize.bytes - 1))
            spa, cyc, nsize = _nested_translate(n_aspace, gpa, hier, refs)
            latency += cyc
            size = gsize if gsize.bytes <= nsize.bytes else nsize
            return WalkResult(latency, tuple(refs), 0, spa >> size.offset_bits, size)
        table = entry.target
    raise PageFault(gva, 3)


def map_nested(g_aspace: AddressSpace, n_aspace: AddressSpace, gva: int,
               guest_size: PageSize = PageSize.PAGE_4K,
               nested_size: PageSize = PageSize.PAGE_4K) -> None:
    """Touch-allocate *gva* in the guest and every guest frame a 2D walk needs."""
    path = map_page(g_aspace, gva, guest_size)
    for pte_addr in path.pte_addrs:
        map_page(n_aspace, (pte_addr >> FRAME_SHIFT) << FRAME_SHIFT, nested_size)
    map_page(n_aspace, translate(g_aspace, gva), nested_size)


def check_walk(aspace: AddressSpace, va: int, result: WalkResult) -> bool:
    """True when *result* reads exactly the tail of the page table's walk path."""
    path = walk_path(aspace, va)
    tail = path.pte_addrs[result.skipped_levels:]
    return (tuple(r.paddr for r in result.refs) == tail
            and result.ppn == path.ppn and result.size is path.size)
