"""48-bit virtual addresses, 4-level radix page tables and frame allocation.

The page table is a sparse tree of 4 KiB table pages, each holding 512
eight-byte entries.  Table pages and data frames come from the same
per-address-space frame allocator, so page-table lines compete with data in
the caches exactly like ordinary memory.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .errors import ConflictingMapping, PageFault

VA_BITS = 48
VA_MASK = (1 << VA_BITS) - 1
INDEX_BITS = 9
ENTRIES_PER_TABLE = 1 << INDEX_BITS
PTE_BYTES = 8
FRAME_SHIFT = 12
FRAME_BYTES = 1 << FRAME_SHIFT

LEVEL_NAMES = ("PL4", "PL3", "PL2", "PL1")


class PageSize(enum.Enum):
    """Translation granularity; value is ``(offset_bits, walk_depth)``."""

    PAGE_4K = (12, 4)
    PAGE_2M = (21, 3)
    PAGE_1G = (30, 2)

    def __init__(self, offset_bits: int, depth: int):
        # plain attributes: these are read on every simulated access
        self.offset_bits = offset_bits
        self.depth = depth
        self.bytes = 1 << offset_bits
        self.frames = 1 << (offset_bits - FRAME_SHIFT)
        self.code = (offset_bits - FRAME_SHIFT) // 9

    @classmethod
    def from_depth(cls, depth: int) -> "PageSize":
        for size in cls:
            if size.depth == depth:
                return size
        raise ValueError(f"no page size walks {depth} levels")

    @classmethod
    def from_bytes(cls, nbytes: int) -> "PageSize":
        for size in cls:
            if size.bytes == nbytes:
                return size
        raise ValueError(f"unsupported page size {nbytes} bytes")


def split_address(va: int, size: PageSize = PageSize.PAGE_4K) -> tuple[list[int], int]:
    """Split *va* into root-first 9-bit table indices and the page offset.

    Bits 48-63 are ignored.  A 4 KiB page yields four indices, 2 MiB three
    and 1 GiB two.
    """
    va &= VA_MASK
    offset = va & (size.bytes - 1)
    indices = [(va >> 39) & 511, (va >> 30) & 511, (va >> 21) & 511, (va >> 12) & 511]
    return indices[:size.depth], offset


def join_address(indices: list[int], offset: int, size: PageSize = PageSize.PAGE_4K) -> int:
    """Inverse of :func:`split_address`."""
    va = 0
    for idx in indices:
        va = (va << INDEX_BITS) | idx
    return (va << size.offset_bits) | offset


@dataclass(slots=True)
class PTE:
    present: bool
    leaf: bool
    target: int  # physical byte address of the next table page or of the data page
    size: PageSize | None = None


@dataclass
class PageTable:
    root: int
    nodes: dict[int, list[PTE | None]] = field(default_factory=dict)

    def new_node(self, addr: int) -> None:
        self.nodes[addr] = [None] * ENTRIES_PER_TABLE


@dataclass(frozen=True, slots=True)
class WalkPath:
    pte_addrs: tuple[int, ...]
    ppn: int  # in units of ``size``
    size: PageSize

    @property
    def page_base(self) -> int:
        return self.ppn << self.size.offset_bits


class FrameAllocator:
    """Bump allocator over a private range of 4 KiB physical frames.

    With ``shuffle_window > 0`` single frames are handed out from seeded
    shuffles of consecutive windows, which scatters placement the way a
    fragmented physical memory would.  Contiguous (superpage) allocations
    always come aligned from the bump cursor.
    """

    def __init__(self, base_frame: int = 0x100, limit_frames: int = 1 << 20,
                 shuffle_window: int = 0, seed: int = 0):
        self.base_frame = base_frame
        self.limit = base_frame + limit_frames
        self.cursor = base_frame
        self.shuffle_window = shuffle_window
        self._rng = random.Random(seed)
        self._pool: list[int] = []
        self.allocated = 0

    def _take(self, n: int, align: int = 1) -> int:
        start = -(-self.cursor // align) * align
        if start + n > self.limit:
            raise MemoryError(
                f"frame range [{self.base_frame:#x}, {self.limit:#x}) exhausted")
        self.cursor = start + n
        return start

    def alloc_frame(self) -> int:
        self.allocated += 1
        if self.shuffle_window <= 1:
            return self._take(1)
        if not self._pool:
            start = self._take(self.shuffle_window)
            self._pool = list(range(start, start + self.shuffle_window))
            self._rng.shuffle(self._pool)
        return self._pool.pop()

    def alloc_contiguous(self, nframes: int) -> int:
        """Allocate *nframes* frames aligned to *nframes* (a power of two)."""
        self.allocated += nframes
        return self._take(nframes, align=nframes)


class AddressSpace:
    """One translation context: an ASID, its page table and its frames."""

    def __init__(self, asid: int, allocator: FrameAllocator | None = None):
        self.asid = asid
        self.allocator = allocator if allocator is not None else FrameAllocator()
        self.table_pages: set[int] = set()
        root = self.allocator.alloc_frame() << FRAME_SHIFT
        self.page_table = PageTable(root=root)
        self.table_pages.add(root)
        self.page_table.new_node(root)

    def _new_table(self) -> int:
        addr = self.allocator.alloc_frame() << FRAME_SHIFT
        self.table_pages.add(addr)
        self.page_table.new_node(addr)
        return addr

    @property
    def root(self) -> int:
        return self.page_table.root

    @classmethod
    def create(cls, asid: int, frame_base: int = 0x100, region_frames: int = 1 << 20,
               shuffle_window: int = 0, seed: int = 0) -> "AddressSpace":
        """An address space whose frames are disjoint from every other ASID's."""
        alloc = FrameAllocator(base_frame=frame_base + asid * region_frames,
                               limit_frames=region_frames,
                               shuffle_window=shuffle_window, seed=seed * 1_000_003 + asid)
        return cls(asid, alloc)


def map_page(aspace: AddressSpace, va: int, size: PageSize = PageSize.PAGE_4K) -> WalkPath:
    """Ensure *va* is mapped by a leaf of *size*, allocating tables on demand.

    Idempotent for an already-mapped *va*; raises :class:`ConflictingMapping`
    if *va* lies under an existing leaf of a different size.
    """
    indices, _ = split_address(va, size)
    nodes = aspace.page_table.nodes
    table = aspace.page_table.root
    pte_addrs = []
    last = size.depth - 1
    for level, idx in enumerate(indices):
        pte_addrs.append(table + PTE_BYTES * idx)
        entry = nodes[table][idx]
        if level == last:
            if entry is None:
                frame = (aspace.allocator.alloc_frame() if size is PageSize.PAGE_4K
                         else aspace.allocator.alloc_contiguous(size.frames))
                entry = PTE(True, True, frame << FRAME_SHIFT, size)
                nodes[table][idx] = entry
            elif not entry.leaf or entry.size is not size:
                raise ConflictingMapping(
                    f"va {va:#x}: level {LEVEL_NAMES[level]} already holds a "
                    f"{'table' if not entry.leaf else entry.size.name} entry")
            return WalkPath(tuple(pte_addrs), entry.target >> size.offset_bits, size)
        if entry is None:
            entry = PTE(True, False, aspace._new_table())
            nodes[table][idx] = entry
        elif entry.leaf:
            raise ConflictingMapping(
                f"va {va:#x} lies inside an existing {entry.size.name} page")
        table = entry.target
    raise AssertionError("unreachable")


def walk_path(aspace: AddressSpace, va: int) -> WalkPath:
    """Root-first PTE addresses and final frame for a mapped *va* (pure)."""
    indices, _ = split_address(va)
    nodes = aspace.page_table.nodes
    table = aspace.page_table.root
    pte_addrs = []
    for level, idx in enumerate(indices):
        pte_addrs.append(table + PTE_BYTES * idx)
        entry = nodes[table][idx]
        if entry is None or not entry.present:
            raise PageFault(va, level)
        if entry.leaf:
            return WalkPath(tuple(pte_addrs), entry.target >> entry.size.offset_bits,
                            entry.size)
        table = entry.target
    raise PageFault(va, len(indices) - 1)


def translate(aspace: AddressSpace, va: int) -> int:
    """Physical address of *va*: leaf frame concatenated with the page offset."""
    path = walk_path(aspace, va)
    offset = (va & VA_MASK) & (path.size.bytes - 1)
    return (path.ppn << path.size.offset_bits) | offset


def reachable_tables(aspace: AddressSpace) -> list[int]:
    """Every table page reachable from the root, root first (multiset)."""
    out = []
    stack = [aspace.page_table.root]
    nodes = aspace.page_table.nodes
    while stack:
        table = stack.pop()
        out.append(table)
        for entry in nodes[table]:
            if entry is not None and entry.present and not entry.leaf:
                stack.append(entry.target)
    return out
