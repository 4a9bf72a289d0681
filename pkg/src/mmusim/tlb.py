"""Translation lookaside buffers: split L1 I/D, unified L2, superpage TLB.

Each structure is an LRU set array keyed by ``(size, asid, vpn)``; a 4 KiB
and a 2 MiB entry never alias.  The superpage TLB is probed in parallel with
the L1 of the access kind; the L2 (4 KiB only) is probed after both miss and
promotes hits back into that L1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .cachehier import AccessKind
from .kernels import LruSets
from .vmem import VA_MASK, PageSize

_VPN_BITS = 36
_ASID_BITS = 16
_CODE_SIZE = {s.code: s for s in PageSize}
_P2M = PageSize.PAGE_2M
_P1G = PageSize.PAGE_1G
_KEY_2M = _P2M.code << (_ASID_BITS + _VPN_BITS)
_KEY_1G = _P1G.code << (_ASID_BITS + _VPN_BITS)


def _key(asid: int, vpn: int, size: PageSize) -> int:
    return (((size.code << _ASID_BITS) | asid) << _VPN_BITS) | vpn


def _unkey(key: int) -> tuple[int, int, PageSize]:
    vpn = key & ((1 << _VPN_BITS) - 1)
    asid = (key >> _VPN_BITS) & ((1 << _ASID_BITS) - 1)
    return asid, vpn, _CODE_SIZE[key >> (_VPN_BITS + _ASID_BITS)]


@dataclass(frozen=True)
class TlbConfig:
    name: str
    entries: int
    associativity: int | None = None  # None: fully associative
    page_size: PageSize = PageSize.PAGE_4K

    def __post_init__(self):
        if self.entries < 1:
            raise ValueError(f"{self.name}: entries must be positive")
        if self.associativity is not None and (
                self.associativity < 1 or self.entries % self.associativity):
            raise ValueError(f"{self.name}: {self.entries} entries not divisible "
                             f"by associativity {self.associativity}")

    @property
    def ways(self) -> int:
        return self.entries if self.associativity is None else self.associativity

    @property
    def num_sets(self) -> int:
        return self.entries // self.ways


@dataclass(frozen=True)
class TlbEntry:
    asid: int
    vpn: int
    ppn: int
    size: PageSize
    lru_stamp: int  # rank within its set, 0 = least recently used


class Tlb:
    """A single TLB structure with per-structure hit counters."""

    def __init__(self, config: TlbConfig):
        self.config = config
        self._array = LruSets(config.num_sets, config.ways)
        self.lookups = 0
        self.hits = 0

    def __len__(self):
        return len(self._array)

    def probe(self, asid: int, vpn: int, size: PageSize = PageSize.PAGE_4K) -> int:
        """Return the cached ppn (refreshing LRU) or -1."""
        return self._array.get(_key(asid, vpn, size))

    def insert(self, asid: int, vpn: int, ppn: int,
               size: PageSize = PageSize.PAGE_4K) -> TlbEntry | None:
        vkey, vppn = self._array.put(_key(asid, vpn, size), ppn)
        if vkey == -1:
            return None
        a, v, s = _unkey(vkey)
        return TlbEntry(a, v, vppn, s, 0)

    def flush(self, asid: int | None = None) -> set[int]:
        """Remove entries of *asid* (or all); returns the removed keys."""
        keys = self._array.keys()
        if asid is None:
            self._array.clear()
            return set(keys)
        removed = {k for k in keys if _unkey(k)[0] == asid}
        for key in removed:
            self._array.remove(key)
        return removed

    def entries(self) -> list[TlbEntry]:
        out = []
        for _, items in self._array.state():
            for rank, (key, ppn) in enumerate(items):
                a, v, s = _unkey(key)
                out.append(TlbEntry(a, v, ppn, s, rank))
        return out


class TlbLookup(NamedTuple):
    """Outcome of a hierarchy lookup; ``level`` is None on a miss."""

    level: str | None
    ppn: int = -1
    size: PageSize = PageSize.PAGE_4K

    @property
    def hit(self) -> bool:
        return self.level is not None


MISS = TlbLookup(None)

TABLE2_TLBS = {
    "l1i": TlbConfig("L1I-TLB", 64),
    "l1d": TlbConfig("L1D-TLB", 64),
    "l2": TlbConfig("L2-TLB", 1024),
    "super": TlbConfig("SP-TLB", 32, page_size=PageSize.PAGE_2M),
}


class TlbHierarchy:
    def __init__(self, l1i: TlbConfig = TABLE2_TLBS["l1i"],
                 l1d: TlbConfig = TABLE2_TLBS["l1d"],
                 l2: TlbConfig | None = TABLE2_TLBS["l2"],
                 superpage: TlbConfig | None = TABLE2_TLBS["super"]):
        self.l1i = Tlb(l1i)
        self.l1d = Tlb(l1d)
        self.l2 = Tlb(l2) if l2 is not None else None
        self.superpage = Tlb(superpage) if superpage is not None else None

    def structures(self) -> dict[str, Tlb]:
        out = {"l1i": self.l1i, "l1d": self.l1d}
        if self.superpage is not None:
            out["super"] = self.superpage
        if self.l2 is not None:
            out["l2"] = self.l2
        return out

    def lookup(self, asid: int, va: int, kind: AccessKind = AccessKind.DATA) -> TlbLookup:
        """Probe L1 and the superpage TLB together, then L2.

        An L2 hit is promoted into the L1 of *kind*; a miss has no side
        effects beyond hit counters.
        """
        va &= VA_MASK
        l1 = self.l1i if kind is AccessKind.INSTRUCTION else self.l1d
        base = asid << _VPN_BITS
        key = base | (va >> 12)  # 4 KiB size code is 0
        l1.lookups += 1
        ppn = l1._array.get(key)
        if ppn != -1:
            l1.hits += 1
            return TlbLookup("L1", ppn)
        sp = self.superpage
        if sp is not None:
            sp.lookups += 1
            arr = sp._array
            ppn = arr.get(_KEY_2M | base | (va >> 21))
            if ppn != -1:
                sp.hits += 1
                return TlbLookup("SUPER", ppn, _P2M)
            ppn = arr.get(_KEY_1G | base | (va >> 30))
            if ppn != -1:
                sp.hits += 1
                return TlbLookup("SUPER", ppn, _P1G)
        l2 = self.l2
        if l2 is not None:
            l2.lookups += 1
            ppn = l2._array.get(key)
            if ppn != -1:
                l2.hits += 1
                l1._array.put(key, ppn)
                return TlbLookup("L2", ppn)
        return MISS

    def insert(self, asid: int, vpn: int, ppn: int, size: PageSize = PageSize.PAGE_4K,
               kind: AccessKind = AccessKind.DATA) -> list[TlbEntry]:
        """Install a translation; returns the entries evicted to make room.

        *vpn* and *ppn* are in units of *size*.  Superpage translations go to
        the superpage TLB; callers without one insert 4 KiB splinters.
        """
        if size is not PageSize.PAGE_4K:
            if self.superpage is None:
                raise ValueError("no superpage TLB configured for a "
                                 f"{size.name} translation")
            victim = self.superpage.insert(asid, vpn, ppn, size)
            return [victim] if victim else []
        l1 = self.l1i if kind is AccessKind.INSTRUCTION else self.l1d
        evicted = [l1.insert(asid, vpn, ppn)]
        if self.l2 is not None:
            evicted.append(self.l2.insert(asid, vpn, ppn))
        return [e for e in evicted if e is not None]

    def install(self, asid: int, vpn: int, ppn: int, size: PageSize,
                kind: AccessKind) -> None:
        """:meth:`insert` without building eviction records."""
        if size is not PageSize.PAGE_4K:
            if self.superpage is None:
                raise ValueError("no superpage TLB configured for a "
                                 f"{size.name} translation")
            self.superpage._array.put(_key(asid, vpn, size), ppn)
            return
        key = _key(asid, vpn, size)
        (self.l1i if kind is AccessKind.INSTRUCTION else self.l1d)._array.put(key, ppn)
        if self.l2 is not None:
            self.l2._array.put(key, ppn)

    def flush(self, asid: int | None = None) -> int:
        """Invalidate entries of *asid* (or all) everywhere.

        Returns the number of distinct translations removed; a translation
        held by both an L1 and the L2 counts once.
        """
        removed: set[int] = set()
        for t in self.structures().values():
            removed |= t.flush(asid)
        return len(removed)


def reach(*configs: TlbConfig) -> int:
    """Bytes mapped when every entry of *configs* holds a translation."""
    return sum(c.entries * c.page_size.bytes for c in configs)
