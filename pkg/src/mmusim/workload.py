"""Event streams: a line-oriented text trace format and a synthetic generator.

Trace grammar, one event per line::

    A <tid> <I|D> <R|W> <hex-va>     memory access
    S <tid> <asid>                   thread <tid> now runs address space <asid>

Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Union

from .cachehier import AccessKind
from .errors import ParseError

PAGE_BYTES = 4096


@dataclass(frozen=True, slots=True)
class Access:
    tid: int
    kind: AccessKind  # INSTRUCTION or DATA
    write: bool
    va: int


@dataclass(frozen=True, slots=True)
class Switch:
    tid: int
    asid: int


Event = Union[Access, Switch]

_KINDS = {"I": AccessKind.INSTRUCTION, "D": AccessKind.DATA}
_RW = {"R": False, "W": True}


def _uint(tok: str, what: str, lineno, base: int = 10) -> int:
    try:
        value = int(tok, base)
    except ValueError:
        raise ParseError(f"invalid {what} {tok!r}", lineno) from None
    if value < 0:
        raise ParseError(f"negative {what} {tok!r}", lineno)
    return value


def parse_line(text: str, lineno: int | None = None) -> Event | None:
    """Parse one trace line; returns None for blank and comment lines."""
    line = text.strip()
    if not line or line.startswith("#"):
        return None
    fields = line.split()
    tag = fields[0]
    if tag == "A":
        if len(fields) != 5:
            raise ParseError(f"access needs 4 fields, got {len(fields) - 1}", lineno)
        kind = _KINDS.get(fields[2])
        if kind is None:
            raise ParseError(f"invalid kind {fields[2]!r} (expected I or D)", lineno)
        write = _RW.get(fields[3])
        if write is None:
            raise ParseError(f"invalid access type {fields[3]!r} (expected R or W)", lineno)
        tok = fields[4]
        if tok[:2].lower() == "0x":
            tok = tok[2:]
        va = _uint(tok, "address", lineno, 16)
        if va >= 1 << 64:
            raise ParseError(f"address {fields[4]} exceeds 64 bits", lineno)
        return Access(_uint(fields[1], "tid", lineno), kind, write, va)
    if tag == "S":
        if len(fields) != 3:
            raise ParseError(f"switch needs 2 fields, got {len(fields) - 1}", lineno)
        return Switch(_uint(fields[1], "tid", lineno), _uint(fields[2], "asid", lineno))
    raise ParseError(f"unknown event tag {tag!r}", lineno)


def format_event(event: Event) -> str:
    """Canonical trace line for *event*."""
    if isinstance(event, Access):
        kind = "I" if event.kind is AccessKind.INSTRUCTION else "D"
        return f"A {event.tid} {kind} {'W' if event.write else 'R'} {event.va:x}"
    return f"S {event.tid} {event.asid}"


def read_trace(path) -> Iterator[Event]:
    with open(path, encoding="ascii", errors="strict") as fh:
        for lineno, text in enumerate(fh, 1):
            event = parse_line(text, lineno)
            if event is not None:
                yield event


def write_trace(path, events) -> int:
    n = 0
    with open(path, "w", encoding="ascii") as fh:
        for event in events:
            fh.write(format_event(event) + "\n")
            n += 1
    return n


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    footprint_bytes: int = 64 << 20
    page_locality: str = "uniform"  # "uniform" or "zipf"
    zipf_s: float = 1.0
    intra_page: str = "random"  # "sequential" or "random"
    inst_ratio: float = 0.2
    write_ratio: float = 0.2
    code_bytes: int = 64 << 10
    switch_period: int = 0  # 0: never switch
    threads: int = 1
    base_va: int = 0x7F00_0000_0000
    superpage: bool = False

    def __post_init__(self):
        if self.footprint_bytes < PAGE_BYTES:
            raise ValueError("footprint must cover at least one 4 KiB page")
        if self.page_locality not in ("uniform", "zipf"):
            raise ValueError(f"unknown page_locality {self.page_locality!r}")
        if self.page_locality == "zipf" and not self.zipf_s > 0:
            raise ValueError("zipf exponent must be positive")
        if self.intra_page not in ("sequential", "random"):
            raise ValueError(f"unknown intra_page {self.intra_page!r}")
        for name in ("inst_ratio", "write_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.threads < 1 or self.switch_period < 0:
            raise ValueError("threads must be >= 1 and switch_period >= 0")

    @property
    def pages(self) -> int:
        return self.footprint_bytes // PAGE_BYTES


class SynthGenerator:
    """Deterministic event stream over ``[base_va, base_va + footprint)``.

    Data accesses pick a page uniformly or by a Zipf law over a seeded
    permutation of the pages, then an 8-byte-aligned offset that is random or
    advances sequentially per page.  Instruction fetches step 4 bytes at a
    time through the first ``code_bytes`` of the footprint.  Threads issue in
    round robin; after every ``switch_period`` accesses a ``Switch`` moves the
    next thread (in rotation) to the next address space.
    """

    _BATCH = 4096

    def __init__(self, config: SynthConfig):
        self.config = config
        self._rng = random.Random(config.seed)
        n = config.pages
        self._page_of_rank = list(range(n))
        self._rng.shuffle(self._page_of_rank)
        if config.page_locality == "zipf":
            weights = [1.0 / (k ** config.zipf_s) for k in range(1, n + 1)]
            self._cum = list(itertools.accumulate(weights))
        else:
            self._cum = None
        self._cursor: dict[int, int] = {}
        self._code_bytes = max(4, min(config.code_bytes, config.footprint_bytes))
        self._pc = [0] * config.threads
        self._asid = list(range(config.threads))
        self._accesses = 0
        self._switches = 0
        self._pending_switch = False
        self._ranks: list[int] = []

    def _next_page(self) -> int:
        if not self._ranks:
            n = self.config.pages
            if self._cum is None:
                self._ranks = [self._rng.randrange(n) for _ in range(self._BATCH)]
            else:
                total = self._cum[-1]
                cum = self._cum
                self._ranks = [min(bisect.bisect_left(cum, self._rng.random() * total), n - 1)
                               for _ in range(self._BATCH)]
            self._ranks.reverse()
        return self._page_of_rank[self._ranks.pop()]

    def next(self) -> Event:
        cfg = self.config
        if self._pending_switch:
            self._pending_switch = False
            tid = self._switches % cfg.threads
            self._switches += 1
            self._asid[tid] = (self._asid[tid] + 1) % cfg.threads
            return Switch(tid, self._asid[tid])
        rng = self._rng
        tid = self._accesses % cfg.threads
        self._accesses += 1
        if cfg.switch_period and self._accesses % cfg.switch_period == 0:
            self._pending_switch = True
        if rng.random() < cfg.inst_ratio:
            pc = self._pc[tid]
            self._pc[tid] = (pc + 4) % self._code_bytes
            return Access(tid, AccessKind.INSTRUCTION, False, cfg.base_va + pc)
        page = self._next_page()
        if cfg.intra_page == "random":
            offset = rng.getrandbits(9) << 3
        else:
            offset = self._cursor.get(page, 0)
            self._cursor[page] = (offset + 8) % PAGE_BYTES
        write = rng.random() < cfg.write_ratio
        return Access(tid, AccessKind.DATA, write, cfg.base_va + page * PAGE_BYTES + offset)

    def __iter__(self):
        return self

    def __next__(self) -> Event:
        return self.next()


def synth_next(gen: SynthGenerator) -> Event:
    return gen.next()


def synth_events(config: SynthConfig, count: int) -> Iterator[Event]:
    """The first *count* events of the stream for *config*."""
    return itertools.islice(SynthGenerator(config), count)
