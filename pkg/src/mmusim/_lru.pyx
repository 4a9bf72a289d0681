# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled LRU set arrays and cache-stack probe.

Same surface and results as :mod:`mmusim._lru_py`.  Slots live in growable
pools indexed by a hash map; each set keeps an intrusive doubly linked list
(head = LRU, tail = MRU), so every operation is O(1) regardless of
associativity and memory grows with residency, not with capacity.
"""

from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref, preincrement as inc

ctypedef long long i64


cdef class LruSets:
    cdef readonly i64 num_sets
    cdef readonly int ways
    cdef unordered_map[i64, int] index
    cdef vector[i64] skey
    cdef vector[i64] sval
    cdef vector[int] prv
    cdef vector[int] nxt
    cdef vector[int] head
    cdef vector[int] tail
    cdef vector[int] count
    cdef int free_head
    cdef i64 size

    def __init__(self, i64 num_sets, int ways):
        if num_sets < 1 or ways < 1:
            raise ValueError("num_sets and ways must be positive")
        self.num_sets = num_sets
        self.ways = ways
        self.head.assign(num_sets, -1)
        self.tail.assign(num_sets, -1)
        self.count.assign(num_sets, 0)
        self.free_head = -1
        self.size = 0

    def __len__(self):
        return self.size

    def __contains__(self, i64 key):
        return self.index.find(key) != self.index.end()

    cdef inline void _unlink(self, int slot, i64 s):
        cdef int p = self.prv[slot]
        cdef int n = self.nxt[slot]
        if p != -1:
            self.nxt[p] = n
        else:
            self.head[s] = n
        if n != -1:
            self.prv[n] = p
        else:
            self.tail[s] = p

    cdef inline void _append(self, int slot, i64 s):
        cdef int t = self.tail[s]
        self.prv[slot] = t
        self.nxt[slot] = -1
        if t != -1:
            self.nxt[t] = slot
        else:
            self.head[s] = slot
        self.tail[s] = slot

    cdef inline int _find(self, i64 key):
        cdef unordered_map[i64, int].iterator it = self.index.find(key)
        if it == self.index.end():
            return -1
        return deref(it).second

    cdef i64 cget(self, i64 key):
        cdef int slot = self._find(key)
        cdef i64 s
        if slot == -1:
            return -1
        s = key % self.num_sets
        if self.tail[s] != slot:
            self._unlink(slot, s)
            self._append(slot, s)
        return self.sval[slot]

    cdef i64 cpeek(self, i64 key):
        cdef int slot = self._find(key)
        if slot == -1:
            return -1
        return self.sval[slot]

    cdef bint cset_value(self, i64 key, i64 value):
        cdef int slot = self._find(key)
        if slot == -1:
            return False
        self.sval[slot] = value
        return True

    cdef bint cput(self, i64 key, i64 value, i64* vkey, i64* vval):
        """Install *key* as MRU; returns True and fills vkey/vval on eviction."""
        cdef i64 s = key % self.num_sets
        cdef int slot = self._find(key)
        cdef bint evicted = False
        if slot != -1:
            self.sval[slot] = value
            if self.tail[s] != slot:
                self._unlink(slot, s)
                self._append(slot, s)
            return False
        if self.count[s] >= self.ways:
            slot = self.head[s]
            vkey[0] = self.skey[slot]
            vval[0] = self.sval[slot]
            self._unlink(slot, s)
            self.index.erase(self.skey[slot])
            evicted = True
        else:
            if self.free_head != -1:
                slot = self.free_head
                self.free_head = self.nxt[slot]
            else:
                slot = <int>self.skey.size()
                self.skey.push_back(0)
                self.sval.push_back(0)
                self.prv.push_back(-1)
                self.nxt.push_back(-1)
            self.count[s] += 1
            self.size += 1
        self.skey[slot] = key
        self.sval[slot] = value
        self.index[key] = slot
        self._append(slot, s)
        return evicted

    def get(self, i64 key):
        """Return the value for *key* and make it MRU, or -1 if absent."""
        return self.cget(key)

    def peek(self, i64 key):
        """Return the value for *key* without touching LRU order, or -1."""
        return self.cpeek(key)

    def put(self, i64 key, i64 value):
        """Install or refresh *key* as MRU; returns the evicted pair or (-1, -1)."""
        cdef i64 vk = -1, vv = -1
        if self.cput(key, value, &vk, &vv):
            return vk, vv
        return -1, -1

    def set_value(self, i64 key, i64 value):
        """Overwrite the value of a resident key without touching LRU order."""
        return self.cset_value(key, value)

    def remove(self, i64 key):
        cdef int slot = self._find(key)
        cdef i64 s
        if slot == -1:
            return False
        s = key % self.num_sets
        self._unlink(slot, s)
        self.index.erase(key)
        self.count[s] -= 1
        self.size -= 1
        self.nxt[slot] = self.free_head
        self.free_head = slot
        return True

    def clear(self):
        self.index.clear()
        self.skey.clear()
        self.sval.clear()
        self.prv.clear()
        self.nxt.clear()
        self.head.assign(self.num_sets, -1)
        self.tail.assign(self.num_sets, -1)
        self.count.assign(self.num_sets, 0)
        self.free_head = -1
        self.size = 0

    cdef list _occupied_sets(self):
        cdef set seen = set()
        cdef unordered_map[i64, int].iterator it = self.index.begin()
        while it != self.index.end():
            seen.add(deref(it).first % self.num_sets)
            inc(it)
        return sorted(seen)

    def keys(self):
        """Resident keys, grouped by set index, LRU first within each set."""
        cdef list out = []
        cdef int slot
        for s in self._occupied_sets():
            slot = self.head[s]
            while slot != -1:
                out.append(self.skey[slot])
                slot = self.nxt[slot]
        return out

    def state(self):
        """Full content in a canonical order, for equality/hash checks."""
        cdef list out = []
        cdef list items
        cdef int slot
        for s in self._occupied_sets():
            items = []
            slot = self.head[s]
            while slot != -1:
                items.append((self.skey[slot], self.sval[slot]))
                slot = self.nxt[slot]
            out.append((s, tuple(items)))
        return tuple(out)


cdef class CacheStack:
    """A fixed list of :class:`LruSets` probed top-down as one cache stack."""

    cdef readonly list arrays
    cdef readonly list shifts
    cdef readonly list latencies
    cdef readonly i64 mem_latency
    cdef public list writebacks
    cdef vector[int] c_shift
    cdef vector[i64] c_lat
    cdef int n

    def __init__(self, arrays, shifts, latencies, i64 mem_latency):
        if not (len(arrays) == len(shifts) == len(latencies)):
            raise ValueError("arrays, shifts and latencies differ in length")
        self.arrays = list(arrays)
        for a in self.arrays:
            if not isinstance(a, LruSets):
                raise TypeError("CacheStack levels must be compiled LruSets")
        self.shifts = [int(s) for s in shifts]
        self.latencies = [int(c) for c in latencies]
        self.mem_latency = mem_latency
        self.writebacks = [0] * len(self.arrays)
        self.n = len(self.arrays)
        for s in self.shifts:
            self.c_shift.push_back(s)
        for c in self.latencies:
            self.c_lat.push_back(c)

    def access(self, int start, i64 paddr, bint is_write, bint allocate):
        """Probe levels ``start..`` for *paddr*; return ``(hit_level, cycles, dirty_evictions)``."""
        cdef int i, j, wb = 0, hit = self.n
        cdef i64 cycles = 0, key, vk = -1, vv = -1, vaddr
        cdef LruSets arr
        for i in range(start, self.n):
            cycles += self.c_lat[i]
            arr = <LruSets>self.arrays[i]
            key = paddr >> self.c_shift[i]
            if allocate:
                if arr.cget(key) != -1:
                    hit = i
                    break
            elif arr.cpeek(key) != -1:
                hit = i
                break
        if hit == self.n:
            cycles += self.mem_latency
        if not allocate:
            return hit, cycles, 0
        if is_write and hit == start:
            (<LruSets>self.arrays[hit]).cset_value(paddr >> self.c_shift[hit], 1)
        for i in range(start, hit):
            arr = <LruSets>self.arrays[i]
            if arr.cput(paddr >> self.c_shift[i], 1 if (is_write and i == start) else 0,
                        &vk, &vv) and vv == 1:
                self.writebacks[i] += 1
                wb += 1
                vaddr = vk << self.c_shift[i]
                for j in range(i + 1, self.n):
                    if (<LruSets>self.arrays[j]).cset_value(vaddr >> self.c_shift[j], 1):
                        break
        return hit, cycles, wb
