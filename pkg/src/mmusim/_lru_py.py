"""Pure-Python LRU set arrays and the cache-stack probe.

Fallback for the compiled ``mmusim._lru`` extension; both expose
the same names and must produce identical results for identical inputs.
"""

from collections import OrderedDict

__all__ = ["CacheStack", "LruSets"]


class LruSets:
    """A set-associative array of ``(key, value)`` slots with LRU replacement.

    Keys are non-negative integers; the set index is ``key % num_sets``.
    Values are non-negative integers (``-1`` is reserved to mean "absent").
    A fully associative structure is simply ``num_sets == 1``.
    """

    def __init__(self, num_sets, ways):
        if num_sets < 1 or ways < 1:
            raise ValueError("num_sets and ways must be positive")
        self.num_sets = num_sets
        self.ways = ways
        self._sets = {}
        self._size = 0

    def __len__(self):
        return self._size

    def __contains__(self, key):
        s = self._sets.get(key % self.num_sets)
        return s is not None and key in s

    def get(self, key):
        """Return the value for *key* and make it MRU, or -1 if absent."""
        s = self._sets.get(key % self.num_sets)
        if s is None:
            return -1
        value = s.get(key, -1)
        if value != -1:
            s.move_to_end(key)
        return value

    def peek(self, key):
        """Return the value for *key* without touching LRU order, or -1."""
        s = self._sets.get(key % self.num_sets)
        if s is None:
            return -1
        return s.get(key, -1)

    def put(self, key, value):
        """Install or refresh *key* as MRU.

        Returns ``(victim_key, victim_value)`` when a full set had to evict
        its LRU entry, else ``(-1, -1)``.
        """
        idx = key % self.num_sets
        s = self._sets.get(idx)
        if s is None:
            s = self._sets[idx] = OrderedDict()
        if key in s:
            s[key] = value
            s.move_to_end(key)
            return -1, -1
        victim = (-1, -1)
        if len(s) >= self.ways:
            victim = s.popitem(last=False)
            self._size -= 1
        s[key] = value
        self._size += 1
        return victim

    def set_value(self, key, value):
        """Overwrite the value of a resident key without touching LRU order."""
        s = self._sets.get(key % self.num_sets)
        if s is None or key not in s:
            return False
        s[key] = value
        return True

    def remove(self, key):
        s = self._sets.get(key % self.num_sets)
        if s is None or key not in s:
            return False
        del s[key]
        self._size -= 1
        return True

    def clear(self):
        self._sets.clear()
        self._size = 0

    def keys(self):
        """Resident keys, grouped by set index, LRU first within each set."""
        out = []
        for idx in sorted(self._sets):
            out.extend(self._sets[idx])
        return out

    def state(self):
        """Full content in a canonical order, for equality/hash checks."""
        out = []
        for idx in sorted(self._sets):
            s = self._sets[idx]
            if s:
                out.append((idx, tuple(s.items())))
        return tuple(out)


class CacheStack:
    """A fixed list of :class:`LruSets` probed top-down as one cache stack.

    Level ``i`` indexes blocks as ``paddr >> shifts[i]`` and stores a dirty
    flag (0/1) as the slot value.  Dirty evictions are tallied per level in
    :attr:`writebacks`.
    """

    def __init__(self, arrays, shifts, latencies, mem_latency):
        if not (len(arrays) == len(shifts) == len(latencies)):
            raise ValueError("arrays, shifts and latencies differ in length")
        self.arrays = list(arrays)
        self.shifts = [int(s) for s in shifts]
        self.latencies = [int(c) for c in latencies]
        self.mem_latency = int(mem_latency)
        self.writebacks = [0] * len(self.arrays)

    def access(self, start, paddr, is_write, allocate):
        """Probe levels ``start..`` for *paddr*.

        Returns ``(hit_level, cycles, dirty_evictions)``.

        ``hit_level == len(arrays)`` means the block came from memory.  On a
        hit at level ``h`` every level probed before it is filled; a full miss
        fills every probed level.  With *allocate* false the probe is
        read-only: no LRU update, no fill, no dirty marking.
        """
        arrays = self.arrays
        shifts = self.shifts
        n = len(arrays)
        cycles = 0
        wb = 0
        hit = n
        for i in range(start, n):
            cycles += self.latencies[i]
            key = paddr >> shifts[i]
            found = arrays[i].get(key) if allocate else arrays[i].peek(key)
            if found != -1:
                hit = i
                break
        else:
            cycles += self.mem_latency
        if not allocate:
            return hit, cycles, 0
        if is_write and hit == start:
            arrays[hit].set_value(paddr >> shifts[hit], 1)
        for i in range(start, hit):
            dirty = 1 if (is_write and i == start) else 0
            vkey, vdirty = arrays[i].put(paddr >> shifts[i], dirty)
            if vdirty == 1:
                self.writebacks[i] += 1
                wb += 1
                self._push_dirty(i, vkey << shifts[i])
        return hit, cycles, wb

    def _push_dirty(self, level, vaddr):
        # Nearest lower copy becomes dirty; no allocation, no LRU touch.
        for j in range(level + 1, len(self.arrays)):
            if self.arrays[j].set_value(vaddr >> self.shifts[j], 1):
                return
