"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--events N]

Micro: LRU set get/put mixes and cache-stack probes, timed in-process on
each backend module.  End to end: one synthetic simulation per backend in a
subprocess (backend choice happens at import time).
"""

import argparse
import importlib
import json
import os
import random
import subprocess
import sys
import time


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def micro(mod, n):
    rng = random.Random(0)
    keys = [rng.randrange(4096) for _ in range(n)]
    addrs = [rng.randrange(1 << 30) for _ in range(n)]
    writes = [rng.random() < 0.3 for _ in range(n)]

    def lru():
        a = mod.LruSets(64, 16)
        for k in keys:
            if a.get(k) == -1:
                a.put(k, k)

    def stack():
        geo = [(64, 8), (512, 8), (5461, 12), (1 << 18, 16)]
        arrays = [mod.LruSets(s, w) for s, w in geo]
        st = mod.CacheStack(arrays, [6] * 4, [4, 6, 9, 20], 195)
        for a, w in zip(addrs, writes):
            st.access(0, a, w, True)

    return {"lru_get_put": _time(lru), "cache_stack": _time(stack)}


_E2E = """
import json, sys, time
from mmusim import kernels
from mmusim.engine import run
from mmusim.workload import SynthConfig, synth_events
evs = list(synth_events(SynthConfig(seed=1, footprint_bytes=64 << 20), int(sys.argv[1])))
t0 = time.perf_counter()
rep = run(None, None, evs)
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "digest": hash(rep.to_text())}))
"""


def end_to_end(pure, events):
    env = dict(os.environ)
    env.pop("MMUSIM_PURE_PYTHON", None)
    if pure:
        env["MMUSIM_PURE_PYTHON"] = "1"
    env["PYTHONHASHSEED"] = "0"
    out = subprocess.run([sys.executable, "-c", _E2E, str(events)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ops", type=int, default=200_000, help="operations per micro benchmark")
    ap.add_argument("--events", type=int, default=100_000, help="events for the end-to-end run")
    args = ap.parse_args()

    mods = {"python": importlib.import_module("mmusim._lru_py")}
    try:
        mods["cython"] = importlib.import_module("mmusim._lru")
    except ImportError:
        print("compiled extension not built; timing the pure-Python kernel only")

    results = {name: micro(mod, args.ops) for name, mod in mods.items()}
    print(f"{'kernel':<14}" + "".join(f"{n:>12}" for n in results) + "     speedup")
    for bench in ("lru_get_put", "cache_stack"):
        row = [results[n][bench] for n in results]
        speed = f"{row[0] / row[1]:>10.1f}x" if len(row) == 2 else ""
        print(f"{bench:<14}" + "".join(f"{t:>11.3f}s" for t in row) + speed)

    e2e = [end_to_end(True, args.events)]
    if "cython" in mods:
        e2e.append(end_to_end(False, args.events))
    for r in e2e:
        print(f"end-to-end {args.events} events, {r['backend']:>6}: {r['seconds']:.2f}s")
    if len(e2e) == 2:
        print(f"end-to-end speedup {e2e[0]['seconds'] / e2e[1]['seconds']:.2f}x, "
              f"identical reports: {e2e[0]['digest'] == e2e[1]['digest']}")


if __name__ == "__main__":
    main()
