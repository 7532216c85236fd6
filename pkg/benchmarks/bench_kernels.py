"""Compare the compiled kernels with the pure-Python fallback.

Each workload calls the public API with the module-level kernel reference
swapped, so both backends run exactly the same surrounding code.  Results
are checked for agreement before timings are reported.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from krullwalk import _kernels_py, folner, walk
from krullwalk.groups import Wreath
from krullwalk.ring import Coefficients

try:
    from krullwalk import _kernels as compiled
except ImportError:
    compiled = None


@contextmanager
def backend(mod):
    saved = walk.kernels, folner.kernels
    walk.kernels = folner.kernels = mod
    try:
        yield
    finally:
        walk.kernels, folner.kernels = saved


def _mc(n, samples):
    return lambda: [e.hits for e in walk.monte_carlo_return(Wreath(1, 2), [n], samples, seed=1)]


def _transfer(n):
    # the sojourn table is shared Python setup; time only the recursion
    E = np.ascontiguousarray(walk._sojourn_table(2, 3, n))
    return lambda: np.asarray(walk.kernels.transfer_returns(E, 1 / 3, n))


def _ball(m):
    ring = folner.make_ring([], Coefficients.prime_field(2), 1)
    couple = folner.build_ring_couple(ring, m)
    return lambda: folner.verify_couple(couple, Fraction(1, 2), method="exhaustive", sharpness=False).passed


# (name, workload, python scale): the python run uses the smaller workload
WORKLOADS = [
    ("monte carlo, lamplighter n=256", _mc(256, 200_000), _mc(256, 2_000)),
    ("transfer recursion, n=256", _transfer(256), _transfer(256)),
    ("packed ball check, m=4", _ball(4), _ball(4)),
]


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="write the table here as JSON")
    args = ap.parse_args(argv)
    if compiled is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    rows = []
    for name, fast_fn, slow_fn in WORKLOADS:
        with backend(compiled):
            t_c, out_c = timed(fast_fn, args.repeat)
            t_cs, out_cs = timed(slow_fn, args.repeat)
        with backend(_kernels_py):
            t_p, out_p = timed(slow_fn, 1)
        agree = bool(np.allclose(out_cs, out_p, rtol=1e-12)) if isinstance(out_p, np.ndarray) else out_cs == out_p
        rows.append({"workload": name, "compiled_s": t_c, "compiled_same_size_s": t_cs,
                     "python_s": t_p, "speedup": t_p / t_cs if t_cs > 0 else float("inf"),
                     "agree": agree})
    width = max(len(r["workload"]) for r in rows)
    print(f"{'workload':<{width}}  {'compiled':>10}  {'python':>10}  {'speedup':>8}  agree")
    for r in rows:
        print(f"{r['workload']:<{width}}  {r['compiled_same_size_s']:>9.4f}s  {r['python_s']:>9.4f}s"
              f"  {r['speedup']:>7.1f}x  {r['agree']}")
    print("(monte carlo: python timed on 2000 samples; compiled also ran 200000 in "
          f"{rows[0]['compiled_s']:.3f}s)")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
