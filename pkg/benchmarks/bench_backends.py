"""Compare the numba kernels with their numpy fallbacks.

Times each hot kernel directly (both implementations are importable in one
process), then a full multi-arm test in fresh interpreters with
``LRST_NUMBA=1`` and ``LRST_NUMBA=0``.

    python benchmarks/bench_backends.py [--repeats 7]
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from lrst import _kernels


def _median_time(fn, repeats):
    fn()  # warm (and compile)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def kernel_table(repeats: int) -> list[dict]:
    rng = np.random.default_rng(0)
    pooled = rng.standard_normal((1000, 12))
    ref, query = rng.standard_normal((600, 12)), rng.standard_normal((400, 12))
    C = np.full((6, 6), 0.5) + 0.5 * np.eye(6)
    L = np.linalg.cholesky(C)
    e = rng.standard_normal((1 << 16, 6))
    cases = {
        "midranks (1000 x 12)": (_kernels.midranks_columns_numpy, _kernels.midranks_columns_numba, (pooled,)),
        "placements (600 ref, 400 query, 12 cells)": (_kernels.placements_numpy, _kernels.placements_numba, (ref, query)),
        "max-exceed count (65536 x 6)": (_kernels.count_max_exceed_numpy, _kernels.count_max_exceed_numba, (e, L, 1.5)),
    }
    rows = []
    for name, (f_np, f_nb, args) in cases.items():
        t_np = _median_time(lambda: f_np(*args), repeats)
        t_nb = _median_time(lambda: f_nb(*args), repeats)
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
    return rows


_FULL_RUN = """
import json, time
from lrst import backend_name, bapi_default_scenario, gen_trial, multi_arm_lrst
ds = gen_trial(bapi_default_scenario({A}, {n}, seed=1), 0)
multi_arm_lrst(ds, mc_draws=1000)
ts = []
for r in range({repeats}):
    t0 = time.perf_counter(); multi_arm_lrst(ds, seed=r); ts.append(time.perf_counter() - t0)
ts.sort()
print(json.dumps({{"backend": backend_name(), "median_s": ts[len(ts) // 2]}}))
"""


def full_run(flag: str, n: int, A: int, repeats: int) -> dict:
    env = dict(os.environ, LRST_NUMBA=flag)
    code = _FULL_RUN.format(n=n, A=A, repeats=repeats)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args(argv)

    print(f"{'kernel':<44}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for r in kernel_table(args.repeats):
        print(f"{r['kernel']:<44}{r['numpy_s']:>12.5f}{r['numba_s']:>12.5f}{r['speedup']:>10.1f}")

    print(f"\n{'full test (10^6 MC draws)':<44}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for n, A in ((200, 2), (300, 3), (500, 6)):
        t_np = full_run("0", n, A, args.repeats)
        t_nb = full_run("1", n, A, args.repeats)
        assert t_np["backend"] == "numpy" and t_nb["backend"] == "numba"
        label = f"n_x={n}, {A + 1} arms"
        print(f"{label:<44}{t_np['median_s']:>12.4f}{t_nb['median_s']:>12.4f}{t_np['median_s'] / t_nb['median_s']:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
