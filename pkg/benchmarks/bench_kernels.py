"""Compare the numba kernels with the pure numpy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by ``PROFILEST_BACKEND``).  Compilation is excluded by a warm-up call.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
import profilest
from profilest import Profile, Distribution, SearchConfig, EmConfig, pattern_prob_profile
from profilest.pml_exact import _numeric
from profilest.pml_em import em_pml
from profilest.probability import pattern_prob_grad

repeat = int(sys.argv[1])
prof = Profile({1: 3, 2: 2, 3: 2, 5: 1})
d = Distribution(np.linspace(2.0, 1.0, 12) / np.linspace(2.0, 1.0, 12).sum() * 0.9)

def prob():
    for _ in range(20):
        pattern_prob_profile(d, prof, fast_path=False)

def grad():
    for _ in range(20):
        pattern_prob_grad(prof, d.as_array(), d.q)

def search():
    _numeric(Profile({1: 2, 2: 1, 3: 1}), SearchConfig(kmax=7, starts=8, max_iterations=400))

def mcmc():
    em_pml(Profile({1: 4, 2: 3, 4: 2}), EmConfig(k=12, iterations=5, exact_estep_threshold=1,
                                              mcmc_steps_per_estep=20000, burn_in=1000))

out = {"backend": profilest.BACKEND}
for name, fn in [("pattern_prob x20", prob), ("gradient x20", grad),
                 ("numeric search", search), ("em sampled E-step x5", mcmc)]:
    fn()  # warm-up: compilation or first-call caches
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(json.dumps(out))
"""


def run(backend: str, repeat: int) -> dict:
    env = dict(os.environ, PROFILEST_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    fast = run("numba", args.repeat)
    slow = run("numpy", args.repeat)
    print(f"backends: {fast.pop('backend')} vs {slow.pop('backend')}  (best of {args.repeat}, seconds)")
    print(f"{'workload':<24}{'numba':>10}{'numpy':>10}{'speedup':>10}")
    for name in fast:
        print(f"{name:<24}{fast[name]:>10.4f}{slow[name]:>10.4f}{slow[name] / fast[name]:>9.1f}x")


if __name__ == "__main__":
    main()
