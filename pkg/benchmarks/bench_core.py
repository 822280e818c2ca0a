"""Throughput comparison of the compiled stream core and its fallback.

Runs the raw counter-based generator and a few end-to-end sampling loops
under whichever backend is active, then re-launches itself with the pure
Python core forced so both numbers come from the same machine state.  The
two backends are bit-identical by construction; this only measures speed.

    python benchmarks/bench_core.py            # compare both backends
    python benchmarks/bench_core.py --single   # just the active backend
"""

import argparse
import json
import os
import subprocess
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from exactchain import COMPILED, RandomStream, kernels, sample_window  # noqa: E402

N_UNIFORMS = 2_000_000
SAMPLE_SEEDS = 400

FAMILIES = {
    "markov": lambda: kernels.MarkovEmbedded([[0.9, 0.1], [0.2, 0.8]]),
    "ar": kernels.BinaryAR,
    "renewal": kernels.RenewalMixture,
    "signchange": kernels.SignChangeKernel,
}


def run_once() -> dict:
    res = {"compiled": COMPILED}

    s = RandomStream(12345)
    t0 = time.perf_counter()
    u = s.uniforms(0, N_UNIFORMS)
    res["uniforms_ms"] = (time.perf_counter() - t0) * 1e3
    res["uniforms_sum"] = float(u.sum())  # cross-backend identity check

    for name, make in FAMILIES.items():
        kern = make()
        t0 = time.perf_counter()
        acc = 0
        for seed in range(SAMPLE_SEEDS):
            acc += int(sample_window(kern, RandomStream(seed)).symbols[0])
        res[f"sample_{name}_ms"] = (time.perf_counter() - t0) * 1e3
        res[f"sample_{name}_acc"] = acc
    return res


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--single", action="store_true",
                    help="measure only the active backend")
    ap.add_argument("--json", action="store_true", help="raw JSON output")
    args = ap.parse_args()

    mine = run_once()
    if args.json:
        print(json.dumps(mine))
        return 0

    label = "compiled" if mine["compiled"] else "pure python"
    if args.single:
        print(f"backend: {label}")
        for k, v in mine.items():
            if k.endswith("_ms"):
                print(f"  {k[:-3]:<20} {v:10.1f} ms")
        return 0

    if not mine["compiled"]:
        print("compiled core unavailable; run --single for fallback numbers")
        return 1

    env = dict(os.environ, EXACTCHAIN_FORCE_PY="1")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--json"],
        env=env, capture_output=True, text=True, check=True,
    )
    other = json.loads(out.stdout)
    assert not other["compiled"], "fallback subprocess still used the extension"

    for key in mine:
        if key.endswith("_acc") or key == "uniforms_sum":
            assert mine[key] == other[key], f"backends disagree on {key}"

    print(f"{'workload':<22}{'compiled':>12}{'pure py':>12}{'speedup':>10}")
    for k in mine:
        if not k.endswith("_ms"):
            continue
        a, b = mine[k], other[k]
        print(f"{k[:-3]:<22}{a:>10.1f}ms{b:>10.1f}ms{b / a:>9.1f}x")
    print("\nidentical outputs across backends: yes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
