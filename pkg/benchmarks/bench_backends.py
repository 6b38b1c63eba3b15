#!/usr/bin/env python3
"""Compare the compiled kernels with the pure-Python fallback.

Each backend runs in its own interpreter so the import-time selection is
exercised exactly as users see it (PKTACCEL_PURE=1 forces the fallback).

    python3 benchmarks/bench_backends.py [--quick] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys


def measure(quick: bool) -> dict:
    from pktaccel import _backend
    from pktaccel.harness import bench
    from pktaccel.lbq import Variant

    scale = 10 if quick else 1
    impl = "default" if _backend.COMPILED else "python"
    lfn = bench.lfn_throughput(1 << 20, 1_000_000 // scale)
    mrpq = bench.mrpq_scaling(10_000 // scale, 1_000_000 // scale, 200_000 // scale, impl=impl)
    lbq = bench.lbq_throughput(1_000_000 // scale, 100, Variant.CAS)
    return {
        "backend": _backend.name(),
        "lfn_put_many_Mops": lfn["put_many_ops"] / 1e6,
        "lfn_scalar_get_Mops": lfn["scalar_get_ops"] / 1e6,
        "mrpq_ns_per_op_small": mrpq["mrpq"]["ns_small"],
        "mrpq_ns_per_op_large": mrpq["mrpq"]["ns_large"],
        "mrpq_scaling_ratio": mrpq["mrpq"]["ratio"],
        "heap_scaling_ratio": mrpq["heap"]["ratio"],
        "lbq_Mpkts_per_s": lbq["packets_per_s"] / 1e6,
        "lbq_ok": lbq["ok"],
    }


def run_child(pure: bool, quick: bool) -> dict:
    env = dict(os.environ)
    env.pop("PKTACCEL_PURE", None)
    if pure:
        env["PKTACCEL_PURE"] = "1"
    cmd = [sys.executable, __file__, "--child"] + (["--quick"] if quick else [])
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--quick", action="store_true", help="one tenth of the default sizes")
    ap.add_argument("--json", help="also write the results here")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        print(json.dumps(measure(args.quick)))
        return 0

    rows = [run_child(False, args.quick), run_child(True, args.quick)]
    if rows[0]["backend"] != "compiled":
        print("note: compiled extension not built; both rows use the fallback", file=sys.stderr)
    keys = [k for k in rows[0] if k != "backend"]
    w = max(map(len, keys))
    print(f"{'metric':<{w}}  {rows[0]['backend']:>12}  {rows[1]['backend']:>12}  speedup")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        if isinstance(a, bool):
            print(f"{k:<{w}}  {str(a):>12}  {str(b):>12}")
            continue
        if k.endswith("ratio"):  # a shape, not a speed
            print(f"{k:<{w}}  {a:12.3f}  {b:12.3f}        -")
            continue
        sp = b / a if k.startswith("mrpq_ns") else a / b
        print(f"{k:<{w}}  {a:12.3f}  {b:12.3f}  {sp:6.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
