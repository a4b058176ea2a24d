#!/usr/bin/env python3
"""Homodyne detection vs the photon-counting estimators.

Two modes: sweep the displacement (homodyne should stay flat) or sweep the
gain at several detector efficiencies.
"""

import argparse
import json

import numpy as np

from opatomo.experiments import SweepSpec, homodyne_comparison


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", default="displacement", choices=("displacement", "gain"))
    ap.add_argument("--state", default="sq")
    ap.add_argument("--n-shots", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=13)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    if args.mode == "displacement":
        grid = tuple(float(v) for v in np.logspace(0.0, 3.0, args.points))
        methods = ("displaced",)
    else:
        grid = tuple(float(v) for v in np.linspace(1.0, 7.0, args.points))
        methods = ("standard", "displaced")
    spec = SweepSpec(
        experiment=f"homodyne_{args.mode}", state=args.state, methods=methods,
        param=args.mode, grid=grid,
        n_shots=args.n_shots, repeats=args.repeats, seed=args.seed,
    )
    result = homodyne_comparison(spec)
    csv_path, _ = result.to_csv(args.out_dir)
    print(json.dumps({"csv": csv_path, "summary": result.summary}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
