#!/usr/bin/env python3
"""Infidelity vs applied displacement for the standard and displaced estimators.

Writes <out>/displacement_<state>_<hash>.{csv,json} and prints the summary.
"""

import argparse
import json

import numpy as np

from opatomo.chain import ChainParams
from opatomo.experiments import SweepSpec, sweep_displacement


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--state", default="sq")
    ap.add_argument("--n-shots", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=25, help="log grid size over d in [1, 1e4]")
    ap.add_argument("--ideal", action="store_true",
                    help="lossless, noiseless incoupling instead of the defaults")
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    params = ChainParams(input_transmittance=1.0, input_noise=0.0) if args.ideal else ChainParams()
    spec = SweepSpec(
        experiment="displacement", state=args.state,
        methods=("standard", "displaced"), param="displacement",
        grid=tuple(float(v) for v in np.logspace(0.0, 4.0, args.points)),
        params=params, n_shots=args.n_shots, repeats=args.repeats, seed=args.seed,
    )
    result = sweep_displacement(spec)
    csv_path, _ = result.to_csv(args.out_dir)
    print(json.dumps({"csv": csv_path, "summary": result.summary}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
