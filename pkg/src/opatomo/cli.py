"""Command-line interface.

Commands: ``simulate``, ``reconstruct``, ``sweep``, ``squeeze``,
``presets``.  All randomness flows from ``--seed`` through the package's
stream-derivation scheme, so identical invocations write identical files.

Exit codes: 0 success; 2 configuration or precondition error (the message
names the offending field); 3 positivity violation (the single-displacement
estimator refused the batch — supply a second displaced batch and use the
two-displacement method).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .chain import (
    ChainParams,
    ConfigError,
    HomodyneDetector,
    IntensityDetector,
    ShotBatch,
    run_batch,
)
from .experiments import (
    DEFAULT_DISPLACEMENT_GRID,
    DEFAULT_GAIN_GRID,
    SweepSpec,
    homodyne_comparison,
    robustness_sweep,
    squeezing_table,
    sweep_displacement,
    sweep_gain,
)
from .hist import fidelity
from .reconstruct import (
    PositivityViolation,
    ReconConfig,
    displaced_reconstruct,
    double_displacement_reconstruct,
    homodyne_reconstruct,
    standard_reconstruct,
)
from .states import PRESETS, preset

__all__ = ["RunConfig", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3

_CHAIN_FIELDS = {
    "gain": float,
    "gain_jitter": float,
    "input_transmittance": float,
    "input_noise": float,
    "output_transmittance": float,
    "output_transmittance_jitter": float,
    "output_noise": float,
    "displacement": float,
}
_DETECTOR_FIELDS = {
    "efficiency": float,
    "lo_amplitude": float,
    "vacuum_noise": float,
    "electronic_noise": float,
}
_RUN_FIELDS = {
    "state": str,
    "method": str,
    "detector": str,
    "n_shots": int,
    "bin_width": float,
    "seed": int,
    "out_dir": str,
}


@dataclasses.dataclass
class RunConfig:
    """One simulation/reconstruction run: state, chain, method, scale.

    Defaults are the reference parameter set the experiments are quoted
    at: G=4 with 0.01 jitter, incoupling 0.99 with matching 0.01 noise,
    outcoupling 0.1 with 1e-3 jitter, post-amplification noise 3, bins of
    0.05, and 1e5 shots.
    """

    state: str = "sq"
    method: str = "displaced"
    detector: str = "intensity"
    n_shots: int = 100_000
    bin_width: float = 0.05
    seed: int = 0
    out_dir: str = "runs"
    params: ChainParams = dataclasses.field(default_factory=ChainParams)

    def validate(self) -> None:
        if self.state not in PRESETS:
            raise ConfigError("state", f"unknown preset {self.state!r}; see `opatomo presets`")
        if self.method not in ("standard", "displaced", "double", "homodyne"):
            raise ConfigError("method", f"unknown method {self.method!r}")
        if self.detector not in ("intensity", "homodyne"):
            raise ConfigError("detector", f"unknown detector {self.detector!r}")
        if self.n_shots < 1:
            raise ConfigError("n_shots", "must be at least 1")
        if self.bin_width <= 0:
            raise ConfigError("bin_width", "must be positive")
        self.params.validate()

    def to_json(self) -> str:
        payload = {
            k: getattr(self, k)
            for k in ("state", "method", "detector", "n_shots", "bin_width", "seed", "out_dir")
        }
        payload["params"] = self.params.to_dict()
        return json.dumps(payload, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        payload = json.loads(text)
        params = ChainParams.from_dict(payload.pop("params"))
        return RunConfig(params=params, **payload)


def _apply_assignment(config: RunConfig, key: str, raw: str) -> None:
    """Apply one ``key=value`` assignment from a config file or --set."""
    if key in _RUN_FIELDS:
        setattr(config, key, _RUN_FIELDS[key](raw))
    elif key in _CHAIN_FIELDS:
        config.params = dataclasses.replace(config.params, **{key: _CHAIN_FIELDS[key](raw)})
    elif key in _DETECTOR_FIELDS:
        det = config.params.detector
        if not isinstance(det, HomodyneDetector):
            det = HomodyneDetector()
        det = dataclasses.replace(det, **{key: _DETECTOR_FIELDS[key](raw)})
        config.params = dataclasses.replace(config.params, detector=det)
        config.detector = "homodyne"
    else:
        raise ConfigError(key, "unknown configuration key")


def _load_config(path: str | None, assignments: list[str]) -> RunConfig:
    config = RunConfig()
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}", "expected key=value")
                key, raw = (part.strip() for part in line.split("=", 1))
                _apply_assignment(config, key, raw)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(item, "expected key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        _apply_assignment(config, key, raw)
    return config


def _finalize(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Fold command-line flags (highest precedence) into the config."""
    for key in ("state", "method", "detector", "n_shots", "bin_width", "seed", "out_dir"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    chain_updates = {
        key: getattr(args, key)
        for key in _CHAIN_FIELDS
        if getattr(args, key, None) is not None
    }
    if chain_updates:
        config.params = dataclasses.replace(config.params, **chain_updates)
    if config.detector == "homodyne" and not isinstance(config.params.detector, HomodyneDetector):
        config.params = dataclasses.replace(config.params, detector=HomodyneDetector())
    if config.detector == "intensity" and not isinstance(config.params.detector, IntensityDetector):
        config.params = dataclasses.replace(config.params, detector=IntensityDetector())
    config.validate()
    return config


def _stem(config: RunConfig) -> str:
    return f"batch_{config.state}_{config.seed}"


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _finalize(_load_config(args.config, args.set or []), args)
    batch = run_batch(preset(config.state), config.params, config.n_shots, config.seed)
    os.makedirs(config.out_dir, exist_ok=True)
    stem = os.path.join(config.out_dir, _stem(config))
    batch.to_csv(stem + ".csv")
    with open(stem + ".json", "w") as fh:
        fh.write(config.to_json() + "\n")
    print(stem + ".csv")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    config = _finalize(_load_config(args.config, args.set or []), args)
    cfg = ReconConfig(method=config.method, bin_width=config.bin_width)
    batch = ShotBatch.from_csv(args.batch)
    state = preset(batch.state_label)

    if config.method == "double":
        if not args.batch2:
            raise ConfigError("batch2", "the two-displacement method needs two batches")
        batch2 = ShotBatch.from_csv(args.batch2)
        estimate, diag = double_displacement_reconstruct(batch, batch2, cfg)
        f = fidelity(estimate, state)
        n = batch.n_shots + batch2.n_shots
    else:
        if config.method == "standard":
            hist = standard_reconstruct(batch, cfg)
        elif config.method == "displaced":
            hist = displaced_reconstruct(batch, cfg)
        else:
            hist = homodyne_reconstruct(batch, cfg)
        estimate, diag = hist, {}
        f = fidelity(hist, state)
        n = batch.n_shots

    os.makedirs(config.out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.batch))[0]
    stem = os.path.join(config.out_dir, f"recon_{config.method}_{base}")
    estimate.to_csv(stem + ".csv")
    report = {
        "method": config.method,
        "N": n,
        "state": batch.state_label,
        "fidelity": f,
        "infidelity": 1.0 - f,
    }
    report.update({f"diag_{k}": v for k, v in diag.items()})
    with open(stem + ".json", "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _parse_grid(text: str | None, default: tuple[float, ...]) -> tuple[float, ...]:
    if not text:
        return default
    return tuple(float(part) for part in text.split(","))


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _finalize(_load_config(args.config, args.set or []), args)
    methods = tuple((args.methods or "standard,displaced").split(","))
    kind = args.kind
    if kind == "displacement":
        spec = SweepSpec(
            "displacement", config.state, methods, "displacement",
            _parse_grid(args.grid, DEFAULT_DISPLACEMENT_GRID), params=config.params,
            bin_width=config.bin_width, n_shots=config.n_shots,
            repeats=args.repeats, seed=config.seed,
        )
        result = sweep_displacement(spec)
    elif kind == "gain":
        spec = SweepSpec(
            "gain", config.state, methods, "gain",
            _parse_grid(args.grid, DEFAULT_GAIN_GRID), params=config.params,
            bin_width=config.bin_width, n_shots=config.n_shots,
            repeats=args.repeats, seed=config.seed,
        )
        result = sweep_gain(spec)
    elif kind == "robustness":
        if not args.param or not args.grid:
            raise ConfigError("param/grid", "robustness sweeps need --param and --grid")
        spec = SweepSpec(
            "robustness", config.state, methods, args.param,
            _parse_grid(args.grid, ()), params=config.params,
            bin_width=config.bin_width, n_shots=config.n_shots,
            repeats=args.repeats, seed=config.seed,
        )
        result = robustness_sweep(spec)
    elif kind in ("homodyne-d", "homodyne-gain"):
        param = "displacement" if kind == "homodyne-d" else "gain"
        default = DEFAULT_DISPLACEMENT_GRID if param == "displacement" else DEFAULT_GAIN_GRID
        spec = SweepSpec(
            kind.replace("-", "_"), config.state, methods, param,
            _parse_grid(args.grid, default), params=config.params,
            bin_width=config.bin_width, n_shots=config.n_shots,
            repeats=args.repeats, seed=config.seed,
        )
        result = homodyne_comparison(spec)
    else:
        raise ConfigError("kind", f"unknown sweep kind {kind!r}")

    csv_path, json_path = result.to_csv(config.out_dir)
    print(json.dumps({"csv": csv_path, "summary": result.summary}, sort_keys=True))
    return EXIT_OK


def cmd_squeeze(args: argparse.Namespace) -> int:
    config = _finalize(_load_config(args.config, args.set or []), args)
    if config.params.displacement == 0.0:
        config.params = dataclasses.replace(config.params, displacement=100.0)
    m_grid = tuple(float(m) for m in (args.m or "3,5,7,9,11").split(","))
    spec = SweepSpec(
        "squeezing", config.state, ("displaced",), "m", m_grid, params=config.params,
        bin_width=config.bin_width, n_shots=config.n_shots,
        repeats=args.repeats, seed=config.seed,
    )
    result = squeezing_table(spec)
    csv_path, json_path = result.to_csv(config.out_dir)
    print(json.dumps({"csv": csv_path, "summary": result.summary}, sort_keys=True))
    return EXIT_OK


def cmd_presets(_args: argparse.Namespace) -> int:
    for name in PRESETS:
        description = PRESETS[name][0]
        print(f"{name:10s} {description}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="config assignment (repeatable; overrides --config)")
    parser.add_argument("--state", help="source-state preset")
    parser.add_argument("--method", help="reconstruction method")
    parser.add_argument("--detector", choices=("intensity", "homodyne"))
    parser.add_argument("--n-shots", dest="n_shots", type=int)
    parser.add_argument("--bin-width", dest="bin_width", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    for name, caster in _CHAIN_FIELDS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=caster)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opatomo",
        description="Monte Carlo tomography of optical quadrature distributions "
        "through a phase-sensitive amplifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a measurement batch and write outcomes")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="estimate a quadrature histogram from batches")
    _add_common(p)
    p.add_argument("--batch", required=True, help="outcome CSV from `simulate`")
    p.add_argument("--batch2", help="second batch (two-displacement method)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="run a parameter sweep experiment")
    _add_common(p)
    p.add_argument("--kind", required=True,
                   choices=("displacement", "gain", "robustness", "homodyne-d", "homodyne-gain"))
    p.add_argument("--param", help="swept chain field (robustness sweeps)")
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--repeats", type=int, default=8)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("squeeze", help="distillable-squeezing table")
    _add_common(p)
    p.add_argument("--m", help="comma-separated fit sizes (odd)")
    p.add_argument("--repeats", type=int, default=8)
    p.set_defaults(func=cmd_squeeze)

    p = sub.add_parser("presets", help="list source-state presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PositivityViolation as exc:
        print(
            f"error: {exc} (hint: take a second batch at a different "
            "displacement and use --method double)",
            file=sys.stderr,
        )
        return EXIT_POSITIVITY
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
