"""The measurement chain: lossy incoupling, phase-sensitive gain, detection.

One shot takes a quadrature pair (x, p), attenuates and blurs it on the way
in, amplifies x by e^G while deamplifying p by e^-G (with per-shot gain
jitter), displaces the amplified quadrature by d, and lands on one of two
detectors:

* intensity: N = alpha_out * ((e^G X + d)^2 + (e^-G P)^2 - 1/2) + noise,
  with per-shot fluctuations of alpha_out. Outcomes stay real-valued and may
  be negative; nothing is discretized.
* homodyne: i = (sqrt(eta) * (e^G X + d) + noise) * lo_amplitude, where the
  noise mixes the vacuum admitted by the imperfect LO port with electronic
  noise.

All randomness comes from the caller's Generator; the draw order inside a
shot function is fixed and documented so batches are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import math

import numpy as np

from .states import SourceState
from .streams import stream

__all__ = [
    "ConfigError",
    "IntensityDetector",
    "HomodyneDetector",
    "ChainParams",
    "ShotBatch",
    "intensity_shot",
    "homodyne_shot",
    "run_batch",
    "BATCH_CHUNK",
]

# Shots are partitioned into fixed-size chunks, each with its own sub-stream,
# so any execution order (serial or parallel) reproduces the same outcomes.
BATCH_CHUNK = 1 << 14

# Lower clip for the per-shot output transmittance; the interval is open at 0.
_MIN_TRANSMITTANCE = 1e-12


class ConfigError(ValueError):
    """A parameter failed validation; `field` names the offender."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class IntensityDetector:
    kind: str = "intensity"


@dataclass(frozen=True)
class HomodyneDetector:
    """Homodyne readout of the amplified quadrature.

    efficiency is the LO-port transmittance eta; the admixed vacuum enters
    with quadrature std vacuum_noise (1/2 for our convention), on top of
    additive electronic noise. lo_amplitude only rescales the current.
    """

    efficiency: float = 1.0
    lo_amplitude: float = 1.0
    vacuum_noise: float = 0.5
    electronic_noise: float = 0.0
    kind: str = "homodyne"


@dataclass(frozen=True)
class ChainParams:
    """Chain settings; defaults are the baseline operating point."""

    gain: float = 4.0
    gain_jitter: float = 0.01
    input_transmittance: float = 0.99
    input_noise: float = 0.01
    output_transmittance: float = 0.1
    output_transmittance_jitter: float = 1e-3
    output_noise: float = 3.0
    displacement: float = 0.0
    detector: IntensityDetector | HomodyneDetector = field(default_factory=IntensityDetector)

    def __post_init__(self):
        self.validate()

    def validate(self):
        checks = [
            ("gain", self.gain >= 0.0, "must be >= 0"),
            ("gain_jitter", self.gain_jitter >= 0.0, "must be >= 0"),
            ("input_transmittance", 0.0 < self.input_transmittance <= 1.0, "must be in (0, 1]"),
            ("input_noise", self.input_noise >= 0.0, "must be >= 0"),
            ("output_transmittance", 0.0 < self.output_transmittance <= 1.0, "must be in (0, 1]"),
            ("output_transmittance_jitter", self.output_transmittance_jitter >= 0.0, "must be >= 0"),
            ("output_noise", self.output_noise >= 0.0, "must be >= 0"),
            ("displacement", math.isfinite(self.displacement), "must be finite"),
        ]
        if isinstance(self.detector, HomodyneDetector):
            checks += [
                ("detector.efficiency", 0.0 < self.detector.efficiency <= 1.0, "must be in (0, 1]"),
                ("detector.lo_amplitude", self.detector.lo_amplitude > 0.0, "must be > 0"),
                ("detector.vacuum_noise", self.detector.vacuum_noise >= 0.0, "must be >= 0"),
                ("detector.electronic_noise", self.detector.electronic_noise >= 0.0, "must be >= 0"),
            ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(name, f"{msg} (got {_get(self, name)})")
        for name in ("gain", "gain_jitter", "input_transmittance", "input_noise",
                     "output_transmittance", "output_transmittance_jitter", "output_noise"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")

    def with_displacement(self, d: float) -> "ChainParams":
        return replace(self, displacement=d)

    def chain_key(self) -> tuple:
        """Everything except the displacement; used to pair batches."""
        return (
            self.gain, self.gain_jitter, self.input_transmittance, self.input_noise,
            self.output_transmittance, self.output_transmittance_jitter,
            self.output_noise, self.detector,
        )

    def to_dict(self) -> dict:
        d = {
            "gain": self.gain,
            "gain_jitter": self.gain_jitter,
            "input_transmittance": self.input_transmittance,
            "input_noise": self.input_noise,
            "output_transmittance": self.output_transmittance,
            "output_transmittance_jitter": self.output_transmittance_jitter,
            "output_noise": self.output_noise,
            "displacement": self.displacement,
            "detector": {"kind": self.detector.kind},
        }
        if isinstance(self.detector, HomodyneDetector):
            d["detector"].update(
                efficiency=self.detector.efficiency,
                lo_amplitude=self.detector.lo_amplitude,
                vacuum_noise=self.detector.vacuum_noise,
                electronic_noise=self.detector.electronic_noise,
            )
        return d

    @staticmethod
    def from_dict(d: dict) -> "ChainParams":
        det_d = dict(d.get("detector", {"kind": "intensity"}))
        kind = det_d.pop("kind", "intensity")
        if kind == "homodyne":
            detector = HomodyneDetector(**det_d)
        elif kind == "intensity":
            detector = IntensityDetector()
        else:
            raise ConfigError("detector.kind", f"unknown detector kind {kind!r}")
        rest = {k: v for k, v in d.items() if k != "detector"}
        return ChainParams(detector=detector, **rest)


def _get(obj, dotted):
    for part in dotted.split("."):
        obj = getattr(obj, part)
    return obj


def _incoupled(x, p, params: ChainParams, rng: np.random.Generator, n: int):
    # eps_in is drawn independently for each quadrature. Standard normals are
    # drawn explicitly and scaled so the stream consumption does not depend on
    # the parameter values (keeps paired sweeps paired).
    root_t = math.sqrt(params.input_transmittance)
    eps_x = params.input_noise * rng.standard_normal(n)
    eps_p = params.input_noise * rng.standard_normal(n)
    return root_t * np.asarray(x, dtype=float) + eps_x, root_t * np.asarray(p, dtype=float) + eps_p


def intensity_shot(x, p, params: ChainParams, rng: np.random.Generator) -> np.ndarray:
    """Intensity outcomes for quadrature pairs (x, p); scalar or array alike.

    Draw order: eps_in(x), eps_in(p), gain, output transmittance, detector
    noise. The per-shot gain is clipped at 0, the per-shot transmittance to
    (0, 1]; the detector noise is never clipped, so outcomes can be negative.
    """
    n = np.broadcast(x, p).size
    X, P = _incoupled(x, p, params, rng, n)
    g = np.maximum(params.gain + params.gain_jitter * rng.standard_normal(n), 0.0)
    t = np.clip(
        params.output_transmittance + params.output_transmittance_jitter * rng.standard_normal(n),
        _MIN_TRANSMITTANCE, 1.0,
    )
    noise = params.output_noise * rng.standard_normal(n)
    amplified = np.exp(g) * X + params.displacement
    deamplified = np.exp(-g) * P
    return t * (amplified**2 + deamplified**2 - 0.5) + noise


def homodyne_shot(x, p, params: ChainParams, rng: np.random.Generator) -> np.ndarray:
    """Homodyne current for quadrature pairs; p never reaches this detector.

    Draw order: eps_in(x), gain, vacuum admixture, electronic noise.
    """
    det = params.detector
    if not isinstance(det, HomodyneDetector):
        raise ConfigError("detector", "homodyne_shot needs a HomodyneDetector")
    n = np.broadcast(x, p).size
    eps_x = params.input_noise * rng.standard_normal(n)
    X = math.sqrt(params.input_transmittance) * np.asarray(x, dtype=float) + eps_x
    g = np.maximum(params.gain + params.gain_jitter * rng.standard_normal(n), 0.0)
    noise = (
        math.sqrt(1.0 - det.efficiency) * det.vacuum_noise * rng.standard_normal(n)
        + det.electronic_noise * rng.standard_normal(n)
    )
    amplified = np.exp(g) * X + params.displacement
    return (math.sqrt(det.efficiency) * amplified + noise) * det.lo_amplitude


def _shot_fn(params: ChainParams):
    return homodyne_shot if isinstance(params.detector, HomodyneDetector) else intensity_shot


@dataclass(frozen=True)
class ShotBatch:
    """Outcomes of n_shots passes of one state through one chain setting."""

    outcomes: np.ndarray
    params: ChainParams
    n_shots: int
    seed: int
    state_label: str = ""

    def to_csv(self, path):
        header = {
            "chain": self.params.to_dict(),
            "seed": self.seed,
            "n_shots": self.n_shots,
            "state": self.state_label,
        }
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write("outcome\n")
            for v in self.outcomes:
                fh.write(repr(float(v)) + "\n")

    @staticmethod
    def from_csv(path) -> "ShotBatch":
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError(f"{path}: missing batch header line")
            meta = json.loads(first[2:])
            column = fh.readline().strip()
            if column != "outcome":
                raise ValueError(f"{path}: unexpected column header {column!r}")
            outcomes = np.array([float(line) for line in fh if line.strip()])
        return ShotBatch(
            outcomes=outcomes,
            params=ChainParams.from_dict(meta["chain"]),
            n_shots=int(meta["n_shots"]),
            seed=int(meta["seed"]),
            state_label=meta.get("state", ""),
        )


def _chunk(state: SourceState, params: ChainParams, seed: int, index: int, count: int) -> np.ndarray:
    rng = stream(seed, index)
    x, p = state.sample_xp(count, rng)
    return _shot_fn(params)(x, p, params, rng)


def run_batch(
    state: SourceState,
    params: ChainParams,
    n_shots: int,
    seed: int,
    workers: int = 1,
) -> ShotBatch:
    """Simulate n_shots outcomes; identical results for any worker count.

    The batch is split into BATCH_CHUNK-sized chunks, each seeded as
    sub-stream (seed, chunk_index), so the partitioning, not the execution
    order, determines every draw.
    """
    if n_shots <= 0:
        raise ConfigError("n_shots", f"must be positive (got {n_shots})")
    counts = [BATCH_CHUNK] * (n_shots // BATCH_CHUNK)
    if n_shots % BATCH_CHUNK:
        counts.append(n_shots % BATCH_CHUNK)
    if workers > 1 and len(counts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda i: _chunk(state, params, seed, i, counts[i]), range(len(counts))
            ))
    else:
        parts = [_chunk(state, params, seed, i, c) for i, c in enumerate(counts)]
    return ShotBatch(
        outcomes=np.concatenate(parts),
        params=params,
        n_shots=n_shots,
        seed=seed,
        state_label=state.label,
    )
