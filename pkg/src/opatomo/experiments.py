"""Seeded, reproducible parameter-sweep experiments.

Every sweep is a pure function of a ``SweepSpec``: the master seed derives
one sub-seed per repeat, and those repeat seeds are shared across grid
points and estimation methods, so method comparisons are paired rather
than independent.  Results serialize to one CSV plus one JSON summary,
named ``<experiment>_<state>_<hash>``, where the hash digests the spec.

Swept displacement and gain values refer to the chain's displacement d
(amplified-quadrature units) and gain exponent G.  Gain sweeps keep the
displacement fixed in *input-quadrature* units (``GAIN_SWEEP_FOLD_D``), so
changing G does not silently change where the state sits relative to the
fold point.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import ChainParams, HomodyneDetector, IntensityDetector, run_batch
from .distill import distillable_variance, fit_parabola, loss_corrected_variance, select_peak
from .hist import analytic_point_density, fidelity
from .reconstruct import (
    ReconConfig,
    displaced_reconstruct,
    homodyne_reconstruct,
    near_zero_fraction,
    standard_reconstruct,
)
from .states import preset
from .streams import derive_seed

__all__ = [
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "sweep_displacement",
    "sweep_gain",
    "robustness_sweep",
    "homodyne_comparison",
    "squeezing_table",
    "DEFAULT_DISPLACEMENT_GRID",
    "DEFAULT_GAIN_GRID",
    "GAIN_SWEEP_FOLD_D",
]

# Default grids mirror the figure ranges: displacement log-spaced over four
# decades, gain linear from 1 to 7.
DEFAULT_DISPLACEMENT_GRID = tuple(float(v) for v in np.logspace(0.0, 4.0, 25))
DEFAULT_GAIN_GRID = tuple(float(v) for v in np.linspace(1.0, 7.0, 25))

# Displacement held fixed in input-quadrature units during gain sweeps.
GAIN_SWEEP_FOLD_D = 2.0

# A method saturates at the smallest grid value whose mean infidelity is
# within this factor of the value at the end of the grid.
SATURATION_FACTOR = 1.5

# Robustness knee: smallest swept value whose mean infidelity exceeds this
# multiple of the sweep's minimum.
KNEE_FACTOR = 2.0

_ROBUSTNESS_FIELDS = (
    "input_noise",
    "output_noise",
    "gain_jitter",
    "output_transmittance_jitter",
    "output_transmittance",
    "displacement",
)


@dataclass
class SweepSpec:
    """Complete, hashable description of one sweep."""

    experiment: str
    state: str
    methods: tuple[str, ...]
    param: str
    grid: tuple[float, ...]
    params: ChainParams = field(default_factory=ChainParams)
    bin_width: float = 0.05
    n_shots: int = 100_000
    repeats: int = 8
    seed: int = 0

    def validate(self) -> None:
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("grid must be sorted ascending")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")
        preset(self.state)  # raises on unknown preset
        self.params.validate()

    def canonical_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "state": self.state,
            "methods": list(self.methods),
            "param": self.param,
            "grid": [repr(float(v)) for v in self.grid],
            "params": self.params.to_dict(),
            "bin_width": self.bin_width,
            "n_shots": self.n_shots,
            "repeats": self.repeats,
            "seed": self.seed,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def spec_hash(self) -> str:
        return hashlib.sha1(self.canonical_json().encode()).hexdigest()[:8]

    def file_stem(self) -> str:
        return f"{self.experiment}_{self.state}_{self.spec_hash()}"


@dataclass
class SweepRow:
    param_value: float
    method: str
    mean_infidelity: float
    std_infidelity: float
    aux: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    summary: dict

    def to_csv(self, out_dir: str) -> tuple[str, str]:
        """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths.

        Floats are rendered with repr so re-running the same spec yields
        byte-identical files.
        """
        os.makedirs(out_dir, exist_ok=True)
        stem = self.spec.file_stem()
        csv_path = os.path.join(out_dir, stem + ".csv")
        json_path = os.path.join(out_dir, stem + ".json")
        lines = ["param_value,method,mean_infidelity,std_infidelity,aux_json"]
        for row in self.rows:
            aux = json.dumps(row.aux, sort_keys=True, separators=(",", ":"))
            lines.append(
                f"{row.param_value!r},{row.method},{row.mean_infidelity!r},"
                f'{row.std_infidelity!r},"{aux.replace(chr(34), chr(34) * 2)}"'
            )
        with open(csv_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(json_path, "w") as fh:
            fh.write(
                json.dumps(
                    {"spec": json.loads(self.spec.canonical_json()), "summary": self.summary},
                    sort_keys=True,
                    indent=2,
                )
                + "\n"
            )
        return csv_path, json_path


def _repeat_seeds(spec: SweepSpec) -> list[int]:
    return [derive_seed(spec.seed, r) for r in range(spec.repeats)]


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def _point_infidelity(
    state, params: ChainParams, cfg: ReconConfig, method: str, n: int, seeds: list[int]
) -> tuple[float, float, dict]:
    """Mean/std of 1-F over the repeat seeds for one (grid point, method)."""
    infs: list[float] = []
    fractions: list[float] = []
    for s in seeds:
        batch = run_batch(state, params, n, s)
        if method == "standard":
            hist = standard_reconstruct(batch, cfg)
        elif method == "displaced":
            hist = displaced_reconstruct(batch, cfg, enforce_positivity=False)
            fractions.append(near_zero_fraction(batch, cfg))
        elif method == "homodyne":
            hist = homodyne_reconstruct(batch, cfg)
        else:
            raise ValueError(f"unknown method {method!r}")
        infs.append(1.0 - fidelity(hist, state))
    mean, std = _mean_std(infs)
    aux: dict = {}
    if fractions:
        frac = float(np.mean(fractions))
        aux["near_zero_fraction"] = frac
        aux["positivity_ok"] = frac <= cfg.positivity_threshold
    return mean, std, aux


def sweep_displacement(spec: SweepSpec) -> SweepResult:
    """Infidelity as a function of the applied displacement.

    The displaced estimator runs at every grid value; the standard
    estimator has no displacement knob, so it runs once at d = 0 and its
    (mean, std) row is replicated across the grid as a flat reference.
    """
    spec.validate()
    state = preset(spec.state)
    cfg = ReconConfig(bin_width=spec.bin_width)
    seeds = _repeat_seeds(spec)
    rows: list[SweepRow] = []

    flat: dict[str, tuple[float, float, dict]] = {}
    if "standard" in spec.methods:
        flat["standard"] = _point_infidelity(
            state, replace(spec.params, displacement=0.0), cfg, "standard", spec.n_shots, seeds
        )

    for d in spec.grid:
        for method in spec.methods:
            if method in flat:
                mean, std, aux = flat[method]
            else:
                params = replace(spec.params, displacement=float(d))
                mean, std, aux = _point_infidelity(
                    state, params, cfg, method, spec.n_shots, seeds
                )
            rows.append(SweepRow(float(d), method, mean, std, aux))

    summary: dict = {}
    disp = [r for r in rows if r.method == "displaced"]
    if disp:
        best = min(disp, key=lambda r: r.mean_infidelity)
        level = best.mean_infidelity
        plateau = [r.param_value for r in disp if r.mean_infidelity <= SATURATION_FACTOR * level]
        summary["optimal_d"] = best.param_value
        summary["plateau_level"] = level
        summary["plateau_std"] = best.std_infidelity
        summary["plateau_lo"] = min(plateau)
        summary["plateau_hi"] = max(plateau)
    if "standard" in flat:
        summary["standard_reference"] = flat["standard"][0]
        summary["standard_reference_std"] = flat["standard"][1]
    return SweepResult(spec, rows, summary)


def _gain_sweep_params(base: ChainParams, gain: float, method: str) -> ChainParams:
    if method == "standard":
        return replace(base, gain=float(gain), displacement=0.0)
    displacement = GAIN_SWEEP_FOLD_D * math.exp(gain) * math.sqrt(base.input_transmittance)
    return replace(base, gain=float(gain), displacement=displacement)


def saturation_gain(rows: list[SweepRow], method: str) -> float:
    """Smallest grid gain whose mean infidelity is within SATURATION_FACTOR
    of the value at the top of the grid."""
    curve = [r for r in rows if r.method == method]
    final = curve[-1].mean_infidelity
    for row in curve:
        if row.mean_infidelity <= SATURATION_FACTOR * final:
            return row.param_value
    return curve[-1].param_value


def sweep_gain(spec: SweepSpec) -> SweepResult:
    """Infidelity as a function of the amplification exponent."""
    spec.validate()
    state = preset(spec.state)
    cfg = ReconConfig(bin_width=spec.bin_width)
    seeds = _repeat_seeds(spec)
    rows: list[SweepRow] = []
    for gain in spec.grid:
        for method in spec.methods:
            params = _gain_sweep_params(spec.params, gain, method)
            mean, std, aux = _point_infidelity(state, params, cfg, method, spec.n_shots, seeds)
            rows.append(SweepRow(float(gain), method, mean, std, aux))
    summary = {
        "saturation_gain": {m: saturation_gain(rows, m) for m in spec.methods},
        "saturated_infidelity": {
            m: [r for r in rows if r.method == m][-1].mean_infidelity for m in spec.methods
        },
    }
    return SweepResult(spec, rows, summary)


def robustness_sweep(spec: SweepSpec) -> SweepResult:
    """Infidelity as one chain imperfection is swept, others at their
    defaults; reports the knee where the error leaves its floor."""
    spec.validate()
    if spec.param not in _ROBUSTNESS_FIELDS:
        raise ValueError(
            f"robustness parameter must be one of {_ROBUSTNESS_FIELDS}, got {spec.param!r}"
        )
    state = preset(spec.state)
    cfg = ReconConfig(bin_width=spec.bin_width)
    seeds = _repeat_seeds(spec)
    rows: list[SweepRow] = []
    for value in spec.grid:
        for method in spec.methods:
            params = replace(spec.params, **{spec.param: float(value)})
            if method == "standard":
                params = replace(params, displacement=0.0)
            mean, std, aux = _point_infidelity(state, params, cfg, method, spec.n_shots, seeds)
            rows.append(SweepRow(float(value), method, mean, std, aux))

    summary: dict = {"knee": {}, "monotone_increasing": {}}
    for method in spec.methods:
        curve = [r for r in rows if r.method == method]
        floor = min(r.mean_infidelity for r in curve)
        knee = next(
            (r.param_value for r in curve if r.mean_infidelity > KNEE_FACTOR * floor), None
        )
        summary["knee"][method] = knee
        means = [r.mean_infidelity for r in curve]
        summary["monotone_increasing"][method] = bool(
            all(means[i] < means[i + 1] for i in range(len(means) - 1))
        )
    return SweepResult(spec, rows, summary)


def homodyne_comparison(spec: SweepSpec) -> SweepResult:
    """Homodyne detection against the photon-counting estimators.

    Two modes, selected by ``spec.param``:

    * ``"displacement"`` — homodyne infidelity across the displacement
      grid (expected flat), with the displaced estimator swept alongside
      for its optimal-plateau level.
    * ``"gain"`` — homodyne infidelity across the gain grid for detector
      efficiencies 1, 0.9, 0.5 and 0.1 (electronic noise 0.1), overlaid
      with the standard and displaced photon-counting curves.
    """
    spec.validate()
    state = preset(spec.state)
    cfg = ReconConfig(bin_width=spec.bin_width)
    seeds = _repeat_seeds(spec)
    rows: list[SweepRow] = []

    if spec.param == "displacement":
        detector = spec.params.detector
        if not isinstance(detector, HomodyneDetector):
            detector = HomodyneDetector(efficiency=0.5, electronic_noise=0.1)
        base_h = replace(spec.params, detector=detector)
        for d in spec.grid:
            mean, std, aux = _point_infidelity(
                state, replace(base_h, displacement=float(d)), cfg, "homodyne", spec.n_shots, seeds
            )
            rows.append(SweepRow(float(d), "homodyne", mean, std, aux))
            if "displaced" in spec.methods:
                params = replace(spec.params, displacement=float(d), detector=IntensityDetector())
                mean, std, aux = _point_infidelity(
                    state, params, cfg, "displaced", spec.n_shots, seeds
                )
                rows.append(SweepRow(float(d), "displaced", mean, std, aux))
        homod = [r for r in rows if r.method == "homodyne"]
        h_means = [r.mean_infidelity for r in homod]
        band = 2.0 * float(np.median([r.std_infidelity for r in homod]))
        summary = {
            "homodyne_level": float(np.mean(h_means)),
            "homodyne_variation": float(max(h_means) - min(h_means)),
            "repeat_std_band": band,
            "flat_within_band": bool(max(h_means) - min(h_means) < band),
        }
        disp = [r for r in rows if r.method == "displaced"]
        if disp:
            summary["displaced_plateau_level"] = min(r.mean_infidelity for r in disp)
        return SweepResult(spec, rows, summary)

    if spec.param == "gain":
        efficiencies = (1.0, 0.9, 0.5, 0.1)
        for gain in spec.grid:
            for eta in efficiencies:
                det = HomodyneDetector(efficiency=eta, electronic_noise=0.1)
                params = _gain_sweep_params(
                    replace(spec.params, detector=det), gain, "homodyne"
                )
                mean, std, aux = _point_infidelity(
                    state, params, cfg, "homodyne", spec.n_shots, seeds
                )
                aux["efficiency"] = eta
                rows.append(SweepRow(float(gain), f"homodyne@eta={eta:g}", mean, std, aux))
            for method in ("standard", "displaced"):
                if method in spec.methods:
                    params = _gain_sweep_params(
                        replace(spec.params, detector=IntensityDetector()), gain, method
                    )
                    mean, std, aux = _point_infidelity(
                        state, params, cfg, method, spec.n_shots, seeds
                    )
                    rows.append(SweepRow(float(gain), method, mean, std, aux))
        labels = sorted({r.method for r in rows})
        summary = {
            "saturation_gain": {m: saturation_gain(rows, m) for m in labels},
            "saturated_infidelity": {
                m: [r for r in rows if r.method == m][-1].mean_infidelity for m in labels
            },
        }
        return SweepResult(spec, rows, summary)

    raise ValueError("homodyne_comparison sweeps 'displacement' or 'gain'")


# States and incoupling variants tabulated by the squeezing table.  The
# incoupling noise is tied to the loss (a lossless input is also noiseless).
SQUEEZING_TABLE_ALPHAS = (0.95, 1.0)
SQUEEZING_TABLE_M = (3, 5, 7, 9, 11)


def squeezing_table(spec: SweepSpec) -> SweepResult:
    """Distillable squeezing V_d for one state across fit sizes m.

    For each incoupling variant the state is measured once per repeat at
    the spec's displacement, reconstructed, and distilled at every m
    (histograms are reused across m).  An analytic noiseless reference is
    distilled per m from the exact pdf.  ``param_value`` carries m.
    """
    spec.validate()
    if spec.params.displacement == 0.0:
        raise ValueError(
            "squeezing_table distills displaced-method histograms; give the "
            "chain a displacement (the optimal region is d ~ 100)"
        )
    state = preset(spec.state)
    cfg = ReconConfig(bin_width=spec.bin_width)
    seeds = _repeat_seeds(spec)
    m_values = tuple(int(v) for v in spec.grid) or SQUEEZING_TABLE_M
    rows: list[SweepRow] = []

    for alpha in SQUEEZING_TABLE_ALPHAS:
        params = replace(
            spec.params, input_transmittance=alpha, input_noise=1.0 - alpha
        )
        hists = [
            displaced_reconstruct(
                run_batch(state, params, spec.n_shots, s), cfg, enforce_positivity=False
            )
            for s in seeds
        ]
        for m in m_values:
            v_raw: list[float] = []
            v_cor: list[float] = []
            apexes: list[float] = []
            failures = 0
            for hist in hists:
                try:
                    fit = fit_parabola(hist, select_peak(hist, window=3), m)
                    v = distillable_variance(fit)
                except Exception:
                    failures += 1
                    continue
                v_raw.append(v)
                v_cor.append(loss_corrected_variance(v, alpha))
                apexes.append(fit.b)
            mean, std = _mean_std(v_raw) if v_raw else (float("nan"), 0.0)
            rows.append(
                SweepRow(
                    float(m),
                    f"alpha_in={alpha:g}",
                    mean,
                    std,
                    {
                        "v_d_corrected": float(np.mean(v_cor)) if v_cor else None,
                        "apex_location": float(np.mean(apexes)) if apexes else None,
                        "fit_failures": failures,
                        "state": spec.state,
                    },
                )
            )

    reference = analytic_point_density(state, spec.bin_width)
    for m in m_values:
        fit = fit_parabola(reference, select_peak(reference, window=3), m)
        rows.append(
            SweepRow(
                float(m),
                "analytic",
                distillable_variance(fit),
                0.0,
                {"apex_location": fit.b, "state": spec.state},
            )
        )

    by_m = {
        m: {r.method: r.mean_infidelity for r in rows if r.param_value == m}
        for m in m_values
    }
    summary = {"v_d": by_m}
    return SweepResult(spec, rows, summary)
