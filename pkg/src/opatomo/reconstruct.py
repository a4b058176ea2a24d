"""Estimators mapping raw detector outcomes to quadrature histograms.

Four reconstruction routes are provided:

* ``standard_reconstruct`` — assumes the target distribution is symmetric
  about the origin, folds every outcome onto the positive axis and mirrors
  the histogram.
* ``displaced_reconstruct`` — inverts outcomes taken with a displacement
  large enough that the amplified quadrature stays positive, so no
  symmetry assumption is needed.
* ``double_displacement_reconstruct`` — removes the positivity requirement
  by combining two batches taken at different displacements and unfolding
  the sign ambiguity through a non-negative least-squares system.
* ``homodyne_reconstruct`` — affine inversion of homodyne currents.

All estimators invert with the *nominal* chain parameters: the per-shot
fluctuations are physical noise the estimator cannot observe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import ChainParams, HomodyneDetector, IntensityDetector, ShotBatch
from .hist import DensityEstimate, QuadratureHistogram, bin_values
from .nnls import solve_nnls

__all__ = [
    "ReconConfig",
    "PositivityViolation",
    "DegenerateSupport",
    "InconsistentBinning",
    "noise_equivalent_std",
    "fold_displacement",
    "invert_intensity",
    "invert_homodyne",
    "standard_reconstruct",
    "displaced_reconstruct",
    "support_positivity_check",
    "near_zero_fraction",
    "build_fold_matrices",
    "unfold_fold_samples",
    "double_displacement_reconstruct",
    "homodyne_reconstruct",
    "METHODS",
]

METHODS = ("standard", "displaced", "double", "homodyne")

# Multiplier applied to the noise-equivalent quadrature std when deriving
# the default near-zero cut.
NEAR_ZERO_SIGMAS = 4.0

# Bins with fewer counts than this are treated as empty when locating the
# edge of the folded support, so a single outlier shot cannot inflate the
# system size.
SUPPORT_MIN_COUNT = 2


class PositivityViolation(RuntimeError):
    """Too much outcome mass near the fold point for a single-displacement
    inversion; a second displaced batch is required."""

    def __init__(self, fraction: float, cut: float, threshold: float):
        self.fraction = fraction
        self.cut = cut
        self.threshold = threshold
        super().__init__(
            f"{fraction:.4f} of outcomes fall within {cut:.4g} of the fold "
            f"point (threshold {threshold:.4g}); use the two-displacement "
            "estimator"
        )


class DegenerateSupport(RuntimeError):
    """The folded samples carry no usable support beyond the origin bin."""


class InconsistentBinning(ValueError):
    """The two batches of a two-displacement reconstruction cannot share a
    grid (mismatched bin width or nominal chain parameters)."""


@dataclass(frozen=True)
class ReconConfig:
    """Shared knobs of the reconstruction estimators.

    ``near_zero_cut`` is in quadrature units at the fold; ``None`` means
    "derive from the chain noise" via ``noise_equivalent_std``.
    ``displacement_pair`` is only consumed by the two-displacement route.
    """

    method: str = "displaced"
    bin_width: float = 0.05
    lo: float = -6.0
    hi: float = 6.0
    positivity_threshold: float = 0.005
    near_zero_cut: float | None = None
    displacement_pair: tuple[float, float] | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (self.bin_width > 0.0):
            raise ValueError("bin_width must be positive")
        if not (self.lo < self.hi):
            raise ValueError("lo must be below hi")
        if not (0.0 <= self.positivity_threshold < 1.0):
            raise ValueError("positivity_threshold must lie in [0, 1)")
        if self.near_zero_cut is not None and self.near_zero_cut < 0.0:
            raise ValueError("near_zero_cut must be non-negative")


def noise_equivalent_std(params: ChainParams) -> float:
    """Quadrature scale below which an inverted intensity outcome is noise.

    Near the fold point the photon number fluctuates by roughly the
    post-amplification noise std, so the inverted coordinate fluctuates by
    the square root of that noise over the amplification scale.
    """
    scale = math.exp(2.0 * params.gain) * params.input_transmittance * params.output_transmittance
    return math.sqrt(params.output_noise / scale) if params.output_noise > 0.0 else 0.0


def resolved_near_zero_cut(cfg: ReconConfig, params: ChainParams) -> float:
    if cfg.near_zero_cut is not None:
        return cfg.near_zero_cut
    return NEAR_ZERO_SIGMAS * noise_equivalent_std(params)


def fold_displacement(params: ChainParams) -> float:
    """The applied displacement expressed in input-quadrature units."""
    return params.displacement / (
        math.exp(params.gain) * math.sqrt(params.input_transmittance)
    )


def invert_intensity(outcomes, params: ChainParams, branch: int = 1) -> np.ndarray:
    """Map photon-number outcomes back to quadrature estimates.

    Negative outcomes (possible through detector noise) clamp the radicand
    to zero rather than being discarded: dropping them would bias exactly
    the near-zero density this estimator cares about.  Inversion uses the
    nominal gain and transmittances.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    n_x = np.asarray(outcomes, dtype=float)
    scale = math.exp(2.0 * params.gain) * params.input_transmittance * params.output_transmittance
    folded = np.sqrt(np.clip(n_x, 0.0, None) / scale)
    return branch * folded - fold_displacement(params)


def invert_homodyne(outcomes, params: ChainParams) -> np.ndarray:
    """Affine inversion of homodyne currents (unbiased by construction)."""
    det = params.detector
    if not isinstance(det, HomodyneDetector):
        raise ValueError("homodyne inversion requires a homodyne batch")
    gain_amp = math.exp(params.gain)
    denom = gain_amp * det.lo_amplitude * math.sqrt(
        params.input_transmittance * det.efficiency
    )
    i_x = np.asarray(outcomes, dtype=float)
    return i_x / denom - fold_displacement(params)


def support_positivity_check(fold_values, cfg: ReconConfig, cut: float | None = None) -> bool:
    """True when at most ``positivity_threshold`` of the mass sits within
    ``cut`` of the fold point.  ``fold_values`` are fold coordinates, i.e.
    the quadrature estimates *before* the displacement is subtracted."""
    if cut is None:
        cut = cfg.near_zero_cut
    if cut is None:
        raise ValueError("no near-zero cut available; set cfg.near_zero_cut or pass cut")
    values = np.asarray(fold_values, dtype=float)
    if values.size == 0:
        return True
    fraction = float(np.mean(values < cut))
    return fraction <= cfg.positivity_threshold


def near_zero_fraction(batch: ShotBatch, cfg: ReconConfig) -> float:
    """Fraction of a batch's fold coordinates below the near-zero cut."""
    fold = invert_intensity(batch.outcomes, batch.params, branch=1) + fold_displacement(batch.params)
    cut = resolved_near_zero_cut(cfg, batch.params)
    return float(np.mean(fold < cut))


def _require_intensity(batch: ShotBatch, op: str) -> None:
    if not isinstance(batch.params.detector, IntensityDetector):
        raise ValueError(f"{op} requires an intensity-detector batch")


def standard_reconstruct(batch: ShotBatch, cfg: ReconConfig) -> QuadratureHistogram:
    """Symmetric reconstruction: fold, histogram, mirror.

    Every outcome is mapped to a non-negative quadrature value, histogrammed
    on ``[0, hi)``, and each bin's mass is split equally onto the mirrored
    pair of bins so the result lives on the full axis ``[-hi, hi)`` and is
    directly comparable with the other estimators under the fidelity metric.
    Requires an undisplaced batch.
    """
    cfg.validate()
    _require_intensity(batch, "standard_reconstruct")
    if batch.params.displacement != 0.0:
        raise ValueError("standard_reconstruct requires a batch taken at zero displacement")
    magnitudes = invert_intensity(batch.outcomes, batch.params, branch=1)
    half = bin_values(magnitudes, cfg.bin_width, 0.0, cfg.hi)
    counts = np.concatenate([half.counts[::-1], half.counts])
    return QuadratureHistogram(
        bin_width=cfg.bin_width,
        origin=-cfg.hi,
        counts=counts,
        n_total=2 * half.n_total,
        overflow=2 * half.overflow,
    )


def displaced_reconstruct(
    batch: ShotBatch, cfg: ReconConfig, enforce_positivity: bool = True
) -> QuadratureHistogram:
    """Single-displacement reconstruction.

    The displacement is already subtracted inside the inversion, so the
    returned histogram lives on the original quadrature axis.  When more
    than ``positivity_threshold`` of the outcomes fall within the near-zero
    cut of the fold point the sign branch is ambiguous; with
    ``enforce_positivity`` a PositivityViolation is raised to direct the
    caller to the two-displacement estimator.
    """
    cfg.validate()
    _require_intensity(batch, "displaced_reconstruct")
    estimates = invert_intensity(batch.outcomes, batch.params, branch=1)
    cut = resolved_near_zero_cut(cfg, batch.params)
    fold = estimates + fold_displacement(batch.params)
    fraction = float(np.mean(fold < cut)) if fold.size else 0.0
    if enforce_positivity and fraction > cfg.positivity_threshold:
        raise PositivityViolation(fraction, cut, cfg.positivity_threshold)
    return bin_values(estimates, cfg.bin_width, cfg.lo, cfg.hi)


def homodyne_reconstruct(batch: ShotBatch, cfg: ReconConfig) -> QuadratureHistogram:
    """Histogram of affinely inverted homodyne currents."""
    cfg.validate()
    estimates = invert_homodyne(batch.outcomes, batch.params)
    return bin_values(estimates, cfg.bin_width, cfg.lo, cfg.hi)


def build_fold_matrices(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Fold matrices of the two-displacement linear system.

    With the unknown density mass vector f over the 2*n1 bins centered at
    (-n1+1/2)w ... (n1-1/2)w, row i of A accumulates the pair of bins that
    fold onto positive bin i under |x|, and row i of B the pair that folds
    onto bin i under |x + (n2-n1)*w|.  Indices falling outside the grid are
    dropped, so edge rows may hold a single unit entry.
    """
    if n1 < 1 or n2 < n1:
        raise ValueError("fold matrices require 1 <= n1 <= n2")
    delta = n2 - n1
    a = np.zeros((n1, 2 * n1))
    for i in range(1, n1 + 1):
        for j in (n1 + 1 - i, n1 + i):
            if 1 <= j <= 2 * n1:
                a[i - 1, j - 1] += 1.0
    b = np.zeros((n2, 2 * n1))
    for i in range(1, n2 + 1):
        for j in (n1 - delta + i, n1 + 1 - delta - i):
            if 1 <= j <= 2 * n1:
                b[i - 1, j - 1] += 1.0
    return a, b


def _last_supported_bin(counts: np.ndarray) -> int:
    """1-based index of the last bin with a dependable count, 0 if none."""
    supported = np.flatnonzero(counts >= SUPPORT_MIN_COUNT)
    return int(supported[-1]) + 1 if supported.size else 0


def unfold_fold_samples(
    y_samples, z_samples, bin_width: float, shift: float = 0.0
) -> tuple[DensityEstimate, dict]:
    """Recover a signed-axis density from two folded sample sets.

    ``y_samples`` are magnitudes |X| and ``z_samples`` magnitudes |X + d|
    of the same underlying variable X, for some displacement d > 0.  Both
    are histogrammed on the shared positive grid with centers (k-1/2)*w;
    the grid itself fixes the displacement to (n2-n1) whole bins.  The
    stacked fold system is solved under non-negativity and the recovered
    masses are returned on centers shifted by ``-shift`` (used by callers
    that moved the coordinate origin before folding).
    """
    if not (bin_width > 0.0):
        raise ValueError("bin_width must be positive")
    y = np.asarray(y_samples, dtype=float)
    z = np.asarray(z_samples, dtype=float)
    if y.size == 0 or z.size == 0:
        raise DegenerateSupport("empty sample set")
    if np.any(y < 0.0) or np.any(z < 0.0):
        raise ValueError("folded samples must be non-negative")

    extent = bin_width * (math.floor(max(float(y.max()), float(z.max())) / bin_width) + 1)
    hist_y = bin_values(y, bin_width, 0.0, extent)
    hist_z = bin_values(z, bin_width, 0.0, extent)
    n_y = _last_supported_bin(hist_y.counts)
    n_z = _last_supported_bin(hist_z.counts)
    if n_y == 0 or n_z == 0:
        raise DegenerateSupport(
            "folded histograms carry no bin with a dependable count"
        )

    flipped = n_y > n_z
    if flipped:
        # Substituting U = -X - d swaps the roles of the two folds, so the
        # narrower sample always supplies the |.| side of the system.
        hist_y, hist_z = hist_z, hist_y
        n_y, n_z = n_z, n_y

    n1, n2 = n_y, n_z
    a, b = build_fold_matrices(n1, n2)
    rhs = np.concatenate([hist_y.masses[:n1], hist_z.masses[:n2]])
    result = solve_nnls(np.vstack([a, b]), rhs)

    w = bin_width
    centers = (np.arange(1, 2 * n1 + 1) - n1 - 0.5) * w
    masses = result.x
    if flipped:
        # Map back through X = -U - (n2-n1)*w on the grid's own displacement.
        centers = (-centers - (n2 - n1) * w)[::-1]
        masses = masses[::-1]
    estimate = DensityEstimate(
        centers=centers - shift, masses=masses, bin_width=w
    )
    diagnostics = {
        "n1": n1,
        "n2": n2,
        "flipped": flipped,
        "model_displacement": (n2 - n1) * w,
        "nnls_converged": result.converged,
        "nnls_iterations": result.n_iter,
        "residual": result.residual,
    }
    return estimate, diagnostics


def double_displacement_reconstruct(
    batch_a: ShotBatch, batch_b: ShotBatch, cfg: ReconConfig
) -> tuple[DensityEstimate, dict]:
    """Two-displacement reconstruction.

    The two batches must share every nominal chain parameter except the
    displacement.  Their fold coordinates realize |X + d1| and |X + d2| in
    input-quadrature units; the coordinate origin is moved by the smaller
    displacement, the fold system is solved for the shifted variable, and
    the recovered centers are displaced back.
    """
    cfg.validate()
    _require_intensity(batch_a, "double_displacement_reconstruct")
    _require_intensity(batch_b, "double_displacement_reconstruct")
    if batch_a.params.chain_key() != batch_b.params.chain_key():
        raise InconsistentBinning(
            "batches disagree on nominal chain parameters and cannot share a grid"
        )
    d_a = fold_displacement(batch_a.params)
    d_b = fold_displacement(batch_b.params)
    if d_b < d_a:
        batch_a, batch_b = batch_b, batch_a
        d_a, d_b = d_b, d_a
    if d_b == d_a:
        raise ValueError(
            "double_displacement_reconstruct needs two distinct displacements"
        )
    y = invert_intensity(batch_a.outcomes, batch_a.params, branch=1) + d_a
    z = invert_intensity(batch_b.outcomes, batch_b.params, branch=1) + d_b
    return unfold_fold_samples(y, z, cfg.bin_width, shift=d_a)
