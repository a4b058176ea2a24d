"""Distillable-squeezing diagnostics on reconstructed histograms.

A local maximum of the quadrature density is fitted with a concave
parabola over an odd number of consecutive bins; the apex density and the
curvature magnitude combine into the distillable variance

    V_d = c / (2 a),        a = |second derivative at the apex|,

which for a Gaussian density of variance sigma^2 tends to sigma^2 / 2 as
the grid refines.  Working in bin-local coordinates makes the fit exactly
invariant under histogram displacement: shifting every bin center moves
the apex location but leaves a, c, and hence V_d bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import VACUUM_VARIANCE

__all__ = [
    "DistillError",
    "NotConcave",
    "NonPositiveApex",
    "OutOfRange",
    "ParabolaFit",
    "find_local_maxima",
    "select_peak",
    "fit_parabola",
    "distillable_variance",
    "loss_corrected_variance",
]


class DistillError(ValueError):
    """Base class for distillation failures."""


class NotConcave(DistillError):
    """The fitted quadratic opens upward; widen m or pick another maximum."""


class NonPositiveApex(DistillError):
    """The fitted apex density is not positive."""


class OutOfRange(DistillError):
    """The requested fit window leaves the histogram range."""


@dataclass(frozen=True)
class ParabolaFit:
    """Concave parabola p(x) = c - (a/2) (x - b)^2 fitted to density points.

    ``a`` is the curvature magnitude |p''(b)| > 0, ``b`` the apex location,
    ``c`` the apex density, ``m`` the number of fitted bins, and
    ``center_bin`` the histogram bin the window was centered on.
    """

    a: float
    b: float
    c: float
    m: int
    center_bin: int


def find_local_maxima(hist, window: int = 1) -> list[int]:
    """Bin indices whose mass dominates every bin within ``window`` steps.

    A bin qualifies when its mass is positive and no bin within the window
    exceeds it; plateaus report only their leftmost bin.  Indices are
    returned sorted by mass, descending (ties by index, ascending).
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    masses = np.asarray(hist.masses, dtype=float)
    n = masses.size
    maxima = []
    for i in range(n):
        if masses[i] <= 0.0:
            continue
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        neighborhood = masses[lo:hi]
        if np.any(neighborhood > masses[i]):
            continue
        # Plateau convention: an equal-mass bin earlier in the window means
        # this bin is not the leftmost representative.
        if np.any(masses[lo:i] == masses[i]):
            continue
        maxima.append(i)
    maxima.sort(key=lambda i: (-masses[i], i))
    return maxima


def select_peak(hist, window: int = 1) -> int:
    """The distillation target: highest local maximum, ties resolved toward
    the bin center closest to the origin (sub-Planck structures near the
    origin are the quantity of interest)."""
    maxima = find_local_maxima(hist, window)
    if not maxima:
        raise DistillError("histogram has no local maximum")
    centers = np.asarray(hist.centers, dtype=float)
    masses = np.asarray(hist.masses, dtype=float)
    return min(maxima, key=lambda i: (-masses[i], abs(centers[i]), i))


def fit_parabola(hist, center_bin: int, m: int) -> ParabolaFit:
    """Least-squares quadratic through ``m`` bins centered on ``center_bin``.

    The fit runs over density values (mass / bin width) against bin-center
    offsets from the central bin, selected symmetrically (m odd).  The
    symmetric window makes the odd/even moments decouple, so the normal
    equations reduce to two closed-form 1-D solves.
    """
    if m < 3 or m % 2 == 0:
        raise ValueError("m must be an odd integer >= 3")
    masses = np.asarray(hist.masses, dtype=float)
    half = m // 2
    if center_bin - half < 0 or center_bin + half >= masses.size:
        raise OutOfRange(
            f"fit window [{center_bin - half}, {center_bin + half}] leaves "
            f"the histogram range [0, {masses.size - 1}]"
        )
    w = float(hist.bin_width)
    offsets = np.arange(-half, half + 1) * w
    density = masses[center_bin - half : center_bin + half + 1] / w

    s2 = float(np.sum(offsets**2))
    s4 = float(np.sum(offsets**4))
    sy = float(np.sum(density))
    s1y = float(np.sum(offsets * density))
    s2y = float(np.sum(offsets**2 * density))
    det = m * s4 - s2 * s2
    q2 = (m * s2y - s2 * sy) / det
    q0 = (s4 * sy - s2 * s2y) / det
    q1 = s1y / s2

    a = -2.0 * q2
    if a <= 0.0:
        raise NotConcave(f"fitted quadratic is not concave (a = {a:.3g})")
    apex_offset = q1 / a
    c = q0 + 0.5 * q1 * apex_offset
    centers = np.asarray(hist.centers, dtype=float)
    return ParabolaFit(
        a=a, b=float(centers[center_bin] + apex_offset), c=c, m=m, center_bin=center_bin
    )


def distillable_variance(fit: ParabolaFit) -> float:
    """V_d = c / (2a); requires a positive apex density."""
    if fit.c <= 0.0:
        raise NonPositiveApex(f"apex density is not positive (c = {fit.c:.3g})")
    return fit.c / (2.0 * fit.a)


def loss_corrected_variance(v_d: float, input_transmittance: float) -> float:
    """Compensate the incoupling loss by variance additivity.

    The admixed vacuum contributes (1 - alpha_in) of the vacuum variance,
    which appears halved in distilled units just as a Gaussian input's
    variance does.  Experimental: the principle is variance additivity,
    the distilled-unit scaling mirrors the V_d convention.
    """
    return v_d - (1.0 - input_transmittance) * (VACUUM_VARIANCE / 2.0)
