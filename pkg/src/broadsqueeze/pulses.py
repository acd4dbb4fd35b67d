"""Pulse-height analysis: waveforms to photon-number counts.

Heights are the maxima of baseline-subtracted, moving-average-filtered
records. Their histogram is searched for well separated peaks, each peak is
fitted with a Gaussian, and events are binned at the equal-likelihood
crossings of neighbouring peaks. The lowest peak is photon number zero.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.ndimage import convolve1d, uniform_filter1d
from scipy.optimize import curve_fit
from scipy.signal import find_peaks, peak_widths

from .errors import PeakFitError, PhysicsDomainError, UnresolvedPeaksWarning
from .fock import CountHistogram
from .simulate import FWHM_PER_SIGMA, WaveformSet


@dataclass(frozen=True)
class GaussianPeak:
    center: float
    sigma: float
    weight: float

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma

    def density(self, x):
        return self.weight / (np.sqrt(2 * np.pi) * self.sigma) * np.exp(-0.5 * ((x - self.center) / self.sigma) ** 2)


class ThresholdSet(NamedTuple):
    """Bin ``n`` covers heights in ``[boundaries[n-1], boundaries[n])``, open at both ends."""

    boundaries: np.ndarray

    def assign(self, heights) -> np.ndarray:
        return np.searchsorted(self.boundaries, heights, side="right")


class CountAssignment(NamedTuple):
    histogram: CountHistogram
    thresholds: ThresholdSet
    resolution_eV: float


@dataclass(frozen=True)
class HeightOptions:
    baseline_samples: int = 80
    filter_width: int = 8
    block_records: int = 8192


def extract_heights(wset: WaveformSet, options: HeightOptions = HeightOptions()) -> np.ndarray:
    """One pulse height per record (processed in blocks to bound memory)."""
    rec = wset.records
    if rec.shape[0] == 0:
        raise ValueError("no records")
    if rec.shape[1] < options.baseline_samples or options.baseline_samples < 1:
        raise ValueError(f"records of {rec.shape[1]} samples are shorter than the baseline window")
    out = np.empty(rec.shape[0])
    for lo in range(0, rec.shape[0], options.block_records):
        block = np.asarray(rec[lo : lo + options.block_records], dtype=np.float64)
        block = block - block[:, : options.baseline_samples].mean(axis=1, keepdims=True)
        if options.filter_width > 1:
            block = uniform_filter1d(block, options.filter_width, axis=1, mode="nearest")
        out[lo : lo + block.shape[0]] = block.max(axis=1)
    return out


def fd_bin_width(x: np.ndarray) -> float:
    q75, q25 = np.percentile(x, [75, 25])
    width = 2 * (q75 - q25) / np.cbrt(x.size)
    if width <= 0:
        width = (x.max() - x.min()) / max(10, np.sqrt(x.size)) or 1.0
    return float(width)


def _gauss(x, amp, mu, sigma):
    return amp * np.exp(-0.5 * ((x - mu) / sigma) ** 2)


def _fit_one(heights: np.ndarray, center: float, sigma: float, n_bins: int = 40, iterations: int = 3) -> GaussianPeak:
    """Least-squares Gaussian on a fine local histogram within +-2 sigma, refined iteratively."""
    for _ in range(iterations):
        lo, hi = center - 2 * sigma, center + 2 * sigma
        sel = heights[(heights >= lo) & (heights < hi)]
        if sel.size < 10:
            raise PeakFitError(f"too few events near {center:.4g} to fit")
        counts, edges = np.histogram(sel, bins=n_bins, range=(lo, hi))
        mids = 0.5 * (edges[1:] + edges[:-1])
        width = edges[1] - edges[0]
        err = np.sqrt(np.maximum(counts, 1))
        try:
            (amp, center, sigma), _ = curve_fit(
                _gauss, mids, counts, p0=(counts.max(), center, sigma), sigma=err, absolute_sigma=True, maxfev=5000
            )
        except RuntimeError as exc:
            raise PeakFitError(f"Gaussian fit failed near {center:.4g}: {exc}") from exc
        sigma = abs(sigma)
    return GaussianPeak(float(center), float(sigma), float(amp * sigma * np.sqrt(2 * np.pi) / width))


def _strongest_candidate(h: np.ndarray, significance: float):
    """Most prominent significant local maximum of the smoothed FD histogram of ``h``, or None."""
    width = fd_bin_width(h)
    n_bins = int(np.clip(np.ceil((h.max() - h.min()) / width), 10, 20000))
    counts, edges = np.histogram(h, bins=n_bins)
    mids = 0.5 * (edges[1:] + edges[:-1])
    smooth = convolve1d(counts.astype(float), [0.25, 0.5, 0.25], mode="nearest")
    idx, props = find_peaks(smooth, prominence=0.01 * smooth.max())
    if idx.size == 0:
        return None
    prom = props["prominences"]
    # variance of a [1/4, 1/2, 1/4]-smoothed Poisson bin is 0.375 of its mean; test peak minus valley
    base = smooth[idx] - prom
    keep = prom >= significance * np.sqrt(np.maximum(0.375 * (smooth[idx] + base), 1.0))
    if not keep.any():
        return None
    best = idx[keep][np.argmax(prom[keep])]
    half = peak_widths(smooth, [best], rel_height=0.5)[0][0]
    return mids[best], max(half, 1.0) * (edges[1] - edges[0]) / FWHM_PER_SIGMA


def fit_peaks(
    heights,
    expected_max_peaks: int,
    significance: float = 5.0,
    min_events: int = 1000,
    exclusion: float = 4.0,
) -> list[GaussianPeak]:
    """Locate and fit up to ``expected_max_peaks`` Gaussian peaks, returned in ascending order.

    Peaks are peeled off one at a time. Each pass bins the remaining heights
    with the Freedman-Diaconis rule, lightly smooths the histogram and takes
    the local maximum of largest prominence, provided that prominence exceeds
    1% of the tallest bin and ``significance`` standard deviations of the
    peak-minus-valley difference under Poisson counting. Events within
    ``exclusion`` sigma of each fitted peak are then set aside, so a dominant
    vacuum peak does not dictate the bin width used to find the much smaller
    photon peaks.
    """
    h = np.asarray(heights, dtype=float)
    if h.size < min_events:
        raise PeakFitError(f"need at least {min_events} heights, got {h.size}")
    peaks: list[GaussianPeak] = []
    remaining = h
    for _ in range(4 * expected_max_peaks):
        if len(peaks) >= expected_max_peaks or remaining.size < 10 or np.ptp(remaining) == 0:
            break
        cand = _strongest_candidate(remaining, significance)
        if cand is None:
            break
        try:
            peak = _fit_one(h, *cand)
        except PeakFitError:
            if not peaks:
                raise
            break
        if any(abs(peak.center - p.center) < exclusion * max(p.sigma, peak.sigma) for p in peaks):
            # shoulder of a skewed peak already found: drop the candidate's neighbourhood only
            remaining = remaining[np.abs(remaining - cand[0]) > exclusion * cand[1]]
            continue
        peaks.append(peak)
        remaining = remaining[np.abs(remaining - peak.center) > exclusion * peak.sigma]
    if not peaks:
        raise PeakFitError("no significant peaks in the pulse-height histogram")
    peaks.sort(key=lambda p: p.center)
    for a, b in zip(peaks, peaks[1:]):
        if b.center - a.center < 2 * max(a.sigma, b.sigma):
            warnings.warn(
                f"peaks at {a.center:.4g} and {b.center:.4g} are unresolved (separation < 2 sigma)",
                UnresolvedPeaksWarning,
                stacklevel=2,
            )
    return peaks


def equal_likelihood_threshold(a: GaussianPeak, b: GaussianPeak, use_weights: bool = True) -> float:
    """Crossing of ``w_a N(x; a)`` and ``w_b N(x; b)`` between the two centres; midpoint fallback."""
    mid = 0.5 * (a.center + b.center)
    if not use_weights:
        return mid
    # log-density difference is a quadratic q2 x^2 + q1 x + q0
    q2 = 0.5 / b.sigma**2 - 0.5 / a.sigma**2
    q1 = a.center / a.sigma**2 - b.center / b.sigma**2
    q0 = (
        0.5 * b.center**2 / b.sigma**2
        - 0.5 * a.center**2 / a.sigma**2
        + np.log(a.weight / a.sigma)
        - np.log(b.weight / b.sigma)
    )
    if abs(q2) < 1e-12 * max(abs(q1), 1e-300):
        roots = np.array([-q0 / q1]) if q1 != 0 else np.array([])
    else:
        roots = np.roots([q2, q1, q0])
        roots = roots[np.isreal(roots)].real
    inside = roots[(roots > a.center) & (roots < b.center)]
    if inside.size == 0:
        return mid
    return float(inside[np.argmin(np.abs(inside - mid))])


def assign_counts(
    heights,
    peaks: Sequence[GaussianPeak],
    photon_energy_eV: float = 0.8,
    scale: float | None = None,
    use_weights: bool = True,
) -> CountAssignment:
    """Tally photon numbers between thresholds and express peak widths in eV.

    ``scale`` is the height per photon; it defaults to the mean spacing of
    adjacent peaks. Heights beyond the last fitted peak are binned at
    midpoints continuing that spacing. The energy resolution is the mean FWHM of the photon
    peaks (n >= 1) converted with that scale; the vacuum peak carries only
    readout noise and is used alone only when it is the sole peak.
    """
    peaks = list(peaks)
    if not peaks:
        raise PhysicsDomainError("need at least one peak")
    centers = np.array([p.center for p in peaks])
    if np.any(np.diff(centers) <= 0):
        raise PhysicsDomainError("peak centres must be strictly ascending")
    if scale is None:
        if len(peaks) < 2:
            raise PhysicsDomainError("one peak needs an explicit height-per-photon scale")
        scale = float(np.mean(np.diff(centers)))
    h = np.asarray(heights, dtype=float)
    bounds = [equal_likelihood_threshold(a, b, use_weights) for a, b in zip(peaks, peaks[1:])]
    # photon numbers above the last fitted peak: midpoints at the mean spacing
    top = peaks[-1].center + 0.5 * scale
    while h.size and top <= h.max():
        bounds.append(top)
        top += scale
    thresholds = ThresholdSet(np.array(bounds))
    n = thresholds.assign(h)
    hist = CountHistogram(np.bincount(n, minlength=len(peaks)))
    photon_peaks = peaks[1:] if len(peaks) > 1 else peaks
    resolution = float(np.mean([p.fwhm for p in photon_peaks]) * photon_energy_eV / scale)
    return CountAssignment(hist, thresholds, resolution)


def height_histogram_csv(heights, bin_width: float | None = None) -> str:
    h = np.asarray(heights, dtype=float)
    width = bin_width or fd_bin_width(h)
    n_bins = int(np.clip(np.ceil((h.max() - h.min()) / width), 1, 20000))
    counts, edges = np.histogram(h, bins=n_bins)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["height", "count"])
    for x, c in zip(0.5 * (edges[1:] + edges[:-1]), counts):
        writer.writerow([repr(float(x)), int(c)])
    return buf.getvalue()


def peak_table_csv(peaks: Sequence[GaussianPeak], thresholds: ThresholdSet | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "center", "sigma", "fwhm", "weight", "upper_threshold"])
    bounds = list(thresholds.boundaries) if thresholds is not None else []
    for n, p in enumerate(peaks):
        upper = repr(float(bounds[n])) if n < len(bounds) else ""
        writer.writerow([n] + [repr(float(v)) for v in (p.center, p.sigma, p.fwhm, p.weight)] + [upper])
    return buf.getvalue()
