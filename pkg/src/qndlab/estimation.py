"""Segment statistics: selection, transforms, unbiased residual estimation.

The residual estimators use an odd/even split of the segment list: the
prediction weights alpha(omega) are computed on one half and the residual
spectrum is evaluated on the other, then the roles are swapped and the
two results averaged.  This makes the estimate conservative, with
expectation at or above the true optimal residual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import (
    ConfigError,
    DegenerateDenominator,
    GridMismatch,
    InsufficientBand,
    SingularCrossMatrix,
    TooFewSegments,
)
from .synth import DataSet

WINDOWS = ("rectangular", "hann")


@dataclass
class SegmentSet:
    """Per-segment channel data on a common grid.

    ``time_segments`` maps channel name to an (N, L) array of kept
    segments.  ``transform`` populates ``dfts`` (complex (N, M) arrays,
    including the derived "meter_squared" channel) and ``frequencies``.
    """

    time_segments: dict
    kept_mask: np.ndarray
    sample_rate: float
    window: str = "rectangular"
    dfts: dict | None = None
    frequencies: np.ndarray | None = None

    @property
    def n_kept(self) -> int:
        return int(self.kept_mask.sum())

    @property
    def kept_fraction(self) -> float:
        return self.n_kept / max(len(self.kept_mask), 1)

    @property
    def segment_length(self) -> int:
        return next(iter(self.time_segments.values())).shape[1]


@dataclass
class SpectrumEstimate:
    frequencies: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_averages: int
    sql_reference: float = 1.0
    normalized: bool = False

    def normalized_by(self, sql_reference: float) -> "SpectrumEstimate":
        """Return a copy rescaled so the given SQL level reads 1."""
        if sql_reference <= 0:
            raise ConfigError("sql_reference must be positive")
        return replace(
            self,
            values=self.values / sql_reference,
            stderr=self.stderr / sql_reference,
            sql_reference=sql_reference,
            normalized=True,
        )


@dataclass
class ResidualEstimate(SpectrumEstimate):
    """Spectrum estimate of the prediction residual.

    Keeps the two half-set weight functions and half-set estimates for
    the split-consistency diagnostic.  Finite-sample values are not
    bounded by the auto-spectrum pointwise; only the expectation is.
    """

    channels_used: tuple = ("meter",)
    alpha_functions: tuple = ()
    half_values: tuple = ()
    half_stderr: tuple = ()


def segment_and_select(
    ds: DataSet, peak_limit: float = 60.0, rms_limit: float = 25.0
) -> SegmentSet:
    """Split channels into segments and drop noisy ones.

    A segment is rejected when the sum channel's peak or rms exceeds the
    limits (SQL units).  The defaults pass clean synthetic data at 100%;
    they are otherwise arbitrary, sized to catch the synthesizer's spike
    transients.
    """
    if peak_limit <= 0 or rms_limit <= 0:
        raise ConfigError("selection limits must be positive")
    length = ds.config.segment_length
    n_seg = len(ds.sum) // length
    segs = {
        name: ds.channel(name)[: n_seg * length].reshape(n_seg, length)
        for name in ("sum", "difference", "meter")
    }
    peaks = np.abs(segs["sum"]).max(axis=1)
    rms = segs["sum"].std(axis=1)
    kept = (peaks <= peak_limit) & (rms <= rms_limit)
    if kept.sum() < 4:
        raise TooFewSegments(
            f"only {int(kept.sum())} of {n_seg} segments pass selection"
        )
    return SegmentSet(
        time_segments={name: segs[name][kept] for name in segs},
        kept_mask=kept,
        sample_rate=ds.config.sample_rate,
    )


def transform(
    seg: SegmentSet, window: str = "rectangular", band: tuple | None = None
) -> SegmentSet:
    """Populate per-segment DFTs, including the meter-squared channel.

    The square of the meter has its per-segment mean removed before the
    transform, so the large deterministic DC term cannot leak.  ``band``
    (f_lo, f_hi) keeps only that slice of the grid to bound memory.
    """
    if window not in WINDOWS:
        raise ConfigError(f"window must be one of {WINDOWS}")
    length = seg.segment_length
    if window == "hann":
        w = np.hanning(length)
        w = w / np.sqrt(np.mean(w**2))  # keep SQL = 1 after tapering
    else:
        w = None
    freqs = np.fft.rfftfreq(length, 1.0 / seg.sample_rate)
    if band is not None:
        lo, hi = band
        sel = (freqs >= lo) & (freqs <= hi)
        if not sel.any():
            raise InsufficientBand(f"band {band} outside the grid")
    else:
        sel = slice(None)
    dfts = {}
    for name, x in seg.time_segments.items():
        xw = x if w is None else x * w
        dfts[name] = np.fft.rfft(xw, axis=1)[:, sel]
    y = seg.time_segments["meter"]
    sq = y**2
    sq = sq - sq.mean(axis=1, keepdims=True)
    if w is not None:
        sq = sq * w
    dfts["meter_squared"] = np.fft.rfft(sq, axis=1)[:, sel]
    return SegmentSet(
        time_segments=seg.time_segments,
        kept_mask=seg.kept_mask,
        sample_rate=seg.sample_rate,
        window=window,
        dfts=dfts,
        frequencies=freqs[sel],
    )


def _need_dfts(seg: SegmentSet):
    if seg.dfts is None:
        raise ConfigError("call transform() before spectral estimation")


def power_spectrum(seg: SegmentSet, channel: str) -> SpectrumEstimate:
    """Mean of per-segment periodograms with its standard error."""
    _need_dfts(seg)
    f = seg.dfts[channel]
    n = f.shape[0]
    length = seg.segment_length
    periodograms = np.abs(f) ** 2 / length
    values = periodograms.mean(axis=0)
    stderr = (
        periodograms.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(values)
    )
    return SpectrumEstimate(seg.frequencies, values, stderr, n)


def _halves(n: int):
    # "odd" = segments 1, 3, ... in 1-based order
    idx = np.arange(n - (n % 2))
    return idx[::2], idx[1::2]


def _alpha_single(x, y):
    den = np.sum(np.abs(y) ** 2, axis=0)
    if np.any(den == 0):
        raise DegenerateDenominator("predictor channel has zero power")
    return np.sum(x * np.conj(y), axis=0) / den


def _residual_eval(x, preds, alphas, length):
    r = x.copy()
    for y, a in zip(preds, alphas):
        r -= a[None, :] * y
    return np.abs(r) ** 2 / length


def _assemble_residual(seg, x, preds, alpha_solver, channels_used):
    _need_dfts(seg)
    n = x.shape[0]
    if n < 4:
        raise TooFewSegments(f"need >= 4 segments for the split estimator, have {n}")
    odd, even = _halves(n)
    length = seg.segment_length
    alpha_odd = alpha_solver([p[odd] for p in preds], x[odd])
    alpha_even = alpha_solver([p[even] for p in preds], x[even])
    # evaluate each alpha on the opposite half
    s_even = _residual_eval(x[even], [p[even] for p in preds], alpha_odd, length)
    s_odd = _residual_eval(x[odd], [p[odd] for p in preds], alpha_even, length)
    per_segment = np.concatenate([s_odd, s_even], axis=0)
    values = per_segment.mean(axis=0)
    m = per_segment.shape[0]
    stderr = per_segment.std(axis=0, ddof=1) / np.sqrt(m)
    halves_vals = (s_odd.mean(axis=0), s_even.mean(axis=0))
    halves_err = (
        s_odd.std(axis=0, ddof=1) / np.sqrt(len(odd)),
        s_even.std(axis=0, ddof=1) / np.sqrt(len(even)),
    )
    return ResidualEstimate(
        frequencies=seg.frequencies,
        values=values,
        stderr=stderr,
        n_averages=m,
        channels_used=channels_used,
        alpha_functions=(alpha_odd, alpha_even),
        half_values=halves_vals,
        half_stderr=halves_err,
    )


def residual_single(
    seg: SegmentSet, x_channel: str = "sum", y_channel: str = "meter"
) -> ResidualEstimate:
    """Split-sample residual of x after optimal linear prediction from y."""
    _need_dfts(seg)

    def solver(preds, x):
        return (_alpha_single(x, preds[0]),)

    return _assemble_residual(
        seg, seg.dfts[x_channel], [seg.dfts[y_channel]], solver, (y_channel,)
    )


def residual_two_channel(
    seg: SegmentSet,
    x_channel: str = "sum",
    y1_channel: str = "meter",
    y2_channel: str = "meter_squared",
    det_floor: float = 1e-10,
) -> ResidualEstimate:
    """Split-sample residual with two predictor channels.

    Solves the 2x2 cross-spectral system per frequency bin on each half.
    """
    _need_dfts(seg)

    def solver(preds, x):
        y1, y2 = preds
        s11 = np.sum(np.abs(y1) ** 2, axis=0)
        s22 = np.sum(np.abs(y2) ** 2, axis=0)
        s12 = np.sum(y1 * np.conj(y2), axis=0)
        det = s11 * s22 - np.abs(s12) ** 2
        scale = s11 * s22
        if np.any(det < det_floor * scale):
            raise SingularCrossMatrix(
                "predictor channels are (nearly) linearly dependent"
            )
        b1 = np.sum(x * np.conj(y1), axis=0)
        b2 = np.sum(x * np.conj(y2), axis=0)
        a1 = (b1 * s22 - b2 * np.conj(s12)) / det
        a2 = (b2 * s11 - b1 * s12) / det
        return (a1, a2)

    return _assemble_residual(
        seg,
        seg.dfts[x_channel],
        [seg.dfts[y1_channel], seg.dfts[y2_channel]],
        solver,
        (y1_channel, y2_channel),
    )


def msc_estimate(
    seg: SegmentSet, x_channel: str = "sum", y_channel: str = "meter"
) -> SpectrumEstimate:
    """Magnitude-squared coherence per bin, in [0, 1] by construction."""
    _need_dfts(seg)
    x = seg.dfts[x_channel]
    y = seg.dfts[y_channel]
    n = x.shape[0]
    if n < 2:
        raise TooFewSegments("MSC needs at least 2 segments")
    sxx = np.sum(np.abs(x) ** 2, axis=0)
    syy = np.sum(np.abs(y) ** 2, axis=0)
    if np.any(sxx == 0) or np.any(syy == 0):
        raise DegenerateDenominator("zero-power bins in MSC denominator")
    msc = np.abs(np.sum(np.conj(x) * y, axis=0)) ** 2 / (sxx * syy)
    # large-N normal approximation to the MSC sampling error
    stderr = np.sqrt(2.0 / n) * np.sqrt(msc) * (1.0 - msc)
    return SpectrumEstimate(seg.frequencies, msc, stderr, n)


SHOT_BANDS = ((154e3, 163e3), (176e3, 180e3))


def shot_calibration(
    est: SpectrumEstimate,
    analysis_freq: float = 170e3,
    bands: tuple = SHOT_BANDS,
):
    """In-run SQL reference from the difference channel.

    Fits a straight line to the spectral density over the sideband
    intervals (excluding the oscillator region between them) and
    evaluates it at the analysis frequency.  Returns (sql_reference,
    report dict).
    """
    f = est.frequencies
    sel = np.zeros(len(f), dtype=bool)
    for lo, hi in bands:
        sel |= (f >= lo) & (f <= hi)
    if sel.sum() < 2:
        raise InsufficientBand(f"calibration bands {bands} not on the grid")
    coeffs = np.polyfit(f[sel], est.values[sel], 1)
    sql = float(np.polyval(coeffs, analysis_freq))
    scatter = float(np.std(est.values[sel] - np.polyval(coeffs, f[sel])))
    report = {
        "slope_per_hz": float(coeffs[0]),
        "intercept": float(coeffs[1]),
        "n_bins": int(sel.sum()),
        "rms_scatter": scatter,
        "stderr": scatter / np.sqrt(sel.sum()),
        "analysis_freq_hz": analysis_freq,
    }
    return sql, report


def shot_linearity_sweep(levels, sql_values):
    """Linear fit of calibrated SQL vs detected level.

    Returns (slope, intercept, report) with the relative fit residuals;
    a structureless residual validates shot-noise scaling.
    """
    levels = np.asarray(levels, dtype=float)
    sql_values = np.asarray(sql_values, dtype=float)
    if len(levels) < 3:
        raise ConfigError("need at least 3 power points for the sweep")
    coeffs = np.polyfit(levels, sql_values, 1)
    fitted = np.polyval(coeffs, levels)
    report = {
        "relative_residuals": (sql_values - fitted) / fitted,
        "max_abs_relative_residual": float(np.max(np.abs(sql_values - fitted) / fitted)),
    }
    return float(coeffs[0]), float(coeffs[1]), report


def subtract_electronic_noise(
    est: SpectrumEstimate, electronic: SpectrumEstimate
) -> SpectrumEstimate:
    """Pointwise subtraction with errors combined in quadrature."""
    if len(est.frequencies) != len(electronic.frequencies) or not np.allclose(
        est.frequencies, electronic.frequencies
    ):
        raise GridMismatch("estimates are on different frequency grids")
    values = est.values - electronic.values
    floored = int(np.sum(values < 0))
    out = replace(
        est,
        values=np.clip(values, 0.0, None),
        stderr=np.hypot(est.stderr, electronic.stderr),
    )
    out.floored_bins = floored
    return out


def band_average(
    est: SpectrumEstimate, band_width_hz: float, confidence: float = 0.9
) -> SpectrumEstimate:
    """Flat moving average with a normal-approximation confidence belt.

    Attaches ``belt_lo``/``belt_hi`` arrays to the returned estimate.
    """
    df = float(np.mean(np.diff(est.frequencies)))
    if band_width_hz < df:
        raise ConfigError("band narrower than the grid spacing")
    n_bins = max(int(round(band_width_hz / df)), 1)
    kernel = np.ones(n_bins) / n_bins
    # edge bins average fewer neighbours; divide by the kernel overlap so
    # they stay unbiased instead of being pulled toward zero
    overlap = np.convolve(np.ones(len(est.values)), kernel, mode="same")
    values = np.convolve(est.values, kernel, mode="same") / overlap
    # independent-bin averaging shrinks the error by sqrt(bins)
    stderr = np.sqrt(np.convolve(est.stderr**2, kernel**2, mode="same")) / overlap
    out = replace(est, values=values, stderr=stderr)
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    out.belt_lo = values - z * stderr
    out.belt_hi = values + z * stderr
    out.band_width_hz = n_bins * df
    return out


@dataclass(frozen=True)
class SplitDiagnostic:
    """Normalized odd/even difference series with its summary moments."""

    frequencies: np.ndarray
    values: np.ndarray
    mean: float
    sd: float
    mean_stderr: float


def split_consistency(res: ResidualEstimate) -> SplitDiagnostic:
    """Per-bin (odd - even) residual difference in units of its error."""
    if not res.half_values:
        raise ConfigError("residual estimate lacks half-set values")
    v_odd, v_even = res.half_values
    e_odd, e_even = res.half_stderr
    # 2 x the stderr of the averaged estimate, i.e. sqrt(e_odd^2 + e_even^2)
    denom = np.hypot(e_odd, e_even)
    values = (v_odd - v_even) / denom
    n = len(values)
    return SplitDiagnostic(
        frequencies=res.frequencies,
        values=values,
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)),
        mean_stderr=float(values.std(ddof=1) / np.sqrt(n)),
    )


def write_spectrum_csv(est: SpectrumEstimate, path) -> None:
    """CSV export: frequency_hz, value, stderr[, belt_lo, belt_hi]."""
    has_belt = hasattr(est, "belt_lo")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        head = ["frequency_hz", "value", "stderr"]
        if has_belt:
            head += ["belt_lo", "belt_hi"]
        writer.writerow(head)
        for i, f in enumerate(est.frequencies):
            row = [f"{f:.6f}", repr(float(est.values[i])), repr(float(est.stderr[i]))]
            if has_belt:
                row += [repr(float(est.belt_lo[i])), repr(float(est.belt_hi[i]))]
            writer.writerow(row)
