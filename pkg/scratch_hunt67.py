import sys
from dataclasses import replace

import numpy as np
import qndlab as q
from qndlab import theory

base = q.reference_defaults()
f7 = replace(base, cavity=replace(base.cavity, detuning=-0.019 * base.cavity.kappa),
             signal_phase=-41.5e-3)


def elec_est(freqs, n, lev):
    return q.SpectrumEstimate(freqs, np.full_like(freqs, lev),
                              np.full_like(freqs, 0.1 * lev), n)


def lobes(mask, f):
    out = []
    start = None
    for j, b in enumerate(mask):
        if b and start is None:
            start = j
        if not b and start is not None:
            out.append((f[start], f[j - 1]))
            start = None
    if start is not None:
        out.append((f[start], f[-1]))
    return out


def run6(seed):
    cfg = q.SynthConfig(seed=seed)
    ds = q.synthesize(f7, cfg)
    seg = q.transform(q.segment_and_select(ds), band=(100e3, 220e3))
    n = seg.n_kept
    lev = cfg.electronic_noise_level
    diff_e = q.subtract_electronic_noise(
        q.power_spectrum(seg, "difference"), elec_est(seg.frequencies, n, lev))
    sql, _ = q.shot_calibration(diff_e)
    # pipeline-estimated signal quadrature spectrum
    s_sum = q.subtract_electronic_noise(
        q.power_spectrum(seg, "sum"), elec_est(seg.frequencies, n, lev))
    sxs_b = q.band_average(s_sum.normalized_by(sql), 150.0)
    i = int(np.argmin(sxs_b.values))
    # two-channel residual
    res = q.residual_two_channel(seg, "sum", "meter", "meter_squared")
    res_e = q.subtract_electronic_noise(res, elec_est(res.frequencies, n, lev))
    res_b = q.band_average(res_e.normalized_by(sql), 150.0)
    sub = lobes(res_b.values < 1.0, res_b.frequencies)
    big = [ab for ab in sub if ab[1] - ab[0] > 300]
    return dict(seed=seed, kept=n, sql=round(float(sql), 5),
                sxs_min=round(float(sxs_b.values[i]), 4),
                sxs_minf=round(float(sxs_b.frequencies[i])),
                sxs_z=round(float((1 - sxs_b.values[i]) / sxs_b.stderr[i]), 2),
                res_lobes=[(round(a), round(b)) for a, b in big])


if __name__ == "__main__":
    for seed in range(int(sys.argv[1]), int(sys.argv[2])):
        try:
            print(run6(seed), flush=True)
        except Exception as e:
            print(seed, 'ERROR', repr(e), flush=True)
