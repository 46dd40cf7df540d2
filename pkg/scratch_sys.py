import numpy as np
import qndlab as q
from qndlab import theory

system = q.reference_defaults()
ratios = []
for seed in range(200, 210):
    cfg = q.SynthConfig(seed=seed)
    ds = q.synthesize(system, cfg)
    seg = q.transform(q.segment_and_select(ds), band=(100e3, 220e3))
    n = seg.n_kept
    res = q.residual_single(seg, "sum", "meter")
    lev = cfg.electronic_noise_level
    elec = q.SpectrumEstimate(res.frequencies, np.full_like(res.values, lev),
                              np.full_like(res.values, 0.1 * lev), res.n_averages)
    res_e = q.subtract_electronic_noise(res, elec)
    diff_e = q.subtract_electronic_noise(q.power_spectrum(seg, "difference"), elec)
    sql, _ = q.shot_calibration(diff_e)
    banded = q.band_average(res_e.normalized_by(sql), 150.0)
    w = 2 * np.pi * res.frequencies
    m = theory.SpectrumModel(system, w)
    sxs = m.quadrature_spectrum('signal', m.phi_s)
    phim = q.quadrature_phases(m.state, system.cavity, system.det)[1]
    sym = m.quadrature_spectrum('meter', phim)
    msc = theory.coherence(sxs, sym, m.cross_spectrum())
    res_th = theory.residual_spectrum_theory(sxs, msc) * (1.0 + 2.0 / n)
    th_b = q.band_average(q.SpectrumEstimate(res.frequencies, res_th, 0 * res_th, 1), 150.0)
    f = banded.frequencies
    sel = (f > 167.9e3) & (f < 169.4e3)
    ratios.append(banded.values[sel] / th_b.values[sel])
    print('seed', seed, 'done', flush=True)

r = np.array(ratios)
f_sel = f[sel]
mean = r.mean(axis=0) - 1
sd = r.std(axis=0, ddof=1) / np.sqrt(len(ratios))
for j in range(0, len(f_sel), 5):
    print(f"{f_sel[j]:.0f} Hz  mean dev {mean[j]:+.4f} +- {sd[j]:.4f}")
print('grand mean', float(mean.mean()))
