import sys
import numpy as np
import qndlab as q
from qndlab import theory

system = q.paper_defaults()


def run(seed):
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
    i = int(np.argmin(banded.values))
    minz = (1 - banded.values[i]) / banded.stderr[i]
    sub = th_b.values < 1.0
    sxs_b = q.band_average(q.SpectrumEstimate(res.frequencies, sxs, 0 * sxs, 1), 150.0)
    peak = f[int(np.argmax(sxs_b.values))]
    lob = []
    start = None
    for j, b in enumerate(sub):
        if b and start is None:
            start = j
        if not b and start is not None:
            lob.append((start, j - 1))
            start = None
    hi = lo = None
    for a, b in lob:
        dev = float(np.max(np.abs(banded.values[a:b + 1] / th_b.values[a:b + 1] - 1)))
        if f[a] > peak:
            hi = (float(f[b] - f[a]), dev)
        else:
            lo = (float(f[b] - f[a]), dev)
    sel = (f > 167.9e3) & (f < 169.4e3)
    np.save(f"/tmp/prof_{seed}.npy",
            np.vstack([f[sel], banded.values[sel] / th_b.values[sel]]))
    return dict(seed=seed, kept=n, minz=round(minz, 2), minf=round(float(f[i])),
                lo=lo, hi=hi, sql=round(float(sql), 5))


for seed in range(int(sys.argv[1]), int(sys.argv[2])):
    try:
        r = run(seed)
    except Exception as e:
        print(seed, 'ERROR', e, flush=True)
        continue
    ok5 = r['minz'] > 3 and r['hi'] and r['hi'][1] < 0.05 and 750 <= r['hi'][0] <= 2250
    ok9 = abs(r['sql'] - 1) < 0.005
    print(r, 'OK5' if ok5 else '', 'OK9' if ok9 else '',
          'BOTH' if (ok5 and ok9 and r['lo'] and r['lo'][1] < 0.05) else '', flush=True)
