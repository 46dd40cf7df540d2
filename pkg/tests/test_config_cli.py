"""Run configuration parsing and the command-line entry point."""

import csv

import numpy as np
import pytest

import qndlab as q
from qndlab import cli
from qndlab.config import default_config_text, load_config
from qndlab.errors import ConfigError

TWO_PI = 2.0 * np.pi

SMALL_CFG = """
[synth]
segment_length = 16384
n_segments = 16

[estimate]
band_lo_hz = 120e3
band_hi_hz = 220e3
band_average_hz = 600.0

[fit]
free_params = detuning,phi_s
n_multistarts = 3
band_lo_hz = 150e3
band_hi_hz = 190e3
"""


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if not r[0].startswith("#")]
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return header, data


class TestRunConfig:
    def test_defaults_are_reference_values(self):
        cfg = load_config(text="")
        system = cfg.system()
        assert system.cavity.kappa == pytest.approx(TWO_PI * 2.85e6, rel=1e-12)
        assert system.cavity.kappa1 == pytest.approx(TWO_PI * 2.58e6, rel=1e-12)
        assert system.mech.mass == 2.5e-7
        assert system.mech.temperature == 5.6
        assert system.mech.omega_m == pytest.approx(TWO_PI * 169334.0)
        assert system.drive.power == 38e-3
        assert system.det.eta_signal == 0.69
        assert system.det.eta_modematch == 0.90
        assert system.cavity.detuning == pytest.approx(-0.016 * system.cavity.kappa)
        assert system.signal_phase == -24e-3

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(ConfigError, match="frobnicate"):
            load_config(text="[system]\nfrobnicate = 1\n")

    def test_unknown_section_rejected_by_name(self):
        with pytest.raises(ConfigError, match="wibble"):
            load_config(text="[wibble]\nx = 1\n")

    def test_default_text_round_trip(self):
        cfg = load_config(text=default_config_text())
        base = load_config(text="")
        assert cfg.system() == base.system()
        assert cfg.synth_config() == base.synth_config()

    def test_override(self):
        cfg = load_config(text="[synth]\nn_segments = 7\n")
        assert cfg.synth_config().n_segments == 7


class TestCliCommands:
    def test_print_defaults(self, capsys):
        assert cli.main(["--print-defaults"]) == 0
        out = capsys.readouterr().out
        load_config(text=out)  # must itself be a valid configuration

    def test_theory_vacuum_only(self, tmp_path):
        rc = cli.main(["theory", "--out", str(tmp_path), "--vacuum-only"])
        assert rc == 0
        header, data = _read_csv(tmp_path / "full_model.csv")
        s_xs = data[:, header.index("s_xs")]
        s_ym = data[:, header.index("s_ym")]
        np.testing.assert_allclose(s_xs, 1.0, rtol=1e-9)
        np.testing.assert_allclose(s_ym, 1.0, rtol=1e-9)

    def test_theory_emits_config_hash(self, tmp_path):
        assert cli.main(["theory", "--out", str(tmp_path)]) == 0
        first = (tmp_path / "full_model.csv").read_text().splitlines()[0]
        assert first.startswith("# config_hash=")

    def test_budget_additivity(self, tmp_path):
        rc = cli.main(["budget", "--out", str(tmp_path)])
        assert rc == 0
        header, data = _read_csv(tmp_path / "budget_signal.csv")
        total = data[:, header.index("total")]
        parts = data[:, 1:header.index("total")]
        np.testing.assert_allclose(parts.sum(axis=1), total, rtol=1e-9)

    def test_synth_deterministic_bytes(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL_CFG)
        for sub in ("a", "b"):
            rc = cli.main(["synth", "--config", str(cfg),
                           "--out", str(tmp_path / sub)])
            assert rc == 0
        a = (tmp_path / "a" / "dataset.qnd").read_bytes()
        b = (tmp_path / "b" / "dataset.qnd").read_bytes()
        assert a == b

    def test_estimate_pipeline(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL_CFG)
        assert cli.main(["synth", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 0
        rc = cli.main(["estimate", str(tmp_path / "dataset.qnd"),
                       "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0
        for name in ("spectrum_sum.csv", "residual.csv", "residual_banded.csv",
                      "msc.csv", "split_consistency.csv", "report.txt"):
            assert (tmp_path / name).exists()
        report = (tmp_path / "report.txt").read_text()
        assert "kept" in report
        assert "SQL" in report

    def test_fit_command(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL_CFG)
        assert cli.main(["synth", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 0
        rc = cli.main(["fit", str(tmp_path / "dataset.qnd"),
                       "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0
        report = (tmp_path / "fit_report.txt").read_text()
        assert "detuning" in report
        assert (tmp_path / "fit_curves.csv").exists()


class TestCliErrorFamilies:
    def test_bad_config_exit_2(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[system]\nnope = 1\n")
        assert cli.main(["theory", "--config", str(cfg),
                         "--out", str(tmp_path)]) == 2

    def test_missing_dataset_exit_3(self, tmp_path):
        rc = cli.main(["estimate", str(tmp_path / "absent.qnd"),
                       "--out", str(tmp_path)])
        assert rc == 3

    def test_corrupt_dataset_exit_3(self, tmp_path):
        bad = tmp_path / "bad.qnd"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert cli.main(["estimate", str(bad), "--out", str(tmp_path)]) == 3

    def test_all_segments_spiked_exit_4(self, tmp_path, system):
        cfg = q.SynthConfig(segment_length=2**13, n_segments=8, seed=1)
        ds = q.synthesize(system, cfg)
        ds = q.DataSet(sum=ds.sum + 1e4, difference=ds.difference,
                       meter=ds.meter, config=cfg,
                       config_hash=ds.config_hash)
        path = tmp_path / "spiked.qnd"
        q.write_dataset(ds, path)
        small = tmp_path / "run.cfg"
        small.write_text("[synth]\nsegment_length = 8192\nn_segments = 8\n")
        rc = cli.main(["estimate", str(path), "--config", str(small),
                       "--out", str(tmp_path)])
        assert rc == 4

    def test_bad_workers_exit_2(self, tmp_path):
        assert cli.main(["theory", "--out", str(tmp_path), "--workers", "0"]) == 2
