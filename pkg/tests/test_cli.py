"""Tests for the command-line front end: subcommands and exit codes."""

import numpy as np
import pytest

from qofdm import cli
from qofdm import harness as hz
from qofdm import numerics as nm
from qofdm import power_allocation as pw
from qofdm import signal_model as sm
from qofdm import state_evolution as se


def _lines(path):
    with open(path) as fh:
        return fh.read().splitlines()


class TestQuantizerInfo:
    def test_one_bit_levels(self, capsys):
        assert cli.main(["quantizer-info", "--bits", "1"]) == 0
        out = capsys.readouterr().out
        assert "levels: -0.797885 0.797885" in out
        assert "thresholds: 0" in out

    def test_scaled_design(self, capsys):
        assert cli.main(["quantizer-info", "--bits", "1", "--input-std", "2"]) == 0
        assert "levels: -1.59577 1.59577" in capsys.readouterr().out

    def test_invalid_bits_is_config_error(self, capsys):
        assert cli.main(["quantizer-info", "--bits", "0"]) == 2
        assert "config error" in capsys.readouterr().err


class TestSeCommand:
    def test_trace_converges_and_matches_solver(self, tmp_path, capsys):
        out = tmp_path / "se.csv"
        code = cli.main(["se", "--n", "512", "--bits", "3", "--snr-db", "15",
                         "--seed", "7", "--out", str(out)])
        assert code == 0
        lines = _lines(out)
        assert lines[0] == "# schema=qofdm.se.v1"
        assert lines[1] == "t,theta,eta,nu,ser_pred"
        body = lines[2:]
        assert 1 <= len(body) <= 20

        rng = nm.seeded_rng(7, 0)
        ch = sm.draw_channel(512, 4, rng)
        noise_var = 10 ** (-1.5)
        v_x = float(np.mean(np.abs(ch.freq_response) ** 2))
        spec = sm.design_quantizer(3, np.sqrt((v_x + noise_var) / 2))
        ref = se.se_fixed_point(ch.freq_response, noise_var, spec, sm.make_qam(4))
        final_eta = float(body[-1].split(",")[2])
        assert final_eta == pytest.approx(ref.eta, rel=1e-9)

    def test_budget_exhaustion_is_numerical_failure(self, tmp_path, capsys):
        code = cli.main(["se", "--n", "64", "--bits", "2", "--snr-db", "15",
                         "--t-max", "2", "--out", str(tmp_path / "x.csv")])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err


class TestPaCommand:
    def test_profile_csv(self, tmp_path, capsys):
        out = tmp_path / "pa.csv"
        code = cli.main(["pa", "--n", "64", "--bits", "2", "--snr-db", "12",
                         "--seed", "5", "--out", str(out)])
        assert code == 0
        lines = _lines(out)
        assert lines[0] == "# schema=qofdm.pa.v1"
        assert lines[1] == "j,h2,p"
        rows = [line.split(",") for line in lines[2:]]
        assert len(rows) == 64
        powers = np.array([float(r[2]) for r in rows])
        assert powers.sum() == pytest.approx(64, rel=1e-9)

        rng = nm.seeded_rng(5, 0)
        ch = sm.draw_channel(64, 4, rng)
        noise_var = 10 ** (-1.2)
        v_x = float(np.mean(np.abs(ch.freq_response) ** 2))
        spec = sm.design_quantizer(2, np.sqrt((v_x + noise_var) / 2))
        profile, _ = pw.amser_allocate(ch.freq_response, noise_var, spec,
                                       sm.make_qam(4))
        np.testing.assert_allclose(powers, profile.powers, atol=1e-9)
        gains = np.array([float(r[1]) for r in rows])
        np.testing.assert_allclose(gains, np.abs(ch.freq_response) ** 2,
                                   rtol=1e-10)


class TestExperimentCommands:
    def test_simulate_from_flags(self, tmp_path, capsys):
        code = cli.main(["simulate", "--n", "32", "--bits", "2",
                         "--snr-db", "10", "--trials", "2",
                         "--out-dir", str(tmp_path), "--tag", "s"])
        assert code == 0
        assert "ser=" in capsys.readouterr().out
        assert (tmp_path / "trials_s.csv").exists()
        assert (tmp_path / "agg_s.csv").exists()

    def test_simulate_from_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("""
            [model]
            n = 32
            bits = 2
            snr_db = 10        # single point
            [run]
            trials = 4
            out_dir = {}
            tag = c
        """.format(tmp_path))
        code = cli.main(["simulate", "--config", str(cfg), "--trials", "2"])
        assert code == 0
        rows = hz.read_csv(str(tmp_path / "trials_c.csv"), hz.TRIALS_SCHEMA)
        assert {r["trial"] for r in rows} == {"0", "1"}  # override applied

    def test_compare_runs_all_detectors(self, tmp_path, capsys):
        code = cli.main(["compare", "--n", "32", "--bits", "2",
                         "--snr-db", "10", "--trials", "2",
                         "--out-dir", str(tmp_path), "--tag", "cmp"])
        assert code == 0
        rows = hz.read_csv(str(tmp_path / "agg_cmp.csv"), hz.AGG_SCHEMA)
        assert [r["detector"] for r in rows] == ["gturbo", "gamp",
                                                 "conventional", "aqnm"]

    def test_chanest_labels(self, tmp_path, capsys):
        code = cli.main(["chanest", "--n", "32", "--bits", "3",
                         "--snr-db", "15", "--pilot-spacing", "8",
                         "--trials", "2", "--out-dir", str(tmp_path),
                         "--tag", "ce"])
        assert code == 0
        rows = hz.read_csv(str(tmp_path / "trials_ce.csv"), hz.TRIALS_SCHEMA)
        assert {r["detector"] for r in rows} == {"gturbo", "gturbo-csi"}

    def test_bad_config_file_exit_code(self, tmp_path, capsys):
        assert cli.main(["simulate", "--config",
                         str(tmp_path / "missing.cfg")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_field_exit_code(self, tmp_path, capsys):
        code = cli.main(["simulate", "--n", "48", "--trials", "1",
                         "--out-dir", str(tmp_path)])
        assert code == 2
        assert "power of two" in capsys.readouterr().err

    def test_unknown_flag_prints_usage(self, capsys):
        with pytest.raises(SystemExit) as err:
            cli.main(["simulate", "--frobnicate", "1"])
        assert err.value.code == 2
        assert "usage" in capsys.readouterr().err
