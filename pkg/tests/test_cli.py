import os

import numpy as np
import pytest

from bardina.cli import main
from bardina.dynamics import load_checkpoint
from bardina.reports import parse_report_json

TINY = """\
[solver]
n = 8
alpha = 0.05
gamma = 1.0
dt = 0.01
t_end = 0.2
sample_every = 5

[scenario]
forcing = kolmogorov(1,0.3)
init = shear(0.8)

[sweep]
alphas = 1e-1,1e-2
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(TINY)
    return str(path)


class TestDimBound:
    def test_reference_value(self, capsys):
        rc = main(["dim-bound", "--g-norm", "1.0", "--alpha", "1.0",
                   "--gamma", "1.0"])
        assert rc == 0
        assert capsys.readouterr().out.strip() == "0.026526"

    def test_invalid_inputs_exit_2(self, capsys):
        rc = main(["dim-bound", "--g-norm", "1.0", "--alpha", "0.0",
                   "--gamma", "1.0"])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err


class TestConfigErrors:
    def test_missing_file(self, tmp_path, capsys):
        rc = main(["simulate", "--config", str(tmp_path / "absent.ini")])
        assert rc == 2
        assert "cannot read" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[solver]\nviscosity = 1\n")
        assert main(["simulate", "--config", str(path)]) == 2

    def test_bad_override(self, tiny_config):
        assert main(["simulate", "--config", tiny_config,
                     "--set", "solver.mu=1"]) == 2

    def test_unresolvable_forcing(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[solver]\nn = 8\n\n[scenario]\n"
                        "forcing = kolmogorov(6,1.0)\n")
        assert main(["simulate", "--config", str(path)]) == 2


class TestSimulate:
    def test_writes_checkpoints_and_csv(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "out")
        rc = main(["simulate", "--config", tiny_config, "--out", out])
        assert rc == 0
        assert sorted(os.listdir(out)) == ["aggregate.csv", "final.ckpt",
                                           "initial.ckpt"]
        field, meta = load_checkpoint(os.path.join(out, "final.ckpt"))
        assert field.n == 8 and meta["t"] == 0.2 and meta["alpha"] == 0.05
        lines = (tmp_path / "out" / "aggregate.csv").read_text().splitlines()
        assert len(lines) == 1 + 5   # header + samples at t=0,.05,.1,.15,.2
        assert "simulated 5 samples" in capsys.readouterr().out

    def test_blow_up_exits_3(self, tmp_path, capsys):
        path = tmp_path / "explode.ini"
        path.write_text("[solver]\nn = 16\nalpha = 0.0\ngamma = 0.1\n"
                        "dt = 0.2\nt_end = 2.0\nsample_every = 1\n\n"
                        "[scenario]\ninit = random_divfree(5,50.0,1)\n")
        rc = main(["simulate", "--config", str(path),
                   "--out", str(tmp_path / "o")])
        assert rc == 3
        assert "blew up at t =" in capsys.readouterr().err


class TestCertify:
    def test_pass_run(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "cert")
        rc = main(["certify", "--config", tiny_config, "--out", out])
        assert rc == 0
        text = capsys.readouterr().out
        assert text.count("pass") >= 3 and "fail" not in text
        names = sorted(os.listdir(out))
        assert "report_dissipative_estimate.json" in names
        assert "report_energy_inequality.json" in names
        assert "report_variational_inequality.json" in names
        rep = parse_report_json(
            (tmp_path / "cert" / "report_dissipative_estimate.json").read_text())
        assert rep.verdict == "pass"

    def test_forced_tolerance_fails_4(self, tiny_config, tmp_path, capsys):
        rc = main(["certify", "--config", tiny_config,
                   "--out", str(tmp_path / "c2"),
                   "--set", "certificates.dissipative_tol=-1e9"])
        assert rc == 4
        out = capsys.readouterr().out
        assert "fail dissipative_estimate" in out

    def test_certificate_selection(self, tiny_config, tmp_path, capsys):
        rc = main(["certify", "--config", tiny_config,
                   "--out", str(tmp_path / "c3"),
                   "--set", "certificates.run=energy"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "energy_inequality" in out and "dissipative" not in out


class TestSweep:
    def test_outputs(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "sw")
        rc = main(["sweep", "--config", tiny_config, "--out", out, "--serial"])
        assert rc == 0
        names = sorted(os.listdir(out))
        assert names == ["member_0.ckpt", "member_1.ckpt", "sweep.csv",
                         "sweep_manifest.ini"]
        csv = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
        assert len(csv) == 3 and csv[1].startswith("0.1,")
        assert "swept alphas (0.1, 0.01)" in capsys.readouterr().out


class TestSemicontinuity:
    def test_outputs(self, tiny_config, tmp_path, capsys):
        out = str(tmp_path / "semi")
        rc = main(["semicontinuity", "--config", tiny_config, "--out", out,
                   "--serial"])
        assert rc == 0
        text = (tmp_path / "semi" / "semicontinuity.csv").read_text()
        assert text.splitlines()[0] == "alpha,gap,windows,reference_windows"
        assert capsys.readouterr().out.startswith("alpha,gap")

    def test_no_window_exits_2(self, tiny_config, tmp_path, capsys):
        rc = main(["semicontinuity", "--config", tiny_config,
                   "--out", str(tmp_path / "s2"), "--serial",
                   "--set", "semicontinuity.t_start=5.0"])
        assert rc == 2


class TestSelftest:
    def test_passes_and_writes_reports(self, tmp_path, capsys):
        out = str(tmp_path / "st")
        rc = main(["selftest", "--out", out])
        assert rc == 0
        text = capsys.readouterr().out
        assert "ok" in text and os.path.exists(os.path.join(out, "aggregate.csv"))
