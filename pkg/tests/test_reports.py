import json
import math
import os

import numpy as np
import pytest

from bardina import reports, spectral
from bardina.certificates import CertificateReport
from bardina.dynamics import SolverParams, Trajectory, load_checkpoint
from bardina.limits import SemicontinuityTable, alpha_sweep
from bardina.reports import (AGGREGATE_HEADER, GAP_HEADER, SWEEP_HEADER,
                             csv_text, emit_reports, energy_table,
                             gap_table_text, parse_report_json,
                             report_json_text, write_sweep_outputs)
from bardina.spectral import SpectralField

from conftest import shear_spectral


def small_report(name="dissipative_estimate", ts=(0.0, 0.5)):
    samples = [{"t": t, "lhs": 1.0 + t, "rhs": 2.0 + t, "slack": 1.0} for t in ts]
    return CertificateReport(name=name, params={"n": 8}, samples=samples,
                             tolerance=1e-9, verdict="pass", warnings=[])


def decay_trajectory(n=8, gamma=1.3, dt=0.25):
    p = SolverParams(n=n, alpha=0.05, gamma=gamma, dt=dt, t_end=dt,
                     sample_every=1)
    u0 = shear_spectral(n, 0.8)
    u1 = SpectralField(u0.coeffs * math.exp(-gamma * dt))
    return Trajectory(p, SpectralField.zeros(n), np.array([0.0, dt]), [u0, u1])


class TestCsv:
    def test_cells(self):
        text = csv_text(("a", "b", "c"),
                        [{"a": 0.1, "b": None, "c": "x"},
                         {"a": math.nan, "b": 2, "c": 1e-3}])
        assert text == "a,b,c\n0.1,,x\nnan,2,0.001\n"

    def test_header_only(self):
        assert csv_text(("a",), []) == "a\n"


class TestEnergyTable:
    def test_exact_decay_rows(self):
        gamma, dt = 1.3, 0.25
        traj = decay_trajectory(gamma=gamma, dt=dt)
        rows = energy_table(traj, SpectralField.zeros(8))
        e0 = spectral.norm_sq(traj.states[0], "h_alpha", 0.05)
        assert rows[0]["time"] == 0.0 and rows[1]["time"] == dt
        assert abs(rows[0]["slack"]) < 1e-15 * e0          # bound tight at t = 0
        want_e = e0 * math.exp(-2 * gamma * dt)
        want_b = e0 * math.exp(-gamma * dt)
        assert abs(rows[1]["energy_h_alpha"] - want_e) < 1e-12 * e0
        assert abs(rows[1]["dissipative_bound"] - want_b) < 1e-12 * e0
        assert abs(rows[1]["slack"] - (want_b - want_e)) < 1e-12 * e0
        l2 = spectral.norm_sq(traj.states[0], "l2")
        assert abs(rows[0]["energy_l2"] - l2) < 1e-15 * l2


class TestJsonRoundtrip:
    def test_parse_inverts_render(self):
        rep = small_report()
        assert parse_report_json(report_json_text(rep)) == rep

    def test_text_is_valid_json_document(self):
        doc = json.loads(report_json_text(small_report()))
        assert doc["name"] == "dissipative_estimate" and doc["verdict"] == "pass"


class TestEmitReports:
    def test_empty_emits_bare_header(self, tmp_path):
        paths = emit_reports([], str(tmp_path))
        assert [os.path.basename(p) for p in paths] == ["aggregate.csv"]
        assert (tmp_path / "aggregate.csv").read_text() == \
            ",".join(AGGREGATE_HEADER) + "\n"

    def test_trajectory_aggregate(self, tmp_path):
        traj = decay_trajectory()
        emit_reports([small_report()], str(tmp_path), trajectory=traj)
        lines = (tmp_path / "aggregate.csv").read_text().splitlines()
        assert lines[0] == ",".join(AGGREGATE_HEADER)
        assert len(lines) == 3 and lines[1].startswith("0.0,")

    def test_reconstruction_from_reports(self, tmp_path):
        diss = small_report("dissipative_estimate")
        en = small_report("energy_inequality")
        emit_reports([diss, en], str(tmp_path))
        lines = (tmp_path / "aggregate.csv").read_text().splitlines()
        row = dict(zip(AGGREGATE_HEADER, lines[1].split(",")))
        assert row["energy_l2"] and row["energy_h_alpha"]
        assert row["dissipative_bound"] and row["slack"]

    def test_duplicate_names_get_suffix(self, tmp_path):
        emit_reports([small_report(), small_report()], str(tmp_path))
        names = sorted(os.listdir(tmp_path))
        assert "report_dissipative_estimate.json" in names
        assert "report_dissipative_estimate_2.json" in names

    def test_byte_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            emit_reports([small_report()], str(d), trajectory=decay_trajectory())
        for name in os.listdir(a):
            assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.fixture(scope="module")
def family():
    base = SolverParams(n=8, alpha=1.0, gamma=1.0, dt=0.05, t_end=0.2,
                        sample_every=2)
    return alpha_sweep(base, SpectralField.zeros(8), shear_spectral(8, 0.5),
                       (1e-1, 1e-2), serial=True)


class TestSweepOutputs:
    def test_files_and_manifest(self, tmp_path, family):
        rows = [{"alpha": 1e-1, "distance_to_next": 0.1,
                 "m_upper_estimate": 1.0, "t_entry": None,
                 "semicontinuity_gap": None},
                {"alpha": 1e-2, "distance_to_next": None,
                 "m_upper_estimate": 0.9, "t_entry": 0.0,
                 "semicontinuity_gap": 0.0}]
        paths = write_sweep_outputs(family, str(tmp_path), rows)
        names = [os.path.basename(p) for p in paths]
        assert names == ["member_0.ckpt", "member_1.ckpt",
                         "sweep_manifest.ini", "sweep.csv"]
        man = (tmp_path / "sweep_manifest.ini").read_text()
        assert "alphas = 0.1,0.01" in man and "member_1 = member_1.ckpt" in man
        csv = (tmp_path / "sweep.csv").read_text().splitlines()
        assert csv[0] == ",".join(SWEEP_HEADER)
        assert csv[2].startswith("0.01,,") and csv[2].endswith(",0.0,0.0")

    def test_member_checkpoints_carry_final_states(self, tmp_path, family):
        write_sweep_outputs(family, str(tmp_path), [])
        for i, (a, traj) in enumerate(zip(family.alphas, family.trajectories)):
            field, meta = load_checkpoint(str(tmp_path / f"member_{i}.ckpt"))
            assert np.array_equal(field.coeffs, traj.states[-1].coeffs)
            assert meta["alpha"] == a and meta["t"] == float(traj.times[-1])


class TestGapTable:
    def test_render(self):
        tab = SemicontinuityTable(
            rows=[{"alpha": 0.1, "gap": 0.5, "windows": 3,
                   "reference_windows": 3}],
            t_start=0.5, window_len=3)
        text = gap_table_text(tab)
        assert text.splitlines()[0] == ",".join(GAP_HEADER)
        assert text.splitlines()[1] == "0.1,0.5,3,3"
