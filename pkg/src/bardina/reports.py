"""Report emission: certificate JSON files and CSV tables with stable field
ordering, byte-reproducible for identical inputs.

Floats are rendered with repr (shortest round-tripping form); missing cells
are empty strings. The aggregate CSV carries one row per sample time with the
columns time, energy_l2, energy_h_alpha, dissipative_bound, slack.
"""

from __future__ import annotations

import json
import math
import os

from . import spectral
from .certificates import CertificateReport
from .dynamics import Trajectory
from .limits import SemicontinuityTable

AGGREGATE_HEADER = ("time", "energy_l2", "energy_h_alpha", "dissipative_bound", "slack")
SWEEP_HEADER = ("alpha", "distance_to_next", "m_upper_estimate", "t_entry",
                "semicontinuity_gap")
GAP_HEADER = ("alpha", "gap", "windows", "reference_windows")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write report file {path!r}: {e.strerror}") from None


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(row.get(col)) for col in header))
    return "\n".join(lines) + "\n"


def report_json_text(report: CertificateReport) -> str:
    return json.dumps(report.to_json_dict(), indent=2) + "\n"


def parse_report_json(text: str) -> CertificateReport:
    return CertificateReport.from_json_dict(json.loads(text))


def energy_table(traj: Trajectory, g: spectral.SpectralField) -> list:
    """Per-sample energies and the exponential-decay bound they must satisfy."""
    alpha, gamma = traj.params.alpha, traj.params.gamma
    times = traj.times - traj.times[0]
    e0 = spectral.norm_sq(traj.states[0], "h_alpha", alpha)
    floor = spectral.norm_sq(g, "l2") / gamma ** 2
    rows = []
    for t, u in zip(times, traj.states):
        eh = spectral.norm_sq(u, "h_alpha", alpha)
        bound = e0 * math.exp(-gamma * float(t)) + floor
        rows.append({"time": float(t),
                     "energy_l2": spectral.norm_sq(u, "l2"),
                     "energy_h_alpha": eh,
                     "dissipative_bound": bound,
                     "slack": bound - eh})
    return rows


def _rows_from_reports(reports) -> list:
    by_time: dict = {}
    order: list = []
    for rep in reports:
        if rep.name == "dissipative_estimate":
            fill = ("energy_h_alpha", "dissipative_bound", "slack")
        elif rep.name == "energy_inequality":
            fill = ("energy_l2",)
        else:
            continue
        for s in rep.samples:
            t = float(s["t"])
            if t not in by_time:
                by_time[t] = {"time": t}
                order.append(t)
            row = by_time[t]
            if "energy_h_alpha" in fill:
                row["energy_h_alpha"] = s["lhs"]
                row["dissipative_bound"] = s["rhs"]
                row["slack"] = s["slack"]
            else:
                row["energy_l2"] = s["lhs"]
    return [by_time[t] for t in order]


def emit_reports(reports, out_dir: str, trajectory: Trajectory | None = None,
                 forcing: spectral.SpectralField | None = None) -> list:
    """Write one JSON per report plus aggregate.csv; returns written paths.

    The aggregate is computed from the trajectory when one is supplied
    (exact energies at every sample), otherwise reconstructed from the
    dissipative/energy report samples; an empty report list with no
    trajectory yields the bare header.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    seen: dict = {}
    for rep in reports:
        stem = rep.name
        seen[stem] = seen.get(stem, 0) + 1
        if seen[stem] > 1:
            stem = f"{stem}_{seen[stem]}"
        path = os.path.join(out_dir, f"report_{stem}.json")
        _write_text(path, report_json_text(rep))
        paths.append(path)
    if trajectory is not None:
        if forcing is None:
            forcing = trajectory.forcing
        rows = energy_table(trajectory, forcing)
    else:
        rows = _rows_from_reports(reports)
    agg = os.path.join(out_dir, "aggregate.csv")
    _write_text(agg, csv_text(AGGREGATE_HEADER, rows))
    paths.append(agg)
    return paths


def sweep_manifest_text(family, member_files) -> str:
    lines = ["[sweep]",
             f"alphas = {','.join(repr(a) for a in family.alphas)}",
             f"init_rule = {family.init_rule}",
             f"gamma = {family.gamma!r}",
             f"n = {family.finest().n}",
             f"initial_h_alpha_bound = {family.initial_bound!r}",
             f"trajectory_h_alpha_bound = {family.trajectory_bound!r}",
             "",
             "[members]"]
    for i, name in enumerate(member_files):
        lines.append(f"member_{i} = {name}")
    return "\n".join(lines) + "\n"


def write_sweep_outputs(family, out_dir: str, rows) -> list:
    """Member checkpoints, manifest, and the aggregate sweep CSV."""
    from .dynamics import save_checkpoint
    os.makedirs(out_dir, exist_ok=True)
    member_files = []
    for i, (a, traj) in enumerate(zip(family.alphas, family.trajectories)):
        name = f"member_{i}.ckpt"
        save_checkpoint(os.path.join(out_dir, name), traj.states[-1], a,
                        family.gamma, float(traj.times[-1]))
        member_files.append(name)
    paths = [os.path.join(out_dir, f) for f in member_files]
    man = os.path.join(out_dir, "sweep_manifest.ini")
    _write_text(man, sweep_manifest_text(family, member_files))
    paths.append(man)
    csv_path = os.path.join(out_dir, "sweep.csv")
    _write_text(csv_path, csv_text(SWEEP_HEADER, rows))
    paths.append(csv_path)
    return paths


def gap_table_text(table: SemicontinuityTable) -> str:
    return csv_text(GAP_HEADER, table.rows)
