"""Built-in self-test: a catalogue of fast, fully deterministic checks of the
closed-form identities and invariants every installation must reproduce.
Written report files are byte-identical across serial executions.
"""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from . import spectral
from .certificates import (CertificateReport, TestFunction, TimeLaw,
                           check_dissipative_estimate, check_energy_inequality,
                           check_variational_inequality, growth_rate_estimate,
                           model_residual, random_test_function)
from .config import ConfigError, parse_config, serialize_config
from .dynamics import (SolverParams, load_checkpoint, save_checkpoint,
                       semigroup_property_check, simulate)
from .limits import (TrajMetricConfig, attractor_dimension_bound, check_absorbing,
                     envelope_entry_time, trajectory_distance)
from .dynamics import Trajectory
from .reports import emit_reports, parse_report_json, report_json_text
from .scenarios import build_forcing, build_initial
from .spectral import SpectralField


class _Check:
    def __init__(self, name):
        self.name = name
        self.rows = []
        self.failures = []

    def expect(self, label, measured, budget):
        ok = measured <= budget
        self.rows.append({"t": float(len(self.rows)), "check": f"{self.name}:{label}",
                          "lhs": float(measured), "rhs": float(budget),
                          "slack": float(budget - measured)})
        if not ok:
            self.failures.append(f"{self.name}:{label} measured {measured:.3e} "
                                 f"> budget {budget:.3e}")

    def expect_true(self, label, cond):
        self.expect(label, 0.0 if cond else 1.0, 0.5)


def _spectral_checks(c: _Check):
    n = 16
    u = spectral.random_divfree(n, 5, 1.0, seed=11)
    raw = SpectralField(u.coeffs + 0.1 * spectral.random_divfree(n, 5, 1.0, seed=12).coeffs)
    p1 = spectral.leray_project(raw)
    p2 = spectral.leray_project(p1)
    c.expect("projection_idempotent", float(np.max(np.abs(p2.coeffs - p1.coeffs))), 1e-14)
    a = 0.3
    fc = spectral.leray_project(spectral.helmholtz_filter(raw, a))
    cf = spectral.helmholtz_filter(spectral.leray_project(raw), a)
    c.expect("filter_commutes_with_projection",
             float(np.max(np.abs(fc.coeffs - cf.coeffs))), 1e-14)
    adv = spectral.advect(u)
    c.expect("advection_energy_orthogonal",
             abs(spectral.inner(adv, u, "l2")),
             1e-10 * spectral.norm(adv, "l2") * spectral.norm(u, "l2") + 1e-30)
    c.expect_true("padding_lengths", (spectral.padded_size(8), spectral.padded_size(16),
                                      spectral.padded_size(32)) == (12, 24, 48))
    phys = spectral.to_physical(u, u.n)
    quad = spectral.VOLUME * float(np.mean(np.sum(phys.values ** 2, axis=0)))
    c.expect("parseval_quadrature", abs(quad - spectral.norm_sq(u, "l2")),
             1e-12 * spectral.norm_sq(u, "l2"))


def _dynamics_checks(c: _Check, tmp: str):
    n = 8
    p = SolverParams(n=n, alpha=1e-2, gamma=0.7, dt=2e-3, t_end=0.1, sample_every=10,
                     forcing_id="zero", init_id="zero")
    traj = simulate(p, SpectralField.zeros(n), SpectralField.zeros(n))
    c.expect("zero_scenario_invariant",
             max(float(np.max(np.abs(u.coeffs))) for u in traj.states), 0.0)
    # mean mode follows the closed-form damped relaxation toward g0/gamma
    g = SpectralField.zeros(n)
    gc = g.coeffs.copy()
    gc[0, 0, 0, 0] = 0.25
    g = SpectralField(gc)
    p2 = SolverParams(n=n, alpha=0.1, gamma=0.7, dt=2e-3, t_end=0.2, sample_every=100)
    traj2 = simulate(p2, g, SpectralField.zeros(n))
    want = (1.0 - math.exp(-0.7 * 0.2)) / 0.7 * 0.25
    got = traj2.states[-1].coeffs[0, 0, 0, 0]
    c.expect("mean_mode_closed_form", abs(got - want), 1e-12 * (1 + abs(want)))
    u0 = build_initial("random_divfree(3,0.8,21)", n)
    gk = build_forcing("kolmogorov(1,0.5)", n)
    p3 = SolverParams(n=n, alpha=5e-2, gamma=1.0, dt=2e-3, t_end=0.2, sample_every=25)
    rep = semigroup_property_check(p3, gk, u0, 0.1, 0.1)
    c.expect_true("semigroup_restart", rep.verdict == "pass")
    traj3 = simulate(p3, gk, u0)
    path = os.path.join(tmp, "state.ckpt")
    save_checkpoint(path, traj3.states[-1], p3.alpha, p3.gamma, 0.2)
    field, meta = load_checkpoint(path)
    c.expect("checkpoint_roundtrip",
             float(np.max(np.abs(field.coeffs - traj3.states[-1].coeffs))), 0.0)
    c.expect_true("checkpoint_meta", meta == {"alpha": 5e-2, "gamma": 1.0, "t": 0.2})
    c.expect_true("checkpoint_size", os.path.getsize(path) == 37 + n ** 3 * 48)


def _certificate_checks(c: _Check, tmp: str):
    n = 8
    law = TimeLaw("poly", (0.3, -0.2, 0.05, 0.01))
    for t in (0.0, 0.7):
        h = 1e-6
        fd = (law.value(t + h) - law.value(t - h)) / (2 * h)
        c.expect(f"time_law_derivative_t{t}", abs(fd - law.derivative(t)), 1e-7)
    phi = random_test_function(seed=3, n_modes=2, kmax=2, amplitude=0.4)
    g = build_forcing("kolmogorov(1,0.5)", n)
    r = model_residual(phi, 0.3, 0.05, 1.0, g, n)
    h = 1e-5
    pp, pm = phi.eval(0.3 + h, n), phi.eval(0.3 - h, n)
    dphi_fd = SpectralField((pp.coeffs - pm.coeffs) / (2 * h))
    r_fd = SpectralField(
        spectral.helmholtz_sharpen(SpectralField(
            dphi_fd.coeffs + 1.0 * phi.eval(0.3, n).coeffs), 0.05).coeffs
        + spectral.advect(phi.eval(0.3, n)).coeffs
        - spectral.leray_project(g).coeffs)
    c.expect("residual_fd_oracle",
             float(np.max(np.abs(r.coeffs - r_fd.coeffs))),
             1e-8 * (1 + float(np.max(np.abs(r.coeffs)))))
    shear = TestFunction([((0, 1, 0), (0.6, 0.0, 0.0), TimeLaw("exp", (-1.0,)))])
    u0 = shear.eval(0.0, 16)
    p = SolverParams(n=16, alpha=0.05, gamma=1.0, dt=2e-3, t_end=0.3, sample_every=50)
    traj = simulate(p, SpectralField.zeros(16), u0)
    rep = check_dissipative_estimate(traj)
    c.expect_true("dissipative_shear_decay", rep.verdict == "pass")
    c.expect("dissipative_t0_slack_zero", abs(rep.samples[0]["slack"]), 1e-12)
    rep_e = check_energy_inequality(traj)
    c.expect_true("energy_inequality_shear", rep_e.verdict == "pass")
    rep_v = check_variational_inequality(traj, None)
    c.expect_true("variational_phi_zero", rep_v.verdict == "pass")
    c.expect("variational_phi_zero_tight",
             max(abs(s["slack"]) for s in rep_v.samples),
             1e-6 * (1 + max(abs(s["rhs"]) for s in rep_v.samples)))
    rep_s = check_variational_inequality(traj, shear)
    c.expect_true("variational_self_test", rep_s.verdict == "pass")
    vals = [growth_rate_estimate(phi, 0.0, a, n, seed=5).value for a in (0.0, 1.0, 10.0)]
    c.expect_true("growth_rate_alpha_monotone", vals[0] >= vals[1] >= vals[2] >= 0)


def _limits_checks(c: _Check):
    n = 8
    v = attractor_dimension_bound(1.0, 1.0, 1.0)
    c.expect("dimension_bound_value", abs(v - 1 / (12 * math.pi)), 1e-17)
    c.expect_true("dimension_bound_scalings",
                  attractor_dimension_bound(2.0, 1.0, 1.0) == 4.0 * v
                  and attractor_dimension_bound(1.0, 0.25, 1.0) == 32.0 * v)
    c.expect("envelope_entry_hundredfold",
             abs(envelope_entry_time(100.0, 1.0, 1.0) - math.log(100.0) / 2), 1e-15)
    p = SolverParams(n=n, alpha=1e-2, gamma=1.0, dt=1e-2, t_end=0.1, sample_every=5)
    a = 0.37
    cc = np.zeros((3, n, n, n // 2 + 1), complex)
    cc[1, 1, 0, 0] = a / 2
    cc[1, -1 % n, 0, 0] = a / 2
    g0 = SpectralField.zeros(n)
    ta = Trajectory(p, g0, np.array([0.0]), [SpectralField(cc)])
    tz = Trajectory(p, g0, np.array([0.0]), [SpectralField.zeros(n)])
    cfg = TrajMetricConfig(weights=(1.0,))
    want = math.sqrt(spectral.VOLUME * 2 * (a / 2) ** 2 / 8)
    c.expect("metric_single_mode",
             abs(trajectory_distance(ta, tz, cfg) - want), 1e-12 * want)
    c.expect("metric_identity", trajectory_distance(ta, ta, cfg), 0.0)
    pz = SolverParams(n=n, alpha=1e-2, gamma=1.0, dt=1e-2, t_end=0.1, sample_every=2)
    trajz = simulate(pz, g0, SpectralField.zeros(n))
    repa = check_absorbing(trajz)
    c.expect_true("absorbing_zero_data", repa.verdict == "pass"
                  and repa.params["t_entry"] == 0.0)
    eq_rows = [r for r in repa.samples if r["kappa"] == 0.0]
    c.expect("absorbing_kappa0_equality",
             max(abs(r["slack"]) for r in eq_rows), 0.0)


def _scenario_config_checks(c: _Check):
    n = 8
    f1 = build_forcing("random_divfree(2,0.7,9)", n)
    f2 = build_forcing("random_divfree(2,0.7,9)", n)
    c.expect_true("scenario_seed_deterministic",
                  f1.coeffs.tobytes() == f2.coeffs.tobytes())
    tg = build_initial("taylor_green(1.0)", n)
    tg.validate()
    c.expect("taylor_green_l2_norm",
             abs(spectral.norm_sq(tg, "l2") - spectral.VOLUME / 4),
             1e-13 * spectral.VOLUME)
    sh = build_initial("shear(2.0)", n)
    c.expect("shear_l2_norm", abs(spectral.norm_sq(sh, "l2") - spectral.VOLUME * 2.0),
             1e-13 * spectral.VOLUME)
    ko = build_forcing("kolmogorov(2,1.0)", n)
    ko.validate()
    c.expect("kolmogorov_l2_norm",
             abs(spectral.norm_sq(ko, "l2") - spectral.VOLUME / 2),
             1e-13 * spectral.VOLUME)
    cfg = parse_config("[solver]\nn = 8\ndt = 0.002\nt_end = 0.1\nsample_every = 10\n")
    c.expect_true("config_roundtrip", parse_config(serialize_config(cfg)) == cfg)
    try:
        parse_config("[solver]\nnn = 8\n")
        c.expect_true("config_rejects_unknown_key", False)
    except ConfigError:
        c.expect_true("config_rejects_unknown_key", True)


def _report_checks(c: _Check):
    rep = CertificateReport(name="demo", params={"alpha": 0.5},
                            samples=[{"t": 0.0, "lhs": 1.0, "rhs": 2.0, "slack": 1.0}],
                            tolerance=1e-9, verdict="pass", warnings=["note"])
    c.expect_true("report_json_roundtrip",
                  parse_report_json(report_json_text(rep)) == rep)


def run_selftest(out_dir: str | None = None):
    """Run every check; returns (all_passed, printable lines).

    With out_dir set, writes the selftest report JSON and a small simulated
    aggregate for byte-comparison across runs.
    """
    c = _Check("selftest")
    lines = []
    with tempfile.TemporaryDirectory() as tmp:
        for label, fn in (("spectral", lambda: _spectral_checks(c)),
                          ("dynamics", lambda: _dynamics_checks(c, tmp)),
                          ("certificates", lambda: _certificate_checks(c, tmp)),
                          ("limits", lambda: _limits_checks(c)),
                          ("scenarios_config", lambda: _scenario_config_checks(c)),
                          ("reports", lambda: _report_checks(c))):
            before = len(c.failures)
            fn()
            status = "ok" if len(c.failures) == before else "FAIL"
            lines.append(f"{status:4s} {label}")
    ok = not c.failures
    report = CertificateReport(
        name="selftest", params={"checks": len(c.rows)}, samples=c.rows,
        tolerance=0.0, verdict="pass" if ok else "fail",
        warnings=list(c.failures))
    lines.extend(f"     {f}" for f in c.failures)
    lines.append(f"selftest: {len(c.rows)} checks, "
                 f"{'all passed' if ok else str(len(c.failures)) + ' failed'}")
    if out_dir is not None:
        n = 8
        p = SolverParams(n=n, alpha=5e-2, gamma=1.0, dt=2e-3, t_end=0.1, sample_every=10)
        traj = simulate(p, build_forcing("kolmogorov(1,0.5)", n),
                        build_initial("taylor_green(0.5)", n))
        emit_reports([report], out_dir, trajectory=traj)
    return ok, lines
