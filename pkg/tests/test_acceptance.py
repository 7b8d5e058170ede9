"""End-to-end acceptance battery: one test per shipped claim, each emitting a
single pass/fail line (echoed in the terminal summary) with the measured
quantity and runtime. Runtimes are reported for information; the verdicts
depend only on the stated numerical tolerances."""

import math
import os
import time

import numpy as np
import pytest

from bardina import certificates as ct
from bardina import limits, scenarios, spectral
from bardina.certificates import TestFunction, TimeLaw
from bardina.cli import main as cli_main
from bardina.dynamics import SolverParams, simulate
from bardina.selftest import run_selftest
from bardina.spectral import SpectralField

from conftest import convolution_advect_oracle, record_acceptance

pytestmark = pytest.mark.acceptance

N = 32


@pytest.fixture(scope="module")
def tg_resolved():
    p = SolverParams(n=N, alpha=1e-2, gamma=1.0, dt=1e-3, t_end=2.0,
                     sample_every=100)
    return simulate(p, SpectralField.zeros(N),
                    scenarios.taylor_green_field(N, 1.0))


@pytest.fixture(scope="module")
def tg_sweep():
    # resolution chosen so the whole sweep battery stays inside its runtime
    # target; the Taylor-Green flow is spectrally resolved here (tail ratio
    # below 1e-5 for every member)
    n = 16
    base = SolverParams(n=n, alpha=1.0, gamma=1.0, dt=2e-3, t_end=2.0,
                        sample_every=50)
    return limits.alpha_sweep(base, SpectralField.zeros(n),
                              scenarios.taylor_green_field(n, 1.0),
                              (1e-1, 1e-2, 1e-3), serial=True)


def test_criterion_1_dissipative_battery():
    t0 = time.time()
    alphas = (1e-1, 5e-2, 1e-2, 1e-3)
    gammas = (0.5, 1.0, 2.0)
    forcing_ids = ("zero", "kolmogorov(1,0.5)", "kolmogorov(2,0.7)", None)
    worst_rel = math.inf
    all_pass = True
    for run in range(20):
        fid = forcing_ids[run % 4] or f"random_divfree(2,0.5,{run + 300})"
        amp = (0.5, 1.0, 2.0)[run % 3]
        p = SolverParams(n=N, alpha=alphas[run % 4], gamma=gammas[run % 3],
                         dt=1e-3, t_end=10.0, sample_every=100,
                         forcing_id=fid, init_id=f"random_divfree(3,{amp},{run})")
        traj = simulate(p, scenarios.build_forcing(fid, N),
                        scenarios.build_initial(p.init_id, N))
        rep = ct.check_dissipative_estimate(traj)
        all_pass &= rep.verdict == "pass"
        worst_rel = min(worst_rel,
                        min(s["slack"] / (1.0 + s["rhs"]) for s in rep.samples))
    ok = all_pass and worst_rel >= -1e-6
    line = record_acceptance(
        1, "dissipative estimate over 20 randomized scenarios", ok,
        f"worst relative slack {worst_rel:.3e}, tolerance -1e-06, "
        f"runtime {time.time() - t0:.0f}s vs 300s target")
    assert ok, line


def test_criterion_2_variational_certificate(tg_resolved):
    t0 = time.time()
    random_pass = all(
        ct.check_variational_inequality(tg_resolved,
                                        ct.random_test_function(seed=i)).verdict
        == "pass"
        for i in range(10))

    rep0 = ct.check_variational_inequality(tg_resolved, None)
    m0 = max(abs(s["slack"]) for s in rep0.samples)
    r0 = max(abs(s["rhs"]) for s in rep0.samples)
    reduction_ok = rep0.verdict == "pass" and m0 <= 1e-6 * (1.0 + r0)

    # self-test: a pure-decay run whose solution admits an exact closed form,
    # compared against itself lifted to a test function
    gamma = 1.0
    phi = TestFunction([((0, 1, 0), (0.8, 0.0, 0.0), TimeLaw("exp", (-gamma,)))])
    ps = SolverParams(n=N, alpha=5e-2, gamma=gamma, dt=1e-3, t_end=2.0,
                      sample_every=100)
    traj_s = simulate(ps, SpectralField.zeros(N), phi.eval(0.0, N))
    reps = ct.check_variational_inequality(traj_s, phi)
    ms = max(abs(s["slack"]) for s in reps.samples)
    rs = max(abs(s["rhs"]) for s in reps.samples)
    selftest_ok = reps.verdict == "pass" and ms <= 1e-6 * (1.0 + rs)

    ok = random_pass and reduction_ok and selftest_ok
    line = record_acceptance(
        2, "variational inequality: 10 random test functions + reductions", ok,
        f"phi=0 slack {m0:.3e}, self-test slack {ms:.3e}, "
        f"runtime {time.time() - t0:.0f}s vs 600s target")
    assert ok, line


def test_criterion_3_spectral_exactness():
    t0 = time.time()
    proj_err = comm_err = 0.0
    for seed in range(5):
        raw = np.random.default_rng(seed).normal(size=(3, 16, 16, 9)) \
            + 1j * np.random.default_rng(seed + 50).normal(size=(3, 16, 16, 9))
        f = SpectralField(spectral.zero_nyquist(
            spectral.hermitian_symmetrize(raw)))
        once = spectral.leray_project(f)
        twice = spectral.leray_project(once)
        proj_err = max(proj_err, np.max(np.abs(twice.coeffs - once.coeffs)))
        a = spectral.helmholtz_filter(spectral.leray_project(f), 0.3)
        b = spectral.leray_project(spectral.helmholtz_filter(f, 0.3))
        comm_err = max(comm_err, np.max(np.abs(a.coeffs - b.coeffs)))

    conv_err = 0.0
    for seed in range(3):
        u = spectral.random_divfree(8, 3, 1.0, seed=seed)
        oracle = convolution_advect_oracle(u)
        got = spectral.advect(u).full_coeffs()
        conv_err = max(conv_err,
                       np.max(np.abs(got - oracle)) / np.max(np.abs(oracle)))

    ortho = 0.0
    for seed in range(100):
        u = spectral.random_divfree(16, 5, 2.0, seed=1000 + seed)
        adv = spectral.advect(u)
        ortho = max(ortho, abs(spectral.inner(adv, u, "l2"))
                    / (spectral.norm(adv) * spectral.norm(u) + 1e-30))

    ok = proj_err <= 1e-14 and comm_err <= 1e-14 and conv_err <= 1e-12 \
        and ortho <= 1e-10
    line = record_acceptance(
        3, "projection/filter exactness, convolution oracle, orthogonality", ok,
        f"idempotence {proj_err:.1e}, commutation {comm_err:.1e}, "
        f"oracle {conv_err:.1e}, orthogonality {ortho:.1e}, "
        f"runtime {time.time() - t0:.0f}s vs 60s target")
    assert ok, line


def test_criterion_4_integrator_order():
    t0 = time.time()
    n, T, dts = 16, 0.5, (4e-3, 2e-3, 1e-3)
    u0 = spectral.random_divfree(n, 3, 25.0, seed=11)
    g = spectral.random_divfree(n, 2, 10.0, seed=12)

    def final(dt):
        p = SolverParams(n=n, alpha=0.02, gamma=0.8, dt=dt, t_end=T,
                         sample_every=10 ** 9)
        return simulate(p, g, u0).states[-1]

    ref = final(dts[-1] / 8)
    errs = [spectral.norm(SpectralField(final(dt).coeffs - ref.coeffs), "l2")
            for dt in dts]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    ok = all(3.7 <= o <= 4.3 for o in orders)
    line = record_acceptance(
        4, "time-step refinement shows fourth order", ok,
        f"observed orders {[round(o, 3) for o in orders]}, window [3.7, 4.3], "
        f"runtime {time.time() - t0:.0f}s vs 120s target")
    assert ok, line


def test_criterion_5_dimension_bound(capsys):
    rc = cli_main(["dim-bound", "--g-norm", "1.0", "--alpha", "1.0",
                   "--gamma", "1.0"])
    printed = capsys.readouterr().out.strip()
    v = limits.attractor_dimension_bound(1.0, 1.0, 1.0)
    ok = (rc == 0 and printed == "0.026526"
          and limits.attractor_dimension_bound(2.0, 1.0, 1.0) == 4.0 * v
          and limits.attractor_dimension_bound(1.0, 0.25, 1.0) == 32.0 * v)
    line = record_acceptance(
        5, "dimension bound reference value and exact scalings", ok,
        f"printed {printed!r}, x4 and x32 scalings exact")
    assert ok, line


def test_criterion_6_cauchy_sweep(tg_sweep):
    t0 = time.time()
    ds = [r["distance"] for r in limits.consecutive_distances(tg_sweep)]
    tail = limits.geometric_tail_estimate(ds)
    ok = ds[1] < ds[0] and tail < 0.1 * ds[0]
    line = record_acceptance(
        6, "trajectory distances shrink along the alpha sweep", ok,
        f"gaps {[f'{d:.3e}' for d in ds]}, tail {tail:.3e} "
        f"< 10% of {ds[0]:.3e}, runtime {time.time() - t0:.0f}s vs 900s target")
    assert ok, line


def test_criterion_7_m_functional(tg_sweep):
    t0 = time.time()
    phi = ct.random_test_function(seed=2, n_modes=3, kmax=2, amplitude=0.3)
    rep = limits.check_limit_distance_properties(tg_sweep, phi,
                                                 [0.0, 1.0, 2.0], growth_seed=3)
    subs = rep.params["sub_verdicts"]
    props_ok = rep.verdict == "pass" and all(v == "pass" for v in subs.values())
    sweep_absorbing_ok = limits.check_absorbing(tg_sweep).verdict == "pass"

    # forcing held orthogonal to a 100x-inflated datum: measured entry time of
    # the absorbing set must match the closed-form envelope crossing
    n = tg_sweep.finest().n
    alpha, gamma, amp = 1e-3, 1.0, 0.5
    g = scenarios.kolmogorov_forcing(n, 1, amp)
    u0 = scenarios.shear_field(n, 10.0 * amp / math.sqrt(1.0 + alpha))
    p = SolverParams(n=n, alpha=alpha, gamma=gamma, dt=2e-3, t_end=6.0,
                     sample_every=50)
    repe = limits.check_absorbing(simulate(p, g, u0))
    m0 = repe.params["initial_estimate"]
    t_star = limits.envelope_entry_time(m0, gamma, spectral.norm_sq(g, "l2"))
    t_entry = repe.params["t_entry"]
    entry_ok = (repe.verdict == "pass" and t_entry is not None
                and abs(t_entry - t_star) <= 0.2 * t_star)

    ok = props_ok and sweep_absorbing_ok and entry_ok
    line = record_acceptance(
        7, "limit functional properties and absorbing-set entry", ok,
        f"sub-checks {sorted(subs.values())}, t_entry {t_entry} vs "
        f"envelope {t_star:.3f} (20% window), "
        f"runtime {time.time() - t0:.0f}s vs 600s target")
    assert ok, line


def test_criterion_8_determinism(tmp_path):
    t0 = time.time()
    results = []
    for sub in ("first", "second"):
        d = tmp_path / sub
        passed, lines = run_selftest(out_dir=str(d))
        blobs = {name: (d / name).read_bytes()
                 for name in sorted(os.listdir(d))}
        results.append((passed, lines, blobs))
    identical = results[0][1] == results[1][1] and results[0][2] == results[1][2]
    ok = results[0][0] and results[1][0] and identical
    line = record_acceptance(
        8, "serial selftest runs are byte-identical", ok,
        f"{len(results[0][2])} report files compared, "
        f"runtime {time.time() - t0:.0f}s")
    assert ok, line
