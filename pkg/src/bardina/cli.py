"""Command-line interface.

Subcommands: simulate, certify, sweep, semicontinuity, dim-bound, selftest.
Exit codes: 0 success and all requested verdicts pass, 2 configuration
problem, 3 simulation blow-up, 4 a certificate verdict failed.

Shared flags: --config PATH, --set section.key=value (repeatable), --serial,
--out DIR (overrides [output] directory). BARDINA_THREADS caps concurrent
sweep lanes; --serial forces one lane and byte-reproducible outputs.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import limits, reports
from .certificates import (check_dissipative_estimate, check_energy_inequality,
                           check_variational_inequality, override_tolerance,
                           random_test_function)
from .config import ConfigError, RunConfig, apply_overrides, load_config, parse_config
from .dynamics import BlowUpError, save_checkpoint, simulate
from .scenarios import ScenarioError, build_forcing, build_initial
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CERTIFICATE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bardina",
                                     description="Damped Euler-Bardina workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="path of the campaign configuration file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a configuration value (repeatable)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--serial", action="store_true",
                       help="single-lane execution with byte-reproducible outputs")

    common(sub.add_parser("simulate", help="run one scenario; write checkpoints + energy CSV"))
    common(sub.add_parser("certify", help="run a scenario and the selected certificates"))
    common(sub.add_parser("sweep", help="run the scenario over [sweep] alphas"))
    common(sub.add_parser("semicontinuity", help="gap table of sweep members vs the finest run"))

    dim = sub.add_parser("dim-bound", help="print the attractor dimension bound")
    dim.add_argument("--g-norm", type=float, required=True, help="L2 norm of the forcing")
    dim.add_argument("--alpha", type=float, required=True, help="regularization parameter")
    dim.add_argument("--gamma", type=float, required=True, help="damping coefficient")

    st = sub.add_parser("selftest", help="run the built-in deterministic check suite")
    st.add_argument("--out", default=None, help="write selftest reports to this directory")
    st.add_argument("--serial", action="store_true",
                    help="accepted for symmetry; the selftest is always serial")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.set:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(apply_overrides(text, args.set))
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _scenario(cfg: RunConfig):
    p = cfg.params
    return build_forcing(p.forcing_id, p.n), build_initial(p.init_id, p.n)


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    g, u0 = _scenario(cfg)
    traj = simulate(cfg.params, g, u0)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    save_checkpoint(os.path.join(out, "initial.ckpt"), traj.states[0],
                    cfg.params.alpha, cfg.params.gamma, float(traj.times[0]))
    save_checkpoint(os.path.join(out, "final.ckpt"), traj.states[-1],
                    cfg.params.alpha, cfg.params.gamma, float(traj.times[-1]))
    reports.emit_reports([], out, trajectory=traj, forcing=g)
    print(f"simulated {len(traj)} samples to t = {traj.times[-1]:g}; wrote {out}/")
    return EXIT_OK


def _run_certificates(cfg: RunConfig, traj):
    out = []
    for name in cfg.certificates:
        if name == "dissipative":
            batch = [check_dissipative_estimate(traj)]
        elif name == "energy":
            batch = [check_energy_inequality(traj, cq=cfg.cq)]
        else:
            phis = [None] + [random_test_function(seed=cfg.phi_seed + i)
                             for i in range(cfg.phi_count)]
            batch = [check_variational_inequality(traj, phi, cq=cfg.cq,
                                                  growth_seed=cfg.phi_seed)
                     for phi in phis]
        tol = cfg.tolerance_for(name)
        if tol is not None:
            batch = [override_tolerance(rep, tol) for rep in batch]
        out.extend(batch)
    return out


def _cmd_certify(args) -> int:
    cfg = _load(args)
    g, u0 = _scenario(cfg)
    traj = simulate(cfg.params, g, u0)
    reps = _run_certificates(cfg, traj)
    reports.emit_reports(reps, cfg.out_dir, trajectory=traj, forcing=g)
    failed = 0
    for rep in reps:
        print(f"{rep.verdict:4s} {rep.name} (min slack {rep.min_slack():.3e}, "
              f"tolerance {rep.tolerance:.3e})")
        for w in rep.warnings:
            print(f"     warning: {w}")
        failed += rep.verdict != "pass"
    return EXIT_CERTIFICATE if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    g, u0 = _scenario(cfg)
    fam = limits.alpha_sweep(cfg.params, g, u0, cfg.sweep_alphas,
                             init_rule=cfg.sweep_init_rule, serial=args.serial)
    dist = limits.consecutive_distances(fam)
    rows = []
    for i, (a, traj) in enumerate(zip(fam.alphas, fam.trajectories)):
        rep = limits.check_absorbing(traj)
        rows.append({
            "alpha": a,
            "distance_to_next": dist[i]["distance"] if i < len(dist) else None,
            "m_upper_estimate": limits.limit_distance_estimate(
                limits.SweepFamily((a,), [traj], fam.init_rule, fam.initial_bound,
                                   fam.trajectory_bound, fam.gamma, g),
                None, float(traj.times[-1])),
            "t_entry": rep.params["t_entry"],
            "semicontinuity_gap": None,
        })
    paths = reports.write_sweep_outputs(fam, cfg.out_dir, rows)
    print(f"swept alphas {fam.alphas}; wrote {len(paths)} files under {cfg.out_dir}/")
    if len(dist) >= 2:
        ds = [d["distance"] for d in dist]
        print(f"consecutive distances: {ds}; "
              f"tail estimate {limits.geometric_tail_estimate(ds):.3e}")
    return EXIT_OK


def _cmd_semicontinuity(args) -> int:
    cfg = _load(args)
    g, u0 = _scenario(cfg)
    fam = limits.alpha_sweep(cfg.params, g, u0, cfg.sweep_alphas,
                             init_rule=cfg.sweep_init_rule, serial=args.serial)
    t_start = cfg.semi_t_start if cfg.semi_t_start is not None else cfg.params.t_end / 2
    table = limits.semicontinuity_diagnostic(fam, [fam.finest()], t_start=t_start,
                                             window_len=cfg.semi_window_len,
                                             stride=cfg.semi_stride)
    os.makedirs(cfg.out_dir, exist_ok=True)
    text = reports.gap_table_text(table)
    with open(os.path.join(cfg.out_dir, "semicontinuity.csv"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def _cmd_dim_bound(args) -> int:
    value = limits.attractor_dimension_bound(args.g_norm, args.alpha, args.gamma)
    print(f"{value:.6f}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    ok, lines = run_selftest(out_dir=args.out)
    for line in lines:
        print(line)
    return EXIT_OK if ok else EXIT_CERTIFICATE


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"simulate": _cmd_simulate, "certify": _cmd_certify,
               "sweep": _cmd_sweep, "semicontinuity": _cmd_semicontinuity,
               "dim-bound": _cmd_dim_bound, "selftest": _cmd_selftest}[args.command]
    try:
        return handler(args)
    except (ConfigError, ScenarioError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as e:
        print(f"simulation blew up at t = {e.t:g}: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
