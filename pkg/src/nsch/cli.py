"""Command-line front end: batch simulation, optimization and verification.

Subcommands
-----------
``nsch simulate --config cfg [--out DIR]``
    Run the forward solver; write ``diagnostics.csv`` and optional
    snapshots.

``nsch optimize --config cfg [--out DIR]``
    Run projected-gradient descent on the configured tracking problem;
    write ``optim_report.csv`` and the final control snapshots.

``nsch verify WHICH --config cfg [--seed N]``
    Run one identity check (mass | energy | frechet | duality | gradient |
    all) and print a pass/fail report.

Exit status: 0 on success, 1 on numerical failure (blow-up, failed
line search, failed identity check), 2 on configuration errors.  The
``NSCH_THREADS`` environment variable overrides ``run.workers``.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import config as cfgmod
from .control import optimize
from .errors import BlowUpError, ConfigError, LineSearchError, NschError
from .grid import set_fft_workers
from .snapshots import write_diagnostics_csv, write_face, write_trajectory_snapshots
from .verification import verify

CHECKS = ("mass", "energy", "frechet", "duality", "gradient")


def _load(args) -> cfgmod.RunConfig:
    cfg = cfgmod.parse_config(args.config)
    if args.seed is not None:
        cfg.values["run.seed"] = int(args.seed)
    if args.out is not None:
        cfg.values["output.dir"] = args.out
    workers = int(os.environ.get("NSCH_THREADS", cfg["run.workers"]))
    set_fft_workers(max(1, workers))
    return cfg


def _outdir(cfg) -> str:
    path = cfg["output.dir"]
    os.makedirs(path, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    cfg = _load(args)
    outdir = _outdir(cfg)
    grid = cfgmod.build_grid(cfg)
    time = cfgmod.build_time(cfg)
    params = cfgmod.build_params(cfg)
    v0, phi0 = cfgmod.build_initial(cfg, grid)

    from .state import simulate

    traj = simulate(v0, phi0, None, time, params)
    csv_path = os.path.join(outdir, "diagnostics.csv")
    write_diagnostics_csv(csv_path, traj)
    stride = cfg["output.snapshot_stride"]
    if stride > 0:
        write_trajectory_snapshots(outdir, traj, stride)
    d = traj.diagnostics
    print(
        f"simulated {time.n_steps} steps on {grid.nx}x{grid.ny}: "
        f"mass drift {abs(d['mass'][-1] - d['mass'][0]):.3e}, "
        f"final energy {d['energy'][-1]:.6e}, wrote {csv_path}"
    )
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args)
    outdir = _outdir(cfg)
    problem = cfgmod.build_problem(cfg)
    options = cfgmod.build_optimizer_options(cfg)

    u_opt, report = optimize(problem, None, options)
    csv_path = os.path.join(outdir, "optim_report.csv")
    report.to_csv(csv_path)
    stride = cfg["output.snapshot_stride"]
    if stride > 0:
        for n in range(0, u_opt.n_steps, stride):
            write_face(
                os.path.join(outdir, f"u_{n:06d}.nschv"),
                u_opt.fields[n], "u", n * problem.time.dt,
            )
    accepted = report.accepted_J()
    print(
        f"optimizer stopped: {report.reason} after {len(accepted) - 1} accepted steps, "
        f"J {accepted[0]:.6e} -> {accepted[-1]:.6e}, wrote {csv_path}"
    )
    if report.reason.startswith("line search failed"):
        return 1
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    seed = cfg["run.seed"]
    checks = CHECKS if args.which == "all" else (args.which,)
    all_passed = True
    for which in checks:
        use_cfg = cfg
        if which in ("frechet", "duality", "gradient") and cfg["cost.target"] == "tracking":
            # identity checks need a non-degenerate misfit; self-generated
            # tracking targets make both sides of the pairing nearly zero
            use_cfg = cfgmod.RunConfig({**cfg.values, "cost.target": "stripe"})
        problem = cfgmod.build_problem(use_cfg)
        refined = None
        if which == "duality":
            refined = cfgmod.build_problem(cfgmod.refine_config(use_cfg))
        report = verify(problem, which, seed=seed, refined_problem=refined)
        print(report.summary())
        all_passed = all_passed and report.passed
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsch",
        description="membrane-fluid solver suite: simulate, optimize, verify",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("optimize", cmd_optimize)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(fn=fn)
    pv = sub.add_parser("verify")
    pv.add_argument("which", choices=CHECKS + ("all",))
    pv.add_argument("--config", required=True)
    pv.add_argument("--out", default=None)
    pv.add_argument("--seed", type=int, default=None)
    pv.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, LineSearchError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except NschError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
