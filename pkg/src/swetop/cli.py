"""Command line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 a validation check failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .adjoint import run_adjoint
from .config import RunConfig, build_scene, parse_config
from .core import ConfigError, GridSpec, SweError, ViscosityParams, make_grid
from .forward import Trajectory, max_stable_dt, run_forward, tangent_step_T
from .io import ADJOINT_HEADER, write_td, write_trajectory
from .topo import interior_points, td_field
from .validation import TDProblem, affinity_check, dot_product_test, fd_td_oracle

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

DOT_TOL = 1e-10
AFFINITY_TOL = 1e-12
FD_BAND = 0.25

log = logging.getLogger("swetop")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swetop", description="Viscous shallow water sensitivities: forward, adjoint, hole sensitivity.")
    p.add_argument("--threads", type=int, default=1, help="worker cap; 1 gives bitwise reproducible output")
    p.add_argument("-v", "--verbose", action="store_true")
    # the same flags are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", metavar="command")
    for name, text in (
        ("forward", "run the forward solver and dump the trajectory"),
        ("adjoint", "run forward and adjoint solvers and dump the adjoint"),
        ("td", "evaluate the hole sensitivity at sample points"),
        ("validate", "run dot-product, affinity and finite-difference checks"),
    ):
        sp = sub.add_parser(name, help=text, parents=[common])
        sp.add_argument("config", type=Path)
    return p


def _setup(cfg: RunConfig):
    g = cfg.grid
    probe = make_grid(g.nx, g.ny, g.dx, g.dy, max(g.t_end, g.dt_hint), g.dt_hint, g.g)
    scene = build_scene(cfg, probe)
    visc = ViscosityParams(cfg.physics.alpha1, cfg.physics.alpha2)
    scene.init.validate(probe)
    dt = min(g.dt_hint, g.cfl * max_stable_dt(scene.init, probe, visc, g.g))
    grid = make_grid(g.nx, g.ny, g.dx, g.dy, g.t_end, dt, g.g)
    return grid, scene, visc


def _out_dir(cfg: RunConfig) -> Path:
    d = Path(os.environ.get("SWETOP_OUT") or cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _mass_summary(traj: Trajectory) -> str:
    m = traj.diagnostics["mass"]
    drift = abs(m[-1] - m[0]) / abs(m[0])
    return (
        f"steps {traj.grid.n_steps}  dt {traj.grid.dt:.6g}  mass {m[0]:.12g} -> {m[-1]:.12g}  "
        f"relative drift {drift:.3e}  clamps {traj.diagnostics['clamp_events']}"
    )


def cmd_forward(cfg: RunConfig, threads: int) -> int:
    grid, scene, visc = _setup(cfg)
    traj = run_forward(scene.init, grid, scene.bathy, visc, grid.g, storage=cfg.output.storage)
    path = write_trajectory(_out_dir(cfg) / "forward.txt", traj.states, traj.times, grid)
    print(_mass_summary(traj))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_adjoint(cfg: RunConfig, threads: int) -> int:
    grid, scene, visc = _setup(cfg)
    traj = run_forward(scene.init, grid, scene.bathy, visc, grid.g, storage=cfg.output.storage)
    adj = run_adjoint(traj, scene.target, cfg.td.adjoint_mode)
    keep = traj.diagnostics["stored_steps"]
    path = write_trajectory(_out_dir(cfg) / "adjoint.txt", adj.states[keep], adj.times[keep], grid, ADJOINT_HEADER)
    print(_mass_summary(traj))
    print(f"adjoint ({adj.mode}) max |P(0)| {abs(adj.states[0]).max():.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def _points(cfg: RunConfig, grid: GridSpec):
    return list(cfg.td.points) if cfg.td.points else interior_points(grid, cfg.td.stride)


def cmd_td(cfg: RunConfig, threads: int) -> int:
    grid, scene, visc = _setup(cfg)
    traj = run_forward(scene.init, grid, scene.bathy, visc, grid.g, storage=cfg.output.storage)
    adj = run_adjoint(traj, scene.target, cfg.td.adjoint_mode)
    samples = td_field(_points(cfg, grid), traj, adj, scene.target, threads=threads)
    path = write_td(_out_dir(cfg) / "td.txt", samples)
    failed = [s for s in samples if not s.ok]
    print(f"{len(samples)} points, {len(failed)} failed")
    print(f"wrote {path}")
    return EXIT_NUMERIC if failed and len(failed) == len(samples) else EXIT_OK


def _broken_transpose(u, w, ctx):
    # a small gain error, as a mis-scaled transpose would produce
    return 1.001 * tangent_step_T(u, w, ctx)


def cmd_validate(cfg: RunConfig, threads: int) -> int:
    grid, scene, visc = _setup(cfg)
    problem = TDProblem(scene.init, grid, scene.bathy, visc, scene.target, cfg.td.adjoint_mode)
    rows = []

    step = _broken_transpose if cfg.validate.inject_fault == "adjoint" else None
    rep = dot_product_test(problem.base, cfg.validate.seed, adjoint_step=step)
    rows.append(("dot-product (discrete adjoint)", rep.residual, DOT_TOL, rep.residual <= DOT_TOL))

    aff = affinity_check(cfg.validate.seed)
    rows.append(("flux-form affinity", aff, AFFINITY_TOL, aff <= AFFINITY_TOL))

    points = list(cfg.validate.fd_points) or [(0.5 * grid.lx, 0.5 * grid.ly)]
    eps = [e * min(grid.dx, grid.dy) for e in cfg.validate.eps_cells]
    for pt in points:
        fd = fd_td_oracle(pt, eps, problem, cfg.td.omega_radius, threads=threads)
        ok = fd.sign_agrees and fd.relative_error <= FD_BAND
        rows.append((f"hole FD at ({pt[0]:g}, {pt[1]:g})", fd.relative_error, FD_BAND, ok))

    width = max(len(r[0]) for r in rows)
    print(f"{'check':<{width}}  {'value':>11}  {'tolerance':>9}  result")
    for name, val, tol, ok in rows:
        print(f"{name:<{width}}  {val:11.3e}  {tol:9.1e}  {'PASS' if ok else 'FAIL'}")
    failed = [r[0] for r in rows if not r[3]]
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "adjoint": cmd_adjoint, "td": cmd_td, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("swetop: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(args.config.read_text())
    except OSError as exc:
        print(f"swetop: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"swetop: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args.threads)
    except ConfigError as exc:
        print(f"swetop: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SweError as exc:
        print(f"swetop: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
