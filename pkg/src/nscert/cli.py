"""Command-line frontend: ``nscert {run,certify,convergence,project,mesh-info}``.

Verdicts are outputs, so ``certify`` exits 0 whether or not the conditions
hold; only configuration errors and solver failures give a nonzero status.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys

from threadpoolctl import threadpool_limits

from . import catalog, studies
from .assembly import SolverError
from .certify import ConstantsLedger, certify
from .config import ConfigError, RunConfig, parse_config, validate
from .expr import manufactured_forcing, parse
from .fespace import build_spaces
from .mesh import mesh_from_config, quality_report
from .norms import norm_report
from .projection import BoundaryIncompatibleError, check_boundary, cube_meshes, projection_convergence_study, projection_errors
from .stepper import run
from .vtk import write_vtk


def _field(text):
    try:
        return catalog.lookup(text)
    except KeyError:
        return parse(text)


def build_problem(cfg):
    """``(spaces, u0, forcing, exact)`` described by a config."""
    mesh = mesh_from_config(*cfg.mesh, extents=cfg.box, refine=cfg.refine)
    spaces = build_spaces(mesh)
    if cfg.manufactured:
        w, q = catalog.manufactured_pair(cfg.manufactured_rate, cfg.manufactured_omega)
        return spaces, w, manufactured_forcing(w, q, cfg.mu), w
    forcing = None if cfg.forcing.strip().lower() == "none" else _field(cfg.forcing)
    return spaces, _field(cfg.u0), forcing, None


def _write(out, name, text):
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _echo(cfg, args):
    header = f"# threads = {args.threads if args.threads else 'default'}\n# seed = {args.seed}\n"
    return header + cfg.echo()


def _trajectory(cfg, args):
    spaces, u0, forcing, exact = build_problem(cfg)
    keep = cfg.snapshot_stride if cfg.snapshot_stride else 1
    traj = run(u0, cfg.tau, cfg.N, cfg.mu, forcing, spaces, tol=cfg.solver_tol, keep_every=keep, exact=exact)
    _write(args.out, "diagnostics.csv", traj.diagnostics_csv())
    _write(args.out, "config_echo.ini", _echo(cfg, args))
    if cfg.snapshot_stride:
        for n in sorted(traj.fields):
            write_vtk(os.path.join(args.out, f"snapshot_{n:05d}.vtk"), spaces, traj.fields[n], f"level {n}")
    return traj, u0


def cmd_run(cfg, args):
    traj, _ = _trajectory(cfg, args)
    last = traj.records[-1]
    print(f"run: {traj.num_steps} steps, T = {traj.T!r}, final energy {last.energy!r}")
    return 0


def cmd_certify(cfg, args):
    traj, u0 = _trajectory(cfg, args)
    ledger = ConstantsLedger(mu=cfg.mu, provenance={"mu": "config"}).with_overrides(cfg.ledger)
    cert = certify(traj, u0, ledger, cfg.M)
    norms = norm_report(traj, u0, traj.spaces)
    _write(args.out, "certificate.txt", cert.to_text() + "\n".join(norms.summary_lines()) + "\n")
    _write(args.out, "certificate.csv", cert.to_csv())
    _write(args.out, "norms.csv", norms.to_csv())
    print(f"verdict: {cert.verdict}")
    print(f"error_bound: {cert.error_bound!r}")
    return 0


STUDIES = ("interpolation", "projection", "space", "time")


def cmd_convergence(cfg, args):
    levels = args.levels if args.levels else cfg.levels
    if len(levels) < 3:
        raise ConfigError("convergence needs at least 3 levels")
    wanted = STUDIES if args.study == "all" else (args.study,)
    meshes = cube_meshes(levels, cfg.box)
    if "interpolation" in wanted:
        table = studies.interpolation_study(catalog.sine(), meshes)
        _write(args.out, "convergence_interpolation.csv", table.to_csv())
        print(f"interpolation L2 order: {table.orders['velocity_l2']!r}")
    if "projection" in wanted:
        table = projection_convergence_study(catalog.vortex(), catalog.vortex_pressure(), meshes)
        _write(args.out, "convergence_projection.csv", table.to_csv())
        print("projection orders: " + ", ".join(f"{k} {v!r}" for k, v in table.orders.items()))
    if "space" in wanted:
        table = studies.manufactured_space_study(levels, cfg.space_tau, cfg.space_T, cfg.space_mu, cfg.box)
        _write(args.out, "convergence_space.csv", table.to_csv())
        print(f"manufactured spatial order: {table.orders['velocity_linf_l2']!r}")
    if "time" in wanted:
        table = studies.manufactured_time_study(cfg.time_n, cfg.time_taus, cfg.time_T, cfg.time_mu, cfg.time_omega, cfg.box)
        _write(args.out, "convergence_time.csv", table.to_csv())
        print(f"manufactured temporal order: {table.orders['velocity_linf_l2']!r}")
    return 0


def cmd_project(cfg, args):
    spaces, _, _, _ = build_problem(cfg)
    w, p = catalog.vortex(), catalog.vortex_pressure()
    check_boundary(w, spaces)
    e = projection_errors(w, p, spaces)
    text = "h,velocity_l2,velocity_h1,pressure_l2\n" + ",".join(repr(v) for v in (e.h, e.velocity_l2, e.velocity_h1, e.pressure_l2)) + "\n"
    _write(args.out, "projection.csv", text)
    print(text, end="")
    return 0


def cmd_mesh_info(cfg, args):
    mesh = mesh_from_config(*cfg.mesh, extents=cfg.box, refine=cfg.refine)
    spaces = build_spaces(mesh)
    q = quality_report(mesh)
    lines = [
        f"vertices: {len(mesh.vertices)}",
        f"tets: {len(mesh.tets)}",
        f"boundary_faces: {len(mesh.boundary_faces)}",
        f"volume: {mesh.volume()!r}",
        f"velocity_dofs: {spaces.velocity_dofs}",
        f"pressure_dofs: {spaces.pressure_dofs}",
    ] + [f"{k}: {v!r}" for k, v in vars(q).items()]
    text = "\n".join(lines) + "\n"
    _write(args.out, "mesh_info.txt", text)
    write_vtk(os.path.join(args.out, "mesh.vtk"), spaces)
    print(text, end="")
    return 0


COMMANDS = {
    "run": cmd_run,
    "certify": cmd_certify,
    "convergence": cmd_convergence,
    "project": cmd_project,
    "mesh-info": cmd_mesh_info,
}


def _levels(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=None, help="BLAS/LAPACK thread limit")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized utilities (recorded only)")
    parser = argparse.ArgumentParser(prog="nscert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "convergence":
            p.add_argument("--levels", type=_levels, default=None, help="mesh levels, e.g. 2,4,8")
            p.add_argument("--study", choices=STUDIES + ("all",), default="all")
    return parser


def _load(args):
    if args.config:
        return parse_config(args.config)
    if args.command in ("run", "certify"):
        raise ConfigError(f"{args.command} requires --config")
    cfg = RunConfig(T=0.1)
    return validate(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    limits = threadpool_limits(limits=args.threads) if args.threads else contextlib.nullcontext()
    try:
        cfg = _load(args)
        os.makedirs(args.out, exist_ok=True)
        with limits:
            return COMMANDS[args.command](cfg, args)
    except (ConfigError, BoundaryIncompatibleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
