"""Command-line front end.

Exit codes: 0 success, 2 system not controllable, 3 not converged or a
check failed, 4 bad input.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import examples as ex
from .adjoint import TimeGrid
from .functional import NotControllableError
from .io import (SchemaError, read_controls, read_source, read_system, render_report,
                 write_adjoint, write_controls, write_report, write_trajectory)
from .pipeline import RunConfig, synthesize
from .simulate import integrate_forward
from .switching import validate_switching
from .system import DEFAULT_MARGIN, forbidden_set_W, kalman_check, plan_frequencies

EXIT_OK, EXIT_UNCONTROLLABLE, EXIT_FAILED, EXIT_INPUT = 0, 2, 3, 4
KINDS = ("heat", "wave", "coupled", "random")


class InputError(ValueError):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InputError(f"expected numbers, got {text!r}") from exc


def _parse_variant(text):
    if text == "exact":
        return "exact", 0.0, None
    kind, sep, arg = text.partition(":")
    if kind == "approx" and sep:
        try:
            eps = float(arg)
        except ValueError as exc:
            raise InputError(f"bad epsilon in {text!r}") from exc
        if not eps > 0:
            raise InputError("epsilon must be positive")
        return "approximate", eps, None
    if kind == "source" and sep and arg:
        return "source", 0.0, arg
    raise InputError(f"variant must be exact, approx:EPS or source:FILE, got {text!r}")


def _add_system_args(p, with_kind=True):
    g = p.add_argument_group("system")
    if with_kind:
        g.add_argument("--example", choices=KINDS, help="built-in example family")
    g.add_argument("--system", metavar="FILE", help="explicit matrices (see docs/formats.md)")
    g.add_argument("--self-adjoint", action="store_true",
                   help="declare the system in FILE symmetric positive definite")
    g.add_argument("--d", type=int, default=2, help="grid points / modes / state dimension")
    g.add_argument("--L", type=float, default=1.0, help="domain length for heat and wave")
    g.add_argument("--n", type=int, default=2, help="number of controls (random)")
    g.add_argument("--block-dims", default=None, help="control block sizes (random)")
    g.add_argument("--d1", type=float, default=1.0)
    g.add_argument("--d2", type=float, default=2.0)
    g.add_argument("--P", default="2,1,1,2", help="coupling matrix, row-major (coupled)")
    g.add_argument("--seed", type=int, default=0)


def _add_run_args(p):
    g = p.add_argument_group("run")
    g.add_argument("--T", type=float, default=1.0)
    g.add_argument("--grid-N", type=int, default=2000)
    g.add_argument("--variant", default="exact", help="exact, approx:EPS or source:FILE")
    g.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    g.add_argument("--tol", type=float, default=1e-9)
    g.add_argument("--tie-tol", type=float, default=1e-9)
    g.add_argument("--check-tol", type=float, default=1e-6,
                   help="terminal check: |y(T)| <= check_tol (|y0| + |f|) + eps")
    g.add_argument("--y0", default="random", help="'random', 'zero' or comma-separated values")
    g.add_argument("--out", default=None, metavar="DIR")


def build_system(args, kind=None):
    kind = kind or getattr(args, "example", None)
    if args.system and kind:
        raise InputError("give either --system or an example, not both")
    if args.system:
        try:
            return read_system(args.system,
                               structure="self_adjoint" if args.self_adjoint else "general")
        except OSError as exc:
            raise InputError(str(exc)) from exc
    if kind is None:
        raise InputError("no system given: use --system FILE or --example KIND")
    if kind == "heat":
        return ex.make_heat(args.d, args.L)
    if kind == "wave":
        return ex.make_wave(args.d, args.L)
    if kind == "coupled":
        P = np.array(_floats(args.P))
        if P.size != 4:
            raise InputError("--P needs four entries")
        return ex.make_coupled_parabolic(args.d, args.d1, args.d2, P.reshape(2, 2))
    dims = None
    if args.block_dims:
        dims = [int(x) for x in _floats(args.block_dims)]
    return ex.make_random_controllable(args.d, args.n, dims, seed=args.seed)


def build_y0(text, dim, seed):
    if text == "random":
        return np.random.default_rng(seed).standard_normal(dim)
    if text == "zero":
        return np.zeros(dim)
    vals = np.array(_floats(text))
    if vals.size != dim:
        raise InputError(f"--y0 needs {dim} entries, got {vals.size}")
    return vals


def _config(args):
    variant, eps, source_file = _parse_variant(args.variant)
    cfg = RunConfig(T=args.T, N=args.grid_N, variant=variant, eps=eps, margin=args.margin,
                    tol=args.tol, tie_tol=args.tie_tol, check_tol=args.check_tol,
                    seed=args.seed)
    return cfg, source_file


def run_one(system, args, seed, out):
    cfg, source_file = _config(args)
    if seed != cfg.seed:
        cfg = RunConfig(**{**cfg.__dict__, "seed": seed})
    y0 = build_y0(args.y0, system.dim, seed)
    source = None
    if source_file:
        source = read_source(source_file, TimeGrid(cfg.T, cfg.N), system.dim)
    t0 = time.perf_counter()
    run = synthesize(system, y0, cfg, source)
    wall = time.perf_counter() - t0
    rep = run.report()
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_controls(out / "controls.csv", run.controls)
        write_trajectory(out / "trajectory.csv", run.trajectory.t, run.trajectory.y)
        write_adjoint(out / "adjoint.csv", run.trace, system.block_dims)
        write_report(out / "report.txt", rep)
        # kept apart so that the report is reproducible bit for bit
        (out / "timing.txt").write_text(f"wall_time: {wall!r}\n")
    return run, rep, wall


def cmd_synthesize(args, kind=None):
    system = build_system(args, kind)
    seeds = getattr(args, "seeds", 1) or 1
    if seeds == 1:
        run, rep, wall = run_one(system, args, args.seed, args.out)
        sys.stdout.write(render_report(rep))
        sys.stdout.write(f"wall_time: {wall!r}\n")
        return EXIT_OK if run.success else EXIT_FAILED
    threads = max(1, int(os.environ.get("SWITCHCTL_THREADS", os.cpu_count() or 1)))
    seed_list = [args.seed + s for s in range(seeds)]

    def job(s):
        out = None if args.out is None else Path(args.out) / f"seed_{s}"
        return run_one(system, args, s, out)

    with ThreadPoolExecutor(max_workers=min(threads, seeds)) as pool:
        results = list(pool.map(job, seed_list))
    code = EXIT_OK
    for s, (run, rep, _) in zip(seed_list, results):
        print(f"seed {s}: converged={rep['converged']} "
              f"terminal_norm_relative={rep['terminal_norm_relative']!r} "
              f"switching_valid={rep['switching_valid']}")
        if not run.success:
            code = EXIT_FAILED
    return code


def _fmt_set(values, digits=12):
    return "{" + ", ".join(f"{v:.{digits}g}" for v in values) + "}"


def cmd_frequencies(args):
    system = build_system(args)
    spectrum = system.spectrum()
    plan = plan_frequencies(system, margin=args.margin)
    print(f"system: {system.label}")
    print("spectrum(A^T): " + ", ".join(f"{complex(v):.12g}" for v in spectrum.values))
    print(f"mode: {plan.mode}")
    print(f"W = {_fmt_set(forbidden_set_W(spectrum).values)}")
    for j, W in enumerate(plan.forbidden_sets[1:], start=3):
        print(f"W_{j} = {_fmt_set(W.values)}")
    print("omega = (" + ", ".join(f"{w:.12g}" for w in plan.omegas) + ")")
    return EXIT_OK


def cmd_kalman(args):
    system = build_system(args)
    kc = kalman_check(system)
    print(f"rank: {kc.rank}")
    print(f"dim: {system.dim}")
    print(f"controllable: {'true' if kc.controllable else 'false'}")
    return EXIT_OK if kc.controllable else EXIT_UNCONTROLLABLE


def cmd_check(args):
    system = build_system(args)
    try:
        cs = read_controls(args.controls)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    grid = TimeGrid(args.T, args.grid_N)
    y0 = build_y0(args.y0, system.dim, args.seed)
    source = None
    _, eps, source_file = _parse_variant(args.variant)
    if source_file:
        source = read_source(source_file, grid, system.dim)
    try:
        traj = integrate_forward(system, grid, cs, y0, f=source)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    valid = validate_switching(cs)
    ny0 = float(np.linalg.norm(y0))
    fnorm = 0.0 if source is None else float(np.sqrt(np.sum(grid.weights * np.sum(source ** 2, axis=-1))))
    bound = args.check_tol * (ny0 + fnorm) + eps
    ok = traj.terminal_norm <= bound
    print(f"terminal_norm: {traj.terminal_norm!r}")
    print(f"terminal_norm_relative: {(traj.terminal_norm / ny0 if ny0 else 0.0)!r}")
    print(f"terminal_ok: {'true' if ok else 'false'}")
    print(f"switching_valid: {'true' if valid else 'false'}")
    print(f"control_cost: {traj.control_cost!r}")
    return EXIT_OK if (valid and ok) else EXIT_FAILED


def make_parser():
    p = argparse.ArgumentParser(prog="switchctl",
                                description="Switching null-control synthesis for y' + Ay = sum B_i u_i.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="compute switching controls for one system")
    _add_system_args(s)
    _add_run_args(s)

    f = sub.add_parser("frequencies", help="print forbidden sets and chosen frequencies")
    _add_system_args(f)
    f.add_argument("--margin", type=float, default=DEFAULT_MARGIN)

    c = sub.add_parser("check", help="re-simulate a controls file")
    _add_system_args(c)
    _add_run_args(c)
    c.add_argument("--controls", required=True, metavar="FILE")

    k = sub.add_parser("kalman", help="Kalman rank test")
    _add_system_args(k)

    dm = sub.add_parser("demo", help="synthesize on a built-in example")
    dm.add_argument("kind", choices=KINDS)
    _add_system_args(dm, with_kind=False)
    _add_run_args(dm)
    dm.add_argument("--seeds", type=int, default=1,
                    help="run this many consecutive seeds (threads capped by SWITCHCTL_THREADS)")
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synthesize":
            return cmd_synthesize(args)
        if args.command == "demo":
            return cmd_synthesize(args, kind=args.kind)
        if args.command == "frequencies":
            return cmd_frequencies(args)
        if args.command == "kalman":
            return cmd_kalman(args)
        return cmd_check(args)
    except NotControllableError as exc:
        print(f"error: system is not controllable (Kalman rank condition fails: {exc})",
              file=sys.stderr)
        return EXIT_UNCONTROLLABLE
    except (InputError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
