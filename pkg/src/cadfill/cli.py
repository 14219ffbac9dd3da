"""Command-line interface: model generation, node fills, quality, solvers.

Exit codes: 0 success, 1 model or usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io, models, pde, quality, sampler
from .errors import (CadfillError, ConfigError, DomainError, ModelError,
                     NumericalError, SingularityError)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage problems; route them through the
    # error taxonomy instead (usage maps to the model-error exit code)
    def error(self, message):
        raise ConfigError(message)


def _parse_param(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"expected k=v parameter, got {text!r}")
    try:
        value = int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            value = raw
    return key, value


def _parse_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise ConfigError(f"range must be start:stop:step, got {text!r}")
    a, b, step = (float(p) for p in parts)
    if step <= 0 or b < a:
        raise ConfigError(f"range {text!r} must have step > 0 and stop >= start")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def _nan_null(value: float):
    return None if np.isnan(value) else float(value)


def _write_json(path: str, payload: dict):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _cmd_gen_model(args) -> int:
    params = dict(_parse_param(p) for p in args.param or [])
    model = models.generate_builtin(args.name, **params)
    io.save_model(model, args.output)
    return 0


def _cmd_sample_boundary(args) -> int:
    model = io.load_model(args.model)
    rng = np.random.default_rng(args.seed)
    nodes = sampler.sample_model_boundary(model, args.h, rng)
    io.save_nodes(nodes, args.output)
    return 0


def _cmd_fill(args) -> int:
    model = io.load_model(args.model)
    rng = np.random.default_rng(args.seed)
    nodes = sampler.fill_model(model, args.h, args.tau, n=args.n, rng=rng)
    io.save_nodes(nodes, args.output)
    return 0


def _cmd_quality(args) -> int:
    nodes = io.load_nodes(args.nodes)
    if args.boundary_only:
        nodes = nodes.boundary_subset()
        object_dim = nodes.dim - 1
    else:
        object_dim = nodes.dim
    c = args.c if args.c is not None else quality.default_neighbor_count(object_dim)
    report = quality.local_regularity(nodes, c, args.h)
    report = report.with_extremes(r_min=quality.separation_distance(nodes))
    payload = report.to_dict(per_node=not args.summary_only)
    payload["boundary_only"] = bool(args.boundary_only)
    payload["object_dim"] = object_dim
    _write_json(args.output, payload)
    return 0


def _cmd_tau_study(args) -> int:
    s_values = _parse_range(args.s_range)
    h_values = _parse_range(args.h_range)
    builders = {"star2d": "star2d", "star3d": "star3d"}
    if args.family not in builders:
        raise ConfigError(f"unknown family {args.family!r}")
    by_s = {float(s): models.generate_builtin(builders[args.family], s=float(s))
            for s in s_values}
    entries = sampler.tau_min_study(by_s, h_values, seed=args.seed,
                                    tau_hi=args.tau_hi)
    it = iter(entries)
    table = [[_nan_null(next(it)["tau_min"]) for _ in h_values]
             for _ in s_values]
    payload = {
        "family": args.family,
        "s": [float(s) for s in s_values],
        "h": [float(h) for h in h_values],
        "tau_min": table,
        "seed": args.seed,
    }
    _write_json(args.output, payload)
    return 0


def _write_solution_csv(path: str, header: list[str], columns: list[np.ndarray]):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _cmd_solve(args) -> int:
    model = io.load_model(args.model)
    rng = np.random.default_rng(args.seed)
    nodes = sampler.fill_model(model, args.h, args.tau, rng=rng)
    pos = nodes.positions
    axes = ["x", "y", "z"][:nodes.dim]
    base_report = {"problem": args.problem, "h": args.h, "m": args.m,
                   "tau": args.tau, "seed": args.seed, "n_nodes": len(nodes)}

    if args.problem == "poisson":
        ref = pde.poisson_reference(nodes.dim)
        res = pde.solve_poisson(nodes, args.m, ref)
        cols = [pos[:, a] for a in range(nodes.dim)]
        cols += [res.solution, ref.value(pos)]
        _write_solution_csv(args.output, axes + ["u", "u_exact"], cols)
        report = dict(base_report, residual=res.residual,
                      dirichlet=res.dirichlet_count, neumann=res.neumann_count,
                      **res.norms.to_dict())
    elif args.problem == "heat":
        x0 = np.array([float(v) for v in args.x0.split(",")])
        if len(x0) != nodes.dim:
            raise ConfigError(f"--x0 needs {nodes.dim} coordinates")

        def source(p):
            return 5.0 * np.exp(10.0 * np.linalg.norm(p - x0, axis=1))

        res = pde.solve_heat_implicit(nodes, args.m, source, args.lam_th,
                                      args.dt, max_steps=args.max_steps,
                                      tol=args.tol, probe_point=x0)
        cols = [pos[:, a] for a in range(nodes.dim)] + [res.temperature]
        _write_solution_csv(args.output, axes + ["T"], cols)
        report = dict(base_report, steps=res.steps, converged=res.converged,
                      final_delta=res.final_delta, probe_index=res.probe_index,
                      dt=args.dt, lam_th=args.lam_th,
                      probe_history=res.history.tolist())
    else:
        if nodes.dim != 2:
            raise ConfigError("the elasticity validation study is 2D only")
        ref = pde.navier_reference(args.e_modulus, args.poisson_ratio)
        bc_kind = np.where(nodes.boundary_mask, pde.DISPLACEMENT, 0)
        bc_values = np.where(nodes.boundary_mask[:, None],
                             ref.value(pos), 0.0)
        res = pde.solve_navier_cauchy(nodes, args.m, args.e_modulus,
                                      args.poisson_ratio, bc_kind, bc_values,
                                      ref.body_force(pos), ref)
        cols = [pos[:, 0], pos[:, 1],
                res.displacement[:, 0], res.displacement[:, 1]]
        _write_solution_csv(args.output, ["x", "y", "ux", "uy"], cols)
        report = dict(base_report, residual=res.residual,
                      e_modulus=args.e_modulus,
                      poisson_ratio=args.poisson_ratio,
                      **res.norms.to_dict())
    if args.report:
        _write_json(args.report, report)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="cadfill",
                     description="Node generation and meshless PDE validation "
                                 "on NURBS-bounded domains")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="write a built-in model to JSON")
    p.add_argument("name", help="builtin name, e.g. sphere6 or star2d")
    p.add_argument("--param", action="append", metavar="K=V",
                   help="model parameter, repeatable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen_model)

    p = sub.add_parser("sample-boundary", help="boundary nodes only")
    p.add_argument("model")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_sample_boundary)

    p = sub.add_parser("fill", help="boundary plus interior nodes")
    p.add_argument("model")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--n", type=int, default=None,
                   help="candidates per expansion")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_fill)

    p = sub.add_parser("quality", help="regularity report for a node CSV")
    p.add_argument("nodes")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--c", type=int, default=None)
    p.add_argument("--boundary-only", action="store_true")
    p.add_argument("--summary-only", action="store_true",
                   help="omit per-node arrays from the report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_quality)

    p = sub.add_parser("tau-study", help="minimal supersampling per (s, h)")
    p.add_argument("--family", default="star2d")
    p.add_argument("--s-range", required=True, metavar="A:B:STEP")
    p.add_argument("--h-range", required=True, metavar="A:B:STEP")
    p.add_argument("--tau-hi", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_tau_study)

    p = sub.add_parser("solve", help="fill a model and solve a PDE on it")
    p.add_argument("problem", choices=["poisson", "heat", "elasticity"])
    p.add_argument("model")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=3e-4)
    p.add_argument("--lam-th", type=float, default=2.0)
    p.add_argument("--x0", default="0,0,0.2")
    p.add_argument("--max-steps", type=int, default=3000)
    p.add_argument("--tol", type=float, default=3e-6)
    p.add_argument("--e-modulus", type=float, default=72.1e9)
    p.add_argument("--poisson-ratio", type=float, default=0.33)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ModelError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, SingularityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except CadfillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
