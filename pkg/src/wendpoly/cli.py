"""Command-line interface.

Subcommands: gen-nodes, fit, eval, convergence, kernel-table. Usage
errors exit with status 2 (argparse's convention); numerical or data
errors are caught, printed with their category, and exit with status 1.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .kernels import KERNEL_IDS, kernel_from_id
from .nodes import (
    PointSet,
    chebyshev_lobatto,
    dart_throw,
    hemisphere_fibonacci,
    kte_map,
    read_points,
    sphere_spiral,
    write_points,
)
from .polynomials import build_basis, degree_from_points
from .solver import evaluate, fit_auto, load_model, save_model
from .study import parse_config, run_convergence
from .targets import registry_lookup
from .tuning import solve_eps_for_cond


def _write_values(path, values):
    with open(path, "w") as fh:
        for v in values:
            fh.write(f"{v:.17g}\n")


def _read_values(path):
    return np.loadtxt(path, ndmin=1)


def _cmd_gen_nodes(args):
    if args.domain == "interval":
        ps = chebyshev_lobatto(args.n)
        if args.alpha:
            ps = kte_map(ps, args.alpha)
    elif args.domain in ("disk", "ball"):
        if not args.h:
            raise ValueError("disk/ball generation needs --h")
        ps = dart_throw(args.domain, args.h, args.seed)
    elif args.domain == "sphere":
        ps = sphere_spiral(args.n)
    elif args.domain == "hemisphere":
        ps = hemisphere_fibonacci(args.n, args.qcluster)
    else:
        raise ValueError(f"cannot generate nodes for domain {args.domain!r}")
    write_points(ps, args.out)
    print(f"wrote {ps.n} {args.domain} nodes (dim {ps.dim}) to {args.out}")
    return 0


def _cmd_fit(args):
    nodes = read_points(args.nodes)
    if args.values:
        y = _read_values(args.values)
    else:
        y = registry_lookup(args.target)(nodes.coords)
    order = KERNEL_IDS[args.kernel]
    if args.eps:
        eps = args.eps
    else:
        eps = solve_eps_for_cond(nodes, order, args.cond).eps
        print(f"tuned eps = {eps:.6g} for target condition {args.cond:g}")
    if args.degree is not None:
        degree = args.degree
    else:
        degree = degree_from_points(nodes.n, nodes.dim, args.degree_scale)
    kernel = kernel_from_id(args.kernel, eps)
    basis = build_basis(nodes, degree)
    model = fit_auto(nodes, y, kernel, basis)
    save_model(model, args.out)
    rep = model.report
    print(
        f"fit mode={model.mode} N={nodes.n} M={basis.size} "
        f"support={rep.support:.6g} q={rep.q:.6g} -> {args.out}"
    )
    return 0


def _cmd_eval(args):
    model = load_model(args.model)
    pts = read_points(args.points)
    values = evaluate(model, pts)
    _write_values(args.out, values)
    print(f"evaluated {pts.n} points -> {args.out}")
    return 0


def _cmd_convergence(args):
    cfg = parse_config(args.config)
    rows = run_convergence(cfg, out_csv=args.out)
    print(f"{len(rows)} rows -> {args.out}")
    for row in rows:
        flag = f"  [{row.err_flag}]" if row.err_flag else ""
        print(f"  N={row.n} ell={row.ell} {row.mode}: rel_l2={row.rel_l2:.3e}{flag}")
    return 0


def _cmd_kernel_table(args):
    kernel = kernel_from_id(args.kernel, args.eps)
    radii = np.linspace(0.0, args.rmax, args.num)
    print("dist phi")
    for r in radii:
        print(f"{r:.6f} {kernel(r):.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wendpoly",
        description="Scattered-data interpolation with compact kernels and polynomials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-nodes", help="generate a point set file")
    g.add_argument("--domain", required=True,
                   choices=["interval", "disk", "ball", "sphere", "hemisphere"])
    g.add_argument("--n", type=int, default=0, help="node count (interval/sphere/hemisphere)")
    g.add_argument("--alpha", type=float, default=0.0, help="arcsine map parameter in (0,1)")
    g.add_argument("--qcluster", type=float, default=1.5, help="hemisphere clustering exponent")
    g.add_argument("--h", type=float, default=0.0, help="dart-throw spacing (disk/ball)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_nodes)

    f = sub.add_parser("fit", help="fit a model to nodes plus values or a named target")
    f.add_argument("--nodes", required=True)
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--values", help="file of sample values, one per line")
    src.add_argument("--target", help="registered target id")
    f.add_argument("--kernel", default="c2", choices=sorted(KERNEL_IDS))
    shape = f.add_mutually_exclusive_group(required=True)
    shape.add_argument("--eps", type=float, default=0.0)
    shape.add_argument("--cond", type=float, default=0.0, help="target condition number")
    f.add_argument("--strategy", choices=["fs", "fc"], default="fc",
                   help="tuning strategy label used with --cond")
    deg = f.add_mutually_exclusive_group()
    deg.add_argument("--degree", type=int, default=None)
    deg.add_argument("--degree-scale", type=float, default=None)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_fit)

    e = sub.add_parser("eval", help="evaluate a saved model at points")
    e.add_argument("--model", required=True)
    e.add_argument("--points", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("convergence", help="run a convergence study from a config file")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True, help="output CSV path")
    c.set_defaults(func=_cmd_convergence)

    k = sub.add_parser("kernel-table", help="print kernel values on a radius grid")
    k.add_argument("--kernel", default="c2", choices=sorted(KERNEL_IDS))
    k.add_argument("--eps", type=float, required=True)
    k.add_argument("--rmax", type=float, default=1.2)
    k.add_argument("--num", type=int, default=25)
    k.set_defaults(func=_cmd_kernel_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
