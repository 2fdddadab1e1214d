"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import benchmark as bench
from .graph import (
    DisconnectedGraphError,
    GraphError,
    NodeSet,
    is_connected,
    largest_component,
    read_edge_list,
    toy_graph,
)
from .partition import (
    cut_weight,
    normalized_cut,
    ratio_cut,
    reweighted_quality,
    sweep_bisect,
)
from .spectral import (
    ConvergenceError,
    DegenerateSpectrumWarning,
    OperatorKind,
    eigenvector_centrality,
    operator_norm,
    simulate_diffusion,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# reference values for the toy graph, rows x (cut A, cut B)
TOY_REFERENCE = {
    "R": (1.83, 1.83),
    "N": (0.528, 0.417),
    "R~": (11.4, 32.3),
    "N~": (0.747, 0.778),
}
# the table's reweighted ratio cuts correspond to centralities of Euclidean length 10
TOY_CENTRALITY_NORM = 10.0
TOY_TOLERANCE = {"R": 0.01, "N": 0.001, "R~": (0.05, 1.5), "N~": 0.05}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("EPISPEC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"EPISPEC_SEED={raw!r} is not an integer") from None


def _method(text: str) -> OperatorKind:
    try:
        return OperatorKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _mu_range(text: str) -> list[float]:
    try:
        return bench.parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- subcommands -------------------------------------------------------------

def cmd_partition(args) -> int:
    g = read_edge_list(args.graph, one_indexed=args.one_indexed)
    mapping = None
    if not is_connected(g):
        if not args.largest_component:
            raise DisconnectedGraphError(
                "graph is disconnected; pass --largest-component to partition its largest component")
        full_n = g.n
        g, mapping = largest_component(g)
        print(f"using largest component: {g.n} of {full_n} nodes", file=sys.stderr)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateSpectrumWarning)
        part = sweep_bisect(g, args.method, tol=args.tol, solver=args.solver)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    offset = 1 if args.one_indexed else 0
    out = part.to_dict(include_ordering=args.ordering)
    if mapping is not None:
        back = np.flatnonzero(mapping >= 0)
        out["members"] = back[np.asarray(out["members"], dtype=np.int64)].tolist()
        out["component_nodes"] = int(g.n)
    out["members"] = [m + offset for m in out["members"]]
    out["n"] = int(g.n)
    if args.pretty:
        side = out["members"]
        print(f"method        {out['method']}")
        print(f"quality       {out['quality_kind']} = {out['quality']:.6g}")
        print(f"sweep cut     after {out['sweep_position']} of {g.n} nodes")
        print(f"smaller side  {len(side)} nodes: {' '.join(map(str, side))}")
        if out["degenerate"]:
            print("note          second eigenvalue is degenerate")
    else:
        print(json.dumps(out))
    return EXIT_OK


def _spec_from_args(args, mu1=None, mu2=None) -> bench.BenchmarkSpec:
    return bench.BenchmarkSpec(
        n=args.n, macro_count=args.macro, micro_per_macro=args.micro,
        mu1=args.mu1 if mu1 is None else mu1, mu2=args.mu2 if mu2 is None else mu2,
        target_degree=args.degree, seed=args.seed)


def cmd_generate(args) -> int:
    spec = _spec_from_args(args)
    try:
        spec.validate()
    except bench.InfeasibleSpecError as exc:
        raise UsageError(str(exc)) from None
    lg = bench.generate(spec)
    with open(f"{args.out}.edges", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(lg.edges_text())
    with open(f"{args.out}.labels", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(lg.labels_text())
    cm, cu = bench.edge_class_fractions(lg)
    summary = {
        "spec": spec.to_dict(),
        "edges": lg.graph.num_edges,
        "mean_degree": float(lg.graph.degrees.mean()),
        "cross_macro_fraction": cm,
        "cross_micro_fraction": cu,
        "avg_clustering": bench.avg_clustering_coefficient(lg.graph),
        "dropped_stubs": lg.dropped_stubs,
        "repairs": lg.repairs,
        "files": [f"{args.out}.edges", f"{args.out}.labels"],
    }
    print(json.dumps(summary))
    return EXIT_OK


def cmd_sweep(args) -> int:
    template = _spec_from_args(args, mu1=0.0, mu2=0.0)
    try:
        template.validate()
    except bench.InfeasibleSpecError as exc:
        raise UsageError(str(exc)) from None
    methods = [_method(m) for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("no methods given")
    result = bench.run_grid(template, args.mu1, args.mu2, args.runs, methods,
                            base_seed=args.seed, jobs=args.jobs)
    text = result.to_csv() if args.format == "csv" else result.to_json() + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def read_labels(path, column: int | None = None) -> list[str]:
    """Labels from a file with one label per line, or ``node label ...``
    columns (``column`` picks one; default 1)."""
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            col = (0 if len(parts) == 1 else 1) if column is None else column
            if col >= len(parts):
                raise GraphError(f"{path}:{lineno}: no column {col}")
            labels.append(parts[col])
    return labels


def cmd_nmi(args) -> int:
    a = read_labels(args.labels_a, args.column)
    b = read_labels(args.labels_b, args.column)
    if len(a) != len(b):
        raise GraphError(f"label files differ in length: {len(a)} vs {len(b)}")
    print(repr(bench.nmi(a, b)))
    return EXIT_OK


def toy_table() -> dict:
    g, cut_a, cut_b = toy_graph()
    theta = eigenvector_centrality(g).vector * TOY_CENTRALITY_NORM
    rows = {}
    for name, fn in (("R", ratio_cut), ("N", normalized_cut),
                     ("R~", lambda g_, s: reweighted_quality(g_, theta, s, "ratio_cut")),
                     ("N~", lambda g_, s: reweighted_quality(g_, theta, s, "normalized_cut"))):
        vals = (fn(g, cut_a), fn(g, cut_b))
        tol = TOY_TOLERANCE[name]
        tols = tol if isinstance(tol, tuple) else (tol, tol)
        rows[name] = [{"cut": c, "value": v, "paper": p, "deviation": v - p, "tolerance": t,
                       "ok": abs(v - p) <= t}
                      for c, v, p, t in zip("AB", vals, TOY_REFERENCE[name], tols)]
    return {"rows": rows, "cut_weight": [cut_weight(g, cut_a), cut_weight(g, cut_b)],
            "ok": all(cell["ok"] for row in rows.values() for cell in row)}


def cmd_toy(args) -> int:
    table = toy_table()
    if args.format == "json":
        print(json.dumps(table))
    else:
        print(f"{'quality':<8}{'cut':<5}{'value':>10}{'paper':>9}{'dev':>10}  ok")
        for name, row in table["rows"].items():
            for cell in row:
                print(f"{name:<8}{cell['cut']:<5}{cell['value']:>10.4f}{cell['paper']:>9g}"
                      f"{cell['deviation']:>+10.4f}  {'yes' if cell['ok'] else 'NO'}")
    if not table["ok"]:
        print("toy table deviates from reference values beyond tolerance", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_diffuse(args) -> int:
    g = read_edge_list(args.graph, one_indexed=args.one_indexed)
    if args.u0:
        u0 = np.loadtxt(args.u0, dtype=float, comments="#", ndmin=1)
        if u0.shape != (g.n,):
            raise GraphError(f"initial state has {u0.size} values, graph has {g.n} nodes")
    else:
        u0 = np.zeros(g.n)
        u0[0] = 1.0
    dt = args.dt
    if dt is None:
        lam = eigenvector_centrality(g).value if args.method is OperatorKind.REPLICATOR else None
        dt = 1.0 / operator_norm(g, args.method, lam)
    traj = simulate_diffusion(g, args.method, u0, dt, args.steps, args.stride)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["t"] + [f"u{i}" for i in range(g.n)])
    for state in traj:
        w.writerow([repr(state.t)] + [repr(float(x)) for x in state.u])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="epispec", description="Spectral bisection with epidemic diffusion.",
                formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    seed = _default_seed()

    sp = sub.add_parser("partition", help="bisect an edge-list graph", formatter_class=fmt)
    sp.add_argument("--graph", required=True, help="edge-list file ('i j [w]' per line)")
    sp.add_argument("--method", type=_method, default=OperatorKind.REPLICATOR,
                    help="laplacian | symmetric | random_walk | replicator")
    sp.add_argument("--one-indexed", action="store_true", help="node ids in the file start at 1")
    sp.add_argument("--largest-component", action="store_true",
                    help="partition the largest component of a disconnected graph")
    sp.add_argument("--pretty", action="store_true", help="human-readable summary instead of JSON")
    sp.add_argument("--ordering", action="store_true", help="include the ordering vector in JSON")
    sp.add_argument("--tol", type=float, default=1e-10, help="eigensolver residual tolerance")
    sp.add_argument("--solver", choices=["auto", "dense", "lanczos", "power"], default="auto",
                    help="eigensolver")
    sp.set_defaults(func=cmd_partition)

    def spec_flags(q):
        q.add_argument("--n", type=int, default=100, help="node count")
        q.add_argument("--macro", type=int, default=2, help="macro communities")
        q.add_argument("--micro", type=int, default=2, help="micro communities per macro community")
        q.add_argument("--degree", type=float, default=10.0, help="target mean degree")
        q.add_argument("--seed", type=int, default=seed, help="seed (default from EPISPEC_SEED)")

    sp = sub.add_parser("generate", help="generate a hierarchical benchmark graph", formatter_class=fmt)
    spec_flags(sp)
    sp.add_argument("--mu1", type=float, default=0.1, help="cross-macro edge fraction")
    sp.add_argument("--mu2", type=float, default=0.1, help="cross-micro (same macro) edge fraction")
    sp.add_argument("--out", default="benchmark", help="output prefix for .edges and .labels")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("sweep", help="NMI grid over (mu1, mu2)", formatter_class=fmt)
    spec_flags(sp)
    sp.add_argument("--mu1", type=_mu_range, default="0:0.5:0.05", help="start:stop:step or list")
    sp.add_argument("--mu2", type=_mu_range, default="0:0.5:0.05", help="start:stop:step or list")
    sp.add_argument("--runs", type=int, default=100, help="graphs per cell")
    sp.add_argument("--methods", default="laplacian,symmetric,replicator", help="comma-separated")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.add_argument("--format", choices=["csv", "json"], default="csv", help="output format")
    sp.add_argument("--out", default=None, help="output file (default stdout)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("nmi", help="NMI between two label files", formatter_class=fmt)
    sp.add_argument("labels_a")
    sp.add_argument("labels_b")
    sp.add_argument("--column", type=int, default=None,
                    help="label column (default: 0 for one-column files, else 1)")
    sp.set_defaults(func=cmd_nmi)

    sp = sub.add_parser("toy", help="quality table for the 11-node hub example", formatter_class=fmt)
    sp.add_argument("--format", choices=["text", "json"], default="text", help="output format")
    sp.set_defaults(func=cmd_toy)

    sp = sub.add_parser("diffuse", help="Euler trajectory of du/dt = -M u as CSV", formatter_class=fmt)
    sp.add_argument("--graph", required=True, help="edge-list file")
    sp.add_argument("--method", type=_method, default=OperatorKind.REPLICATOR, help="operator")
    sp.add_argument("--one-indexed", action="store_true", help="node ids in the file start at 1")
    sp.add_argument("--u0", default=None, help="file with n initial values (default: unit at node 0)")
    sp.add_argument("--dt", type=float, default=None, help="time step (default 1/lambda_top)")
    sp.add_argument("--steps", type=int, default=100, help="Euler steps")
    sp.add_argument("--stride", type=int, default=1, help="emit every stride-th state")
    sp.set_defaults(func=cmd_diffuse)
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"epispec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"epispec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"epispec: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (GraphError, OSError) as exc:
        print(f"epispec: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"epispec: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"epispec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
