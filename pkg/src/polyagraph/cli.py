"""Command-line entry point: ``polyagraph {simulate,ode,equilibria,montecarlo,verify}``.

Graphs come from ``--graph`` (a generator string like ``complete:5`` or a
path to an edge-list file) or ``--hypergraph FILE``. Exponents come from
``--alpha`` or ``--alpha-table FILE`` (lines ``i-j = a``). Numbers are
printed with 17 significant digits. Exit status is 0 on success and 1 on
any validation failure.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np

from . import dynamics as dyn
from . import reports, urn, verify
from .equilibria import (
    NotRegularBipartiteError,
    Stability,
    bipartite_spectrum,
    find_equilibria,
    omega_set,
    star_closed_form,
)
from .experiments import (
    ExperimentSpec,
    Target,
    _clean,
    run_ensemble,
    unstable_avoidance_report,
    write_ensemble,
)
from .fieldspec import FieldSpec, FieldSpecError, UNIFORM
from .graph_model import (
    Graph,
    GraphError,
    Hypergraph,
    analyze,
    from_spec,
    generate,
    one_edge_hypergraph,
    parse_graph,
    parse_hypergraph,
)

LABEL_LIMIT = 12   # enumerate equilibria for labelling only on graphs this small


class UsageError(ValueError):
    pass


# --- configuration ------------------------------------------------------------

def load_graph(args) -> Graph | Hypergraph:
    if args.graph and args.hypergraph:
        raise UsageError("give exactly one of --graph and --hypergraph")
    if args.hypergraph:
        with open(args.hypergraph) as fh:
            return parse_hypergraph(fh.read())
    if not args.graph:
        raise UsageError("a graph source is required (--graph or --hypergraph)")
    if os.path.isfile(args.graph):
        with open(args.graph) as fh:
            return parse_graph(fh.read())
    return from_spec(args.graph)


def parse_alpha_table(text: str, g: Graph) -> FieldSpec:
    """Lines ``i-j = a`` (or ``i j = a``), 1-based, ``#`` comments allowed."""
    table = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"(\d+)\s*[-\s]\s*(\d+)\s*[=:]\s*(\S+)", line)
        if not m:
            raise FieldSpecError(f"alpha table line {no}: expected 'i-j = alpha', got {raw!r}")
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        table[(i, j)] = float(m.group(3))
    return FieldSpec.per_edge(table)


def load_field(args, g: Graph | Hypergraph) -> FieldSpec:
    if isinstance(g, Hypergraph):
        if args.alpha_table or (args.alpha is not None and args.alpha != 1.0):
            raise UsageError("hypergraphs use the linear law; --alpha/--alpha-table do not apply")
        return FieldSpec.hypergraph()
    if args.alpha_table:
        if args.alpha is not None:
            raise UsageError("give at most one of --alpha and --alpha-table")
        with open(args.alpha_table) as fh:
            spec = parse_alpha_table(fh.read(), g)
        spec.check(g)
        return spec
    return FieldSpec.uniform(1.0 if args.alpha is None else args.alpha)


def parse_counts(text: str | None, m: int):
    if text is None:
        return None
    counts = tuple(int(c) for c in text.split(","))
    if len(counts) != m:
        raise UsageError(f"--counts needs {m} entries")
    return counts


def parse_point(text: str, m: int) -> np.ndarray:
    x = np.array([float(c) for c in text.split(",")])
    if len(x) != m:
        raise UsageError(f"point needs {m} entries")
    return dyn.as_simplex_point(x)


# --- output helpers -----------------------------------------------------------

def _open_out(out_dir: str | None, *parts: str):
    if out_dir is None:
        return None
    path = os.path.join(out_dir, *parts)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return open(path, "w")


def _write_json(doc, out_dir: str | None, name: str, stream) -> None:
    fh = _open_out(out_dir, name)
    if fh is None:
        reports.dump_json(doc, stream)
    else:
        with fh:
            reports.dump_json(doc, fh)


def _run_doc(args, g, spec: FieldSpec) -> dict:
    if isinstance(g, Hypergraph):
        topo = {"m": g.m, "hyperedges": [[v + 1 for v in e] for e in g.hyperedges]}
    else:
        topo = {"m": g.m, "edges": [[i + 1, j + 1] for i, j in g.edges]}
    skip = {"func", "command"}
    return {"command": args.command, "graph": topo, "field": spec.describe(),
            "flags": {k: v for k, v in vars(args).items() if k not in skip}}


# --- subcommands --------------------------------------------------------------

def cmd_simulate(args, stdout) -> int:
    g = load_graph(args)
    spec = load_field(args, g)
    counts = parse_counts(args.counts, g.m)
    traj = urn.simulate(g, spec, counts, args.steps, urn.RngSpec(args.seed, args.trial).generator())
    final = {
        "steps": args.steps,
        "master_seed": args.seed,
        "trial": args.trial,
        "final_counts": [int(c) for c in traj.final.counts],
        "final_proportions": traj.final_proportions,
        "final_noise_sum": traj.noise_sums[-1],
    }
    if args.out is None:
        if args.json:
            reports.dump_json(final, stdout)
        else:
            reports.write_trajectory(stdout, traj.steps, traj.x)
        return 0
    _write_json(_run_doc(args, g, spec), args.out, "spec.json", stdout)
    with _open_out(args.out, "trajectories", "trajectory.csv") as fh:
        reports.write_trajectory(fh, traj.steps, traj.x)
    with _open_out(args.out, "trajectories", "noise.csv") as fh:
        reports.write_trajectory(fh, traj.steps, traj.noise_sums, prefix="M")
    _write_json(final, args.out, "summary.json", stdout)
    return 0


def cmd_ode(args, stdout) -> int:
    g = load_graph(args)
    spec = load_field(args, g)
    x0 = dyn.uniform_point(g.m) if args.x0 is None else parse_point(args.x0, g.m)
    traj = dyn.integrate(x0, g, spec, args.t_end, args.dt)
    every = max(1, args.every)
    idx = np.unique(np.r_[np.arange(0, len(traj.t), every), len(traj.t) - 1])
    final = {"t_end": float(traj.t[-1]), "final": traj.final,
             "lyapunov": dyn.lyapunov(traj.final, g, spec)}
    if args.out is None:
        if args.json:
            reports.dump_json(final, stdout)
        else:
            reports.write_trajectory(stdout, traj.t[idx], traj.x[idx], index_name="t")
        return 0
    _write_json(_run_doc(args, g, spec), args.out, "spec.json", stdout)
    with _open_out(args.out, "trajectories", "ode.csv") as fh:
        reports.write_trajectory(fh, traj.t[idx], traj.x[idx], index_name="t")
    _write_json(final, args.out, "summary.json", stdout)
    return 0


def equilibria_report(g, spec: FieldSpec, n_starts: int, seed: int, full_support: bool) -> tuple:
    eqs = find_equilibria(g, spec, n_starts=n_starts, seed=seed, full_support_only=full_support)
    doc = reports.equilibria_document(eqs)
    if isinstance(g, Graph):
        rep = analyze(g)
        uniform_one = spec.variant == UNIFORM and spec.alpha == 1.0
        if rep.is_regular and rep.is_bipartite and uniform_one:
            od = omega_set(g)
            flags = []
            for v in od.sample(5):
                b = bipartite_spectrum(g, v)
                flags.append({"p": b.p, "q": b.q, "flags": b.flags(), "all_ok": b.all_ok,
                              "jf_eigenvalues": [[z.real, z.imag] for z in b.jf_eigenvalues]})
            doc["omega"] = {"part_a": [i + 1 for i in od.part_a], "part_b": [i + 1 for i in od.part_b],
                            "p_plus_q": od.total, "spectral_checks": flags}
        if rep.is_star and spec.variant == UNIFORM and spec.alpha < 1 and g.m >= 3:
            # closed form assumes the centre is the last vertex
            if rep.star_center == g.m - 1:
                doc["star_closed_form"] = star_closed_form(g.m, spec.alpha)
    return eqs, _clean(doc)


def cmd_equilibria(args, stdout) -> int:
    g = load_graph(args)
    spec = load_field(args, g)
    eqs, doc = equilibria_report(g, spec, args.starts, args.seed, args.full_support)
    header, rows = reports.equilibria_rows(eqs, g.m)
    if args.out is None:
        if args.json:
            reports.dump_json(doc, stdout)
        else:
            reports.write_rows(stdout, header, rows)
        return 0
    _write_json(_run_doc(args, g, spec), args.out, "spec.json", stdout)
    with _open_out(args.out, "equilibria.csv") as fh:
        reports.write_rows(fh, header, rows)
    _write_json(doc, args.out, "summary.json", stdout)
    return 0


def resolve_target(name: str, g, spec: FieldSpec, eqs) -> Target:
    """``auto`` picks the limit object the theory predicts when it can."""
    uniform_law = spec.variant == UNIFORM
    if name == "none":
        return Target.none()
    if name == "uniform":
        return Target.point(dyn.uniform_point(g.m), "uniform")
    if name.startswith("point:"):
        return Target.point(parse_point(name[len("point:"):], g.m), "point")
    if name == "omega":
        return Target.omega_set(omega_set(g))
    if name == "star":
        rep = analyze(g)
        if not (rep.is_star and rep.star_center == g.m - 1 and uniform_law):
            raise UsageError("--target star needs a star graph (centre last) and a single alpha")
        a = spec.alpha
        if a < 1:
            return Target.point(star_closed_form(g.m, a), "star_interior")
        centre = np.eye(g.m)[-1]
        if a == 1:
            return Target.point(centre, "centre")
        leaves = np.r_[np.full(g.m - 1, 1.0 / (g.m - 1)), 0.0]
        return Target.equilibria([("centre", centre), ("leaves", leaves)])
    if name == "equilibria":
        if eqs is None:
            raise UsageError("equilibria target needs an enumerable graph")
        pts = [e for e in eqs if e.classification is Stability.STABLE] or list(eqs)
        return Target.equilibria([(e.label(), e.point) for e in pts])
    if name != "auto":
        raise UsageError(f"unknown target {name!r}")
    if isinstance(g, Hypergraph):
        return Target.none()
    rep = analyze(g)
    if uniform_law and rep.is_star and rep.star_center == g.m - 1 and g.m >= 3:
        return resolve_target("star", g, spec, eqs)
    if uniform_law and spec.alpha == 1 and rep.is_regular:
        return resolve_target("omega" if rep.is_bipartite else "uniform", g, spec, eqs)
    if uniform_law and spec.alpha < 1 and eqs is not None and len(eqs.interior) == 1:
        return Target.point(eqs.interior[0].point, "interior")
    return resolve_target("equilibria", g, spec, eqs) if eqs is not None else Target.none()


def cmd_montecarlo(args, stdout) -> int:
    g = load_graph(args)
    spec = load_field(args, g)
    eqs = None
    if isinstance(g, Graph) and g.m <= LABEL_LIMIT:
        eqs = find_equilibria(g, spec, seed=args.seed)
    target = resolve_target(args.target, g, spec, eqs)
    labels = tuple((e.label(), tuple(e.point)) for e in eqs) if eqs is not None else None
    exp = ExperimentSpec(g, spec, args.steps, args.trials, args.seed, target,
                         initial_counts=parse_counts(args.counts, g.m), labels=labels, tol=args.tol)
    result = run_ensemble(exp, workers=args.workers)
    summary = result.summary.to_dict()
    if eqs is not None:
        av = unstable_avoidance_report(g, spec, eqs.unstable, result, eps=args.eps)
        summary["unstable_avoidance"] = {"eps": av.eps, "enforced": av.enforced,
                                         "counts": av.counts, "ok": av.ok}
    if args.out is None:
        reports.dump_json(summary, stdout)
        return 0
    write_ensemble(result, args.out)
    _write_json(summary, args.out, "summary.json", stdout)
    return 0


def cmd_verify(args, stdout) -> int:
    if args.graph or args.hypergraph:
        g = load_graph(args)
        cases = [(g, load_field(args, g))]
    else:
        cases = verify.default_cases() + [(generate("cycle", 6), FieldSpec.uniform(1.0)),
                                          (one_edge_hypergraph(4), FieldSpec.hypergraph())]
    checks = verify.run_suite(cases, quick=args.quick, seed=args.seed)
    for c in checks:
        stdout.write(c.line() + "\n")
    failed = sum(not c.ok for c in checks)
    stdout.write(f"{len(checks) - failed} passed, {failed} failed\n")
    if args.out is not None:
        _write_json({"checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in checks]},
                    args.out, "summary.json", stdout)
    return 0 if failed == 0 else 1


# --- parser -------------------------------------------------------------------

def _graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="generator string (complete:5, cycle:4, star:4, "
                   "complete_bipartite:3:3, hyper:one-edge:4) or edge-list file")
    p.add_argument("--hypergraph", metavar="FILE", help="hyperedge-list file")
    p.add_argument("--alpha", type=float, default=None, help="single exponent (default 1)")
    p.add_argument("--alpha-table", metavar="FILE", help="per-edge exponents, lines 'i-j = a'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", help="write spec.json, trajectories/, summary.json here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyagraph", description="Graph-based Polya urns and their mean ODE.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one urn trajectory at geometric checkpoints")
    _graph_flags(p)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--trial", type=int, default=0, help="trial index of the random stream")
    p.add_argument("--counts", help="initial ball counts, comma separated (default all ones)")
    p.add_argument("--json", action="store_true", help="print the final-state report instead of the CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ode", help="RK4 trajectory of the mean ODE")
    _graph_flags(p)
    p.add_argument("--x0", help="start point, comma separated (default uniform)")
    p.add_argument("--t-end", type=float, default=30.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--every", type=int, default=100, help="keep every k-th step in the CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("equilibria", help="enumerate and classify equilibria")
    _graph_flags(p)
    p.add_argument("--starts", type=int, default=32, help="multistarts per face")
    p.add_argument("--full-support", action="store_true", help="only solve the full face")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the CSV")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("montecarlo", help="ensemble of trials and summary statistics")
    _graph_flags(p)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--counts")
    p.add_argument("--target", default="auto",
                   help="auto | uniform | omega | star | equilibria | none | point:x1,...,xm")
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--eps", type=float, default=0.02, help="radius for the unstable-avoidance count")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("verify", help="run the property suite")
    _graph_flags(p)
    p.add_argument("--quick", action="store_true", help="fewer sample points")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, stdout)
    except GraphError as exc:
        stderr.write(f"error: {exc.kind}: {exc}\n")
    except (FieldSpecError, NotRegularBipartiteError, UsageError, dyn.DomainError,
            urn.UrnOverflowError, ValueError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
