"""Command-line entry point: ``decohist <subcommand> [scenario] [options]``.

Every subcommand writes ``<subcommand>.json`` (and ``<subcommand>.csv`` when
the result is a table) under ``--out`` and prints the report to stdout in
``--format``.  Exit status: 0 pass, 1 check failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from . import histories as hs
from . import measurement as ms
from . import mereology as mer
from . import semantics as sem
from .hilbert import hermitian_deviation, norm_sq
from .report import csv_text, dumps, tree_to_dict, write_report
from .scenario import ScenarioError, bundled_names, load_scenario

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SUBCOMMANDS = ("validate", "consistency", "tree", "stats", "sumrule", "branching",
               "nogo", "mereology", "semantics")
NEEDS_SCENARIO = {"validate", "consistency", "tree", "sumrule", "branching", "mereology", "semantics"}


class UsageError(Exception):
    pass


def _tol(args, sc, key):
    return args.tolerance if args.tolerance is not None else float(sc.tolerances[key])


def _hist_rows(space, hists, weights):
    return [(hs.history_id(h), " ".join(space.labels_of(h)), float(w)) for h, w in zip(hists, weights)]


def cmd_validate(sc, args):
    sp = sc.space
    parts = []
    for k, p in enumerate(sp.partitions):
        v = p.validate(float(sc.tolerances["structure"]))
        parts.append({"time": sp.times[k], "labels": list(p.labels), "n_cells": len(p),
                      "completeness_deviation": v.completeness_deviation,
                      "orthogonality_deviation": v.orthogonality_deviation, "accepted": v.accepted})
    herm = hermitian_deviation(sp.hamiltonian)
    norm = norm_sq(sp.omega)
    tol = float(sc.tolerances["structure"])
    ok = all(p["accepted"] for p in parts) and herm <= tol and abs(norm - 1.0) <= tol
    report = {"dims": list(sc.dims), "dim": sp.dim, "times": list(sp.times),
              "hamiltonian_hermitian_deviation": herm, "state_norm_sq": norm,
              "partitions": parts, "n_histories": sp.n_histories, "tolerance": tol,
              "coarse_grainings": sorted(sc.coarse_grainings), "predicates": [p.name for p in sc.predicates]}
    return report, None, ok


def cmd_consistency(sc, args):
    tol = _tol(args, sc, "consistency")
    r = hs.consistency_check(sc.space, tol, weak=args.weak, budget=args.budget)
    hists, vecs = hs.all_branch_vectors(sc.space, budget=args.budget)
    weights = np.einsum("ij,ij->i", vecs.conj(), vecs).real
    report = {"n_histories": r.n_histories, "max_offdiagonal": r.max_offdiagonal, "max_ratio": r.max_ratio,
              "worst_pair": None if r.worst_pair is None else [hs.history_id(h) for h in r.worst_pair],
              "tolerance": r.tolerance, "floor": r.floor, "weak": r.weak, "total_weight": r.total_weight,
              "passed": r.passed}
    return report, (("history", "labels", "weight"), _hist_rows(sc.space, hists, weights)), r.passed


def cmd_tree(sc, args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tree = hs.build_branch_tree(sc.space, args.prune, budget=args.budget)
    rows = [(hs.history_id(n.history), len(n.history), " ".join(sc.space.labels_of(n.history)),
             float(n.weight), float(n.pruned_weight))
            for n in sorted(tree.nodes.values(), key=lambda n: (len(n.history), hs.history_id(n.history)))]
    report = {"prune_threshold": args.prune, "retained_weight": tree.retained_weight,
              "pruned_weight": tree.pruned_weight, "n_nodes": len(tree.nodes),
              "warnings": [str(w.message) for w in caught], "tree": tree_to_dict(tree)}
    return report, (("id", "depth", "labels", "weight", "pruned_weight"), rows), True


def _model_value(sc, key, default):
    if sc is not None and sc.model and key in sc.model:
        return sc.model[key]
    return default


def cmd_stats(sc, args):
    c2 = args.c2 if args.c2 is not None else float(_model_value(sc, "c2", 0.5))
    n = args.N if args.N is not None else int(_model_value(sc, "N", 10))
    if not 0.0 <= c2 <= 1.0 or n < 1:
        raise UsageError("--c2 must lie in [0, 1] and --N must be positive")
    prep = ms.SpinPreparation.from_weight(c2)
    dist = ms.frequency_distribution(prep, n)
    mass = ms.concentration_report(prep, n, args.epsilon)
    ok = abs(dist.total - 1.0) <= 1e-10 and (dist.crosscheck_deviation is None
                                            or dist.crosscheck_deviation <= 1e-12)
    report = {"c2": c2, "N": n, "argmax_M": dist.argmax, "total": dist.total,
              "crosscheck_deviation": dist.crosscheck_deviation,
              "concentration": {"epsilon": args.epsilon, "mass": mass},
              "x": [x for _, x in dist.rows()], "passed": ok}
    return report, (("M", "x"), dist.rows()), ok


def cmd_sumrule(sc, args):
    names = sorted(sc.coarse_grainings)
    if args.grouping:
        if args.grouping not in sc.coarse_grainings:
            raise UsageError(f"unknown coarse-graining {args.grouping!r}; available: {names}")
        names = [args.grouping]
    if not names:
        raise UsageError("scenario defines no coarse-grainings")
    tol = _tol(args, sc, "sum_rule")
    results, rows, ok = {}, [], True
    for name in names:
        g = sc.coarse_grainings[name]
        r = hs.sum_rule_check(sc.space, g, tol)
        coarse = hs.coarse_grain(sc.space, g)
        results[name] = {"max_discrepancy": r.max_discrepancy, "passed": r.passed}
        ok &= r.passed
        for e in r.entries:
            rows.append((name, hs.history_id(e.history), " ".join(coarse.labels_of(e.history)),
                         float(e.coarse_weight), float(e.fine_weight_sum), float(e.discrepancy)))
    report = {"tolerance": tol, "groupings": results,
              "max_discrepancy": max(v["max_discrepancy"] for v in results.values()), "passed": ok}
    if "sum_rule_max_discrepancy" in sc.golden:
        report["golden_max_discrepancy"] = sc.golden["sum_rule_max_discrepancy"]
    header = ("grouping", "history", "labels", "coarse_weight", "fine_weight_sum", "discrepancy")
    return report, (header, rows), ok


def cmd_branching(sc, args):
    tol = _tol(args, sc, "branching")
    r = hs.branching_structure_check(sc.space, tol)
    sp = sc.space
    viol = [{"later_time": sp.times[v.later_time], "earlier_time": sp.times[v.earlier_time],
             "cell": sp.partitions[v.later_time].labels[v.cell],
             "predecessors": [sp.partitions[v.earlier_time].labels[a] for a in v.predecessors]}
            for v in r.violations]
    rows = [(v["later_time"], v["cell"], v["earlier_time"], " ".join(v["predecessors"])) for v in viol]
    report = {"checked": r.checked, "tolerance": tol, "violations": viol, "passed": r.passed}
    return report, (("later_time", "cell", "earlier_time", "predecessors"), rows), r.passed


def cmd_nogo(sc, args):
    cfg = sc.nogo if sc is not None else {}
    pair = tuple(args.pair) if args.pair else tuple(cfg.get("c2_pair", (0.4, 0.6)))
    trials = args.trials if args.trials is not None else int(cfg.get("trials", 200))
    seed = args.seed if args.seed is not None else (sc.seed if sc is not None else 0)
    d = int(_model_value(sc, "pointer_dim", cfg.get("pointer_dim", 2)))
    r = ms.no_go_search(pair, trials, seed, d, float(cfg.get("delta", ms.DELTA)))
    report = {"c2_pair": list(r.c2_pair), "trials": r.trials, "seed": r.seed, "pointer_dim": d,
              "inner_product_in": r.inner_in, "max_unitarity_gap": r.max_unitarity_gap,
              "delta": r.delta, "min_max_residual": r.min_max_residual,
              "targeted_residuals": list(r.targeted_residuals),
              "required_residual": r.required_residual, "contradiction_bound": r.contradiction_bound,
              "meters_found": r.meters_found, "bounds_respected": r.bounds_respected,
              "derivation": ("unitarity preserves |<x1|x2>| = {:.6g}; outputs within {:.0e} of orthogonal "
                             "cells would have |<y1|y2>| <= {:.6g}, so some residual must be >= {:.6g}"
                             ).format(r.inner_in, r.delta, r.contradiction_bound, r.required_residual),
              "passed": r.passed}
    return report, None, r.passed


def cmd_mereology(sc, args):
    seed = args.seed if args.seed is not None else sc.seed
    try:
        lat = mer.BranchLattice.from_space(sc.space, _tol(args, sc, "consistency"))
    except mer.InconsistentSpaceError as exc:
        return {"error": str(exc), "passed": False}, None, False
    r = mer.axioms_check(lat, seed=seed)
    bad = mer.orthogonal_overlaps(lat) if lat.size <= mer.EXHAUSTIVE_MAX else []
    ok = r.passed and not bad
    report = {"n_branches": r.n_branches, "n_elements": r.n_elements, "mode": r.mode,
              "branches": [hs.history_id(h) for h in lat.histories],
              "max_residual_inner": r.max_residual_inner, "axioms": r.results, "witness": r.witness,
              "orthogonal_overlaps": [[sorted(a), sorted(b)] for a, b in bad[:10]], "passed": ok}
    return report, None, ok


def cmd_semantics(sc, args):
    if args.threshold is None:
        raise UsageError("semantics needs an explicit --threshold (1e-3 is a reasonable choice)")
    if not 0.0 <= args.threshold < 1.0:
        raise UsageError("--threshold must lie in [0, 1)")
    if not sc.predicates:
        raise UsageError("scenario defines no predicates")
    times = sc.utterance_times or list(sc.space.times)
    tree = hs.build_branch_tree(sc.space)
    rows = sem.truth_table(tree, sc.predicates, times, args.threshold)
    props = sem.property_checks(tree, sc.predicates, times, (0.0, args.threshold, 0.1, 0.5, 0.9))
    ok = all(v is None for v in props.values())
    report = {"threshold": args.threshold, "times": times, "predicates": [p.name for p in sc.predicates],
              "properties": {k: v is None for k, v in props.items()},
              "witnesses": {k: v for k, v in props.items() if v is not None},
              "truth_table": rows, "passed": ok}
    table = [(r["branch"], " ".join(r["labels"]), r["time"], r["predicate"], r["rule"], r["verdict"])
             for r in rows]
    return report, (("branch", "labels", "time", "predicate", "rule", "verdict"), table), ok


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario_name", nargs="?", metavar="SCENARIO",
                        help="scenario file or bundled scenario name")
    common.add_argument("--scenario", metavar="PATH", help="scenario file (alternative to the positional)")
    common.add_argument("--out", metavar="DIR", default="decohist-out", help="report directory")
    common.add_argument("--tolerance", type=float, help="override the scenario tolerance for this check")
    common.add_argument("--threshold", type=float, help="modal weight threshold (semantics)")
    common.add_argument("--seed", type=int, help="random seed (nogo, sampled mereology)")
    common.add_argument("--budget", type=int, default=hs.DEFAULT_BUDGET, help="max enumerated histories")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")

    p = argparse.ArgumentParser(prog="decohist", description="Decoherent-histories checks.")
    p.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    sub = p.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__[4:])
        if name == "consistency":
            s.add_argument("--weak", action="store_true", help="test only real parts")
        if name == "tree":
            s.add_argument("--prune", type=float, default=0.0, help="drop children below this weight")
        if name == "stats":
            s.add_argument("--c2", type=float, help="|c|^2, weight of the + outcome")
            s.add_argument("--N", type=int, help="number of copies")
            s.add_argument("--epsilon", type=float, default=0.1, help="half-width of the window around |c|^2")
        if name == "sumrule":
            s.add_argument("--grouping", help="check only this coarse-graining")
        if name == "nogo":
            s.add_argument("--pair", type=float, nargs=2, metavar=("C2A", "C2B"))
            s.add_argument("--trials", type=int)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.list:
        print("\n".join(bundled_names()), file=stdout)
        return EXIT_PASS
    if args.command is None:
        parser.print_usage(stderr)
        return EXIT_USAGE
    try:
        if args.scenario and args.scenario_name:
            raise UsageError("give the scenario either positionally or with --scenario, not both")
        src = args.scenario or args.scenario_name
        if src is None and args.command in NEEDS_SCENARIO:
            raise UsageError(f"{args.command} needs a scenario")
        sc = load_scenario(src) if src is not None else None
        report, table, ok = COMMANDS[args.command](sc, args)
        report = {"subcommand": args.command, "scenario": sc.name if sc else None, **report, "passed": ok}
        write_report(args.out, args.command, report, table)
    except (UsageError, ScenarioError, FileNotFoundError, hs.EnumerationBudgetExceeded) as exc:
        print(f"decohist {args.command}: error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"decohist {args.command}: I/O error: {exc}", file=stderr)
        return EXIT_USAGE
    if args.format == "csv" and table is not None:
        stdout.write(csv_text(*table))
    else:
        stdout.write(dumps(report))
    label = f" {sc.name}" if sc else ""
    print(f"{args.command}{label}: {'PASS' if ok else 'FAIL'}", file=stderr)
    return EXIT_PASS if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())
