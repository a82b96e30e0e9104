"""Command-line entry point.  Every command prints one JSON object (or
writes it to --json); errors go to stderr.

Exit codes: 0 success, 1 usage or input error, 2 stage abort.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Any, Dict, List, Optional, Sequence

from . import counting
from .completion import audit_exclusion_cases, is_octahedral, shuffle_decompositions, find_shuffle
from .graphcore import Graph, density, derive_seed, is_tridivisible, read_graph, typicality_deviation, verify_decomposition
from .greedy import check_trajectory, congruent_stop, run_triangle_removal
from .pipeline import DivisibilityError, PipelineConfig, decompose, make_punctured_instance
from .template import ConfigurationError, build_template, template_stats


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _parse_mode(text: str) -> Dict[str, Any]:
    if text in ("paper", "dense", "fixed"):
        return {"mode": text, "epsilon": 0.0}
    if text.startswith("punctured:"):
        try:
            eps = float(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad epsilon in {text!r}")
        return {"mode": "punctured", "epsilon": eps}
    raise argparse.ArgumentTypeError("mode must be paper, dense, fixed or punctured:EPS")


def _load_graph(args: argparse.Namespace, seed: int) -> Graph:
    if getattr(args, "graph", None):
        try:
            return read_graph(args.graph)
        except OSError as exc:
            raise UsageError(f"cannot read graph: {exc}")
    if args.n is None:
        raise UsageError("give --graph or --n")
    if getattr(args, "p", None) is not None:
        return Graph.gnp(args.n, args.p, random.Random(derive_seed(seed, "graph")))
    return Graph.complete(args.n)


def _emit(obj: Dict[str, Any], path: Optional[str]) -> None:
    text = json.dumps(obj, sort_keys=True, indent=None)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------- commands


def cmd_check(args: argparse.Namespace) -> int:
    g = _load_graph(args, args.seed)
    rep = typicality_deviation(g, args.h, rng=random.Random(derive_seed(args.seed, "check")))
    _emit({
        "command": "check",
        "seed": args.seed,
        "n": g.n,
        "edges": g.num_edges(),
        "tridivisible": is_tridivisible(g),
        "density": float(density(g)),
        "typicality_deviation": rep.deviation,
        "h": args.h,
    }, args.json)
    return 0


def cmd_template(args: argparse.Namespace) -> int:
    g = _load_graph(args, args.seed)
    mode = args.mode["mode"]
    if mode == "punctured":
        raise UsageError("use decompose for punctured instances")
    tpl = build_template(g, mode, random.Random(derive_seed(args.seed, "template")), args.a)
    st = template_stats(g, tpl, args.h, rng=random.Random(derive_seed(args.seed, "typicality")))
    _emit({
        "command": "template",
        "seed": args.seed,
        "n": g.n,
        "mode": mode,
        "a": tpl.a,
        "gamma": tpl.gamma,
        "template_triangles": len(tpl.T),
        "density_star": st.density_star,
        "predicted_density_star": st.predicted,
        "rel_error": st.rel_error,
        "in_window": st.in_window,
        "pair_typicality": st.pair_typicality.deviation if st.pair_typicality else None,
    }, args.json)
    return 0


def cmd_removal(args: argparse.Namespace) -> int:
    g = _load_graph(args, args.seed)
    stop = congruent_stop(g.num_edges(), args.b * g.num_edges())
    rng = random.Random(derive_seed(args.seed, "removal"))
    res = run_triangle_removal(g, stop, rng, checkpoints=(0.9, 0.7, 0.5, 0.3))
    env = check_trajectory(res.trajectory, args.b)
    if args.csv:
        res.trajectory.write_csv(args.csv)
    _emit({
        "command": "removal",
        "seed": args.seed,
        "n": g.n,
        "b": args.b,
        "steps": res.trajectory.steps,
        "leave_edges": res.leave.num_edges(),
        "aborted": res.aborted,
        "log_choice_sum": res.trajectory.log_choice_sum,
        "checkpoints": [
            {
                "p": c.p,
                "q_rel_error": c.q_rel_error,
                "te_max_rel_error": c.te_max_rel_error,
                "deg_max_rel_error": c.deg_max_rel_error,
                "within_envelopes": c.passed,
            }
            for c in env.checkpoints
        ],
    }, args.json)
    return 0


def cmd_decompose(args: argparse.Namespace) -> int:
    mode = args.mode["mode"]
    cfg = PipelineConfig(c=args.c, mode=mode, a=args.a, epsilon=args.mode["epsilon"],
                         max_retries=args.retries, budget=args.budget, nibble_rule=args.nibble_rule)
    tpl = None
    if mode == "punctured":
        if args.a is None:
            raise UsageError("punctured mode needs --a")
        g, tpl = make_punctured_instance(args.a, cfg.epsilon, random.Random(derive_seed(args.seed, "instance")))
    elif mode == "dense" and not args.graph and args.n is None:
        if args.a is None:
            raise UsageError("dense mode needs --a, --n or --graph")
        g = Graph.complete((1 << args.a) - 1)
    else:
        g = _load_graph(args, args.seed)
    res = decompose(g, cfg, args.seed, tpl)
    out = res.to_json()
    out["command"] = "decompose"
    _emit(out, args.json)
    return 0 if res.ok else 2


def cmd_count_sts(args: argparse.Namespace) -> int:
    if args.n is None:
        raise UsageError("count-sts needs --n")
    value = counting.brute_force_count_sts(args.n, allow_13=args.allow_13)
    if args.json:
        _emit({"command": "count-sts", "n": args.n, "count": value, "seed": args.seed}, args.json)
    print(value)
    return 0


def cmd_estimate_sts(args: argparse.Namespace) -> int:
    if args.n is None:
        raise UsageError("estimate-sts needs --n")
    est = counting.estimate_log_sts(args.n, args.stop_exp, args.trials, args.seed)
    if args.csv:
        est.write_csv(args.csv)
    out = est.to_json()
    out.update(command="estimate-sts", seed=args.seed)
    _emit(out, args.json)
    return 0


def cmd_design_check(args: argparse.Namespace) -> int:
    if args.n is None:
        raise UsageError("design-check needs --n")
    q, r, lam = args.q, args.r, args.lam
    out: Dict[str, Any] = {"command": "design-check", "seed": args.seed, "n": args.n, "q": q, "r": r, "lambda": lam}
    if q > r:
        out["divisible"] = counting.design_divisibility(args.n, q, r, lam)
    else:
        out["divisible"] = True
    if out["divisible"]:
        f = counting.wilson_design_log_formula(args.n, q, r, lam)
        out.update(log_count_formula=float(f.value), degenerate=f.degenerate, note=f.note)
    _emit(out, args.json)
    return 0


def cmd_shuffle_test(args: argparse.Namespace) -> int:
    a = args.a if args.a is not None else 6
    if a < 3:
        raise UsageError("shuffle-test needs --a >= 3")
    n = (1 << a) - 1
    rng = random.Random(derive_seed(args.seed, "shuffle-test"))
    tpl = build_template(Graph.complete(n), "dense", rng)
    empty = Graph(n)
    results: List[Dict[str, Any]] = []
    ok = True
    while len(results) < args.trials:
        z = tuple(sorted(rng.sample(range(n), 3)))
        if is_octahedral(z, tpl) is None:
            continue
        sh, k = find_shuffle(z, tpl, empty, empty, args.budget, rng)
        m3, m4 = shuffle_decompositions(sh, tpl)
        sg = sh.graph(n)
        checks = {
            "m3_decomposes": verify_decomposition(sg, m3),
            "m4_decomposes": verify_decomposition(sg, m4),
            "m3_in_template": set(m3) <= tpl.T,
            "z_in_m4": z in set(m4),
        }
        ok &= all(checks.values())
        results.append({"z": list(z), "samples": k, **checks})
    out: Dict[str, Any] = {"command": "shuffle-test", "seed": args.seed, "a": a, "trials": args.trials,
                           "all_ok": ok, "mean_samples": sum(r["samples"] for r in results) / len(results)}
    if args.exclusion:
        zl = [tpl.pi[v] for v in results[0]["z"]]
        audit = audit_exclusion_cases(zl, a)
        out["exclusion"] = {"ok": audit.ok, "systems": audit.systems,
                            "counts": {str(k): v for k, v in sorted(audit.counts.items())}}
        ok &= audit.ok
    out["results"] = results
    _emit(out, args.json)
    return 0 if ok else 2


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tridecomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, graph: bool = True) -> None:
        p.add_argument("--seed", type=_u64, default=0, help="master seed (u64)")
        p.add_argument("--json", metavar="PATH", help="write the result object here instead of stdout")
        p.add_argument("--n", type=int, help="vertex count")
        if graph:
            p.add_argument("--graph", metavar="PATH", help="edge-list file: first line n, then 'u v' lines")
            p.add_argument("--p", type=float, help="use G(n, p) instead of K_n")

    p = sub.add_parser("check", help="tridivisibility, density and typicality of a graph")
    common(p)
    p.add_argument("--h", type=int, default=2, help="typicality order")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("template", help="build a template and report its statistics")
    common(p)
    p.add_argument("--mode", type=_parse_mode, default="paper", help="paper | dense | fixed")
    p.add_argument("--a", type=int, help="field exponent (fixed mode)")
    p.add_argument("--h", type=int, default=0, help="pair-typicality order (0 skips)")
    p.set_defaults(func=cmd_template)

    p = sub.add_parser("removal", help="run the triangle removal process and check envelopes")
    common(p)
    p.add_argument("--b", type=float, default=0.001, help="stop when b|G| edges remain")
    p.add_argument("--csv", metavar="PATH", help="write the per-step trajectory")
    p.set_defaults(func=cmd_removal)

    p = sub.add_parser("decompose", help="run the full decomposition pipeline")
    common(p)
    p.add_argument("--mode", type=_parse_mode, default="paper", help="paper | dense | fixed | punctured:EPS")
    p.add_argument("--a", type=int, help="field exponent")
    p.add_argument("--c", type=float, default=1e-12, help="base constant c")
    p.add_argument("--retries", type=int, default=20, help="attempts per stage")
    p.add_argument("--budget", type=int, default=10_000, help="samples per random choice")
    p.add_argument("--nibble-rule", choices=("bounded", "steps", "power"), default="bounded",
                   help="stopping rule of the nibble")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("count-sts", help="exact number of labelled Steiner triple systems")
    common(p, graph=False)
    p.add_argument("--allow-13", action="store_true", help="permit n >= 13 (symmetry-reduced search)")
    p.set_defaults(func=cmd_count_sts)

    p = sub.add_parser("estimate-sts", help="Monte Carlo lower bound on log STS(n)")
    common(p, graph=False)
    p.add_argument("--trials", type=int, default=20, help="independent removal runs")
    p.add_argument("--stop-exp", type=float, default=1.55, help="stop at about n^E edges")
    p.add_argument("--csv", metavar="PATH", help="per-trial CSV")
    p.set_defaults(func=cmd_estimate_sts)

    p = sub.add_parser("design-check", help="design divisibility and the log-count formula")
    common(p, graph=False)
    p.add_argument("--q", type=int, default=3, help="block size")
    p.add_argument("--r", type=int, default=2, help="covered subset size")
    p.add_argument("--lam", type=int, default=1, help="multiplicity lambda")
    p.set_defaults(func=cmd_design_check)

    p = sub.add_parser("shuffle-test", help="exercise shuffles on a dense template")
    common(p, graph=False)
    p.add_argument("--a", type=int, help="field exponent (default 6)")
    p.add_argument("--trials", type=int, default=100, help="number of random octahedral targets")
    p.add_argument("--budget", type=int, default=10_000, help="samples per shuffle")
    p.add_argument("--exclusion", action="store_true", help="also audit the exclusion case analysis")
    p.set_defaults(func=cmd_shuffle_test)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, DivisibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
