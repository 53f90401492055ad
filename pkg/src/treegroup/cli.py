"""Command-line front end: ``treegroup <subcommand> [flags]``.

Exit codes: 0 success, 2 precondition or domain error, 3 resource budget,
1 internal error, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import traceback
from pathlib import Path

from . import acceptance
from .asymptotics import alpha_min, alpha_turan, orbit_measure, per_prime_growth, log_order_growth
from .errors import ResourceError, TreeGroupError
from .grouplin import (abelian_bound_check, boundary_slice_dim, density_sequence,
                       polihamu_formula, polihamu_pair, random_generation_dimension_experiment,
                       solvable_sum_check)
from .orbits import are_conjugate, canonical_form, orbit_tree_of_element
from .stochastic import (ExperimentReport, RngConfig, haar_random, survival_experiment,
                         transitivity_experiment, transitivity_product, turan_experiment,
                         word_fixed_point_experiment)
from .treealg import PermGroupSpec, TreeAutomorphism, extend, from_json, power, to_json, truncate
from .words import FreeWord, kappa, kappa_min, kernel_census, sidki_experiment
from .zoo import (NAMED_SUBTREES, AutomatonElement, adding_machine, automaton_truncate,
                  grigorchuk_generators, solvable_examples, subtree_measure)

EXIT_OK, EXIT_INTERNAL, EXIT_DOMAIN, EXIT_RESOURCE, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- generator sources ---------------------------------------------------------

def _load_generators(path: str, depth: int | None) -> list[TreeAutomorphism]:
    obj = json.loads(Path(path).read_text())
    items = obj.get("generators", obj) if isinstance(obj, dict) else obj
    if isinstance(items, dict):
        items = [items]
    out = []
    for item in items:
        if "states" in item:
            if depth is None:
                raise UsageError("automaton generators need --n")
            out.append(automaton_truncate(AutomatonElement.from_json(item), depth))
        else:
            g = from_json(item)
            if depth is not None and depth != g.depth:
                g = truncate(g, depth) if depth < g.depth else extend(g, depth)
            out.append(g)
    return out


def _zoo_generators(name: str, p: int, n: int) -> list[TreeAutomorphism]:
    if name == "adding_machine":
        return [adding_machine(p, n)]
    if name == "grigorchuk":
        return list(grigorchuk_generators(n).values())
    examples = solvable_examples(n, p)
    if name in examples:
        return examples[name]
    raise UsageError(f"unknown zoo generating set {name!r}")


def _generators(args) -> list[TreeAutomorphism]:
    if args.gens:
        return _load_generators(args.gens, args.n)
    if args.zoo:
        return _zoo_generators(args.zoo, args.p, args.n)
    if args.random:
        rng = RngConfig(args.seed, args.stream)
        H = PermGroupSpec.cyclic(args.p)
        return [haar_random(args.n, H, rng.generator(0, i)) for i in range(args.random)]
    raise UsageError("give one of --gens, --zoo or --random")


def _group(args) -> PermGroupSpec:
    return PermGroupSpec.parse(args.H) if args.H else PermGroupSpec.cyclic(args.p)


def _rng(args) -> RngConfig:
    return RngConfig(args.seed, args.stream)


def _exact_report(name: str, estimates: dict, config: dict) -> ExperimentReport:
    return ExperimentReport(name, estimates, 0, {}, config)


# -- subcommands ---------------------------------------------------------------

def cmd_alpha(args):
    H = _group(args)
    if H.kind == "cyclic_p":
        p = H.degree
        closed = alpha_turan(p)
        minimized = alpha_min(orbit_measure(H, p))
        est = {"alpha": closed.alpha, "lambda_star": closed.lambda_star,
               "residual": closed.residual, "alpha_min": minimized.alpha,
               "lambda_star_min": minimized.lambda_star,
               "method_gap": abs(closed.alpha - minimized.alpha),
               "discrete_alpha": closed.discrete_check}
    else:
        est = {"log_order_growth": log_order_growth(H),
               "per_prime": {str(p): v for p, v in per_prime_growth(H).items()}}
    return _exact_report("alpha", est, {"H": H.to_json()})


def cmd_turan(args):
    return turan_experiment(args.p, args.n, args.samples, _rng(args))


def cmd_survival(args):
    return survival_experiment(_group(args), args.n, args.samples, _rng(args))


def cmd_transitivity(args):
    H = _group(args)
    product = float(transitivity_product(H, args.j, args.levels))
    if args.samples:
        rep = transitivity_experiment(H, args.j, args.depth, args.samples, _rng(args))
        rep.estimates["product_levels"] = product
        rep.config["levels"] = args.levels
        return rep
    return _exact_report("transitivity", {"product": product},
                         {"H": H.to_json(), "j": args.j, "levels": args.levels})


def cmd_conjugacy(args):
    if args.g and args.h:
        g, h = (_load_generators(path, None)[0] for path in (args.g, args.h))
    else:
        rng = _rng(args)
        H = _group(args)
        g, h = haar_random(args.n, H, rng.generator(0)), haar_random(args.n, H, rng.generator(1))
    return _exact_report("conjugacy", {
        "conjugate": are_conjugate(g, h),
        "canonical_g": canonical_form(orbit_tree_of_element(g)).hex(),
        "canonical_h": canonical_form(orbit_tree_of_element(h)).hex()},
        {"g": to_json(g), "h": to_json(h)})


def cmd_dimension(args):
    if args.samples:
        return random_generation_dimension_experiment(args.j, args.p, args.n, args.samples,
                                                      _rng(args), threshold=args.threshold)
    gens = _generators(args)
    seq = density_sequence(gens, args.n)
    rows = seq.rows()
    rep = _exact_report("dimension", {
        "gamma_final": float(rows[-1][3]) if rows else 0.0,
        "numerators": list(seq.numerators), "denominators": list(seq.denominators)},
        {"p": seq.p, "n": len(rows), "generators": [to_json(g) for g in gens]})
    rep.series = {"gamma": {"x": [r[0] for r in rows], "y": [r[3] for r in rows]}}
    rep.csv_override = [{"level": r[0], "numerator": r[1], "denominator": r[2], "float": r[3]}
                        for r in rows]
    return rep


def cmd_slice(args):
    gens = _generators(args)
    dim = boundary_slice_dim(gens, args.n)
    n = gens[0].depth if args.n is None else args.n
    return _exact_report("slice", {"slice_dim": dim, "full_dim": args.p ** (n - 1) if n else 0},
                         {"p": args.p, "n": n, "generators": [to_json(g) for g in gens]})


def cmd_polihamu(args):
    s, g = polihamu_pair(args.n, args.k, args.p)
    dim = boundary_slice_dim([s, power(g, args.p**args.k)], args.n)
    formula = polihamu_formula(args.n, args.k, args.p)
    return _exact_report("polihamu", {"slice_dim": dim, "formula": formula,
                                      "matches": dim == formula},
                         {"p": args.p, "n": args.n, "k": args.k})


def _word(text: str) -> FreeWord:
    text = text.strip()
    if text.startswith("["):
        return FreeWord.from_signed(json.loads(text))
    return FreeWord.parse(text)


def cmd_words(args):
    return word_fixed_point_experiment(_word(args.word), _group(args), args.depth, args.samples,
                                       _rng(args))


def cmd_kernel_census(args):
    w = _word(args.word)
    k = args.k or max(1, w.num_generators)
    res = kernel_census(w, k, args.p, args.n, _rng(args), samples=args.samples)
    est = {"count": res.count, "total": res.total, "minkowski_ratio": res.ratio,
           "strict": res.strict, "mode": res.mode}
    if res.ci:
        est["count_ci95"] = list(res.ci)
    rep = ExperimentReport("kernel_census", est, res.samples, {},
                           {"word": str(w), "k": k, "p": args.p, "n": args.n,
                            "samples": args.samples}, _rng(args) if res.mode == "sampling" else None)
    return rep


def cmd_kappa(args):
    gens = _generators(args)
    if len(gens) != 3:
        raise UsageError("kappa needs exactly three generators")
    res = kappa(*gens, args.vertex, args.p) if args.vertex is not None else kappa_min(*gens, args.p)
    return _exact_report("kappa", {
        "vertex": res.vertex, "kappa": res.kappa, "word": str(res.word),
        "word_expanded": str(res.expanded), "star_fixes_no_point": res.star_fixes_no_point},
        {"p": args.p, "n": gens[0].depth, "generators": [to_json(g) for g in gens]})


def cmd_sidki(args):
    return sidki_experiment(args.p, args.depth, args.max_length, args.samples, _rng(args))


def cmd_zoo(args):
    name = args.name
    if name in NAMED_SUBTREES:
        m = subtree_measure(NAMED_SUBTREES[name](args.p), args.n)
        return _exact_report("zoo", {"mu_levels": [str(x) for x in m.levels],
                                     "mu_limit": None if m.limit is None else str(m.limit)},
                             {"name": name, "p": args.p, "n": args.n})
    gens = _zoo_generators(name, args.p, args.n)
    return _exact_report("zoo", {"generators": [to_json(g) for g in gens]},
                         {"name": name, "p": args.p, "n": args.n})


def cmd_solvable_check(args):
    res = solvable_sum_check(_generators(args), args.n)
    return _exact_report("solvable_check", {
        "derived_length": res.derived_length, "gamma_sum": res.gamma_sum,
        "gamma_sum_float": float(res.gamma_sum), "constant": res.constant, "bound": res.bound,
        "holds": res.holds, "derived_orders": list(res.derived_orders)},
        {"p": args.p, "n": args.n, "source": _source(args)})


def cmd_abelian_check(args):
    res = abelian_bound_check(_generators(args), args.n)
    return _exact_report("abelian_check", {"log_order": res.log_order, "solo": res.solo,
                                           "gap": res.gap, "holds": res.holds},
                         {"p": args.p, "n": args.n, "source": _source(args)})


def cmd_acceptance(args):
    results = acceptance.run_criteria(args.criteria, args.seed)
    rep = _exact_report("acceptance", {
        f"criterion_{r.number}": {"title": r.title, "holds": r.holds, "measured": r.measured}
        for r in results}, {"criteria": [r.number for r in results], "seed": args.seed})
    rep.estimates["all_hold"] = all(r.holds for r in results)
    rep.timing = {f"criterion_{r.number}": {"elapsed_seconds": r.elapsed,
                                            "budget_seconds": r.budget_seconds,
                                            "within_budget": r.within_budget} for r in results}
    rep.elapsed = sum(r.elapsed for r in results)
    for r in results:
        print(r.line(), file=sys.stderr)
    return rep


def _source(args) -> dict:
    return {"gens": args.gens, "zoo": args.zoo, "random": args.random}


# -- batch ---------------------------------------------------------------------

def _config_to_argv(cfg: dict) -> list[str]:
    cfg = dict(cfg)
    argv = [cfg.pop("subcommand")]
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if val is True:
            argv.append(flag)
        elif val is False:
            argv.append("--no-" + key.replace("_", "-"))
        elif val is None:
            continue
        elif isinstance(val, list):
            argv += [flag, *map(str, val)]
        else:
            argv += [flag, str(val)]
    return argv


def cmd_batch(args) -> int:
    path = Path(args.config)
    outdir = Path(args.outdir) if args.outdir else path.with_suffix("").parent / (path.stem + "_reports")
    outdir.mkdir(parents=True, exist_ok=True)
    runs, failures = [], []
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    for i, line in enumerate(lines):
        try:
            cfg = json.loads(line)
            if "subcommand" not in cfg or cfg["subcommand"] == "batch":
                raise UsageError("each line needs a subcommand other than batch")
            cfg.setdefault("output", str(outdir / f"run_{i:03d}_{cfg['subcommand']}.json"))
            code = run(_config_to_argv(cfg))
            report = cfg["output"] if code == EXIT_OK else None
        except (UsageError, json.JSONDecodeError) as exc:
            print(exc, file=sys.stderr)
            code, report = EXIT_USAGE, None
        runs.append({"index": i, "config": line.strip(), "exit_code": code, "report": report})
        if code:
            failures.append(i)
    manifest = {"runs": runs, "failures": failures}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_INTERNAL if failures else EXIT_OK


# -- parser --------------------------------------------------------------------

COMMANDS = {
    "alpha": cmd_alpha, "turan": cmd_turan, "survival": cmd_survival,
    "transitivity": cmd_transitivity, "conjugacy": cmd_conjugacy, "dimension": cmd_dimension,
    "slice": cmd_slice, "polihamu": cmd_polihamu, "words": cmd_words,
    "kernel-census": cmd_kernel_census, "kappa": cmd_kappa, "sidki": cmd_sidki, "zoo": cmd_zoo,
    "solvable-check": cmd_solvable_check, "abelian-check": cmd_abelian_check,
    "acceptance": cmd_acceptance, "batch": cmd_batch,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--stream", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--emit-plot-data", metavar="PATH",
                        help="also write long-format CSV (experiment, series, x, y)")
    common.add_argument("--timing", action=argparse.BooleanOptionalAction, default=True,
                        help="include the run-dependent timing field")

    gens = _Parser(add_help=False)
    gens.add_argument("--gens", help="JSON file of portraits or automata")
    gens.add_argument("--zoo", help="named generating set (adding_machine, grigorchuk, ...)")
    gens.add_argument("--random", type=int, help="number of Haar random generators")

    parser = _Parser(prog="treegroup", description="Automorphisms of rooted trees: experiments "
                     "and exact computations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, *parents, **kw):
        return sub.add_parser(name, parents=[common, *parents], **kw)

    a = add("alpha", help="growth constant alpha_p")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--H", help="group spec such as C3 or S3 (overrides --p)")

    a = add("turan", help="order exponent K_n of Haar elements")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int, default=14)
    a.add_argument("--samples", type=int, default=2000)

    a = add("survival", help="survival of the fixed-point process")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--H")
    a.add_argument("--n", type=int, default=64)
    a.add_argument("--samples", type=int, default=1_000_000)

    a = add("transitivity", help="probability that j random elements act level-transitively")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--H")
    a.add_argument("--j", type=int, default=2)
    a.add_argument("--levels", type=int, default=20)
    a.add_argument("--samples", type=int, default=0, help="Monte Carlo trials (0: exact only)")
    a.add_argument("--depth", type=int, default=4, help="truncation depth for Monte Carlo")

    a = add("conjugacy", help="conjugacy test via orbit trees")
    a.add_argument("--g")
    a.add_argument("--h")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--H")
    a.add_argument("--n", type=int, default=3)

    a = add("dimension", gens, help="density sequence gamma_1..gamma_n")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int)
    a.add_argument("--samples", type=int, default=0,
                   help="run the random generation experiment with this many samples")
    a.add_argument("--j", type=int, default=3)
    a.add_argument("--threshold", type=float, default=0.9)

    a = add("slice", gens, help="dimension of the boundary slice")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int)

    a = add("polihamu", help="slice dimension of the two-generator construction")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--k", type=int, required=True)

    a = add("words", help="fixed-vertex probabilities of a word map")
    a.add_argument("--word", required=True, help="'a b A B' or a JSON array of signed indices")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--H")
    a.add_argument("--depth", type=int, default=12)
    a.add_argument("--samples", type=int, default=100_000)

    a = add("kernel-census", help="count tuples on which a word is trivial")
    a.add_argument("--word", required=True)
    a.add_argument("--k", type=int)
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--samples", type=int, default=100_000)

    a = add("kappa", gens, help="kappa(v) for three generators acting on a level")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int)
    a.add_argument("--vertex", type=int)

    a = add("sidki", help="bounded relation search for the adding machine and Haar partners")
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--depth", type=int, default=10)
    a.add_argument("--max-length", type=int, default=8)
    a.add_argument("--samples", type=int, default=100)

    a = add("zoo", help="named elements and subtree measures")
    a.add_argument("--name", required=True)
    a.add_argument("--p", type=int, default=2)
    a.add_argument("--n", type=int, default=4)

    for name in ("solvable-check", "abelian-check"):
        a = add(name, gens)
        a.add_argument("--p", type=int, default=2)
        a.add_argument("--n", type=int)

    a = add("acceptance", help="run acceptance criteria")
    a.add_argument("--criteria", type=int, nargs="*", choices=sorted(acceptance.CRITERIA))

    a = sub.add_parser("batch", help="run a JSON-lines file of configurations")
    a.add_argument("config")
    a.add_argument("--outdir")
    return parser


def _needs_depth(args) -> bool:
    return args.command in ("dimension", "slice", "kappa", "solvable-check", "abelian-check") \
        and getattr(args, "gens", None) is None


def _write(report: ExperimentReport, args) -> None:
    if args.format == "json":
        text = report.to_json(include_timing=args.timing) + "\n"
    else:
        rows = getattr(report, "csv_override", None) or report.csv_rows()
        text = _csv(rows)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.emit_plot_data:
        Path(args.emit_plot_data).write_text(
            _csv(report.plot_rows(), ["experiment", "series", "x", "y"]))


def _csv(rows: list[dict], fields: list[str] | None = None) -> str:
    buf = io.StringIO()
    fields = fields or (list(rows[0]) if rows else ["experiment", "key", "value", "stderr", "samples"])
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:   # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        if args.command == "batch":
            return cmd_batch(args)
        if _needs_depth(args) and args.n is None:
            args.n = 10 if args.p == 2 else 5
        start = time.perf_counter()
        report = COMMANDS[args.command](args)
        if not report.elapsed:
            report.elapsed = time.perf_counter() - start
        # echo the run configuration with defaults materialized
        run_config = {k: v for k, v in sorted(vars(args).items())}
        report.config = {**report.config, "run": run_config}
        _write(report, args)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (TreeGroupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception:   # noqa: BLE001 - reported as an internal error
        traceback.print_exc()
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
