"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 method failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baselines import SmoteConfig, mc_fit, mc_generate, smote_generate
from .bench import emit_report, get_scenario, make_scenario, run_comparison
from .generator import GenerationConfig, GenerationError, KernelBackend, generate_pool, load_pool, save_pool
from .metrics import MetricError, full_report
from .preprocess import TransformPipeline, fit_apply_pipeline
from .schema import (
    DataError,
    FeatureSchema,
    dedupe,
    infer_schema,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    scan_csv,
)
from .selection import SOURCE_COLUMN, SelectionConfig, mix, select, select_top_quantile

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_METHOD = 0, 1, 2, 3
GLOBAL_FLAGS = ("seed", "schema", "quiet", "config")

log = logging.getLogger("landsynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(doc, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _schema_for(args, path) -> FeatureSchema:
    if args.schema:
        return load_schema(args.schema)
    inferred = infer_schema(path)
    return FeatureSchema(tuple(f for f in inferred if not f.name.startswith("__")))


def _parse_value(schema: FeatureSchema, name: str, text: str):
    spec = schema[name]
    if spec.is_numeric:
        try:
            return float(text)
        except ValueError:
            raise DataError(f"--condition {name}: {text!r} is not a number") from None
    return text


def _parse_kv(items, what: str) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{what} expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _parse_step(text: str) -> dict:
    """``kind[:column][:key=value,...]``, e.g. ``winsorize:slope:q_lo=0.05,q_hi=0.95``."""
    parts = text.split(":")
    step = {"kind": parts[0]}
    if len(parts) > 1 and parts[1]:
        step["column"] = parts[1]
    if len(parts) > 2 and parts[2]:
        for kv in parts[2].split(","):
            k, v = kv.split("=", 1)
            try:
                step[k] = int(v)
            except ValueError:
                try:
                    step[k] = float(v)
                except ValueError:
                    step[k] = v
    return step


# -- commands --------------------------------------------------------------

def cmd_ingest(args) -> int:
    schema = _schema_for(args, args.input)
    report = scan_csv(args.input, schema)
    if args.report:
        _write_json(report.to_dict(), Path(args.report))
    elif not args.quiet:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.schema_out:
        save_schema(schema, args.schema_out)
    if report.type_violations:
        log.error("%d type violations found", len(report.type_violations))
        return EXIT_DATA
    if args.out:
        inv = load_csv(args.input, schema)
        if args.dedupe:
            inv = dedupe(inv)
        save_csv(inv, args.out)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    schema = _schema_for(args, args.input)
    inv = load_csv(args.input, schema)
    if args.apply:
        pipeline = TransformPipeline.load(args.apply)
        out = pipeline.apply(inv)
    else:
        steps = []
        if args.steps:
            steps = json.loads(Path(args.steps).read_text(encoding="utf-8"))
        steps += [_parse_step(s) for s in args.step or []]
        out, pipeline = fit_apply_pipeline(inv, steps)
        if args.pipeline:
            pipeline.save(args.pipeline)
    if args.out:
        save_csv(out, args.out)
        save_schema(out.schema, args.schema_out or Path(args.out).with_suffix(".schema.json"))
    if not args.quiet:
        print(f"{len(pipeline.steps)} steps, {out.n_rows} rows, {out.d} columns")
    return EXIT_OK


def cmd_generate(args) -> int:
    schema = _schema_for(args, args.train)
    train = load_csv(args.train, schema)
    cond = {k: _parse_value(schema, k, v) for k, v in _parse_kv(args.condition, "--condition").items()}
    config = GenerationConfig(args.N, args.T, args.M, cond, args.seed)
    model = KernelBackend.fit(train, args.lambda_cat)
    pool = generate_pool(model, schema, config, workers=args.workers)
    save_pool(pool, schema, args.out, {"config": config.to_dict(), "lambda_cat": args.lambda_cat,
                                       "train_fingerprint": train.fingerprint()})
    if not args.quiet:
        print(f"wrote {len(pool)} candidates to {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    schema, pool = load_pool(args.pool, load_schema(args.schema) if args.schema else None)
    if args.tau is not None:
        accepted = select(pool, args.tau)
        rule = {"rule": "threshold", "tau": args.tau}
    else:
        q = 0.5 if args.top_q is None else args.top_q
        accepted = select_top_quantile(pool, q) if pool else []
        rule = {"rule": "top_quantile", "q": q}
    save_pool(accepted, schema, args.out, {"selection": rule, "pool_size": len(pool)})
    if not args.quiet:
        print(f"accepted {len(accepted)} of {len(pool)} candidates")
    return EXIT_OK


def cmd_mix(args) -> int:
    schema = _schema_for(args, args.observed)
    observed = load_csv(args.observed, schema)
    _, accepted = load_pool(args.accepted, schema)
    corpus = mix(observed, accepted, args.alpha, args.seed, args.subsample)
    out = corpus.with_source_column()
    save_csv(out, args.out)
    _write_json(corpus.metadata(), Path(args.out).with_suffix(".meta.json"))
    if not args.quiet:
        print(f"{corpus.n_observed} observed + {corpus.n_synthetic} synthetic rows "
              f"(alpha={corpus.realized_alpha:.4f}); provenance in {SOURCE_COLUMN}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    schema = _schema_for(args, args.train)
    train = load_csv(args.train, schema)
    if args.method == "mc":
        out = mc_generate(mc_fit(train), args.n, args.seed)
    else:
        out = smote_generate(train, SmoteConfig(args.k, args.n, args.seed))
    save_csv(out, args.out)
    if not args.quiet:
        print(f"wrote {out.n_rows} {args.method} rows to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    schema = _schema_for(args, args.orig)
    orig = load_csv(args.orig, schema, ignore_prefix="__")
    gen = load_csv(args.gen, schema, ignore_prefix="__")
    report = full_report(orig, gen, label=args.label, seed=args.seed)
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("feature,metric,value\n")
            for feat, metric, val in report.flat_rows():
                fh.write(f"{feat},{metric},{format(val, '.17g')}\n")
    if not args.quiet:
        for k in sorted(report.aggregates):
            print(f"{k:>22s}  {report.aggregates[k]:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    overrides = {"truth_seed": args.seed}
    if args.n_train:
        overrides["n_train"] = args.n_train
    if args.n_truth:
        overrides["n_truth"] = args.n_truth
    scn = get_scenario(args.scenario, **overrides)
    train, truth = make_scenario(scn)
    external = {name: load_csv(p, truth.schema, ignore_prefix="__")
                for name, p in _parse_kv(args.external, "--external").items()}
    methods = [m for m in args.methods.split(",") if m]
    gen = GenerationConfig(args.N, args.T, args.M, {}, args.seed)
    sel = SelectionConfig(tau=args.tau, top_q=None if args.tau is not None else args.top_q)
    result = run_comparison(train, truth, methods, gen, sel, args.seed, n_synthetic=args.n_synthetic,
                            smote_k=args.smote_k, external=external, lambda_cat=args.lambda_cat,
                            preprocess=[] if args.no_preprocess else "auto", workers=args.workers,
                            scenario=scn.name)
    emit_report(result, args.out)
    if not args.quiet:
        for m, rep in result.reports.items():
            a = rep.aggregates
            print(f"{m:>12s}  mean KS {a.get('mean_ks_stat', float('nan')):.4f}  "
                  f"mean |dPearson| {a.get('mean_pearson_delta', float('nan')):.4f}")
    for m, err in result.errors.items():
        log.error("method %s failed: %s", m, err)
    return EXIT_METHOD if result.errors else EXIT_OK


# -- parser ----------------------------------------------------------------

def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags with suppressed defaults so a value
    # given before the subcommand is not reset.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(0))
    common.add_argument("--schema", default=d(None), help="JSON schema sidecar (inferred from the CSV when omitted)")
    common.add_argument("--quiet", action="store_true", default=d(False))
    common.add_argument("--config", default=d(None), help="JSON file of option defaults; explicit flags win")
    return common


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="landsynth", description=__doc__.splitlines()[0], parents=[_common_flags(False)])
    common = _common_flags(True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="validate a CSV inventory")
    s.add_argument("--input", required=True)
    s.add_argument("--out")
    s.add_argument("--schema-out")
    s.add_argument("--report")
    s.add_argument("--dedupe", action="store_true", help="drop duplicate rows when writing --out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("preprocess", parents=[common], help="fit/apply preprocessing steps")
    s.add_argument("--input", required=True)
    s.add_argument("--steps", help="JSON list of step requests")
    s.add_argument("--step", action="append", help="kind[:column][:key=value,...]; repeatable")
    s.add_argument("--pipeline", help="write the fitted pipeline JSON here")
    s.add_argument("--apply", help="apply a previously fitted pipeline JSON instead of fitting")
    s.add_argument("--out")
    s.add_argument("--schema-out")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("generate", parents=[common], help="generate a scored candidate pool")
    s.add_argument("--train", required=True)
    s.add_argument("-N", type=int, default=500)
    s.add_argument("-T", type=float, default=1.0)
    s.add_argument("-M", type=int, default=8)
    s.add_argument("--condition", action="append", help="NAME=VALUE; repeatable")
    s.add_argument("--lambda-cat", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", parents=[common], help="filter a pool by plausibility")
    s.add_argument("--pool", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float)
    g.add_argument("--top-q", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("mix", parents=[common], help="merge accepted rows with observations")
    s.add_argument("--observed", required=True)
    s.add_argument("--accepted", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--subsample", choices=("rank", "random"), default="rank")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mix)

    s = sub.add_parser("baseline", parents=[common], help="Monte Carlo or SMOTE baseline rows")
    s.add_argument("method", choices=("mc", "smote"))
    s.add_argument("--train", required=True)
    s.add_argument("-n", type=int, default=500)
    s.add_argument("-k", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("evaluate", parents=[common], help="metric report of generated vs original")
    s.add_argument("--orig", required=True)
    s.add_argument("--gen", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", help="also write a flat feature,metric,value table")
    s.add_argument("--label", default="")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench", parents=[common], help="compare methods on a known-truth scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--methods", default="proposed,mc,smote")
    s.add_argument("--external", action="append", help="NAME=path.csv of externally generated rows")
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-truth", type=int)
    s.add_argument("--n-synthetic", type=int)
    s.add_argument("-N", type=int, default=2000)
    s.add_argument("-T", type=float, default=1.0)
    s.add_argument("-M", type=int, default=4)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float)
    g.add_argument("--top-q", type=float, default=0.5)
    s.add_argument("--smote-k", type=int, default=5)
    s.add_argument("--lambda-cat", type=float, default=0.1)
    s.add_argument("--no-preprocess", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str], args) -> argparse.Namespace:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**defaults)
    # global flags stay off the subparsers, whose values would mask one given before the subcommand
    local = {k: v for k, v in defaults.items() if k not in GLOBAL_FLAGS}
    for action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse has no public hook
        for sp in action.choices.values():
            sp.set_defaults(**local)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"landsynth: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"landsynth: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MetricError, OSError, json.JSONDecodeError) as exc:
        print(f"landsynth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GenerationError as exc:
        print(f"landsynth: method failure: {exc}", file=sys.stderr)
        return EXIT_METHOD


if __name__ == "__main__":
    sys.exit(main())
