"""Command-line entry point: ``abacpip <subcommand> ...``.

Exit codes: 0 on success, 2 for usage errors, the ``exit_code`` of the
raised error class for library failures (see ``errors.EXIT_CODES``),
19 for unreadable or unwritable files and 20 for invalid option values.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional

from . import datagen
from .core import DENY, AttributeCatalog, Exhaustive, Sampled, grant
from .encoding import STRATEGIES, EncoderConfig, extend_catalog
from .errors import AbacError, FormatError, InvalidClusterMap, MissingTruth
from .inference import (Pipeline, adapt_with_run, augment_policy, classify_log, fit_pipeline,
                        solve_abac_pip, write_run_report)
from .learners import LearnerKind, LearnerSpec, load_model, save_model
from .metrics import (ResultRow, compute_metrics, format_table, score, write_results_csv,
                      write_timings_csv)
from .policy_io import (read_additions, read_catalog, read_clusters, read_log, read_policy,
                        read_rows, write_additions, write_catalog, write_clusters, write_log,
                        write_policy)

log = logging.getLogger("abacpip")

EXIT_IO = 19
EXIT_INVALID = 20
LEARNERS = ("dt", "rf", "et", "gb")


# -- argument plumbing -------------------------------------------------------------

def _add_data(p, log_required=False, policy_required=True):
    p.add_argument("--policy", type=Path, required=policy_required, help="policy CSV")
    p.add_argument("--catalog", type=Path, required=policy_required, help="catalog CSV")
    p.add_argument("--additions", type=Path, help="new values, catalog CSV format")
    p.add_argument("--clusters", type=Path, help="cluster map CSV (needed for avc)")
    if log_required is not None:
        p.add_argument("--log", type=Path, required=log_required, help="request log CSV")


def _add_learning(p):
    p.add_argument("--learner", default="dt", help="dt, rf, et or gb")
    p.add_argument("--learner-config", type=Path, help="key = value learner options")
    p.add_argument("--strategy", default="arfe+avc", choices=STRATEGIES)
    p.add_argument("--neg-mode", default="sampled", choices=("sampled", "exhaustive"))
    p.add_argument("--neg-ratio", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abacpip",
                                 description="Infer ABAC decisions for new access requests.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--template", required=True,
                   help=f"one of {sorted(datagen.TEMPLATES)} or a key = value config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-scale", action="store_true",
                   help="University2 with its full training rule count")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("train", help="train a model on a policy")
    _add_data(p, log_required=None)
    _add_learning(p)
    p.add_argument("--model", type=Path, required=True, help="model file to write")

    for name, text in (("infer", "decide new requests and write a run report"),
                       ("augment", "decide new requests and append them to the policy")):
        p = sub.add_parser(name, help=text)
        _add_data(p, log_required=True)
        _add_learning(p)
        p.add_argument("--model", type=Path, help="pre-trained model (skips training)")
        p.add_argument("--out", type=Path, required=True,
                       help="run report CSV" if name == "infer" else "augmented policy CSV (catalog written beside it)")
        if name == "augment":
            p.add_argument("--report", type=Path, help="also write the run report")
        p.add_argument("--strict-metrics", action="store_true")

    p = sub.add_parser("adapt", help="build a target policy from a reference policy")
    p.add_argument("--policy", type=Path, required=True, help="reference policy CSV")
    p.add_argument("--catalog", type=Path, required=True, help="reference catalog CSV")
    p.add_argument("--additions", type=Path, help="target catalog additions CSV")
    p.add_argument("--clusters", type=Path)
    p.add_argument("--log", type=Path, required=True, help="target request log CSV")
    _add_learning(p)
    p.add_argument("--out", type=Path, required=True, help="target policy CSV")
    p.add_argument("--report", type=Path, help="also write the run report")
    p.add_argument("--strict-metrics", action="store_true")

    p = sub.add_parser("eval", help="score a run report against labelled requests")
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--additions", type=Path)
    p.add_argument("--log", type=Path, required=True, help="log with truth columns")
    p.add_argument("--report", type=Path, required=True, help="run report CSV")
    p.add_argument("--out", type=Path, help="metrics CSV")
    p.add_argument("--strict-metrics", action="store_true")

    p = sub.add_parser("bench", help="strategy x learner comparison table")
    p.add_argument("--template", help="synthesize this template instead of reading files")
    p.add_argument("--full-scale", action="store_true")
    _add_data(p, log_required=False, policy_required=False)
    p.add_argument("--learner", default="all", help="comma list or 'all'")
    p.add_argument("--learner-config", type=Path)
    p.add_argument("--strategy", default="all", help="comma list or 'all'")
    p.add_argument("--neg-mode", default="sampled", choices=("sampled", "exhaustive"))
    p.add_argument("--neg-ratio", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict-metrics", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--model", type=Path, help="directory for one model file per cell")
    return ap


# -- shared helpers --------------------------------------------------------------------

def _catalogs(args) -> tuple:
    catalog = read_catalog(args.catalog)
    additions = read_additions(args.additions) if args.additions else []
    return catalog, catalog.extend(additions)


def _clusters(args) -> dict:
    return read_clusters(args.clusters) if args.clusters else {}


def _config(strategy: str, clusters: dict) -> EncoderConfig:
    if "avc" in strategy and not clusters:
        raise InvalidClusterMap(f"strategy {strategy!r} needs --clusters")
    return EncoderConfig.from_strategy(strategy, clusters)


def _neg_mode(args):
    if args.neg_mode == "exhaustive":
        return Exhaustive()
    return Sampled(args.neg_ratio, seed=args.seed)


def _spec(args, learner: Optional[str] = None) -> LearnerSpec:
    if args.learner_config:
        spec = LearnerSpec.from_config(args.learner_config)
        if learner is not None and spec.kind is not LearnerKind.parse(learner):
            spec = LearnerSpec(LearnerKind.parse(learner), spec.max_depth,
                               spec.min_samples_split, spec.n_trees, spec.feature_subsample,
                               spec.learning_rate, spec.n_stages, args.seed)
        return spec if spec.seed is not None else spec.with_seed(args.seed)
    return LearnerSpec(LearnerKind.parse(learner or args.learner), seed=args.seed)


def _outcome(name: str):
    return DENY if name == "DENY" else grant(*name.split(";"))


def _loaded_pipeline(path: Path, catalog: AttributeCatalog, clusters: dict) -> Pipeline:
    model, encoder = load_model(path)
    if encoder is None:
        raise FormatError(f"{path}: model carries no encoder")
    enc_cat = encoder.catalog
    if enc_cat != catalog:
        if not enc_cat.is_prefix_of(catalog):
            raise AbacError("model catalog does not match the request catalog")
        encoder = extend_catalog(encoder, enc_cat.additions_to(catalog), clusters)
    classes = tuple(_outcome(n) for n in model.class_names)
    return Pipeline(model, encoder, classes, 0)


def _print_metrics(run, out=sys.stdout):
    if run.metrics is not None:
        r = run.metrics.formatted()
        c = run.metrics.counts
        print(f"tpa={c.tpa} tna={c.tna} fpa={c.fpa} fna={c.fna} "
              + " ".join(f"{k}={v}" for k, v in r.items()), file=out)


def _run(args, policy, catalog, ext):
    clusters = _clusters(args)
    log_ = read_log(args.log, ext)
    if args.model:
        pipeline = _loaded_pipeline(args.model, ext, clusters)
        return classify_log(policy, log_, pipeline, args.strict_metrics)
    return solve_abac_pip(policy, log_, _spec(args), _config(args.strategy, clusters),
                          _neg_mode(args), args.strict_metrics)


# -- subcommands -----------------------------------------------------------------------

def cmd_synth(args) -> int:
    if Path(args.template).is_file():
        tpl = datagen.template_from_config(args.template)
    else:
        tpl = datagen.get_template(args.template, seed=args.seed, full_scale=args.full_scale)
    ds = datagen.generate(tpl)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_catalog(ds.policy.catalog, out / "catalog.csv")
    write_additions(ds.additions, out / "additions.csv")
    write_clusters(tpl.clusters, out / "clusters.csv")
    write_policy(ds.policy, out / "policy.csv")
    write_log(ds.log, out / "log.csv")
    print(f"{tpl.name}: {len(ds.policy.rules)} rules, {len(ds.log)} requests -> {out}")
    return 0


def cmd_train(args) -> int:
    catalog, ext = _catalogs(args)
    policy = read_policy(args.policy, catalog)
    pipeline = fit_pipeline(policy, _spec(args), _config(args.strategy, _clusters(args)),
                            _neg_mode(args), ext)
    save_model(pipeline.model, args.model, pipeline.encoder)
    print(f"trained {pipeline.model.kind.label} on {pipeline.n_training_rows} rows "
          f"in {pipeline.train_seconds:.2f}s -> {args.model}")
    return 0


def cmd_infer(args) -> int:
    catalog, ext = _catalogs(args)
    policy = read_policy(args.policy, catalog)
    run = _run(args, policy, catalog, ext)
    write_run_report(run, args.out)
    print(f"{len(run.decisions)} decided, {len(run.skipped)} skipped -> {args.out}")
    _print_metrics(run)
    return 0


def cmd_augment(args) -> int:
    catalog, ext = _catalogs(args)
    policy = read_policy(args.policy, catalog)
    run = _run(args, policy, catalog, ext)
    augmented = augment_policy(policy, run)
    write_policy(augmented, args.out)
    # the augmented policy may use new values, so its catalog travels with it
    write_catalog(augmented.catalog, args.out.with_name(args.out.stem + "-catalog.csv"))
    if args.report:
        write_run_report(run, args.report)
    print(f"{len(policy.rules)} -> {len(augmented.rules)} rules -> {args.out}")
    _print_metrics(run)
    return 0


def cmd_adapt(args) -> int:
    reference_catalog = read_catalog(args.catalog)
    additions = read_additions(args.additions) if args.additions else []
    reference = read_policy(args.policy, reference_catalog)
    target_log = read_log(args.log, reference_catalog.extend(additions))
    clusters = _clusters(args)
    target, run = adapt_with_run(reference, target_log, additions, _spec(args),
                                 _config(args.strategy, clusters), _neg_mode(args),
                                 args.strict_metrics)
    write_policy(target, args.out)
    if args.report:
        write_run_report(run, args.report)
    print(f"target policy: {len(target.rules)} rules -> {args.out}")
    _print_metrics(run)
    return 0


def cmd_eval(args) -> int:
    _, ext = _catalogs(args)
    log_ = read_log(args.log, ext)
    truth = {q.request_id: q.truth for q in log_.requests}
    header, rows = read_rows(args.report)
    col = {h: i for i, h in enumerate(header)}
    for need in ("request-id", "verdict", "permissions"):
        if need not in col:
            raise FormatError(f"{args.report}: missing column {need!r}")
    pairs = []
    for row in rows:
        if not row or not row[col["verdict"]]:
            continue
        rid = row[col["request-id"]]
        if rid not in truth or truth[rid] is None:
            raise MissingTruth(f"no truth label for request {rid!r}")
        perms = row[col["permissions"]]
        pred = DENY if row[col["verdict"]] == "DENY" else grant(*perms.split(";"))
        pairs.append((pred, truth[rid]))
    report = compute_metrics(score(pairs, strict=args.strict_metrics))
    c = report.counts
    line = {"tpa": c.tpa, "tna": c.tna, "fpa": c.fpa, "fna": c.fna, **report.formatted()}
    print(" ".join(f"{k}={v}" for k, v in line.items()))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(line))
            w.writerow(list(line.values()))
    return 0


def _choices(text: str, allowed: tuple, what: str) -> list:
    if text == "all":
        return list(allowed)
    items = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in allowed]
    if bad:
        raise ValueError(f"unknown {what}: {bad}")
    return items


def run_bench(args) -> list:
    """Run every (strategy, learner) cell; returns the result rows."""
    if args.template:
        tpl = datagen.get_template(args.template, seed=args.seed, full_scale=args.full_scale)
        policy, log_ = datagen.synthesize(tpl)
        clusters, dataset = dict(tpl.clusters), tpl.name
    else:
        if not (args.policy and args.catalog and args.log):
            raise ValueError("bench needs --template or --policy, --catalog and --log")
        catalog, ext = _catalogs(args)
        policy, log_ = read_policy(args.policy, catalog), read_log(args.log, ext)
        clusters, dataset = _clusters(args), args.policy.stem
    strategies = _choices(args.strategy, STRATEGIES, "strategy")
    learners = _choices(args.learner, LEARNERS, "learner")
    if args.model:
        args.model.mkdir(parents=True, exist_ok=True)
    rows = []
    for strategy in strategies:
        config = _config(strategy, clusters)
        for learner in learners:
            run = solve_abac_pip(policy, log_, _spec(args, learner), config, _neg_mode(args),
                                 args.strict_metrics)
            if run.metrics is None:
                raise MissingTruth("bench needs truth labels for every decided request")
            rows.append(ResultRow(dataset, strategy, learner.upper(), run.metrics,
                                  run.pipeline.train_seconds, run.infer_seconds))
            log.info("%s %s %s f1=%s", dataset, strategy, learner,
                     run.metrics.formatted()["f1"])
            if args.model:
                save_model(run.model, args.model / f"{strategy}-{learner}.model",
                           run.pipeline.encoder)
    return rows


def cmd_bench(args) -> int:
    rows = run_bench(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(rows, out / "results.csv")
    table = format_table(rows)
    (out / "results.txt").write_text(table, encoding="utf-8")
    write_timings_csv(rows, out / "timings.csv")
    print(table)
    return 0


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "infer": cmd_infer, "augment": cmd_augment,
            "adapt": cmd_adapt, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AbacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
