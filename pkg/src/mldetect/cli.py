"""``mldetect`` command line: analyze, synth, augment, pretrain, run, baseline, compare.

Exit codes: 0 success, 1 usage, 2 data, 3 training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import SCHEMAS, UNSW_CATEGORICAL, encode_features, load_csv_corpus, multilabelize, overlap_report, write_raw_csv
from .errors import MldError, UsageError
from .experiments import (
    DatasetConfig,
    RunConfig,
    compare_reports,
    load_report,
    render_table,
    run_augment,
    run_baseline,
    run_mld,
    run_pretrain,
    synth_spec_from,
)
from .synth import synth_generate

log = logging.getLogger("mldetect")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_config(args):
    cfg = RunConfig.from_yaml(args.config) if args.config else RunConfig.desk()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "folds", None) is not None:
        over["pipeline.folds"] = args.folds
    if getattr(args, "out", None) is not None:
        over["out"] = args.out
    return cfg.replace(**over) if over else cfg


def _emit(obj, path):
    text = json.dumps(obj, indent=2)
    if path is None:
        print(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        print(f"wrote {path}", file=sys.stderr)


def cmd_analyze(args):
    raw = load_csv_corpus(args.input, args.schema)
    cats = args.categorical
    if cats is None:
        cats = list(UNSW_CATEGORICAL) if args.schema == "unsw-nb15" else []
    if cats or not raw.is_numeric:
        raw = encode_features(raw, cats)
    ml = multilabelize(raw)
    report = overlap_report(ml, args.top_k).to_dict()
    report["source_rows"] = len(raw)
    report["unique_samples"] = len(ml)
    _emit(report, args.out)
    return 0


def cmd_synth(args):
    cfg = _load_config(args)
    spec = synth_spec_from(cfg.dataset if cfg.dataset.kind == "synth" else DatasetConfig(), cfg.seed)
    raw = synth_generate(spec)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raw_csv(raw, out / "corpus.csv")
    truth = raw.metadata["ground_truth"]
    (out / "ground_truth.json").write_text(json.dumps({"spec": spec.to_dict(), "truth": truth.to_dict()}, indent=2))
    print(f"wrote {len(raw)} rows to {out / 'corpus.csv'}", file=sys.stderr)
    return 0


def cmd_augment(args):
    cfg = _load_config(args)
    summary = run_augment(cfg, cfg.out)
    print(json.dumps({k: summary[k] for k in ("n_real", "n_generated", "dataset_digest")}, indent=2))
    return 0


def cmd_pretrain(args):
    cfg = _load_config(args)
    summary = run_pretrain(cfg, cfg.out)
    print(json.dumps({k: v for k, v in summary.items() if k != "loss_history"}, indent=2))
    return 0


def cmd_run(args):
    cfg = _load_config(args)
    report = run_mld(cfg, cfg.out)
    print(json.dumps({"report": str(Path(cfg.out) / "report.json"), "summary": report["summary"]["mean"]}, indent=2))
    return 0


def cmd_baseline(args):
    cfg = _load_config(args)
    over = {}
    if args.strategy is not None:
        over["baseline.strategy"] = args.strategy
        over["baseline.learner"] = args.learner
    elif args.learner is not None:
        over["baseline.learner"] = args.learner
    cfg = cfg.replace(**over) if over else cfg
    report = run_baseline(cfg, cfg.out)
    print(json.dumps({"report": str(Path(cfg.out) / "report.json"), "summary": report["summary"]["mean"]}, indent=2))
    return 0


def cmd_compare(args):
    table = compare_reports([load_report(p) for p in args.reports])
    text = render_table(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".json").write_text(json.dumps(table, indent=2))
        out.with_suffix(".txt").write_text(text)
    print(text, end="")
    return 0


def build_parser():
    p = _Parser(prog="mldetect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analyze", help="overlap statistics of a raw corpus")
    a.add_argument("--input", nargs="+", required=True)
    a.add_argument("--schema", choices=SCHEMAS, default="unsw-nb15")
    a.add_argument("--top-k", type=int, default=5)
    a.add_argument("--categorical", nargs="*", default=None, help="columns to ordinal-encode")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    def with_config(sp, folds=False):
        sp.add_argument("--config", help="YAML run config (default: desk preset)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        if folds:
            sp.add_argument("--folds", type=int)
        return sp

    with_config(sub.add_parser("synth", help="write a synthetic corpus and its ground truth")).set_defaults(func=cmd_synth)
    s = with_config(sub.add_parser("augment", help="train per-category generators, write the augmented pool"))
    s.set_defaults(func=cmd_augment)
    with_config(sub.add_parser("pretrain", help="pre-train the autoencoder")).set_defaults(func=cmd_pretrain)
    with_config(sub.add_parser("run", help="full pipeline with evaluation"), folds=True).set_defaults(func=cmd_run)
    b = with_config(sub.add_parser("baseline", help="fit and evaluate a comparison method"), folds=True)
    b.add_argument("--strategy")
    b.add_argument("--learner")
    b.set_defaults(func=cmd_baseline)

    c = sub.add_parser("compare", help="tabulate reports of the same corpus")
    c.add_argument("reports", nargs="+")
    c.add_argument("--out", help="path stem for the .json and .txt tables")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MldError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
