"""Desk-scale end-to-end run: MLD pipeline plus every baseline on one synthetic corpus,
then a comparison table.

    python scripts/run_desk_pipeline.py --seed 0 --out runs/desk
"""

import argparse
import logging
from pathlib import Path

from mldetect.experiments import RunConfig, compare_reports, render_table, run_baseline, run_mld

BASELINES = [("mlknn", None)] + [(s, "decision-tree") for s in ("br", "clr", "cc")] + [("cc", "random-forest")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--folds", type=int, default=0)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    out = Path(args.out)
    cfg = RunConfig.desk(args.seed).replace(**{"pipeline.folds": args.folds, "out": str(out)})
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_yaml(out / "config.yaml")
    reports = [run_mld(cfg, out / "mld")]
    bayes = reports[0]["folds"][0].get("bayes_subsetacc", {})
    for strategy, learner in BASELINES:
        b = cfg.replace(**{"baseline.strategy": strategy, "baseline.learner": learner})
        name = strategy if learner is None else f"{strategy}-{learner}"
        reports.append(run_baseline(b, out / f"baseline-{name}"))
    table = compare_reports(reports)
    text = render_table(table)
    (out / "compare.txt").write_text(text)
    print(text)
    if bayes:
        print(f"Bayes-optimal Subsetacc reference: {bayes}")


if __name__ == "__main__":
    main()
