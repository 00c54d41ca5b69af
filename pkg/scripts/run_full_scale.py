"""Full-scale runs on the real corpora (needs the downloaded CSV files).

    python scripts/run_full_scale.py unsw --train UNSW_NB15_training-set.csv --test UNSW_NB15_testing-set.csv
    python scripts/run_full_scale.py andmal --files andmal/*.csv
"""

import argparse
import logging
from pathlib import Path

from mldetect.experiments import RunConfig, compare_reports, render_table, run_baseline, run_mld


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("corpus", choices=["unsw", "andmal"])
    ap.add_argument("--train", nargs="*", default=[])
    ap.add_argument("--test", nargs="*", default=[])
    ap.add_argument("--files", nargs="*", default=[])
    ap.add_argument("--generated-total", type=int, default=300_000,
                    help="total generated rows (30000 gives the per-category reading)")
    ap.add_argument("--folds", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    ap.add_argument("--skip-baselines", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    if args.corpus == "unsw":
        cfg = RunConfig.unsw(args.train, args.test, args.generated_total, args.seed)
    else:
        cfg = RunConfig.andmal(args.files, args.generated_total, args.seed)
    out = Path(args.out or cfg.out)
    cfg = cfg.replace(**{"pipeline.folds": args.folds, "out": str(out)})
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_yaml(out / "config.yaml")
    reports = [run_mld(cfg, out / "mld")]
    if not args.skip_baselines:
        reports.append(run_baseline(cfg.replace(**{"baseline.strategy": "mlknn"}), out / "baseline-mlknn"))
        reports.append(run_baseline(cfg.replace(**{"baseline.strategy": "cc", "baseline.learner": "random-forest"}),
                                    out / "baseline-cc-rf"))
        table = compare_reports(reports)
        (out / "compare.txt").write_text(render_table(table))
        print(render_table(table))
    else:
        print(reports[0]["summary"]["mean"])


if __name__ == "__main__":
    main()
