"""Oracles, configs and the acceptance-line registry shared across test modules."""

from fractions import Fraction

import numpy as np

from mldetect.experiments import RunConfig

ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Register one pass/fail line for the acceptance summary."""
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    ACCEPTANCE_LINES.append(f"criterion {number:>2} {status}  {title}: {detail}")


def tiny_config(seed=0, **over):
    """A run small enough to finish in about a second."""
    settings = {
        "dataset.synth": {"n_categories": 3, "samples_per_category": 60, "overlap": 0.2, "dim": 4,
                          "grid_resolution": 20},
        "network.generator": "8-16-4",
        "network.critic": "4-16-1",
        "network.encoder": "4-16-8",
        "network.decoder": "8-4",
        "network.wgan_train": {"batch_size": 16, "epochs": 2},
        "network.pretrain_train": {"batch_size": 32, "epochs": 2},
        "network.finetune_train": {"batch_size": 32, "epochs": 3},
        "pipeline.per_category": 20,
    }
    settings.update(over)
    return RunConfig.desk(seed).replace(**settings)


def bitmask_oracle(predictions, truths):
    """Per-sample values from bitmask popcounts, summed left to right.

    Each per-sample ratio is a correctly rounded division of two integers, so
    any correct implementation with the same reduction order agrees bit for bit.
    """
    index = {lab: i for i, lab in enumerate(sorted(set().union(*predictions, *truths)))}

    def mask(s):
        return sum(1 << index[x] for x in s)

    n = len(truths)
    cols = {"exact": [], "sym": [], "jac": [], "p": [], "r": []}
    for h, y in zip(predictions, truths):
        a, b = mask(h), mask(y)
        common = bin(a & b).count("1")
        cols["exact"].append(float(a == b))
        cols["sym"].append(float(bin(a ^ b).count("1")))
        cols["jac"].append(common / bin(a | b).count("1"))
        cols["p"].append(common / bin(a).count("1"))
        cols["r"].append(common / bin(b).count("1"))
    tot = {k: 0.0 for k in cols}
    for k, vals in cols.items():
        for v in vals:
            tot[k] += v
    p, r = tot["p"] / n, tot["r"] / n
    # harmonic mean evaluated exactly, then rounded once
    f1 = float(Fraction(2) * Fraction(p) * Fraction(r) / (Fraction(p) + Fraction(r))) if p + r else 0.0
    return {"subsetacc": tot["exact"] / n, "hloss": tot["sym"] / n, "acc": tot["jac"] / n,
            "precision": p, "recall": r, "f1": f1}


def mlknn_tables_oracle(X, labels, k, s):
    """Loop-by-loop ML-KNN counting: neighbours by full sort, no vectorisation."""
    names = sorted(set().union(*labels))
    N = len(X)
    prior, cw, cwo = {}, {}, {}
    for lab in names:
        have = sum(lab in y for y in labels)
        prior[lab] = (s + have) / (2 * s + N)
        c_with = [0] * (k + 1)
        c_without = [0] * (k + 1)
        for i in range(N):
            dist = sorted((float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(N) if j != i)
            c = sum(lab in labels[j] for _, j in dist[:k])
            if lab in labels[i]:
                c_with[c] += 1
            else:
                c_without[c] += 1
        cw[lab] = [(s + c_with[c]) / (s * (k + 1) + sum(c_with)) for c in range(k + 1)]
        cwo[lab] = [(s + c_without[c]) / (s * (k + 1) + sum(c_without)) for c in range(k + 1)]
    return names, prior, cw, cwo
