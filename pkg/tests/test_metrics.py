import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import bitmask_oracle
from mldetect.errors import ArgumentError
from mldetect.metrics import METRIC_FIELDS, MetricsReport, evaluate, lcard, ldiv

LABELS = [f"L{i}" for i in range(15)]


def random_pairs(n, seed, n_labels=15):
    rnd = random.Random(seed)
    labs = LABELS[:n_labels]

    def draw():
        return frozenset(rnd.sample(labs, rnd.randint(1, min(4, n_labels))))

    return [draw() for _ in range(n)], [draw() for _ in range(n)]


def test_perfect_prediction():
    y = [{"A"}, {"A", "B"}]
    r = evaluate(y, y)
    assert (r.subsetacc, r.acc, r.precision, r.recall, r.f1, r.hloss) == (1.0, 1.0, 1.0, 1.0, 1.0, 0.0)


def test_hand_example():
    r = evaluate([{"A"}, {"B", "C"}], [{"A", "B"}, {"B", "C"}])
    assert r.subsetacc == 0.5 and r.hloss == 0.5 and r.acc == 0.75
    assert r.precision == 1.0 and r.recall == 0.75
    assert r.f1 == pytest.approx(2 * 1 * 0.75 / 1.75)


def test_brute_force_oracle_on_1000_pairs():
    preds, truths = random_pairs(1000, seed=2024)
    r = evaluate(preds, truths).to_dict()
    oracle = bitmask_oracle(preds, truths)
    for f in METRIC_FIELDS:
        assert r[f] == oracle[f], f


def test_f1_stays_inside_p_r_interval():
    # 2PR/(P+R) in floating point gives 0.4000000000000001 here
    r = evaluate([frozenset("abcde")], [frozenset("abxyz")])
    assert r.precision == r.recall == r.f1 == 0.4


def test_published_f1_follows_from_aggregated_p_and_r():
    # reported P = 80.03, R = 80.09 and F1 = 80.06 for the augmented model
    p, r = 0.8003, 0.8009
    assert round(100 * 2 * p * r / (p + r), 2) == 80.06


pair_lists = st.integers(1, 30).flatmap(lambda n: st.tuples(
    st.lists(st.frozensets(st.sampled_from(LABELS), min_size=1, max_size=5), min_size=n, max_size=n),
    st.lists(st.frozensets(st.sampled_from(LABELS), min_size=1, max_size=5), min_size=n, max_size=n),
))


@given(pair_lists)
def test_ordering_chain(pairs):
    r = evaluate(*pairs)
    assert r.subsetacc <= r.acc <= min(r.precision, r.recall) <= r.f1 <= max(r.precision, r.recall)


@given(pair_lists)
def test_hloss_bounds_and_zero_iff_exact(pairs):
    r = evaluate(*pairs)
    assert 0 <= r.hloss <= len(LABELS)
    assert (r.hloss == 0) == (r.subsetacc == 1)


@given(pair_lists, st.randoms())
def test_permutation_invariance(pairs, rnd):
    preds, truths = pairs
    order = list(range(len(preds)))
    rnd.shuffle(order)
    a = evaluate(preds, truths)
    b = evaluate([preds[i] for i in order], [truths[i] for i in order])
    for f in METRIC_FIELDS:
        assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-12)


def test_errors():
    with pytest.raises(ArgumentError):
        evaluate([{"A"}], [{"A"}, {"B"}])
    with pytest.raises(ArgumentError):
        evaluate([set()], [{"A"}])
    with pytest.raises(ArgumentError):
        evaluate([{"A"}], [set()])
    with pytest.raises(ArgumentError):
        evaluate([], [])


def test_report_json_fields():
    d = evaluate([{"A"}], [{"A"}]).to_dict()
    assert set(d) == set(METRIC_FIELDS) | {"n"}
    assert MetricsReport.from_dict(d).to_dict() == d


def test_lcard_ldiv():
    assert lcard([{"A"}, {"B"}]) == 1.0
    assert ldiv([{"A"}, {"A"}, {"A", "B"}]) == 2
    assert lcard([{"A"}, {"A"}, {"A", "B"}]) == pytest.approx(4 / 3)
    with pytest.raises(ArgumentError):
        lcard([])
    with pytest.raises(ArgumentError):
        ldiv([])
