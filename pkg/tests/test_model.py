import json

import numpy as np
import pytest
import torch

from mldetect.data import MultiLabelDataset, apply_scaler, fit_scaler, multilabelize
from mldetect.errors import ArgumentError, ContractViolation, DataError, ShapeError, UnknownClassError
from mldetect.labels import fit_codec
from mldetect.model import (
    AeSpec,
    MldClassifier,
    bce_floor,
    build_and_finetune,
    detect_report,
    epochs_to_threshold,
    predict,
    pretrain_ae,
)
from mldetect.nn import MlpSpec, ModelParams, TrainConfig, init_mlp
from mldetect.synth import separable_spec, synth_generate
from mldetect.wgan import AugmentedDataset

F64 = torch.float64


def dataset(X, labels):
    X = np.asarray(X, dtype=float)
    vocab = sorted(set().union(*labels))
    return MultiLabelDataset(X, [frozenset(y) for y in labels], [{lab: 1 for lab in y} for y in labels],
                             tuple(vocab), tuple(f"f{j}" for j in range(X.shape[1])))


def test_unbalanced_parameter_counts():
    spec = AeSpec.unsw()
    # 42*512 + 512*256 + 256*128 + 128*64
    assert spec.encoder.n_weights == 21_504 + 131_072 + 32_768 + 8_192 == 193_536
    assert spec.decoder.n_weights == 64 * 42 == 2_688
    assert spec.encoder.n_params > spec.decoder.n_params


@pytest.mark.parametrize("enc,dec", [("8-4", "3-8"), ("8-4", "4-7"), ("8-2", "2-16-8")])
def test_ae_spec_validation(enc, dec):
    with pytest.raises(ArgumentError):
        AeSpec.from_widths(enc, dec)


def test_zero_epochs_returns_initialization():
    spec = AeSpec.from_widths("4-8-2", "2-4")
    X = np.random.default_rng(0).uniform(size=(10, 4))
    ck = pretrain_ae(X, spec, TrainConfig(epochs=0, seed=5))
    assert ck.params.equal(init_mlp(spec.encoder, 5))
    assert ck.extra["history"] == []


def test_constant_rows_reach_bce_floor():
    row = np.array([0.2, 0.9, 0.5, 1.0])
    X = np.tile(row, (64, 1))
    # closed form: min over q of -(r log q + (1 - r) log(1 - q)) is at q = r
    floor = float(np.mean([-(r * np.log(r) + (1 - r) * np.log(1 - r)) if 0 < r < 1 else 0.0 for r in row]))
    assert bce_floor(row) == pytest.approx(floor)
    ck = pretrain_ae(X, AeSpec.from_widths("4-16-3", "3-4"), TrainConfig(epochs=200, batch_size=16, seed=0))
    losses = [h["loss"] for h in ck.extra["history"]]
    assert losses[-1] - floor < 0.01
    assert losses[-1] < losses[0]


def test_out_of_range_feature_named():
    X = np.full((3, 4), 0.5)
    X[2, 1] = 1.5
    with pytest.raises(DataError, match="row 2, column 1"):
        pretrain_ae(X, AeSpec.from_widths("4-8-2", "2-4"), TrainConfig(epochs=1))


def _codec_of(n):
    return fit_codec([{f"L{i:03d}"} for i in range(n)])


@pytest.mark.parametrize("ae,n,width", [(AeSpec.unsw(), 57, 64), (AeSpec.andmal(), 145, 128)])
def test_head_widths(ae, n, width):
    codec = _codec_of(n)
    d = ae.encoder.in_dim
    train = dataset(np.random.default_rng(0).uniform(size=(n, d)), [codec.decode(i) for i in range(n)])
    m = build_and_finetune(None, train, codec, TrainConfig(epochs=0), encoder_spec=ae.encoder)
    assert m.head.spec.layer_widths == (width, n)
    assert m.head.spec.output_activation == "softmax"


def test_fine_tuning_rejects_generated_rows():
    codec = _codec_of(2)
    spec = MlpSpec.parse("3-4")
    aug = AugmentedDataset(np.zeros((2, 3)), np.array(["real", "generated"]), [None, "L000"])
    with pytest.raises(ContractViolation):
        build_and_finetune(None, aug, codec, TrainConfig(epochs=1), encoder_spec=spec)
    d = dataset(np.zeros((2, 3)), [{"L000"}, {"L001"}])
    d.metadata["provenance"] = ["real", "generated"]
    with pytest.raises(ContractViolation):
        build_and_finetune(None, d, codec, TrainConfig(epochs=1), encoder_spec=spec)


def test_unregistered_label_set():
    d = dataset(np.zeros((2, 3)), [{"L000"}, {"L000", "L001"}])
    with pytest.raises(UnknownClassError):
        build_and_finetune(None, d, _codec_of(2), TrainConfig(epochs=1), encoder_spec=MlpSpec.parse("3-4"))


def test_missing_encoder_spec():
    d = dataset(np.zeros((2, 3)), [{"L000"}, {"L001"}])
    with pytest.raises(ArgumentError):
        build_and_finetune(None, d, _codec_of(2), TrainConfig(epochs=1))


def _model_with_head_bias(bias, n_in=3, hidden=4):
    codec = _codec_of(len(bias))
    enc = init_mlp(MlpSpec((n_in, hidden)), 0)
    head = ModelParams(MlpSpec((hidden, len(bias)), "softmax"),
                       [torch.zeros(hidden, len(bias), dtype=F64)], [torch.as_tensor(np.asarray(bias, float))], 0)
    return MldClassifier(enc, head, codec)


def test_forced_class():
    m = _model_with_head_bias([0, 0, 0, 9.0, 0])
    X = np.random.default_rng(0).normal(size=(20, 3))
    assert predict(m, X) == [m.codec.decode(3)] * 20


def test_ties_go_to_lowest_id():
    m = _model_with_head_bias([0.0] * 4)
    assert predict(m, np.ones((3, 3))) == [m.codec.decode(0)] * 3


def test_softmax_rows_and_shape_check():
    m = _model_with_head_bias([0.1, -2.0, 3.0])
    P = m.probabilities(np.random.default_rng(1).normal(size=(7, 3)))
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-6)
    with pytest.raises(ShapeError):
        predict(m, np.zeros((2, 5)))


def test_detect_report_counts():
    codec = fit_codec([{"DoS", "Fuzzers"}, {"Normal"}])
    enc = init_mlp(MlpSpec((2, 3)), 0)
    head = ModelParams(MlpSpec((3, 2), "softmax"), [torch.zeros(3, 2, dtype=F64)],
                       [torch.tensor([5.0, 0.0], dtype=F64)], 0)
    m = MldClassifier(enc, head, codec)
    r = detect_report(m, np.zeros((1, 2)))
    assert r["label_counts"] == {"DoS": 1, "Fuzzers": 1}
    assert r["set_counts"] == {"DoS;Fuzzers": 1}
    empty = detect_report(m, np.zeros((0, 2)))
    assert empty["n"] == 0 and empty["set_counts"] == {} and empty["label_counts"] == {}
    many = detect_report(m, np.random.default_rng(0).uniform(size=(13, 2)))
    assert sum(many["set_counts"].values()) == many["n"] == 13


@pytest.fixture(scope="module")
def tiny_run():
    ml = multilabelize(synth_generate(separable_spec(seed=1, n_categories=3, samples_per_category=60, dim=4)))
    ml = apply_scaler(fit_scaler(ml), ml)
    codec = fit_codec(ml.labels)
    spec = AeSpec.from_widths("4-16-8", "8-4")
    ck = pretrain_ae(ml, spec, TrainConfig(epochs=5, batch_size=32, seed=0))
    return ml, codec, spec, ck


def test_reproducible_predictions(tiny_run):
    ml, codec, spec, ck = tiny_run
    cfg = TrainConfig(epochs=5, batch_size=32, seed=3)
    a = build_and_finetune(ck, ml, codec, cfg)
    b = build_and_finetune(ck, ml, codec, cfg)
    assert predict(a, ml.features) == predict(b, ml.features)
    assert a.pretrained_from == ck.content_digest
    assert all(0 <= h["subsetacc_train"] <= 1 for h in a.history)


def test_weighting_options(tiny_run):
    ml, codec, spec, ck = tiny_run
    build_and_finetune(ck, ml, codec, TrainConfig(epochs=1), weighting="multiplicity")
    with pytest.raises(ArgumentError):
        build_and_finetune(ck, ml, codec, TrainConfig(epochs=1), weighting="sqrt")


def test_bundle_round_trip_and_digest_checks(tmp_path, tiny_run):
    ml, codec, spec, ck = tiny_run
    m = build_and_finetune(ck, ml, codec, TrainConfig(epochs=2, batch_size=32))
    m.save(tmp_path / "b", pretrained=ck)
    back = MldClassifier.load(tmp_path / "b")
    assert predict(back, ml.features) == predict(m, ml.features)
    assert back.pretrained_from == ck.content_digest

    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    manifest["pretrained_from"] = "0" * 64
    (tmp_path / "b" / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ContractViolation):
        MldClassifier.load(tmp_path / "b")
    manifest["head_digest"] = "0" * 64
    (tmp_path / "b" / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ContractViolation):
        MldClassifier.load(tmp_path / "b")


def test_epochs_to_threshold():
    hist = [{"epoch": 1, "subsetacc_train": 0.5}, {"epoch": 2, "subsetacc_train": 0.9}]
    assert epochs_to_threshold(hist, 0.84) == 2
    assert epochs_to_threshold(hist, 0.95) is None


@pytest.fixture(scope="module")
def separable_convergence():
    rows = []
    for seed in range(5):
        ml = multilabelize(synth_generate(separable_spec(seed=seed)))
        ml = apply_scaler(fit_scaler(ml), ml)
        codec = fit_codec(ml.labels)
        spec = AeSpec.from_widths("8-128-64-32", "32-8")
        ck = pretrain_ae(ml, spec, TrainConfig(batch_size=64, epochs=150, seed=seed))
        ft = TrainConfig(batch_size=256, epochs=80, seed=seed)
        with_pre = build_and_finetune(ck, ml, codec, ft)
        without = build_and_finetune(None, ml, codec, ft, encoder_spec=spec.encoder)
        rows.append((epochs_to_threshold(with_pre.history, 0.84), epochs_to_threshold(without.history, 0.84)))
    return rows


@pytest.mark.slow
def test_pretraining_reaches_threshold_sooner_on_median(separable_convergence):
    pre = [a for a, _ in separable_convergence]
    raw = [b for _, b in separable_convergence]
    assert None not in pre and None not in raw
    assert np.median(pre) <= np.median(raw)


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="single seeds can lose by an epoch on an easy corpus")
def test_pretraining_reaches_threshold_sooner_every_seed(separable_convergence):
    assert all(a <= b for a, b in separable_convergence)
