import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from mldetect.data import multilabelize
from mldetect.errors import ArgumentError, DataError, ShapeError
from mldetect.nn import Checkpoint, MlpSpec, ModelParams, TrainConfig, forward, init_mlp
from mldetect.synth import SynthSpec, synth_generate
from mldetect.wgan import (
    CategoryGenerator,
    WganConfig,
    build_augmented,
    critic_loss,
    critic_scores,
    generate,
    generator_loss,
    gradient_penalty,
    full_scale_per_category,
    train_category_wgan,
    train_generators,
    wgan_gp_loss,
    write_generated_pool,
)

F64 = torch.float64


def linear_critic(w, bias=0.0):
    w = torch.as_tensor(np.asarray(w, dtype=float)).reshape(-1, 1)
    return ModelParams(MlpSpec((w.shape[0], 1)), [w], [torch.full((1,), float(bias), dtype=F64)], 0)


def rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return float((np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)).max())


@pytest.mark.parametrize("norm,expected", [(1.0, 0.0), (2.0, 1.0)])
def test_penalty_for_linear_critics(norm, expected):
    rng = np.random.default_rng(0)
    w = rng.normal(size=5)
    critic = linear_critic(norm * w / np.linalg.norm(w))
    gp = gradient_penalty(critic, rng.uniform(size=(9, 5)), rng.uniform(size=(9, 5)), seed=3)
    assert abs(float(gp) - expected) < 1e-6


def test_penalty_shape_mismatch():
    with pytest.raises(ShapeError):
        gradient_penalty(linear_critic([1, 0]), np.zeros((3, 2)), np.zeros((4, 2)))


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_penalty_non_negative(seed):
    rng = np.random.default_rng(seed)
    critic = init_mlp(MlpSpec.parse("3-5-1"), seed)
    assert float(gradient_penalty(critic, rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), seed).detach()) >= 0


def test_critic_input_gradient_against_finite_differences():
    critic = init_mlp(MlpSpec.parse("4-8-1"), 5)
    X = np.random.default_rng(1).normal(size=(6, 4))
    x = torch.as_tensor(X).requires_grad_(True)
    (g,) = torch.autograd.grad(forward(critic, x).sum(), x)
    h = 1e-4
    num = np.zeros_like(X)
    for i, j in np.ndindex(*X.shape):
        up, dn = X.copy(), X.copy()
        up[i, j] += h
        dn[i, j] -= h
        with torch.no_grad():
            num[i, j] = (float(forward(critic, up)[i, 0]) - float(forward(critic, dn)[i, 0])) / (2 * h)
    assert rel_err(g.numpy(), num) < 1e-3


def test_full_critic_loss_gradient_through_penalty():
    cfg = WganConfig.from_widths("3-4", "4-6-1")
    base = init_mlp(cfg.critic_spec, 2)
    rng = np.random.default_rng(3)
    real, fake, other = rng.uniform(size=(5, 4)), rng.uniform(size=(5, 4)), rng.uniform(size=(5, 4))

    def loss_of(D):
        gp = gradient_penalty(D, real, fake, seed=11)
        return critic_loss(critic_scores(D, fake), critic_scores(D, real), critic_scores(D, other), gp, cfg)

    work = base.clone(requires_grad=True)
    loss_of(work).backward()
    h = 1e-4
    for t_work, t_base in zip(work.tensors(), base.tensors()):
        num = np.zeros(tuple(t_base.shape))
        for idx in np.ndindex(*num.shape):
            # the penalty needs autograd, so only the perturbation runs under no_grad
            with torch.no_grad():
                t_base[idx] += h
            up = float(loss_of(base).detach())
            with torch.no_grad():
                t_base[idx] -= 2 * h
            dn = float(loss_of(base).detach())
            with torch.no_grad():
                t_base[idx] += h
            num[idx] = (up - dn) / (2 * h)
        assert rel_err(t_work.grad.numpy(), num) < 1e-3


def _cfg(**kw):
    return WganConfig.from_widths("2-3", "3-1", **kw)


def test_critic_loss_hand_example():
    v = critic_loss(torch.tensor([1.0, 3.0], dtype=F64), torch.tensor([2.0, 4.0], dtype=F64),
                    torch.tensor([5.0], dtype=F64), torch.tensor(0.7, dtype=F64), _cfg())
    assert float(v) == pytest.approx(11.0, abs=1e-12)


def test_zero_other_weight_reduces_to_plain_loss():
    rng = np.random.default_rng(0)
    fake, real, other = (torch.as_tensor(rng.normal(size=n)) for n in (8, 8, 8))
    gp = torch.tensor(0.3, dtype=F64)
    a = critic_loss(fake, real, other, gp, _cfg(lambda_other=0.0))
    b = wgan_gp_loss(fake, real, gp, 10.0)
    assert abs(float(a) - float(b)) <= 1e-12
    assert float(a) == float(b)


def test_symmetric_cancellation():
    s = torch.tensor([0.2, -1.0, 3.0], dtype=F64)
    assert float(critic_loss(s, s, None, torch.tensor(0.0, dtype=F64), _cfg(lambda_other=0.0))) == 0.0


def test_empty_other_batch_rejected():
    s = torch.tensor([1.0], dtype=F64)
    with pytest.raises(ArgumentError):
        critic_loss(s, s, torch.zeros(0, dtype=F64), torch.tensor(0.0, dtype=F64), _cfg())


def test_generator_loss_constant_and_linear():
    const = linear_critic([0.0, 0.0, 0.0], bias=2.5)
    X = np.random.default_rng(0).uniform(size=(7, 3))
    assert float(generator_loss(const, X)) == -2.5
    c = linear_critic([1.0, -2.0, 0.5])
    c2 = linear_critic([2.0, -4.0, 1.0])
    assert float(generator_loss(c2, X)) == pytest.approx(2 * float(generator_loss(c, X)), rel=1e-12)


def test_generator_gradient_against_finite_differences():
    G = init_mlp(MlpSpec.parse("3-5-4", "sigmoid"), 1)
    D = init_mlp(MlpSpec.parse("4-6-1"), 2)
    z = torch.as_tensor(np.random.default_rng(0).normal(size=(6, 3)))
    work = G.clone(requires_grad=True)
    generator_loss(D, forward(work, z)).backward()
    h = 1e-4
    for t_work, t_base in zip(work.tensors(), G.tensors()):
        num = np.zeros(tuple(t_base.shape))
        for idx in np.ndindex(*num.shape):
            with torch.no_grad():
                t_base[idx] += h
                up = float(generator_loss(D, forward(G, z)))
                t_base[idx] -= 2 * h
                dn = float(generator_loss(D, forward(G, z)))
                t_base[idx] += h
            num[idx] = (up - dn) / (2 * h)
        assert rel_err(t_work.grad.numpy(), num) < 1e-3


@pytest.mark.parametrize("kw", [{"lambda_gp": -1}, {"lambda_other": -0.5}, {"critic_steps_per_gen": 0}])
def test_config_validation(kw):
    with pytest.raises(ArgumentError):
        _cfg(**kw)


def test_preset_architectures():
    u = WganConfig.unsw()
    assert u.generator_spec.layer_widths == (100, 64, 128, 256, 42)
    assert u.critic_spec.layer_widths == (42, 64, 32, 24, 1)
    assert u.generator_spec.output_activation == "sigmoid"
    assert (u.lambda_gp, u.lambda_other, u.noise_dim, u.critic_steps_per_gen) == (10.0, 1.0, 100, 5)
    a = WganConfig.andmal()
    assert a.generator_spec.layer_widths == (100, 128, 256, 512, 64)


def test_config_round_trip():
    cfg = WganConfig.unsw()
    assert WganConfig.from_dict(cfg.to_dict()) == cfg


# ------------------------------------------------------------------ training


@pytest.fixture(scope="module")
def two_category():
    raw = synth_generate(SynthSpec.uniform(2, 0.1, samples_per_category=256, seed=1, dim=4,
                                           grid_resolution=50, spread=0.12))
    return multilabelize(raw)


@pytest.fixture(scope="module")
def long_run(two_category):
    cfg = WganConfig.from_widths("16-32-4", "4-32-1",
                                 train=TrainConfig(batch_size=64, epochs=500, seed=0, beta1=0.5, beta2=0.9))
    return train_category_wgan(two_category, "cat0", cfg)


def _window_gaps(gen, width=50):
    gaps = np.abs([h["critic_gap"] for h in gen.history])
    return gaps.reshape(-1, width).mean(axis=1)


@pytest.mark.xfail(strict=False, reason="window means of the critic gap rise before they fall")
def test_gap_shrinks_monotonically_over_windows(long_run):
    w = _window_gaps(long_run)
    assert np.all(np.diff(w) <= 0)


def test_gap_declines_after_its_peak(long_run):
    w = _window_gaps(long_run)
    peak = int(np.argmax(w))
    assert peak < len(w) - 1
    assert w[-1] < 0.5 * w[peak]
    tail = w[peak:]
    assert np.polyfit(np.arange(len(tail)), tail, 1)[0] < 0


def test_generator_approaches_its_category(long_run, two_category):
    real = two_category.features[[("cat0" in y) for y in two_category.labels]]
    fake = generate(long_run, 2000, 0)
    spec = long_run.generator.spec
    untrained = CategoryGenerator("cat0", Checkpoint(spec, init_mlp(spec, long_run.seed)), 4)
    before = np.abs(generate(untrained, 2000, 0).mean(0) - real.mean(0)).mean()
    after = np.abs(fake.mean(0) - real.mean(0)).mean()
    assert after < before
    assert ((fake < 0.01) | (fake > 0.99)).mean() < 0.5


def test_insufficient_samples(two_category):
    cfg = WganConfig.from_widths("4-4", "4-1", train=TrainConfig(batch_size=10_000, epochs=1))
    with pytest.raises(DataError, match="cat1"):
        train_category_wgan(two_category, "cat1", cfg)


def test_category_order_independence(two_category):
    cfg = WganConfig.from_widths("4-8-4", "4-8-1", train=TrainConfig(batch_size=64, epochs=2))
    a = train_generators(two_category, cfg, categories=["cat0", "cat1"])
    b = train_generators(two_category, cfg, categories=["cat1", "cat0"])
    da = {g.category: g.params.digest() for g in a}
    db = {g.category: g.params.digest() for g in b}
    assert da == db and da["cat0"] != da["cat1"]


def test_generate_contract(long_run):
    a, b = generate(long_run, 50, 3), generate(long_run, 50, 3)
    assert np.array_equal(a, b)
    assert generate(long_run, 1, 0).shape == (1, 4)
    assert a.min() >= 0 and a.max() <= 1
    with pytest.raises(ArgumentError):
        generate(long_run, 0)


def test_build_augmented_counts(two_category, long_run):
    empty = build_augmented(two_category, [long_run], 0)
    assert np.array_equal(empty.features, two_category.features) and empty.n_generated == 0
    aug = build_augmented(two_category, [long_run, long_run], 30, seed=1)
    assert len(aug) == len(two_category) + 60 and aug.n_generated == 60
    assert np.array_equal(aug.real_only(), two_category.features)


def test_full_scale_pool_arithmetic():
    assert full_scale_per_category(10) * 10 == 300_000
    assert full_scale_per_category(15) * 15 == 300_000


def test_generated_pool_file(tmp_path, two_category, long_run):
    import pandas as pd

    aug = build_augmented(two_category, [long_run], 5)
    write_generated_pool(aug, two_category, tmp_path / "pool.csv")
    df = pd.read_csv(tmp_path / "pool.csv")
    assert (df["provenance"] == "generated").sum() == 5
    assert len(df) == len(two_category) + 5


def test_generator_checkpoint_round_trip(tmp_path, long_run):
    long_run.save(tmp_path / "g.npz")
    back = CategoryGenerator.load(tmp_path / "g.npz")
    assert back.category == "cat0" and np.array_equal(generate(back, 5, 1), generate(long_run, 5, 1))
