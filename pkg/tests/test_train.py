import numpy as np
import pytest

from convfilter.features import FeatureConfig, HashedTextEncoder
from convfilter.nn.gradcheck import NumericError
from convfilter.nn.model import loss_and_grads
from convfilter.train import (
    AdamState, TrainConfig, adam_step, clip_global_norm, predict_corpus, prepare_corpus,
    prior_bias_init, train, window_conversations,
)

FEATURE = FeatureConfig(text_dim=16, speaker_dim=4, position_dim=2, semantic_dim=4)
FAST = dict(hidden_dim=6, max_epochs=2, patience=1, batch_size=8, learning_rate=0.005)


@pytest.fixture(scope="module")
def inputs(small_corpus, dictionary):
    return prepare_corpus(small_corpus, FEATURE, HashedTextEncoder(16), dictionary)


class Seq:
    def __init__(self, n):
        self.n = n

    def __len__(self):
        return self.n


def test_windows_split_long_conversation():
    ws = window_conversations([Seq(300), Seq(5)], 128)
    assert [(w.start, w.end) for w in ws] == [(0, 128), (128, 256), (256, 300), (0, 5)]
    assert [w.end - w.start for w in ws[:3]] == [128, 128, 44]


def test_windows_exact_multiple():
    assert len(window_conversations([Seq(256)], 128)) == 2
    with pytest.raises(ValueError):
        window_conversations([Seq(3)], 0)


def test_adam_zero_gradient_is_noop():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState(), 0.1)
    assert np.array_equal(p["w"], [1.0, -2.0])


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.array([1.0, 1.0, 1.0])}
    adam_step(p, {"w": np.array([3.0, -1e-3, 0.0])}, AdamState(), 0.1)
    np.testing.assert_allclose(p["w"], [0.9, 1.1, 1.0], atol=1e-6)


def test_adam_minimizes_quadratic():
    p = {"x": np.array([3.0])}
    s = AdamState()
    for _ in range(100):
        adam_step(p, {"x": 2 * p["x"]}, s, 0.1)
    assert abs(p["x"][0]) < 0.5 and s.t == 100


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), 0.1)


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_global_norm(g, 1.0) == 5.0
    np.testing.assert_allclose([g["a"][0], g["b"][0]], [0.6, 0.8])
    h = {"a": np.array([0.3])}
    clip_global_norm(h, 1.0)
    assert h["a"][0] == 0.3


def test_config_validation():
    for bad in (dict(learning_rate=-1), dict(batch_size=0), dict(patience=0), dict(beta=-0.1)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_zero_learning_rate_keeps_init(inputs):
    from convfilter.nn.model import init_params

    cfg = TrainConfig(**{**FAST, "learning_rate": 0.0})
    res = train(inputs[:8], inputs[8:], cfg, FEATURE)
    init = init_params(cfg.model_config(FEATURE), cfg.seed)
    prior_bias_init(init, inputs[:8])
    assert all(np.array_equal(res.params[k], init[k]) for k in init)


def test_prior_bias_init_matches_label_rates(inputs):
    from convfilter.nn.model import init_params

    params = init_params(TrainConfig(**FAST).model_config(FEATURE), 0)
    prior_bias_init(params, inputs[:8])
    rows = [row for x in inputs[:8] for row in x.targets.tolist()]
    for j in range(3):
        rate = sum(r[j] for r in rows) / len(rows)
        assert 1.0 / (1.0 + np.exp(-params["fine_head.b"][j])) == pytest.approx(max(rate, 1e-3), rel=1e-9)
    relevant = sum(1 for r in rows if max(r) > 0) / len(rows)
    b = params["coarse_head.b"]
    assert np.exp(b[1]) / (np.exp(b[0]) + np.exp(b[1])) == pytest.approx(relevant, rel=1e-9)


def test_training_is_deterministic(inputs):
    cfg = TrainConfig(**FAST)
    a = train(inputs[:8], inputs[8:], cfg, FEATURE)
    b = train(inputs[:8], inputs[8:], cfg, FEATURE)
    assert a.report.train_loss == b.report.train_loss and a.report.val_auc == b.report.val_auc
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert 1 <= a.report.best_epoch <= 2
    assert a.report.best_val_auc == max(a.report.val_auc)


def test_early_stopping_respects_patience(inputs):
    res = train(inputs[:8], inputs[8:], TrainConfig(**{**FAST, "max_epochs": 8, "patience": 2}), FEATURE)
    n = len(res.report.val_auc)
    assert n == 8 or n - res.report.best_epoch == 2


def test_no_hierarchy_has_no_coarse_blocks(inputs):
    res = train(inputs[:8], inputs[8:], TrainConfig(**{**FAST, "max_epochs": 1, "no_hierarchy": True}), FEATURE)
    assert not any(k.startswith("coarse") for k in res.params)
    preds = predict_corpus(res.params, res.config, inputs[8:])
    assert all(c is None and f.shape == (len(x), 3) for (f, c), x in zip(preds, inputs[8:]))


def first_losses(inputs, seed, steps=10, lr=1e-3):
    from convfilter.nn.model import Batch, init_params

    cfg = TrainConfig(hidden_dim=6, seed=seed)
    mcfg = cfg.model_config(FEATURE)
    params = init_params(mcfg, seed)
    batch = Batch.from_windows(window_conversations(inputs[:4], 128), FEATURE)
    state = AdamState()
    losses = []
    for _ in range(steps):
        rep, grads = loss_and_grads(params, mcfg, batch)
        losses.append(float(rep.total))
        adam_step(params, grads, state, lr)
    return losses


def test_loss_decreases_early(inputs):
    drops = [(lambda ls: ls[-1] < ls[0])(first_losses(inputs, s)) for s in range(5)]
    assert sum(drops) >= 3


def test_non_finite_loss_raises(inputs):
    from convfilter.nn.model import init_params

    cfg = TrainConfig(**FAST)
    params = init_params(cfg.model_config(FEATURE), 0)
    params["fine_head.b"][:] = np.nan
    with pytest.raises(NumericError, match="epoch 1, batch 0"):
        train(inputs[:8], inputs[8:], cfg, FEATURE, params=params)


def test_report_csv(inputs, tmp_path):
    res = train(inputs[:8], inputs[8:], TrainConfig(**{**FAST, "max_epochs": 1}), FEATURE)
    p = tmp_path / "r.csv"
    res.report.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_auc" and lines[1].startswith("1,")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_parameters_raise(inputs):
    cfg = TrainConfig(**{**FAST, "learning_rate": 1e308, "max_epochs": 3})
    with pytest.raises(NumericError, match="non-finite"):
        train(inputs[:8], inputs[8:], cfg, FEATURE)
