import numpy as np
import pytest

from convfilter.extract.attn import (
    AttnConfig, _pad, attn_extended_loss_fn, attn_forward, attn_loss_and_grads, bilstm_attn_extract,
    init_attn_params, make_examples, train_attn,
)
from convfilter.features import HashedTextEncoder
from convfilter.nn.gradcheck import gradient_check


@pytest.fixture
def params():
    return init_attn_params(5, 3, 4, seed=1)


def test_length_one_attends_fully(params, rng):
    _, A = bilstm_attn_extract(params, rng.normal(size=(1, 5)))
    assert A.tolist() == [1.0]


def test_identical_states_give_uniform_attention(params, rng):
    for k in params:
        if not k.startswith("attn.out"):
            params[k][:] = 0.0
    # zero LSTM weights: every utterance state is the zero vector
    _, A = bilstm_attn_extract(params, rng.normal(size=(4, 5)))
    np.testing.assert_allclose(A, 0.25, atol=1e-15)


def test_attention_sums_to_one_and_ignores_padding(params, rng):
    X = rng.normal(size=(3, 6, 5))
    lengths = np.array([6, 2, 4])
    p, A, _ = attn_forward(params, X, lengths)
    np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-12)
    assert not A[1, 2:].any() and not A[2, 4:].any()
    solo, _ = bilstm_attn_extract(params, X[1, :2])
    np.testing.assert_allclose(p[1], solo, atol=1e-14)


def test_gradient_check(params, rng):
    X = rng.normal(size=(2, 4, 5))
    lengths = np.array([4, 3])
    Y = (rng.uniform(size=(2, 4)) < 0.5).astype(float)
    _, grads = attn_loss_and_grads(params, X, lengths, Y)
    rep = gradient_check(attn_extended_loss_fn(X, lengths, Y), params, grads)
    assert rep.passed, rep.worst()


def test_input_checks(params):
    with pytest.raises(ValueError):
        bilstm_attn_extract(params, np.zeros((0, 5)))
    with pytest.raises(ValueError):
        attn_forward(params, np.zeros((1, 2, 4)), np.array([2]))
    with pytest.raises(ValueError):
        AttnConfig(threshold=2.0)


def test_training_fits_small_set(clean_corpus):
    ex = make_examples(clean_corpus[:20], HashedTextEncoder(32), "SYM")
    cfg = AttnConfig(hidden_dim=8, epochs=15, learning_rate=0.02, batch_size=10)
    model = train_attn(ex, "SYM", cfg)
    assert model.losses[-1] < model.losses[0]
    again = train_attn(ex, "SYM", cfg)
    assert again.losses == model.losses
    score = model.score(ex)
    assert 0.0 <= score.micro_f1 <= 1.0
    assert model.predict_proba(ex).shape == (20, len(model.labels))


def test_pad_shapes(clean_corpus):
    ex = make_examples(clean_corpus[:3], HashedTextEncoder(8), "MED")
    X, lengths = _pad(ex)
    assert X.shape == (3, max(lengths), 8)
    assert lengths.tolist() == [len(c) for c in clean_corpus[:3]]
    assert ex[0].targets.shape == (32,)
