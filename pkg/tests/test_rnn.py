import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from playlist_bench.errors import DomainError, FitError
from playlist_bench.experiments import generate_synthetic_corpus
from playlist_bench.corpus import holdout_validation
from playlist_bench.rng import stream
from playlist_bench.rnn import (
    RNNConfig,
    RNNModel,
    RNNParams,
    compute_gradients,
    gru_forward,
    ranking_loss,
    rnn_fit,
    sample_negatives,
    sequence_loss,
)


def random_params(seed, V=20, d=8, m=8, scale=0.5):
    rng = np.random.default_rng(seed)
    p = RNNParams.zeros(V, d, m)
    for _, a in p.items():
        a[...] = rng.normal(0.0, scale, a.shape)
    return p


def scalar_forward(p, seq):
    """Step-by-step GRU in plain Python floats."""

    def sig(x):
        return 1.0 / (1.0 + math.exp(-x))

    m, d = p.W_z.shape
    V = p.W_o.shape[0]
    h = [0.0] * m
    rows = []
    for s in seq:
        x = [float(v) for v in p.E[s]]
        z = [sig(sum(p.W_z[i, k] * x[k] for k in range(d)) + sum(p.U_z[i, k] * h[k] for k in range(m)) + p.b_z[i])
             for i in range(m)]
        r = [sig(sum(p.W_r[i, k] * x[k] for k in range(d)) + sum(p.U_r[i, k] * h[k] for k in range(m)) + p.b_r[i])
             for i in range(m)]
        rh = [r[k] * h[k] for k in range(m)]
        hc = [math.tanh(sum(p.W_h[i, k] * x[k] for k in range(d)) + sum(p.U_h[i, k] * rh[k] for k in range(m))
                        + p.b_h[i]) for i in range(m)]
        h = [(1 - z[i]) * h[i] + z[i] * hc[i] for i in range(m)]
        rows.append([sum(p.W_o[v, k] * h[k] for k in range(m)) + p.b_o[v] for v in range(V)])
    return np.array(rows)


def finite_difference(p, songs, neg, kind, eps=1e-5):
    out = p.zeros_like()
    for name, a in p.items():
        g = getattr(out, name)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + eps
            up = sequence_loss(p, songs, neg, kind)
            a[idx] = old - eps
            down = sequence_loss(p, songs, neg, kind)
            a[idx] = old
            g[idx] = (up - down) / (2 * eps)
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    """Largest entry-wise |a - n| / max(|a|, |n|, floor) per tensor."""
    errs = {}
    for name, a in analytic.items():
        n = getattr(numeric, name)
        errs[name] = float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))
    return errs


# -- forward ----------------------------------------------------------------------


def test_zero_params_give_zero_states():
    p = RNNParams.zeros(10, 4, 6)
    H, S = gru_forward(p, [1, 2, 3])
    assert not H.any() and not S.any()


def test_stepwise_equals_whole_sequence():
    p = random_params(0)
    H, S = gru_forward(p, [3, 7])
    h1, s1 = gru_forward(p, [3])
    h2, s2 = gru_forward(p, [7], h0=h1[-1])
    assert np.array_equal(H, np.vstack([h1, h2]))
    assert np.array_equal(S, np.vstack([s1, s2]))


@pytest.mark.parametrize("seed", range(3))
def test_forward_matches_scalar_oracle(seed):
    p = random_params(seed)
    seq = np.random.default_rng(seed + 100).integers(0, 20, 5)
    _, S = gru_forward(p, seq)
    np.testing.assert_allclose(S, scalar_forward(p, seq), rtol=0, atol=1e-12)


def test_forward_rejects_unknown_ids():
    with pytest.raises(DomainError):
        gru_forward(RNNParams.zeros(5, 2, 2), [5])


# -- loss -------------------------------------------------------------------------


def test_ranking_loss_examples():
    assert ranking_loss(0.3, [0.3], "bpr") == pytest.approx(math.log(2), abs=1e-15)
    assert ranking_loss(20.0, [0.0], "bpr") < 1e-8
    assert ranking_loss(0.0, [0.0, 0.0], "top1") == pytest.approx(1.0, abs=1e-15)
    # stable far into the tails
    assert math.isfinite(ranking_loss(-800.0, [800.0], "bpr"))


@given(st.floats(-50, 50), st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.sampled_from(["bpr", "top1"]))
def test_ranking_loss_non_negative(pos, negs, kind):
    assert ranking_loss(pos, negs, kind) >= 0.0


# -- gradients --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["bpr", "top1"])
def test_gradients_match_finite_differences(kind):
    p = random_params(7)
    rng = np.random.default_rng(8)
    songs = rng.integers(0, 20, 5)
    neg = sample_negatives(rng, songs[1:], 4, 20)
    _, g = compute_gradients(p, songs, neg, kind)
    errs = max_relative_error(dict(g.items()), finite_difference(p, songs, neg, kind))
    assert max(errs.values()) < 1e-4, errs


def test_untouched_output_rows_have_zero_gradient():
    p = random_params(1)
    songs = np.array([0, 1, 2, 3])
    neg = np.array([[4, 5], [6, 4], [5, 6]])
    _, g = compute_gradients(p, songs, neg)
    touched = {1, 2, 3, 4, 5, 6}
    for v in range(20):
        if v not in touched:
            assert not g.W_o[v].any() and g.b_o[v] == 0.0
    # embeddings only for the songs that were read
    assert not g.E[[v for v in range(20) if v not in {0, 1, 2}]].any()


def test_duplicate_negative_matches_mean():
    p = random_params(2)
    songs = np.array([0, 1])
    l1, g1 = compute_gradients(p, songs, np.array([[5]]))
    l2, g2 = compute_gradients(p, songs, np.array([[5, 5]]))
    assert l1 == pytest.approx(l2, rel=1e-15)
    for (name, a), (_, b) in zip(g1.items(), g2.items()):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16, err_msg=name)


def test_bptt_cap_truncates():
    p = random_params(3)
    songs = np.arange(10)
    neg = np.full((9, 2), 15)
    l_cap, _ = compute_gradients(p, songs, neg, bptt_cap=4)
    l_short, _ = compute_gradients(p, songs[:4], neg[:3])
    assert l_cap == l_short


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 30))
def test_negatives_never_hit_target(seed, V):
    rng = np.random.default_rng(seed)
    targets = rng.integers(0, V, 20)
    neg = sample_negatives(rng, targets, 10, V)
    assert neg.min() >= 0 and neg.max() < V
    assert not (neg == targets[:, None]).any()


# -- training ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def markov():
    corpus, table = generate_synthetic_corpus("markov", 100, 200, (5, 15), 20, seed=4, return_truth=True)
    fit, val = holdout_validation(corpus, 0.1, seed=4)
    model = rnn_fit(fit, val, RNNConfig(seed=4))
    return corpus, table, fit, val, model


def test_training_reduces_loss(markov):
    *_, model = markov
    losses = model.history["train_loss"]
    assert losses[-1] < losses[0]
    assert model.best_epoch >= 1 and model.validation_loss is not None


def test_training_is_deterministic(markov):
    _, _, fit, val, model = markov
    again = rnn_fit(fit, val, RNNConfig(seed=4))
    for (name, a), (_, b) in zip(model.params.items(), again.params.items()):
        assert a.tobytes() == b.tobytes(), name


def test_zero_epochs_returns_initialization(markov):
    _, _, fit, val, _ = markov
    m = rnn_fit(fit, val, RNNConfig(seed=9, epochs_max=0))
    init = RNNParams.glorot(fit.n_songs, 32, 64, stream(9, 0))
    for (name, a), (_, b) in zip(m.params.items(), init.items()):
        assert np.array_equal(a, b), name
    assert not m.params.b_o.any()


def test_trained_model_predicts_successors(markov):
    corpus, table, fit, _, model = markov
    successor = table.argmax(axis=1)
    # songs seen in only a handful of training playlists are not learnable
    supported = np.flatnonzero(np.asarray(fit.song_playlist_counts()) >= 5)
    assert len(supported) >= 15  # at least the hit core
    for a in supported:
        assert model.score([a]).argmax() == successor[a], a


def test_trained_model_is_order_sensitive(markov):
    corpus, table, _, _, model = markov
    successor = table.argmax(axis=1)
    counts = np.asarray(corpus.song_playlist_counts())
    a, b = np.argsort(-counts)[:2]  # well-trained songs
    assert successor[a] != successor[b]
    assert model.score([a, b]).argmax() == successor[b]
    assert model.score([b, a]).argmax() == successor[a]


def test_score_is_a_pure_read(markov):
    *_, model = markov
    before = {n: a.copy() for n, a in model.params.items()}
    model.score([1, 2, 3])
    for n, a in model.params.items():
        assert np.array_equal(a, before[n])
    with pytest.raises(ValueError):
        model.params.W_o[0, 0] = 1.0


def test_score_prefixes_matches_score(markov):
    *_, model = markov
    songs = [4, 9, 1, 7]
    rows = model.score_prefixes(songs)
    for k in range(1, len(songs)):
        np.testing.assert_array_equal(rows[k - 1], model.score(songs[:k]))


def test_untrained_zero_model_scores_output_bias():
    p = RNNParams.zeros(6, 3, 4)
    p.b_o[:] = np.arange(6.0)
    m = RNNModel(p, RNNConfig())
    assert m.score([2]).tolist() == list(range(6))
    assert m.score([5, 0, 1]).tolist() == list(range(6))


def test_fit_rejects_empty_training():
    from .conftest import make_corpus

    with pytest.raises(FitError):
        rnn_fit(make_corpus([[0], [1]]), None, RNNConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        RNNConfig(loss_kind="softmax")
    with pytest.raises(ValueError):
        RNNConfig(hidden_dim=0)
