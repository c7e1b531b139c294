"""Single-layer GRU next-song model trained with a sampled pairwise ranking loss.

Pure numpy, 64-bit. One playlist is one gradient step: the hidden state
starts at zero for every playlist, the network reads songs ``1..T-1`` and at
each step scores the actual next song against ``n_negatives`` uniformly
sampled songs. Only the output rows of those candidates receive gradient.
"""

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import expit

from .errors import DomainError, FitError, NumericError
from .rng import stream

log = logging.getLogger(__name__)

LOSS_KINDS = ("bpr", "top1")

# stream keys under cfg.seed
_INIT_KEY, _ORDER_KEY, _NEG_KEY, _VAL_KEY = range(4)


@dataclass(frozen=True)
class RNNConfig:
    embedding_dim: int = 32
    hidden_dim: int = 64
    loss_kind: str = "bpr"
    learning_rate: float = 0.05
    epochs_max: int = 20
    patience: int = 2
    n_negatives: int = 50
    clip_norm: float = 5.0
    bptt_cap: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        for name in ("embedding_dim", "hidden_dim", "n_negatives", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        # epochs_max = 0 is allowed and yields the initialized network
        if self.epochs_max < 0:
            raise ValueError("epochs_max must be >= 0")
        if self.bptt_cap < 2:
            raise ValueError("bptt_cap must be >= 2")
        if not (self.learning_rate > 0 and self.clip_norm > 0):
            raise ValueError("learning_rate and clip_norm must be positive")


@dataclass
class RNNParams:
    E: np.ndarray  # V x d input embeddings
    W_z: np.ndarray  # m x d
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray  # m x m
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray  # m
    b_r: np.ndarray
    b_h: np.ndarray
    W_o: np.ndarray  # V x m output projection
    b_o: np.ndarray  # V

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    @property
    def n_songs(self):
        return self.E.shape[0]

    @property
    def hidden_dim(self):
        return self.U_z.shape[0]

    def items(self):
        return ((n, getattr(self, n)) for n in self.names())

    def copy(self):
        return RNNParams(**{n: a.copy() for n, a in self.items()})

    def zeros_like(self):
        return RNNParams(**{n: np.zeros_like(a) for n, a in self.items()})

    @classmethod
    def zeros(cls, n_songs, embedding_dim, hidden_dim):
        V, d, m = n_songs, embedding_dim, hidden_dim
        return cls(
            E=np.zeros((V, d)),
            W_z=np.zeros((m, d)), W_r=np.zeros((m, d)), W_h=np.zeros((m, d)),
            U_z=np.zeros((m, m)), U_r=np.zeros((m, m)), U_h=np.zeros((m, m)),
            b_z=np.zeros(m), b_r=np.zeros(m), b_h=np.zeros(m),
            W_o=np.zeros((V, m)), b_o=np.zeros(V),
        )

    @classmethod
    def glorot(cls, n_songs, embedding_dim, hidden_dim, rng):
        """Glorot-uniform weights, zero biases."""
        p = cls.zeros(n_songs, embedding_dim, hidden_dim)
        for name, a in p.items():
            if a.ndim == 2:
                limit = np.sqrt(6.0 / (a.shape[0] + a.shape[1]))
                a[...] = rng.uniform(-limit, limit, size=a.shape)
        return p

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for _, a in self.items())


def _check_finite(arr, what, step=None):
    if not np.all(np.isfinite(arr)):
        where = f" at step {step}" if step is not None else ""
        raise NumericError(f"non-finite {what}{where}")


def _gru_steps(p, inputs, h0):
    """Run the recurrence, returning per-step caches (all T x m)."""
    # per-step mat-vecs (not one batched product) keep every step bit-identical
    # whether a sequence is processed whole or in pieces
    X = p.E[inputs]
    T, m = len(inputs), p.hidden_dim
    Hprev = np.empty((T, m))
    Z = np.empty((T, m))
    R = np.empty((T, m))
    Hc = np.empty((T, m))
    H = np.empty((T, m))
    h = h0
    for t in range(T):
        Hprev[t] = h
        x = X[t]
        z = expit(p.W_z @ x + p.U_z @ h + p.b_z)
        r = expit(p.W_r @ x + p.U_r @ h + p.b_r)
        hc = np.tanh(p.W_h @ x + p.U_h @ (r * h) + p.b_h)
        h = (1.0 - z) * h + z * hc
        if not np.all(np.isfinite(h)):
            raise NumericError(f"non-finite hidden state at step {t + 1}")
        Z[t], R[t], Hc[t], H[t] = z, r, hc, h
    return X, Hprev, Z, R, Hc, H


def gru_forward(params, sequence, h0=None):
    """Hidden states ``(T, m)`` and full score rows ``(T, V)`` for a song sequence."""
    seq = np.asarray(sequence, dtype=np.int64)
    if seq.ndim != 1 or seq.size == 0:
        raise DomainError("sequence must be a non-empty 1-d array of song ids")
    if seq.min() < 0 or seq.max() >= params.n_songs:
        raise DomainError(f"sequence has ids outside [0, {params.n_songs})")
    if h0 is None:
        h0 = np.zeros(params.hidden_dim)
    H = _gru_steps(params, seq, np.asarray(h0, dtype=np.float64))[-1]
    scores = np.stack([params.W_o @ h + params.b_o for h in H])
    _check_finite(scores, "scores")
    return H, scores


def _loss_terms(s_pos, s_neg, kind):
    """Loss and its derivatives w.r.t. the target and the negative scores.

    ``s_pos`` has shape (T,), ``s_neg`` shape (T, N); the loss is averaged
    over the N negatives of each step, per step.
    """
    N = s_neg.shape[-1]
    if kind == "bpr":
        diff = s_pos[..., None] - s_neg
        loss = np.logaddexp(0.0, -diff).mean(axis=-1)  # -log sigmoid(diff)
        d_neg = expit(-diff) / N
        d_pos = -d_neg.sum(axis=-1)
    elif kind == "top1":
        diff = s_neg - s_pos[..., None]
        sd = expit(diff)
        sq = expit(s_neg**2)
        loss = (sd + sq).mean(axis=-1)
        d_neg = (sd * (1 - sd) + 2.0 * s_neg * sq * (1 - sq)) / N
        d_pos = -(sd * (1 - sd)).sum(axis=-1) / N
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return loss, d_pos, d_neg


def ranking_loss(target_score, negative_scores, kind="bpr"):
    """Pairwise ranking loss of one target score against its negatives."""
    neg = np.atleast_1d(np.asarray(negative_scores, dtype=np.float64))
    if neg.size < 1:
        raise DomainError("need at least one negative score")
    loss, _, _ = _loss_terms(np.asarray(target_score, dtype=np.float64), neg, kind)
    return float(loss)


def _sequence_backward(p, songs, negatives, kind):
    """Mean per-step loss and gradients for one playlist.

    Returns ``(loss, dense, rows)``: ``dense`` maps the recurrent parameter
    names to full gradients; ``rows`` maps ``E``, ``W_o`` and ``b_o`` to
    ``(unique_row_ids, row_gradients)``.
    """
    inputs, targets = songs[:-1], songs[1:]
    T = len(inputs)
    negatives = negatives[:T]
    X, Hprev, Z, R, Hc, H = _gru_steps(p, inputs, np.zeros(p.hidden_dim))

    cand = np.concatenate([targets[:, None], negatives], axis=1)  # T x (1+N)
    Wc = p.W_o[cand]
    S = np.einsum("tkm,tm->tk", Wc, H) + p.b_o[cand]
    _check_finite(S, "scores")
    step_loss, d_pos, d_neg = _loss_terms(S[:, 0], S[:, 1:], kind)
    loss = float(step_loss.mean())
    G = np.concatenate([d_pos[:, None], d_neg], axis=1) / T

    dH = np.einsum("tk,tkm->tm", G, Wc)
    o_rows, o_inv = np.unique(cand.ravel(), return_inverse=True)
    dWo = np.zeros((len(o_rows), p.hidden_dim))
    np.add.at(dWo, o_inv, (G[:, :, None] * H[:, None, :]).reshape(-1, p.hidden_dim))
    dbo = np.zeros(len(o_rows))
    np.add.at(dbo, o_inv, G.ravel())

    dAz = np.empty_like(Z)
    dAr = np.empty_like(R)
    dAh = np.empty_like(Hc)
    dh_next = np.zeros(p.hidden_dim)
    for t in range(T - 1, -1, -1):
        dh = dH[t] + dh_next
        z, r, hc, hp = Z[t], R[t], Hc[t], Hprev[t]
        dAh[t] = dh * z * (1.0 - hc * hc)
        drh = p.U_h.T @ dAh[t]
        dAr[t] = drh * hp * r * (1.0 - r)
        dAz[t] = dh * (hc - hp) * z * (1.0 - z)
        dh_next = dh * (1.0 - z) + drh * r + p.U_r.T @ dAr[t] + p.U_z.T @ dAz[t]

    dense = {
        "W_z": dAz.T @ X, "W_r": dAr.T @ X, "W_h": dAh.T @ X,
        "U_z": dAz.T @ Hprev, "U_r": dAr.T @ Hprev, "U_h": dAh.T @ (R * Hprev),
        "b_z": dAz.sum(axis=0), "b_r": dAr.sum(axis=0), "b_h": dAh.sum(axis=0),
    }
    dX = dAz @ p.W_z + dAr @ p.W_r + dAh @ p.W_h
    e_rows, e_inv = np.unique(inputs, return_inverse=True)
    dE = np.zeros((len(e_rows), X.shape[1]))
    np.add.at(dE, e_inv, dX)
    rows = {"E": (e_rows, dE), "W_o": (o_rows, dWo), "b_o": (o_rows, dbo)}
    return loss, dense, rows


def _prepare(params, playlist, negatives, bptt_cap):
    songs = np.asarray(playlist, dtype=np.int64)[:bptt_cap]
    if songs.size < 2:
        raise DomainError("playlist needs at least 2 songs")
    if songs.min() < 0 or songs.max() >= params.n_songs:
        raise DomainError("playlist has unknown song ids")
    neg = np.asarray(negatives, dtype=np.int64)
    if neg.ndim != 2 or neg.shape[0] < songs.size - 1 or neg.shape[1] < 1:
        raise DomainError("negatives must have shape (steps, n_negatives) with steps >= len(playlist) - 1")
    return songs, neg


def sequence_loss(params, playlist, negatives, loss_kind="bpr", bptt_cap=50):
    """Mean per-step ranking loss of one playlist (forward pass only)."""
    songs, neg = _prepare(params, playlist, negatives, bptt_cap)
    return _sequence_backward(params, songs, neg, loss_kind)[0]


def compute_gradients(params, playlist, negatives, loss_kind="bpr", bptt_cap=50):
    """Exact gradient of the mean per-step loss w.r.t. every parameter.

    ``negatives[t]`` holds the negative song ids for the prediction of
    ``playlist[t + 1]``. Returns ``(loss, grads)`` with ``grads`` an
    :class:`RNNParams` of dense gradient arrays.
    """
    songs, neg = _prepare(params, playlist, negatives, bptt_cap)
    loss, dense, rows = _sequence_backward(params, songs, neg, loss_kind)
    grads = params.zeros_like()
    for name, g in dense.items():
        getattr(grads, name)[...] = g
    for name, (idx, g) in rows.items():
        getattr(grads, name)[idx] = g
    for name, g in grads.items():
        _check_finite(g, f"gradient {name}")
    return loss, grads


def sample_negatives(rng, targets, n_negatives, n_songs):
    """Uniform negatives per target, never equal to that target."""
    targets = np.asarray(targets, dtype=np.int64)
    if n_songs < 2:
        raise DomainError("negative sampling needs at least 2 songs")
    neg = rng.integers(0, n_songs - 1, size=(targets.size, n_negatives))
    return neg + (neg >= targets[:, None])


class _Adagrad:
    def __init__(self, params, lr, eps=1e-8):
        self.lr = lr
        self.eps = eps
        self.acc = params.zeros_like()

    def step(self, params, dense, rows):
        for name, g in dense.items():
            acc = getattr(self.acc, name)
            acc += g * g
            getattr(params, name)[...] -= self.lr * g / (np.sqrt(acc) + self.eps)
        for name, (idx, g) in rows.items():
            acc = getattr(self.acc, name)
            acc[idx] += g * g
            getattr(params, name)[idx] -= self.lr * g / (np.sqrt(acc[idx]) + self.eps)


def _clip(dense, rows, clip_norm):
    sq = sum(float(np.sum(g * g)) for g in dense.values())
    sq += sum(float(np.sum(g * g)) for _, g in rows.values())
    norm = np.sqrt(sq)
    if norm > clip_norm:
        scale = clip_norm / norm
        dense = {k: g * scale for k, g in dense.items()}
        rows = {k: (i, g * scale) for k, (i, g) in rows.items()}
    return dense, rows


class RNNModel:
    kind = "rnn"

    def __init__(self, params, config, vocabulary_hash="", epochs_trained=0,
                 best_epoch=0, validation_loss=None, history=None):
        self.params = params.copy()
        for _, a in self.params.items():
            a.setflags(write=False)
        self.config = config
        self.vocabulary_hash = vocabulary_hash
        self.epochs_trained = epochs_trained
        self.best_epoch = best_epoch
        self.validation_loss = validation_loss
        self.history = history or {"train_loss": [], "validation_loss": []}

    @property
    def n_songs(self):
        return self.params.n_songs

    def score(self, context):
        return gru_forward(self.params, context)[1][-1]

    def score_prefixes(self, songs):
        """Score rows for every prefix ``songs[:k]``, ``k = 1..len(songs) - 1``.

        Identical to calling :meth:`score` on each prefix, but runs the
        recurrence once.
        """
        return gru_forward(self.params, songs[:-1])[1]

    def arrays(self):
        return dict(self.params.items())

    def metadata(self):
        return {
            "config": asdict(self.config),
            "epochs_trained": self.epochs_trained,
            "best_epoch": self.best_epoch,
            "validation_loss": self.validation_loss,
            "history": self.history,
        }

    @classmethod
    def from_container(cls, meta, arrays):
        params = RNNParams(**{n: np.array(arrays[n], dtype=np.float64) for n in RNNParams.names()})
        return cls(
            params, RNNConfig(**meta["config"]), meta["vocabulary_hash"], meta["epochs_trained"],
            meta["best_epoch"], meta["validation_loss"], meta["history"],
        )


def _validation_batches(validation, seen, cfg, n_songs):
    """Fixed validation steps: (songs, negatives, mask) per playlist."""
    rng = stream(cfg.seed, _VAL_KEY)
    out = []
    for p in validation.playlists:
        songs = np.asarray(p.songs, dtype=np.int64)[: cfg.bptt_cap]
        if songs.size < 2:
            continue
        mask = seen[songs[1:]]
        if not mask.any():
            continue
        out.append((songs, sample_negatives(rng, songs[1:], cfg.n_negatives, n_songs), mask))
    return out


def _validation_loss(params, batches, kind):
    total, count = 0.0, 0
    for songs, neg, mask in batches:
        H = _gru_steps(params, songs[:-1], np.zeros(params.hidden_dim))[-1]
        cand = np.concatenate([songs[1:, None], neg], axis=1)
        S = np.einsum("tkm,tm->tk", params.W_o[cand], H) + params.b_o[cand]
        step_loss = _loss_terms(S[:, 0], S[:, 1:], kind)[0]
        total += float(step_loss[mask].sum())
        count += int(mask.sum())
    return total / count if count else None


def rnn_fit(train, validation=None, cfg=None):
    """Train the GRU model with Adagrad and early stopping on validation loss.

    Validation steps whose target never occurs in ``train`` are skipped.
    Returns the parameters of the best validation epoch (the last epoch when
    no validation steps are available).
    """
    cfg = cfg or RNNConfig()
    playlists = [np.asarray(p.songs, dtype=np.int64)[: cfg.bptt_cap] for p in train.playlists]
    playlists = [s for s in playlists if s.size >= 2]
    if not playlists:
        raise FitError("training corpus has no playlist with 2 or more songs")
    V = train.n_songs
    params = RNNParams.glorot(V, cfg.embedding_dim, cfg.hidden_dim, stream(cfg.seed, _INIT_KEY))
    order_rng = stream(cfg.seed, _ORDER_KEY)
    neg_rng = stream(cfg.seed, _NEG_KEY)
    seen = np.zeros(V, dtype=bool)
    seen[np.concatenate(playlists)] = True
    val_batches = _validation_batches(validation, seen, cfg, V) if validation is not None else []

    opt = _Adagrad(params, cfg.learning_rate)
    history = {"train_loss": [], "validation_loss": []}
    best = (np.inf, params.copy(), 0)
    epochs_run = 0
    stale = 0
    for epoch in range(1, cfg.epochs_max + 1):
        epochs_run = epoch
        total = 0.0
        for i in order_rng.permutation(len(playlists)):
            songs = playlists[i]
            neg = sample_negatives(neg_rng, songs[1:], cfg.n_negatives, V)
            loss, dense, rows = _sequence_backward(params, songs, neg, cfg.loss_kind)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss in epoch {epoch}")
            opt.step(params, *_clip(dense, rows, cfg.clip_norm))
            total += loss
        train_loss = total / len(playlists)
        if not params.all_finite():
            raise NumericError(f"parameters diverged in epoch {epoch}")
        val_loss = _validation_loss(params, val_batches, cfg.loss_kind) if val_batches else None
        history["train_loss"].append(train_loss)
        history["validation_loss"].append(val_loss)
        log.info("epoch %d: train loss %.5f, validation loss %s", epoch, train_loss, val_loss)

        if val_loss is None:
            best = (np.inf, params.copy(), epoch)
            continue
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss in epoch {epoch}")
        if val_loss < best[0]:
            best = (val_loss, params.copy(), epoch)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    best_loss, best_params, best_epoch = best
    return RNNModel(
        best_params, cfg, train.vocabulary_hash(), epochs_run, best_epoch,
        None if not np.isfinite(best_loss) else float(best_loss), history,
    )
