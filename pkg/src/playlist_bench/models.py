"""Context-limited playlist models: song popularity and song-based cosine CF.

Every model exposes ``score(context) -> ndarray`` of length ``n_songs`` where
higher means more likely to be the next song. ``context`` is the non-empty
sequence of song ids played so far, oldest first.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DomainError, ParseError

MODEL_FORMAT = "playlist_bench.model"
MODEL_VERSION = 1


def _check_context(context, n_songs):
    context = np.asarray(context, dtype=np.int64)
    if context.ndim != 1 or context.size == 0:
        raise DomainError("context must be a non-empty sequence of song ids")
    if context.min() < 0 or context.max() >= n_songs:
        raise DomainError(f"context {context.tolist()} has ids outside [0, {n_songs})")
    return context


def membership_matrix(corpus):
    """Binary songs x playlists matrix (CSR); row ``s`` indicates the playlists containing ``s``."""
    rows, cols = [], []
    for j, p in enumerate(corpus.playlists):
        for s in set(p.songs):
            rows.append(s)
            cols.append(j)
    data = np.ones(len(rows), dtype=np.int64)
    return sparse.csr_matrix((data, (rows, cols)), shape=(corpus.n_songs, corpus.n_playlists))


@dataclass(frozen=True, eq=False)
class PopularityModel:
    playlist_count: np.ndarray
    vocabulary_hash: str = ""

    kind = "pop"

    @property
    def n_songs(self):
        return self.playlist_count.shape[0]

    @classmethod
    def fit(cls, train):
        if not train.playlists:
            raise DomainError("cannot fit on an empty corpus")
        counts = np.asarray(train.song_playlist_counts(), dtype=np.int64)
        counts.setflags(write=False)
        return cls(counts, train.vocabulary_hash())

    def score(self, context):
        _check_context(context, self.n_songs)
        return self.playlist_count.astype(np.float64)

    def arrays(self):
        return {"playlist_count": self.playlist_count}


def popularity_fit(train):
    return PopularityModel.fit(train)


def cosine_similarity(p_i, p_j):
    """Cosine between two binary (or any non-negative) vectors."""
    a = np.asarray(p_i, dtype=np.float64)
    b = np.asarray(p_j, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise DomainError("vectors must be 1-d with equal non-zero length")
    na, nb = np.dot(a, a), np.dot(b, b)
    if na == 0 or nb == 0:
        raise DomainError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / np.sqrt(na * nb))


@dataclass(frozen=True, eq=False)
class ItemCFModel:
    similarity: np.ndarray
    vocabulary_hash: str = ""
    membership: sparse.csr_matrix = field(default=None, repr=False)

    kind = "cf"

    @property
    def n_songs(self):
        return self.similarity.shape[0]

    @classmethod
    def fit(cls, train):
        if not train.playlists:
            raise DomainError("cannot fit on an empty corpus")
        member = membership_matrix(train)
        co = (member @ member.T).toarray()  # exact integer co-occurrence counts
        n = np.diag(co).copy()
        if np.any(n == 0):
            missing = np.flatnonzero(n == 0)[:5].tolist()
            raise DomainError(f"songs {missing} occur in no training playlist; similarity undefined")
        # dividing by sqrt of the exact integer product keeps the matrix exactly
        # symmetric and bounded by 1, with an exact unit diagonal
        sim = co / np.sqrt(np.outer(n, n).astype(np.float64))
        sim.setflags(write=False)
        return cls(sim, train.vocabulary_hash(), member)

    def score(self, context):
        context = _check_context(context, self.n_songs)
        return self.similarity[context[-1]].copy()

    def arrays(self):
        return {"similarity": self.similarity}


def cf_fit(train):
    return ItemCFModel.fit(train)


# -- persistence -------------------------------------------------------------


def save_model(model, path, extra=None):
    """Write a versioned ``.npz`` container with the model arrays and metadata."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "vocabulary_hash": model.vocabulary_hash,
    }
    meta.update(extra or {})
    if hasattr(model, "metadata"):
        meta.update(model.metadata())
    with open(path, "wb") as f:
        np.savez_compressed(f, __meta__=np.array(json.dumps(meta)), **model.arrays())


def load_model(path, corpus=None):
    """Load a model container; verify its vocabulary against ``corpus`` when given."""
    from .rnn import RNNModel

    with np.load(path, allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["__meta__"]))
        except KeyError as exc:
            raise ParseError(f"{path}: not a model container") from exc
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    if meta.get("format") != MODEL_FORMAT or meta.get("version") != MODEL_VERSION:
        raise ParseError(f"{path}: unsupported model container {meta.get('format')!r} v{meta.get('version')!r}")
    if corpus is not None and meta["vocabulary_hash"] != corpus.vocabulary_hash():
        raise DomainError(f"{path}: model vocabulary does not match the evaluation corpus")

    kind = meta["kind"]
    if kind == "pop":
        return PopularityModel(arrays["playlist_count"], meta["vocabulary_hash"])
    if kind == "cf":
        return ItemCFModel(arrays["similarity"], meta["vocabulary_hash"])
    if kind == "rnn":
        return RNNModel.from_container(meta, arrays)
    raise ParseError(f"{path}: unknown model kind {kind!r}")
