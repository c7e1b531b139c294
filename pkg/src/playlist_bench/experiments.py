"""Song-context and song-order studies, synthetic corpora and report output."""

import enum
import logging
from dataclasses import asdict, dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .corpus import Playlist, PlaylistCorpus, Song, compact, holdout_validation, shuffle_playlists
from .errors import GenerationError
from .evaluation import EvalReport, evaluate_model, summaries_csv, write_text
from .models import ItemCFModel, PopularityModel
from .rng import stream
from .rnn import RNNConfig, rnn_fit

log = logging.getLogger(__name__)

_RANDOM_KEY = 11
_SYNTH_KEY = 12

SUCCESSOR_PROB = 0.9
ZIPF_EXPONENT = 1.0


class OrderCondition(str, enum.Enum):
    ORIGINAL = "original"
    SHUFFLED_TEST = "shuffled_test"
    SHUFFLED_TRAINING = "shuffled_training"
    SHUFFLED_TRAINING_AND_TEST = "shuffled_training_and_test"

    @property
    def index(self):
        return list(OrderCondition).index(self)

    @property
    def shuffles_training(self):
        return self in (OrderCondition.SHUFFLED_TRAINING, OrderCondition.SHUFFLED_TRAINING_AND_TEST)

    @property
    def shuffles_test(self):
        return self in (OrderCondition.SHUFFLED_TEST, OrderCondition.SHUFFLED_TRAINING_AND_TEST)


class RandomModel:
    """Reference scorer: i.i.d. uniform scores, a pure function of (seed, context)."""

    kind = "random"
    vocabulary_hash = ""

    def __init__(self, n_songs, seed=0):
        self.n_songs = n_songs
        self.seed = seed

    def score(self, context):
        keys = [int(s) for s in context]
        return stream(self.seed, _RANDOM_KEY, len(keys), *keys).random(self.n_songs)


class TransitionModel:
    """Scores candidates by a known transition table row of the last song."""

    kind = "transition"
    vocabulary_hash = ""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.float64)
        self.n_songs = self.table.shape[0]

    def score(self, context):
        return self.table[context[-1]].copy()


@dataclass
class ExperimentReport:
    name: str
    reports: list
    config: dict = field(default_factory=dict)
    corpus_stats: dict = field(default_factory=dict)

    def report(self, model_name=None, condition=None):
        for r in self.reports:
            if (model_name is None or r.model_name == model_name) and (condition is None or r.condition == condition):
                return r
        raise KeyError((model_name, condition))

    def summaries_csv(self):
        return summaries_csv(self.reports)


# -- synthetic corpora -----------------------------------------------------------


def _hit_core_successors(rng, n, core_size):
    """Successor map: a random cycle through ``core_size`` hit songs; every other song leads into the core.

    The core cycle is as long as the longest playlist, so following
    successors never repeats a song within a playlist.
    """
    order = rng.permutation(n)
    core, niche = order[:core_size], order[core_size:]
    successor = np.empty(n, dtype=np.int64)
    successor[core] = np.roll(core, -1)
    successor[niche] = rng.choice(core, size=niche.size)
    return successor


def stationary_distribution(table):
    """Stationary distribution of a row-stochastic transition matrix."""
    n = table.shape[0]
    a = table.T - np.eye(n)
    a[-1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def generate_synthetic_corpus(kind, n_songs=100, n_playlists=500, length_range=(5, 15), n_artists=20, seed=0,
                              return_truth=False):
    """Desk-scale playlist corpus with known structure.

    ``markov``: every song has one designated successor taken with
    probability 0.9, otherwise the next song is uniform over the remaining
    songs. Successors form a cycle through ``max length`` hit songs that all
    other songs feed into, which makes song popularity skewed; playlists
    start from the stationary distribution of the chain, so the song
    distribution is the same at every position. ``bag``: songs drawn without
    replacement from a Zipf-like popularity law, so order carries no
    information.

    Songs are assigned round-robin to artists and playlists with fewer than
    3 distinct artists are redrawn. With ``return_truth`` the generating
    table is returned too: the transition matrix (markov) or the popularity
    weights broadcast to every row (bag), in corpus song ids. Songs that were
    never drawn are dropped by compaction and the rows renormalized over the
    rest.
    """
    lo, hi = length_range
    if kind not in ("markov", "bag"):
        raise GenerationError(f"unknown synthetic corpus kind {kind!r}")
    if not (n_songs >= hi >= lo >= 5):
        raise GenerationError(f"need n_songs >= max length >= min length >= 5, got {n_songs}, {length_range}")
    if n_artists < 3 or n_playlists < 1:
        raise GenerationError("need n_artists >= 3 and n_playlists >= 1")
    rng = stream(seed, _SYNTH_KEY)
    artist_of = np.arange(n_songs) % n_artists

    if kind == "markov":
        successor = _hit_core_successors(rng, n_songs, core_size=hi)
        table = np.full((n_songs, n_songs), (1.0 - SUCCESSOR_PROB) / (n_songs - 1))
        table[np.arange(n_songs), successor] = SUCCESSOR_PROB
        start = stationary_distribution(table)

        def draw(length):
            seq = [int(rng.choice(n_songs, p=start))]
            while len(seq) < length:
                prev = seq[-1]
                if rng.random() < SUCCESSOR_PROB:
                    seq.append(int(successor[prev]))
                else:
                    other = int(rng.integers(0, n_songs - 1))
                    seq.append(other + (other >= successor[prev]))
            return seq

    else:
        weights = 1.0 / np.arange(1, n_songs + 1) ** ZIPF_EXPONENT
        weights /= weights.sum()
        table = np.tile(weights, (n_songs, 1))

        def draw(length):
            return rng.choice(n_songs, size=length, replace=False, p=weights).tolist()

    playlists = []
    for i in range(n_playlists):
        length = int(rng.integers(lo, hi + 1))
        for _ in range(1000):
            seq = draw(length)
            if len(set(artist_of[seq].tolist())) >= 3:
                break
        else:
            raise GenerationError("could not draw a playlist with 3 distinct artists")
        playlists.append(Playlist(f"{kind}-{i:05d}", tuple(seq)))

    songs = tuple(Song(i, f"artist {artist_of[i]:03d}", f"song {i:05d}") for i in range(n_songs))
    note = (
        f"synthetic(kind={kind}, n_songs={n_songs}, n_playlists={n_playlists}, "
        f"length_range={tuple(length_range)}, n_artists={n_artists}, seed={seed})"
    )
    corpus, old_to_new = compact(PlaylistCorpus(songs, playlists, ()), note)
    if not return_truth:
        return corpus
    kept = sorted(old_to_new, key=old_to_new.get)
    truth = table[np.ix_(kept, kept)]
    return corpus, truth / truth.sum(axis=1, keepdims=True)


# -- studies ---------------------------------------------------------------------


def _fit_rnn(train, rnn_cfg, seed, validation_fraction):
    fit_side, val_side = holdout_validation(train, validation_fraction, seed)
    return rnn_fit(fit_side, val_side, rnn_cfg)


def run_context_experiment(split, rnn_cfg=None, seed=0, validation_fraction=0.1, recall_ks=(10, 100)):
    """Random, popularity, CF and RNN evaluated on the same test playlists."""
    rnn_cfg = rnn_cfg or RNNConfig()
    train, test = split.train, split.test
    models = {
        "random": RandomModel(train.n_songs, seed),
        "popularity": PopularityModel.fit(train),
        "cf": ItemCFModel.fit(train),
    }
    log.info("fitting rnn on %d training playlists", train.n_playlists)
    models["rnn"] = _fit_rnn(train, rnn_cfg, seed, validation_fraction)

    reports = []
    for name, model in models.items():
        records = evaluate_model(model, test)
        reports.append(EvalReport.build(name, OrderCondition.ORIGINAL.value, records, train.n_songs, recall_ks))
    rnn = models["rnn"]
    return ExperimentReport(
        "context",
        reports,
        config={
            "seed": seed,
            "split_seed": split.seed,
            "train_fraction": split.train_fraction,
            "validation_fraction": validation_fraction,
            "rnn": asdict(rnn_cfg),
            "rnn_epochs_trained": rnn.epochs_trained,
            "rnn_best_epoch": rnn.best_epoch,
        },
        corpus_stats={"train": train.stats(), "test": test.stats()},
    )


def condition_seed(shuffle_seed, condition):
    return (int(shuffle_seed) + OrderCondition(condition).index) % (1 << 64)


def run_order_experiment(split, rnn_cfg=None, shuffle_seed=0, validation_fraction=0.1, recall_ks=(10, 100)):
    """RNN trained and/or evaluated on playlists with shuffled song order.

    Two networks are trained (original and shuffled training playlists) and
    each is reused for both of its conditions. The training shuffle is keyed
    by the ``shuffled_training`` condition seed; a shuffled test side is
    keyed by its own condition seed.
    """
    rnn_cfg = rnn_cfg or RNNConfig()
    train, test = split.train, split.test
    shuffled_train = shuffle_playlists(train, condition_seed(shuffle_seed, OrderCondition.SHUFFLED_TRAINING))
    trained = {
        False: _fit_rnn(train, rnn_cfg, shuffle_seed, validation_fraction),
        True: _fit_rnn(shuffled_train, rnn_cfg, shuffle_seed, validation_fraction),
    }
    reports = []
    for cond in OrderCondition:
        model = trained[cond.shuffles_training]
        test_side = shuffle_playlists(test, condition_seed(shuffle_seed, cond)) if cond.shuffles_test else test
        records = evaluate_model(model, test_side)
        reports.append(EvalReport.build("rnn", cond.value, records, train.n_songs, recall_ks))
    return ExperimentReport(
        "order",
        reports,
        config={
            "shuffle_seed": shuffle_seed,
            "condition_seeds": {c.value: condition_seed(shuffle_seed, c) for c in OrderCondition},
            "split_seed": split.seed,
            "train_fraction": split.train_fraction,
            "validation_fraction": validation_fraction,
            "rnn": asdict(rnn_cfg),
            "rnn_epochs_trained": {str(k): m.epochs_trained for k, m in trained.items()},
        },
        corpus_stats={"train": train.stats(), "test": test.stats()},
    )


# -- output ----------------------------------------------------------------------

_PANEL_W, _PANEL_H, _MARGIN = 420, 260, 50


def render_svg(reports, columns=2):
    """Box summaries (q1, median, q3) per position, one panel per report."""
    rows = (len(reports) + columns - 1) // columns
    width = columns * _PANEL_W
    height = rows * _PANEL_H
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="9">'
    ]
    for i, rep in enumerate(reports):
        ox = (i % columns) * _PANEL_W + _MARGIN
        oy = (i // columns) * _PANEL_H + 30
        pw, ph = _PANEL_W - _MARGIN - 20, _PANEL_H - 80
        label = escape(f"{rep.model_name} / {rep.condition}")
        out.append(f'<g class="panel" data-model="{escape(rep.model_name)}" data-condition="{escape(rep.condition)}">')
        out.append(f'<text x="{ox}" y="{oy - 12}" font-size="11">{label}</text>')
        out.append(f'<rect x="{ox}" y="{oy}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>')
        out.append(f'<text x="{ox - 6}" y="{oy + 4}" text-anchor="end">{rep.n_songs}</text>')
        out.append(f'<text x="{ox - 6}" y="{oy + ph}" text-anchor="end">1</text>')
        if not rep.summaries:
            out.append("</g>")
            continue
        positions = [s.position for s in rep.summaries]
        lo, hi = min(positions), max(positions)
        step = pw / (hi - lo + 1)
        span = max(rep.n_songs - 1, 1)

        def y(rank):
            return oy + ph - (rank - 1) / span * ph

        for s in rep.summaries:
            cx = ox + (s.position - lo + 0.5) * step
            bw = step * 0.6
            top, bottom = y(s.q3), y(s.q1)
            out.append(
                f'<rect class="box" x="{cx - bw / 2:.2f}" y="{top:.2f}" width="{bw:.2f}" '
                f'height="{max(bottom - top, 0.5):.2f}" fill="#cde" stroke="#246"/>'
            )
            out.append(
                f'<line x1="{cx - bw / 2:.2f}" x2="{cx + bw / 2:.2f}" y1="{y(s.median):.2f}" '
                f'y2="{y(s.median):.2f}" stroke="#c00"/>'
            )
            out.append(f'<text class="count" x="{cx:.2f}" y="{top - 3:.2f}" text-anchor="middle">{s.count}</text>')
            out.append(f'<text x="{cx:.2f}" y="{oy + ph + 12}" text-anchor="middle">{s.position}</text>')
        out.append("</g>")
    out.append("</svg>\n")
    return "\n".join(out)


def emit_report(report, csv_path, svg_path=None):
    write_text(csv_path, report.summaries_csv())
    if svg_path is not None:
        write_text(svg_path, render_svg(report.reports))
