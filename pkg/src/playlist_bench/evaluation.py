"""Position-wise next-song rank evaluation.

For a test playlist of length L the model is shown the true prefix of
length k - 1 and the rank of the actual k-th song among all candidate songs
is recorded, for k = 2..L. Ranks are 1-based under the total order
(score descending, song id ascending).
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError

QUANTILES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class RankRecord:
    playlist_id: str
    position: int
    rank: int


@dataclass(frozen=True)
class PositionSummary:
    position: int
    count: int
    q1: float
    median: float
    q3: float


@dataclass
class EvalReport:
    model_name: str
    condition: str
    records: list
    summaries: list
    n_songs: int
    recall: dict = field(default_factory=dict)

    @classmethod
    def build(cls, model_name, condition, records, n_songs, recall_ks=()):
        return cls(
            model_name,
            condition,
            list(records),
            summarize_by_position(records),
            n_songs,
            {k: recall_at_k(records, k) for k in recall_ks},
        )

    def overall_median(self):
        return float(np.median([r.rank for r in self.records]))

    def medians_by_position(self):
        return {s.position: s.median for s in self.summaries}


def rank_of(scores, target):
    scores = np.asarray(scores)
    if not 0 <= target < scores.shape[0]:
        raise DomainError(f"target {target} outside [0, {scores.shape[0]})")
    if not np.all(np.isfinite(scores)):
        raise NumericError("score vector contains non-finite values")
    s = scores[target]
    return int(1 + np.count_nonzero(scores > s) + np.count_nonzero(scores[:target] == s))


def evaluate_model(model, test):
    """Rank records for every test playlist, in playlist then position order.

    Models with a ``score_prefixes(songs)`` method (the RNN) are scored in one
    pass per playlist; others are called once per prefix.
    """
    n = model.n_songs
    if test.n_songs != n:
        raise DomainError(f"test corpus has {test.n_songs} songs but the model was fitted on {n}")
    expected = getattr(model, "vocabulary_hash", "")
    if expected and expected != test.vocabulary_hash():
        raise DomainError("model vocabulary does not match the test corpus")

    batched = hasattr(model, "score_prefixes")
    records = []
    for p in test.playlists:
        songs = list(p.songs)
        if len(songs) < 2:
            continue
        if batched:
            rows = model.score_prefixes(songs)
        else:
            rows = (model.score(songs[: k - 1]) for k in range(2, len(songs) + 1))
        for k, scores in enumerate(rows, start=2):
            records.append(RankRecord(p.id, k, rank_of(scores, songs[k - 1])))
    return records


def summarize_by_position(records):
    """Quartiles of the ranks at each position (linear interpolation at (n - 1) q)."""
    by_pos = {}
    for r in records:
        by_pos.setdefault(r.position, []).append(r.rank)
    out = []
    for pos in sorted(by_pos):
        ranks = np.sort(np.asarray(by_pos[pos], dtype=np.float64))
        q1, med, q3 = np.quantile(ranks, QUANTILES, method="linear")
        out.append(PositionSummary(pos, len(ranks), float(q1), float(med), float(q3)))
    return out


def recall_at_k(records, k):
    if k < 1:
        raise DomainError("K must be >= 1")
    if not records:
        raise DomainError("recall is undefined for zero records")
    return sum(r.rank <= k for r in records) / len(records)


# -- CSV -----------------------------------------------------------------------

SUMMARY_HEADER = ("model", "condition", "position", "count", "q1", "median", "q3")
RECORD_HEADER = ("playlist_id", "position", "rank")


def summaries_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for rep in reports:
        for s in rep.summaries:
            w.writerow(
                [rep.model_name, rep.condition, s.position, s.count, f"{s.q1:.6f}", f"{s.median:.6f}", f"{s.q3:.6f}"]
            )
    return buf.getvalue()


def records_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    w.writerows((r.playlist_id, r.position, r.rank) for r in records)
    return buf.getvalue()


def read_summaries_csv(text):
    """Parse summary CSV text into ``{(model, condition): [PositionSummary, ...]}``."""
    rows = csv.DictReader(io.StringIO(text))
    if tuple(rows.fieldnames or ()) != SUMMARY_HEADER:
        raise DomainError(f"unexpected summary CSV header {rows.fieldnames}")
    out = {}
    for row in rows:
        s = PositionSummary(
            int(row["position"]), int(row["count"]), float(row["q1"]), float(row["median"]), float(row["q3"])
        )
        out.setdefault((row["model"], row["condition"]), []).append(s)
    return out


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
