"""Playlist corpora: ingestion, filtering, train/test splitting and shuffling.

A :class:`PlaylistCorpus` is an immutable table of songs (dense integer ids)
plus an ordered list of playlists referring to those ids. All operations
return new corpora and are pure functions of their inputs and seeds.
"""

import hashlib
import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyResultError, ParseError, RejectedSongError, SplitError
from .rng import bit_generator, fisher_yates

CORPUS_FORMAT = "playlist_bench.corpus"
SPLIT_FORMAT = "playlist_bench.split"
FORMAT_VERSION = 1

# stream keys appended to user seeds so that split, holdout and shuffle
# never consume the same random stream
_SPLIT_KEY = 0
_HOLDOUT_KEY = 1
_SHUFFLE_KEY = 2

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class Song:
    id: int
    artist: str
    title: str


@dataclass(frozen=True)
class Playlist:
    id: str
    songs: tuple

    def __len__(self):
        return len(self.songs)


@dataclass(frozen=True)
class PlaylistCorpus:
    songs: tuple = ()
    playlists: tuple = ()
    provenance: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "songs", tuple(self.songs))
        object.__setattr__(self, "playlists", tuple(self.playlists))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        for i, song in enumerate(self.songs):
            if song.id != i:
                raise ValueError(f"song table is not dense: position {i} holds id {song.id}")
        n = len(self.songs)
        for p in self.playlists:
            for s in p.songs:
                if not 0 <= s < n:
                    raise ValueError(f"playlist {p.id!r} references unknown song id {s}")

    @property
    def n_songs(self):
        return len(self.songs)

    @property
    def n_playlists(self):
        return len(self.playlists)

    @property
    def n_artists(self):
        return len({s.artist for s in self.songs})

    def used_songs(self):
        """Set of song ids that occur in at least one playlist."""
        return {s for p in self.playlists for s in p.songs}

    def song_playlist_counts(self):
        """Number of distinct playlists containing each song (length ``n_songs``)."""
        counts = [0] * self.n_songs
        for p in self.playlists:
            for s in set(p.songs):
                counts[s] += 1
        return counts

    def vocabulary_hash(self):
        """SHA-256 over the song table; identifies the id space models are bound to."""
        h = hashlib.sha256()
        for song in self.songs:
            h.update(f"{song.artist}\t{song.title}\n".encode("utf-8"))
        return h.hexdigest()

    def stats(self):
        used = self.used_songs()
        return {
            "playlists": self.n_playlists,
            "songs": len(used),
            "artists": len({self.songs[s].artist for s in used}),
            "song_occurrences": sum(len(p) for p in self.playlists),
        }

    def with_playlists(self, playlists, note=None):
        prov = self.provenance + ((note,) if note else ())
        return PlaylistCorpus(self.songs, tuple(playlists), prov)


@dataclass(frozen=True)
class FilterConfig:
    min_unique_artists: int = 3
    max_songs_per_artist: int = 2
    min_length: int = 5
    min_song_playlist_count: int = 10

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")


@dataclass(frozen=True)
class SplitCorpus:
    """Train/test partition.

    ``test`` shares the song table of ``train``: every test song id is a
    train song id, so models fitted on ``train`` can score test contexts
    directly.
    """

    train: PlaylistCorpus
    test: PlaylistCorpus
    seed: int
    train_fraction: float = 0.8


def canonicalize_song(artist, title):
    """Normalize an (artist, title) pair for exact matching.

    Compatibility decomposition, lowercasing, removal of punctuation and
    combining marks, whitespace collapsing. Idempotent.
    """
    out = (_canonical(artist), _canonical(title))
    if not out[0] or not out[1]:
        raise RejectedSongError(f"empty after canonicalization: {artist!r} / {title!r}")
    return out


def _canonical(text):
    # decompose before lowercasing so compatibility forms such as U+1D468
    # reach their cased letter first; lowering can yield new decompositions
    text = unicodedata.normalize("NFKD", str(text))
    text = unicodedata.normalize("NFKD", text.lower())
    kept = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat[0] in "PM":
            continue
        kept.append(ch)
    return _WHITESPACE.sub(" ", "".join(kept)).strip()


def parse_corpus(lines, strict=True):
    """Build a corpus from JSONL records ``{"id": ..., "songs": [{"artist", "title"}, ...]}``.

    Song ids are assigned in order of first appearance. With ``strict=False``
    rejected songs and empty records are skipped instead of raising.
    """
    index = {}
    songs = []
    playlists = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            pid = str(record["id"])
            raw_songs = record["songs"]
            if not isinstance(raw_songs, list):
                raise TypeError("songs must be an array")
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed record ({exc})", line=lineno) from exc

        ids = []
        for entry in raw_songs:
            try:
                key = canonicalize_song(entry["artist"], entry["title"])
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed song entry {entry!r}", line=lineno) from exc
            except RejectedSongError as exc:
                if strict:
                    raise ParseError(str(exc), line=lineno) from exc
                skipped += 1
                continue
            if key not in index:
                index[key] = len(songs)
                songs.append(Song(len(songs), *key))
            ids.append(index[key])
        if not ids:
            if strict:
                raise ParseError(f"playlist {pid!r} has no songs", line=lineno)
            skipped += 1
            continue
        playlists.append(Playlist(pid, tuple(ids)))

    note = f"parsed {len(playlists)} playlists"
    if skipped:
        note += f" (skipped {skipped} rejected songs/records)"
    return PlaylistCorpus(tuple(songs), tuple(playlists), (note,))


def serialize_corpus(corpus):
    """Yield one JSONL line per playlist, the inverse of :func:`parse_corpus`."""
    for p in corpus.playlists:
        record = {
            "id": p.id,
            "songs": [{"artist": corpus.songs[s].artist, "title": corpus.songs[s].title} for s in p.songs],
        }
        yield json.dumps(record, ensure_ascii=False) + "\n"


def read_jsonl(path, strict=True):
    with open(path, encoding="utf-8") as f:
        return parse_corpus(f, strict=strict)


def write_jsonl(corpus, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(serialize_corpus(corpus))


def _playlist_ok(songs, table, cfg):
    if len(songs) < cfg.min_length:
        return False
    per_artist = Counter(table[s].artist for s in songs)
    if len(per_artist) < cfg.min_unique_artists:
        return False
    return max(per_artist.values()) <= cfg.max_songs_per_artist


def compact(corpus, note=None):
    """Drop songs that occur in no playlist and re-densify ids.

    Relative order of the surviving ids is preserved. Returns
    ``(corpus, old_to_new)``.
    """
    used = sorted(corpus.used_songs())
    old_to_new = {old: new for new, old in enumerate(used)}
    songs = tuple(Song(old_to_new[old], corpus.songs[old].artist, corpus.songs[old].title) for old in used)
    playlists = tuple(Playlist(p.id, tuple(old_to_new[s] for s in p.songs)) for p in corpus.playlists)
    prov = corpus.provenance + ((note,) if note else ())
    return PlaylistCorpus(songs, playlists, prov), old_to_new


def filter_corpus(corpus, cfg=None):
    """Apply the playlist and song filters until all of them hold at once.

    Playlists violating the artist-diversity or length rules are dropped,
    then songs found in fewer than ``min_song_playlist_count`` playlists are
    deleted from the remaining playlists; this repeats until nothing changes.
    """
    cfg = cfg or FilterConfig()
    table = corpus.songs
    playlists = [(p.id, list(p.songs)) for p in corpus.playlists]
    rounds = 0
    while True:
        rounds += 1
        playlists = [(pid, songs) for pid, songs in playlists if _playlist_ok(songs, table, cfg)]
        counts = Counter(s for _, songs in playlists for s in set(songs))
        rare = {s for s, c in counts.items() if c < cfg.min_song_playlist_count}
        if not rare:
            break
        playlists = [(pid, [s for s in songs if s not in rare]) for pid, songs in playlists]

    if not playlists:
        raise EmptyResultError(f"no playlist survives filtering with {cfg}")
    kept = corpus.with_playlists(Playlist(pid, tuple(songs)) for pid, songs in playlists)
    note = (
        f"filter(min_unique_artists={cfg.min_unique_artists}, max_songs_per_artist={cfg.max_songs_per_artist}, "
        f"min_length={cfg.min_length}, min_song_playlist_count={cfg.min_song_playlist_count}) "
        f"converged after {rounds} rounds: {len(playlists)} playlists"
    )
    return compact(kept, note)[0]


def split_corpus(corpus, train_fraction=0.8, seed=0):
    """Random whole-playlist train/test split with vocabulary closure.

    Test songs never seen in training are deleted from their test playlists;
    test playlists left with fewer than two songs are dropped.
    """
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = corpus.n_playlists
    if n < 2:
        raise SplitError("need at least 2 playlists to split")
    order = fisher_yates(range(n), bit_generator(seed, _SPLIT_KEY))
    n_train = math.floor(n * train_fraction)
    train_raw = corpus.with_playlists(corpus.playlists[i] for i in order[:n_train])
    test_raw = [corpus.playlists[i] for i in order[n_train:]]
    if not train_raw.playlists or not test_raw:
        raise SplitError(f"split of {n} playlists at {train_fraction} leaves one side empty")

    train, old_to_new = compact(
        train_raw, f"split(seed={seed}, train_fraction={train_fraction}): train side, {n_train} playlists"
    )
    test_playlists = []
    removed_songs = 0
    for p in test_raw:
        kept = tuple(old_to_new[s] for s in p.songs if s in old_to_new)
        removed_songs += len(p) - len(kept)
        if len(kept) >= 2:
            test_playlists.append(Playlist(p.id, kept))
    if not test_playlists:
        raise SplitError("no test playlist keeps 2 or more songs after vocabulary closure")
    test = PlaylistCorpus(
        train.songs,
        tuple(test_playlists),
        corpus.provenance
        + (
            f"split(seed={seed}, train_fraction={train_fraction}): test side, {len(test_raw)} playlists, "
            f"{removed_songs} train-unseen song occurrences removed, "
            f"{len(test_raw) - len(test_playlists)} playlists dropped below 2 songs",
        ),
    )
    return SplitCorpus(train, test, int(seed), float(train_fraction))


def holdout_validation(train, fraction=0.1, seed=0):
    """Withhold ``ceil(N * fraction)`` whole playlists for validation.

    Both sides keep the song table of ``train``.
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must be in (0, 1), got {fraction}")
    n = train.n_playlists
    # round() guards against 0.1 * 30 = 3.0000000000000004 style ceilings
    n_val = math.ceil(round(n * fraction, 9))
    if n_val < 1 or n_val >= n:
        raise SplitError(f"holdout of {n} playlists at {fraction} leaves one side empty")
    order = fisher_yates(range(n), bit_generator(seed, _HOLDOUT_KEY))
    val_idx = sorted(order[:n_val])
    fit_idx = sorted(order[n_val:])
    note = f"holdout(seed={seed}, fraction={fraction})"
    fit = train.with_playlists((train.playlists[i] for i in fit_idx), note + ": fit side")
    val = train.with_playlists((train.playlists[i] for i in val_idx), note + ": validation side")
    return fit, val


def shuffle_playlists(corpus, seed=0):
    """Independently permute the song order inside every playlist.

    Playlist ``i`` is shuffled with its own stream keyed by ``(seed, i)``.
    """
    shuffled = tuple(
        Playlist(p.id, tuple(fisher_yates(p.songs, bit_generator(seed, _SHUFFLE_KEY, i))))
        for i, p in enumerate(corpus.playlists)
    )
    return corpus.with_playlists(shuffled, f"shuffle_playlists(seed={seed})")


# -- persistence -------------------------------------------------------------


def corpus_to_dict(corpus):
    return {
        "format": CORPUS_FORMAT,
        "version": FORMAT_VERSION,
        "songs": [[s.artist, s.title] for s in corpus.songs],
        "playlists": [{"id": p.id, "songs": list(p.songs)} for p in corpus.playlists],
        "provenance": list(corpus.provenance),
    }


def corpus_from_dict(data):
    _check_header(data, CORPUS_FORMAT)
    songs = tuple(Song(i, a, t) for i, (a, t) in enumerate(data["songs"]))
    playlists = tuple(Playlist(p["id"], tuple(p["songs"])) for p in data["playlists"])
    return PlaylistCorpus(songs, playlists, tuple(data.get("provenance", ())))


def split_to_dict(split):
    return {
        "format": SPLIT_FORMAT,
        "version": FORMAT_VERSION,
        "seed": split.seed,
        "train_fraction": split.train_fraction,
        "train": corpus_to_dict(split.train),
        "test": corpus_to_dict(split.test),
    }


def split_from_dict(data):
    _check_header(data, SPLIT_FORMAT)
    train = corpus_from_dict(data["train"])
    test = corpus_from_dict(data["test"])
    if train.songs != test.songs:
        raise ParseError("split container: test song table differs from train")
    return SplitCorpus(train, test, data["seed"], data["train_fraction"])


def _check_header(data, expected):
    if not isinstance(data, dict) or data.get("format") != expected:
        raise ParseError(f"not a {expected} container")
    if data.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported {expected} version {data.get('version')!r}")


def save_corpus(corpus, path):
    Path(path).write_text(json.dumps(corpus_to_dict(corpus), ensure_ascii=False), encoding="utf-8")


def load_corpus(path):
    return corpus_from_dict(_load_json(path))


def save_split(split, path):
    Path(path).write_text(json.dumps(split_to_dict(split), ensure_ascii=False), encoding="utf-8")


def load_split(path):
    return split_from_dict(_load_json(path))


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
