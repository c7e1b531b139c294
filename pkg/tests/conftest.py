from pathlib import Path

import numpy as np
import pytest

from playlist_bench.corpus import Playlist, PlaylistCorpus, Song, read_jsonl

DATA = Path(__file__).parent / "data"

# lines collected by test_acceptance and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy3():
    """{[A,B,C,D,E], [A,B,D,E,F], [A,C,D,E,F]} with ids A=0 .. F=5."""
    return read_jsonl(DATA / "toy3.jsonl")


@pytest.fixture
def cascade12():
    return read_jsonl(DATA / "cascade12.jsonl")


def make_corpus(playlists, n_artists=None):
    """Corpus from lists of song ids; song i is by artist i (or i % n_artists)."""
    n = max(max(p) for p in playlists) + 1 if playlists else 0
    songs = [Song(i, f"artist {i if n_artists is None else i % n_artists}", f"song {i}") for i in range(n)]
    return PlaylistCorpus(songs, [Playlist(f"p{j}", tuple(p)) for j, p in enumerate(playlists)])


def random_corpus(seed, n_playlists=200, n_songs=40, n_artists=10, lengths=(2, 12)):
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_songs + 1)
    weights /= weights.sum()
    playlists = []
    for _ in range(n_playlists):
        length = int(rng.integers(lengths[0], lengths[1] + 1))
        playlists.append(rng.choice(n_songs, size=length, replace=True, p=weights).tolist())
    songs = [Song(i, f"artist {i % n_artists}", f"song {i}") for i in range(n_songs)]
    return PlaylistCorpus(songs, [Playlist(f"r{j}", tuple(p)) for j, p in enumerate(playlists)])
