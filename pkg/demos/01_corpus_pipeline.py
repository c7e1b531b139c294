"""
From raw playlists to a train/test split
========================================

Parse a few JSONL playlists, filter them down to a usable core and split
them so that every test song also appears in training.
"""

from pathlib import Path

from playlist_bench import FilterConfig, filter_corpus, read_jsonl, split_corpus

# the cascade fixture is small enough to follow by hand: dropping the rare
# songs X and Y makes some playlists too short, which in turn makes another
# song rare, and so on until nothing changes
raw = read_jsonl(Path(__file__).parents[1] / "tests" / "data" / "cascade12.jsonl")
print("raw:", raw.stats())

filtered = filter_corpus(raw, FilterConfig(min_song_playlist_count=10))
print("filtered:", filtered.stats())
print(filtered.provenance[-1])

# 80/20 split by playlist; test songs unseen in training are removed
split = split_corpus(filtered, train_fraction=0.8, seed=0)
print("train", split.train.n_playlists, "test", split.test.n_playlists)
