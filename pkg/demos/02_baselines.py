"""
Popularity and item-to-item CF
==============================

Both baselines look at most at the last song, so their ranks should not
improve as the playlist goes on.
"""

from playlist_bench import (
    ItemCFModel,
    PopularityModel,
    evaluate_model,
    generate_synthetic_corpus,
    split_corpus,
    summarize_by_position,
)

corpus = generate_synthetic_corpus("markov", n_songs=100, n_playlists=500, seed=0)
split = split_corpus(corpus, 0.8, seed=0)

for model in (PopularityModel.fit(split.train), ItemCFModel.fit(split.train)):
    summaries = summarize_by_position(evaluate_model(model, split.test))
    # median rank per position: flat lines are what we expect here
    print(model.kind, [s.median for s in summaries])

# the CF matrix is a plain cosine of playlist-membership vectors
sim = ItemCFModel.fit(split.train).similarity
print("symmetric", (sim == sim.T).all(), "unit diagonal", (sim.diagonal() == 1).all())
