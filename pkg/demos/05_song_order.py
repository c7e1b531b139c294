"""
Does song order matter?
=======================

Train and test the GRU on original or shuffled playlists. On a bag-of-songs
corpus order carries no information, so all four conditions should agree.
On a markov corpus shuffling the test side should hurt.
"""

from playlist_bench import generate_synthetic_corpus, run_order_experiment, split_corpus

for kind in ("bag", "markov"):
    corpus = generate_synthetic_corpus(kind, n_songs=100, n_playlists=500, seed=0)
    report = run_order_experiment(split_corpus(corpus, 0.8, seed=0), shuffle_seed=0)
    print(kind)
    for rep in report.reports:
        print(f"  {rep.condition:>27}  median {rep.overall_median():5.1f}")
