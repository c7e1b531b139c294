"""
Does longer context help?
=========================

Random, popularity, CF and the GRU on the same markov test playlists. Only
the GRU can use more than the last song.
"""

from playlist_bench import emit_report, generate_synthetic_corpus, run_context_experiment, split_corpus

corpus = generate_synthetic_corpus("markov", n_songs=100, n_playlists=500, seed=0)
report = run_context_experiment(split_corpus(corpus, 0.8, seed=0), seed=0)

for rep in report.reports:
    print(f"{rep.model_name:>10}  overall median {rep.overall_median():5.1f}  recall@10 {rep.recall[10]:.3f}")

# boxes per position with the number of ranks written above each one
emit_report(report, "song_context.csv", "song_context.svg")
