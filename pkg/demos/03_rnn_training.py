"""
Training the GRU
================

Fit the recurrent model with a BPR loss and watch training and
validation loss per epoch.
"""

import numpy as np

from playlist_bench import RNNConfig, generate_synthetic_corpus, holdout_validation, rnn_fit, split_corpus

corpus = generate_synthetic_corpus("markov", n_songs=100, n_playlists=500, seed=1)
split = split_corpus(corpus, 0.8, seed=1)
fit_side, val_side = holdout_validation(split.train, 0.1, seed=1)

model = rnn_fit(fit_side, val_side, RNNConfig(epochs_max=10, seed=1))
for epoch, (tr, va) in enumerate(zip(model.history["train_loss"], model.history["validation_loss"]), 1):
    print(f"epoch {epoch:2d}  train {tr:.4f}  validation {va:.4f}")
print("stopped after", model.epochs_trained, "epochs, best", model.best_epoch)

# scores for every song after a short prefix; the top song should be the
# successor the generator favours
playlist = split.test.playlists[0].songs
scores = model.score(playlist[:3])
print("prefix", playlist[:3], "actual next", playlist[3], "top 5", np.argsort(-scores)[:5])
