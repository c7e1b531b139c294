"""Offline benchmark for next-song playlist continuation.

Popularity, song-based cosine CF and a GRU ranking model, evaluated by the
rank of the actual next song at every playlist position.
"""

from .corpus import (
    FilterConfig,
    Playlist,
    PlaylistCorpus,
    Song,
    SplitCorpus,
    canonicalize_song,
    filter_corpus,
    holdout_validation,
    load_corpus,
    load_split,
    parse_corpus,
    read_jsonl,
    save_corpus,
    save_split,
    serialize_corpus,
    shuffle_playlists,
    split_corpus,
)
from .errors import (
    DomainError,
    EmptyResultError,
    FitError,
    GenerationError,
    NumericError,
    ParseError,
    PlaylistBenchError,
    RejectedSongError,
    SplitError,
)
from .evaluation import (
    EvalReport,
    PositionSummary,
    RankRecord,
    evaluate_model,
    rank_of,
    recall_at_k,
    summarize_by_position,
)
from .experiments import (
    ExperimentReport,
    OrderCondition,
    RandomModel,
    emit_report,
    generate_synthetic_corpus,
    run_context_experiment,
    run_order_experiment,
)
from .models import ItemCFModel, PopularityModel, cf_fit, cosine_similarity, load_model, popularity_fit, save_model
from .rnn import RNNConfig, RNNModel, RNNParams, compute_gradients, gru_forward, ranking_loss, rnn_fit

__version__ = "0.1.0"
