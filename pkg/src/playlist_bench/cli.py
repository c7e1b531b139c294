"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data/domain error, 3 numeric error.
"""

import argparse
import json
import logging
import sys

from . import corpus as corpus_mod
from .errors import PlaylistBenchError
from .evaluation import EvalReport, evaluate_model, records_csv, summaries_csv, write_text
from .experiments import emit_report, generate_synthetic_corpus, run_context_experiment, run_order_experiment
from .models import ItemCFModel, PopularityModel, load_model, save_model
from .rnn import RNNConfig, rnn_fit

log = logging.getLogger("playlist_bench")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _u64(text):
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rnn_options():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("rnn options")
    g.add_argument("--loss", choices=("bpr", "top1"), default="bpr")
    g.add_argument("--dim", type=int, default=32, help="embedding size")
    g.add_argument("--hidden", type=int, default=64, help="GRU hidden size")
    g.add_argument("--lr", type=float, default=0.05)
    g.add_argument("--epochs", type=int, default=20)
    g.add_argument("--patience", type=int, default=2)
    g.add_argument("--negatives", type=int, default=50)
    g.add_argument("--val-frac", type=float, default=0.1, help="validation holdout fraction of training playlists")
    return p


def _rnn_config(args, seed):
    return RNNConfig(
        embedding_dim=args.dim,
        hidden_dim=args.hidden,
        loss_kind=args.loss,
        learning_rate=args.lr,
        epochs_max=args.epochs,
        patience=args.patience,
        n_negatives=args.negatives,
        seed=seed,
    )


def build_parser():
    parser = _Parser(prog="playlist-bench", description="Offline playlist continuation benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    rnn_opts = _rnn_options()

    p = sub.add_parser("ingest", help="parse JSONL playlists and apply the corpus filters")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-artists", type=int, default=3)
    p.add_argument("--max-per-artist", type=int, default=2)
    p.add_argument("--min-length", type=int, default=5)
    p.add_argument("--min-song-freq", type=int, default=10)
    p.add_argument("--lenient", action="store_true", help="skip songs that canonicalize to empty strings")

    p = sub.add_parser("split", help="train/test split with vocabulary closure")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("train", help="fit a model on the training side of a split", parents=[rnn_opts])
    p.add_argument("--split", required=True)
    p.add_argument("--model", choices=("pop", "cf", "rnn"), required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("evaluate", help="position-wise rank evaluation on the test side")
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--csv", required=True, help="summary CSV output")
    p.add_argument("--records", help="optional per-prediction CSV output")
    p.add_argument("--recall-k", type=_int_list, default=[10, 100])

    p = sub.add_parser("experiment", help="run the song-context or song-order study", parents=[rnn_opts])
    p.add_argument("study", choices=("context", "order"))
    p.add_argument("--split", required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--svg")
    p.add_argument("--rnn-seed", type=_u64, help="defaults to --seed")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--kind", choices=("markov", "bag"), required=True)
    p.add_argument("--songs", type=int, default=100)
    p.add_argument("--playlists", type=int, default=500)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=15)
    p.add_argument("--artists", type=int, default=20)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--output", required=True)
    return parser


def _ingest(args):
    cfg = corpus_mod.FilterConfig(args.min_artists, args.max_per_artist, args.min_length, args.min_song_freq)
    raw = corpus_mod.read_jsonl(args.input, strict=not args.lenient)
    filtered = corpus_mod.filter_corpus(raw, cfg)
    corpus_mod.save_corpus(filtered, args.output)
    print(json.dumps({"raw": raw.stats(), "filtered": filtered.stats()}))


def _split(args):
    c = corpus_mod.load_corpus(args.corpus)
    s = corpus_mod.split_corpus(c, args.train_frac, args.seed)
    corpus_mod.save_split(s, args.output)
    print(json.dumps({"train": s.train.stats(), "test": s.test.stats()}))


def _train(args):
    split = corpus_mod.load_split(args.split)
    if args.model == "pop":
        model = PopularityModel.fit(split.train)
    elif args.model == "cf":
        model = ItemCFModel.fit(split.train)
    else:
        fit_side, val_side = corpus_mod.holdout_validation(split.train, args.val_frac, args.seed)
        model = rnn_fit(fit_side, val_side, _rnn_config(args, args.seed))
    save_model(model, args.output)


def _evaluate(args):
    split = corpus_mod.load_split(args.split)
    model = load_model(args.model, corpus=split.test)
    records = evaluate_model(model, split.test)
    report = EvalReport.build(model.kind, "original", records, model.n_songs, args.recall_k)
    write_text(args.csv, summaries_csv([report]))
    if args.records:
        write_text(args.records, records_csv(records))
    print(json.dumps({"records": len(records), "recall": {str(k): v for k, v in report.recall.items()}}))


def _experiment(args):
    split = corpus_mod.load_split(args.split)
    cfg = _rnn_config(args, args.seed if args.rnn_seed is None else args.rnn_seed)
    if args.study == "context":
        report = run_context_experiment(split, cfg, args.seed, args.val_frac)
    else:
        report = run_order_experiment(split, cfg, args.seed, args.val_frac)
    emit_report(report, args.csv, args.svg)
    print(json.dumps({r.model_name + "/" + r.condition: r.overall_median() for r in report.reports}))


def _synth(args):
    c = generate_synthetic_corpus(
        args.kind, args.songs, args.playlists, (args.min_len, args.max_len), args.artists, args.seed
    )
    corpus_mod.save_corpus(c, args.output)
    print(json.dumps(c.stats()))


_COMMANDS = {
    "ingest": _ingest,
    "split": _split,
    "train": _train,
    "evaluate": _evaluate,
    "experiment": _experiment,
    "synth": _synth,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _COMMANDS[args.command](args)
    except PlaylistBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
