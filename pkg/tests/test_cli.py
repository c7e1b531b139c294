import json

import pytest

from playlist_bench.cli import main

from .conftest import DATA


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def split_path(tmp_path):
    corpus = tmp_path / "corpus.json"
    split = tmp_path / "split.json"
    assert run("synth", "--kind", "markov", "--songs", 40, "--playlists", 120, "--max-len", 10,
               "--artists", 8, "--seed", 3, "--output", corpus) == 0
    assert run("split", "--corpus", corpus, "--train-frac", 0.8, "--seed", 1, "--output", split) == 0
    return split


def test_ingest(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert run("ingest", "--input", DATA / "cascade12.jsonl", "--output", out) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["filtered"] == {"playlists": 11, "songs": 5, "artists": 5, "song_occurrences": 55}


def test_train_and_evaluate(tmp_path, split_path, capsys):
    for kind in ("pop", "cf", "rnn"):
        model = tmp_path / f"{kind}.npz"
        extra = ["--epochs", 2, "--dim", 4, "--hidden", 8, "--negatives", 5] if kind == "rnn" else []
        assert run("train", "--split", split_path, "--model", kind, "--seed", 2, "--output", model, *extra) == 0
        csv_path = tmp_path / f"{kind}.csv"
        rec_path = tmp_path / f"{kind}-records.csv"
        assert run("evaluate", "--split", split_path, "--model", model, "--csv", csv_path,
                   "--records", rec_path, "--recall-k", "1,5") == 0
        header = csv_path.read_text().splitlines()[0]
        assert header == "model,condition,position,count,q1,median,q3"
        assert rec_path.read_text().startswith("playlist_id,position,rank\n")
    out = capsys.readouterr().out.strip().splitlines()
    assert set(json.loads(out[-1])["recall"]) == {"1", "5"}


def test_experiment_outputs_are_reproducible(tmp_path, split_path):
    fast = ["--epochs", 2, "--dim", 4, "--hidden", 8, "--negatives", 5]
    for study in ("context", "order"):
        a, b = tmp_path / f"{study}-a.csv", tmp_path / f"{study}-b.csv"
        assert run("experiment", study, "--split", split_path, "--seed", 9, "--csv", a,
                   "--svg", tmp_path / f"{study}.svg", *fast) == 0
        assert run("experiment", study, "--split", split_path, "--seed", 9, "--csv", b, *fast) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / f"{study}.svg").read_text().startswith("<svg")


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run("split", "--corpus", "x.json")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("synth", "--kind", "markov", "--seed", -1, "--output", "x")
    assert exc.value.code == 1


def test_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "p", "songs": []}\n')
    assert run("ingest", "--input", bad, "--output", tmp_path / "c.json") == 2
    assert "line 1" in capsys.readouterr().err
    assert run("split", "--corpus", tmp_path / "missing.json", "--seed", 0, "--output", tmp_path / "s") == 2


def test_model_vocabulary_mismatch_exit_code(tmp_path, split_path):
    model = tmp_path / "pop.npz"
    assert run("train", "--split", split_path, "--model", "pop", "--output", model) == 0
    other_corpus = tmp_path / "other.json"
    other_split = tmp_path / "other-split.json"
    run("synth", "--kind", "bag", "--songs", 30, "--playlists", 50, "--max-len", 8, "--artists", 5,
        "--seed", 1, "--output", other_corpus)
    run("split", "--corpus", other_corpus, "--seed", 1, "--output", other_split)
    assert run("evaluate", "--split", other_split, "--model", model, "--csv", tmp_path / "x.csv") == 2
