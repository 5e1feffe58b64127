"""Training-loop behavior and the command-line surface."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from finetype import cli, training
from finetype.autodiff import Tensor
from finetype.dataset import Document, LabelVocab, Mention, load_corpus, save_corpus
from finetype.errors import ConfigError, DataError
from finetype.tokenize_embed import UniformProvider
from finetype.training import (
    TrainConfig,
    evaluate_model,
    load_model,
    prepare_e2e_examples,
    prepare_mention_examples,
    report_from_prediction_file,
    train,
    write_e2e_predictions,
    write_mention_predictions,
)

from .synth import e2e_corpus, mention_corpus


def small_config(**overrides):
    base = dict(model="mention", embedding="uniform", embedding_dim=6,
                hidden=8, dropout=0.0, batch_size=4, window_W=3,
                lr=0.01, seed=0, max_epochs=2, patience=5)
    base.update(overrides)
    return TrainConfig(**base)


# -- TrainConfig ------------------------------------------------------------------


def test_config_from_file_parses_types_and_comments(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# experiment\n"
        "model = e2e\n"
        "lr = 0.001   # step size\n"
        "hidden = 12\n"
        "batch_size = none\n"
        "\n"
    )
    config = TrainConfig.from_file(cfg)
    assert config.model == "e2e"
    assert config.lr == 0.001
    assert config.hidden == 12
    assert config.resolved_batch_size == 10  # e2e default


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("learning_rate = 0.1\n")
    with pytest.raises(ConfigError, match="learning_rate"):
        TrainConfig.from_file(cfg)


def test_config_rejects_bad_model():
    with pytest.raises(ConfigError):
        TrainConfig(model="transformer")


def test_env_seed_overrides_config(monkeypatch):
    monkeypatch.setenv(training.SEED_ENV_VAR, "99")
    assert TrainConfig(seed=3).seed == 99


def test_default_batch_sizes():
    assert TrainConfig(model="mention").resolved_batch_size == 100
    assert TrainConfig(model="e2e").resolved_batch_size == 10


# -- training loop ----------------------------------------------------------------


def test_train_writes_loadable_checkpoint(tmp_path):
    docs = mention_corpus(20, 4)
    config = small_config(max_epochs=1)
    provider = UniformProvider(dim=6, seed=0)
    ckpt = tmp_path / "model.ckpt"
    record = train(config, docs, docs, provider, checkpoint_path=ckpt)
    assert ckpt.is_file()
    assert len(record.epoch_reports) == 1
    assert record.best_epoch == 0
    model, vocab, loaded_config = load_model(ckpt)
    assert sorted(vocab.labels) == sorted({f"/type{k}" for k in range(4)})
    assert loaded_config.model == "mention"
    assert loaded_config.hidden == config.hidden


def test_train_same_seed_same_dev_curve(tmp_path):
    docs = mention_corpus(16, 4)
    provider = UniformProvider(dim=6, seed=0)
    curves = []
    for run in range(2):
        config = small_config(dropout=0.5, max_epochs=3, seed=7)
        record = train(config, docs, docs, provider,
                       checkpoint_path=tmp_path / f"r{run}.ckpt")
        curves.append([rep.micro_f1 for rep in record.epoch_reports])
    assert curves[0] == curves[1]


def test_loaded_model_scores_match_original(tmp_path):
    docs = mention_corpus(12, 3)
    config = small_config(max_epochs=1)
    provider = UniformProvider(dim=6, seed=0)
    ckpt = tmp_path / "m.ckpt"
    train(config, docs, docs, provider, checkpoint_path=ckpt)
    model, vocab, loaded_config = load_model(ckpt)
    examples = prepare_mention_examples(docs, provider, vocab, config.window_W)
    triples = [ex.triple for ex in examples]
    once = model.forward_triples(triples, mode="eval").data
    model2, _, _ = load_model(ckpt)
    again = model2.forward_triples(triples, mode="eval").data
    assert np.array_equal(once, again)


def test_train_requires_labels():
    docs = [Document(doc_id="d0", tokens=("a", "b"), mentions=())]
    provider = UniformProvider(dim=6, seed=0)
    with pytest.raises(DataError):
        train(small_config(), docs, docs, provider, checkpoint_path="unused.ckpt")


def test_e2e_train_runs_and_reports_all_token_dev(tmp_path):
    docs = e2e_corpus(10, 3)
    config = small_config(model="e2e", batch_size=5, max_epochs=2)
    provider = UniformProvider(dim=6, seed=0)
    record = train(config, docs, docs, provider, checkpoint_path=tmp_path / "e.ckpt")
    assert len(record.epoch_reports) == 2
    model, vocab, _ = load_model(tmp_path / "e.ckpt")
    rep = evaluate_model(model, docs, provider, vocab, "all_token", config)
    assert rep.unit_count == sum(len(d.tokens) for d in docs)


# -- prediction files -------------------------------------------------------------


def test_mention_prediction_file_rescores_identically(tmp_path):
    docs = mention_corpus(15, 3)
    config = small_config(max_epochs=1)
    provider = UniformProvider(dim=6, seed=0)
    ckpt = tmp_path / "m.ckpt"
    train(config, docs, docs, provider, checkpoint_path=ckpt)
    model, vocab, _ = load_model(ckpt)

    examples = prepare_mention_examples(docs, provider, vocab, config.window_W)
    pred_file = tmp_path / "preds.jsonl"
    write_mention_predictions(pred_file, model, examples, vocab)

    live = evaluate_model(model, docs, provider, vocab, "entity_level", config)
    replayed = report_from_prediction_file(pred_file, docs, vocab, "entity_level")
    assert replayed.as_dict() == live.as_dict()


def test_e2e_prediction_file_rescores_identically(tmp_path):
    docs = e2e_corpus(8, 2)
    config = small_config(model="e2e", batch_size=4, max_epochs=1)
    provider = UniformProvider(dim=6, seed=0)
    ckpt = tmp_path / "e.ckpt"
    train(config, docs, docs, provider, checkpoint_path=ckpt)
    model, vocab, _ = load_model(ckpt)

    examples = prepare_e2e_examples(docs, provider, vocab, config.max_seq_len)
    pred_file = tmp_path / "preds.jsonl"
    write_e2e_predictions(pred_file, model, examples, vocab)

    for mode in ("all_token", "e2e_as_mention"):
        live = evaluate_model(model, docs, provider, vocab, mode, config)
        replayed = report_from_prediction_file(pred_file, docs, vocab, mode)
        assert replayed.as_dict() == live.as_dict()


def test_evaluate_model_rejects_unknown_mode():
    docs = mention_corpus(4, 2)
    vocab = LabelVocab.from_documents(docs)
    provider = UniformProvider(dim=6, seed=0)
    model_ckpt_config = small_config()
    from finetype.mention_model import MentionModel
    model = MentionModel(dim=6, hidden=8, n_labels=len(vocab), dropout=0.0, seed=0)
    with pytest.raises(ConfigError):
        evaluate_model(model, docs, provider, vocab, "loose", model_ckpt_config)


# -- CLI --------------------------------------------------------------------------


def test_cli_split_matches_expected_sizes(tmp_path):
    docs = [Document(doc_id=f"d{i}", tokens=("tok",), mentions=())
            for i in range(1312)]
    corpus = tmp_path / "test.jsonl"
    save_corpus(docs, corpus)
    out_dir = tmp_path / "split"
    code = cli.main(["split", "--corpus", str(corpus),
                     "--kind", "m_ontonotes_like", "--out-dir", str(out_dir)])
    assert code == 0
    sizes = {name: len(load_corpus(out_dir / f"{name}.jsonl"))
             for name in ("train", "dev", "test")}
    assert sizes == {"train": 1048, "dev": 132, "test": 132}


@pytest.mark.parametrize("model", ["mention", "e2e"])
def test_cli_gradcheck_passes(model, capsys):
    assert cli.main(["gradcheck", "--model", model, "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "ok" in out


def test_cli_missing_corpus_is_data_error(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    code = cli.main(["split", "--corpus", str(missing),
                     "--kind", "m_ontonotes_like", "--out-dir", str(tmp_path)])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_cli_unknown_flag_is_usage_error(capsys):
    assert cli.main(["train", "--does-not-exist", "x"]) == 1


def test_cli_report_prints_counts(tmp_path, capsys):
    docs = mention_corpus(6, 2)
    corpus = tmp_path / "c.jsonl"
    save_corpus(docs, corpus)
    assert cli.main(["report", str(corpus)]) == 0
    out = capsys.readouterr().out
    assert "c.jsonl" in out
    assert " 6 " in out  # sentence count column


def test_cli_train_evaluate_predict_roundtrip(tmp_path, capsys):
    docs = mention_corpus(20, 4)
    corpus = tmp_path / "train.jsonl"
    save_corpus(docs, corpus)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model = mention\nembedding = uniform\nembedding_dim = 6\n"
        "hidden = 8\ndropout = 0.0\nbatch_size = 4\nwindow_W = 3\n"
        "lr = 0.01\nseed = 0\nmax_epochs = 2\npatience = 5\n"
    )
    ckpt = tmp_path / "model.ckpt"
    assert cli.main(["train", "--config", str(cfg), "--corpus", str(corpus),
                     "--dev", str(corpus), "--out", str(ckpt)]) == 0
    assert ckpt.is_file()

    report_json = tmp_path / "live.json"
    assert cli.main(["evaluate", "--checkpoint", str(ckpt), "--corpus", str(corpus),
                     "--mode", "entity_level", "--out", str(report_json)]) == 0
    live = json.loads(report_json.read_text())

    preds = tmp_path / "preds.jsonl"
    assert cli.main(["predict", "--checkpoint", str(ckpt), "--corpus", str(corpus),
                     "--out", str(preds)]) == 0
    assert preds.is_file() and preds.read_text().strip()

    replay_json = tmp_path / "replay.json"
    assert cli.main(["evaluate", "--checkpoint", str(ckpt), "--corpus", str(corpus),
                     "--mode", "entity_level", "--predictions", str(preds),
                     "--out", str(replay_json)]) == 0
    assert json.loads(replay_json.read_text()) == live
