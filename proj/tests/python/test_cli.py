import hashlib
import json
import os

import numpy as np
import pytest

import sensekit as sk
from conftest import one_sense_model, rigged_model


def md5(path):
    return hashlib.md5(path.read_bytes()).hexdigest()


def test_usage_errors(cli):
    assert cli().returncode == 2
    assert cli("train", "--bogus").returncode == 2
    assert cli("train", "--corpus", "x").returncode == 2


def test_help_lists_defaults(cli):
    out = cli("train", "--help", check=0).stdout
    for flag in ("--window INT [5]", "--negatives UINT [10]", "--senses UINT [3]",
                 "--dim UINT [300]", "--lr FLOAT [0.001]", "--epochs UINT [2]"):
        assert flag in out
    out = cli("distill", "--help", check=0).stdout
    assert "--alpha FLOAT [1]" in out
    assert "--temperature FLOAT [4]" in out
    assert "--kd-direction TEXT [paper]" in out


def test_build_vocab(cli, tiny_corpus, tmp_path):
    out = tmp_path / "vocab.txt"
    cli("build-vocab", "--corpus", tiny_corpus, "--out", out, "--min-count", "1", check=0)
    first = md5(out)
    cli("build-vocab", "--corpus", tiny_corpus, "--out", out, "--min-count", "1", check=0)
    assert md5(out) == first
    all_words = len(out.read_text().splitlines())

    cli("build-vocab", "--corpus", tiny_corpus, "--out", out, "--min-count", "2", check=0)
    lines = out.read_text().splitlines()
    assert 0 < len(lines) < all_words
    assert all(int(line.split("\t")[1]) >= 2 for line in lines)
    assert lines[0] == "the\t11"

    manifest = json.loads((tmp_path / "vocab.txt.manifest.json").read_text())
    assert manifest["command"] == "build-vocab"
    assert manifest["config"]["min_count"] == 2
    assert manifest["inputs"][str(tiny_corpus)] == md5(tiny_corpus)
    assert manifest["outputs"][str(out)] == md5(out)
    assert manifest["started"] <= manifest["finished"]

    missing = cli("build-vocab", "--corpus", tmp_path / "nope.txt", "--out", out)
    assert missing.returncode == 3
    assert "nope.txt" in missing.stderr
    empty = cli("build-vocab", "--corpus", tiny_corpus, "--out", out, "--min-count", "1000")
    assert empty.returncode == 3


def train_args(corpus, vocab, out, *extra):
    return ["train", "--corpus", corpus, "--vocab", vocab, "--out", out, "--dim", "8",
            "--senses", "2", "--epochs", "2", "--batch", "4", "--negatives", "3", *extra]


def test_train_reproducible(cli, tiny_corpus, tmp_path):
    vocab = tmp_path / "vocab.txt"
    cli("build-vocab", "--corpus", tiny_corpus, "--out", vocab, "--min-count", "1", check=0)
    a, b = tmp_path / "a.sns", tmp_path / "b.sns"
    run = cli(*train_args(tiny_corpus, vocab, a, "--seed", "7"), check=0)
    cli(*train_args(tiny_corpus, vocab, b, "--seed", "7"), check=0)
    assert md5(a) == md5(b)
    lines = run.stdout.splitlines()
    assert len(lines) == 2
    epoch, loss, transfer, windows = lines[0].split("\t")
    assert epoch == "1" and float(loss) > 0 and float(transfer) == 0 and int(windows) > 0

    env = dict(os.environ, SENSEKIT_SEED="7")
    c = tmp_path / "c.sns"
    cli(*train_args(tiny_corpus, vocab, c), env=env, check=0)
    assert md5(c) == md5(a)
    manifest = json.loads((tmp_path / "c.sns.manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["window"] == 5
    assert manifest["config"]["context"] == "global"

    bad = cli(*train_args(tiny_corpus, vocab, c, "--context", "sideways"))
    assert bad.returncode == 2


def write_records(path, vocab, corpus_keys, dim=6, senses=2):
    rng = np.random.default_rng(1)
    records = []
    for i, (key, center) in enumerate(corpus_keys):
        base = np.zeros(dim)
        base[i % dim] = 3.0
        records.append({"key": key, "center": center,
                        "vectors": [(0, center, list(base + 0.1 * rng.standard_normal(dim)))]})
    sk.write_teacher_records(path, vocab, 5, records)
    return records


def corpus_window_keys(corpus_path, vocab_path):
    """(key, center id) for every window, using the same rules as training."""
    vocab = sk.load_vocab(vocab_path)
    text = corpus_path.read_text()
    keys = []
    for d, doc in enumerate(text.split("<<<DOC>>>\n")):
        for p, par in enumerate(doc.split("\n\n")):
            ids = [vocab.id_of(t) for t in sk.tokenize(par)]
            ids = [i for i in ids if i is not None]
            if len(ids) < 2:
                continue
            keys += [(sk.window_key(d, p, o), c) for o, c in enumerate(ids)]
    return keys


def test_fit_teacher_and_distill(cli, tiny_corpus, tmp_path):
    vocab = tmp_path / "vocab.txt"
    cli("build-vocab", "--corpus", tiny_corpus, "--out", vocab, "--min-count", "1", check=0)
    keys = corpus_window_keys(tiny_corpus, vocab)
    records = tmp_path / "records.tse"
    write_records(records, sk.load_vocab(vocab), keys)

    params, post = tmp_path / "teacher.tsp", tmp_path / "post.tpo"
    fit = ["fit-teacher", "--records", records, "--vocab", vocab, "--out-params", params,
           "--out-posteriors", post, "--senses", "2", "--epochs", "3"]
    run = cli(*fit, check=0)
    assert len(sk.read_posteriors(post)) == len(keys)
    assert f"{len(keys)} posteriors" in run.stdout
    assert cli(*fit, "--teacher-dim", "7").returncode == 3

    model = tmp_path / "kd.sns"
    distill = ["distill", "--corpus", tiny_corpus, "--vocab", vocab, "--posteriors", post,
               "--out", model, "--dim", "8", "--senses", "2", "--epochs", "1", "--batch", "4",
               "--negatives", "3", "--seed", "5"]
    run = cli(*distill, check=0)
    assert float(run.stdout.split("\t")[2]) > 0
    manifest = json.loads((tmp_path / "kd.sns.manifest.json").read_text())
    assert manifest["config"]["alpha"] == 1.0
    assert manifest["config"]["temperature"] == 4.0
    assert manifest["config"]["kd_direction"] == "paper"

    plain = tmp_path / "plain.sns"
    zero = tmp_path / "zero.sns"
    cli(*train_args(tiny_corpus, vocab, plain, "--epochs", "1", "--seed", "5"), check=0)
    cli(*distill, "--out", zero, "--alpha", "0", check=0)
    assert md5(zero) == md5(plain)

    partial = tmp_path / "partial.tse"
    write_records(partial, sk.load_vocab(vocab), keys[:-1])
    partial_post = tmp_path / "partial.tpo"
    cli("fit-teacher", "--records", partial, "--vocab", vocab, "--out-params", params,
        "--out-posteriors", partial_post, "--senses", "2", "--epochs", "1", check=0)
    missing = cli("distill", "--corpus", tiny_corpus, "--vocab", vocab, "--posteriors",
                  partial_post, "--out", model, "--dim", "8", "--senses", "2", "--epochs", "1")
    assert missing.returncode == 3
    assert "missing teacher posterior for window at doc" in missing.stderr


def test_fit_teacher_purity(cli, tmp_path):
    vocab_path = tmp_path / "vocab.txt"
    sk.save_vocab(sk.Vocabulary(["bank", "river", "money"], [10, 5, 5]), vocab_path)
    vocab = sk.load_vocab(vocab_path)
    rng = np.random.default_rng(8)
    # Zero-mean centers: a shared offset across clusters slows the split a lot.
    centers = [np.r_[np.ones(6), -np.ones(6)] * 1.5, np.r_[-np.ones(6), np.ones(6)] * 1.5]
    records, labels = [], []
    for i in range(60):
        c = i % 2
        vecs = [(0, 0, list(centers[c] + 0.2 * rng.standard_normal(12))),
                (-1, 1 + c, list(centers[c] + 0.2 * rng.standard_normal(12)))]
        records.append({"key": sk.window_key(0, i, 1), "center": 0, "vectors": vecs})
        labels.append(str(c))
    sk.write_teacher_records(tmp_path / "r.tse", vocab, 5, records)
    (tmp_path / "labels.txt").write_text("\n".join(labels) + "\n")
    run = cli("fit-teacher", "--records", tmp_path / "r.tse", "--vocab", vocab_path,
              "--out-params", tmp_path / "t.tsp", "--out-posteriors", tmp_path / "p.tpo",
              "--senses", "2", "--epochs", "30", "--lr", "0.01", "--batch", "16", "--teacher-dim", "12",
              "--labels", tmp_path / "labels.txt", check=0)
    purity = float(run.stdout.split("purity\t")[1])
    assert purity >= 0.95


def test_validate_records(cli, tmp_path):
    vocab_path = tmp_path / "vocab.txt"
    sk.save_vocab(sk.Vocabulary(["a", "b"], [1, 1]), vocab_path)
    recs = [{"key": sk.window_key(0, 0, i), "center": 0, "vectors": [(0, 0, [1.0, 2.0])]}
            for i in range(4)]
    path = tmp_path / "r.tse"
    sk.write_teacher_records(path, sk.load_vocab(vocab_path), 5, recs)
    run = cli("validate-records", "--file", path, "--vocab", vocab_path, check=0)
    assert "4 records" in run.stdout

    data = path.read_bytes()
    (tmp_path / "cut.tse").write_bytes(data[:-3])
    cut = cli("validate-records", "--file", tmp_path / "cut.tse", "--vocab", vocab_path)
    assert cut.returncode == 3
    assert "first bad record: 3" in cut.stderr

    other = tmp_path / "other.txt"
    sk.save_vocab(sk.Vocabulary(["a", "c"], [1, 1]), other)
    wrong = cli("validate-records", "--file", path, "--vocab", other)
    assert wrong.returncode == 3
    assert "digest" in wrong.stderr


def test_eval_wsi_and_scws(cli, tmp_path):
    vocab = sk.Vocabulary(["bank", "river", "money", "the", "base", "a", "b", "c"], [1] * 8)
    vocab_path = tmp_path / "vocab.txt"
    sk.save_vocab(vocab, vocab_path)
    model = tmp_path / "m.sns"
    sk.save_model(rigged_model(vocab), vocab, model)

    wsi = tmp_path / "wsi.txt"
    wsi.write_text("bank\tshore\tthe river bank\n"
                   "bank\tshore\tbank of the river\n"
                   "bank\tfinance\tthe money bank\n"
                   "bank\tfinance\tmoney in the bank\n"
                   "zebra\tx\tthe zebra\n")
    run = cli("eval", "--model", model, "--vocab", vocab_path, "--data", wsi, "--task", "wsi",
              check=0)
    report = json.loads(run.stdout)
    assert report == {"dataset": "wsi.txt", "metric": "ari", "value": 1.0, "skipped": 1,
                      "scored_words": 1, "skipped_words": 0}

    sk.save_model(one_sense_model(vocab, {"a": 0.1, "b": 0.7, "c": 1.4}), vocab, model)
    scws = tmp_path / "scws.txt"
    scws.write_text("".join(f"base\t{w}\t{s}\t<b>base</b> the\tthe <b>{w}</b>\n"
                            for w, s in [("a", 9.0), ("b", 5.0), ("c", 1.0)])
                    + "base\tzebra\t3.0\t<b>base</b> the\tthe <b>zebra</b>\n")
    for metric in ("avgsimc", "maxsimc"):
        run = cli("eval", "--model", model, "--vocab", vocab_path, "--data", scws, "--task",
                  "scws", "--metric", metric, check=0)
        report = json.loads(run.stdout)
        assert report["value"] == pytest.approx(1.0, abs=1e-12)
        assert report["skipped"] == 1
    tsv = cli("eval", "--model", model, "--vocab", vocab_path, "--data", scws, "--task", "scws",
              "--format", "tsv", check=0).stdout.splitlines()
    assert tsv[0] == "dataset\tmetric\tvalue\tskipped"
    assert cli("eval", "--model", model, "--vocab", vocab_path, "--data", scws,
               "--task", "pos").returncode == 2


def test_nn_and_export(cli, tmp_path):
    vocab = sk.Vocabulary(["bank", "river", "money", "the"], [4, 2, 2, 3])
    vocab_path = tmp_path / "vocab.txt"
    sk.save_vocab(vocab, vocab_path)
    model = tmp_path / "m.sns"
    sk.save_model(rigged_model(vocab), vocab, model)

    run = cli("nn", "--model", model, "--vocab", vocab_path, "--word", "bank", "--context",
              "the river bank", "--top", "3", check=0)
    lines = run.stdout.splitlines()
    assert lines[0].startswith("bank\tsense 0\tp=")
    assert lines[1] == "rank\tword\tcosine"
    assert len(lines) == 2 + 3
    assert lines[2].split("\t")[:2] == ["1", "river"]
    assert cli("nn", "--model", model, "--vocab", vocab_path, "--word", "cash",
               "--context", "cash", "--top", "3").returncode == 3

    out = tmp_path / "m.txt"
    cli("export-text", "--model", model, "--vocab", vocab_path, "--out", out, check=0)
    text = out.read_text().splitlines()
    assert text[0] == "12 2"
    assert any(line.startswith("bank#1 ") for line in text)

    wrong = tmp_path / "wrong.txt"
    sk.save_vocab(sk.Vocabulary(["x", "y", "z", "w"], [1] * 4), wrong)
    assert cli("export-text", "--model", model, "--vocab", wrong, "--out", out).returncode == 3
