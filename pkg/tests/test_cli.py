import json
import random
import subprocess
import sys

import pytest

from tokeval.bpe import load_model
from tokeval.cli import resolve_threads, run

WORDS = ["we", "learnt", "the", "lesson", "b4", "gr8", "dinner", "colour", "and", "then", "left"]


@pytest.fixture()
def files(tmp_path):
    rng = random.Random(0)
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("".join(" ".join(rng.choice(WORDS) for _ in range(10)) + "\n" for _ in range(150)))
    rows = ["text_a\ttext_b\tlabels"]
    for i in range(60):
        words = [rng.choice([w for w in WORDS if w != "learnt"]) for _ in range(6)]
        if i % 2:
            words.insert(2, "learnt")
        rows.append(f"{' '.join(words)}\t\t{'yes' if i % 2 else 'no'}")
    train = tmp_path / "train.tsv"
    train.write_text("\n".join(rows[:41]) + "\n")
    dev = tmp_path / "dev.tsv"
    dev.write_text("\n".join([rows[0]] + rows[41:]) + "\n")
    return tmp_path, corpus, train, dev


def fit(tmp, corpus, size=300, pre="gpt2"):
    model = tmp / f"m_{pre}_{size}.json"
    assert run(["fit", "--corpus", str(corpus), "--pretokenizer", pre, "--vocab-size", str(size),
                "--out", str(model), "--threads", "1"]) == 0
    return model


def test_fit(files):
    tmp, corpus, _, _ = files
    model_path = fit(tmp, corpus)
    model = load_model(model_path)
    assert model.vocab_size <= 300 and model.spec.name == "gpt2"
    data = json.loads(model_path.read_text())
    assert data["requested_vocab_size"] == 300


def test_fit_report_and_defaults(files):
    tmp, corpus, _, _ = files
    out = tmp / "d.json"
    assert run(["fit", "--corpus", str(corpus), "--out", str(out), "--report", str(tmp / "fit")]) == 0
    rep = json.loads((tmp / "fit.json").read_text())
    assert rep["config"]["pretokenizer"] == "gpt2" and rep["config"]["vocab_size"] == 32000
    assert rep["results"]["requested_vocab_size"] == 32000
    assert rep["results"]["n_merges"] == rep["results"]["achieved_vocab_size"] - 256
    assert (tmp / "fit.tsv").read_text().startswith("# config.subcommand\tfit\n")


def test_encode(files):
    tmp, corpus, _, _ = files
    model = fit(tmp, corpus)
    out = tmp / "ids.txt"
    assert run(["encode", "--model", str(model), "--corpus", str(corpus), "--out", str(out)]) == 0
    m = load_model(model)
    first = corpus.read_text().splitlines()[0]
    assert out.read_text().splitlines()[0] == " ".join(map(str, m.encode(first)))
    assert run(["encode", "--model", str(model), "--corpus", str(corpus), "--tokens",
                "--out", str(tmp / "tok.txt")]) == 0
    assert "_" in (tmp / "tok.txt").read_text()


def test_stats(files):
    tmp, corpus, _, dev = files
    model = fit(tmp, corpus)
    assert run(["stats", "--model", str(model), "--corpus", str(corpus), "--alpha", "2.5",
                "--report", str(tmp / "stats")]) == 0
    res = json.loads((tmp / "stats.json").read_text())["results"]
    for key in ("corpus_token_count", "renyi_efficiency", "renyi_efficiency_observed",
                "shannon_entropy", "vocabulary_coverage"):
        assert key in res
    assert res["alpha"] == 2.5 and 0 < res["renyi_efficiency"] <= 1
    tsv = (tmp / "stats.tsv").read_text()
    assert "\nkey\tvalue\n" in tsv and "renyi_efficiency\t" in tsv
    assert run(["stats", "--model", str(model), "--task", str(dev), "--report", str(tmp / "s2")]) == 0


def test_proxy(files):
    tmp, corpus, train, dev = files
    model = fit(tmp, corpus)
    preds = tmp / "preds.txt"
    assert run(["proxy", "--model", str(model), "--train", str(train), "--eval", str(dev),
                "--c", "0.4", "--predictions", str(preds), "--report", str(tmp / "px")]) == 0
    res = json.loads((tmp / "px.json").read_text())["results"]
    assert res["metric"] == "accuracy" and res["value"] == 1.0
    assert len(preds.read_text().splitlines()) == 20


def test_proxy_report_identical_across_threads(files):
    tmp, corpus, train, dev = files
    model = fit(tmp, corpus)
    outs = []
    for threads in ("1", "4"):
        assert run(["proxy", "--model", str(model), "--train", str(train), "--eval", str(dev),
                    "--threads", threads, "--report", str(tmp / "run")]) == 0
        outs.append(((tmp / "run.tsv").read_bytes(), (tmp / "run.json").read_bytes()))
    assert outs[0] == outs[1]


def test_pair_mode_with_single_text_is_usage_error(files):
    tmp, corpus, train, dev = files
    model = fit(tmp, corpus)
    code = run(["proxy", "--model", str(model), "--train", str(train), "--eval", str(dev),
                "--pair-mode", "cartesian"])
    assert code == 2


def test_mcnemar(files):
    tmp = files[0]
    gold = tmp / "gold.txt"
    gold.write_text("a\nb\na\nb\na\n")
    (tmp / "p1.txt").write_text("a\nb\na\nb\na\n")
    (tmp / "p2.txt").write_text("b\nb\nb\nb\na\n")
    (tmp / "p3.txt").write_text("a\na\na\nb\nb\n")
    assert run(["mcnemar", "--gold", str(gold), "--pred", f"weak={tmp / 'p2.txt'}",
                "--pred", f"best={tmp / 'p1.txt'}", "--pred", f"mid={tmp / 'p3.txt'}",
                "--bonferroni-m", "26", "--report", str(tmp / "mc")]) == 0
    lines = [l for l in (tmp / "mc.tsv").read_text().splitlines() if not l.startswith("#")]
    # weak and mid tie at 0.6 and keep input order
    assert lines[0] == "system\taccuracy\tbest\tweak\tmid"
    assert lines[1].startswith("best\t1.0\t\t")
    doc = json.loads((tmp / "mc.json").read_text())
    assert doc["config"]["bonferroni_m_resolved"] == 26
    pair = doc["results"]["pairs"][0]
    assert pair["p_adjusted"] == min(1.0, 26 * pair["p_raw"])


def test_mcnemar_pools_seeds(files):
    tmp = files[0]
    (tmp / "g.txt").write_text("x\ny\n")
    for name in ("a1", "a2", "b1"):
        (tmp / f"{name}.txt").write_text("x\ny\n")
    args = ["mcnemar", "--gold", str(tmp / "g.txt"), "--pred", f"A={tmp / 'a1.txt'}",
            "--pred", f"A={tmp / 'a2.txt'}", "--pred", f"B={tmp / 'b1.txt'}"]
    assert run(args) == 2
    assert run(args + ["--pred", f"B={tmp / 'b1.txt'}", "--report", str(tmp / "pool")]) == 0
    assert json.loads((tmp / "pool.json").read_text())["config"]["seeds"] == 2


def test_correlate(files):
    tmp = files[0]
    table = tmp / "scores.tsv"
    table.write_text("tokenizer\tbert\tlogreg\trenyi\n"
                     "gpt2\t0.80\t0.70\t0.40\nws\t0.60\t0.50\t0.45\nno\t0.55\t0.52\t0.50\n")
    assert run(["correlate", "--table", str(table), "--target", "bert", "--report", str(tmp / "c")]) == 0
    rows = json.loads((tmp / "c.json").read_text())["results"]
    assert [r["column"] for r in rows] == ["logreg", "renyi"]
    assert rows[1]["pearson_r"] < 0 < rows[0]["pearson_r"]


def test_exit_codes(files, capsys):
    tmp, corpus, _, _ = files
    assert run(["fit", "--corpus", str(corpus), "--out", str(tmp / "x.json"), "--bogus"]) == 2
    assert run(["frobnicate"]) == 2
    assert run(["fit", "--corpus", str(tmp / "missing.txt"), "--out", str(tmp / "x.json")]) == 1
    assert run(["fit", "--corpus", str(corpus), "--vocab-size", "10", "--out", str(tmp / "x.json")]) == 1
    bad = tmp / "bad.json"
    bad.write_text('{"version": 1, "pretokenizer": "gpt2", "merges": [[1, 300]]}')
    assert run(["stats", "--model", str(bad), "--corpus", str(corpus)]) == 1
    assert run(["stats", "--model", str(bad)]) == 2


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv("TOKEVAL_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(5) == 5
    monkeypatch.delenv("TOKEVAL_THREADS")
    assert resolve_threads(None) >= 1


def test_module_entry_point(files):
    tmp, corpus, _, _ = files
    out = subprocess.run([sys.executable, "-m", "tokeval", "fit", "--corpus", str(corpus),
                          "--vocab-size", "260", "--out", str(tmp / "e.json")],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
