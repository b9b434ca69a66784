import hashlib
import json

import pytest

from glyforge.cli import main
from glyforge.datakit import write_jsonl
from glyforge.synthetic import generate_corpus, generate_taxonomy_dataset
from oracles import CURATION_DOWNSTREAM, CURATION_EXPECTED, CURATION_RECORDS

TINY = ["--model.hidden_dim", "8", "--model.num_blocks", "1"]


@pytest.fixture
def data(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("\n".join(generate_corpus(20, seed=1)) + "\n")
    dataset = tmp_path / "tax.jsonl"
    write_jsonl(dataset, generate_taxonomy_dataset(16, seed=0))
    return tmp_path, corpus, dataset


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_example(capsys):
    code, out, _ = run(capsys, "parse", "Gal(b1-4)Glc")
    doc = json.loads(out)
    assert code == 0
    assert (doc["canonical"], doc["N"], doc["M"]) == ("Gal(b1-4)Glc", 24, 2)
    assert doc["edges"]["am"] == {"0": 24, "1": 24}


def test_parse_stats_only(capsys):
    _, out, _ = run(capsys, "parse", "--stats-only", "Gal(b1-4)Glc")
    assert "canonical" not in json.loads(out)


def test_parse_malformed(capsys):
    code, out, err = run(capsys, "parse", "Gal(b1-4")
    assert code == 2 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "UnterminatedLinkage"


def test_parse_file(tmp_path, capsys):
    f = tmp_path / "in.txt"
    f.write_text("Man(a1-6)[Man(a1-3)]Man\nGal(b1-4)Glc\n")
    code, out, _ = run(capsys, "parse", "--file", f)
    assert code == 0
    assert [json.loads(x)["canonical"] for x in out.splitlines()] == ["Man(a1-3)[Man(a1-6)]Man", "Gal(b1-4)Glc"]


def test_unknown_key_is_config_error(capsys):
    code, out, err = run(capsys, "pretrain", "--model.bogus", "1")
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "config"


def test_invalid_value_is_config_error(tmp_path, capsys, data):
    _, corpus, _ = data
    code, _, _ = run(capsys, "pretrain", "--data.corpus", corpus, "--out", tmp_path / "o", "--model.variant", "x")
    assert code == 1
    assert not (tmp_path / "o").exists()


def test_eval_missing_checkpoint(tmp_path, capsys, data):
    _, _, dataset = data
    out_dir = tmp_path / "ev"
    code, out, _ = run(capsys, "eval", "--data.dataset", dataset, "--data.checkpoint", tmp_path / "none.ckpt",
                       "--out", out_dir)
    assert code == 1 and out == ""
    assert not out_dir.exists()


def test_gradcheck_default(capsys):
    code, out, _ = run(capsys, "gradcheck")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["max_rel_error"] < 1e-3 and doc["seed"] == 0


def test_gradcheck_failure_exit_code(capsys):
    code, _, _ = run(capsys, "gradcheck", "--gradcheck.tolerance", "1e-30")
    assert code == 3


def test_curate(tmp_path, capsys):
    corpus = tmp_path / "raw.jsonl"
    write_jsonl(corpus, CURATION_RECORDS)
    downstream = tmp_path / "down.jsonl"
    write_jsonl(downstream, [{"glycan": g, "label": 0} for g in CURATION_DOWNSTREAM])
    before = corpus.read_bytes()
    code, out, _ = run(capsys, "curate", "--data.corpus", corpus, "--set", f"data.downstream=[\"{downstream}\"]",
                       "--out", tmp_path / "cur")
    assert code == 0
    assert json.loads(out) == CURATION_EXPECTED
    assert len((tmp_path / "cur" / "curated.jsonl").read_text().splitlines()) == 6
    assert corpus.read_bytes() == before


def test_pretrain_train_eval_export(data, capsys):
    root, corpus, dataset = data
    code, _, _ = run(capsys, "pretrain", "--data.corpus", corpus, "--out", root / "pt", *TINY,
                     "--pretrain.epochs", "2", "--pretrain.batch_size", "8")
    assert code == 0
    for name in ("metrics.jsonl", "pretrained.ckpt", "curves.png", "run.json"):
        assert (root / "pt" / name).exists()
    assert json.loads((root / "pt" / "run.json").read_text())["seed"] == 0

    code, out, _ = run(capsys, "train", "--data.dataset", dataset, "--data.checkpoint", root / "pt" / "pretrained.ckpt",
                       "--task.num_classes", "4", "--task.epochs", "2", "--task.batch_size", "4",
                       "--seed", "0", "--seed", "1", "--seed", "2", "--out", root / "tr")
    assert code == 0
    summary = json.loads((root / "tr" / "summary.json").read_text())
    assert summary["seeds"] == [0, 1, 2]
    vals = [r["test_metric"] for r in summary["runs"]]
    mean = sum(vals) / 3
    assert summary["test_metric"]["mean"] == pytest.approx(mean)
    assert summary["test_metric"]["std"] == pytest.approx((sum((v - mean) ** 2 for v in vals) / 3) ** 0.5)
    assert all(r["mode"] == "pretrained" for r in summary["runs"])

    code, out, _ = run(capsys, "eval", "--data.dataset", dataset, "--data.checkpoint",
                       root / "tr" / "seed1" / "model.ckpt", "--out", root / "ev")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(summary["runs"][1]["test_metric"])
    assert (root / "ev" / "predictions.jsonl").exists()

    code, out, _ = run(capsys, "export-embeddings", "--data.dataset", dataset, "--data.checkpoint",
                       root / "pt" / "pretrained.ckpt", "--out", root / "ex")
    assert code == 0 and json.loads(out) == {"rows": 16, "dim": 16, "seed": 0}


def test_config_file_and_overrides(data, capsys):
    root, corpus, _ = data
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"model": {"hidden_dim": 4, "num_blocks": 1},
                               "pretrain": {"epochs": 1, "batch_size": 4}, "data": {"corpus": str(corpus)}}))
    code, _, _ = run(capsys, "pretrain", "--config", cfg, "--pretrain.epochs", "2", "--out", root / "p")
    assert code == 0
    rec = json.loads((root / "p" / "run.json").read_text())
    assert rec["config"]["pretrain"]["epochs"] == 2 and rec["config"]["model"]["hidden_dim"] == 4
    assert len((root / "p" / "metrics.jsonl").read_text().splitlines()) == 2


def test_threads_from_environment(data, capsys, monkeypatch):
    root, corpus, _ = data
    monkeypatch.setenv("GLYFORGE_THREADS", "2")
    code, _, _ = run(capsys, "pretrain", "--data.corpus", corpus, "--out", root / "t", *TINY,
                     "--pretrain.epochs", "1")
    assert code == 0
    assert json.loads((root / "t" / "run.json").read_text())["config"]["threads"] == 2
    monkeypatch.setenv("GLYFORGE_THREADS", "0")
    assert run(capsys, "gradcheck")[0] == 1


def test_bench_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--bench.synthetic", "32", "--bench.batch_size", "16",
                       "--bench.repeats", "1", *TINY, "--out", tmp_path / "b")
    assert code == 0 and "mono-only" in out
    doc = json.loads((tmp_path / "b" / "bench.json").read_text())
    assert [r["variant"] for r in doc["reports"]] == ["hierarchical", "mono-only"]
    assert (tmp_path / "b" / "bench.png").exists()


def test_pretrain_rerun_is_byte_identical(data, capsys):
    root, corpus, _ = data
    digests = []
    for name in ("r1", "r2"):
        assert run(capsys, "pretrain", "--data.corpus", corpus, "--out", root / name, *TINY,
                   "--pretrain.epochs", "2", "--pretrain.batch_size", "8", "--seed", "5")[0] == 0
        digests.append(hashlib.sha256((root / name / "metrics.jsonl").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_bad_corpus_is_data_error(tmp_path, capsys):
    corpus = tmp_path / "bad.txt"
    corpus.write_text("Gal(b1-4)Glc\nGal(b1-4\n")
    code, _, err = run(capsys, "pretrain", "--data.corpus", corpus, "--out", tmp_path / "o", *TINY)
    assert code == 2 and json.loads(err)["error"] == "data"
    assert not (tmp_path / "o").exists()
