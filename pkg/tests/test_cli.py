import json
import subprocess
import sys

import pytest

from swrnli.cli import git_blob_hash, main
from swrnli.probes import DEFAULT_LEXICON, read_probes

TINY_INI = """[run]
seed = 3

[parser]
embed_dim = 16
encoder_hidden = 8
encoder_layers = 1
arc_mlp_dim = 8
label_mlp_dim = 8
epochs = 3

[nli]
label_set = 2way
embed_dim = 16
epochs = 2

[da]
attend_hidden = 8
compare_hidden = 8
aggregate_hidden = 8
"""


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    # commands without --out drop their manifest in the working directory
    monkeypatch.chdir(tmp_path)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "tiny.ini").write_text(TINY_INI)
    cfg = d / "tiny.ini"
    assert run("synth", "--kind", "treebank", "--n", 40, "--out", d / "tb.conllu", "--config", cfg) == 0
    assert run("synth", "--kind", "order", "--n", 60, "--out", d / "order", "--config", cfg) == 0
    assert run("train-parser", "--train", d / "tb.conllu", "--out", d / "parser.ckpt", "--config", cfg) == 0
    assert run("train-nli", "--architecture", "da", "--fusion", "sa", "--parser", d / "parser.ckpt",
               "--train", d / "order" / "train.jsonl", "--dev", d / "order" / "dev.jsonl",
               "--out", d / "sa.ckpt", "--config", cfg) == 0
    return d


def test_eval_prints_accuracy(work, capsys):
    capsys.readouterr()
    assert run("eval", "--checkpoint", work / "sa.ckpt", "--data", work / "order" / "test.jsonl") == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("accuracy=")
    assert 0.0 <= float(line.split("=")[1]) <= 1.0


def test_manifest_records_hashes(work):
    manifest = json.loads((work / "sa.ckpt.manifest.json").read_text())
    assert manifest["command"] == "train-nli" and manifest["seed"] == 3
    assert manifest["outputs"][str(work / "sa.ckpt")] == git_blob_hash(work / "sa.ckpt")
    assert str(work / "parser.ckpt") in manifest["inputs"]
    assert len(manifest["config_hash"]) == 64


def test_fixed_seed_runs_are_byte_identical(work, tmp_path):
    args = ["train-nli", "--architecture", "da", "--fusion", "lf", "--parser", work / "parser.ckpt",
            "--train", work / "order" / "train.jsonl", "--config", work / "tiny.ini", "--seed", 11]
    assert run(*args, "--out", tmp_path / "a.ckpt") == 0
    assert run(*args, "--out", tmp_path / "b.ckpt") == 0
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_ablate_probe_and_report(work, capsys):
    cfg = work / "tiny.ini"
    order = work / "order"
    assert run("ablate", "--architecture", "da", "--parser", work / "parser.ckpt", "--train",
               order / "train.jsonl", "--dev", order / "dev.jsonl", "--test", order / "test.jsonl",
               "--out", work / "abl.tsv", "--config", cfg) == 0
    assert len((work / "abl.tsv").read_text().strip().splitlines()) == 6
    assert run("probe-gen", "--n-per-cell", 4, "--out", work / "probes.jsonl") == 0
    assert run("probe-eval", "--checkpoint", work / "sa.ckpt", "--probes", work / "probes.jsonl",
               "--name", "DA+SA", "--out", work / "probe.tsv") == 0
    capsys.readouterr()
    assert run("report", work / "abl.tsv", work / "probe.tsv", "--manifest", work / "report.json") == 0
    out = capsys.readouterr().out
    assert "DA+SA_N" in out and "Avg." in out


def test_search(work):
    order = work / "order"
    assert run("search", "--architecture", "da", "--train", order / "train.jsonl", "--dev",
               order / "dev.jsonl", "--k", 2, "--out", work / "trials.tsv", "--config", work / "tiny.ini",
               "--set", "search.lr=-3,-2,log-uniform", "--save-best", work / "best.ckpt") == 0
    assert len((work / "trials.tsv").read_text().strip().splitlines()) == 3
    assert (work / "best.ckpt").stat().st_size > 0


def test_data_dir_env(work, monkeypatch, capsys):
    monkeypatch.setenv("SWRNLI_DATA_DIR", str(work))
    monkeypatch.chdir(work.parent)
    capsys.readouterr()
    assert run("eval", "--checkpoint", "sa.ckpt", "--data", "order/test.jsonl") == 0
    assert capsys.readouterr().out.startswith("accuracy=")


def test_missing_config_exit_two(tmp_path, capsys):
    missing = tmp_path / "nope.ini"
    assert run("probe-gen", "--out", tmp_path / "p.jsonl", "--config", missing) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_input_exit_one(tmp_path, capsys):
    assert run("eval", "--checkpoint", tmp_path / "gone.ckpt", "--data", tmp_path / "x.jsonl") == 1
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 and err.startswith("swrnli eval:")


@pytest.mark.parametrize("argv", [["frobnicate"], ["eval", "--bogus"], []])
def test_usage_errors_exit_two(argv):
    proc = subprocess.run([sys.executable, "-m", "swrnli", *argv], capture_output=True, text=True)
    assert proc.returncode == 2


def test_probe_gen_with_custom_lexicon(tmp_path):
    roles = {k: list(v) for k, v in DEFAULT_LEXICON.roles().items()}
    roles["singular_nouns"] = roles["singular_nouns"][:6]
    (tmp_path / "lex.json").write_text(json.dumps(roles))
    assert run("probe-gen", "--lexicon", tmp_path / "lex.json", "--n-per-cell", 3,
               "--out", tmp_path / "p.jsonl") == 0
    nouns = set(roles["singular_nouns"])
    assert all(set(p.premise.split()) & nouns for p in read_probes(tmp_path / "p.jsonl")
               if p.heuristic.value == "lexical_overlap")
