import json
import subprocess
import sys
from pathlib import Path

import pytest

import fixture_gen
from logiprep import pos_tagger
from logiprep.tokenizer import SubwordVocab

DATA_DIR = Path(__file__).parent / "data"


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "logiprep.cli", *map(str, args)],
        capture_output=True, text=True,
    )


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def mini_corpus_path() -> Path:
    return DATA_DIR / "mini_corpus.jsonl"


@pytest.fixture(scope="session")
def vocab_path() -> Path:
    return DATA_DIR / "vocab_mini.txt"


@pytest.fixture(scope="session")
def vocab(vocab_path) -> SubwordVocab:
    return SubwordVocab.load(vocab_path)


@pytest.fixture(scope="session")
def tagger_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("tagger") / "mini_tagger.lptg"
    model = pos_tagger.train(DATA_DIR / "mini_treebank.conllu", epochs=5, seed=0)
    pos_tagger.save(model, path)
    return path


@pytest.fixture(scope="session")
def tagger(tagger_path) -> pos_tagger.TaggerModel:
    return pos_tagger.load(tagger_path)


@pytest.fixture(scope="session")
def mini_pack(tmp_path_factory, mini_corpus_path, vocab_path, tagger_path) -> Path:
    """Shards + manifest + report packed once from the bundled mini-corpus."""
    out = tmp_path_factory.mktemp("pack") / "shards"
    r = run_cli(
        "pack", "--input", mini_corpus_path, "--format", "jsonl",
        "--tagger", tagger_path, "--vocab", vocab_path, "--out", out,
        "--seed", "7", "--workers", "2", "--records-per-shard", "200",
    )
    assert r.returncode == 0, r.stderr
    return out


@pytest.fixture(scope="session")
def separable_pack(tmp_path_factory, vocab_path) -> Path:
    """Shards whose keyword token decides the label and is never masked."""
    base = tmp_path_factory.mktemp("separable")
    corpus = base / "sep.jsonl"
    with open(corpus, "w", encoding="utf-8") as fh:
        for doc in fixture_gen.generate_separable_corpus():
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    treebank = base / "sep.conllu"
    fixture_gen.write_conllu(fixture_gen.generate_separable_treebank(), treebank)
    tagger_file = base / "sep_tagger.lptg"
    pos_tagger.save(pos_tagger.train(treebank, epochs=5, seed=0), tagger_file)
    out = base / "shards"
    r = run_cli(
        "pack", "--input", corpus, "--format", "jsonl", "--tagger", tagger_file,
        "--vocab", vocab_path, "--out", out, "--seed", "3", "--workers", "2",
    )
    assert r.returncode == 0, r.stderr
    return out
