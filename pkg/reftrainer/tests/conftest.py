import subprocess
import sys
from pathlib import Path

import pytest

PRIMARY_ROOT = Path(__file__).resolve().parents[2]
PRIMARY_DATA = PRIMARY_ROOT / "tests" / "data"


def run(*args):
    r = subprocess.run([sys.executable, *map(str, args)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return r


@pytest.fixture(scope="session")
def vocab_path() -> Path:
    return PRIMARY_DATA / "vocab_mini.txt"


@pytest.fixture(scope="session")
def shards_dir(tmp_path_factory, vocab_path) -> Path:
    """Shards produced by the upstream pipeline CLI; this package only
    consumes the resulting files."""
    base = tmp_path_factory.mktemp("upstream")
    tagger = base / "tagger.lptg"
    run("-m", "logiprep.cli", "tag-train",
        "--conllu", PRIMARY_DATA / "mini_treebank.conllu",
        "--epochs", "5", "--seed", "0", "--out", tagger)
    out = base / "shards"
    run("-m", "logiprep.cli", "pack",
        "--input", PRIMARY_DATA / "mini_corpus.jsonl", "--format", "jsonl",
        "--tagger", tagger, "--vocab", vocab_path,
        "--out", out, "--seed", "7", "--workers", "2")
    return out


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory, vocab_path) -> Path:
    from reftrainer.cli import main

    out = tmp_path_factory.mktemp("ckpt") / "tiny-bert"
    rc = main(["init-demo-checkpoint", "--vocab", str(vocab_path), "--out", str(out),
               "--layers", "4", "--hidden", "32", "--heads", "2", "--seed", "1"])
    assert rc == 0
    return out


def smoke_spec(shards_dir, checkpoint_dir, out_dir, **overrides):
    from reftrainer.train import TrainSpec

    kw = dict(
        shards_dir=str(shards_dir),
        base_checkpoint=str(checkpoint_dir),
        out_dir=str(out_dir),
        k_trainable=2,
        epochs=3,
        effective_batch_size=8,
        micro_batch_size=4,
        learning_rate=1e-3,
        warmup_ratio=0.1,
        seed=0,
        max_steps=100,
    )
    kw.update(overrides)
    return TrainSpec(**kw)


@pytest.fixture(scope="session")
def smoke(shards_dir, checkpoint_dir, tmp_path_factory):
    """One shared 100-step K=2 smoke run."""
    import time

    from reftrainer.train import continual_pretrain

    out = tmp_path_factory.mktemp("run") / "ckpt"
    spec = smoke_spec(shards_dir, checkpoint_dir, out)
    start = time.monotonic()
    model, metrics = continual_pretrain(spec)
    return spec, model, metrics, out, time.monotonic() - start
