"""Acceptance criteria for the reference trainer.

Prints one `[ACCEPTANCE] <criterion>: PASS/FAIL` line per criterion; run
with `pytest -s` to see them live.
"""

import contextlib
import math
import time

import numpy as np
import pytest
import torch
from transformers import BertForPreTraining

from reftrainer.losses import masked_token_loss
from reftrainer.train import frozen_encoder_parameter_names, smoothed

from test_losses import reference_masked_ce


@pytest.fixture()
def criterion(capfd):
    @contextlib.contextmanager
    def run(name: str, budget_seconds: float):
        start = time.monotonic()
        try:
            yield
        except BaseException:
            with capfd.disabled():
                print(f"[ACCEPTANCE] {name}: FAIL ({time.monotonic() - start:.2f}s)")
            raise
        elapsed = time.monotonic() - start
        with capfd.disabled():
            print(f"[ACCEPTANCE] {name}: PASS ({elapsed:.2f}s / {budget_seconds:.0f}s budget)")
        assert elapsed < budget_seconds

    return run


def test_criterion_freezing_law_and_loss_trend(criterion, smoke, checkpoint_dir):
    spec, model, metrics, _, train_elapsed = smoke
    with criterion("freezing-law-and-loss-trend", 20 * 60.0):
        assert train_elapsed < 20 * 60.0, train_elapsed
        assert spec.k_trainable == 2
        assert len(metrics) == 100

        # bitwise equality of every non-top-2-layer encoder parameter
        reference = BertForPreTraining.from_pretrained(checkpoint_dir)
        after = dict(model.named_parameters())
        frozen = frozen_encoder_parameter_names(model, 2)
        assert frozen
        for name, before in reference.named_parameters():
            if name in frozen:
                assert torch.equal(before, after[name]), f"{name} changed"

        # smoothed joint loss at step 100 below step 1
        totals = [m["total"] for m in metrics]
        smooth = smoothed(totals, window=20)
        assert smooth[-1] < smooth[0]
        assert all(math.isfinite(t) for t in totals)


def test_criterion_cross_component_loss_agreement(criterion):
    with criterion("cross-component-loss-agreement", 30.0):
        # injected logits against the producer's masked-token definition
        rng = np.random.default_rng(21)
        logits = rng.normal(size=(1, 9, 31))
        targets = np.full((1, 9), -1, dtype=np.int64)
        targets[0, 2] = 4
        targets[0, 6] = 17
        ours = masked_token_loss(
            torch.tensor(logits, dtype=torch.float64), torch.tensor(targets)
        )
        assert abs(float(ours) - reference_masked_ce(logits, targets)) <= 1e-6

        # identical logits through the primary implementation where present
        try:
            from logiprep import toyloss
            from logiprep.shards import TrainingRecord
        except ImportError:
            return
        V = 31
        record = TrainingRecord((2, 7, 4, 9, 3), (-1, -1, 6, -1, -1), 1, 0, 0, False)
        uniform_ours = masked_token_loss(
            torch.zeros((1, 5, V), dtype=torch.float64),
            torch.tensor([[-1, -1, 6, -1, -1]]),
        )
        uniform_theirs = toyloss.forward(toyloss.zero_params(V, 8), record).l_smlm
        assert abs(float(uniform_ours) - uniform_theirs) <= 1e-6
