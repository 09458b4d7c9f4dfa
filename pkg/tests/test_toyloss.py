import math
import random

import numpy as np
import pytest

from logiprep.errors import InputError
from logiprep.shards import IGNORE_TARGET, TrainingRecord, write_shards
from logiprep.toyloss import (
    TinyEncoderParams,
    backward,
    ecls_accuracy,
    forward,
    forward_backward,
    init_params,
    input_path_embedding_grad,
    predict_cls,
    train_toy,
    write_loss_curve,
    zero_params,
)


def make_record(ids, targets, cls=1, doc=0, sent=0):
    return TrainingRecord(tuple(ids), tuple(targets), cls, doc, sent, False)


SMALL = make_record(
    ids=[2, 7, 4, 9, 3],
    targets=[-1, -1, 6, -1, -1],
    cls=1,
)


def straight_line_total(p: TinyEncoderParams, record, ecls_weight=1.0):
    """Independent loop-based recomputation of the documented formulas."""
    ids = list(record.input_ids)
    n = len(ids)
    d = p.width
    V = p.vocab_size
    x = [[p.emb[ids[i]][j] + p.pos[i][j] for j in range(d)] for i in range(n)]

    def matvec(m, v):
        return [sum(m[k][j] * v[k] for k in range(len(v))) for j in range(len(m[0]))]

    q = [matvec(p.wq, x[i]) for i in range(n)]
    k = [matvec(p.wk, x[i]) for i in range(n)]
    v = [matvec(p.wv, x[i]) for i in range(n)]
    h = []
    for i in range(n):
        scores = [sum(q[i][j] * k[t][j] for j in range(d)) / math.sqrt(d) for t in range(n)]
        mx = max(scores)
        exps = [math.exp(s - mx) for s in scores]
        z = sum(exps)
        attn = [e / z for e in exps]
        ctx = [sum(attn[t] * v[t][j] for t in range(n)) for j in range(d)]
        out = matvec(p.wo, ctx)
        h.append([x[i][j] + out[j] for j in range(d)])

    def logsumexp(vals):
        mx = max(vals)
        return mx + math.log(sum(math.exp(s - mx) for s in vals))

    losses = []
    for i in range(n):
        t = record.mlm_targets[i]
        if t == IGNORE_TARGET:
            continue
        logits = [sum(h[i][j] * p.emb[w][j] for j in range(d)) + p.mlm_bias[w] for w in range(V)]
        losses.append(logsumexp(logits) - logits[t])
    l_smlm = sum(losses) / len(losses)
    y = [sum(h[0][j] * p.cls_w[j][c] for j in range(d)) + p.cls_b[c] for c in range(2)]
    l_ecls = logsumexp(y) - y[record.cls_label]
    return l_smlm, l_ecls, l_smlm + ecls_weight * l_ecls


class TestForward:
    def test_uniform_logits_at_zero_params(self):
        V = 23
        p = zero_params(V, 8)
        value = forward(p, SMALL)
        assert abs(value.l_smlm - math.log(V)) <= 1e-9
        assert abs(value.l_ecls - math.log(2)) <= 1e-9

    def test_rigged_logit_drives_smlm_to_zero(self):
        p = zero_params(23, 8)
        p.mlm_bias[6] = 60.0  # the single masked position's target
        assert forward(p, SMALL).l_smlm <= 1e-9

    def test_total_additivity_exact(self):
        p = init_params(23, 8, seed=1)
        value = forward(p, SMALL)
        assert value.total == value.l_smlm + value.l_ecls

    def test_ecls_weight_scales_total(self):
        p = init_params(23, 8, seed=1)
        v1 = forward(p, SMALL, ecls_weight=1.0)
        v2 = forward(p, SMALL, ecls_weight=2.5)
        assert v2.total == pytest.approx(v1.l_smlm + 2.5 * v1.l_ecls, abs=1e-12)

    def test_straight_line_oracle_agreement(self):
        record = make_record(
            ids=[2, 7, 4, 9, 3], targets=[-1, 5, 6, -1, -1], cls=0
        )
        p = init_params(11, 4, seed=3)
        value = forward(p, record)
        l_smlm, l_ecls, total = straight_line_total(p, record)
        assert abs(value.l_smlm - l_smlm) <= 1e-10
        assert abs(value.l_ecls - l_ecls) <= 1e-10
        assert abs(value.total - total) <= 1e-10

    def test_id_out_of_range(self):
        p = zero_params(8, 4)
        with pytest.raises(ValueError, match="vocab size"):
            forward(p, SMALL)  # SMALL has id 9

    def test_losses_nonnegative(self):
        for seed in range(5):
            p = init_params(23, 8, seed=seed)
            value = forward(p, SMALL)
            assert value.l_smlm >= 0 and value.l_ecls >= 0 and value.total >= 0


class TestBackward:
    def rel_err(self, a, b):
        return abs(a - b) / max(1e-4, abs(a) + abs(b))

    @pytest.mark.parametrize("component", ["total", "smlm", "ecls"])
    def test_finite_differences(self, component):
        record = make_record(
            ids=[2, 7, 4, 9, 3, 10, 4, 3], targets=[-1, -1, 6, -1, -1, -1, 8, -1], cls=1
        )
        V, d = 23, 8
        p = init_params(V, d, seed=7)
        grads = backward(p, record, component=component)
        rng = random.Random(11)
        h = 1e-4
        worst = 0.0
        tensors = p.tensors()
        names = sorted(tensors)
        for _ in range(200):
            name = rng.choice(names)
            t = tensors[name]
            idx = tuple(rng.randrange(s) for s in t.shape)
            keep = t[idx]
            t[idx] = keep + h
            up = forward(p, record)
            t[idx] = keep - h
            down = forward(p, record)
            t[idx] = keep
            pick = {"total": lambda v: v.total, "smlm": lambda v: v.l_smlm,
                    "ecls": lambda v: v.l_ecls}[component]
            fd = (pick(up) - pick(down)) / (2 * h)
            an = getattr(grads, name)[idx]
            worst = max(worst, self.rel_err(fd, an))
        assert worst <= 1e-4, worst

    def test_ecls_grad_of_mlm_bias_is_zero(self):
        p = init_params(23, 8, seed=2)
        grads = backward(p, SMALL, component="ecls")
        assert np.all(grads.mlm_bias == 0.0)

    def test_ecls_grad_zero_for_absent_tokens(self):
        p = init_params(23, 8, seed=2)
        grads = backward(p, SMALL, component="ecls")
        present = set(SMALL.input_ids)
        for token in range(23):
            if token not in present:
                assert np.all(grads.emb[token] == 0.0), token

    def test_input_path_grad_zero_for_absent_tokens(self):
        p = init_params(23, 8, seed=4)
        input_grad = input_path_embedding_grad(p, SMALL, component="total")
        present = set(SMALL.input_ids)
        for token in range(23):
            if token not in present:
                assert np.allclose(input_grad[token], 0.0, atol=1e-18), token

    def test_absent_target_token_still_gets_projection_grad(self):
        # id 6 is masked out of the input but is the MLM target
        p = init_params(23, 8, seed=4)
        grads = backward(p, SMALL, component="total")
        assert 6 not in set(SMALL.input_ids)
        assert np.any(grads.emb[6] != 0.0)

    def test_forward_backward_value_matches_forward(self):
        p = init_params(23, 8, seed=5)
        value, _ = forward_backward(p, SMALL)
        assert value == forward(p, SMALL)

    def test_unknown_component_rejected(self):
        p = zero_params(23, 8)
        with pytest.raises(ValueError, match="component"):
            backward(p, SMALL, component="both")


class TestTrainToy:
    def single_record_shards(self, tmp_path):
        write_shards([SMALL], tmp_path / "s", records_per_shard=10,
                     config={"vocab_size": 23})
        return tmp_path / "s"

    def test_zero_learning_rate_constant_curve(self, tmp_path):
        shards = self.single_record_shards(tmp_path)
        _, curve = train_toy(shards, steps=40, learning_rate=0.0, seed=0)
        totals = {c[3] for c in curve}
        assert len(totals) == 1

    def test_fixed_seed_bit_identical_curves(self, tmp_path):
        shards = self.single_record_shards(tmp_path)
        _, c1 = train_toy(shards, steps=60, learning_rate=0.05, seed=9)
        _, c2 = train_toy(shards, steps=60, learning_rate=0.05, seed=9)
        assert c1 == c2

    def test_empty_shards_error(self, tmp_path):
        write_shards([], tmp_path / "s", records_per_shard=10)
        with pytest.raises(InputError, match="no records"):
            train_toy(tmp_path / "s", steps=5, learning_rate=0.1, seed=0)

    def test_loss_decreases_on_single_record(self, tmp_path):
        shards = self.single_record_shards(tmp_path)
        _, curve = train_toy(shards, steps=200, learning_rate=0.05, seed=0)
        assert curve[-1][3] < 0.5 * curve[0][3]

    def test_curve_csv_round_trip(self, tmp_path):
        shards = self.single_record_shards(tmp_path)
        _, curve = train_toy(shards, steps=5, learning_rate=0.05, seed=0)
        path = tmp_path / "curve.csv"
        write_loss_curve(curve, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,l_smlm,l_ecls,total"
        assert len(lines) == 6
        step, a, b, t = lines[1].split(",")
        assert (int(step), float(a), float(b), float(t)) == curve[0]

    def test_predict_cls_matches_argmax_accuracy(self, tmp_path):
        shards = self.single_record_shards(tmp_path)
        params, _ = train_toy(shards, steps=100, learning_rate=0.05, seed=0)
        label = predict_cls(params, SMALL)
        assert label in (0, 1)
        acc = ecls_accuracy(params, [SMALL])
        assert acc == float(label == SMALL.cls_label)
