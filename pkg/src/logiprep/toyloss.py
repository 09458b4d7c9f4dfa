"""Desk-scale numerical reference of the joint objective.

Model: one softmax self-attention layer (with residual connection) over
token + position embeddings, a masked-token head tied to the token
embedding, and a 2-way classifier on position 0. For ids x_1..x_n:

    X   = emb[x] + pos[:n]
    A   = softmax_rows(X Wq (X Wk)^T / sqrt(d))
    H   = X + (A (X Wv)) Wo
    Z   = H emb^T + b            per-position token logits
    y   = H_0 Wc + c             2-way logits

    l_smlm = mean of CE(Z_p, tgt_p) over positions with tgt_p != -1
    l_ecls = CE(y, label)
    total  = l_smlm + ecls_weight * l_ecls

No residual, no layer norm: the smallest shape that exercises both
position-wise prediction and pooled classification. Gradients are exact
and checked against central finite differences in the test suite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputError
from .shards import IGNORE_TARGET, TrainingRecord, load_manifest, read_shards

MAX_POSITIONS = 128


@dataclass
class TinyEncoderParams:
    emb: np.ndarray       # (V, d)
    pos: np.ndarray       # (MAX_POSITIONS, d)
    wq: np.ndarray        # (d, d)
    wk: np.ndarray        # (d, d)
    wv: np.ndarray        # (d, d)
    wo: np.ndarray        # (d, d)
    mlm_bias: np.ndarray  # (V,)
    cls_w: np.ndarray     # (d, 2)
    cls_b: np.ndarray     # (2,)

    @property
    def vocab_size(self) -> int:
        return self.emb.shape[0]

    @property
    def width(self) -> int:
        return self.emb.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "TinyEncoderParams":
        return TinyEncoderParams(**{k: v.copy() for k, v in self.tensors().items()})


def zero_params(vocab_size: int, width: int) -> TinyEncoderParams:
    d = width
    return TinyEncoderParams(
        emb=np.zeros((vocab_size, d)),
        pos=np.zeros((MAX_POSITIONS, d)),
        wq=np.zeros((d, d)),
        wk=np.zeros((d, d)),
        wv=np.zeros((d, d)),
        wo=np.zeros((d, d)),
        mlm_bias=np.zeros(vocab_size),
        cls_w=np.zeros((d, 2)),
        cls_b=np.zeros(2),
    )


def init_params(vocab_size: int, width: int, seed: int, scale: float = 0.15) -> TinyEncoderParams:
    rng = np.random.Generator(np.random.Philox(key=seed))
    p = zero_params(vocab_size, width)
    for name, t in p.tensors().items():
        if name in ("mlm_bias", "cls_b"):
            continue  # biases start at zero
        t[...] = rng.normal(0.0, scale, size=t.shape)
    return p


@dataclass(frozen=True)
class JointLossValue:
    l_smlm: float
    l_ecls: float
    ecls_weight: float
    total: float


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax_rows(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_record(params: TinyEncoderParams, record: TrainingRecord) -> None:
    v = params.vocab_size
    for i in record.input_ids:
        if i >= v:
            raise ValueError(f"token id {i} >= vocab size {v}")
    for t in record.mlm_targets:
        if t != IGNORE_TARGET and t >= v:
            raise ValueError(f"target id {t} >= vocab size {v}")
    if len(record.input_ids) > MAX_POSITIONS:
        raise ValueError(f"record length {len(record.input_ids)} exceeds {MAX_POSITIONS}")


def _encode(params: TinyEncoderParams, ids: np.ndarray):
    """Forward pass up to the shared hidden states; returns intermediates."""
    n = len(ids)
    d = params.width
    x = params.emb[ids] + params.pos[:n]
    q = x @ params.wq
    k = x @ params.wk
    v = x @ params.wv
    scores = (q @ k.T) / np.sqrt(d)
    attn = _softmax_rows(scores)
    ctx = attn @ v
    hidden = x + ctx @ params.wo
    return x, q, k, v, attn, ctx, hidden


def forward(
    params: TinyEncoderParams, record: TrainingRecord, ecls_weight: float = 1.0
) -> JointLossValue:
    _check_record(params, record)
    ids = np.asarray(record.input_ids)
    targets = np.asarray(record.mlm_targets)
    *_, hidden = _encode(params, ids)

    logits = hidden @ params.emb.T + params.mlm_bias
    logp = _log_softmax_rows(logits)
    counted = targets != IGNORE_TARGET
    if not counted.any():
        raise ValueError("record has no MLM targets")
    l_smlm = float(-logp[counted, targets[counted]].mean())

    y = hidden[0] @ params.cls_w + params.cls_b
    l_ecls = float(-_log_softmax_rows(y)[record.cls_label])

    return JointLossValue(l_smlm, l_ecls, ecls_weight, l_smlm + ecls_weight * l_ecls)


def backward(
    params: TinyEncoderParams,
    record: TrainingRecord,
    component: str = "total",
    ecls_weight: float = 1.0,
) -> TinyEncoderParams:
    """Exact gradients of the chosen loss component w.r.t. every tensor."""
    _, grads = forward_backward(params, record, component=component, ecls_weight=ecls_weight)
    return grads


def forward_backward(
    params: TinyEncoderParams,
    record: TrainingRecord,
    component: str = "total",
    ecls_weight: float = 1.0,
) -> tuple[JointLossValue, TinyEncoderParams]:
    if component not in ("total", "smlm", "ecls"):
        raise ValueError(f"unknown loss component {component!r}")
    _check_record(params, record)
    ids = np.asarray(record.input_ids)
    targets = np.asarray(record.mlm_targets)
    n = len(ids)
    d = params.width
    v_size = params.vocab_size
    x, q, k, v, attn, ctx, hidden = _encode(params, ids)

    logits = hidden @ params.emb.T + params.mlm_bias
    logp = _log_softmax_rows(logits)
    counted = targets != IGNORE_TARGET
    m = int(counted.sum())
    if m == 0:
        raise ValueError("record has no MLM targets")
    l_smlm = float(-logp[counted, targets[counted]].mean())

    y = hidden[0] @ params.cls_w + params.cls_b
    l_ecls = float(-_log_softmax_rows(y)[record.cls_label])
    value = JointLossValue(l_smlm, l_ecls, ecls_weight, l_smlm + ecls_weight * l_ecls)

    grads = zero_params(v_size, d)
    d_hidden = np.zeros((n, d))

    if component in ("total", "smlm"):
        d_logits = np.zeros((n, v_size))
        probs = np.exp(logp[counted])
        d_logits[counted] = probs
        d_logits[counted, targets[counted]] -= 1.0
        d_logits[counted] /= m
        grads.mlm_bias += d_logits.sum(axis=0)
        d_hidden += d_logits @ params.emb
        grads.emb += d_logits.T @ hidden  # tied-projection path

    if component in ("total", "ecls"):
        w = ecls_weight if component == "total" else 1.0
        yp = np.exp(_log_softmax_rows(y))
        dy = yp.copy()
        dy[record.cls_label] -= 1.0
        dy *= w
        grads.cls_w += np.outer(hidden[0], dy)
        grads.cls_b += dy
        d_hidden[0] += dy @ params.cls_w.T

    grads.wo += ctx.T @ d_hidden
    d_ctx = d_hidden @ params.wo.T
    d_attn = d_ctx @ v.T
    d_v = attn.T @ d_ctx
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=1, keepdims=True))
    d_scores /= np.sqrt(d)
    d_q = d_scores @ k
    d_k = d_scores.T @ q
    grads.wq += x.T @ d_q
    grads.wk += x.T @ d_k
    grads.wv += x.T @ d_v
    # residual path plus the three attention input paths
    d_x = d_hidden + d_q @ params.wq.T + d_k @ params.wk.T + d_v @ params.wv.T
    grads.pos[:n] += d_x
    np.add.at(grads.emb, ids, d_x)  # input-embedding path

    return value, grads


def input_path_embedding_grad(
    params: TinyEncoderParams,
    record: TrainingRecord,
    component: str = "total",
    ecls_weight: float = 1.0,
) -> np.ndarray:
    """Embedding gradient through the input path only (tied projection
    excluded); structurally zero on rows of tokens absent from the record."""
    tied = np.zeros_like(params.emb)
    _, grads = forward_backward(params, record, component=component, ecls_weight=ecls_weight)
    if component in ("total", "smlm"):
        ids = np.asarray(record.input_ids)
        targets = np.asarray(record.mlm_targets)
        _, _, _, _, _, _, hidden = _encode(params, ids)
        logits = hidden @ params.emb.T + params.mlm_bias
        logp = _log_softmax_rows(logits)
        counted = targets != IGNORE_TARGET
        m = int(counted.sum())
        d_logits = np.zeros((len(ids), params.vocab_size))
        d_logits[counted] = np.exp(logp[counted])
        d_logits[counted, targets[counted]] -= 1.0
        d_logits[counted] /= m
        tied = d_logits.T @ hidden
    return grads.emb - tied


def predict_cls(params: TinyEncoderParams, record: TrainingRecord) -> int:
    _check_record(params, record)
    ids = np.asarray(record.input_ids)
    *_, hidden = _encode(params, ids)
    y = hidden[0] @ params.cls_w + params.cls_b
    return int(np.argmax(y))


def ecls_accuracy(params: TinyEncoderParams, records: list[TrainingRecord]) -> float:
    if not records:
        raise ValueError("no records")
    hits = sum(predict_cls(params, r) == r.cls_label for r in records)
    return hits / len(records)


def train_toy(
    shards_dir: str | Path,
    steps: int,
    learning_rate: float,
    seed: int,
    width: int = 16,
    ecls_weight: float = 1.0,
    vocab_size: int | None = None,
) -> tuple[TinyEncoderParams, list[tuple[int, float, float, float]]]:
    """Plain gradient descent over shard records in shard order.

    The loss curve rows are (step, l_smlm, l_ecls, total), each evaluated
    at the parameters *before* that step's update.
    """
    records = list(read_shards(shards_dir))
    if not records:
        raise InputError(f"no records in {shards_dir}")
    if vocab_size is None:
        manifest = load_manifest(shards_dir)
        vocab_size = manifest.config.get("vocab_size")
    if vocab_size is None:
        vocab_size = 1 + max(
            max(r.input_ids) for r in records
        )
        vocab_size = max(vocab_size, 1 + max(t for r in records for t in r.mlm_targets))

    params = init_params(vocab_size, width, seed)
    curve: list[tuple[int, float, float, float]] = []
    for step in range(steps):
        record = records[step % len(records)]
        value, grads = forward_backward(params, record, ecls_weight=ecls_weight)
        curve.append((step, value.l_smlm, value.l_ecls, value.total))
        for name, tensor in params.tensors().items():
            tensor -= learning_rate * getattr(grads, name)
    return params, curve


def write_loss_curve(curve: list[tuple[int, float, float, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "l_smlm", "l_ecls", "total"])
        for step, l_smlm, l_ecls, total in curve:
            writer.writerow([step, repr(l_smlm), repr(l_ecls), repr(total)])
