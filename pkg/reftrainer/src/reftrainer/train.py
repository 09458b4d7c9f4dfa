"""Continual pretraining with top-K encoder-layer freezing.

Only the top K encoder layers, the pooler, and the two heads receive
gradients; embeddings and the lower layers stay bitwise frozen. With
tied word embeddings (the BERT default) the MLM decoder matrix is the
frozen embedding table, while the head's transform and bias still train.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from transformers import BertForPreTraining

from .data import (
    ShardDataset,
    batches,
    check_vocab_compatibility,
    load_shards,
)
from .losses import joint_loss


@dataclass
class TrainSpec:
    shards_dir: str
    base_checkpoint: str
    out_dir: str
    k_trainable: int = 2
    epochs: int = 3
    effective_batch_size: int = 4096
    micro_batch_size: int = 8
    learning_rate: float = 1e-5
    warmup_ratio: float = 0.1
    seed: int = 0
    ecls_weight: float = 1.0
    max_steps: int | None = None  # optimizer steps; None = run the epochs out
    id_remap: dict[int, int] | None = field(default=None, repr=False)


_LAYER_RE = re.compile(r"\bencoder\.layer\.(\d+)\.")


def encoder_depth(model: torch.nn.Module) -> int:
    layers = {int(m.group(1)) for name, _ in model.named_parameters()
              if (m := _LAYER_RE.search(name))}
    return max(layers) + 1 if layers else 0


def trainable_parameter_names(model: torch.nn.Module, k: int) -> set[str]:
    """Top-K encoder layers, the pooler, and both heads."""
    depth = encoder_depth(model)
    if not 1 <= k <= depth:
        raise ValueError(f"k_trainable must be in [1, {depth}], got {k}")
    top = {str(i) for i in range(depth - k, depth)}
    names = set()
    for name, _ in model.named_parameters():
        m = _LAYER_RE.search(name)
        if m is not None:
            if m.group(1) in top:
                names.add(name)
        elif name.startswith("cls.") or ".pooler." in name:
            names.add(name)
    return names


def apply_freezing(model: torch.nn.Module, k: int) -> set[str]:
    trainable = trainable_parameter_names(model, k)
    for name, param in model.named_parameters():
        param.requires_grad = name in trainable
    return trainable


def frozen_encoder_parameter_names(model: torch.nn.Module, k: int) -> set[str]:
    """Encoder-side parameters that must stay bit-identical: embeddings
    plus every layer below the top K."""
    depth = encoder_depth(model)
    keep = set()
    for name, _ in model.named_parameters():
        if name.startswith("cls.") or ".pooler." in name:
            continue
        m = _LAYER_RE.search(name)
        if m is not None and int(m.group(1)) >= depth - k:
            continue
        keep.add(name)
    return keep


def _lr_lambda(step: int, warmup: int, total: int) -> float:
    if step < warmup:
        return step / max(1, warmup)
    if total <= warmup:
        return 1.0
    return max(0.0, (total - step) / (total - warmup))


def continual_pretrain(spec: TrainSpec) -> tuple[BertForPreTraining, list[dict]]:
    """Run the joint objective over the shards; returns (model, metrics).

    Metrics rows: {"step", "l_smlm", "l_ecls", "total"} per optimizer step
    (losses averaged over the accumulated micro-batches). The checkpoint,
    metrics CSV, and resolved spec land in spec.out_dir.
    """
    torch.manual_seed(spec.seed)
    dataset = load_shards(spec.shards_dir, id_remap=spec.id_remap)
    check_vocab_compatibility(dataset.manifest, spec.base_checkpoint, spec.id_remap)

    model = BertForPreTraining.from_pretrained(spec.base_checkpoint)
    vocab_size = model.config.vocab_size
    top_id = max(max(r["ids"]) for r in dataset.records)
    if top_id >= vocab_size:
        raise ValueError(
            f"shard token id {top_id} out of range for checkpoint vocab {vocab_size}"
        )
    apply_freezing(model, spec.k_trainable)
    model.train()

    accumulation = max(1, math.ceil(spec.effective_batch_size / spec.micro_batch_size))
    micros_per_epoch = math.ceil(len(dataset) / spec.micro_batch_size)
    steps_per_epoch = max(1, math.ceil(micros_per_epoch / accumulation))
    total_steps = steps_per_epoch * spec.epochs
    if spec.max_steps is not None:
        total_steps = min(total_steps, spec.max_steps)
    warmup_steps = int(spec.warmup_ratio * total_steps)

    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(params, lr=spec.learning_rate)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda s: _lr_lambda(s, warmup_steps, total_steps)
    )

    metrics: list[dict] = []
    step = 0
    done = False
    accum = {"l_smlm": 0.0, "l_ecls": 0.0, "total": 0.0, "n": 0}
    optimizer.zero_grad()
    # generous epoch allowance; the loop exits on total_steps
    for batch in batches(dataset, spec.micro_batch_size, spec.seed, spec.epochs + 1):
        out = model(
            input_ids=batch["input_ids"],
            attention_mask=batch["attention_mask"],
        )
        l_smlm, l_ecls, total = joint_loss(
            out.prediction_logits, batch["mlm_targets"],
            out.seq_relationship_logits, batch["cls_labels"],
            ecls_weight=spec.ecls_weight,
        )
        (total / accumulation).backward()
        accum["l_smlm"] += l_smlm.detach().item()
        accum["l_ecls"] += l_ecls.detach().item()
        accum["total"] += total.detach().item()
        accum["n"] += 1
        if accum["n"] == accumulation:
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            step += 1
            metrics.append({
                "step": step,
                "l_smlm": accum["l_smlm"] / accum["n"],
                "l_ecls": accum["l_ecls"] / accum["n"],
                "total": accum["total"] / accum["n"],
            })
            accum = {"l_smlm": 0.0, "l_ecls": 0.0, "total": 0.0, "n": 0}
            if step >= total_steps:
                done = True
                break
    if not done and accum["n"]:
        # flush a trailing partial accumulation window
        optimizer.step()
        optimizer.zero_grad()
        step += 1
        metrics.append({
            "step": step,
            "l_smlm": accum["l_smlm"] / accum["n"],
            "l_ecls": accum["l_ecls"] / accum["n"],
            "total": accum["total"] / accum["n"],
        })

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    write_metrics(metrics, out_dir / "metrics.csv")
    resolved = asdict(spec)
    resolved.pop("id_remap")
    resolved["total_steps"] = step
    resolved["shard_vocab_sha256"] = dataset.manifest["vocab_sha256"]
    (out_dir / "trainspec.json").write_text(
        json.dumps(resolved, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return model, metrics


def write_metrics(metrics: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "l_smlm", "l_ecls", "total"])
        writer.writeheader()
        writer.writerows(metrics)


def smoothed(values: list[float], window: int = 20) -> list[float]:
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(sum(values[lo:i + 1]) / (i - lo + 1))
    return out
