"""CLI: continual pretraining runs and a demo checkpoint builder."""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

from .data import ShardError, load_remap_table
from .train import TrainSpec, continual_pretrain, smoothed


def cmd_run(args) -> int:
    remap = load_remap_table(args.remap) if args.remap else None
    spec = TrainSpec(
        shards_dir=args.shards,
        base_checkpoint=args.checkpoint,
        out_dir=args.out,
        k_trainable=args.k,
        epochs=args.epochs,
        effective_batch_size=args.effective_batch,
        micro_batch_size=args.micro_batch,
        learning_rate=args.lr,
        warmup_ratio=args.warmup_ratio,
        seed=args.seed,
        ecls_weight=args.ecls_weight,
        max_steps=args.max_steps,
        id_remap=remap,
    )
    _, metrics = continual_pretrain(spec)
    totals = [m["total"] for m in metrics]
    smooth = smoothed(totals)
    print(f"{len(metrics)} optimizer steps")
    if metrics:
        print(f"total loss: first {totals[0]:.4f}, last {totals[-1]:.4f} "
              f"(smoothed last {smooth[-1]:.4f})")
    print(f"checkpoint + metrics written to {args.out}")
    return 0


def cmd_init_demo_checkpoint(args) -> int:
    """Random-init BERT-style checkpoint sized to a wordpiece vocab file.
    For environments without hub access; not a pretrained model."""
    from transformers import BertConfig, BertForPreTraining

    vocab_lines = [
        ln.strip() for ln in Path(args.vocab).read_text(encoding="utf-8").splitlines()
        if ln.strip()
    ]
    config = BertConfig(
        vocab_size=len(vocab_lines),
        hidden_size=args.hidden,
        num_hidden_layers=args.layers,
        num_attention_heads=args.heads,
        intermediate_size=args.hidden * 2,
        max_position_embeddings=128,
    )
    import torch

    torch.manual_seed(args.seed)
    model = BertForPreTraining(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    shutil.copyfile(args.vocab, out / "vocab.txt")
    print(f"demo checkpoint ({args.layers} layers, hidden {args.hidden}, "
          f"vocab {len(vocab_lines)}) written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reftrain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="continual pretraining on a shard directory")
    p.add_argument("--shards", required=True)
    p.add_argument("--checkpoint", required=True,
                   help="local checkpoint directory (or hub name where available)")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=2, help="trainable top encoder layers")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--effective-batch", dest="effective_batch", type=int, default=4096)
    p.add_argument("--micro-batch", dest="micro_batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--warmup-ratio", dest="warmup_ratio", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ecls-weight", dest="ecls_weight", type=float, default=1.0)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--remap", help="JSON file mapping shard token ids to checkpoint ids")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("init-demo-checkpoint",
                       help="build a tiny random-init checkpoint for smoke runs")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_demo_checkpoint)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ShardError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
