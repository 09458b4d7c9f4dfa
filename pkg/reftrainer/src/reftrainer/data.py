"""Shard reading and batching.

This package consumes the shard directory format as an external
interface: `shard-%05d.jsonl` files (records with integer keys `ids`,
`tgt`, `cls`, `doc`, `sent`, `kwm`; `tgt` is -1 off the masked positions)
plus `manifest.json` with `version`, `vocab_sha256`, `policy_sha256`,
`n_records`, `n_entailment`, `n_contradiction`, `config`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import torch

SUPPORTED_VERSION = 1
IGNORE_INDEX = -1


class ShardError(Exception):
    pass


@dataclass
class ShardDataset:
    records: list[dict]
    manifest: dict

    @property
    def pad_id(self) -> int:
        return int(self.manifest["config"].get("pad_id", 0))

    @property
    def vocab_size(self) -> int | None:
        size = self.manifest["config"].get("vocab_size")
        return None if size is None else int(size)

    def __len__(self) -> int:
        return len(self.records)


def vocab_file_sha256(path: str | Path) -> str:
    """Digest over the canonical one-token-per-line form, matching the
    producer's convention (line endings do not matter)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = [ln.strip() for ln in lines if ln.strip()]
    return hashlib.sha256(("\n".join(tokens) + "\n").encode("utf-8")).hexdigest()


def load_manifest(shards_dir: str | Path) -> dict:
    path = Path(shards_dir) / "manifest.json"
    if not path.exists():
        raise ShardError(f"no manifest.json in {shards_dir}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("version") != SUPPORTED_VERSION:
        raise ShardError(f"unsupported shard format version {manifest.get('version')}")
    return manifest


def load_shards(
    shards_dir: str | Path,
    id_remap: dict[int, int] | None = None,
) -> ShardDataset:
    """Read every record, validating the basic invariants. `id_remap`
    translates producer token ids into the consumer checkpoint's ids."""
    shards_dir = Path(shards_dir)
    manifest = load_manifest(shards_dir)
    records: list[dict] = []
    for shard in sorted(shards_dir.glob("shard-*.jsonl")):
        with open(shard, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                locus = f"{shard.name}:{lineno}"
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ShardError(f"{locus}: corrupt record: {exc}") from exc
                ids = [int(x) for x in obj["ids"]]
                tgt = [int(x) for x in obj["tgt"]]
                if len(ids) != len(tgt):
                    raise ShardError(f"{locus}: ids/tgt length mismatch")
                if all(t == IGNORE_INDEX for t in tgt):
                    raise ShardError(f"{locus}: record carries no MLM target")
                if id_remap is not None:
                    ids = [_remap(id_remap, i, locus) for i in ids]
                    tgt = [t if t == IGNORE_INDEX else _remap(id_remap, t, locus) for t in tgt]
                records.append({
                    "ids": ids,
                    "tgt": tgt,
                    "cls": int(obj["cls"]),
                    "doc": int(obj["doc"]),
                    "sent": int(obj["sent"]),
                })
    if len(records) != manifest["n_records"]:
        raise ShardError(
            f"{shards_dir}: manifest says {manifest['n_records']} records, found {len(records)}"
        )
    return ShardDataset(records, manifest)


def _remap(table: dict[int, int], token_id: int, locus: str) -> int:
    try:
        return table[token_id]
    except KeyError:
        raise ShardError(f"{locus}: token id {token_id} missing from remap table") from None


def load_remap_table(path: str | Path) -> dict[int, int]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return {int(k): int(v) for k, v in obj.items()}


def check_vocab_compatibility(
    manifest: dict,
    checkpoint_dir: str | Path,
    id_remap: dict[int, int] | None,
) -> None:
    """Compare the shard producer's vocab digest against the checkpoint's
    vocab.txt. A mismatch requires an id-remap table."""
    if id_remap is not None:
        return
    vocab_file = Path(checkpoint_dir) / "vocab.txt"
    if not vocab_file.exists():
        raise ShardError(
            f"{checkpoint_dir} has no vocab.txt to check against the shard "
            "vocab digest; supply an id-remap table"
        )
    have = vocab_file_sha256(vocab_file)
    want = manifest["vocab_sha256"]
    if have != want:
        raise ShardError(
            f"vocab digest mismatch: shards were produced with {want[:12]}..., "
            f"checkpoint tokenizer is {have[:12]}...; supply an id-remap table"
        )


def collate(records: list[dict], pad_id: int) -> dict[str, torch.Tensor]:
    width = max(len(r["ids"]) for r in records)
    n = len(records)
    input_ids = torch.full((n, width), pad_id, dtype=torch.long)
    targets = torch.full((n, width), IGNORE_INDEX, dtype=torch.long)
    attention = torch.zeros((n, width), dtype=torch.long)
    labels = torch.zeros(n, dtype=torch.long)
    for row, rec in enumerate(records):
        k = len(rec["ids"])
        input_ids[row, :k] = torch.tensor(rec["ids"], dtype=torch.long)
        targets[row, :k] = torch.tensor(rec["tgt"], dtype=torch.long)
        attention[row, :k] = 1
        labels[row] = rec["cls"]
    return {
        "input_ids": input_ids,
        "mlm_targets": targets,
        "attention_mask": attention,
        "cls_labels": labels,
    }


def batches(dataset: ShardDataset, batch_size: int, seed: int, epochs: int):
    """Shuffled epoch iterator over collated micro-batches."""
    g = torch.Generator().manual_seed(seed)
    for _ in range(epochs):
        order = torch.randperm(len(dataset.records), generator=g).tolist()
        for start in range(0, len(order), batch_size):
            chunk = [dataset.records[i] for i in order[start:start + batch_size]]
            yield collate(chunk, dataset.pad_id)
