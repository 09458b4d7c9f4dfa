"""Versioned training-shard format: JSON-lines records plus a manifest.

Record keys (integers only): `ids`, `tgt`, `cls`, `doc`, `sent`, `kwm`.
`tgt` carries the original token id at positions selected for masking and
-1 everywhere else. Writing is deterministic: records sorted by
(doc, sent), compact JSON, LF terminators, fixed manifest formatting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConfigError, InputError, InvariantViolation, StorageError

FORMAT_VERSION = 1
IGNORE_TARGET = -1
MAX_RECORD_LEN = 128

MANIFEST_NAME = "manifest.json"
SHARD_PATTERN = "shard-%05d.jsonl"


@dataclass(frozen=True)
class TrainingRecord:
    input_ids: tuple[int, ...]
    mlm_targets: tuple[int, ...]
    cls_label: int
    doc_id: int
    sent_idx: int
    keyword_masked: bool

    def to_json_obj(self) -> dict:
        return {
            "ids": list(self.input_ids),
            "tgt": list(self.mlm_targets),
            "cls": self.cls_label,
            "doc": self.doc_id,
            "sent": self.sent_idx,
            "kwm": int(self.keyword_masked),
        }

    @classmethod
    def from_json_obj(cls, obj: dict, locus: str) -> "TrainingRecord":
        try:
            return cls(
                input_ids=tuple(int(x) for x in obj["ids"]),
                mlm_targets=tuple(int(x) for x in obj["tgt"]),
                cls_label=int(obj["cls"]),
                doc_id=int(obj["doc"]),
                sent_idx=int(obj["sent"]),
                keyword_masked=bool(int(obj["kwm"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantViolation(f"{locus}: malformed record: {exc}") from exc


def validate_record(
    record: TrainingRecord,
    locus: str,
    vocab_size: int | None = None,
    mask_id: int | None = None,
    cls_id: int | None = None,
    sep_id: int | None = None,
) -> None:
    """Raise InvariantViolation naming `locus` if any record invariant fails."""
    n = len(record.input_ids)
    if n != len(record.mlm_targets):
        raise InvariantViolation(f"{locus}: ids/targets length mismatch ({n} vs {len(record.mlm_targets)})")
    if not 2 <= n <= MAX_RECORD_LEN:
        raise InvariantViolation(f"{locus}: record length {n} outside [2, {MAX_RECORD_LEN}]")
    if record.cls_label not in (0, 1):
        raise InvariantViolation(f"{locus}: cls label {record.cls_label} not in {{0, 1}}")
    if all(t == IGNORE_TARGET for t in record.mlm_targets):
        raise InvariantViolation(f"{locus}: no position carries an MLM target")
    if record.mlm_targets[0] != IGNORE_TARGET or record.mlm_targets[-1] != IGNORE_TARGET:
        raise InvariantViolation(f"{locus}: [CLS]/[SEP] positions must carry -1 targets")
    for p, (i, t) in enumerate(zip(record.input_ids, record.mlm_targets)):
        if i < 0 or (vocab_size is not None and i >= vocab_size):
            raise InvariantViolation(f"{locus}: input id {i} at position {p} out of range")
        if t != IGNORE_TARGET and (t < 0 or (vocab_size is not None and t >= vocab_size)):
            raise InvariantViolation(f"{locus}: target {t} at position {p} out of range")
        if mask_id is not None and i == mask_id and t == IGNORE_TARGET:
            raise InvariantViolation(f"{locus}: [MASK] at position {p} has no target")
    if cls_id is not None and record.input_ids[0] != cls_id:
        raise InvariantViolation(f"{locus}: position 0 is not [CLS]")
    if sep_id is not None and record.input_ids[-1] != sep_id:
        raise InvariantViolation(f"{locus}: last position is not [SEP]")


@dataclass
class ShardManifest:
    version: int
    vocab_sha256: str
    policy_sha256: str
    n_records: int
    n_entailment: int
    n_contradiction: int
    config: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "version": self.version,
            "vocab_sha256": self.vocab_sha256,
            "policy_sha256": self.policy_sha256,
            "n_records": self.n_records,
            "n_entailment": self.n_entailment,
            "n_contradiction": self.n_contradiction,
            "config": self.config,
        }


def write_shards(
    records: Iterable[TrainingRecord],
    out_dir: str | Path,
    records_per_shard: int,
    vocab_sha256: str = "",
    policy_sha256: str = "",
    config: dict | None = None,
) -> ShardManifest:
    if records_per_shard < 1:
        raise ConfigError(f"records_per_shard must be >= 1, got {records_per_shard}")
    out_dir = Path(out_dir)
    ordered = sorted(records, key=lambda r: (r.doc_id, r.sent_idx))
    n_entailment = sum(1 for r in ordered if r.cls_label == 1)

    manifest = ShardManifest(
        version=FORMAT_VERSION,
        vocab_sha256=vocab_sha256,
        policy_sha256=policy_sha256,
        n_records=len(ordered),
        n_entailment=n_entailment,
        n_contradiction=len(ordered) - n_entailment,
        config=dict(config or {}),
    )
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for shard_no in range(0, max(1, (len(ordered) + records_per_shard - 1) // records_per_shard)):
            chunk = ordered[shard_no * records_per_shard:(shard_no + 1) * records_per_shard]
            if not chunk:
                break
            path = out_dir / (SHARD_PATTERN % shard_no)
            _write_shard_file(path, chunk)
        manifest_path = out_dir / MANIFEST_NAME
        manifest_path.write_text(
            json.dumps(manifest.to_json_obj(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise StorageError(f"writing {out_dir}: {exc}") from exc
    return manifest


def _write_shard_file(path: Path, chunk: list[TrainingRecord]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in chunk:
                fh.write(json.dumps(rec.to_json_obj(), sort_keys=True, separators=(",", ":")))
                fh.write("\n")
    except OSError as exc:
        raise StorageError(f"writing shard {path}: {exc}") from exc


def load_manifest(shards_dir: str | Path) -> ShardManifest:
    path = Path(shards_dir) / MANIFEST_NAME
    if not path.exists():
        raise InputError(f"no {MANIFEST_NAME} in {shards_dir}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvariantViolation(f"{path}: bad JSON: {exc}") from exc
    required = ("version", "vocab_sha256", "policy_sha256", "n_records",
                "n_entailment", "n_contradiction", "config")
    missing = [k for k in required if k not in obj]
    if missing:
        raise InvariantViolation(f"{path}: manifest missing keys {missing}")
    if obj["version"] != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported shard format version {obj['version']}")
    manifest = ShardManifest(**{k: obj[k] for k in required})
    if manifest.n_records != manifest.n_entailment + manifest.n_contradiction:
        raise InvariantViolation(
            f"{path}: n_records {manifest.n_records} != "
            f"{manifest.n_entailment} + {manifest.n_contradiction}"
        )
    return manifest


def read_shards(
    shards_dir: str | Path,
    expected_vocab_sha256: str | None = None,
    expected_policy_sha256: str | None = None,
) -> Iterator[TrainingRecord]:
    """Yield records in manifest order, validating every record invariant."""
    shards_dir = Path(shards_dir)
    manifest = load_manifest(shards_dir)
    if expected_vocab_sha256 is not None and manifest.vocab_sha256 != expected_vocab_sha256:
        raise ConfigError(
            f"vocab digest mismatch: manifest has {manifest.vocab_sha256}, caller expects {expected_vocab_sha256}"
        )
    if expected_policy_sha256 is not None and manifest.policy_sha256 != expected_policy_sha256:
        raise ConfigError(
            f"policy digest mismatch: manifest has {manifest.policy_sha256}, caller expects {expected_policy_sha256}"
        )
    cfg = manifest.config
    vocab_size = cfg.get("vocab_size")
    mask_id = cfg.get("mask_id")
    cls_id = cfg.get("cls_id")
    sep_id = cfg.get("sep_id")

    shard_files = sorted(shards_dir.glob("shard-*.jsonl"))
    count = 0
    n_entailment = 0
    for path in shard_files:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                locus = f"{path.name}:{lineno}"
                line = line.strip()
                if not line:
                    raise InvariantViolation(f"{locus}: blank line inside shard")
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InvariantViolation(f"{locus}: truncated or corrupt record: {exc}") from exc
                record = TrainingRecord.from_json_obj(obj, locus)
                validate_record(record, locus, vocab_size=vocab_size,
                                mask_id=mask_id, cls_id=cls_id, sep_id=sep_id)
                count += 1
                n_entailment += record.cls_label
                yield record
    if count != manifest.n_records:
        raise InvariantViolation(
            f"{shards_dir}: manifest says {manifest.n_records} records, shards hold {count}"
        )
    if n_entailment != manifest.n_entailment:
        raise InvariantViolation(
            f"{shards_dir}: manifest says {manifest.n_entailment} entailment records, shards hold {n_entailment}"
        )
