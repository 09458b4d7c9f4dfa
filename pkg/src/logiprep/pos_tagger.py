"""Averaged-perceptron POS tagger over the coarse universal tag set.

Greedy left-to-right decoding; training updates use the predicted history
so train and inference see the same feature distribution. The final
weights are the average of all intermediate weight vectors, which is what
makes single-pass greedy decoding stable.
"""

from __future__ import annotations

import enum
import json
import random
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError


class PosTag(enum.Enum):
    ADJ = "ADJ"
    ADP = "ADP"
    ADV = "ADV"
    AUX = "AUX"
    CCONJ = "CCONJ"
    CONJ = "CCONJ"  # legacy alias, normalized to CCONJ
    DET = "DET"
    INTJ = "INTJ"
    NOUN = "NOUN"
    NUM = "NUM"
    PART = "PART"
    PRON = "PRON"
    PROPN = "PROPN"
    PUNCT = "PUNCT"
    SCONJ = "SCONJ"
    SYM = "SYM"
    VERB = "VERB"
    X = "X"

    @classmethod
    def parse(cls, name: str) -> "PosTag":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown POS tag {name!r}") from None


# Canonical tag names in lexicographic order; score ties resolve to the
# earliest name in this list.
TAG_NAMES: tuple[str, ...] = tuple(sorted({t.value for t in PosTag}))

_BOS1 = "<S>"
_BOS2 = "<S2>"


def _shape(word: str) -> str:
    return "".join(
        "d" if c.isdigit() else "x" if c.islower() else "X" if c.isupper() else c
        for c in word
    )


def _is_numeric(word: str) -> bool:
    return any(c.isdigit() for c in word) and not any(c.isalpha() for c in word)


def _features(i: int, words: list[str], prev: str, prev2: str) -> list[str]:
    w = words[i]
    lw = w.lower()
    surface = "!NUM" if _is_numeric(w) else w
    lsurface = "!NUM" if _is_numeric(w) else lw
    return [
        "w=" + surface,
        "lw=" + lsurface,
        "suf1=" + lw[-1:],
        "suf2=" + lw[-2:],
        "suf3=" + lw[-3:],
        "pre1=" + lw[:1],
        "t-1=" + prev,
        "t-2t-1=" + prev2 + "|" + prev,
        "w-1=" + (words[i - 1] if i > 0 else _BOS1),
        "w+1=" + (words[i + 1] if i + 1 < len(words) else _BOS1),
        "shape=" + _shape(w),
    ]


def _predict(weights: dict[str, dict[str, float]], feats: list[str]) -> str:
    scores: dict[str, float] = defaultdict(float)
    for f in feats:
        per_tag = weights.get(f)
        if per_tag:
            for tag, w in per_tag.items():
                scores[tag] += w
    best = TAG_NAMES[0]
    best_score = scores.get(best, 0.0)
    for tag in TAG_NAMES[1:]:
        s = scores.get(tag, 0.0)
        if s > best_score:
            best, best_score = tag, s
    return best


@dataclass
class TaggerModel:
    weights: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def tag(self, words: list[str]) -> list[PosTag]:
        if not words:
            raise ValueError("words must be non-empty")
        prev, prev2 = _BOS1, _BOS2
        out: list[PosTag] = []
        for i in range(len(words)):
            guess = _predict(self.weights, _features(i, words, prev, prev2))
            out.append(PosTag(guess))
            prev2, prev = prev, guess
        return out


def read_conllu(path: str | Path) -> list[tuple[list[str], list[str]]]:
    """Parse (words, UPOS) sentence pairs; skips comments, multiword token
    ranges and empty nodes."""
    sentences: list[tuple[list[str], list[str]]] = []
    words: list[str] = []
    tags: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if words:
                    sentences.append((words, tags))
                    words, tags = [], []
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                raise InputError(f"{path}:{lineno}: expected >= 4 tab-separated columns")
            tok_id = cols[0]
            if "-" in tok_id or "." in tok_id:
                continue
            if not tok_id.isdigit():
                raise InputError(f"{path}:{lineno}: bad token id {tok_id!r}")
            upos = cols[3]
            try:
                tag = PosTag.parse(upos)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            words.append(cols[1])
            tags.append(tag.value)
    if words:
        sentences.append((words, tags))
    if not sentences:
        raise InputError(f"{path}: no sentences found")
    return sentences


def train(
    conllu: str | Path,
    epochs: int,
    seed: int,
    corpus_name: str | None = None,
) -> TaggerModel:
    """Averaged-perceptron training with per-epoch shuffling driven by seed."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    sentences = read_conllu(conllu)

    weights: dict[str, dict[str, float]] = {}
    totals: dict[str, dict[str, float]] = {}
    stamps: dict[str, dict[str, int]] = {}
    q = 0

    def bump(feat: str, tag: str, delta: float) -> None:
        w = weights.setdefault(feat, {})
        t = totals.setdefault(feat, {})
        s = stamps.setdefault(feat, {})
        t[tag] = t.get(tag, 0.0) + (q - s.get(tag, 0)) * w.get(tag, 0.0)
        s[tag] = q
        w[tag] = w.get(tag, 0.0) + delta

    rng = random.Random(seed)
    order = list(range(len(sentences)))
    for _ in range(epochs):
        rng.shuffle(order)
        for idx in order:
            words, gold = sentences[idx]
            prev, prev2 = _BOS1, _BOS2
            for i in range(len(words)):
                feats = _features(i, words, prev, prev2)
                guess = _predict(weights, feats)
                q += 1
                if guess != gold[i]:
                    for f in feats:
                        bump(f, gold[i], +1.0)
                        bump(f, guess, -1.0)
                prev2, prev = prev, guess

    averaged: dict[str, dict[str, float]] = {}
    for feat, per_tag in weights.items():
        t = totals[feat]
        s = stamps[feat]
        row = {}
        for tag, w in per_tag.items():
            total = t.get(tag, 0.0) + (q - s.get(tag, 0)) * w
            avg = total / q
            if avg:
                row[tag] = avg
        if row:
            averaged[feat] = row

    meta = {
        "corpus": corpus_name or str(conllu),
        "epochs": epochs,
        "seed": seed,
        "n_train_sentences": len(sentences),
    }
    return TaggerModel(weights=averaged, metadata=meta)


def evaluate(model: TaggerModel, conllu: str | Path) -> float:
    """Token-level tagging accuracy against a gold CoNLL-U file."""
    correct = 0
    total = 0
    for words, gold in read_conllu(conllu):
        pred = model.tag(words)
        for p, g in zip(pred, gold):
            correct += p.value == g
            total += 1
    return correct / total


_MAGIC = b"LPTG"
_FORMAT_VERSION = 1


def save(model: TaggerModel, path: str | Path) -> None:
    payload = json.dumps(
        {"metadata": model.metadata, "weights": model.weights},
        ensure_ascii=False,
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)


def load(path: str | Path) -> TaggerModel:
    raw = Path(path).read_bytes()
    if len(raw) < 14:
        raise InputError(f"{path}: truncated model file")
    if raw[:4] != _MAGIC:
        raise InputError(f"{path}: bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != _FORMAT_VERSION:
        raise InputError(f"{path}: unsupported model format version {version}")
    (length,) = struct.unpack_from("<Q", raw, 6)
    payload = raw[14:]
    if len(payload) != length:
        raise InputError(f"{path}: truncated model file (want {length} payload bytes, have {len(payload)})")
    obj = json.loads(payload.decode("utf-8"))
    return TaggerModel(weights=obj["weights"], metadata=obj.get("metadata", {}))
