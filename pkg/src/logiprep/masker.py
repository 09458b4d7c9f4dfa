"""Selective whole-word masking driven by POS-tag policies.

A policy names the candidate tag set; the plan for one sentence picks
`min(max(1, round(rate * n_words)), n_candidates)` candidate words without
replacement and assigns one action kind per word (mask / random / keep).
All subwords of a selected word share the action kind; random replacement
ids are drawn per subword.

Randomness is counter-based (Philox) keyed by (policy seed, doc id,
sentence index), so plans are identical no matter how documents are
distributed over workers.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .curator import CuratedSentence
from .pos_tagger import TAG_NAMES, PosTag
from .shards import IGNORE_TARGET, TrainingRecord
from .tokenizer import EncodedSentence, SubwordVocab

BASE_TAG_NAMES = ("ADJ", "ADV", "CCONJ", "PART", "SCONJ", "VERB")
NOUN_TAG_NAMES = ("NOUN", "PRON", "PROPN")


class PolicyKind(enum.Enum):
    BASE = "base"
    BASE_NOUNS = "base-nouns"
    BASE_NOUNS_RANDOM = "base-nouns-random"


class ActionKind(enum.Enum):
    MASK = "mask"
    RANDOM = "random"
    KEEP = "keep"


@dataclass(frozen=True)
class MaskAction:
    kind: ActionKind
    replacement: int | None = None  # set iff kind is RANDOM


@dataclass(frozen=True)
class MaskPolicy:
    candidate_tags: frozenset[PosTag]
    mask_rate: float = 0.15
    action_probs: tuple[float, float, float] = (0.8, 0.1, 0.1)  # mask, random, keep
    seed: int = 0

    def __post_init__(self):
        if not self.candidate_tags:
            raise ValueError("candidate_tags must be non-empty")
        if not 0.0 < self.mask_rate <= 1.0:
            raise ValueError(f"mask_rate must be in (0, 1], got {self.mask_rate}")
        if len(self.action_probs) != 3 or any(p < 0 for p in self.action_probs):
            raise ValueError(f"bad action_probs {self.action_probs}")
        if abs(sum(self.action_probs) - 1.0) > 1e-9:
            raise ValueError(f"action_probs must sum to 1, got {sum(self.action_probs)}")

    def digest(self) -> str:
        obj = {
            "tags": sorted(t.value for t in self.candidate_tags),
            "rate": self.mask_rate,
            "probs": list(self.action_probs),
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _parse_tags(names) -> frozenset[PosTag]:
    return frozenset(PosTag.parse(n) for n in names)


def base_policy(
    seed: int,
    mask_rate: float = 0.15,
    action_probs: tuple[float, float, float] = (0.8, 0.1, 0.1),
    include_aux: bool = False,
) -> MaskPolicy:
    """Candidate set {ADJ, ADV, CCONJ, PART, SCONJ, VERB}; AUX opt-in."""
    tags = set(_parse_tags(BASE_TAG_NAMES))
    if include_aux:
        tags.add(PosTag.AUX)
    return MaskPolicy(frozenset(tags), mask_rate, action_probs, seed)


def ablation_policy(
    kind: PolicyKind,
    seed: int,
    mask_rate: float = 0.15,
    action_probs: tuple[float, float, float] = (0.8, 0.1, 0.1),
    include_aux: bool = False,
) -> MaskPolicy:
    """Base, Base+Nouns, or Base+Nouns+Random (= every tag, i.e. uniform
    random word masking)."""
    if kind == PolicyKind.BASE:
        return base_policy(seed, mask_rate, action_probs, include_aux)
    tags = set(_parse_tags(BASE_TAG_NAMES)) | set(_parse_tags(NOUN_TAG_NAMES))
    if include_aux:
        tags.add(PosTag.AUX)
    if kind == PolicyKind.BASE_NOUNS_RANDOM:
        tags = {PosTag.parse(n) for n in TAG_NAMES}
    return MaskPolicy(frozenset(tags), mask_rate, action_probs, seed)


@dataclass(frozen=True)
class MaskingPlan:
    selected_words: tuple[int, ...]  # ascending word indices
    actions: dict[int, tuple[MaskAction, ...]]

    def action_kind(self, word_idx: int) -> ActionKind:
        return self.actions[word_idx][0].kind


def sentence_rng(seed: int, doc_id: int, sent_idx: int) -> np.random.Generator:
    """Counter-based generator keyed per sentence; worker-order independent."""
    mask64 = (1 << 64) - 1
    packed = struct.pack("<QQQ", seed & mask64, doc_id & mask64, sent_idx & mask64)
    key = int.from_bytes(hashlib.blake2b(packed, digest_size=16).digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))


def mask_budget(policy: MaskPolicy, n_words: int) -> int:
    return max(1, round(policy.mask_rate * n_words))


def candidate_words(
    curated: CuratedSentence, encoded: EncodedSentence, policy: MaskPolicy, vocab: SubwordVocab
) -> list[int]:
    """Word indices eligible for masking: candidate tag, not encoded as [UNK]."""
    return [
        i
        for i, tag in enumerate(curated.tags)
        if tag in policy.candidate_tags and not encoded.span_is_unk(i, vocab.unk_id)
    ]


def plan(
    curated: CuratedSentence,
    encoded: EncodedSentence,
    policy: MaskPolicy,
    vocab: SubwordVocab,
) -> MaskingPlan | None:
    """Draw the masking plan for one sentence, or None if no word is eligible."""
    words = curated.segmented.word_forms
    if not (len(words) == len(curated.tags) == len(encoded.word_spans)):
        raise ValueError("words, tags and word_spans must be parallel")
    candidates = candidate_words(curated, encoded, policy, vocab)
    if not candidates:
        return None
    take = min(mask_budget(policy, len(words)), len(candidates))
    rng = sentence_rng(policy.seed, curated.segmented.doc_id, curated.segmented.sent_idx)
    picked = rng.choice(len(candidates), size=take, replace=False)
    selected = tuple(sorted(candidates[i] for i in picked))

    p_mask, p_random, _ = policy.action_probs
    nonspecial = vocab.nonspecial_ids
    actions: dict[int, tuple[MaskAction, ...]] = {}
    for w in selected:
        a, b = encoded.word_spans[w]
        u = rng.random()
        if u < p_mask:
            acts = tuple(MaskAction(ActionKind.MASK) for _ in range(a, b))
        elif u < p_mask + p_random:
            acts = tuple(
                MaskAction(ActionKind.RANDOM, nonspecial[int(rng.integers(len(nonspecial)))])
                for _ in range(a, b)
            )
        else:
            acts = tuple(MaskAction(ActionKind.KEEP) for _ in range(a, b))
        actions[w] = acts
    return MaskingPlan(selected, actions)


def apply_plan(
    curated: CuratedSentence,
    encoded: EncodedSentence,
    masking: MaskingPlan,
    vocab: SubwordVocab,
) -> TrainingRecord:
    """Materialize the record: masked input ids plus original-id targets."""
    input_ids = list(encoded.ids)
    targets = [IGNORE_TARGET] * len(input_ids)
    for w in masking.selected_words:
        a, b = encoded.word_spans[w]
        acts = masking.actions[w]
        for offset, p in enumerate(range(a, b)):
            targets[p] = encoded.ids[p]
            act = acts[offset]
            if act.kind == ActionKind.MASK:
                input_ids[p] = vocab.mask_id
            elif act.kind == ActionKind.RANDOM:
                input_ids[p] = act.replacement
    selected = set(masking.selected_words)
    keyword_masked = any(
        w in selected for m in curated.matches for w in range(m.start, m.end)
    )
    return TrainingRecord(
        input_ids=tuple(input_ids),
        mlm_targets=tuple(targets),
        cls_label=curated.label.cls_id,
        doc_id=curated.segmented.doc_id,
        sent_idx=curated.segmented.sent_idx,
        keyword_masked=keyword_masked,
    )
