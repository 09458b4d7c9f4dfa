"""WordPiece-style subword vocabulary with word <-> subword alignment.

Encoding is greedy longest-match-first over the lowercased word: the
longest vocabulary prefix, then repeatedly the longest "##" continuation.
No backtracking: a word whose remainder cannot be matched becomes a
single [UNK], even if some other segmentation would have tiled it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
CONTINUATION_PREFIX = "##"
MAX_SUBWORDS = 128


class OverLongEncoding(Exception):
    """Sentence encodes to more subwords than the shard format allows."""

    def __init__(self, n_subwords: int):
        super().__init__(f"encoded length {n_subwords} exceeds {MAX_SUBWORDS} subwords")
        self.n_subwords = n_subwords


class SubwordVocab:
    def __init__(self, tokens: list[str]):
        if len(set(tokens)) != len(tokens):
            dupes = sorted({t for t in tokens if tokens.count(t) > 1})
            raise InputError(f"duplicate vocab tokens: {dupes[:5]}")
        self.tokens = list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(tokens)}
        missing = [t for t in SPECIAL_TOKENS if t not in self.token_to_id]
        if missing:
            raise InputError(f"vocab missing special tokens: {missing}")
        self.pad_id = self.token_to_id[PAD]
        self.unk_id = self.token_to_id[UNK]
        self.cls_id = self.token_to_id[CLS]
        self.sep_id = self.token_to_id[SEP]
        self.mask_id = self.token_to_id[MASK]
        self.special_ids = frozenset(
            (self.pad_id, self.unk_id, self.cls_id, self.sep_id, self.mask_id)
        )
        self.nonspecial_ids = [i for i in range(len(tokens)) if i not in self.special_ids]
        self._max_token_len = max(len(t) for t in tokens)
        # digest over the canonical one-token-per-line form, independent of
        # source file line endings
        canonical = "\n".join(self.tokens) + "\n"
        self.sha256 = hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def load(cls, path: str | Path) -> "SubwordVocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        tokens = [ln.strip() for ln in lines if ln.strip()]
        return cls(tokens)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class EncodedSentence:
    ids: tuple[int, ...]           # [CLS] ... [SEP]
    word_spans: tuple[tuple[int, int], ...]  # per word, half-open subword range

    def span_is_unk(self, word_idx: int, unk_id: int) -> bool:
        a, b = self.word_spans[word_idx]
        return b - a == 1 and self.ids[a] == unk_id


def _pieces(vocab: SubwordVocab, word: str) -> list[int]:
    """Greedy longest-match pieces for one lowercased word, or [unk]."""
    w = word.lower()
    out: list[int] = []
    pos = 0
    n = len(w)
    while pos < n:
        end = min(n, pos + vocab._max_token_len)
        piece_id = None
        while end > pos:
            cand = w[pos:end]
            if pos > 0:
                cand = CONTINUATION_PREFIX + cand
            hit = vocab.token_to_id.get(cand)
            if hit is not None:
                piece_id = hit
                break
            end -= 1
        if piece_id is None:
            return [vocab.unk_id]
        out.append(piece_id)
        pos = end
    return out


def encode(vocab: SubwordVocab, words: list[str], max_len: int = MAX_SUBWORDS) -> EncodedSentence:
    if not words:
        raise ValueError("words must be non-empty")
    ids: list[int] = [vocab.cls_id]
    spans: list[tuple[int, int]] = []
    for word in words:
        pieces = _pieces(vocab, word)
        spans.append((len(ids), len(ids) + len(pieces)))
        ids.extend(pieces)
    ids.append(vocab.sep_id)
    if len(ids) > max_len:
        raise OverLongEncoding(len(ids))
    return EncodedSentence(tuple(ids), tuple(spans))


def decode(vocab: SubwordVocab, ids: list[int]) -> str:
    """Inverse of encode for display: drops [PAD]/[CLS]/[SEP], renders
    [UNK] and [MASK] literally, joins "##" continuations without spaces."""
    structural = {vocab.pad_id, vocab.cls_id, vocab.sep_id}
    words: list[str] = []
    for i in ids:
        if not 0 <= i < len(vocab.tokens):
            raise ValueError(f"token id {i} out of range for vocab of {len(vocab.tokens)}")
        if i in structural:
            continue
        tok = vocab.tokens[i]
        if tok.startswith(CONTINUATION_PREFIX) and words:
            words[-1] += tok[len(CONTINUATION_PREFIX):]
        else:
            words.append(tok)
    return " ".join(words)
