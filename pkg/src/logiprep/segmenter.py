"""Corpus ingestion: documents -> sentences -> words with character offsets.

Sentence boundary rule set (the test oracle implements the same rules
independently; keep the two in sync):

  1. A candidate terminator is a maximal run of the characters . ! ?
  2. It ends a sentence only if followed by >= 1 whitespace character and
     then an ASCII capital letter or digit.
  3. A single "." is not a boundary when the non-whitespace token ending
     at it (e.g. "Dr.", "U.S.") is in the abbreviation stop-list.
  4. A single "." with a digit immediately before it and a digit as the
     first non-whitespace character after it is not a boundary (decimal
     guard; "3.5" is additionally protected by rule 2).
  5. The sentence includes the terminator run; leading/trailing whitespace
     is trimmed and empty sentences are dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import InputError

TERMINATORS = ".!?"

ABBREVIATIONS = frozenset({
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "Mt.",
    "Capt.", "Col.", "Gen.", "Lt.", "Sgt.", "Rev.", "Hon.",
    "etc.", "e.g.", "i.e.", "cf.", "vs.", "al.", "ca.", "approx.",
    "Inc.", "Ltd.", "Co.", "Corp.", "U.S.", "U.K.", "U.N.", "No.", "Fig.",
    "Jan.", "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sep.",
    "Sept.", "Oct.", "Nov.", "Dec.",
})

# Word-count bounds applied before curation; out-of-range sentences are
# dropped and counted, not errored.
MIN_WORDS = 5
MAX_WORDS = 128


@dataclass(frozen=True)
class RawDocument:
    doc_id: int
    title: str | None
    body: str


@dataclass(frozen=True)
class Word:
    form: str
    start: int
    end: int


@dataclass(frozen=True)
class SegmentedSentence:
    doc_id: int
    sent_idx: int
    text: str
    words: tuple[Word, ...]

    @property
    def word_forms(self) -> list[str]:
        return [w.form for w in self.words]


def sentence_boundaries(body: str) -> list[int]:
    """Indices just past each sentence-final terminator run (rules above)."""
    bounds: list[int] = []
    i = 0
    n = len(body)
    while i < n:
        if body[i] not in TERMINATORS:
            i += 1
            continue
        run_start = i
        while i < n and body[i] in TERMINATORS:
            i += 1
        run = body[run_start:i]
        # rule 2: whitespace then capital/digit
        j = i
        while j < n and body[j].isspace():
            j += 1
        if j == i or j == n:
            continue
        nxt = body[j]
        if not (nxt.isascii() and (nxt.isupper() or nxt.isdigit())):
            continue
        if run == ".":
            # rule 3: abbreviation stop-list
            k = run_start
            while k > 0 and not body[k - 1].isspace():
                k -= 1
            if body[k:i] in ABBREVIATIONS:
                continue
            # rule 4: decimal guard
            if run_start > 0 and body[run_start - 1].isdigit() and body[j].isdigit():
                continue
        bounds.append(i)
    return bounds


def split_sentences(doc: RawDocument) -> list[SegmentedSentence]:
    """Split a document body into word-segmented sentences."""
    pieces: list[str] = []
    prev = 0
    for b in sentence_boundaries(doc.body):
        pieces.append(doc.body[prev:b])
        prev = b
    pieces.append(doc.body[prev:])

    sentences: list[SegmentedSentence] = []
    for piece in pieces:
        text = piece.strip()
        if not text:
            continue
        words = tokenize_words(text)
        if not words:
            continue
        sentences.append(
            SegmentedSentence(doc.doc_id, len(sentences), text, tuple(words))
        )
    return sentences


def tokenize_words(text: str) -> list[Word]:
    """Whitespace tokenization with edge punctuation split off.

    Leading/trailing non-alphanumeric characters of each chunk become
    single-character word forms; internal punctuation (hyphens,
    apostrophes, decimal points) stays attached.
    """
    words: list[Word] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        start = i
        while i < n and not text[i].isspace():
            i += 1
        chunk_start, chunk_end = start, i
        left = chunk_start
        right = chunk_end
        while left < right and not text[left].isalnum():
            words.append(Word(text[left], left, left + 1))
            left += 1
        trailing: list[Word] = []
        while right > left and not text[right - 1].isalnum():
            trailing.append(Word(text[right - 1], right - 1, right))
            right -= 1
        if left < right:
            words.append(Word(text[left:right], left, right))
        words.extend(reversed(trailing))
    return words


def read_plain_text(path: str | Path) -> Iterator[RawDocument]:
    """Plain-text corpus: a directory of *.txt (one document per file,
    sorted by name) or a single file with blank-line-separated documents.
    Document ids are assigned sequentially in read order."""
    path = Path(path)
    if path.is_dir():
        for doc_id, f in enumerate(sorted(path.glob("*.txt"))):
            yield RawDocument(doc_id, f.stem, _decode(f.read_bytes(), f"doc {doc_id} ({f.name})"))
        return
    raw = path.read_bytes()
    chunks = [c for c in raw.split(b"\n\n") if c.strip()]
    for doc_id, chunk in enumerate(chunks):
        yield RawDocument(doc_id, None, _decode(chunk, f"doc {doc_id}"))


def read_jsonl(path: str | Path) -> Iterator[RawDocument]:
    """JSON-lines corpus with fields `id`, `title`, `text`."""
    seen: set[int] = set()
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            line = _decode(raw, f"line {lineno}")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                doc_id = int(obj["id"])
                body = obj["text"]
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: need integer `id` and `text`") from exc
            if not 0 <= doc_id < 2**64:
                raise InputError(f"{path}:{lineno}: doc id {doc_id} out of 64-bit range")
            if doc_id in seen:
                raise InputError(f"{path}:{lineno}: duplicate doc id {doc_id}")
            seen.add(doc_id)
            yield RawDocument(doc_id, obj.get("title"), body)


def _decode(raw: bytes, what: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{what}: invalid UTF-8 at byte {exc.start}") from exc
