"""Implication keyword lexicon and multi-pattern matching over word sequences.

A lexicon is a set of polarity-tagged phrases (1-4 lowercase words).
Matching is case-insensitive, at word boundaries only: a phrase matches a
contiguous run of sentence words whose lowercased forms equal the phrase.
Punctuation tokens occupy word positions, so they break phrase contiguity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class KeywordEntry:
    phrase: tuple[str, ...]
    polarity: Polarity

    def __post_init__(self):
        if not 1 <= len(self.phrase) <= 4:
            raise ValueError(f"phrase must have 1-4 words, got {self.phrase!r}")
        for w in self.phrase:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"bad phrase word {w!r} in {self.phrase!r}")
            if w != w.lower():
                raise ValueError(f"phrase words must be lowercase: {w!r}")


@dataclass(frozen=True)
class KeywordMatch:
    entry: KeywordEntry
    start: int
    end: int  # half-open [start, end) over word indices


_POSITIVE = [
    "therefore", "accordingly", "so", "thus", "consequently", "hence",
    "thence", "and so", "for this reason", "in consequence", "on account of",
    "on the grounds", "since", "therefrom", "thereupon", "to that end",
    "whence", "wherefore",
]
_NEGATIVE = [
    "but", "although", "however", "nevertheless", "on the other hand",
    "still", "though", "yet",
]


class KeywordLexicon:
    """Immutable phrase set with a first-word index for matching."""

    def __init__(self, entries: list[KeywordEntry]):
        seen: set[tuple[str, ...]] = set()
        for e in entries:
            if e.phrase in seen:
                raise ValueError(f"duplicate phrase {' '.join(e.phrase)!r}")
            seen.add(e.phrase)
        self._entries = tuple(entries)
        index: dict[str, list[KeywordEntry]] = {}
        for e in entries:
            index.setdefault(e.phrase[0], []).append(e)
        self._by_first_word = index

    @property
    def entries(self) -> tuple[KeywordEntry, ...]:
        return self._entries

    def entries_with_polarity(self, polarity: Polarity) -> list[KeywordEntry]:
        return [e for e in self._entries if e.polarity == polarity]

    def __len__(self) -> int:
        return len(self._entries)

    def candidates_for(self, first_word: str) -> list[KeywordEntry]:
        return self._by_first_word.get(first_word, [])


def builtin_lexicon() -> KeywordLexicon:
    """The built-in positive/negative implication phrase lists (18 + 8)."""
    entries = [
        KeywordEntry(tuple(p.split()), Polarity.POSITIVE) for p in _POSITIVE
    ] + [
        KeywordEntry(tuple(p.split()), Polarity.NEGATIVE) for p in _NEGATIVE
    ]
    return KeywordLexicon(entries)


def load_lexicon(path: str | Path) -> KeywordLexicon:
    """Load a lexicon file: `POS|NEG<TAB>space-separated phrase` per line.

    Lines starting with `#` and blank lines are skipped. Phrases are
    lowercased on load.
    """
    entries: list[KeywordEntry] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" not in line:
            raise InputError(f"{path}:{lineno}: expected POLARITY<TAB>PHRASE")
        pol_field, phrase_field = line.split("\t", 1)
        pol_field = pol_field.strip().upper()
        if pol_field == "POS":
            polarity = Polarity.POSITIVE
        elif pol_field == "NEG":
            polarity = Polarity.NEGATIVE
        else:
            raise InputError(f"{path}:{lineno}: unknown polarity {pol_field!r}")
        words = tuple(w.lower() for w in phrase_field.split())
        try:
            entry = KeywordEntry(words, polarity)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        entries.append(entry)
    try:
        return KeywordLexicon(entries)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def match_keywords(words: list[str], lexicon: KeywordLexicon) -> list[KeywordMatch]:
    """All case-insensitive boundary matches of lexicon phrases in `words`.

    Overlapping matches of distinct entries are all reported; a longer
    match never suppresses a shorter distinct one. Result order is
    (start asc, phrase length desc, Positive before Negative), which makes
    the first element the curator's governing match.
    """
    lowered = [w.lower() for w in words]
    matches: list[KeywordMatch] = []
    for start, w in enumerate(lowered):
        for entry in lexicon.candidates_for(w):
            end = start + len(entry.phrase)
            if end <= len(lowered) and tuple(lowered[start:end]) == entry.phrase:
                matches.append(KeywordMatch(entry, start, end))
    matches.sort(
        key=lambda m: (m.start, -(m.end - m.start), m.entry.polarity.value != "positive")
    )
    return matches
