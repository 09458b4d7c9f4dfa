"""Implication filter and label bootstrapping.

A sentence survives iff it has at least one keyword match. Its 2-way label
comes from the governing match: the earliest by start index, ties broken
by longest phrase, then Positive over Negative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .lexicon import KeywordLexicon, KeywordMatch, Polarity, match_keywords
from .pos_tagger import PosTag
from .segmenter import SegmentedSentence


class Label(enum.Enum):
    ENTAILMENT = 1
    CONTRADICTION = 0

    @property
    def cls_id(self) -> int:
        return self.value


class LabelSource(enum.Enum):
    SINGLE_POLARITY = "single_polarity"
    EARLIEST_OF_BOTH = "earliest_of_both"


class CategoryFilter(enum.Enum):
    BOTH = "both"
    POSITIVE_ONLY = "positive"
    NEGATIVE_ONLY = "negative"


@dataclass(frozen=True)
class CuratedSentence:
    segmented: SegmentedSentence
    tags: tuple[PosTag, ...]
    matches: tuple[KeywordMatch, ...]
    label: Label
    label_source: LabelSource

    @property
    def governing_match(self) -> KeywordMatch:
        return self.matches[0]


def curate(
    sentence: SegmentedSentence,
    tags: list[PosTag] | tuple[PosTag, ...],
    lexicon: KeywordLexicon,
) -> CuratedSentence | None:
    words = sentence.word_forms
    if len(tags) != len(words):
        raise ValueError(f"{len(tags)} tags for {len(words)} words")
    matches = match_keywords(words, lexicon)
    if not matches:
        return None
    # match_keywords returns (start asc, longest first, Positive first), so
    # the governing match is simply the head of the list
    governing = matches[0]
    label = Label.ENTAILMENT if governing.entry.polarity == Polarity.POSITIVE else Label.CONTRADICTION
    polarities = {m.entry.polarity for m in matches}
    source = LabelSource.EARLIEST_OF_BOTH if len(polarities) == 2 else LabelSource.SINGLE_POLARITY
    return CuratedSentence(sentence, tuple(tags), tuple(matches), label, source)


def passes_category(curated: CuratedSentence, category: CategoryFilter) -> bool:
    if category == CategoryFilter.BOTH:
        return True
    if category == CategoryFilter.POSITIVE_ONLY:
        return curated.label == Label.ENTAILMENT
    return curated.label == Label.CONTRADICTION


def curate_stream(
    sentences: Iterable[SegmentedSentence],
    tags_provider: Callable[[list[str]], list[PosTag]],
    lexicon: KeywordLexicon,
    category_filter: CategoryFilter = CategoryFilter.BOTH,
    counters: dict | None = None,
) -> Iterator[CuratedSentence]:
    """Filter + label a sentence stream; bucket counts land in `counters`."""
    if counters is None:
        counters = {}
    for key in ("seen", "no_keyword", "category_filtered", "kept_entailment", "kept_contradiction"):
        counters.setdefault(key, 0)
    for sentence in sentences:
        counters["seen"] += 1
        curated = curate(sentence, tags_provider(sentence.word_forms), lexicon)
        if curated is None:
            counters["no_keyword"] += 1
            continue
        if not passes_category(curated, category_filter):
            counters["category_filtered"] += 1
            continue
        if curated.label == Label.ENTAILMENT:
            counters["kept_entailment"] += 1
        else:
            counters["kept_contradiction"] += 1
        yield curated
