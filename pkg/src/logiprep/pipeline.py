"""Document-level pipeline: segment -> tag -> curate -> encode -> mask.

Documents are independent work units; results are reduced order-stably
(records sorted by (doc_id, sent_idx), reports merged as a monoid), so a
run is byte-identical for any worker count.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import masker, pos_tagger, stats
from .curator import CategoryFilter, Label, curate, passes_category
from .lexicon import KeywordLexicon, builtin_lexicon, load_lexicon
from .masker import MaskPolicy
from .segmenter import MAX_WORDS, MIN_WORDS, RawDocument, split_sentences
from .shards import TrainingRecord
from .tokenizer import OverLongEncoding, SubwordVocab, encode


@dataclass(frozen=True)
class PipelineSettings:
    lexicon_path: str | None  # None -> builtin lexicon
    tagger_path: str
    vocab_path: str
    policy: MaskPolicy
    category: CategoryFilter
    config_sha256: str


class PipelineComponents:
    """Heavy runtime objects, built once per process."""

    def __init__(self, settings: PipelineSettings):
        self.settings = settings
        self.lexicon: KeywordLexicon = (
            builtin_lexicon() if settings.lexicon_path is None
            else load_lexicon(settings.lexicon_path)
        )
        self.tagger = pos_tagger.load(settings.tagger_path)
        self.vocab = SubwordVocab.load(settings.vocab_path)
        self.policy = settings.policy
        self.category = settings.category


def process_document(
    doc: RawDocument, comps: PipelineComponents
) -> tuple[list[TrainingRecord], stats.RunReport]:
    report = stats.zero_report(comps.settings.config_sha256)
    records: list[TrainingRecord] = []
    for sentence in split_sentences(doc):
        report.sentences_seen += 1
        words = sentence.word_forms
        if not MIN_WORDS <= len(words) <= MAX_WORDS:
            report.drop("length")
            continue
        tags = comps.tagger.tag(words)
        curated = curate(sentence, tags, comps.lexicon)
        if curated is None:
            report.drop("no_keyword")
            continue
        if not passes_category(curated, comps.category):
            report.drop("category_filter")
            continue
        try:
            encoded = encode(comps.vocab, words)
        except OverLongEncoding:
            report.drop("over_length")
            continue
        mplan = masker.plan(curated, encoded, comps.policy, comps.vocab)
        if mplan is None:
            report.drop("no_candidate")
            continue
        record = masker.apply_plan(curated, encoded, mplan, comps.vocab)

        report.sentences_kept += 1
        if curated.label == Label.ENTAILMENT:
            report.kept_entailment += 1
        else:
            report.kept_contradiction += 1
        for m in curated.matches:
            phrase = " ".join(m.entry.phrase)
            report.keyword_counts[phrase] = report.keyword_counts.get(phrase, 0) + 1
        for w in masker.candidate_words(curated, encoded, comps.policy, comps.vocab):
            name = curated.tags[w].value
            report.candidate_tag_counts[name] = report.candidate_tag_counts.get(name, 0) + 1
        if record.keyword_masked:
            report.keyword_masked_records += 1
        records.append(record)
    return records, report


_WORKER_COMPS: PipelineComponents | None = None


def _init_worker(settings: PipelineSettings) -> None:
    global _WORKER_COMPS
    _WORKER_COMPS = PipelineComponents(settings)


def _work(doc: RawDocument):
    assert _WORKER_COMPS is not None
    return process_document(doc, _WORKER_COMPS)


def run_pipeline(
    docs: Iterable[RawDocument], settings: PipelineSettings, workers: int = 1
) -> tuple[list[TrainingRecord], stats.RunReport]:
    records: list[TrainingRecord] = []
    report = stats.zero_report(settings.config_sha256)
    if workers <= 1:
        comps = PipelineComponents(settings)
        for doc in docs:
            doc_records, doc_report = process_document(doc, comps)
            records.extend(doc_records)
            report = stats.merge(report, doc_report)
    else:
        with multiprocessing.Pool(
            workers, initializer=_init_worker, initargs=(settings,)
        ) as pool:
            for doc_records, doc_report in pool.imap_unordered(_work, docs, chunksize=4):
                records.extend(doc_records)
                report = stats.merge(report, doc_report)
    records.sort(key=lambda r: (r.doc_id, r.sent_idx))
    report.check()
    return records, report


def iter_sentences(docs: Iterable[RawDocument]) -> Iterator:
    for doc in docs:
        yield from split_sentences(doc)
