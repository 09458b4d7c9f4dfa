import random

import pytest
from hypothesis import given, strategies as st

from logiprep.errors import InputError
from logiprep.lexicon import (
    KeywordEntry,
    KeywordLexicon,
    Polarity,
    builtin_lexicon,
    load_lexicon,
    match_keywords,
)

EXPECTED_POSITIVE = {
    "therefore", "accordingly", "so", "thus", "consequently", "hence",
    "thence", "and so", "for this reason", "in consequence", "on account of",
    "on the grounds", "since", "therefrom", "thereupon", "to that end",
    "whence", "wherefore",
}
EXPECTED_NEGATIVE = {
    "but", "although", "however", "nevertheless", "on the other hand",
    "still", "though", "yet",
}


def brute_force_matches(words, lexicon):
    """All-alignment scan: every entry against every start position."""
    lowered = [w.lower() for w in words]
    found = []
    for entry in lexicon.entries:
        k = len(entry.phrase)
        for start in range(len(lowered) - k + 1):
            if tuple(lowered[start:start + k]) == entry.phrase:
                found.append((start, start + k, entry.phrase, entry.polarity))
    return sorted(found)


def as_tuples(matches):
    return sorted((m.start, m.end, m.entry.phrase, m.entry.polarity) for m in matches)


class TestBuiltinLexicon:
    def test_exact_entry_sets(self):
        lx = builtin_lexicon()
        pos = {" ".join(e.phrase) for e in lx.entries_with_polarity(Polarity.POSITIVE)}
        neg = {" ".join(e.phrase) for e in lx.entries_with_polarity(Polarity.NEGATIVE)}
        assert pos == EXPECTED_POSITIVE
        assert neg == EXPECTED_NEGATIVE
        assert len(lx) == 26

    def test_four_word_entry_present(self):
        lx = builtin_lexicon()
        assert ("on", "the", "other", "hand") in {e.phrase for e in lx.entries}

    def test_conditionals_not_included(self):
        lx = builtin_lexicon()
        phrases = {e.phrase for e in lx.entries}
        assert ("if",) not in phrases
        assert all("if" not in p for p in phrases)


class TestEntryInvariants:
    def test_duplicate_phrases_rejected(self):
        e = KeywordEntry(("so",), Polarity.POSITIVE)
        d = KeywordEntry(("so",), Polarity.NEGATIVE)
        with pytest.raises(ValueError, match="duplicate"):
            KeywordLexicon([e, d])

    @pytest.mark.parametrize("phrase", [(), ("a", "b", "c", "d", "e"), ("has space",), ("",)])
    def test_bad_phrases_rejected(self, phrase):
        with pytest.raises(ValueError):
            KeywordEntry(tuple(phrase), Polarity.POSITIVE)

    def test_uppercase_phrase_rejected(self):
        with pytest.raises(ValueError, match="lowercase"):
            KeywordEntry(("So",), Polarity.POSITIVE)


class TestMatching:
    def test_still_negative_match(self):
        words = ["I", "am", "still", "waiting", "for", "the", "call"]
        ms = match_keywords(words, builtin_lexicon())
        assert len(ms) == 1
        assert ms[0].start == 2 and ms[0].end == 3
        assert ms[0].entry.polarity == Polarity.NEGATIVE

    def test_substring_never_matches(self):
        assert match_keywords(["Also", "waiting"], builtin_lexicon()) == []

    def test_overlapping_matches_all_reported(self):
        words = ["And", "so", "it", "rained", ",", "and", "so", "we", "left"]
        ms = match_keywords(words, builtin_lexicon())
        got = {(m.start, m.end, " ".join(m.entry.phrase)) for m in ms}
        assert got == {(0, 2, "and so"), (1, 2, "so"), (5, 7, "and so"), (6, 7, "so")}

    def test_punctuation_breaks_contiguity(self):
        ms = match_keywords(["and", ",", "so"], builtin_lexicon())
        assert {(m.start, m.end, " ".join(m.entry.phrase)) for m in ms} == {(2, 3, "so")}

    def test_case_insensitive_at_sentence_start(self):
        ms = match_keywords(["HOWEVER", ",", "it", "froze"], builtin_lexicon())
        assert [" ".join(m.entry.phrase) for m in ms] == ["however"]

    def test_pure_function(self):
        words = ["so", "it", "goes", ",", "but", "still"]
        lx = builtin_lexicon()
        assert as_tuples(match_keywords(words, lx)) == as_tuples(match_keywords(words, lx))

    def test_matched_slice_equals_phrase(self):
        words = ["On", "the", "Other", "hand", ",", "it", "held"]
        for m in match_keywords(words, builtin_lexicon()):
            assert tuple(w.lower() for w in words[m.start:m.end]) == m.entry.phrase

    def test_canonical_order_is_governing_order(self):
        words = ["and", "so", "he", "left"]
        ms = match_keywords(words, builtin_lexicon())
        # earliest start first; longer phrase before shorter at equal start
        assert [" ".join(m.entry.phrase) for m in ms] == ["and so", "so"]

    def test_brute_force_equivalence_seeded(self):
        lx = builtin_lexicon()
        pool = ["so", "and", "on", "the", "other", "hand", "account", "of",
                "it", "rained", "still", "yet", "Also", ",", "grounds", "to",
                "that", "end", "this", "reason"]
        rng = random.Random(42)
        for _ in range(500):
            words = [rng.choice(pool) for _ in range(rng.randint(0, 12))]
            assert as_tuples(match_keywords(words, lx)) == brute_force_matches(words, lx)

    @given(st.lists(st.sampled_from(
        ["so", "and", "on", "the", "grounds", "but", "still", ",", "x"]), max_size=10))
    def test_brute_force_equivalence_property(self, words):
        lx = builtin_lexicon()
        assert as_tuples(match_keywords(words, lx)) == brute_force_matches(words, lx)


class TestLexiconFile:
    def test_load_roundtrip(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text(
            "# custom lexicon\n"
            "POS\tgiven that\n"
            "NEG\tdespite\n"
            "\n"
            "POS\tergo\n",
            encoding="utf-8",
        )
        lx = load_lexicon(path)
        assert {" ".join(e.phrase) for e in lx.entries} == {"given that", "despite", "ergo"}
        assert lx.entries_with_polarity(Polarity.NEGATIVE)[0].phrase == ("despite",)

    def test_load_lowercases(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("POS\tGiven That\n", encoding="utf-8")
        assert load_lexicon(path).entries[0].phrase == ("given", "that")

    def test_bad_polarity(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("MAYBE\tso\n", encoding="utf-8")
        with pytest.raises(InputError, match="polarity"):
            load_lexicon(path)

    def test_missing_tab(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("POS so\n", encoding="utf-8")
        with pytest.raises(InputError, match="TAB"):
            load_lexicon(path)

    def test_duplicate_entries(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("POS\tso\nNEG\tso\n", encoding="utf-8")
        with pytest.raises(InputError, match="duplicate"):
            load_lexicon(path)
