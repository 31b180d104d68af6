import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from smishfuse.errors import ConfigError, DataError
from smishfuse.tagging import (
    EntityGazetteer,
    GazetteerEntry,
    PhraseLexicon,
    reconstruct,
    regex_fingerprint,
    tag_phrases,
    tag_semantic,
    tag_structural,
)

FIXTURES = Path(__file__).parent / "fixtures"


# --- structural tagging -----------------------------------------------------

def test_url_replacement():
    tm = tag_structural("visit http://bit.ly/claim now")
    assert tm.tagged == "visit [URL] now"
    assert [s.tag for s in tm.spans] == ["[URL]"]
    assert tm.spans[0].surface == "http://bit.ly/claim"


def test_bare_domain_url():
    tm = tag_structural("go to example.com/verify today")
    assert tm.tagged == "go to [URL] today"


def test_www_domain_and_email_coexist():
    tm = tag_structural("Claim at www.win-prize.co, call 07700900123 or mail a@b.co")
    assert tm.tagged == "Claim at [URL] call [PHONE] or mail [EMAIL]"
    assert [s.tag for s in tm.spans] == ["[URL]", "[PHONE]", "[EMAIL]"]
    # the short dotted name stays an email; the leading guard keeps the
    # bare-domain branch from eating "b.co"
    assert tm.spans[2].surface == "a@b.co"


def test_multilabel_bare_domain_unmatched_without_scheme():
    # only single-label bare domains match; schemeless subdomains pass through
    tm = tag_structural("login at secure-hsbc.example.com/login now")
    assert tm.tagged == "login at secure-hsbc.example.com/login now"


def test_email_replacement():
    tm = tag_structural("reply to support@example.co.uk please")
    assert tm.tagged == "reply to [EMAIL] please"


def test_phone_replacement():
    tm = tag_structural("call 07712 345678 before noon")
    assert tm.tagged == "call [PHONE] before noon"


def test_phone_with_punctuation_and_plus():
    tm = tag_structural("dial +44 (0) 7712-345-678 now")
    assert "[PHONE]" in tm.tagged
    assert "7712" not in tm.tagged


def test_short_digit_run_is_not_a_phone():
    tm = tag_structural("your code is 482913 today")  # 6 digits < minimum 7
    assert tm.tagged == "your code is 482913 today"


def test_overlong_digit_run_is_not_a_phone():
    tm = tag_structural("ref 12345678901234567890 here")  # 20 digits > maximum 15
    assert "[PHONE]" not in tm.tagged


def test_digits_inside_url_claimed_by_url_only():
    tm = tag_structural("see http://x.example.com/08001234567 now")
    assert tm.tagged == "see [URL] now"
    assert [s.tag for s in tm.spans] == ["[URL]"]


def test_email_not_double_tagged_as_url():
    tm = tag_structural("mail win@prizes.example.org now")
    assert tm.tagged.count("[EMAIL]") + tm.tagged.count("[URL]") == 1


def test_multiple_structural_tags_in_order():
    tm = tag_structural("call 08001234567 or visit http://a.example.com ok")
    assert tm.tagged == "call [PHONE] or visit [URL] ok"
    assert [s.tag for s in tm.spans] == ["[PHONE]", "[URL]"]


# --- semantic tagging --------------------------------------------------------

def test_country_replacement_and_suffix(gazetteer):
    tm = tag_semantic("your Britain account is locked", gazetteer)
    assert tm.tagged == "your [GPE] account is locked country=UK"
    assert tm.appended_countries == ("UK",)


def test_country_suffix_appended_once_per_country(gazetteer):
    tm = tag_semantic("Britain and England and Britain", gazetteer)
    assert tm.tagged.endswith("country=UK")
    assert tm.tagged.count("country=UK") == 1
    assert tm.tagged.count("[GPE]") == 3


def test_country_suffixes_in_first_occurrence_order(gazetteer):
    tm = tag_semantic("from America to Britain", gazetteer)
    assert tm.appended_countries == ("US", "UK")
    assert tm.tagged.endswith("country=US country=UK")


def test_longest_match_wins(gazetteer):
    tm = tag_semantic("in Great Britain today", gazetteer)
    assert tm.tagged == "in [GPE] today country=UK"
    assert tm.spans[0].surface == "Great Britain"


def test_two_letter_codes_case_sensitive(gazetteer):
    assert "country=US" in tag_semantic("made in US", gazetteer).tagged
    assert "country=" not in tag_semantic("trust us please", gazetteer).tagged


def test_longer_names_case_insensitive(gazetteer):
    tm = tag_semantic("BRITAIN expects", gazetteer)
    assert tm.tagged == "[GPE] expects country=UK"


def test_gazetteer_boundary_blocks_near_misses(gazetteer):
    for text in ("britains got talent", "the kingdoms fell", "englands23 code"):
        tm = tag_semantic(text, gazetteer)
        assert tm.tagged == text, text


def test_money_tagging(gazetteer):
    tm = tag_semantic("you won £500 today", gazetteer)
    assert tm.tagged == "you won [MONEY] today"


def test_org_tagging():
    gaz = EntityGazetteer(
        [
            GazetteerEntry("ORG", "Royal Mail", "Royal Mail", 0),
            GazetteerEntry("GPE", "Britain", "UK", 1),
        ]
    )
    tm = tag_semantic("Royal Mail parcel for Britain", gaz)
    assert tm.tagged == "[ORG] parcel for [GPE] country=UK"


# --- phrase tagging ----------------------------------------------------------

def test_smishing_phrase_annotation(lexicon):
    phrase = lexicon.smishing_phrases[0]
    tm = tag_phrases(f"alert {phrase} now", lexicon)
    assert tm.tagged == f"alert [smishing_like] {phrase} now"


def test_legitimate_phrase_annotation(lexicon):
    phrase = lexicon.legitimate_phrases[0]
    tm = tag_phrases(f"ok {phrase} bye", lexicon)
    assert tm.tagged == f"ok [legitimate_like] {phrase} bye"


def test_phrase_matching_case_insensitive(lexicon):
    phrase = lexicon.smishing_phrases[0].upper()
    tm = tag_phrases(f"x {phrase} y", lexicon)
    assert "[smishing_like]" in tm.tagged


def test_phrase_annotation_keeps_surface(lexicon):
    phrase = lexicon.smishing_phrases[0]
    tm = tag_phrases(phrase, lexicon)
    assert phrase in tm.tagged


# --- idempotence and reconstruction -------------------------------------------

CUE_TEXTS = [
    "plain message with no cues at all",
    "visit http://bit.ly/x and call 08001234567",
    "reply to a@b.example.com for £1,000",
    "your Britain parcel from America",
    "we are in Great Britain and the US",
    "",
    "   spaced   out   ",
]


@pytest.mark.parametrize("text", CUE_TEXTS)
def test_structural_idempotent(text):
    once = tag_structural(text).tagged
    assert tag_structural(once).tagged == once


@pytest.mark.parametrize("text", CUE_TEXTS)
def test_semantic_idempotent(text, gazetteer):
    once = tag_semantic(text, gazetteer).tagged
    assert tag_semantic(once, gazetteer).tagged == once


def test_phrase_idempotent(lexicon):
    for phrase in lexicon.smishing_phrases[:3] + lexicon.legitimate_phrases[:3]:
        once = tag_phrases(f"start {phrase} end", lexicon).tagged
        assert tag_phrases(once, lexicon).tagged == once


def test_composed_tagging_idempotent(gazetteer, lexicon):
    text = "Britain alert: visit http://bit.ly/x, call 08001234567, win £900"
    once = tag_phrases(
        tag_semantic(tag_structural(text).tagged, gazetteer).tagged, lexicon
    ).tagged
    again = tag_phrases(
        tag_semantic(tag_structural(once).tagged, gazetteer).tagged, lexicon
    ).tagged
    assert again == once


def test_placeholder_in_raw_text_is_immune(gazetteer):
    # a message that already contains placeholder syntax must not be rewritten
    text = "[URL] and [PHONE] stay put near Britain"
    tm = tag_structural(text)
    assert tm.tagged == text
    sem = tag_semantic("[GPE] fans in Britain country=UK", gazetteer)
    assert sem.tagged.count("country=UK") == 2  # immune suffix + new append
    assert sem.tagged.startswith("[GPE] fans in [GPE]")


@pytest.mark.parametrize("text", CUE_TEXTS)
def test_reconstruct_structural(text):
    tm = tag_structural(text)
    assert reconstruct(tm) == text


@pytest.mark.parametrize("text", CUE_TEXTS)
def test_reconstruct_semantic(text, gazetteer):
    tm = tag_semantic(text, gazetteer)
    assert reconstruct(tm) == text


def test_reconstruct_phrases(lexicon):
    phrase = lexicon.smishing_phrases[0]
    text = f"pre {phrase} post"
    tm = tag_phrases(text, lexicon)
    assert reconstruct(tm) == text


_WORDS = st.lists(
    st.sampled_from(
        [
            "hello", "meet", "at", "noon", "Britain", "America", "uk", "us",
            "US", "£20", "$1,500", "http://t.example.com/x", "a@b.example.net",
            "08001234567", "4821", "claim", "prize", "(555)",
        ]
    ),
    min_size=0,
    max_size=12,
)


@given(_WORDS)
def test_reconstruct_random_mixtures_structural(words):
    text = " ".join(words)
    assert reconstruct(tag_structural(text)) == text


@given(_WORDS)
def test_reconstruct_random_mixtures_semantic(words):
    text = " ".join(words)
    gaz = EntityGazetteer.default()
    assert reconstruct(tag_semantic(text, gaz)) == text


@given(_WORDS)
def test_structural_idempotent_random(words):
    text = " ".join(words)
    once = tag_structural(text).tagged
    assert tag_structural(once).tagged == once


@given(_WORDS)
def test_spans_ordered_and_disjoint(words):
    text = " ".join(words)
    for tm in (tag_structural(text), tag_semantic(text, EntityGazetteer.default())):
        for a, b in zip(tm.spans, tm.spans[1:]):
            assert a.end <= b.start
        for s in tm.spans:
            assert tm.original[s.start : s.end] == s.surface


# --- resources and validation --------------------------------------------------

def test_gazetteer_rejects_bad_kind():
    with pytest.raises(ConfigError):
        EntityGazetteer([GazetteerEntry("CITY", "London", "UK", 0)])


def test_gazetteer_rejects_short_surface():
    with pytest.raises(ConfigError):
        EntityGazetteer([GazetteerEntry("GPE", "X", "X", 0)])


def test_gazetteer_file_errors(tmp_path):
    with pytest.raises(DataError):
        EntityGazetteer.from_file(tmp_path / "missing.tsv")
    bad = tmp_path / "bad.tsv"
    bad.write_text("GPE\tonly-two-fields\n", encoding="utf-8")
    with pytest.raises(DataError):
        EntityGazetteer.from_file(bad)
    empty = tmp_path / "empty.tsv"
    empty.write_text("# just a comment\n\n", encoding="utf-8")
    with pytest.raises(DataError):
        EntityGazetteer.from_file(empty)


def test_gazetteer_file_round_trip(tmp_path, gazetteer):
    path = tmp_path / "gaz.tsv"
    path.write_text(
        "\n".join(f"{e.kind}\t{e.surface}\t{e.canonical}" for e in gazetteer.entries),
        encoding="utf-8",
    )
    again = EntityGazetteer.from_file(path)
    assert again.fingerprint() == gazetteer.fingerprint()


def test_lexicon_rejects_overlap():
    with pytest.raises(ConfigError):
        PhraseLexicon(legitimate_phrases=("see you soon",), smishing_phrases=("See You Soon",))


def test_lexicon_rejects_blank_phrase():
    with pytest.raises(ConfigError):
        PhraseLexicon(legitimate_phrases=("  ",), smishing_phrases=("x y",))


def test_fingerprints_are_stable_and_distinct(gazetteer, lexicon):
    assert gazetteer.fingerprint() == gazetteer.fingerprint()
    assert lexicon.fingerprint() == lexicon.fingerprint()
    assert gazetteer.fingerprint() != lexicon.fingerprint()


def test_regex_fingerprint_tracks_version(monkeypatch):
    before = regex_fingerprint()
    assert before == regex_fingerprint()
    monkeypatch.setattr("smishfuse.tagging.REGEX_VERSION", "999")
    assert regex_fingerprint() != before


# --- golden corpus ------------------------------------------------------------

def test_golden_corpus_byte_exact(gazetteer, lexicon):
    """Frozen outputs for 20 reviewed messages across every cue type."""
    golden = json.loads((FIXTURES / "tagging_golden.json").read_text(encoding="utf-8"))
    assert len(golden) == 20
    for case in golden:
        text = case["text"]
        sem = tag_semantic(text, gazetteer)
        assert tag_structural(text).tagged == case["structural"], text
        assert sem.tagged == case["semantic"], text
        assert list(sem.appended_countries) == case["countries"], text
        assert tag_phrases(text, lexicon).tagged == case["phrases"], text
