"""Synthetic four-signal corpus.

Each positive message carries exactly one stream-specific cue and the
negatives carry decoys tuned so no other stream gets that cue for free:

* quarter 1 (semantic): a country surface that resolves to ``country=UK``;
  negatives mention US surfaces and near-miss words ("kingdoms", "britains",
  bare "united"/"kingdom") that the gazetteer does not match.
* quarter 2 (structural): a random 10-12 digit phone number in a rotating
  format; negatives carry benign 4-6 digit runs that stay below the phone
  tagger's digit floor.
* quarter 3 (character): the trigram ``£$€`` spliced inside a word, invisible
  to the token-level streams (the tokenizer splits around it and the random
  fragments fall under min_df).
* quarter 4 (contextual): an intact scripted phrase that the phrase annotator
  marks; negatives scatter the same words in shuffled order and carry intact
  benign phrases.

The generator re-tags every message and rejects any draw that violates the
quarter contract (for example a negative that accidentally forms a taggable
phrase), so the emitted corpus is clean by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig, config_from_dict
from .corpus import HAM, SMISHING, LabeledMessage, message_id
from .errors import DataError
from .tagging import (
    EntityGazetteer,
    PhraseLexicon,
    tag_phrases,
    tag_semantic,
    tag_structural,
)

SOURCE_ID = "synthetic-v1"

_FILLER = (
    "see", "you", "later", "tonight", "after", "work", "the", "game", "was",
    "great", "call", "me", "when", "free", "did", "get", "my", "message",
    "about", "dinner", "plans", "for", "tomorrow", "still", "on", "right",
    "bring", "jacket", "it", "cold", "out", "meeting", "moved", "friday",
    "afternoon", "lunch", "at", "noon", "sounds", "good", "thanks", "again",
    "help", "yesterday", "really", "appreciate", "how", "trip", "going",
    "miss", "all", "back", "home", "hope", "feeling", "better", "today",
    "luck", "with", "exam", "went", "movie", "night", "fun", "mom", "says",
    "hi", "dog", "park", "sunny", "weather", "nice", "walk", "coffee",
    "morning", "train", "late", "keys", "kitchen", "table", "weekend",
)

# spread the country cue across many surfaces that all canonicalize to UK so
# no single raw string is frequent enough for the other streams to memorize
_UK_SURFACES = (
    "United Kingdom", "U.K.", "Britain", "England", "Scotland", "Wales",
    "London", "Manchester", "Birmingham", "Leeds", "Glasgow", "Edinburgh",
    "Liverpool", "Bristol", "Sheffield", "Cardiff", "Belfast", "Nottingham",
    "Newcastle", "Brighton",
)
_NEG_COUNTRIES = (
    "America", "U.S.", "US", "United States", "New York", "Chicago", "Boston",
    "Toronto", "Sydney", "Mumbai", "Dublin", "Paris", "Berlin", "Madrid",
    "Rome", "Lagos",
)
# near-miss strings the gazetteer boundary rules do not match
_NEG_NEAR_MISSES = (
    "united", "kingdom", "kingdoms", "britains", "englands", "o.k.", "uk",
    "londons", "manchesters", "bristols", "cardiffs",
)


def _pick(rng: np.random.Generator, pool) -> str:
    return pool[int(rng.integers(len(pool)))]


def _filler_words(rng: np.random.Generator, lo: int = 5, hi: int = 9) -> list[str]:
    n = int(rng.integers(lo, hi + 1))
    return [_pick(rng, _FILLER) for _ in range(n)]


def _insert(rng: np.random.Generator, words: list[str], item: str) -> None:
    words.insert(int(rng.integers(len(words) + 1)), item)


def _random_phone(rng: np.random.Generator) -> str:
    d = "".join(str(int(x)) for x in rng.integers(0, 10, size=12))
    form = int(rng.integers(4))
    if form == 0:
        return "0" + d[:10]
    if form == 1:
        return f"{d[:3]} {d[3:7]} {d[7:11]}"
    if form == 2:
        return f"+{d[:2]} {d[2:6]} {d[6:12]}"
    return f"({d[:3]}) {d[3:6]}-{d[6:10]}"


def _splice_trigram(rng: np.random.Generator, words: list[str]) -> None:
    hosts = [i for i, w in enumerate(words) if len(w) >= 5 and w.isalpha()]
    if not hosts:
        words.append("tomorrow")
        hosts = [len(words) - 1]
    i = hosts[int(rng.integers(len(hosts)))]
    w = words[i]
    cut = int(rng.integers(2, len(w) - 1))
    words[i] = w[:cut] + "£$€" + w[cut:]


def _scatter_phrase_words(rng: np.random.Generator, words: list[str], phrase: str) -> None:
    parts = phrase.split()
    order = list(rng.permutation(len(parts)))
    if len(parts) > 1 and order == sorted(order):
        order = order[1:] + order[:1]
    for j in order:
        _insert(rng, words, parts[j])


def _positive_text(rng: np.random.Generator, quarter: int, lexicon: PhraseLexicon) -> str:
    if quarter == 3:
        # keep phrase-cued messages short so the phrase dominates the pooled
        # token mean the fusion input is built from
        words = _filler_words(rng, 4, 7)
        _insert(rng, words, _pick(rng, lexicon.smishing_phrases))
        return " ".join(words)
    words = _filler_words(rng)
    if quarter == 0:
        _insert(rng, words, _pick(rng, _UK_SURFACES))
    elif quarter == 1:
        _insert(rng, words, _random_phone(rng))
    else:
        _splice_trigram(rng, words)
    return " ".join(words)


def _negative_text(rng: np.random.Generator, lexicon: PhraseLexicon) -> str:
    words = _filler_words(rng)
    if rng.random() < 0.3:
        _insert(rng, words, _pick(rng, _NEG_COUNTRIES))
    if rng.random() < 0.3:
        _insert(rng, words, _pick(rng, _NEG_NEAR_MISSES))
    if rng.random() < 0.3:
        _insert(rng, words, str(int(rng.integers(1000, 999999))))
    if rng.random() < 0.5:
        _scatter_phrase_words(rng, words, _pick(rng, lexicon.smishing_phrases))
    if rng.random() < 0.5:
        _insert(rng, words, _pick(rng, lexicon.legitimate_phrases))
    return " ".join(words)


def _violates_contract(
    text: str,
    positive: bool,
    quarter: int,
    gazetteer: EntityGazetteer,
    lexicon: PhraseLexicon,
) -> str | None:
    semantic = tag_semantic(text, gazetteer).tagged
    structural = tag_structural(text).tagged
    phrased = tag_phrases(text, lexicon).tagged
    has_uk = "country=UK" in semantic
    has_struct = any(t in structural for t in ("[URL]", "[EMAIL]", "[PHONE]"))
    has_trigram = "£$€" in text
    has_phrase = "[smishing_like]" in phrased
    if not positive:
        if has_uk:
            return "negative tagged country=UK"
        if has_struct:
            return "negative grew a structural tag"
        if has_trigram:
            return "negative contains the trigram"
        if has_phrase:
            return "negative matched a scripted phrase"
        return None
    expected = {0: has_uk, 1: has_struct, 2: has_trigram, 3: has_phrase}[quarter]
    if not expected:
        return f"positive quarter {quarter} lost its cue"
    return None


@dataclass(frozen=True)
class SyntheticSpec:
    n_messages: int = 4000
    seed: int = 42
    positive_fraction: float = 0.5


def generate_corpus(spec: SyntheticSpec = SyntheticSpec()) -> list[LabeledMessage]:
    """Seed-deterministic corpus; positives split evenly over the 4 quarters."""
    rng = np.random.default_rng(spec.seed)
    gazetteer = EntityGazetteer.default()
    lexicon = PhraseLexicon.default()
    n_pos = round(spec.n_messages * spec.positive_fraction)
    n_neg = spec.n_messages - n_pos

    plan = [(True, i % 4) for i in range(n_pos)] + [(False, -1) for _ in range(n_neg)]
    order = rng.permutation(len(plan))

    seen: set[str] = set()
    messages: list[LabeledMessage] = []
    for idx in order:
        positive, quarter = plan[idx]
        for attempt in range(50):
            text = (
                _positive_text(rng, quarter, lexicon)
                if positive
                else _negative_text(rng, lexicon)
            )
            problem = _violates_contract(text, positive, quarter, gazetteer, lexicon)
            mid = message_id(text)
            if problem is None and mid not in seen:
                break
        else:
            raise DataError(
                f"could not draw a clean synthetic message after 50 attempts: {problem}"
            )
        seen.add(mid)
        messages.append(
            LabeledMessage(
                id=mid,
                text=text,
                ternary_label=SMISHING if positive else HAM,
                binary_target=int(positive),
                source_id=SOURCE_ID,
            )
        )
    return messages


def experiment_config(seed: int = 42) -> RunConfig:
    """Training configuration used by the synthetic end-to-end experiment."""
    return config_from_dict(
        {
            "seed": seed,
            "data": {"train_fraction": 0.8, "relabel": {"enabled": False}},
            # the df-ranked feature cap keeps the tag streams focused on the
            # placeholder/country tokens plus the shared filler vocabulary
            "semantic": {"min_df": 3, "max_features": 64},
            "structural": {"min_df": 3, "max_features": 64},
            "char": {"epochs": 4},
            "contextual_head": {"epochs": 10},
            "fusion": {"epochs": 20},
        }
    )
