"""Deterministic text transducers for entity, structural, and phrase tagging.

Three taggers operate independently on raw message text:

* :func:`tag_structural` substitutes URLs, email addresses, and phone numbers
  with ``[URL]`` / ``[EMAIL]`` / ``[PHONE]``.
* :func:`tag_semantic` substitutes gazetteer entities and currency amounts
  with ``[GPE]`` / ``[ORG]`` / ``[MONEY]`` and appends ``country=<Name>`` for
  each detected country.
* :func:`tag_phrases` annotates curated phrases in place with
  ``[smishing_like]`` / ``[legitimate_like]`` prefixes (the phrase text is
  kept).

All taggers are pure and idempotent: placeholder tokens and ``country=``
suffixes never re-match. Changing any pattern below is a model-breaking
change; bump REGEX_VERSION so stale bundles refuse to load.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError
from .tokenize import PLACEHOLDER_TOKENS

REGEX_VERSION = "1"

TAG_URL = "[URL]"
TAG_EMAIL = "[EMAIL]"
TAG_PHONE = "[PHONE]"
TAG_GPE = "[GPE]"
TAG_ORG = "[ORG]"
TAG_MONEY = "[MONEY]"
TAG_SMISHING_LIKE = "[smishing_like]"
TAG_LEGITIMATE_LIKE = "[legitimate_like]"

# Annotation tags prefix the matched text; all other tags replace it.
ANNOTATION_TAGS = frozenset({TAG_SMISHING_LIKE, TAG_LEGITIMATE_LIKE})

_RESOURCES = Path(__file__).resolve().parent / "resources"

# The leading guard keeps bare-domain matches from firing inside email
# addresses and longer dotted names ("a@b.co" must stay an EMAIL).
URL_RE = re.compile(
    r"(?<![A-Za-z0-9@._%+-])"
    r"(?:https?://[^\s]+"
    r"|www\.[^\s]+"
    r"|[a-z0-9-]+\.(?:com|net|org|info|biz|co|io|ly|me|ru|cn|uk)(?:/[^\s]*)?)",
    re.IGNORECASE,
)

EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")

# Liberal candidate; a match counts as a phone number only if it carries
# 7-15 digits total (checked in code, not in the pattern).
PHONE_CANDIDATE_RE = re.compile(
    r"(?<![0-9A-Za-z])"
    r"(?:\+\s?)?(?:\(\d{1,4}\)[\s.-]?)?\d(?:[\s.-]?\d)*"
    r"(?![0-9A-Za-z])"
)
PHONE_MIN_DIGITS = 7
PHONE_MAX_DIGITS = 15

MONEY_RE = re.compile(
    r"(?:[£$€₹]\s?[0-9][0-9,]*(?:\.[0-9]{1,2})?(?![0-9]))"
    r"|(?:(?<![0-9A-Za-z.,])[0-9][0-9,]*\s?"
    r"(?:USD|GBP|EUR|INR|dollars?|pounds?|rupees?)(?![A-Za-z]))",
    re.IGNORECASE,
)

_PLACEHOLDER_RE = re.compile("|".join(re.escape(t) for t in PLACEHOLDER_TOKENS))
_COUNTRY_SUFFIX_RE = re.compile(r"country=\S+")

_MASK_CHAR = "\x00"


def regex_fingerprint() -> str:
    """Stable hash of every pinned pattern; recorded in bundle manifests."""
    blob = "\n".join(
        [
            REGEX_VERSION,
            URL_RE.pattern,
            EMAIL_RE.pattern,
            PHONE_CANDIDATE_RE.pattern,
            f"{PHONE_MIN_DIGITS}-{PHONE_MAX_DIGITS}",
            MONEY_RE.pattern,
        ]
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TagSpan:
    """A tagged region of the original text; ``surface`` is what was there."""

    start: int
    end: int
    tag: str
    surface: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start}, {self.end})")


@dataclass(frozen=True)
class TaggedMessage:
    original: str
    tagged: str
    spans: tuple[TagSpan, ...]
    appended_countries: tuple[str, ...] = ()


@dataclass(frozen=True)
class GazetteerEntry:
    kind: str  # "GPE" or "ORG"
    surface: str
    canonical: str
    position: int  # file order, used to break equal-length match ties


class EntityGazetteer:
    """Ordered surface-form lookup for countries and organizations.

    Lookups are case-insensitive for names longer than two characters and
    case-sensitive for 2-letter codes ("US" matches, "us" does not).
    """

    def __init__(self, entries: list[GazetteerEntry] | tuple[GazetteerEntry, ...]):
        self.entries = tuple(entries)
        for e in self.entries:
            if e.kind not in ("GPE", "ORG"):
                raise ConfigError(f"gazetteer entry kind must be GPE or ORG, got {e.kind!r}")
            if len(e.surface) < 2:
                raise ConfigError(f"gazetteer surface too short: {e.surface!r}")
        self._patterns = [
            (
                e,
                re.compile(
                    r"(?<![0-9A-Za-z])" + re.escape(e.surface) + r"(?![0-9A-Za-z])",
                    0 if len(e.surface) == 2 else re.IGNORECASE,
                ),
            )
            for e in self.entries
        ]

    @property
    def countries(self) -> dict[str, str]:
        return {e.surface: e.canonical for e in self.entries if e.kind == "GPE"}

    @property
    def organizations(self) -> set[str]:
        return {e.surface for e in self.entries if e.kind == "ORG"}

    @property
    def currency_patterns(self) -> tuple[re.Pattern, ...]:
        return (MONEY_RE,)

    @classmethod
    def from_file(cls, path: str | Path) -> "EntityGazetteer":
        """Parse a UTF-8 TSV with lines ``TYPE<TAB>surface<TAB>canonical``.

        Blank lines and lines starting with ``#`` are ignored.
        """
        path = Path(path)
        if not path.exists():
            raise DataError(f"gazetteer file not found: {path}")
        entries = []
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{i + 1}: expected TYPE<TAB>surface<TAB>canonical")
            kind, surface, canonical = (p.strip() for p in parts)
            entries.append(GazetteerEntry(kind, surface, canonical, len(entries)))
        if not entries:
            raise DataError(f"gazetteer file has no entries: {path}")
        return cls(entries)

    @classmethod
    def default(cls) -> "EntityGazetteer":
        return cls.from_file(_RESOURCES / "gazetteer.tsv")

    def fingerprint(self) -> str:
        blob = "\n".join(f"{e.kind}\t{e.surface}\t{e.canonical}" for e in self.entries)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PhraseLexicon:
    """Curated phrase lists; the two lists must be disjoint after lowercasing."""

    legitimate_phrases: tuple[str, ...]
    smishing_phrases: tuple[str, ...]

    def __post_init__(self):
        for phrase in self.legitimate_phrases + self.smishing_phrases:
            if not phrase or not phrase.strip():
                raise ConfigError("phrase lexicon contains an empty phrase")
        legit = {p.lower() for p in self.legitimate_phrases}
        smish = {p.lower() for p in self.smishing_phrases}
        if legit & smish:
            raise ConfigError(f"phrase lists overlap after lowercasing: {sorted(legit & smish)}")

    @classmethod
    def from_files(cls, legitimate_path: str | Path, smishing_path: str | Path) -> "PhraseLexicon":
        return cls(
            legitimate_phrases=_read_phrase_file(legitimate_path),
            smishing_phrases=_read_phrase_file(smishing_path),
        )

    @classmethod
    def default(cls) -> "PhraseLexicon":
        return cls.from_files(
            _RESOURCES / "legitimate_phrases.txt", _RESOURCES / "smishing_phrases.txt"
        )

    def fingerprint(self) -> str:
        blob = "\n".join(self.legitimate_phrases) + "\x1e" + "\n".join(self.smishing_phrases)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _read_phrase_file(path: str | Path) -> tuple[str, ...]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"phrase lexicon file not found: {path}")
    phrases = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line)
    if not phrases:
        raise DataError(f"phrase lexicon file is empty: {path}")
    return tuple(phrases)


def _immune_regions(text: str) -> list[tuple[int, int]]:
    """Regions that taggers must never rewrite: existing placeholders and
    ``country=`` suffixes."""
    regions = [m.span() for m in _PLACEHOLDER_RE.finditer(text)]
    regions += [m.span() for m in _COUNTRY_SUFFIX_RE.finditer(text)]
    return regions


def _masked(text: str, regions: list[tuple[int, int]]) -> str:
    if not regions:
        return text
    chars = list(text)
    for s, e in regions:
        for i in range(s, e):
            chars[i] = _MASK_CHAR
    return "".join(chars)


def _substitute(text: str, spans: list[TagSpan]) -> str:
    out = []
    prev = 0
    for span in spans:
        out.append(text[prev : span.start])
        out.append(span.tag)
        prev = span.end
    out.append(text[prev:])
    return "".join(out)


def tag_structural(text: str) -> TaggedMessage:
    """Replace URLs, emails, and phone numbers with placeholders.

    Matching order is URL, then EMAIL, then PHONE, each on the text left
    unclaimed by earlier passes, so a phone-looking digit run inside a URL is
    never tagged twice.
    """
    claimed: list[TagSpan] = []
    work = _masked(text, _immune_regions(text))

    for m in URL_RE.finditer(work):
        claimed.append(TagSpan(m.start(), m.end(), TAG_URL, text[m.start() : m.end()]))
    work = _masked(work, [(s.start, s.end) for s in claimed])

    for m in EMAIL_RE.finditer(work):
        claimed.append(TagSpan(m.start(), m.end(), TAG_EMAIL, text[m.start() : m.end()]))
    work = _masked(work, [(s.start, s.end) for s in claimed])

    for m in PHONE_CANDIDATE_RE.finditer(work):
        n_digits = sum(c.isdigit() for c in m.group())
        if PHONE_MIN_DIGITS <= n_digits <= PHONE_MAX_DIGITS:
            claimed.append(TagSpan(m.start(), m.end(), TAG_PHONE, text[m.start() : m.end()]))

    claimed.sort(key=lambda s: s.start)
    return TaggedMessage(text, _substitute(text, claimed), tuple(claimed))


def tag_semantic(text: str, gazetteer: EntityGazetteer) -> TaggedMessage:
    """Replace gazetteer entities and currency amounts with abstract labels.

    Overlapping gazetteer hits resolve longest-match-first; equal-length ties
    go to the entry listed earlier in the gazetteer file. For each distinct
    detected country the canonical name is appended once as `` country=<Name>``
    in order of first occurrence.
    """
    work = _masked(text, _immune_regions(text))

    candidates: list[tuple[int, int, GazetteerEntry]] = []
    for entry, pattern in gazetteer._patterns:
        for m in pattern.finditer(work):
            candidates.append((m.start(), m.end(), entry))
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[2].position, c[0]))

    claimed: list[TagSpan] = []
    taken: list[tuple[int, int]] = []
    countries_in_order: list[tuple[int, str]] = []
    for s, e, entry in candidates:
        if any(s < te and ts < e for ts, te in taken):
            continue
        taken.append((s, e))
        tag = TAG_GPE if entry.kind == "GPE" else TAG_ORG
        claimed.append(TagSpan(s, e, tag, text[s:e]))
        if entry.kind == "GPE":
            countries_in_order.append((s, entry.canonical))

    work = _masked(work, taken)
    for m in MONEY_RE.finditer(work):
        claimed.append(TagSpan(m.start(), m.end(), TAG_MONEY, text[m.start() : m.end()]))

    claimed.sort(key=lambda s: s.start)

    appended: list[str] = []
    for _, canonical in sorted(countries_in_order):
        if canonical not in appended:
            appended.append(canonical)

    tagged = _substitute(text, claimed)
    for name in appended:
        tagged += f" country={name}"
    return TaggedMessage(text, tagged, tuple(claimed), tuple(appended))


def tag_phrases(text: str, lexicon: PhraseLexicon) -> TaggedMessage:
    """Prefix curated phrase occurrences in place with their tag token.

    The phrase text is retained (annotation, not substitution), so downstream
    encoders see both the tag and the phrase. Overlaps resolve longest-first,
    then leftmost. An occurrence already carrying its tag is left alone.
    """
    work = _masked(text, _immune_regions(text))

    candidates: list[tuple[int, int, str]] = []
    for phrases, tag in (
        (lexicon.smishing_phrases, TAG_SMISHING_LIKE),
        (lexicon.legitimate_phrases, TAG_LEGITIMATE_LIKE),
    ):
        for phrase in phrases:
            pattern = re.compile(
                r"(?<![0-9A-Za-z])" + re.escape(phrase) + r"(?![0-9A-Za-z])", re.IGNORECASE
            )
            for m in pattern.finditer(work):
                candidates.append((m.start(), m.end(), tag))
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))

    claimed: list[TagSpan] = []
    taken: list[tuple[int, int]] = []
    for s, e, tag in candidates:
        if any(s < te and ts < e for ts, te in taken):
            continue
        if text[:s].endswith(tag + " "):  # already annotated; keeps idempotence
            continue
        taken.append((s, e))
        claimed.append(TagSpan(s, e, tag, text[s:e]))

    claimed.sort(key=lambda s: s.start)
    out = []
    prev = 0
    for span in claimed:
        out.append(text[prev : span.start])
        out.append(span.tag + " ")
        out.append(text[span.start : span.end])
        prev = span.end
    out.append(text[prev:])
    return TaggedMessage(text, "".join(out), tuple(claimed))


def reconstruct(tm: TaggedMessage) -> str:
    """Invert a tagger: rebuild ``tm.original`` from ``tm.tagged`` and spans.

    Strips the appended country suffix, removes annotation tags, and restores
    surfaces at substitution spans. Used by the span-consistency tests.
    """
    tagged = tm.tagged
    for name in reversed(tm.appended_countries):
        suffix = f" country={name}"
        if not tagged.endswith(suffix):
            raise ValueError(f"tagged text missing country suffix {suffix!r}")
        tagged = tagged[: -len(suffix)]

    out = []
    ti = 0  # cursor in tagged
    oi = 0  # cursor in original
    for span in tm.spans:
        gap = span.start - oi
        out.append(tagged[ti : ti + gap])
        ti += gap
        if span.tag in ANNOTATION_TAGS:
            marker = span.tag + " "
            if not tagged.startswith(marker, ti):
                raise ValueError(f"expected {marker!r} at offset {ti}")
            ti += len(marker)
            out.append(tagged[ti : ti + len(span.surface)])
            ti += len(span.surface)
        else:
            if not tagged.startswith(span.tag, ti):
                raise ValueError(f"expected {span.tag!r} at offset {ti}")
            ti += len(span.tag)
            out.append(span.surface)
        oi = span.end
    out.append(tagged[ti:])
    return "".join(out)
