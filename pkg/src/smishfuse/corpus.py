"""Corpus ingestion, normalization, relabeling, dedup, and splitting.

Heterogeneous SMS datasets (CSV or JSONL) are mapped onto a common
ternary-labeled record, spam messages containing smishing keywords are
promoted to the smishing class, exact duplicates (by normalized text) are
collapsed, and a seed-deterministic stratified train/test split is produced.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, DataError, UnmappedLabelError

log = logging.getLogger(__name__)

HAM = "HAM"
SPAM = "SPAM"
SMISHING = "SMISHING"
TERNARY_LABELS = (HAM, SPAM, SMISHING)

# Conflicting duplicate labels resolve to the more severe one.
_SEVERITY = {HAM: 0, SPAM: 1, SMISHING: 2}

WHOLE_WORD = "WHOLE_WORD"
SUBSTRING = "SUBSTRING"

_RESOURCES = Path(__file__).resolve().parent / "resources"
_WS_RUN_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class RawRecord:
    source_id: str
    row_index: int
    text: str
    original_label: str


@dataclass(frozen=True)
class LabeledMessage:
    id: str
    text: str
    ternary_label: str
    binary_target: int
    source_id: str


@dataclass(frozen=True)
class KeywordLexicon:
    name: str
    entries: frozenset[str]
    match_mode: str = WHOLE_WORD

    def __post_init__(self):
        if not self.entries:
            raise ConfigError(f"keyword lexicon {self.name!r} is empty")
        for entry in self.entries:
            if not entry.strip():
                raise ConfigError(f"keyword lexicon {self.name!r} has a blank entry")
            if entry != entry.lower():
                raise ConfigError(f"keyword lexicon entries must be lowercase: {entry!r}")
        if self.match_mode not in (WHOLE_WORD, SUBSTRING):
            raise ConfigError(f"unknown match_mode {self.match_mode!r}")

    @classmethod
    def from_file(cls, path: str | Path, match_mode: str = WHOLE_WORD) -> "KeywordLexicon":
        path = Path(path)
        if not path.exists():
            raise DataError(f"keyword lexicon file not found: {path}")
        entries = set()
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                entries.add(line.lower())
        return cls(name=path.stem, entries=frozenset(entries), match_mode=match_mode)

    @classmethod
    def default(cls) -> "KeywordLexicon":
        return cls.from_file(_RESOURCES / "relabel_keywords.txt")

    def matches(self, text: str) -> bool:
        lowered = text.lower()
        if self.match_mode == SUBSTRING:
            return any(entry in lowered for entry in self.entries)
        words = set(re.findall(r"[^\W_]+", lowered))
        return any(entry in words for entry in self.entries)

    def fingerprint(self) -> str:
        blob = self.match_mode + "\n" + "\n".join(sorted(self.entries))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class CorpusSplit:
    train: list[LabeledMessage]
    test: list[LabeledMessage]
    seed: int
    train_fraction: float


@dataclass(frozen=True)
class DatasetSchema:
    """Column mapping for one source file.

    ``text_column`` / ``label_column`` are 0-based indices for CSV and field
    names for JSONL.
    """

    format: str  # "csv" or "jsonl"
    text_column: int | str
    label_column: int | str
    delimiter: str = ","
    has_header: bool = True
    encoding: str = "utf-8"

    def __post_init__(self):
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"unsupported dataset format {self.format!r}")


@dataclass
class IngestResult:
    records: list[RawRecord]
    rejected_rows: int


def message_id(normalized_text: str) -> str:
    """Stable content hash: identical normalized text gives an identical id."""
    return hashlib.sha256(normalized_text.encode("utf-8")).hexdigest()


def ingest_dataset(path: str | Path, schema: DatasetSchema, source_id: str) -> IngestResult:
    """Read one dataset file into raw records, rejecting unusable rows.

    Rows with empty text (after trimming) or a missing text/label field are
    rejected and counted, not silently dropped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")

    records: list[RawRecord] = []
    rejected = 0

    def add_row(row_index: int, text, label) -> None:
        nonlocal rejected
        if text is None or label is None:
            rejected += 1
            return
        text = str(text)
        if not text.strip():
            rejected += 1
            return
        records.append(RawRecord(source_id, row_index, text, str(label)))

    if schema.format == "csv":
        ti, li = schema.text_column, schema.label_column
        if not isinstance(ti, int) or not isinstance(li, int):
            raise ConfigError(f"{source_id}: CSV schema needs integer column indices")
        with path.open(newline="", encoding=schema.encoding) as fh:
            reader = csv.reader(fh, delimiter=schema.delimiter)
            for i, row in enumerate(reader):
                if i == 0 and schema.has_header:
                    continue
                if max(ti, li) >= len(row):
                    rejected += 1
                    continue
                add_row(i, row[ti], row[li])
    else:
        ti, li = schema.text_column, schema.label_column
        if not isinstance(ti, str) or not isinstance(li, str):
            raise ConfigError(f"{source_id}: JSONL schema needs string field names")
        with path.open(encoding=schema.encoding) as fh:
            for i, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    rejected += 1
                    continue
                add_row(i, obj.get(ti), obj.get(li))

    if rejected:
        log.warning("%s: rejected %d unusable rows", source_id, rejected)
    if not records:
        raise DataError(f"{source_id}: zero usable rows in {path}")
    return IngestResult(records, rejected)


def normalize(record: RawRecord, label_map: Mapping[str, str]) -> LabeledMessage:
    """Normalize whitespace and map the source label onto the ternary scheme.

    No case folding: the character stream models stylistic casing. Label
    matching is case-insensitive.
    """
    text = _WS_RUN_RE.sub(" ", record.text).strip()
    key = record.original_label.strip().lower()
    lowered_map = {k.strip().lower(): v for k, v in label_map.items()}
    if key not in lowered_map:
        raise UnmappedLabelError(
            f"source {record.source_id!r}: no mapping for label {record.original_label!r}"
        )
    ternary = lowered_map[key]
    if ternary not in TERNARY_LABELS:
        raise ConfigError(
            f"source {record.source_id!r}: label map target must be one of "
            f"{TERNARY_LABELS}, got {ternary!r}"
        )
    return LabeledMessage(
        id=message_id(text),
        text=text,
        ternary_label=ternary,
        binary_target=1 if ternary == SMISHING else 0,
        source_id=record.source_id,
    )


def relabel_spam(
    messages: Iterable[LabeledMessage], lexicon: KeywordLexicon
) -> list[LabeledMessage]:
    """Promote SPAM messages containing a smishing keyword to SMISHING.

    HAM and already-SMISHING messages are untouched; returns a new list.
    """
    out = []
    for msg in messages:
        if msg.ternary_label == SPAM and lexicon.matches(msg.text):
            out.append(
                LabeledMessage(msg.id, msg.text, SMISHING, 1, msg.source_id)
            )
        else:
            out.append(msg)
    return out


def dedupe(messages: Iterable[LabeledMessage]) -> list[LabeledMessage]:
    """Keep one message per id (first occurrence wins); conflicting labels
    resolve to the more severe one and are logged."""
    kept: dict[str, LabeledMessage] = {}
    order: list[str] = []
    for msg in messages:
        prev = kept.get(msg.id)
        if prev is None:
            kept[msg.id] = msg
            order.append(msg.id)
        elif _SEVERITY[msg.ternary_label] > _SEVERITY[prev.ternary_label]:
            log.warning(
                "duplicate %s has conflicting labels %s/%s; keeping %s",
                msg.id[:12],
                prev.ternary_label,
                msg.ternary_label,
                msg.ternary_label,
            )
            kept[msg.id] = LabeledMessage(
                prev.id,
                prev.text,
                msg.ternary_label,
                1 if msg.ternary_label == SMISHING else 0,
                prev.source_id,
            )
        elif _SEVERITY[msg.ternary_label] < _SEVERITY[prev.ternary_label]:
            log.warning(
                "duplicate %s has conflicting labels %s/%s; keeping %s",
                msg.id[:12],
                prev.ternary_label,
                msg.ternary_label,
                prev.ternary_label,
            )
    return [kept[i] for i in order]


def split(
    messages: list[LabeledMessage],
    train_fraction: float,
    seed: int,
    stratify: bool = True,
) -> CorpusSplit:
    """Seed-deterministic train/test split, stratified on the binary target.

    With stratification each class contributes round(fraction * n_class)
    messages to train, clamped so both sides hold at least one message of
    each class.
    """
    n = len(messages)
    if n < 5:
        raise DataError(f"corpus too small to split: {n} messages")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")

    rng = np.random.default_rng(seed)
    train: list[LabeledMessage] = []
    test: list[LabeledMessage] = []

    if stratify:
        groups = [
            [m for m in messages if m.binary_target == 0],
            [m for m in messages if m.binary_target == 1],
        ]
        if any(len(g) < 2 for g in groups):
            raise DataError(
                "stratified split needs at least two messages of each class "
                f"(got {len(groups[0])} negative, {len(groups[1])} positive)"
            )
        for group in groups:
            idx = rng.permutation(len(group))
            n_train = int(round(train_fraction * len(group)))
            n_train = min(max(n_train, 1), len(group) - 1)
            train.extend(group[i] for i in idx[:n_train])
            test.extend(group[i] for i in idx[n_train:])
    else:
        idx = rng.permutation(n)
        n_train = int(round(train_fraction * n))
        n_train = min(max(n_train, 1), n - 1)
        train.extend(messages[i] for i in idx[:n_train])
        test.extend(messages[i] for i in idx[n_train:])

    return CorpusSplit(train=train, test=test, seed=seed, train_fraction=train_fraction)


@dataclass
class CorpusStats:
    total: int
    by_ternary: dict[str, int]
    by_source: dict[str, int]
    positives: int
    positive_rate: float


def corpus_stats(messages: Iterable[LabeledMessage]) -> CorpusStats:
    by_ternary = {label: 0 for label in TERNARY_LABELS}
    by_source: dict[str, int] = {}
    total = 0
    positives = 0
    for msg in messages:
        total += 1
        by_ternary[msg.ternary_label] += 1
        by_source[msg.source_id] = by_source.get(msg.source_id, 0) + 1
        positives += msg.binary_target
    return CorpusStats(
        total=total,
        by_ternary=by_ternary,
        by_source=by_source,
        positives=positives,
        positive_rate=positives / total if total else 0.0,
    )


def write_corpus_jsonl(messages: Iterable[LabeledMessage], path: str | Path) -> int:
    """Persist a corpus, one message per line; returns the message count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for msg in messages:
            fh.write(
                json.dumps(
                    {
                        "id": msg.id,
                        "text": msg.text,
                        "ternary_label": msg.ternary_label,
                        "binary_target": msg.binary_target,
                        "source_id": msg.source_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    return n


def read_corpus_jsonl(path: str | Path) -> list[LabeledMessage]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    messages = []
    with path.open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                messages.append(
                    LabeledMessage(
                        id=obj["id"],
                        text=obj["text"],
                        ternary_label=obj["ternary_label"],
                        binary_target=int(obj["binary_target"]),
                        source_id=obj["source_id"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{i + 1}: bad corpus line ({exc})") from exc
    if not messages:
        raise DataError(f"corpus file is empty: {path}")
    return messages
