"""Run configuration.

A run is described by one ``RunConfig`` tree of dataclasses. JSON configs are
partial: any omitted key falls back to the dataclass default, and unknown keys
are rejected with their dotted path. ``resources/defaults.json`` spells out
the full default tree (kept in sync by a test).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .charcnn import CharCnnConfig
from .contextual import ContextualEncoderSpec, ConvHeadConfig
from .errors import ConfigError, DataError
from .fusion import FusionConfig

VOTE_MODES = ("soft", "hard")
MATCH_MODES = ("whole_word", "substring")
TERNARY_LABELS = ("HAM", "SPAM", "SMISHING")


@dataclass
class DatasetSourceConfig:
    """Where one raw dataset lives and how its rows map onto the corpus."""

    source_id: str = ""
    path: str = ""
    format: str = "csv"
    text_column: int | str = 0
    label_column: int | str = 1
    label_map: dict[str, str] = field(default_factory=dict)
    delimiter: str = ","
    has_header: bool = True
    encoding: str = "utf-8"

    def __post_init__(self):
        if not self.source_id:
            raise ConfigError("dataset entry needs a source_id")
        if not self.path:
            raise ConfigError(f"dataset {self.source_id!r} needs a path")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(
                f"dataset {self.source_id!r}: format must be csv or jsonl, got {self.format!r}"
            )
        if not self.label_map:
            raise ConfigError(f"dataset {self.source_id!r} needs a label_map")
        for src, dst in self.label_map.items():
            if dst.upper() not in TERNARY_LABELS:
                raise ConfigError(
                    f"dataset {self.source_id!r}: label_map maps {src!r} to {dst!r}, "
                    f"expected one of {TERNARY_LABELS}"
                )


@dataclass
class RelabelConfig:
    enabled: bool = True
    keywords_path: str | None = None  # None -> packaged default list
    match_mode: str = "whole_word"

    def __post_init__(self):
        if self.match_mode not in MATCH_MODES:
            raise ConfigError(
                f"relabel.match_mode must be one of {MATCH_MODES}, got {self.match_mode!r}"
            )


@dataclass
class DataConfig:
    train_fraction: float = 0.8
    stratify: bool = True
    relabel: RelabelConfig = field(default_factory=RelabelConfig)

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"data.train_fraction must lie in (0, 1), got {self.train_fraction}"
            )


@dataclass
class TaggingConfig:
    gazetteer_path: str | None = None  # None -> packaged defaults
    smishing_phrases_path: str | None = None
    legitimate_phrases_path: str | None = None


@dataclass
class TfidfStreamConfig:
    """TF-IDF + random forest settings shared by the two tag streams."""

    min_df: int = 1
    max_features: int | None = None
    n_trees: int = 200
    bootstrap: bool = True
    vote: str = "soft"

    def __post_init__(self):
        if self.min_df < 1:
            raise ConfigError(f"min_df must be >= 1, got {self.min_df}")
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.vote not in VOTE_MODES:
            raise ConfigError(f"vote must be one of {VOTE_MODES}, got {self.vote!r}")


@dataclass
class RunConfig:
    seed: int = 42
    datasets: tuple[DatasetSourceConfig, ...] = ()
    data: DataConfig = field(default_factory=DataConfig)
    tagging: TaggingConfig = field(default_factory=TaggingConfig)
    semantic: TfidfStreamConfig = field(default_factory=TfidfStreamConfig)
    structural: TfidfStreamConfig = field(default_factory=TfidfStreamConfig)
    char: CharCnnConfig = field(default_factory=CharCnnConfig)
    contextual_encoder: ContextualEncoderSpec = field(default_factory=ContextualEncoderSpec)
    contextual_head: ConvHeadConfig = field(default_factory=ConvHeadConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)


_SECTIONS: dict[str, type] = {
    "data": DataConfig,
    "tagging": TaggingConfig,
    "semantic": TfidfStreamConfig,
    "structural": TfidfStreamConfig,
    "char": CharCnnConfig,
    "contextual_encoder": ContextualEncoderSpec,
    "contextual_head": ConvHeadConfig,
    "fusion": FusionConfig,
}
_NESTED: dict[str, dict[str, type]] = {"data": {"relabel": RelabelConfig}}


def _coerce(default: Any, value: Any, path: str) -> Any:
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path} must be a list, got {type(value).__name__}")
        return tuple(value)
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ConfigError(f"{path} must be a boolean, got {value!r}")
    return value


def _field_default(f: dataclasses.Field) -> Any:
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
        return f.default_factory()  # type: ignore[misc]
    return None


def _build(cls: type, raw: Mapping[str, Any], path: str, nested: Mapping[str, type] = {}):
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path or 'config'} must be an object, got {type(raw).__name__}")
    fields_by_name = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        dotted = f"{path}.{key}" if path else key
        if key not in fields_by_name:
            raise ConfigError(f"unknown config key {dotted!r}")
        if key in nested:
            kwargs[key] = _build(nested[key], value, dotted)
        else:
            kwargs[key] = _coerce(_field_default(fields_by_name[key]), value, dotted)
    try:
        return cls(**kwargs)
    except (DataError, TypeError) as exc:
        raise ConfigError(f"invalid {path or 'config'} section: {exc}") from exc


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"config root must be an object, got {type(raw).__name__}")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key == "seed":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"seed must be an integer, got {value!r}")
            kwargs["seed"] = value
        elif key == "datasets":
            if not isinstance(value, (list, tuple)):
                raise ConfigError("datasets must be a list of dataset objects")
            kwargs["datasets"] = tuple(
                _build(DatasetSourceConfig, entry, f"datasets[{i}]")
                for i, entry in enumerate(value)
            )
        elif key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key, _NESTED.get(key, {}))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return RunConfig(**kwargs)


def config_to_dict(config: RunConfig) -> dict[str, Any]:
    out = dataclasses.asdict(config)

    def _listify(node):
        if isinstance(node, dict):
            return {k: _listify(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return list(node)
        return node

    return _listify(out)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
