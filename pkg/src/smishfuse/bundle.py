"""Model bundle persistence.

A bundle is a directory:

    manifest.json            hyperparameters, seeds, fingerprints, file hashes
    manifest.sha256          sha256 of manifest.json
    threshold                decision threshold
    tagging/                 gazetteer, phrase lists, regex version record
    streams/semantic/        vocab.json, forest.json
    streams/structural/      vocab.json, forest.json
    streams/char/            charset.json, weights.bin, weights.json
    streams/contextual/      encoder.json, weights.bin, weights.json
    fusion/                  weights.bin, weights.json, projections per stream

Neural weights are float32 little-endian raw bytes beside a JSON shape index;
reduction projections are float64 so projected blocks reproduce exactly.
Loading re-verifies every file hash and refuses bundles whose tagging regex
version or fingerprint differs from the running code.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .charcnn import CharCnnModel, Charset
from .config import RunConfig, config_from_dict, config_to_dict
from .contextual import ConvHeadModel
from .errors import BundleError
from .forest import ForestModel
from .fusion import STREAM_ORDER, FusionModel, SvdProjection
from .pipeline import TrainedPipeline
from .tagging import REGEX_VERSION, EntityGazetteer, PhraseLexicon, regex_fingerprint
from .tfidf import TfidfVocabulary

FORMAT_VERSION = 1

_FLOAT32 = "<f4"
_FLOAT64 = "<f8"


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: Path) -> str:
    return _sha256_bytes(path.read_bytes())


def _write_arrays(directory: Path, stem: str, arrays: Mapping[str, np.ndarray], dtype: str) -> None:
    """Raw little-endian concatenation (sorted by name) plus a JSON index."""
    index = []
    blob = bytearray()
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype=np.float64)  # keeps 0-d shapes intact
        raw = arr.astype(dtype).tobytes()
        index.append(
            {"name": name, "shape": list(arr.shape), "dtype": dtype, "offset": len(blob)}
        )
        blob.extend(raw)
    (directory / f"{stem}.bin").write_bytes(bytes(blob))
    (directory / f"{stem}.json").write_text(
        json.dumps({"arrays": index, "total_bytes": len(blob)}, indent=1) + "\n",
        encoding="utf-8",
    )


def _read_arrays(directory: Path, stem: str) -> dict[str, np.ndarray]:
    try:
        index = json.loads((directory / f"{stem}.json").read_text(encoding="utf-8"))
        blob = (directory / f"{stem}.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read array store {directory / stem}: {exc}") from exc
    if index.get("total_bytes") != len(blob):
        raise BundleError(f"array store {stem}.bin has {len(blob)} bytes, expected "
                          f"{index.get('total_bytes')}")
    out: dict[str, np.ndarray] = {}
    for entry in index["arrays"]:
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=start)
        out[entry["name"]] = arr.astype(np.float64).reshape(entry["shape"])
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise BundleError(f"bundle file missing: {path}") from exc
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle file {path} is not valid JSON: {exc}") from exc


def _vocab_to_json(vocab: TfidfVocabulary) -> dict:
    terms = [None] * vocab.size
    for term, idx in vocab.term_to_index.items():
        terms[idx] = term
    return {
        "terms": terms,
        "idf": [float(v) for v in vocab.idf],
        "n_docs": vocab.n_docs,
        "min_df": vocab.min_df,
        "max_features": vocab.max_features,
    }


def _vocab_from_json(obj: dict) -> TfidfVocabulary:
    return TfidfVocabulary(
        term_to_index={t: i for i, t in enumerate(obj["terms"])},
        idf=np.asarray(obj["idf"], dtype=np.float64),
        n_docs=obj["n_docs"],
        min_df=obj["min_df"],
        max_features=obj["max_features"],
    )


def _projection_meta(proj: SvdProjection) -> dict:
    return {"stream_id": proj.stream_id, "k": proj.k, "passthrough": proj.passthrough}


def save_bundle(pipeline: TrainedPipeline, path: str | Path) -> Path:
    """Write the trained pipeline as a bundle directory; returns the path."""
    root = Path(path)
    if root.exists():
        if not root.is_dir():
            raise BundleError(f"bundle path exists and is not a directory: {root}")
        contents = list(root.iterdir())
        if contents and not (root / "manifest.json").exists():
            raise BundleError(
                f"refusing to overwrite non-bundle directory {root} "
                "(it has files but no manifest.json)"
            )
        for item in contents:
            if item.is_dir():
                import shutil

                shutil.rmtree(item)
            else:
                item.unlink()
    root.mkdir(parents=True, exist_ok=True)

    gaz = pipeline.gazetteer
    lex = pipeline.lexicon
    tagging_dir = root / "tagging"
    tagging_dir.mkdir()
    (tagging_dir / "gazetteer.tsv").write_text(
        "\n".join(f"{e.kind}\t{e.surface}\t{e.canonical}" for e in gaz.entries) + "\n",
        encoding="utf-8",
    )
    (tagging_dir / "legitimate_phrases.txt").write_text(
        "\n".join(lex.legitimate_phrases) + "\n", encoding="utf-8"
    )
    (tagging_dir / "smishing_phrases.txt").write_text(
        "\n".join(lex.smishing_phrases) + "\n", encoding="utf-8"
    )
    _write_json(
        tagging_dir / "regex.json",
        {"version": REGEX_VERSION, "sha256": regex_fingerprint()},
    )

    sem_dir = root / "streams" / "semantic"
    sem_dir.mkdir(parents=True)
    _write_json(sem_dir / "vocab.json", _vocab_to_json(pipeline.semantic_vocab))
    _write_json(sem_dir / "forest.json", pipeline.semantic_forest.to_json_obj())

    str_dir = root / "streams" / "structural"
    str_dir.mkdir(parents=True)
    _write_json(str_dir / "vocab.json", _vocab_to_json(pipeline.structural_vocab))
    _write_json(str_dir / "forest.json", pipeline.structural_forest.to_json_obj())

    char_dir = root / "streams" / "char"
    char_dir.mkdir(parents=True)
    _write_json(char_dir / "charset.json", {"chars": list(pipeline.charset.chars)})
    _write_arrays(char_dir, "weights", pipeline.char_model.params, _FLOAT32)

    ctx_dir = root / "streams" / "contextual"
    ctx_dir.mkdir(parents=True)
    _write_json(
        ctx_dir / "encoder.json",
        {
            "encoder_id": pipeline.encoder_spec.encoder_id,
            "embedding_dim": pipeline.encoder_spec.embedding_dim,
            "max_tokens": pipeline.encoder_spec.max_tokens,
        },
    )
    _write_arrays(ctx_dir, "weights", pipeline.head_model.params, _FLOAT32)

    fusion_dir = root / "fusion"
    fusion_dir.mkdir()
    _write_arrays(fusion_dir, "weights", pipeline.fusion_model.params, _FLOAT32)
    _write_json(
        fusion_dir / "active.json",
        {"streams": list(STREAM_ORDER), "active": pipeline.fusion_model.active.tolist()},
    )
    proj_meta = {}
    for name in STREAM_ORDER:
        proj = pipeline.projections[name]
        _write_arrays(
            fusion_dir,
            f"projection_{name.lower()}",
            {
                "train_mean": proj.train_mean,
                "components": proj.components,
                "singular_values": proj.singular_values,
            },
            _FLOAT64,
        )
        proj_meta[name] = _projection_meta(proj)

    _write_json(root / "threshold", {"threshold": pipeline.threshold})

    files = {}
    for file in sorted(root.rglob("*")):
        if file.is_file():
            files[file.relative_to(root).as_posix()] = _sha256_file(file)

    manifest = {
        "format_version": FORMAT_VERSION,
        "regex_version": REGEX_VERSION,
        "regex_sha256": regex_fingerprint(),
        "seed": pipeline.config.seed,
        "threshold": pipeline.threshold,
        "config": config_to_dict(pipeline.config),
        "streams": {
            "SEMANTIC": {
                "kind": "TFIDF_FOREST",
                "feature_dim": pipeline.semantic_vocab.size,
                "vote": pipeline.semantic_forest.vote,
            },
            "STRUCTURAL": {
                "kind": "TFIDF_FOREST",
                "feature_dim": pipeline.structural_vocab.size,
                "vote": pipeline.structural_forest.vote,
            },
            "CHAR": {
                "kind": "CHARCNN",
                "feature_dim": pipeline.char_model.feature_dim,
                "charset_size": pipeline.charset.size,
            },
            "CONTEXTUAL": {
                "kind": "ENCODER_CONV_HEAD",
                "feature_dim": pipeline.encoder_spec.embedding_dim,
                "encoder_id": pipeline.encoder_spec.encoder_id,
            },
        },
        "projections": proj_meta,
        "fingerprints": {
            "gazetteer": gaz.fingerprint(),
            "phrase_lexicon": lex.fingerprint(),
            "charset": pipeline.charset.fingerprint(),
        },
        "files": files,
    }
    manifest_bytes = (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode("utf-8")
    (root / "manifest.json").write_bytes(manifest_bytes)
    (root / "manifest.sha256").write_text(_sha256_bytes(manifest_bytes) + "\n", encoding="utf-8")
    return root


def load_bundle(path: str | Path) -> TrainedPipeline:
    """Load and verify a bundle; raises BundleError on any integrity problem."""
    root = Path(path)
    if not root.is_dir():
        raise BundleError(f"bundle directory not found: {root}")
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"bundle has no manifest.json: {root}")

    manifest_bytes = manifest_path.read_bytes()
    try:
        recorded = (root / "manifest.sha256").read_text(encoding="utf-8").strip()
    except FileNotFoundError as exc:
        raise BundleError("bundle has no manifest.sha256") from exc
    actual = _sha256_bytes(manifest_bytes)
    if recorded != actual:
        raise BundleError(
            f"manifest hash mismatch: manifest.sha256 says {recorded}, actual {actual}"
        )
    manifest = json.loads(manifest_bytes)

    if manifest.get("format_version") != FORMAT_VERSION:
        raise BundleError(
            f"unsupported bundle format_version {manifest.get('format_version')!r}"
        )
    if "regex_version" not in manifest or "regex_sha256" not in manifest:
        raise BundleError("bundle manifest does not record its tagging regex version")
    if manifest["regex_version"] != REGEX_VERSION or manifest["regex_sha256"] != regex_fingerprint():
        raise BundleError(
            f"bundle was built with tagging regex version {manifest['regex_version']} "
            f"({manifest['regex_sha256'][:12]}...), this code has version "
            f"{REGEX_VERSION} ({regex_fingerprint()[:12]}...); retrain or use "
            "matching code"
        )

    for rel, expected in manifest["files"].items():
        file = root / rel
        if not file.is_file():
            raise BundleError(f"bundle file missing: {rel}")
        got = _sha256_file(file)
        if got != expected:
            raise BundleError(f"bundle file {rel} hash mismatch: expected {expected}, got {got}")

    config = config_from_dict(manifest["config"])

    gazetteer = EntityGazetteer.from_file(root / "tagging" / "gazetteer.tsv")
    lexicon = PhraseLexicon.from_files(
        root / "tagging" / "legitimate_phrases.txt",
        root / "tagging" / "smishing_phrases.txt",
    )
    if gazetteer.fingerprint() != manifest["fingerprints"]["gazetteer"]:
        raise BundleError("gazetteer fingerprint mismatch")
    if lexicon.fingerprint() != manifest["fingerprints"]["phrase_lexicon"]:
        raise BundleError("phrase lexicon fingerprint mismatch")

    sem_dir = root / "streams" / "semantic"
    semantic_vocab = _vocab_from_json(_read_json(sem_dir / "vocab.json"))
    semantic_forest = ForestModel.from_json_obj(_read_json(sem_dir / "forest.json"))
    str_dir = root / "streams" / "structural"
    structural_vocab = _vocab_from_json(_read_json(str_dir / "vocab.json"))
    structural_forest = ForestModel.from_json_obj(_read_json(str_dir / "forest.json"))

    char_dir = root / "streams" / "char"
    charset = Charset(tuple(_read_json(char_dir / "charset.json")["chars"]))
    if charset.fingerprint() != manifest["fingerprints"]["charset"]:
        raise BundleError("charset fingerprint mismatch")
    char_params = _read_arrays(char_dir, "weights")
    if char_params["emb"].shape[0] != charset.size:
        raise BundleError(
            f"char embedding rows {char_params['emb'].shape[0]} != charset size {charset.size}"
        )
    char_model = CharCnnModel(config.char, charset, params=char_params)

    ctx_dir = root / "streams" / "contextual"
    enc_obj = _read_json(ctx_dir / "encoder.json")
    spec = config.contextual_encoder
    if (
        enc_obj["encoder_id"] != spec.encoder_id
        or enc_obj["embedding_dim"] != spec.embedding_dim
        or enc_obj["max_tokens"] != spec.max_tokens
    ):
        raise BundleError("contextual encoder.json disagrees with the bundle config")
    head_model = ConvHeadModel(config.contextual_head, spec, params=_read_arrays(ctx_dir, "weights"))

    fusion_dir = root / "fusion"
    active_obj = _read_json(fusion_dir / "active.json")
    fusion_model = FusionModel(
        config.fusion,
        params=_read_arrays(fusion_dir, "weights"),
        active=active_obj["active"],
    )

    projections = {}
    for name in STREAM_ORDER:
        arrays = _read_arrays(fusion_dir, f"projection_{name.lower()}")
        meta = manifest["projections"][name]
        projections[name] = SvdProjection(
            stream_id=name,
            k=meta["k"],
            train_mean=arrays["train_mean"],
            components=arrays["components"],
            singular_values=arrays["singular_values"],
            passthrough=meta["passthrough"],
        )

    threshold = _read_json(root / "threshold")["threshold"]
    if threshold != config.fusion.threshold:
        raise BundleError(
            f"threshold file ({threshold}) disagrees with bundle config "
            f"({config.fusion.threshold})"
        )

    return TrainedPipeline(
        config=config,
        gazetteer=gazetteer,
        lexicon=lexicon,
        semantic_vocab=semantic_vocab,
        semantic_forest=semantic_forest,
        structural_vocab=structural_vocab,
        structural_forest=structural_forest,
        charset=charset,
        char_model=char_model,
        encoder_spec=spec,
        head_model=head_model,
        projections=projections,
        fusion_model=fusion_model,
    )
