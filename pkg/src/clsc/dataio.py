"""File formats: datasets, checkpoints, result records and config files.

Dataset file (``.jsonl``), UTF-8, one JSON object per line::

    {"schema": "clsc-dataset", "version": 1, "d_w": 8, "d_h": 8, "types": ["/a", "/a/x", ...], "meta": {...}}
    {"id": "s0", "split": "train", "mention_vecs": [[...]], "context_vecs": [[...]], "candidates": ["/a", "/a/x"], "gold": "/a/x"}
    ...

The header may carry ``"hierarchy_file"`` (a hierarchy file path relative to
the dataset) instead of ``"types"``. Records are written with compact
separators and shortest round-trip float formatting, so ``save(load(f))``
reproduces a file written by :func:`save_dataset` byte for byte.

Checkpoint file (``.json``)::

    {"format": "clsc-checkpoint", "version": 1, "types": [...], "config": {...},
     "tensors": {"attn_w": {"shape": [8], "data": [...]}, ...}}

Result records are flat mappings written either as JSON lines or as a
tab-separated table with a header row.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .exceptions import ValidationError
from .hierarchy import MentionSample, TypeHierarchy, is_clean
from .model import ModelParams

__all__ = [
    "DATASET_SCHEMA",
    "DATASET_VERSION",
    "CHECKPOINT_VERSION",
    "Dataset",
    "load_dataset",
    "save_dataset",
    "dumps_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "write_records",
    "load_config",
]

DATASET_SCHEMA = "clsc-dataset"
DATASET_VERSION = 1
CHECKPOINT_FORMAT = "clsc-checkpoint"
CHECKPOINT_VERSION = 1


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass
class Dataset:
    hierarchy: TypeHierarchy
    samples: List[MentionSample]
    d_w: int
    d_h: int
    meta: Dict = field(default_factory=dict)

    def split(self, name: str) -> List[MentionSample]:
        return [s for s in self.samples if s.split == name]

    def subset(self, samples) -> "Dataset":
        return Dataset(self.hierarchy, list(samples), self.d_w, self.d_h, dict(self.meta))

    def clean_mask(self, samples=None) -> np.ndarray:
        samples = self.samples if samples is None else samples
        return np.array([is_clean(self.hierarchy, s) for s in samples], dtype=bool)


def _record(h: TypeHierarchy, s: MentionSample) -> dict:
    rec = {
        "id": s.id,
        "split": s.split,
        "mention_vecs": s.mention_vecs.tolist(),
        "context_vecs": s.context_vecs.tolist(),
        "candidates": [h.types[t] for t in sorted(s.candidates)],
    }
    if s.gold is not None:
        rec["gold"] = h.types[s.gold]
    return rec


def dumps_dataset(ds: Dataset) -> str:
    header = {
        "schema": DATASET_SCHEMA,
        "version": DATASET_VERSION,
        "d_w": ds.d_w,
        "d_h": ds.d_h,
        "types": list(ds.hierarchy.types),
        "meta": ds.meta,
    }
    lines = [_dumps(header)]
    lines.extend(_dumps(_record(ds.hierarchy, s)) for s in ds.samples)
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path):
    Path(path).write_text(dumps_dataset(ds), encoding="utf-8")


def _parse_vectors(value, dim, what, lineno):
    if not isinstance(value, list) or not value:
        raise ValidationError(f"line {lineno}: {what} must be a non-empty list of vectors")
    for v in value:
        if not isinstance(v, list) or len(v) != dim:
            raise ValidationError(f"line {lineno}: every {what} entry must have length {dim}")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ValidationError(f"line {lineno}: {what} entries must be numbers")
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"line {lineno}: {what} contains non-finite values")
    return arr


def _parse_record(obj, h, d_w, d_h, lineno, seen_ids):
    if not isinstance(obj, dict):
        raise ValidationError(f"line {lineno}: record must be a JSON object")
    for key in ("id", "mention_vecs", "context_vecs", "candidates"):
        if key not in obj:
            raise ValidationError(f"line {lineno}: missing field {key!r}")
    sid = str(obj["id"])
    if sid in seen_ids:
        raise ValidationError(f"line {lineno}: duplicate sample id {sid!r}")
    seen_ids.add(sid)
    mention = _parse_vectors(obj["mention_vecs"], d_w, "mention_vecs", lineno)
    context = _parse_vectors(obj["context_vecs"], d_h, "context_vecs", lineno)
    cands = obj["candidates"]
    if not isinstance(cands, list) or not cands:
        raise ValidationError(f"line {lineno}: candidates must be a non-empty list of type paths")
    try:
        cand_idx = frozenset(h.index(c) for c in cands)
        gold = None if obj.get("gold") is None else h.index(obj["gold"])
        sample = MentionSample(
            id=sid,
            mention_vecs=mention,
            context_vecs=context,
            candidates=cand_idx,
            gold=gold,
            split=str(obj.get("split", "train")),
        )
        leaves = sample.validate(h)
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None
    if gold is not None and gold not in leaves:
        raise ValidationError(f"line {lineno}: gold {obj['gold']!r} is not a terminal candidate type")
    return sample


def load_dataset(path) -> Dataset:
    """Read and fully validate a dataset file; errors name the offending line."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line 1: malformed header ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("schema") != DATASET_SCHEMA:
        raise ValidationError(f"line 1: not a {DATASET_SCHEMA} header")
    if header.get("version") != DATASET_VERSION:
        raise ValidationError(f"line 1: unsupported dataset version {header.get('version')!r}")
    d_w, d_h = header.get("d_w"), header.get("d_h")
    if not (isinstance(d_w, int) and isinstance(d_h, int) and d_w > 0 and d_h > 0):
        raise ValidationError("line 1: d_w and d_h must be positive integers")
    if "types" in header:
        h = TypeHierarchy.from_paths(header["types"])
    elif "hierarchy_file" in header:
        h = TypeHierarchy.read(path.parent / header["hierarchy_file"])
    else:
        raise ValidationError("line 1: header needs 'types' or 'hierarchy_file'")

    samples = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: malformed record ({exc.msg})") from None
        samples.append(_parse_record(obj, h, d_w, d_h, lineno, seen))
    return Dataset(h, samples, d_w, d_h, meta=header.get("meta", {}))


def save_checkpoint(params: ModelParams, hierarchy: TypeHierarchy, path, config: Optional[dict] = None):
    tensors = {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()} for name, arr in params.arrays().items()
    }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "types": list(hierarchy.types),
        "config": config or {},
        "tensors": tensors,
    }
    Path(path).write_text(_dumps(doc) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Returns ``(params, hierarchy, config)``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed checkpoint ({exc.msg})") from None
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: not a version-{CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
    arrays = {}
    for name, t in doc["tensors"].items():
        data = np.array(t["data"], dtype=np.float64)
        if data.size != int(np.prod(t["shape"])):
            raise ValidationError(f"{path}: tensor {name} does not match its shape header {t['shape']}")
        arrays[name] = data.reshape(t["shape"])
    return ModelParams.from_arrays(arrays), TypeHierarchy.from_paths(doc["types"]), doc.get("config", {})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records: Iterable[dict], out=None, fmt: str = "jsonl"):
    """Write flat result rows to ``out`` (path, file object, or stdout)."""
    records = list(records)
    buf = io.StringIO()
    if fmt == "jsonl":
        for r in records:
            buf.write(_dumps(r) + "\n")
    elif fmt == "tsv":
        keys = []
        for r in records:
            keys.extend(k for k in r if k not in keys)
        writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
        writer.writerow(keys)
        for r in records:
            writer.writerow([_fmt(r.get(k)) for k in keys])
    else:
        raise ValidationError(f"unknown record format {fmt!r}")
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    elif hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    return text


def load_config(path) -> dict:
    """Read a JSON config file with optional ``"train"`` and ``"synth"`` sections."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed config ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    unknown = set(doc) - {"train", "synth"}
    if unknown:
        raise ValidationError(f"{path}: unknown config sections {sorted(unknown)}")
    return doc
