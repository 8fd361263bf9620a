"""Type hierarchy, mention records and batch assembly.

Types are slash-delimited paths (``/person/artist``); the parent of a type is
the path with its last component removed. The order in which types are
declared fixes the column order of every K-dimensional array in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "TypeHierarchy",
    "MentionSample",
    "Batch",
    "terminal_types",
    "is_clean",
    "build_batch",
    "pack_samples",
]


def _parent_path(path):
    head, _, _ = path.rstrip("/").rpartition("/")
    return head or None


class TypeHierarchy:
    """Rooted forest over K type labels.

    Parameters
    ----------
    types : sequence of str
        Type identifiers in index order.
    parent : sequence of int or None
        ``parent[i]`` is the index of the parent of type ``i``, or ``None``
        for a root.
    """

    def __init__(self, types: Sequence[str], parent: Sequence[Optional[int]]):
        types = list(types)
        parent = list(parent)
        if len(types) != len(parent):
            raise ValidationError("types and parent must have the same length")
        if len(set(types)) != len(types):
            dupes = sorted({t for t in types if types.count(t) > 1})
            raise ValidationError(f"duplicate type identifiers: {dupes}")
        K = len(types)
        for i, p in enumerate(parent):
            if p is not None and (not 0 <= p < K or p == i):
                raise ValidationError(f"type {types[i]!r} has invalid parent {p!r}")
        # walk up from every node; a path longer than K means a cycle
        for i in range(K):
            seen, j = 0, i
            while parent[j] is not None:
                j = parent[j]
                seen += 1
                if seen > K:
                    raise ValidationError(f"parent links contain a cycle through {types[i]!r}")

        self.types = tuple(types)
        self.parent = tuple(parent)
        self._index = {t: i for i, t in enumerate(types)}
        children = [set() for _ in range(K)]
        for i, p in enumerate(parent):
            if p is not None:
                children[p].add(i)
        self._children = tuple(frozenset(c) for c in children)
        self._ancestors = tuple(self._walk_up(i) for i in range(K))

    def _walk_up(self, i):
        out = []
        p = self.parent[i]
        while p is not None:
            out.append(p)
            p = self.parent[p]
        return tuple(out)

    @classmethod
    def from_paths(cls, paths: Iterable[str]) -> "TypeHierarchy":
        """Build a hierarchy whose parent links are implied by path prefixes.

        Every parent path must itself appear in ``paths``.
        """
        paths = list(paths)
        index = {}
        parent = []
        for lineno, path in enumerate(paths, start=1):
            if not path.startswith("/") or path == "/" or "//" in path or path.endswith("/"):
                raise ValidationError(f"line {lineno}: malformed type path {path!r}")
            if path in index:
                raise ValidationError(f"line {lineno}: duplicate type path {path!r}")
            pp = _parent_path(path)
            if pp is not None and pp not in index:
                raise ValidationError(
                    f"line {lineno}: parent {pp!r} of {path!r} must be declared before it"
                )
            index[path] = len(parent)
            parent.append(None if pp is None else index[pp])
        return cls(paths, parent)

    @classmethod
    def read(cls, path) -> "TypeHierarchy":
        """Read a hierarchy file: one type path per line, UTF-8."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_paths(line.strip() for line in lines if line.strip())

    def write(self, path):
        Path(path).write_text("".join(t + "\n" for t in self.types), encoding="utf-8")

    def __len__(self):
        return len(self.types)

    def __eq__(self, other):
        if not isinstance(other, TypeHierarchy):
            return NotImplemented
        return self.types == other.types and self.parent == other.parent

    def __hash__(self):
        return hash((self.types, self.parent))

    def __repr__(self):
        return f"TypeHierarchy(K={len(self)})"

    @property
    def K(self) -> int:
        return len(self.types)

    def index(self, type_id: str) -> int:
        try:
            return self._index[type_id]
        except KeyError:
            raise ValidationError(f"unknown type {type_id!r}") from None

    def name(self, i: int) -> str:
        self.check_index(i)
        return self.types[i]

    def check_index(self, i):
        if not isinstance(i, (int, np.integer)) or not (0 <= i < len(self.types)):
            raise ValidationError(f"invalid type index {i!r} for hierarchy with K={len(self)}")

    def children(self, i: int) -> frozenset:
        return self._children[i]

    def ancestors(self, i: int) -> tuple:
        """Ancestors of ``i`` from its parent up to the root."""
        self.check_index(i)
        return self._ancestors[i]

    def path(self, i: int) -> frozenset:
        """``{i}`` together with all of its ancestors."""
        return frozenset((i,) + self.ancestors(i))

    def depth(self, i: int) -> int:
        return len(self.ancestors(i)) + 1

    def leaves(self) -> list:
        return [i for i in range(len(self)) if not self._children[i]]

    def closure(self, types: Iterable[int]) -> frozenset:
        out = set()
        for t in types:
            out |= self.path(t)
        return frozenset(out)


def terminal_types(h: TypeHierarchy, candidates) -> frozenset:
    """Return the deepest type of every candidate type path.

    A member of ``candidates`` is terminal when none of its children is also
    a candidate. ``candidates`` must be non-empty and ancestor-closed.

    >>> h = TypeHierarchy.from_paths(["/person", "/person/artist", "/person/teacher"])
    >>> sorted(h.name(t) for t in terminal_types(h, {0, 1, 2}))
    ['/person/artist', '/person/teacher']
    """
    cand = frozenset(candidates)
    if not cand:
        raise ValidationError("candidate set is empty")
    for t in cand:
        h.check_index(t)
    for t in cand:
        missing = [a for a in h.ancestors(t) if a not in cand]
        if missing:
            raise ValidationError(
                f"candidate set is not ancestor-closed: {h.types[t]!r} lacks "
                f"{[h.types[a] for a in missing]}"
            )
    return frozenset(t for t in cand if not (h.children(t) & cand))


def is_clean(h: TypeHierarchy, s: "MentionSample") -> bool:
    """True iff the sample's candidates form a single type path."""
    return len(terminal_types(h, s.candidates)) == 1


def _as_vectors(vecs, what):
    try:
        arr = np.asarray(vecs, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be a list of equal-length numeric vectors") from None
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{what} must be a non-empty list of equal-length vectors")
    return arr


@dataclass(frozen=True, eq=False)
class MentionSample:
    """One mention: token vectors of the span and its context window.

    ``candidates`` is the ancestor-closed distant-supervision label set;
    ``gold`` is only used for evaluation.
    """

    id: str
    mention_vecs: np.ndarray
    context_vecs: np.ndarray
    candidates: frozenset
    gold: Optional[int] = None
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "mention_vecs", _as_vectors(self.mention_vecs, "mention_vecs"))
        object.__setattr__(self, "context_vecs", _as_vectors(self.context_vecs, "context_vecs"))
        object.__setattr__(self, "candidates", frozenset(int(c) for c in self.candidates))
        if not self.candidates:
            raise ValidationError(f"sample {self.id!r}: candidates must be non-empty")
        if self.gold is not None:
            object.__setattr__(self, "gold", int(self.gold))

    @property
    def d_w(self) -> int:
        return self.mention_vecs.shape[1]

    @property
    def d_h(self) -> int:
        return self.context_vecs.shape[1]

    def validate(self, h: TypeHierarchy):
        """Check candidates (and gold) against ``h``; returns the terminal set."""
        try:
            leaves = terminal_types(h, self.candidates)
        except ValidationError as exc:
            raise ValidationError(f"sample {self.id!r}: {exc}") from None
        if self.gold is not None:
            h.check_index(self.gold)
        return leaves


@dataclass(eq=False)
class Batch:
    """B mentions packed into arrays.

    Context windows are right-padded to the longest one; ``context_mask``
    marks real tokens. ``Z`` holds embeddings once the batch is encoded.
    """

    mention_mean: np.ndarray  # (B, d_w)
    context: np.ndarray  # (B, L, d_h)
    context_mask: np.ndarray  # (B, L) bool
    M: np.ndarray  # (B, K) terminal-type indicator
    clean_flags: np.ndarray  # (B,) bool
    gold: np.ndarray  # (B,) int, -1 when unknown
    ids: list = field(default_factory=list)
    Z: Optional[np.ndarray] = None

    def __len__(self):
        return self.M.shape[0]

    @property
    def B(self) -> int:
        return self.M.shape[0]

    @property
    def K(self) -> int:
        return self.M.shape[1]

    @property
    def d_in(self) -> int:
        return self.mention_mean.shape[1] + self.context.shape[2]

    def take(self, idx) -> "Batch":
        """Sub-batch of rows ``idx`` (in that order)."""
        idx = np.asarray(idx, dtype=np.intp)
        lengths = self.context_mask[idx].sum(axis=1)
        L = int(lengths.max()) if len(idx) else 0
        return Batch(
            mention_mean=self.mention_mean[idx],
            context=self.context[idx, :L],
            context_mask=self.context_mask[idx, :L],
            M=self.M[idx],
            clean_flags=self.clean_flags[idx],
            gold=self.gold[idx],
            ids=[self.ids[i] for i in idx] if self.ids else [],
            Z=None if self.Z is None else self.Z[idx],
        )


def pack_samples(h: TypeHierarchy, samples: Sequence[MentionSample], d_z: int = 0) -> Batch:
    """Validate ``samples`` against ``h`` and pack them into a :class:`Batch`.

    No size restriction; :func:`build_batch` adds the B >= 2 requirement.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("no samples to pack")
    d_w, d_h = samples[0].d_w, samples[0].d_h
    B, K = len(samples), len(h)
    L = max(s.context_vecs.shape[0] for s in samples)
    mention_mean = np.empty((B, d_w))
    context = np.zeros((B, L, d_h))
    mask = np.zeros((B, L), dtype=bool)
    M = np.zeros((B, K))
    gold = np.full(B, -1, dtype=np.intp)
    for i, s in enumerate(samples):
        if s.d_w != d_w or s.d_h != d_h:
            raise ValidationError(
                f"sample {s.id!r}: dimensions (d_w={s.d_w}, d_h={s.d_h}) differ from "
                f"(d_w={d_w}, d_h={d_h})"
            )
        leaves = s.validate(h)
        mention_mean[i] = s.mention_vecs.mean(axis=0)
        n = s.context_vecs.shape[0]
        context[i, :n] = s.context_vecs
        mask[i, :n] = True
        M[i, sorted(leaves)] = 1.0
        if s.gold is not None:
            gold[i] = s.gold
    return Batch(
        mention_mean=mention_mean,
        context=context,
        context_mask=mask,
        M=M,
        clean_flags=M.sum(axis=1) == 1,
        gold=gold,
        ids=[s.id for s in samples],
        Z=np.zeros((B, d_z)),
    )


def build_batch(h: TypeHierarchy, samples: Sequence[MentionSample], d_z: int = 0) -> Batch:
    """Assemble a training batch: indicator mask, clean flags, empty ``Z``."""
    if len(samples) < 2:
        raise ValidationError(f"a batch needs at least 2 samples, got {len(samples)}")
    return pack_samples(h, samples, d_z=d_z)

