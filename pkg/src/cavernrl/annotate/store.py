"""Annotation storage and candidate queues.

Concurrency contract: one writer (the feedback path), many readers (the
learner). Records are immutable and inserted with single atomic dict/list
operations, so readers never observe partial records; lookups and snapshots
are safe without holding the writer's lock. The candidate queue is shared
between the learner (push) and the annotation worker (pop) and is fully
locked; it never blocks the pusher, evicting the oldest entry when full.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AnnotationRecord:
    caption: str
    label: int  # 0 or 1
    seq: int


@dataclass(frozen=True)
class PreferenceRecord:
    first: str
    second: str
    label: int | None  # 1, 2 or None (no preference)
    seq: int


class AnnotationStore:
    """Deduplicating caption -> binary label store."""

    def __init__(self):
        self._records: dict[str, AnnotationRecord] = {}
        self._seq = 0

    def insert(self, caption: str, label: int) -> AnnotationRecord:
        """Idempotent: re-inserting a stored caption never changes its label."""
        existing = self._records.get(caption)
        if existing is not None:
            return existing
        if label not in (0, 1):
            raise ValueError(f"binary label must be 0 or 1, got {label!r}")
        rec = AnnotationRecord(caption, label, self._seq)
        self._seq += 1
        self._records[caption] = rec
        return rec

    def lookup(self, caption: str) -> int | None:
        rec = self._records.get(caption)
        return rec.label if rec else None

    def __contains__(self, caption: str) -> bool:
        return caption in self._records

    def __len__(self) -> int:
        return len(self._records)

    def snapshot(self) -> list[AnnotationRecord]:
        """Records in insertion order; safe to call from the learner while
        the feedback path inserts."""
        return list(self._records.values())

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for rec in self.snapshot():
                f.write(json.dumps({"caption": rec.caption, "label": rec.label,
                                    "seq": rec.seq}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationStore":
        store = cls()
        with open(path) as f:
            for line_no, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    store.insert(obj["caption"], int(obj["label"]))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise ValueError(f"{path}:{line_no}: bad store record: {e}") from e
        return store


class PreferenceStore:
    """Append-only list of preference records (not deduplicated; the same
    pair may legitimately recur with fresh labels)."""

    def __init__(self):
        self._records: list[PreferenceRecord] = []

    def insert(self, first: str, second: str, label: int | None) -> PreferenceRecord:
        if label not in (1, 2, None):
            raise ValueError(f"preference label must be 1, 2 or None, got {label!r}")
        rec = PreferenceRecord(first, second, label, len(self._records))
        self._records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self._records)

    def snapshot(self) -> list[PreferenceRecord]:
        return list(self._records)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for rec in self.snapshot():
                f.write(json.dumps({"first": rec.first, "second": rec.second,
                                    "label": rec.label, "seq": rec.seq}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PreferenceStore":
        store = cls()
        with open(path) as f:
            for line_no, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    label = obj["label"]
                    store.insert(obj["first"], obj["second"],
                                 None if label is None else int(label))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise ValueError(f"{path}:{line_no}: bad preference record: {e}") from e
        return store


class CandidateQueue:
    """Bounded LIFO of pending annotation candidates.

    Newest candidates are served first; when full, the *oldest* entry is
    evicted so a slow annotator always works on fresh policy data. Duplicate
    pending items are rejected. Thread-safe.
    """

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque[str] = deque()
        self._pending: set[str] = set()
        self._lock = threading.Lock()
        self.evicted = 0

    def push(self, item: str) -> bool:
        """Returns False if the item is already pending."""
        with self._lock:
            if item in self._pending:
                return False
            if len(self._items) >= self.capacity:
                oldest = self._items.popleft()
                self._pending.discard(oldest)
                self.evicted += 1
            self._items.append(item)
            self._pending.add(item)
            return True

    def pop_batch(self, n: int) -> list[str]:
        """Up to n items, newest first."""
        with self._lock:
            out = []
            while self._items and len(out) < n:
                item = self._items.pop()
                self._pending.discard(item)
                out.append(item)
            return out

    def __contains__(self, item: str) -> bool:
        with self._lock:
            return item in self._pending

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class CaptionList:
    """Bounded ring of captions for ranking-mode pair sampling.

    By default the list is *not* deduplicated: frequent captions occupy many
    slots and are proportionally more likely to appear in sampled pairs. The
    dedup toggle (keep each caption once) exists to reproduce the failure
    mode where frequent captions are starved of comparisons.
    """

    def __init__(self, capacity: int = 65_536, dedup: bool = False):
        self.capacity = capacity
        self.dedup = dedup
        self._items: list[str] = []
        self._next = 0
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    def append(self, caption: str) -> None:
        with self._lock:
            if self.dedup:
                if caption in self._seen:
                    return
                self._seen.add(caption)
            if len(self._items) < self.capacity:
                self._items.append(caption)
            else:
                if self.dedup:
                    self._seen.discard(self._items[self._next])
                self._items[self._next] = caption
                self._next = (self._next + 1) % self.capacity

    def extend(self, captions) -> None:
        for c in captions:
            self.append(c)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def sample_pairs(self, n: int, rng: np.random.Generator) -> list[tuple[str, str]]:
        """n pairs drawn uniformly (with replacement) from the list; the two
        sides of a pair are always distinct slots."""
        with self._lock:
            items = list(self._items)
        if len(items) < 2:
            return []
        out = []
        for _ in range(n):
            i = int(rng.integers(0, len(items)))
            j = int(rng.integers(0, len(items) - 1))
            if j >= i:
                j += 1
            out.append((items[i], items[j]))
        return out
