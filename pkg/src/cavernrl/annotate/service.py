"""The annotation service: candidate selection, batching, retries, dedup.

Binary mode pulls candidate captions from a bounded LIFO queue (newest policy
data first) and never sends the same caption to the backend twice in a run:
dedup is against the store, the pending queue, and an annotated-ever registry
(a caption whose annotation was later discarded, e.g. by subsampling, still
counts as annotated and is not re-queried). Ranking mode samples caption
pairs uniformly from the caption list instead; pairs are not deduplicated.

The worker thread owns all backend I/O. Completed records go to an internal
results list that the feedback path drains; nothing here ever blocks the
learner. A transport-failed batch is retried once, then dropped with a
metric; an unparseable response is retried once per item, then dropped with
a metric.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import prompts
from .backends import Backend, BackendError
from .store import AnnotationStore, CandidateQueue, CaptionList


@dataclass
class ServiceMetrics:
    requests_sent: int = 0
    batches_completed: int = 0
    batches_dropped: int = 0
    parse_retries: int = 0
    parse_drops: int = 0
    annotations_received: int = 0
    backend_errors: int = 0


def annotate_batch(items: list, backend: Backend, mode: str = "binary",
                   goal: str = "default",
                   metrics: ServiceMetrics | None = None) -> list:
    """Annotate a batch of captions (binary) or caption pairs (ranking).

    Returns (caption, label) or (first, second, label) tuples in completion
    order. Raises BackendError if the batch transport fails; per-item parse
    failures are retried once against the backend and then dropped.
    """
    metrics = metrics if metrics is not None else ServiceMetrics()
    if mode == "binary":
        batch = [prompts.build_binary_prompt(c, goal) for c in items]
    elif mode == "ranking":
        batch = [prompts.build_ranking_prompt(a, b) for a, b in items]
    else:
        raise ValueError(f"unknown annotation mode {mode!r}")
    responses = backend.complete_many(batch)
    metrics.requests_sent += len(batch)

    out = []
    for item, (system, user), response in zip(items, batch, responses):
        label = _parse_with_retry(backend, system, user, response, mode, metrics)
        if label is _DROPPED:
            continue
        if mode == "binary":
            out.append((item, label))
        else:
            out.append((item[0], item[1], label))
        metrics.annotations_received += 1
    return out


_DROPPED = object()


def _parse_with_retry(backend, system, user, response, mode, metrics):
    parse = prompts.parse_binary_response if mode == "binary" \
        else prompts.parse_ranking_response
    try:
        return parse(response)
    except prompts.ParseError:
        metrics.parse_retries += 1
    try:
        return parse(backend.complete(system, user))
    except (prompts.ParseError, BackendError):
        metrics.parse_drops += 1
        return _DROPPED


def subsample_annotations(records: list, rate: float,
                          rng: np.random.Generator) -> list:
    """Keep each record independently with probability rate. Applied after
    annotation, before store insertion: a dropped record's caption has still
    been annotated (and is never re-queried), it just never reaches the
    store."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"subsample rate must be in (0, 1], got {rate}")
    if rate >= 1.0:
        return list(records)
    keep = rng.random(len(records)) < rate
    return [r for r, k in zip(records, keep) if k]


class AnnotationService:
    """Owns the candidate structures, the dedup registry, and (in threaded
    mode) the worker thread. See the module docstring for the contract."""

    def __init__(self, backend: Backend, mode: str = "binary",
                 goal: str = "default", batch_size: int = 100,
                 queue_capacity: int = 10_000, list_capacity: int = 65_536,
                 dedup_pairs_list: bool = False, seed: int = 0,
                 min_batch: int = 1):
        if mode not in ("binary", "ranking"):
            raise ValueError(f"unknown annotation mode {mode!r}")
        self.backend = backend
        self.mode = mode
        self.goal = goal
        self.batch_size = batch_size
        self.min_batch = min_batch
        self.queue = CandidateQueue(queue_capacity)
        self.captions = CaptionList(list_capacity, dedup=dedup_pairs_list)
        self.metrics = ServiceMetrics()
        self._annotated: set[str] = set()
        self._results: list = []
        self._results_lock = threading.Lock()
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA770]))
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._retry_batch: list | None = None

    # -- learner-facing (never blocks on backend I/O) ----------------------

    def offer(self, caption: str, store: AnnotationStore | None = None) -> bool:
        """Propose a caption for annotation. In binary mode it is enqueued
        unless already stored, pending, or annotated before; in ranking mode
        it is appended to the caption list."""
        if self.mode == "ranking":
            self.captions.append(caption)
            return True
        if caption in self._annotated:
            return False
        if store is not None and caption in store:
            return False
        return self.queue.push(caption)

    def drain_results(self) -> list:
        """Completed annotation tuples since the last drain (feedback path)."""
        with self._results_lock:
            out = self._results
            self._results = []
        return out

    def annotated_count(self) -> int:
        return len(self._annotated)

    # -- annotation work ---------------------------------------------------

    def _next_batch(self):
        if self._retry_batch is not None:
            batch, self._retry_batch = self._retry_batch, None
            return batch, True
        if self.mode == "binary":
            if len(self.queue) < self.min_batch:
                return [], False
            return self.queue.pop_batch(self.batch_size), False
        return self.captions.sample_pairs(self.batch_size, self._rng), False

    def process_pending(self, max_batches: int | None = None) -> int:
        """Annotate pending candidates synchronously on the caller's thread
        (deterministic single-threaded mode). Returns batches completed."""
        done = 0
        while max_batches is None or done < max_batches:
            batch, is_retry = self._next_batch()
            if not batch:
                break
            if not self._run_batch(batch, is_retry):
                break
            done += 1
            if self.mode == "ranking":
                # Pair sampling never exhausts; one batch per call is enough.
                break
        return done

    def _run_batch(self, batch: list, is_retry: bool) -> bool:
        try:
            results = annotate_batch(batch, self.backend, self.mode, self.goal,
                                     self.metrics)
        except BackendError:
            self.metrics.backend_errors += 1
            if is_retry:
                self.metrics.batches_dropped += 1
            else:
                self._retry_batch = batch
            return False
        if self.mode == "binary":
            self._annotated.update(c for c, _ in results)
        with self._results_lock:
            self._results.extend(results)
        self.metrics.batches_completed += 1
        return True

    # -- worker thread -----------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._worker, daemon=True,
                                        name="annotation-worker")
        self._thread.start()

    def _worker(self) -> None:
        while not self._stop.is_set():
            batch, is_retry = self._next_batch()
            if not batch:
                time.sleep(0.005)
                continue
            if not self._run_batch(batch, is_retry):
                time.sleep(0.05)  # back off instead of hammering a down backend

    def close(self) -> None:
        self._stop.set()
        if self._thread is not None:
            # A worker blocked inside a stalled backend cannot be joined;
            # it is a daemon thread and dies with the process.
            self._thread.join(timeout=1.0)
            self._thread = None
