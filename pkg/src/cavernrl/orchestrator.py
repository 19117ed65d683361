"""Training orchestration.

Two execution modes share one learner:

* deterministic (default): everything runs on the calling thread in a fixed
  order — collect, synthesize intrinsic rewards, policy update, annotate
  pending candidates inline, apply feedback, train reward models. Two runs
  with the same config produce byte-identical metrics files. ``env_sps`` is
  reported as 0.0 in this mode, since wall-clock throughput is not a
  deterministic quantity.

* threaded: a rollout thread collects experience against published policy
  snapshots, the annotation worker owns all backend I/O, and the learner
  (calling thread) trains, applies feedback, and discards rollouts older
  than the staleness bound. Nothing on the learner or rollout path ever
  waits on the annotation backend.

Intrinsic synthesis happens on the learner from the captions and episodic
occurrence counts recorded by the collector: stored-label lookup
(``retrieval``), thresholded classifier probability (``classification``),
z-scored ranker output (``ranking``), or goal-similarity of hashed
bag-of-words embeddings (``ellm_bow``). Each raw value is divided by
count**z before being scaled by beta and added to the extrinsic reward.
"""

from __future__ import annotations

import json
import logging
import queue as queue_mod
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .annotate.backends import Backend, HttpAnnotator, MockAnnotator
from .annotate.prompts import ELLM_GOAL_STRINGS
from .annotate.service import AnnotationService, subsample_annotations
from .annotate.store import AnnotationStore, PreferenceStore
from .checkpoint import pack_mlp, save_checkpoint
from .config import RunConfig, clone_config, dump_config, validate_config
from .env.caverns import CavernsEnv, N_ACTIONS, make_task
from .metrics import MetricsWriter
from .nn import Adam, featurize_captions
from .ppo import (TransitionBatch, UpdateStats, compute_gae, enforce_staleness,
                  make_policy, ppo_update)
from .reward_models import (make_reward_model, make_reward_optimizer,
                            score_captions, train_classifier_step,
                            train_ranker_step)
from .rewards import (RunningStats, bow_embed, classification_reward, cosine,
                      ranking_reward)
from .rollouts import FeatureExtractor, RolloutBatch, RolloutCollector

log = logging.getLogger("cavernrl")

BINARY_MECHANISMS = ("retrieval", "classification")
ANNOTATED_MECHANISMS = ("retrieval", "classification", "ranking")


def warmup_gate(store_size: int, warmup_annotations: int,
                mechanism: str = "classification") -> str:
    """Reward-model training phase. Mechanisms without a parametric model
    (retrieval, and anything outside the annotated set) are 'frozen'. With a
    model, the phase is 'burst' (several updates per incoming annotation
    batch, on the feedback path) while the store holds fewer than the warmup
    threshold, then 'continuous' (a fixed number of updates per learner
    iteration, on the training path)."""
    if mechanism not in ("classification", "ranking"):
        return "frozen"
    return "burst" if store_size < warmup_annotations else "continuous"


def make_backend(cfg: RunConfig) -> Backend:
    if cfg.annotator == "mock":
        return MockAnnotator(batch_latency=cfg.latency)
    if cfg.annotator == "http":
        return HttpAnnotator(url=cfg.url, model=cfg.model_name)
    raise ValueError(f"no backend for annotator {cfg.annotator!r}")


@dataclass
class RunResult:
    config: RunConfig
    summary: dict[str, Any]
    metrics_path: Path | None = None
    checkpoint_path: Path | None = None
    store_path: Path | None = None


@dataclass
class ThroughputReport:
    duration: float
    steps_off: int
    steps_on: int
    sps_off: float
    sps_on: float
    retention: float  # in (0, 1]
    annotations_received: int
    annotations_per_sec: float
    annotated_fraction: float  # annotations / observations, in [0, 1]

    def as_dict(self) -> dict[str, float]:
        return {
            "duration": self.duration,
            "steps_off": self.steps_off,
            "steps_on": self.steps_on,
            "sps_off": self.sps_off,
            "sps_on": self.sps_on,
            "retention": self.retention,
            "annotations_received": self.annotations_received,
            "annotations_per_sec": self.annotations_per_sec,
            "annotated_fraction": self.annotated_fraction,
        }


class Trainer:
    """One training run. Construct, then call :meth:`run`."""

    def __init__(self, cfg: RunConfig, backend: Backend | None = None):
        validate_config(cfg)
        self.cfg = cfg
        self.mechanism = cfg.reward.mechanism
        self.task = make_task(cfg.task)
        self.beta = cfg.reward.resolved_beta(self.task.kind)

        seeds = [int(np.random.SeedSequence([cfg.seed, 0xE17, i]).generate_state(1)[0])
                 for i in range(cfg.num_envs)]
        self.envs = [CavernsEnv(self.task, seed=s, params=cfg.env,
                                episode_cap=cfg.episode_cap) for s in seeds]
        self.extractor = FeatureExtractor()
        self.policy = make_policy(self.extractor.dim, N_ACTIONS, cfg.ppo,
                                  seed=cfg.seed)
        self.popt = Adam(lr=cfg.ppo.lr)
        self.collector = RolloutCollector(self.envs, self.extractor,
                                          cfg.ppo.rollout_len, seed=cfg.seed)
        self.mb_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x3B]))
        self.sub_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5B]))
        self.rm_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x4B]))

        steps_per_iter = cfg.num_envs * cfg.ppo.rollout_len
        self.rounds = max(1, -(-cfg.ppo.batch_size // steps_per_iter))
        self.log_every = max(1, cfg.metrics_interval // (self.rounds * steps_per_iter))

        # Annotation-side state per mechanism.
        self.store = AnnotationStore()
        self.prefs = PreferenceStore()
        self.reward_model = None
        self.reward_opt = None
        self.rank_stats = RunningStats()
        self.goal_vec: np.ndarray | None = None
        if self.mechanism == "classification":
            self.reward_model = make_reward_model(
                "classifier", cfg.reward.feature_dim, cfg.reward.hidden,
                seed=cfg.seed)
            self.reward_opt = make_reward_optimizer("classifier", cfg.reward_lr)
        elif self.mechanism == "ranking":
            self.reward_model = make_reward_model(
                "ranker", cfg.reward.feature_dim, cfg.reward.hidden,
                seed=cfg.seed)
            self.reward_opt = make_reward_optimizer("ranker", cfg.reward_lr)
        elif self.mechanism == "ellm_bow":
            goal = cfg.reward.goal_string or ELLM_GOAL_STRINGS[cfg.goal]
            self.goal_vec = bow_embed(goal)
        if cfg.store_path:
            if self.mechanism in BINARY_MECHANISMS:
                self.store = AnnotationStore.load(cfg.store_path)
            elif self.mechanism == "ranking":
                self.prefs = PreferenceStore.load(cfg.store_path)

        self.service: AnnotationService | None = None
        if self.mechanism in ANNOTATED_MECHANISMS and cfg.annotator != "none":
            mode = "ranking" if self.mechanism == "ranking" else "binary"
            self.service = AnnotationService(
                backend if backend is not None else make_backend(cfg),
                mode=mode, goal=cfg.goal, batch_size=cfg.annotation_batch_size,
                queue_capacity=cfg.queue_capacity,
                list_capacity=cfg.caption_list_capacity,
                dedup_pairs_list=cfg.dedup_pairs, seed=cfg.seed)

        # Progress counters and rolling windows.
        self.version = 0
        self.env_steps = 0
        self.iteration = 0
        self.episodes_done = 0
        self.burst_total = 0
        self.continuous_total = 0
        self.reward_loss_last = 0.0
        self.stale_discarded = 0
        self.rm_version = 0  # bumps on every reward-model parameter update
        self._seen_batches = 0
        self._warned_drops = False
        self.success_window: deque[dict] = deque(maxlen=cfg.success_window)
        self._interval_eps: list[dict] = []
        self._interval_stats = UpdateStats()
        self._interval_ages: list[int] = []
        self._intr_sum = 0.0
        self._intr_count = 0
        self._intr_max = 0.0
        self._intr_pos = 0

        # Output paths.
        stem = cfg.run_name or f"{self.mechanism}_{cfg.task}_s{cfg.seed}"
        self.out_dir = Path(cfg.out_dir)
        self.stem = stem
        self.metrics_path = self.out_dir / f"{stem}_metrics.csv"
        self.writer: MetricsWriter | None = None

        # Threaded-mode plumbing.
        self._stop = threading.Event()
        self._published: tuple = (self.policy, 0)
        self._rollout_q: queue_mod.Queue = queue_mod.Queue(maxsize=4)
        self._rollout_thread: threading.Thread | None = None

    # -- intrinsic synthesis -----------------------------------------------

    def _synthesize(self, rb: RolloutBatch) -> np.ndarray:
        """Composite (extrinsic + beta * normalized intrinsic) rewards for one
        rollout. Also feeds observed captions to the annotation service."""
        n, t_len = rb.ext_rewards.shape
        flat = rb.flat_captions()
        counts = rb.counts.ravel().astype(np.float64)
        raw = np.zeros(len(flat), dtype=np.float64)
        z = self.cfg.reward.z
        mech = self.mechanism
        stamp = self.rm_version  # reward model must be stable while in use

        if mech != "none":
            uniq = [c for c in dict.fromkeys(flat) if c]
            if mech == "retrieval":
                for i, c in enumerate(flat):
                    if c:
                        raw[i] = 1.0 if self.store.lookup(c) == 1 else 0.0
                if self.service is not None:
                    for c in uniq:
                        self.service.offer(c, self.store)
                normalized = raw / counts ** z
            elif mech == "classification":
                if uniq:
                    feats = featurize_captions(uniq, self.cfg.reward.feature_dim)
                    vals = classification_reward(feats, self.reward_model,
                                                 self.cfg.reward.eta,
                                                 self.cfg.reward.real_valued)
                    table = dict(zip(uniq, vals))
                    for i, c in enumerate(flat):
                        if c:
                            raw[i] = table[c]
                if self.service is not None:
                    for c in uniq:
                        self.service.offer(c, self.store)
                normalized = raw / counts ** z
            elif mech == "ranking":
                if uniq:
                    scores = dict(zip(uniq, score_captions(
                        self.reward_model, uniq, self.cfg.reward.feature_dim)))
                    for i, c in enumerate(flat):
                        if c:
                            raw[i] = ranking_reward(float(scores[c]),
                                                    self.rank_stats,
                                                    self.cfg.reward.nu)
                if self.service is not None:
                    for c in (c for c in flat if c):
                        self.service.offer(c)
                normalized = raw / counts ** z
            elif mech == "ellm_bow":
                table = {c: cosine(bow_embed(c), self.goal_vec) for c in uniq}
                for i, c in enumerate(flat):
                    if c:
                        raw[i] = table[c]
                normalized = raw / counts ** z
            else:  # pragma: no cover - guarded by config validation
                raise ValueError(f"unknown mechanism {mech!r}")
        else:
            normalized = raw

        assert self.rm_version == stamp, \
            "reward model mutated during an in-flight reward computation"
        scaled = self.beta * normalized
        self._intr_sum += float(scaled.sum())
        self._intr_count += scaled.size
        if scaled.size:
            self._intr_max = max(self._intr_max, float(scaled.max()))
            self._intr_pos += int((scaled > 0).sum())
        return rb.ext_rewards + scaled.reshape(n, t_len)

    # -- feedback path -----------------------------------------------------

    def _apply_feedback(self) -> None:
        if self.service is None:
            return
        if not self.cfg.threaded:
            self.service.process_pending()
        results = self.service.drain_results()
        if results:
            kept = subsample_annotations(results, self.cfg.subsample_rate,
                                         self.sub_rng)
            if self.mechanism in BINARY_MECHANISMS:
                for caption, label in kept:
                    self.store.insert(caption, label)
            else:
                for first, second, label in kept:
                    self.prefs.insert(first, second, label)
        if (self.service.metrics.batches_dropped and not self._warned_drops):
            self._warned_drops = True
            log.warning("annotation backend failing; batches are being "
                        "dropped (training continues)")
        new_batches = self.service.metrics.batches_completed - self._seen_batches
        self._seen_batches += new_batches
        if new_batches and self.reward_model is not None:
            if self._gate() == "burst":
                for _ in range(new_batches * self.cfg.burst_updates):
                    if self._reward_update():
                        self.burst_total += 1

    def _store_size(self) -> int:
        return len(self.prefs) if self.mechanism == "ranking" else len(self.store)

    def _gate(self) -> str:
        return warmup_gate(self._store_size(), self.cfg.warmup_annotations,
                           self.mechanism)

    def _continuous_updates(self) -> None:
        if self.reward_model is None:
            return
        for _ in range(self.cfg.reward_updates_per_iter):
            if self._gate() != "continuous":
                return
            assert self._store_size() >= self.cfg.warmup_annotations
            if self._reward_update():
                self.continuous_total += 1

    def _reward_update(self) -> bool:
        if self.mechanism == "classification":
            loss = train_classifier_step(
                self.reward_model, self.reward_opt, self.store.snapshot(),
                self.rm_rng, self.cfg.reward_batch, self.cfg.reward.feature_dim)
        elif self.mechanism == "ranking":
            loss = train_ranker_step(
                self.reward_model, self.reward_opt, self.prefs.snapshot(),
                self.rm_rng, self.cfg.reward_batch, self.cfg.reward.feature_dim)
        else:
            return False
        if loss is None:
            return False
        self.rm_version += 1
        self.reward_loss_last = float(loss)
        return True

    # -- learner -----------------------------------------------------------

    def _ingest(self, rb: RolloutBatch) -> None:
        self.env_steps += rb.num_steps
        for ep in rb.episodes:
            self.episodes_done += 1
            self.success_window.append(ep)
            self._interval_eps.append(ep)

    def _build_transition(self, rollouts: list[RolloutBatch]) -> TransitionBatch:
        feats, acts, logps, vals, advs, rets = [], [], [], [], [], []
        for rb in rollouts:
            rewards = self._synthesize(rb)
            adv, ret = compute_gae(rewards, rb.values, rb.dones, rb.bootstrap,
                                   self.cfg.ppo.gamma, self.cfg.ppo.gae_lambda)
            feats.append(rb.features.reshape(-1, rb.features.shape[-1]))
            acts.append(rb.actions.ravel())
            logps.append(rb.logp.ravel())
            vals.append(rb.values.ravel())
            advs.append(adv.ravel())
            rets.append(ret.ravel())
        return TransitionBatch(
            features=np.concatenate(feats), actions=np.concatenate(acts),
            logp=np.concatenate(logps), values=np.concatenate(vals),
            advantages=np.concatenate(advs), returns=np.concatenate(rets),
            version=self.version)

    def _update(self, rollouts: list[RolloutBatch]) -> None:
        assert all(enforce_staleness(rb.version, self.version,
                                     self.cfg.ppo.staleness_max)
                   for rb in rollouts), "stale rollout reached the update step"
        batch = self._build_transition(rollouts)
        stats = ppo_update(self.policy, self.popt, batch, self.cfg.ppo,
                           self.mb_rng)
        self._interval_stats.merge(stats)
        self.version += 1
        self._published = (self.policy.copy(), self.version)
        self._apply_feedback()
        self._continuous_updates()
        self.iteration += 1

    # -- metrics -----------------------------------------------------------

    def _episode_means(self) -> dict[str, float]:
        eps = self._interval_eps
        if not eps:
            return {}

        def mean(key):
            return float(np.mean([e[key] for e in eps]))

        return {
            "episodes": len(eps),
            "success_rate": float(np.mean([e["success"] for e in eps])),
            "mean_return_ext": mean("return_ext"),
            "mean_score": mean("score"),
            "mean_kills": mean("kills"),
            "mean_gold": mean("gold"),
            "mean_descents": mean("descents"),
            "mean_scout": mean("scout"),
            "mean_exp_level": mean("exp_level"),
            "mean_ep_steps": mean("steps"),
        }

    def _write_metrics_row(self, env_sps: float) -> None:
        if self.writer is None:
            return
        row: dict[str, Any] = {
            "step": self.env_steps,
            "iteration": self.iteration,
            "env_sps": env_sps,
            "policy_version": self.version,
            "policy_loss": self._interval_stats.policy_loss,
            "value_loss": self._interval_stats.value_loss,
            "entropy": self._interval_stats.entropy,
            "approx_kl": self._interval_stats.approx_kl,
            "clip_fraction": self._interval_stats.clip_fraction,
            "grad_norm": self._interval_stats.grad_norm,
            "stale_discarded": self.stale_discarded,
            "stale_mean": (float(np.mean(self._interval_ages))
                           if self._interval_ages else 0.0),
            "burst_updates": self.burst_total,
            "continuous_updates": self.continuous_total,
            "reward_loss": self.reward_loss_last,
            "store_size": len(self.store),
            "pref_size": len(self.prefs),
            "intrinsic_mean": (self._intr_sum / self._intr_count
                               if self._intr_count else 0.0),
            "intrinsic_max": self._intr_max,
            "intrinsic_frac_pos": (self._intr_pos / self._intr_count
                                   if self._intr_count else 0.0),
        }
        row.update(self._episode_means())
        if self.service is not None:
            m = self.service.metrics
            row.update({
                "annotations_received": m.annotations_received,
                "requests_sent": m.requests_sent,
                "batches_dropped": m.batches_dropped,
                "parse_drops": m.parse_drops,
                "queue_depth": len(self.service.queue),
                "queue_evicted": self.service.queue.evicted,
                "caption_list_size": len(self.service.captions),
                "warmup_phase": {"burst": 0, "continuous": 1,
                                 "frozen": 2}[self._gate()],
            })
        else:
            row["warmup_phase"] = -1
        self.writer.write_row(row)
        self._interval_eps = []
        self._interval_stats = UpdateStats()
        self._interval_ages = []
        self._intr_sum = 0.0
        self._intr_count = 0
        self._intr_max = 0.0
        self._intr_pos = 0

    # -- run loops ---------------------------------------------------------

    def run(self, max_seconds: float | None = None) -> RunResult:
        cfg = self.cfg
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / f"{self.stem}_config.txt").write_text(dump_config(cfg))
        self.writer = MetricsWriter(self.metrics_path)
        started = time.monotonic()
        try:
            if cfg.threaded:
                self._run_threaded(started, max_seconds)
            else:
                self._run_deterministic(started, max_seconds)
        finally:
            if self.service is not None:
                self.service.close()
                if cfg.threaded:
                    self._apply_feedback()  # results completed near shutdown
            self.writer.close()
        return self._finalize(time.monotonic() - started)

    def _time_up(self, started: float, max_seconds: float | None) -> bool:
        return max_seconds is not None and time.monotonic() - started >= max_seconds

    def _run_deterministic(self, started: float, max_seconds: float | None) -> None:
        cfg = self.cfg
        while self.env_steps < cfg.steps and not self._time_up(started, max_seconds):
            rollouts = []
            for _ in range(self.rounds):
                rb = self.collector.collect(self.policy, self.version)
                self._ingest(rb)
                rollouts.append(rb)
            self._interval_ages.append(0)
            self._update(rollouts)
            if self.iteration % self.log_every == 0:
                self._write_metrics_row(env_sps=0.0)

    def _rollout_worker(self) -> None:
        while not self._stop.is_set():
            model, version = self._published
            rb = self.collector.collect(model, version)
            while not self._stop.is_set():
                try:
                    self._rollout_q.put(rb, timeout=0.1)
                    break
                except queue_mod.Full:
                    continue

    def _run_threaded(self, started: float, max_seconds: float | None) -> None:
        cfg = self.cfg
        if self.service is not None:
            self.service.start()
        self._rollout_thread = threading.Thread(
            target=self._rollout_worker, daemon=True, name="rollout-worker")
        self._rollout_thread.start()
        last_steps, last_time = 0, time.monotonic()
        try:
            while self.env_steps < cfg.steps and not self._time_up(started, max_seconds):
                rollouts: list[RolloutBatch] = []
                while len(rollouts) < self.rounds:
                    if self._time_up(started, max_seconds):
                        break
                    try:
                        rb = self._rollout_q.get(timeout=0.1)
                    except queue_mod.Empty:
                        continue
                    self._ingest(rb)
                    if not enforce_staleness(rb.version, self.version,
                                             cfg.ppo.staleness_max):
                        self.stale_discarded += 1
                        continue
                    self._interval_ages.append(self.version - rb.version)
                    rollouts.append(rb)
                if not rollouts:
                    break
                self._update(rollouts)
                if self.iteration % self.log_every == 0:
                    now = time.monotonic()
                    sps = (self.env_steps - last_steps) / max(now - last_time, 1e-9)
                    last_steps, last_time = self.env_steps, now
                    self._write_metrics_row(env_sps=sps)
        finally:
            self._stop.set()
            self._rollout_thread.join(timeout=2.0)

    # -- teardown ----------------------------------------------------------

    def _finalize(self, elapsed: float) -> RunResult:
        cfg = self.cfg
        window = list(self.success_window)
        summary: dict[str, Any] = {
            "task": cfg.task,
            "mechanism": self.mechanism,
            "seed": cfg.seed,
            "env_steps": self.env_steps,
            "iterations": self.iteration,
            "episodes": self.episodes_done,
            "wall_seconds": elapsed,
            "policy_version": self.version,
            "stale_discarded": self.stale_discarded,
            "store_size": len(self.store),
            "pref_size": len(self.prefs),
            "burst_updates": self.burst_total,
            "continuous_updates": self.continuous_total,
        }
        if window:
            summary["recent_success_rate"] = float(
                np.mean([e["success"] for e in window]))
            summary["recent_mean_score"] = float(
                np.mean([e["score"] for e in window]))
            summary["recent_mean_kills"] = float(
                np.mean([e["kills"] for e in window]))
            summary["recent_mean_gold"] = float(
                np.mean([e["gold"] for e in window]))
            summary["recent_episodes"] = len(window)
        if self.service is not None:
            m = self.service.metrics
            summary["annotations_received"] = m.annotations_received
            summary["requests_sent"] = m.requests_sent
            summary["batches_dropped"] = m.batches_dropped
            summary["parse_drops"] = m.parse_drops
            if m.batches_dropped:
                log.warning("annotation stalled or failing: %d batches dropped",
                            m.batches_dropped)

        ckpt_path = None
        if cfg.save_checkpoint:
            arrays = pack_mlp(self.policy, "policy")
            if self.reward_model is not None:
                arrays.update(pack_mlp(self.reward_model, "reward_model"))
            ckpt_path = self.out_dir / f"{self.stem}.ckpt"
            save_checkpoint(ckpt_path, arrays, meta={
                "step": self.env_steps, "version": self.version,
                "seed": cfg.seed, "mechanism": self.mechanism,
                "task": cfg.task})
        store_path = None
        if cfg.save_store:
            if self.mechanism in BINARY_MECHANISMS and len(self.store):
                store_path = self.out_dir / f"{self.stem}_store.jsonl"
                self.store.save(store_path)
            elif self.mechanism == "ranking" and len(self.prefs):
                store_path = self.out_dir / f"{self.stem}_prefs.jsonl"
                self.prefs.save(store_path)
        (self.out_dir / f"{self.stem}_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return RunResult(config=cfg, summary=summary,
                         metrics_path=self.metrics_path,
                         checkpoint_path=ckpt_path, store_path=store_path)


def run_training(cfg: RunConfig, backend: Backend | None = None,
                 max_seconds: float | None = None) -> RunResult:
    return Trainer(cfg, backend=backend).run(max_seconds=max_seconds)


def measure_throughput(cfg: RunConfig, duration: float,
                       backend: Backend | None = None) -> ThroughputReport:
    """Paired wall-clock throughput measurement: annotation off, then on,
    threaded mode, identical seeds. ``duration`` is per leg, in seconds, and
    must be at least 30 for a stable figure."""
    if duration < 30.0:
        raise ValueError(f"duration must be >= 30 seconds, got {duration}")

    def leg(annotator_override: str | None, stem: str,
            leg_backend: Backend | None) -> RunResult:
        c = clone_config(cfg)
        c.threaded = True
        c.steps = 2 ** 62
        c.save_checkpoint = False
        c.save_store = False
        c.run_name = (cfg.run_name or "throughput") + stem
        if annotator_override is not None:
            c.annotator = annotator_override
        validate_config(c)
        return Trainer(c, backend=leg_backend).run(max_seconds=duration)

    off = leg("none", "_off", None)
    on = leg(None, "_on", backend)
    wall_off = max(off.summary["wall_seconds"], 1e-9)
    wall_on = max(on.summary["wall_seconds"], 1e-9)
    sps_off = off.summary["env_steps"] / wall_off
    sps_on = on.summary["env_steps"] / wall_on
    annotations = on.summary.get("annotations_received", 0)
    return ThroughputReport(
        duration=duration,
        steps_off=off.summary["env_steps"], steps_on=on.summary["env_steps"],
        sps_off=sps_off, sps_on=sps_on,
        retention=min(1.0, sps_on / max(sps_off, 1e-9)),
        annotations_received=annotations,
        annotations_per_sec=annotations / wall_on,
        annotated_fraction=min(1.0, annotations /
                               max(on.summary["env_steps"], 1)))
