"""Experience collection over a set of environment instances.

The collector steps all envs in lockstep with batched policy inference,
records per-step captions and their episodic occurrence counts (counted at
observation arrival, so the first occurrence is 1), and auto-resets finished
episodes. Intrinsic rewards are *not* computed here; the learner synthesizes
them from the recorded captions and counts, which keeps reward models and
stores off the simulation path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .env.caverns import CavernsEnv, Observation, STATS_DIM, VIEW_SIZE
from .env.dungeon import (DOOR_CLOSED, PASSAGE, STAIRS_DOWN, VIEW_GOLD,
                          VIEW_MONSTER)
from .nn import Mlp, featurize_caption
from .ppo import log_softmax, policy_heads
from .rewards import EpisodicCounter

# View palette: task-relevant objects get distinctive values so a linear
# layer can separate them easily. Indexed by view code.
_PALETTE = np.array([
    0.0,   # wall
    0.25,  # floor
    0.25,  # corridor
    0.6,   # closed door
    0.35,  # open door
    0.0,   # hidden (never rendered, kept for code alignment)
    0.3,   # revealed passage
    1.0,   # down staircase
    0.8,   # gold
    -1.0,  # monster
], dtype=np.float32)

# Fixed stats normalizers: hp, exp level, depth, gold, steps, score.
_STATS_SCALE = np.array([16.0, 10.0, 6.0, 500.0, 2000.0, 1000.0],
                        dtype=np.float32)

POLICY_CAPTION_DIM = 128
POLICY_CAPTION_SALT = 1

# Objects summarized by direction features: an MLP over the raw flattened
# view would need a convolution-sized sample budget to localize these, so the
# extractor provides (present, dr, dc, distance) of the nearest instance of
# each, Chebyshev-nearest to the agent at the view center.
_SALIENT_CODES = (STAIRS_DOWN, VIEW_GOLD, VIEW_MONSTER, DOOR_CLOSED, PASSAGE)
SUMMARY_DIM = 4 * len(_SALIENT_CODES) + 1  # + on-stairs flag


def view_summary(view: np.ndarray, out: np.ndarray) -> None:
    """Nearest-object direction features derived from the egocentric view."""
    half = VIEW_SIZE // 2
    i = 0
    for code in _SALIENT_CODES:
        rows, cols = np.nonzero(view == code)
        if rows.size == 0:
            out[i:i + 4] = (0.0, 0.0, 0.0, 1.0)
        else:
            dr = rows - half
            dc = cols - half
            dist = np.maximum(np.abs(dr), np.abs(dc))
            j = int(np.argmin(dist))
            out[i:i + 4] = (1.0, dr[j] / half, dc[j] / half, dist[j] / half)
        i += 4
    out[i] = 1.0 if view[half, half] == STAIRS_DOWN else 0.0


class FeatureExtractor:
    """Observation -> flat float32 policy input: palette-mapped view, scaled
    stats, hashed caption features, nearest-object summaries."""

    def __init__(self, caption_dim: int = POLICY_CAPTION_DIM):
        self.caption_dim = caption_dim
        self.view_dim = VIEW_SIZE * VIEW_SIZE
        self.dim = self.view_dim + STATS_DIM + caption_dim + SUMMARY_DIM

    def write_into(self, obs: Observation, out: np.ndarray) -> None:
        v = self.view_dim
        out[:v] = _PALETTE[obs.view].ravel()
        out[v:v + STATS_DIM] = obs.stats / _STATS_SCALE
        c = v + STATS_DIM
        out[c:c + self.caption_dim] = featurize_caption(
            obs.caption, self.caption_dim, POLICY_CAPTION_SALT)
        view_summary(obs.view, out[c + self.caption_dim:])

    def __call__(self, obs: Observation) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.float32)
        self.write_into(obs, out)
        return out


@dataclass
class RolloutBatch:
    """(num_envs, T) arrays from one collection round."""

    features: np.ndarray  # (N, T, D) float32, observation at decision time
    actions: np.ndarray  # (N, T) int64
    logp: np.ndarray  # (N, T) float64
    values: np.ndarray  # (N, T) float64
    ext_rewards: np.ndarray  # (N, T) float64, scaled extrinsic
    dones: np.ndarray  # (N, T) bool
    captions: list[list[str]]  # [env][t], caption of the arriving observation
    counts: np.ndarray  # (N, T) int32, episodic occurrence number
    bootstrap: np.ndarray  # (N,) float64
    version: int
    episodes: list[dict[str, Any]] = field(default_factory=list)

    @property
    def num_steps(self) -> int:
        return self.features.shape[0] * self.features.shape[1]

    def flat_captions(self) -> list[str]:
        return [c for row in self.captions for c in row]


class RolloutCollector:
    def __init__(self, envs: list[CavernsEnv], extractor: FeatureExtractor,
                 rollout_len: int, seed: int = 0):
        self.envs = envs
        self.extractor = extractor
        self.t_len = rollout_len
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7011]))
        self.counters = [EpisodicCounter() for _ in envs]
        self.cur = np.empty((len(envs), extractor.dim), dtype=np.float32)
        for i, env in enumerate(envs):
            obs = env.reset()
            self.counters[i].observe(obs.caption)
            self.extractor.write_into(obs, self.cur[i])

    def collect(self, model: Mlp, version: int) -> RolloutBatch:
        n, t_len, d = len(self.envs), self.t_len, self.extractor.dim
        features = np.empty((n, t_len, d), dtype=np.float32)
        actions = np.empty((n, t_len), dtype=np.int64)
        logp = np.empty((n, t_len), dtype=np.float64)
        values = np.empty((n, t_len), dtype=np.float64)
        ext = np.zeros((n, t_len), dtype=np.float64)
        dones = np.zeros((n, t_len), dtype=bool)
        counts = np.empty((n, t_len), dtype=np.int32)
        captions: list[list[str]] = [[] for _ in range(n)]
        episodes: list[dict[str, Any]] = []

        for t in range(t_len):
            features[:, t] = self.cur
            out, _ = model.forward(self.cur)
            logits, value = policy_heads(out)
            lp = log_softmax(logits.astype(np.float64))
            probs = np.exp(lp)
            u = self.rng.random((n, 1))
            acts = (probs.cumsum(axis=1) < u).sum(axis=1)
            np.clip(acts, 0, probs.shape[1] - 1, out=acts)
            actions[:, t] = acts
            logp[:, t] = lp[np.arange(n), acts]
            values[:, t] = value

            for i, env in enumerate(self.envs):
                res = env.step(int(acts[i]))
                captions[i].append(res.obs.caption)
                counts[i, t] = self.counters[i].observe(res.obs.caption)
                ext[i, t] = res.reward
                dones[i, t] = res.done
                if res.done:
                    episodes.append(res.info["episode"])
                    self.counters[i].reset()
                    obs = env.reset()
                    self.counters[i].observe(obs.caption)
                else:
                    obs = res.obs
                self.extractor.write_into(obs, self.cur[i])

        out, _ = model.forward(self.cur)
        _, bootstrap = policy_heads(out)
        return RolloutBatch(features=features, actions=actions, logp=logp,
                            values=values, ext_rewards=ext, dones=dones,
                            captions=captions, counts=counts,
                            bootstrap=bootstrap.astype(np.float64),
                            version=version, episodes=episodes)
