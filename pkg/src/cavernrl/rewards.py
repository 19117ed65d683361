"""Intrinsic reward synthesis from annotation feedback.

Three mechanisms over captions:

- retrieval: exact lookup of stored 0/1 labels, unknown captions pay 0,
- classification: a trained caption classifier thresholded at eta (or used
  raw in the real-valued variant),
- ranking: a trained caption scorer normalized by running mean/std and
  thresholded at a z-score cutoff.

All mechanisms share episodic normalization: the reward for a caption seen n
times so far this episode is divided by n**z (first occurrence divides by 1).
The composite reward is extrinsic + beta * intrinsic.

Also here: the Bradley-Terry preference probability and NLL used to train the
ranker, and the hashed bag-of-words cosine baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import Mlp, featurize_caption

DEFAULT_Z = 3.0
DEFAULT_ETA = 0.5
DEFAULT_NU = 0.0
SIGMA_FLOOR = 1e-8

MECHANISMS = ("none", "retrieval", "classification", "ranking", "ellm_bow")


# -- preference math -------------------------------------------------------

def bt_probability(r1: float, r2: float) -> float:
    """P(first preferred) = exp(r1) / (exp(r1) + exp(r2)), shift-stable."""
    m = max(r1, r2)
    e1 = math.exp(r1 - m)
    e2 = math.exp(r2 - m)
    return e1 / (e1 + e2)


def preference_nll(r1: float, r2: float, label: int | None) -> float:
    """Negative log likelihood of a preference label under Bradley-Terry.

    label 1: first preferred; label 2: second preferred; None: no preference,
    scored against the uniform target (half the mass on each outcome).
    """
    m = max(r1, r2)
    lse = m + math.log(math.exp(r1 - m) + math.exp(r2 - m))
    logp1 = r1 - lse
    logp2 = r2 - lse
    if label == 1:
        return -logp1
    if label == 2:
        return -logp2
    if label is None:
        return -0.5 * logp1 - 0.5 * logp2
    raise ValueError(f"preference label must be 1, 2 or None, got {label!r}")


# -- episodic normalization ------------------------------------------------

class EpisodicCounter:
    """Per-environment-instance caption occurrence counts within the current
    episode. ``observe`` increments and returns the new count, so the first
    occurrence returns 1."""

    def __init__(self):
        self._counts: dict[str, int] = {}

    def observe(self, caption: str) -> int:
        n = self._counts.get(caption, 0) + 1
        self._counts[caption] = n
        return n

    def count(self, caption: str) -> int:
        return self._counts.get(caption, 0)

    def reset(self) -> None:
        self._counts.clear()


def episodic_normalize(value: float, count: int, z: float = DEFAULT_Z) -> float:
    if count < 1:
        raise ValueError(f"occurrence count must be >= 1, got {count}")
    return value / count ** z


# -- running statistics (ranking normalization) ----------------------------

@dataclass
class RunningStats:
    """Welford running mean/std over a scalar stream."""

    count: int = 0
    mean: float = 0.0
    _m2: float = 0.0

    def update(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self._m2 / self.count

    def std(self) -> float:
        return math.sqrt(self.variance())


def ranking_reward(raw_score: float, stats: RunningStats, nu: float = DEFAULT_NU,
                   update_stats: bool = True) -> float:
    """Z-score of the raw ranker output against the running stream stats,
    thresholded at nu (a standard-normal quantile value; nu=0 keeps positive
    z-scores only). Stats are updated with the raw score *after* the reward
    is computed; with fewer than two prior samples the reward is 0."""
    if stats.count < 2:
        out = 0.0
    else:
        sigma = max(stats.std(), SIGMA_FLOOR)
        zscore = (raw_score - stats.mean) / sigma
        out = zscore if zscore > nu else 0.0
    if update_stats:
        stats.update(raw_score)
    return out


# -- classification and retrieval ------------------------------------------

def classification_reward(features: np.ndarray, model: Mlp, eta: float = DEFAULT_ETA,
                          real_valued: bool = False) -> np.ndarray:
    """Classifier probability per row, binarized as 1[p > eta] unless
    real_valued, in which case the probability itself is the reward."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    p, _ = model.forward(np.atleast_2d(features))
    p = p[:, 0]
    if real_valued:
        return p.astype(np.float64)
    return (p > eta).astype(np.float64)


def retrieval_reward(caption: str, lookup, on_miss=None) -> float:
    """Stored label for the caption, else 0.0. ``lookup`` maps caption ->
    label or None; ``on_miss`` (if given) is called with unknown captions so
    they can be enqueued for annotation."""
    label = lookup(caption)
    if label is None:
        if on_miss is not None:
            on_miss(caption)
        return 0.0
    return float(label)


def composite_reward(extrinsic: float, intrinsic: float, beta: float) -> float:
    return extrinsic + beta * intrinsic


# -- hashed bag-of-words baseline ------------------------------------------

BOW_DIM = 64
BOW_SALT = 0xB07


def bow_embed(text: str, dim: int = BOW_DIM) -> np.ndarray:
    """Order-invariant hashed sum of token vectors (a permuted bag of words
    maps to the same embedding; that blindness is the point of the baseline)."""
    return featurize_caption(text, dim=dim, salt=BOW_SALT)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def ellm_bow_reward(caption: str, goal: str, count: int, z: float = DEFAULT_Z,
                    dim: int = BOW_DIM) -> float:
    """Cosine similarity between hashed caption and goal embeddings, with
    episodic normalization folded in."""
    return episodic_normalize(cosine(bow_embed(caption, dim), bow_embed(goal, dim)),
                              count, z)


# -- configuration ---------------------------------------------------------

@dataclass
class IntrinsicRewardConfig:
    mechanism: str = "none"
    beta: float | None = None  # None -> mechanism/task default
    eta: float = DEFAULT_ETA
    z: float = DEFAULT_Z
    nu: float = DEFAULT_NU
    real_valued: bool = False
    goal_string: str = ""  # ellm_bow only
    feature_dim: int = 1024
    hidden: tuple[int, ...] = (128, 128)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mechanism not in MECHANISMS:
            raise ValueError(
                f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        if self.z <= 0:
            raise ValueError(f"z must be positive, got {self.z}")

    def resolved_beta(self, task_kind: str) -> float:
        if self.beta is not None:
            return self.beta
        return default_beta(self.mechanism, task_kind)


def default_beta(mechanism: str, task_kind: str) -> float:
    """Per-mechanism defaults; the dense Score task uses smaller scales than
    sparse and reward-free tasks."""
    dense = task_kind == "score"
    if mechanism == "retrieval":
        return 0.1 if dense else 0.5
    if mechanism == "classification":
        return 0.1 if dense else 0.4
    if mechanism == "ranking":
        return 0.05
    if mechanism == "ellm_bow":
        return 0.1 if dense else 0.5
    return 0.0
