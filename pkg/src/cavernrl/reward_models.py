"""Training steps for the caption classifier and the caption ranker.

Both models are small MLPs over hashed bag-of-tokens features (1024 in,
2x128 ReLU). The classifier ends in a sigmoid and minimizes binary cross
entropy on stored (caption, label) records; the ranker ends in a linear
score and minimizes the Bradley-Terry preference NLL, where a no-preference
label targets the uniform distribution over the two outcomes. Minibatches
are drawn uniformly with replacement from the store snapshot.
"""

from __future__ import annotations

import numpy as np

from .annotate.store import AnnotationRecord, PreferenceRecord
from .nn import Adam, Mlp, featurize_captions, make_mlp

CLASSIFIER_LR = 1e-4
RANKER_LR = 1e-5
REWARD_BATCH = 256
REWARD_MAX_GRAD_NORM = 4.0  # same global-norm clip as the policy optimizer
_P_FLOOR = 1e-7


def make_reward_model(kind: str, feature_dim: int = 1024,
                      hidden: tuple[int, ...] = (128, 128), seed: int = 0,
                      dtype=np.float32) -> Mlp:
    if kind == "classifier":
        head = "sigmoid"
    elif kind == "ranker":
        head = "linear"
    else:
        raise ValueError(f"unknown reward model kind {kind!r}")
    return make_mlp((feature_dim, *hidden, 1), head=head, seed=seed, dtype=dtype)


def make_reward_optimizer(kind: str, lr: float | None = None) -> Adam:
    if lr is None:
        lr = CLASSIFIER_LR if kind == "classifier" else RANKER_LR
    return Adam(lr=lr)


def train_classifier_step(model: Mlp, opt: Adam, records: list[AnnotationRecord],
                          rng: np.random.Generator, batch_size: int = REWARD_BATCH,
                          feature_dim: int = 1024) -> float | None:
    """One BCE minibatch step. Returns the batch loss, or None if the store
    snapshot is empty (no step taken)."""
    if not records:
        return None
    idx = rng.integers(0, len(records), size=batch_size)
    captions = [records[i].caption for i in idx]
    targets = np.array([records[i].label for i in idx], dtype=model.dtype)
    x = featurize_captions(captions, feature_dim)
    p, cache = model.forward(x)
    p1 = np.clip(p[:, 0], _P_FLOOR, 1.0 - _P_FLOOR)
    loss = float(-np.mean(targets * np.log(p1) + (1.0 - targets) * np.log(1.0 - p1)))
    # d(BCE)/dp = (p - t) / (p (1 - p)); the sigmoid-head Jacobian inside
    # backward() multiplies by p (1 - p), cancelling to the stable (p - t).
    d_out = ((p1 - targets) / (p1 * (1.0 - p1)) / len(targets)).reshape(-1, 1)
    grads = model.backward(cache, d_out)
    opt.step(model, grads, max_grad_norm=REWARD_MAX_GRAD_NORM)
    return loss


def _preference_targets(labels: list[int | None], dtype) -> np.ndarray:
    out = np.empty(len(labels), dtype=dtype)
    for i, lab in enumerate(labels):
        if lab == 1:
            out[i] = 1.0
        elif lab == 2:
            out[i] = 0.0
        elif lab is None:
            out[i] = 0.5
        else:
            raise ValueError(f"preference label must be 1, 2 or None, got {lab!r}")
    return out


def train_ranker_step(model: Mlp, opt: Adam, records: list[PreferenceRecord],
                      rng: np.random.Generator, batch_size: int = REWARD_BATCH,
                      feature_dim: int = 1024) -> float | None:
    """One Bradley-Terry NLL minibatch step over preference records."""
    if not records:
        return None
    idx = rng.integers(0, len(records), size=batch_size)
    first = [records[i].first for i in idx]
    second = [records[i].second for i in idx]
    w = _preference_targets([records[i].label for i in idx], model.dtype)
    x1 = featurize_captions(first, feature_dim)
    x2 = featurize_captions(second, feature_dim)
    r1, cache1 = model.forward(x1)
    r2, cache2 = model.forward(x2)
    d = (r1 - r2)[:, 0]
    # log P(first preferred) = -softplus(-d); log P(second) = -softplus(d)
    logp1 = -np.logaddexp(0.0, -d)
    logp2 = -np.logaddexp(0.0, d)
    loss = float(-np.mean(w * logp1 + (1.0 - w) * logp2))
    p = np.exp(logp1)
    g = ((p - w) / len(w)).reshape(-1, 1).astype(model.dtype)
    grads = model.backward(cache1, g)
    grads.accumulate(model.backward(cache2, -g))
    opt.step(model, grads, max_grad_norm=REWARD_MAX_GRAD_NORM)
    return loss


def score_captions(model: Mlp, captions: list[str], feature_dim: int = 1024) -> np.ndarray:
    """Raw ranker scores (or classifier probabilities) for a caption batch."""
    out, _ = model.forward(featurize_captions(captions, feature_dim))
    return out[:, 0]
