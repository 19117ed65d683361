"""Minimal numpy neural net core: hashed text features, an MLP with explicit
forward/backward, and Adam.

No autograd. ``forward`` returns a cache, ``backward`` consumes it together
with the gradient of the loss w.r.t. the network output and returns parameter
gradients. Heads (sigmoid / softmax / linear) are part of the model so the
output gradient is always w.r.t. post-head values; the head Jacobians are
applied inside ``backward``. All gradients are checked against central finite
differences in the test suite.

float32 is the default dtype for training speed; gradient-check tests build
float64 models.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

# -- hashed bag-of-tokens caption features ---------------------------------

_HASH_CACHE: dict[tuple[str, int], int] = {}


def _token_hash(token: str, salt: int) -> int:
    key = (token, salt)
    h = _HASH_CACHE.get(key)
    if h is None:
        digest = hashlib.blake2b(f"{salt}:{token}".encode(), digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        _HASH_CACHE[key] = h
    return h


def tokenize(text: str) -> list[str]:
    out = []
    word = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


_FEATURE_CACHE: dict[tuple[str, int, int], np.ndarray] = {}


def featurize_caption(caption: str, dim: int = 1024, salt: int = 0) -> np.ndarray:
    """Signed hashed bag-of-tokens, float32. Stable across processes (no use
    of Python's salted hash). Cached and returned read-only."""
    key = (caption, dim, salt)
    vec = _FEATURE_CACHE.get(key)
    if vec is None:
        vec = np.zeros(dim, dtype=np.float32)
        for tok in tokenize(caption):
            h = _token_hash(tok, salt)
            sign = 1.0 if (h >> 62) & 1 else -1.0
            vec[h % dim] += sign
        vec.flags.writeable = False
        _FEATURE_CACHE[key] = vec
    return vec


def featurize_captions(captions: list[str], dim: int = 1024, salt: int = 0) -> np.ndarray:
    out = np.empty((len(captions), dim), dtype=np.float32)
    for i, c in enumerate(captions):
        out[i] = featurize_caption(c, dim, salt)
    return out


# -- MLP -------------------------------------------------------------------

HEADS = ("linear", "sigmoid", "softmax")


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    head: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, self.head,
                   [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """x: (batch, in_dim). Returns (output, cache). Hidden layers ReLU,
        then the head."""
        x = np.asarray(x, dtype=self.dtype)
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < last:
                z = np.maximum(z, 0.0)
            h = z
            acts.append(h)
        out = _apply_head(h, self.head)
        return out, [acts, out]

    def backward(self, cache: list, d_out: np.ndarray) -> "Grads":
        """d_out: gradient of the scalar loss w.r.t. the post-head output."""
        acts, out = cache
        dz = _head_backward(out, np.asarray(d_out, dtype=self.dtype), self.head)
        dws: list[np.ndarray] = [None] * len(self.weights)
        dbs: list[np.ndarray] = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                dz = dz * (acts[i + 1] > 0)  # ReLU mask
            dws[i] = acts[i].T @ dz
            dbs[i] = dz.sum(axis=0)
            if i > 0:
                dz = dz @ self.weights[i].T
        return Grads(dws, dbs)


@dataclass
class Grads:
    dweights: list[np.ndarray]
    dbiases: list[np.ndarray]

    def flat(self) -> list[np.ndarray]:
        out = []
        for dw, db in zip(self.dweights, self.dbiases):
            out.append(dw)
            out.append(db)
        return out

    def global_norm(self) -> float:
        total = 0.0
        for g in self.flat():
            total += float(np.sum(np.square(g, dtype=np.float64)))
        return float(np.sqrt(total))

    def accumulate(self, other: "Grads") -> None:
        for a, b in zip(self.flat(), other.flat()):
            a += b


def _apply_head(z: np.ndarray, head: str) -> np.ndarray:
    if head == "linear":
        return z
    if head == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if head == "softmax":
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown head {head!r}")


def _head_backward(out: np.ndarray, d_out: np.ndarray, head: str) -> np.ndarray:
    if head == "linear":
        return d_out
    if head == "sigmoid":
        return d_out * out * (1.0 - out)
    if head == "softmax":
        inner = (d_out * out).sum(axis=1, keepdims=True)
        return out * (d_out - inner)
    raise ValueError(f"unknown head {head!r}")


def make_mlp(sizes: tuple[int, ...], head: str = "linear", seed: int = 0,
             dtype=np.float32) -> Mlp:
    """Scaled uniform fan-in init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    biases zero."""
    if head not in HEADS:
        raise ValueError(f"unknown head {head!r}; expected one of {HEADS}")
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x11A]))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(tuple(sizes), head, weights, biases)


# -- Adam ------------------------------------------------------------------

@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    skipped_nonfinite: int = 0
    _m: list[np.ndarray] = field(default_factory=list)
    _v: list[np.ndarray] = field(default_factory=list)

    def step(self, model: Mlp, grads: Grads, max_grad_norm: float | None = None) -> float:
        """One Adam update in place. Returns the pre-clip global grad norm.
        If any gradient is non-finite the whole step is skipped and counted."""
        params = model.params()
        gs = grads.flat()
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        norm = grads.global_norm()
        if not np.isfinite(norm):
            self.skipped_nonfinite += 1
            return norm
        scale = 1.0
        if max_grad_norm is not None and norm > max_grad_norm > 0:
            scale = max_grad_norm / norm
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, gs, self._m, self._v):
            g = g * scale if scale != 1.0 else g
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return norm


# -- finite differences (used by tests and demos, not the training path) ---

def finite_difference_grads(model: Mlp, x: np.ndarray,
                            loss_fn, probe: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients of loss_fn(model.forward(x)[0]) w.r.t.
    every parameter. Independent of backward(); the oracle route."""
    grads = []
    for p in model.params():
        g = np.zeros_like(p, dtype=np.float64)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + probe
            hi = loss_fn(model.forward(x)[0])
            p[idx] = orig - probe
            lo = loss_fn(model.forward(x)[0])
            p[idx] = orig
            g[idx] = (hi - lo) / (2.0 * probe)
            it.iternext()
        grads.append(g)
    return grads
