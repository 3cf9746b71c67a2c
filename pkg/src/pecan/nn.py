"""Minimal dense network engine: MLP forward/backward, Adam, softmax
cross-entropy, and the straight-through Gumbel estimator.

Exact reverse-mode gradients in float64, bit-reproducible given a seed.
Only the fixed architectures this package needs; no general autodiff.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


class NumericError(ArithmeticError):
    """Non-finite values where finite numbers are required. Fail fast."""


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericError(f"non-finite values in {name}")


class Mlp:
    """Fully-connected network; weights[i] has shape (fan_in, fan_out)."""

    def __init__(self, dims: list[int], activations: list[str]):
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation '{act}'")
        self.dims = list(dims)
        self.activations = list(activations)
        self.weights = [np.zeros((dims[i], dims[i + 1])) for i in range(len(dims) - 1)]
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def init_params(self, rng: np.random.Generator) -> None:
        """He initialization for ReLU layers, Xavier for tanh/linear."""
        for i, act in enumerate(self.activations):
            fan_in = self.dims[i]
            std = np.sqrt(2.0 / fan_in) if act == "relu" else np.sqrt(1.0 / fan_in)
            self.weights[i] = rng.normal(0.0, std, size=self.weights[i].shape)
            self.biases[i] = np.zeros(self.dims[i + 1])

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * self.num_layers:
            raise ValueError("parameter count mismatch")
        for i in range(self.num_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError(f"layer {i} shape mismatch")
            self.weights[i] = np.asarray(w, dtype=np.float64)
            self.biases[i] = np.asarray(b, dtype=np.float64)

    def copy(self) -> "Mlp":
        clone = Mlp(self.dims, self.activations)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x: np.ndarray):
        """Returns (y, tape); accepts a single vector or an (n, input_dim) batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise ValueError(f"input width {x.shape[1]} != expected {self.input_dim}")
        inputs = []
        outputs = []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            z = h @ w + b
            if act == "relu":
                h = np.maximum(z, 0.0)
            elif act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            outputs.append(h)
        tape = _Tape(inputs=inputs, outputs=outputs, single=single)
        return (h[0] if single else h), tape

    def backward(self, tape: "_Tape", dy: np.ndarray):
        """Exact gradients for all parameters plus dx, from a matching tape."""
        dy = np.asarray(dy, dtype=np.float64)
        if tape.single:
            dy = dy[None, :]
        if len(tape.inputs) != self.num_layers or dy.shape != tape.outputs[-1].shape:
            raise ValueError("tape does not match this network/output")
        d_weights = [None] * self.num_layers
        d_biases = [None] * self.num_layers
        delta = dy
        for i in range(self.num_layers - 1, -1, -1):
            act, out = self.activations[i], tape.outputs[i]
            if act == "relu":
                delta = delta * (out > 0)
            elif act == "tanh":
                delta = delta * (1.0 - out * out)
            d_weights[i] = tape.inputs[i].T @ delta
            d_biases[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        dx = delta[0] if tape.single else delta
        grads = []
        for dw, db in zip(d_weights, d_biases):
            grads.extend((dw, db))
        return grads, dx


class _Tape:
    __slots__ = ("inputs", "outputs", "single")

    def __init__(self, inputs, outputs, single):
        self.inputs = inputs
        self.outputs = outputs
        self.single = single


class Adam:
    """Adam with bias correction; moments live alongside the parameter list."""

    def __init__(self, params: list[np.ndarray], lr: float = 0.0008,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ValueError("parameter/gradient count mismatch")
        for g in grads:
            _check_finite("gradients", g)
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** t)
            v_hat = self.v[i] / (1 - self.beta2 ** t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GumbelConfig:
    """Temperature plus noise source; inject `noise` directly in tests."""

    def __init__(self, temperature: float = 1.0,
                 rng: np.random.Generator | None = None,
                 noise: np.ndarray | None = None):
        if temperature <= 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        self.temperature = temperature
        self.rng = rng
        self.noise = noise


def sample_gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    eps = 1e-20
    u = rng.uniform(size=shape)
    return -np.log(-np.log(u + eps) + eps)


def gumbel_st(logits: np.ndarray, cfg: GumbelConfig):
    """Straight-through sample: hard one-hot forward, soft probabilities for backward.

    Returns (hard, soft). The backward contract: gradients w.r.t. the hard
    output flow through the softmax relaxation `soft` (see gumbel_st_backward).
    """
    logits = np.asarray(logits, dtype=np.float64)
    _check_finite("logits", logits)
    if cfg.noise is not None:
        noise = np.broadcast_to(np.asarray(cfg.noise, dtype=np.float64), logits.shape)
    elif cfg.rng is not None:
        noise = sample_gumbel(cfg.rng, logits.shape)
    else:
        noise = np.zeros_like(logits)
    perturbed = (logits + noise) / cfg.temperature
    soft = softmax(perturbed)
    idx = np.argmax(perturbed, axis=-1)
    hard = np.zeros_like(soft)
    if soft.ndim == 1:
        hard[idx] = 1.0
    else:
        hard[np.arange(soft.shape[0]), idx] = 1.0
    return hard, soft


def gumbel_st_backward(soft: np.ndarray, dy: np.ndarray, temperature: float) -> np.ndarray:
    """Gradient w.r.t. logits through the soft path: softmax Jacobian / temperature."""
    inner = (dy * soft).sum(axis=-1, keepdims=True)
    return soft * (dy - inner) / temperature


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_ce(logits: np.ndarray, target_class) :
    """Cross-entropy of softmax(logits) against target class(es).

    For a batch, targets is an index array and the loss is the batch sum.
    Returns (loss, dlogits) with dlogits = softmax - one_hot(target).
    """
    logits = np.asarray(logits, dtype=np.float64)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    if logits.ndim == 1:
        t = int(target_class)
        if not 0 <= t < logits.shape[0]:
            raise IndexError(f"target {t} outside [0, {logits.shape[0]})")
        loss = -logp[t]
        dlogits = probs.copy()
        dlogits[t] -= 1.0
        return loss, dlogits
    targets = np.asarray(target_class, dtype=np.intp)
    if targets.min() < 0 or targets.max() >= logits.shape[1]:
        raise IndexError("target class outside logit range")
    rows = np.arange(logits.shape[0])
    loss = -logp[rows, targets].sum()
    dlogits = probs.copy()
    dlogits[rows, targets] -= 1.0
    return loss, dlogits
