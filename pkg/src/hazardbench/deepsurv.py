"""Multilayer perceptron risk model trained on the Cox partial likelihood.

The loss for log-risk outputs r = net(x) is

    l(theta) = -(1/N) sum_{i: event} [r_i - log sum_{j: Y_j >= Y_i} exp(r_j)]
               + lam * sum of squared weights

with N the number of events.  Tied times share risk sets (the >= rule), and
biases are not penalized.  Training is full-batch gradient descent with
momentum; forward and backward passes are written out in numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import MODEL_FORMAT_VERSION, NumericalError, UnfittableError, check_features
from .rng import SplitMix64

ACTIVATIONS = ("relu", "tanh", "linear")


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z, a, kind):
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray   # (fan_in, fan_out)
    bias: np.ndarray
    activation: str


@dataclass(frozen=True)
class TrainStats:
    epochs: int
    final_loss: float


@dataclass(frozen=True, eq=False)
class DeepSurvModel:
    layers: tuple[Layer, ...]
    l2_lambda: float = 0.0
    train_stats: TrainStats = TrainStats(0, float("nan"))
    init_seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        if self.layers[-1].weight.shape[1] != 1:
            raise ValueError("output layer must have width 1")
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("layer dimensions do not chain")
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.bias.shape != (layer.weight.shape[1],):
                raise ValueError("bias width does not match weight matrix")

    @property
    def n_features(self) -> int:
        return self.layers[0].weight.shape[0]

    def forward(self, X):
        """Output and the per-layer (pre-activation, activation) cache."""
        h = X
        cache = []
        for layer in self.layers:
            z = h @ layer.weight + layer.bias
            a = _act(z, layer.activation)
            cache.append((h, z, a))
            h = a
        return h[:, 0], cache

    def predict_risk(self, X) -> np.ndarray:
        X = check_features(X, self.n_features)
        return self.forward(X)[0]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in (layer.weight, layer.bias)]

    def with_parameters(self, params, **changes) -> DeepSurvModel:
        layers = tuple(Layer(np.array(params[2 * k], dtype=float),
                             np.array(params[2 * k + 1], dtype=float), layer.activation)
                       for k, layer in enumerate(self.layers))
        fields = {"l2_lambda": self.l2_lambda, "train_stats": self.train_stats,
                  "init_seed": self.init_seed, **changes}
        return DeepSurvModel(layers, **fields)

    def to_json(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "model": "deepsurv",
                "layers": [{"weight": l.weight.tolist(), "bias": l.bias.tolist(),
                            "activation": l.activation} for l in self.layers],
                "l2_lambda": self.l2_lambda, "init_seed": self.init_seed,
                "train_stats": {"epochs": self.train_stats.epochs,
                                "final_loss": self.train_stats.final_loss}}

    @classmethod
    def from_json(cls, d):
        layers = tuple(Layer(np.array(l["weight"], dtype=float).reshape(-1, len(l["bias"])),
                             np.array(l["bias"], dtype=float), l["activation"])
                       for l in d["layers"])
        return cls(layers, d["l2_lambda"], TrainStats(**d["train_stats"]), d["init_seed"])


def init_network(n_features: int, hidden=(16,), activation: str = "relu",
                 seed: int = 0) -> DeepSurvModel:
    """Weights uniform on +-1/sqrt(fan_in) from SplitMix64(seed); zero biases."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = SplitMix64(seed)
    sizes = [n_features, *hidden, 1]
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        u = np.array([rng.random() for _ in range(fan_in * fan_out)])
        w = (2.0 * u - 1.0) * bound
        act = "linear" if k == len(sizes) - 2 else activation
        layers.append(Layer(w.reshape(fan_in, fan_out), np.zeros(fan_out), act))
    return DeepSurvModel(tuple(layers), init_seed=seed)


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Risk sets R(Y_i) = {j : Y_j >= Y_i} of the event subjects.

    Stored compactly: ``order`` sorts subjects by ascending time and the
    risk set of event ``event_idx[k]`` is ``order[start[k]:]``.
    """

    order: np.ndarray
    event_idx: np.ndarray
    start: np.ndarray

    @property
    def n_events(self) -> int:
        return self.event_idx.shape[0]

    def members(self, k: int) -> np.ndarray:
        return np.sort(self.order[self.start[k]:])


def build_risk_sets(times, events) -> RiskSetIndex:
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    if times.size == 0:
        raise ValueError("empty sample")
    if not events.any():
        raise UnfittableError("partial-likelihood loss is undefined without events")
    order = np.argsort(times, kind="stable")
    event_idx = np.flatnonzero(events)
    start = np.searchsorted(times[order], times[event_idx], side="left")
    return RiskSetIndex(order, event_idx, start)


def partial_likelihood_loss(r, risk_sets: RiskSetIndex):
    """Mean negative log partial likelihood and its gradient in r."""
    r = np.asarray(r, dtype=np.float64)
    rs = r[risk_sets.order]
    # log of the suffix sums of exp(r), accumulated in log space
    log_suffix = np.logaddexp.accumulate(rs[::-1])[::-1]
    log_s = log_suffix[risk_sets.start]
    n_ev = risk_sets.n_events
    loss = -(r[risk_sets.event_idx] - log_s).sum() / n_ev
    # subject at sorted position p belongs to the risk sets with start <= p
    contrib = np.full(rs.shape[0], -np.inf)
    np.logaddexp.at(contrib, risk_sets.start, -log_s)
    log_cum = np.logaddexp.accumulate(contrib)
    grad_sorted = np.exp(rs + log_cum)
    grad = np.empty_like(r)
    grad[risk_sets.order] = grad_sorted
    grad[risk_sets.event_idx] -= 1.0
    return float(loss), grad / n_ev


def deepsurv_loss_and_gradients(model: DeepSurvModel, X, risk_sets: RiskSetIndex):
    """Loss and its gradients, ordered like ``model.parameters()``."""
    out, cache = model.forward(np.asarray(X, dtype=np.float64))
    loss, g_out = partial_likelihood_loss(out, risk_sets)
    lam = model.l2_lambda
    loss += lam * sum(float(np.sum(l.weight ** 2)) for l in model.layers)
    if not np.isfinite(loss):
        raise NumericalError("non-finite DeepSurv loss")
    grads = []
    delta = g_out[:, None]
    for layer, (h_in, z, a) in zip(reversed(model.layers), reversed(cache)):
        delta = delta * _act_grad(z, a, layer.activation)
        grads.append(delta.sum(axis=0))
        grads.append(h_in.T @ delta + 2.0 * lam * layer.weight)
        delta = delta @ layer.weight.T
    return loss, grads[::-1]


def deepsurv_fit(train, hidden=(16,), activation: str = "relu", learning_rate: float = 1e-3,
                 epochs: int = 500, l2_lambda: float = 1e-3, init_seed: int = 0,
                 momentum: float = 0.9) -> DeepSurvModel:
    """Full-batch gradient descent with heavy-ball momentum.

    Update: v <- momentum * v - learning_rate * grad; theta <- theta + v.
    """
    if epochs < 0 or learning_rate <= 0 or l2_lambda < 0 or not 0 <= momentum < 1:
        raise ValueError("invalid DeepSurv hyperparameters")
    if int(np.sum(train.event)) < 2:
        raise UnfittableError("DeepSurv needs at least 2 events")
    X = np.asarray(train.X, dtype=np.float64)
    risk_sets = build_risk_sets(train.time, train.event)
    model = init_network(X.shape[1], tuple(hidden), activation, init_seed)
    model = model.with_parameters(model.parameters(), l2_lambda=float(l2_lambda))
    params = [p.copy() for p in model.parameters()]
    velocity = [np.zeros_like(p) for p in params]
    for epoch in range(epochs):
        try:
            _, grads = deepsurv_loss_and_gradients(model, X, risk_sets)
        except NumericalError:
            raise NumericalError(f"DeepSurv training diverged at epoch {epoch}") from None
        for p, v, g in zip(params, velocity, grads):
            v *= momentum
            v -= learning_rate * g
            p += v
        model = model.with_parameters(params)
    final = deepsurv_loss_and_gradients(model, X, risk_sets)[0]
    return model.with_parameters(params, train_stats=TrainStats(int(epochs), float(final)))
