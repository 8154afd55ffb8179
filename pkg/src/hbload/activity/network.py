"""Feed-forward regression networks trained with resilient backpropagation.

Hidden units are logistic, the single output unit is linear, and the error
is the sum of squared errors over the batch. Inputs are z-scored with
parameters stored on the model, so predictions are unaffected by affine
rescaling of the raw features.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

SHALLOW_HIDDEN = (6,)
DEEP_HIDDEN = (12, 8, 6, 3)
INIT_RANGE = 0.5


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


def _shapes(layer_sizes):
    return [(a, b) for a, b in zip(layer_sizes[:-1], layer_sizes[1:])]


def param_count(layer_sizes) -> int:
    return sum(a * b + b for a, b in _shapes(layer_sizes))


@dataclass(eq=False)
class MlpModel:
    layer_sizes: tuple[int, ...]
    params: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        if self.layer_sizes[-1] != 1:
            raise ValueError("network must have exactly one output unit")
        self.params = np.asarray(self.params, dtype=float)
        if self.params.size != param_count(self.layer_sizes):
            raise ValueError("parameter vector does not match layer sizes")
        self.x_mean = np.asarray(self.x_mean, dtype=float)
        self.x_std = np.asarray(self.x_std, dtype=float)
        if self.x_mean.shape != (self.n_inputs,) or self.x_std.shape != (self.n_inputs,):
            raise ValueError("standardization parameters do not match the input layer")
        self._views = _layer_views(self.params, self.layer_sizes)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.layer_sizes[1:-1]

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(weights[in, out], biases[out]) per layer, as views into ``params``."""
        return self._views

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, self.params.copy(), self.x_mean.copy(), self.x_std.copy())

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} inputs, got {X.shape[1]}")
        return (X - self.x_mean) / self.x_std

    def predict(self, X) -> np.ndarray:
        return mlp_forward(self, X)


def _layer_views(flat: np.ndarray, layer_sizes) -> list[tuple[np.ndarray, np.ndarray]]:
    views = []
    pos = 0
    for a, b in _shapes(layer_sizes):
        W = flat[pos : pos + a * b].reshape(a, b)
        pos += a * b
        views.append((W, flat[pos : pos + b]))
        pos += b
    return views


def mlp_init(layer_sizes, seed: int, x_mean=None, x_std=None) -> MlpModel:
    """Weights uniform in [-0.5, 0.5] from a seeded generator, biases zero."""
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2 or min(layer_sizes) < 1 or layer_sizes[-1] != 1:
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    params = np.zeros(param_count(layer_sizes))
    for W, _ in _layer_views(params, layer_sizes):
        W[...] = rng.uniform(-INIT_RANGE, INIT_RANGE, size=W.shape)
    d = layer_sizes[0]
    return MlpModel(
        layer_sizes,
        params,
        np.zeros(d) if x_mean is None else x_mean,
        np.ones(d) if x_std is None else x_std,
    )


def shallow_sizes(n_inputs: int) -> tuple[int, ...]:
    return (n_inputs, *SHALLOW_HIDDEN, 1)


def deep_sizes(n_inputs: int) -> tuple[int, ...]:
    return (n_inputs, *DEEP_HIDDEN, 1)


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward(model: MlpModel, Z: np.ndarray) -> list[np.ndarray]:
    acts = [Z]
    a = Z
    last = len(model.layers) - 1
    for i, (W, b) in enumerate(model.layers):
        z = a @ W + b
        a = z if i == last else _logistic(z)
        acts.append(a)
    return acts


def mlp_forward(model: MlpModel, X) -> np.ndarray:
    """Predictions for raw (unstandardized) inputs, one per row."""
    return _forward(model, model.standardize(X))[-1][:, 0]


def _sse_and_grad(model: MlpModel, Z: np.ndarray, y: np.ndarray, grad: np.ndarray) -> float:
    acts = _forward(model, Z)
    r = acts[-1][:, 0] - y
    delta = 2.0 * r[:, None]
    gviews = _layer_views(grad, model.layer_sizes)
    for i in range(len(model.layers) - 1, -1, -1):
        gW, gb = gviews[i]
        a_in = acts[i]
        np.matmul(a_in.T, delta, out=gW)
        gb[...] = delta.sum(axis=0)
        if i:
            W = model.layers[i][0]
            delta = (delta @ W.T) * a_in * (1.0 - a_in)
    return float(r @ r)


def sse(model: MlpModel, X, y) -> float:
    r = mlp_forward(model, X) - np.asarray(y, dtype=float)
    return float(r @ r)


def mlp_gradient(model: MlpModel, X, y) -> np.ndarray:
    """Gradient of the batch SSE with respect to ``model.params`` (same layout)."""
    Z = model.standardize(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != Z.shape[0] or y.size == 0:
        raise ValueError("batch must be non-empty with one target per row")
    grad = np.empty_like(model.params)
    _sse_and_grad(model, Z, y, grad)
    return grad


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.001  # initial per-weight step
    threshold: float = 0.001  # stop when max |dE/dw| falls below
    max_epochs: int = 100_000
    seed: int = 0
    step_min: float = 1e-6
    step_max: float = 50.0
    increase: float = 1.2
    decrease: float = 0.5

    def __post_init__(self):
        for name in ("learning_rate", "threshold", "step_min", "step_max", "increase", "decrease"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if not self.decrease < 1.0 < self.increase:
            raise ValueError("need decrease < 1 < increase")
        if self.step_min > self.step_max:
            raise ValueError("step_min exceeds step_max")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class TrainingResult:
    model: MlpModel
    history: np.ndarray  # SSE before each update, last entry is the final SSE
    epochs: int  # number of weight updates performed
    converged: bool
    config: TrainingConfig = field(default_factory=TrainingConfig)

    @property
    def exhausted(self) -> bool:
        return not self.converged

    @property
    def final_sse(self) -> float:
        return float(self.history[-1])


def train_rprop(model: MlpModel, X, y, config: TrainingConfig = TrainingConfig()) -> TrainingResult:
    """Full-batch iRPROP+ training; the input model is left untouched.

    Per-weight steps grow by ``increase`` while the gradient sign persists
    and shrink by ``decrease`` when it flips. On a flip the previous update
    of that weight is undone if the error went up, and its gradient memory
    is cleared. Training stops once every gradient component is below
    ``threshold`` or after ``max_epochs`` updates.

    Raises:
        TrainingError: the error became non-finite.
    """
    model = model.copy()
    Z = model.standardize(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != Z.shape[0] or y.size == 0:
        raise ValueError("dataset must be non-empty with one target per row")
    w = model.params
    P = w.size
    grad = np.empty(P)
    g_prev = np.zeros(P)
    dw_prev = np.zeros(P)
    step = np.full(P, config.learning_rate)
    history = np.empty(config.max_epochs + 1)
    err_prev = np.inf
    converged = False
    epoch = 0
    while True:
        err = _sse_and_grad(model, Z, y, grad)
        if not np.isfinite(err) or not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite error", epoch)
        history[epoch] = err
        if np.abs(grad).max() < config.threshold:
            converged = True
            break
        if epoch == config.max_epochs:
            break
        prod = grad * g_prev
        grow = prod > 0
        flip = prod < 0
        step[grow] = np.minimum(step[grow] * config.increase, config.step_max)
        step[flip] = np.maximum(step[flip] * config.decrease, config.step_min)
        dw = -np.sign(grad) * step
        if err > err_prev:
            dw[flip] = -dw_prev[flip]
        else:
            dw[flip] = 0.0
        grad[flip] = 0.0
        w += dw
        g_prev, grad = grad, g_prev
        dw_prev = dw
        err_prev = err
        epoch += 1
    return TrainingResult(model, history[: epoch + 1].copy(), epoch, converged, config)


def fit_network(X, y, hidden=SHALLOW_HIDDEN, config: TrainingConfig = TrainingConfig()) -> TrainingResult:
    """Standardize on ``X``, initialize from ``config.seed`` and train."""
    from .features import standardization

    X = np.asarray(X, dtype=float)
    mean, std = standardization(X)
    model = mlp_init((X.shape[1], *hidden, 1), config.seed, mean, std)
    return train_rprop(model, X, y, config)


def with_standardization(model: MlpModel, x_mean, x_std) -> MlpModel:
    return replace(model.copy(), x_mean=np.asarray(x_mean, float), x_std=np.asarray(x_std, float))
