"""Single-hidden-layer regression network.

Forward pass with a squashing hidden layer and a linear output, the
sum-of-squares error with a quadratic weight penalty (biases exempt), and
the exact backpropagated gradient.  Parameters flatten in a fixed canonical
order so the optimizer and the model file agree: W1 row-major, b1, W2
row-major, b2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NumericError, ShapeError

ACTIVATIONS = ("logistic", "tanh")

# rows-per-block cap keeps the N x n_hidden intermediates near 64 MB
_MAX_BLOCK_ELEMENTS = 1 << 23


def _readonly(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Immutable parameter bundle for a n_in -> n_hidden -> n_out network."""

    n_in: int
    n_hidden: int
    n_out: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "logistic"
    alpha: float = 0.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.alpha < 0:
            raise ShapeError("alpha must be >= 0")
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ShapeError("layer sizes must be >= 1")
        object.__setattr__(self, "w1", _readonly(self.w1, (self.n_in, self.n_hidden)))
        object.__setattr__(self, "b1", _readonly(self.b1, (self.n_hidden,)))
        object.__setattr__(self, "w2", _readonly(self.w2, (self.n_hidden, self.n_out)))
        object.__setattr__(self, "b2", _readonly(self.b2, (self.n_out,)))
        object.__setattr__(self, "alpha", float(self.alpha))
        for name in ("w1", "b1", "w2", "b2"):
            if not np.isfinite(getattr(self, name)).all():
                raise NumericError(f"non-finite values in {name}")

    @property
    def n_params(self) -> int:
        return self.n_in * self.n_hidden + self.n_hidden + self.n_hidden * self.n_out + self.n_out

    def flatten(self) -> np.ndarray:
        """Parameters in canonical order: W1 row-major, b1, W2 row-major, b2."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_params(self, theta: np.ndarray) -> "MlpModel":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got {theta.shape}")
        w1, b1, w2, b2 = _unpack(theta, self.n_in, self.n_hidden, self.n_out)
        return MlpModel(
            n_in=self.n_in,
            n_hidden=self.n_hidden,
            n_out=self.n_out,
            w1=w1.copy(),
            b1=b1.copy(),
            w2=w2.copy(),
            b2=b2.copy(),
            activation=self.activation,
            alpha=self.alpha,
        )

    @classmethod
    def init(
        cls,
        n_in: int,
        n_hidden: int,
        n_out: int = 1,
        activation: str = "logistic",
        alpha: float = 0.0,
        seed: int | np.random.Generator = 0,
    ) -> "MlpModel":
        """Seeded Gaussian init, std 1/sqrt(fan-in); biases start at zero."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        w1 = rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_in, n_hidden))
        w2 = rng.normal(0.0, 1.0 / math.sqrt(n_hidden), size=(n_hidden, n_out))
        return cls(
            n_in=n_in,
            n_hidden=n_hidden,
            n_out=n_out,
            w1=w1,
            b1=np.zeros(n_hidden),
            w2=w2,
            b2=np.zeros(n_out),
            activation=activation,
            alpha=alpha,
        )


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    """Validated (inputs, targets) pair; rows are independent samples."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(
                f"inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}"
            )
        if inputs.shape[0] == 0:
            raise ShapeError("batch must contain at least one row")
        if not np.isfinite(inputs).all() or not np.isfinite(targets).all():
            raise NumericError("batch contains non-finite values")
        object.__setattr__(self, "inputs", _readonly(inputs))
        object.__setattr__(self, "targets", _readonly(targets))

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]

    def subset(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs[idx], self.targets[idx]


def _unpack(theta: np.ndarray, n_in: int, n_hidden: int, n_out: int):
    a = n_in * n_hidden
    b = a + n_hidden
    c = b + n_hidden * n_out
    return (
        theta[:a].reshape(n_in, n_hidden),
        theta[a:b],
        theta[b:c].reshape(n_hidden, n_out),
        theta[c:],
    )


def _hidden(z: np.ndarray, activation: str) -> np.ndarray:
    return expit(z) if activation == "logistic" else np.tanh(z)


def _blocks(n_rows: int, n_hidden: int):
    rows = max(1, _MAX_BLOCK_ELEMENTS // max(1, n_hidden))
    for lo in range(0, n_rows, rows):
        yield lo, min(lo + rows, n_rows)


def _forward_blocks(x, w1, b1, w2, b2, activation) -> np.ndarray:
    y = np.empty((x.shape[0], w2.shape[1]))
    for lo, hi in _blocks(x.shape[0], w1.shape[1]):
        a = _hidden(x[lo:hi] @ w1 + b1, activation)
        y[lo:hi] = a @ w2 + b2
    return y


class _WorkBuffers:
    """Per-block scratch arrays reused across evaluations."""

    def __init__(self):
        self._cache: dict[tuple[int, int], tuple[np.ndarray, ...]] = {}

    def get(self, rows: int, n_hidden: int):
        key = (rows, n_hidden)
        if key not in self._cache:
            self._cache[key] = (
                np.empty((rows, n_hidden)),
                np.empty((rows, n_hidden)),
                np.empty((rows, n_hidden)),
            )
        return self._cache[key]


def _evaluate(theta, x, t, n_in, n_hidden, n_out, activation, alpha,
              want_grad, buffers: _WorkBuffers | None = None):
    """Error (and optionally flat gradient) at a flat parameter vector."""
    w1, b1, w2, b2 = _unpack(theta, n_in, n_hidden, n_out)
    buffers = buffers or _WorkBuffers()
    sse = 0.0
    if want_grad:
        g_w1 = np.zeros_like(w1)
        g_b1 = np.zeros_like(b1)
        g_w2 = np.zeros_like(w2)
        g_b2 = np.zeros_like(b2)
    for lo, hi in _blocks(x.shape[0], n_hidden):
        xb = x[lo:hi]
        a, da, scratch = buffers.get(hi - lo, n_hidden)
        np.matmul(xb, w1, out=a)
        a += b1
        if activation == "logistic":
            expit(a, out=a)
        else:
            np.tanh(a, out=a)
        r = a @ w2 + b2
        r -= t[lo:hi]
        sse += float((r * r).sum())
        if want_grad:
            g_w2 += a.T @ r
            g_b2 += r.sum(axis=0)
            np.matmul(r, w2.T, out=da)
            if activation == "logistic":
                # act' = a * (1 - a), applied without temporaries
                da *= a
                np.multiply(da, a, out=scratch)
                da -= scratch
            else:
                np.multiply(a, a, out=scratch)
                np.subtract(1.0, scratch, out=scratch)
                da *= scratch
            g_w1 += xb.T @ da
            g_b1 += da.sum(axis=0)
    value = 0.5 * sse + 0.5 * alpha * (float((w1 * w1).sum()) + float((w2 * w2).sum()))
    if not want_grad:
        return value, None
    g_w1 += alpha * w1
    g_w2 += alpha * w2
    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
    return value, grad


def _check_inputs(model: MlpModel, inputs) -> np.ndarray:
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.ndim != 2 or x.shape[1] != model.n_in:
        raise ShapeError(f"expected inputs with {model.n_in} columns, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NumericError("inputs contain non-finite values")
    return x


def forward(model: MlpModel, inputs) -> np.ndarray:
    """Network outputs, one row per input row; output layer is linear."""
    x = _check_inputs(model, inputs)
    return _forward_blocks(x, model.w1, model.b1, model.w2, model.b2, model.activation)


def _check_batch(model: MlpModel, batch: TrainingBatch) -> None:
    if batch.inputs.shape[1] != model.n_in:
        raise ShapeError(
            f"batch has {batch.inputs.shape[1]} input columns, model expects {model.n_in}"
        )
    if batch.targets.shape[1] != model.n_out:
        raise ShapeError(
            f"batch has {batch.targets.shape[1]} target columns, model expects {model.n_out}"
        )


def error(model: MlpModel, batch: TrainingBatch) -> float:
    """0.5 * sum of squared residuals + (alpha/2) * sum of squared weights."""
    _check_batch(model, batch)
    value, _ = _evaluate(
        model.flatten(), batch.inputs, batch.targets,
        model.n_in, model.n_hidden, model.n_out,
        model.activation, model.alpha, want_grad=False,
    )
    return value


def gradient(model: MlpModel, batch: TrainingBatch) -> np.ndarray:
    """Exact dE/dtheta in canonical flattening order."""
    _check_batch(model, batch)
    _, grad = _evaluate(
        model.flatten(), batch.inputs, batch.targets,
        model.n_in, model.n_hidden, model.n_out,
        model.activation, model.alpha, want_grad=True,
    )
    return grad


def error_and_gradient(model: MlpModel, batch: TrainingBatch) -> tuple[float, np.ndarray]:
    _check_batch(model, batch)
    return _evaluate(
        model.flatten(), batch.inputs, batch.targets,
        model.n_in, model.n_hidden, model.n_out,
        model.activation, model.alpha, want_grad=True,
    )


def make_objective(model: MlpModel, batch: TrainingBatch):
    """(fun, grad, fun_grad) callables over the flat parameter vector.

    The fused ``fun_grad`` shares the forward pass between the error and the
    gradient; all three reuse scratch buffers across calls.
    """
    _check_batch(model, batch)
    x, t = batch.inputs, batch.targets
    dims = (model.n_in, model.n_hidden, model.n_out)
    activation, alpha = model.activation, model.alpha
    buffers = _WorkBuffers()

    def fun(theta: np.ndarray) -> float:
        value, _ = _evaluate(theta, x, t, *dims, activation, alpha,
                             want_grad=False, buffers=buffers)
        return value

    def grad(theta: np.ndarray) -> np.ndarray:
        _, g = _evaluate(theta, x, t, *dims, activation, alpha,
                         want_grad=True, buffers=buffers)
        return g

    def fun_grad(theta: np.ndarray) -> tuple[float, np.ndarray]:
        return _evaluate(theta, x, t, *dims, activation, alpha,
                         want_grad=True, buffers=buffers)

    return fun, grad, fun_grad
