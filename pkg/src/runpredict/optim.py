"""Trainers: full-batch scaled conjugate gradient and seeded mini-batch SGD.

The SCG routine is a generic minimizer over (fun, grad) callables so tests
can drive it with analytic surrogates; ``train_scg`` wires it to the network
error.  Curvature along the search direction is estimated with a one-sided
gradient difference (scale sigma0/|d|) and a trust parameter lambda damps the
step: lambda is raised x4 when the comparison ratio falls below 0.25 and
cut x0.25 when it exceeds 0.75.  Steps with a negative comparison ratio are
rejected outright: parameters stay put and the direction resets to steepest
descent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .errors import DivergenceError, NumericError, NumericFailureError, ShapeError

LAMBDA_FLOOR = 1e-15
LAMBDA_CEILING = 1e100

_DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class ScgOptions:
    max_cycles: int = 75000
    grad_tol: float = 1e-8
    step_tol: float = 1e-12
    sigma0: float = 1e-4
    lambda_init: float = 1.0
    display: bool = False

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ShapeError("max_cycles must be >= 1")
        if min(self.grad_tol, self.step_tol, self.sigma0, self.lambda_init) <= 0:
            raise ShapeError("SCG tolerances and scales must be positive")


@dataclass(frozen=True)
class SgdOptions:
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    display: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ShapeError("learning rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ShapeError("batch_size must be >= 1 and epochs >= 0")


@dataclass(frozen=True)
class TrainingTrace:
    """Error and gradient norm per accepted cycle (cycle 0 = initial state)."""

    cycles: np.ndarray
    errors: np.ndarray
    grad_norms: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cycles", np.asarray(self.cycles, dtype=np.int64))
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=float))
        object.__setattr__(self, "grad_norms", np.asarray(self.grad_norms, dtype=float))

    def __len__(self) -> int:
        return self.cycles.shape[0]

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cycle", "error", "grad_norm"])
            for c, e, g in zip(self.cycles, self.errors, self.grad_norms):
                writer.writerow([int(c), repr(float(e)), repr(float(g))])


@dataclass
class _TraceBuilder:
    cycles: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)

    def add(self, cycle: int, err: float, gnorm: float) -> None:
        self.cycles.append(cycle)
        self.errors.append(err)
        self.grad_norms.append(gnorm)

    def build(self) -> TrainingTrace:
        return TrainingTrace(self.cycles, self.errors, self.grad_norms)


def scg_minimize(fun, grad, theta0, opts: ScgOptions | None = None, callback=None,
                 fun_grad=None):
    """Minimize ``fun`` from ``theta0``; returns (theta, trace).

    ``callback(cycle, theta, value)`` runs after each accepted step; return
    False to stop early.  ``fun_grad``, when given, evaluates value and
    gradient in one pass and is used for the post-step evaluation.  Raises
    NumericFailureError (carrying the last good parameters and partial
    trace) if a line evaluation goes non-finite or the trust parameter
    escapes its guard rails.
    """
    opts = opts or ScgOptions()
    if fun_grad is None:
        def fun_grad(th):
            return fun(th), np.asarray(grad(th), dtype=float)
    theta = np.array(theta0, dtype=float).ravel()
    n = theta.size
    tb = _TraceBuilder()

    f_now = float(fun(theta))
    if not math.isfinite(f_now):
        raise NumericError("objective is non-finite at the starting point")
    g = np.asarray(grad(theta), dtype=float)
    if not np.isfinite(g).all():
        raise NumericError("gradient is non-finite at the starting point")
    gnorm = float(np.linalg.norm(g))
    tb.add(0, f_now, gnorm)
    if gnorm < opts.grad_tol:
        return theta, tb.build()

    d = -g
    lam = opts.lambda_init
    n_success = 0

    for cycle in range(1, opts.max_cycles + 1):
        mu = float(d @ g)
        if mu >= 0:
            d = -g
            mu = float(d @ g)
        kappa = float(d @ d)
        if kappa < 1e-300:
            break
        sigma = opts.sigma0 / math.sqrt(kappa)
        g_probe = np.asarray(grad(theta + sigma * d), dtype=float)
        if not np.isfinite(g_probe).all():
            raise NumericFailureError(
                f"non-finite gradient during curvature probe at cycle {cycle}",
                params=theta, trace=tb.build(),
            )
        curvature = float(d @ (g_probe - g)) / sigma
        delta = curvature + lam * kappa
        if delta <= 0:
            # force a positive-definite local model along d
            delta = lam * kappa
            lam = lam - curvature / kappa
        alpha = -mu / delta
        theta_new = theta + alpha * d
        f_new, g_new = fun_grad(theta_new)
        f_new = float(f_new)
        if not math.isfinite(f_new):
            raise NumericFailureError(
                f"non-finite error during line evaluation at cycle {cycle}",
                params=theta, trace=tb.build(),
            )
        ratio = 2.0 * (f_new - f_now) / (alpha * mu)

        if ratio >= 0:
            step_inf = abs(alpha) * float(np.abs(d).max())
            theta = theta_new
            f_now = f_new
            g_old = g
            g = np.asarray(g_new, dtype=float)
            if not np.isfinite(g).all():
                raise NumericFailureError(
                    f"non-finite gradient after accepted step at cycle {cycle}",
                    params=theta, trace=tb.build(),
                )
            gnorm = float(np.linalg.norm(g))
            tb.add(cycle, f_now, gnorm)
            if opts.display:
                print(f"cycle {cycle}  error {f_now:.10e}")
            n_success += 1
            if n_success == n:
                d = -g
                n_success = 0
            else:
                gamma = float((g_old - g) @ g) / mu
                d = gamma * d - g
            if callback is not None and callback(cycle, theta, f_now) is False:
                break
            if gnorm < opts.grad_tol or step_inf < opts.step_tol:
                break
        else:
            # rejected: parameters unchanged, restart from steepest descent
            if lam >= LAMBDA_CEILING:
                raise NumericFailureError(
                    f"trust parameter hit its ceiling at cycle {cycle}",
                    params=theta, trace=tb.build(),
                )
            d = -g
            n_success = 0

        if ratio < 0.25:
            lam = min(4.0 * lam, LAMBDA_CEILING)
        elif ratio > 0.75:
            lam = max(0.25 * lam, LAMBDA_FLOOR)

    return theta, tb.build()


def train_scg(model: mlp.MlpModel, batch: mlp.TrainingBatch, opts: ScgOptions | None = None,
              callback=None) -> tuple[mlp.MlpModel, TrainingTrace]:
    """Full-batch SCG on the regularized network error; functional update."""
    fun, grad = mlp.make_objective(model, batch)
    try:
        theta, trace = scg_minimize(fun, grad, model.flatten(), opts, callback=callback)
    except NumericFailureError as exc:
        if exc.params is not None:
            exc.params = np.asarray(exc.params, dtype=float)
        raise
    return model.with_params(theta), trace


def train_sgd(model: mlp.MlpModel, batch: mlp.TrainingBatch,
              opts: SgdOptions | None = None) -> tuple[mlp.MlpModel, TrainingTrace]:
    """Shuffled mini-batch gradient descent; bit-reproducible per seed.

    The weight penalty on each mini-batch step is scaled by the batch
    fraction so one epoch applies it once in total.
    """
    opts = opts or SgdOptions()
    fun, grad = mlp.make_objective(model, batch)
    theta = model.flatten()
    n = batch.n_rows
    dims = (model.n_in, model.n_hidden, model.n_out)
    rng = np.random.default_rng(opts.seed)
    tb = _TraceBuilder()

    err = float(fun(theta))
    tb.add(0, err, float(np.linalg.norm(grad(theta))))
    for epoch in range(1, opts.epochs + 1):
        order = rng.permutation(n)
        for lo in range(0, n, opts.batch_size):
            idx = order[lo:lo + opts.batch_size]
            xb, yb = batch.subset(idx)
            scaled_alpha = model.alpha * (idx.size / n)
            _, g = mlp._evaluate(theta, xb, yb, *dims, model.activation,
                                 scaled_alpha, want_grad=True)
            theta = theta - opts.learning_rate * g
        err = float(fun(theta))
        if not math.isfinite(err) or err > _DIVERGENCE_LIMIT:
            raise DivergenceError(f"training error diverged at epoch {epoch}: {err!r}")
        tb.add(epoch, err, float(np.linalg.norm(grad(theta))))
        if opts.display:
            print(f"epoch {epoch}  error {err:.10e}")
    return model.with_params(theta), tb.build()
