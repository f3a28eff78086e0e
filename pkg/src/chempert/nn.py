"""Differentiable MLP core on float64 numpy.

Provides affine/ReLU multilayer perceptrons with an identity final layer,
exact reverse-mode gradients via a cached forward tape, per-row input-gradient
norms, and the second-order parameter gradients of the mean input-gradient
norm (the adversary robustness penalty). The ReLU subgradient at 0 is 0, and
its almost-everywhere second derivative of 0 is used when differentiating
through the penalty, so finite-difference checks must stay away from kinks.

Also hosts the optimizer: adaptive moments with decoupled weight decay by
default (plain SGD behind ``kind="sgd"``) and a step learning-rate schedule
``lr = base_lr * factor ** (epoch // step_size)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "StaleTapeError",
    "NonFiniteError",
    "Layer",
    "GradientTape",
    "Mlp",
    "Optimizer",
]


class DimensionMismatchError(ValueError):
    pass


class StaleTapeError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def _check_finite(name: str, array: np.ndarray) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contains non-finite values")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class GradientTape:
    """Per-layer inputs and pre-activations cached by one forward pass."""

    inputs: list[np.ndarray]
    preactivations: list[np.ndarray]
    version: int


class Mlp:
    """Affine/ReLU stack; hidden layers ReLU, final layer identity."""

    def __init__(self, sizes: Sequence[int], seed: int | None = None):
        if len(sizes) < 2:
            raise ValueError("an Mlp needs at least input and output sizes")
        seeds = np.random.SeedSequence(seed).spawn(len(sizes) - 1)
        self.layers: list[Layer] = []
        for fan_in, fan_out, seq in zip(sizes[:-1], sizes[1:], seeds):
            rng = np.random.default_rng(seq)
            bound = 1.0 / np.sqrt(fan_in)
            weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            bias = rng.uniform(-bound, bound, size=fan_out)
            self.layers.append(Layer(weight, bias))
        self._version = 0

    @classmethod
    def from_layers(cls, layers: Iterable[tuple[np.ndarray, np.ndarray]]) -> "Mlp":
        mlp = cls.__new__(cls)
        mlp.layers = [
            Layer(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in layers
        ]
        if not mlp.layers:
            raise ValueError("at least one layer required")
        for prev, nxt in zip(mlp.layers[:-1], mlp.layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise DimensionMismatchError("layer dimensions do not chain")
        mlp._version = 0
        return mlp

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def version(self) -> int:
        return self._version

    def mark_updated(self) -> None:
        """Invalidate outstanding tapes after in-place parameter mutation."""
        self._version += 1

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.append(layer.weight)
            params.append(layer.bias)
        return params

    def copy(self) -> "Mlp":
        return Mlp.from_layers(
            (layer.weight.copy(), layer.bias.copy()) for layer in self.layers
        )

    def forward(self, batch: np.ndarray) -> tuple[np.ndarray, GradientTape]:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"expected batch of width {self.input_dim}, got {batch.shape}"
            )
        _check_finite("input batch", batch)
        inputs = []
        preacts = []
        activation = batch
        last = len(self.layers) - 1
        for k, layer in enumerate(self.layers):
            inputs.append(activation)
            pre = activation @ layer.weight.T + layer.bias
            preacts.append(pre)
            activation = pre if k == last else np.maximum(pre, 0.0)
        return activation, GradientTape(inputs, preacts, self._version)

    def backward(
        self, tape: GradientTape, output_grad: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        """Exact reverse-mode gradients of the forward map.

        Returns gradients aligned with :meth:`parameters` and the gradient
        with respect to the input batch.
        """
        if tape.version != self._version:
            raise StaleTapeError("parameters changed since this tape was recorded")
        output_grad = np.asarray(output_grad, dtype=np.float64)
        expected = (tape.inputs[0].shape[0], self.output_dim)
        if output_grad.shape != expected:
            raise DimensionMismatchError(
                f"output_grad shape {output_grad.shape}, expected {expected}"
            )
        _check_finite("output_grad", output_grad)
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.layers))
        delta = output_grad
        for k in range(len(self.layers) - 1, -1, -1):
            if k != len(self.layers) - 1:
                delta = delta * (tape.preactivations[k] > 0.0)
            grads[2 * k] = delta.T @ tape.inputs[k]
            grads[2 * k + 1] = delta.sum(axis=0)
            delta = delta @ self.layers[k].weight
        return grads, delta

    def _input_gradient(
        self, batch: np.ndarray
    ) -> tuple[np.ndarray, GradientTape, list[np.ndarray]]:
        """Per-row gradient of the summed outputs, plus the masked deltas."""
        _, tape = self.forward(batch)
        n_rows = tape.inputs[0].shape[0]
        deltas: list[np.ndarray] = [np.empty(0)] * len(self.layers)
        delta = np.ones((n_rows, self.output_dim))
        for k in range(len(self.layers) - 1, -1, -1):
            if k != len(self.layers) - 1:
                delta = delta * (tape.preactivations[k] > 0.0)
            deltas[k] = delta
            delta = delta @ self.layers[k].weight
        return delta, tape, deltas

    def input_gradient_norm(self, batch: np.ndarray) -> np.ndarray:
        """Row-wise L2 norm of d(sum of outputs)/d(input row)."""
        grad, _, _ = self._input_gradient(batch)
        return np.linalg.norm(grad, axis=1)

    def penalty_parameter_grads(self, batch: np.ndarray) -> list[np.ndarray]:
        """Gradient of mean-over-batch input-gradient norm w.r.t. parameters.

        Differentiates through the reverse pass that produced the input
        gradient, holding the ReLU masks fixed (their a.e. derivative);
        bias gradients are therefore exactly zero.
        """
        grad, tape, deltas = self._input_gradient(batch)
        n_rows = grad.shape[0]
        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        safe = np.where(norms > 0.0, norms, 1.0)
        upstream = np.where(norms > 0.0, grad / (n_rows * safe), 0.0)
        grads: list[np.ndarray] = []
        for layer in self.layers:
            grads.append(np.zeros_like(layer.weight))
            grads.append(np.zeros_like(layer.bias))
        for k in range(len(self.layers)):
            grads[2 * k] += deltas[k].T @ upstream
            upstream = upstream @ self.layers[k].weight.T
            if k != len(self.layers) - 1:
                upstream = upstream * (tape.preactivations[k] > 0.0)
        return grads


class Optimizer:
    """Adaptive-moment update with decoupled weight decay, or plain SGD.

    Owns first/second moment buffers per parameter and the step LR schedule.
    ``owners`` are objects with ``mark_updated()`` whose tapes must be
    invalidated when parameters change in place.
    """

    def __init__(
        self,
        params: Sequence[np.ndarray],
        lr: float,
        weight_decay: float = 0.0,
        kind: str = "adamw",
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        step_size: int = 100,
        decay_factor: float = 0.5,
        owners: Sequence = (),
    ):
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if kind not in ("adamw", "sgd"):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        self.params = list(params)
        self.base_lr = float(lr)
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.kind = kind
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_size = int(step_size)
        self.decay_factor = float(decay_factor)
        self.owners = list(owners)
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise DimensionMismatchError(
                f"{len(grads)} gradients for {len(self.params)} parameters"
            )
        for p, g in zip(self.params, grads):
            if p.shape != g.shape:
                raise DimensionMismatchError(
                    f"gradient shape {g.shape} does not match parameter {p.shape}"
                )
            _check_finite("gradient", g)
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if self.kind == "sgd":
                p -= self.lr * g + self.lr * self.weight_decay * p
                continue
            m = self.m[i]
            v = self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= self.lr * (
                m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p
            )
        for owner in self.owners:
            owner.mark_updated()

    def set_epoch(self, epoch: int) -> float:
        """Apply the step schedule for ``epoch`` and return the new rate."""
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        self.lr = self.base_lr * self.decay_factor ** (epoch // self.step_size)
        return self.lr
