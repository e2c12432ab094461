"""Fixed-shape multilayer perceptron with manual backprop and inverted dropout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatchError, StaleCacheError
from .layers import (
    IDENTITY,
    RELU,
    LayerParams,
    activate,
    activation_grad,
    as_rng,
    layer_backward,
    layer_forward,
    xavier_init,
)

TRAIN = "train"
INFER = "infer"


@dataclass
class ForwardCache:
    """Per-layer traces recorded by forward, consumed once by backward."""

    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    activated: list[np.ndarray]
    masks: list[np.ndarray | None]
    version: int


class Mlp:
    """A stack of dense layers with one activation per layer.

    Dropout (inverted, rate in [0, 1)) applies after hidden activations only,
    never to the output layer. Inference is deterministic.
    """

    def __init__(self, layers: list[LayerParams], activations: list[str], dropout_rate: float = 0.0):
        if len(layers) != len(activations):
            raise ShapeMismatchError("need exactly one activation per layer")
        if not layers:
            raise ShapeMismatchError("an Mlp needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeMismatchError(
                    f"layer out_dim {a.out_dim} does not chain into next in_dim {b.in_dim}"
                )
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        self.layers = layers
        self.activations = list(activations)
        self.dropout_rate = float(dropout_rate)
        self.version = 0

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def param_tensors(self) -> list[np.ndarray]:
        """Live parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.biases)
        return out

    def set_param_tensors(self, tensors: list[np.ndarray]) -> None:
        if len(tensors) != 2 * len(self.layers):
            raise ShapeMismatchError("tensor count does not match layer count")
        for layer, w, b in zip(self.layers, tensors[0::2], tensors[1::2]):
            if w.shape != layer.weights.shape or b.shape != layer.biases.shape:
                raise ShapeMismatchError("tensor shapes do not match this architecture")
            layer.weights = np.asarray(w, dtype=np.float64)
            layer.biases = np.asarray(b, dtype=np.float64)
        self.version += 1

    def copy(self) -> "Mlp":
        return Mlp([p.copy() for p in self.layers], list(self.activations), self.dropout_rate)

    def forward(
        self,
        x: np.ndarray,
        mode: str = INFER,
        rng: int | np.random.Generator = 0,
    ) -> tuple[np.ndarray, ForwardCache]:
        """Run the net on a (batch, in_dim) or (in_dim,) input.

        Returns the output with matching batch shape plus a cache for backward.
        """
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"input shape {x.shape} incompatible with in_dim {self.in_dim}")
        gen = as_rng(rng) if mode == TRAIN and self.dropout_rate > 0.0 else None

        inputs, preacts, activated, masks = [], [], [], []
        h = x
        last = len(self.layers) - 1
        for i, (params, kind) in enumerate(zip(self.layers, self.activations)):
            inputs.append(h)
            z = layer_forward(params, kind, h)
            a = activate(kind, z)
            preacts.append(z)
            activated.append(a)
            if gen is not None and i < last:
                keep = 1.0 - self.dropout_rate
                mask = (gen.random(a.shape) < keep) / keep
                masks.append(mask)
                h = a * mask
            else:
                masks.append(None)
                h = a
        cache = ForwardCache(inputs, preacts, activated, masks, self.version)
        return (h[0] if squeeze else h), cache

    def backward(
        self, cache: ForwardCache, output_grad: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        """Backpropagate dLoss/dOutput; returns (param grads aligned with
        param_tensors(), dLoss/dInput). Dropout masks from the forward pass are reused.
        """
        if cache.version != self.version:
            raise StaleCacheError("cache was produced by an earlier version of the parameters")
        g = np.asarray(output_grad, dtype=np.float64)
        squeeze = g.ndim == 1
        if squeeze:
            g = g[None, :]
        if g.shape != cache.activated[-1].shape:
            raise ShapeMismatchError(
                f"output_grad shape {g.shape} does not match output {cache.activated[-1].shape}"
            )
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            mask = cache.masks[i]
            if mask is not None:
                g = g * mask
            dz = activation_grad(self.activations[i], cache.preacts[i], cache.activated[i], g)
            dw, db, g = layer_backward(self.layers[i], self.activations[i], cache.inputs[i], dz)
            grads[2 * i] = dw
            grads[2 * i + 1] = db
        return grads, (g[0] if squeeze else g)


def make_mlp(
    in_dim: int,
    hidden: list[int],
    out_dim: int,
    hidden_activation: str = RELU,
    dropout_rate: float = 0.0,
    rng: int | np.random.Generator = 0,
) -> Mlp:
    """Xavier-initialized MLP with Identity output activation."""
    gen = as_rng(rng)
    dims = [in_dim, *hidden, out_dim]
    layers = [xavier_init(dims[i], dims[i + 1], gen) for i in range(len(dims) - 1)]
    activations = [hidden_activation] * len(hidden) + [IDENTITY]
    return Mlp(layers, activations, dropout_rate)


def input_gradients(mlp: Mlp, x: np.ndarray, output_grad: np.ndarray) -> np.ndarray:
    """dOutput.dot(output_grad)/dInput in inference mode (no dropout)."""
    _, cache = mlp.forward(x, mode=INFER)
    _, dx = mlp.backward(cache, output_grad)
    return dx
