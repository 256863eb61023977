"""Dense networks with explicit backpropagation and Adam.

An Mlp is a rectifier chain: z_i = h_{i-1} W_i^T + b_i, h_i = relu(z_i)
between hidden layers, with a configurable output activation (identity or
logistic sigmoid). Forward passes are batched, gradients are exact
reverse-mode, and the backward pass also returns the gradient with
respect to the input batch so a critic can be differentiated through its
action inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngStream

__all__ = ["Mlp", "AdamState", "adam_step"]

_OUT_ACTS = ("identity", "sigmoid")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Fully connected network; weights[i] has shape (n_out, n_in)."""

    def __init__(self, sizes, out_act: str = "identity", rng: RngStream | None = None,
                 final_scale: float | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if out_act not in _OUT_ACTS:
            raise ValueError(f"out_act must be one of {_OUT_ACTS}")
        self.sizes = list(int(s) for s in sizes)
        self.out_act = out_act
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = i == len(self.sizes) - 2
            if last and final_scale is not None:
                bound = float(final_scale)
            else:
                bound = 1.0 / np.sqrt(n_in)
            if rng is None:
                w = np.zeros((n_out, n_in))
                b = np.zeros(n_out)
            else:
                w = rng.uniforms(-bound, bound, (n_out, n_in))
                b = rng.uniforms(-bound, bound, n_out)
            self.weights.append(w)
            self.biases.append(b)
        self._cache = None

    # -- parameter plumbing ---------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        other = Mlp(self.sizes, out_act=self.out_act)
        for p_dst, p_src in zip(other.parameters(), self.parameters()):
            p_dst[...] = p_src
        return other

    # -- forward / backward -----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]}, expected {self.sizes[0]}")
        hs = [x]
        zs = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            zs.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_act == "sigmoid":
                h = _sigmoid(z)
            else:
                h = z
            hs.append(h)
        self._cache = (hs, zs)
        return h

    def out_preactivation(self) -> np.ndarray:
        """Output-layer z of the most recent forward batch."""
        if self._cache is None:
            raise RuntimeError("no forward pass cached")
        return self._cache[1][-1]

    def backward(self, dout: np.ndarray, dz_out: np.ndarray | None = None):
        """Per-parameter gradients plus the input-batch gradient.

        dout carries the loss gradient at the network output, already
        scaled by any batch averaging; returns (grads, dinput) where grads
        aligns with parameters(). dz_out, if given, is added to the
        output-layer pre-activation gradient; losses on z itself must
        enter here because routing them through dout would divide by the
        output derivative, which vanishes in the sigmoid tails.
        """
        if self._cache is None:
            raise RuntimeError("backward before forward")
        hs, zs = self._cache
        dout = np.atleast_2d(np.asarray(dout, dtype=float))
        last = len(self.weights) - 1
        if self.out_act == "sigmoid":
            s = hs[-1]
            delta = dout * s * (1.0 - s)
        else:
            delta = dout
        if dz_out is not None:
            delta = delta + dz_out
        grads: list[np.ndarray | None] = [None] * (2 * len(self.weights))
        for i in range(last, -1, -1):
            grads[2 * i] = delta.T @ hs[i]
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (zs[i - 1] > 0.0)
        dinput = delta @ self.weights[0]
        return grads, dinput


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], t=0)


def adam_step(params, grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One Adam update, in place, with bias correction."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("params, grads and state must align")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
