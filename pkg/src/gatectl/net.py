"""Dense dueling Q-network with manual backpropagation and Adam.

Everything is float64 numpy; there is no autodiff.  A network is a
shared encoder (ReLU hidden layers) feeding a scalar value head and a
d-output advantage head (ReLU hidden layers, linear outputs), combined
as Q = V + (A - mean_a A) by default.  The raw sum Q = V + A is kept as
a switch for ablation, but is unidentifiable and trains poorly.

Checkpoint format (stable; version 1): a numpy ``.npz`` archive with
  meta         JSON string: {"format": 1, "n_inputs", "n_actions",
               "encoder", "value_head", "advantage_head" (hidden widths),
               "aggregation", "seed", "step"}
  {group}.{i}.W / {group}.{i}.b   parameter arrays, group in
               {encoder, value, advantage}, i the layer index
  adam.{m|v}.{j}, adam.t          optimizer moments, present when the
               optimizer is checkpointed, j indexing ``parameters()``
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

AGGREGATIONS = ("mean", "raw")


def _write_npz(path, arrays: dict) -> None:
    """npz writer with pinned zip timestamps, so saves are byte-reproducible."""
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arrays[name]),
                                      allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


class DenseLayer:
    """Fully connected layer y = act(W x + b), act in {relu, linear}."""

    def __init__(self, n_in: int, n_out: int, activation: str):
        if activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {activation!r}")
        self.w = np.zeros((n_out, n_in))
        self.b = np.zeros(n_out)
        self.activation = activation

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (pre-activation z, output a) for a (B, n_in) batch."""
        z = x @ self.w.T + self.b
        a = np.maximum(z, 0.0) if self.activation == "relu" else z
        return z, a

    def backward(self, x, z, grad_out):
        """Gradients given upstream grad on the layer output.

        Returns (grad_w, grad_b, grad_x).
        """
        gz = grad_out * (z > 0) if self.activation == "relu" else grad_out
        return gz.T @ x, gz.sum(axis=0), gz @ self.w


class AdamOptimizer:
    """Adam on a fixed parameter list (shapes set at construction)."""

    def __init__(self, params: list[np.ndarray], learning_rate: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def _build_stack(n_in: int, hidden: tuple[int, ...], n_out: int,
                 output_activation: str = "linear") -> list[DenseLayer]:
    layers = []
    w = n_in
    for h in hidden:
        layers.append(DenseLayer(w, h, "relu"))
        w = h
    layers.append(DenseLayer(w, n_out, output_activation))
    return layers


class DuelingNet:
    """Observation -> per-action Q-values through encoder + dueling heads."""

    def __init__(self, n_inputs: int, n_actions: int,
                 encoder: tuple[int, ...] = (600, 600, 600),
                 heads: tuple[int, ...] = (600, 600, 600, 600),
                 aggregation: str = "mean", seed: int = 0):
        if aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
        if len(encoder) < 1:
            raise ValueError("encoder needs at least one hidden layer")
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.encoder_widths = tuple(int(w) for w in encoder)
        self.head_widths = tuple(int(w) for w in heads)
        self.aggregation = aggregation

        trunk_out = self.encoder_widths[-1]
        # Encoder hidden layers are all ReLU (its last hidden layer is the trunk output).
        self.encoder = _build_stack(n_inputs, self.encoder_widths[:-1],
                                    trunk_out, output_activation="relu")
        self.value = _build_stack(trunk_out, self.head_widths, 1)
        self.advantage = _build_stack(trunk_out, self.head_widths, n_actions)
        self.init_params(seed)

    # -- parameters ----------------------------------------------------

    def layers(self) -> list[DenseLayer]:
        return [*self.encoder, *self.value, *self.advantage]

    def parameters(self) -> list[np.ndarray]:
        """Live references in a fixed order (encoder, value, advantage)."""
        out = []
        for layer in self.layers():
            out.extend((layer.w, layer.b))
        return out

    def init_params(self, seed: int) -> None:
        """He-uniform weights, zero biases, deterministic in the seed."""
        rng = np.random.default_rng(seed)
        for layer in self.layers():
            limit = np.sqrt(6.0 / layer.w.shape[1])
            layer.w[...] = rng.uniform(-limit, limit, size=layer.w.shape)
            layer.b[...] = 0.0

    def architecture(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_actions": self.n_actions,
            "encoder": list(self.encoder_widths),
            "value_head": list(self.head_widths),
            "advantage_head": list(self.head_widths),
            "aggregation": self.aggregation,
        }

    def copy_from(self, source: "DuelingNet") -> None:
        """Overwrite parameters with a deep copy of another net's."""
        if self.architecture() != source.architecture():
            raise ValueError(
                f"architecture mismatch: {self.architecture()} vs {source.architecture()}"
            )
        for mine, theirs in zip(self.parameters(), source.parameters()):
            mine[...] = theirs

    def clone(self) -> "DuelingNet":
        twin = DuelingNet(self.n_inputs, self.n_actions, self.encoder_widths,
                          self.head_widths, self.aggregation, seed=0)
        twin.copy_from(self)
        return twin

    # -- forward / backward --------------------------------------------

    def _forward_stack(self, layers, x, cache=None):
        for layer in layers:
            z, a = layer.forward(x)
            if cache is not None:
                cache.append((x, z))
            x = a
        return x

    def _combine(self, v, a):
        if self.aggregation == "mean":
            return v + a - a.mean(axis=1, keepdims=True)
        return v + a

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Q-values; (W,) -> (d,) for one observation, (B, W) -> (B, d)."""
        obs = np.asarray(obs, dtype=np.float64)
        single = obs.ndim == 1
        x = obs[None, :] if single else obs
        if x.shape[1] != self.n_inputs:
            raise ValueError(f"observation width {x.shape[1]} != network input {self.n_inputs}")
        h = self._forward_stack(self.encoder, x)
        v = self._forward_stack(self.value, h)
        a = self._forward_stack(self.advantage, h)
        q = self._combine(v, a)
        return q[0] if single else q

    def _backward_stack(self, layers, caches, grad_out):
        grads = []
        for layer, (x, z) in zip(reversed(layers), reversed(caches)):
            gw, gb, grad_out = layer.backward(x, z, grad_out)
            grads.append(gb)
            grads.append(gw)
        grads.reverse()
        return grads, grad_out

    def loss_and_gradients(self, obs, actions, targets, is_weights):
        """Weighted MSE on the taken actions' Q-values, plus its gradient.

        Returns (loss, td_errors, grads) with grads ordered like
        ``parameters()``; td_errors are signed y - Q(s, a).
        """
        obs = np.asarray(obs, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        is_weights = np.asarray(is_weights, dtype=np.float64)
        n = obs.shape[0]
        if not (len(actions) == len(targets) == len(is_weights) == n):
            raise ValueError("batch arrays must share their leading dimension")
        if not np.all(np.isfinite(targets)):
            raise ValueError("non-finite targets in training batch")
        if np.any(is_weights <= 0):
            raise ValueError("importance-sampling weights must be positive")

        enc_cache, val_cache, adv_cache = [], [], []
        h = self._forward_stack(self.encoder, obs, enc_cache)
        v = self._forward_stack(self.value, h, val_cache)
        a = self._forward_stack(self.advantage, h, adv_cache)
        q = self._combine(v, a)
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite activations in forward pass")

        rows = np.arange(n)
        td = targets - q[rows, actions]
        loss = float(np.mean(is_weights * td * td))

        # d loss / d Q is nonzero only at the taken actions.
        gq = np.zeros_like(q)
        gq[rows, actions] = -2.0 * is_weights * td / n
        gv = gq.sum(axis=1, keepdims=True)
        if self.aggregation == "mean":
            ga = gq - gq.sum(axis=1, keepdims=True) / self.n_actions
        else:
            ga = gq
        val_grads, gh_v = self._backward_stack(self.value, val_cache, gv)
        adv_grads, gh_a = self._backward_stack(self.advantage, adv_cache, ga)
        enc_grads, _ = self._backward_stack(self.encoder, enc_cache, gh_v + gh_a)

        return loss, td, [*enc_grads, *val_grads, *adv_grads]

    def train_step(self, obs, actions, targets, is_weights, adam: AdamOptimizer):
        """One Adam update on a minibatch; returns (loss, |td errors|)."""
        loss, td, grads = self.loss_and_gradients(obs, actions, targets, is_weights)
        adam.step(self.parameters(), grads)
        return loss, np.abs(td)

    # -- persistence -----------------------------------------------------

    def save(self, path, adam: AdamOptimizer | None = None,
             seed: int = 0, step: int = 0) -> None:
        """Write a version-1 checkpoint (see module docstring for layout)."""
        meta = dict(self.architecture())
        meta.update({"format": 1, "seed": int(seed), "step": int(step)})
        arrays = {"meta": np.array(json.dumps(meta))}
        for group, layers in (("encoder", self.encoder), ("value", self.value),
                              ("advantage", self.advantage)):
            for i, layer in enumerate(layers):
                arrays[f"{group}.{i}.W"] = layer.w
                arrays[f"{group}.{i}.b"] = layer.b
        if adam is not None:
            arrays["adam.t"] = np.array(adam.t)
            for j, (m, v) in enumerate(zip(adam.m, adam.v)):
                arrays[f"adam.m.{j}"] = m
                arrays[f"adam.v.{j}"] = v
        _write_npz(path, arrays)

    @classmethod
    def load(cls, path, learning_rate: float = 0.001):
        """Read a checkpoint; returns (net, adam-or-None, meta dict)."""
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != 1:
                raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
            net = cls(meta["n_inputs"], meta["n_actions"],
                      encoder=tuple(meta["encoder"]),
                      heads=tuple(meta["value_head"]),
                      aggregation=meta["aggregation"], seed=0)
            for group, layers in (("encoder", net.encoder), ("value", net.value),
                                  ("advantage", net.advantage)):
                for i, layer in enumerate(layers):
                    layer.w[...] = data[f"{group}.{i}.W"]
                    layer.b[...] = data[f"{group}.{i}.b"]
            adam = None
            if "adam.t" in data:
                adam = AdamOptimizer(net.parameters(), learning_rate=learning_rate)
                adam.t = int(data["adam.t"])
                for j in range(len(adam.m)):
                    adam.m[j][...] = data[f"adam.m.{j}"]
                    adam.v[j][...] = data[f"adam.v.{j}"]
        return net, adam, meta
