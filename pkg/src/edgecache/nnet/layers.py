"""Dense and LSTM layers with hand-written forward/backward passes.

Conventions:
  - all math in float64; batch is always the leading axis
  - forward(x) -> (y, cache); backward(cache, dy) -> (dx, grads)
  - grads are plain sums over the batch; losses apply the 1/B mean factor
  - weights init uniform in +-1/sqrt(fan_in) from the given generator
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError


def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _as_batch_2d(x, width: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != width:
        raise DimensionError(f"layer {name!r}: expected input of shape (batch, {width}), got {x.shape}")
    return x


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class DenseLayer:
    """Affine map y = act(x @ w + b); activation is 'identity' or 'relu'."""

    def __init__(self, input_size: int, output_size: int, activation: str = "identity", *, name: str = "dense", rng: np.random.Generator):
        if input_size < 1 or output_size < 1:
            raise DimensionError(f"layer {name!r}: widths must be >= 1")
        if activation not in ("identity", "relu"):
            raise ValueError(f"layer {name!r}: unknown activation {activation!r}")
        self.name = name
        self.input_size = input_size
        self.output_size = output_size
        self.activation = activation
        self.w = _uniform_init(rng, input_size, (input_size, output_size))
        self.b = np.zeros(output_size, dtype=np.float64)

    def forward(self, x):
        x = _as_batch_2d(x, self.input_size, self.name)
        z = x @ self.w + self.b
        y = np.maximum(z, 0.0) if self.activation == "relu" else z
        return y, (x, z)

    def backward(self, cache, dy):
        if cache is None:
            raise ValueError(f"layer {self.name!r}: backward called without a forward cache")
        x, z = cache
        dy = np.asarray(dy, dtype=np.float64)
        dz = dy * (z > 0) if self.activation == "relu" else dy
        grads = {"w": x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.w.T, grads

    def params(self):
        return [("w", self.w), ("b", self.b)]


class LstmLayer:
    """Single recurrent layer over a (batch, steps, input) sequence.

    Standard cell with input/forget/output gates and a tanh candidate; the
    gate blocks are laid out [i, f, g, o] along the last weight axis and the
    forget-gate bias starts at 1. Only the final hidden state is returned.
    """

    def __init__(self, input_size: int, hidden_size: int, *, name: str = "lstm", rng: np.random.Generator):
        if hidden_size < 1 or input_size < 1:
            raise DimensionError(f"layer {name!r}: sizes must be >= 1")
        self.name = name
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        self.wx = _uniform_init(rng, input_size, (input_size, 4 * h))
        self.wh = _uniform_init(rng, hidden_size, (hidden_size, 4 * h))
        self.b = np.zeros(4 * h, dtype=np.float64)
        self.b[h : 2 * h] = 1.0

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise DimensionError(
                f"layer {self.name!r}: expected input of shape (batch, steps, {self.input_size}), got {x.shape}"
            )
        batch, steps, _ = x.shape
        h = np.zeros((batch, self.hidden_size), dtype=np.float64)
        c = np.zeros((batch, self.hidden_size), dtype=np.float64)
        step_caches = []
        hs = self.hidden_size
        for t in range(steps):
            xt = x[:, t, :]
            a = xt @ self.wx + h @ self.wh + self.b
            i = _sigmoid(a[:, :hs])
            f = _sigmoid(a[:, hs : 2 * hs])
            g = np.tanh(a[:, 2 * hs : 3 * hs])
            o = _sigmoid(a[:, 3 * hs :])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            step_caches.append((xt, h, c, i, f, g, o, tanh_c))
            h, c = h_new, c_new
        return h, (x.shape, step_caches)

    def backward(self, cache, dh_last):
        if cache is None:
            raise ValueError(f"layer {self.name!r}: backward called without a forward cache")
        x_shape, step_caches = cache
        dh = np.asarray(dh_last, dtype=np.float64)
        dc = np.zeros_like(dh)
        dwx = np.zeros_like(self.wx)
        dwh = np.zeros_like(self.wh)
        db = np.zeros_like(self.b)
        dx = np.zeros(x_shape, dtype=np.float64)
        for t in range(len(step_caches) - 1, -1, -1):
            xt, h_prev, c_prev, i, f, g, o, tanh_c = step_caches[t]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc = dc * f
            da = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            dwx += xt.T @ da
            dwh += h_prev.T @ da
            db += da.sum(axis=0)
            dx[:, t, :] = da @ self.wx.T
            dh = da @ self.wh.T
        return dx, {"wx": dwx, "wh": dwh, "b": db}

    def params(self):
        return [("wx", self.wx), ("wh", self.wh), ("b", self.b)]


class Mlp:
    """Stack of dense layers; widths include the input width."""

    def __init__(self, widths, activations, *, name: str = "mlp", rng: np.random.Generator):
        if len(widths) < 2:
            raise DimensionError(f"network {name!r}: need at least one layer")
        if len(activations) != len(widths) - 1:
            raise DimensionError(f"network {name!r}: {len(widths) - 1} layers but {len(activations)} activations")
        self.name = name
        self.layers = [
            DenseLayer(widths[k], widths[k + 1], activations[k], name=f"{name}.{k}", rng=rng)
            for k in range(len(widths) - 1)
        ]

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, dy):
        if caches is None:
            raise ValueError(f"network {self.name!r}: backward called without a forward cache")
        grads = {}
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, layer_grads = layer.backward(cache, dy)
            for pname, g in layer_grads.items():
                grads[f"{layer.name}.{pname}"] = g
        return dy, grads

    def params(self):
        out = []
        for layer in self.layers:
            for pname, arr in layer.params():
                out.append((f"{layer.name}.{pname}", arr))
        return out


class LstmNetwork:
    """LSTM encoder over a sequence, optional side features, dense head.

    Covers every architecture in this package: sequence classifier/regressor
    (extra_size=0) and the Q-network (side features concatenated to the final
    hidden state before the head).
    """

    def __init__(
        self,
        input_size: int,
        hidden_size: int,
        extra_size: int,
        head_widths,
        head_activations,
        *,
        name: str = "net",
        rng: np.random.Generator,
    ):
        self.name = name
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.extra_size = extra_size
        self.lstm = LstmLayer(input_size, hidden_size, name=f"{name}.lstm", rng=rng)
        self.head = Mlp([hidden_size + extra_size, *head_widths], head_activations, name=f"{name}.head", rng=rng)
        self.output_size = head_widths[-1]

    def forward(self, seq, extra=None):
        h, lstm_cache = self.lstm.forward(seq)
        if self.extra_size:
            extra = _as_batch_2d(extra, self.extra_size, f"{self.name}.extra")
            z = np.concatenate([h, extra], axis=1)
        else:
            if extra is not None:
                raise DimensionError(f"network {self.name!r}: no extra features expected")
            z = h
        out, head_caches = self.head.forward(z)
        return out, (lstm_cache, head_caches)

    def backward(self, cache, dout):
        if cache is None:
            raise ValueError(f"network {self.name!r}: backward called without a forward cache")
        lstm_cache, head_caches = cache
        dz, grads = self.head.backward(head_caches, dout)
        dh = dz[:, : self.hidden_size]
        _, lstm_grads = self.lstm.backward(lstm_cache, dh)
        for pname, g in lstm_grads.items():
            grads[f"{self.lstm.name}.{pname}"] = g
        return grads

    def params(self):
        out = [(name, arr) for name, arr in ((f"{self.lstm.name}.{p}", a) for p, a in self.lstm.params())]
        out.extend(self.head.params())
        return out

    def param_arrays(self) -> dict[str, np.ndarray]:
        return dict(self.params())

    def copy_params_from(self, other: "LstmNetwork") -> None:
        """Overwrite parameters with another network's (same architecture)."""
        theirs = other.param_arrays()
        for name, arr in self.params():
            src = theirs[name.replace(self.name, other.name, 1)] if self.name != other.name else theirs[name]
            if src.shape != arr.shape:
                raise DimensionError(f"network {self.name!r}: parameter {name} shape mismatch")
            arr[...] = src
