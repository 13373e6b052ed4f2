"""Fixed VGG-style convolutional classifier on numpy arrays.

Layer stack: input dropout, three pairs of 3x3 'same' convolutions
(32/64/128 filters, ReLU, max-norm 3 kernels) separated by dropout,
flatten, a 256-unit ReLU dense layer (max-norm 3), dropout, and a 2-unit
softmax head. No pooling, stride 1 throughout, so spatial dims are
preserved up to the flatten.

Forward and backward passes are written out explicitly (im2col + matmul)
so that training is deterministic for a given seed and every gradient can
be checked against finite differences.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_MAX_NORM = 3.0

# (kind, arg) rows: dropout rate, conv filters, or dense units.
ARCHITECTURE = (
    ("dropout", 0.2),
    ("conv", 32),
    ("conv", 32),
    ("dropout", 0.2),
    ("conv", 64),
    ("conv", 64),
    ("dropout", 0.4),
    ("conv", 128),
    ("conv", 128),
    ("dropout", 0.4),
    ("flatten", None),
    ("dense", 256),
    ("dropout", 0.4),
    ("dense_out", 2),
)


def he_uniform_init(dims, fan_in: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Uniform draw on [-L, L) with L = sqrt(6 / fan_in)."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    limit = np.sqrt(6.0 / fan_in)
    draw_dtype = np.float32 if np.dtype(dtype) == np.float32 else np.float64
    u = rng.random(size=tuple(dims), dtype=draw_dtype)
    return (u * (2.0 * limit) - limit).astype(dtype, copy=False)


class Dropout:
    """Inverted dropout: active only in train mode, identity at inference."""

    def __init__(self, rate: float):
        self.rate = rate
        self._mask = None

    def forward(self, x, train: bool, rng):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = rng.random(size=x.shape) < keep
        return x * self._mask / keep

    def backward(self, g):
        if self._mask is None:
            return g
        return g * self._mask / (1.0 - self.rate)

    def describe(self):
        return {"type": "dropout", "rate": self.rate}


class Conv3x3:
    """3x3 convolution, 'same' zero padding, stride 1, ReLU, NHWC layout."""

    def __init__(self, name, in_ch, out_ch, rng, dtype=np.float32, max_norm=DEFAULT_MAX_NORM):
        self.name = name
        self.w = he_uniform_init((3, 3, in_ch, out_ch), 9 * in_ch, rng, dtype) \
            if rng is not None else np.zeros((3, 3, in_ch, out_ch), dtype=dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.max_norm = max_norm
        self.grads = {}

    def _cols(self, x):
        n, h, w, c = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        cols = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (n, h, w, c, 3, 3)
        return cols.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, 9 * c)

    def forward(self, x, train: bool, rng):
        n, h, w, c = x.shape
        cols = self._cols(x)
        z = cols @ self.w.reshape(-1, self.w.shape[-1]) + self.b
        self._cache = (cols, (n, h, w, c))
        self._relu_mask = z > 0
        return np.where(self._relu_mask, z, 0).reshape(n, h, w, -1)

    def backward(self, g):
        cols, (n, h, w, c) = self._cache
        out_ch = self.w.shape[-1]
        dz = g.reshape(-1, out_ch) * self._relu_mask
        self.grads = {
            "w": (cols.T @ dz).reshape(self.w.shape),
            "b": dz.sum(axis=0),
        }
        dcols = (dz @ self.w.reshape(-1, out_ch).T).reshape(n, h, w, 3, 3, c)
        dxp = np.zeros((n, h + 2, w + 2, c), dtype=g.dtype)
        for i in range(3):
            for j in range(3):
                dxp[:, i : i + h, j : j + w, :] += dcols[:, :, :, i, j, :]
        return dxp[:, 1:-1, 1:-1, :]

    def describe(self):
        return {
            "type": "conv",
            "filters": int(self.w.shape[-1]),
            "kernel": [3, 3],
            "activation": "relu",
            "max_norm": self.max_norm,
        }


class Flatten:
    def forward(self, x, train: bool, rng):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)

    def describe(self):
        return {"type": "flatten"}


class Dense:
    def __init__(self, name, in_dim, units, rng, dtype=np.float32,
                 relu=True, max_norm=DEFAULT_MAX_NORM):
        self.name = name
        self.w = he_uniform_init((in_dim, units), in_dim, rng, dtype) \
            if rng is not None else np.zeros((in_dim, units), dtype=dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.relu = relu
        self.max_norm = max_norm
        self.grads = {}

    def forward(self, x, train: bool, rng):
        z = x @ self.w + self.b
        self._x = x
        if self.relu:
            self._relu_mask = z > 0
            return np.where(self._relu_mask, z, 0)
        self._relu_mask = None
        return z

    def backward(self, g):
        dz = g * self._relu_mask if self._relu_mask is not None else g
        self.grads = {"w": self._x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.w.T

    def describe(self):
        return {
            "type": "dense",
            "units": int(self.w.shape[-1]),
            "activation": "relu" if self.relu else "softmax",
            "max_norm": self.max_norm,
        }


def parameter_shapes(input_dims) -> dict[str, tuple[int, ...]]:
    """Closed-form parameter shapes of the fixed stack, without allocation."""
    f, w, depth = input_dims
    shapes: dict[str, tuple[int, ...]] = {}
    in_ch = depth
    conv_i = dense_i = 0
    flat = None
    for kind, arg in ARCHITECTURE:
        if kind == "conv":
            conv_i += 1
            shapes[f"conv{conv_i}.w"] = (3, 3, in_ch, arg)
            shapes[f"conv{conv_i}.b"] = (arg,)
            in_ch = arg
        elif kind == "flatten":
            flat = f * w * in_ch
        elif kind in ("dense", "dense_out"):
            dense_i += 1
            shapes[f"dense{dense_i}.w"] = (flat, arg)
            shapes[f"dense{dense_i}.b"] = (arg,)
            flat = arg
    return shapes


def parameter_count(input_dims) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(input_dims).values())


class Network:
    """The fixed layer stack plus its parameter bookkeeping."""

    def __init__(self, layers, input_dims, dtype):
        self.layers = layers
        self.input_dims = tuple(int(d) for d in input_dims)
        self.dtype = dtype

    def _check_batch(self, x):
        if x.ndim != 4 or x.shape[1:] != self.input_dims:
            raise ValueError(
                f"batch shape {x.shape} does not match network input "
                f"(N, {', '.join(map(str, self.input_dims))})"
            )

    def forward_logits(self, x, mode: str = "infer", rng=None):
        if mode not in ("train", "infer"):
            raise ValueError(f"unknown mode {mode!r}")
        train = mode == "train"
        if train and rng is None:
            raise ValueError("train mode needs an rng for dropout masks")
        x = np.asarray(x, dtype=self.dtype)
        self._check_batch(x)
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x

    def forward(self, x, mode: str = "infer", rng=None):
        """Class probabilities, one row per batch element."""
        return softmax(self.forward_logits(x, mode, rng))

    def backward(self, dlogits):
        g = dlogits
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            if hasattr(layer, "w"):
                out[f"{layer.name}.w"] = layer.w
                out[f"{layer.name}.b"] = layer.b
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            if hasattr(layer, "w"):
                out[f"{layer.name}.w"] = layer.grads["w"]
                out[f"{layer.name}.b"] = layer.grads["b"]
        return out

    def constrained_weights(self) -> list[tuple[str, np.ndarray, float]]:
        """(name, kernel, limit) for every max-norm-constrained layer."""
        return [
            (f"{layer.name}.w", layer.w, layer.max_norm)
            for layer in self.layers
            if getattr(layer, "max_norm", None) is not None
        ]

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        own = self.params()
        if set(own) != set(params):
            raise ValueError(
                f"parameter names differ: {sorted(set(own) ^ set(params))}"
            )
        for name, arr in params.items():
            if own[name].shape != arr.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {own[name].shape} vs {arr.shape}"
                )
            own[name][...] = arr

    def describe(self) -> list[dict]:
        return [layer.describe() for layer in self.layers]

    def parameter_count(self) -> int:
        return sum(int(p.size) for p in self.params().values())


def build_network(input_dims, rng, dtype=np.float32) -> Network:
    """Construct the fixed stack for a (F, W, 1) input.

    Kernels are He-uniform, biases zero. Pass ``rng=None`` for zero
    weights (checkpoint loading, diagnostics). Spatial dims below the
    3x3 kernel are rejected.
    """
    if len(input_dims) != 3 or input_dims[2] != 1:
        raise ValueError(f"input dims must be (F, W, 1), got {tuple(input_dims)}")
    f, w, depth = (int(d) for d in input_dims)
    if f < 3 or w < 3:
        raise ValueError(
            f"spatial dims ({f}, {w}) are smaller than the 3x3 kernel"
        )
    layers = []
    in_ch = depth
    flat = None
    conv_i = dense_i = 0
    for kind, arg in ARCHITECTURE:
        if kind == "dropout":
            layers.append(Dropout(arg))
        elif kind == "conv":
            conv_i += 1
            layers.append(Conv3x3(f"conv{conv_i}", in_ch, arg, rng, dtype))
            in_ch = arg
        elif kind == "flatten":
            layers.append(Flatten())
            flat = f * w * in_ch
        elif kind == "dense":
            dense_i += 1
            layers.append(Dense(f"dense{dense_i}", flat, arg, rng, dtype,
                                relu=True, max_norm=DEFAULT_MAX_NORM))
            flat = arg
        elif kind == "dense_out":
            dense_i += 1
            layers.append(Dense(f"dense{dense_i}", flat, arg, rng, dtype,
                                relu=False, max_norm=None))
            flat = arg
    return Network(layers, input_dims, dtype)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    Stable log-sum-exp formulation; gradient is (p - onehot) / N.
    """
    labels = np.asarray(labels)
    n = logits.shape[0]
    zmax = logits.max(axis=1, keepdims=True)
    z = logits - zmax
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(n), labels]))
    p = softmax(logits)
    p[np.arange(n), labels] -= 1.0
    return loss, p / n


def loss_and_grads(net: Network, batch, labels, mode: str = "train", rng=None):
    """Sparse categorical cross-entropy and gradients for every parameter.

    Dropout masks drawn in the forward pass are reused in the backward
    pass. Labels must be 0 or 1.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty batch")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError(f"labels must be 0 or 1, got {np.unique(labels)}")
    logits = net.forward_logits(batch, mode, rng)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    net.backward(dlogits.astype(net.dtype, copy=False))
    return loss, net.grads()


def predict_probs(net: Network, inputs, chunk: int = 256) -> np.ndarray:
    """Inference-mode probabilities, computed in bounded-memory chunks."""
    parts = [net.forward(inputs[i : i + chunk]) for i in range(0, len(inputs), chunk)]
    return np.concatenate(parts, axis=0)
