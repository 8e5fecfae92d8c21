"""Minimal CNN engine: forward and reverse-mode gradients for the layer set
used by the classifier and its comparison models.

Layers operate on batched arrays [N, H, W, C] (or [N, features] after
Flatten) and return functional caches, so backward passes never share state
between invocations.  Convolutions are 3x3, stride 1, zero same-padding with
ReLU; pooling is 2x2 stride 2 with floor semantics.  All parameter updates
happen outside this module (see trainer).
"""

from __future__ import annotations

import io

import numpy as np
from numpy.lib.stride_tricks import as_strided

BN_MOMENTUM = 0.9
BN_EPSILON = 1e-5


# ---------------------------------------------------------------------------
# Batched kernels


def _im2col(x: np.ndarray) -> np.ndarray:
    """[N,H,W,C] -> [N*H*W, 9*C] patches of the zero-padded input."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    s = xp.strides
    cols = as_strided(xp, shape=(n, h, w, 3, 3, c),
                      strides=(s[0], s[1], s[2], s[1], s[2], s[3]))
    return np.ascontiguousarray(cols).reshape(n * h * w, 9 * c)


def conv2d_batch(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padding stride-1 cross-correlation plus bias (no activation)."""
    n, h, wd, _ = x.shape
    cout = w.shape[3]
    cols = _im2col(x)
    out = cols @ w.reshape(-1, cout) + b
    return out.reshape(n, h, wd, cout)


def avgpool_batch(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    v = x[:, : 2 * h2, : 2 * w2, :].reshape(n, h2, 2, w2, 2, c)
    return v.mean(axis=(2, 4))


def maxpool_batch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (pooled, argmax) with argmax in 0..3 row-major within each
    2x2 window; np.argmax takes the first maximum, giving the deterministic
    first-index tie-break."""
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    v = x[:, : 2 * h2, : 2 * w2, :].reshape(n, h2, 2, w2, 2, c)
    v = v.transpose(0, 1, 3, 2, 4, 5).reshape(n, h2, w2, 4, c)
    arg = v.argmax(axis=3)
    pooled = np.take_along_axis(v, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return pooled, arg


# ---------------------------------------------------------------------------
# Single-sample operation surface (used directly by tests and saliency)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One image [H,W,Cin] -> [H,W,Cout]; activation belongs to the layer."""
    if w.shape[:2] != (3, 3):
        raise ValueError("kernel must be 3x3")
    return conv2d_batch(np.asarray(x)[None], np.asarray(w), np.asarray(b))[0]


def pool2d_forward(x: np.ndarray, mode: str) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("pooling needs H >= 2 and W >= 2")
    if mode == "avg":
        return avgpool_batch(x[None])[0]
    if mode == "max":
        return maxpool_batch(x[None])[0][0]
    raise ValueError(f"unknown pooling mode {mode!r}")


def dropout(x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout: survivors scale by 1/(1-rate); inference is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must be in [0, 1)")
    x = np.asarray(x)
    if mode == "infer" or rate == 0.0:
        return x.copy()
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return x * (mask.astype(x.dtype) / (1.0 - rate))


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.asarray(x) @ np.asarray(w) + np.asarray(b)


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray,
                      mode: str, momentum: float = BN_MOMENTUM,
                      eps: float = BN_EPSILON) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (y, running_mean', running_var'); train mode uses batch stats
    (biased variance) and updates the running estimates."""
    x = np.asarray(x)
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("train-mode batch normalization needs batch size >= 2")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        y = gamma * (x - mean) / np.sqrt(var + eps) + beta
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
        return y, new_mean, new_var
    if mode == "infer":
        y = gamma * (x - running_mean) / np.sqrt(running_var + eps) + beta
        return y, running_mean, running_var
    raise ValueError(f"unknown mode {mode!r}")


def softmax_output(x: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax over the last axis; rows sum to 1."""
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Layers


class Layer:
    """Shape-aware layer; params/grads are parallel lists of arrays."""

    def build(self, in_shape: tuple, rng: np.random.Generator, dtype) -> tuple:
        raise NotImplementedError

    def params(self) -> list[np.ndarray]:
        return []

    def state(self) -> list[np.ndarray]:
        """Non-trained arrays that must survive checkpointing (BN stats)."""
        return []

    def forward(self, x: np.ndarray, train: bool, rng: np.random.Generator | None):
        raise NotImplementedError

    def backward(self, dout: np.ndarray, cache) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError

    def spec_line(self) -> str:
        raise NotImplementedError


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """3x3 same-padding stride-1 convolution with ReLU."""

    def __init__(self, filters: int):
        self.filters = filters
        self.w = None
        self.b = None

    def build(self, in_shape, rng, dtype):
        h, w, cin = in_shape
        fan = 9 * cin
        self.w = _glorot(rng, (3, 3, cin, self.filters), fan, 9 * self.filters, dtype)
        self.b = np.zeros(self.filters, dtype=dtype)
        return (h, w, self.filters)

    def params(self):
        return [self.w, self.b]

    def set_params(self, arrays):
        self.w, self.b = arrays

    def forward(self, x, train, rng):
        n, h, wd, _ = x.shape
        cols = _im2col(x)
        z = (cols @ self.w.reshape(-1, self.filters) + self.b).reshape(n, h, wd, self.filters)
        mask = z > 0
        return z * mask, (cols, mask, x.shape)

    def backward(self, dout, cache):
        cols, mask, x_shape = cache
        dz = dout * mask
        dz_flat = dz.reshape(-1, self.filters)
        dw = (cols.T @ dz_flat).reshape(self.w.shape)
        db = dz_flat.sum(axis=0)
        # dx = same-padding correlation of dz with the flipped, transposed kernel
        wf = self.w[::-1, ::-1].transpose(0, 1, 3, 2)
        dx = (_im2col(dz) @ wf.reshape(-1, wf.shape[3])).reshape(x_shape)
        return dx, [dw, db]

    def spec_line(self):
        return f"conv2d filters={self.filters}"


class AvgPool(Layer):
    def build(self, in_shape, rng, dtype):
        h, w, c = in_shape
        if h < 2 or w < 2:
            raise ValueError("pooling needs H >= 2 and W >= 2")
        return (h // 2, w // 2, c)

    def forward(self, x, train, rng):
        return avgpool_batch(x), x.shape

    def backward(self, dout, cache):
        x_shape = cache
        n, h, w, c = x_shape
        h2, w2 = h // 2, w // 2
        dx = np.zeros(x_shape, dtype=dout.dtype)
        # each source cell of a window receives 1/4 of the gradient
        up = np.repeat(np.repeat(dout, 2, axis=1), 2, axis=2) * 0.25
        dx[:, : 2 * h2, : 2 * w2, :] = up
        return dx, []

    def spec_line(self):
        return "avgpool"


class MaxPool(Layer):
    def build(self, in_shape, rng, dtype):
        h, w, c = in_shape
        if h < 2 or w < 2:
            raise ValueError("pooling needs H >= 2 and W >= 2")
        return (h // 2, w // 2, c)

    def forward(self, x, train, rng):
        pooled, arg = maxpool_batch(x)
        return pooled, (arg, x.shape)

    def backward(self, dout, cache):
        arg, x_shape = cache
        n, h, w, c = x_shape
        h2, w2 = h // 2, w // 2
        scatter = np.zeros((n, h2, w2, 4, c), dtype=dout.dtype)
        np.put_along_axis(scatter, arg[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
        v = scatter.reshape(n, h2, w2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, : 2 * h2, : 2 * w2, :] = v.reshape(n, 2 * h2, 2 * w2, c)
        return dx, []

    def spec_line(self):
        return "maxpool"


class Dropout(Layer):
    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("rate must be in [0, 1)")
        self.rate = rate

    def build(self, in_shape, rng, dtype):
        return in_shape

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dout, cache):
        if cache is None:
            return dout, []
        return dout * cache, []

    def spec_line(self):
        return f"dropout rate={self.rate!r}"


class Flatten(Layer):
    def build(self, in_shape, rng, dtype):
        size = 1
        for d in in_shape:
            size *= d
        return (size,)

    def forward(self, x, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache):
        return dout.reshape(cache), []

    def spec_line(self):
        return "flatten"


class Dense(Layer):
    def __init__(self, units: int, activation: str = "none"):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.units = units
        self.activation = activation
        self.w = None
        self.b = None

    def build(self, in_shape, rng, dtype):
        (n,) = in_shape
        self.w = _glorot(rng, (n, self.units), n, self.units, dtype)
        self.b = np.zeros(self.units, dtype=dtype)
        return (self.units,)

    def params(self):
        return [self.w, self.b]

    def set_params(self, arrays):
        self.w, self.b = arrays

    def forward(self, x, train, rng):
        z = x @ self.w + self.b
        if self.activation == "relu":
            mask = z > 0
            return z * mask, (x, mask)
        return z, (x, None)

    def backward(self, dout, cache):
        x, mask = cache
        dz = dout * mask if mask is not None else dout
        dw = x.T @ dz
        db = dz.sum(axis=0)
        return dz @ self.w.T, [dw, db]

    def spec_line(self):
        return f"dense units={self.units} activation={self.activation}"


class BatchNorm(Layer):
    def __init__(self, momentum: float = BN_MOMENTUM, epsilon: float = BN_EPSILON):
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = None
        self.beta = None
        self.running_mean = None
        self.running_var = None

    def build(self, in_shape, rng, dtype):
        (n,) = in_shape
        self.gamma = np.ones(n, dtype=dtype)
        self.beta = np.zeros(n, dtype=dtype)
        self.running_mean = np.zeros(n, dtype=dtype)
        self.running_var = np.ones(n, dtype=dtype)
        return in_shape

    def params(self):
        return [self.gamma, self.beta]

    def set_params(self, arrays):
        self.gamma, self.beta = arrays

    def state(self):
        return [self.running_mean, self.running_var]

    def set_state(self, arrays):
        self.running_mean, self.running_var = arrays

    def forward(self, x, train, rng):
        if train:
            if x.shape[0] < 2:
                raise ValueError("train-mode batch normalization needs batch size >= 2")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            xhat = (x - mean) * inv_std
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mean).astype(x.dtype)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var).astype(x.dtype)
            return self.gamma * xhat + self.beta, ("train", xhat, inv_std)
        inv_std = 1.0 / np.sqrt(self.running_var + self.epsilon)
        xhat = (x - self.running_mean) * inv_std
        return self.gamma * xhat + self.beta, ("infer", None, inv_std)

    def backward(self, dout, cache):
        mode, xhat, inv_std = cache
        if mode == "infer":
            # running stats are constants at inference; pure affine map
            return dout * self.gamma * inv_std, [np.zeros_like(self.gamma),
                                                 np.zeros_like(self.beta)]
        n = dout.shape[0]
        dgamma = (dout * xhat).sum(axis=0)
        dbeta = dout.sum(axis=0)
        dxhat = dout * self.gamma
        dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return dx, [dgamma, dbeta]

    def spec_line(self):
        return f"batchnorm momentum={self.momentum!r} epsilon={self.epsilon!r}"


class SoftmaxOutput(Layer):
    """Final dense layer producing K logits, followed by softmax.

    L2 regularization (lambda * sum(w^2)) applies to this layer's weight
    matrix only; its gradient contribution is added in backward.  backward
    expects the upstream gradient with respect to the LOGITS, which lets the
    caller fuse the softmax + cross-entropy derivative (probs - onehot) or
    seed a single logit for saliency.
    """

    def __init__(self, classes: int, l2_lambda: float = 0.0):
        self.classes = classes
        self.l2_lambda = l2_lambda
        self.w = None
        self.b = None

    def build(self, in_shape, rng, dtype):
        (n,) = in_shape
        self.w = _glorot(rng, (n, self.classes), n, self.classes, dtype)
        self.b = np.zeros(self.classes, dtype=dtype)
        return (self.classes,)

    def params(self):
        return [self.w, self.b]

    def set_params(self, arrays):
        self.w, self.b = arrays

    def forward(self, x, train, rng):
        logits = x @ self.w + self.b
        probs = softmax_output(logits).astype(x.dtype)
        return probs, (x, logits, probs)

    def backward(self, dlogits, cache):
        x, _, _ = cache
        dw = x.T @ dlogits + 2.0 * self.l2_lambda * self.w
        db = dlogits.sum(axis=0)
        return dlogits @ self.w.T, [dw, db]

    def spec_line(self):
        return f"softmax classes={self.classes} l2_lambda={self.l2_lambda!r}"


# ---------------------------------------------------------------------------
# Model


class Model:
    """Ordered layer stack with exactly one SoftmaxOutput, last."""

    def __init__(self, layers: list[Layer]):
        if not layers or not isinstance(layers[-1], SoftmaxOutput):
            raise ValueError("model must end with a SoftmaxOutput layer")
        if sum(isinstance(l, SoftmaxOutput) for l in layers) != 1:
            raise ValueError("model must contain exactly one SoftmaxOutput layer")
        self.layers = layers
        self.input_shape: tuple | None = None
        self.output_shapes: list[tuple] = []
        self.dtype = np.float64
        self._train_caches: list | None = None
        self._train_probs: np.ndarray | None = None

    @property
    def built(self) -> bool:
        return self.input_shape is not None

    def build(self, input_shape: tuple, seed: int = 0, dtype=np.float64) -> "Model":
        rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype).type
        self.input_shape = tuple(input_shape)
        self.output_shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng, self.dtype)
            self.output_shapes.append(shape)
        return self

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Probabilities for a batch; train mode records caches for backward."""
        if not self.built:
            raise RuntimeError("model is not built")
        x = np.asarray(x, dtype=self.dtype)
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train, rng)
            caches.append(cache)
        if train:
            self._train_caches = caches
            self._train_probs = x
        else:
            self._train_caches = None
            self._train_probs = None
        return x

    def backward(self, onehot: np.ndarray) -> list[np.ndarray]:
        """Gradients of (mean cross-entropy + L2 on the output layer) for every
        parameter, using the caches of the last train-mode forward."""
        if self._train_caches is None:
            raise RuntimeError("backward requires a preceding train-mode forward")
        n = onehot.shape[0]
        dlogits = (self._train_probs - onehot.astype(self.dtype)) / n
        grads, _ = self._backprop(dlogits, self._train_caches)
        return grads

    def _backprop(self, dlogits: np.ndarray, caches: list) -> tuple[list[np.ndarray], np.ndarray]:
        grads_rev: list[list[np.ndarray]] = []
        dout = dlogits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dout, g = layer.backward(dout, cache)
            grads_rev.append(g)
        flat = [a for g in reversed(grads_rev) for a in g]
        return flat, dout

    def logit_input_gradient(self, x: np.ndarray, class_index: int) -> np.ndarray:
        """d(logit of class_index)/d(input) per sample, inference mode.

        Caches stay local to this call, so concurrent invocations against one
        trained model do not interfere.
        """
        if not 0 <= class_index < self.layers[-1].classes:
            raise ValueError(f"class index {class_index} out of range")
        x = np.asarray(x, dtype=self.dtype)
        caches = []
        out = x
        for layer in self.layers:
            out, cache = layer.forward(out, False, None)
            caches.append(cache)
        dlogits = np.zeros(out.shape, dtype=self.dtype)
        dlogits[:, class_index] = 1.0
        _, dx = self._backprop(dlogits, caches)
        return dx

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(argmax class, probability rows); ties go to the lowest index."""
        probs = self.forward(x, train=False)
        return probs.argmax(axis=1), probs

    def snapshot(self) -> list[np.ndarray]:
        return [a.copy() for layer in self.layers for a in (*layer.params(), *layer.state())]

    def restore(self, snap: list[np.ndarray]) -> None:
        """Copy a snapshot back in place; existing array references (e.g. an
        optimizer's view of params()) stay valid."""
        arrays = [a for layer in self.layers for a in (*layer.params(), *layer.state())]
        if len(arrays) != len(snap):
            raise ValueError("snapshot does not match model structure")
        for dst, src in zip(arrays, snap):
            dst[...] = src

    def spec_lines(self) -> list[str]:
        return [layer.spec_line() for layer in self.layers]


# ---------------------------------------------------------------------------
# Presets

PRESET_NAMES = ("vgg_b_avg", "vgg_b_max", "simple_cnn", "mlp")


def build_preset(name: str, classes: int = 3,
                 conv_filters: tuple[int, int, int] = (32, 64, 128),
                 dense_units: int = 1024, dropout_rate: float = 0.25,
                 l2_lambda: float = 1e-5) -> Model:
    """Named model stacks; vgg_b_avg with the default sizes is the reference
    configuration (conv 32/64/64/128/128, dense 1024, softmax 3)."""
    f0, f1, f2 = conv_filters
    if name in ("vgg_b_avg", "vgg_b_max"):
        pool = AvgPool if name == "vgg_b_avg" else MaxPool
        layers = [
            Conv2D(f0), pool(), Dropout(dropout_rate),
            Conv2D(f1), Conv2D(f1), pool(), Dropout(dropout_rate),
            Conv2D(f2), Conv2D(f2), pool(), Dropout(dropout_rate),
            Flatten(),
            Dense(dense_units, activation="relu"),
            BatchNorm(),
            Dropout(dropout_rate),
            SoftmaxOutput(classes, l2_lambda),
        ]
    elif name == "simple_cnn":
        # no pooling, no hidden dense layer
        layers = [Conv2D(f0), Conv2D(f1), Flatten(), SoftmaxOutput(classes, l2_lambda)]
    elif name == "mlp":
        layers = [Flatten(), Dense(dense_units, activation="relu"),
                  Dropout(dropout_rate), SoftmaxOutput(classes, l2_lambda)]
    else:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    return Model(layers)


_LAYER_PARSERS = {
    "conv2d": lambda kw: Conv2D(int(kw["filters"])),
    "avgpool": lambda kw: AvgPool(),
    "maxpool": lambda kw: MaxPool(),
    "dropout": lambda kw: Dropout(float(kw["rate"])),
    "flatten": lambda kw: Flatten(),
    "dense": lambda kw: Dense(int(kw["units"]), kw.get("activation", "none")),
    "batchnorm": lambda kw: BatchNorm(float(kw.get("momentum", BN_MOMENTUM)),
                                      float(kw.get("epsilon", BN_EPSILON))),
    "softmax": lambda kw: SoftmaxOutput(int(kw["classes"]), float(kw.get("l2_lambda", 0.0))),
}


def model_from_spec_lines(lines: list[str]) -> Model:
    layers = []
    for line in lines:
        parts = line.split()
        kind, kw = parts[0], dict(p.split("=", 1) for p in parts[1:])
        if kind not in _LAYER_PARSERS:
            raise ValueError(f"unknown layer spec {line!r}")
        layers.append(_LAYER_PARSERS[kind](kw))
    return Model(layers)


# ---------------------------------------------------------------------------
# Checkpoint container

CHECKPOINT_MAGIC = b"LRISK"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: Model, config_lines: list[str],
                    extra_tensors: dict[str, np.ndarray] | None = None) -> None:
    """Container: magic, version, config text, layer spec text, then every
    tensor as a shape header plus little-endian float64 payload.  The write
    is deterministic, so identical models produce identical bytes."""
    extra_tensors = extra_tensors or {}
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC + b"\n")
    buf.write(f"version {CHECKPOINT_VERSION}\n".encode())
    buf.write(f"config {len(config_lines)}\n".encode())
    for line in config_lines:
        buf.write((line + "\n").encode())
    spec = model.spec_lines()
    buf.write(f"layers {len(spec)}\n".encode())
    for line in spec:
        buf.write((line + "\n").encode())
    buf.write(("input_shape " + " ".join(str(d) for d in model.input_shape) + "\n").encode())
    buf.write(f"dtype {np.dtype(model.dtype).name}\n".encode())

    tensors: list[tuple[str, np.ndarray]] = []
    for i, layer in enumerate(model.layers):
        names = _tensor_names(layer)
        for name, arr in zip(names, (*layer.params(), *layer.state())):
            tensors.append((f"layer{i:02d}.{name}", arr))
    for name in sorted(extra_tensors):
        tensors.append((f"extra.{name}", extra_tensors[name]))

    buf.write(f"tensors {len(tensors)}\n".encode())
    for name, arr in tensors:
        arr64 = np.ascontiguousarray(arr, dtype="<f8")
        dims = " ".join(str(d) for d in arr64.shape)
        buf.write(f"tensor {name} {arr64.ndim} {dims}\n".encode())
        buf.write(arr64.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _tensor_names(layer: Layer) -> list[str]:
    if isinstance(layer, Conv2D) or isinstance(layer, Dense) or isinstance(layer, SoftmaxOutput):
        return ["w", "b"]
    if isinstance(layer, BatchNorm):
        return ["gamma", "beta", "running_mean", "running_var"]
    return []


def load_checkpoint(path) -> tuple[Model, list[str], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def read_line() -> str:
        nonlocal pos
        end = blob.index(b"\n", pos)
        line = blob[pos:end].decode()
        pos = end + 1
        return line

    if read_line() != CHECKPOINT_MAGIC.decode():
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version = int(read_line().split()[1])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    n_config = int(read_line().split()[1])
    config_lines = [read_line() for _ in range(n_config)]
    n_layers = int(read_line().split()[1])
    spec = [read_line() for _ in range(n_layers)]
    input_shape = tuple(int(v) for v in read_line().split()[1:])
    dtype = np.dtype(read_line().split()[1])

    model = model_from_spec_lines(spec)
    model.build(input_shape, seed=0, dtype=dtype)

    n_tensors = int(read_line().split()[1])
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        header = read_line().split()
        name, ndim = header[1], int(header[2])
        shape = tuple(int(v) for v in header[3: 3 + ndim])
        count = 1
        for d in shape:
            count *= d
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += count * 8
        tensors[name] = arr

    extra: dict[str, np.ndarray] = {}
    for name, arr in tensors.items():
        if name.startswith("extra."):
            extra[name[len("extra."):]] = arr.copy()
            continue
        idx = int(name[5:7])
        field = name.split(".", 1)[1]
        layer = model.layers[idx]
        cast = arr.astype(model.dtype)
        names = _tensor_names(layer)
        n_p = len(layer.params())
        arrays = [*layer.params(), *layer.state()]
        arrays[names.index(field)] = cast
        if n_p:
            layer.set_params(arrays[:n_p])
        if len(arrays) > n_p:
            layer.set_state(arrays[n_p:])
    return model, config_lines, extra
