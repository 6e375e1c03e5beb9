"""From-scratch 1-D network layers with explicit forward/backward passes.

Every layer follows the same protocol: ``forward(x, train)`` returns the
output plus an opaque cache, ``backward(cache, grad_out)`` returns the
gradient w.r.t. the input plus a dict of parameter gradients keyed like
``params()``.  Convolutions are written as seven shifted matmuls so the
heavy lifting stays inside BLAS.

Activations are (batch, channels, length) arrays except around Linear,
which works on (batch, features).  Layers compute in the dtype of their
parameters, so casting a layer to float64 makes the whole pass float64
(used by the finite-difference gradient checks).
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Layer:
    """Common protocol; concrete layers override what applies to them."""

    kind: str = "?"

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trainable arrays that still belong in a saved model."""
        return {}

    def forward(self, x: np.ndarray, train: bool) -> tuple[np.ndarray, object]:
        raise NotImplementedError

    def backward(self, cache: object, grad_out: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        raise NotImplementedError

    def out_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return shape

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.params().values())

    def macs(self, shape: tuple[int, ...]) -> int:
        """Multiply-accumulate count for one forward pass at this shape.

        Convention: every output element of a conv-like or linear layer
        costs its input fan-in MACs; everything else counts zero.
        """
        return 0

    def spec(self) -> dict:
        return {"kind": self.kind}

    def astype(self, dtype) -> "Layer":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        for name, arr in list(self.params().items()) + list(self.state().items()):
            setattr(clone, name, arr.astype(dtype))
        return clone


def _require_3d(x: np.ndarray, kind: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{kind} expects (batch, channels, length), got {x.shape}")


def _gemm_corr(xpad: np.ndarray, w: np.ndarray, length: int) -> np.ndarray:
    """Correlate an already padded block with w as a single matrix product.

    A stride-tricks window view exposes every kernel tap as a matrix row, so
    BLAS sees one (c_out, c_in * k) @ (c_in * k, batch * length) product
    instead of a Python loop of per-tap batched products.  The view aliases
    xpad, so the reshape below is the only copy made of the input.
    """
    batch = xpad.shape[0]
    cout, cin, ksize = w.shape
    sb, sc, se = xpad.strides
    view = np.lib.stride_tricks.as_strided(
        xpad,
        shape=(batch, cin, ksize, length),
        strides=(sb, sc, se, se),
        writeable=False,
    )
    col = view.transpose(1, 2, 0, 3).reshape(cin * ksize, batch * length)
    out = w.reshape(cout, cin * ksize) @ col
    return np.ascontiguousarray(out.reshape(cout, batch, length).transpose(1, 0, 2))


class Conv1d(Layer):
    """Stride-1 same-padding 1-D convolution (cross-correlation)."""

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 7, dtype=np.float32):
        if kernel_size % 2 != 1:
            raise ValueError("kernel size must be odd to keep length with same padding")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.pad = kernel_size // 2
        self.w = np.zeros((out_channels, in_channels, kernel_size), dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        _require_3d(x, self.kind)
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"conv1d expects {self.in_channels} channels, got {x.shape[1]}")
        batch, _, length = x.shape
        xpad = np.zeros((batch, self.in_channels, length + 2 * self.pad), dtype=x.dtype)
        xpad[:, :, self.pad : self.pad + length] = x
        if self.out_channels >= 4:
            y = _gemm_corr(xpad, self.w, length)
        else:
            # Window-view cost scales with out_channels; with so few output
            # rows the per-tap accumulation is cheaper than building the view.
            y = np.zeros((batch, self.out_channels, length), dtype=x.dtype)
            for t in range(self.kernel_size):
                y += np.matmul(self.w[:, :, t], xpad[:, :, t : t + length])
        y += self.b[:, None]
        return y, xpad

    def backward(self, cache, grad_out):
        xpad = cache
        batch, _, padded = xpad.shape
        length = padded - 2 * self.pad
        if self.in_channels >= 4:
            # Input gradient is the same correlation with the kernel flipped
            # along taps and transposed across channels.
            gpad = np.zeros((batch, self.out_channels, padded), dtype=grad_out.dtype)
            gpad[:, :, self.pad : self.pad + length] = grad_out
            wt = np.ascontiguousarray(self.w[:, :, ::-1].transpose(1, 0, 2))
            grad_x = _gemm_corr(gpad, wt, length)
        else:
            grad_xpad = np.zeros_like(xpad)
            for t in range(self.kernel_size):
                grad_xpad[:, :, t : t + length] += np.matmul(self.w[:, :, t].T, grad_out)
            grad_x = grad_xpad[:, :, self.pad : self.pad + length]
        sb, sc, se = xpad.strides
        view = np.lib.stride_tricks.as_strided(
            xpad,
            shape=(batch, self.in_channels, self.kernel_size, length),
            strides=(sb, sc, se, se),
            writeable=False,
        )
        col = view.transpose(1, 2, 0, 3).reshape(self.in_channels * self.kernel_size, batch * length)
        g2 = grad_out.transpose(1, 0, 2).reshape(self.out_channels, batch * length)
        grad_w = (g2 @ col.T).reshape(self.w.shape)
        grad_b = grad_out.sum(axis=(0, 2))
        return grad_x, {"w": grad_w, "b": grad_b}

    def macs(self, shape):
        _, length = shape
        return self.out_channels * length * self.in_channels * self.kernel_size

    def out_shape(self, shape):
        return (self.out_channels, shape[1])

    def spec(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
        }


class BatchNorm1d(Layer):
    """Per-channel batch normalisation over (batch, length).

    Train mode normalises with biased batch statistics and keeps an
    exponential running estimate (unbiased variance, PyTorch-style); eval
    mode applies the running stats, which makes inference batch-size
    independent.
    """

    kind = "batchnorm1d"

    def __init__(self, channels: int, dtype=np.float32):
        self.channels = channels
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, train):
        _require_3d(x, self.kind)
        if x.shape[1] != self.channels:
            raise ShapeError(f"batchnorm1d expects {self.channels} channels, got {x.shape[1]}")
        if train:
            if x.shape[0] < 2:
                raise ContractError("batchnorm1d train mode needs batch size >= 2")
            n = x.shape[0] * x.shape[2]
            mean = x.mean(axis=(0, 2), dtype=np.float64)
            var = x.var(axis=(0, 2), dtype=np.float64)
            unbiased = var * (n / (n - 1))
            m = BN_MOMENTUM
            self.running_mean[:] = ((1 - m) * self.running_mean + m * mean).astype(self.running_mean.dtype)
            self.running_var[:] = ((1 - m) * self.running_var + m * unbiased).astype(self.running_var.dtype)
            mean = mean.astype(x.dtype)
            inv = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
            xhat = (x - mean[:, None]) * inv[:, None]
            y = self.gamma[:, None] * xhat + self.beta[:, None]
            return y, (True, xhat, inv, n)
        inv = 1.0 / np.sqrt(self.running_var.astype(np.float64) + BN_EPS)
        inv = inv.astype(x.dtype)
        xhat = (x - self.running_mean[:, None]) * inv[:, None]
        y = self.gamma[:, None] * xhat + self.beta[:, None]
        return y, (False, xhat, inv, 0)

    def backward(self, cache, grad_out):
        trained, xhat, inv, n = cache
        grad_beta = grad_out.sum(axis=(0, 2))
        grad_gamma = (grad_out * xhat).sum(axis=(0, 2))
        dxhat = grad_out * self.gamma[:, None]
        if not trained:
            # running stats are constants in eval mode
            return dxhat * inv[:, None], {"gamma": grad_gamma, "beta": grad_beta}
        sum_dxhat = dxhat.sum(axis=(0, 2), keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        grad_x = (inv[:, None] / n) * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        return grad_x, {"gamma": grad_gamma, "beta": grad_beta}

    def spec(self):
        return {"kind": self.kind, "channels": self.channels}


class MaxPool1d(Layer):
    """Non-overlapping max pooling; ties give the whole gradient to the
    lowest index (argmax picks the first maximum)."""

    kind = "maxpool1d"

    def __init__(self, pool: int = 4):
        self.pool = pool

    def forward(self, x, train):
        _require_3d(x, self.kind)
        batch, ch, length = x.shape
        if length % self.pool != 0:
            raise ShapeError(f"length {length} not divisible by pool {self.pool}")
        xr = x.reshape(batch, ch, length // self.pool, self.pool)
        idx = xr.argmax(axis=3)
        y = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
        return y, (idx, length)

    def backward(self, cache, grad_out):
        idx, length = cache
        batch, ch, out_len = grad_out.shape
        grad_xr = np.zeros((batch, ch, out_len, self.pool), dtype=grad_out.dtype)
        np.put_along_axis(grad_xr, idx[..., None], grad_out[..., None], axis=3)
        return grad_xr.reshape(batch, ch, length), {}

    def out_shape(self, shape):
        return (shape[0], shape[1] // self.pool)

    def spec(self):
        return {"kind": self.kind, "pool": self.pool}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train):
        mask = x > 0
        return np.where(mask, x, x.dtype.type(0)), mask

    def backward(self, cache, grad_out):
        return np.where(cache, grad_out, grad_out.dtype.type(0)), {}


class Flatten(Layer):
    """(batch, channels, length) -> (batch, channels * length)."""

    kind = "flatten"

    def forward(self, x, train):
        _require_3d(x, self.kind)
        batch, ch, length = x.shape
        return x.reshape(batch, ch * length), (ch, length)

    def backward(self, cache, grad_out):
        ch, length = cache
        return grad_out.reshape(grad_out.shape[0], ch, length), {}

    def out_shape(self, shape):
        return (shape[0] * shape[1],)


class Reshape1d(Layer):
    """(batch, channels * length) -> (batch, channels, length)."""

    kind = "reshape1d"

    def __init__(self, channels: int, length: int):
        self.channels = channels
        self.length = length

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.channels * self.length:
            raise ShapeError(f"reshape1d expects (batch, {self.channels * self.length}), got {x.shape}")
        return x.reshape(x.shape[0], self.channels, self.length), None

    def backward(self, cache, grad_out):
        return grad_out.reshape(grad_out.shape[0], -1), {}

    def out_shape(self, shape):
        return (self.channels, self.length)

    def spec(self):
        return {"kind": self.kind, "channels": self.channels, "length": self.length}


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_features: int, out_features: int, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.w = np.zeros((out_features, in_features), dtype=dtype)
        self.b = np.zeros(out_features, dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"linear expects (batch, {self.in_features}), got {x.shape}")
        return x @ self.w.T + self.b, x

    def backward(self, cache, grad_out):
        x = cache
        grad_w = grad_out.T @ x
        grad_b = grad_out.sum(axis=0)
        grad_x = grad_out @ self.w
        return grad_x, {"w": grad_w, "b": grad_b}

    def macs(self, shape):
        return self.out_features * self.in_features

    def out_shape(self, shape):
        return (self.out_features,)

    def spec(self):
        return {"kind": self.kind, "in_features": self.in_features, "out_features": self.out_features}


class ConvTranspose1d(Layer):
    """Stride-4 transposed convolution that exactly 4x upsamples.

    With kernel 7, stride 4, padding 2 and output padding 1 the output
    length is 4 * L, mirroring the encoder's pool-by-4 reduction.
    """

    kind = "transposed_conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 7, stride: int = 4, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.pad = 2
        self.output_pad = 1
        # out_len = (L-1)*s - 2p + k + op must equal s*L
        if kernel_size - 2 * self.pad + self.output_pad != stride:
            raise ValueError("kernel/stride/padding combination does not 4x upsample")
        self.w = np.zeros((in_channels, out_channels, kernel_size), dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)

    def params(self):
        return {"w": self.w, "b": self.b}

    def _full_length(self, length: int) -> int:
        return (length - 1) * self.stride + self.kernel_size

    def forward(self, x, train):
        _require_3d(x, self.kind)
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"transposed_conv1d expects {self.in_channels} channels, got {x.shape[1]}")
        batch, _, length = x.shape
        out_len = self.stride * length
        # one GEMM produces every tap's contribution; the scatter below just
        # places them (taps t and t+stride overlap, so += not assignment)
        x2 = x.transpose(1, 0, 2).reshape(self.in_channels, batch * length)
        z = (self.w.reshape(self.in_channels, -1).T @ x2).reshape(
            self.out_channels, self.kernel_size, batch, length
        )
        full = np.zeros((batch, self.out_channels, self._full_length(length)), dtype=x.dtype)
        for t in range(self.kernel_size):
            # tap t lands on output positions t, t+stride, ...
            full[:, :, t : t + (length - 1) * self.stride + 1 : self.stride] += z[:, t].transpose(1, 0, 2)
        y = full[:, :, self.pad : self.pad + out_len] + self.b[:, None]
        return y, x

    def backward(self, cache, grad_out):
        x = cache
        batch, _, length = x.shape
        out_len = self.stride * length
        gfull = np.zeros((batch, self.out_channels, self._full_length(length)), dtype=grad_out.dtype)
        gfull[:, :, self.pad : self.pad + out_len] = grad_out
        # the strided window view gathers each tap's output slice, turning
        # both gradients into single matrix products
        sb, sc, se = gfull.strides
        view = np.lib.stride_tricks.as_strided(
            gfull,
            shape=(batch, self.out_channels, self.kernel_size, length),
            strides=(sb, sc, se, se * self.stride),
            writeable=False,
        )
        gcol = view.transpose(1, 2, 0, 3).reshape(self.out_channels * self.kernel_size, batch * length)
        w2 = self.w.reshape(self.in_channels, -1)
        grad_x = np.ascontiguousarray(
            (w2 @ gcol).reshape(self.in_channels, batch, length).transpose(1, 0, 2)
        )
        x2 = x.transpose(1, 0, 2).reshape(self.in_channels, batch * length)
        grad_w = (x2 @ gcol.T).reshape(self.w.shape)
        grad_b = grad_out.sum(axis=(0, 2))
        return grad_x, {"w": grad_w, "b": grad_b}

    def macs(self, shape):
        _, length = shape
        # fan-in per output element, symmetric with Conv1d.macs
        return self.out_channels * (self.stride * length) * self.in_channels * self.kernel_size

    def out_shape(self, shape):
        return (self.out_channels, shape[1] * self.stride)

    def spec(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
        }


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Conv1d, BatchNorm1d, MaxPool1d, ReLU, Flatten, Reshape1d, Linear, ConvTranspose1d)
}
