"""Model container: an ordered layer stack plus optimiser state.

Two architectures are built here.  Both share the same four-block
convolutional front end (16/32/64/128 filters of width 7, each block
conv -> batchnorm -> maxpool(4) -> relu), which turns a 1x1024 sweep into
128x4 = 512 features:

  classifier ("ssdc"): front end -> flatten -> linear 512->100 -> relu
                       -> linear 100->K
  autoencoder ("ae"):  front end -> flatten -> linear 512->10 (embedding)
                       -> linear 10->512 -> reshape 128x4 -> four decoder
                       blocks of batchnorm -> transposed conv (stride 4),
                       channels 128->64->32->16->1

The embedding boundary (``embed_end``) marks where 512-d (classifier) or
10-d (autoencoder) representations are read out for clustering.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError
from ..rng import PortableRng, derive_seed
from .layers import (
    LAYER_KINDS,
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Flatten,
    Layer,
    Linear,
    MaxPool1d,
    ReLU,
    Reshape1d,
)
from .optim import AdamConfig, adam_update

INPUT_BINS = 1024
CONV_CHANNELS = (16, 32, 64, 128)
KERNEL_SIZE = 7
POOL = 4
FLAT_FEATURES = 512
HIDDEN_UNITS = 100
EMBED_DIM = 10

_SALT_INIT = 0x5EED


class Model:
    """Layer stack with per-array Adam moments and a shared step counter."""

    def __init__(self, arch: str, layers: list[Layer], embed_end: int, num_clusters: int):
        self.arch = arch
        self.layers = layers
        self.embed_end = embed_end
        self.num_clusters = num_clusters
        self.t = 0
        self.epochs_trained = 0
        self.extra: dict[str, np.ndarray] = {}
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for key, arr in self._iter_arrays():
            self._moments[key] = (np.zeros_like(arr), np.zeros_like(arr))

    # -- parameter walking ---------------------------------------------------

    def _iter_arrays(self):
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                yield f"layer{i}.{name}", arr
        for name, arr in self.extra.items():
            yield f"extra.{name}", arr

    def register_extra(self, name: str, arr: np.ndarray) -> None:
        """Add a trainable array that is not part of the layer stack."""
        self.extra[name] = arr
        self._moments[f"extra.{name}"] = (np.zeros_like(arr), np.zeros_like(arr))

    def reset_moments(self, key: str) -> None:
        m, v = self._moments[key]
        m[:] = 0
        v[:] = 0

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    # -- forward / backward ----------------------------------------------------

    def forward(self, x: np.ndarray, train: bool, upto: int | None = None) -> tuple[np.ndarray, list]:
        caches = []
        out = x
        for layer in self.layers[:upto]:
            out, cache = layer.forward(out, train)
            caches.append(cache)
        return out, caches

    def backward(
        self,
        caches: list,
        grad_out: np.ndarray,
        tap_grad: np.ndarray | None = None,
    ) -> tuple[np.ndarray, list[dict[str, np.ndarray]]]:
        """Backprop through all forwarded layers.

        ``tap_grad``, if given, is added to the flowing gradient at the
        embedding boundary (used when a clustering loss pulls on the
        embeddings while a reconstruction loss pulls on the output).
        """
        grads: list[dict[str, np.ndarray]] = [{} for _ in caches]
        g = grad_out
        for i in range(len(caches) - 1, -1, -1):
            if tap_grad is not None and i == self.embed_end - 1:
                g = g + tap_grad
            g, layer_grads = self.layers[i].backward(caches[i], g)
            grads[i] = layer_grads
        return g, grads

    def embed(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        out, _ = self.forward(x, train, upto=self.embed_end)
        return out

    # -- optimisation ---------------------------------------------------------

    def adam_step(
        self,
        grads: list[dict[str, np.ndarray]],
        cfg: AdamConfig,
        extra_grads: dict[str, np.ndarray] | None = None,
    ) -> None:
        """One shared-counter Adam step over every trainable array."""
        self.t += 1
        for i, layer in enumerate(self.layers):
            layer_params = layer.params()
            for name, grad in grads[i].items():
                key = f"layer{i}.{name}"
                m, v = self._moments[key]
                adam_update(layer_params[name], grad, m, v, self.t, cfg)
        for name, grad in (extra_grads or {}).items():
            key = f"extra.{name}"
            m, v = self._moments[key]
            adam_update(self.extra[name], grad, m, v, self.t, cfg)

    # -- misc -------------------------------------------------------------------

    def copy(self) -> "Model":
        clone = Model.__new__(Model)
        clone.arch = self.arch
        clone.embed_end = self.embed_end
        clone.num_clusters = self.num_clusters
        clone.t = self.t
        clone.epochs_trained = self.epochs_trained
        clone.layers = [layer.astype(layer_dtype(layer)) for layer in self.layers]
        clone.extra = {k: arr.copy() for k, arr in self.extra.items()}
        clone._moments = {k: (m.copy(), v.copy()) for k, (m, v) in self._moments.items()}
        return clone

    def astype(self, dtype) -> "Model":
        clone = self.copy()
        clone.layers = [layer.astype(dtype) for layer in self.layers]
        clone.extra = {k: arr.astype(dtype) for k, arr in clone.extra.items()}
        clone._moments = {
            key: (np.zeros_like(arr), np.zeros_like(arr)) for key, arr in clone._iter_arrays()
        }
        return clone

    def check_shapes(self) -> tuple[int, ...]:
        shape: tuple[int, ...] = (1, INPUT_BINS)
        for layer in self.layers:
            shape = layer.out_shape(shape)
        return shape


def layer_dtype(layer: Layer):
    for arr in layer.params().values():
        return arr.dtype
    return np.float32


# ---------------------------------------------------------------------------
# initialisation


def _init_conv_like(w: np.ndarray, fan_in: int, rng: PortableRng) -> None:
    bound = float(np.sqrt(6.0 / fan_in))
    w[:] = rng.uniform(w.size, -bound, bound).reshape(w.shape).astype(w.dtype)


def init_weights(model: Model, seed: int) -> None:
    """He-style uniform init, bound sqrt(6/fan_in); biases start at zero.

    Each layer draws from its own child stream so the init of layer i does
    not depend on the sizes of the layers before it.
    """
    for i, layer in enumerate(model.layers):
        rng = PortableRng(derive_seed(seed, _SALT_INIT, i))
        if isinstance(layer, Conv1d):
            _init_conv_like(layer.w, layer.in_channels * layer.kernel_size, rng)
        elif isinstance(layer, ConvTranspose1d):
            _init_conv_like(layer.w, layer.in_channels * layer.kernel_size, rng)
        elif isinstance(layer, Linear):
            _init_conv_like(layer.w, layer.in_features, rng)


def _front_end() -> list[Layer]:
    layers: list[Layer] = []
    in_ch = 1
    for out_ch in CONV_CHANNELS:
        layers += [Conv1d(in_ch, out_ch, KERNEL_SIZE), BatchNorm1d(out_ch), MaxPool1d(POOL), ReLU()]
        in_ch = out_ch
    return layers


def build_classifier(k: int, seed: int) -> Model:
    """Feature extractor plus K-way head used by the deep-clustering loop."""
    if k < 2:
        raise ValueError("need at least two clusters")
    layers = _front_end() + [Flatten()]
    embed_end = len(layers)
    layers += [Linear(FLAT_FEATURES, HIDDEN_UNITS), ReLU(), Linear(HIDDEN_UNITS, k)]
    model = Model("ssdc", layers, embed_end, k)
    init_weights(model, seed)
    final = model.check_shapes()
    if final != (k,):
        raise ShapeError(f"classifier ends at {final}, expected ({k},)")
    return model


def build_autoencoder(seed: int, k: int = 10) -> Model:
    """Convolutional autoencoder with a 10-d bottleneck embedding."""
    layers = _front_end() + [Flatten(), Linear(FLAT_FEATURES, EMBED_DIM)]
    embed_end = len(layers)
    layers += [Linear(EMBED_DIM, FLAT_FEATURES), Reshape1d(CONV_CHANNELS[-1], 4)]
    dec_channels = (128, 64, 32, 16, 1)
    for cin, cout in zip(dec_channels[:-1], dec_channels[1:]):
        layers += [BatchNorm1d(cin), ConvTranspose1d(cin, cout, KERNEL_SIZE, POOL)]
    model = Model("ae", layers, embed_end, k)
    init_weights(model, seed)
    final = model.check_shapes()
    if final != (1, INPUT_BINS):
        raise ShapeError(f"autoencoder ends at {final}, expected (1, {INPUT_BINS})")
    return model


# ---------------------------------------------------------------------------
# complexity


def complexity_report(model: Model) -> tuple[int, float]:
    """(trainable parameter count, forward GFLOPs for one sweep).

    FLOPs convention: one MAC = 2 FLOPs; only conv, transposed conv and
    linear layers count; every output element costs its input fan-in MACs
    (which makes the decoder mirror the encoder).  Normalisation, pooling
    and activations are ignored.
    """
    params = model.param_count()
    shape: tuple[int, ...] = (1, INPUT_BINS)
    macs = 0
    for layer in model.layers:
        macs += layer.macs(shape)
        shape = layer.out_shape(shape)
    return params, 2.0 * macs / 1e9


def rebuild_layer(spec: dict) -> Layer:
    """Construct an uninitialised layer from its spec dict."""
    kind = spec.get("kind")
    if kind not in LAYER_KINDS:
        raise ShapeError(f"unknown layer kind {kind!r}")
    args = {k: v for k, v in spec.items() if k != "kind"}
    return LAYER_KINDS[kind](**args)
