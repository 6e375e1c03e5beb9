"""Finite-difference verification of analytic gradients.

Everything runs in float64 with central differences (step h).  Relative
error uses max(|analytic|, |numeric|, floor) in the denominator so
near-zero gradients compare on an absolute scale.

For whole networks the parameter space is too large to probe exhaustively,
so a seeded subset of coordinates per array is checked; inputs are probed
exhaustively when small.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..rng import PortableRng, derive_seed
from .layers import Layer
from .losses import mse_loss, softmax_cross_entropy
from .network import Model

_REL_FLOOR = 1e-4


def _rel_err(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), _REL_FLOOR)
    return abs(analytic - numeric) / denom


def _probe_coords(arr: np.ndarray, limit: int | None, rng: PortableRng) -> np.ndarray:
    flat = arr.size
    if limit is None or flat <= limit:
        return np.arange(flat)
    return rng.permutation(flat)[:limit]


def _numeric_vs_analytic(
    arrays: list[np.ndarray],
    analytic: list[np.ndarray],
    loss_fn: Callable[[], float],
    h: float,
    limit: int | None,
    rng: PortableRng,
) -> float:
    worst = 0.0
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in _probe_coords(arr, limit, rng):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn()
            flat[idx] = orig - h
            down = loss_fn()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * h)
            worst = max(worst, _rel_err(float(gflat[idx]), numeric))
    return worst


def grad_check_layer(
    layer: Layer,
    input_shape: tuple[int, ...],
    seed: int = 0,
    h: float = 1e-4,
    train: bool = True,
) -> float:
    """Max relative error between analytic and numeric grads for one layer.

    The scalar objective is sum(output * r) for a fixed random projection r,
    so the analytic gradient is one backward pass with grad_out = r.
    """
    rng = PortableRng(derive_seed(seed, 0xC0CC))
    layer64 = layer.astype(np.float64)
    x = rng.normal(int(np.prod(input_shape))).reshape(input_shape)
    # keep relu/pool inputs away from their kinks so h never crosses one
    x = np.where(np.abs(x) < 0.05, x + 0.1, x)
    out, cache = layer64.forward(x, train)
    r = rng.normal(out.size).reshape(out.shape)
    grad_x, grad_params = layer64.backward(cache, r)

    def loss_fn() -> float:
        y, _ = layer64.forward(x, train)
        return float((y * r).sum())

    names = sorted(grad_params)
    arrays = [x] + [layer64.params()[n] for n in names]
    analytic = [grad_x] + [grad_params[n] for n in names]
    return _numeric_vs_analytic(arrays, analytic, loss_fn, h, None, rng)


def grad_check_model(
    model: Model,
    input_shape: tuple[int, ...],
    loss: str,
    seed: int = 0,
    h: float = 1e-5,
    coords_per_array: int = 24,
    input_coords: int = 192,
) -> float:
    """Max relative error through a whole network plus its training loss.

    loss "ce" drives the classifier with fixed integer targets; loss "mse"
    reconstructs a fixed target tensor (decoupled from the input so the
    input gradient has a single path).

    The step is smaller than the single-layer default: a full network has
    tens of thousands of internal relu/pool kinks, and a 1e-4 step crosses
    one somewhere on almost every probe, which breaks central differences
    even when the analytic gradient is exact.  At 1e-5 crossings are rare
    and float64 cancellation noise is still orders below the tolerance.
    """
    rng = PortableRng(derive_seed(seed, 0xF00D))
    net = model.astype(np.float64)
    x = rng.normal(int(np.prod(input_shape))).reshape(input_shape)
    x = np.where(np.abs(x) < 0.05, x + 0.1, x)
    batch = input_shape[0]
    if loss == "ce":
        targets = rng.integers(batch, 0, model.num_clusters)

        def loss_fn() -> float:
            out, _ = net.forward(x, train=True)
            value, _ = softmax_cross_entropy(out, targets)
            return value

        out, caches = net.forward(x, train=True)
        _, grad_out = softmax_cross_entropy(out, targets)
    elif loss == "mse":
        out, caches = net.forward(x, train=True)
        target = rng.normal(out.size).reshape(out.shape)

        def loss_fn() -> float:
            pred, _ = net.forward(x, train=True)
            value, _ = mse_loss(target, pred)
            return value

        _, grad_out = mse_loss(target, out)
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grad_x, grads = net.backward(caches, grad_out)

    arrays: list[np.ndarray] = []
    analytic: list[np.ndarray] = []
    for i, layer in enumerate(net.layers):
        layer_params = layer.params()
        for name, grad in grads[i].items():
            arrays.append(layer_params[name])
            analytic.append(grad)
    worst = _numeric_vs_analytic(arrays, analytic, loss_fn, h, coords_per_array, rng)

    sub = PortableRng(derive_seed(seed, 0xF00D, 1))
    worst = max(
        worst,
        _numeric_vs_analytic([x], [grad_x], loss_fn, h, input_coords, sub),
    )
    return worst
