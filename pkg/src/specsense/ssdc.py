"""Self-supervised deep clustering of sweeps.

Each training round alternates two passes over the full dataset:

  clustering pass   embed every sweep (eval mode), project 512 -> 10 with
                    PCA, fit K-means, take the assignments as pseudo-labels
  learning pass     re-initialise the K-way head, then run one shuffled
                    epoch of cross-entropy training against those labels

Cluster ids carry no identity between rounds, so the head is zeroed rather
than kept or randomly re-drawn: with identical head rows the first batch's
loss is exactly ln K no matter how the pseudo-labels are permuted, and
every subsequent update is permutation-equivariant.  The head's Adam
moments are cleared with it.

After the last learning pass one extra clustering pass fits the final
ClusterModel on the final weights, so saved centroids match what the
deployed encoder actually produces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel, PcaBasis, kmeans_assign, kmeans_fit, pca_fit, pca_transform
from .data import Dataset, NormStats, normalize_bins
from .errors import ContractError, InsufficientDataError, NumericError
from .nn import AdamConfig, Linear, Model, build_classifier, softmax, softmax_cross_entropy
from .rng import PortableRng, derive_seed

EMBED_CHUNK = 256

_SALT_SHUFFLE = 0x0EF0
_SALT_ROUND = 0x0A1B


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the alternating training loop (defaults follow the
    reference operating point: Adam 1e-3 with 1e-5 decay, batch 256,
    K = 10 clusters, 10-d clustering space)."""

    epochs: int = 250
    batch_size: int = 256
    k: int = 10
    embed_dim: int = 10
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    reinit_head_each_round: bool = True
    refit_pca_each_round: bool = True
    reset_bn_each_round: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2 (batchnorm needs it)")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 1 <= self.embed_dim <= 512:
            raise ValueError("embed_dim must lie in [1, 512]")


@dataclass
class RoundStats:
    round: int
    inertia: float
    ce_loss: float
    cluster_sizes: list[int]
    elapsed_s: float


@dataclass
class TrainReport:
    arch: str
    config: TrainConfig
    rounds: list[RoundStats]
    final_inertia: float
    final_cluster_sizes: list[int]
    final_labels: np.ndarray
    cluster_model: ClusterModel
    model: Model
    param_count: int


def build_ssdc(k: int = 10, seed: int = 0) -> Model:
    """Classifier with a K-way head; identical seeds give identical weights."""
    return build_classifier(k, seed)


def _require_normalized(dataset: Dataset) -> None:
    if dataset.norm_stats is None:
        raise ContractError("dataset must be normalized before embedding/training")


def embed_batch(model: Model, dataset: Dataset) -> np.ndarray:
    """Eval-mode embeddings for every sweep, shape (n, 512) float32.

    Runs in fixed-size chunks; batchnorm uses running stats in eval mode so
    the result does not depend on the chunking.
    """
    _require_normalized(dataset)
    return embed_array(model, dataset.bins)


def embed_array(model: Model, bins: np.ndarray) -> np.ndarray:
    x = np.asarray(bins, dtype=np.float32)
    if x.ndim == 1:
        x = x[None, :]
    out = np.empty((len(x), _embed_width(model)), dtype=np.float32)
    for start in range(0, len(x), EMBED_CHUNK):
        chunk = x[start : start + EMBED_CHUNK]
        out[start : start + len(chunk)] = model.embed(chunk[:, None, :], train=False)
    return out


def _embed_width(model: Model) -> int:
    shape: tuple[int, ...] = (1, 1024)
    for layer in model.layers[: model.embed_end]:
        shape = layer.out_shape(shape)
    return int(np.prod(shape))


def clustering_round(
    model: Model,
    dataset: Dataset,
    cfg: TrainConfig,
    round_index: int = 0,
    pca: PcaBasis | None = None,
) -> tuple[np.ndarray, ClusterModel]:
    """One pseudo-labelling pass: embed, project, K-means.

    Pass a basis from an earlier round to skip refitting (the
    refit_pca_each_round=False path).  The returned labels are exactly the
    assignment of the returned ClusterModel on these embeddings.
    """
    _require_normalized(dataset)
    if len(dataset) < cfg.k:
        raise InsufficientDataError(f"need at least k={cfg.k} sweeps, got {len(dataset)}")
    emb = embed_batch(model, dataset).astype(np.float64)
    if pca is None or cfg.refit_pca_each_round:
        pca = pca_fit(emb, cfg.embed_dim)
    pts = pca_transform(pca, emb)
    cm = kmeans_fit(pts, cfg.k, seed=derive_seed(cfg.seed, _SALT_ROUND, round_index), pca=pca)
    labels, _ = kmeans_assign(cm, pts)
    return labels, cm


def reinit_head(model: Model) -> None:
    """Zero the final linear layer and its optimiser moments.

    Pseudo-label ids are arbitrary, so the head must not prefer any class:
    zero rows make the first step's loss exactly ln K and keep training
    equivariant under label permutations.
    """
    head = model.layers[-1]
    if not isinstance(head, Linear):
        raise ContractError("model has no linear head to re-initialise")
    head.w[:] = 0
    head.b[:] = 0
    idx = len(model.layers) - 1
    model.reset_moments(f"layer{idx}.w")
    model.reset_moments(f"layer{idx}.b")


def reset_bn_running_stats(model: Model) -> None:
    for layer in model.layers:
        state = layer.state()
        if "running_mean" in state:
            state["running_mean"][:] = 0
            state["running_var"][:] = 1


def learning_round(
    model: Model,
    dataset: Dataset,
    pseudo_labels: np.ndarray,
    cfg: TrainConfig,
) -> tuple[Model, float]:
    """One shuffled epoch of cross-entropy training on pseudo-labels.

    Mutates the model in place and returns it with the sample-weighted mean
    batch loss.  A trailing batch of size 1 is dropped (batchnorm cannot
    normalise it).  The shuffle order is derived from the model's epoch
    counter so training is reproducible and resumable.
    """
    _require_normalized(dataset)
    labels = np.asarray(pseudo_labels)
    if labels.shape != (len(dataset),):
        raise ContractError("pseudo labels must align with the dataset")
    if labels.min() < 0 or labels.max() >= model.num_clusters:
        raise ContractError(f"pseudo labels must lie in [0, {model.num_clusters})")
    if cfg.reset_bn_each_round:
        reset_bn_running_stats(model)
    if cfg.reinit_head_each_round:
        reinit_head(model)
    rng = PortableRng(derive_seed(cfg.seed, _SALT_SHUFFLE, model.epochs_trained))
    order = rng.permutation(len(dataset))
    total_loss = 0.0
    total_seen = 0
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        if len(idx) < 2:
            continue
        x = dataset.bins[idx][:, None, :]
        logits, caches = model.forward(x, train=True)
        loss, grad = softmax_cross_entropy(logits, labels[idx])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss in round {model.epochs_trained}")
        _, grads = model.backward(caches, grad)
        model.adam_step(grads, cfg.adam)
        total_loss += loss * len(idx)
        total_seen += len(idx)
    model.epochs_trained += 1
    if total_seen == 0:
        raise InsufficientDataError("no trainable batch (need at least 2 sweeps)")
    return model, total_loss / total_seen


def train_ssdc(dataset: Dataset, cfg: TrainConfig) -> TrainReport:
    """Full alternating loop plus a final clustering pass on final weights."""
    _require_normalized(dataset)
    if len(dataset) < cfg.k:
        raise InsufficientDataError(f"need at least k={cfg.k} sweeps, got {len(dataset)}")
    model = build_ssdc(cfg.k, cfg.seed)
    rounds: list[RoundStats] = []
    pca: PcaBasis | None = None
    for r in range(cfg.epochs):
        t0 = time.monotonic()
        labels, cm = clustering_round(model, dataset, cfg, round_index=r, pca=pca)
        pca = cm.pca
        model, loss = learning_round(model, dataset, labels, cfg)
        rounds.append(
            RoundStats(
                round=r,
                inertia=cm.inertia,
                ce_loss=loss,
                cluster_sizes=np.bincount(labels, minlength=cfg.k).astype(int).tolist(),
                elapsed_s=time.monotonic() - t0,
            )
        )
    final_labels, final_cm = clustering_round(model, dataset, cfg, round_index=cfg.epochs, pca=pca)
    return TrainReport(
        arch="ssdc",
        config=cfg,
        rounds=rounds,
        final_inertia=final_cm.inertia,
        final_cluster_sizes=np.bincount(final_labels, minlength=cfg.k).astype(int).tolist(),
        final_labels=final_labels,
        cluster_model=final_cm,
        model=model,
        param_count=model.param_count(),
    )


@dataclass(frozen=True)
class PredictResult:
    cluster_id: int
    label: str
    confidence: float
    embedding: np.ndarray  # (d_out,) clustered-space coordinates


def predict(
    model: Model,
    cluster_model: ClusterModel,
    label_map: dict[int, str],
    bins: np.ndarray,
    norm_stats: NormStats,
) -> PredictResult:
    """Classify one raw dB sweep.

    The cluster id comes from nearest-centroid assignment in the clustered
    space (the head only scores confidence: its max softmax for the
    classifier, the max Student-t assignment weight for autoencoders).
    """
    if norm_stats is None:
        raise ContractError("prediction requires the training-time norm stats")
    scaled = normalize_bins(np.asarray(bins, dtype=np.float32), norm_stats)
    emb = embed_array(model, scaled)[0].astype(np.float64)
    point = pca_transform(cluster_model.pca, emb)
    cluster_id, _ = kmeans_assign(cluster_model, point)
    if model.arch == "ssdc":
        logits, _ = model.forward(scaled[None, None, :], train=False)
        confidence = float(softmax(logits)[0].max())
    else:
        d2 = ((point[None, :] - cluster_model.centroids) ** 2).sum(axis=1)
        q = 1.0 / (1.0 + d2)
        confidence = float((q / q.sum()).max())
    return PredictResult(
        cluster_id=int(cluster_id),
        label=label_map.get(int(cluster_id), "unmapped"),
        confidence=confidence,
        embedding=point,
    )
