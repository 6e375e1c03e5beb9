"""Autoencoder baselines: plain reconstruction pretraining plus joint
training with one of two clustering losses.

  dcec   soft assignments against trainable centers via a Student-t kernel,
         pulled toward a sharpened target distribution with KL divergence;
         the target is refreshed once per epoch.
  aeml   a margin surrogate: squared distance to the own (K-means) centroid
         plus a squared hinge pushing the nearest other centroid to at
         least ``margin`` away.  Centers are refreshed by K-means every
         epoch and are not trained.  Reports label this variant
         "surrogate" because the published loss it stands in for is not
         fully specified.

Both variants optimise  alpha * L_recon + beta * L_cluster  minibatch-wise,
with the cluster gradient injected at the 10-d embedding tap.  Epoch-end
losses are recomputed over the whole dataset in eval mode so the reported
total is exactly alpha * recon + beta * cluster.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel, kmeans_assign, kmeans_fit, pca_fit, pca_transform
from .data import Dataset
from .errors import ContractError, InsufficientDataError, NumericError
from .nn import Model, build_autoencoder, mse_loss
from .rng import PortableRng, derive_seed
from .ssdc import TrainConfig, _require_normalized, embed_batch

EPS_KL = 1e-12
AEML_MARGIN = 1.0

_SALT_SHUFFLE = 0x0EF0  # shared with the classifier loop so pretraining
# and joint training consume one continuous per-epoch shuffle stream
_SALT_AE_KMEANS = 0x0AEC
_SALT_FINAL = 0x0F1A


def build_ae(seed: int = 0, k: int = 10) -> Model:
    """Autoencoder with the 10-d bottleneck; k is carried for joint training."""
    return build_autoencoder(seed, k)


def pretrain_ae(
    model: Model, dataset: Dataset, epochs: int, cfg: TrainConfig
) -> tuple[Model, list[float]]:
    """Reconstruction-only training; returns the per-epoch mean loss curve."""
    _require_normalized(dataset)
    curve: list[float] = []
    for _ in range(epochs):
        rng = PortableRng(derive_seed(cfg.seed, _SALT_SHUFFLE, model.epochs_trained))
        order = rng.permutation(len(dataset))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue
            x = dataset.bins[idx][:, None, :]
            recon, caches = model.forward(x, train=True)
            loss, grad = mse_loss(x, recon)
            _, grads = model.backward(caches, grad)
            model.adam_step(grads, cfg.adam)
            total += loss * len(idx)
            seen += len(idx)
        model.epochs_trained += 1
        if seen == 0:
            raise InsufficientDataError("no trainable batch (need at least 2 sweeps)")
        curve.append(total / seen)
    return model, curve


# ---------------------------------------------------------------------------
# cluster losses


def dcec_soft_assign(embeddings: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Student-t (df=1) soft assignment: q_ik = (1+||z_i-mu_k||^2)^-1,
    row-normalised."""
    z = np.asarray(embeddings, dtype=np.float64)
    mu = np.asarray(centers, dtype=np.float64)
    d2 = ((z[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
    u = 1.0 / (1.0 + d2)
    return u / u.sum(axis=1, keepdims=True)


def dcec_target(q: np.ndarray) -> np.ndarray:
    """Sharpened target p_ik = (q_ik^2 / f_k) / sum_j (q_ij^2 / f_j) with
    f_k the soft cluster frequency.  Columns with zero mass are dropped
    from sharpening (with renormalisation) rather than dividing by zero."""
    q = np.asarray(q, dtype=np.float64)
    f = q.sum(axis=0)
    w = np.zeros_like(q)
    alive = f > 0
    w[:, alive] = (q[:, alive] ** 2) / f[alive]
    rows = w.sum(axis=1, keepdims=True)
    if (rows == 0).any():
        raise NumericError("target distribution collapsed to zero mass")
    return w / rows


def kl_cluster_loss(p: np.ndarray, q: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P || Q) with P treated as constant.

    Returns (loss, G) where G_ik = 1 - p_ik/q_ik is the gradient through
    the row normalisation of Q scaled by the row's unnormalised mass (the
    exact form consumed by dcec_grads); it vanishes when P equals Q.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractError("P and Q must have the same shape")
    qc = np.maximum(q, EPS_KL)
    mask = p > 0
    loss = float((p[mask] * np.log(p[mask] / qc[mask])).sum())
    grad = 1.0 - p / qc
    return loss, grad


def dcec_grads(
    embeddings: np.ndarray, centers: np.ndarray, p: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """KL loss plus its exact gradients w.r.t. embeddings and centers.

    Chains kl_cluster_loss through the Student-t kernel:
    dL/dz_i = 2 sum_k u_ik (q_ik - p_ik) (z_i - mu_k) with u the
    unnormalised kernel; the center gradient is its negative sum.
    """
    z = np.asarray(embeddings, dtype=np.float64)
    mu = np.asarray(centers, dtype=np.float64)
    diff = z[:, None, :] - mu[None, :, :]  # (n, k, d)
    d2 = (diff**2).sum(axis=2)
    u = 1.0 / (1.0 + d2)
    s = u.sum(axis=1, keepdims=True)
    q = u / s
    loss, gq = kl_cluster_loss(p, q)
    # dL/du_ik = gq_ik / s_i, du/dd2 = -u^2, dd2/dz = 2 diff
    coeff = (gq / s) * (u**2) * -2.0  # (n, k) multiplier on diff
    gz = (coeff[:, :, None] * diff).sum(axis=1)
    gmu = -(coeff[:, :, None] * diff).sum(axis=0)
    return loss, gz, gmu


def aeml_cluster_loss(
    embeddings: np.ndarray,
    assignments: np.ndarray,
    centers: np.ndarray,
    margin: float = AEML_MARGIN,
) -> tuple[float, np.ndarray]:
    """Margin surrogate: mean_i ||z_i - mu_a(i)||^2 + hinge(margin -
    nearest other centroid distance)^2.  Returns (loss, grad w.r.t. z)."""
    z = np.asarray(embeddings, dtype=np.float64)
    mu = np.asarray(centers, dtype=np.float64)
    if mu.shape[0] < 2:
        raise ContractError("margin loss needs at least two centers")
    a = np.asarray(assignments)
    n = len(z)
    own = mu[a]
    pull_diff = z - own
    pull = (pull_diff**2).sum(axis=1)
    d2 = ((z[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
    d2[np.arange(n), a] = np.inf
    other = d2.argmin(axis=1)
    dmin = np.sqrt(d2[np.arange(n), other])
    h = np.maximum(0.0, margin - dmin)
    loss = float((pull + h**2).mean())
    grad = 2.0 * pull_diff
    active = h > 0
    if active.any():
        od = z[active] - mu[other[active]]
        norm = dmin[active]
        safe = norm > 0  # coincident point and centroid: no direction, no push
        scale = np.zeros_like(norm)
        scale[safe] = -2.0 * h[active][safe] / norm[safe]
        grad[active] += scale[:, None] * od
    return loss, grad / n


# ---------------------------------------------------------------------------
# joint training


@dataclass
class EpochStats:
    epoch: int
    recon_loss: float
    cluster_loss: float
    total_loss: float
    elapsed_s: float


@dataclass
class AeTrainReport:
    arch: str
    variant: str
    surrogate: bool
    config: TrainConfig
    alpha: float
    beta: float
    pretrain_curve: list[float]
    epochs: list[EpochStats]
    final_inertia: float
    final_cluster_sizes: list[int]
    final_labels: np.ndarray
    cluster_model: ClusterModel
    model: Model
    param_count: int
    final_p: np.ndarray | None = None  # dcec target of the last epoch
    final_assignments: np.ndarray | None = None  # aeml epoch assignments
    final_centers: np.ndarray | None = None


def joint_train(
    model: Model,
    dataset: Dataset,
    variant: str,
    epochs: int,
    cfg: TrainConfig,
    alpha: float = 1.0,
    beta: float = 1.0,
    pretrain_curve: list[float] | None = None,
) -> AeTrainReport:
    """Optimise alpha * reconstruction + beta * cluster loss.

    dcec: centers are trainable, seeded by K-means on the incoming
    embeddings; the target P refreshes at each epoch start.  aeml: centers
    and assignments refresh by K-means each epoch and are fixed within it.
    """
    _require_normalized(dataset)
    if variant not in ("dcec", "aeml"):
        raise ValueError(f"unknown variant {variant!r}")
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    k = model.num_clusters
    if len(dataset) < k:
        raise InsufficientDataError(f"need at least k={k} sweeps, got {len(dataset)}")

    if variant == "dcec":
        emb0 = embed_batch(model, dataset).astype(np.float64)
        seed_cm = kmeans_fit(emb0, k, seed=derive_seed(cfg.seed, _SALT_AE_KMEANS, 0))
        model.register_extra("cluster_centers", seed_cm.centroids.astype(np.float32))

    stats: list[EpochStats] = []
    p_epoch: np.ndarray | None = None
    assignments: np.ndarray | None = None
    centers64: np.ndarray | None = None
    for e in range(epochs):
        t0 = time.monotonic()
        emb_all = embed_batch(model, dataset).astype(np.float64)
        if variant == "dcec":
            centers64 = model.extra["cluster_centers"].astype(np.float64)
            q_all = dcec_soft_assign(emb_all, centers64)
            p_epoch = dcec_target(q_all)
        else:
            km = kmeans_fit(emb_all, k, seed=derive_seed(cfg.seed, _SALT_AE_KMEANS, e + 1))
            centers64 = km.centroids
            assignments, _ = kmeans_assign(km, emb_all)

        rng = PortableRng(derive_seed(cfg.seed, _SALT_SHUFFLE, model.epochs_trained))
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue
            x = dataset.bins[idx][:, None, :]
            recon, caches = model.forward(x, train=True)
            _, grad_recon = mse_loss(x, recon)
            if alpha != 1.0:
                grad_recon = grad_recon * np.float32(alpha)
            tap_grad = None
            extra_grads = None
            if beta != 0.0:
                emb_b = _embedding_from_caches(model, caches)
                if variant == "dcec":
                    # both loss terms are per-sample means within the batch
                    centers_live = model.extra["cluster_centers"].astype(np.float64)
                    _, gz, gmu = dcec_grads(emb_b, centers_live, p_epoch[idx])
                    tap_grad = (beta * gz / len(idx)).astype(np.float32)
                    extra_grads = {"cluster_centers": (beta * gmu / len(idx)).astype(np.float32)}
                else:
                    _, gz = aeml_cluster_loss(emb_b, assignments[idx], centers64)
                    tap_grad = (beta * gz).astype(np.float32)
            _, grads = model.backward(caches, grad_recon, tap_grad=tap_grad)
            model.adam_step(grads, cfg.adam, extra_grads=extra_grads)
        model.epochs_trained += 1

        recon_end, cluster_end = _epoch_losses(
            model, dataset, variant, p_epoch, assignments, centers64, beta
        )
        stats.append(
            EpochStats(
                epoch=e,
                recon_loss=recon_end,
                cluster_loss=cluster_end,
                total_loss=alpha * recon_end + beta * cluster_end,
                elapsed_s=time.monotonic() - t0,
            )
        )

    emb_final = embed_batch(model, dataset).astype(np.float64)
    pca = pca_fit(emb_final, min(cfg.embed_dim, emb_final.shape[1]))
    pts = pca_transform(pca, emb_final)
    final_cm = kmeans_fit(pts, k, seed=derive_seed(cfg.seed, _SALT_FINAL), pca=pca)
    final_labels, _ = kmeans_assign(final_cm, pts)
    return AeTrainReport(
        arch="ae",
        variant=variant,
        surrogate=(variant == "aeml"),
        config=cfg,
        alpha=alpha,
        beta=beta,
        pretrain_curve=list(pretrain_curve or []),
        epochs=stats,
        final_inertia=final_cm.inertia,
        final_cluster_sizes=np.bincount(final_labels, minlength=k).astype(int).tolist(),
        final_labels=final_labels,
        cluster_model=final_cm,
        model=model,
        param_count=model.param_count(),
        final_p=p_epoch,
        final_assignments=assignments,
        final_centers=centers64,
    )


def _embedding_from_caches(model: Model, caches: list) -> np.ndarray:
    """The embedding equals the cached input of the first decoder layer."""
    return np.asarray(caches[model.embed_end], dtype=np.float64)


def _epoch_losses(
    model: Model,
    dataset: Dataset,
    variant: str,
    p_epoch: np.ndarray | None,
    assignments: np.ndarray | None,
    centers64: np.ndarray | None,
    beta: float,
) -> tuple[float, float]:
    """Eval-mode full-dataset loss components at the end of an epoch."""
    recon_total = 0.0
    for start in range(0, len(dataset), 512):
        x = dataset.bins[start : start + 512][:, None, :]
        recon, _ = model.forward(x, train=False)
        loss, _ = mse_loss(x, recon)
        recon_total += loss * len(x)
    recon_end = recon_total / len(dataset)
    if beta == 0.0:
        return recon_end, 0.0
    emb = embed_batch(model, dataset).astype(np.float64)
    if variant == "dcec":
        centers_live = model.extra["cluster_centers"].astype(np.float64)
        q = dcec_soft_assign(emb, centers_live)
        cluster_end, _ = kl_cluster_loss(p_epoch, q)
        cluster_end /= len(dataset)  # per-sample mean, matching the gradient scale
    else:
        cluster_end, _ = aeml_cluster_loss(emb, assignments, centers64)
    return recon_end, cluster_end
