"""Linear dimensionality reduction and K-means for the embedding space.

PCA is fitted by eigendecomposition of the sample covariance (a symmetric
problem, so the solver is deterministic); components are sign-fixed so the
coordinate with the largest magnitude in each component is positive, which
makes bases reproducible across runs.

K-means uses k-means++ seeding driven by the package's portable generator,
Lloyd iterations with an explicit monotonicity check on the objective, and
deterministic repair of empty clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    RankDeficiencyError,
    ShapeError,
)
from .rng import PortableRng, derive_seed

KMEANS_TOL = 1e-4
KMEANS_MAX_ITER = 300

_SALT_KMEANS = 0x4B4D


@dataclass(frozen=True)
class PcaBasis:
    """Mean vector plus orthonormal rows spanning the retained subspace."""

    mean: np.ndarray  # (d_in,)
    components: np.ndarray  # (d_out, d_in)
    explained_variance: np.ndarray  # (d_out,) eigenvalues, descending

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        comps = np.ascontiguousarray(self.components, dtype=np.float64)
        ev = np.ascontiguousarray(self.explained_variance, dtype=np.float64)
        if comps.ndim != 2 or mean.ndim != 1 or comps.shape[1] != mean.shape[0]:
            raise ShapeError("components must be (d_out, d_in) matching mean")
        if ev.shape != (comps.shape[0],):
            raise ShapeError("explained_variance must have one entry per component")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", ev)

    @property
    def d_in(self) -> int:
        return self.mean.shape[0]

    @property
    def d_out(self) -> int:
        return self.components.shape[0]


def pca_fit(vectors: np.ndarray, d_out: int) -> PcaBasis:
    """Top-d_out principal axes of the rows of ``vectors``.

    Raises RankDeficiencyError when the data do not span d_out directions
    (eigenvalues below a 1e-9 relative threshold count as zero).
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected (n, d) vectors, got {x.shape}")
    n, d_in = x.shape
    if d_out < 1:
        raise ValueError("d_out must be at least 1")
    if d_out > d_in:
        raise ShapeError(f"d_out {d_out} exceeds input dimension {d_in}")
    if n <= d_out:
        raise InsufficientDataError(f"need more than {d_out} samples, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    top = max(float(eigvals[0]), 0.0)
    rank = int((eigvals > max(top, 1e-300) * 1e-9).sum())
    if rank < d_out:
        raise RankDeficiencyError(
            f"requested {d_out} components but data rank is {rank}", achieved_rank=rank
        )
    comps = eigvecs[:, :d_out].T.copy()
    # sign convention: the largest-magnitude coordinate of each component
    # is positive, so the basis does not flip between runs
    for row in comps:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return PcaBasis(mean=mean, components=comps, explained_variance=eigvals[:d_out].copy())


def pca_transform(basis: PcaBasis, vectors: np.ndarray) -> np.ndarray:
    """Project rows onto the basis: (v - mean) @ components.T, float64."""
    x = np.asarray(vectors, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != basis.d_in:
        raise ShapeError(f"vectors have dimension {x.shape[1]}, basis expects {basis.d_in}")
    out = (x - basis.mean) @ basis.components.T
    return out[0] if squeeze else out


@dataclass(frozen=True)
class ClusterModel:
    """Fitted K-means centroids an embedding is assigned against, together
    with the projection that produced the clustered space."""

    pca: PcaBasis
    centroids: np.ndarray  # (k, d_out)
    inertia: float
    iterations: int
    objective_history: tuple[float, ...]

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if c.ndim != 2:
            raise ShapeError("centroids must be (k, d)")
        if c.shape[1] != self.pca.d_out:
            raise ShapeError("centroid dimension must match the PCA output")
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "objective_history", tuple(self.objective_history))

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # exact (p - c)^2 sums; the expanded p.p - 2 p.c + c.c form can go
    # negative near ties and break deterministic argmin ordering
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans_assign(model_or_centroids, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to the lowest index) and squared
    distances to the winning centroid."""
    centroids = (
        model_or_centroids.centroids
        if isinstance(model_or_centroids, ClusterModel)
        else np.asarray(model_or_centroids, dtype=np.float64)
    )
    pts = np.asarray(points, dtype=np.float64)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    if pts.shape[1] != centroids.shape[1]:
        raise ShapeError(f"points are {pts.shape[1]}-d, centroids {centroids.shape[1]}-d")
    d2 = _sq_dists(pts, centroids)
    labels = d2.argmin(axis=1).astype(np.int64)
    best = d2[np.arange(len(pts)), labels]
    if squeeze:
        return labels[0], best[0]
    return labels, best


def _kmeanspp_init(points: np.ndarray, k: int, rng: PortableRng) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(1, 0, n)[0])
    centroids[0] = points[first]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(1, 0, n)[0])
        else:
            u = float(rng.uniform(1)[0]) * total
            idx = int(np.searchsorted(np.cumsum(d2), u, side="right"))
            idx = min(idx, n - 1)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = KMEANS_MAX_ITER,
    tol: float = KMEANS_TOL,
    pca: PcaBasis | None = None,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the largest centroid shift drops below ``tol`` or after
    ``max_iter`` iterations.  Empty clusters are re-seeded at the point of
    the largest cluster farthest from that cluster's centroid, which keeps
    the objective non-increasing; the monotonicity is asserted every
    iteration.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeError(f"expected (n, d) points, got {pts.shape}")
    n, d = pts.shape
    if k < 1:
        raise ValueError("k must be positive")
    if n < k:
        raise InsufficientDataError(f"need at least {k} points, got {n}")
    rng = PortableRng(derive_seed(seed, _SALT_KMEANS))
    centroids = _kmeanspp_init(pts, k, rng)
    history: list[float] = []
    prev_obj = np.inf
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        labels, best = kmeans_assign(centroids, pts)
        obj = float(best.sum())
        assert obj <= prev_obj + 1e-9 * max(1.0, abs(prev_obj) if np.isfinite(prev_obj) else 1.0), (
            f"k-means objective increased: {prev_obj} -> {obj}"
        )
        history.append(obj)
        prev_obj = obj
        counts = np.bincount(labels, minlength=k)
        new_centroids = np.zeros_like(centroids)
        np.add.at(new_centroids, labels, pts)
        nonzero = counts > 0
        new_centroids[nonzero] /= counts[nonzero, None]
        empties = np.flatnonzero(~nonzero)
        if len(empties):
            taken: set[int] = set()
            for j in empties:
                largest = int(np.argmax(counts))
                members = np.flatnonzero(labels == largest)
                dists = ((pts[members] - new_centroids[largest]) ** 2).sum(axis=1)
                for cand in np.argsort(dists)[::-1]:
                    point_idx = int(members[cand])
                    if point_idx not in taken:
                        break
                else:  # every member already reused: degenerate duplicates
                    raise DegenerateDataError(
                        f"cannot populate {k} clusters from these points"
                    )
                taken.add(point_idx)
                new_centroids[j] = pts[point_idx]
                counts[largest] -= 1
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    labels, best = kmeans_assign(centroids, pts)
    counts = np.bincount(labels, minlength=k)
    if (counts == 0).any():
        raise DegenerateDataError(
            f"k-means finished with {int((counts == 0).sum())} empty clusters"
        )
    inertia = float(best.sum())
    if pca is None:
        ident = np.eye(d)
        pca = PcaBasis(mean=np.zeros(d), components=ident, explained_variance=np.ones(d))
    return ClusterModel(
        pca=pca,
        centroids=centroids,
        inertia=inertia,
        iterations=iterations,
        objective_history=tuple(history),
    )
