"""Clustering quality metrics and label-based diagnostics.

Entropies use natural logarithms.  All metrics take plain integer label
arrays; the distance-based ones additionally take the point coordinates
they were clustered in.  Degenerate cases follow fixed conventions instead
of raising: identical trivial partitions score 1.0 on NMI/ARI, a perfectly
homogeneous degenerate split scores 1.0, and Davies-Bouldin clamps
coincident centroid distances at 1e-12 (flagged in assembled reports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, denormalize_bins
from .errors import ShapeError, UndefinedMetricError
from .rng import PortableRng, derive_seed

SILHOUETTE_MAX_POINTS = 10_000
CALINSKI_HARABASZ_CAP = 1e12

_DB_EPS = 1e-12
_SALT_SILHOUETTE = 0x5117


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape or len(a) == 0:
        raise ShapeError("label arrays must be equal-length and non-empty")
    return a, b


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def _mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    pa = table.sum(axis=1)
    pb = table.sum(axis=0)
    mi = 0.0
    rows, cols = np.nonzero(table)
    for i, j in zip(rows, cols):
        pij = table[i, j] / n
        mi += pij * math.log((table[i, j] * n) / (pa[i] * pb[j]))
    return float(mi)


def nmi(labels_a, labels_b) -> float:
    """Normalised mutual information 2I/(H(a)+H(b)); two constant
    partitions (0/0) score 1 by convention."""
    a, b = _check_pair(labels_a, labels_b)
    table = _contingency(a, b)
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha + hb == 0.0:
        return 1.0
    return 2.0 * _mutual_information(table) / (ha + hb)


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index via pair counting; degenerate cases where the
    expected index equals the maximum (both partitions trivial) score 1."""
    a, b = _check_pair(labels_a, labels_b)
    table = _contingency(a, b)
    n = int(table.sum())

    def comb2(x) -> float:
        return float((x * (x - 1)) // 2) if np.isscalar(x) else (x * (x - 1) / 2.0)

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_a = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total if total else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


def _conditional_entropy(table: np.ndarray) -> float:
    """H(rows | cols) in nats."""
    n = table.sum()
    h = 0.0
    for j in range(table.shape[1]):
        col = table[:, j]
        cn = col.sum()
        if cn == 0:
            continue
        p = col[col > 0] / cn
        h += (cn / n) * float(-(p * np.log(p)).sum())
    return h


def homogeneity(class_labels, cluster_labels) -> float:
    """1 - H(C|K)/H(C); a single true class is perfectly homogeneous."""
    c, k = _check_pair(class_labels, cluster_labels)
    table = _contingency(c, k)
    hc = _entropy(table.sum(axis=1))
    if hc == 0.0:
        return 1.0
    return 1.0 - _conditional_entropy(table) / hc


def completeness(class_labels, cluster_labels) -> float:
    """1 - H(K|C)/H(K); the exact mirror of homogeneity."""
    return homogeneity(cluster_labels, class_labels)


def _pairwise_dists(chunk: np.ndarray, points: np.ndarray) -> np.ndarray:
    # explicit differences: the expanded quadratic form cancels catastrophically
    # for nearby points and the ~1e-8 distance noise shows up in the score
    diff = chunk[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def silhouette(
    points: np.ndarray,
    labels,
    max_points: int = SILHOUETTE_MAX_POINTS,
    seed: int = 0,
) -> float:
    """Mean silhouette coefficient.

    Datasets beyond ``max_points`` are scored on a seeded uniform subsample,
    but a(i)/b(i) always measure against the full dataset.  Singleton
    clusters contribute 0 for their points.
    """
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if pts.ndim != 2 or len(pts) != len(labels):
        raise ShapeError("points must be (n, d) aligned with labels")
    uniq, inv = np.unique(labels, return_inverse=True)
    k = len(uniq)
    n = len(pts)
    if k < 2 or n < 2:
        raise UndefinedMetricError("silhouette needs at least two clusters")
    counts = np.bincount(inv, minlength=k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), inv] = 1.0
    if n > max_points:
        rng = PortableRng(derive_seed(seed, _SALT_SILHOUETTE))
        sample = np.sort(rng.permutation(n)[:max_points])
    else:
        sample = np.arange(n)
    scores = np.empty(len(sample))
    for start in range(0, len(sample), 512):
        idx = sample[start : start + 512]
        dists = _pairwise_dists(pts[idx], pts)
        sums = dists @ onehot  # (chunk, k) total distance into each cluster
        own = inv[idx]
        own_counts = counts[own]
        a = np.where(own_counts > 1, sums[np.arange(len(idx)), own] / np.maximum(own_counts - 1, 1), 0.0)
        means = sums / counts[None, :]
        means[np.arange(len(idx)), own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        s = np.where(own_counts > 1, s, 0.0)  # singleton convention
        scores[start : start + len(idx)] = s
    return float(scores.mean())


def _centroids_for(points: np.ndarray, inv: np.ndarray, k: int) -> np.ndarray:
    cents = np.zeros((k, points.shape[1]))
    np.add.at(cents, inv, points)
    cents /= np.bincount(inv, minlength=k)[:, None]
    return cents


def davies_bouldin(points: np.ndarray, labels) -> float:
    """Mean over clusters of the worst (S_i + S_j) / ||C_i - C_j|| ratio."""
    value, _ = davies_bouldin_flagged(points, labels)
    return value


def davies_bouldin_flagged(points: np.ndarray, labels) -> tuple[float, bool]:
    """Davies-Bouldin plus a flag saying the 1e-12 coincident-centroid
    clamp fired."""
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    uniq, inv = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise UndefinedMetricError("davies-bouldin needs at least two clusters")
    cents = _centroids_for(pts, inv, k)
    scatter = np.zeros(k)
    np.add.at(scatter, inv, np.sqrt(((pts - cents[inv]) ** 2).sum(axis=1)))
    scatter /= np.bincount(inv, minlength=k)
    sep = np.sqrt(((cents[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2))
    clamped = bool((sep[~np.eye(k, dtype=bool)] < _DB_EPS).any())
    np.maximum(sep, _DB_EPS, out=sep)
    ratio = (scatter[:, None] + scatter[None, :]) / sep
    np.fill_diagonal(ratio, -np.inf)
    return float(ratio.max(axis=1).mean()), clamped


def calinski_harabasz(points: np.ndarray, labels) -> float:
    """Between/within variance ratio; zero within-scatter returns a
    documented cap (1e12) instead of infinity."""
    value, _ = calinski_harabasz_flagged(points, labels)
    return value


def calinski_harabasz_flagged(points: np.ndarray, labels) -> tuple[float, bool]:
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    uniq, inv = np.unique(labels, return_inverse=True)
    k = len(uniq)
    n = len(pts)
    if k < 2 or k >= n:
        raise UndefinedMetricError("calinski-harabasz needs 2 <= k < n")
    cents = _centroids_for(pts, inv, k)
    counts = np.bincount(inv, minlength=k)
    overall = pts.mean(axis=0)
    between = float((counts * ((cents - overall) ** 2).sum(axis=1)).sum())
    within = float(((pts - cents[inv]) ** 2).sum())
    if within == 0.0:
        return CALINSKI_HARABASZ_CAP, True
    return (between / (k - 1)) / (within / (n - k)), False


# ---------------------------------------------------------------------------
# label-based diagnostics


@dataclass(frozen=True)
class ClassScore:
    class_id: int
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    zero_predictions: bool


def per_class_prf(
    true_labels,
    predicted_labels,
    class_names: tuple[str, ...] | None = None,
) -> list[ClassScore]:
    """Per-class precision/recall/F1 against integer class ids.

    Predictions outside the class vocabulary (e.g. -1 for unmapped
    clusters) count as misses for the true class and never as hits.
    Classes never predicted get precision 0 with a flag rather than NaN.
    """
    true, pred = _check_pair(true_labels, predicted_labels)
    num_classes = int(true.max()) + 1
    if class_names is None:
        class_names = tuple(f"class{i}" for i in range(num_classes))
    num_classes = max(num_classes, len(class_names))
    scores = []
    for c in range(num_classes):
        tp = int(((pred == c) & (true == c)).sum())
        fp = int(((pred == c) & (true != c)).sum())
        fn = int(((pred != c) & (true == c)).sum())
        zero_pred = (tp + fp) == 0
        precision = tp / (tp + fp) if not zero_pred else 0.0
        recall = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        scores.append(
            ClassScore(
                class_id=c,
                name=class_names[c] if c < len(class_names) else f"class{c}",
                precision=precision,
                recall=recall,
                f1=f1,
                support=tp + fn,
                zero_predictions=zero_pred,
            )
        )
    return scores


def macro_f1(scores: list[ClassScore]) -> float:
    present = [s for s in scores if s.support > 0]
    if not present:
        raise UndefinedMetricError("macro F1 needs at least one supported class")
    return float(np.mean([s.f1 for s in present]))


def cluster_averages(dataset: Dataset, cluster_labels, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster mean sweep in dB plus member counts.

    Normalized datasets are converted back to dB through their stored
    stats (the mean commutes with the affine transform).  Empty clusters
    get a NaN row and a zero count.
    """
    labels = np.asarray(cluster_labels).ravel()
    if len(labels) != len(dataset):
        raise ShapeError("cluster labels must align with the dataset")
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    sums = np.zeros((k, dataset.bins.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, dataset.bins.astype(np.float64))
    averages = np.full((k, dataset.bins.shape[1]), np.nan)
    nz = counts > 0
    averages[nz] = sums[nz] / counts[nz, None]
    if dataset.norm_stats is not None:
        averages[nz] = denormalize_bins(averages[nz], dataset.norm_stats)
    return averages, counts


def dominant_label_map(true_labels, cluster_labels, class_names: tuple[str, ...]) -> dict[int, int]:
    """Plurality true class per cluster (ties to the lowest class id).

    Returns cluster id -> class id; empty clusters are absent.  Use
    ``class_names`` to render strings.
    """
    true, clusters = _check_pair(true_labels, cluster_labels)
    if true.max() >= len(class_names):
        raise ShapeError("class_names does not cover the label vocabulary")
    mapping: dict[int, int] = {}
    for cl in np.unique(clusters):
        members = true[clusters == cl]
        counts = np.bincount(members, minlength=len(class_names))
        mapping[int(cl)] = int(np.argmax(counts))  # argmax ties to lowest id
    return mapping


def apply_label_map(cluster_labels, mapping: dict[int, int]) -> np.ndarray:
    """Map cluster ids to class ids; unmapped clusters become -1."""
    clusters = np.asarray(cluster_labels).ravel()
    return np.array([mapping.get(int(c), -1) for c in clusters], dtype=np.int64)


# ---------------------------------------------------------------------------
# assembled report


@dataclass
class MetricsReport:
    """Every clustering score this package reports, in one place."""

    nmi: float | None = None
    ari: float | None = None
    homogeneity: float | None = None
    completeness: float | None = None
    silhouette: float | None = None
    davies_bouldin: float | None = None
    calinski_harabasz: float | None = None
    cluster_sizes: list[int] = field(default_factory=list)
    per_class: list[ClassScore] = field(default_factory=list)
    macro_f1: float | None = None
    flags: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    silhouette_subsample: dict | None = None

    def to_dict(self) -> dict:
        return {
            "nmi": self.nmi,
            "ari": self.ari,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "cluster_sizes": list(self.cluster_sizes),
            "per_class": [
                {
                    "class_id": s.class_id,
                    "name": s.name,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                    "zero_predictions": s.zero_predictions,
                }
                for s in self.per_class
            ],
            "macro_f1": self.macro_f1,
            "flags": list(self.flags),
            "notes": list(self.notes),
            "silhouette_subsample": self.silhouette_subsample,
        }


def build_metrics_report(
    points: np.ndarray,
    cluster_labels,
    true_labels=None,
    class_names: tuple[str, ...] | None = None,
    k: int | None = None,
    seed: int = 0,
    notes: list[str] | None = None,
) -> MetricsReport:
    """Compute every applicable metric for one clustering result."""
    clusters = np.asarray(cluster_labels).ravel()
    k = k if k is not None else int(clusters.max()) + 1
    report = MetricsReport(notes=list(notes or []))
    report.cluster_sizes = np.bincount(clusters, minlength=k).astype(int).tolist()
    n = len(clusters)
    distinct = len(np.unique(clusters))
    if distinct >= 2:
        report.silhouette = silhouette(points, clusters, seed=seed)
        report.silhouette_subsample = {
            "seed": seed,
            "size": int(min(n, SILHOUETTE_MAX_POINTS)),
        }
        db, db_clamped = davies_bouldin_flagged(points, clusters)
        report.davies_bouldin = db
        if db_clamped:
            report.flags.append("davies_bouldin_coincident_centroids")
        if distinct < n:
            ch, ch_capped = calinski_harabasz_flagged(points, clusters)
            report.calinski_harabasz = ch
            if ch_capped:
                report.flags.append("calinski_harabasz_zero_within_scatter")
    else:
        report.flags.append("single_cluster_distance_metrics_undefined")
    if true_labels is not None:
        true = np.asarray(true_labels).ravel()
        report.nmi = nmi(true, clusters)
        report.ari = ari(true, clusters)
        report.homogeneity = homogeneity(true, clusters)
        report.completeness = completeness(true, clusters)
        names = class_names or tuple(f"class{i}" for i in range(int(true.max()) + 1))
        mapping = dominant_label_map(true, clusters, names)
        predicted = apply_label_map(clusters, mapping)
        report.per_class = per_class_prf(true, predicted, names)
        report.macro_f1 = macro_f1(report.per_class)
        if any(s.zero_predictions for s in report.per_class):
            report.flags.append("class_with_zero_predictions")
    return report
