"""Persistence: trained-model artifacts and the cluster label map.

An artifact is one JSON document: layer specs with base64 little-endian
weight blobs (float32, plus the batchnorm running stats), the norm stats,
the PCA basis and centroids (float64 so assignment arithmetic survives the
round trip bit-for-bit), per-cluster training statistics, and creation
metadata.  Writes go through a temp file and rename so readers never see a
partial document; loads re-derive the parameter count and dimensions and
refuse anything inconsistent.

The label map is a smaller JSON document with a revision counter that
bumps on every write, persisted the same atomic way.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .clustering import ClusterModel, PcaBasis
from .data import Dataset, NormStats
from .errors import ArtifactIntegrityError
from .nn import Model, complexity_report, rebuild_layer

ARTIFACT_VERSION = 1
LABELMAP_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    dtype = "<f8" if arr.dtype == np.float64 else "<f4"
    return {
        "dtype": dtype,
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype=dtype).tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict, context: str) -> np.ndarray:
    try:
        dtype = np.dtype(obj["dtype"])
        shape = tuple(int(s) for s in obj["shape"])
        raw = base64.b64decode(obj["data"], validate=True)
        arr = np.frombuffer(raw, dtype=dtype)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactIntegrityError(f"malformed array field in {context}: {exc}") from None
    if arr.size != int(np.prod(shape)):
        raise ArtifactIntegrityError(
            f"array in {context} holds {arr.size} values, shape {shape} needs {int(np.prod(shape))}"
        )
    native = arr.astype(dtype.newbyteorder("=")).reshape(shape)
    if not np.isfinite(native).all():
        raise ArtifactIntegrityError(f"array in {context} contains non-finite values")
    return native


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(dataset.bins.tobytes())
    if dataset.labels is not None:
        h.update(dataset.labels.tobytes())
    return "sha256:" + h.hexdigest()


@dataclass
class ModelArtifact:
    """Everything the service needs to answer queries about one model."""

    model: Model
    norm_stats: NormStats
    cluster_model: ClusterModel
    cluster_counts: np.ndarray  # (k,)
    cluster_averages_db: np.ndarray  # (k, 1024), NaN rows for empty clusters
    cluster_medoids_db: np.ndarray  # (k, 1024)
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.cluster_model.k


def save_artifact(artifact: ModelArtifact, path: str) -> None:
    model = artifact.model
    layers = []
    for layer in model.layers:
        entry = {"spec": layer.spec()}
        for name, arr in layer.params().items():
            entry[name] = _encode_array(arr)
        for name, arr in layer.state().items():
            entry[name] = _encode_array(arr)
        layers.append(entry)
    params, gflops = complexity_report(model)
    cm = artifact.cluster_model
    doc = {
        "format_version": ARTIFACT_VERSION,
        "arch": model.arch,
        "k": model.num_clusters,
        "embed_end": model.embed_end,
        "param_count": params,
        "gflops": gflops,
        "layers": layers,
        "norm_stats": {"mean": artifact.norm_stats.mean, "std": artifact.norm_stats.std},
        "pca": {
            "mean": _encode_array(cm.pca.mean),
            "components": _encode_array(cm.pca.components),
            "explained_variance": _encode_array(cm.pca.explained_variance),
        },
        "centroids": _encode_array(cm.centroids),
        "inertia": cm.inertia,
        "cluster_stats": {
            "counts": [int(c) for c in artifact.cluster_counts],
            "averages_db": _encode_array(np.nan_to_num(artifact.cluster_averages_db, nan=0.0)),
            "average_valid": [bool(c > 0) for c in artifact.cluster_counts],
            "medoids_db": _encode_array(np.nan_to_num(artifact.cluster_medoids_db, nan=0.0)),
        },
        "meta": artifact.meta,
    }
    _atomic_write(path, json.dumps(doc))


def load_artifact(path: str) -> ModelArtifact:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactIntegrityError(f"cannot read artifact {path}: {exc}") from None
    version = doc.get("format_version")
    if version != ARTIFACT_VERSION:
        raise ArtifactIntegrityError(f"unsupported artifact version {version!r}")
    arch = doc.get("arch")
    if arch not in ("ssdc", "ae"):
        raise ArtifactIntegrityError(f"unknown architecture {arch!r}")
    try:
        k = int(doc["k"])
        embed_end = int(doc["embed_end"])
        layer_entries = doc["layers"]
        stats = NormStats(mean=float(doc["norm_stats"]["mean"]), std=float(doc["norm_stats"]["std"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactIntegrityError(f"artifact missing required field: {exc}") from None

    layers = []
    for i, entry in enumerate(layer_entries):
        try:
            layer = rebuild_layer(entry["spec"])
        except Exception as exc:
            raise ArtifactIntegrityError(f"cannot rebuild layer {i}: {exc}") from None
        for name, arr in list(layer.params().items()) + list(layer.state().items()):
            if name not in entry:
                raise ArtifactIntegrityError(f"layer {i} is missing array {name!r}")
            loaded = _decode_array(entry[name], f"layer {i} {name}")
            if loaded.shape != arr.shape:
                raise ArtifactIntegrityError(
                    f"layer {i} array {name!r} has shape {loaded.shape}, expected {arr.shape}"
                )
            arr[:] = loaded.astype(arr.dtype)
        layers.append(layer)
    model = Model(arch, layers, embed_end, k)
    params, gflops = complexity_report(model)
    if params != int(doc.get("param_count", -1)):
        raise ArtifactIntegrityError(
            f"artifact declares {doc.get('param_count')} parameters, layers hold {params}"
        )
    pca = PcaBasis(
        mean=_decode_array(doc["pca"]["mean"], "pca mean"),
        components=_decode_array(doc["pca"]["components"], "pca components"),
        explained_variance=_decode_array(doc["pca"]["explained_variance"], "pca variance"),
    )
    centroids = _decode_array(doc["centroids"], "centroids")
    if centroids.shape[0] != k or centroids.shape[1] != pca.d_out:
        raise ArtifactIntegrityError(
            f"centroids {centroids.shape} inconsistent with k={k}, d_out={pca.d_out}"
        )
    cm = ClusterModel(
        pca=pca,
        centroids=centroids,
        inertia=float(doc.get("inertia", 0.0)),
        iterations=0,
        objective_history=(),
    )
    cs = doc.get("cluster_stats", {})
    counts = np.array(cs.get("counts", [0] * k), dtype=np.int64)
    averages = _decode_array(cs["averages_db"], "cluster averages")
    medoids = _decode_array(cs["medoids_db"], "cluster medoids")
    valid = cs.get("average_valid", [True] * k)
    if len(counts) != k or averages.shape[0] != k:
        raise ArtifactIntegrityError("cluster statistics do not cover every cluster")
    averages = averages.astype(np.float64)
    for j, ok in enumerate(valid):
        if not ok:
            averages[j] = np.nan
    return ModelArtifact(
        model=model,
        norm_stats=stats,
        cluster_model=cm,
        cluster_counts=counts,
        cluster_averages_db=averages,
        cluster_medoids_db=medoids.astype(np.float64),
        meta=doc.get("meta", {}),
    )


def build_meta(seed: int, epochs: int, dataset: Dataset, extra: dict | None = None) -> dict:
    meta = {
        "seed": seed,
        "epochs": epochs,
        "trained_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "dataset_fingerprint": dataset_fingerprint(dataset),
        "n_sweeps": len(dataset),
    }
    if extra:
        meta.update(extra)
    return meta


def artifact_from_training(report, dataset: Dataset, meta: dict | None = None) -> ModelArtifact:
    """Package a finished training run and its per-cluster statistics.

    dataset is the normalized training set the run saw; averages and medoids
    are stored denormalized (dB) so the service can display them directly.
    """
    from .data import denormalize_bins
    from .clustering import kmeans_assign, pca_transform
    from .metrics import cluster_averages
    from .ssdc import embed_batch

    model = report.model
    cm = report.cluster_model
    k = cm.k
    labels = np.asarray(report.final_labels)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    averages, _ = cluster_averages(dataset, labels, k)
    points = pca_transform(cm.pca, embed_batch(model, dataset).astype(np.float64))
    _, d2 = kmeans_assign(cm, points)
    medoids = np.zeros((k, dataset.bins.shape[1]), dtype=np.float64)
    for cid in range(k):
        members = np.nonzero(labels == cid)[0]
        if len(members):
            best = members[np.argmin(d2[members])]
            medoids[cid] = denormalize_bins(dataset.bins[best], dataset.norm_stats).astype(np.float64)
    return ModelArtifact(
        model=model,
        norm_stats=dataset.norm_stats,
        cluster_model=cm,
        cluster_counts=counts,
        cluster_averages_db=averages,
        cluster_medoids_db=medoids,
        meta=meta or {},
    )


# ---------------------------------------------------------------------------
# label map


class LabelMap:
    """Cluster id -> human label with a persisted revision counter."""

    def __init__(self, path: str | None = None, k: int | None = None):
        self.path = path
        self.k = k
        self.revision = 0
        self.entries: dict[int, str] = {}
        self.updated_at: dict[int, str] = {}

    @staticmethod
    def load(path: str, k: int | None = None) -> "LabelMap":
        lm = LabelMap(path=path, k=k)
        if not os.path.exists(path):
            return lm
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            if doc.get("format_version") != LABELMAP_VERSION:
                raise ValueError(f"unsupported label map version {doc.get('format_version')!r}")
            lm.revision = int(doc["revision"])
            for key, entry in doc.get("entries", {}).items():
                lm.entries[int(key)] = str(entry["label"])
                lm.updated_at[int(key)] = entry.get("updated_at", "")
        except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ArtifactIntegrityError(f"cannot read label map {path}: {exc}") from None
        if k is not None and any(c >= k or c < 0 for c in lm.entries):
            raise ArtifactIntegrityError("label map references cluster ids outside [0, k)")
        return lm

    def set_label(self, cluster_id: int, label: str) -> int:
        """Set one label, bump the revision, persist; returns the revision."""
        if self.k is not None and not 0 <= cluster_id < self.k:
            raise ValueError(f"cluster id {cluster_id} outside [0, {self.k})")
        label = str(label).strip()
        if not label:
            raise ValueError("label must be a non-empty string")
        self.entries[int(cluster_id)] = label
        self.updated_at[int(cluster_id)] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.revision += 1
        if self.path:
            self.save()
        return self.revision

    def get(self, cluster_id: int, default: str = "unmapped") -> str:
        return self.entries.get(int(cluster_id), default)

    def as_dict(self) -> dict[int, str]:
        return dict(self.entries)

    def save(self) -> None:
        doc = {
            "format_version": LABELMAP_VERSION,
            "revision": self.revision,
            "entries": {
                str(cid): {"label": label, "updated_at": self.updated_at.get(cid, "")}
                for cid, label in sorted(self.entries.items())
            },
        }
        _atomic_write(self.path, json.dumps(doc, indent=2))
