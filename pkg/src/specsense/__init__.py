"""Self-supervised clustering of wideband spectrum sweeps.

A numpy-only stack: sweep datasets (synthetic generation, CSV/binary IO,
normalization), a small deterministic neural-network kernel, PCA + K-means
clustering, three trainers (alternating deep clustering plus two
autoencoder baselines), evaluation metrics, a JSON artifact format, and an
HTTP service for classify/embed/label workflows.
"""

from .artifact import (
    LabelMap,
    ModelArtifact,
    artifact_from_training,
    build_meta,
    dataset_fingerprint,
    load_artifact,
    save_artifact,
)
from .autoencoder import (
    AeTrainReport,
    EpochStats,
    aeml_cluster_loss,
    build_ae,
    dcec_grads,
    dcec_soft_assign,
    dcec_target,
    joint_train,
    kl_cluster_loss,
    pretrain_ae,
)
from .clustering import (
    ClusterModel,
    PcaBasis,
    kmeans_assign,
    kmeans_fit,
    pca_fit,
    pca_transform,
)
from .data import (
    NUM_BINS,
    ClassTemplate,
    Dataset,
    NormStats,
    Sweep,
    SyntheticProfile,
    default_profile,
    denormalize_bins,
    denormalize_dataset,
    load_dataset,
    normalize_bins,
    normalize_dataset,
    save_dataset,
    synth_generate,
)
from .errors import (
    ArtifactIntegrityError,
    ContractError,
    DataFormatError,
    DegenerateDataError,
    InsufficientDataError,
    NumericError,
    RankDeficiencyError,
    ShapeError,
    SpecsenseError,
    UndefinedMetricError,
)
from .metrics import (
    ClassScore,
    MetricsReport,
    apply_label_map,
    ari,
    build_metrics_report,
    calinski_harabasz,
    calinski_harabasz_flagged,
    cluster_averages,
    completeness,
    davies_bouldin,
    davies_bouldin_flagged,
    dominant_label_map,
    homogeneity,
    macro_f1,
    nmi,
    per_class_prf,
    silhouette,
)
from .nn import (
    AdamConfig,
    Model,
    build_autoencoder,
    build_classifier,
    complexity_report,
    grad_check_layer,
    grad_check_model,
    mse_loss,
    softmax,
    softmax_cross_entropy,
)
from .rng import PortableRng, derive_seed, mix64
from .service import Service, ServiceState, create_service
from .ssdc import (
    PredictResult,
    RoundStats,
    TrainConfig,
    TrainReport,
    build_ssdc,
    clustering_round,
    embed_array,
    embed_batch,
    learning_round,
    predict,
    reinit_head,
    train_ssdc,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "AeTrainReport",
    "ArtifactIntegrityError",
    "ClassScore",
    "ClassTemplate",
    "ClusterModel",
    "ContractError",
    "DataFormatError",
    "Dataset",
    "DegenerateDataError",
    "EpochStats",
    "InsufficientDataError",
    "LabelMap",
    "MetricsReport",
    "Model",
    "ModelArtifact",
    "NormStats",
    "NumericError",
    "NUM_BINS",
    "PcaBasis",
    "PortableRng",
    "PredictResult",
    "RankDeficiencyError",
    "RoundStats",
    "Service",
    "ServiceState",
    "ShapeError",
    "SpecsenseError",
    "Sweep",
    "SyntheticProfile",
    "TrainConfig",
    "TrainReport",
    "UndefinedMetricError",
    "aeml_cluster_loss",
    "apply_label_map",
    "ari",
    "artifact_from_training",
    "build_ae",
    "build_autoencoder",
    "build_classifier",
    "build_meta",
    "build_metrics_report",
    "build_ssdc",
    "calinski_harabasz",
    "calinski_harabasz_flagged",
    "cluster_averages",
    "clustering_round",
    "completeness",
    "complexity_report",
    "create_service",
    "davies_bouldin",
    "davies_bouldin_flagged",
    "dataset_fingerprint",
    "dcec_grads",
    "dcec_soft_assign",
    "dcec_target",
    "default_profile",
    "denormalize_bins",
    "denormalize_dataset",
    "derive_seed",
    "dominant_label_map",
    "embed_array",
    "embed_batch",
    "grad_check_layer",
    "grad_check_model",
    "homogeneity",
    "joint_train",
    "kl_cluster_loss",
    "kmeans_assign",
    "kmeans_fit",
    "learning_round",
    "load_artifact",
    "load_dataset",
    "macro_f1",
    "mix64",
    "mse_loss",
    "nmi",
    "normalize_bins",
    "normalize_dataset",
    "pca_fit",
    "pca_transform",
    "per_class_prf",
    "predict",
    "pretrain_ae",
    "reinit_head",
    "save_artifact",
    "save_dataset",
    "silhouette",
    "softmax",
    "softmax_cross_entropy",
    "synth_generate",
    "train_ssdc",
]
