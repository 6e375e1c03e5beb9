"""Sweep containers, file formats, normalization and synthetic generation.

A sweep is one power spectral density measurement: 1024 dB values over a
fixed frequency span.  Datasets are immutable once constructed; training
code never mutates bins in place.

File formats
------------
CSV     header ``b0,...,b1023`` plus optional trailing ``label`` column,
        one sweep per row.  Readers accept headerless files.
Binary  little-endian, magic ``SPSW``; layout::

            magic    4 bytes  b"SPSW"
            version  u16      currently 1
            flags    u16      bit0 = labels present
            count    u32      number of sweeps
            bins     u32      bins per sweep (1024)
            body     count *  (bins * f32 [+ i32 label])

Normalization is a single scalar standardisation over every bin of every
sweep, (v - mean) / std, with the stats recorded on the dataset so it can
be undone and so inference applies the training stats unchanged.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ContractError,
    DataFormatError,
    DegenerateDataError,
    ShapeError,
)
from .rng import PortableRng, derive_seed

NUM_BINS = 1024

_MAGIC = b"SPSW"
_BIN_VERSION = 1


@dataclass(frozen=True)
class NormStats:
    """Global scalar standardisation parameters, in dB."""

    mean: float
    std: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.std)):
            raise ValueError("norm stats must be finite")
        if self.std <= 0:
            raise ValueError(f"std must be positive, got {self.std}")


@dataclass(frozen=True)
class Sweep:
    """One 1024-bin PSD sweep with an optional class label and free tags."""

    bins: np.ndarray
    label: int | None = None
    meta: dict | None = None

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float32)
        if bins.shape != (NUM_BINS,):
            raise ShapeError(f"sweep must have {NUM_BINS} bins, got {bins.shape}")
        if not np.isfinite(bins).all():
            raise ValueError("sweep bins must be finite")
        object.__setattr__(self, "bins", bins)


@dataclass(frozen=True)
class Dataset:
    """A stack of sweeps stored as one (n, 1024) float32 array.

    Labels are all-or-none: either every sweep carries a class id in
    [0, len(class_names)) or none does, matching what the file formats can
    represent.
    """

    bins: np.ndarray
    labels: np.ndarray | None = None
    class_names: tuple[str, ...] | None = None
    norm_stats: NormStats | None = None
    meta: tuple[dict, ...] | None = None

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.float32)
        if bins.ndim != 2 or bins.shape[1] != NUM_BINS:
            raise ShapeError(f"expected (n, {NUM_BINS}) bins, got {bins.shape}")
        if len(bins) == 0:
            raise InsufficientDataError("dataset must hold at least one sweep")
        if not np.isfinite(bins).all():
            raise ValueError("dataset bins must be finite")
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)
        if self.labels is not None:
            labels = np.ascontiguousarray(self.labels, dtype=np.int32)
            if labels.shape != (len(bins),):
                raise ShapeError("labels must align with sweeps")
            if self.class_names is None:
                names = tuple(f"class{i}" for i in range(int(labels.max()) + 1 if len(labels) else 0))
                object.__setattr__(self, "class_names", names)
            else:
                object.__setattr__(self, "class_names", tuple(self.class_names))
            if len(labels) and (labels.min() < 0 or labels.max() >= len(self.class_names)):
                raise ValueError("labels must lie in [0, len(class_names))")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)
        elif self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.meta is not None and len(self.meta) != len(bins):
            raise ShapeError("meta must align with sweeps")

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def sweep(self, i: int) -> Sweep:
        return Sweep(
            bins=self.bins[i].copy(),
            label=int(self.labels[i]) if self.labels is not None else None,
            meta=self.meta[i] if self.meta is not None else None,
        )

    def __iter__(self) -> Iterator[Sweep]:
        return (self.sweep(i) for i in range(len(self)))

    @staticmethod
    def from_sweeps(sweeps: Sequence[Sweep], class_names: Sequence[str] | None = None) -> "Dataset":
        if not sweeps:
            raise ValueError("cannot build a dataset from zero sweeps")
        labelled = [s.label is not None for s in sweeps]
        if any(labelled) and not all(labelled):
            raise ValueError("sweeps must be all labeled or all unlabeled")
        bins = np.stack([s.bins for s in sweeps])
        labels = np.array([s.label for s in sweeps], dtype=np.int32) if all(labelled) else None
        meta = tuple(s.meta or {} for s in sweeps) if any(s.meta for s in sweeps) else None
        return Dataset(bins=bins, labels=labels, class_names=class_names, meta=meta)

    def replace_bins(self, bins: np.ndarray, norm_stats: NormStats | None) -> "Dataset":
        return Dataset(
            bins=bins,
            labels=self.labels,
            class_names=self.class_names,
            norm_stats=norm_stats,
            meta=self.meta,
        )


# ---------------------------------------------------------------------------
# normalization


def normalize_dataset(dataset: Dataset, stats: NormStats | None = None) -> Dataset:
    """Standardise all bins with one global scalar mean/std.

    Already-normalized datasets pass through unchanged; passing explicit
    ``stats`` applies those (the inference path) instead of fitting new ones.
    """
    if dataset.norm_stats is not None:
        return dataset
    if stats is None:
        flat = dataset.bins.astype(np.float64)
        mean = float(flat.mean())
        std = float(flat.std())
        if std == 0.0 or not np.isfinite(std):
            raise DegenerateDataError("bins have zero variance, cannot standardise")
        stats = NormStats(mean=mean, std=std)
    scaled = (dataset.bins - np.float32(stats.mean)) / np.float32(stats.std)
    return dataset.replace_bins(scaled.astype(np.float32), stats)


def denormalize_dataset(dataset: Dataset) -> Dataset:
    """Invert normalize_dataset using the recorded stats."""
    if dataset.norm_stats is None:
        raise ContractError("dataset has no norm stats to undo")
    st = dataset.norm_stats
    raw = dataset.bins * np.float32(st.std) + np.float32(st.mean)
    return dataset.replace_bins(raw.astype(np.float32), None)


def normalize_bins(bins: np.ndarray, stats: NormStats) -> np.ndarray:
    """Apply stored stats to raw dB bins (single sweep or a stack)."""
    arr = np.asarray(bins, dtype=np.float32)
    return ((arr - np.float32(stats.mean)) / np.float32(stats.std)).astype(np.float32)


def denormalize_bins(bins: np.ndarray, stats: NormStats) -> np.ndarray:
    arr = np.asarray(bins, dtype=np.float64)
    return arr * stats.std + stats.mean


# ---------------------------------------------------------------------------
# CSV

_CSV_HEADER_PREFIX = "b0,"


def save_dataset_csv(dataset: Dataset, path: str) -> None:
    cols = [f"b{i}" for i in range(NUM_BINS)]
    if dataset.labeled:
        cols.append("label")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(dataset)):
            # %.9g round-trips float32 exactly through decimal
            row = ",".join(format(float(v), ".9g") for v in dataset.bins[i])
            if dataset.labeled:
                row += f",{int(dataset.labels[i])}"
            fh.write(row + "\n")


def _parse_csv(fh: io.TextIOBase) -> tuple[np.ndarray, np.ndarray | None]:
    first = fh.readline()
    if first == "":
        raise DataFormatError("empty CSV file")
    has_header = first.startswith(_CSV_HEADER_PREFIX) or first.startswith("b0;")
    rows: list[np.ndarray] = []
    labels: list[int] = []
    labeled: bool | None = None
    row_no = 0

    def fail(msg: str) -> DataFormatError:
        return DataFormatError(f"CSV parse error at row {row_no}: {msg}")

    pending = [] if has_header else [first]
    for line in pending + list(fh):
        line = line.strip()
        if not line:
            continue
        row_no += 1
        parts = line.split(",")
        if len(parts) == NUM_BINS:
            row_labeled = False
        elif len(parts) == NUM_BINS + 1:
            row_labeled = True
        else:
            raise fail(f"expected {NUM_BINS} or {NUM_BINS + 1} fields, got {len(parts)}")
        if labeled is None:
            labeled = row_labeled
        elif labeled != row_labeled:
            raise fail("inconsistent label column")
        try:
            vals = np.array(parts[:NUM_BINS], dtype=np.float32)
        except ValueError as exc:
            raise fail(f"bad float value ({exc})") from None
        if not np.isfinite(vals).all():
            raise fail("non-finite bin value")
        rows.append(vals)
        if row_labeled:
            try:
                labels.append(int(parts[-1]))
            except ValueError:
                raise fail(f"bad label {parts[-1]!r}") from None
    if not rows:
        raise DataFormatError("CSV contains no sweep rows")
    bins = np.stack(rows)
    return bins, (np.array(labels, dtype=np.int32) if labeled else None)


# ---------------------------------------------------------------------------
# binary


def save_dataset_bin(dataset: Dataset, path: str) -> None:
    flags = 1 if dataset.labeled else 0
    header = (
        _MAGIC
        + int(_BIN_VERSION).to_bytes(2, "little")
        + int(flags).to_bytes(2, "little")
        + len(dataset).to_bytes(4, "little")
        + NUM_BINS.to_bytes(4, "little")
    )
    with open(path, "wb") as fh:
        fh.write(header)
        if dataset.labeled:
            for i in range(len(dataset)):
                fh.write(dataset.bins[i].astype("<f4").tobytes())
                fh.write(int(dataset.labels[i]).to_bytes(4, "little", signed=True))
        else:
            fh.write(dataset.bins.astype("<f4").tobytes())


def _parse_bin(raw: bytes) -> tuple[np.ndarray, np.ndarray | None]:
    if len(raw) < 16:
        raise DataFormatError("binary file truncated before header")
    if raw[:4] != _MAGIC:
        raise DataFormatError(f"bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    version = int.from_bytes(raw[4:6], "little")
    if version != _BIN_VERSION:
        raise DataFormatError(f"unsupported binary version {version}")
    flags = int.from_bytes(raw[6:8], "little")
    count = int.from_bytes(raw[8:12], "little")
    bins_per = int.from_bytes(raw[12:16], "little")
    if bins_per != NUM_BINS:
        raise DataFormatError(f"expected {NUM_BINS} bins per sweep, got {bins_per}")
    labeled = bool(flags & 1)
    body = raw[16:]
    rec = NUM_BINS * 4 + (4 if labeled else 0)
    if len(body) != count * rec:
        raise DataFormatError(
            f"body holds {len(body)} bytes, expected {count * rec} for {count} sweeps"
        )
    if labeled:
        rows = np.frombuffer(body, dtype=np.uint8).reshape(count, rec)
        bins = rows[:, : NUM_BINS * 4].copy().view("<f4").astype(np.float32)
        labels = rows[:, NUM_BINS * 4 :].copy().view("<i4").astype(np.int32).ravel()
    else:
        bins = np.frombuffer(body, dtype="<f4").astype(np.float32).reshape(count, NUM_BINS)
        labels = None
    if not np.isfinite(bins).all():
        raise DataFormatError("binary file contains non-finite bins")
    return bins, labels


def save_dataset(dataset: Dataset, path: str, fmt: str | None = None) -> None:
    fmt = fmt or _format_from_path(path)
    if fmt == "csv":
        save_dataset_csv(dataset, path)
    elif fmt == "bin":
        save_dataset_bin(dataset, path)
    else:
        raise DataFormatError(f"unknown dataset format {fmt!r}")


def load_dataset(path: str, fmt: str | None = None) -> Dataset:
    """Read a sweep file; labels make class names ``class0..classN``."""
    fmt = fmt or _format_from_path(path)
    if fmt == "csv":
        with open(path, "r", encoding="ascii") as fh:
            bins, labels = _parse_csv(fh)
    elif fmt == "bin":
        with open(path, "rb") as fh:
            bins, labels = _parse_bin(fh.read())
    else:
        raise DataFormatError(f"unknown dataset format {fmt!r}")
    return Dataset(bins=bins, labels=labels)


def _format_from_path(path: str) -> str:
    lower = str(path).lower()
    if lower.endswith(".csv"):
        return "csv"
    if lower.endswith(".bin"):
        return "bin"
    raise DataFormatError(f"cannot infer dataset format from {path!r}")


# ---------------------------------------------------------------------------
# synthetic sweeps

SHAPE_KINDS = ("wideband-plateau", "narrowband-peak", "multi-tone", "pilot-plateau", "noise-only")


@dataclass(frozen=True)
class ClassTemplate:
    """Parameter ranges for one emitter class.

    center and width are inclusive bin ranges sampled uniformly per sweep;
    power_db is a half-open float range, in dB above the noise floor.
    """

    name: str
    kind: str
    center: tuple[int, int]
    width: tuple[int, int]
    power_db: tuple[float, float]

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        lo, hi = self.width
        if not (1 <= lo <= hi <= NUM_BINS):
            raise ValueError(f"width range {self.width} must fit inside {NUM_BINS} bins")
        clo, chi = self.center
        if not (0 <= clo <= chi < NUM_BINS):
            raise ValueError(f"center range {self.center} outside the sweep")
        if self.power_db[0] > self.power_db[1]:
            raise ValueError("power range reversed")


@dataclass(frozen=True)
class SyntheticProfile:
    templates: tuple[ClassTemplate, ...]
    noise_floor_db: float = -110.0
    noise_sigma_db: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.templates:
            raise ValueError("profile needs at least one template")
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise ValueError("template names must be unique")
        if self.noise_sigma_db < 0:
            raise ValueError("noise sigma must be non-negative")
        object.__setattr__(self, "templates", tuple(self.templates))


# Desk-scale stand-ins for common wideband/narrowband/multicarrier emitters.
# Power ranges span well over 15 dB so any learned representation has to cope
# with a wide SNR spread within each class.
DEFAULT_TEMPLATES = (
    ClassTemplate("wideband", "wideband-plateau", center=(380, 644), width=(300, 420), power_db=(12.0, 30.0)),
    ClassTemplate("narrowband", "narrowband-peak", center=(120, 904), width=(24, 48), power_db=(15.0, 34.0)),
    ClassTemplate("multitone", "multi-tone", center=(220, 804), width=(120, 200), power_db=(12.0, 28.0)),
    ClassTemplate("pilotband", "pilot-plateau", center=(300, 724), width=(150, 250), power_db=(12.0, 27.0)),
    ClassTemplate("background", "noise-only", center=(0, 1023), width=(1, 1), power_db=(0.0, 0.0)),
)


def default_profile(num_classes: int = 3, seed: int = 0) -> SyntheticProfile:
    if not 1 <= num_classes <= len(DEFAULT_TEMPLATES):
        raise ValueError(f"num_classes must be in [1, {len(DEFAULT_TEMPLATES)}]")
    return SyntheticProfile(templates=DEFAULT_TEMPLATES[:num_classes], seed=seed)


def _shape_contribution(kind: str, center: int, width: int, power: float) -> np.ndarray:
    x = np.arange(NUM_BINS, dtype=np.float64)
    out = np.zeros(NUM_BINS, dtype=np.float64)
    half = width / 2.0
    if kind == "wideband-plateau":
        lo = max(0, int(round(center - half)))
        hi = min(NUM_BINS, lo + width)
        out[lo:hi] = power
    elif kind == "narrowband-peak":
        sigma = max(width / 4.0, 1.0)
        out = power * np.exp(-0.5 * ((x - center) / sigma) ** 2)
    elif kind == "multi-tone":
        # four equal tones spread across the occupied width
        for j in range(4):
            pos = center - half + (j + 0.5) * width / 4.0
            out = np.maximum(out, power * np.exp(-0.5 * ((x - pos) / 2.0) ** 2))
    elif kind == "pilot-plateau":
        lo = max(0, int(round(center - half)))
        hi = min(NUM_BINS, lo + width)
        out[lo:hi] = power
        pilot = (power + 8.0) * np.exp(-0.5 * ((x - center) / 1.5) ** 2)
        out = np.maximum(out, pilot)
    elif kind == "noise-only":
        pass
    else:  # pragma: no cover - template validation rejects this earlier
        raise ValueError(f"unknown shape kind {kind!r}")
    return out


def synth_generate(profile: SyntheticProfile, n_per_class: int) -> Dataset:
    """Draw n_per_class sweeps per template, labeled by template index.

    Each sweep is noise_floor + N(0, sigma) noise + template shape, all in
    dB.  Per-sweep draws come from a child stream keyed by (class, index) so
    the dataset is identical no matter how generation is batched.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    total = n_per_class * len(profile.templates)
    bins = np.empty((total, NUM_BINS), dtype=np.float32)
    labels = np.empty(total, dtype=np.int32)
    meta: list[dict] = []
    row = 0
    for cls, tpl in enumerate(profile.templates):
        for i in range(n_per_class):
            rng = PortableRng(derive_seed(profile.seed, cls, i))
            center = int(rng.integers(1, tpl.center[0], tpl.center[1] + 1)[0])
            width = int(rng.integers(1, tpl.width[0], tpl.width[1] + 1)[0])
            power = float(rng.uniform(1, tpl.power_db[0], tpl.power_db[1])[0])
            sweep = np.full(NUM_BINS, profile.noise_floor_db, dtype=np.float64)
            if profile.noise_sigma_db > 0:
                sweep += rng.normal(NUM_BINS, 0.0, profile.noise_sigma_db)
            sweep += _shape_contribution(tpl.kind, center, width, power)
            bins[row] = sweep.astype(np.float32)
            labels[row] = cls
            meta.append({"template": tpl.name, "center": center, "width": width, "power_db": power})
            row += 1
    return Dataset(
        bins=bins,
        labels=labels,
        class_names=tuple(t.name for t in profile.templates),
        meta=tuple(meta),
    )
