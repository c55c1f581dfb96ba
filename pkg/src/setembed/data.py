"""Synthetic dataset generation, CSV ingestion, and verification-pair sampling.

All generators are pure functions of their arguments: the same arguments and
seed produce bit-identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetParseError, InfeasibleError, InvalidArgumentError

_MAX_MEAN_ATTEMPTS = 1000


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (one row per sample) with dense class labels in [0, m)."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    seed: int = 0

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2 or features.shape[1] < 1:
            raise InvalidArgumentError("features must be a 2D matrix with d >= 1")
        if labels.shape != (features.shape[0],):
            raise InvalidArgumentError("labels must be one entry per feature row")
        if not np.all(np.isfinite(features)):
            raise InvalidArgumentError("features contain non-finite values")
        if labels.size == 0:
            raise InvalidArgumentError("dataset is empty")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise InvalidArgumentError("labels must lie in [0, class_count)")
        present = np.unique(labels)
        if present.size != self.class_count:
            raise InvalidArgumentError("every class index must appear at least once")

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_indices(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_id)


@dataclass(frozen=True)
class PairList:
    """Index pairs for verification, flagged by whether the identities match."""

    pairs: tuple  # of (index_a, index_b, same_identity)

    def __post_init__(self):
        if not any(same for _, _, same in self.pairs):
            raise InvalidArgumentError("pair list needs at least one positive pair")
        if not any(not same for _, _, same in self.pairs):
            raise InvalidArgumentError("pair list needs at least one negative pair")

    def __len__(self):
        return len(self.pairs)


def _sample_class_means(rng, class_count, dim, separation):
    # Candidates are drawn from a cube wide enough that rejection rarely loops.
    half_width = separation * max(2.0, class_count ** (1.0 / dim))
    means = []
    attempts = 0
    while len(means) < class_count:
        if attempts >= _MAX_MEAN_ATTEMPTS:
            raise InvalidArgumentError(
                f"could not place {class_count} class means at pairwise distance "
                f">= {separation} within {_MAX_MEAN_ATTEMPTS} attempts"
            )
        candidate = rng.uniform(-half_width, half_width, size=dim)
        attempts += 1
        if all(np.linalg.norm(candidate - m) >= separation for m in means):
            means.append(candidate)
    return np.vstack(means)


def gen_blobs(class_count, per_class, dim, spread, separation, seed) -> LabeledDataset:
    """Isotropic Gaussian clusters around class means at pairwise distance >= separation."""
    if class_count < 2:
        raise InvalidArgumentError("class_count must be >= 2")
    if per_class < 1 or dim < 1:
        raise InvalidArgumentError("per_class and dim must be >= 1")
    if separation <= 0 or spread < 0:
        raise InvalidArgumentError("separation must be > 0 and spread >= 0")

    rng = np.random.default_rng([int(seed), 0x61])
    means = _sample_class_means(rng, class_count, dim, separation)
    labels = np.repeat(np.arange(class_count), per_class)
    noise = rng.standard_normal((class_count * per_class, dim))
    features = means[labels] + spread * noise
    return LabeledDataset(features, labels, class_count, seed=int(seed))


def gen_rings(class_count, per_class, seed) -> LabeledDataset:
    """2D concentric rings, one ring per class; not linearly separable in input space."""
    if class_count < 2:
        raise InvalidArgumentError("class_count must be >= 2")
    if per_class < 1:
        raise InvalidArgumentError("per_class must be >= 1")

    rng = np.random.default_rng([int(seed), 0x72])
    gap = 2.0
    labels = np.repeat(np.arange(class_count), per_class)
    n = labels.size
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    # Radial jitter stays below gap/2 so ring order is guaranteed by construction.
    radii = (labels + 1) * gap + rng.uniform(-0.2, 0.2, size=n) * gap
    features = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return LabeledDataset(features, labels, class_count, seed=int(seed))


def load_dataset_csv(path) -> LabeledDataset:
    """Read `label,f1,...,fd` rows; labels are re-indexed densely by first appearance."""
    raw_labels = []
    rows = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise DatasetParseError("expected `label,f1,...`", line_number)
            if dim is None:
                dim = len(fields) - 1
            elif len(fields) - 1 != dim:
                raise DatasetParseError(
                    f"row has {len(fields) - 1} features, expected {dim}", line_number
                )
            try:
                label = int(float(fields[0]))
                values = [float(tok) for tok in fields[1:]]
            except ValueError as exc:
                raise DatasetParseError(f"non-numeric field ({exc})", line_number) from None
            raw_labels.append(label)
            rows.append(values)
    if not rows:
        raise DatasetParseError("file contains no samples", line_number=1)

    remap = {}
    for label in raw_labels:
        if label not in remap:
            remap[label] = len(remap)
    dense = np.array([remap[label] for label in raw_labels], dtype=np.int64)
    return LabeledDataset(np.asarray(rows, dtype=np.float64), dense, len(remap), seed=0)


def save_dataset_csv(dataset: LabeledDataset, path) -> None:
    """Write the dataset in the `label,f1,...,fd` interchange format."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(",".join([str(int(label))] + [repr(float(v)) for v in row]) + "\n")


def make_verification_pairs(dataset: LabeledDataset, count, seed) -> PairList:
    """Sample `count` index pairs, half positive / half negative (+1 positive if odd)."""
    if count < 2:
        raise InvalidArgumentError("count must be >= 2")
    if dataset.class_count < 2:
        raise InvalidArgumentError("dataset must have >= 2 classes")
    per_class = [dataset.class_indices(j) for j in range(dataset.class_count)]
    eligible = [idx for idx in per_class if idx.size >= 2]
    if not eligible:
        raise InfeasibleError("no class has >= 2 samples; cannot form a positive pair")

    rng = np.random.default_rng([int(seed), 0x70])
    n_pos = (count + 1) // 2
    n_neg = count // 2
    pairs = []
    for _ in range(n_pos):
        members = eligible[rng.integers(len(eligible))]
        a, b = rng.choice(members, size=2, replace=False)
        pairs.append((int(a), int(b), True))
    for _ in range(n_neg):
        ja, jb = rng.choice(dataset.class_count, size=2, replace=False)
        a = rng.choice(per_class[ja])
        b = rng.choice(per_class[jb])
        pairs.append((int(a), int(b), False))
    return PairList(tuple(pairs))
