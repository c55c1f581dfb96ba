"""Maintenance of set parameters: class centroids and one-vs-all hyperplanes.

Two procedures keep them in sync with the moving embedding space:

* offline update: pause, embed a fixed-size per-class sample with frozen
  network weights, and recompute everything from scratch;
* online update: after each step, blend the current parameters with
  batch-local estimates using a small weight, so they track the drift
  between offline refreshes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .model import forward
from .svm import (
    Hyperplane,
    HyperplaneSet,
    fit_linear_svm,
    fit_one_vs_all,
    separates_sample,
)


@dataclass(frozen=True)
class CentroidSet:
    """Per-class mean embeddings, with the sample counts behind each mean."""

    centroids: dict  # class_id -> (d,) vector
    counts: dict  # class_id -> samples used
    class_count: int

    def __post_init__(self):
        dims = {v.shape for v in self.centroids.values()}
        if len(dims) > 1:
            raise InvalidArgumentError("centroids must share one dimension")
        for v in self.centroids.values():
            if not np.all(np.isfinite(v)):
                raise InvalidArgumentError("centroid contains non-finite values")

    def class_ids(self):
        return sorted(self.centroids)


@dataclass(frozen=True)
class SetParams:
    centroids: CentroidSet
    hyperplanes: HyperplaneSet
    last_offline_iteration: int = 0


@dataclass(frozen=True)
class UpdateSchedule:
    offline_period_iters: int = 500
    online_alpha: float = 0.01
    per_class_offline_samples: int = 50
    min_pos_online: int = 2
    mode: str = "both"  # online_only | offline_only | both

    def __post_init__(self):
        if self.offline_period_iters < 1:
            raise InvalidArgumentError("offline_period_iters must be >= 1")
        if not 0.0 <= self.online_alpha <= 1.0:
            raise InvalidArgumentError("online_alpha must lie in [0, 1]")
        if self.mode not in ("online_only", "offline_only", "both"):
            raise InvalidArgumentError(f"unknown update mode {self.mode!r}")


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tol: float = 1e-4
    max_iter: int = 1000


def compute_centroids(embeddings, labels, class_ids, class_count=None) -> CentroidSet:
    """Per-class embedding means; classes with zero samples are omitted."""
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    class_ids = [int(j) for j in class_ids]
    centroids = {}
    counts = {}
    for j in class_ids:
        mask = y == j
        hits = int(mask.sum())
        if hits == 0:
            continue
        centroids[j] = X[mask].mean(axis=0)
        counts[j] = hits
    if class_count is None:
        class_count = len(class_ids)
    return CentroidSet(centroids, counts, class_count)


def sample_per_class(dataset, per_class, seed, iteration) -> np.ndarray:
    """Deterministic without-replacement per-class sample, keyed by (seed, iteration)."""
    rng = np.random.default_rng([int(seed), int(iteration), 0x6F])
    picks = []
    for j in range(dataset.class_count):
        indices = dataset.class_indices(j)
        if indices.size > per_class:
            indices = rng.choice(indices, size=per_class, replace=False)
            indices.sort()
        picks.append(indices)
    return np.concatenate(picks)


def offline_update(model, head, dataset, schedule: UpdateSchedule,
                   svm_config: SvmConfig, seed, iteration) -> SetParams:
    """Recompute all centroids and hyperplanes from a frozen-network embedding pass.

    Replaces (never blends with) any previous set parameters. The per-class
    sample is drawn deterministically from (seed, iteration).
    """
    if dataset.class_count < 2:
        raise InvalidArgumentError("offline update needs >= 2 classes")
    picks = sample_per_class(dataset, schedule.per_class_offline_samples,
                             seed, iteration)
    embeddings, _ = forward(model, dataset.features[picks])
    labels = dataset.labels[picks]
    centroids = compute_centroids(embeddings, labels, range(dataset.class_count),
                                  class_count=dataset.class_count)
    hyperplanes = fit_one_vs_all(embeddings, labels, C=svm_config.C,
                                 tol=svm_config.tol, max_iter=svm_config.max_iter)
    return SetParams(centroids, hyperplanes, last_offline_iteration=int(iteration))


def online_update(current: SetParams, batch_embeddings, labels,
                  schedule: UpdateSchedule, svm_config: SvmConfig) -> SetParams:
    """Blend current set parameters with batch-local estimates, weight alpha.

    Hyperplanes get w <- (1-a) w + a w_batch (no renormalization; the
    max-margin term is invariant to the scale of w) for classes with enough
    batch positives and negatives; centroids blend toward the batch class
    mean for every class present. Classes the batch does not cover, or that
    are missing from `current`, are left untouched.
    """
    alpha = schedule.online_alpha
    if alpha == 0.0:
        return current
    X = np.asarray(batch_embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)

    centroids = dict(current.centroids.centroids)
    counts = dict(current.centroids.counts)
    skipped = []
    for j in np.unique(y):
        j = int(j)
        if j not in centroids:
            skipped.append(j)
            continue
        batch_mean = X[y == j].mean(axis=0)
        centroids[j] = (1.0 - alpha) * centroids[j] + alpha * batch_mean

    planes = dict(current.hyperplanes.planes)
    min_pos = schedule.min_pos_online
    for j in np.unique(y):
        j = int(j)
        mask = y == j
        if int(mask.sum()) < min_pos or int((~mask).sum()) < min_pos:
            continue
        if j not in planes:
            skipped.append(j)
            continue
        fresh = fit_linear_svm(X, np.where(mask, 1.0, -1.0), C=svm_config.C,
                               tol=svm_config.tol, max_iter=svm_config.max_iter,
                               class_id=j)
        if not separates_sample(fresh, X):
            continue  # degenerate batch fit: blending it in would only corrupt
        old = planes[j]
        planes[j] = Hyperplane(
            w=(1.0 - alpha) * old.w + alpha * fresh.w,
            b=(1.0 - alpha) * old.b + alpha * fresh.b,
            class_id=j,
            fit_info=fresh.fit_info,
        )

    return SetParams(
        centroids=CentroidSet(centroids, counts, current.centroids.class_count),
        hyperplanes=HyperplaneSet(
            planes=planes,
            embedding_dim=current.hyperplanes.embedding_dim,
            class_count=current.hyperplanes.class_count,
            omitted_classes=current.hyperplanes.omitted_classes,
        ),
        last_offline_iteration=current.last_offline_iteration,
    )
