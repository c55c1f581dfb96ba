"""Sample- and set-based loss functions with analytic embedding gradients.

Each loss returns a `LossResult` carrying the scalar value and the gradient
with respect to the embeddings (plus head gradients for the softmax term).
Set parameters (hyperplanes, centroids) are constants during differentiation:
their maintenance is a separate concern handled by the update procedures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InvalidArgumentError, ShapeError

EPS_W_NORM = 1e-12  # hyperplanes with ||w|| below this are skipped
EPS_DISTANCE = 1e-9  # pushing-loss gradient is zeroed below this distance


@dataclass(frozen=True)
class LossWeights:
    """Balancing terms of the joint objective; defaults follow the reference tuning."""

    softmax_weight: float = 1.0
    lambda_M: float = 0.03
    lambda_P: float = 0.03
    lambda_C: float = 0.0001

    def __post_init__(self):
        values = (self.softmax_weight, self.lambda_M, self.lambda_P, self.lambda_C)
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise InvalidArgumentError("loss weights must be finite and >= 0")


@dataclass(frozen=True)
class LossResult:
    value: float
    grad_embeddings: np.ndarray
    grad_head: tuple = None  # (dW, db) for the softmax term
    skipped_classes: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise InvalidArgumentError("loss value is not finite")
        if not np.all(np.isfinite(self.grad_embeddings)):
            raise InvalidArgumentError("loss gradient is not finite")

    def scaled(self, factor) -> "LossResult":
        head = None
        if self.grad_head is not None:
            head = tuple(factor * g for g in self.grad_head)
        return LossResult(factor * self.value, factor * self.grad_embeddings,
                          head, self.skipped_classes)


def softmax_loss(head, embeddings, labels) -> LossResult:
    """Mean cross-entropy of softmax over logits x @ W + b."""
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if head.class_count < 2:
        raise InvalidArgumentError("softmax needs at least 2 classes")
    if X.ndim != 2 or X.shape[1] != head.W.shape[0] or y.shape != (X.shape[0],):
        raise ShapeError("embeddings/labels do not match the classifier head")
    if y.min() < 0 or y.max() >= head.class_count:
        raise InvalidArgumentError("label out of range")

    n = X.shape[0]
    logits = X @ head.W + head.b
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    total = exp.sum(axis=1, keepdims=True)
    log_prob = logits - np.log(total)
    value = float(-log_prob[np.arange(n), y].mean())

    dlogits = exp / total
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grad_emb = dlogits @ head.W.T
    grad_W = X.T @ dlogits
    grad_b = dlogits.sum(axis=0)
    return LossResult(value, grad_emb, grad_head=(grad_W, grad_b))


def max_margin_loss(embeddings, labels, hyperplanes, lambda_M) -> LossResult:
    """Exponential penalty on the signed, norm-scaled distance to every class plane.

    For sample i and class j the term is exp(-s * (w_j.x_i + b_j) / ||w_j||),
    where s is +1 for the sample's own class and -1 otherwise; own-class terms
    carry weight 1/2, other-class terms 1/(2(m-1)). Both the value and the
    gradient are averaged over the batch. Classes without a usable hyperplane
    contribute nothing and are reported in `skipped_classes`.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("embeddings must be (n, d) with one label per row")
    if X.shape[1] != hyperplanes.embedding_dim:
        raise ShapeError("embedding dim does not match the hyperplane set")

    m = hyperplanes.class_count
    skipped = list(hyperplanes.omitted_classes)
    usable = []
    for j in hyperplanes.class_ids():
        if np.linalg.norm(hyperplanes.planes[j].w) <= EPS_W_NORM:
            skipped.append(j)
        else:
            usable.append(j)
    n = X.shape[0]
    if not usable or lambda_M == 0.0:
        return LossResult(0.0, np.zeros_like(X), skipped_classes=tuple(sorted(skipped)))

    W = np.stack([hyperplanes.planes[j].w for j in usable])  # (p, d)
    b = np.array([hyperplanes.planes[j].b for j in usable])
    norms = np.linalg.norm(W, axis=1)
    W_unit = W / norms[:, None]
    distances = (X @ W.T + b) / norms  # (n, p) signed distances
    own = y[:, None] == np.array(usable)[None, :]
    sign = np.where(own, 1.0, -1.0)
    weight = np.where(own, 0.5, 0.5 / (m - 1))
    terms = weight * np.exp(-sign * distances)
    value = lambda_M / n * float(terms.sum())
    grad = lambda_M / n * ((-sign * terms) @ W_unit)
    return LossResult(value, grad, skipped_classes=tuple(sorted(skipped)))


def center_loss(embeddings, labels, centroids, lambda_C) -> LossResult:
    """Half the squared distance of each sample to its own class centroid."""
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("embeddings must be (n, d) with one label per row")
    missing = sorted(set(int(j) for j in np.unique(y)) - set(centroids.centroids))
    if missing:
        raise ContractError(f"no centroid for present classes {missing}")

    C = np.stack([centroids.centroids[int(j)] for j in y])
    diff = X - C
    value = 0.5 * lambda_C * float((diff * diff).sum())
    return LossResult(value, lambda_C * diff)


def pushing_loss(embeddings, labels, centroids, lambda_P) -> LossResult:
    """Exponentially decaying repulsion from every other class's centroid.

    The gradient of exp(-||x - c||) is undefined where x coincides with c;
    contributions with distance below EPS_DISTANCE are zeroed (the symmetric
    limit), while the value still counts them.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("embeddings must be (n, d) with one label per row")
    m = centroids.class_count
    class_ids = sorted(centroids.centroids)
    missing = sorted(set(range(m)) - set(class_ids))
    relevant_missing = [j for j in missing if np.any(y != j)]
    if relevant_missing:
        raise ContractError(f"no centroid for negative classes {relevant_missing}")

    C = np.stack([centroids.centroids[j] for j in class_ids])  # (m, d)
    diff = X[:, None, :] - C[None, :, :]  # (n, m, d)
    dist = np.linalg.norm(diff, axis=2)  # (n, m)
    negative = y[:, None] != np.array(class_ids)[None, :]
    decay = np.exp(-dist) * negative
    value = lambda_P / m * float(decay.sum())

    safe = dist >= EPS_DISTANCE
    scale = np.where(safe & negative, decay / np.where(safe, dist, 1.0), 0.0)
    grad = -lambda_P / m * np.einsum("nm,nmd->nd", scale, diff)
    return LossResult(value, grad)


def combine_losses(results) -> LossResult:
    """Sum already-weighted loss terms; gradients add elementwise."""
    results = list(results)
    if not results:
        raise InvalidArgumentError("need at least one loss term")
    shape = results[0].grad_embeddings.shape
    for r in results:
        if r.grad_embeddings.shape != shape:
            raise ShapeError("loss terms disagree on the embedding gradient shape")

    value = 0.0
    grad = np.zeros(shape)
    head = None
    skipped = []
    for r in results:
        value += r.value
        grad = grad + r.grad_embeddings
        skipped.extend(r.skipped_classes)
        if r.grad_head is not None:
            if head is None:
                head = [np.array(g, copy=True) for g in r.grad_head]
            else:
                if len(head) != len(r.grad_head):
                    raise ShapeError("head gradients disagree in layout")
                for acc, g in zip(head, r.grad_head):
                    if acc.shape != g.shape:
                        raise ShapeError("head gradients disagree in shape")
                    acc += g
    return LossResult(value, grad, tuple(head) if head is not None else None,
                      tuple(skipped))
