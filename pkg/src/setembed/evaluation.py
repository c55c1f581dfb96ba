"""Verification protocol: cosine scores over labeled pairs, with accuracy/AUC/EER.

AUC uses exhaustive positive-vs-negative pair counting with ties worth 1/2.
Accuracy picks the best threshold for the given scores (scanning midpoints of
adjacent sorted scores plus the two trivial all-positive/all-negative
thresholds). EER comes from linear interpolation of the ROC polyline where
false-accept meets false-reject.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError

MIN_NORM = 1e-12


@dataclass(frozen=True)
class VerificationReport:
    accuracy: float
    auc: float
    eer: float
    threshold: float
    pair_count: int

    def as_text(self) -> str:
        """Flat key=value block, one metric per line."""
        return "\n".join([
            f"accuracy={self.accuracy!r}",
            f"auc={self.auc!r}",
            f"eer={self.eer!r}",
            f"threshold={self.threshold!r}",
            f"pair_count={self.pair_count}",
        ])


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a <= MIN_NORM or norm_b <= MIN_NORM:
        raise DegenerateInputError("cosine similarity of a near-zero vector")
    return float(a @ b / (norm_a * norm_b))


def mean_embedding(vectors) -> np.ndarray:
    vectors = list(vectors)
    if not vectors:
        raise InvalidArgumentError("mean of an empty list")
    stacked = np.asarray(vectors, dtype=np.float64)
    if stacked.ndim != 2:
        raise InvalidArgumentError("vectors must share one dimension")
    return stacked.mean(axis=0)


def _auc_pair_counting(pos, neg):
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def _best_threshold(scores, same):
    """Maximize accuracy of `score >= t`; ties resolve to the lowest threshold."""
    order = np.sort(np.unique(scores))
    candidates = [order[0] - 1.0]
    candidates.extend((order[:-1] + order[1:]) / 2.0)
    candidates.append(order[-1] + 1.0)

    n = scores.size
    best_acc = -1.0
    best_t = candidates[0]
    for t in candidates:
        acc = float(((scores >= t) == same).sum()) / n
        if acc > best_acc:
            best_acc = acc
            best_t = t
    return best_acc, float(best_t)


def _roc_points(pos, neg):
    """(FPR, TPR) at every distinct threshold, descending, with (0,0) prepended."""
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = [(pos >= t).sum() / pos.size for t in thresholds]
    fpr = [(neg >= t).sum() / neg.size for t in thresholds]
    return np.concatenate([[0.0], fpr]), np.concatenate([[0.0], tpr])


def _equal_error_rate(pos, neg):
    fpr, tpr = _roc_points(pos, neg)
    # g = FPR + TPR - 1 rises monotonically from -1 to +1 along the polyline.
    g = fpr + tpr - 1.0
    k = int(np.searchsorted(g, 0.0, side="left"))
    if k == 0:
        return float(fpr[0])
    if g[k - 1] == 0.0:
        return float(fpr[k - 1])
    denom = (fpr[k] - fpr[k - 1]) + (tpr[k] - tpr[k - 1])
    frac = (1.0 - fpr[k - 1] - tpr[k - 1]) / denom
    return float(fpr[k - 1] + frac * (fpr[k] - fpr[k - 1]))


def verification_metrics(scores, same_identity) -> VerificationReport:
    """Score a verification run; higher scores must mean 'more likely same'."""
    scores = np.asarray(scores, dtype=np.float64)
    same = np.asarray(same_identity, dtype=bool)
    if scores.shape != same.shape or scores.ndim != 1:
        raise InvalidArgumentError("scores and flags must be equal-length vectors")
    pos = scores[same]
    neg = scores[~same]
    if pos.size == 0 or neg.size == 0:
        raise InvalidArgumentError("need at least one positive and one negative pair")

    auc = float(_auc_pair_counting(pos, neg))
    accuracy, threshold = _best_threshold(scores, same)
    eer = _equal_error_rate(pos, neg)
    return VerificationReport(accuracy=accuracy, auc=auc, eer=eer,
                              threshold=threshold, pair_count=int(scores.size))


def score_pairs(embeddings, pair_list) -> tuple:
    """Cosine-score each (a, b) pair of embedding rows; returns (scores, flags)."""
    scores = []
    flags = []
    for a, b, same in pair_list.pairs:
        scores.append(cosine_similarity(embeddings[a], embeddings[b]))
        flags.append(bool(same))
    return np.asarray(scores), np.asarray(flags)


def export_pair_scores(path, scores, same_identity) -> None:
    """Write the `score,same_identity` CSV used for external plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("score,same_identity\n")
        for s, flag in zip(scores, same_identity):
            fh.write(f"{float(s)!r},{1 if flag else 0}\n")
