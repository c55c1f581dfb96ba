"""From-scratch linear soft-margin SVM, one hyperplane per class in one-vs-all mode.

The solver maximizes the L1-hinge dual

    D(alpha) = sum(alpha) - 0.5 * ||sum_i alpha_i y_i x_i||^2
    subject to 0 <= alpha_i <= C and sum_i alpha_i y_i = 0

by pairwise coordinate ascent: the equality constraint makes single-coordinate
moves infeasible, so each step updates the maximal violating pair (the two
coordinates with the largest KKT gap), which is the minimal working set for
this problem. Selection and tie-breaking are deterministic, so a fit is a pure
function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, ShapeError

EPS_CURVATURE = 1e-12


@dataclass(frozen=True)
class FitInfo:
    iterations: int
    dual_objective: float
    converged: bool


@dataclass(frozen=True)
class Hyperplane:
    """Separating hyperplane w^T x + b = 0 for one class, plus solver state.

    `alpha` holds the dual variables of the fit; they are kept so the
    Karush-Kuhn-Tucker conditions can be re-verified after the fact.
    """

    w: np.ndarray
    b: float
    class_id: int
    fit_info: FitInfo
    alpha: np.ndarray = field(default=None, repr=False)

    def signed_distance(self, X) -> np.ndarray:
        """Distance to the plane, positive on the w side: (w.x + b) / ||w||."""
        norm = float(np.linalg.norm(self.w))
        return (np.asarray(X) @ self.w + self.b) / norm

    def decision(self, X) -> np.ndarray:
        return np.asarray(X) @ self.w + self.b


@dataclass(frozen=True)
class HyperplaneSet:
    """One-vs-all hyperplanes keyed by class id."""

    planes: dict  # class_id -> Hyperplane
    embedding_dim: int
    class_count: int
    omitted_classes: tuple = ()

    def __post_init__(self):
        for plane in self.planes.values():
            if plane.w.shape != (self.embedding_dim,):
                raise ShapeError("hyperplane dimension does not match the set")

    def __contains__(self, class_id):
        return class_id in self.planes

    def class_ids(self):
        return sorted(self.planes)


def _dual_objective(alpha, w):
    return float(alpha.sum() - 0.5 * (w @ w))


def fit_linear_svm(X, y, C=1.0, tol=1e-4, max_iter=1000, class_id=-1) -> Hyperplane:
    """Fit a binary linear SVM on labels y in {-1, +1}.

    `max_iter` counts sweeps of n pair updates each. The returned hyperplane's
    `converged` flag is computed from the final KKT residual, so it keeps its
    meaning even if the internal stopping rule and the residual disagree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("X must be (n, d) and y must be (n,)")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X contains non-finite values")
    if not (np.all(np.abs(y) == 1.0) and y.min() < 0 < y.max()):
        raise InvalidArgumentError("y must contain both +1 and -1 labels")
    if C <= 0 or tol <= 0:
        raise InvalidArgumentError("C and tol must be positive")

    n = X.shape[0]
    sq_norms = np.einsum("ij,ij->i", X, X)
    # Gram rows make each pair update O(n); fall back to matvec when the
    # Gram matrix would be too large to be worth it
    gram = X @ X.T if n <= 3000 else None
    alpha = np.zeros(n)
    scores = np.zeros(n)  # X @ w, maintained incrementally
    # Stop below tol so the b-dependent residual check has headroom.
    gap_target = 0.5 * tol
    pos = y > 0

    steps = 0
    last_objective = -np.inf
    for sweep in range(max_iter):
        for _ in range(n):
            v = y - scores  # -y_k * grad_k of the dual; equals b at free optima
            up = (pos & (alpha < C)) | (~pos & (alpha > 0))
            low = (pos & (alpha > 0)) | (~pos & (alpha < C))
            v_up = np.where(up, v, -np.inf)
            v_low = np.where(low, v, np.inf)
            i = int(np.argmax(v_up))
            gap = v_up[i] - np.min(v_low)
            if gap <= gap_target:
                break
            # second-order partner choice: maximize the per-step dual gain
            # (v_i - v_j)^2 / eta to avoid first-order zigzag at large C
            row_i = gram[i] if gram is not None else X @ X[i]
            delta = v_up[i] - v_low
            eligible = low & (delta > 0.0)
            curvatures = np.maximum(sq_norms[i] + sq_norms - 2.0 * row_i,
                                    EPS_CURVATURE)
            gain = np.where(eligible, delta * delta / curvatures, -np.inf)
            j = int(np.argmax(gain))
            curvature = sq_norms[i] + sq_norms[j] - 2.0 * row_i[j]
            if curvature > EPS_CURVATURE:
                t = (v[i] - v[j]) / curvature
            else:
                t = np.inf  # degenerate direction: step to the nearest bound
            t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
            t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
            alpha[i] += t * y[i]
            alpha[j] -= t * y[j]
            row_j = gram[j] if gram is not None else X @ X[j]
            scores += t * (row_i - row_j)
            steps += 1
        objective = _dual_objective(alpha, (alpha * y) @ X)
        assert objective >= last_objective - 1e-9 * max(1.0, abs(objective)), (
            "dual objective decreased across a sweep"
        )
        last_objective = objective
        if gap <= gap_target:
            break

    np.clip(alpha, 0.0, C, out=alpha)
    w = (alpha * y) @ X  # recompute so stationarity holds exactly
    b = _recover_bias(X, y, alpha, w, C)
    plane = Hyperplane(w=w, b=b, class_id=int(class_id),
                       fit_info=FitInfo(steps, _dual_objective(alpha, w), False),
                       alpha=alpha)
    converged = svm_kkt_residual(plane, X, y, C) <= tol
    return Hyperplane(w=w, b=b, class_id=int(class_id),
                      fit_info=FitInfo(steps, _dual_objective(alpha, w), converged),
                      alpha=alpha)


def _recover_bias(X, y, alpha, w, C):
    """Average y_k - w.x_k over free support vectors; midpoint fallback without any."""
    margin = y - X @ w
    atol = 1e-9 * C
    free = (alpha > atol) & (alpha < C - atol)
    if np.any(free):
        return float(margin[free].mean())
    scores = X @ w
    pos_min = scores[y > 0].min()
    neg_max = scores[y < 0].max()
    return float(-(pos_min + neg_max) / 2.0)


def svm_kkt_residual(plane: Hyperplane, X, y, C) -> float:
    """Maximum violation of the dual KKT system at (w, b, alpha); 0 when exact.

    Checks the box constraints, the two stationarity conditions, and
    complementary slackness of every sample against its multiplier.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    alpha = plane.alpha
    if alpha is None or alpha.shape != y.shape:
        raise ShapeError("hyperplane carries no dual variables for this data")

    residual = 0.0
    residual = max(residual, float(np.max(-alpha, initial=0.0)))
    residual = max(residual, float(np.max(alpha - C, initial=0.0)))
    residual = max(residual, abs(float(alpha @ y)))
    residual = max(residual, float(np.max(np.abs(plane.w - (alpha * y) @ X))))

    functional = y * (X @ plane.w + plane.b)
    atol = 1e-9 * C
    at_zero = alpha <= atol
    at_cap = alpha >= C - atol
    free = ~at_zero & ~at_cap
    if np.any(at_zero):
        residual = max(residual, float(np.max(1.0 - functional[at_zero], initial=0.0)))
    if np.any(at_cap):
        residual = max(residual, float(np.max(functional[at_cap] - 1.0, initial=0.0)))
    if np.any(free):
        residual = max(residual, float(np.max(np.abs(1.0 - functional[free]))))
    return residual


def separates_sample(plane: Hyperplane, X) -> bool:
    """True iff the plane's decision changes sign somewhere over X.

    A soft-margin fit on a swamped, inseparable class can legitimately
    converge to a near-constant decision function (w ~ 0): such a plane
    divides nothing, has no margin to speak of, and its norm-scaled distances
    explode. Callers treat those fits as missing.
    """
    scores = plane.decision(X)
    return bool(scores.min() < 0.0 < scores.max())


def fit_one_vs_all(X, labels, C=1.0, tol=1e-4, max_iter=1000, min_pos=2) -> HyperplaneSet:
    """Fit one hyperplane per class (class j positive, all others negative).

    Classes with fewer than `min_pos` samples, and classes whose fit does not
    actually divide the sample (see `separates_sample`), are omitted and
    recorded in the set's `omitted_classes`. Per-class fits are independent
    and run in class order.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    class_ids = np.unique(labels)
    if class_ids.size < 2:
        raise InvalidArgumentError("one-vs-all fitting needs at least 2 classes")

    planes = {}
    omitted = []
    for j in class_ids:
        j = int(j)
        mask = labels == j
        if int(mask.sum()) < min_pos or int((~mask).sum()) < min_pos:
            omitted.append(j)
            continue
        y = np.where(mask, 1.0, -1.0)
        plane = fit_linear_svm(X, y, C=C, tol=tol, max_iter=max_iter, class_id=j)
        if not separates_sample(plane, X):
            omitted.append(j)
            continue
        planes[j] = plane
    return HyperplaneSet(planes=planes, embedding_dim=X.shape[1],
                         class_count=int(class_ids.max()) + 1,
                         omitted_classes=tuple(omitted))


def geometric_margin(plane: Hyperplane, X, y) -> float:
    """min_k y_k (w.x_k + b) / ||w||: positive iff every sample is correctly sided."""
    y = np.asarray(y, dtype=np.float64)
    return float(np.min(y * plane.signed_distance(X)))


def min_pairwise_margin(X, labels, C=1e6, tol=1e-8, max_iter=4000) -> float:
    """Smallest geometric margin over all class pairs, via near-hard-margin refits.

    Used as an independent yardstick for training dynamics; negative when some
    class pair is not linearly separable.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    class_ids = np.unique(labels)
    worst = np.inf
    for a_pos, a in enumerate(class_ids):
        for b in class_ids[a_pos + 1:]:
            mask = (labels == a) | (labels == b)
            y = np.where(labels[mask] == a, 1.0, -1.0)
            plane = fit_linear_svm(X[mask], y, C=C, tol=tol, max_iter=max_iter)
            worst = min(worst, geometric_margin(plane, X[mask], y))
    return worst
