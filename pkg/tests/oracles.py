"""Independent reference implementations used to cross-check the package.

Everything here is deliberately brute force: finite differences for
gradients, projected-gradient ascent for the SVM dual, exhaustive pair
counting for ranking metrics. None of it shares code with the paths it
verifies.
"""

import numpy as np


def central_diff_grad(value_fn, X, h=1e-6):
    """Central finite differences of a scalar function over every entry of X."""
    X = np.array(X, dtype=np.float64)
    grad = np.zeros_like(X)
    flat = X.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + h
        up = value_fn(X)
        flat[k] = original - h
        down = value_fn(X)
        flat[k] = original
        out[k] = (up - down) / (2.0 * h)
    return grad


def relative_grad_error(analytic, numeric, mask=None):
    """Max |a - n| scaled by the larger gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if mask is None:
        mask = np.ones(analytic.shape, dtype=bool)
    scale = max(np.max(np.abs(analytic[mask])), np.max(np.abs(numeric[mask])), 1e-12)
    return float(np.max(np.abs(analytic - numeric)[mask]) / scale)


def _project_box_hyperplane(alpha, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the shift."""
    lo = -(C + np.abs(alpha).max() + 1.0)
    hi = -lo
    # y @ clip(alpha - rho*y, 0, C) is non-increasing in rho; 120 halvings of
    # the bracket put rho far below any meaningful tolerance
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if y @ np.clip(alpha - mid * y, 0.0, C) > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(alpha - 0.5 * (lo + hi) * y, 0.0, C)


def pg_dual_svm(X, y, C, tol=1e-8, max_iter=200_000):
    """Projected-gradient ascent on the soft-margin SVM dual.

    Maximizes sum(a) - 0.5 ||X^T (a*y)||^2 over the box intersected with
    y.a = 0 until the projected fixed-point residual drops below tol.
    Returns (alpha, dual_objective). Accelerated with adaptive restart so the
    tiny acceptance instances converge quickly.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    G = X @ X.T
    Q = (y[:, None] * y[None, :]) * G
    L = float(np.max(np.linalg.eigvalsh(Q)))
    step = 1.0 / max(L, 1e-12)

    alpha = np.zeros(n)
    momentum = alpha.copy()
    t_prev = 1.0
    residual = np.inf
    for iteration in range(max_iter):
        grad = 1.0 - Q @ momentum
        candidate = _project_box_hyperplane(momentum + step * grad, y, C)
        if iteration % 10 == 0 or iteration == max_iter - 1:
            grad_at_alpha = 1.0 - Q @ alpha
            residual = float(np.max(np.abs(
                alpha - _project_box_hyperplane(alpha + step * grad_at_alpha, y, C))))
            if residual <= tol:
                break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev))
        direction = candidate - alpha
        if grad @ direction < 0.0:  # momentum points uphill of the dual: restart
            momentum = candidate
            t_next = 1.0
        else:
            momentum = candidate + (t_prev - 1.0) / t_next * direction
        alpha = candidate
        t_prev = t_next
    w = (alpha * y) @ X
    objective = float(alpha.sum() - 0.5 * (w @ w))
    return alpha, objective, residual


def brute_force_auc(pos, neg):
    correct = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                correct += 1.0
            elif p == q:
                correct += 0.5
    return correct / (len(pos) * len(neg))


def brute_force_class_means(X, labels):
    means = {}
    for j in sorted(set(int(v) for v in labels)):
        rows = [x for x, lab in zip(X, labels) if lab == j]
        means[j] = sum(rows) / len(rows)
    return means
