"""Sequential minimal optimization for the kernel SVM dual.

Solves
    max_a  sum(a) - 1/2 a' Q a,   Q_ij = y_i y_j K_ij
    s.t.   0 <= a_i <= C_i,  sum(y_i a_i) = 0
by repeatedly optimizing the pair of coordinates with maximal KKT violation,
stopping when the violation gap falls below tol.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError

DEFAULT_TOL = 1e-3
CURVATURE_FLOOR = 1e-12
PSD_TOL = 1e-8


def train_smo(
    gram: np.ndarray,
    labels: np.ndarray,
    c_param: float | np.ndarray,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, float]:
    """Solve the dual and return (dual_coefs, bias).

    dual_coefs[i] = a_i * y_i, so the decision function is
    f(x) = sum_i dual_coefs[i] K(x_i, x) + bias. c_param may be a scalar or
    a per-example array (used for class-balanced penalties).
    """
    y = np.asarray(labels, dtype=float)
    n = y.shape[0]
    if gram.shape != (n, n):
        raise ModelError(f"gram shape {gram.shape} does not match {n} labels")
    if not (np.all((y == 1) | (y == -1))):
        raise ModelError("labels must be +1/-1")
    if np.all(y == 1) or np.all(y == -1):
        raise ModelError("training set must contain both classes")
    c = np.broadcast_to(np.asarray(c_param, dtype=float), (n,)).copy()
    if np.any(c <= 0):
        raise ModelError("C must be positive")

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the (minimized) 1/2 a'Qa - sum(a)
    neg_yg = -y * grad  # selection scores

    max_iters = max(20_000, 500 * n)
    for _ in range(max_iters):
        up = ((y == 1) & (alpha < c)) | ((y == -1) & (alpha > 0))
        low = ((y == -1) & (alpha < c)) | ((y == 1) & (alpha > 0))
        if not up.any() or not low.any():
            break
        neg_yg = -y * grad
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        j = int(np.argmin(np.where(low, neg_yg, np.inf)))
        gap = neg_yg[i] - neg_yg[j]
        if gap < tol:
            break

        a = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        if a < -PSD_TOL:
            raise ModelError("kernel matrix is not positive semi-definite")
        a = max(a, CURVATURE_FLOOR)
        step = gap / a
        # keep 0 <= alpha <= C along the direction (y_i e_i - y_j e_j)
        cap_i = c[i] - alpha[i] if y[i] == 1 else alpha[i]
        cap_j = alpha[j] if y[j] == 1 else c[j] - alpha[j]
        step = min(step, cap_i, cap_j)
        if step <= 0:
            break
        # clip to the box so bound coordinates land on it exactly
        alpha[i] = min(max(alpha[i] + y[i] * step, 0.0), c[i])
        alpha[j] = min(max(alpha[j] - y[j] * step, 0.0), c[j])
        grad += step * y * (gram[:, i] - gram[:, j])
    else:
        raise ModelError("SMO did not converge within the iteration limit")

    # bias from the KKT conditions: free vectors pin it, otherwise take the
    # midpoint of the feasible interval
    neg_yg = -y * grad
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        bias = float(neg_yg[free].mean())
    else:
        up = ((y == 1) & (alpha < c)) | ((y == -1) & (alpha > 0))
        low = ((y == -1) & (alpha < c)) | ((y == 1) & (alpha > 0))
        hi = neg_yg[up].max() if up.any() else 0.0
        lo = neg_yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha * y, bias


def dual_objective(gram: np.ndarray, labels: np.ndarray, dual_coefs: np.ndarray) -> float:
    """Value of the maximized dual at a solution (for oracle comparisons)."""
    y = np.asarray(labels, dtype=float)
    alpha = dual_coefs * y
    return float(alpha.sum() - 0.5 * dual_coefs @ gram @ dual_coefs)
