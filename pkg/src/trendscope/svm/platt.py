"""Sigmoid calibration of SVM margins to probabilities.

Fits p(y=1 | m) = 1 / (1 + exp(A*m + B)) by Newton iterations on the
negative log-likelihood with the usual smoothed targets, so perfectly
separable margins still yield a finite optimum. A is negative whenever
margins are positively aligned with the labels.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError

MAX_NEWTON_ITERS = 200
GRAD_TOL = 1e-10


def _nll(z: np.ndarray, targets: np.ndarray) -> float:
    # -[t log p + (1-t) log(1-p)] with p = 1/(1+e^z), written stably
    return float(np.sum((targets - 1.0) * z + np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z)))))


def _sigmoid_neg(z: np.ndarray) -> np.ndarray:
    # 1/(1+e^z) without evaluating e^z for large z
    t = np.exp(-np.abs(z))
    return np.where(z >= 0, t / (1.0 + t), 1.0 / (1.0 + t))


def platt_fit(margins: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit (A, B) on decision margins and +-1 labels."""
    m = np.asarray(margins, dtype=float)
    y = np.asarray(labels, dtype=float)
    if m.shape != y.shape or m.ndim != 1:
        raise ModelError("margins and labels must be 1-d arrays of equal length")
    if not np.all((y == 1) | (y == -1)):
        raise ModelError("labels must be +1/-1")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise ModelError("calibration needs both classes")
    if np.ptp(m) == 0:
        raise ModelError("margins are constant; nothing to calibrate")

    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y == 1, hi, lo)

    a, b = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    z = a * m + b
    value = _nll(z, t)
    for _ in range(MAX_NEWTON_ITERS):
        p = _sigmoid_neg(z)
        residual = t - p
        g = np.array([residual @ m, residual.sum()])
        if np.max(np.abs(g)) < GRAD_TOL:
            break
        w = p * (1.0 - p)
        h = np.array([[w @ (m * m), w @ m], [w @ m, w.sum()]])
        h[0, 0] += 1e-12
        h[1, 1] += 1e-12
        step = np.linalg.solve(h, g)
        # backtracking keeps the NLL non-increasing
        scale = 1.0
        for _ in range(40):
            a_new, b_new = a - scale * step[0], b - scale * step[1]
            z_new = a_new * m + b_new
            value_new = _nll(z_new, t)
            if value_new <= value + 1e-12:
                break
            scale *= 0.5
        else:
            break
        if abs(value_new - value) < 1e-13 and np.max(np.abs(step)) * scale < 1e-12:
            a, b, z, value = a_new, b_new, z_new, value_new
            break
        a, b, z, value = a_new, b_new, z_new, value_new
    return float(a), float(b)


def platt_prob(margin: float | np.ndarray, a: float, b: float) -> float | np.ndarray:
    """Calibrated probability for a margin; strictly inside (0, 1)."""
    z = a * np.asarray(margin, dtype=float) + b
    p = _sigmoid_neg(z)
    if np.ndim(margin) == 0:
        return float(p)
    return p
