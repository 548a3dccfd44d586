"""Fully-connected pairwise CRF over the binary attribute decisions.

The joint model is P(x) proportional to exp(-E(x)) with
    E(x) = - sum_i unary_i(x_i) - sum_{i<j} theta_ij(x_i, x_j),
unaries coming from calibrated per-attribute probabilities and pairwise
tables fitted as smoothed pointwise mutual information of label
co-occurrence. Exact enumeration serves as the small-instance oracle;
decoding at full size uses iterated conditional modes (MAP) or damped loopy
belief propagation (marginals).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InferenceError

PROB_CLAMP = 1e-6
EXACT_LIMIT = 20
DEFAULT_DAMPING = 0.5
DEFAULT_LBP_ITERS = 200
DEFAULT_LBP_TOL = 1e-5


@dataclass(frozen=True)
class PairwisePotentials:
    """Log-potential tables for every unordered node pair.

    theta has shape (n, n, 2, 2) with theta[i, j, a, b] = theta[j, i, b, a]
    and zero diagonal, so either orientation of a pair reads the same table.
    """

    theta: np.ndarray
    smoothing_alpha: float

    def __post_init__(self) -> None:
        t = self.theta
        if t.ndim != 4 or t.shape[0] != t.shape[1] or t.shape[2:] != (2, 2):
            raise InferenceError("theta must have shape (n, n, 2, 2)")
        if t.shape[0] < 1:
            raise InferenceError("pairwise potentials need at least one node")
        if not np.all(np.isfinite(t)):
            raise InferenceError("theta must be finite")
        if not np.allclose(t, np.transpose(t, (1, 0, 3, 2))):
            raise InferenceError("theta must satisfy theta[i,j,a,b] == theta[j,i,b,a]")
        if self.smoothing_alpha <= 0:
            raise InferenceError("smoothing alpha must be positive")

    @property
    def n(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class CRFInstance:
    unary: np.ndarray  # (n, 2) log-potentials
    pairwise: PairwisePotentials
    pairwise_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.unary.ndim != 2 or self.unary.shape[1] != 2:
            raise InferenceError("unary must have shape (n, 2)")
        if self.unary.shape[0] != self.pairwise.n:
            raise InferenceError("unary size does not match pairwise node count")
        if not np.all(np.isfinite(self.unary)):
            raise InferenceError("unary log-potentials must be finite")

    @property
    def n(self) -> int:
        return self.unary.shape[0]

    def scaled_theta(self) -> np.ndarray:
        return self.pairwise_scale * self.pairwise.theta


@dataclass(frozen=True)
class InferenceResult:
    map_assignment: np.ndarray  # (n,) of {0,1}
    marginals: np.ndarray       # (n,) P(x_i = 1)
    converged: bool
    iterations: int


def fit_pairwise(labels: np.ndarray, alpha: float) -> PairwisePotentials:
    """Smoothed-PMI tables from an (images, n) binary label matrix.

    theta_ij(a,b) = log[ (N_ij(a,b)+alpha) / ((N_i(a)+2a)(N_j(b)+2a)/(N+4a)) ];
    exactly factorized counts give theta -> 0 as alpha -> 0.
    """
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise InferenceError("labels must be a 2-d matrix")
    n_images, n = lab.shape
    if n < 2:
        raise InferenceError("need at least two attributes")
    if n_images < 1:
        raise InferenceError("need at least one labeled image")
    if not np.all((lab == 0) | (lab == 1)):
        raise InferenceError("labels must be 0/1")
    if alpha <= 0:
        raise InferenceError("smoothing alpha must be positive")

    pos = lab.astype(float)
    neg = 1.0 - pos
    counts = np.empty((n, n, 2, 2))
    counts[:, :, 0, 0] = neg.T @ neg
    counts[:, :, 0, 1] = neg.T @ pos
    counts[:, :, 1, 0] = pos.T @ neg
    counts[:, :, 1, 1] = pos.T @ pos
    singles = np.stack([neg.sum(axis=0), pos.sum(axis=0)], axis=1)  # (n, 2)

    expected = (
        (singles[:, None, :, None] + 2 * alpha)
        * (singles[None, :, None, :] + 2 * alpha)
        / (n_images + 4 * alpha)
    )
    theta = np.log(counts + alpha) - np.log(expected)
    idx = np.arange(n)
    theta[idx, idx] = 0.0
    return PairwisePotentials(theta=theta, smoothing_alpha=float(alpha))


def energy(inst: CRFInstance, assignment: np.ndarray) -> float:
    """E(x); lower is more probable."""
    x = np.asarray(assignment, dtype=int)
    if x.shape != (inst.n,):
        raise InferenceError(f"assignment length {x.shape} does not match n={inst.n}")
    if not np.all((x == 0) | (x == 1)):
        raise InferenceError("assignment must be binary")
    idx = np.arange(inst.n)
    value = -float(inst.unary[idx, x].sum())
    theta = inst.scaled_theta()
    pair = theta[idx[:, None], idx[None, :], x[:, None], x[None, :]]
    value -= float(np.triu(pair, k=1).sum())
    return value


def _all_assignments(n: int) -> np.ndarray:
    """All 2^n binary rows in lexicographic order (x_0 most significant)."""
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return bits.astype(np.int8)


def _energies_all(inst: CRFInstance, assignments: np.ndarray) -> np.ndarray:
    n = inst.n
    a = assignments.astype(int)
    unary = inst.unary[np.arange(n)[None, :], a].sum(axis=1)
    theta = inst.scaled_theta()
    pair = np.zeros(a.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            pair += theta[i, j, a[:, i], a[:, j]]
    return -(unary + pair)


def infer_exact(inst: CRFInstance) -> InferenceResult:
    """Exact marginals and MAP by full enumeration; guarded to n <= 20.

    MAP ties break toward the lexicographically smallest assignment.
    """
    if inst.n > EXACT_LIMIT:
        raise InferenceError(f"exact inference limited to n <= {EXACT_LIMIT}, got {inst.n}")
    assignments = _all_assignments(inst.n)
    energies = _energies_all(inst, assignments)
    best = int(np.argmin(energies))  # argmin returns the first = lex-smallest
    log_weights = -energies
    log_weights -= log_weights.max()
    weights = np.exp(log_weights)
    weights /= weights.sum()
    marginals = weights @ assignments
    return InferenceResult(
        map_assignment=assignments[best].astype(int),
        marginals=marginals,
        converged=True,
        iterations=1,
    )


def infer_map_icm(inst: CRFInstance, init: np.ndarray) -> InferenceResult:
    """Iterated conditional modes from init, flipping nodes in fixed order
    until a full pass changes nothing. Never increases the energy."""
    x = np.asarray(init, dtype=int).copy()
    if x.shape != (inst.n,):
        raise InferenceError("init length does not match instance")
    if not np.all((x == 0) | (x == 1)):
        raise InferenceError("init must be binary")
    theta = inst.scaled_theta()
    passes = 0
    changed = True
    while changed:
        changed = False
        passes += 1
        for i in range(inst.n):
            others = np.delete(np.arange(inst.n), i)
            field0 = inst.unary[i, 0] + theta[i, others, 0, x[others]].sum()
            field1 = inst.unary[i, 1] + theta[i, others, 1, x[others]].sum()
            best = 1 if field1 > field0 else 0  # tie keeps 0
            if best != x[i]:
                x[i] = best
                changed = True
    return InferenceResult(
        map_assignment=x,
        marginals=x.astype(float),
        converged=True,
        iterations=passes,
    )


def infer_marginals_lbp(
    inst: CRFInstance,
    max_iters: int = DEFAULT_LBP_ITERS,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_LBP_TOL,
) -> InferenceResult:
    """Sum-product on the complete graph with synchronous, damped updates.

    Messages are kept normalized; the damped update is the convex combination
    (1 - damping) * new + damping * old in probability space. Non-convergence
    is reported through the converged flag, never raised.
    """
    if not 0.0 <= damping < 1.0:
        raise InferenceError("damping must be in [0, 1)")
    if max_iters < 1:
        raise InferenceError("max_iters must be at least 1")
    n = inst.n
    theta = inst.scaled_theta()
    messages = np.full((n, n, 2), 0.5)  # [i, j]: message i -> j, normalized
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        # max-normalized logs keep uniform messages at exactly zero, so a
        # graph with zero pairwise reduces to the unary softmax bit-for-bit
        log_hat = np.log(messages / messages.max(axis=2, keepdims=True))
        # S[i, a] = unary_i(a) + sum_k log m_{k->i}(a)
        s = inst.unary + log_hat.sum(axis=0)
        # pre[i, j, a] = S[i, a] - log m_{j->i}(a)
        pre = s[:, None, :] - np.transpose(log_hat, (1, 0, 2))
        # new log message i->j over x_j: logsumexp over x_i of pre + theta
        stacked = pre[:, :, :, None] + theta  # (i, j, x_i, x_j)
        peak = stacked.max(axis=2, keepdims=True)
        new_log = np.squeeze(peak, axis=2) + np.log(
            np.exp(stacked - peak).sum(axis=2)
        )
        new_log -= new_log.max(axis=2, keepdims=True)
        new_prob = np.exp(new_log)
        new_prob /= new_prob.sum(axis=2, keepdims=True)
        mixed = (1.0 - damping) * new_prob + damping * messages
        mixed /= mixed.sum(axis=2, keepdims=True)
        idx = np.arange(n)
        mixed[idx, idx] = 0.5  # self messages stay inert
        delta = float(np.abs(mixed - messages).max())
        messages = mixed
        if delta < tol:
            converged = True
            break

    log_hat = np.log(messages / messages.max(axis=2, keepdims=True))
    beliefs = inst.unary + log_hat.sum(axis=0)
    beliefs -= beliefs.max(axis=1, keepdims=True)
    beliefs = np.exp(beliefs)
    beliefs /= beliefs.sum(axis=1, keepdims=True)
    marginals = beliefs[:, 1]
    return InferenceResult(
        map_assignment=(marginals > 0.5).astype(int),
        marginals=marginals,
        converged=converged,
        iterations=iterations,
    )


def decode(
    probs: np.ndarray,
    pots: PairwisePotentials,
    mode: str = "map",
    pairwise_scale: float = 1.0,
    max_iters: int = DEFAULT_LBP_ITERS,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_LBP_TOL,
) -> np.ndarray:
    """Joint decisions from calibrated probabilities and fitted potentials.

    mode "map" runs ICM initialized at the per-node argmax; mode
    "marginal_threshold" thresholds LBP marginals at 0.5. With all-zero
    potentials both reduce exactly to independent thresholding.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (pots.n,):
        raise InferenceError(f"expected {pots.n} probabilities, got {p.shape}")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    unary = np.stack([np.log(1.0 - p), np.log(p)], axis=1)
    inst = CRFInstance(unary=unary, pairwise=pots, pairwise_scale=pairwise_scale)
    if mode == "map":
        init = (p > 0.5).astype(int)
        return infer_map_icm(inst, init).map_assignment
    if mode == "marginal_threshold":
        result = infer_marginals_lbp(inst, max_iters=max_iters, damping=damping, tol=tol)
        return (result.marginals > 0.5).astype(int)
    raise InferenceError(f"unknown decode mode {mode!r}")


def write_potentials(path: str, pots: PairwisePotentials, attribute_ids: list[str]) -> None:
    """Versioned potentials file; pair tables stored in canonical i<j order."""
    n = pots.n
    if len(attribute_ids) != n:
        raise InferenceError("attribute id list does not match node count")
    pairs = [
        {"i": i, "j": j, "table": [[float(v) for v in row] for row in pots.theta[i, j]]}
        for i in range(n)
        for j in range(i + 1, n)
    ]
    doc = {
        "format": "trendscope.potentials",
        "version": 1,
        "n": n,
        "alpha": pots.smoothing_alpha,
        "attribute_ids": list(attribute_ids),
        "pairs": pairs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_potentials(path: str) -> tuple[PairwisePotentials, list[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InferenceError(f"cannot read potentials {path}: {exc}") from exc
    if doc.get("format") != "trendscope.potentials" or doc.get("version") != 1:
        raise InferenceError(f"{path} is not a trendscope potentials file (v1)")
    n = doc["n"]
    theta = np.zeros((n, n, 2, 2))
    for pair in doc["pairs"]:
        i, j = pair["i"], pair["j"]
        table = np.array(pair["table"], dtype=float)
        theta[i, j] = table
        theta[j, i] = table.T
    pots = PairwisePotentials(theta=theta, smoothing_alpha=float(doc["alpha"]))
    return pots, list(doc["attribute_ids"])
