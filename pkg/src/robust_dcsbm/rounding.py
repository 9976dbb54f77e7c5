"""Row k-means rounding of an SDP solution and inlier misclassification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import OUTLIER, GroundTruth


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    notes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 50
    max_iter: int = 300
    tol: float = 1e-9
    seed: int = 0


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    N = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    centers = [int(rng.integers(N))]
    d2 = np.maximum(sq - 2 * X @ X[centers[0]] + sq[centers[0]], 0.0)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point coincides with a chosen center: lowest unused index
            unused = np.setdiff1d(np.arange(N), centers)
            nxt = int(unused[0]) if unused.size else 0
        else:
            u = rng.random() * total
            # searchsorted on the cumulative sum picks the lowest index on ties
            nxt = int(np.searchsorted(np.cumsum(d2), u, side="right"))
            nxt = min(nxt, N - 1)
        centers.append(nxt)
        d2 = np.minimum(d2, np.maximum(sq - 2 * X @ X[nxt] + sq[nxt], 0.0))
    return X[centers].copy()


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    sq = np.einsum("ij,ij->i", X, X)
    k = C.shape[0]
    labels = np.zeros(X.shape[0], dtype=int)
    for _ in range(max_iter):
        D = sq[:, None] - 2 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :]
        labels = np.argmin(D, axis=1)
        newC = C.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                newC[j] = X[members].mean(axis=0)
        shift = float(np.sum((newC - C) ** 2))
        C = newC
        if shift <= tol:
            break
    D = sq[:, None] - 2 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :]
    labels = np.argmin(D, axis=1)
    inertia = float(np.maximum(D[np.arange(X.shape[0]), labels], 0.0).sum())
    return labels, C, inertia


def kmeans_rows(X_hat: np.ndarray, r: int, cfg: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding on the rows of ``X_hat``."""
    X = np.asarray(X_hat, dtype=float)
    N = X.shape[0]
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > N:
        raise ValueError(f"cannot form r={r} clusters from {N} rows")
    best = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        C0 = _kmeanspp(X, r, rng)
        labels, C, inertia = _lloyd(X, C0, cfg.max_iter, cfg.tol)
        # strict < keeps the lowest restart on ties
        if best is None or inertia < best[2]:
            best = (labels, C, inertia)
        if r == 1:
            break
    labels, C, inertia = best
    return ClusteringResult(labels=labels, centers=C, inertia=inertia)


def assignment_hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching; ``perm[i]`` is the column matched to row ``i``."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=int)
    perm[rows] = cols
    return perm


def assignment_bruteforce(cost: np.ndarray) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    k = cost.shape[0]
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(k)):
        c = cost[np.arange(k), perm].sum()
        if c < best:
            best, best_perm = c, perm
    return np.array(best_perm, dtype=int)


@dataclass(frozen=True)
class MisclassificationReport:
    rate: float
    best_permutation: dict
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "best_permutation": {str(k): int(v) for k, v in self.best_permutation.items()},
            "confusion": self.confusion.tolist(),
        }


def misclassification(pred: np.ndarray, truth: GroundTruth | np.ndarray, r: Optional[int] = None,
                      cross_check: bool = True) -> MisclassificationReport:
    """Fraction of inliers outside the best predicted->true label matching."""
    if isinstance(truth, GroundTruth):
        true_labels, r = truth.labels, truth.r
    else:
        true_labels = np.asarray(truth, dtype=int)
        if r is None:
            r = int(true_labels.max()) + 1
    pred = np.asarray(pred, dtype=int)
    if pred.shape != true_labels.shape:
        raise ValueError(f"{pred.size} predicted labels for {true_labels.size} nodes")
    inl = true_labels != OUTLIER
    p, t = pred[inl], true_labels[inl]
    k = max(r, int(p.max()) + 1 if p.size else r)
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (p, t), 1)
    perm = assignment_hungarian(-confusion)
    if cross_check and k <= 6:
        alt = assignment_bruteforce(-confusion)
        if confusion[np.arange(k), alt].sum() != confusion[np.arange(k), perm].sum():
            raise AssertionError("Hungarian and brute-force matchings disagree")
    matched = confusion[np.arange(k), perm].sum()
    n = int(inl.sum())
    rate = 1.0 - matched / n if n else 0.0
    return MisclassificationReport(
        rate=float(rate),
        best_permutation={int(i): int(perm[i]) for i in range(k)},
        confusion=confusion,
    )
