"""Comparison methods: regularized spectral clustering, SCORE and the
identity-penalty SDP. All return a ``ClusteringResult``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .rounding import ClusteringResult, KMeansConfig, kmeans_rows
from .sdp import SolverConfig, Variant, assemble_objective, solve


class Method(str, Enum):
    DSTAR = "dstar"
    CAILI = "caili"
    SPECTRAL = "spectral"
    SCORE = "score"


@dataclass(frozen=True)
class BaselineSpec:
    method: Method
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for key in ("regularizer", "ratio_cap"):
            v = self.config.get(key)
            if v is not None and not v > 0:
                raise ValueError(f"{key} must be positive")
        for key in ("alpha", "lam"):
            v = self.config.get(key)
            if v is not None and v < 0:
                raise ValueError(f"{key} must be nonnegative")


def _top_eigvecs(M: np.ndarray, r: int, by_magnitude: bool = False) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eigh(M)
    order = np.argsort(np.abs(w) if by_magnitude else w, kind="stable")[::-1][:r]
    return w[order], V[:, order]


def spectral_cluster(A: np.ndarray, r: int, regularizer: Optional[float] = None,
                     kmeans: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    """Top-``r`` eigenvectors of ``D_t^{-1/2} A D_t^{-1/2}`` with ``D_t = D + t I``,
    rows scaled to unit length, then k-means."""
    if r < 1:
        raise ValueError("r must be >= 1")
    A = np.asarray(A, dtype=float)
    d = A.sum(axis=1)
    t = float(d.mean()) if regularizer is None else float(regularizer)
    s = 1.0 / np.sqrt(d + t) if t > 0 else np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), 0.0)
    L = s[:, None] * A * s[None, :]
    _, V = _top_eigvecs(L, r)
    norms = np.linalg.norm(V, axis=1)
    rows = np.divide(V, norms[:, None], out=np.zeros_like(V), where=norms[:, None] > 0)
    res = kmeans_rows(rows, r, kmeans)
    return ClusteringResult(res.labels, res.centers, res.inertia, {"regularizer": t})


def score_ratios(A: np.ndarray, r: int, ratio_cap: Optional[float] = None) -> tuple[np.ndarray, int]:
    """Entrywise ratios of eigenvectors 2..r to the leading one, clamped.

    Returns ``(R, n_zero)`` where ``n_zero`` counts rows whose leading
    entry vanished (their ratios are set to 0).
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    cap = math.log(N) if ratio_cap is None else float(ratio_cap)
    _, V = _top_eigvecs(A, r, by_magnitude=True)
    lead = V[:, 0]
    if lead.sum() < 0:
        lead = -lead
    zero = np.abs(lead) <= 1e-12 * max(1.0, np.abs(lead).max())
    R = np.zeros((N, r - 1))
    ok = ~zero
    R[ok] = V[ok, 1:] / lead[ok, None]
    return np.clip(R, -cap, cap), int(zero.sum())


def score_cluster(A: np.ndarray, r: int, ratio_cap: Optional[float] = None,
                  kmeans: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    if r < 2:
        raise ValueError("SCORE needs r >= 2")
    R, n_zero = score_ratios(A, r, ratio_cap)
    res = kmeans_rows(R, r, kmeans)
    notes = {"zero_leading_entries": n_zero} if n_zero else {}
    return ClusteringResult(res.labels, res.centers, res.inertia, notes)


def caili_cluster(A: np.ndarray, r: int, alpha: float, lam: float,
                  solver: SolverConfig = SolverConfig(),
                  kmeans: KMeansConfig = KMeansConfig()) -> ClusteringResult:
    E = assemble_objective(A, None, None, lam, alpha, Variant.IDENTITY)
    sol = solve(E, solver)
    res = kmeans_rows(sol.X_hat, r, kmeans)
    return ClusteringResult(res.labels, res.centers, res.inertia, {"solve": sol.diagnostics()})


def caili_parameters(lam: float, alpha: float, H_plus: float, H_minus: float) -> tuple[float, float]:
    """Identity-penalty parameters matched to degree-penalty ``(lam, alpha)``.

    On a graph whose degrees all equal ``H``, ``alpha diag(d*) + lam d d^T``
    becomes ``alpha H I + lam H^2 J``; the match uses ``H+`` for the
    diagonal and ``H+ H-`` for the rank-one term.
    """
    return lam * H_plus * H_minus, alpha * H_plus
