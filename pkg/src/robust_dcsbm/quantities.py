"""Degree, aggregate and tuning quantities of the penalized SDP.

Oracle quantities (``aggregates``, ``theorem_feasibility``) need the
model's theta and B; the plug-in path (``estimate_H_plus`` and the
``heuristic`` tuning strategy) only looks at the adjacency matrix.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .model import ModelParams, block_slices

DEFAULT_C0 = 1.0
DEFAULT_C1 = 4.0


def degrees(A: np.ndarray) -> np.ndarray:
    return np.asarray(A, dtype=np.int64).sum(axis=1)


@dataclass(frozen=True)
class ClusterAggregates:
    G: np.ndarray
    H: np.ndarray
    H_plus: float
    H_minus: float
    G_min: float
    theta_bar: float
    theta_min: float
    theta_max: float
    f: np.ndarray
    l_min: int
    p_plus: float
    p_minus: float
    q_plus: float
    q_minus: float


def _offdiag_extremes(B: np.ndarray) -> tuple[float, float]:
    r = B.shape[0]
    if r < 2:
        return 0.0, math.inf
    iu = np.triu_indices(r, 1)
    return float(B[iu].max()), float(B[iu].min())


def aggregates(params: ModelParams, theta: np.ndarray) -> ClusterAggregates:
    theta = np.asarray(theta, dtype=float)
    B = params.B
    G = np.array([theta[s].sum() for s in block_slices(params.cluster_sizes)])
    H = B @ G
    labels = params.sorted_labels()[: params.n]
    q_plus, q_minus = _offdiag_extremes(B)
    diag = np.diag(B)
    return ClusterAggregates(
        G=G,
        H=H,
        H_plus=float(H.max()),
        H_minus=float(H.min()),
        G_min=float(G.min()),
        theta_bar=float(theta.mean()),
        theta_min=float(theta.min()),
        theta_max=float(theta.max()),
        f=theta * H[labels],
        l_min=min(params.cluster_sizes),
        p_plus=float(diag.max()),
        p_minus=float(diag.min()),
        q_plus=q_plus,
        q_minus=q_minus,
    )


def penalty_vector(d: np.ndarray, H_plus: float) -> np.ndarray:
    """Elementwise ``max(d_i, H_plus)``."""
    if not H_plus > 0:
        raise ValueError(f"H_plus must be positive, got {H_plus}")
    return np.maximum(np.asarray(d, dtype=float), float(H_plus))


def estimate_H_plus(A: np.ndarray, r: int = 1, trim: int = 0) -> float:
    """Mean degree after dropping the ``trim`` largest degrees.

    ``r`` is accepted for interface symmetry with the oracle path; the
    trimmed mean does not depend on it.
    """
    d = np.sort(degrees(A)) if np.ndim(A) == 2 else np.sort(np.asarray(A))
    if trim < 0 or trim >= d.size:
        raise ValueError(f"trim must lie in [0, {d.size - 1}]")
    kept = d[: d.size - trim]
    return float(kept.mean())


@dataclass(frozen=True)
class TheoremReport:
    delta: float
    c0: float
    c1: float
    alpha: float
    delta_terms: tuple[float, ...]
    delta_rhs: float
    lambda_lo: float
    lambda_hi: float
    alpha_min: float
    q_minus_ok: bool
    delta_ok: bool
    alpha_ok: bool
    window_ok: bool
    feasible: bool
    m: int
    H_plus: float
    H_minus: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta_terms"] = list(self.delta_terms)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def lambda_window(params: ModelParams, agg: ClusterAggregates, delta: float) -> tuple[float, float]:
    B, H = params.B, agg.H
    r = params.r
    lo = 0.0
    for a in range(r):
        for b in range(a + 1, r):
            lo = max(lo, (B[a, b] + delta) / (H[a] * H[b]))
    hi = min((B[a, a] - delta) / H[a] ** 2 for a in range(r))
    return float(lo), float(hi)


def default_delta(params: ModelParams) -> float:
    """A quarter of the density gap ``p- - q+``; keeps the lambda window open."""
    diag = np.diag(params.B)
    q_plus, _ = _offdiag_extremes(params.B)
    return float(diag.min() - q_plus) / 4.0


def theorem_feasibility(
    params: ModelParams,
    theta: np.ndarray,
    delta: float,
    c0: float = DEFAULT_C0,
    c1: float = DEFAULT_C1,
    alpha: Optional[float] = None,
) -> TheoremReport:
    """Evaluate the exact-recovery conditions for a given gap ``delta``.

    ``alpha`` defaults to the floor ``c1 * m / H-``. Summands that carry a
    factor ``m`` are taken as zero when ``m == 0``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    agg = aggregates(params, theta)
    n, m, r = params.n, params.m, params.r
    logn = math.log(n) if n > 1 else 0.0
    p_plus, tmin, tmax, Gmin = agg.p_plus, agg.theta_min, agg.theta_max, agg.G_min
    alpha_min = c1 * m / agg.H_minus
    if alpha is None:
        alpha = alpha_min
    terms = (
        math.sqrt(p_plus * logn / (tmin * Gmin)),
        alpha * n * agg.theta_bar * p_plus / Gmin,
        tmax * math.sqrt(p_plus * n * logn) / (Gmin * tmin),
        logn / (Gmin * tmin),
        m * math.sqrt(r) / (tmin * Gmin),
        (m / (alpha * tmin * Gmin)) if m > 0 else 0.0,
    )
    rhs = c0 * sum(terms)
    lo, hi = lambda_window(params, agg, delta)
    q_ok = bool(agg.q_minus >= m / agg.l_min)
    delta_ok = bool(delta >= rhs)
    alpha_ok = bool(alpha >= alpha_min)
    window_ok = bool(lo < hi)
    return TheoremReport(
        delta=float(delta), c0=float(c0), c1=float(c1), alpha=float(alpha),
        delta_terms=tuple(float(t) for t in terms), delta_rhs=float(rhs),
        lambda_lo=lo, lambda_hi=hi, alpha_min=float(alpha_min),
        q_minus_ok=q_ok, delta_ok=delta_ok, alpha_ok=alpha_ok, window_ok=window_ok,
        feasible=q_ok and delta_ok and alpha_ok and window_ok,
        m=m, H_plus=agg.H_plus, H_minus=agg.H_minus,
    )


def choose_tuning(
    report: Optional[TheoremReport],
    strategy: str = "midpoint",
    A: Optional[np.ndarray] = None,
    m_hat: Optional[int] = None,
    c1: float = DEFAULT_C1,
) -> tuple[float, float]:
    """Pick ``(lambda, alpha)``.

    ``midpoint``: geometric mean of the lambda window, alpha at its floor.
    ``heuristic``: ``lambda = 1 / sum(d)`` and ``alpha = c1 * m_hat / H+_hat``
    where ``H+_hat`` is the degree mean with the ``m_hat`` largest removed.
    ``auto``: midpoint when the window is open, heuristic otherwise.
    """
    if strategy == "auto":
        usable = report is not None and report.window_ok and report.lambda_lo > 0
        strategy = "midpoint" if usable else "heuristic"
    if strategy == "midpoint":
        if report is None or not report.window_ok:
            raise ValueError("midpoint tuning needs a non-empty lambda window")
        lo, hi = report.lambda_lo, report.lambda_hi
        lam = math.sqrt(lo * hi) if lo > 0 else hi / 2.0
        return lam, report.alpha_min
    if strategy == "heuristic":
        if A is None:
            raise ValueError("heuristic tuning needs the adjacency matrix")
        d = degrees(A)
        total = d.sum()
        if total == 0:
            raise ValueError("heuristic tuning undefined on an empty graph")
        if m_hat is None:
            m_hat = report.m if report is not None else 0
        if m_hat == 0:
            return 1.0 / total, 0.0
        return 1.0 / total, c1 * m_hat / estimate_H_plus(A, trim=m_hat)
    raise ValueError(f"unknown tuning strategy {strategy!r}")
