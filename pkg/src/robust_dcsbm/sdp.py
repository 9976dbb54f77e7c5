"""Objective assembly and an ADMM solver for

    min <E, X>  s.t.  X PSD,  0 <= X <= J.

The splitting keeps a PSD copy ``X`` and a box copy ``Z`` with the
consensus constraint ``X = Z``. One dense eigendecomposition per
iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class Variant(str, Enum):
    DSTAR = "dstar"          # alpha diag(d*) + lambda d d^T - A
    IDENTITY = "identity"    # alpha I + lambda J - A
    NOPENALTY = "nopenalty"  # lambda d d^T - A


@dataclass(frozen=True)
class ObjectiveMatrix:
    E: np.ndarray
    variant: Variant
    lam: float
    alpha: float


def assemble_objective(
    A: np.ndarray,
    d: Optional[np.ndarray],
    d_star: Optional[np.ndarray],
    lam: float,
    alpha: float,
    variant: Variant | str = Variant.DSTAR,
) -> ObjectiveMatrix:
    variant = Variant(variant)
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    if A.shape != (N, N):
        raise ValueError("A must be square")
    if lam < 0 or alpha < 0:
        raise ValueError("lambda and alpha must be nonnegative")
    if variant is Variant.IDENTITY:
        E = alpha * np.eye(N) + lam * np.ones((N, N)) - A
    else:
        d = np.asarray(d, dtype=float)
        if d.shape != (N,):
            raise ValueError(f"degree vector has shape {d.shape}, expected ({N},)")
        E = lam * np.outer(d, d) - A
        if variant is Variant.DSTAR:
            d_star = np.asarray(d_star, dtype=float)
            if d_star.shape != (N,):
                raise ValueError(f"penalty vector has shape {d_star.shape}, expected ({N},)")
            E[np.diag_indices(N)] += alpha * d_star
    return ObjectiveMatrix(E=E, variant=variant, lam=float(lam), alpha=float(alpha))


def project_psd(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix (negative eigenvalues set to zero)."""
    S = 0.5 * (M + M.T)
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition failed on {S.shape} matrix: {exc}") from exc
    keep = w > 0
    if not keep.any():
        return np.zeros_like(S)
    Vk = V[:, keep]
    P = (Vk * w[keep]) @ Vk.T
    return 0.5 * (P + P.T)


def project_box(M: np.ndarray) -> np.ndarray:
    C = np.clip(M, 0.0, 1.0)
    return 0.5 * (C + C.T)


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    max_iter: int = 5000
    over_relaxation: float = 1.6
    adapt_rho: bool = False
    scale_rho: bool = True  # multiply rho by ||E||_F / N

    def __post_init__(self):
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise ValueError("tolerances must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 1.0 <= self.over_relaxation <= 1.8:
            raise ValueError("over_relaxation must lie in [1, 1.8]")


@dataclass(frozen=True)
class SolveResult:
    X_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool
    min_eigenvalue: float
    rho: float

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "objective": self.objective,
            "converged": self.converged,
            "min_eigenvalue": self.min_eigenvalue,
            "rho": self.rho,
        }


def solve(
    E: ObjectiveMatrix | np.ndarray,
    cfg: SolverConfig = SolverConfig(),
    warm_start: Optional[np.ndarray] = None,
) -> SolveResult:
    Em = E.E if isinstance(E, ObjectiveMatrix) else np.asarray(E, dtype=float)
    N = Em.shape[0]
    if not np.allclose(Em, Em.T, atol=1e-12 * (1 + np.abs(Em).max())):
        raise ValueError("objective matrix must be symmetric")
    Em = 0.5 * (Em + Em.T)

    rho = cfg.rho
    if cfg.scale_rho:
        scale = np.linalg.norm(Em) / N
        if scale > 0:
            rho *= scale
    omega = cfg.over_relaxation

    Z = project_box(warm_start) if warm_start is not None else np.zeros((N, N))
    U = np.zeros((N, N))
    r_prim = r_dual = np.inf
    it = 0
    converged = False
    for it in range(1, cfg.max_iter + 1):
        X = project_psd(Z - U - Em / rho)
        X_rel = omega * X + (1.0 - omega) * Z
        Z_prev = Z
        Z = project_box(X_rel + U)
        U = U + X_rel - Z
        r_prim = np.linalg.norm(X - Z) / N
        r_dual = rho * np.linalg.norm(Z - Z_prev) / N
        if r_prim <= cfg.tol_primal and r_dual <= cfg.tol_dual:
            converged = True
            break
        if cfg.adapt_rho and it % 10 == 0:
            # residual balancing; U is the scaled dual so it rescales with rho
            if r_prim > 10 * r_dual:
                rho *= 2.0
                U /= 2.0
            elif r_dual > 10 * r_prim:
                rho /= 2.0
                U *= 2.0
    if not converged:
        log.warning("ADMM stopped at max_iter=%d (primal %.2e, dual %.2e)", cfg.max_iter, r_prim, r_dual)
    min_eig = float(np.linalg.eigvalsh(Z)[0])
    return SolveResult(
        X_hat=Z,
        iterations=it,
        primal_residual=float(r_prim),
        dual_residual=float(r_dual),
        objective=float(np.sum(Em * Z)),
        converged=converged,
        min_eigenvalue=min_eig,
        rho=float(rho),
    )


def spectral_warm_start(A: np.ndarray, r: int) -> np.ndarray:
    """Box projection of ``V V^T`` for the top-``r`` unit eigenvectors of ``A``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    A = np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(A)
    Vr = V[:, np.argsort(w)[::-1][:r]]
    return project_box(Vr @ Vr.T)
