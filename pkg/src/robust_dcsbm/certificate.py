"""Numerical primal-dual witness for the degree-penalized SDP.

Everything here works in block order (cluster 0, ..., cluster r-1,
outliers) using the oracle theta and B. The candidate optimum is
``X* = V* V*^T`` where ``V*`` stacks the cluster indicators over the
outlier coordinates ``x_a`` obtained from an auxiliary convex QCQP.
The objective matrix is split as ``E = Psi + Phi + Gamma + Lambda`` and
the sign pattern of the pieces certifies that ``X*`` is the unique
minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import Instance, block_slices, generate, ModelParams
from .quantities import aggregates, degrees, penalty_vector
from .sdp import project_box

KKT_TOL = 1e-6


# ---------------------------------------------------------------------------
# auxiliary QP


@dataclass(frozen=True)
class AuxiliarySolution:
    x: np.ndarray       # (r, m)
    beta: np.ndarray    # (r, m)
    xi: np.ndarray      # (m,)
    W_tilde: np.ndarray
    Z_tilde: tuple
    iterations: int
    objective: float
    stationarity: float
    slack_ball: float
    slack_sign: float

    @property
    def kkt_max(self) -> float:
        return max(self.stationarity, self.slack_ball, self.slack_sign)


def project_nonneg_ball(V: np.ndarray) -> np.ndarray:
    """Project each column of ``V`` onto ``{v >= 0, ||v||_2 <= 1}``."""
    P = np.maximum(V, 0.0)
    norms = np.linalg.norm(P, axis=0)
    scale = np.where(norms > 1.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    return P * scale[None, :]


def aux_objective(x: np.ndarray, W_tilde: np.ndarray, c: np.ndarray) -> float:
    return float(np.sum(c * x) + 0.5 * np.einsum("aj,jk,ak->", x, W_tilde, x))


def _kkt_multipliers(x, g, zero_tol=1e-12, active_tol=1e-9):
    s = np.sum(x * x, axis=0)
    xi = np.zeros(x.shape[1])
    active = s >= 1.0 - active_tol
    xi[active] = np.maximum(0.0, -np.sum(g[:, active] * x[:, active], axis=0) / s[active])
    beta = np.where(x <= zero_tol, np.maximum(0.0, g + xi[None, :] * x), 0.0)
    return beta, xi, s


def solve_auxiliary_qp(
    W_tilde: np.ndarray,
    Z_tilde: Sequence[np.ndarray],
    max_iter: int = 200_000,
    tol: float = 1e-15,
) -> AuxiliarySolution:
    """Minimize ``sum_a <x_a, Z~_a^T 1> + 1/2 x_a^T W~ x_a`` over
    ``x_a >= 0`` with ``sum_a x_{a,j}^2 <= 1`` for every outlier ``j``.

    Accelerated projected gradient with adaptive restart; the multipliers
    ``beta`` (sign constraints) and ``xi`` (ball constraints) are read off
    the final gradient.
    """
    W = np.asarray(W_tilde, dtype=float)
    W = 0.5 * (W + W.T)
    m = W.shape[0]
    r = len(Z_tilde)
    c = np.array([np.asarray(Zt, dtype=float).sum(axis=0) for Zt in Z_tilde]).reshape(r, m)
    if m == 0:
        empty = np.zeros((r, 0))
        return AuxiliarySolution(empty, empty, np.zeros(0), W, tuple(Z_tilde), 0, 0.0, 0.0, 0.0, 0.0)
    w = np.linalg.eigvalsh(W)
    if w[0] <= 0:
        raise ValueError(f"W_tilde is not positive definite (min eigenvalue {w[0]:.3e})")
    L = w[-1]
    step = 1.0 / L

    x = project_nonneg_ball(-c / L)
    y = x.copy()
    t = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        g = c + y @ W
        x_new = project_nonneg_ball(y - step * g)
        delta = x_new - x
        if np.max(np.abs(delta)) <= tol:
            x = x_new
            break
        # gradient-based restart keeps the iteration monotone in practice
        if np.sum((y - x_new) * delta) > 0:
            t = 1.0
            y = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * delta
            t = t_new
        x = x_new

    g = c + x @ W
    beta, xi, s = _kkt_multipliers(x, g)
    stat = float(np.max(np.abs(g + xi[None, :] * x - beta)))
    slack_ball = float(np.max(np.abs(xi * (1.0 - s))))
    slack_sign = float(np.max(np.abs(np.sum(x * beta, axis=1))))
    return AuxiliarySolution(
        x=x, beta=beta, xi=xi, W_tilde=W, Z_tilde=tuple(np.asarray(Zt, dtype=float) for Zt in Z_tilde),
        iterations=it, objective=aux_objective(x, W, c),
        stationarity=stat, slack_ball=slack_ball, slack_sign=slack_sign,
    )


def gershgorin_pd_check(M: np.ndarray) -> tuple[bool, float]:
    """Row margins ``|M_ii| - sum_{j != i} |M_ij|``; dominant iff all positive."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    absM = np.abs(M)
    diag = np.diag(absM)
    margins = diag - (absM.sum(axis=1) - diag)
    min_margin = float(margins.min()) if margins.size else math.inf
    return bool(min_margin > 0), min_margin


# ---------------------------------------------------------------------------
# witness construction


@dataclass
class BlockData:
    """Block-ordered view of one instance with the objective assembled."""

    A: np.ndarray
    d: np.ndarray
    d_star: np.ndarray
    E: np.ndarray
    theta: np.ndarray
    G: np.ndarray
    sizes: tuple
    m: int
    lam: float
    alpha: float
    permutation: np.ndarray

    @property
    def slices(self) -> list[slice]:
        return block_slices(self.sizes)

    @property
    def out(self) -> slice:
        n = sum(self.sizes)
        return slice(n, n + self.m)

    @property
    def r(self) -> int:
        return len(self.sizes)

    def W_tilde(self) -> np.ndarray:
        return self.E[self.out, self.out]

    def Z_tilde(self) -> list[np.ndarray]:
        return [self.E[s, self.out] for s in self.slices]


def block_data(inst: Instance, lam: float, alpha: float) -> BlockData:
    params = inst.params
    perm = inst.truth.permutation
    A = inst.A[np.ix_(perm, perm)].astype(float)
    agg = aggregates(params, inst.theta)
    d = degrees(A).astype(float)
    d_star = penalty_vector(d, agg.H_plus)
    E = alpha * np.diag(d_star) + lam * np.outer(d, d) - A
    return BlockData(A=A, d=d, d_star=d_star, E=E, theta=np.asarray(inst.theta, dtype=float),
                     G=agg.G, sizes=params.cluster_sizes, m=params.m, lam=float(lam),
                     alpha=float(alpha), permutation=perm)


@dataclass
class WitnessMatrices:
    X_star: np.ndarray
    V_star: np.ndarray
    Psi: np.ndarray          # full N x N, blocks -Psi_aa on the diagonal
    Psi_blocks: list
    Phi: np.ndarray
    Phi_blocks: dict
    Gamma: np.ndarray
    Lambda: np.ndarray
    epsilon: float
    data: BlockData
    aux: AuxiliarySolution

    def lambda_v_residual(self) -> float:
        return float(np.max(np.abs(self.Lambda @ self.V_star))) if self.V_star.size else 0.0

    def X_star_observed(self) -> np.ndarray:
        """``X*`` in the instance's node order."""
        perm = self.data.permutation
        X = np.empty_like(self.X_star)
        X[np.ix_(perm, perm)] = self.X_star
        return X


def psi_block(bd: BlockData, aux: AuxiliarySolution, a: int, epsilon: float) -> np.ndarray:
    s, o = bd.slices[a], bd.out
    K_aa, Z_a = bd.A[s, s], bd.A[s, o]
    x_a = aux.x[a]
    th = bd.theta[s]
    d_a = bd.d[s]
    d_tilde_a = d_a.sum()
    lam, alpha = bd.lam, bd.alpha
    diag = (K_aa.sum(axis=1) + Z_a @ x_a
            - (lam * (bd.d[o] @ x_a) + lam * d_tilde_a) * d_a
            - alpha * bd.d_star[s]
            - epsilon * bd.G[a] * th)
    return np.diag(diag) + epsilon * np.outer(th, th)


def phi_block(bd: BlockData, aux: AuxiliarySolution, a: int, b: int) -> np.ndarray:
    """Off-diagonal witness block in its simplified five-term form."""
    sa, sb, o = bd.slices[a], bd.slices[b], bd.out
    K_ab = bd.A[sa, sb]
    Zt_a, Zt_b = bd.E[sa, o], bd.E[sb, o]
    x_a, x_b = aux.x[a], aux.x[b]
    th_a, th_b = bd.theta[sa], bd.theta[sb]
    Ga, Gb = bd.G[a], bd.G[b]
    WX = bd.W_tilde() + np.diag(aux.xi)
    one_a, one_b = np.ones(sa.stop - sa.start), np.ones(sb.stop - sb.start)
    tt = np.outer(th_a, th_b)
    phi = -(np.outer(K_ab @ one_b, th_b) / Gb + np.outer(th_a, one_a @ K_ab) / Ga)
    phi += (one_a @ K_ab @ one_b) / (Ga * Gb) * tt
    phi += bd.lam * np.outer(bd.d[sa], bd.d[sb])
    phi -= (one_a @ Zt_a @ x_b + one_b @ Zt_b @ x_a + x_a @ WX @ x_b) / (Ga * Gb) * tt
    phi += np.outer(th_a, Zt_b @ x_a) / Ga + np.outer(Zt_a @ x_b, th_b) / Gb
    return phi


def phi_block_from_sums(bd: BlockData, aux: AuxiliarySolution, a: int, b: int) -> np.ndarray:
    """The same block built from its prescribed row and column sums
    (no use of the auxiliary stationarity condition)."""
    sa, sb, o = bd.slices[a], bd.slices[b], bd.out
    K_ab = bd.A[sa, sb]
    x_a, x_b = aux.x[a], aux.x[b]
    th_a, th_b = bd.theta[sa], bd.theta[sb]
    Ga, Gb = bd.G[a], bd.G[b]
    avec = -K_ab.sum(axis=1) + bd.E[sa, o] @ x_b - th_a * (aux.beta[a] @ x_b) / Ga
    bvec = -K_ab.sum(axis=0) + bd.E[sb, o] @ x_a - th_b * (aux.beta[b] @ x_a) / Gb
    s = avec.sum()
    return (np.outer(avec, th_b) / Gb + np.outer(th_a, bvec) / Ga
            - s / (Ga * Gb) * np.outer(th_a, th_b) + bd.lam * np.outer(bd.d[sa], bd.d[sb]))


def build_witness(bd: BlockData, delta: float, aux: Optional[AuxiliarySolution] = None) -> WitnessMatrices:
    if aux is None:
        aux = solve_auxiliary_qp(bd.W_tilde(), bd.Z_tilde())
    r, m = bd.r, bd.m
    if aux.x.shape != (r, m):
        raise ValueError(f"auxiliary solution has shape {aux.x.shape}, expected {(r, m)}")
    N = bd.E.shape[0]
    eps = delta / 10.0
    slices, o = bd.slices, bd.out

    V = np.zeros((N, r))
    for a, s in enumerate(slices):
        V[s, a] = 1.0
    V[o, :] = aux.x.T
    X_star = V @ V.T

    Psi = np.zeros((N, N))
    psi_blocks = []
    for a, s in enumerate(slices):
        P = psi_block(bd, aux, a, eps)
        psi_blocks.append(P)
        Psi[s, s] = -P

    Phi = np.zeros((N, N))
    phi_blocks = {}
    for a in range(r):
        for b in range(a + 1, r):
            F = phi_block(bd, aux, a, b)
            phi_blocks[(a, b)] = F
            Phi[slices[a], slices[b]] = F
            Phi[slices[b], slices[a]] = F.T

    Gamma = np.zeros((N, N))
    for a, s in enumerate(slices):
        blk = np.outer(bd.theta[s], aux.beta[a]) / bd.G[a]
        Gamma[s, o] = blk
        Gamma[o, s] = blk.T
    Gamma[o, o] = -np.diag(aux.xi)

    Lambda = bd.E - Psi - Phi - Gamma
    return WitnessMatrices(X_star=X_star, V_star=V, Psi=Psi, Psi_blocks=psi_blocks, Phi=Phi,
                           Phi_blocks=phi_blocks, Gamma=Gamma, Lambda=Lambda, epsilon=eps,
                           data=bd, aux=aux)


# ---------------------------------------------------------------------------
# verification


def random_feasible(N: int, rng: np.random.Generator, r: int = 2) -> np.ndarray:
    """A feasible point: convex mix of ``v v^T`` with ``v`` in ``[0, 1]^N``."""
    kind = rng.integers(3)
    if kind == 0:
        # random partition matrix (possibly with nodes left out)
        lab = rng.integers(-1, r + 1, size=N)
        Y = (lab[:, None] == lab[None, :]) & (lab[:, None] >= 0)
        return Y.astype(float)
    k = int(rng.integers(1, 6))
    w = rng.dirichlet(np.ones(k))
    Y = np.zeros((N, N))
    for j in range(k):
        v = rng.random(N) if kind == 1 else (rng.random(N) < rng.random()).astype(float)
        Y += w[j] * np.outer(v, v)
    return Y


@dataclass
class CertificateReport:
    psi_positive: list
    phi_positive: list
    lambda_min_eig: float
    lambda_fro: float
    lambda_v_residual: float
    kkt_residuals: dict
    s_terms: dict
    delta_max: float
    trials: int
    valid: bool
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "psi_positive": self.psi_positive,
            "phi_positive": self.phi_positive,
            "lambda_min_eig": self.lambda_min_eig,
            "lambda_fro": self.lambda_fro,
            "lambda_v_residual": self.lambda_v_residual,
            "kkt_residuals": self.kkt_residuals,
            "s_terms": self.s_terms,
            "delta_max": self.delta_max,
            "trials": self.trials,
            "valid": self.valid,
            "checks": self.checks,
        }


def s_terms(w: WitnessMatrices, X: np.ndarray) -> tuple[float, float, float, float]:
    D = w.X_star - X
    return (float(np.sum(D * w.Psi)), float(np.sum(D * w.Phi)),
            float(np.sum(D * w.Gamma)), float(np.sum(D * w.Lambda)))


def verify_certificate(
    w: WitnessMatrices,
    E: Optional[np.ndarray] = None,
    trials: int = 100,
    tol: float = 1e-8,
    eig_rtol: float = 1e-7,
    kkt_tol: float = KKT_TOL,
    seed: int = 0,
) -> CertificateReport:
    E = w.data.E if E is None else E
    r = w.data.r
    psi_min = [float(P.min()) for P in w.Psi_blocks]
    phi_min = [float(F.min()) for F in w.Phi_blocks.values()]
    lam_eigs = np.linalg.eigvalsh(0.5 * (w.Lambda + w.Lambda.T))
    lam_min = float(lam_eigs[0])
    lam_fro = float(np.linalg.norm(w.Lambda))
    lv = w.lambda_v_residual()
    kkt = {
        "stationarity": w.aux.stationarity,
        "slack_ball": w.aux.slack_ball,
        "slack_sign": w.aux.slack_sign,
    }
    decomposition_error = float(np.max(np.abs(w.Psi + w.Phi + w.Gamma + w.Lambda - E)))

    rng = np.random.default_rng(seed)
    N = E.shape[0]
    S_max = [-math.inf] * 4
    delta_max = -math.inf
    for k in range(trials):
        Y = random_feasible(N, rng, r)
        if k % 2 == 1:
            t = 10.0 ** rng.uniform(-3, 0)
            Y = (1 - t) * w.X_star + t * Y
        if np.array_equal(Y, w.X_star):
            continue
        S = s_terms(w, Y)
        S_max = [max(a, b) for a, b in zip(S_max, S)]
        delta_max = max(delta_max, float(np.sum((w.X_star - Y) * E)))

    checks = {
        "psi": all(v > 0 for v in psi_min),
        "phi": all(v > 0 for v in phi_min),
        "lambda_psd": lam_min >= -eig_rtol * lam_fro,
        "lambda_v": lv <= max(tol, 1e-10 * lam_fro),
        "kkt": max(kkt.values()) <= kkt_tol,
        "decomposition": decomposition_error <= 1e-9 * max(1.0, float(np.abs(E).max())),
        "delta_negative": trials == 0 or delta_max < 0,
    }
    return CertificateReport(
        psi_positive=psi_min,
        phi_positive=phi_min,
        lambda_min_eig=lam_min,
        lambda_fro=lam_fro,
        lambda_v_residual=lv,
        kkt_residuals=kkt,
        s_terms={"S1": S_max[0], "S2": S_max[1], "S3": S_max[2], "S4": S_max[3]},
        delta_max=delta_max,
        trials=trials,
        valid=all(checks.values()),
        checks=checks,
    )


def certify(inst: Instance, delta: float, lam: float, alpha: float, trials: int = 100,
            seed: int = 0) -> tuple[CertificateReport, WitnessMatrices]:
    bd = block_data(inst, lam, alpha)
    w = build_witness(bd, delta)
    return verify_certificate(w, trials=trials, seed=seed), w


# ---------------------------------------------------------------------------
# concentration audit


@dataclass
class ConcentrationReport:
    trials: int
    lemma2_upper_rate: float
    lemma2_lower_rate: float
    lemma3_rate: float
    lemma4_rate: float
    bounds: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def concentration_audit(params: ModelParams, trials: int, base_seed: int = 0) -> ConcentrationReport:
    """Empirical violation frequencies of the degree, block-sum and
    spectral-norm concentration bounds over independently seeded instances.

    Degrees are taken within the inlier subgraph, whose expectation is
    controlled by the model (outlier edges are arbitrary).
    """
    n, r = params.n, params.r
    logn = math.log(n)
    up = lo = l3 = l4 = 0
    node_trials = block_pairs = blocks = 0
    for t in range(trials):
        inst = generate(params.with_seed(base_seed + t))
        agg = aggregates(params, inst.theta)
        K = inst.sorted_adjacency()[:n, :n].astype(float)
        dK = K.sum(axis=1)
        f = agg.f
        up += int(np.sum(dK - f > 2 * logn + np.sqrt(6 * f * logn)))
        lo += int(np.sum(dK - f < -np.sqrt(6 * f * logn)))
        node_trials += n
        sl = block_slices(params.cluster_sizes)
        for a in range(r):
            for b in range(a + 1, r):
                mean = agg.G[a] * agg.G[b] * params.B[a, b]
                l3 += int(K[sl[a], sl[b]].sum() < mean - math.sqrt(6 * mean * logn))
                block_pairs += 1
            th = inst.theta[sl[a]]
            la = th.size
            Baa = params.B[a, a]
            dev = np.linalg.norm(Baa * np.outer(th, th) - K[sl[a], sl[a]], 2)
            bound = 2 * math.log(la) + math.sqrt(6 * agg.theta_max ** 2 * la * Baa * math.log(la))
            l4 += int(dev > bound)
            blocks += 1
    return ConcentrationReport(
        trials=trials,
        lemma2_upper_rate=up / node_trials,
        lemma2_lower_rate=lo / node_trials,
        lemma3_rate=l3 / block_pairs if block_pairs else 0.0,
        lemma4_rate=l4 / blocks,
        bounds={
            "lemma2": 1.0 / n ** 2,
            "lemma3": 2.0 / n + 2.0 * r / n ** 2,
            "lemma4": r / min(params.cluster_sizes) ** 4,
        },
    )
