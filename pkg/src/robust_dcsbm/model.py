"""Degree-corrected stochastic block model with outliers.

Instances are sampled in *sorted* order (cluster 0, ..., cluster r-1,
then outliers) and then shuffled by a random node permutation. Every
random block draws from its own substream of the instance seed, so
changing ``m`` or ``tau`` never perturbs the inlier block and raising
``tau`` never removes an outlier edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

OUTLIER = -1

# substream ids; order is part of the reproducibility contract
_STREAM_THETA = 0
_STREAM_INLIER = 1
_STREAM_RHO = 2
_STREAM_Z = 3
_STREAM_W = 4
_STREAM_PERM = 5


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for block ``stream`` of instance ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ModelParams:
    n: int
    m: int
    cluster_sizes: tuple[int, ...]
    B: np.ndarray
    pareto_shape: Optional[float] = 1.7
    tau: float = 1.0
    outlier_self_density: float = 0.7
    seed: int = 0
    # "outlier": one rho per outlier node; "inlier": one rho per inlier row
    rho_index: str = "outlier"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.cluster_sizes)
        object.__setattr__(self, "cluster_sizes", sizes)
        B = np.array(self.B, dtype=float, copy=True)
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        self.validate()

    @property
    def r(self) -> int:
        return len(self.cluster_sizes)

    @property
    def N(self) -> int:
        return self.n + self.m

    def validate(self) -> None:
        sizes = self.cluster_sizes
        if len(sizes) < 1:
            raise ValueError("need at least one cluster")
        if any(s < 1 for s in sizes):
            raise ValueError(f"cluster sizes must be >= 1, got {sizes}")
        if sum(sizes) != self.n:
            raise ValueError(f"cluster sizes sum to {sum(sizes)}, expected n={self.n}")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        r = len(sizes)
        if self.B.shape != (r, r):
            raise ValueError(f"B must be {r}x{r}, got {self.B.shape}")
        if not np.allclose(self.B, self.B.T, atol=0, rtol=0):
            raise ValueError("B must be symmetric")
        if np.any(self.B < 0) or np.any(self.B > 1):
            raise ValueError("B entries must lie in [0, 1]")
        if self.pareto_shape is not None and not self.pareto_shape > 1:
            raise ValueError(f"pareto_shape must be > 1 (finite mean), got {self.pareto_shape}")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")
        if not 0 <= self.outlier_self_density <= 1:
            raise ValueError("outlier_self_density must lie in [0, 1]")
        if self.rho_index not in ("outlier", "inlier"):
            raise ValueError("rho_index must be 'outlier' or 'inlier'")

    @classmethod
    def planted(
        cls,
        n: int,
        m: int,
        r: int,
        p: float,
        q: float,
        pareto_shape: Optional[float] = 1.7,
        tau: float = 1.0,
        seed: int = 0,
        **kw,
    ) -> "ModelParams":
        """Equal-sized clusters (remainder spread over the first ones), B = q J + (p - q) I."""
        base, extra = divmod(n, r)
        sizes = tuple(base + (1 if a < extra else 0) for a in range(r))
        B = np.full((r, r), float(q))
        np.fill_diagonal(B, float(p))
        return cls(n=n, m=m, cluster_sizes=sizes, B=B, pareto_shape=pareto_shape,
                   tau=tau, seed=seed, **kw)

    def with_seed(self, seed: int) -> "ModelParams":
        return ModelParams(**{**self.to_dict(), "seed": int(seed)})

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "cluster_sizes": list(self.cluster_sizes),
            "B": self.B.tolist(),
            "pareto_shape": self.pareto_shape,
            "tau": self.tau,
            "outlier_self_density": self.outlier_self_density,
            "seed": self.seed,
            "rho_index": self.rho_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "B" not in d and "p" in d:
            r = int(d.pop("r"))
            return cls.planted(n=int(d.pop("n")), m=int(d.pop("m", 0)), r=r,
                               p=float(d.pop("p")), q=float(d.pop("q")), **d)
        return cls(**d)

    def sorted_labels(self) -> np.ndarray:
        """Labels in block order: cluster indices followed by OUTLIER marks."""
        lab = np.repeat(np.arange(self.r), self.cluster_sizes)
        return np.concatenate([lab, np.full(self.m, OUTLIER)]).astype(int)


@dataclass(frozen=True)
class GroundTruth:
    """Labels of the observed (shuffled) nodes.

    ``permutation[k]`` is the observed index of the node at sorted
    position ``k``; so ``A[np.ix_(permutation, permutation)]`` is the
    block-ordered matrix and ``labels[permutation]`` is non-decreasing
    over inliers followed by outliers.
    """

    labels: np.ndarray
    permutation: np.ndarray
    r: int

    @property
    def inliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels != OUTLIER)

    @property
    def outliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OUTLIER)

    def members(self, a: int) -> np.ndarray:
        return np.flatnonzero(self.labels == a)


@dataclass(frozen=True)
class Instance:
    params: ModelParams
    A: np.ndarray
    truth: GroundTruth
    theta: np.ndarray  # indexed by sorted inlier position
    extra: dict = field(default_factory=dict)

    @property
    def theta_observed(self) -> np.ndarray:
        """theta indexed by observed node id (NaN for outliers)."""
        out = np.full(self.params.N, np.nan)
        out[self.truth.permutation[: self.params.n]] = self.theta
        return out

    def sorted_adjacency(self) -> np.ndarray:
        perm = self.truth.permutation
        return self.A[np.ix_(perm, perm)]


def pareto_scale(shape: float) -> float:
    return (shape - 1.0) / shape


def sample_theta(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Pareto degree parameters (all ones when ``pareto_shape`` is None)."""
    shape = params.pareto_shape
    if shape is None:
        return np.ones(params.n)
    if not shape > 1:
        raise ValueError(f"pareto_shape must be > 1, got {shape}")
    u = rng.random(params.n)
    # inverse CDF; 1-u lies in (0, 1]
    return pareto_scale(shape) * (1.0 - u) ** (-1.0 / shape)


def _symmetric_from_upper(mask_upper: np.ndarray) -> np.ndarray:
    M = np.triu(mask_upper, 1).astype(np.int8)
    return M + M.T


def sample_inlier_block(params: ModelParams, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = params.n
    block = params.sorted_labels()[:n]
    prob = np.minimum(1.0, np.outer(theta, theta) * params.B[np.ix_(block, block)])
    u = rng.random((n, n))
    return _symmetric_from_upper(u < prob)


def sample_outlier_blocks(
    params: ModelParams,
    rng_rho: np.random.Generator,
    rng_z: np.random.Generator,
    rng_w: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Z, W, rho)``.

    ``Z[i, j] ~ Bernoulli(rho * tau)`` with ``sqrt(rho) ~ U(0, 1)``; rho is
    drawn per outlier column or per inlier row depending on
    ``params.rho_index``. ``W`` has off-diagonal Bernoulli(c * tau) entries.
    """
    n, m, tau = params.n, params.m, params.tau
    if params.rho_index == "outlier":
        rho = rng_rho.random(m) ** 2
        prob_z = np.broadcast_to(rho[None, :] * tau, (n, m))
    else:
        rho = rng_rho.random(n) ** 2
        prob_z = np.broadcast_to(rho[:, None] * tau, (n, m))
    Z = (rng_z.random((n, m)) < prob_z).astype(np.int8)
    W = _symmetric_from_upper(rng_w.random((m, m)) < params.outlier_self_density * tau)
    return Z, W, rho


def assemble(K: np.ndarray, Z: np.ndarray, W: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """Observed adjacency from sorted blocks and the sorted->observed map."""
    top = np.hstack([K, Z])
    bottom = np.hstack([Z.T, W])
    S = np.vstack([top, bottom]).astype(np.int8)
    N = S.shape[0]
    A = np.empty((N, N), dtype=np.int8)
    A[np.ix_(permutation, permutation)] = S
    return A


def generate(params: ModelParams) -> Instance:
    seed = params.seed
    theta = sample_theta(params, substream(seed, _STREAM_THETA))
    K = sample_inlier_block(params, theta, substream(seed, _STREAM_INLIER))
    Z, W, rho = sample_outlier_blocks(
        params, substream(seed, _STREAM_RHO), substream(seed, _STREAM_Z), substream(seed, _STREAM_W)
    )
    perm = substream(seed, _STREAM_PERM).permutation(params.N)
    A = assemble(K, Z, W, perm)
    labels = np.empty(params.N, dtype=int)
    labels[perm] = params.sorted_labels()
    truth = GroundTruth(labels=labels, permutation=perm, r=params.r)
    return Instance(params=params, A=A, truth=truth, theta=theta, extra={"rho": rho})


def check_adjacency(A: np.ndarray) -> None:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have zero diagonal")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("adjacency entries must be 0/1")


def block_slices(sizes: Sequence[int]) -> list[slice]:
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [slice(int(edges[a]), int(edges[a + 1])) for a in range(len(sizes))]
