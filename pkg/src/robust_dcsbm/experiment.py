"""Monte Carlo sweeps over the planted model.

Every (grid point, trial) pair is one task: generate an instance, tune,
run each method, score it. Rows are appended to ``results.csv`` as tasks
finish, and the file is rewritten in canonical order at the end, so the
final table does not depend on worker count or on interruptions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .baselines import (BaselineSpec, Method, caili_cluster, caili_parameters,
                        score_cluster, spectral_cluster)
from .model import ModelParams, generate
from .quantities import (aggregates, choose_tuning, default_delta, degrees,
                         estimate_H_plus, penalty_vector, theorem_feasibility)
from .rounding import KMeansConfig, kmeans_rows, misclassification
from .sdp import SolverConfig, assemble_objective, solve

log = logging.getLogger(__name__)

HEADER = ["n", "m", "r", "p", "q", "shape", "tau", "method", "trial", "seed",
          "rate", "iters", "seconds", "converged", "error"]
KEY = ["n", "m", "r", "p", "q", "shape", "tau", "method", "trial"]
POINT = ["n", "m", "r", "p", "q", "shape", "tau"]
SUMMARY_HEADER = POINT + ["method", "trials", "errors", "mean", "stderr"]


@dataclass(frozen=True)
class GridPoint:
    n: int
    m: int
    r: int
    p: float
    q: float
    shape: Optional[float]
    tau: float

    def params(self, seed: int) -> ModelParams:
        return ModelParams.planted(n=self.n, m=self.m, r=self.r, p=self.p, q=self.q,
                                   pareto_shape=self.shape, tau=self.tau, seed=seed)

    def cells(self) -> list[str]:
        return [str(self.n), str(self.m), str(self.r), _fmt(self.p), _fmt(self.q),
                "" if self.shape is None else _fmt(self.shape), _fmt(self.tau)]


def _fmt(x: float) -> str:
    return repr(float(x))


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentConfig:
    n: list = field(default_factory=lambda: [400])
    m: list = field(default_factory=lambda: [10])
    r: list = field(default_factory=lambda: [2])
    p: list = field(default_factory=lambda: [0.2])
    q_ratio: float = 3.0
    shape: list = field(default_factory=lambda: [1.7])
    tau: list = field(default_factory=lambda: [1.0])
    methods: list = field(default_factory=lambda: [{"method": "dstar"}])
    trials: int = 20
    base_seed: int = 0
    tuning: str = "oracle"          # oracle | heuristic
    c0: float = 1.0
    c1: float = 0.25
    solver_tol: float = 1e-4
    solver_max_iter: int = 3000
    adapt_rho: bool = True
    kmeans_restarts: int = 10
    record_timing: bool = True
    output_dir: Optional[str] = None

    def __post_init__(self):
        for name in ("n", "m", "r", "p", "shape", "tau"):
            setattr(self, name, _as_list(getattr(self, name)))
        self.methods = [m if isinstance(m, dict) else {"method": m} for m in _as_list(self.methods)]
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("n", "m", "r", "p", "shape", "tau", "methods"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name!r} is empty")
        if not self.q_ratio > 1:
            raise ValueError("q_ratio must exceed 1")
        if self.tuning not in ("oracle", "heuristic"):
            raise ValueError(f"unknown tuning {self.tuning!r}")
        for spec in self.method_specs():
            if spec.method is Method.SCORE and min(self.r) < 2:
                raise ValueError("SCORE needs r >= 2")

    def method_specs(self) -> list[BaselineSpec]:
        return [BaselineSpec(m["method"], dict(m.get("config", {}))) for m in self.methods]

    def grid(self) -> list[GridPoint]:
        return [GridPoint(int(n), int(m), int(r), float(p), float(p) / self.q_ratio,
                          None if s is None else float(s), float(t))
                for n, m, r, p, s, t in itertools.product(self.n, self.m, self.r, self.p,
                                                          self.shape, self.tau)]

    def solver(self) -> SolverConfig:
        return SolverConfig(tol_primal=self.solver_tol, tol_dual=self.solver_tol,
                            max_iter=self.solver_max_iter, adapt_rho=self.adapt_rho)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def trial_seed(base_seed: int, point: GridPoint, trial: int) -> int:
    payload = json.dumps([int(base_seed), point.cells(), int(trial)]).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little") >> 1


# ---------------------------------------------------------------------------
# one task


def _tuning(cfg: ExperimentConfig, params: ModelParams, inst) -> dict:
    A = inst.A
    if cfg.tuning == "oracle":
        agg = aggregates(params, inst.theta)
        rep = theorem_feasibility(params, inst.theta, default_delta(params), c0=cfg.c0, c1=cfg.c1)
        lam, alpha = choose_tuning(rep, "auto", A=A, m_hat=params.m, c1=cfg.c1)
        return {"lam": lam, "alpha": alpha, "H_plus": agg.H_plus, "H_minus": agg.H_minus}
    lam, alpha = choose_tuning(None, "heuristic", A=A, m_hat=params.m, c1=cfg.c1)
    H = estimate_H_plus(A, trim=params.m)
    return {"lam": lam, "alpha": alpha, "H_plus": H, "H_minus": H}


def _run_method(spec: BaselineSpec, inst, r: int, tune: dict, solver: SolverConfig,
                km: KMeansConfig) -> tuple[np.ndarray, int, bool]:
    A = inst.A
    c = spec.config
    if spec.method is Method.DSTAR:
        d = degrees(A)
        lam, alpha = c.get("lam", tune["lam"]), c.get("alpha", tune["alpha"])
        E = assemble_objective(A, d, penalty_vector(d, tune["H_plus"]), lam, alpha)
        sol = solve(E, solver)
        return kmeans_rows(sol.X_hat, r, km).labels, sol.iterations, sol.converged
    if spec.method is Method.CAILI:
        lam, alpha = caili_parameters(tune["lam"], tune["alpha"], tune["H_plus"], tune["H_minus"])
        res = caili_cluster(A, r, c.get("alpha", alpha), c.get("lam", lam), solver, km)
        s = res.notes["solve"]
        return res.labels, s["iterations"], s["converged"]
    if spec.method is Method.SPECTRAL:
        return spectral_cluster(A, r, c.get("regularizer"), km).labels, 0, True
    return score_cluster(A, r, c.get("ratio_cap"), km).labels, 0, True


def run_task(cfg: ExperimentConfig, point: GridPoint, trial: int) -> list[dict]:
    seed = trial_seed(cfg.base_seed, point, trial)
    base = dict(zip(POINT, point.cells()), trial=str(trial), seed=str(seed))
    rows = []
    try:
        params = point.params(seed)
        inst = generate(params)
        tune = _tuning(cfg, params, inst)
    except Exception as exc:  # the whole trial is lost; one error row per method
        msg = f"{type(exc).__name__}: {exc}"
        return [dict(base, method=s.method.value, rate="", iters="0", seconds="0",
                     converged="0", error=msg) for s in cfg.method_specs()]
    km = KMeansConfig(restarts=cfg.kmeans_restarts, seed=seed % (2 ** 32))
    solver = cfg.solver()
    for spec in cfg.method_specs():
        t0 = time.perf_counter()
        try:
            labels, iters, conv = _run_method(spec, inst, point.r, tune, solver, km)
            rate = misclassification(labels, inst.truth).rate
            row = dict(rate=_fmt(rate), iters=str(int(iters)), converged=str(int(bool(conv))), error="")
        except Exception as exc:
            row = dict(rate="", iters="0", converged="0", error=f"{type(exc).__name__}: {exc}")
        secs = time.perf_counter() - t0 if cfg.record_timing else 0.0
        rows.append(dict(base, method=spec.method.value, seconds=f"{secs:.3f}", **row))
    return rows


# ---------------------------------------------------------------------------
# results file


def _row_key(row: dict) -> tuple:
    return tuple(row[k] for k in KEY)


def _sort_key(row: dict, method_order: dict) -> tuple:
    return (int(row["n"]), int(row["m"]), int(row["r"]), float(row["p"]), float(row["q"]),
            float(row["shape"]) if row["shape"] else -1.0, float(row["tau"]),
            method_order.get(row["method"], len(method_order)), int(row["trial"]))


def read_results(path) -> list[dict]:
    """Rows of a results file; a truncated trailing line is dropped."""
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header != HEADER:
            raise ValueError(f"{path} has an unexpected header")
        return [dict(zip(HEADER, rec)) for rec in reader if len(rec) == len(HEADER)]


def _rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=HEADER, lineterminator="\n")
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _append(fh, rows: list[dict]) -> None:
    fh.write(_rows_to_csv(rows))
    fh.flush()
    os.fsync(fh.fileno())


def write_results(path, rows: list[dict]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(HEADER) + "\n")
        fh.write(_rows_to_csv(rows))
    os.replace(tmp, path)


def run_experiment(cfg: ExperimentConfig, out_dir=None, resume: bool = False,
                   workers: Optional[int] = None) -> list[dict]:
    """Run every (grid point, trial) task and return the canonical row list."""
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)

    methods = [s.method.value for s in cfg.method_specs()]
    done: dict[tuple, dict] = {}
    if resume:
        for row in read_results(path):
            done[_row_key(row)] = row
    write_results(path, list(done.values()))

    tasks = []
    for point in cfg.grid():
        for t in range(cfg.trials):
            keys = [tuple(point.cells()) + (mth, str(t)) for mth in methods]
            if not all(k in done for k in keys):
                tasks.append((point, t))
    log.info("%d tasks to run (%d rows already present)", len(tasks), len(done))

    workers = workers or os.cpu_count() or 1
    with open(path, "a", newline="") as fh:
        if workers <= 1 or len(tasks) <= 1:
            for point, t in tasks:
                rows = run_task(cfg, point, t)
                _append(fh, rows)
                done.update((_row_key(r), r) for r in rows)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(run_task, cfg, point, t) for point, t in tasks]
                for fut in as_completed(futs):
                    rows = fut.result()
                    _append(fh, rows)
                    done.update((_row_key(r), r) for r in rows)

    order = {m: i for i, m in enumerate(methods)}
    final = sorted(done.values(), key=lambda r: _sort_key(r, order))
    write_results(path, final)
    return final


# ---------------------------------------------------------------------------
# aggregation


def summarize(rows: Iterable[dict]) -> list[dict]:
    """Mean rate and standard error ``std(ddof=1)/sqrt(k)`` per (grid point, method).

    Error rows are counted but excluded from the statistics. A single
    successful row has standard error 0.
    """
    groups: dict[tuple, list] = {}
    errors: dict[tuple, int] = {}
    for row in rows:
        key = tuple(str(row[k]) for k in POINT) + (str(row["method"]),)
        groups.setdefault(key, [])
        errors.setdefault(key, 0)
        if row.get("error") or row.get("rate") in ("", None):
            errors[key] += 1
        else:
            groups[key].append(float(row["rate"]))
    out = []
    for key in sorted(groups, key=lambda k: tuple(float(x) if _is_num(x) else math.inf for x in k[:-1]) + (k[-1],)):
        vals = np.sort(np.array(groups[key]))  # sorting makes the float sums order-free
        k = vals.size
        mean = float(vals.sum() / k) if k else math.nan
        se = float(np.std(vals, ddof=1) / math.sqrt(k)) if k > 1 else (0.0 if k == 1 else math.nan)
        out.append(dict(zip(POINT, key[:-1]), method=key[-1], trials=k, errors=errors[key],
                        mean=mean, stderr=se))
    return out


def _is_num(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_summary(path, summary: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        for row in summary:
            w.writerow({**row, "mean": _fmt(row["mean"]), "stderr": _fmt(row["stderr"])})


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["mean"], row["stderr"] = float(row["mean"]), float(row["stderr"])
        row["trials"], row["errors"] = int(row["trials"]), int(row["errors"])
    return rows


# ---------------------------------------------------------------------------
# figure configurations


def preset(name: str, **overrides) -> ExperimentConfig:
    """Sweeps matching the published synthetic studies (n=400, q=p/3)."""
    ps = [0.08, 0.1, 0.12, 0.15, 0.2, 0.25, 0.3]
    table = {
        "fig1-shape": dict(p=ps, shape=[1.5, 1.7, 2.0, 3.0], m=[10], tau=[1.0]),
        "fig1-outliers": dict(p=ps, shape=[1.7], m=[0, 10, 20, 30], tau=[1.0]),
        "fig3-shape": dict(p=ps, shape=[1.5, 1.7, 2.0, 3.0], m=[10], tau=[0.5]),
        "fig3-outliers": dict(p=ps, shape=[1.7], m=[0, 10, 20, 30], tau=[0.5]),
        "fig4-shape": dict(p=[0.15], shape=[1.4, 1.6, 2.0, 3.0], m=[10], tau=[0.5],
                           methods=["dstar", "caili", "spectral", "score"]),
        "fig4-outliers": dict(p=[0.15], shape=[1.6], m=[0, 10, 20, 30], tau=[0.5],
                              methods=["dstar", "caili", "spectral", "score"]),
    }
    if name not in table:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(table)}")
    kw = dict(n=[400], r=[2], q_ratio=3.0)
    kw.update(table[name])
    kw.update(overrides)
    return ExperimentConfig(**kw)
