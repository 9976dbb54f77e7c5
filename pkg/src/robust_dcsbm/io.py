"""Serialization: instance JSON, Matrix Market export, raw float64 matrices."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .model import GroundTruth, Instance, ModelParams


def instance_to_dict(inst: Instance) -> dict:
    iu, ju = np.nonzero(np.triu(inst.A, 1))
    return {
        "params": inst.params.to_dict(),
        "labels": inst.truth.labels.tolist(),
        "permutation": inst.truth.permutation.tolist(),
        "theta": inst.theta.tolist(),
        "edges": [[int(i), int(j)] for i, j in zip(iu, ju)],
    }


def instance_from_dict(d: dict) -> Instance:
    params = ModelParams.from_dict(d["params"])
    N = params.N
    A = np.zeros((N, N), dtype=np.int8)
    edges = np.asarray(d["edges"], dtype=int).reshape(-1, 2)
    if len(edges):
        A[edges[:, 0], edges[:, 1]] = 1
        A[edges[:, 1], edges[:, 0]] = 1
    labels = np.asarray(d["labels"], dtype=int)
    if "permutation" in d:
        perm = np.asarray(d["permutation"], dtype=int)
    else:
        perm = np.argsort(np.where(labels < 0, params.r, labels), kind="stable")
    truth = GroundTruth(labels=labels, permutation=perm, r=params.r)
    return Instance(params=params, A=A, truth=truth, theta=np.asarray(d["theta"], dtype=float))


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)), encoding="utf-8")


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_matrix_market(A: np.ndarray, path) -> None:
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(np.asarray(A).astype(int)), symmetry="symmetric",
                     field="integer")


def load_matrix_market(path) -> np.ndarray:
    return np.asarray(scipy.io.mmread(str(path)).todense()).astype(np.int8)


def save_matrix_bin(X: np.ndarray, path) -> None:
    np.ascontiguousarray(X, dtype="<f8").tofile(str(path))


def load_matrix_bin(path) -> np.ndarray:
    flat = np.fromfile(str(path), dtype="<f8")
    N = math.isqrt(flat.size)
    if N * N != flat.size:
        raise ValueError(f"{path}: {flat.size} values is not a square matrix")
    return flat.reshape(N, N)
