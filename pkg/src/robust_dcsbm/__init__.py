"""Penalized-modularity SDP clustering for degree-corrected block models
with outliers: generator, solver, rounding, baselines, optimality
witness and experiment harness."""

from .model import GroundTruth, Instance, ModelParams, OUTLIER, generate
from .quantities import (TheoremReport, aggregates, choose_tuning, default_delta,
                         estimate_H_plus, penalty_vector, theorem_feasibility)
from .sdp import SolveResult, SolverConfig, Variant, assemble_objective, solve
from .rounding import (ClusteringResult, KMeansConfig, MisclassificationReport, kmeans_rows,
                       misclassification)
from .baselines import BaselineSpec, Method, caili_cluster, score_cluster, spectral_cluster
from .certificate import (CertificateReport, WitnessMatrices, build_witness, certify,
                          concentration_audit, solve_auxiliary_qp, verify_certificate)
from .experiment import ExperimentConfig, run_experiment, summarize

__version__ = "0.1.0"
