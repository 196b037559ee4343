"""Two-phase sparse linear SVM training toolkit.

Phase 1 identifies the feature support cheaply with an alternating-direction
solver for the elastic-net SVM (optionally augmented with linear-implication
domain knowledge); phase 2 refines the reduced problem to high accuracy with
a primal-dual interior-point QP solver.
"""

from .admm import (AdmmOutcome, EnkParams, EnkState, EnsvmParams, EnsvmState,
                   admm_enk_run, admm_enk_step, admm_ensvm_run,
                   admm_ensvm_step, enk_objective, ensvm_objective)
from .data import (DataFormatError, DataMatrix, KnowledgeSet, SyntheticSpec,
                   generate_dense_sparse_support, generate_knowledge_synthetic,
                   preset_spec, read_knowledge, read_libsvm, write_knowledge,
                   write_libsvm)
from .driver import TrainConfig, TrainingError, predict, train
from .estimator import TwoPhaseSvmClassifier
from .linalg import (CholeskyFactor, NotPositiveDefiniteError,
                     PcgBreakdownError, SymOperator, cholesky_solve, pcg_solve,
                     spmv, spmv_t)
from .model import SvmModel, accuracy_percent, read_model, write_model
from .prox import hinge_prox, soft_threshold
from .qp import (DegenerateModelError, QpProblem, QpSolution, SvmIpmConfig,
                 assemble_ksvm_primal, assemble_svm_dual, ipm_solve,
                 recover_primal)

__version__ = "0.1.0"

__all__ = [
    "AdmmOutcome", "CholeskyFactor", "DataFormatError", "DataMatrix",
    "DegenerateModelError", "EnkParams", "EnkState", "EnsvmParams",
    "EnsvmState", "KnowledgeSet", "NotPositiveDefiniteError",
    "PcgBreakdownError", "QpProblem", "QpSolution", "SvmIpmConfig",
    "SvmModel", "SymOperator", "SyntheticSpec", "TrainConfig",
    "TrainingError", "TwoPhaseSvmClassifier", "accuracy_percent",
    "admm_enk_run", "admm_enk_step", "admm_ensvm_run", "admm_ensvm_step",
    "assemble_ksvm_primal", "assemble_svm_dual", "cholesky_solve",
    "enk_objective", "ensvm_objective", "generate_dense_sparse_support",
    "generate_knowledge_synthetic", "hinge_prox", "ipm_solve", "pcg_solve",
    "predict", "preset_spec", "read_knowledge", "read_libsvm", "read_model",
    "recover_primal", "soft_threshold", "spmv", "spmv_t", "train",
    "write_knowledge", "write_libsvm", "write_model",
]
