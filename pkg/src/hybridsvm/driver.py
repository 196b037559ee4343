"""Two-phase training orchestration.

Phase 1 runs the ADMM solver with the relative-iterate transition test,
which fires once the feature support has stabilized.  The data (and any
knowledge matrices) are then cut down to the surviving support, the
interior-point solver refines the reduced problem to high accuracy, and the
solution is mapped back to the original feature coordinates.
"""

import time
import warnings
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .admm import (EnkParams, REASON_ITERATION_LIMIT, admm_enk_run,
                   admm_ensvm_run)
from .model import SvmModel
from .qp import (STATUS_OPTIMAL, DegenerateModelError, SvmIpmConfig,
                 assemble_ksvm_primal, assemble_svm_dual, dual_warm_start,
                 ipm_solve, ksvm_primal_solution, recover_primal)

MODE_HIPAD = "hipad"
MODE_HIPAD_ENK = "hipad-enk"
MODE_ADMM_ONLY = "admm-only"


class TrainingError(Exception):
    """A solver failed; the message names the phase."""


@dataclass
class TrainConfig:
    """Everything a training run needs: the (superset) ADMM parameters, the
    interior-point settings, and whether to stop after the first phase."""

    admm: EnkParams = field(default_factory=EnkParams)
    ipm: SvmIpmConfig = field(default_factory=SvmIpmConfig)
    skip_phase2: bool = False

    def resolve_cost(self, data):
        """Hinge penalty for the second phase: explicit override, or
        1/(N*lambda2) so the scale matches the averaged-hinge objective."""
        if self.ipm.svm_cost is not None:
            return float(self.ipm.svm_cost)
        return 1.0 / (data.n_samples * max(self.admm.lambda2, 1e-12))


def _check_trainable(data):
    if data.y is None:
        raise ValueError("training requires labels")
    if data.n_samples < 2 or len(np.unique(data.y)) < 2:
        raise ValueError("training needs at least two samples with both labels")


def _phase1_model(data, outcome, phase1_time, note=None):
    support = outcome.support
    model = SvmModel(n_features=data.n_features, support=support,
                     weights=outcome.state.w[support], bias=outcome.state.b,
                     provenance=MODE_ADMM_ONLY,
                     phase1_iters=outcome.state.iteration,
                     phase1_time=phase1_time, phase1_reason=outcome.reason)
    if note:
        warnings.warn(note)
        model.warnings.append(note)
    return model


def train(data, config=None, knowledge=None, callback=None):
    """Train a linear classifier; dispatches on the presence of knowledge."""
    config = config or TrainConfig()
    _check_trainable(data)
    if knowledge is not None and not knowledge.is_empty:
        return _train_with_knowledge(data, knowledge, config, callback)
    return _train_plain(data, config, callback)


def _phase2_dual(data, support, state, config, cost):
    reduced = data.select_columns(support)
    ipm_cfg = SvmIpmConfig(svm_cost=cost, kkt_tol=config.ipm.kkt_tol,
                           max_iter=config.ipm.max_iter)
    qp = assemble_svm_dual(reduced, ipm_cfg)
    warm = dual_warm_start(reduced, state.w[support], state.b, cost)
    solution = ipm_solve(qp, warm_start=warm, cfg=ipm_cfg)
    if solution.status != STATUS_OPTIMAL:
        raise TrainingError(
            f"phase 2 (dual SVM) ended with status {solution.status!r} after "
            f"{solution.iterations} iterations (residuals "
            f"{solution.residual_primal:.2e}/{solution.residual_dual:.2e}/"
            f"{solution.residual_comp:.2e})")
    reduced_model = recover_primal(solution, reduced, ipm_cfg)
    return reduced_model, solution.iterations


def _train_plain(data, config, callback):
    t0 = time.perf_counter()
    outcome = admm_ensvm_run(data, config.admm, stop_on_transition=not config.skip_phase2,
                             callback=callback)
    phase1_time = time.perf_counter() - t0
    support = outcome.support
    if config.skip_phase2:
        return _phase1_model(data, outcome, phase1_time)
    if support.size == 0:
        return _phase1_model(data, outcome, phase1_time,
                             note="phase 1 produced an empty support; "
                                  "returning the first-phase model")
    cost = config.resolve_cost(data)
    t1 = time.perf_counter()
    try:
        reduced_model, ipm_iters = _phase2_dual(data, support, outcome.state,
                                                config, cost)
    except DegenerateModelError as exc:
        model = _phase1_model(data, outcome, phase1_time,
                              note=f"phase 2 was degenerate ({exc}); "
                                   "returning the first-phase model")
        model.phase2_time = time.perf_counter() - t1
        return model
    phase2_time = time.perf_counter() - t1
    model = reduced_model.remap(support, data.n_features)
    model.provenance = MODE_HIPAD
    model.phase1_iters = outcome.state.iteration
    model.phase2_iters = ipm_iters
    model.phase1_time = phase1_time
    model.phase2_time = phase2_time
    model.phase1_reason = outcome.reason
    return model


def _train_with_knowledge(data, knowledge, config, callback):
    if knowledge.n_features != data.n_features:
        raise ValueError("knowledge feature dimension does not match the data")
    t0 = time.perf_counter()
    outcome = admm_enk_run(data, knowledge, config.admm,
                           stop_on_transition=not config.skip_phase2,
                           callback=callback)
    phase1_time = time.perf_counter() - t0
    support = outcome.support
    if config.skip_phase2:
        return _phase1_model(data, outcome, phase1_time)
    if support.size == 0:
        return _phase1_model(data, outcome, phase1_time,
                             note="phase 1 produced an empty support; "
                                  "returning the first-phase model")

    reduced = data.select_columns(support)
    red_knowledge = knowledge.select_columns(support)
    notes = []
    if knowledge.k1 > 0 and red_knowledge.B.nnz == 0:
        notes.append("positive-class rules lost all features on the support; "
                     "continuing without them")
        red_knowledge = red_knowledge.drop_positive()
    if knowledge.k2 > 0 and red_knowledge.D.nnz == 0:
        notes.append("negative-class rules lost all features on the support; "
                     "continuing without them")
        red_knowledge = red_knowledge.drop_negative()
    for note in notes:
        warnings.warn(note)

    cost = config.resolve_cost(data)
    state = outcome.state
    t1 = time.perf_counter()
    if red_knowledge.is_empty:
        try:
            reduced_model, ipm_iters = _phase2_dual(data, support, state,
                                                    config, cost)
        except DegenerateModelError as exc:
            model = _phase1_model(data, outcome, phase1_time,
                                  note=f"phase 2 was degenerate ({exc}); "
                                       "returning the first-phase model")
            model.warnings.extend(notes)
            model.phase2_time = time.perf_counter() - t1
            return model
        provenance = MODE_HIPAD
    else:
        ipm_cfg = SvmIpmConfig(svm_cost=cost, kkt_tol=config.ipm.kkt_tol,
                               max_iter=config.ipm.max_iter)
        warm = SimpleNamespace(w=state.w[support], b=state.b,
                               u=state.u, v=state.v)
        qp, warm_x = assemble_ksvm_primal(reduced, red_knowledge, warm,
                                          config.admm, ipm_cfg)
        solution = ipm_solve(qp, warm_start=warm_x, cfg=ipm_cfg)
        if solution.status != STATUS_OPTIMAL:
            raise TrainingError(
                f"phase 2 (knowledge SVM) ended with status "
                f"{solution.status!r} after {solution.iterations} iterations "
                f"(residuals {solution.residual_primal:.2e}/"
                f"{solution.residual_dual:.2e}/{solution.residual_comp:.2e})")
        w_red, b = ksvm_primal_solution(solution, reduced)
        reduced_model = SvmModel(n_features=reduced.n_features,
                                 support=np.arange(reduced.n_features),
                                 weights=w_red, bias=b, provenance="ksvm-primal")
        ipm_iters = solution.iterations
        provenance = MODE_HIPAD_ENK
    phase2_time = time.perf_counter() - t1

    model = reduced_model.remap(support, data.n_features)
    model.provenance = provenance
    model.phase1_iters = state.iteration
    model.phase2_iters = ipm_iters
    model.phase1_time = phase1_time
    model.phase2_time = phase2_time
    model.phase1_reason = outcome.reason
    model.warnings.extend(notes)
    return model


def predict(model, X):
    """Labels for the rows of X under the trained model (ties go to +1)."""
    return model.predict(X)
