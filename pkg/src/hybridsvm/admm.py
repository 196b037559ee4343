"""Alternating-direction solvers for the elastic-net SVM, without and with
linear-implication domain knowledge.

Each iteration solves the stacked (w, b) normal system by warm-started PCG,
applies the hinge-loss and soft-thresholding proximal maps to the auxiliary
blocks, solves the small rule subsystems by cached Cholesky factors, and
updates the multipliers.  Runs stop on one of three conditions: the
relative-iterate transition test (used to hand off to the second phase), the
full convergence battery (relative objective change, both split-constraint
residuals, and relative w-change), or the iteration cap.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import CholeskyFactor, pcg_solve, wb_block_system
from .prox import hinge_prox, soft_threshold

REASON_TRANSITION = "transition-triggered"
REASON_CONVERGED = "converged"
REASON_ITERATION_LIMIT = "iteration-limit"


@dataclass
class EnsvmParams:
    """Elastic-net weights, augmented-Lagrangian penalties, and tolerances."""

    lambda1: float = 0.06
    lambda2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    eps1: float = 1e-5
    eps2: float = 1e-3
    eps_tol: float = 1e-4
    max_iter: int = 2000
    pcg_tol: float = 1e-8
    pcg_max_iter: int = 200

    def validate(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization weights must be nonnegative")
        if min(self.mu1, self.mu2) <= 0:
            raise ValueError("penalty parameters must be positive")
        if min(self.eps1, self.eps2, self.eps_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass
class EnkParams(EnsvmParams):
    """Extends the base parameters with the knowledge penalties.

    The rho's usually share one value and the extra mu's another, which is
    what :meth:`shared` sets up; the individual fields stay overridable.
    """

    rho1: float = 70.0
    rho2: float = 70.0
    rho3: float = 70.0
    rho4: float = 70.0
    mu3: float = 1.0
    mu4: float = 1.0
    mu5: float = 1.0
    mu6: float = 1.0

    @classmethod
    def shared(cls, rho=70.0, knowledge_mu=1.0, **base):
        return cls(rho1=rho, rho2=rho, rho3=rho, rho4=rho,
                   mu3=knowledge_mu, mu4=knowledge_mu,
                   mu5=knowledge_mu, mu6=knowledge_mu, **base)

    def validate(self):
        super().validate()
        if min(self.rho1, self.rho2, self.rho3, self.rho4) < 0:
            raise ValueError("rho penalties must be nonnegative")
        if min(self.mu3, self.mu4, self.mu5, self.mu6) <= 0:
            raise ValueError("mu penalties must be positive")


@dataclass
class EnsvmState:
    w: np.ndarray
    b: float
    a: np.ndarray
    c: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, n_samples, n_features):
        return cls(np.zeros(n_features), 0.0, np.zeros(n_samples),
                   np.zeros(n_features), np.zeros(n_samples), np.zeros(n_features))


@dataclass
class EnkState(EnsvmState):
    u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v: np.ndarray = field(default_factory=lambda: np.zeros(0))
    s: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p: float = 0.0
    q: float = 0.0
    gamma3: float = 0.0
    gamma4: float = 0.0
    gamma5: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma6: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, n_samples, n_features, k1=0, k2=0):
        base = EnsvmState.zeros(n_samples, n_features)
        return cls(base.w, base.b, base.a, base.c, base.gamma1, base.gamma2, 0,
                   np.zeros(k1), np.zeros(k2), np.zeros(k1), np.zeros(k2),
                   0.0, 0.0, 0.0, 0.0, np.zeros(k1), np.zeros(k2))


@dataclass
class AdmmOutcome:
    state: EnsvmState
    reason: str
    objective: float
    support: np.ndarray
    residuals: dict


def support_of(state):
    """Feature support: the exact nonzeros of the soft-thresholded block."""
    return np.nonzero(state.c)[0]


def transition_measure(w_old, w_new):
    """Relative iterate change ||w+ - w|| / max(||w||, 1) for the handoff test."""
    return float(np.linalg.norm(w_new - w_old) / max(np.linalg.norm(w_old), 1.0))


def ensvm_objective(w, b, data, params):
    """Averaged hinge loss plus elastic-net regularization at (w, b)."""
    margins = 1.0 - data.y * (data.X @ w + b)
    hinge = np.maximum(margins, 0.0).sum() / data.n_samples
    return (hinge + params.lambda1 * np.abs(w).sum()
            + 0.5 * params.lambda2 * float(w @ w))


def enk_objective(w, b, u, v, data, knowledge, params):
    """Knowledge-penalized elastic-net objective at (w, b, u, v)."""
    obj = ensvm_objective(w, b, data, params)
    if knowledge.k1 > 0:
        r = knowledge.B.T @ u + w
        obj += 0.5 * params.rho1 * float(r @ r)
        obj += params.rho2 * max(0.0, float(knowledge.d @ u) - b + 1.0)
    if knowledge.k2 > 0:
        r = knowledge.D.T @ v - w
        obj += 0.5 * params.rho3 * float(r @ r)
        obj += params.rho4 * max(0.0, float(knowledge.g @ v) + b + 1.0)
    return obj


class _EnsvmWorkspace:
    """Per-run cache: the (w, b) operator and its Jacobi preconditioner."""

    def __init__(self, data, params, kappa1, kappa2):
        self.operator, self.precond = wb_block_system(
            data.X, params.mu1, kappa1, kappa2)


def _solve_wb(state, data, params, workspace, rhs_w, rhs_b):
    rhs = np.concatenate([rhs_w, [rhs_b]])
    x0 = np.concatenate([state.w, [state.b]])
    result = pcg_solve(workspace.operator, rhs, workspace.precond,
                       tol=params.pcg_tol, max_iter=params.pcg_max_iter, x0=x0)
    return result.x[:-1], float(result.x[-1])


def _margin_term(data, w, b):
    return data.y * (data.X @ w + b)


def admm_ensvm_step(state, data, params, workspace=None):
    """One sweep of the elastic-net SVM splitting updates."""
    if workspace is None:
        workspace = _EnsvmWorkspace(data, params, params.lambda2 + params.mu2, 0.0)
    X, y, N = data.X, data.y, data.n_samples

    h = y * (state.gamma1 + params.mu1 * (1.0 - state.a))
    rhs_w = X.T @ h - state.gamma2 + params.mu2 * state.c
    rhs_b = float(h.sum())
    w, b = _solve_wb(state, data, params, workspace, rhs_w, rhs_b)

    yscore = _margin_term(data, w, b)
    a = hinge_prox(1.0 / (N * params.mu1),
                   1.0 + state.gamma1 / params.mu1 - yscore)
    c = soft_threshold(params.lambda1 / params.mu2,
                       state.gamma2 / params.mu2 + w)
    gamma1 = state.gamma1 + params.mu1 * (1.0 - yscore - a)
    gamma2 = state.gamma2 + params.mu2 * (w - c)

    new = EnsvmState(w, b, a, c, gamma1, gamma2, state.iteration + 1)
    if not np.isfinite(ensvm_objective(w, b, data, params)):
        raise FloatingPointError(
            f"non-finite objective at iteration {new.iteration}")
    return new


def _ensvm_residuals(state, data):
    feas_a = np.linalg.norm(state.a - (1.0 - _margin_term(data, state.w, state.b)))
    feas_c = np.linalg.norm(state.c - state.w)
    return {"feas_margin": float(feas_a), "feas_weight": float(feas_c)}


class _EnkWorkspace(_EnsvmWorkspace):
    """Adds the cached Cholesky factors of the two rule subsystems."""

    def __init__(self, data, knowledge, params):
        kappa1 = params.lambda2 + params.mu2
        kappa2 = 0.0
        if knowledge.k1 > 0:
            kappa1 += params.rho1
            kappa2 += params.mu3
        if knowledge.k2 > 0:
            kappa1 += params.rho3
            kappa2 += params.mu4
        super().__init__(data, params, kappa1, kappa2)
        self.u_factor = None
        self.v_factor = None
        if knowledge.k1 > 0:
            B, d = knowledge.B, knowledge.d
            M = (params.rho1 * (B @ B.T).toarray()
                 + params.mu3 * np.outer(d, d)
                 + params.mu5 * np.eye(knowledge.k1))
            self.u_factor = CholeskyFactor(M)
        if knowledge.k2 > 0:
            D, g = knowledge.D, knowledge.g
            M = (params.rho3 * (D @ D.T).toarray()
                 + params.mu4 * np.outer(g, g)
                 + params.mu6 * np.eye(knowledge.k2))
            self.v_factor = CholeskyFactor(M)


def admm_enk_step(state, data, knowledge, params, workspace=None):
    """One sweep of the knowledge-augmented splitting updates.

    An empty rule side skips its subproblem entirely, so with no rules at all
    the iterates coincide with :func:`admm_ensvm_step` exactly.
    """
    if workspace is None:
        workspace = _EnkWorkspace(data, knowledge, params)
    X, y, N = data.X, data.y, data.n_samples
    k1, k2 = knowledge.k1, knowledge.k2
    B, d = knowledge.B, knowledge.d
    D, g = knowledge.D, knowledge.g

    h = y * (state.gamma1 + params.mu1 * (1.0 - state.a))
    rhs_w = X.T @ h - state.gamma2 + params.mu2 * state.c
    rhs_b = float(h.sum())
    if k1 > 0:
        rhs_w -= params.rho1 * (B.T @ state.u)
        rhs_b += state.gamma3 + params.mu3 * (float(d @ state.u) + 1.0 - state.q)
    if k2 > 0:
        rhs_w += params.rho3 * (D.T @ state.v)
        rhs_b -= state.gamma4 + params.mu4 * (float(g @ state.v) + 1.0 - state.p)
    w, b = _solve_wb(state, data, params, workspace, rhs_w, rhs_b)

    u, s = state.u, state.s
    if k1 > 0:
        r_u = (-params.rho1 * (B @ w) + params.mu3 * d * b
               + params.mu3 * d * (state.q - 1.0) - d * state.gamma3
               + state.gamma5 + params.mu5 * state.s)
        u = workspace.u_factor.solve(r_u)
        s = np.maximum(0.0, u - state.gamma5 / params.mu5)
    v, t = state.v, state.t
    if k2 > 0:
        r_v = (params.rho3 * (D @ w) - params.mu4 * g * b
               - g * state.gamma4 - params.mu4 * g * (1.0 - state.p)
               + state.gamma6 + params.mu6 * state.t)
        v = workspace.v_factor.solve(r_v)
        t = np.maximum(0.0, v - state.gamma6 / params.mu6)

    yscore = _margin_term(data, w, b)
    a = hinge_prox(1.0 / (N * params.mu1),
                   1.0 + state.gamma1 / params.mu1 - yscore)
    c = soft_threshold(params.lambda1 / params.mu2,
                       state.gamma2 / params.mu2 + w)

    # the scalar prox updates read the rule activations just computed;
    # lagging both sides of the u/q (v/p) coupling is unstable
    q = state.q
    if k1 > 0:
        q = hinge_prox(params.rho2 / params.mu3,
                       float(d @ u) - b + 1.0 + state.gamma3 / params.mu3)
    p = state.p
    if k2 > 0:
        p = hinge_prox(params.rho4 / params.mu4,
                       float(g @ v) + b + 1.0 + state.gamma4 / params.mu4)

    gamma1 = state.gamma1 + params.mu1 * (1.0 - yscore - a)
    gamma2 = state.gamma2 + params.mu2 * (w - c)
    gamma3, gamma5 = state.gamma3, state.gamma5
    if k1 > 0:
        gamma3 = state.gamma3 + params.mu3 * (float(d @ u) - b + 1.0 - q)
        gamma5 = state.gamma5 + params.mu5 * (s - u)
    gamma4, gamma6 = state.gamma4, state.gamma6
    if k2 > 0:
        gamma4 = state.gamma4 + params.mu4 * (float(g @ v) + b + 1.0 - p)
        gamma6 = state.gamma6 + params.mu6 * (t - v)

    new = EnkState(w, b, a, c, gamma1, gamma2, state.iteration + 1,
                   u, v, s, t, p, q, gamma3, gamma4, gamma5, gamma6)
    if not np.isfinite(enk_objective(w, b, u, v, data, knowledge, params)):
        raise FloatingPointError(
            f"non-finite objective at iteration {new.iteration}")
    return new


def _enk_residuals(state, data, knowledge):
    res = _ensvm_residuals(state, data)
    if knowledge.k1 > 0:
        res["feas_u"] = float(np.linalg.norm(state.u - state.s))
        res["feas_q"] = abs(float(knowledge.d @ state.u) - state.b + 1.0 - state.q)
    if knowledge.k2 > 0:
        res["feas_v"] = float(np.linalg.norm(state.v - state.t))
        res["feas_p"] = abs(float(knowledge.g @ state.v) + state.b + 1.0 - state.p)
    return res


def _run_loop(state, params, step, objective, residuals, stop_on_transition,
              callback):
    obj_old = objective(state)
    reason = REASON_ITERATION_LIMIT
    res = residuals(state)
    for _ in range(params.max_iter):
        w_old = state.w
        state = step(state)
        obj_new = objective(state)
        res = residuals(state)

        delta_w = np.linalg.norm(state.w - w_old)
        w_old_norm = np.linalg.norm(w_old)
        rel_transition = transition_measure(w_old, state.w)
        obj_change = abs(obj_new - obj_old) / max(1.0, abs(obj_old))

        if callback is not None:
            callback({"iteration": state.iteration, "objective": obj_new,
                      "rel_w_change": rel_transition,
                      "support_size": int(np.count_nonzero(state.c)), **res})

        if stop_on_transition and rel_transition < params.eps_tol:
            reason = REASON_TRANSITION
            break
        feasible = all(r <= params.eps1 for r in res.values())
        # relative w-change in multiplicative form to stay defined at w = 0
        w_settled = delta_w <= params.eps2 * w_old_norm
        if obj_change <= params.eps1 and feasible and w_settled:
            reason = REASON_CONVERGED
            break
        obj_old = obj_new
    return state, reason, objective(state), res


def admm_ensvm_run(data, params, init=None, stop_on_transition=False,
                   callback=None):
    """Iterate the elastic-net SVM splitting until transition, convergence,
    or the iteration cap; see the module docstring for the criteria."""
    params.validate()
    if data.y is None:
        raise ValueError("training requires labels")
    if init is None:
        init = EnsvmState.zeros(data.n_samples, data.n_features)
    if init.w.shape[0] != data.n_features or init.a.shape[0] != data.n_samples:
        raise ValueError("initial state dimensions do not match the data")
    workspace = _EnsvmWorkspace(data, params, params.lambda2 + params.mu2, 0.0)
    state, reason, obj, res = _run_loop(
        init, params, lambda st: admm_ensvm_step(st, data, params, workspace),
        lambda st: ensvm_objective(st.w, st.b, data, params),
        lambda st: _ensvm_residuals(st, data),
        stop_on_transition, callback)
    return AdmmOutcome(state, reason, obj, support_of(state), res)


def admm_enk_run(data, knowledge, params, init=None, stop_on_transition=False,
                 callback=None):
    """Knowledge-augmented analogue of :func:`admm_ensvm_run`."""
    params.validate()
    if data.y is None:
        raise ValueError("training requires labels")
    if knowledge.n_features != data.n_features:
        raise ValueError("knowledge feature dimension does not match the data")
    knowledge.check_row_rank()
    if init is None:
        init = EnkState.zeros(data.n_samples, data.n_features,
                              knowledge.k1, knowledge.k2)
    if (init.u.shape[0] != knowledge.k1 or init.v.shape[0] != knowledge.k2
            or init.w.shape[0] != data.n_features):
        raise ValueError("initial state dimensions do not match the problem")
    workspace = _EnkWorkspace(data, knowledge, params)
    state, reason, obj, res = _run_loop(
        init, params,
        lambda st: admm_enk_step(st, data, knowledge, params, workspace),
        lambda st: enk_objective(st.w, st.b, st.u, st.v, data, knowledge, params),
        lambda st: _enk_residuals(st, data, knowledge),
        stop_on_transition, callback)
    return AdmmOutcome(state, reason, obj, support_of(state), res)
