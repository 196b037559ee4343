"""Primal-dual interior-point solver for convex QPs, plus assemblers for the
SVM dual and the knowledge-penalized SVM primal.

The solver is a Mehrotra-style predictor-corrector on problems of the form

    min 0.5 x'Hx + f'x   s.t.  A x = b,  l <= x <= u,

where individual bounds may be infinite.  Newton steps solve the dense
augmented system; by the time the second phase runs, the feature space has
been cut down far enough that dense factorizations are cheap.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .linalg import SymOperator
from .model import SvmModel

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iter"
STATUS_NUMERICAL = "numerical-failure"

_FRACTION_TO_BOUNDARY = 0.995


class DegenerateModelError(Exception):
    """No support vector carries weight; the recovered model is vacuous."""


@dataclass
class QpProblem:
    """Convex QP data: PSD quadratic (dense or operator), linear term,
    optional equality constraints, and per-variable bounds."""

    quadratic: object  # ndarray or SymOperator
    linear: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float).ravel()
        n = self.linear.size
        if isinstance(self.quadratic, np.ndarray):
            H = np.asarray(self.quadratic, dtype=float)
            if H.shape != (n, n):
                raise ValueError("quadratic term has wrong shape")
            scale = max(1.0, np.abs(H).max())
            if np.abs(H - H.T).max() > 1e-12 * scale:
                raise ValueError("quadratic term must be symmetric")
            self.quadratic = H
        elif isinstance(self.quadratic, SymOperator):
            if self.quadratic.dim != n:
                raise ValueError("quadratic operator has wrong dimension")
        else:
            raise TypeError("quadratic must be an ndarray or SymOperator")
        if self.A_eq is not None:
            if sp.issparse(self.A_eq):
                self.A_eq = self.A_eq.toarray()
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
            if self.A_eq.shape != (self.b_eq.size, n):
                raise ValueError("equality constraint shapes are inconsistent")
            if self.b_eq.size > n:
                raise ValueError("more equality constraints than variables")
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.broadcast_to(np.asarray(self.lower, dtype=float),
                                           (n,)).copy())
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.broadcast_to(np.asarray(self.upper, dtype=float),
                                           (n,)).copy())
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self):
        return self.linear.size

    @property
    def n_eq(self):
        return 0 if self.A_eq is None else self.A_eq.shape[0]

    def dense_quadratic(self):
        if isinstance(self.quadratic, np.ndarray):
            return self.quadratic
        return self.quadratic.to_dense()

    def apply_quadratic(self, x):
        if isinstance(self.quadratic, np.ndarray):
            return self.quadratic @ x
        return self.quadratic(x)

    def objective(self, x):
        return 0.5 * float(x @ self.apply_quadratic(x)) + float(self.linear @ x)


@dataclass
class QpSolution:
    primal: np.ndarray
    eq_multipliers: np.ndarray
    lower_multipliers: np.ndarray
    upper_multipliers: np.ndarray
    status: str
    residual_primal: float
    residual_dual: float
    residual_comp: float
    iterations: int
    objective: float


@dataclass
class SvmIpmConfig:
    """Second-phase settings: hinge penalty (the box bound of the dual) and
    the interior-point stopping controls."""

    svm_cost: float | None = None
    kkt_tol: float = 1e-8
    max_iter: int = 100

    def require_cost(self):
        if self.svm_cost is None or self.svm_cost <= 0:
            raise ValueError("svm_cost must be set to a positive value")
        return float(self.svm_cost)


def _max_step(values, deltas):
    """Largest step in [0, 1] keeping values + step*deltas >= 0."""
    shrink = deltas < 0
    if not np.any(shrink):
        return 1.0
    return min(1.0, float(np.min(values[shrink] / -deltas[shrink])))


def ipm_solve(qp, warm_start=None, cfg=None):
    """Solve a convex QP to the configured KKT tolerance.

    Returns optimal status only when primal feasibility, dual feasibility,
    and mean complementarity are all within ``cfg.kkt_tol``.
    """
    cfg = cfg or SvmIpmConfig()
    tol = cfg.kkt_tol
    H = qp.dense_quadratic()
    f = qp.linear
    n, p = qp.n, qp.n_eq
    A = qp.A_eq if p else np.zeros((0, n))
    b = qp.b_eq if p else np.zeros(0)
    l, u = qp.lower, qp.upper
    low_mask = np.isfinite(l)
    upp_mask = np.isfinite(u)
    n_comp = int(low_mask.sum() + upp_mask.sum())

    x = np.zeros(n)
    both = low_mask & upp_mask
    x[both] = 0.5 * (l[both] + u[both])
    only_l = low_mask & ~upp_mask
    x[only_l] = l[only_l] + 1.0
    only_u = upp_mask & ~low_mask
    x[only_u] = u[only_u] - 1.0
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float).ravel()
        if w.size != n:
            raise ValueError("warm start has wrong length")
        gap = np.where(both, u - l, 1.0)
        margin = 0.01 * gap
        x = np.clip(w, np.where(low_mask, l + margin, -np.inf),
                    np.where(upp_mask, u - margin, np.inf))
    y = np.zeros(p)
    zl = np.ones(int(low_mask.sum()))
    zu = np.ones(int(upp_mask.sum()))

    def residuals(x, y, zl, zu):
        r_d = qp.apply_quadratic(x) + f
        if p:
            r_d -= A.T @ y
        r_d[low_mask] -= zl
        r_d[upp_mask] += zu
        r_p = (A @ x - b) if p else np.zeros(0)
        sl = x[low_mask] - l[low_mask]
        su = u[upp_mask] - x[upp_mask]
        comp = float(sl @ zl + su @ zu)
        mu = comp / n_comp if n_comp else 0.0
        return r_d, r_p, sl, su, mu

    reg = 1e-12
    iterations = 0
    status = STATUS_MAX_ITER
    for _ in range(cfg.max_iter):
        r_d, r_p, sl, su, mu = residuals(x, y, zl, zu)
        res_p = float(np.abs(r_p).max()) if p else 0.0
        res_d = float(np.abs(r_d).max())
        if res_p <= tol and res_d <= tol and mu <= tol:
            status = STATUS_OPTIMAL
            break
        if n_comp and mu <= 0.0:
            break

        sigma_diag = np.zeros(n)
        sigma_diag[low_mask] += zl / sl
        sigma_diag[upp_mask] += zu / su
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H
        K[:n, :n][np.diag_indices(n)] += sigma_diag + reg
        if p:
            K[:n, n:] = A.T
            K[n:, :n] = A
            K[n:, n:][np.diag_indices(p)] -= reg
        try:
            factor = scipy.linalg.lu_factor(K)
        except (scipy.linalg.LinAlgError, ValueError):
            status = STATUS_NUMERICAL
            break

        def newton(cl, cu):
            rhs = np.empty(n + p)
            rhs[:n] = -r_d
            rhs[:n][low_mask] += cl / sl
            rhs[:n][upp_mask] -= cu / su
            rhs[n:] = -r_p
            sol = scipy.linalg.lu_solve(factor, rhs)
            dx = sol[:n]
            dy = -sol[n:]
            dzl = (cl - zl * dx[low_mask]) / sl
            dzu = (cu + zu * dx[upp_mask]) / su
            return dx, dy, dzl, dzu

        # predictor: pure Newton step toward complementarity zero
        cl = -sl * zl
        cu = -su * zu
        dx, dy, dzl, dzu = newton(cl, cu)
        if not np.all(np.isfinite(dx)):
            status = STATUS_NUMERICAL
            break
        ap = min(_max_step(sl, dx[low_mask]), _max_step(su, -dx[upp_mask]))
        ad = min(_max_step(zl, dzl), _max_step(zu, dzu))
        if n_comp:
            mu_aff = (float((sl + ap * dx[low_mask]) @ (zl + ad * dzl))
                      + float((su - ap * dx[upp_mask]) @ (zu + ad * dzu))) / n_comp
            sigma = min(1.0, max(0.0, (mu_aff / mu)) ** 3)
            # corrector: recenter and absorb the second-order products
            cl = sigma * mu - sl * zl - dx[low_mask] * dzl
            cu = sigma * mu - su * zu + dx[upp_mask] * dzu
            dx, dy, dzl, dzu = newton(cl, cu)
            ap = min(_max_step(sl, dx[low_mask]), _max_step(su, -dx[upp_mask]))
            ad = min(_max_step(zl, dzl), _max_step(zu, dzu))
        ap = min(1.0, _FRACTION_TO_BOUNDARY * ap)
        ad = min(1.0, _FRACTION_TO_BOUNDARY * ad)
        if n_comp == 0:
            ap = ad = 1.0
        x = x + ap * dx
        y = y + ad * dy
        zl = zl + ad * dzl
        zu = zu + ad * dzu
        iterations += 1

    r_d, r_p, sl, su, mu = residuals(x, y, zl, zu)
    res_p = float(np.abs(r_p).max()) if p else 0.0
    res_d = float(np.abs(r_d).max())
    if status != STATUS_NUMERICAL:
        status = (STATUS_OPTIMAL
                  if res_p <= tol and res_d <= tol and mu <= tol
                  else STATUS_MAX_ITER)
    z_lower = np.zeros(n)
    z_upper = np.zeros(n)
    z_lower[low_mask] = zl
    z_upper[upp_mask] = zu
    return QpSolution(x, y, z_lower, z_upper, status, res_p, res_d, mu,
                      iterations, qp.objective(x))


# ---------------------------------------------------------------------------
# SVM assemblers


def assemble_svm_dual(data, cfg):
    """Dual soft-margin SVM as a box/equality QP over the sample weights.

    The quadratic term applies the label-signed Gram matrix matrix-free;
    the dense form is materialized only inside the Newton solver.
    """
    cost = cfg.require_cost()
    if data.y is None:
        raise ValueError("dual assembly requires labels")
    X, y = data.X, data.y
    N = data.n_samples

    def matvec(alpha):
        return y * (X @ (X.T @ (y * alpha)))

    def dense():
        return (X @ X.T).toarray() * np.outer(y, y)

    quad = SymOperator(N, matvec, dense_fn=dense)
    return QpProblem(quad, -np.ones(N), A_eq=y.reshape(1, N), b_eq=np.zeros(1),
                     lower=np.zeros(N), upper=np.full(N, cost))


def dual_warm_start(data, w, b, cost):
    """Margin-violation proxy for the dual weights, blended toward the box
    center so the interior-point solver starts strictly inside."""
    proxy = cost * np.clip(1.0 - data.y * (data.X @ w + b), 0.0, 1.0)
    return 0.9 * proxy + 0.1 * (0.5 * cost)


def recover_primal(solution, data, cfg):
    """Map the optimal dual weights back to a primal (w, b) model.

    w is the support-vector sum; b averages the complementary-slackness
    values over free support vectors, falling back to the midpoint of the
    interval implied by the bound-active samples.  The returned model lives
    in the data's own feature space; callers remap to original indices.
    """
    if solution.status != STATUS_OPTIMAL:
        raise ValueError(f"cannot recover a model from status {solution.status!r}")
    cost = cfg.require_cost()
    alpha = solution.primal
    X, y = data.X, data.y
    sv_tol = 1e-6 * cost
    sv = alpha > sv_tol
    if not np.any(sv):
        raise DegenerateModelError("all dual weights are zero")
    w = X.T @ (alpha * y)
    scores = X @ w
    free = sv & (alpha < cost - sv_tol)
    if np.any(free):
        b = float(np.mean(y[free] - scores[free]))
    else:
        lows, highs = [], []
        for i in range(data.n_samples):
            if alpha[i] <= sv_tol:  # margin >= 1
                (lows if y[i] > 0 else highs).append(y[i] - scores[i])
            elif alpha[i] >= cost - sv_tol:  # margin <= 1
                (highs if y[i] > 0 else lows).append(y[i] - scores[i])
        lo = max(lows) if lows else min(highs)
        hi = min(highs) if highs else max(lows)
        b = 0.5 * (lo + hi)
    return SvmModel(n_features=data.n_features,
                    support=np.arange(data.n_features),
                    weights=np.asarray(w, dtype=float), bias=b,
                    provenance="svm-dual")


def assemble_ksvm_primal(data, knowledge, warm, params, cfg):
    """Knowledge-penalized SVM primal as an equality-constrained QP.

    Stacked variable: (w, b, xi, u, v, eta_u, eta_v, margin slacks, rule
    slacks); inequality families become equalities through the slack blocks
    and every variable except (w, b) is bounded below by zero.  Returns the
    problem together with a warm-start vector built from the first-phase
    iterate, with the rule activations seeded at their constraint values.
    """
    cost = cfg.require_cost()
    if data.y is None:
        raise ValueError("primal assembly requires labels")
    if knowledge.n_features != data.n_features:
        raise ValueError("knowledge dimension does not match the reduced data")
    X, y = data.X, data.y
    N, m = data.n_samples, data.n_features
    k1, k2 = knowledge.k1, knowledge.k2

    sizes = [m, 1, N, k1, k2, 1 if k1 else 0, 1 if k2 else 0,
             N, 1 if k1 else 0, 1 if k2 else 0]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    (ow, ob, oxi, ou, ov, oeu, oev, ozm, ozu, ozv) = offs[:-1]
    n = int(offs[-1])

    H = np.zeros((n, n))
    wslice = slice(ow, ow + m)
    H[wslice, wslice] = np.eye(m) * (1.0 + (params.rho1 if k1 else 0.0)
                                     + (params.rho3 if k2 else 0.0))
    if k1:
        Bd = knowledge.B.toarray()
        H[wslice, ou:ou + k1] = params.rho1 * Bd.T
        H[ou:ou + k1, wslice] = params.rho1 * Bd
        H[ou:ou + k1, ou:ou + k1] = params.rho1 * (Bd @ Bd.T)
    if k2:
        Dd = knowledge.D.toarray()
        H[wslice, ov:ov + k2] = -params.rho3 * Dd.T
        H[ov:ov + k2, wslice] = -params.rho3 * Dd
        H[ov:ov + k2, ov:ov + k2] = params.rho3 * (Dd @ Dd.T)

    f = np.zeros(n)
    f[oxi:oxi + N] = cost
    if k1:
        f[oeu] = params.rho2
    if k2:
        f[oev] = params.rho4

    n_rows = N + (1 if k1 else 0) + (1 if k2 else 0)
    A = np.zeros((n_rows, n))
    rhs = np.empty(n_rows)
    A[:N, wslice] = (X.multiply(y[:, None])).toarray()
    A[:N, ob] = y
    A[:N, oxi:oxi + N] = np.eye(N)
    A[:N, ozm:ozm + N] = -np.eye(N)
    rhs[:N] = 1.0
    row = N
    if k1:
        A[row, ob] = -1.0
        A[row, ou:ou + k1] = knowledge.d
        A[row, oeu] = -1.0
        A[row, ozu] = 1.0
        rhs[row] = -1.0
        row += 1
    if k2:
        A[row, ob] = 1.0
        A[row, ov:ov + k2] = knowledge.g
        A[row, oev] = -1.0
        A[row, ozv] = 1.0
        rhs[row] = -1.0

    lower = np.zeros(n)
    lower[wslice] = -np.inf
    lower[ob] = -np.inf

    warm_x = np.zeros(n)
    warm_x[wslice] = warm.w
    warm_x[ob] = warm.b
    margins = y * (X @ warm.w + warm.b)
    xi = np.maximum(0.0, 1.0 - margins)
    warm_x[oxi:oxi + N] = xi
    warm_x[ozm:ozm + N] = margins - 1.0 + xi
    if k1:
        u0 = np.maximum(warm.u, 0.0)
        warm_x[ou:ou + k1] = u0
        eta_u = float(knowledge.d @ u0) - warm.b + 1.0
        warm_x[oeu] = max(0.0, eta_u)
        warm_x[ozu] = warm_x[oeu] - eta_u
    if k2:
        v0 = np.maximum(warm.v, 0.0)
        warm_x[ov:ov + k2] = v0
        eta_v = float(knowledge.g @ v0) + warm.b + 1.0
        warm_x[oev] = max(0.0, eta_v)
        warm_x[ozv] = warm_x[oev] - eta_v

    qp = QpProblem(H, f, A_eq=A, b_eq=rhs, lower=lower, upper=None)
    return qp, warm_x


def hinge_optimal_bias(scores, y):
    """Bias minimizing the training hinge sum(max(0, 1 - y*(score + b))).

    The objective is convex piecewise linear in b with slope
    -(active positives) + (active negatives); the minimizer is the interval
    where the slope crosses zero.  On a zero-slope plateau, ties resolve to
    the squared-hinge minimizer over the plateau's active set (clipped to
    the plateau), which balances the class-conditional margins.
    """
    pos_thr = np.sort(1.0 - scores[y > 0])   # positive i active iff b < thr
    neg_thr = np.sort(-1.0 - scores[y < 0])  # negative i active iff b > thr
    if pos_thr.size == 0 or neg_thr.size == 0:
        raise ValueError("bias recovery needs both classes")
    points = np.unique(np.concatenate([pos_thr, neg_thr]))

    def slope_right_of(b):
        active_pos = pos_thr.size - np.searchsorted(pos_thr, b, side="right")
        active_neg = np.searchsorted(neg_thr, b, side="right")
        return -active_pos + active_neg

    slopes = np.array([slope_right_of(b) for b in points])
    first = int(np.nonzero(slopes >= 0)[0][0])
    if slopes[first] > 0:
        # slope jumps across zero at this breakpoint
        return float(points[first])
    lo = points[first]
    hi = points[first + 1] if first + 1 < points.size else points[first]
    mid = 0.5 * (lo + hi)
    active = (y > 0) & (scores + mid < 1.0) | (y < 0) & (scores + mid > -1.0)
    if not np.any(active):
        return float(mid)
    b_ls = float((y[active].sum() - scores[active].sum()) / active.sum())
    return float(min(max(b_ls, lo), hi))


def ksvm_primal_solution(qp_solution, data):
    """Extract (w, b) from a solved knowledge-SVM primal.

    The margin system pins the bias only when some training margin is tight;
    otherwise the QP centers b by the rule-penalty economics, an artifact of
    the rule thresholds that can sit far from the hinge-optimal value.  The
    bias is therefore re-derived as the minimizer of the training hinge at
    the returned weights, the same complementary-slackness information the
    dual recovery uses.
    """
    m = data.n_features
    x = qp_solution.primal
    w = x[:m].copy()
    return w, hinge_optimal_bias(data.X @ w, data.y)
