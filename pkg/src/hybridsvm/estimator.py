"""Scikit-learn estimator wrapping the two-phase trainer, so the solver
composes with pipelines, grid search, and the rest of the ecosystem."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .admm import EnkParams
from .data import DataMatrix
from .driver import (MODE_ADMM_ONLY, MODE_HIPAD, MODE_HIPAD_ENK, TrainConfig,
                     train)
from .qp import SvmIpmConfig

_MODES = ("auto", MODE_HIPAD, MODE_HIPAD_ENK, MODE_ADMM_ONLY)


class TwoPhaseSvmClassifier(BaseEstimator, ClassifierMixin):
    """Sparse linear SVM trained by ADMM feature selection plus an
    interior-point refinement phase.

    Parameters
    ----------
    lambda1 : float, default=0.06
        L1 weight; drives feature sparsity in the first phase.
    lambda2 : float, default=1.0
        Ridge weight; also sets the default second-phase hinge penalty
        1/(N*lambda2) unless ``svm_cost`` overrides it.
    rho : float, default=70.0
        Shared weight of the four knowledge penalties.
    mu : float, default=1.0
        Shared augmented-Lagrangian penalty for all splitting constraints.
    eps1, eps2 : float
        Full-convergence tolerances (objective/feasibility, iterate change).
    eps_tol : float, default=1e-4
        Relative-iterate transition threshold that ends phase 1 early.
    max_iter : int, default=2000
        Phase-1 iteration cap.
    mode : {'auto', 'hipad', 'hipad-enk', 'admm-only'}, default='auto'
        'auto' picks the knowledge-aware path when rules are supplied to
        ``fit``; 'admm-only' skips the second phase entirely.
    svm_cost : float or None
        Explicit second-phase hinge penalty.
    kkt_tol : float, default=1e-8
        Interior-point KKT tolerance.
    ipm_max_iter : int, default=100
        Interior-point iteration cap.

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
    coef_ : ndarray of shape (1, n_features)
    intercept_ : ndarray of shape (1,)
    support_ : ndarray of selected feature indices
    model_ : the underlying :class:`~hybridsvm.model.SvmModel`
    n_iter_ : phase-1 iteration count
    """

    def __init__(self, lambda1=0.06, lambda2=1.0, rho=70.0, mu=1.0,
                 eps1=1e-5, eps2=1e-3, eps_tol=1e-4, max_iter=2000,
                 mode="auto", svm_cost=None, kkt_tol=1e-8, ipm_max_iter=100):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.rho = rho
        self.mu = mu
        self.eps1 = eps1
        self.eps2 = eps2
        self.eps_tol = eps_tol
        self.max_iter = max_iter
        self.mode = mode
        self.svm_cost = svm_cost
        self.kkt_tol = kkt_tol
        self.ipm_max_iter = ipm_max_iter

    def _config(self):
        params = EnkParams.shared(
            rho=self.rho, knowledge_mu=self.mu,
            lambda1=self.lambda1, lambda2=self.lambda2,
            mu1=self.mu, mu2=self.mu,
            eps1=self.eps1, eps2=self.eps2, eps_tol=self.eps_tol,
            max_iter=self.max_iter)
        ipm = SvmIpmConfig(svm_cost=self.svm_cost, kkt_tol=self.kkt_tol,
                           max_iter=self.ipm_max_iter)
        return TrainConfig(admm=params, ipm=ipm,
                           skip_phase2=self.mode == MODE_ADMM_ONLY)

    def fit(self, X, y, knowledge=None, callback=None):
        """Fit on (X, y); ``knowledge`` optionally carries the rule set."""
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        X, y = check_X_y(X, y, accept_sparse="csr")
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError("this classifier is binary; got "
                             f"{self.classes_.size} classes")
        y_signed = np.where(y == self.classes_[1], 1.0, -1.0)
        data = DataMatrix.from_arrays(X, y_signed)

        if self.mode == MODE_HIPAD and knowledge is not None and not knowledge.is_empty:
            raise ValueError("mode='hipad' does not accept knowledge; use "
                             "'auto' or 'hipad-enk'")
        if self.mode == MODE_HIPAD_ENK and (knowledge is None or knowledge.is_empty):
            raise ValueError("mode='hipad-enk' requires a knowledge set")
        use_knowledge = knowledge if self.mode != MODE_HIPAD else None

        self.model_ = train(data, self._config(), knowledge=use_knowledge,
                            callback=callback)
        coef = np.zeros(data.n_features)
        coef[self.model_.support] = self.model_.weights
        self.coef_ = coef.reshape(1, -1)
        self.intercept_ = np.array([self.model_.bias])
        self.support_ = self.model_.support.copy()
        self.n_iter_ = self.model_.phase1_iters
        self.n_features_in_ = data.n_features
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, accept_sparse="csr")
        return self.model_.decision_function(X)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores >= 0.0).astype(int)]
