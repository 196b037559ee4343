"""Trained linear classifier with a sparse weight map back to the original
feature space, plus its text serialization."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class SvmModel:
    """Weights live on ``support`` (ascending original feature indices);
    any feature outside the support contributes zero to the decision value.
    """

    n_features: int
    support: np.ndarray
    weights: np.ndarray
    bias: float
    provenance: str = "hipad"
    phase1_iters: int = 0
    phase2_iters: int = 0
    phase1_time: float = 0.0
    phase2_time: float = 0.0
    phase1_reason: str = ""
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=int)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.support.shape != self.weights.shape:
            raise ValueError("support and weights must align")
        if self.support.size and np.any(np.diff(self.support) <= 0):
            order = np.argsort(self.support, kind="stable")
            self.support = self.support[order]
            self.weights = self.weights[order]

    @property
    def support_size(self):
        return int(self.support.size)

    @property
    def total_time(self):
        return self.phase1_time + self.phase2_time

    def weight_map(self):
        return dict(zip(self.support.tolist(), self.weights.tolist()))

    def decision_function(self, X):
        """w'x + b for each row; indices absent from either side count as 0."""
        if sp.issparse(X):
            X = X.tocsr()
        else:
            X = np.atleast_2d(np.asarray(X, dtype=float))
        n_cols = X.shape[1]
        usable = self.support < n_cols
        scores = np.full(X.shape[0], self.bias)
        if np.any(usable):
            sub = X[:, self.support[usable]]
            scores = scores + sub @ self.weights[usable]
        return np.asarray(scores).ravel()

    def predict(self, X):
        """Labels in {-1, +1}; a decision value of exactly 0 maps to +1."""
        scores = self.decision_function(X)
        return np.where(scores >= 0.0, 1.0, -1.0)

    def remap(self, original_indices, n_original):
        """Re-express a model fitted on a column subset in the original space."""
        original_indices = np.asarray(original_indices, dtype=int)
        return SvmModel(n_features=int(n_original),
                        support=original_indices[self.support],
                        weights=self.weights.copy(), bias=self.bias,
                        provenance=self.provenance,
                        phase1_iters=self.phase1_iters,
                        phase2_iters=self.phase2_iters,
                        phase1_time=self.phase1_time,
                        phase2_time=self.phase2_time,
                        phase1_reason=self.phase1_reason,
                        warnings=list(self.warnings))


def accuracy_percent(model, data):
    if data.y is None:
        raise ValueError("accuracy requires labels")
    return 100.0 * float(np.mean(model.predict(data.X) == data.y))


def write_model(model, path):
    """Text format: one bias line, then ``idx:weight`` lines ascending."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(repr(float(model.bias)) + "\n")
        for idx, wgt in zip(model.support, model.weights):
            fh.write(f"{int(idx)}:{repr(float(wgt))}\n")


def read_model(path):
    from .data import DataFormatError

    support = []
    weights = []
    bias = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if bias is None:
                try:
                    bias = float(line)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}: malformed bias {line!r}") from None
                continue
            try:
                idx_s, val_s = line.split(":", 1)
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: malformed weight line {line!r}") from None
            if support and idx <= support[-1]:
                raise DataFormatError(
                    f"{path}:{lineno}: non-ascending index {idx}")
            support.append(idx)
            weights.append(val)
    if bias is None:
        raise DataFormatError(f"{path}: empty model file")
    n_features = (support[-1] + 1) if support else 0
    return SvmModel(n_features=n_features, support=np.array(support, dtype=int),
                    weights=np.array(weights), bias=bias, provenance="loaded")
