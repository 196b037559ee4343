import numpy as np
import pytest
import scipy.sparse as sp

from hybridsvm.data import DataMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240913)


def random_sparse(rng, n_rows, n_cols, density=0.4):
    mask = rng.random((n_rows, n_cols)) < density
    dense = np.where(mask, rng.normal(size=(n_rows, n_cols)), 0.0)
    return sp.csr_matrix(dense)


def toy_two_sample():
    """x1=(1,0) labeled +1 and x2=(-1,0) labeled -1."""
    X = sp.csr_matrix(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    return DataMatrix(X, np.array([1.0, -1.0]), 2)


def separable_data(rng, n_samples=40, n_features=6, margin=0.5):
    """Linearly separable samples with a comfortable margin."""
    w = rng.normal(size=n_features)
    w /= np.linalg.norm(w)
    rows, labels = [], []
    while len(rows) < n_samples:
        x = rng.normal(size=n_features)
        s = x @ w
        if abs(s) >= margin:
            rows.append(x)
            labels.append(1.0 if s > 0 else -1.0)
    if len(set(labels)) < 2:
        return separable_data(rng, n_samples, n_features, margin)
    return DataMatrix(sp.csr_matrix(np.array(rows)), np.array(labels), n_features)
