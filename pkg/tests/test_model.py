import numpy as np
import pytest
import scipy.sparse as sp

from hybridsvm.data import DataFormatError, DataMatrix
from hybridsvm.model import (SvmModel, accuracy_percent, read_model,
                             write_model)

from conftest import random_sparse


def make_model(support, weights, bias, m=None):
    support = np.asarray(support, dtype=int)
    n = int(support.max()) + 1 if support.size else 0
    return SvmModel(n_features=m if m is not None else n, support=support,
                    weights=np.asarray(weights, dtype=float), bias=bias)


class TestPrediction:
    def test_positive_margin(self):
        model = make_model([0], [1.0], 0.0, m=3)
        assert model.predict(np.array([[2.0, 5.0, -1.0]]))[0] == 1.0

    def test_constant_negative_model(self):
        model = make_model([], [], -1.0, m=4)
        preds = model.predict(np.eye(4))
        np.testing.assert_array_equal(preds, -np.ones(4))

    def test_tie_resolves_positive(self):
        model = make_model([0], [1.0], 0.0, m=1)
        assert model.predict(np.array([[0.0]]))[0] == 1.0

    def test_extra_input_features_ignored(self, rng):
        model = make_model([1, 3], [2.0, -1.0], 0.5, m=4)
        X4 = rng.normal(size=(6, 4))
        X7 = np.hstack([X4, rng.normal(size=(6, 3))])
        np.testing.assert_array_equal(model.predict(X4), model.predict(X7))

    def test_missing_input_features_contribute_zero(self):
        model = make_model([0, 5], [1.0, 9.0], 0.0, m=6)
        X = np.array([[2.0, 0.0]])  # no column 5
        assert model.decision_function(X)[0] == pytest.approx(2.0)

    def test_sparse_input(self, rng):
        model = make_model([0, 2], [1.0, -2.0], 0.25, m=3)
        X = random_sparse(rng, 5, 3)
        np.testing.assert_allclose(model.decision_function(X),
                                   model.decision_function(X.toarray()))


class TestModelFile:
    def test_two_line_round_trip(self, tmp_path):
        model = make_model([0], [1.5], -0.25, m=1)
        path = tmp_path / "model.txt"
        write_model(model, path)
        assert path.read_text() == "-0.25\n0:1.5\n"
        back = read_model(path)
        assert back.bias == -0.25
        np.testing.assert_array_equal(back.support, [0])
        np.testing.assert_array_equal(back.weights, [1.5])

    def test_empty_model_round_trips(self, tmp_path):
        model = make_model([], [], 0.75, m=10)
        path = tmp_path / "model.txt"
        write_model(model, path)
        back = read_model(path)
        assert back.bias == 0.75
        assert back.support.size == 0

    def test_large_model_bitwise_predictions(self, rng, tmp_path):
        idx = np.sort(rng.choice(10_000, size=400, replace=False))
        model = make_model(idx, rng.normal(size=400), float(rng.normal()),
                           m=10_000)
        path = tmp_path / "model.txt"
        write_model(model, path)
        back = read_model(path)
        X = random_sparse(rng, 30, 10_000, density=0.01)
        np.testing.assert_array_equal(model.decision_function(X),
                                      back.decision_function(X))
        np.testing.assert_array_equal(model.predict(X), back.predict(X))

    def test_malformed_bias_reports_location(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("not-a-number\n")
        with pytest.raises(DataFormatError, match=":1"):
            read_model(path)

    def test_non_ascending_indices_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("0.0\n3:1.0\n1:2.0\n")
        with pytest.raises(DataFormatError, match="non-ascending"):
            read_model(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("")
        with pytest.raises(DataFormatError, match="empty"):
            read_model(path)


def test_model_normalizes_support_order():
    model = SvmModel(n_features=5, support=np.array([3, 1]),
                     weights=np.array([0.5, -0.5]), bias=0.0)
    np.testing.assert_array_equal(model.support, [1, 3])
    np.testing.assert_array_equal(model.weights, [-0.5, 0.5])


def test_accuracy_percent(rng):
    model = make_model([0], [1.0], 0.0, m=2)
    X = sp.csr_matrix(np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 1.0]]))
    data = DataMatrix(X, np.array([1.0, -1.0, -1.0]), 2)
    assert accuracy_percent(model, data) == pytest.approx(100.0 * 2 / 3)


def test_remap_to_original_space():
    reduced = make_model([0, 1, 2], [1.0, 2.0, 3.0], 0.5, m=3)
    full = reduced.remap(np.array([4, 10, 17]), 20)
    assert full.n_features == 20
    np.testing.assert_array_equal(full.support, [4, 10, 17])
    np.testing.assert_array_equal(full.weights, [1.0, 2.0, 3.0])
