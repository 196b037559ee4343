"""Dataset containers, text formats, and synthetic benchmark generators.

File formats (all plain text, exact round-trip via shortest-repr floats):

* samples: LIBSVM lines ``label idx:val ...`` with 1-based, strictly
  ascending indices; labels +1/-1 (0 and 0/1-coded labels map to -1/+1).
* knowledge: header ``m k1 k2``; then k1 rule lines of 0-based ``idx:val``
  pairs whose last token is the rule threshold entry of d, then k2 lines
  likewise for (D, g).
* model: one bias line, then ``idx:weight`` lines in ascending 0-based order.

All randomness flows through ``numpy.random.default_rng`` (PCG64), so a
(seed, spec) pair fully determines every emitted byte on any platform.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.sparse as sp

from .linalg import CholeskyFactor, NotPositiveDefiniteError, as_csr


class DataFormatError(Exception):
    """Malformed input file; message carries the offending location."""


@dataclass
class DataMatrix:
    """Row-major sparse sample matrix with +/-1 labels.

    ``y`` may be None for unlabeled prediction inputs; every other consumer
    requires labels.
    """

    X: sp.csr_matrix
    y: np.ndarray | None
    n_features: int

    def __post_init__(self):
        self.X = as_csr(self.X)
        if self.X.shape[1] != self.n_features:
            raise ValueError("n_features does not match matrix width")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float).ravel()
            if self.y.shape[0] != self.X.shape[0]:
                raise ValueError("label count does not match sample count")
            if not np.all(np.isin(self.y, (-1.0, 1.0))):
                raise ValueError("labels must be -1 or +1")

    @property
    def n_samples(self):
        return self.X.shape[0]

    @classmethod
    def from_arrays(cls, X, y, n_features=None):
        X = as_csr(X)
        return cls(X, y, X.shape[1] if n_features is None else int(n_features))

    def select_columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        return DataMatrix(self.X[:, idx], self.y, idx.size)

    def select_rows(self, idx):
        return DataMatrix(self.X[idx], None if self.y is None else self.y[idx],
                          self.n_features)


@dataclass
class KnowledgeSet:
    """Linear-implication rules: B x <= d implies the positive class and
    D x <= g implies the negative class."""

    B: sp.csr_matrix
    d: np.ndarray
    D: sp.csr_matrix
    g: np.ndarray

    def __post_init__(self):
        self.B = as_csr(self.B)
        self.D = as_csr(self.D)
        self.d = np.asarray(self.d, dtype=float).ravel()
        self.g = np.asarray(self.g, dtype=float).ravel()
        if self.B.shape[0] != self.d.size or self.D.shape[0] != self.g.size:
            raise ValueError("rule count does not match threshold count")
        if self.B.shape[1] != self.D.shape[1]:
            raise ValueError("rule matrices must share the feature dimension")

    @property
    def n_features(self):
        return self.B.shape[1]

    @property
    def k1(self):
        return self.B.shape[0]

    @property
    def k2(self):
        return self.D.shape[0]

    @property
    def is_empty(self):
        return self.k1 == 0 and self.k2 == 0

    @classmethod
    def empty(cls, n_features):
        z = sp.csr_matrix((0, n_features))
        return cls(z, np.zeros(0), z.copy(), np.zeros(0))

    def check_row_rank(self):
        """Full row rank of B and D, probed by Cholesky on their Gram matrices.

        Rounding can hand Cholesky a vanishing pivot instead of a failure on
        an exactly redundant rule, so pivots are also checked against a
        relative floor.
        """
        for name, M in (("B", self.B), ("D", self.D)):
            if M.shape[0] == 0:
                continue
            gram = (M @ M.T).toarray()
            message = (f"knowledge matrix {name} is rank deficient; remove "
                       f"the redundant rule")
            try:
                CholeskyFactor(gram)
                pivots = np.diag(np.linalg.cholesky(gram)) ** 2
            except (NotPositiveDefiniteError, np.linalg.LinAlgError) as exc:
                raise NotPositiveDefiniteError(f"{message} ({exc})") from exc
            if pivots.min() <= 1e-10 * gram.diagonal().max():
                raise NotPositiveDefiniteError(message)

    def select_columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        return KnowledgeSet(self.B[:, idx], self.d, self.D[:, idx], self.g)

    def drop_positive(self):
        return KnowledgeSet(sp.csr_matrix((0, self.n_features)), np.zeros(0),
                            self.D, self.g)

    def drop_negative(self):
        return KnowledgeSet(self.B, self.d,
                            sp.csr_matrix((0, self.n_features)), np.zeros(0))


# ---------------------------------------------------------------------------
# LIBSVM sample files


def _format_value(v):
    return repr(float(v))


def _parse_label(token, path, lineno):
    try:
        v = float(token)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: unmappable label {token!r}") from None
    if v == 1.0:
        return 1.0
    if v in (-1.0, 0.0):
        return -1.0
    raise DataFormatError(f"{path}:{lineno}: unmappable label {token!r}")


def read_libsvm(path, n_features=None, allow_unlabeled=False):
    """Read a LIBSVM-format text file into a :class:`DataMatrix`.

    1-based indices are stored 0-based; the feature count is the maximum
    index seen unless ``n_features`` overrides it.  With ``allow_unlabeled``
    set, lines whose first token is an ``idx:val`` pair are accepted and the
    returned labels are None.
    """
    indptr = [0]
    indices = []
    values = []
    labels = []
    unlabeled = False
    n_lines = 0
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            n_lines += 1
            tokens = line.split()
            if ":" in tokens[0]:
                if not allow_unlabeled:
                    raise DataFormatError(f"{path}:{lineno}: missing label")
                unlabeled = True
                pairs = tokens
            else:
                if unlabeled:
                    raise DataFormatError(
                        f"{path}:{lineno}: mix of labeled and unlabeled lines")
                labels.append(_parse_label(tokens[0], path, lineno))
                pairs = tokens[1:]
            prev = 0
            for tok in pairs:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}: malformed entry {tok!r}") from None
                if idx <= prev:
                    raise DataFormatError(
                        f"{path}:{lineno}: non-ascending index {idx}")
                prev = idx
                indices.append(idx - 1)
                values.append(val)
            indptr.append(len(indices))
    if n_lines == 0:
        raise DataFormatError(f"{path}: empty dataset")
    if unlabeled and labels:
        raise DataFormatError(f"{path}: mix of labeled and unlabeled lines")
    max_idx = max(indices) + 1 if indices else 0
    if n_features is None:
        n_features = max_idx
    elif max_idx > n_features:
        raise DataFormatError(
            f"{path}: feature index {max_idx} exceeds declared count {n_features}")
    X = sp.csr_matrix(
        (np.array(values, dtype=float), np.array(indices, dtype=np.int32),
         np.array(indptr, dtype=np.int64)),
        shape=(n_lines, n_features))
    y = None if unlabeled else np.array(labels)
    return DataMatrix(X, y, n_features)


def write_libsvm(data, path):
    """Write a labeled :class:`DataMatrix` in LIBSVM text format."""
    if data.y is None:
        raise ValueError("cannot write unlabeled data in LIBSVM format")
    X = data.X
    with open(path, "w", encoding="ascii") as fh:
        for i in range(data.n_samples):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            parts = ["+1" if data.y[i] > 0 else "-1"]
            parts.extend(f"{j + 1}:{_format_value(v)}"
                         for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            fh.write(" ".join(parts) + "\n")


# ---------------------------------------------------------------------------
# Knowledge files


def _parse_rule_line(line, n_features, path, lineno):
    tokens = line.split()
    if not tokens:
        raise DataFormatError(f"{path}:{lineno}: empty rule line")
    threshold_tok = tokens[-1]
    if ":" in threshold_tok:
        raise DataFormatError(f"{path}:{lineno}: rule line lacks a threshold entry")
    try:
        threshold = float(threshold_tok)
    except ValueError:
        raise DataFormatError(
            f"{path}:{lineno}: malformed threshold {threshold_tok!r}") from None
    idx = []
    vals = []
    for tok in tokens[:-1]:
        try:
            i_s, v_s = tok.split(":", 1)
            i = int(i_s)
            v = float(v_s)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: malformed entry {tok!r}") from None
        if i < 0 or i >= n_features:
            raise DataFormatError(
                f"{path}:{lineno}: index {i} out of range for m={n_features}")
        idx.append(i)
        vals.append(v)
    return idx, vals, threshold


def read_knowledge(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty knowledge file")
    try:
        m, k1, k2 = (int(t) for t in lines[0].split())
    except ValueError:
        raise DataFormatError(f"{path}:1: malformed header {lines[0]!r}") from None
    if len(lines) != 1 + k1 + k2:
        raise DataFormatError(
            f"{path}: expected {k1 + k2} rule lines, found {len(lines) - 1}")

    def build(rule_lines, first_lineno):
        rows, cols, vals, thresholds = [], [], [], []
        for r, line in enumerate(rule_lines):
            idx, v, thr = _parse_rule_line(line, m, path, first_lineno + r)
            rows.extend([r] * len(idx))
            cols.extend(idx)
            vals.extend(v)
            thresholds.append(thr)
        M = sp.csr_matrix((vals, (rows, cols)), shape=(len(rule_lines), m))
        return M, np.array(thresholds)

    B, d = build(lines[1:1 + k1], 2)
    D, g = build(lines[1 + k1:], 2 + k1)
    return KnowledgeSet(B, d, D, g)


def write_knowledge(ks, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{ks.n_features} {ks.k1} {ks.k2}\n")
        for M, thr in ((ks.B, ks.d), (ks.D, ks.g)):
            for r in range(M.shape[0]):
                lo, hi = M.indptr[r], M.indptr[r + 1]
                parts = [f"{j}:{_format_value(v)}"
                         for j, v in zip(M.indices[lo:hi], M.data[lo:hi])]
                parts.append(_format_value(thr[r]))
                fh.write(" ".join(parts) + "\n")


# ---------------------------------------------------------------------------
# Synthetic generators


@dataclass
class SyntheticSpec:
    """Configuration of the block-Gaussian knowledge benchmark.

    Four feature blocks of length ``block_len`` occupy the first coordinates;
    per class they are drawn from correlated Gaussians around the block means
    below, a random 5-10% of the coordinates after the blocks carry standard
    normal noise, and everything else is zero.  Training samples populate
    only ``train_blocks`` (defaults to the two weakly separated middle
    blocks), which is what makes the supplied rules on blocks 1 and 4
    informative.
    """

    n_train: int
    n_test: int
    n_features: int
    block_len: int = 50
    seed: int = 0
    block_correlation: float = 0.8
    noise_range: tuple = (0.05, 0.10)
    pos_block_means: tuple = (2.0, 0.5, -0.2, -1.0)
    neg_block_means: tuple = (-2.0, -0.5, 0.2, 1.0)
    train_blocks: tuple = (1, 2)
    test_blocks: tuple = (0, 1, 2, 3)
    pos_rule_threshold: float = 4.0
    neg_rule_threshold: float = 3.0

    def __post_init__(self):
        if 4 * self.block_len > self.n_features:
            raise ValueError("four blocks must fit inside n_features")
        lo, hi = self.noise_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("noise fractions must lie in [0, 1]")
        if not (0.0 <= self.block_correlation < 1.0):
            raise ValueError("block correlation must lie in [0, 1)")


PRESETS = {
    "ksvm-s-10k": dict(n_train=200, n_test=400, n_features=10_000, block_len=50),
    "ksvm-s-50k": dict(n_train=500, n_test=1_000, n_features=50_000, block_len=50),
}


def preset_spec(name, seed=0):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SyntheticSpec(seed=seed, **PRESETS[name])


def _balanced_labels(rng, n):
    y = np.concatenate([np.ones((n + 1) // 2), -np.ones(n // 2)])
    return y[rng.permutation(n)]


def _sample_block(rng, mean, length, correlation):
    # compound-symmetric sqrt: a*I + beta*(all-ones), closed form
    a = np.sqrt(1.0 - correlation)
    beta = (np.sqrt(1.0 - correlation + correlation * length) - a) / length
    z = rng.standard_normal(length)
    return mean + a * z + beta * z.sum()


def _generate_split(rng, n, spec, blocks):
    m, L = spec.n_features, spec.block_len
    y = _balanced_labels(rng, n)
    n_rest = m - 4 * L
    lo, hi = spec.noise_range
    indptr = [0]
    indices = []
    values = []
    for i in range(n):
        means = spec.pos_block_means if y[i] > 0 else spec.neg_block_means
        for blk in sorted(blocks):
            vals = _sample_block(rng, means[blk], L, spec.block_correlation)
            indices.extend(range(blk * L, (blk + 1) * L))
            values.extend(vals)
        if n_rest > 0:
            frac = rng.uniform(lo, hi)
            count = int(round(frac * n_rest))
            noise_pos = np.sort(rng.choice(n_rest, size=count, replace=False))
            indices.extend(4 * L + noise_pos)
            values.extend(rng.standard_normal(count))
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.array(values), np.array(indices, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(n, m))
    return DataMatrix(X, y, m)


def generate_knowledge_synthetic(spec):
    """Generate (train, test, knowledge) for the block-Gaussian benchmark.

    The rules state that a block-1 sample mean of at least
    ``pos_rule_threshold`` implies the positive class, and a block-4 mean of
    at least ``neg_rule_threshold`` implies the negative class; encoded as
    rows -e'/L with thresholds -4 and -3.
    """
    rng = np.random.default_rng(spec.seed)
    train = _generate_split(rng, spec.n_train, spec, spec.train_blocks)
    test = _generate_split(rng, spec.n_test, spec, spec.test_blocks)
    m, L = spec.n_features, spec.block_len
    B = sp.csr_matrix((np.full(L, -1.0 / L), (np.zeros(L, dtype=int), np.arange(L))),
                      shape=(1, m))
    D = sp.csr_matrix((np.full(L, -1.0 / L),
                       (np.zeros(L, dtype=int), np.arange(3 * L, 4 * L))),
                      shape=(1, m))
    knowledge = KnowledgeSet(B, np.array([-spec.pos_rule_threshold]),
                             D, np.array([-spec.neg_rule_threshold]))
    return train, test, knowledge


def generate_dense_sparse_support(n_train, n_test, n_features, support_size,
                                  seed=0, margin_floor=0.1):
    """Dense Gaussian data separated by a planted sparse hyperplane.

    Rows with decision values inside ``margin_floor`` are rejected so both
    solvers face a stable labeling.  Returns (train, test, support indices).
    """
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(n_features, size=support_size, replace=False))
    w_star = np.zeros(n_features)
    w_star[support] = rng.standard_normal(support_size)
    w_star /= np.linalg.norm(w_star)

    def draw(n):
        rows = []
        labels = []
        while len(rows) < n:
            batch = rng.standard_normal((max(64, n), n_features))
            scores = batch @ w_star
            keep = np.abs(scores) >= margin_floor
            for row, s in zip(batch[keep], scores[keep]):
                rows.append(row)
                labels.append(1.0 if s >= 0 else -1.0)
                if len(rows) == n:
                    break
        return DataMatrix(sp.csr_matrix(np.array(rows)), np.array(labels), n_features)

    return draw(n_train), draw(n_test), support


def write_metadata(spec, path):
    """Key-value sidecar recording every generator field plus the RNG."""
    with open(path, "w", encoding="ascii") as fh:
        for f in fields(spec):
            fh.write(f"{f.name}={getattr(spec, f.name)}\n")
        fh.write("rng=numpy.random.default_rng(PCG64)\n")


def spec_with_seed(spec, seed):
    return replace(spec, seed=seed)
