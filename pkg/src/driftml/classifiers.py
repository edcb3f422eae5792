"""Base classifiers: decision tree, naive Bayes, logistic SGD and k-NN.

All classifiers operate on a dense numeric matrix (the pipeline has already
imputed, encoded and scaled) and produce probability rows over the full
schema class set: rows are non-negative and sum to 1, classes absent from
the training data may receive probability zero. Everything is deterministic
given (data, hyperparameters, seed).
"""

from __future__ import annotations

import numpy as np


def _check_fitted(flag, name):
    if not flag:
        raise RuntimeError(f"{name} is not fitted")


class ConstantClassifier:
    """Degenerate case: training data held a single class."""

    def __init__(self, n_classes: int, class_index: int):
        self.n_classes = n_classes
        self.class_index = class_index

    def fit(self, X, y, rng):
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((X.shape[0], self.n_classes))
        out[:, self.class_index] = 1.0
        return out


class DecisionTreeClassifier:
    """CART-style tree on numeric features with midpoint thresholds.

    Split tie-breaks are fixed: strictly larger impurity gain wins, then the
    lower feature index, then the lower threshold, so refits are identical.
    """

    def __init__(self, n_classes: int, max_depth: int = 8, min_leaf: int = 1,
                 criterion: str = "gini"):
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.criterion = criterion
        self._fitted = False

    def _impurity(self, counts: np.ndarray, total) -> np.ndarray:
        """Impurity of count rows (..., n_classes) with row sums ``total``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            p = counts / total
            if self.criterion == "gini":
                val = 1.0 - np.sum(np.square(p), axis=-1)
            else:  # entropy
                logp = np.where(p > 0, np.log2(np.maximum(p, 1e-300)), 0.0)
                val = -np.sum(p * logp, axis=-1)
        return val

    def _best_split(self, X, y_onehot):
        """Best (feature, threshold, gain) over all features, None if no split."""
        n = X.shape[0]
        total_counts = y_onehot.sum(axis=0)
        parent = float(self._impurity(total_counts, n))
        best = None  # (gain, feature, threshold)
        for j in range(X.shape[1]):
            col = X[:, j]
            order = np.argsort(col, kind="stable")
            sv = col[order]
            cum = np.cumsum(y_onehot[order], axis=0)
            # candidate split after position i (1-based left size i+1)
            change = sv[:-1] != sv[1:]
            left_n = np.arange(1, n)
            ok = change & (left_n >= self.min_leaf) & (n - left_n >= self.min_leaf)
            idx = np.nonzero(ok)[0]
            if idx.size == 0:
                continue
            left_counts = cum[idx]
            right_counts = total_counts - left_counts
            nl = (idx + 1).astype(np.float64)
            nr = n - nl
            child = (nl * self._impurity(left_counts, nl[:, None])
                     + nr * self._impurity(right_counts, nr[:, None])) / n
            gains = parent - child
            k = int(np.argmax(gains))
            gain = float(gains[k])
            if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
                thr = (sv[idx[k]] + sv[idx[k] + 1]) / 2.0
                best = (gain, j, float(thr))
        return best

    def fit(self, X: np.ndarray, y: np.ndarray, rng=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        y_onehot = np.zeros((y.size, self.n_classes))
        y_onehot[np.arange(y.size), y] = 1.0

        feature, threshold, left, right, proba = [], [], [], [], []

        def leaf(counts):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            proba.append(counts / counts.sum())
            return len(feature) - 1

        def build(rows: np.ndarray, depth: int) -> int:
            counts = y_onehot[rows].sum(axis=0)
            if depth >= self.max_depth or rows.size < 2 * self.min_leaf \
                    or np.count_nonzero(counts) <= 1:
                return leaf(counts)
            split = self._best_split(X[rows], y_onehot[rows])
            if split is None:
                return leaf(counts)
            _, j, thr = split
            node = len(feature)
            feature.append(j)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            proba.append(np.zeros(self.n_classes))
            mask = X[rows, j] <= thr
            left_id = build(rows[mask], depth + 1)
            right_id = build(rows[~mask], depth + 1)
            left[node] = left_id
            right[node] = right_id
            return node

        build(np.arange(X.shape[0]), 0)
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold, dtype=np.float64)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.proba_ = np.array(proba, dtype=np.float64)
        self._fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _check_fitted(self._fitted, "DecisionTreeClassifier")
        X = np.asarray(X, dtype=np.float64)
        cur = np.zeros(X.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature_[cur] >= 0)[0]
        while active.size:
            nd = cur[active]
            go_left = X[active, self.feature_[nd]] <= self.threshold_[nd]
            cur[active] = np.where(go_left, self.left_[nd], self.right_[nd])
            active = active[self.feature_[cur[active]] >= 0]
        return self.proba_[cur]


class NaiveBayesClassifier:
    """Hybrid naive Bayes: Bernoulli with Laplace smoothing on binary
    columns (one-hot blocks), Gaussian on everything else."""

    def __init__(self, n_classes: int, laplace_alpha: float = 1.0):
        self.n_classes = n_classes
        self.alpha = laplace_alpha
        self._fitted = False

    def fit(self, X: np.ndarray, y: np.ndarray, rng=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        self.binary_ = np.array([np.isin(X[:, j], (0.0, 1.0)).all() for j in range(d)])
        self.class_count_ = np.bincount(y, minlength=self.n_classes).astype(np.float64)
        self.log_prior_ = np.full(self.n_classes, -np.inf)
        present = self.class_count_ > 0
        self.log_prior_[present] = np.log(self.class_count_[present] / n)

        self.p_one_ = np.full((self.n_classes, d), 0.5)
        self.mean_ = np.zeros((self.n_classes, d))
        self.var_ = np.ones((self.n_classes, d))
        for c in range(self.n_classes):
            rows = X[y == c]
            if rows.shape[0] == 0:
                continue
            nc = rows.shape[0]
            ones = rows.sum(axis=0)
            self.p_one_[c] = (ones + self.alpha) / (nc + 2.0 * self.alpha)
            self.mean_[c] = rows.mean(axis=0)
            self.var_[c] = np.maximum(rows.var(axis=0), 1e-9)
        self._fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _check_fitted(self._fitted, "NaiveBayesClassifier")
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        logp = np.tile(self.log_prior_, (n, 1))
        b = self.binary_
        if b.any():
            xb = np.clip(X[:, b], 0.0, 1.0)
            p1 = np.clip(self.p_one_[:, b], 1e-12, 1 - 1e-12)
            logp += xb @ np.log(p1).T + (1.0 - xb) @ np.log1p(-p1).T
        g = ~b
        if g.any():
            xg = X[:, g]
            mean = self.mean_[:, g]
            var = self.var_[:, g]
            const = -0.5 * np.log(2.0 * np.pi * var).sum(axis=1)
            sq = (
                (xg ** 2) @ (1.0 / (2.0 * var)).T
                - xg @ (mean / var).T
                + ((mean ** 2) / (2.0 * var)).sum(axis=1)
            )
            logp += const - sq
        logp -= logp.max(axis=1, keepdims=True)
        out = np.exp(logp)
        out[~np.isfinite(out)] = 0.0
        return out / out.sum(axis=1, keepdims=True)


class LogisticSgdClassifier:
    """Multinomial logistic regression trained with seeded mini-batch SGD.

    The cross-entropy (plus L2 on the weights, not the bias) is recorded
    after every epoch in ``loss_history_``.
    """

    MINIBATCH = 32

    def __init__(self, n_classes: int, learning_rate: float = 0.1,
                 l2: float = 0.0, epochs: int = 20):
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.l2 = l2
        self.epochs = epochs
        self._fitted = False

    def _softmax(self, logits: np.ndarray) -> np.ndarray:
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def _loss(self, X, y_onehot):
        p = self._softmax(X @ self.W_ + self.b_)
        ce = -np.log(np.maximum((p * y_onehot).sum(axis=1), 1e-300)).mean()
        return float(ce + 0.5 * self.l2 * np.square(self.W_).sum())

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        y_onehot = np.zeros((n, self.n_classes))
        y_onehot[np.arange(n), y] = 1.0
        self.W_ = np.zeros((d, self.n_classes))
        self.b_ = np.zeros(self.n_classes)
        self.loss_history_ = []
        m = min(self.MINIBATCH, n)
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, m):
                take = perm[start : start + m]
                xb, yb = X[take], y_onehot[take]
                p = self._softmax(xb @ self.W_ + self.b_)
                err = (p - yb) / take.size
                self.W_ -= self.learning_rate * (xb.T @ err + self.l2 * self.W_)
                self.b_ -= self.learning_rate * err.sum(axis=0)
            self.loss_history_.append(self._loss(X, y_onehot))
        self._fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _check_fitted(self._fitted, "LogisticSgdClassifier")
        return self._softmax(np.asarray(X, dtype=np.float64) @ self.W_ + self.b_)


def reservoir_sample(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of a uniform k-subset of range(n), classic algorithm R."""
    if k >= n:
        return np.arange(n)
    res = np.arange(k)
    draws = rng.integers(0, np.arange(k, n) + 1)
    for i, j in zip(range(k, n), draws):
        if j < k:
            res[j] = i
    return np.sort(res)


class KnnClassifier:
    """k nearest neighbors with a bounded, seeded reservoir of references.

    Distance ties resolve toward the lower reference index (stable sort), so
    predictions are reproducible.
    """

    CHUNK = 1024

    def __init__(self, n_classes: int, k: int = 5, max_reference_points: int = 2048):
        self.n_classes = n_classes
        self.k = k
        self.max_reference_points = max_reference_points
        self._fitted = False

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        keep = reservoir_sample(X.shape[0], self.max_reference_points, rng)
        self.ref_X_ = X[keep]
        self.ref_y_ = y[keep]
        self.ref_sq_ = np.square(self.ref_X_).sum(axis=1)
        self._fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _check_fitted(self._fitted, "KnnClassifier")
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, self.ref_X_.shape[0])
        out = np.empty((X.shape[0], self.n_classes))
        for start in range(0, X.shape[0], self.CHUNK):
            xb = X[start : start + self.CHUNK]
            d2 = (
                np.square(xb).sum(axis=1, keepdims=True)
                - 2.0 * xb @ self.ref_X_.T
                + self.ref_sq_
            )
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            votes = self.ref_y_[nearest]
            for c in range(self.n_classes):
                out[start : start + self.CHUNK, c] = (votes == c).mean(axis=1)
        return out
