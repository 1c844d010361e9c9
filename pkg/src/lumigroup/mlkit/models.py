"""Classifiers written from scratch on numpy (trees via numba kernels).

All models share a small interface: ``fit(X, y)``, ``predict_proba(X)``,
``predict(X)`` and ``get_state()`` for serialisation. Labels may be any
sortable values; they are mapped to ``classes_`` internally.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DegenerateDataset
from ._tree import apply_tree, build_tree

MODEL_FORMAT = "lumigroup-model"
MODEL_VERSION = 1


class Kind(str, Enum):
    RANDOM_FOREST = "random_forest"
    EXTRA_TREES = "extra_trees"
    GRADIENT_BOOSTING = "gradient_boosting"
    NAIVE_BAYES = "naive_bayes"
    ADA_BOOST = "ada_boost"
    LINEAR_SVM = "linear_svm"
    DECISION_TREE = "decision_tree"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y)
        if len(self.X) != len(self.y):
            raise ValueError("feature rows and labels differ in number")
        if not self.feature_names:
            self.feature_names = tuple(f"f{i}" for i in range(self.X.shape[1]))
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature names do not match dimensionality")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def rows(self):
        return list(zip(self.X, self.y))

    def subset(self, index) -> "Dataset":
        return Dataset(self.X[index], self.y[index], self.feature_names)


def _seed(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**31 - 1))
    return int(np.random.default_rng(rng).integers(2**31 - 1))


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_jsonable(v) for v in obj]
    return obj


class Classifier:
    kind: Kind

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.classes_: Optional[np.ndarray] = None

    def _encode(self, y) -> np.ndarray:
        self.classes_, codes = np.unique(np.asarray(y), return_inverse=True)
        return codes

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))

    def get_state(self) -> dict:
        state = {k: v for k, v in vars(self).items()}
        state["classes_"] = self.classes_
        return state

    def set_state(self, state: dict) -> None:
        for k, v in state.items():
            setattr(self, k, v)


# -- trees ------------------------------------------------------------------------------


class DecisionTree(Classifier):
    """Single CART tree: Gini splits, optionally random feature subsets and thresholds."""

    kind = Kind.DECISION_TREE

    def __init__(self, max_depth: int = 8, min_samples_split: int = 2, max_features=None,
                 extra: bool = False, seed: int = 0):
        super().__init__(seed)
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.extra = extra
        self.nodes: tuple = ()

    def _n_features(self, d: int) -> int:
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(d)))
        return int(self.max_features)

    def fit(self, X, y, sample_weight=None, classes=None):
        X = np.ascontiguousarray(X, dtype=float)
        if classes is None:
            codes = self._encode(y)
        else:
            self.classes_ = np.asarray(classes)
            codes = np.searchsorted(self.classes_, np.asarray(y))
        w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        Y = np.zeros((len(X), len(self.classes_)))
        Y[np.arange(len(X)), codes] = w
        self.nodes = build_tree(X, Y, w, self.max_depth, self.min_samples_split,
                                self._n_features(X.shape[1]), self.extra, self.seed)
        return self

    def apply(self, X) -> np.ndarray:
        f, t, left, right, _ = self.nodes
        return apply_tree(np.ascontiguousarray(X, dtype=float), f, t, left, right)

    def predict_proba(self, X) -> np.ndarray:
        return self.nodes[4][self.apply(X)]

    def get_state(self) -> dict:
        state = super().get_state()
        state["nodes"] = list(self.nodes)
        return state

    def set_state(self, state: dict) -> None:
        super().set_state(state)
        self.nodes = tuple(self.nodes)


class _RegressionTree:
    def __init__(self, max_depth: int, seed: int):
        self.max_depth = max_depth
        self.seed = seed
        self.nodes: tuple = ()

    def fit(self, X, target):
        w = np.ones(len(X))
        self.nodes = build_tree(X, target[:, None].astype(float), w, self.max_depth, 2, X.shape[1], False, self.seed)
        return self

    def apply(self, X):
        f, t, left, right, _ = self.nodes
        return apply_tree(X, f, t, left, right)


class _Forest(Classifier):
    bootstrap = True
    extra = False

    def __init__(self, n_estimators: int = 100, max_depth: int = 8, max_features="sqrt", seed: int = 0):
        super().__init__(seed)
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_features = max_features
        self.trees: list[DecisionTree] = []

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=float)
        codes = self._encode(y)
        rng = np.random.default_rng(self.seed)
        n = len(X)
        self.trees = []
        for _ in range(self.n_estimators):
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float) if self.bootstrap else None
            tree = DecisionTree(self.max_depth, 2, self.max_features, self.extra, int(rng.integers(2**31 - 1)))
            self.trees.append(tree.fit(X, self.classes_[codes], w, classes=self.classes_))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def get_state(self) -> dict:
        state = super().get_state()
        state["trees"] = [t.get_state() for t in self.trees]
        return state

    def set_state(self, state: dict) -> None:
        trees = state.pop("trees")
        super().set_state(state)
        self.trees = []
        for s in trees:
            t = DecisionTree()
            t.set_state(s)
            self.trees.append(t)


class RandomForest(_Forest):
    kind = Kind.RANDOM_FOREST


class ExtraTrees(_Forest):
    """Randomised trees on the full sample with uniformly drawn split thresholds."""

    kind = Kind.EXTRA_TREES
    bootstrap = False
    extra = True


def _softmax(F: np.ndarray) -> np.ndarray:
    F = F - F.max(axis=1, keepdims=True)
    e = np.exp(F)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoosting(Classifier):
    """Multinomial deviance boosting with shallow regression trees and Newton leaf values."""

    kind = Kind.GRADIENT_BOOSTING

    def __init__(self, n_estimators: int = 100, max_depth: int = 2, learning_rate: float = 0.1, seed: int = 0):
        super().__init__(seed)
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.prior: Optional[np.ndarray] = None
        self.stages: list = []  # per stage, per class: (nodes, leaf values)

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=float)
        codes = self._encode(y)
        k = len(self.classes_)
        Y = np.eye(k)[codes]
        counts = Y.mean(axis=0)
        self.prior = np.log(np.clip(counts, 1e-12, None))
        F = np.tile(self.prior, (len(X), 1))
        rng = np.random.default_rng(self.seed)
        self.stages = []
        for _ in range(self.n_estimators):
            P = _softmax(F)
            stage = []
            for c in range(k):
                r = Y[:, c] - P[:, c]
                tree = _RegressionTree(self.max_depth, int(rng.integers(2**31 - 1))).fit(X, r)
                leaf = tree.apply(X)
                n_nodes = len(tree.nodes[0])
                num = np.bincount(leaf, weights=r, minlength=n_nodes)
                den = np.bincount(leaf, weights=np.abs(r) * (1 - np.abs(r)), minlength=n_nodes)
                vals = np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0) * (k - 1) / k
                F[:, c] += self.learning_rate * vals[leaf]
                stage.append((tree.nodes, vals))
            self.stages.append(stage)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        F = np.tile(self.prior, (len(X), 1))
        for stage in self.stages:
            for c, (nodes, vals) in enumerate(stage):
                f, t, left, right, _ = nodes
                F[:, c] += self.learning_rate * vals[apply_tree(X, f, t, left, right)]
        return F

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def set_state(self, state: dict) -> None:
        super().set_state(state)
        self.stages = [[(tuple(nodes), vals) for nodes, vals in stage] for stage in self.stages]


class AdaBoost(Classifier):
    """Multi-class AdaBoost (SAMME) over decision stumps."""

    kind = Kind.ADA_BOOST

    def __init__(self, n_estimators: int = 50, seed: int = 0):
        super().__init__(seed)
        self.n_estimators = n_estimators
        self.stumps: list[DecisionTree] = []
        self.alphas: list[float] = []

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=float)
        codes = self._encode(y)
        k = len(self.classes_)
        n = len(X)
        w = np.full(n, 1.0 / n)
        rng = np.random.default_rng(self.seed)
        self.stumps, self.alphas = [], []
        for _ in range(self.n_estimators):
            stump = DecisionTree(1, 2, None, False, int(rng.integers(2**31 - 1)))
            stump.fit(X, self.classes_[codes], w, classes=self.classes_)
            miss = stump.predict(X) != self.classes_[codes]
            err = float(np.dot(w, miss) / w.sum())
            if err >= 1.0 - 1.0 / k:
                if not self.stumps:
                    self.stumps, self.alphas = [stump], [1.0]
                break
            alpha = math.log((1.0 - err) / max(err, 1e-10)) + math.log(k - 1)
            self.stumps.append(stump)
            self.alphas.append(alpha)
            if err <= 0.0:
                break
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        votes = np.zeros((len(X), len(self.classes_)))
        for stump, a in zip(self.stumps, self.alphas):
            codes = np.searchsorted(self.classes_, stump.predict(X))
            votes[np.arange(len(X)), codes] += a
        return votes / max(sum(self.alphas), 1e-12)

    def predict_proba(self, X) -> np.ndarray:
        k = len(self.classes_)
        return _softmax(self.decision_function(X) * max(k - 1, 1))

    def get_state(self) -> dict:
        state = super().get_state()
        state["stumps"] = [s.get_state() for s in self.stumps]
        return state

    def set_state(self, state: dict) -> None:
        stumps = state.pop("stumps")
        super().set_state(state)
        self.stumps = []
        for s in stumps:
            t = DecisionTree()
            t.set_state(s)
            self.stumps.append(t)


class NaiveBayes(Classifier):
    """Gaussian naive Bayes; per-class variances are floored at ``var_floor``."""

    kind = Kind.NAIVE_BAYES

    def __init__(self, var_floor: float = 1e-9, seed: int = 0):
        super().__init__(seed)
        self.var_floor = var_floor
        self.theta: Optional[np.ndarray] = None
        self.var: Optional[np.ndarray] = None
        self.log_prior: Optional[np.ndarray] = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        codes = self._encode(y)
        k = len(self.classes_)
        self.theta = np.array([X[codes == c].mean(axis=0) for c in range(k)])
        self.var = np.maximum(np.array([X[codes == c].var(axis=0) for c in range(k)]), self.var_floor)
        self.log_prior = np.log(np.bincount(codes, minlength=k) / len(codes))
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ll = -0.5 * (np.log(2 * np.pi * self.var).sum(axis=1)[None, :]
                     + (((X[:, None, :] - self.theta[None]) ** 2) / self.var[None]).sum(axis=2))
        return ll + self.log_prior[None, :]

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.joint_log_likelihood(X))


class LinearSVM(Classifier):
    """Linear hinge-loss SVM trained by stochastic sub-gradient steps (Pegasos), one-vs-rest."""

    kind = Kind.LINEAR_SVM

    def __init__(self, lam: float = 1e-3, epochs: int = 30, seed: int = 0):
        super().__init__(seed)
        self.lam = lam
        self.epochs = epochs
        self.mu: Optional[np.ndarray] = None
        self.sd: Optional[np.ndarray] = None
        self.W: Optional[np.ndarray] = None

    def _scale(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mu) / self.sd
        return np.hstack([Z, np.ones((len(Z), 1))])

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        codes = self._encode(y)
        self.mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        Z = self._scale(X)
        n, d = Z.shape
        k = len(self.classes_)
        rng = np.random.default_rng(self.seed)
        heads = [1] if k == 2 else range(k)
        W = np.zeros((k, d))
        for c in heads:
            t_sign = np.where(codes == c, 1.0, -1.0)
            w = np.zeros(d)
            t = 0
            for _ in range(self.epochs):
                for i in rng.permutation(n):
                    t += 1
                    eta = 1.0 / (self.lam * t)
                    margin = t_sign[i] * np.dot(w, Z[i])
                    w *= 1.0 - eta * self.lam
                    if margin < 1.0:
                        w += eta * t_sign[i] * Z[i]
                    norm = np.linalg.norm(w)
                    cap = 1.0 / math.sqrt(self.lam)
                    if norm > cap:
                        w *= cap / norm
            W[c] = w
        if k == 2:
            W[0] = -W[1]
        self.W = W
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._scale(X) @ self.W.T

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))


_REGISTRY = {
    Kind.RANDOM_FOREST: RandomForest,
    Kind.EXTRA_TREES: ExtraTrees,
    Kind.GRADIENT_BOOSTING: GradientBoosting,
    Kind.NAIVE_BAYES: NaiveBayes,
    Kind.ADA_BOOST: AdaBoost,
    Kind.LINEAR_SVM: LinearSVM,
    Kind.DECISION_TREE: DecisionTree,
}


def make_model(kind, hyperparams: Optional[dict] = None, rng=None) -> Classifier:
    kind = Kind(kind)
    return _REGISTRY[kind](**(hyperparams or {}), seed=_seed(rng))


def check_dataset(data: Dataset, min_per_class: int = 2) -> None:
    classes, counts = np.unique(data.y, return_counts=True)
    if len(classes) < 2:
        raise DegenerateDataset("training needs at least two classes")
    if counts.min() < min_per_class:
        raise DegenerateDataset(f"every class needs at least {min_per_class} rows")
    if not np.all(np.isfinite(data.X)):
        raise DegenerateDataset("features must be finite (report missing values as 0)")


def train(kind, data: Dataset, hyperparams: Optional[dict] = None, rng=None) -> Classifier:
    """Fit a classifier of the given kind; deterministic for a fixed seed."""
    check_dataset(data)
    return make_model(kind, hyperparams, rng).fit(data.X, data.y)


def save_model(model: Classifier, path) -> None:
    """Write a versioned JSON container; floats round-trip exactly."""
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": model.kind.value,
           "state": _to_jsonable(model.get_state())}
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path) -> Classifier:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError("not a lumigroup model container of a supported version")
    model = _REGISTRY[Kind(doc["kind"])]()
    model.set_state(_from_jsonable(doc["state"]))
    return model
