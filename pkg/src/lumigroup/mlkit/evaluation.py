"""Confusion-matrix metrics, one-vs-rest AUC and stratified k-fold evaluation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .models import Dataset, check_dataset, make_model


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float = float("nan")
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def overall(self) -> float:
        return (self.accuracy + self.precision + self.recall + self.f1) / 4.0

    def as_dict(self) -> dict:
        return {"overall": self.overall, "accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "auc": self.auc, "runtime_s": self.runtime_s}


def confusion_matrix(y_true, y_pred, labels: Optional[Sequence] = None) -> tuple[np.ndarray, np.ndarray]:
    """Counts C[i, j] of true label i predicted as j, over ``labels`` (default: all seen)."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    labels = np.unique(np.concatenate([y_true, y_pred])) if labels is None else np.asarray(labels)
    ti = np.searchsorted(labels, y_true)
    pi = np.searchsorted(labels, y_pred)
    C = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(C, (ti, pi), 1)
    return C, labels


def metrics_from_confusion(C: np.ndarray) -> tuple[float, float, float, float]:
    """Accuracy plus macro precision, recall and F1 (per-class F1, then averaged).

    Classes with no predictions (or no true rows) contribute 0 to the
    precision (recall) average.
    """
    C = np.asarray(C, dtype=float)
    tp = np.diag(C)
    pred = C.sum(axis=0)
    true = C.sum(axis=1)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    rec = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(tp.sum() / C.sum()), float(prec.mean()), float(rec.mean()), float(f1.mean())


def binary_auc(scores, positive) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties get average ranks)."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos, n_neg = positive.sum(), (~positive).sum()
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    r = rankdata(scores)
    return float((r[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def ovr_auc(y_true, proba: np.ndarray, classes: np.ndarray) -> float:
    y_true = np.asarray(y_true)
    vals = [binary_auc(proba[:, i], y_true == c) for i, c in enumerate(classes)]
    vals = [v for v in vals if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def evaluate_predictions(y_true, y_pred, proba: Optional[np.ndarray] = None,
                         classes: Optional[np.ndarray] = None, runtime_s: float = 0.0) -> EvalReport:
    C, _ = confusion_matrix(y_true, y_pred)
    acc, prec, rec, f1 = metrics_from_confusion(C)
    auc = ovr_auc(y_true, proba, classes) if proba is not None else float("nan")
    return EvalReport(acc, prec, rec, f1, auc, runtime_s)


def stratified_folds(y, k: int, rng=None) -> list[np.ndarray]:
    """Deal the shuffled rows of each class round-robin into ``k`` folds (empty folds dropped)."""
    y = np.asarray(y)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset += len(idx)
    return [np.array(sorted(f), dtype=np.int64) for f in folds if f]


def kfold_cv(kind, data: Dataset, k: int = 10, rng=None, hyperparams: Optional[dict] = None,
             pooled: bool = False) -> EvalReport:
    """Stratified k-fold cross-validation.

    By default the metrics of the folds are averaged. With ``pooled`` the
    out-of-fold predictions are collected first and scored once. A fold
    whose training part holds a single class predicts that class.
    """
    check_dataset(data, min_per_class=1)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    t0 = time.perf_counter()
    folds = stratified_folds(data.y, k, rng)
    y = data.y
    oof = np.empty(len(y), dtype=y.dtype)
    classes = np.unique(y)
    oof_proba = np.zeros((len(y), len(classes)))
    per_fold = []
    for test in folds:
        train_mask = np.ones(len(y), bool)
        train_mask[test] = False
        tr = data.subset(train_mask)
        if len(np.unique(tr.y)) < 2:
            pred = np.full(len(test), tr.y[0])
            proba = np.zeros((len(test), len(classes)))
            proba[:, np.searchsorted(classes, tr.y[0])] = 1.0
        else:
            model = make_model(kind, hyperparams, rng).fit(tr.X, tr.y)
            pred = model.predict(data.X[test])
            p = model.predict_proba(data.X[test])
            proba = np.zeros((len(test), len(classes)))
            proba[:, np.searchsorted(classes, model.classes_)] = p
        oof[test] = pred
        oof_proba[test] = proba
        per_fold.append(evaluate_predictions(y[test], pred, proba, classes))
    runtime = time.perf_counter() - t0
    if pooled:
        rep = evaluate_predictions(y, oof, oof_proba, classes, runtime)
    else:
        auc = [r.auc for r in per_fold if not np.isnan(r.auc)]
        rep = EvalReport(
            float(np.mean([r.accuracy for r in per_fold])),
            float(np.mean([r.precision for r in per_fold])),
            float(np.mean([r.recall for r in per_fold])),
            float(np.mean([r.f1 for r in per_fold])),
            float(np.mean(auc)) if auc else float("nan"),
            runtime,
        )
    return EvalReport(rep.accuracy, rep.precision, rep.recall, rep.f1, rep.auc, rep.runtime_s,
                      {"folds": folds, "oof": oof, "oof_proba": oof_proba, "classes": classes,
                       "per_fold": per_fold})
