from __future__ import annotations

import numpy as np


class EmptyInput(ValueError):
    pass


class DegenerateLabels(ValueError):
    pass


class ConstantInput(ValueError):
    pass


def macro_f1(pred_ids, true_ids, num_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with no predictions and no
    true instances scores 0."""
    pred = np.asarray(pred_ids, dtype=np.int64)
    true = np.asarray(true_ids, dtype=np.int64)
    if pred.size == 0:
        raise EmptyInput("macro_f1 of an empty split")
    if pred.shape != true.shape:
        raise ValueError("prediction and truth lengths differ")
    for arr in (pred, true):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise IndexError(f"class id outside [0, {num_classes})")
    tp = np.bincount(true[pred == true], minlength=num_classes).astype(float)
    n_pred = np.bincount(pred, minlength=num_classes)
    n_true = np.bincount(true, minlength=num_classes)
    denom = n_pred + n_true
    f1 = np.divide(2 * tp, denom, out=np.zeros(num_classes), where=denom > 0)
    return float(f1.mean())


def auprc(scores, labels) -> float:
    """Area under the precision-recall step curve.

    Thresholds sweep the distinct scores in descending order; tied scores
    enter together.  Each threshold contributes ``(recall gain) * precision``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.size == 0:
        raise EmptyInput("auprc of an empty split")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DegenerateLabels("auprc needs at least one positive and one negative")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last_of_group]
    seen = last_of_group + 1
    precision = tp / seen
    recall = tp / n_pos
    gain = np.diff(np.r_[0.0, recall])
    return float((gain * precision).sum())


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    start = 0
    for i in range(1, len(x) + 1):
        if i == len(x) or sx[i] != sx[start]:
            ranks[order[start:i]] = (start + 1 + i) / 2.0
            start = i
    return ranks


def spearman_rho(pred, target) -> float:
    """Pearson correlation of average ranks.  Constant predictions give 0."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if len(p) != len(t):
        raise ValueError("prediction and target lengths differ")
    if len(t) < 2:
        raise EmptyInput("spearman_rho needs at least two samples")
    if np.all(t == t[0]):
        raise ConstantInput("target is constant")
    rp, rt = average_ranks(p), average_ranks(t)
    rp -= rp.mean()
    rt -= rt.mean()
    denom = np.sqrt((rp ** 2).sum() * (rt ** 2).sum())
    if denom == 0:
        return 0.0
    return float((rp * rt).sum() / denom)
