"""Agreement and reproducibility statistics for measurement sets and masks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class PairedSeries:
    """Two equal-length series of per-eye measurements to compare.

    Callers filter absent values beforehand; NaN or infinite entries are
    rejected.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size or x.size == 0:
            raise ValueError("x and y must have the same non-zero length")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("series values must be finite")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


def _pearson_of(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0:
        raise ValueError("correlation undefined: zero variance in x")
    if sy == 0:
        raise ValueError("correlation undefined: zero variance in y")
    return float(dx @ dy) / (sx * sy)


def pearson(series: PairedSeries) -> float:
    """Linear correlation coefficient.

    Raises
    ------
    ValueError
        With fewer than two pairs, or when either series has zero
        variance.
    """
    if series.n < 2:
        raise ValueError("at least two pairs are required")
    return _pearson_of(series.x, series.y)


def spearman(series: PairedSeries) -> float:
    """Monotonic correlation: linear correlation of average ranks.

    Ties receive the mean of the ranks they span. A series that is
    constant after ranking raises the zero-variance error like pearson.
    """
    if series.n < 2:
        raise ValueError("at least two pairs are required")
    return _pearson_of(
        rankdata(series.x, method="average"), rankdata(series.y, method="average")
    )


def mean_difference(series: PairedSeries) -> float:
    """Signed prediction error: mean of x - y."""
    return float(np.mean(series.x - series.y))


def mae(series: PairedSeries) -> float:
    """Unsigned prediction error: mean of |x - y|."""
    return float(np.mean(np.abs(series.x - series.y)))


def measurement_noise(series: PairedSeries) -> np.ndarray:
    """Per-eye noise ratio between repeated measurements.

    For each eye, the standard deviation between its two values
    (two-sample SD, equal to |x_i - y_i| / sqrt(2)) is expressed as a
    fraction of the between-eye sample standard deviation of x.

    Raises
    ------
    ValueError
        With fewer than two pairs, or when x has zero variance.
    """
    if series.n < 2:
        raise ValueError("at least two pairs are required")
    sigma_x = float(np.std(series.x, ddof=1))
    if sigma_x == 0:
        raise ValueError("measurement noise undefined: zero variance in x")
    pair_sd = np.abs(series.x - series.y) / math.sqrt(2)
    return pair_sd / sigma_x


def average_repeats(rows) -> np.ndarray:
    """Reduce m repeated measurements per eye to one mean value per eye.

    Accepts a sequence of per-eye value sequences (a 2-D array for equal
    m); use the result to build a PairedSeries from repeated-measure
    protocols.
    """
    means = []
    for i, row in enumerate(rows):
        values = np.asarray(row, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"eye {i} needs at least one measurement")
        if not np.isfinite(values).all():
            raise ValueError(f"eye {i} has non-finite measurements")
        means.append(float(values.mean()))
    if not means:
        raise ValueError("at least one eye is required")
    return np.array(means)


def mask_agreement(pred, truth) -> dict:
    """Dice, precision, and recall between two binary masks.

    Two empty masks agree perfectly by convention (all three values 1)
    and the result is flagged with ``both_empty``. A one-sided empty mask
    scores 0 on the undefined ratio (no positives to be right about).
    """
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth must share a shape")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    if tp == 0 and fp == 0 and fn == 0:
        return {"dice": 1.0, "precision": 1.0, "recall": 1.0, "both_empty": True}
    dice = 2 * tp / (2 * tp + fp + fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return {"dice": dice, "precision": precision, "recall": recall, "both_empty": False}


def auc(scores, truth) -> float:
    """Rank-based (Mann-Whitney) area under the ROC curve with tie correction.

    ``scores`` is a probability or score map, ``truth`` the binary ground
    truth of the same shape. Tied scores contribute half a win through
    average ranks, so constant scores give exactly 0.5.

    Raises
    ------
    ValueError
        On shape mismatch, non-finite scores, or single-class truth.
    """
    scores = np.asarray(scores, dtype=float)
    truth_arr = np.asarray(truth).astype(bool)
    if scores.shape != truth_arr.shape:
        raise ValueError("scores and truth must share a shape")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    flat_scores = scores.ravel()
    flat_truth = truth_arr.ravel()
    n_pos = int(flat_truth.sum())
    n_neg = flat_truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("truth must contain both classes")
    ranks = rankdata(flat_scores, method="average")
    pos_rank_sum = float(ranks[flat_truth].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
