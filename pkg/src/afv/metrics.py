"""Classification scores, flow-fidelity metrics and behavioural statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import check_flow
from .errors import DegenerateStatisticError, ValidationError
from .special import chi2_sf, f_sf, t_two_sided_p

RGB, DENSE_NOISE, RANDOM_DOT = "RGB", "DENSE_NOISE", "RANDOM_DOT"
DATASETS = (RGB, DENSE_NOISE, RANDOM_DOT)
DATASET_ALIASES = {"UCF5": RGB, "AFD5": DENSE_NOISE, "AFF5": RANDOM_DOT}


def canonical_dataset(name: str) -> str:
    key = name.strip().upper()
    key = DATASET_ALIASES.get(key, key)
    if key not in DATASETS:
        raise ValidationError(f"unknown dataset tag {name!r}; expected one of {DATASETS}")
    return key


@dataclass(frozen=True)
class PredictionRecord:
    video_id: str
    dataset: str
    true_label: int
    predicted_label: int


class TestResult(NamedTuple):
    statistic: float
    df: float
    p: float


class AnovaResult(NamedTuple):
    F: float
    df1: int
    df2: int
    p: float
    partial_eta_sq: float
    ss_condition: float
    ss_error: float


class ConditionAccuracy(NamedTuple):
    participants: list
    conditions: list
    matrix: np.ndarray  # participants x conditions
    mean: np.ndarray
    sd: np.ndarray


# -- classification -------------------------------------------------------

def top1_accuracy(preds: Sequence[PredictionRecord]) -> float:
    if not preds:
        raise ValidationError("no prediction records")
    return sum(p.true_label == p.predicted_label for p in preds) / len(preds)


def confusion_matrix(preds: Sequence[PredictionRecord], n_classes: int | None = None) -> np.ndarray:
    if not preds:
        raise ValidationError("no prediction records")
    if n_classes is None:
        n_classes = 1 + max(max(p.true_label, p.predicted_label) for p in preds)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p in preds:
        if not (0 <= p.true_label < n_classes and 0 <= p.predicted_label < n_classes):
            raise ValidationError(f"label out of range for {p.video_id}")
        cm[p.true_label, p.predicted_label] += 1
    return cm


def transfer_score(acc_dense: float, acc_dot: float) -> float:
    """Mean of the two zero-shot appearance-free accuracies."""
    for a in (acc_dense, acc_dot):
        if not 0.0 <= a <= 1.0:
            raise ValidationError(f"accuracy {a} outside [0, 1]")
    return (acc_dense + acc_dot) / 2.0


# -- flow fidelity --------------------------------------------------------

def endpoint_error(flow_a: np.ndarray, flow_b: np.ndarray, mask: np.ndarray | None = None):
    """Weighted mean endpoint error (px) and angular error (degrees).

    The angular error is measured between the augmented vectors
    ``(u, v, 1)``.
    """
    a = check_flow(flow_a).astype(np.float64)
    b = check_flow(flow_b).astype(np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"flow shapes differ: {a.shape} vs {b.shape}")
    w = np.ones(a.shape[:2]) if mask is None else np.asarray(mask, dtype=np.float64)
    if w.shape != a.shape[:2]:
        raise ValidationError("mask shape does not match flow")
    total = w.sum()
    if total <= 0:
        raise ValidationError("mask selects no pixels")
    epe = np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])
    num = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + 1.0
    den = np.sqrt((a[..., 0] ** 2 + a[..., 1] ** 2 + 1.0) * (b[..., 0] ** 2 + b[..., 1] ** 2 + 1.0))
    ang = np.degrees(np.arccos(np.clip(num / den, -1.0, 1.0)))
    return float((epe * w).sum() / total), float((ang * w).sum() / total)


# -- hypothesis tests -----------------------------------------------------

def paired_t_test(x, y) -> TestResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValidationError("paired t needs two equal-length samples with n >= 2")
    d = x - y
    n = len(d)
    sd = d.std(ddof=1)
    if sd == 0:
        raise DegenerateStatisticError("paired differences have zero variance")
    t = d.mean() / (sd / math.sqrt(n))
    df = n - 1
    return TestResult(float(t), df, t_two_sided_p(t, df))


def welch_t_test(x, y) -> TestResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or len(y) < 2:
        raise ValidationError("Welch t needs n >= 2 in each group")
    vx = x.var(ddof=1) / len(x)
    vy = y.var(ddof=1) / len(y)
    se2 = vx + vy
    if se2 == 0:
        raise DegenerateStatisticError("both groups have zero variance")
    t = (x.mean() - y.mean()) / math.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (len(x) - 1) + vy ** 2 / (len(y) - 1))
    return TestResult(float(t), float(df), t_two_sided_p(t, df))


def _check_design(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ValidationError("need a participants x conditions matrix with at least 2 of each")
    if not np.all(np.isfinite(m)):
        raise ValidationError("incomplete design: missing cells")
    return m


def rm_anova(matrix) -> AnovaResult:
    """One-way repeated-measures ANOVA on a participants x conditions matrix.

    No sphericity correction is applied.
    """
    m = _check_design(matrix)
    n, k = m.shape
    grand = m.mean()
    ss_total = ((m - grand) ** 2).sum()
    ss_cond = n * ((m.mean(axis=0) - grand) ** 2).sum()
    resid = m - m.mean(axis=1, keepdims=True) - m.mean(axis=0, keepdims=True) + grand
    ss_err = (resid ** 2).sum()
    if ss_total == 0 or ss_err <= 1e-12 * ss_total:
        raise DegenerateStatisticError("error sum of squares is zero; F is undefined")
    df1 = k - 1
    df2 = (k - 1) * (n - 1)
    F = (ss_cond / df1) / (ss_err / df2)
    eta = ss_cond / (ss_cond + ss_err)
    return AnovaResult(float(F), df1, df2, f_sf(F, df1, df2), float(eta), float(ss_cond), float(ss_err))


def midranks(row) -> np.ndarray:
    """Ranks 1..k with ties sharing the average of their positions."""
    row = np.asarray(row, dtype=np.float64)
    order = np.argsort(row, kind="mergesort")
    ranks = np.empty(len(row))
    sorted_vals = row[order]
    i = 0
    while i < len(row):
        j = i
        while j + 1 < len(row) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def friedman_test(matrix) -> TestResult:
    m = _check_design(matrix)
    n, k = m.shape
    ranks = np.apply_along_axis(midranks, 1, m)
    rsum = ranks.sum(axis=0)
    chi = 12.0 * (rsum ** 2).sum() / (n * k * (k + 1)) - 3.0 * n * (k + 1)
    df = k - 1
    return TestResult(float(chi), df, chi2_sf(chi, df))


def accuracy_by_condition(rows) -> ConditionAccuracy:
    """Per-(participant, condition) fraction correct plus group mean and
    sample SD.

    ``rows`` is an iterable of ``(participant, condition, correct)``.
    """
    counts: dict = {}
    participants: list = []
    conditions: list = []
    for participant, condition, correct in rows:
        if participant not in participants:
            participants.append(participant)
        if condition not in conditions:
            conditions.append(condition)
        c = counts.setdefault((participant, condition), [0, 0])
        c[0] += bool(correct)
        c[1] += 1
    if not counts:
        raise ValidationError("no response rows")
    missing = [(p, c) for p in participants for c in conditions if (p, c) not in counts]
    if missing:
        shown = ", ".join(f"{p}/{c}" for p, c in missing[:10])
        raise ValidationError(f"incomplete design, missing cells: {shown}")
    mat = np.array([[counts[p, c][0] / counts[p, c][1] for c in conditions] for p in participants])
    sd = mat.std(axis=0, ddof=1) if len(participants) > 1 else np.zeros(len(conditions))
    return ConditionAccuracy(participants, conditions, mat, mat.mean(axis=0), sd)
