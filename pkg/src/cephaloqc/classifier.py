"""Distance-threshold classifier and the mixing-weight sweep.

Training computes the control-class mean feature vector and the cutting
threshold on L2 distances to it that maximizes

    #{control: d < t} + #{osa: d > t}

realized as the midpoint of the adjacent sorted-distance pair achieving
the maximum (the smallest such candidate when tied).  Prediction compares
a new subject's distance against the threshold; the boundary d = d_opt
counts as control.

Also provides the deterministic linear soft-margin SVM used as the
conventional-measurement baseline.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCohortError, InvalidInputError
from .features import MixWeights
from .records import CONTROL, OSA
from .stats import SelectionResult

__all__ = [
    "TrainedModel",
    "train",
    "predict",
    "optimal_threshold",
    "SweepConfig",
    "sweep_candidates",
    "sweep_weights",
    "BaselineModel",
    "train_baseline",
    "predict_baseline",
]


@dataclass
class TrainedModel:
    """Control mean, cutting threshold, and the training-time context."""

    c_mean: np.ndarray
    d_opt: float
    selection: SelectionResult = None
    weights: MixWeights = None
    dist_norm_maxima: np.ndarray = None
    window: int = None


def optimal_threshold(distances, labels):
    """Best cutting threshold and the correct count it achieves.

    Candidates are the midpoints of adjacent sorted distances plus
    below-minimum and above-maximum sentinels; scanning is exhaustive, so
    the returned threshold is a true argmax (smallest when tied).  The
    threshold never goes negative.
    """
    d = np.asarray(distances, dtype=np.float64)
    labs = np.asarray(labels)
    is_control = labs == CONTROL
    is_osa = labs == OSA
    ds = np.unique(d)
    candidates = [max(0.0, ds[0] - 1.0)]
    candidates.extend(((ds[:-1] + ds[1:]) / 2.0).tolist())
    candidates.append(ds[-1] + 1.0)
    best_t = candidates[0]
    best_correct = -1
    for t in candidates:
        correct = int(np.sum(is_control & (d < t)) + np.sum(is_osa & (d > t)))
        if correct > best_correct:
            best_correct = correct
            best_t = t
    return float(best_t), best_correct


def train(
    features,
    labels,
    selection: SelectionResult = None,
    weights: MixWeights = None,
    dist_norm_maxima=None,
    window: int = None,
) -> TrainedModel:
    """Fit the control mean and cutting threshold on trimmed features."""
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels)
    control_rows = feats[labs == CONTROL]
    osa_rows = feats[labs == OSA]
    if control_rows.shape[0] == 0 or osa_rows.shape[0] == 0:
        raise InvalidCohortError("training needs both control and osa subjects")
    c_mean = control_rows.mean(axis=0)
    d = np.linalg.norm(feats - c_mean, axis=1)
    d_opt, _ = optimal_threshold(d, labs)
    return TrainedModel(
        c_mean=c_mean,
        d_opt=d_opt,
        selection=selection,
        weights=weights,
        dist_norm_maxima=None
        if dist_norm_maxima is None
        else np.asarray(dist_norm_maxima, dtype=np.float64),
        window=window,
    )


def predict(model: TrainedModel, feature_row) -> str:
    """Control when the distance to the control mean is within d_opt."""
    row = np.asarray(feature_row, dtype=np.float64)
    if row.shape != model.c_mean.shape:
        raise InvalidInputError(
            f"feature row length {row.shape} does not match model "
            f"{model.c_mean.shape}"
        )
    d_new = float(np.linalg.norm(row - model.c_mean))
    return CONTROL if d_new <= model.d_opt else OSA


@dataclass(frozen=True)
class SweepConfig:
    """Density and fold count of the unit-circle weight sweep."""

    rho: float = 0.25
    folds: int = 10

    def __post_init__(self):
        if not 0.0 < self.rho <= 0.5:
            raise InvalidInputError("rho must lie in (0, 1/2]")
        if self.folds < 2:
            raise InvalidInputError("cross-validation needs at least 2 folds")


def sweep_candidates(rho: float):
    """Weights (cos k*rho*pi, sin k*rho*pi) for k = 0 .. floor(1/(2 rho))."""
    if not 0.0 < rho <= 0.5:
        raise InvalidInputError("rho must lie in (0, 1/2]")
    count = int(math.floor(1.0 / (2.0 * rho) + 1e-12))
    out = []
    for k in range(count + 1):
        alpha = math.cos(k * rho * math.pi)
        beta = math.sin(k * rho * math.pi)
        # endpoint values may undershoot 0 by an ulp
        out.append(MixWeights(mix_alpha=max(0.0, alpha), mix_beta=max(0.0, beta)))
    return out


def sweep_weights(config: SweepConfig, evaluate_candidate):
    """Best-scoring weights over the sweep; ties go to the smaller k.

    ``evaluate_candidate(weights)`` must return the cross-validation
    accuracy of the pipeline rebuilt with those weights.
    """
    best = None
    best_acc = -1.0
    for cand in sweep_candidates(config.rho):
        acc = float(evaluate_candidate(cand))
        if acc > best_acc:
            best = cand
            best_acc = acc
    return best, best_acc


@dataclass
class BaselineModel:
    """Linear soft-margin SVM with training standardization."""

    coef: np.ndarray
    intercept: float
    feature_mean: np.ndarray
    feature_std: np.ndarray


def train_baseline(
    measurements,
    labels,
    lam: float = 1e-2,
    iterations: int = 100_000,
) -> BaselineModel:
    """Deterministic full-batch subgradient descent on the hinge loss.

    Minimizes lam/2 ||w||^2 + mean(max(0, 1 - y (w x + b))) on columns
    standardized with training statistics, with the osa class as +1.
    Full-batch updates and the 1/(lam t) step schedule make the result
    reproducible with no randomness at all.
    """
    feats = np.asarray(measurements, dtype=np.float64)
    labs = np.asarray(labels)
    y = np.where(labs == OSA, 1.0, -1.0)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidCohortError("baseline training needs both classes")
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    x = (feats - mean) / std

    n = x.shape[0]
    w = np.zeros(x.shape[1])
    b = 0.0
    for t in range(iterations):
        eta = 1.0 / (lam * (t + 1))
        margin = y * (x @ w + b)
        active = margin < 1.0
        grad_w = lam * w - (y[active] @ x[active]) / n
        grad_b = -np.sum(y[active]) / n
        w -= eta * grad_w
        b -= eta * grad_b
    return BaselineModel(coef=w, intercept=float(b), feature_mean=mean, feature_std=std)


def predict_baseline(model: BaselineModel, rows):
    """Labels for one row or a matrix of measurement rows."""
    arr = np.asarray(rows, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    scores = ((arr - model.feature_mean) / model.feature_std) @ model.coef + (
        model.intercept
    )
    labels = np.where(scores > 0, OSA, CONTROL)
    return labels[0] if single else labels
