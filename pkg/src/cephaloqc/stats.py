"""Two-sample screening statistics and top-K feature selection.

Per-feature discriminating power is a two-sided Welch t-test p-value,
stabilized by a leave-one-out bagging scheme that keeps, for each feature,
the minimum p over all single-subject exclusions.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidCohortError, InvalidKError, InvalidSampleError

__all__ = [
    "welch_t_p",
    "welch_p_columns",
    "bagged_p_values",
    "select_top_k",
    "SelectionResult",
    "apply_selection",
]


def welch_p_columns(sample_a: np.ndarray, sample_b: np.ndarray) -> np.ndarray:
    """Two-sided Welch p-value per column of two (n, F) sample blocks."""
    a = np.ascontiguousarray(sample_a, dtype=np.float64)
    b = np.ascontiguousarray(sample_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise InvalidSampleError("samples must be (n, F) blocks over equal features")
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise InvalidSampleError("each sample needs at least 2 values")
    mean_a = np.mean(a, axis=0)
    mean_b = np.mean(b, axis=0)
    var_a = np.var(a, axis=0, ddof=1)
    var_b = np.var(b, axis=0, ddof=1)
    return _welch_p_from_moments(mean_a, var_a, na, mean_b, var_b, nb)


def _welch_p_from_moments(mean_a, var_a, na, mean_b, var_b, nb):
    qa = var_a / na
    qb = var_b / nb
    se2 = qa + qb
    p = np.empty(np.shape(se2), dtype=np.float64)
    degenerate = se2 == 0.0
    # zero combined variance: p = 1 when the means agree, else certain separation
    p[degenerate] = np.where(
        mean_a[degenerate] == mean_b[degenerate], 1.0, 0.0
    )
    ok = ~degenerate
    if np.any(ok):
        t2 = (mean_a[ok] - mean_b[ok]) ** 2 / se2[ok]
        df = se2[ok] ** 2 / (
            qa[ok] ** 2 / (na - 1) + qb[ok] ** 2 / (nb - 1)
        )
        p[ok] = kernels.betainc(df / 2.0, 0.5, df / (df + t2))
    return p


def welch_t_p(sample_a, sample_b) -> float:
    """Two-sided Welch t-test p-value between two scalar samples."""
    a = np.ascontiguousarray(sample_a, dtype=np.float64).reshape(-1, 1)
    b = np.ascontiguousarray(sample_b, dtype=np.float64).reshape(-1, 1)
    return float(welch_p_columns(a, b)[0])


def _class_blocks(features, labels):
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[0] != labs.shape[0]:
        raise InvalidCohortError("features and labels must pair up row-wise")
    classes = np.unique(labs)
    if classes.size != 2:
        raise InvalidCohortError(f"expected exactly 2 classes, got {classes.size}")
    return feats, labs == classes[0]


def bagged_p_values(features, labels) -> np.ndarray:
    """Leave-one-out minimum of the per-feature Welch p-values.

    For every subject, the p-values are recomputed with that subject
    excluded; the reported p per feature is the minimum over exclusions.
    """
    feats, in_first = _class_blocks(features, labels)
    n = feats.shape[0]
    if np.sum(in_first) < 3 or np.sum(~in_first) < 3:
        raise InvalidCohortError("both classes need at least 3 members for bagging")
    best = np.full(feats.shape[1], np.inf)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        a = np.ascontiguousarray(feats[keep & in_first])
        b = np.ascontiguousarray(feats[keep & ~in_first])
        np.minimum(best, welch_p_columns(a, b), out=best)
        keep[i] = True
    return best


@dataclass
class SelectionResult:
    """Top-K deformation features by ascending p-value."""

    p_values: np.ndarray
    selected_indices: np.ndarray
    k: int


def select_top_k(p_values, k: int) -> SelectionResult:
    """Indices of the K smallest p-values; ties break toward lower index."""
    p = np.asarray(p_values, dtype=np.float64)
    if not 1 <= k <= p.size:
        raise InvalidKError(f"K must lie in [1, {p.size}], got {k}")
    order = np.lexsort((np.arange(p.size), p))
    return SelectionResult(p_values=p, selected_indices=order[:k], k=k)


def apply_selection(feature_matrix, selection: SelectionResult) -> np.ndarray:
    """Trim rows to the selected deformation features plus the 3 distances.

    The distance features occupy the last three columns and bypass ranking;
    they are always retained.
    """
    feats = np.asarray(feature_matrix, dtype=np.float64)
    single = feats.ndim == 1
    if single:
        feats = feats[None, :]
    deform = feats[:, :-3]
    dists = feats[:, -3:]
    trimmed = np.hstack([deform[:, selection.selected_indices], dists])
    return trimmed[0] if single else trimmed
