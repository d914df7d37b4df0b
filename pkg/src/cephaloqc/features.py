"""Deformation-index features around landmarks.

Each subject is described by the per-vertex conformality distortion inside
a square window around every window landmark, mixed into a scalar
deformation index, plus three cohort-normalized clinical distances
(MP-H, H-Phw, ph1-ph2) appended at the end.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateLandmarkError,
    InvalidInputError,
    InvalidWindowError,
    NormalizationError,
)
from .landmarks import WINDOW_LANDMARKS, LandmarkSet

__all__ = [
    "MixWeights",
    "fold_argument",
    "deformation_index",
    "extract_windows",
    "extract_windows_at",
    "distance_features",
    "normalize_distances",
    "assemble_feature_vector",
    "template_mu",
    "feature_names",
    "DISTANCE_FEATURE_NAMES",
]

DISTANCE_FEATURE_NAMES = ("MP-H", "H-Phw", "ph1-ph2")


@dataclass(frozen=True)
class MixWeights:
    """Unit-circle mixing weights of |mu| and arg(mu) in the index."""

    mix_alpha: float
    mix_beta: float

    def __post_init__(self):
        if self.mix_alpha < 0 or self.mix_beta < 0:
            raise InvalidInputError("mixing weights must be nonnegative")
        if abs(self.mix_alpha**2 + self.mix_beta**2 - 1.0) > 1e-9:
            raise InvalidInputError("mixing weights must lie on the unit circle")


def fold_argument(mu):
    """|principal argument| of mu, folded into [0, pi]; 0 for mu = 0.

    Folding identifies conjugate distortions, matching the convention that
    the argument of the coefficient ranges over [0, pi].
    """
    return np.abs(np.angle(mu))


def deformation_index(mu, weights: MixWeights):
    """mix_alpha*|mu| + mix_beta*arg_folded(mu)/pi, elementwise."""
    return weights.mix_alpha * np.abs(mu) + weights.mix_beta * (
        fold_argument(mu) / np.pi
    )


def extract_windows_at(mu_vertex: np.ndarray, points: np.ndarray, w: int) -> np.ndarray:
    """w x w vertex blocks centered at each point, concatenated.

    Points are snapped to the nearest vertex; blocks are serialized row by
    row from the top (rows scan top to bottom, columns left to right) and
    clamped at the image border (border vertices repeat).
    """
    if w < 1 or w % 2 == 0:
        raise InvalidWindowError(f"window size must be odd and positive, got {w}")
    height, width = mu_vertex.shape
    half = w // 2
    offsets = np.arange(w) - half
    out = np.empty(points.shape[0] * w * w, dtype=mu_vertex.dtype)
    for k, (x, y) in enumerate(points):
        xs = np.clip(int(round(x)) + offsets, 0, width - 1)
        ys = np.clip(int(round(y)) + offsets, 0, height - 1)
        out[k * w * w : (k + 1) * w * w] = mu_vertex[np.ix_(ys, xs)].ravel()
    return out


def extract_windows(mu_vertex: np.ndarray, ref_landmarks: LandmarkSet, w: int):
    """Windows at the 15 window landmarks in schema order (15*w*w values)."""
    return extract_windows_at(mu_vertex, ref_landmarks.window_array(), w)


def distance_features(landmarks: LandmarkSet):
    """(MP-H, H-Phw, ph1-ph2) in pixels.

    MP-H is the perpendicular distance from the hyoid point H to the
    mandibular plane, taken as the line through Go and Me.
    """
    go = landmarks["Go"]
    me = landmarks["Me"]
    h = landmarks["H"]
    chord = me - go
    length = np.linalg.norm(chord)
    if length == 0:
        raise DegenerateLandmarkError("Go and Me coincide; mandibular plane undefined")
    mp_h = abs(chord[0] * (h - go)[1] - chord[1] * (h - go)[0]) / length
    h_phw = float(np.linalg.norm(h - landmarks["Phw"]))
    ph1_ph2 = float(np.linalg.norm(landmarks["ph1"] - landmarks["ph2"]))
    return float(mp_h), h_phw, ph1_ph2


def normalize_distances(cohort) -> np.ndarray:
    """Divide each distance column by its cohort maximum (made 1 exactly)."""
    arr = np.asarray(cohort, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise InvalidInputError("cohort must be a nonempty (n, 3) distance table")
    if np.any(arr < 0):
        raise InvalidInputError("distances must be nonnegative")
    maxima = arr.max(axis=0)
    if np.any(maxima <= 0):
        raise NormalizationError("a distance column has zero maximum")
    return arr / maxima


def assemble_feature_vector(windows, weights: MixWeights, norm_dists) -> np.ndarray:
    """Deformation indices of the windows with the distances appended."""
    windows = np.asarray(windows)
    norm_dists = np.asarray(norm_dists, dtype=np.float64)
    if norm_dists.shape != (3,):
        raise InvalidInputError("expected exactly 3 normalized distances")
    if windows.ndim != 1 or windows.size % len(WINDOW_LANDMARKS) != 0:
        raise InvalidInputError(
            f"window block length {windows.size} does not cover "
            f"{len(WINDOW_LANDMARKS)} landmarks evenly"
        )
    return np.concatenate([deformation_index(windows, weights), norm_dists])


def template_mu(control_fields) -> np.ndarray:
    """Pointwise complex mean of vertex coefficient fields (diagnostic)."""
    fields = [np.asarray(f) for f in control_fields]
    if not fields:
        raise InvalidInputError("need at least one field")
    shape = fields[0].shape
    if any(f.shape != shape for f in fields):
        raise InvalidInputError("fields must share one shape")
    return np.mean(np.stack(fields), axis=0)


def feature_names(w: int):
    """Column identifiers: landmark window offsets, then distance names."""
    if w < 1 or w % 2 == 0:
        raise InvalidWindowError(f"window size must be odd and positive, got {w}")
    half = w // 2
    names = [
        f"{lm}[{dy:+d},{dx:+d}]"
        for lm in WINDOW_LANDMARKS
        for dy in range(-half, half + 1)
        for dx in range(-half, half + 1)
    ]
    names.extend(DISTANCE_FEATURE_NAMES)
    return names
