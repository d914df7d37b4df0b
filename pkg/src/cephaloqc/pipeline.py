"""Cohort feature extraction: registration to a reference, then windows.

Every subject is registered onto the reference subject's grid; the
vertex-averaged conformality distortion is sampled in windows around the
reference landmarks, giving per-subject complex window blocks.  The three
clinical distances come from each subject's own landmarks.  Registration
is the expensive step, so window blocks are memoized by
(reference id, subject id, window size).
"""

from dataclasses import dataclass

import numpy as np

from .beltrami import face_to_vertex
from .features import distance_features, extract_windows
from .registration import RegParams, register

__all__ = ["CohortFeatures", "RegistrationCache", "extract_cohort_features"]


class RegistrationCache:
    """Memo of window blocks keyed by (ref id, subject id, window size)."""

    def __init__(self):
        self._blocks = {}
        self.hits = 0
        self.misses = 0

    def get(self, key):
        block = self._blocks.get(key)
        if block is not None:
            self.hits += 1
        return block

    def put(self, key, block):
        self.misses += 1
        self._blocks[key] = block


@dataclass
class CohortFeatures:
    """Window blocks and raw distances for a cohort against one reference."""

    subject_ids: list
    labels: np.ndarray
    windows: np.ndarray  # (n_subjects, 15*w*w) complex
    raw_distances: np.ndarray  # (n_subjects, 3)
    window_size: int
    reference_id: str


def subject_windows(reference, subject, w, params, cache=None):
    """Window block of one subject registered onto the reference."""
    key = (reference.id, subject.id, w)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    result = register(
        reference.image,
        subject.image,
        reference.landmarks.window_array(),
        subject.landmarks.window_array(),
        params,
    )
    mu_vertex = face_to_vertex(result.mu)
    block = extract_windows(mu_vertex, reference.landmarks, w)
    if cache is not None:
        cache.put(key, block)
    return block


def extract_cohort_features(
    records,
    reference,
    w: int = 9,
    params: RegParams = None,
    cache: RegistrationCache = None,
) -> CohortFeatures:
    """Register every record to the reference and collect features."""
    if params is None:
        params = RegParams()
    blocks = []
    dists = []
    for rec in records:
        blocks.append(subject_windows(reference, rec, w, params, cache))
        dists.append(distance_features(rec.landmarks))
    return CohortFeatures(
        subject_ids=[rec.id for rec in records],
        labels=np.array([rec.label for rec in records]),
        windows=np.array(blocks),
        raw_distances=np.array(dists),
        window_size=w,
        reference_id=reference.id,
    )
