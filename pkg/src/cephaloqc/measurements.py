"""The 22 conventional cephalometric measurements.

Distances are in pixels, angles in degrees.  Point angles are measured at
the middle-named landmark between the rays toward the outer two; angles
between two lines (SN-GoGn, PNSANS-GoGn, and the mandibular-plane
orientation MP) are the acute angle between direction vectors.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLandmarkError
from .features import distance_features
from .landmarks import LandmarkSet

__all__ = ["MEASUREMENT_NAMES", "MeasurementVector", "conventional_measurements"]

MEASUREMENT_NAMES = (
    # nasal cavity and nasopharyngeal space
    "Ba-N",
    "S-N",
    "Ba-S",
    "Ba-S-N",
    "Ba-S-PNS",
    # hyoid position
    "MP-H",
    "Gn-Go-H",
    "MP-H/Go-Gn",
    "H-Phw",
    # soft tissue
    "u1-PNS",
    "Va-Tant",
    "ph1-ph2",
    # maxilla and mandible
    "Go-Gn",
    "MP",
    "SN-GoGn",
    "PNSANS-GoGn",
    "S-N-A",
    "S-N-B",
    "A-N-B",
    "Ar-Go-Gn",
    "Ar-Go-N",
    "N-Go-Gn",
)


@dataclass
class MeasurementVector:
    """The 22 named scalars, ordered as MEASUREMENT_NAMES."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(MEASUREMENT_NAMES),):
            raise ValueError(f"expected {len(MEASUREMENT_NAMES)} measurements")

    def as_dict(self) -> dict:
        return dict(zip(MEASUREMENT_NAMES, self.values.tolist()))

    def __getitem__(self, name: str) -> float:
        return float(self.values[MEASUREMENT_NAMES.index(name)])


def _ray(frm, to, what):
    v = to - frm
    if np.linalg.norm(v) == 0:
        raise DegenerateLandmarkError(f"coincident landmarks define the ray {what}")
    return v


def _angle_at(mid, first, last, what) -> float:
    """Angle in degrees at ``mid`` between rays mid->first and mid->last."""
    u = _ray(mid, first, what)
    v = _ray(mid, last, what)
    cosine = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, max(-1.0, cosine))))


def _line_angle(u, v) -> float:
    """Acute angle in degrees between two line directions."""
    cosine = abs(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, cosine)))


def conventional_measurements(landmarks: LandmarkSet) -> MeasurementVector:
    """Measure all 22 conventional parameters from one landmark set."""
    p = {name: landmarks[name] for name in landmarks.positions}
    dist = lambda a, b: float(np.linalg.norm(p[a] - p[b]))

    mp_h, h_phw, ph1_ph2 = distance_features(landmarks)
    go_gn = dist("Go", "Gn")
    if go_gn == 0:
        raise DegenerateLandmarkError("Go and Gn coincide; mandibular body undefined")

    sn = _ray(p["S"], p["N"], "S-N")
    go_gn_dir = _ray(p["Go"], p["Gn"], "Go-Gn")
    palate = _ray(p["PNS"], p["ANS"], "PNS-ANS")
    mandibular_plane = _ray(p["Go"], p["Me"], "Go-Me")

    values = [
        dist("Ba", "N"),
        dist("S", "N"),
        dist("Ba", "S"),
        _angle_at(p["S"], p["Ba"], p["N"], "Ba-S-N"),
        _angle_at(p["S"], p["Ba"], p["PNS"], "Ba-S-PNS"),
        mp_h,
        _angle_at(p["Go"], p["Gn"], p["H"], "Gn-Go-H"),
        mp_h / go_gn,
        h_phw,
        dist("u1", "PNS"),
        dist("Va", "Tant"),
        ph1_ph2,
        go_gn,
        # mandibular-plane orientation, referenced to the S-N line
        _line_angle(sn, mandibular_plane),
        _line_angle(sn, go_gn_dir),
        _line_angle(palate, go_gn_dir),
        _angle_at(p["N"], p["S"], p["A"], "S-N-A"),
        _angle_at(p["N"], p["S"], p["B"], "S-N-B"),
        _angle_at(p["N"], p["A"], p["B"], "A-N-B"),
        _angle_at(p["Go"], p["Ar"], p["Gn"], "Ar-Go-Gn"),
        _angle_at(p["Go"], p["Ar"], p["N"], "Ar-Go-N"),
        _angle_at(p["Go"], p["N"], p["Gn"], "N-Go-Gn"),
    ]
    return MeasurementVector(values=np.array(values))
