import math

import numpy as np
import pytest

from conftest import textured_image  # noqa: F401  (fixture reuse elsewhere)
from cephaloqc.errors import DegenerateLandmarkError
from cephaloqc.landmarks import LandmarkSet
from cephaloqc.measurements import (
    MEASUREMENT_NAMES,
    conventional_measurements,
)
from cephaloqc.phantom import LANDMARK_LAYOUT


def layout_landmarks(scale=64.0):
    return LandmarkSet({k: (v[0] * scale, v[1] * scale) for k, v in LANDMARK_LAYOUT.items()})


def test_names_cover_22():
    assert len(MEASUREMENT_NAMES) == 22
    assert len(set(MEASUREMENT_NAMES)) == 22


def test_point_angle_convention():
    marks = layout_landmarks().positions.copy()
    marks["S"] = (0.0, 0.0)
    marks["N"] = (1.0, 0.0)
    marks["A"] = (1.0, 1.0)
    vec = conventional_measurements(LandmarkSet(marks))
    # angle at N between rays N->S and N->A, by the vector-angle oracle
    u = np.array(marks["S"]) - np.array(marks["N"])
    v = np.array(marks["A"]) - np.array(marks["N"])
    expected = math.degrees(
        math.acos(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    )
    assert expected == pytest.approx(90.0)
    assert vec["S-N-A"] == pytest.approx(expected)


def test_collinear_points_give_180():
    marks = layout_landmarks().positions.copy()
    marks["Ba"] = (0.0, 5.0)
    marks["S"] = (5.0, 5.0)
    marks["N"] = (10.0, 5.0)
    vec = conventional_measurements(LandmarkSet(marks))
    assert vec["Ba-S-N"] == pytest.approx(180.0)


def test_ratio_definition():
    marks = layout_landmarks().positions.copy()
    marks["Go"] = (0.0, 0.0)
    marks["Me"] = (10.0, 0.0)
    marks["Gn"] = (10.0, 0.0)
    with pytest.raises(DegenerateLandmarkError):
        # Gn == Me is fine, but make Go == Gn degenerate explicitly
        bad = dict(marks)
        bad["Gn"] = (0.0, 0.0)
        conventional_measurements(LandmarkSet(bad))
    marks["H"] = (5.0, 4.0)
    vec = conventional_measurements(LandmarkSet(marks))
    assert vec["MP-H"] == pytest.approx(4.0)
    assert vec["Go-Gn"] == pytest.approx(10.0)
    assert vec["MP-H/Go-Gn"] == pytest.approx(0.4)


def test_angles_within_range_and_distances_nonnegative():
    vec = conventional_measurements(layout_landmarks())
    values = vec.as_dict()
    for name in ("Ba-S-N", "Ba-S-PNS", "Gn-Go-H", "SN-GoGn", "PNSANS-GoGn",
                 "S-N-A", "S-N-B", "A-N-B", "Ar-Go-Gn", "Ar-Go-N", "N-Go-Gn",
                 "MP"):
        assert 0.0 <= values[name] <= 180.0
    for name in ("Ba-N", "S-N", "Ba-S", "MP-H", "H-Phw", "u1-PNS",
                 "Va-Tant", "ph1-ph2", "Go-Gn"):
        assert values[name] >= 0.0


def test_similarity_invariances():
    base = layout_landmarks()
    vec0 = conventional_measurements(base).values

    theta = 0.6
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    shift = np.array([13.0, -4.0])
    moved = base.transformed(lambda q: rot @ q + shift)
    vec1 = conventional_measurements(moved).values
    assert np.allclose(vec1, vec0, atol=1e-9)

    scaled = base.transformed(lambda q: 2.5 * q)
    vec2 = conventional_measurements(scaled).values
    names = list(MEASUREMENT_NAMES)
    for i, name in enumerate(names):
        if name in ("Ba-N", "S-N", "Ba-S", "MP-H", "H-Phw", "u1-PNS",
                    "Va-Tant", "ph1-ph2", "Go-Gn"):
            assert vec2[i] == pytest.approx(2.5 * vec0[i])
        else:  # angles and the ratio are scale-free
            assert vec2[i] == pytest.approx(vec0[i], abs=1e-9)
