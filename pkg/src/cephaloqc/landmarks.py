"""Craniofacial landmark schema.

Eighteen named points are labelled per subject.  The first fifteen carry
deformation windows; the pharyngeal trio (Phw, ph1, ph2) varies too much
between subjects to compare pointwise and contributes only through the
distance features.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidLandmarkError

__all__ = [
    "LANDMARK_NAMES",
    "WINDOW_LANDMARKS",
    "DISTANCE_ONLY_LANDMARKS",
    "LandmarkSet",
]

LANDMARK_NAMES = (
    "N",
    "S",
    "Ba",
    "ANS",
    "PNS",
    "A",
    "B",
    "Gn",
    "Me",
    "Go",
    "Ar",
    "H",
    "Tant",
    "u1",
    "Va",
    "Phw",
    "ph1",
    "ph2",
)

WINDOW_LANDMARKS = LANDMARK_NAMES[:15]
DISTANCE_ONLY_LANDMARKS = LANDMARK_NAMES[15:]


@dataclass
class LandmarkSet:
    """All 18 named landmark positions, in pixel coordinates."""

    positions: dict

    def __post_init__(self):
        missing = [k for k in LANDMARK_NAMES if k not in self.positions]
        if missing:
            raise InvalidLandmarkError(f"missing landmark(s): {', '.join(missing)}")
        unknown = [k for k in self.positions if k not in LANDMARK_NAMES]
        if unknown:
            raise InvalidLandmarkError(f"unknown landmark(s): {', '.join(unknown)}")
        clean = {}
        for name in LANDMARK_NAMES:
            x, y = self.positions[name]
            if not (np.isfinite(x) and np.isfinite(y)):
                raise InvalidLandmarkError(f"landmark {name} is not finite")
            clean[name] = (float(x), float(y))
        self.positions = clean

    def __getitem__(self, name: str):
        return np.array(self.positions[name])

    def array(self, names=LANDMARK_NAMES) -> np.ndarray:
        """Positions stacked in the given name order, shape (k, 2)."""
        return np.array([self.positions[n] for n in names])

    def window_array(self) -> np.ndarray:
        """The 15 window landmarks in schema order."""
        return self.array(WINDOW_LANDMARKS)

    def validate_bounds(self, width: int, height: int) -> None:
        for name, (x, y) in self.positions.items():
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise InvalidLandmarkError(
                    f"landmark {name} at ({x}, {y}) lies outside the "
                    f"{width}x{height} image"
                )

    def transformed(self, fn) -> "LandmarkSet":
        """New set with ``fn`` applied to every position array."""
        return LandmarkSet(
            {name: tuple(fn(np.array(pos))) for name, pos in self.positions.items()}
        )
