"""Subject records: the unit of ingestion."""

from dataclasses import dataclass

from .errors import InvalidInputError
from .landmarks import LandmarkSet
from .registration import ImageGray

__all__ = ["SubjectRecord", "CONTROL", "OSA", "UNLABELED", "LABELS"]

CONTROL = "control"
OSA = "osa"
UNLABELED = "unlabeled"
LABELS = (CONTROL, OSA, UNLABELED)


@dataclass
class SubjectRecord:
    """One subject: image, 18 named landmarks, and a class label."""

    id: str
    image: ImageGray
    landmarks: LandmarkSet
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise InvalidInputError(
                f"label {self.label!r} not one of {', '.join(LABELS)}"
            )
        self.landmarks.validate_bounds(self.image.width, self.image.height)
