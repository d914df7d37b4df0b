"""Triangulated pixel grids and piecewise-linear maps on them.

A ``TriGrid`` places one vertex per pixel at integer coordinates, indexed
row-major (``vertex id = y*width + x``), and splits every pixel cell into
two triangles along the lower-left to upper-right diagonal.  All maps in
this package are piecewise linear over such a grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFaceError, InvalidDimensionError

__all__ = ["TriGrid", "QCMap", "build_grid", "signed_areas"]


def signed_areas(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Signed area of each face for the given vertex positions.

    Positive for counterclockwise triangles in (x, y) coordinates.
    """
    p0 = points[faces[:, 0]]
    p1 = points[faces[:, 1]]
    p2 = points[faces[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


@dataclass(frozen=True)
class TriGrid:
    """Rectangular pixel grid triangulated into right triangles."""

    width: int
    height: int
    vertices: np.ndarray  # (n, 2) float64, vertex (x, y) at integer coords
    faces: np.ndarray  # (m, 3) int32, counterclockwise

    # lazily computed caches; identical for all maps over this grid
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def vertex_id(self, x: int, y: int) -> int:
        return y * self.width + x

    def boundary_vertex_ids(self) -> np.ndarray:
        """Ids of all vertices on the rectangle boundary."""
        if "boundary" not in self._cache:
            xs, ys = np.meshgrid(np.arange(self.width), np.arange(self.height))
            on_edge = (
                (xs == 0)
                | (xs == self.width - 1)
                | (ys == 0)
                | (ys == self.height - 1)
            )
            self._cache["boundary"] = np.flatnonzero(on_edge.ravel())
        return self._cache["boundary"]

    def hat_gradients(self) -> np.ndarray:
        """Gradients of the P1 hat functions, shape (m, 2, 3).

        ``grad[f, :, i]`` is the gradient of the hat function of the i-th
        corner of face ``f`` over the source triangle.  The gradient of a
        vertex field ``g`` on face ``f`` is ``grad[f] @ g[faces[f]]``.
        """
        if "hat_grad" not in self._cache:
            p0 = self.vertices[self.faces[:, 0]]
            p1 = self.vertices[self.faces[:, 1]]
            p2 = self.vertices[self.faces[:, 2]]
            areas = signed_areas(self.vertices, self.faces)
            if np.any(areas <= 0):
                raise DegenerateFaceError("source grid contains degenerate faces")
            # rotated opposite edges over twice the area
            g = np.empty((self.n_faces, 2, 3))
            for i, (a, b) in enumerate(((p1, p2), (p2, p0), (p0, p1))):
                edge = b - a
                g[:, 0, i] = -edge[:, 1]
                g[:, 1, i] = edge[:, 0]
            g /= (2.0 * areas)[:, None, None]
            self._cache["hat_grad"] = g
        return self._cache["hat_grad"]

    def face_areas(self) -> np.ndarray:
        """Source-triangle areas (0.5 everywhere on a pixel grid)."""
        if "areas" not in self._cache:
            self._cache["areas"] = signed_areas(self.vertices, self.faces)
        return self._cache["areas"]

    def vertex_areas(self) -> np.ndarray:
        """Lumped vertex areas: one third of the incident face areas."""
        if "vertex_areas" not in self._cache:
            w = np.zeros(self.n_vertices)
            np.add.at(w, self.faces.ravel(), np.repeat(self.face_areas() / 3.0, 3))
            self._cache["vertex_areas"] = w
        return self._cache["vertex_areas"]

    def identity_targets(self) -> np.ndarray:
        return self.vertices.copy()


def build_grid(width: int, height: int) -> TriGrid:
    """Build the triangulated grid for a ``width`` x ``height`` image.

    Every pixel cell is split along its lower-left to upper-right diagonal,
    giving ``2*(width-1)*(height-1)`` counterclockwise faces.
    """
    if width < 2 or height < 2:
        raise InvalidDimensionError(
            f"grid dimensions must be at least 2x2, got {width}x{height}"
        )
    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    vertices = np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float64)

    cx, cy = np.meshgrid(np.arange(width - 1), np.arange(height - 1))
    cx = cx.ravel()
    cy = cy.ravel()
    v00 = cy * width + cx
    v10 = v00 + 1
    v01 = v00 + width
    v11 = v01 + 1
    # diagonal v00 -> v11 shared by both triangles
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    faces = np.empty((2 * cx.size, 3), dtype=np.int32)
    faces[0::2] = lower
    faces[1::2] = upper
    return TriGrid(width=width, height=height, vertices=vertices, faces=faces)


@dataclass
class QCMap:
    """Piecewise-linear map of a grid: one target position per vertex."""

    grid: TriGrid
    targets: np.ndarray  # (n, 2) float64

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.shape != (self.grid.n_vertices, 2):
            raise ValueError(
                f"targets shape {self.targets.shape} does not match grid with "
                f"{self.grid.n_vertices} vertices"
            )

    def image_areas(self) -> np.ndarray:
        """Signed areas of the image triangles."""
        return signed_areas(self.targets, self.grid.faces)

    @property
    def is_orientation_preserving(self) -> bool:
        return bool(np.all(self.image_areas() > 0))

    def folded_faces(self) -> np.ndarray:
        """Face ids whose image triangle has non-positive signed area."""
        return np.flatnonzero(self.image_areas() <= 0)

    def complex_targets(self) -> np.ndarray:
        return self.targets[:, 0] + 1j * self.targets[:, 1]
