"""Beltrami coefficients of piecewise-linear maps.

A piecewise-linear map has constant Wirtinger derivatives on each face;
their ratio ``mu = f_zbar / f_z`` measures the local conformality
distortion.  ``|mu| < 1`` on every face exactly when the map is an
orientation-preserving homeomorphism of the grid.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonHomeomorphicMapError, NotQuasiConformalError
from .grid import QCMap, TriGrid

__all__ = [
    "BeltramiField",
    "ComplexDeriv",
    "wirtinger_derivatives",
    "beltrami_of_map",
    "beltrami_unchecked",
    "distortion_axes",
    "face_to_vertex",
    "vertex_to_face",
    "clamp_magnitude",
]


@dataclass
class ComplexDeriv:
    """Per-face Wirtinger derivatives (half-factor convention)."""

    fz: np.ndarray
    fzbar: np.ndarray


@dataclass
class BeltramiField:
    """One complex conformality-distortion value per face."""

    grid: TriGrid
    values: np.ndarray  # (m,) complex128

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_faces,):
            raise ValueError(
                f"field length {self.values.shape} does not match "
                f"{self.grid.n_faces} faces"
            )


def wirtinger_derivatives(qcmap: QCMap) -> ComplexDeriv:
    """Face-wise derivatives f_z and f_zbar of a piecewise-linear map.

    Uses the half-factor convention f_z = (f_x - i f_y)/2 and
    f_zbar = (f_x + i f_y)/2, which leaves the ratio mu unchanged.
    """
    grad = qcmap.grid.hat_gradients()  # (m, 2, 3); raises on degenerate faces
    f = qcmap.complex_targets()[qcmap.grid.faces]  # (m, 3)
    fx = np.einsum("mi,mi->m", grad[:, 0, :], f)
    fy = np.einsum("mi,mi->m", grad[:, 1, :], f)
    return ComplexDeriv(fz=0.5 * (fx - 1j * fy), fzbar=0.5 * (fx + 1j * fy))


def beltrami_of_map(qcmap: QCMap) -> BeltramiField:
    """Beltrami coefficient mu = f_zbar / f_z of an orientation-preserving map.

    Raises ``NonHomeomorphicMapError`` (with the offending face ids) when any
    image triangle has non-positive signed area or a face has f_z = 0.
    """
    deriv = wirtinger_derivatives(qcmap)
    areas = qcmap.image_areas()
    bad = np.flatnonzero((areas <= 0) | (deriv.fz == 0))
    if bad.size:
        raise NonHomeomorphicMapError(
            f"map is not an orientation-preserving homeomorphism on "
            f"{bad.size} of {qcmap.grid.n_faces} faces",
            face_ids=bad,
        )
    return BeltramiField(grid=qcmap.grid, values=deriv.fzbar / deriv.fz)


def beltrami_unchecked(qcmap: QCMap, cap: float = 0.99) -> BeltramiField:
    """Beltrami coefficient without the homeomorphism check.

    Intermediate maps inside the registration loop may fold; here folded
    or degenerate faces are clamped to magnitude ``cap`` instead of raising,
    leaving repair to the next solver projection.
    """
    deriv = wirtinger_derivatives(qcmap)
    fz = deriv.fz.copy()
    tiny = fz == 0
    fz[tiny] = 1e-15
    mu = deriv.fzbar / fz
    mu[tiny] = cap
    return BeltramiField(grid=qcmap.grid, values=clamp_magnitude(mu, cap))


def clamp_magnitude(mu: np.ndarray, cap: float) -> np.ndarray:
    """Rescale entries with ``|mu| > cap`` onto the cap circle."""
    mu = np.asarray(mu, dtype=np.complex128)
    mag = np.abs(mu)
    over = mag > cap
    if np.any(over):
        mu = mu.copy()
        mu[over] *= cap / mag[over]
    return mu


def distortion_axes(mu: complex):
    """Axes and factors of the infinitesimal circle-to-ellipse distortion.

    Returns ``(magnify_angle, magnify_factor, contract_angle,
    contract_factor)``: maximal magnification ``1+|mu|`` along angle
    ``arg(mu)/2`` and maximal contraction ``1-|mu|`` along the orthogonal
    angle ``(arg(mu)-pi)/2``.
    """
    mu = complex(mu)
    mag = abs(mu)
    if mag >= 1.0:
        raise NotQuasiConformalError(f"|mu| = {mag} >= 1 is not quasi-conformal")
    ang = math.atan2(mu.imag, mu.real) if mag > 0 else 0.0
    return (ang / 2.0, 1.0 + mag, (ang - math.pi) / 2.0, 1.0 - mag)


def face_to_vertex(field: BeltramiField) -> np.ndarray:
    """Area-weighted average of incident face values at each vertex.

    Returns a complex array of shape (height, width).
    """
    grid = field.grid
    areas = grid.face_areas()
    acc = np.zeros(grid.n_vertices, dtype=np.complex128)
    wsum = np.zeros(grid.n_vertices)
    fw = np.repeat(areas, 3)
    np.add.at(acc, grid.faces.ravel(), np.repeat(field.values * areas, 3))
    np.add.at(wsum, grid.faces.ravel(), fw)
    return (acc / wsum).reshape(grid.height, grid.width)


def vertex_to_face(grid: TriGrid, vertex_values: np.ndarray) -> np.ndarray:
    """Mean of the three corner values on each face."""
    flat = np.asarray(vertex_values).reshape(-1)
    return flat[grid.faces].mean(axis=1)
