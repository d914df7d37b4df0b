import numpy as np
import pytest

from cephaloqc.grid import QCMap, build_grid


@pytest.fixture
def grid17():
    return build_grid(17, 17)


def affine_map(grid, a, c, b=0.0):
    """Piecewise-linear sampling of f(z) = a z + c conj(z) + b."""
    z = grid.vertices[:, 0] + 1j * grid.vertices[:, 1]
    w = a * z + c * np.conj(z) + b
    return QCMap(grid, np.column_stack([w.real, w.imag]))


def textured_image(n, seed=0):
    """Smooth synthetic image with central texture and a flat border."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    c = (n - 1) / 2.0
    r2 = (xx - c) ** 2 + (yy - c) ** 2
    img = np.exp(-r2 / (2 * (0.22 * n) ** 2))
    img += 0.3 * np.sin(2 * np.pi * xx / (n / 6)) * np.sin(2 * np.pi * yy / (n / 5)) * np.exp(
        -r2 / (2 * (0.18 * n) ** 2)
    )
    img += 0.2 * np.cos(2 * np.pi * (xx + yy) / (n / 4)) * np.exp(-r2 / (2 * (0.15 * n) ** 2))
    img += 0.05 * rng.standard_normal((n, n)) * np.exp(-r2 / (2 * (0.2 * n) ** 2))
    return img


def ring_landmarks(n, outer=0.30, inner=0.15, n_outer=10, n_inner=5):
    """15 integer landmark positions on two rings around the center."""
    c = (n - 1) / 2.0
    pts = []
    for ang in np.linspace(0, 2 * np.pi, n_outer, endpoint=False):
        r = outer * (n - 1)
        pts.append((round(c + r * np.cos(ang)), round(c + r * np.sin(ang))))
    for ang in np.linspace(0.3, 2 * np.pi + 0.3, n_inner, endpoint=False):
        r = inner * (n - 1)
        pts.append((round(c + r * np.cos(ang)), round(c + r * np.sin(ang))))
    return np.array(pts, dtype=float)
