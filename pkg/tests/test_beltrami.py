import math

import numpy as np
import pytest

from conftest import affine_map
from cephaloqc.beltrami import (
    beltrami_of_map,
    distortion_axes,
    face_to_vertex,
    vertex_to_face,
    wirtinger_derivatives,
)
from cephaloqc.errors import NonHomeomorphicMapError, NotQuasiConformalError
from cephaloqc.grid import QCMap, build_grid


def test_identity_derivatives(grid17):
    deriv = wirtinger_derivatives(affine_map(grid17, 1.0, 0.0))
    assert np.allclose(deriv.fz, 1.0, atol=1e-14)
    assert np.allclose(deriv.fzbar, 0.0, atol=1e-14)


def test_dilation_derivatives(grid17):
    deriv = wirtinger_derivatives(affine_map(grid17, 2.0, 0.0))
    assert np.allclose(deriv.fz, 2.0, atol=1e-13)
    assert np.allclose(deriv.fzbar, 0.0, atol=1e-13)


def test_affine_derivatives(grid17):
    deriv = wirtinger_derivatives(affine_map(grid17, 1.0, 0.3))
    assert np.allclose(deriv.fz, 1.0, atol=1e-13)
    assert np.allclose(deriv.fzbar, 0.3, atol=1e-13)


@pytest.mark.parametrize("c,expected", [(0.3, 0.3 + 0j), (0.5j, 0.5j)])
def test_affine_mu(grid17, c, expected):
    field = beltrami_of_map(affine_map(grid17, 1.0, c))
    assert np.allclose(field.values, expected, atol=1e-13)


def test_conformal_maps_have_zero_mu(grid17):
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal() + 1j * rng.normal()
        if abs(a) < 0.1:
            continue
        b = rng.normal() + 1j * rng.normal()
        field = beltrami_of_map(affine_map(grid17, a, 0.0, b))
        assert np.abs(field.values).max() < 1e-12


def test_affine_exactness_random(grid17):
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.normal() + 1j * rng.normal()
        if abs(a) < 0.2:
            continue
        ratio = (rng.uniform(0, 0.9) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
        field = beltrami_of_map(affine_map(grid17, a, ratio * a))
        assert np.abs(field.values - ratio).max() < 1e-12


def test_theorem1_error_iff_folded():
    g = build_grid(9, 9)
    rng = np.random.default_rng(11)
    errors = 0
    for _ in range(100):
        targets = g.identity_targets() + rng.normal(0, rng.uniform(0.05, 0.6), (g.n_vertices, 2))
        qcmap = QCMap(g, targets)
        folded = qcmap.folded_faces()
        if folded.size:
            with pytest.raises(NonHomeomorphicMapError) as err:
                beltrami_of_map(qcmap)
            assert sorted(err.value.face_ids) == sorted(folded.tolist())
            errors += 1
        else:
            field = beltrami_of_map(qcmap)
            assert np.abs(field.values).max() < 1.0
    assert errors > 5  # the perturbations genuinely exercised both branches


def test_similarity_postcomposition_preserves_mu(grid17):
    base = affine_map(grid17, 1.0, 0.25 + 0.1j)
    mu0 = beltrami_of_map(base).values
    rot = 0.7 * np.exp(1j * 1.2)
    composed = QCMap(
        grid17,
        np.column_stack(
            [
                (rot * (base.targets[:, 0] + 1j * base.targets[:, 1]) + (3 - 2j)).real,
                (rot * (base.targets[:, 0] + 1j * base.targets[:, 1]) + (3 - 2j)).imag,
            ]
        ),
    )
    mu1 = beltrami_of_map(composed).values
    assert np.abs(mu1 - mu0).max() < 1e-10


def test_distortion_axes_formulas():
    angle, magnify, cangle, contract = distortion_axes(0.5)
    assert (angle, magnify) == (0.0, 1.5)
    assert cangle == pytest.approx(-math.pi / 2)
    assert contract == pytest.approx(0.5)

    angle, magnify, cangle, contract = distortion_axes(0.5j)
    assert angle == pytest.approx(math.pi / 4)
    assert magnify == pytest.approx(1.5)
    assert cangle == pytest.approx(-math.pi / 4)
    assert contract == pytest.approx(0.5)

    angle, magnify, _, contract = distortion_axes(0.0)
    assert (angle, magnify, contract) == (0.0, 1.0, 1.0)


def test_distortion_axes_rejects_non_qc():
    with pytest.raises(NotQuasiConformalError):
        distortion_axes(1.0)


def test_face_vertex_round_trip(grid17):
    field = beltrami_of_map(affine_map(grid17, 1.0, 0.2 + 0.1j))
    vertex = face_to_vertex(field)
    assert vertex.shape == (17, 17)
    # constant fields survive both transfers exactly
    assert np.allclose(vertex, 0.2 + 0.1j, atol=1e-13)
    back = vertex_to_face(grid17, vertex)
    assert np.allclose(back, 0.2 + 0.1j, atol=1e-13)
