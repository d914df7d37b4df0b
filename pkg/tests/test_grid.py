import numpy as np
import pytest

from cephaloqc.errors import InvalidDimensionError
from cephaloqc.grid import QCMap, build_grid, signed_areas


@pytest.mark.parametrize(
    "w,h,nv,nf",
    [(2, 2, 4, 2), (3, 2, 6, 4), (9, 9, 81, 128)],
)
def test_counts(w, h, nv, nf):
    g = build_grid(w, h)
    assert g.n_vertices == nv
    assert g.n_faces == nf


def test_vertex_indexing_row_major():
    g = build_grid(5, 4)
    for y in range(4):
        for x in range(5):
            vid = g.vertex_id(x, y)
            assert vid == y * 5 + x
            assert np.array_equal(g.vertices[vid], [x, y])


def test_faces_positive_area_and_cover_cells():
    g = build_grid(7, 5)
    areas = signed_areas(g.vertices, g.faces)
    assert np.all(areas > 0)
    assert np.allclose(areas, 0.5)
    assert areas.sum() == pytest.approx((7 - 1) * (5 - 1))


def test_diagonal_split_shares_lower_left_upper_right():
    g = build_grid(3, 3)
    # both triangles of the first cell contain vertices 0 and 4 (the diagonal)
    lower, upper = g.faces[0], g.faces[1]
    assert {0, 4} <= set(lower.tolist())
    assert {0, 4} <= set(upper.tolist())


@pytest.mark.parametrize("w,h", [(1, 5), (5, 1), (0, 0), (1, 1)])
def test_too_small_rejected(w, h):
    with pytest.raises(InvalidDimensionError):
        build_grid(w, h)


def test_boundary_vertices():
    g = build_grid(5, 4)
    bnd = set(g.boundary_vertex_ids().tolist())
    expected = {
        g.vertex_id(x, y)
        for x in range(5)
        for y in range(4)
        if x in (0, 4) or y in (0, 3)
    }
    assert bnd == expected


def test_orientation_flag():
    g = build_grid(4, 4)
    ident = QCMap(g, g.identity_targets())
    assert ident.is_orientation_preserving
    flipped = g.identity_targets()
    flipped[:, 0] *= -1  # mirror image reverses orientation
    assert not QCMap(g, flipped).is_orientation_preserving


def test_vertex_areas_sum_to_domain():
    g = build_grid(6, 9)
    assert g.vertex_areas().sum() == pytest.approx((6 - 1) * (9 - 1))
