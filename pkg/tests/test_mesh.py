import math

import numpy as np
import pytest

from nscert.mesh import (
    InvalidDomainError,
    build_box_mesh,
    check_mesh,
    mesh_size,
    quality_report,
    refine_uniform,
)


def test_single_cube_counts():
    m = build_box_mesh(1, 1, 1)
    assert m.num_vertices == 8
    assert m.num_tets == 6
    assert m.volume() == pytest.approx(1.0, rel=1e-12)
    assert m.h == pytest.approx(math.sqrt(3))
    check_mesh(m)


def test_two_cube_counts():
    m = build_box_mesh(2, 2, 2)
    # counting oracle: (n+1)^3 grid points, 6 tets per cell
    assert m.num_vertices == 27
    assert m.num_tets == 6 * 8
    check_mesh(m)


def test_vertex_order_is_zyx_lexicographic():
    m = build_box_mesh(3, 2, 2)
    v = m.vertices
    keys = [(p[2], p[1], p[0]) for p in v]
    assert keys == sorted(keys)


def test_positive_volumes_and_face_incidence():
    m = build_box_mesh(2, 3, 1, extents=((0, 0, 0), (2.0, 1.0, 0.5)))
    assert np.all(m.signed_volumes() > 0)
    _, counts = m.face_incidence()
    assert set(np.unique(counts)) == {1, 2}
    assert np.sum(counts == 1) == len(m.boundary_faces)
    assert m.volume() == pytest.approx(1.0, rel=1e-12)


def test_mesh_size_anisotropic_box():
    m = build_box_mesh(2, 1, 1, extents=((0, 0, 0), (2, 1, 1)))
    assert mesh_size(m) == pytest.approx(math.sqrt(3))


@pytest.mark.parametrize("extents", [((0, 0, 0), (1, 0, 1)), ((0, 0, 0), (1, 1, -1)), ((0, 0, 0), (1, 1, float("nan")))])
def test_degenerate_extents(extents):
    with pytest.raises(InvalidDomainError):
        build_box_mesh(1, 1, 1, extents=extents)


def test_bad_counts():
    with pytest.raises(InvalidDomainError):
        build_box_mesh(0, 1, 1)


def test_refine_halves_h_and_matches_direct_build():
    m = build_box_mesh(1, 1, 1)
    r = refine_uniform(m)
    assert r.num_tets == 48
    assert r.h == pytest.approx(math.sqrt(3) / 2)
    assert r.volume() == pytest.approx(1.0, rel=1e-12)
    rr = refine_uniform(r)
    assert rr.num_tets == 64 * m.num_tets
    direct = build_box_mesh(4, 4, 4)
    np.testing.assert_array_equal(rr.vertices, direct.vertices)
    # same partition, up to element order
    assert {tuple(sorted(t)) for t in rr.tets.tolist()} == {tuple(sorted(t)) for t in direct.tets.tolist()}
    check_mesh(rr)


def test_refine_general_box_is_conforming():
    m = build_box_mesh(2, 1, 3, extents=((0, 0, 0), (1.0, 0.3, 2.0)))
    r = refine_uniform(m)
    check_mesh(r)
    assert r.num_tets == 8 * m.num_tets
    assert r.h == pytest.approx(m.h / 2, rel=1e-12)


def test_quality_report():
    q = quality_report(build_box_mesh(3, 3, 3))
    assert q.diameter_ratio == pytest.approx(1.0)
    assert q.shape_spread == pytest.approx(1.0)
    q2 = quality_report(refine_uniform(build_box_mesh(3, 3, 3)))
    assert q2.diameter_ratio == pytest.approx(q.diameter_ratio)
    assert q2.max_shape_ratio == pytest.approx(q.max_shape_ratio)
    aniso = quality_report(build_box_mesh(2, 2, 2, extents=((0, 0, 0), (4, 1, 1))))
    assert aniso.shape_spread >= 1.0 and aniso.max_shape_ratio > q.max_shape_ratio


def test_deterministic():
    a, b = build_box_mesh(3, 2, 2), build_box_mesh(3, 2, 2)
    np.testing.assert_array_equal(a.tets, b.tets)
    np.testing.assert_array_equal(refine_uniform(a).tets, refine_uniform(b).tets)
