import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nscert import catalog
from nscert.expr import parse
from nscert.fespace import (
    InterpolationError,
    QuadratureError,
    ReferenceDomainError,
    build_spaces,
    eval_basis,
    interpolate,
    make_quadrature,
    monomial_integral,
    velocity_at_quad,
)
from nscert.mesh import build_box_mesh
from nscert.norms import velocity_l2_error


def _gamma_monomial(a, b, c):
    # closed form: a! b! c! / (a + b + c + 3)!
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)


def test_centroid_rule():
    r = make_quadrature(1)
    assert len(r) == 1
    assert r.weights[0] == pytest.approx(1 / 6)
    np.testing.assert_allclose(r.points[0], [0.25, 0.25, 0.25])


def test_x_squared_degree2():
    r = make_quadrature(2)
    assert np.sum(r.weights * r.points[:, 0] ** 2) == pytest.approx(1 / 60, rel=1e-13)


@pytest.mark.parametrize("degree", range(1, 11))
def test_exactness_all_monomials(degree):
    r = make_quadrature(degree)
    assert np.sum(r.weights) == pytest.approx(1 / 6, rel=1e-14)
    x, y, z = r.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                exact = _gamma_monomial(a, b, c)
                assert monomial_integral(a, b, c) == pytest.approx(exact, rel=1e-14)
                got = np.sum(r.weights * x**a * y**b * z**c)
                assert abs(got - exact) <= 1e-13 * max(exact, 1e-3)


def test_degree8_sum_power():
    r = make_quadrature(8)
    s = r.points.sum(axis=1)
    # int (x+y+z)^8 over the reference tet = int_0^1 s^8 s^2/2 ds = 1/22
    assert np.sum(r.weights * s**8) == pytest.approx(1 / 22, abs=1e-13)


@pytest.mark.parametrize("degree", [0, 11, -1])
def test_bad_degree(degree):
    with pytest.raises(QuadratureError):
        make_quadrature(degree)


P1_NODES = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
P2_NODES = np.vstack([P1_NODES] + [0.5 * (P1_NODES[i] + P1_NODES[j]) for i, j in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]])


def test_nodal_property():
    for kind, nodes in (("P1", P1_NODES), ("P2", P2_NODES)):
        mat = np.array([eval_basis(kind, p)[0] for p in nodes])
        np.testing.assert_allclose(mat, np.eye(len(nodes)), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(0, 1)] * 3))
def test_partition_of_unity(p):
    p = np.array(p)
    if p.sum() > 1:
        p = p / p.sum()
    for kind in ("P1", "P2"):
        vals, grads = eval_basis(kind, p)
        assert vals.sum() == pytest.approx(1.0, abs=1e-13)
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-12)


def test_outside_reference():
    with pytest.raises(ReferenceDomainError):
        eval_basis("P2", [0.6, 0.6, 0.1])
    with pytest.raises(ReferenceDomainError):
        eval_basis("P1", [-0.1, 0.2, 0.2])


def test_space_counts(cube1):
    edges, _ = cube1.mesh.edges()
    assert cube1.pressure_dofs == 8
    assert cube1.velocity_dofs == 3 * (8 + len(edges))
    assert len(edges) == 19
    # every vertex of the single cube lies on the boundary
    corner_dofs = {c * cube1.num_nodes + v for c in range(3) for v in range(8)}
    assert corner_dofs <= set(cube1.boundary_velocity_dofs.tolist())


def test_boundary_dofs_are_exactly_boundary_nodes(cube2):
    x = cube2.node_coords
    on = np.any(np.isclose(x, 0.0) | np.isclose(x, 1.0), axis=1)
    np.testing.assert_array_equal(np.flatnonzero(on), cube2.boundary_nodes)


def test_shared_edges_consistent(cube2):
    # both elements sharing an edge see the same global node at the same midpoint
    coords = cube2.node_coords[cube2.cell_nodes]  # (nt, 10, 3)
    verts = cube2.mesh.vertices[cube2.mesh.tets]
    from nscert.mesh import TET_EDGES

    mids = 0.5 * (verts[:, TET_EDGES[:, 0]] + verts[:, TET_EDGES[:, 1]])
    np.testing.assert_allclose(coords[:, 4:], mids, atol=1e-15)


def test_affine_volume(cube2):
    q = cube2.quad(5)
    np.testing.assert_allclose(q.jxw.sum(axis=1), cube2.mesh.volumes(), rtol=1e-13)


def test_interpolate_constant(cube2):
    f = interpolate(catalog.constant(), cube2)
    u = f.velocity.reshape(3, -1)
    np.testing.assert_array_equal(u[0], 1.0)
    np.testing.assert_array_equal(u[1], 2.0)
    np.testing.assert_array_equal(u[2], 2.0)


def test_quadratic_reproduced(cube2):
    w = parse("(x^2 + y*z, x*y - 3*z^2, 1 + x + y + z)")
    f = interpolate(w, cube2)
    assert velocity_l2_error(f, w, cube2) <= 1e-12


def test_nodal_duality(cube2):
    rng = np.random.default_rng(1)
    u = rng.standard_normal(cube2.velocity_dofs)

    class Nodal:
        ncomp = 3

        def at_points(self, pts, t=0.0):
            # identify nodes by position
            idx = [int(np.argmin(np.linalg.norm(cube2.node_coords - p, axis=1))) for p in pts]
            return u.reshape(3, -1)[:, idx]

    np.testing.assert_array_equal(interpolate(Nodal(), cube2).velocity, u)


def test_interpolation_error_location():
    s = build_spaces(build_box_mesh(1, 1, 1))
    with pytest.raises(InterpolationError, match="node"):
        interpolate(parse("(1/x, 0, 0)"), s)


def test_interpolation_order():
    errs = []
    for n in (2, 4):
        s = build_spaces(build_box_mesh(n, n, n))
        errs.append(velocity_l2_error(interpolate(catalog.sine(), s), catalog.sine(), s))
    assert math.log2(errs[0] / errs[1]) >= 2.7


def test_velocity_at_quad_linear(cube2):
    f = interpolate(catalog.linear(), cube2)
    v = velocity_at_quad(f.velocity, cube2, 4)
    np.testing.assert_allclose(v[0], cube2.quad(4).points[..., 0], atol=1e-14)
