import numpy as np
import pytest

from nscert import catalog
from nscert.assembly import (
    SaddleSystem,
    assemble_convection,
    assemble_divergence,
    assemble_forcing,
    assemble_mass,
    assemble_stiffness,
)
from nscert.fespace import build_spaces, interpolate, zero_trace
from nscert.mesh import build_box_mesh


def _random_w(spaces, seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(spaces.velocity_dofs)
    w[spaces.boundary_velocity_dofs] = 0.0
    return w


def test_mass(cube2):
    M = assemble_mass(cube2)
    one = np.ones(cube2.velocity_dofs)
    assert one @ M @ one == pytest.approx(3.0, rel=1e-13)
    assert abs(M - M.T).max() == 0.0
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal(cube2.velocity_dofs)
        assert x @ M @ x > 0


def test_stiffness(cube2):
    K = assemble_stiffness(cube2)
    assert abs(K - K.T).max() == 0.0
    const = interpolate(catalog.constant(), cube2).velocity
    assert np.abs(K @ const).max() <= 1e-12
    u = interpolate(catalog.linear(), cube2).velocity
    assert u @ K @ u == pytest.approx(1.0, rel=1e-12)
    Ki = K[cube2.interior_velocity_dofs][:, cube2.interior_velocity_dofs]
    assert np.linalg.eigvalsh(Ki.toarray()).min() > 0


def test_convection_zero(cube2):
    C = assemble_convection(np.zeros(cube2.velocity_dofs), cube2)
    assert C.nnz == 0 or abs(C).max() == 0.0


def test_convection_skew_and_linear(cube2):
    for seed in range(5):
        w = _random_w(cube2, seed)
        C = assemble_convection(w, cube2)
        assert abs(C + C.T).max() <= 1e-12 * abs(C).max()
        C2 = assemble_convection(2.5 * w, cube2)
        assert abs(C2 - 2.5 * C).max() <= 1e-13 * abs(C2).max()
        rng = np.random.default_rng(seed + 100)
        for _ in range(20):
            x = rng.standard_normal(cube2.velocity_dofs)
            assert abs(x @ C @ x) <= 1e-10 * (x @ x) * abs(C).max()


def test_convection_skew_for_non_solenoidal_advector(cube2):
    # skewness does not rely on a discretely divergence-free advecting field
    w = interpolate(catalog.linear(), cube2).velocity
    C = assemble_convection(w, cube2)
    assert abs(C + C.T).max() <= 1e-12 * abs(C).max()


def test_divergence(cube2):
    B = assemble_divergence(cube2)
    assert B.shape == (cube2.pressure_dofs, cube2.velocity_dofs)
    m = cube2.pressure_mean_functional()
    ones = np.ones(cube2.pressure_dofs)
    assert np.abs(B @ np.zeros(cube2.velocity_dofs)).max() == 0.0
    for seed in range(100):
        v = _random_w(cube2, seed)
        assert abs(ones @ B @ v) <= 1e-12 * np.abs(v).max()
    assert m.sum() == pytest.approx(1.0)


def test_divergence_of_rotation_vanishes_under_refinement():
    vals = []
    for n in (2, 4, 8):
        s = build_spaces(build_box_mesh(n, n, n))
        v = zero_trace(interpolate(catalog.rotation(), s), s).velocity
        vals.append(np.linalg.norm(assemble_divergence(s) @ v))
    assert vals[0] > vals[1] > vals[2]


def test_forcing(cube2):
    assert np.all(assemble_forcing(catalog.zero(), 0.0, cube2) == 0.0)
    rhs = assemble_forcing(catalog.constant(), 0.0, cube2).reshape(3, -1)
    # sum_i (c, phi_i) = c |Omega| per component
    np.testing.assert_allclose(rhs.sum(axis=1), [1.0, 2.0, 2.0], rtol=1e-13)


def test_repeatable_assembly():
    s1 = build_spaces(build_box_mesh(2, 2, 2))
    s2 = build_spaces(build_box_mesh(2, 2, 2))
    w = _random_w(s1, 3)
    for a, b in ((assemble_mass(s1), assemble_mass(s2)), (assemble_convection(w, s1), assemble_convection(w, s2))):
        np.testing.assert_array_equal(a.indptr, b.indptr)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.data, b.data)


def test_saddle_zero_rhs(cube2):
    sys_ = SaddleSystem(assemble_stiffness(cube2), assemble_divergence(cube2), np.zeros(cube2.velocity_dofs), cube2.pressure_mean_functional())
    u, p, res = sys_.solve(cube2)
    assert not u.any() and not p.any() and res == 0.0


def test_saddle_symmetric_part_positive(cube2):
    w = _random_w(cube2, 7)
    A = assemble_mass(cube2) * 100 + assemble_convection(w, cube2) + assemble_stiffness(cube2)
    idx = cube2.interior_velocity_dofs
    Ai = A[idx][:, idx].toarray()
    assert np.linalg.eigvalsh(0.5 * (Ai + Ai.T)).min() > 0
