"""Taylor-Hood spaces on tetrahedra: P2 vector velocity, P1 scalar pressure.

Node numbering of the P2 space: mesh vertices first, then edge midpoints
in the lexicographic order of their sorted vertex pairs.  Velocity dofs
are component-major, ``dof = c * num_nodes + node``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import TET_EDGES

# Quadrature degrees used throughout.
ASSEMBLY_DEGREE = 5
L2_DEGREE = 4
L4_DEGREE = 8
EXACT_DEGREE = 8
MAX_DEGREE = 10

REFERENCE_VOLUME = 1.0 / 6.0


class QuadratureError(ValueError):
    pass


class ReferenceDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) on the reference tetrahedron
    weights: np.ndarray  # (nq,), summing to 1/6
    degree: int

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi01(n, alpha):
    """Gauss-Jacobi nodes/weights on [0, 1] for the weight ``(1 - s)^alpha``."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def make_quadrature(degree):
    """Quadrature on the reference tetrahedron exact for polynomials of ``degree``.

    Degrees 1 and 2 use the classical 1- and 4-point rules.  Higher degrees
    use a collapsed tensor-product Gauss-Jacobi rule with
    ``ceil((degree + 1) / 2)`` points per direction.
    """
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise QuadratureError(f"unsupported quadrature degree {degree!r} (1..{MAX_DEGREE})")
    degree = int(degree)
    if degree == 1:
        return QuadratureRule(np.array([[0.25, 0.25, 0.25]]), np.array([REFERENCE_VOLUME]), 1)
    if degree == 2:
        a = (5.0 - math.sqrt(5.0)) / 20.0
        b = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
        pts = np.array([[a, a, a], [b, a, a], [a, b, a], [a, a, b]])
        return QuadratureRule(pts, np.full(4, REFERENCE_VOLUME / 4.0), 2)
    n = (degree + 2) // 2
    sa, wa = _gauss_jacobi01(n, 2.0)
    sb, wb = _gauss_jacobi01(n, 1.0)
    sc, wc = _gauss_jacobi01(n, 0.0)
    A, B, C = np.meshgrid(sa, sb, sc, indexing="ij")
    W = np.einsum("i,j,k->ijk", wa, wb, wc)
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return QuadratureRule(pts, W.ravel(), degree)


def monomial_integral(a, b, c):
    """Exact integral of ``x^a y^b z^c`` over the reference tetrahedron."""
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)


# --------------------------------------------------------------------------
# reference basis

# P2 local nodes: 4 vertices, then midpoints of TET_EDGES
REF_VERTICES = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
P2_REF_NODES = np.vstack([REF_VERTICES, 0.5 * (REF_VERTICES[TET_EDGES[:, 0]] + REF_VERTICES[TET_EDGES[:, 1]])])
P1_REF_NODES = REF_VERTICES.copy()

# gradients of barycentric coordinates w.r.t. reference coordinates
_DLAMBDA = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def _barycentric(xi):
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    return np.column_stack([1.0 - xi.sum(axis=1), xi])


def p1_basis(xi):
    """Values ``(n, 4)`` and reference gradients ``(n, 4, 3)`` at points ``xi``."""
    lam = _barycentric(xi)
    grads = np.broadcast_to(_DLAMBDA, (len(lam), 4, 3)).copy()
    return lam, grads


def p2_basis(xi):
    """Values ``(n, 10)`` and reference gradients ``(n, 10, 3)`` at points ``xi``."""
    lam = _barycentric(xi)
    n = len(lam)
    vals = np.empty((n, 10))
    grads = np.empty((n, 10, 3))
    for i in range(4):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _DLAMBDA[i]
    for e, (i, j) in enumerate(TET_EDGES):
        vals[:, 4 + e] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 4 + e] = 4.0 * (lam[:, j, None] * _DLAMBDA[i] + lam[:, i, None] * _DLAMBDA[j])
    return vals, grads


def eval_basis(kind, ref_point, tol=1e-12):
    """Basis values and reference gradients of ``kind`` ('P1' or 'P2') at one point.

    Raises :class:`ReferenceDomainError` for points outside the reference
    tetrahedron.
    """
    xi = np.asarray(ref_point, dtype=float).reshape(3)
    if np.any(xi < -tol) or xi.sum() > 1.0 + tol:
        raise ReferenceDomainError(f"point {xi.tolist()} lies outside the reference tetrahedron")
    if kind == "P1":
        vals, grads = p1_basis(xi)
    elif kind == "P2":
        vals, grads = p2_basis(xi)
    else:
        raise ValueError(f"unknown space kind {kind!r}")
    return vals[0], grads[0]


# --------------------------------------------------------------------------
# spaces

@dataclass(eq=False)
class QuadData:
    """A quadrature rule pushed onto every element of a mesh."""

    rule: QuadratureRule
    points: np.ndarray  # (nt, nq, 3) physical points
    jxw: np.ndarray  # (nt, nq) weights times |det J|
    phi2: np.ndarray  # (nq, 10)
    dphi2_ref: np.ndarray  # (nq, 10, 3)
    phi1: np.ndarray  # (nq, 4)
    inv_jac: np.ndarray  # (nt, 3, 3)

    @cached_property
    def dphi2(self):
        """Physical P2 gradients, ``(nt, nq, 10, 3)``."""
        return np.einsum("qbk,tkj->tqbj", self.dphi2_ref, self.inv_jac)


@dataclass(frozen=True, eq=False)
class SpacePair:
    """Velocity space (P2^3, zero trace) and pressure space (P1) on a mesh."""

    mesh: object
    num_nodes: int
    node_coords: np.ndarray  # (num_nodes, 3): vertices then edge midpoints
    cell_nodes: np.ndarray  # (nt, 10) P2 local-to-global node map
    cell_pressure: np.ndarray  # (nt, 4) P1 local-to-global map
    boundary_nodes: np.ndarray  # sorted P2 node indices on the boundary
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def velocity_dofs(self):
        return 3 * self.num_nodes

    @property
    def pressure_dofs(self):
        return self.mesh.num_vertices

    @property
    def pressure_dof_nodes(self):
        return self.mesh.vertices

    @property
    def velocity_dof_nodes(self):
        return np.tile(self.node_coords, (3, 1))

    @property
    def boundary_velocity_dofs(self):
        return np.concatenate([c * self.num_nodes + self.boundary_nodes for c in range(3)])

    @property
    def interior_velocity_dofs(self):
        if "interior" not in self._cache:
            mask = np.ones(self.velocity_dofs, dtype=bool)
            mask[self.boundary_velocity_dofs] = False
            self._cache["interior"] = np.flatnonzero(mask)
        return self._cache["interior"]

    def cell_velocity_dofs(self):
        """``(nt, 30)`` velocity dofs per element, component-major locally."""
        n = self.num_nodes
        return np.concatenate([self.cell_nodes + c * n for c in range(3)], axis=1)

    def quad(self, degree):
        """Cached :class:`QuadData` for quadrature ``degree``."""
        key = ("quad", degree)
        if key not in self._cache:
            rule = make_quadrature(degree)
            x0, J, det, inv = self.mesh.jacobians()
            pts = x0[:, None, :] + np.einsum("tij,qj->tqi", J, rule.points)
            jxw = np.abs(det)[:, None] * rule.weights[None, :]
            phi2, dphi2_ref = p2_basis(rule.points)
            phi1, _ = p1_basis(rule.points)
            self._cache[key] = QuadData(rule, pts, jxw, phi2, dphi2_ref, phi1, inv)
        return self._cache[key]

    def pressure_mean_functional(self):
        """Row ``m`` with ``m @ p`` the integral of the P1 field ``p``."""
        if "mean" not in self._cache:
            m = np.zeros(self.pressure_dofs)
            np.add.at(m, self.cell_pressure, np.repeat(self.mesh.volumes()[:, None] / 4.0, 4, axis=1))
            self._cache["mean"] = m
        return self._cache["mean"]


def build_spaces(mesh):
    """Build the Taylor-Hood :class:`SpacePair` on ``mesh``."""
    edges, cell_edges = mesh.edges()
    nv = mesh.num_vertices
    coords = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
    cell_nodes = np.concatenate([mesh.tets, nv + cell_edges], axis=1)

    bf = mesh.boundary_faces
    bverts = np.unique(bf)
    bedge_pairs = np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]])
    bedges = np.unique(mesh.edge_index(bedge_pairs))
    boundary = np.concatenate([bverts, nv + bedges])
    return SpacePair(
        mesh=mesh,
        num_nodes=len(coords),
        node_coords=coords,
        cell_nodes=cell_nodes,
        cell_pressure=mesh.tets.copy(),
        boundary_nodes=np.sort(boundary),
    )


# --------------------------------------------------------------------------
# discrete fields and interpolation

class InterpolationError(ValueError):
    pass


def _eval_at(expr, points, t):
    try:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = expr.at_points(points, t)
    except Exception as exc:  # noqa: BLE001 - location is added, type kept in the chain
        raise InterpolationError(f"expression evaluation failed: {exc}") from exc
    bad = ~np.all(np.isfinite(vals), axis=0)
    if np.any(bad):
        where = points[np.flatnonzero(bad)[0]]
        raise InterpolationError(f"expression is not finite at node {where.tolist()}")
    return vals


def interpolate_velocity(expr, spaces, t=0.0):
    """Nodal P2 coefficients of a vector field (boundary dofs included)."""
    if expr.ncomp != 3:
        raise InterpolationError("velocity interpolation needs a vector field")
    vals = _eval_at(expr, spaces.node_coords, t)
    return vals.reshape(-1).copy()


def interpolate_pressure(expr, spaces, t=0.0):
    """Nodal P1 coefficients of a scalar field."""
    if expr.ncomp != 1:
        raise InterpolationError("pressure interpolation needs a scalar field")
    return _eval_at(expr, spaces.mesh.vertices, t)[0].copy()


def velocity_at_quad(u, spaces, degree):
    """Values ``(3, nt, nq)`` of the P2 field with coefficients ``u``."""
    q = spaces.quad(degree)
    coef = u.reshape(3, spaces.num_nodes)[:, spaces.cell_nodes]  # (3, nt, 10)
    return np.einsum("ctb,qb->ctq", coef, q.phi2)


def velocity_grad_at_quad(u, spaces, degree):
    """Gradients ``(3, nt, nq, 3)`` of the P2 field ``u``; last axis is d/dx_j."""
    q = spaces.quad(degree)
    coef = u.reshape(3, spaces.num_nodes)[:, spaces.cell_nodes]
    return np.einsum("ctb,tqbj->ctqj", coef, q.dphi2)


def pressure_at_quad(p, spaces, degree):
    q = spaces.quad(degree)
    return np.einsum("tb,qb->tq", p[spaces.cell_pressure], q.phi1)


@dataclass(eq=False)
class DiscreteField:
    """Coefficients of one time level: P2 velocity, P1 pressure."""

    velocity: np.ndarray
    pressure: np.ndarray
    time: float = 0.0

    def copy(self):
        return DiscreteField(self.velocity.copy(), self.pressure.copy(), self.time)

    def check(self, spaces, mean_tol=1e-12):
        """Raise ``ValueError`` unless this is a valid member of ``X_h x V_h``."""
        if self.velocity.shape != (spaces.velocity_dofs,) or self.pressure.shape != (spaces.pressure_dofs,):
            raise ValueError("coefficient lengths do not match the spaces")
        if np.any(self.velocity[spaces.boundary_velocity_dofs] != 0.0):
            raise ValueError("velocity does not vanish on the boundary")
        mean = spaces.pressure_mean_functional() @ self.pressure
        if abs(mean) > mean_tol * max(np.linalg.norm(self.pressure), 1.0):
            raise ValueError(f"pressure mean {mean:.3e} is not zero")
        return True


def zero_field(spaces, t=0.0):
    return DiscreteField(np.zeros(spaces.velocity_dofs), np.zeros(spaces.pressure_dofs), t)


def interpolate(expr, spaces, t=0.0):
    """Lagrange interpolant of a vector field as a :class:`DiscreteField`.

    Every dof, boundary ones included, takes the value of ``expr`` at its
    node; use :func:`zero_trace` to move the result into the zero-trace
    space.
    """
    return DiscreteField(interpolate_velocity(expr, spaces, t), np.zeros(spaces.pressure_dofs), t)


def zero_trace(field, spaces):
    out = field.copy()
    out.velocity[spaces.boundary_velocity_dofs] = 0.0
    return out
