"""Discrete Stokes Ritz projection and its convergence study.

``(R_h, P_h)`` in ``X_h x V_h`` solves::

    (grad(w - R_h), grad v) - (p - P_h, div v) = 0   for all v in X_h
    (div R_h, q) = 0                                 for all q in V_h

with ``integral(p - P_h) = 0``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .assembly import SaddleSystem, assemble_divergence, assemble_stiffness
from .fespace import EXACT_DEGREE, DiscreteField, build_spaces, pressure_at_quad
from .mesh import build_box_mesh, mesh_size
from .norms import integrate_expr, pressure_l2_error, velocity_error

SOLVER_TOL = 1e-10
BOUNDARY_TOL = 1e-10


class BoundaryIncompatibleError(ValueError):
    pass


def _exact_rhs(w, p, spaces, degree=EXACT_DEGREE):
    """``(grad w, grad v) - (p, div v)`` for every velocity basis function."""
    q = spaces.quad(degree)
    pts = q.points
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    gw = w.grad(x, y, z)  # (3, 3, nt, nq)
    pv = p.value(x, y, z)[0]  # (nt, nq)
    # (grad w_c . grad phi_i) - p d_c phi_i, per component c
    local = np.einsum("tq,cjtq,tqij->cti", q.jxw, gw, q.dphi2) - np.einsum("tq,tq,tqic->cti", q.jxw, pv, q.dphi2)
    n = spaces.num_nodes
    out = np.zeros(3 * n)
    for c in range(3):
        out[c * n : (c + 1) * n] = np.bincount(spaces.cell_nodes.ravel(), weights=local[c].ravel(), minlength=n)
    return out


def check_boundary(w, spaces, tol=BOUNDARY_TOL):
    nodes = spaces.node_coords[spaces.boundary_nodes]
    vals = w.at_points(nodes)
    worst = float(np.max(np.abs(vals))) if vals.size else 0.0
    if worst > tol:
        raise BoundaryIncompatibleError(f"velocity is not zero on the boundary (max |w| = {worst:.3e})")


def stokes_ritz_project(w, p, spaces, tol=SOLVER_TOL):
    """Project an exact pair (fields) or a discrete pair (coefficient arrays).

    Returns ``(R_h, P_h)`` as a :class:`DiscreteField` with the residual of
    the solve in its ``residual`` attribute.
    """
    K = assemble_stiffness(spaces)
    B = assemble_divergence(spaces)
    m = spaces.pressure_mean_functional()
    if isinstance(w, np.ndarray):
        wv = np.asarray(w, dtype=float)
        pv = np.asarray(p, dtype=float)
        rhs = K @ wv - B.T @ pv
        mean = float(m @ pv)
    else:
        check_boundary(w, spaces)
        rhs = _exact_rhs(w, p, spaces)
        mean = float(integrate_expr(p, spaces)[0])
    system = SaddleSystem(K, B, rhs, m, pressure_mean=mean)
    u, ph, residual = system.solve(spaces, tol=tol)
    out = DiscreteField(u, ph, 0.0)
    out.residual = residual
    return out


def galerkin_residual(proj, w, p, spaces):
    """Max-norm residual of the projection equations on interior velocity dofs."""
    K = assemble_stiffness(spaces)
    B = assemble_divergence(spaces)
    if isinstance(w, np.ndarray):
        target = K @ w - B.T @ p
    else:
        target = _exact_rhs(w, p, spaces)
    r = K @ proj.velocity - B.T @ proj.pressure - target
    return float(np.max(np.abs(r[spaces.interior_velocity_dofs])))


def pressure_mean_gap(proj, p, spaces):
    """``integral(p - P_h)`` by degree-8 quadrature."""
    q = spaces.quad(EXACT_DEGREE)
    return float(np.sum(q.jxw * (p.at_points(q.points)[0] - pressure_at_quad(proj.pressure, spaces, EXACT_DEGREE))))


@dataclass
class ProjectionErrors:
    h: float
    velocity_l2: float
    velocity_h1: float
    pressure_l2: float


def projection_errors(w, p, spaces):
    proj = stokes_ritz_project(w, p, spaces)
    l2, semi = velocity_error(proj, w, spaces)
    return ProjectionErrors(
        h=spaces.mesh.h,
        velocity_l2=l2,
        velocity_h1=float(np.hypot(l2, semi)),
        pressure_l2=pressure_l2_error(proj.pressure, p, spaces),
    )


def observed_order(hs, errors):
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 2:
        raise ValueError("need at least two mesh levels")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


@dataclass
class ConvergenceTable:
    """Error rows keyed by a step size (``h`` or ``tau``) plus observed orders."""

    rows: list
    orders: dict
    step: str = "h"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = [k for k in vars(self.rows[0]) if k != self.step]
        w.writerow([self.step] + keys)
        for r in self.rows:
            w.writerow([repr(getattr(r, self.step))] + [repr(getattr(r, k)) for k in keys])
        w.writerow(["order"] + [repr(self.orders.get(k, float("nan"))) for k in keys])
        return buf.getvalue()


ROUNDING_LEVEL = 1e-10


def projection_convergence_study(w, p, meshes):
    """Projection errors on a mesh sequence and their observed orders.

    Orders are omitted (``nan``) when the errors are at rounding level,
    which is the case for pairs already in the discrete space.
    """
    meshes = list(meshes)
    if len(meshes) < 3:
        raise ValueError("a convergence study needs at least 3 meshes")
    rows = [projection_errors(w, p, build_spaces(m)) for m in meshes]
    hs = [mesh_size(m) for m in meshes]
    orders = {}
    for key in ("velocity_l2", "velocity_h1", "pressure_l2"):
        errs = [getattr(r, key) for r in rows]
        orders[key] = float("nan") if max(errs) < ROUNDING_LEVEL else observed_order(hs, errs)
    return ConvergenceTable(rows, orders)


def cube_meshes(levels, extents=None):
    kw = {} if extents is None else {"extents": extents}
    return [build_box_mesh(n, n, n, **kw) for n in levels]
