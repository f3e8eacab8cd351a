"""Convergence studies: interpolation, manufactured solutions in space and time.

Manufactured errors are ``max_n ||u_h^n - w(t_n)||_{L2}`` over all time
levels, which is the L-infinity-in-time L2 error of the piecewise-constant
reconstruction measured at the slab endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import catalog
from .expr import manufactured_forcing
from .fespace import build_spaces, interpolate
from .mesh import mesh_size
from .norms import velocity_error
from .projection import ConvergenceTable, cube_meshes, observed_order
from .stepper import run

# Spatial study: short horizon, small step, slowly decaying pair.
SPACE_TAU = 1e-3
SPACE_T = 0.01
SPACE_MU = 1.0
SPACE_LEVELS = (2, 4, 8)

# Temporal study: the oscillating pair at low viscosity makes the O(tau)
# error dominate the spatial error of the fixed mesh.
TIME_N = 4
TIME_TAUS = (0.04, 0.02, 0.01)
TIME_T = 0.4
TIME_MU = 0.1
TIME_OMEGA = 20.0


@dataclass
class InterpolationRow:
    h: float
    velocity_l2: float
    velocity_h1semi: float


@dataclass
class SpaceRow:
    h: float
    tau: float
    steps: int
    velocity_linf_l2: float


@dataclass
class TimeRow:
    tau: float
    h: float
    steps: int
    velocity_linf_l2: float


def interpolation_study(field, meshes, t=0.0):
    """Lagrange interpolation errors of ``field`` and their observed orders."""
    meshes = list(meshes)
    if len(meshes) < 3:
        raise ValueError("a convergence study needs at least 3 meshes")
    rows = []
    for m in meshes:
        spaces = build_spaces(m)
        l2, semi = velocity_error(interpolate(field, spaces, t), field, spaces, t)
        rows.append(InterpolationRow(mesh_size(m), l2, semi))
    hs = [r.h for r in rows]
    orders = {key: observed_order(hs, [getattr(r, key) for r in rows]) for key in ("velocity_l2", "velocity_h1semi")}
    return ConvergenceTable(rows, orders)


def manufactured_error(w, q, mu, tau, T, spaces):
    """``max_n`` L2 error of a forced run whose exact solution is ``(w, q)``."""
    f = manufactured_forcing(w, q, mu)
    steps = round(T / tau)
    traj = run(w, tau, steps, mu, f, spaces, exact=w)
    return max(r.error_l2 for r in traj.records), steps


def manufactured_space_study(levels=SPACE_LEVELS, tau=SPACE_TAU, T=SPACE_T, mu=SPACE_MU, extents=None):
    w, q = catalog.manufactured_pair()
    rows = []
    for m in cube_meshes(levels, extents):
        err, steps = manufactured_error(w, q, mu, tau, T, build_spaces(m))
        rows.append(SpaceRow(mesh_size(m), tau, steps, err))
    orders = {"velocity_linf_l2": observed_order([r.h for r in rows], [r.velocity_linf_l2 for r in rows])}
    return ConvergenceTable(rows, orders)


def manufactured_time_study(n=TIME_N, taus=TIME_TAUS, T=TIME_T, mu=TIME_MU, omega=TIME_OMEGA, extents=None):
    taus = list(taus)
    if len(taus) < 3:
        raise ValueError("a convergence study needs at least 3 step sizes")
    w, q = catalog.manufactured_pair(omega=omega)
    spaces = build_spaces(cube_meshes([n], extents)[0])
    rows = []
    for tau in taus:
        err, steps = manufactured_error(w, q, mu, tau, T, spaces)
        rows.append(TimeRow(tau, spaces.mesh.h, steps, err))
    orders = {"velocity_linf_l2": observed_order(taus, [r.velocity_linf_l2 for r in rows])}
    return ConvergenceTable(rows, orders, step="tau")
