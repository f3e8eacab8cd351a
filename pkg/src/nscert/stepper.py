"""Linearized implicit time stepping for the Navier-Stokes equations.

Given ``u^n`` each step solves for ``(u^{n+1}, p^{n+1})`` in
``X_h x V_h``::

    (u^{n+1} - u^n, v)/tau + c(u^n; u^{n+1}, v) + mu (grad u^{n+1}, grad v)
        - (p^{n+1}, div v) = (f(t_{n+1}), v)
    (div u^{n+1}, q) = 0

with the skew-symmetrized convection ``c``.  The system is linear in the
unknowns, so each step is one sparse direct solve.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    SaddleSystem,
    SolverError,
    assemble_convection,
    assemble_divergence,
    assemble_forcing,
    assemble_mass,
    assemble_stiffness,
)
from .fespace import DiscreteField, interpolate, zero_trace
from .norms import field_norm, velocity_l2_error

SOLVER_TOL = 1e-10
DIVERGENCE_TOL = 1e-9

DIAGNOSTIC_COLUMNS = ("step", "time", "energy", "grad_sq", "l2_norm", "l4_norm", "residual", "divergence")


class StepFailure(SolverError):
    def __init__(self, step_index, cause):
        super().__init__(f"step {step_index} failed: {cause}", getattr(cause, "residual_history", []))
        self.step_index = step_index


@dataclass
class StepRecord:
    step: int
    time: float
    energy: float
    grad_norm: float
    l2_norm: float
    l4_norm: float
    residual: float
    divergence: float
    error_l2: float | None = None

    def row(self):
        vals = [self.step, repr(self.time), repr(self.energy), repr(self.grad_norm**2), repr(self.l2_norm),
                repr(self.l4_norm), repr(self.residual), repr(self.divergence)]
        if self.error_l2 is not None:
            vals.append(repr(self.error_l2))
        return vals


@dataclass
class Trajectory:
    """Time levels ``u^0 .. u^N`` on one :class:`SpacePair`.

    ``fields`` maps level index to :class:`DiscreteField`; with thinning
    only every ``keep_every``-th level (plus the last) is stored, while
    ``records`` always covers every level.
    """

    spaces: object
    tau: float
    mu: float
    num_steps: int
    forced: bool
    fields: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    @property
    def T(self):
        return self.num_steps * self.tau

    def time(self, n):
        return n * self.tau

    def level(self, n):
        if n not in self.fields:
            raise KeyError(f"time level {n} was not stored (thinned trajectory)")
        return self.fields[n]

    def diagnostics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = list(DIAGNOSTIC_COLUMNS)
        if self.records and self.records[0].error_l2 is not None:
            header.append("error_l2")
        w.writerow(header)
        for rec in self.records:
            w.writerow(rec.row())
        return buf.getvalue()


def _record(n, t, u, spaces, residual, divergence, exact=None):
    l2 = field_norm(u, spaces, "L2")
    grad = field_norm(u, spaces, "H1semi")
    rec = StepRecord(n, t, 0.5 * l2 * l2, grad, l2, field_norm(u, spaces, "L4"), residual, divergence)
    if exact is not None:
        rec.error_l2 = velocity_l2_error(u, exact, spaces, t)
    return rec


def step(u_prev, tau, mu, forcing, spaces, t_next=None, tol=SOLVER_TOL, div_tol=DIVERGENCE_TOL):
    """Advance one time step.

    Returns the new :class:`DiscreteField`; its ``residual`` attribute holds
    the relative algebraic residual of the solve.  Raises
    :class:`SolverError` on breakdown or if the discrete divergence
    constraint is violated.
    """
    if not (tau > 0 and mu > 0):
        raise ValueError("tau and mu must be positive")
    if t_next is None:
        t_next = u_prev.time + tau
    M = assemble_mass(spaces)
    K = assemble_stiffness(spaces)
    B = assemble_divergence(spaces)
    C = assemble_convection(u_prev.velocity, spaces)
    A = M * (1.0 / tau) + C + K * mu
    rhs = M @ u_prev.velocity / tau
    if forcing is not None:
        rhs = rhs + assemble_forcing(forcing, t_next, spaces)
    system = SaddleSystem(A, B, rhs, spaces.pressure_mean_functional())
    u, p, residual = system.solve(spaces, tol=tol)
    m = spaces.pressure_mean_functional()
    p = p - (m @ p) / m.sum()
    div = float(np.max(np.abs(B @ u))) if len(u) else 0.0
    if div > div_tol * max(1.0, field_norm(u, spaces, "H1semi")):
        raise SolverError(f"discrete divergence {div:.3e} exceeds {div_tol:.1e}", [residual])
    out = DiscreteField(u, p, t_next)
    out.residual = residual
    out.divergence = div
    return out


def initial_field(u0, spaces):
    """Zero-trace Lagrange interpolant of ``u0`` (or a copy of a discrete field)."""
    if isinstance(u0, DiscreteField):
        return zero_trace(u0, spaces)
    return zero_trace(interpolate(u0, spaces, 0.0), spaces)


def run(u0, tau, N, mu, forcing, spaces, tol=SOLVER_TOL, keep_every=1, exact=None, div_tol=DIVERGENCE_TOL):
    """Run ``N`` steps from the interpolant of ``u0``.

    ``forcing`` is a vector field of ``(x, y, z, t)`` or ``None``.  When
    ``exact`` is given, the L2 error against it is recorded per level.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    if keep_every < 1:
        raise ValueError("keep_every must be >= 1")
    N = int(N)
    traj = Trajectory(spaces, float(tau), float(mu), N, forced=forcing is not None)
    u = initial_field(u0, spaces)
    traj.fields[0] = u
    traj.records.append(_record(0, 0.0, u.velocity, spaces, 0.0, float(np.max(np.abs(assemble_divergence(spaces) @ u.velocity))), exact))
    for n in range(N):
        t_next = (n + 1) * tau
        try:
            u = step(u, tau, mu, forcing, spaces, t_next=t_next, tol=tol, div_tol=div_tol)
        except SolverError as exc:
            raise StepFailure(n + 1, exc) from exc
        traj.records.append(_record(n + 1, t_next, u.velocity, spaces, u.residual, u.divergence, exact))
        if (n + 1) % keep_every == 0 or n + 1 == N:
            traj.fields[n + 1] = u
    return traj


def reconstruct(traj, t):
    """Piecewise-constant reconstruction: ``u^n`` on ``(t_{n-1}, t_n]``, ``u^0`` at 0."""
    T = traj.T
    eps = 1e-12 * max(T, 1.0)
    if not (-eps <= t <= T + eps):
        raise ValueError(f"time {t} outside [0, {T}]")
    if t <= eps:
        return traj.level(0)
    k = t / traj.tau
    n = int(round(k)) if abs(k - round(k)) <= 1e-9 else math.ceil(k)
    return traj.level(min(max(n, 1), traj.num_steps))
