"""Norms of discrete fields, trajectories and closed-form data.

Quadrature degrees: 4 for L2 and H1 of P2 fields (exact), 8 for L4 of P2
fields (exact, the integrand is degree 8) and 8 for anything involving a
closed-form expression.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .fespace import (
    EXACT_DEGREE,
    L2_DEGREE,
    L4_DEGREE,
    DiscreteField,
    build_spaces,
    pressure_at_quad,
    velocity_at_quad,
    velocity_grad_at_quad,
)

KINDS = ("L2", "H1semi", "L4")


def _velocity(field):
    return field.velocity if isinstance(field, DiscreteField) else np.asarray(field, dtype=float)


def field_norm(field, spaces, kind="L2"):
    """``L2``, ``H1semi`` or ``L4`` norm of a P2 velocity field."""
    u = _velocity(field)
    if kind == "L2":
        q = spaces.quad(L2_DEGREE)
        v = velocity_at_quad(u, spaces, L2_DEGREE)
        return float(np.sqrt(np.einsum("tq,ctq,ctq->", q.jxw, v, v)))
    if kind == "H1semi":
        q = spaces.quad(L2_DEGREE)
        g = velocity_grad_at_quad(u, spaces, L2_DEGREE)
        return float(np.sqrt(np.einsum("tq,ctqj,ctqj->", q.jxw, g, g)))
    if kind == "L4":
        q = spaces.quad(L4_DEGREE)
        v = velocity_at_quad(u, spaces, L4_DEGREE)
        sq = np.einsum("ctq,ctq->tq", v, v)
        return float(np.sum(q.jxw * sq * sq) ** 0.25)
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {KINDS}")


def velocity_error(field, expr, spaces, t=0.0, degree=EXACT_DEGREE):
    """``(L2, H1semi)`` norms of ``expr(t) - u_h`` by degree-8 quadrature."""
    u = _velocity(field)
    q = spaces.quad(degree)
    e = expr.at_points(q.points, t) - velocity_at_quad(u, spaces, degree)
    l2 = np.sqrt(np.einsum("tq,ctq,ctq->", q.jxw, e, e))
    pts = q.points
    ge = np.moveaxis(expr.grad(pts[..., 0], pts[..., 1], pts[..., 2], t), 1, -1)
    ge = ge - velocity_grad_at_quad(u, spaces, degree)
    h1 = np.sqrt(np.einsum("tq,ctqj,ctqj->", q.jxw, ge, ge))
    return float(l2), float(h1)


def velocity_l2_error(field, expr, spaces, t=0.0, degree=EXACT_DEGREE):
    u = _velocity(field)
    q = spaces.quad(degree)
    e = expr.at_points(q.points, t) - velocity_at_quad(u, spaces, degree)
    return float(np.sqrt(np.einsum("tq,ctq,ctq->", q.jxw, e, e)))


def pressure_l2_error(p, expr, spaces, t=0.0, degree=EXACT_DEGREE):
    q = spaces.quad(degree)
    e = expr.at_points(q.points, t)[0] - pressure_at_quad(p, spaces, degree)
    return float(np.sqrt(np.sum(q.jxw * e * e)))


def integrate_expr(expr, spaces, t=0.0, degree=EXACT_DEGREE):
    """Integral of each component of ``expr`` over the mesh."""
    q = spaces.quad(degree)
    return np.einsum("tq,ctq->c", q.jxw, expr.at_points(q.points, t))


def linf_time_norm(traj, kind="L4"):
    """Max over all stored time levels (``u^0`` included) of a spatial norm.

    The piecewise-constant reconstruction makes the essential supremum in
    time a maximum over levels, so this is exact.  Values come from the
    per-level diagnostics, which are recorded for every level even when
    field storage is thinned.
    """
    column = {"L2": "l2_norm", "L4": "l4_norm", "H1semi": "grad_norm"}[kind]
    values = [getattr(rec, column) for rec in traj.records]
    if not values:
        raise ValueError("empty trajectory")
    return float(max(values))


_MULTI_2 = list(combinations_with_replacement(range(3), 2))


def expr_sobolev_norm(expr, mesh, order=2, t=0.0, spaces=None):
    """``H^order`` norm ``(sum_{|a| <= order} ||D^a expr||^2)^(1/2)``.

    Each multi-index is counted once (``d_xy`` once, not twice).  Exact
    derivatives of the expression are integrated with degree-8 quadrature.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    spaces = spaces if spaces is not None else build_spaces(mesh)
    q = spaces.quad(EXACT_DEGREE)
    x, y, z = q.points[..., 0], q.points[..., 1], q.points[..., 2]
    total = np.einsum("tq,ctq->", q.jxw, expr.value(x, y, z, t) ** 2)
    if order >= 1:
        g = expr.grad(x, y, z, t)
        total += np.einsum("tq,cjtq->", q.jxw, g**2)
    if order >= 2:
        hs = expr.hessian(x, y, z, t)
        for a, b in _MULTI_2:
            total += np.einsum("tq,ctq->", q.jxw, hs[:, a, b] ** 2)
    return float(np.sqrt(total))


@dataclass
class EnergyLedger:
    """Outcome of the discrete energy check of a zero-forcing run.

    ``status`` is ``"pass"``, ``"fail"`` or ``"not applicable"``.  For
    each step ``n`` the cumulative quantity
    ``1/2 |u^{n+1}|^2 + sum_{m<=n} tau mu |grad u^{m+1}|^2`` is compared
    with ``1/2 |u^0|^2``; ``slack`` holds the differences (>= -tol passes),
    ``monotone`` the per-step nonincrease of ``1/2 |u^n|^2``.
    """

    status: str
    tol: float
    initial_energy: float = 0.0
    cumulative: list = field(default_factory=list)
    slack: list = field(default_factory=list)
    monotone: list = field(default_factory=list)
    reason: str = ""

    @property
    def passed(self):
        return self.status == "pass"

    @property
    def min_slack(self):
        return float(min(self.slack)) if self.slack else 0.0


def energy_ledger(traj, tol=1e-9):
    """Check the discrete energy estimate on a completed trajectory."""
    if traj.forced:
        return EnergyLedger("not applicable", tol, reason="nonzero forcing")
    recs = traj.records
    e0 = recs[0].energy
    ledger = EnergyLedger("pass", tol, initial_energy=e0)
    dissipated = 0.0
    for prev, rec in zip(recs[:-1], recs[1:]):
        dissipated += traj.tau * traj.mu * rec.grad_norm**2
        total = rec.energy + dissipated
        ledger.cumulative.append(total)
        ledger.slack.append(e0 - total)
        ledger.monotone.append(rec.energy <= prev.energy + tol)
    if any(s < -tol for s in ledger.slack) or not all(ledger.monotone):
        ledger.status = "fail"
    return ledger


@dataclass
class NormReport:
    times: list
    l2: list
    h1semi: list
    l4: list
    running_max_l2: list
    running_max_l4: list
    u0_h1: float
    u0_h2: float
    degrees: dict

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "time", "l2", "h1semi", "l4", "running_max_l2", "running_max_l4"])
        for i, row in enumerate(zip(self.times, self.l2, self.h1semi, self.l4, self.running_max_l2, self.running_max_l4)):
            w.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def summary_lines(self):
        return [
            f"norm.linf_l2: {self.running_max_l2[-1]!r}",
            f"norm.linf_l4: {self.running_max_l4[-1]!r}",
            f"norm.u0_h1: {self.u0_h1!r}",
            f"norm.u0_h2: {self.u0_h2!r}",
            "norm.u0_composite: full H2 norm of u0",
            f"norm.quadrature_degrees: L2={self.degrees['L2']} L4={self.degrees['L4']} exact={self.degrees['exact']}",
        ]


def norm_report(traj, u0_expr, spaces):
    recs = traj.records
    l2 = [r.l2_norm for r in recs]
    l4 = [r.l4_norm for r in recs]
    return NormReport(
        times=[r.time for r in recs],
        l2=l2,
        h1semi=[r.grad_norm for r in recs],
        l4=l4,
        running_max_l2=list(np.maximum.accumulate(l2)),
        running_max_l4=list(np.maximum.accumulate(l4)),
        u0_h1=expr_sobolev_norm(u0_expr, spaces.mesh, 1, spaces=spaces),
        u0_h2=expr_sobolev_norm(u0_expr, spaces.mesh, 2, spaces=spaces),
        degrees={"L2": L2_DEGREE, "L4": L4_DEGREE, "exact": EXACT_DEGREE},
    )
