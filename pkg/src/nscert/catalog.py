"""Named fields with hand-written derivatives.

Every entry is a sum of separable terms ``c * g(t) * fx(x) fy(y) fz(z)``
per component, where each 1D factor carries its value, first and second
derivative.  This gives a derivative path that does not touch the parser,
so the two can check each other.  Each entry also records equivalent
expression text for the symbolic route.
"""

from __future__ import annotations

import math

import numpy as np

from .expr import Field, parse

PI = math.pi


class Factor1D:
    def __init__(self, f, d1, d2, text):
        self.f, self.d1, self.d2, self.text = f, d1, d2, text

    def derivs(self, s):
        return (self.f(s), self.d1(s), self.d2(s))


def _factor(name, var):
    v = var
    table = {
        "1": Factor1D(lambda s: np.ones_like(s), lambda s: np.zeros_like(s), lambda s: np.zeros_like(s), "1"),
        "id": Factor1D(lambda s: s, lambda s: np.ones_like(s), lambda s: np.zeros_like(s), v),
        "sin": Factor1D(
            lambda s: np.sin(PI * s),
            lambda s: PI * np.cos(PI * s),
            lambda s: -PI**2 * np.sin(PI * s),
            f"sin(pi*{v})",
        ),
        "cos": Factor1D(
            lambda s: np.cos(PI * s),
            lambda s: -PI * np.sin(PI * s),
            lambda s: -PI**2 * np.cos(PI * s),
            f"cos(pi*{v})",
        ),
        "sin2": Factor1D(
            lambda s: np.sin(PI * s) ** 2,
            lambda s: PI * np.sin(2 * PI * s),
            lambda s: 2 * PI**2 * np.cos(2 * PI * s),
            f"sin(pi*{v})^2",
        ),
        "sin_2": Factor1D(
            lambda s: np.sin(2 * PI * s),
            lambda s: 2 * PI * np.cos(2 * PI * s),
            lambda s: -4 * PI**2 * np.sin(2 * PI * s),
            f"sin(2*pi*{v})",
        ),
    }
    return table[name]


class TimeFactor:
    """Scalar time profile ``g(t)`` with its derivative."""

    def __init__(self, g, dg, text):
        self.g, self.dg, self.text = g, dg, text


STEADY = TimeFactor(lambda t: 1.0, lambda t: 0.0, "1")


def decaying(rate):
    return TimeFactor(
        lambda t: np.exp(-rate * t),
        lambda t: -rate * np.exp(-rate * t),
        f"exp(-{rate!r}*t)",
    )


def oscillating(omega):
    return TimeFactor(
        lambda t: np.cos(omega * t),
        lambda t: -omega * np.sin(omega * t),
        f"cos({omega!r}*t)",
    )


class Term:
    def __init__(self, coef, fx, fy, fz):
        self.coef = float(coef)
        self.factors = (_factor(fx, "x"), _factor(fy, "y"), _factor(fz, "z"))

    def text(self):
        parts = [repr(self.coef)] + [f.text for f in self.factors if f.text != "1"]
        return "*".join(parts)


class CatalogField(Field):
    """Separable closed-form field with exact derivatives."""

    def __init__(self, name, components, time=STEADY, description=""):
        self.name = name
        self.components = [list(c) for c in components]
        self.ncomp = len(self.components)
        self.time = time
        self.description = description

    @property
    def text(self):
        comps = []
        for terms in self.components:
            if not terms:
                comps.append("0")
                continue
            body = " + ".join(term.text() for term in terms)
            if self.time.text != "1":
                body = f"{self.time.text}*({body})"
            comps.append(body)
        if self.ncomp == 1:
            return comps[0]
        return "(" + ", ".join(comps) + ")"

    def expression(self):
        return parse(self.text)

    def _collect(self, x, y, z, t, kind):
        x = np.asarray(x, dtype=float)
        x, y, z = np.broadcast_arrays(x, np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        coords = (x, y, z)
        if kind == "dt":
            g = self.time.dg(t)
        else:
            g = self.time.g(t)
        shape = {"value": (), "dt": (), "grad": (3,), "hessian": (3, 3)}[kind]
        out = np.zeros((self.ncomp,) + shape + x.shape)
        for c, terms in enumerate(self.components):
            for term in terms:
                d = [f.derivs(s) for f, s in zip(term.factors, coords)]
                scale = term.coef * g
                if kind in ("value", "dt"):
                    out[c] += scale * d[0][0] * d[1][0] * d[2][0]
                elif kind == "grad":
                    for a in range(3):
                        prod = scale
                        for k in range(3):
                            prod = prod * d[k][1 if k == a else 0]
                        out[c, a] += prod
                else:
                    for a in range(3):
                        for b in range(3):
                            prod = scale
                            for k in range(3):
                                order = (k == a) + (k == b)
                                prod = prod * d[k][order]
                            out[c, a, b] += prod
        return out

    def value(self, x, y, z, t=0.0):
        return self._collect(x, y, z, t, "value")

    def grad(self, x, y, z, t=0.0):
        return self._collect(x, y, z, t, "grad")

    def hessian(self, x, y, z, t=0.0):
        return self._collect(x, y, z, t, "hessian")

    def dt(self, x, y, z, t=0.0):
        return self._collect(x, y, z, t, "dt")


def zero():
    return CatalogField("zero", [[], [], []], description="zero vector field")


def zero_scalar():
    return CatalogField("zero_scalar", [[]], description="zero scalar field")


def constant(c=(1.0, 2.0, 2.0)):
    comps = [[Term(v, "1", "1", "1")] if v else [] for v in c]
    return CatalogField("constant", comps, description=f"constant field {tuple(c)}")


def linear():
    return CatalogField("linear", [[Term(1.0, "id", "1", "1")], [], []], description="(x, 0, 0)")


def rotation():
    return CatalogField(
        "rotation",
        [[Term(-1.0, "1", "id", "1")], [Term(1.0, "id", "1", "1")], []],
        description="rigid rotation (-y, x, 0)",
    )


def sine():
    return CatalogField(
        "sine",
        [[Term(1.0, "sin", "sin", "sin")], [], []],
        description="sin(pi x) sin(pi y) sin(pi z) (1, 0, 0)",
    )


def vortex(time=STEADY):
    """Divergence-free, zero-trace velocity on the unit cube.

    The curl of ``(0, 0, psi)`` with ``psi = sin^2(pi x) sin^2(pi y) sin(pi z)``.
    """
    return CatalogField(
        "vortex",
        [
            [Term(PI, "sin2", "sin_2", "sin")],
            [Term(-PI, "sin_2", "sin2", "sin")],
            [],
        ],
        time=time,
        description="curl of (0, 0, sin^2(pi x) sin^2(pi y) sin(pi z))",
    )


def vortex_pressure(time=STEADY):
    """Zero-mean companion pressure for :func:`vortex` on the unit cube."""
    return CatalogField(
        "vortex_pressure",
        [[Term(1.0, "cos", "cos", "cos")]],
        time=time,
        description="cos(pi x) cos(pi y) cos(pi z)",
    )


# Decay rate of the time-dependent manufactured pair.
PAIR_DECAY_RATE = 1.0


def manufactured_pair(rate=PAIR_DECAY_RATE, omega=None):
    """Time-dependent manufactured pair ``(g(t) w, g(t) q)``.

    ``g(t) = exp(-rate t)``, or ``cos(omega t)`` when ``omega`` is given.
    """
    if omega is not None:
        g = oscillating(omega)
    else:
        g = decaying(rate) if rate else STEADY
    return vortex(g), vortex_pressure(g)


VECTOR_FIELDS = {
    "zero": zero,
    "constant": constant,
    "linear": linear,
    "rotation": rotation,
    "sine": sine,
    "vortex": vortex,
}

SCALAR_FIELDS = {
    "zero": zero_scalar,
    "vortex_pressure": vortex_pressure,
}


def lookup(name, scalar=False):
    """Return the catalog field called ``name`` (a ``_catalog`` suffix is allowed)."""
    key = name[: -len("_catalog")] if name.endswith("_catalog") else name
    table = SCALAR_FIELDS if scalar else VECTOR_FIELDS
    if key not in table:
        raise KeyError(f"unknown catalog field {name!r}; known: {sorted(table)}")
    return table[key]()
