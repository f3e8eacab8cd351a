"""Regularity certificate: constants ledger, threshold calculus and verdict.

The threshold formulas involve ``Phi(M)^8`` inside an exponential, which
overflows double precision for any realistic ``M``.  Everything is therefore
evaluated as natural logarithms in a private mpmath context; linear values
are derived at the end and clamped to the double range with a flag.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal

import mpmath
import numpy as np

from .norms import energy_ledger, expr_sobolev_norm, linf_time_norm

_ctx = mpmath.MPContext()
_ctx.dps = 50

CONSTANT_NAMES = ("C0", "C1", "C1star", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9")

_TINY = sys.float_info.min
_LOG_TINY = _ctx.log(_TINY)
_LOG_HUGE = _ctx.log(sys.float_info.max)

BANNER_DEFAULT = (
    "constants ledger is the all-ones default: the constants have no known values, "
    "so any verdict below is relative to this ledger only"
)
BANNER_CUSTOM = "verdict is relative to the supplied constants ledger"
REGULARITY_TEXT = (
    "the equations possess a unique solution with u in L^inf(0,T;(H^1_0 cap H^2)^3) "
    "and du/dt in L^2(0,T;(H^1)^3)"
)
NO_CONCLUSION = "no regularity conclusion"


class LedgerError(ValueError):
    pass


class GronwallPreconditionError(ValueError):
    def __init__(self, index, value):
        super().__init__(f"tau*gamma[{index}] = {value!r} violates tau*gamma < 1/2")
        self.index = index


@dataclass(frozen=True)
class ConstantsLedger:
    """Named constants of the threshold formulas, each with a provenance note."""

    C0: float = 1.0
    C1: float = 1.0
    C1star: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    C4: float = 1.0
    C5: float = 1.0
    C6: float = 1.0
    C7: float = 1.0
    C8: float = 1.0
    C9: float = 1.0
    mu: float = 1.0
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in CONSTANT_NAMES + ("mu",):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise LedgerError(f"ledger constant {name} must be positive and finite, got {v!r}")
        prov = {name: self.provenance.get(name, "default 1") for name in CONSTANT_NAMES}
        prov["mu"] = self.provenance.get("mu", "run parameter")
        object.__setattr__(self, "provenance", prov)

    @property
    def is_default(self):
        return all(getattr(self, n) == 1.0 for n in CONSTANT_NAMES)

    def with_overrides(self, values, source="config"):
        """New ledger with some constants replaced; provenance records ``source``."""
        kw = {n: getattr(self, n) for n in CONSTANT_NAMES + ("mu",)}
        prov = dict(self.provenance)
        for name, v in values.items():
            if name not in kw:
                raise LedgerError(f"unknown ledger constant {name!r}; valid: {', '.join(CONSTANT_NAMES)}")
            kw[name] = float(v)
            prov[name] = source
        return ConstantsLedger(**kw, provenance=prov)


@dataclass(frozen=True)
class Quantity:
    """A positive number carried by its natural log, with a double view.

    ``flag`` is ``"underflow"`` or ``"overflow"`` when ``value`` was clamped
    to the smallest normal or largest finite double, else empty.
    """

    ln: object  # mpf natural log

    @property
    def log10(self):
        return self.ln / _ctx.ln10

    @property
    def flag(self):
        if self.ln < _LOG_TINY:
            return "underflow"
        if self.ln > _LOG_HUGE:
            return "overflow"
        return ""

    @property
    def value(self):
        f = self.flag
        if f == "underflow":
            return _TINY
        if f == "overflow":
            return sys.float_info.max
        return float(_ctx.exp(self.ln))

    def __float__(self):
        return self.value


def _mpf(s):
    s = _ctx.mpf(s)
    if s < 0:
        raise ValueError("argument must be nonnegative")
    return s


def _ln_beta(s, ledger):
    return _ctx.log(ledger.C1) + _ctx.log1p(s**15)


def _ln_alpha(s, ledger):
    inner = ledger.C0 + (ledger.C0 + 1) * s
    return -2 * (_ctx.log(ledger.C1star) + _ctx.log1p(inner**9))


def _ln_phi(s, ledger):
    return _ln_alpha(_ctx.exp(_ln_beta(s, ledger)), ledger)


def _ln_Phi(s, ledger):
    b = _ctx.exp(_ln_beta(s, ledger))
    return _ln_beta(ledger.C0 * b + s + ledger.C0, ledger)


def alpha(s, ledger):
    """``1 / [C1* + C1* (C0 + (C0 + 1) s)^9]^2``."""
    return Quantity(_ln_alpha(_mpf(s), ledger))


def beta(s, ledger):
    """``C1 + C1 s^15``."""
    return Quantity(_ln_beta(_mpf(s), ledger))


def phi(s, ledger):
    """``alpha(beta(s))``."""
    return Quantity(_ln_phi(_mpf(s), ledger))


def Phi_fn(s, ledger):
    """``beta(C0 beta(s) + s + C0)``."""
    return Quantity(_ln_Phi(_mpf(s), ledger))


@dataclass(frozen=True)
class Thresholds:
    tau_M: Quantity
    h_M: Quantity
    tau_terms: tuple  # the three candidates of the minimum, as Quantity


def thresholds(M, ledger):
    """Step and mesh-size thresholds for the bound ``M``.

    ``tau_M = min(phi(M)/2, 1/(8 C Phi(M)^8), exp(-C9 Phi(M)^8)/2)`` with
    ``C = max(C2, C3)``, and ``h_M = exp(-2 C9 Phi(M)^8)/4``.
    """
    M = _mpf(M)
    if M <= 0:
        raise ValueError("M must be positive")
    ln_Phi = _ln_Phi(M, ledger)
    p8 = _ctx.exp(8 * ln_Phi)
    c = max(ledger.C2, ledger.C3)
    terms = (
        _ln_phi(M, ledger) - _ctx.log(2),
        -_ctx.log(8) - _ctx.log(c) - 8 * ln_Phi,
        -_ctx.log(2) - ledger.C9 * p8,
    )
    ln_h = -_ctx.log(4) - 2 * ledger.C9 * p8
    return Thresholds(Quantity(min(terms)), Quantity(ln_h), tuple(Quantity(t) for t in terms))


def gronwall_bound(b, c, gamma, tau, B):
    """Discrete Gronwall bound ``exp(2 sum tau gamma) (tau sum c + B)`` per index.

    Entry ``n`` of each sequence is the quantity with subscript ``n + 1``;
    ``b`` only enters the left-hand side of the hypothesis and is validated
    but not used.
    """
    b, c, gamma = (np.asarray(v, dtype=float) for v in (b, c, gamma))
    if not (len(b) == len(c) == len(gamma)):
        raise ValueError("b, c and gamma must have equal length")
    if tau < 0 or B < 0 or np.any(b < 0) or np.any(c < 0) or np.any(gamma < 0):
        raise ValueError("all inputs must be nonnegative")
    tg = tau * gamma
    bad = np.flatnonzero(tg >= 0.5)
    if bad.size:
        raise GronwallPreconditionError(int(bad[0]), float(tg[bad[0]]))
    return np.exp(2.0 * np.cumsum(tg)) * (tau * np.cumsum(c) + B)


def compute_M_lhs(traj, u0):
    """``max_n ||u^n||_L4 + ||u0||_H2 + 1``."""
    return _M_parts(traj, u0)[0]


def _M_parts(traj, u0):
    l4 = linf_time_norm(traj, "L4")
    h2 = expr_sobolev_norm(u0, traj.spaces.mesh, 2, spaces=traj.spaces)
    return l4 + h2 + 1.0, l4, h2


def round_up(x, digits=3):
    """Smallest number with ``digits`` significant digits that is ``>= x``."""
    d = Decimal(repr(float(x)))
    if d <= 0:
        raise ValueError("x must be positive")
    q = Decimal(1).scaleb(d.adjusted() - digits + 1)
    return float((d / q).to_integral_value(rounding=ROUND_CEILING) * q)


# Field order of the text and CSV forms; downstream tools diff on it.
CERTIFICATE_FIELDS = (
    "verdict",
    "M_lhs",
    "linf_l4",
    "u0_h2",
    "M",
    "log10_phi_M",
    "log10_Phi_M",
    "log10_tau_M",
    "log10_h_M",
    "tau_M",
    "h_M",
    "tau_M_flag",
    "h_M_flag",
    "tau",
    "h",
    "T",
    "mu",
    "norm_condition",
    "tau_condition",
    "h_condition",
    "energy_status",
    "log10_tau_gap",
    "log10_h_gap",
    "error_bound",
    "regularity",
    "ledger_banner",
)


def _fmt(v):
    if isinstance(v, _ctx.mpf):
        return _ctx.nstr(v, 17, min_fixed=-4, max_fixed=6)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class Certificate:
    verdict: str
    M_lhs: float
    linf_l4: float
    u0_h2: float
    M: float
    log10_phi_M: object
    log10_Phi_M: object
    log10_tau_M: object
    log10_h_M: object
    tau_M: float
    h_M: float
    tau_M_flag: str
    h_M_flag: str
    tau: float
    h: float
    T: float
    mu: float
    norm_condition: bool
    tau_condition: bool
    h_condition: bool
    energy_status: str
    log10_tau_gap: object
    log10_h_gap: object
    error_bound: float
    regularity: str
    ledger_banner: str
    ledger: ConstantsLedger = None

    @property
    def certified(self):
        return self.verdict == "certified"

    def to_text(self):
        lines = [f"{name}: {_fmt(getattr(self, name))}" for name in CERTIFICATE_FIELDS]
        lines.append("error_bound_meaning: squared L^inf(0,T;L2) error bound tau + h^(3/2)")
        lines.append("u0_norm: full H2 norm of u0")
        lines.append("tau_M_constant: max(C2, C3)")
        if self.ledger is not None:
            for name in CONSTANT_NAMES + ("mu",):
                lines.append(f"ledger.{name}: {getattr(self.ledger, name)!r} ({self.ledger.provenance[name]})")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CERTIFICATE_FIELDS)
        w.writerow([_fmt(getattr(self, name)) for name in CERTIFICATE_FIELDS])
        return buf.getvalue()


def certify(traj, u0, ledger=None, M=None, energy=None):
    """Evaluate the certificate conditions on a completed trajectory.

    ``M`` defaults to the computed left-hand side rounded up to three
    significant digits.  The verdict is ``"certified"`` only if the norm
    condition, both step conditions and the energy ledger all pass.
    """
    if ledger is None:
        ledger = ConstantsLedger(mu=traj.mu)
    M_lhs, l4, h2 = _M_parts(traj, u0)
    M = round_up(M_lhs) if M is None else float(M)
    th = thresholds(M, ledger)
    if energy is None:
        energy = energy_ledger(traj)
    tau, h = traj.tau, traj.spaces.mesh.h
    tau_gap = _ctx.log10(tau) - th.tau_M.log10
    h_gap = _ctx.log10(h) - th.h_M.log10
    norm_ok = M_lhs <= M
    tau_ok = bool(tau_gap < 0)
    h_ok = bool(h_gap < 0)
    failures = []
    if not norm_ok:
        failures.append(f"M_lhs > M ({M_lhs!r} > {M!r})")
    if not tau_ok:
        failures.append(f"tau >= tau_M (log10 gap {_fmt(tau_gap)})")
    if not h_ok:
        failures.append(f"h >= h_M (log10 gap {_fmt(h_gap)})")
    if energy.status != "pass":
        failures.append(f"energy ledger {energy.status}" + (f" ({energy.reason})" if energy.reason else ""))
    verdict = "certified" if not failures else "conditions not met: " + ", ".join(failures)
    return Certificate(
        verdict=verdict,
        M_lhs=M_lhs,
        linf_l4=l4,
        u0_h2=h2,
        M=M,
        log10_phi_M=Quantity(_ln_phi(_mpf(M), ledger)).log10,
        log10_Phi_M=Quantity(_ln_Phi(_mpf(M), ledger)).log10,
        log10_tau_M=th.tau_M.log10,
        log10_h_M=th.h_M.log10,
        tau_M=th.tau_M.value,
        h_M=th.h_M.value,
        tau_M_flag=th.tau_M.flag or "none",
        h_M_flag=th.h_M.flag or "none",
        tau=tau,
        h=h,
        T=traj.T,
        mu=traj.mu,
        norm_condition=norm_ok,
        tau_condition=tau_ok,
        h_condition=h_ok,
        energy_status=energy.status,
        log10_tau_gap=tau_gap,
        log10_h_gap=h_gap,
        error_bound=tau + h**1.5,
        regularity=REGULARITY_TEXT if not failures else NO_CONCLUSION,
        ledger_banner=BANNER_DEFAULT if ledger.is_default else BANNER_CUSTOM,
        ledger=ledger,
    )
