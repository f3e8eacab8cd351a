"""Run configuration: ``key = value`` lines with optional section headers.

Keys before the first header belong to ``[run]``.  Unknown keys are fatal
and the error names the closest valid key.  :meth:`RunConfig.echo` writes a
file that parses back to an identical config.
"""

from __future__ import annotations

import configparser
import difflib
import math
from dataclasses import dataclass, field, fields

from . import catalog
from .certify import CONSTANT_NAMES
from .expr import ExprSyntaxError, UnknownIdentifierError, parse

SECTIONS = ("run", "ledger", "convergence")


class ConfigError(ValueError):
    pass


def _floats(text, count=None):
    vals = tuple(float(v) for v in str(text).replace(",", " ").split())
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} numbers")
    return vals


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError("expected integers")
    return tuple(int(v) for v in vals)


def _mesh(text):
    vals = _ints(text)
    if len(vals) == 1:
        return vals * 3
    if len(vals) != 3:
        raise ValueError("expected n or nx, ny, nz")
    return vals


def _optional_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _optional_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _fmt_seq(vals):
    return ", ".join(repr(v) for v in vals)


@dataclass
class RunConfig:
    mesh: tuple = (2, 2, 2)
    extents: tuple = (0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    refine: int = 0
    tau: float = 0.01
    T: float | None = None
    N: int | None = None
    mu: float = 1.0
    u0: str = "zero"
    forcing: str = "none"
    manufactured_rate: float = catalog.PAIR_DECAY_RATE
    manufactured_omega: float | None = None
    M: float | None = None
    snapshot_stride: int = 0
    solver_tol: float = 1e-10
    ledger: dict = field(default_factory=dict)
    levels: tuple = (2, 4, 8)
    space_tau: float = 1e-3
    space_T: float = 0.01
    space_mu: float = 1.0
    time_n: int = 4
    time_taus: tuple = (0.04, 0.02, 0.01)
    time_T: float = 0.4
    time_mu: float = 0.1
    time_omega: float = 20.0

    @property
    def box(self):
        e = self.extents
        return (tuple(e[:3]), tuple(e[3:]))

    @property
    def manufactured(self):
        return self.forcing.strip().lower() == "manufactured"

    def echo(self):
        """Config text with every default filled in."""
        out = ["[run]"]
        for f in fields(self):
            if f.name == "ledger" or _SECTION_OF[f.name] != "run":
                continue
            out.append(f"{f.name} = {_FORMAT[f.name](getattr(self, f.name))}")
        out.append("")
        out.append("[ledger]")
        for name in CONSTANT_NAMES:
            if name in self.ledger:
                out.append(f"{name} = {self.ledger[name]!r}")
        out.append("")
        out.append("[convergence]")
        for f in fields(self):
            if _SECTION_OF.get(f.name) == "convergence":
                out.append(f"{f.name} = {_FORMAT[f.name](getattr(self, f.name))}")
        return "\n".join(out) + "\n"


_RUN_KEYS = {
    "mesh": _mesh,
    "extents": lambda s: _floats(s, 6),
    "refine": int,
    "tau": float,
    "T": _optional_float,
    "N": _optional_int,
    "mu": float,
    "u0": str,
    "forcing": str,
    "manufactured_rate": float,
    "manufactured_omega": _optional_float,
    "M": _optional_float,
    "snapshot_stride": int,
    "solver_tol": float,
}
_CONV_KEYS = {
    "levels": _ints,
    "space_tau": float,
    "space_T": float,
    "space_mu": float,
    "time_n": int,
    "time_taus": _floats,
    "time_T": float,
    "time_mu": float,
    "time_omega": float,
}
_SECTION_OF = {**{k: "run" for k in _RUN_KEYS}, **{k: "convergence" for k in _CONV_KEYS}}
_FORMAT = {k: repr for k in _SECTION_OF}
_FORMAT.update(mesh=_fmt_seq, extents=_fmt_seq, levels=_fmt_seq, time_taus=_fmt_seq, u0=str, forcing=str)
_FORMAT.update({k: (lambda v: "none" if v is None else repr(v)) for k in ("T", "N", "manufactured_omega", "M")})
_VALID = {"run": _RUN_KEYS, "ledger": dict.fromkeys(CONSTANT_NAMES, float), "convergence": _CONV_KEYS}


def _unknown(key, section):
    valid = list(_VALID[section])
    close = difflib.get_close_matches(key, valid, n=1)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return ConfigError(f"unknown key {key!r} in [{section}]{hint} valid keys: {', '.join(valid)}")


def _check_field(u0, what):
    """A catalog name or a parsable vector expression."""
    try:
        catalog.lookup(u0)
        return
    except KeyError:
        pass
    try:
        ex = parse(u0)
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise ConfigError(f"{what}: {u0!r} is neither a catalog field nor a valid expression ({exc})") from exc
    if ex.ncomp != 3:
        raise ConfigError(f"{what}: expected a 3-component vector expression")


def validate(cfg):
    if not cfg.tau > 0:
        raise ConfigError(f"tau must be positive, got {cfg.tau!r}")
    if not cfg.mu > 0:
        raise ConfigError(f"mu must be positive, got {cfg.mu!r}")
    if cfg.T is None and cfg.N is None:
        raise ConfigError("one of T or N is required")
    if cfg.T is not None and not cfg.T > 0:
        raise ConfigError(f"T must be positive, got {cfg.T!r}")
    if cfg.N is not None and cfg.N < 1:
        raise ConfigError(f"N must be a positive integer, got {cfg.N!r}")
    if cfg.T is None:
        cfg.T = cfg.N * cfg.tau
    n = round(cfg.T / cfg.tau)
    if n < 1 or abs(n * cfg.tau - cfg.T) > 1e-12 * cfg.T:
        raise ConfigError(f"T = {cfg.T!r} is not an integer multiple of tau = {cfg.tau!r}")
    if cfg.N is not None and cfg.N != n:
        raise ConfigError(f"N = {cfg.N} disagrees with T/tau = {n}")
    cfg.N = n
    if any(m < 1 for m in cfg.mesh):
        raise ConfigError("mesh cell counts must be positive")
    lo, hi = cfg.box
    if any(not (b > a) or not (math.isfinite(a) and math.isfinite(b)) for a, b in zip(lo, hi)):
        raise ConfigError("extents must describe a nondegenerate box")
    if cfg.refine < 0 or cfg.snapshot_stride < 0:
        raise ConfigError("refine and snapshot_stride must be nonnegative")
    if not cfg.solver_tol > 0:
        raise ConfigError("solver_tol must be positive")
    if cfg.M is not None and not cfg.M > 0:
        raise ConfigError("M must be positive")
    for name, v in cfg.ledger.items():
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"ledger constant {name} must be positive and finite")
    if cfg.manufactured:
        if cfg.u0 not in ("zero", "manufactured"):
            raise ConfigError("with forcing = manufactured, u0 must be omitted or 'manufactured'")
        cfg.u0 = "manufactured"
    else:
        _check_field(cfg.u0, "u0")
        if cfg.forcing.strip().lower() != "none":
            _check_field(cfg.forcing, "forcing")
    if len(cfg.levels) < 3 or len(cfg.time_taus) < 3:
        raise ConfigError("convergence studies need at least 3 levels and 3 step sizes")
    return cfg


def parse_config_text(text):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=False)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = RunConfig()
    for section in cp.sections():
        if section not in _VALID:
            raise ConfigError(f"unknown section [{section}]; valid: {', '.join(SECTIONS)}")
        for key, raw in cp.items(section):
            if key not in _VALID[section]:
                raise _unknown(key, section)
            try:
                value = _VALID[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot read {raw!r} ({exc})") from exc
            if section == "ledger":
                cfg.ledger[key] = value
            else:
                setattr(cfg, key, value)
    return validate(cfg)


def parse_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
