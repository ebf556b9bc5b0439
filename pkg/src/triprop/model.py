"""Physical input data for the three-body quadratic model.

The potential energy of the system is

    V = 1/2 [K21 r21^2 + K31 r31^2 + K32 r32^2]
        + sigma1 r21.r31 + sigma2 r21.r32 + sigma3 r31.r32
        - (g1.r21 + g2.r31 + g3.r32)

with r_ij = r_i - r_j.  With this normalisation the Jacobi-frame couplings in
:mod:`triprop.transform` are exact, and the drives ``g`` act as forces on the
relative coordinates (they enter the Lagrangian with a plus sign).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "ConfigError",
    "Constant",
    "Sinusoid",
    "Tabulated",
    "ScalarDrive",
    "DriveVector",
    "GaugeChoice",
    "PhysicalSystem",
    "TimeDependentConfig",
    "parse_scalar",
    "parse_config",
    "parse_td_config",
    "to_config",
    "dumps_config",
    "validate_system",
    "potential_energy",
]


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration documents."""


# ---------------------------------------------------------------------------
# scalar time functions


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value)) if np.ndim(t) else float(self.value)

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0

    def covers(self, t_a: float, t_b: float) -> bool:
        return True

    def to_spec(self) -> dict:
        return {"const": self.value}


@dataclass(frozen=True)
class Sinusoid:
    """``offset + amp * sin(omega * t + phase)``."""

    amp: float
    omega: float
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, t):
        return self.offset + self.amp * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    @property
    def is_zero(self) -> bool:
        return self.amp == 0.0 and self.offset == 0.0

    def covers(self, t_a: float, t_b: float) -> bool:
        return True

    def to_spec(self) -> dict:
        body = {"amp": self.amp, "omega": self.omega, "phase": self.phase}
        if self.offset != 0.0:
            body["offset"] = self.offset
        return {"sin": body}


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Cubic-spline interpolation of sampled values.

    Evaluation outside the tabulated window raises ``ValueError``: the
    interpolant is never extrapolated.
    """

    t: tuple
    v: tuple
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ConfigError("tabulated drive needs matching 1-D 't' and 'v' arrays")
        if t.size < 2:
            raise ConfigError("tabulated drive needs at least two samples")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ConfigError("tabulated drive contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("non-monotone time grid")
        object.__setattr__(self, "t", tuple(t.tolist()))
        object.__setattr__(self, "v", tuple(v.tolist()))
        object.__setattr__(self, "_spline", CubicSpline(t, v))

    def __eq__(self, other):
        return isinstance(other, Tabulated) and self.t == other.t and self.v == other.v

    def __hash__(self):
        return hash((self.t, self.v))

    def __call__(self, t):
        tt = np.asarray(t, dtype=float)
        # small slack absorbs round-off from quadrature nodes placed at the ends
        slack = 1e-12 * max(1.0, abs(self.t[0]), abs(self.t[-1]))
        if np.any(tt < self.t[0] - slack) or np.any(tt > self.t[-1] + slack):
            raise ValueError(
                f"time {tt.min() if tt.ndim else float(tt)} outside tabulated window "
                f"[{self.t[0]}, {self.t[-1]}]"
            )
        out = self._spline(np.clip(tt, self.t[0], self.t[-1]))
        return float(out) if out.ndim == 0 else out

    @property
    def is_zero(self) -> bool:
        return all(x == 0.0 for x in self.v)

    def covers(self, t_a: float, t_b: float) -> bool:
        return self.t[0] <= t_a and t_b <= self.t[-1]

    def to_spec(self) -> dict:
        return {"table": {"t": list(self.t), "v": list(self.v)}}


ScalarDrive = Union[Constant, Sinusoid, Tabulated]

ZERO = Constant(0.0)


def _number(x: Any, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what}: expected a number, got {x!r}")
    return float(x)


def parse_scalar(spec: Any, what: str = "drive") -> ScalarDrive:
    """Build a scalar time function from a number or a DriveSpec mapping."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{what}: expected a number or one of const/sin/table, got {spec!r}")
    (kind, body), = spec.items()
    if kind == "const":
        return Constant(_number(body, what))
    if kind == "sin":
        if not isinstance(body, dict):
            raise ConfigError(f"{what}: 'sin' needs an object")
        unknown = set(body) - {"amp", "omega", "phase", "offset"}
        if unknown:
            raise ConfigError(f"{what}: unknown sin fields {sorted(unknown)}")
        return Sinusoid(
            _number(body.get("amp", 0.0), what),
            _number(body.get("omega", 0.0), what),
            _number(body.get("phase", 0.0), what),
            _number(body.get("offset", 0.0), what),
        )
    if kind == "table":
        if not isinstance(body, dict) or "t" not in body or "v" not in body:
            raise ConfigError(f"{what}: 'table' needs 't' and 'v'")
        return Tabulated(
            tuple(_number(x, what) for x in body["t"]),
            tuple(_number(x, what) for x in body["v"]),
        )
    raise ConfigError(f"{what}: unknown drive kind {kind!r}")


@dataclass(frozen=True)
class DriveVector:
    """Three Cartesian components, each a scalar time function."""

    x: ScalarDrive = ZERO
    y: ScalarDrive = ZERO
    z: ScalarDrive = ZERO

    @property
    def components(self) -> tuple:
        return (self.x, self.y, self.z)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def __call__(self, t) -> np.ndarray:
        return np.stack([np.asarray(c(t), dtype=float) for c in self.components], axis=-1)

    def covers(self, t_a: float, t_b: float) -> bool:
        return all(c.covers(t_a, t_b) for c in self.components)

    def to_spec(self) -> list:
        return [c.to_spec() for c in self.components]

    @classmethod
    def from_spec(cls, spec: Any, what: str = "drive") -> "DriveVector":
        if not isinstance(spec, (list, tuple)) or len(spec) != 3:
            raise ConfigError(f"{what}: expected a list of three component specs")
        return cls(*(parse_scalar(s, f"{what}[{i}]") for i, s in enumerate(spec)))

    @classmethod
    def constant(cls, vec: Sequence[float]) -> "DriveVector":
        return cls(*(Constant(float(v)) for v in vec))


NO_DRIVE = DriveVector()


@dataclass(frozen=True)
class GaugeChoice:
    """Scaling constants of the Jacobi/dilation maps; physics must not depend on them."""

    a: float = 1.0
    b: float = 1.0
    m: float = 1.0


@dataclass(frozen=True)
class PhysicalSystem:
    m1: float
    m2: float
    m3: float
    K21: float = 0.0
    K31: float = 0.0
    K32: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0
    sigma3: float = 0.0
    g1: DriveVector = NO_DRIVE
    g2: DriveVector = NO_DRIVE
    g3: DriveVector = NO_DRIVE
    hbar: float = 1.0
    gauge: GaugeChoice = GaugeChoice()

    @property
    def masses(self) -> tuple:
        return (self.m1, self.m2, self.m3)

    @property
    def couplings(self) -> tuple:
        return (self.K21, self.K31, self.K32, self.sigma1, self.sigma2, self.sigma3)

    @property
    def drives(self) -> tuple:
        return (self.g1, self.g2, self.g3)

    @property
    def undriven(self) -> bool:
        return all(g.is_zero for g in self.drives)

    def with_gauge(self, gauge: GaugeChoice) -> "PhysicalSystem":
        return replace(self, gauge=gauge)


@dataclass(frozen=True)
class TimeDependentConfig:
    """Constant masses with time-dependent spring and cross couplings.

    Only the gauge constant ``b`` is free here; ``a`` is fixed by the
    equal-Jacobi-mass constraint (see :func:`triprop.timedep.build_td_system`).
    """

    m1: float
    m2: float
    m3: float
    K21: ScalarDrive = ZERO
    K31: ScalarDrive = ZERO
    K32: ScalarDrive = ZERO
    sigma1: ScalarDrive = ZERO
    sigma2: ScalarDrive = ZERO
    sigma3: ScalarDrive = ZERO
    g1: DriveVector = NO_DRIVE
    g2: DriveVector = NO_DRIVE
    g3: DriveVector = NO_DRIVE
    hbar: float = 1.0
    b: float = 1.0

    @property
    def masses(self) -> tuple:
        return (self.m1, self.m2, self.m3)

    @property
    def couplings(self) -> tuple:
        return (self.K21, self.K31, self.K32, self.sigma1, self.sigma2, self.sigma3)

    @property
    def drives(self) -> tuple:
        return (self.g1, self.g2, self.g3)

    def at(self, t: float) -> PhysicalSystem:
        """Frozen-time snapshot with constant couplings."""
        k = [float(c(t)) for c in self.couplings]
        return PhysicalSystem(
            self.m1, self.m2, self.m3, *k,
            g1=DriveVector.constant(self.g1(t)),
            g2=DriveVector.constant(self.g2(t)),
            g3=DriveVector.constant(self.g3(t)),
            hbar=self.hbar,
        )


# ---------------------------------------------------------------------------
# validation and (de)serialisation


def validate_system(sys: PhysicalSystem) -> list:
    """Return human-readable invariant violations; empty when the system is valid."""
    problems = []
    for name, m in zip(("m1", "m2", "m3"), sys.masses):
        if not math.isfinite(m) or m <= 0:
            problems.append(f"non-positive mass: {name}={m}")
    if not math.isfinite(sys.hbar) or sys.hbar <= 0:
        problems.append("hbar must be positive")
    names = ("K21", "K31", "K32", "sigma1", "sigma2", "sigma3")
    for name, c in zip(names, sys.couplings):
        if not math.isfinite(c):
            problems.append(f"coupling not finite: {name}")
    for name in ("a", "b", "m"):
        v = getattr(sys.gauge, name)
        if not math.isfinite(v) or v <= 0:
            problems.append(f"gauge constant {name} must be positive")
    return problems


def _load(text: Union[str, dict]) -> dict:
    if isinstance(text, dict):
        return text
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("malformed document: top level must be an object")
    return doc


_TOP_KEYS = {"masses", "K", "sigma", "drives", "hbar", "gauge"}


def _common(doc: dict, coupling):
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    masses = doc.get("masses")
    if not isinstance(masses, list) or len(masses) != 3:
        raise ConfigError("'masses' must be a list of three numbers")
    masses = [_number(m, "masses") for m in masses]
    for m in masses:
        if not m > 0 or not math.isfinite(m):
            raise ConfigError(f"non-positive mass: {m}")
    K = doc.get("K", {})
    if not isinstance(K, dict) or set(K) - {"K21", "K31", "K32"}:
        raise ConfigError("'K' must be an object with keys K21, K31, K32")
    ks = [coupling(K.get(k, 0.0), k) for k in ("K21", "K31", "K32")]
    sigma = doc.get("sigma", [0.0, 0.0, 0.0])
    if not isinstance(sigma, list) or len(sigma) != 3:
        raise ConfigError("'sigma' must be a list of three values")
    ss = [coupling(s, f"sigma{i + 1}") for i, s in enumerate(sigma)]
    drives = doc.get("drives", {})
    if not isinstance(drives, dict) or set(drives) - {"g1", "g2", "g3"}:
        raise ConfigError("'drives' must be an object with keys g1, g2, g3")
    gs = [DriveVector.from_spec(drives[k], k) if k in drives else NO_DRIVE for k in ("g1", "g2", "g3")]
    hbar = _number(doc.get("hbar", 1.0), "hbar")
    if not hbar > 0 or not math.isfinite(hbar):
        raise ConfigError("hbar must be positive")
    gauge = doc.get("gauge", {})
    if not isinstance(gauge, dict) or set(gauge) - {"a", "b", "m"}:
        raise ConfigError("'gauge' must be an object with keys a, b, m")
    gvals = {k: _number(gauge.get(k, 1.0), f"gauge.{k}") for k in ("a", "b", "m")}
    for k, v in gvals.items():
        if not v > 0 or not math.isfinite(v):
            raise ConfigError(f"gauge constant {k} must be positive")
    return masses, ks, ss, gs, hbar, gvals


def _finite_number(x, what):
    v = _number(x, what)
    if not math.isfinite(v):
        raise ConfigError(f"coupling not finite: {what}")
    return v


def parse_config(text: Union[str, dict]) -> PhysicalSystem:
    """Parse a JSON configuration document into a validated :class:`PhysicalSystem`."""
    doc = _load(text)
    masses, ks, ss, gs, hbar, gvals = _common(doc, _finite_number)
    sys = PhysicalSystem(*masses, *ks, *ss, *gs, hbar=hbar, gauge=GaugeChoice(**gvals))
    problems = validate_system(sys)
    if problems:
        raise ConfigError("; ".join(problems))
    return sys


def parse_td_config(text: Union[str, dict]) -> TimeDependentConfig:
    """Like :func:`parse_config`, but K and sigma entries may be DriveSpec objects."""
    doc = _load(text)
    masses, ks, ss, gs, hbar, gvals = _common(doc, parse_scalar)
    return TimeDependentConfig(*masses, *ks, *ss, *gs, hbar=hbar, b=gvals["b"])


def to_config(sys: Union[PhysicalSystem, TimeDependentConfig]) -> dict:
    def enc(c):
        return float(c) if isinstance(c, (int, float)) else c.to_spec()

    doc = {
        "masses": [sys.m1, sys.m2, sys.m3],
        "K": {"K21": enc(sys.K21), "K31": enc(sys.K31), "K32": enc(sys.K32)},
        "sigma": [enc(sys.sigma1), enc(sys.sigma2), enc(sys.sigma3)],
        "drives": {k: g.to_spec() for k, g in zip(("g1", "g2", "g3"), sys.drives)},
        "hbar": sys.hbar,
    }
    if isinstance(sys, PhysicalSystem):
        doc["gauge"] = {"a": sys.gauge.a, "b": sys.gauge.b, "m": sys.gauge.m}
    else:
        doc["gauge"] = {"b": sys.b}
    return doc


def dumps_config(sys) -> str:
    return json.dumps(to_config(sys), indent=2)


def potential_energy(sys: PhysicalSystem, r, t: float = 0.0):
    """Potential energy for particle positions ``r`` of shape ``(..., 3, 3)``
    (particle index, Cartesian index)."""
    r = np.asarray(r, dtype=float)
    r21 = r[..., 1, :] - r[..., 0, :]
    r31 = r[..., 2, :] - r[..., 0, :]
    r32 = r[..., 2, :] - r[..., 1, :]

    def dot(u, v):
        return np.sum(u * v, axis=-1)

    v = 0.5 * (sys.K21 * dot(r21, r21) + sys.K31 * dot(r31, r31) + sys.K32 * dot(r32, r32))
    v = v + sys.sigma1 * dot(r21, r31) + sys.sigma2 * dot(r21, r32) + sys.sigma3 * dot(r31, r32)
    v = v - dot(sys.g1(t), r21) - dot(sys.g2(t), r31) - dot(sys.g3(t), r32)
    return v
