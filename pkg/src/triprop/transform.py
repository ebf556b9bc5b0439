"""Jacobi coordinates and the dilation-rotation that decouples the relative modes.

Conventions
-----------
Positions are arrays of shape ``(..., 3, 3)``: particle index first, Cartesian
index last.  Jacobi coordinates are

    X1 = a (r2 - r1)
    X2 = b (r3 - (m1 r1 + m2 r2) / m12)
    X3 = (m1 r1 + m2 r2 + m3 r3) / M

and the relative pair is rotated into mode coordinates with

    X1 = sqrt(m/M1) ( cos(phi) Y1 + sin(phi) Y2)
    X2 = sqrt(m/M2) (-sin(phi) Y1 + cos(phi) Y2)

In the Jacobi frame the potential reads
``1/2 [M1 w1^2 X1^2 + M2 w2^2 X2^2] + lam X1.X2 - f1.X1 - f2.X2``, so the
mass-weighted coupling matrix is ``[[w1^2, lam/sqrt(M1 M2)], [., w2^2]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import GaugeChoice, PhysicalSystem

__all__ = [
    "JacobiFrame",
    "RotatedCouplings",
    "NormalModeFrame",
    "jacobi_couplings",
    "jacobi_matrix",
    "jacobi_coordinates",
    "to_jacobi",
    "rotated_couplings",
    "mixing_angle",
    "normal_modes",
    "mode_coordinates",
    "gauge_sweep_check",
]


def jacobi_couplings(m1, m2, m3, K21, K31, K32, s1, s2, s3, a=1.0, b=1.0):
    """Jacobi masses, frequencies and cross coupling.

    Pure arithmetic, so the coupling arguments may be arrays of sampled
    time-dependent values.  Returns ``(M1, M2, M, w1_sq, w2_sq, lam)``.
    """
    m12 = m1 + m2
    M = m12 + m3
    M1 = m1 * m2 / (a**2 * m12)
    M2 = m3 * m12 / (b**2 * M)
    w1_sq = (m12 / (m1 * m2)) * (
        K21
        + (m2**2 * K31 + m1**2 * K32) / m12**2
        + (2.0 / m12) * (s1 * m2 - s2 * m1 - s3 * (m1 * m2 / m12))
    )
    w2_sq = (M / (m3 * m12)) * (K31 + K32 + 2.0 * s3)
    lam = (s3 * (m2 - m1) / m12 + s1 + s2 + (m2 * K31 - m1 * K32) / m12) / (a * b)
    return M1, M2, M, w1_sq, w2_sq, lam


def jacobi_matrix(masses: Sequence[float], a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Matrix ``A`` with ``X = A r`` (acting on the particle index)."""
    m1, m2, m3 = masses
    m12 = m1 + m2
    M = m12 + m3
    return np.array(
        [
            [-a, a, 0.0],
            [-b * m1 / m12, -b * m2 / m12, b],
            [m1 / M, m2 / M, m3 / M],
        ]
    )


def jacobi_coordinates(masses, gauge: GaugeChoice, r) -> np.ndarray:
    """Map particle positions ``(..., 3, 3)`` to ``(X1, X2, X3)`` stacked the same way."""
    A = jacobi_matrix(masses, gauge.a, gauge.b)
    return np.einsum("ij,...jk->...ik", A, np.asarray(r))


def _drive_matrix(masses, a, b) -> np.ndarray:
    """Rows give (f1, f2) as combinations of (g1, g2, g3)."""
    m1, m2, _ = masses
    m12 = m1 + m2
    return np.array([[1.0 / a, m2 / (m12 * a), -m1 / (m12 * a)], [0.0, 1.0 / b, 1.0 / b]])


def _combine(drives, weights) -> Callable:
    """Time function ``t -> sum_k w_k g_k(t)`` over 3-vector drives."""
    active = [(float(w), g) for w, g in zip(weights, drives) if w != 0.0 and not g.is_zero]

    def force(t):
        out = np.zeros(np.shape(t) + (3,))
        for w, g in active:
            out = out + w * g(t)
        return out

    force.is_zero = not active
    force.covers = lambda t_a, t_b: all(g.covers(t_a, t_b) for _, g in active)
    return force


@dataclass(frozen=True)
class JacobiFrame:
    M1: float
    M2: float
    M3: float
    omega1_sq: float
    omega2_sq: float
    lam: float
    f1: Callable
    f2: Callable
    m12: float
    jacobian: float
    drive_matrix: np.ndarray
    gauge: GaugeChoice
    drives: tuple = ()

    @property
    def M(self) -> float:
        return self.M3

    @property
    def coupling(self) -> float:
        """Off-diagonal entry of the mass-weighted coupling matrix."""
        return self.lam / math.sqrt(self.M1 * self.M2)


@dataclass(frozen=True)
class RotatedCouplings:
    alpha: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class NormalModeFrame:
    """Decoupled modes; ``Y1`` always carries the lower ``Omega1_sq``."""

    phi: float
    Omega1_sq: float
    Omega2_sq: float
    F1: Callable
    F2: Callable
    force_matrix: np.ndarray
    R: float
    gauge: GaugeChoice
    measure: float
    jacobi: JacobiFrame

    @property
    def M1(self) -> float:
        return self.jacobi.M1

    @property
    def M2(self) -> float:
        return self.jacobi.M2

    @property
    def M(self) -> float:
        return self.jacobi.M3

    @property
    def m(self) -> float:
        return self.gauge.m

    @property
    def inverted(self) -> tuple:
        return (self.Omega1_sq < 0.0, self.Omega2_sq < 0.0)

    @property
    def bound(self) -> bool:
        return self.Omega1_sq > 0.0 and self.Omega2_sq > 0.0

    @property
    def Omega_sq(self) -> tuple:
        return (self.Omega1_sq, self.Omega2_sq)

    @property
    def forces(self) -> tuple:
        return (self.F1, self.F2)


def to_jacobi(sys: PhysicalSystem) -> JacobiFrame:
    a, b = sys.gauge.a, sys.gauge.b
    M1, M2, M, w1, w2, lam = jacobi_couplings(*sys.masses, *sys.couplings, a=a, b=b)
    D = _drive_matrix(sys.masses, a, b)
    return JacobiFrame(
        M1=M1,
        M2=M2,
        M3=M,
        omega1_sq=w1,
        omega2_sq=w2,
        lam=lam,
        f1=_combine(sys.drives, D[0]),
        f2=_combine(sys.drives, D[1]),
        m12=sys.m1 + sys.m2,
        jacobian=(a * b) ** 3,
        drive_matrix=D,
        gauge=sys.gauge,
        drives=sys.drives,
    )


def rotated_couplings(jac: JacobiFrame, m: float, phi: float) -> RotatedCouplings:
    c2, s2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    k = jac.lam * m / math.sqrt(jac.M1 * jac.M2)
    sin2, cos2 = math.sin(2 * phi), math.cos(2 * phi)
    alpha = m * jac.omega1_sq * c2 + m * jac.omega2_sq * s2 - k * sin2
    beta = m * jac.omega1_sq * s2 + m * jac.omega2_sq * c2 + k * sin2
    gamma = m * (jac.omega1_sq - jac.omega2_sq) * sin2 + 2 * k * cos2
    return RotatedCouplings(alpha, beta, gamma)


def mixing_angle(jac: JacobiFrame, m: float = 1.0) -> float:
    """Angle in (-pi/4, pi/4] that removes the Y1.Y2 cross term.

    ``m`` cancels from the zero-cross-term condition; it is accepted so the
    call mirrors :func:`rotated_couplings`.
    """
    off = 2.0 * jac.coupling
    diff = jac.omega2_sq - jac.omega1_sq
    if off == 0.0:
        return 0.0
    phi = 0.5 * math.atan2(off, diff)
    # atan2 covers (-pi, pi]; fold into (-pi/4, pi/4] (gamma flips sign, zero stays zero)
    if phi > math.pi / 4:
        phi -= math.pi / 2
    elif phi <= -math.pi / 4:
        phi += math.pi / 2
    return phi


def normal_modes(jac: JacobiFrame, gauge: GaugeChoice | None = None) -> NormalModeFrame:
    gauge = gauge or jac.gauge
    m = gauge.m
    phi = mixing_angle(jac, m)
    rc = rotated_couplings(jac, m, phi)
    if rc.alpha > rc.beta:
        # relabel so that Y1 is the softer mode
        phi = phi - math.pi / 2 if phi > 0 else phi + math.pi / 2
        rc = rotated_couplings(jac, m, phi)
    c, s = math.cos(phi), math.sin(phi)
    p1, p2 = math.sqrt(m / jac.M1), math.sqrt(m / jac.M2)
    rot = np.array([[p1 * c, -p2 * s], [p1 * s, p2 * c]])
    force_matrix = rot @ jac.drive_matrix
    diff = jac.omega2_sq - jac.omega1_sq
    denom = math.hypot(2.0 * jac.lam, math.sqrt(jac.M1 * jac.M2) * diff)
    R = 1.0 if denom == 0.0 else math.sqrt(jac.M1 * jac.M2) * abs(diff) / denom
    drives = jac.drives
    return NormalModeFrame(
        phi=phi,
        Omega1_sq=rc.alpha / m,
        Omega2_sq=rc.beta / m,
        F1=_combine(drives, force_matrix[0]),
        F2=_combine(drives, force_matrix[1]),
        force_matrix=force_matrix,
        R=R,
        gauge=gauge,
        measure=jac.jacobian * (math.sqrt(jac.M1 * jac.M2) / m) ** 3,
        jacobi=jac,
    )


def mode_coordinates(frame: NormalModeFrame, X) -> tuple:
    """Split Jacobi coordinates ``(..., 3, 3)`` into ``(Y1, Y2, Y3)``."""
    X = np.asarray(X)
    X1, X2, X3 = X[..., 0, :], X[..., 1, :], X[..., 2, :]
    c, s = math.cos(frame.phi), math.sin(frame.phi)
    q1, q2 = math.sqrt(frame.M1 / frame.m), math.sqrt(frame.M2 / frame.m)
    Y1 = q1 * c * X1 - q2 * s * X2
    Y2 = q1 * s * X1 + q2 * c * X2
    return Y1, Y2, X3


def gauge_sweep_check(sys: PhysicalSystem, gauges: Sequence[GaugeChoice], probe) -> float:
    """Largest relative deviation of the physical kernel across gauge choices.

    ``probe`` is an :class:`~triprop.propagator.Endpoints` or a list of them.
    """
    from .propagator import Endpoints, three_body_kernel

    if len(gauges) < 2:
        raise ValueError("gauge sweep needs at least two gauges")
    probes = [probe] if isinstance(probe, Endpoints) else list(probe)
    worst = 0.0
    for ep in probes:
        values = []
        for g in gauges:
            kv = three_body_kernel(sys.with_gauge(g), ep)
            kv.require()
            values.append(np.asarray(kv.amplitude))
        ref = values[0]
        for v in values[1:]:
            dev = np.max(np.abs(v - ref) / np.abs(ref))
            worst = max(worst, float(dev))
    return worst
