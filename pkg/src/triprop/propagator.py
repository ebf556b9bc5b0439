"""Closed-form propagators for the constant-coupling problem.

Every kernel is returned together with its complex logarithm
(``log_amplitude``), which keeps the large quadratic phases of short-time
kernels unwrapped.  Kernels accept array endpoints (broadcast together) and
complex endpoints, the latter being used by the contour-rotated quadratures in
:mod:`triprop.oracle`.

Driven modes follow ``L = m/2 (y'^2 - W^2 y^2) + F(t) y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .model import PhysicalSystem
from .transform import jacobi_coordinates, mode_coordinates, normal_modes, to_jacobi

__all__ = [
    "CausticError",
    "QuadratureError",
    "KernelValue",
    "Endpoints",
    "CAUSTIC_TOL",
    "osc_functions",
    "free_kernel",
    "sho_kernel_1d",
    "euclidean_sho_kernel",
    "DrivingCoefficients",
    "driving_coefficients",
    "driving_integral_G",
    "driven_kernel_1d",
    "mode_kernel_3d",
    "three_body_kernel",
]

CAUSTIC_TOL = 1e-10
QUAD_TOL = 1e-10


class CausticError(ArithmeticError):
    """Kernel requested at (or numerically on top of) a caustic."""


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class KernelValue:
    amplitude: complex | np.ndarray
    caustic_flag: bool = False
    branch_index: int = 0
    log_amplitude: complex | np.ndarray | None = None
    detail: str = ""

    @classmethod
    def from_log(cls, log_amp, branch_index: int = 0) -> "KernelValue":
        log_amp = np.asarray(log_amp, dtype=complex)
        amp = np.exp(log_amp)
        if log_amp.ndim == 0:
            return cls(complex(amp), False, branch_index, complex(log_amp))
        return cls(amp, False, branch_index, log_amp)

    @classmethod
    def caustic(cls, detail: str, branch_index: int = 0) -> "KernelValue":
        return cls(complex("nan+nanj"), True, branch_index, None, detail)

    def require(self) -> "KernelValue":
        if self.caustic_flag:
            raise CausticError(self.detail or "kernel evaluated at a caustic")
        return self

    def __mul__(self, other: "KernelValue") -> "KernelValue":
        if self.caustic_flag:
            return self
        if other.caustic_flag:
            return other
        return KernelValue.from_log(
            np.add(self.log_amplitude, other.log_amplitude),
            self.branch_index + other.branch_index,
        )


@dataclass(frozen=True)
class Endpoints:
    """Initial and final particle positions, shape ``(..., 3, 3)`` each."""

    r_initial: np.ndarray
    r_final: np.ndarray
    t_a: float
    t_b: float

    def __post_init__(self):
        if not self.t_b > self.t_a:
            raise ValueError(f"need t_b > t_a, got t_a={self.t_a}, t_b={self.t_b}")
        object.__setattr__(self, "r_initial", np.asarray(self.r_initial))
        object.__setattr__(self, "r_final", np.asarray(self.r_final))

    @property
    def tau(self) -> float:
        return self.t_b - self.t_a


# ---------------------------------------------------------------------------
# oscillator building blocks


def _sin_over_omega(omega_sq: float, u):
    """``sin(W u)/W`` continued to W^2 <= 0 (``sinh``/``u`` branches)."""
    u = np.asarray(u, dtype=float)
    if omega_sq > 0:
        w = math.sqrt(omega_sq)
        return u * np.sinc(w * u / math.pi)
    if omega_sq < 0:
        k = math.sqrt(-omega_sq)
        x = k * u
        small = np.abs(x) < 1e-6
        safe = np.where(small, 1.0, x)
        return np.where(small, u * (1.0 + x * x / 6.0), np.sinh(safe) / k)
    return u


def _cos(omega_sq: float, u):
    u = np.asarray(u, dtype=float)
    if omega_sq > 0:
        return np.cos(math.sqrt(omega_sq) * u)
    if omega_sq < 0:
        return np.cosh(math.sqrt(-omega_sq) * u)
    return np.ones_like(u)


def osc_functions(omega_sq: float, tau: float) -> tuple:
    """``(cos(W tau), sin(W tau)/W)`` for any sign of ``W^2``."""
    return float(_cos(omega_sq, tau)), float(_sin_over_omega(omega_sq, tau))


def _caustic_state(omega_sq: float, tau: float):
    """Branch index (half-periods crossed) and whether ``tau`` sits on a caustic."""
    if omega_sq <= 0:
        return 0, False
    phase = math.sqrt(omega_sq) * tau
    return int(math.floor(phase / math.pi)), abs(math.sin(phase)) < CAUSTIC_TOL


def _sq(y):
    return np.sum(np.square(y), axis=-1)


def free_kernel(M: float, x_from, x_to, tau: float, hbar: float = 1.0, d: int = 3) -> KernelValue:
    """Free-particle kernel in ``d`` dimensions (``d == 1``: scalar positions)."""
    if not tau > 0:
        raise ValueError(f"free kernel needs tau > 0, got {tau}")
    dx = np.asarray(x_to) - np.asarray(x_from)
    dist2 = dx * dx if d == 1 else _sq(dx)
    log_pref = 0.5 * d * (math.log(M / (2 * math.pi * hbar * tau)) - 0.5j * math.pi)
    return KernelValue.from_log(log_pref + 1j * M * dist2 / (2 * hbar * tau))


def _sho_log(m, omega_sq, y_from, y_to, tau, hbar):
    n, at_caustic = _caustic_state(omega_sq, tau)
    if at_caustic:
        return None, n
    c, s = osc_functions(omega_sq, tau)
    log_pref = 0.5 * math.log(m / (2 * math.pi * hbar * abs(s))) - 0.25j * math.pi - 0.5j * math.pi * n
    y_from = np.asarray(y_from)
    y_to = np.asarray(y_to)
    quad = (y_from * y_from + y_to * y_to) * c - 2 * y_from * y_to
    return log_pref + 1j * m * quad / (2 * hbar * s), n


def _caustic_detail(omega_sq, tau, label="mode"):
    w = math.sqrt(omega_sq)
    return f"{label}: caustic at Omega*tau = {w * tau:.12g} (Omega^2 = {omega_sq:.12g}, tau = {tau:.12g})"


def sho_kernel_1d(m: float, Omega_sq: float, y_from, y_to, tau: float, hbar: float = 1.0) -> KernelValue:
    """Undriven 1-D oscillator kernel with the Maslov phase tracked from ``tau -> 0+``.

    ``Omega_sq < 0`` gives the inverted oscillator (hyperbolic continuation).
    """
    if not tau > 0:
        raise ValueError(f"kernel needs tau > 0, got {tau}")
    log_k, n = _sho_log(m, Omega_sq, y_from, y_to, tau, hbar)
    if log_k is None:
        return KernelValue.caustic(_caustic_detail(Omega_sq, tau), n)
    return KernelValue.from_log(log_k, n)


def euclidean_sho_kernel(m: float, Omega_sq: float, y_from, y_to, beta: float, hbar: float = 1.0):
    """Oscillator kernel continued to imaginary time ``tau = -i hbar beta`` (real, positive)."""
    if not Omega_sq > 0:
        raise ValueError("imaginary-time kernel needs a bound mode")
    w = math.sqrt(Omega_sq)
    x = hbar * beta * w
    y_from = np.asarray(y_from, dtype=float)
    y_to = np.asarray(y_to, dtype=float)
    pref = math.sqrt(m * w / (2 * math.pi * hbar * math.sinh(x)))
    quad = (y_from**2 + y_to**2) * math.cosh(x) - 2 * y_from * y_to
    return pref * np.exp(-m * w * quad / (2 * hbar * math.sinh(x)))


# ---------------------------------------------------------------------------
# driving integral


@dataclass(frozen=True)
class DrivingCoefficients:
    """Endpoint-independent pieces of the driving integral.

    ``to``     = int F(t) S(t - t_a) dt
    ``from_``  = int F(t) S(t_b - t) dt
    ``double`` = int_{t_a<t'<t<t_b} F(t) F(t') S(t_b - t) S(t' - t_a)

    with ``S(u) = sin(W u)/W``.
    """

    to: float
    from_: float
    double: float

    def G(self, m: float, y_from, y_to):
        return (2.0 / m) * (np.asarray(y_to) * self.to + np.asarray(y_from) * self.from_) - (
            2.0 / m**2
        ) * self.double


def _quad(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, epsabs=QUAD_TOL, epsrel=1e-12, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"driving integral did not converge: {exc}") from None
    return val


def _coefficients(omega_sq, F, t_a, t_b):
    S = lambda u: float(_sin_over_omega(omega_sq, u))  # noqa: E731
    to = _quad(lambda t: float(F(t)) * S(t - t_a), t_a, t_b)
    from_ = _quad(lambda t: float(F(t)) * S(t_b - t), t_a, t_b)

    def inner(t):
        return _quad(lambda tp: float(F(tp)) * S(tp - t_a), t_a, t)

    double = _quad(lambda t: float(F(t)) * S(t_b - t) * inner(t), t_a, t_b)
    return DrivingCoefficients(to, from_, double)


def driving_coefficients(Omega_sq: float, F: Callable, t_a: float, t_b: float) -> DrivingCoefficients:
    """Adaptive Gauss-Kronrod evaluation of the driving integrals for one component."""
    if getattr(F, "is_zero", False):
        return DrivingCoefficients(0.0, 0.0, 0.0)
    return _coefficients(float(Omega_sq), F, float(t_a), float(t_b))


def driving_integral_G(m: float, Omega_sq: float, F: Callable, y_from, y_to, t_a: float, t_b: float):
    """Driving term of the forced-oscillator exponent.

    ``G = (2/m) int [y_to F S(t-t_a) + y_from F S(t_b-t)] dt
          - (2/m^2) int int_{t'<t} F(t) F(t') S(t_b-t) S(t'-t_a)``

    (``S(u) = sin(W u)/W``); it enters the kernel exponent as
    ``i m W / (2 hbar sin(W tau)) * (+G)``.
    """
    return driving_coefficients(Omega_sq, F, t_a, t_b).G(m, y_from, y_to)


def _component(F, a):
    def comp(t):
        return F(t)[..., a]

    comp.is_zero = getattr(F, "is_zero", False)
    return comp


def _driven_log(m, omega_sq, F, y_from, y_to, t_a, t_b, hbar):
    tau = t_b - t_a
    log_k, n = _sho_log(m, omega_sq, y_from, y_to, tau, hbar)
    if log_k is None or F is None or getattr(F, "is_zero", False):
        return log_k, n
    _, s = osc_functions(omega_sq, tau)
    G = driving_integral_G(m, omega_sq, F, y_from, y_to, t_a, t_b)
    return log_k + 1j * m * G / (2 * hbar * s), n


def driven_kernel_1d(
    m: float, Omega_sq: float, F: Optional[Callable], y_from, y_to, t_a: float, t_b: float, hbar: float = 1.0
) -> KernelValue:
    """1-D forced oscillator kernel; ``F`` is a scalar force history or ``None``."""
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    log_k, n = _driven_log(m, Omega_sq, F, y_from, y_to, t_a, t_b, hbar)
    if log_k is None:
        return KernelValue.caustic(_caustic_detail(Omega_sq, t_b - t_a), n)
    return KernelValue.from_log(log_k, n)


def mode_kernel_3d(
    m: float, Omega_sq: float, F: Optional[Callable], y_from, y_to, t_a: float, t_b: float,
    hbar: float = 1.0, label: str = "mode",
) -> KernelValue:
    """Isotropic 3-D forced oscillator: product of three Cartesian factors.

    ``F(t)`` returns a 3-vector; ``y_from``/``y_to`` have a trailing axis of 3.
    """
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")
    y_from = np.asarray(y_from)
    y_to = np.asarray(y_to)
    total = 0.0
    n = 0
    for a in range(3):
        Fa = None if F is None else _component(F, a)
        log_k, n = _driven_log(m, Omega_sq, Fa, y_from[..., a], y_to[..., a], t_a, t_b, hbar)
        if log_k is None:
            return KernelValue.caustic(_caustic_detail(Omega_sq, t_b - t_a, label), 3 * n)
        total = total + log_k
    return KernelValue.from_log(total, 3 * n)


def three_body_kernel(sys: PhysicalSystem, ep: Endpoints) -> KernelValue:
    """Physical-coordinate kernel ``K(r_final, t_b; r_initial, t_a)``.

    Normalised so that it tends to ``delta^9(r_final - r_initial)`` as
    ``tau -> 0``; the result does not depend on ``sys.gauge``.
    """
    frame = normal_modes(to_jacobi(sys))
    for F in frame.forces:
        if not F.covers(ep.t_a, ep.t_b):
            raise ValueError("tabulated drive does not cover the evolution interval")
    Xi = jacobi_coordinates(sys.masses, sys.gauge, ep.r_initial)
    Xf = jacobi_coordinates(sys.masses, sys.gauge, ep.r_final)
    Y1i, Y2i, Y3i = mode_coordinates(frame, Xi)
    Y1f, Y2f, Y3f = mode_coordinates(frame, Xf)
    m = frame.m
    k3 = free_kernel(frame.M, Y3i, Y3f, ep.tau, sys.hbar, d=3)
    k1 = mode_kernel_3d(m, frame.Omega1_sq, frame.F1, Y1i, Y1f, ep.t_a, ep.t_b, sys.hbar, "mode 1")
    k2 = mode_kernel_3d(m, frame.Omega2_sq, frame.F2, Y2i, Y2f, ep.t_a, ep.t_b, sys.hbar, "mode 2")
    for k in (k1, k2):
        if k.caustic_flag:
            return k
    log_total = np.log(frame.measure) + k1.log_amplitude + k2.log_amplitude + k3.log_amplitude
    return KernelValue.from_log(log_total, k1.branch_index + k2.branch_index)
