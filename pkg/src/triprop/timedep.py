"""Time-dependent couplings under the equal-frequency constraint.

With ``a/b = sqrt(m1 m2 M / (m3 m12^2))`` both Jacobi masses equal ``mu``.
When in addition the two Jacobi frequencies coincide at all times, a fixed
pi/4 rotation

    x1 = (X1 - X2)/sqrt(2),   x2 = (X1 + X2)/sqrt(2)

decouples the relative motion into two oscillators
``L_i = mu/2 (x_i'^2 - W_i(t)^2 x_i^2) + theta_i(t).x_i`` with

    W1^2 = w^2 - lam/mu,  W2^2 = w^2 + lam/mu,
    theta1 = (f1 - f2)/sqrt(2),  theta2 = (f1 + f2)/sqrt(2).

Each mode is translated by the classical shift ``eta`` and mapped to a free
particle through the Ermakov pair ``(s, alpha)``:

    s'' + W^2 s = s^-3,   alpha' = s^-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model import GaugeChoice, TimeDependentConfig
from .propagator import CAUSTIC_TOL, Endpoints, KernelValue, free_kernel
from .spectrum import LevelIndex, hermite_function
from .transform import _combine, _drive_matrix, jacobi_couplings, jacobi_coordinates

__all__ = [
    "ConstraintError",
    "TimeDependentSystem",
    "ErmakovSolution",
    "ModeShift",
    "build_td_system",
    "solve_ermakov",
    "solve_shift",
    "td_mode_kernel_1d",
    "td_mode_kernel_family",
    "td_three_body_kernel",
    "td_wavefunction",
]

STEP_TOL = 1e-10
MAX_STEPS = 2**18
SQRT2 = math.sqrt(2.0)


class ConstraintError(ValueError):
    pass


# ---------------------------------------------------------------------------
# system construction


@dataclass(frozen=True)
class TimeDependentSystem:
    config: TimeDependentConfig
    a: float
    b: float
    mu: float
    M: float
    omega_sq: Callable
    lambda_t: Callable
    Omega_sq: tuple  # (W1^2(t), W2^2(t))
    theta: tuple  # (theta1(t), theta2(t)), 3-vectors
    hbar: float

    @property
    def gauge(self) -> GaugeChoice:
        return GaugeChoice(self.a, self.b, 1.0)

    def mode_coordinates(self, r) -> tuple:
        """Physical positions ``(..., 3, 3)`` to ``(x1, x2, X3)``."""
        X = jacobi_coordinates(self.config.masses, self.gauge, r)
        X1, X2, X3 = X[..., 0, :], X[..., 1, :], X[..., 2, :]
        return (X1 - X2) / SQRT2, (X1 + X2) / SQRT2, X3


def constraint_ratio(m1: float, m2: float, m3: float) -> float:
    """``a/b`` that makes the two Jacobi masses equal."""
    m12 = m1 + m2
    return math.sqrt(m1 * m2 * (m12 + m3) / (m3 * m12**2))


def build_td_system(
    config: TimeDependentConfig, t_span: Sequence[float] = (0.0, 10.0), n_samples: int = 513, rtol: float = 1e-10
) -> TimeDependentSystem:
    """Validate the equal-frequency constraint on a sample grid and set up the modes."""
    m1, m2, m3 = config.masses
    b = config.b
    a = b * constraint_ratio(m1, m2, m3)
    mu = m3 * (m1 + m2) / (b**2 * (m1 + m2 + m3))

    def parts(t):
        k = [c(t) for c in config.couplings]
        return jacobi_couplings(m1, m2, m3, *k, a=a, b=b)

    ts = np.linspace(float(t_span[0]), float(t_span[1]), n_samples)
    _, _, M, w1, w2, lam = parts(ts)
    w1 = np.broadcast_to(w1, ts.shape)
    w2 = np.broadcast_to(w2, ts.shape)
    scale = np.maximum(np.maximum(np.abs(w1), np.abs(w2)), np.abs(np.broadcast_to(lam, ts.shape)) / mu)
    scale = np.where(scale > 0, scale, 1.0)
    bad = np.abs(w1 - w2) > rtol * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ConstraintError(
            f"Jacobi frequencies differ at t={ts[i]:.12g}: {w1[i]:.15g} vs {w2[i]:.15g}"
        )

    def omega_sq(t):
        return parts(t)[3]

    def lambda_t(t):
        return parts(t)[5]

    def W1(t):
        _, _, _, w, _, lam = parts(t)
        return w - lam / mu

    def W2(t):
        _, _, _, w, _, lam = parts(t)
        return w + lam / mu

    D = _drive_matrix(config.masses, a, b)
    thetas = (
        _combine(config.drives, (D[0] - D[1]) / SQRT2),
        _combine(config.drives, (D[0] + D[1]) / SQRT2),
    )
    return TimeDependentSystem(config, a, b, mu, M, omega_sq, lambda_t, (W1, W2), thetas, config.hbar)


# ---------------------------------------------------------------------------
# fixed-step RK4 with step halving


def _rk4(rhs, y0, t_a, t_b, n):
    h = (t_b - t_a) / n
    ys = np.empty((n + 1, len(y0)))
    y = np.asarray(y0, dtype=float)
    ys[0] = y
    t = t_a
    for i in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t_a + (i + 1) * h
        ys[i + 1] = y
    return ys


def _integrate(rhs, y0, t_a, t_b, tol=STEP_TOL, n0=64):
    """Halve the step until two successive solutions agree to ``tol`` (scaled) at shared nodes."""
    n = n0
    prev = _rk4(rhs, y0, t_a, t_b, n)
    while True:
        n *= 2
        if n > MAX_STEPS:
            raise ArithmeticError("step halving did not converge")
        cur = _rk4(rhs, y0, t_a, t_b, n)
        if not np.all(np.isfinite(cur)):
            raise ArithmeticError("solution blew up")
        scale = np.maximum(1.0, np.max(np.abs(cur), axis=0))
        if np.all(np.max(np.abs(cur[::2] - prev), axis=0) <= tol * scale):
            return np.linspace(t_a, t_b, n + 1), cur
        prev = cur


# ---------------------------------------------------------------------------
# Ermakov pair


@dataclass(frozen=True)
class ErmakovSolution:
    t: np.ndarray
    s: np.ndarray
    s_dot: np.ndarray
    alpha: np.ndarray
    Omega_sq: Callable

    def __post_init__(self):
        s_dd = -np.asarray(self.Omega_sq(self.t), dtype=float) * self.s + self.s**-3
        object.__setattr__(self, "_s", CubicHermiteSpline(self.t, self.s, self.s_dot))
        object.__setattr__(self, "_sd", CubicHermiteSpline(self.t, self.s_dot, s_dd))
        object.__setattr__(self, "_al", CubicHermiteSpline(self.t, self.alpha, self.s**-2))

    @property
    def t_a(self) -> float:
        return float(self.t[0])

    @property
    def t_b(self) -> float:
        return float(self.t[-1])

    def at(self, t) -> tuple:
        """``(s, s_dot, alpha)`` at ``t`` (exact at grid nodes, cubic Hermite between)."""
        if np.any(np.asarray(t) < self.t_a - 1e-12) or np.any(np.asarray(t) > self.t_b + 1e-12):
            raise ValueError("time outside the solved window")
        return self._s(t), self._sd(t), self._al(t)

    @property
    def delta(self) -> float:
        return float(self.alpha[-1] - self.alpha[0])

    def residuals(self) -> dict:
        """Largest ODE and Wronskian residuals from 4th-order differences of the samples."""
        h = self.t[1] - self.t[0]

        def d(f):
            return (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)

        s = self.s[2:-2]
        w2 = np.asarray(self.Omega_sq(self.t[2:-2]), dtype=float)
        ode = np.abs(d(self.s_dot) + w2 * s - s**-3)
        scale = np.max(np.abs(w2 * s)) + np.max(s**-3)
        return {
            "ode": float(np.max(ode) / scale),
            "alpha_dot_s2": float(np.max(np.abs(d(self.alpha) * s**2 - 1.0))),
            "s_min": float(np.min(self.s)),
        }


def solve_ermakov(
    Omega_sq: Callable, t_a: float, t_b: float, tol: float = STEP_TOL, s0: Optional[float] = None
) -> ErmakovSolution:
    """Ermakov pair started at ``s = W(t_a)^-1/2, s' = 0, alpha = 0``.

    Any positive start ``s0`` gives a valid pair for the kernel; passing one
    explicitly allows ``Omega^2(t_a) <= 0`` (free or inverted modes).
    """
    w0 = float(Omega_sq(t_a))
    if s0 is None:
        if not w0 > 0:
            raise ValueError(f"Ermakov start needs Omega^2(t_a) > 0, got {w0}")
        s0 = w0**-0.25
    elif not s0 > 0:
        raise ValueError("Ermakov start amplitude must be positive")
    if not t_b > t_a:
        raise ValueError("need t_b > t_a")

    def rhs(t, y):
        s = y[0]
        if s <= 0:
            raise ArithmeticError(f"Ermakov amplitude collapsed at t={t:.6g}")
        return np.array([y[1], -float(Omega_sq(t)) * s + s**-3, s**-2])

    t, y = _integrate(rhs, [float(s0), 0.0, 0.0], float(t_a), float(t_b), tol)
    return ErmakovSolution(t, y[:, 0], y[:, 1], y[:, 2], Omega_sq)


# ---------------------------------------------------------------------------
# classical shift


@dataclass(frozen=True)
class ModeShift:
    """One Cartesian component of the shift; ``phase(t) = int_{t_a}^t theta eta``."""

    t: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray
    phase: np.ndarray
    eta_ddot: Optional[np.ndarray] = None
    phase_dot: Optional[np.ndarray] = None

    def __post_init__(self):
        edd = self.eta_ddot if self.eta_ddot is not None else np.gradient(self.eta_dot, self.t)
        pd = self.phase_dot if self.phase_dot is not None else np.gradient(self.phase, self.t)
        object.__setattr__(self, "_e", CubicHermiteSpline(self.t, self.eta, self.eta_dot))
        object.__setattr__(self, "_ed", CubicHermiteSpline(self.t, self.eta_dot, edd))
        object.__setattr__(self, "_p", CubicHermiteSpline(self.t, self.phase, pd))

    def at(self, t) -> tuple:
        return self._e(t), self._ed(t), self._p(t)

    @classmethod
    def zero(cls, t_a: float, t_b: float) -> "ModeShift":
        t = np.array([t_a, t_b], dtype=float)
        z = np.zeros(2)
        return cls(t, z, z, z, z, z)

    @classmethod
    def static(cls, eta0: float, theta: float, t_a: float, t_b: float) -> "ModeShift":
        """Constant shift ``eta0`` under a constant force ``theta``."""
        t = np.array([t_a, t_b], dtype=float)
        z = np.zeros(2)
        return cls(t, np.full(2, eta0), z, theta * eta0 * (t - t_a), z, np.full(2, theta * eta0))

    def residual(self, Omega_sq: Callable, theta: Callable, mu: float) -> float:
        h = self.t[1] - self.t[0]
        edd = (-self.eta_dot[4:] + 8 * self.eta_dot[3:-1] - 8 * self.eta_dot[1:-3] + self.eta_dot[:-4]) / (12 * h)
        tt = self.t[2:-2]
        r = edd + np.asarray(Omega_sq(tt)) * self.eta[2:-2] + np.asarray(theta(tt)) / mu
        scale = max(1e-300, float(np.max(np.abs(np.asarray(theta(tt)) / mu))))
        return float(np.max(np.abs(r)) / scale)


def solve_shift(Omega_sq: Callable, theta: Callable, mu: float, t_a: float, t_b: float, tol: float = STEP_TOL):
    """``eta'' + W^2 eta = -theta/mu`` with ``eta(t_a) = eta(t_b) = 0``, by shooting.

    Raises ``ArithmeticError`` when ``t_b`` is conjugate to ``t_a``.
    """
    if getattr(theta, "is_zero", False):
        return ModeShift.zero(t_a, t_b)

    def rhs(t, y):
        w = float(Omega_sq(t))
        th = float(theta(t))
        # particular p (p(t_a)=p'(t_a)=0), homogeneous h (h(t_a)=0, h'(t_a)=1), int theta p, int theta h
        return np.array([y[1], -w * y[0] - th / mu, y[3], -w * y[2], th * y[0], th * y[2]])

    t, y = _integrate(rhs, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0], float(t_a), float(t_b), tol)
    p, pd, h, hd, Ip, Ih = y.T
    if abs(h[-1]) < CAUSTIC_TOL * max(1.0, float(np.max(np.abs(h)))):
        raise ArithmeticError(f"shift boundary problem singular: t_b - t_a = {t_b - t_a:.12g} is a conjugate point")
    c = -p[-1] / h[-1]
    eta = p + c * h
    eta_dot = pd + c * hd
    theta_t = np.asarray([float(theta(x)) for x in t])
    eta_ddot = -np.asarray([float(Omega_sq(x)) for x in t]) * eta - theta_t / mu
    eta[-1] = 0.0
    return ModeShift(t, eta, eta_dot, Ip + c * Ih, eta_ddot, theta_t * eta)


# ---------------------------------------------------------------------------
# kernels


def td_mode_kernel_1d(
    erm: ErmakovSolution, shift: Optional[ModeShift], mu: float, hbar: float, y_from, y_to
) -> KernelValue:
    """Kernel of one Cartesian component of a decoupled mode over ``[erm.t_a, erm.t_b]``.

    ``y_from``/``y_to`` are the untranslated mode coordinates.
    """
    delta = erm.delta
    n = int(math.floor(delta / math.pi))
    sd = math.sin(delta)
    if abs(sd) < CAUSTIC_TOL:
        return KernelValue.caustic(f"mode: caustic at delta = {delta:.12g}", n)
    s1, sd1, s2, sd2 = erm.s[0], erm.s_dot[0], erm.s[-1], erm.s_dot[-1]
    x1 = np.asarray(y_from)
    x2 = np.asarray(y_to)
    if shift is not None:
        e1, ed1, _ = shift.at(erm.t_a)
        e2, ed2, ph = shift.at(erm.t_b)
        y1, y2 = x1 + e1, x2 + e2
    else:
        e1 = ed1 = e2 = ed2 = ph = 0.0
        y1, y2 = x1, x2
    log_pref = 0.5 * math.log(mu / (2 * math.pi * hbar * s1 * s2 * abs(sd))) - 0.25j * math.pi - 0.5j * math.pi * n
    k = 1j * mu / (2 * hbar)
    expo = k * (sd2 / s2 * y2 * y2 - sd1 / s1 * y1 * y1)
    expo = expo + k / sd * ((y2 * y2 / s2**2 + y1 * y1 / s1**2) * math.cos(delta) - 2 * y1 * y2 / (s1 * s2))
    # translation back to x: boundary term and accumulated force phase
    expo = expo - k * (ed2 * (2 * x2 + e2) - ed1 * (2 * x1 + e1)) - 0.5j * ph / hbar
    return KernelValue.from_log(log_pref + expo, n)


def td_mode_kernel_family(Omega_sq: Callable, theta: Optional[Callable], mu: float, hbar: float = 1.0):
    """``K(x_to, x_from, t_start, t_end)`` amplitudes for one Cartesian mode component.

    Ermakov and shift solutions are cached per time window.
    """
    cache = {}

    def family(x_to, x_from, t_start, t_end):
        key = (float(t_start), float(t_end))
        if key not in cache:
            erm = solve_ermakov(Omega_sq, *key)
            sh = None if theta is None else solve_shift(Omega_sq, theta, mu, *key)
            cache[key] = (erm, sh)
        erm, sh = cache[key]
        kv = td_mode_kernel_1d(erm, sh, mu, hbar, x_from, x_to)
        kv.require()
        return kv.amplitude

    return family


def _axis(F, a):
    def comp(t):
        return F(t)[..., a]

    comp.is_zero = getattr(F, "is_zero", False)
    return comp


def td_three_body_kernel(tds: TimeDependentSystem, ep: Endpoints) -> KernelValue:
    """Physical-coordinate kernel of the constrained time-dependent system."""
    x1i, x2i, X3i = tds.mode_coordinates(ep.r_initial)
    x1f, x2f, X3f = tds.mode_coordinates(ep.r_final)
    total = 3 * math.log(tds.a * tds.b) + free_kernel(tds.M, X3i, X3f, ep.tau, tds.hbar).log_amplitude
    branch = 0
    for i, (xi, xf) in enumerate(((x1i, x1f), (x2i, x2f))):
        W = tds.Omega_sq[i]
        theta = tds.theta[i]
        if not theta.covers(ep.t_a, ep.t_b):
            raise ValueError("tabulated drive does not cover the evolution interval")
        try:
            # free or inverted at t_a: start the amplitude on the time scale of the window
            s0 = None if float(W(ep.t_a)) > 0 else math.sqrt(ep.tau)
            erm = solve_ermakov(W, ep.t_a, ep.t_b, s0=s0)
        except ArithmeticError as exc:
            return KernelValue.caustic(f"mode {i + 1}: {exc}")
        for a in range(3):
            try:
                sh = solve_shift(W, _axis(theta, a), tds.mu, ep.t_a, ep.t_b)
            except ArithmeticError:
                sh = None
            kv = td_mode_kernel_1d(erm, sh, tds.mu, tds.hbar, xi[..., a], xf[..., a])
            if kv.caustic_flag:
                return KernelValue.caustic(f"mode {i + 1}: " + kv.detail.split(": ", 1)[1], kv.branch_index)
            if sh is None:
                return KernelValue.caustic(f"mode {i + 1}: shift boundary problem singular")
            total = total + kv.log_amplitude
            branch += kv.branch_index
    return KernelValue.from_log(total, branch)


def td_wavefunction(
    idx: LevelIndex, tds: TimeDependentSystem, erms: Sequence[ErmakovSolution],
    shifts: Optional[Sequence] , X1, X2, t: float,
):
    """Discrete-spectrum wavefunction in Jacobi coordinates at time ``t``.

    ``erms`` holds one Ermakov solution per mode; ``shifts`` one 3-tuple of
    :class:`ModeShift` per mode (``None`` for an undriven system).  The result
    is normalised on ``d^3X1 d^3X2``.
    """
    X1 = np.asarray(X1)
    X2 = np.asarray(X2)
    xs = ((X1 - X2) / SQRT2, (X1 + X2) / SQRT2)
    mu, hbar = tds.mu, tds.hbar
    psi = np.ones(np.shape(X1)[:-1], dtype=complex)
    for i, n in enumerate((idx.n1, idx.n2)):
        s, sd, alpha = (float(v) for v in erms[i].at(t))
        for a in range(3):
            x = xs[i][..., a]
            if shifts is None or shifts[i] is None:
                eta = eta_dot = phase = 0.0
            else:
                eta, eta_dot, phase = (float(v) for v in shifts[i][a].at(t))
            y = x + eta
            xi = math.sqrt(mu / hbar) * y / s
            amp = (mu / hbar) ** 0.25 / math.sqrt(s) * hermite_function(n[a], xi)
            arg = (
                mu / (2 * hbar) * (sd / s) * y * y
                - (n[a] + 0.5) * alpha
                - mu / (2 * hbar) * eta_dot * (eta + 2 * x)
                - phase / (2 * hbar)
            )
            psi = psi * amp * np.exp(1j * arg)
    return psi
