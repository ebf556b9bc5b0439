"""Brute-force references used to check the closed forms.

None of these routines know about the analytic kernels: they discretise the
Schroedinger equation, integrate kernels numerically, or diagonalise grid
Hamiltonians.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal, solve_banded

__all__ = [
    "GridState",
    "Grid1DPotential",
    "BoundaryLeakError",
    "eig2_symmetric",
    "gaussian_state",
    "evolve_grid_tdse",
    "kernel_apply",
    "chapman_kolmogorov_residual",
    "discrete_spectrum",
    "gaussian_kernel_integral",
    "pinney_reference",
    "quadratic_form",
    "dense_quadratic_kernel",
    "l2_error",
]


class BoundaryLeakError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridState:
    x_min: float
    dx: float
    values: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError("grid spacing must be positive")
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1 or vals.size < 16:
            raise ValueError("a grid state needs at least 16 samples")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid state has non-finite samples")
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.values.size)

    @property
    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.dx)

    def with_values(self, values) -> "GridState":
        return GridState(self.x_min, self.dx, values, self.mass, self.hbar)


@dataclass(frozen=True)
class Grid1DPotential:
    V: Callable  # V(x, t)

    def __call__(self, x, t):
        return self.V(x, t)


def l2_error(a: GridState, b) -> float:
    """Discrete L2 distance between two states on the same grid."""
    bv = b.values if isinstance(b, GridState) else np.asarray(b)
    return math.sqrt(float(np.sum(np.abs(a.values - bv) ** 2)) * a.dx)


def gaussian_state(x_min, x_max, n, center=0.0, width=1.0, momentum=0.0, mass=1.0, hbar=1.0) -> GridState:
    """Normalised Gaussian packet ``exp(-(x-c)^2/(4 width^2) + i k x)``."""
    x = np.linspace(x_min, x_max, n)
    psi = (2 * math.pi * width**2) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x)
    return GridState(x_min, x[1] - x[0], psi, mass, hbar)


def eig2_symmetric(a11: float, a12: float, a22: float) -> tuple:
    """Closed-form eigen-decomposition of ``[[a11, a12], [a12, a22]]``.

    Returns ``(lo, hi, angle)`` with ``(cos angle, sin angle)`` the eigenvector
    of ``lo``.
    """
    mean = 0.5 * (a11 + a22)
    r = math.hypot(0.5 * (a11 - a22), a12)
    det = a11 * a22 - a12 * a12
    if mean >= 0:
        hi = mean + r
        lo = det / hi if hi != 0 else mean - r
    else:
        lo = mean - r
        hi = det / lo
    angle = 0.5 * math.atan2(-2 * a12, a22 - a11)
    return lo, hi, angle


def _kinetic_bands(n, dx, mass, hbar):
    t = hbar**2 / (2 * mass * dx**2)
    return 2 * t * np.ones(n), -t * np.ones(n - 1)


def evolve_grid_tdse(
    state: GridState, V, t_a: float, t_b: float, steps: int, leak_tol: float = 1e-8
) -> GridState:
    """Crank-Nicolson evolution with Dirichlet walls; ``V(x, t)`` sampled at mid-step times."""
    n = state.values.size
    x = state.x
    dt = (t_b - t_a) / steps
    d0, off = _kinetic_bands(n, state.dx, state.mass, state.hbar)
    k = 0.5j * dt / state.hbar
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = k * off
    ab[2, :-1] = k * off
    psi = state.values.copy()
    static = None
    try:
        V(x, t_a)
        probe = V(x, t_a + 0.37 * (t_b - t_a))
        if np.array_equal(np.asarray(V(x, t_a)), np.asarray(probe)):
            static = np.asarray(probe, dtype=float)
    except Exception:  # noqa: BLE001 - potential may be undefined off-interval
        static = None
    for j in range(steps):
        v = static if static is not None else np.asarray(V(x, t_a + (j + 0.5) * dt), dtype=float)
        diag = d0 + v
        rhs = psi - k * (diag * psi)
        rhs[1:] -= k * off * psi[:-1]
        rhs[:-1] -= k * off * psi[1:]
        ab[1] = 1 + k * diag
        psi = solve_banded((1, 1), ab, rhs, check_finite=False)
    out = state.with_values(psi)
    edge = max(1, n // 50)
    leak = (np.sum(np.abs(psi[:edge]) ** 2) + np.sum(np.abs(psi[-edge:]) ** 2)) * state.dx
    if leak > leak_tol * out.norm**2:
        raise BoundaryLeakError(f"boundary leakage {leak:.3e} of norm exceeds {leak_tol:g}")
    return out


def _trapezoid_weights(n, dx):
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def kernel_apply(kernel: Callable, state: GridState, out: Optional[tuple] = None, max_block: int = 4_000_000):
    """Apply ``kernel(x_out, y_in)`` to ``state`` by trapezoid quadrature.

    ``out = (x_min, dx, n)`` selects a different (uniform) output grid; the
    default reuses the input grid.
    """
    y = state.x
    w = _trapezoid_weights(y.size, state.dx) * state.values
    if out is None:
        x_min, dx, n = state.x_min, state.dx, state.values.size
    else:
        x_min, dx, n = out
    x = x_min + dx * np.arange(n)
    rows = max(1, max_block // y.size)
    res = np.empty(n, dtype=complex)
    for i in range(0, n, rows):
        K = np.asarray(kernel(x[i : i + rows, None], y[None, :]))
        if not np.all(np.isfinite(K)):
            raise ValueError("kernel is not finite on the grid (caustic?)")
        res[i : i + rows] = K @ w
    return GridState(x_min, dx, res, state.mass, state.hbar)


def _rotated_integral(integrand: Callable, tol: float = 1e-13, L0: float = 4.0, n0: int = 1024):
    """Integral over the real line of an entire Fresnel-type integrand.

    The contour is rotated by +-pi/4 about the origin so the integrand decays
    like a Gaussian; the direction is the one with the smaller tail.  The
    window grows until the tails fall below ``tol`` relative to the peak and
    the trapezoid sum is refined until halving the step changes it by < tol.
    """
    def tail_ratio(f):
        mag = np.abs(f)
        peak = np.max(mag, axis=-1)
        if not np.all(np.isfinite(peak)):
            return math.inf
        tail = np.maximum(mag[..., 0], mag[..., -1])
        return float(np.max(np.where(peak > 0, tail / np.where(peak > 0, peak, 1.0), 0.0)))

    best = None
    for sign in (1, -1):
        rot = cmath.exp(0.25j * math.pi * sign)
        L = L0
        for _ in range(12):
            with np.errstate(over="ignore", invalid="ignore"):
                ratio = tail_ratio(integrand(rot * np.linspace(-L, L, n0 + 1)))
            if ratio <= 1e-15 or not math.isfinite(ratio):
                break
            L *= 2
        if not math.isfinite(ratio):
            continue
        if best is None or ratio < best[0]:
            best = (ratio, rot, L)
    _, rot, L = best
    n = n0
    prev = None
    for _ in range(16):
        u = np.linspace(-L, L, n + 1)
        f = integrand(rot * u)
        val = rot * np.sum(f * _trapezoid_weights(n + 1, u[1] - u[0]), axis=-1)
        if prev is not None and np.max(np.abs(val - prev)) <= tol * max(1.0, np.max(np.abs(val))):
            return val
        prev = val
        n *= 2
    return val


def chapman_kolmogorov_residual(kernel_family: Callable, t0: float, t1: float, t2: float, probe) -> float:
    """Max over probe pairs of ``|int K(c,b;t1->t2) K(b,a;t0->t1) db - K(c,a;t0->t2)|``.

    ``kernel_family(x_to, x_from, t_start, t_end)`` returns amplitudes and must
    accept complex positions (the integration contour is rotated off the real
    axis so the oscillatory integral converges absolutely).
    """
    probe = np.asarray(probe, dtype=float)
    a = probe[:, None, None]
    c = probe[None, :, None]

    def integrand(b):
        b = b[None, None, :]
        return kernel_family(c, b, t1, t2) * kernel_family(b, a, t0, t1)

    composed = _rotated_integral(integrand)
    direct = kernel_family(probe[None, :], probe[:, None], t0, t2)
    return float(np.max(np.abs(composed - direct)))


def _spectrum_once(V, x, k, mass, hbar):
    dx = x[1] - x[0]
    d0, off = _kinetic_bands(x.size, dx, mass, hbar)
    v = np.asarray(V(x), dtype=float)
    return eigh_tridiagonal(d0 + v, off, eigvals_only=True, select="i", select_range=(0, k - 1))


def discrete_spectrum(
    V: Callable, x, k: int, mass: float = 1.0, hbar: float = 1.0, extrapolate: bool = True
) -> np.ndarray:
    """Lowest ``k`` eigenvalues of the central-difference Hamiltonian on grid ``x``.

    Uses LAPACK bisection plus inverse iteration on the tridiagonal matrix.
    With ``extrapolate`` the grid is also halved and the two second-order
    results are Richardson-combined.
    """
    x = np.asarray(x, dtype=float)
    if k > x.size:
        raise ValueError(f"asked for {k} eigenvalues on a {x.size}-point grid")
    coarse = _spectrum_once(V, x, k, mass, hbar)
    if not extrapolate:
        return coarse
    fine_x = np.linspace(x[0], x[-1], 2 * x.size - 1)
    fine = _spectrum_once(V, fine_x, k, mass, hbar)
    return (4 * fine - coarse) / 3


def gaussian_kernel_integral(log_kernel: Callable, dim: int, center, precision) -> complex:
    """``int K(y) exp(-1/2 (y-c)^T P (y-c)) d^dim y`` for a Gaussian-type kernel.

    ``log_kernel(y)`` (``y`` of shape ``(..., dim)``) must be a quadratic
    polynomial in ``y``; its coefficients are read off by central differences
    with unit step (exact for quadratics), then the integral is done in closed
    form.  Also returns the largest third-difference, which vanishes for a
    genuine quadratic.
    """
    P = np.asarray(precision, dtype=float)
    c = np.asarray(center, dtype=float)
    E = np.eye(dim)
    pts = [np.zeros(dim)]
    for i in range(dim):
        pts += [E[i], -E[i]]
    for i in range(dim):
        for j in range(i + 1, dim):
            pts += [E[i] + E[j], E[i] - E[j], -E[i] + E[j], -E[i] - E[j]]
    for i in range(dim):
        pts += [2 * E[i], -2 * E[i]]
    f = np.asarray(log_kernel(np.array(pts)), dtype=complex)
    f0 = f[0]
    grad = np.empty(dim, dtype=complex)
    hess = np.empty((dim, dim), dtype=complex)
    idx = 1
    for i in range(dim):
        fp, fm = f[idx], f[idx + 1]
        grad[i] = 0.5 * (fp - fm)
        hess[i, i] = fp - 2 * f0 + fm
        idx += 2
    for i in range(dim):
        for j in range(i + 1, dim):
            fpp, fpm, fmp, fmm = f[idx : idx + 4]
            hess[i, j] = hess[j, i] = 0.25 * (fpp - fpm - fmp + fmm)
            idx += 4
    third = 0.0
    for i in range(dim):
        f2p, f2m = f[idx], f[idx + 1]
        fp, fm = f[1 + 2 * i], f[2 + 2 * i]
        # third central difference of a quadratic is zero
        third = max(third, abs(0.5 * (f2p - 2 * fp + 2 * fm - f2m)))
        idx += 2
    Q = P - hess
    v = grad + P @ c
    const = f0 - 0.5 * c @ P @ c
    sol = np.linalg.solve(Q, v)
    eig = np.linalg.eigvals(Q)
    log_det_half = 0.5 * np.sum(np.log(eig))  # principal logs: Re(eig) > 0
    log_val = 0.5 * dim * math.log(2 * math.pi) - log_det_half + const + 0.5 * v @ sol
    return complex(np.exp(log_val)), float(third)


def pinney_reference(Omega_sq: Callable, t_a: float, t_eval) -> tuple:
    """Ermakov pair from two independent solutions of ``u'' + W^2 u = 0``.

    With ``u1(t_a) = 1, u1' = 0`` and ``u2(t_a) = 0, u2' = 1`` (unit
    Wronskian) the amplitude started at ``s0 = W(t_a)^-1/2, s' = 0`` is
    ``s^2 = s0^2 u1^2 + u2^2 / s0^2`` and its phase is the unwrapped argument
    of ``s0 u1 + i u2 / s0``.  Integrated with an adaptive 8th-order
    Runge-Kutta scheme.  Returns ``(s, alpha)`` on ``t_eval``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    s0 = float(Omega_sq(t_a)) ** -0.25

    def rhs(t, y):
        w = float(Omega_sq(t))
        return [y[1], -w * y[0], y[3], -w * y[2]]

    sol = solve_ivp(rhs, (t_a, float(t_eval[-1])), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=1e-13, atol=1e-14, t_eval=t_eval)
    if not sol.success:
        raise ArithmeticError(sol.message)
    u1, u2 = sol.y[0], sol.y[2]
    s = np.sqrt(s0**2 * u1**2 + u2**2 / s0**2)
    alpha = np.unwrap(np.angle(s0 * u1 + 1j * u2 / s0))
    return s, alpha - alpha[0]


def quadratic_form(f: Callable, dim: int) -> tuple:
    """``(H, b, c)`` with ``f(x) = 1/2 x^T H x - b.x + c`` for a quadratic ``f`` on R^dim.

    Read off by unit-step central differences, which are exact for quadratics.
    """
    E = np.eye(dim)
    c = float(f(np.zeros(dim)))
    H = np.empty((dim, dim))
    b = np.empty(dim)
    for i in range(dim):
        fp, fm = float(f(E[i])), float(f(-E[i]))
        b[i] = -0.5 * (fp - fm)
        H[i, i] = fp - 2 * c + fm
        for j in range(i):
            H[i, j] = H[j, i] = 0.25 * (
                float(f(E[i] + E[j])) - float(f(E[i] - E[j])) - float(f(-E[i] + E[j])) + float(f(-E[i] - E[j]))
            )
    return H, b, c


def dense_quadratic_kernel(masses, H, b, x_from, x_to, tau: float, hbar: float = 1.0) -> complex:
    """Kernel of ``L = 1/2 x'^T diag(masses) x' - 1/2 x^T H x + b.x`` by dense diagonalisation.

    Works directly in the given coordinates: mass-weight, diagonalise the
    frequency matrix, multiply one-dimensional kernels (with the Maslov index
    counted per mode), and undo the mass weighting in the measure.  A constant
    force is removed by shifting to the equilibrium point; ``b`` must lie in
    the range of ``H``.
    """
    masses = np.asarray(masses, dtype=float)
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float)
    x0, *_ = np.linalg.lstsq(H, b, rcond=None)
    if np.linalg.norm(H @ x0 - b) > 1e-9 * max(1.0, np.linalg.norm(b)):
        raise ValueError("force has a component along a zero mode")
    v0 = -0.5 * b @ x0
    r = 1.0 / np.sqrt(masses)
    w2, U = np.linalg.eigh(r[:, None] * H * r[None, :])
    xi_a = U.T @ (np.sqrt(masses) * (np.asarray(x_from, dtype=float) - x0))
    xi_b = U.T @ (np.sqrt(masses) * (np.asarray(x_to, dtype=float) - x0))
    scale = max(1.0, float(np.max(np.abs(w2))))
    log_k = 0.5 * float(np.sum(np.log(masses))) - 1j * v0 * tau / hbar
    for lam, ya, yb in zip(w2, xi_a, xi_b):
        if abs(lam) < 1e-13 * scale:
            s, c, n = tau, 1.0, 0
        elif lam > 0:
            w = math.sqrt(lam)
            s, c, n = math.sin(w * tau) / w, math.cos(w * tau), math.floor(w * tau / math.pi)
        else:
            w = math.sqrt(-lam)
            s, c, n = math.sinh(w * tau) / w, math.cosh(w * tau), 0
        log_k += 0.5 * math.log(1.0 / (2 * math.pi * hbar * abs(s))) - 0.25j * math.pi - 0.5j * math.pi * n
        log_k += 1j * ((ya * ya + yb * yb) * c - 2 * ya * yb) / (2 * hbar * s)
    return complex(cmath.exp(log_k))
