"""Bound-state spectrum, Hermite-Gaussian eigenfunctions and the Mehler kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .propagator import euclidean_sho_kernel
from .transform import NormalModeFrame

__all__ = [
    "HERMITE_MAX_ORDER",
    "LevelIndex",
    "Level",
    "hermite_eval",
    "hermite_function",
    "oscillator_eigenfunction",
    "energy_level",
    "enumerate_levels",
    "level_clusters",
    "stationary_eigenfunction",
    "driven_eigenfunction",
    "mehler_closed",
    "mehler_partial",
    "spectral_reconstruction_check",
]

HERMITE_MAX_ORDER = 200


@dataclass(frozen=True)
class LevelIndex:
    n1: tuple = (0, 0, 0)
    n2: tuple = (0, 0, 0)

    def __post_init__(self):
        for name in ("n1", "n2"):
            v = tuple(int(k) for k in getattr(self, name))
            if len(v) != 3 or min(v) < 0:
                raise ValueError(f"{name} must hold three non-negative integers, got {v}")
            object.__setattr__(self, name, v)

    @property
    def N1(self) -> int:
        return sum(self.n1)

    @property
    def N2(self) -> int:
        return sum(self.n2)


@dataclass(frozen=True)
class Level:
    index: LevelIndex
    energy: float
    degeneracy: int = 1


def hermite_eval(n: int, x):
    """Physicists' Hermite polynomial by the three-term recurrence."""
    if n < 0 or n > HERMITE_MAX_ORDER:
        raise ValueError(f"Hermite order {n} outside 0..{HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2 * x
    for k in range(1, n):
        h_prev, h = h, 2 * x * h - 2 * k * h_prev
    return h if h.ndim else float(h)


def hermite_function(n: int, x):
    """``H_n(x) exp(-x^2/2) / sqrt(2^n n! sqrt(pi))``, via the normalised recurrence.

    Stays finite for large ``n`` and complex ``x`` where ``H_n`` alone would
    overflow.
    """
    if n < 0:
        raise ValueError("negative Hermite order")
    x = np.asarray(x)
    g = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return g
    h_prev, h = g, math.sqrt(2.0) * x * g
    for k in range(1, n):
        h_prev, h = h, math.sqrt(2.0 / (k + 1)) * x * h - math.sqrt(k / (k + 1)) * h_prev
    return h


def oscillator_eigenfunction(n: int, m: float, Omega: float, y, hbar: float = 1.0):
    """Normalised 1-D oscillator eigenfunction of mass ``m`` and frequency ``Omega``."""
    k = math.sqrt(m * Omega / hbar)
    return math.sqrt(k) * hermite_function(n, k * np.asarray(y))


def _bound_omegas(frame: NormalModeFrame) -> tuple:
    if not frame.bound:
        raise ValueError(
            f"inverted mode has no discrete spectrum (Omega1^2={frame.Omega1_sq:g}, Omega2^2={frame.Omega2_sq:g})"
        )
    return math.sqrt(frame.Omega1_sq), math.sqrt(frame.Omega2_sq)


def energy_level(idx: LevelIndex, frame: NormalModeFrame, hbar: float = 1.0) -> float:
    w1, w2 = _bound_omegas(frame)
    return hbar * ((idx.N1 + 1.5) * w1 + (idx.N2 + 1.5) * w2)


def _compositions(N: int):
    for i in range(N + 1):
        for j in range(N - i + 1):
            yield (i, j, N - i - j)


def enumerate_levels(
    frame: NormalModeFrame, hbar: float = 1.0, e_max: float = 10.0, tol: Optional[float] = None
) -> list:
    """Every level with energy ``<= e_max``, sorted, with cluster degeneracies filled in."""
    w1, w2 = _bound_omegas(frame)
    if tol is None:
        tol = 1e-9 * hbar * max(w1, w2)
    e0 = 1.5 * hbar * (w1 + w2)
    out = []
    N1 = 0
    while e0 + N1 * hbar * w1 <= e_max:
        N2 = 0
        while e0 + hbar * (N1 * w1 + N2 * w2) <= e_max:
            e = e0 + hbar * (N1 * w1 + N2 * w2)
            for a, b in product(_compositions(N1), _compositions(N2)):
                out.append((e, LevelIndex(a, b)))
            N2 += 1
        N1 += 1
    out.sort(key=lambda p: (p[0], p[1].n1, p[1].n2))
    levels = []
    start = 0
    for i in range(1, len(out) + 1):
        if i == len(out) or out[i][0] - out[i - 1][0] > tol:
            size = i - start
            levels.extend(Level(idx, e, size) for e, idx in out[start:i])
            start = i
    return levels


def level_clusters(levels: Sequence[Level]) -> list:
    """Collapse a level list into ``(energy, degeneracy)`` pairs."""
    out = []
    i = 0
    while i < len(levels):
        d = levels[i].degeneracy
        out.append((levels[i].energy, d))
        i += d
    return out


def _mode_variables(frame: NormalModeFrame, X1, X2):
    """Mass-weighted mode coordinates ``q_j = sqrt(m) Y_j`` (shape ``(..., 3)``)."""
    X1 = np.asarray(X1)
    X2 = np.asarray(X2)
    c, s = math.cos(frame.phi), math.sin(frame.phi)
    r1, r2 = math.sqrt(frame.M1), math.sqrt(frame.M2)
    return r1 * c * X1 - r2 * s * X2, r1 * s * X1 + r2 * c * X2


def _jacobi_norm(frame: NormalModeFrame) -> float:
    # dq1 dq2 = sqrt(M1 M2) dX1 dX2 per Cartesian axis
    return (frame.M1 * frame.M2) ** 0.75


def stationary_eigenfunction(idx: LevelIndex, frame: NormalModeFrame, hbar, X1, X2):
    """Undriven eigenfunction in Jacobi coordinates, normalised on ``d^3X1 d^3X2``."""
    if not (frame.F1.is_zero and frame.F2.is_zero):
        raise ValueError("system is driven; use driven_eigenfunction")
    w1, w2 = _bound_omegas(frame)
    q1, q2 = _mode_variables(frame, X1, X2)
    psi = _jacobi_norm(frame)
    for a in range(3):
        psi = psi * oscillator_eigenfunction(idx.n1[a], 1.0, w1, q1[..., a], hbar)
        psi = psi * oscillator_eigenfunction(idx.n2[a], 1.0, w2, q2[..., a], hbar)
    return psi


def driven_eigenfunction(
    idx: LevelIndex, frame: NormalModeFrame, hbar, X1, X2, t: float,
    t_a: float = 0.0, t_b: float = 1.0, shifts: Optional[tuple] = None,
):
    """Driven counterpart of :func:`stationary_eigenfunction` at time ``t``.

    The mode coordinate ``y`` is translated by the classical shift ``eta``
    (``eta'' + W^2 eta = -F/m``); each Cartesian factor is

        phi_n(y + eta) exp(-i m/(2 hbar) eta' (2 y + eta))
                       exp(-i/(2 hbar) int_{t_a}^t F eta) exp(-i (n+1/2) W (t - t_a)).

    ``shifts`` is a pair (one per mode) of 3-tuples of
    :class:`~triprop.timedep.ModeShift`; by default they are solved on
    ``[t_a, t_b]`` with ``eta(t_a) = eta(t_b) = 0``.
    """
    from .timedep import solve_shift

    w = _bound_omegas(frame)
    m = frame.m
    if shifts is None:
        shifts = tuple(
            tuple(
                solve_shift(lambda t, w2=Omega_sq: np.full(np.shape(t), w2), _axis(F, a), m, t_a, t_b)
                for a in range(3)
            )
            for Omega_sq, F in zip(frame.Omega_sq, frame.forces)
        )
    Y = [np.asarray(q) / math.sqrt(m) for q in _mode_variables(frame, X1, X2)]
    psi = complex(_jacobi_norm(frame)) * np.ones(np.shape(Y[0])[:-1])
    for j, n in enumerate((idx.n1, idx.n2)):
        for a in range(3):
            eta, eta_dot, phase = shifts[j][a].at(t)
            y = Y[j][..., a]
            factor = oscillator_eigenfunction(n[a], m, w[j], y + eta, hbar)
            arg = -m * eta_dot * (2 * y + eta) / (2 * hbar) - phase / (2 * hbar) - (n[a] + 0.5) * w[j] * (t - t_a)
            psi = psi * factor * np.exp(1j * arg) * m**-0.25
    return psi


def _axis(F, a):
    def comp(t):
        return F(t)[..., a]

    comp.is_zero = getattr(F, "is_zero", False)
    return comp


def mehler_closed(a, b, c):
    """``exp(-(a^2+b^2)) sum_n c^n H_n(a) H_n(b) / (2^n n!)`` in closed form."""
    c = complex(c)
    if abs(c) >= 1:
        raise ValueError("Mehler closed form needs |c| < 1")
    a = np.asarray(a)
    b = np.asarray(b)
    d = 1 - c * c
    out = np.exp(-(a * a + b * b) + (2 * a * b * c - (a * a + b * b) * c * c) / d) / np.sqrt(d)
    return out if out.ndim else complex(out)


def mehler_partial(a, b, c, N: int):
    """Partial sum ``n <= N`` of the Mehler series (same normalisation as :func:`mehler_closed`)."""
    if N < 0:
        raise ValueError("truncation order must be non-negative")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = complex(c)
    # H_n(a) H_n(b) exp(-(a^2+b^2)/2) / (2^n n!) = sqrt(pi) h_n(a) h_n(b)
    total = np.zeros(np.broadcast(a, b).shape, dtype=complex)
    ha_prev = hb_prev = None
    ha, hb = hermite_function(0, a), hermite_function(0, b)
    cn = 1.0 + 0j
    for n in range(N + 1):
        total = total + cn * ha * hb
        cn *= c
        if n == 0:
            ha_prev, hb_prev = ha, hb
            ha, hb = math.sqrt(2.0) * a * ha, math.sqrt(2.0) * b * hb
        else:
            f1, f2 = math.sqrt(2.0 / (n + 1)), math.sqrt(n / (n + 1))
            ha_prev, ha = ha, f1 * a * ha - f2 * ha_prev
            hb_prev, hb = hb, f1 * b * hb - f2 * hb_prev
    out = math.sqrt(math.pi) * np.exp(-0.5 * (a * a + b * b)) * total
    return out if out.ndim else complex(out)


def spectral_reconstruction_check(frame, hbar: float, beta: float, N: int, probe=None) -> float:
    """Max deviation between the imaginary-time kernel and its truncated eigen-sum.

    ``frame`` is a :class:`NormalModeFrame` (both modes checked, mode mass
    ``m``) or a ``(mass, Omega_sq)`` pair for a single oscillator.
    """
    if isinstance(frame, NormalModeFrame):
        if not (frame.F1.is_zero and frame.F2.is_zero):
            raise ValueError("spectral reconstruction needs an undriven system")
        modes = [(frame.m, w2) for w2 in frame.Omega_sq]
    else:
        modes = [tuple(frame)]
    worst = 0.0
    for m, Omega_sq in modes:
        if not Omega_sq > 0:
            raise ValueError("inverted mode has no discrete spectrum")
        W = math.sqrt(Omega_sq)
        ell = math.sqrt(hbar / (m * W))
        pts = np.linspace(-2.0, 2.0, 9) * ell if probe is None else np.asarray(probe, dtype=float)
        y1, y2 = np.meshgrid(pts, pts, indexing="ij")
        exact = euclidean_sho_kernel(m, Omega_sq, y1, y2, beta, hbar)
        series = np.zeros_like(exact)
        for n in range(N + 1):
            series += (
                oscillator_eigenfunction(n, m, W, y1, hbar)
                * oscillator_eigenfunction(n, m, W, y2, hbar)
                * math.exp(-beta * hbar * W * (n + 0.5))
            )
        worst = max(worst, float(np.max(np.abs(exact - series))))
    return worst
