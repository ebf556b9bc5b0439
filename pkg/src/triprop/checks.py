"""Verification suites: each compares a closed form with an independent route.

Every suite returns a list of :class:`CheckResult`; ``run_suites`` drives
them for the ``verify`` command and the acceptance tests.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from itertools import product
from typing import Callable

import numpy as np

from .model import Constant, DriveVector, GaugeChoice, PhysicalSystem, Sinusoid, TimeDependentConfig
from .oracle import (
    chapman_kolmogorov_residual,
    discrete_spectrum,
    eig2_symmetric,
    evolve_grid_tdse,
    gaussian_kernel_integral,
    gaussian_state,
    kernel_apply,
    l2_error,
    pinney_reference,
)
from .propagator import Endpoints, driven_kernel_1d, free_kernel, sho_kernel_1d, three_body_kernel
from .spectrum import (
    energy_level,
    enumerate_levels,
    level_clusters,
    mehler_closed,
    mehler_partial,
    spectral_reconstruction_check,
    LevelIndex,
)
from .timedep import build_td_system, solve_ermakov, td_mode_kernel_1d, td_mode_kernel_family, td_three_body_kernel
from .transform import gauge_sweep_check, normal_modes, rotated_couplings, to_jacobi

log = logging.getLogger(__name__)

__all__ = ["CheckResult", "SUITES", "run_suites", "random_system", "GridOptions"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    value: float
    tolerance: float
    detail: str = ""
    at_least: bool = False  # pass when value >= tolerance instead of value < tolerance

    @property
    def passed(self) -> bool:
        if self.at_least:
            return bool(self.value >= self.tolerance)
        return bool(self.value < self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass(frozen=True)
class GridOptions:
    points: int = 2048
    domain: float = 12.0
    steps: int = 4096


def random_system(rng: np.random.Generator, gauge: bool = True) -> PhysicalSystem:
    m = rng.uniform(0.2, 5.0, 3)
    K = rng.uniform(-1.0, 3.0, 3)
    s = rng.uniform(-1.0, 1.0, 3)
    g = GaugeChoice(*rng.uniform(0.2, 5.0, 3)) if gauge else GaugeChoice()
    return PhysicalSystem(*m, *K, *s, gauge=g)


# ---------------------------------------------------------------------------
# 1. decoupling


def suite_decoupling(n: int = 1000, seed: int = 20240601) -> list:
    rng = np.random.default_rng(seed)
    worst_gamma = worst_eig = 0.0
    for _ in range(n):
        sys = random_system(rng)
        jac = to_jacobi(sys)
        frame = normal_modes(jac)
        m = sys.gauge.m
        scale = m * max(abs(jac.omega1_sq), abs(jac.omega2_sq), abs(jac.coupling))
        gamma = rotated_couplings(jac, m, frame.phi).gamma
        worst_gamma = max(worst_gamma, abs(gamma) / scale)
        lo, hi, _ = eig2_symmetric(jac.omega1_sq, jac.coupling, jac.omega2_sq)
        big = max(abs(lo), abs(hi))
        worst_eig = max(worst_eig, abs(frame.Omega1_sq - lo) / big, abs(frame.Omega2_sq - hi) / big)
    return [
        CheckResult("decoupling", "cross term vanishes", worst_gamma, 1e-12, f"{n} random systems"),
        CheckResult("decoupling", "mode frequencies vs 2x2 eigensolver", worst_eig, 1e-12, f"{n} random systems"),
    ]


# ---------------------------------------------------------------------------
# 2. gauge invariance


def _gauge_test_system(gauge=GaugeChoice()) -> PhysicalSystem:
    return PhysicalSystem(
        1.3, 0.7, 2.1, 1.1, 0.6, 0.9, 0.1, -0.2, 0.05,
        g1=DriveVector(Sinusoid(0.4, 1.3), Constant(0.0), Constant(0.2)),
        g2=DriveVector.constant([0.1, -0.3, 0.0]),
        gauge=gauge,
    )


def suite_gauge(seed: int = 7) -> list:
    rng = np.random.default_rng(seed)
    gauges = [GaugeChoice(*rng.uniform(0.3, 3.0, 3)) for _ in range(5)]
    probes = [
        Endpoints(rng.normal(0, 0.6, (4, 3, 3)), rng.normal(0, 0.6, (4, 3, 3)), 0.1, 0.1 + dt)
        for dt in (0.35, 0.8, 1.9)
    ]
    dev = gauge_sweep_check(_gauge_test_system(), gauges, probes)
    return [CheckResult("gauge", "kernel across 5 gauges, 3 probe sets", dev, 1e-10)]


# ---------------------------------------------------------------------------
# 3. kernels against the grid PDE


def _packet(opts: GridOptions):
    return gaussian_state(-opts.domain, opts.domain, opts.points, center=0.5, width=0.7)


def suite_pde(opts: GridOptions = GridOptions()) -> list:
    start = time.perf_counter()
    psi0 = _packet(opts)
    out = []

    cn = evolve_grid_tdse(psi0, lambda x, t: 0.5 * x**2, 0.0, 1.0, opts.steps)
    an = kernel_apply(lambda x, y: sho_kernel_1d(1.0, 1.0, y, x, 1.0).amplitude, psi0)
    out.append(CheckResult("pde", "undriven oscillator, tau=1", l2_error(cn, an), 1e-4))

    F = Constant(0.5)
    cn = evolve_grid_tdse(psi0, lambda x, t: 0.5 * x**2 - 0.5 * x, 0.0, 1.0, opts.steps)
    an = kernel_apply(lambda x, y: driven_kernel_1d(1.0, 1.0, F, y, x, 0.0, 1.0).amplitude, psi0)
    out.append(CheckResult("pde", "driven oscillator, constant force", l2_error(cn, an), 1e-3))

    W = lambda t: 1.0 + 0.1 * np.sin(t)  # noqa: E731
    cn = evolve_grid_tdse(psi0, lambda x, t: 0.5 * W(t) * x**2, 0.0, 1.0, opts.steps)
    erm = solve_ermakov(W, 0.0, 1.0)
    an = kernel_apply(lambda x, y: td_mode_kernel_1d(erm, None, 1.0, 1.0, y, x).amplitude, psi0)
    out.append(CheckResult("pde", "time-dependent frequency 1+0.1 sin t", l2_error(cn, an), 1e-3))

    elapsed = time.perf_counter() - start
    out.append(CheckResult("pde", "runtime seconds", elapsed, 60.0))
    return out


# ---------------------------------------------------------------------------
# 4. Chapman-Kolmogorov


def suite_chapman(seed: int = 3) -> list:
    probe = np.linspace(-1.5, 1.5, 7)
    F = Constant(0.5)
    fam_sho = lambda x, y, t0, t1: sho_kernel_1d(1.0, 1.0, y, x, t1 - t0).amplitude  # noqa: E731
    fam_inv = lambda x, y, t0, t1: sho_kernel_1d(1.0, -0.5, y, x, t1 - t0).amplitude  # noqa: E731
    fam_drv = lambda x, y, t0, t1: driven_kernel_1d(1.0, 1.0, F, y, x, t0, t1).amplitude  # noqa: E731
    fam_free = lambda x, y, t0, t1: free_kernel(1.0, y, x, t1 - t0, d=1).amplitude  # noqa: E731
    W = lambda t: 1.0 + 0.1 * np.sin(t)  # noqa: E731
    fam_td = td_mode_kernel_family(W, lambda t: 0.3 * np.cos(t), 1.0)
    return [
        CheckResult("chapman", "free particle", chapman_kolmogorov_residual(fam_free, 0.0, 0.3, 0.7, probe), 1e-9),
        CheckResult("chapman", "oscillator 0.3+0.4", chapman_kolmogorov_residual(fam_sho, 0.0, 0.3, 0.7, probe), 1e-6),
        CheckResult("chapman", "oscillator across caustic", chapman_kolmogorov_residual(fam_sho, 0.0, 2.0, 4.0, probe), 1e-6),
        CheckResult("chapman", "inverted oscillator", chapman_kolmogorov_residual(fam_inv, 0.0, 0.5, 1.2, probe), 1e-6),
        CheckResult("chapman", "driven, constant force", chapman_kolmogorov_residual(fam_drv, 0.0, 0.3, 0.7, probe), 1e-6),
        CheckResult("chapman", "time-dependent, driven", chapman_kolmogorov_residual(fam_td, 0.0, 0.4, 1.1, probe), 1e-5),
    ]


# ---------------------------------------------------------------------------
# 5/6. spectrum


def spectrum_test_system() -> PhysicalSystem:
    return PhysicalSystem(1.0, 2.0, 3.0, 1.0, 0.8, 1.2, 0.1, 0.05, -0.1)


def ratio_two_system() -> PhysicalSystem:
    """Equal masses with Omega2/Omega1 = 2 exactly (Omega1^2 = 3/4, Omega2^2 = 3)."""
    return PhysicalSystem(1.0, 1.0, 1.0, -0.125, 1.0, 1.0)


def brute_force_count(Omega1: float, Omega2: float, hbar: float, e_max: float) -> int:
    e0 = 1.5 * hbar * (Omega1 + Omega2)
    k1 = int(max(0.0, (e_max - e0) // (hbar * Omega1))) + 1
    k2 = int(max(0.0, (e_max - e0) // (hbar * Omega2))) + 1
    count = 0
    for n1 in product(range(k1), repeat=3):
        e1 = e0 + hbar * Omega1 * sum(n1)
        if e1 > e_max:
            continue
        for n2 in product(range(k2), repeat=3):
            if e1 + hbar * Omega2 * sum(n2) <= e_max:
                count += 1
    return count


def suite_spectrum(opts: GridOptions = GridOptions()) -> list:
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    hbar = 1.0
    grids = []
    for W2 in frame.Omega_sq:
        m = frame.m
        ell = math.sqrt(hbar / (m * math.sqrt(W2)))
        x = np.linspace(-opts.domain * ell, opts.domain * ell, opts.points)
        grids.append(discrete_spectrum(lambda y, W2=W2: 0.5 * m * W2 * y * y, x, 5, m, hbar))
    worst = 0.0
    for j in range(2):
        for n in range(5):
            n1, n2 = [0, 0, 0], [0, 0, 0]
            (n1 if j == 0 else n2)[0] = n
            idx = LevelIndex(n1, n2)
            grid_total = sum(grids[0][k] for k in idx.n1) + sum(grids[1][k] for k in idx.n2)
            e = energy_level(idx, frame, hbar)
            worst = max(worst, abs(grid_total - e) / e)
    w1, w2 = (math.sqrt(v) for v in frame.Omega_sq)
    e_max = 1.5 * (w1 + w2) + 6.0 * w1
    levels = enumerate_levels(frame, hbar, e_max)
    brute = brute_force_count(w1, w2, hbar, e_max)
    return [
        CheckResult("spectrum", "energies vs grid Hamiltonian (5 per mode)", worst, 1e-6),
        CheckResult("spectrum", "level count mismatch vs lattice enumeration", float(abs(len(levels) - brute)), 1.0,
                    f"{len(levels)} enumerated, {brute} brute force"),
    ]


def hidden_symmetry_excess(frame, hbar: float = 1.0, window: float = 10.0) -> tuple:
    """Largest ``degeneracy - baseline`` over clusters below ``window * hbar * Omega1``."""
    w1, w2 = (math.sqrt(v) for v in frame.Omega_sq)
    levels = enumerate_levels(frame, hbar, window * hbar * w1)
    best = (-1, None)
    i = 0
    for energy, deg in level_clusters(levels):
        members = {(lv.index.N1, lv.index.N2) for lv in levels[i : i + deg]}
        baseline = max(math.comb(N1 + 2, 2) * math.comb(N2 + 2, 2) for N1, N2 in members)
        if deg - baseline > best[0]:
            best = (deg - baseline, (energy, deg, baseline, sorted(members)))
        i += deg
    return best


def suite_degeneracy() -> list:
    frame = normal_modes(to_jacobi(ratio_two_system()))
    excess, info = hidden_symmetry_excess(frame)
    energy, deg, baseline, members = info
    return [
        CheckResult("degeneracy", "ratio-2 cluster excess over combinatorial baseline", float(excess), 1.0,
                    f"cluster at E={energy:.6g}: degeneracy {deg}, baseline {baseline}, (N1,N2) {members}",
                    at_least=True),
    ]


# ---------------------------------------------------------------------------
# 7. Mehler and spectral reconstruction


def suite_mehler() -> list:
    a, b = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-2, 2, 41))
    dev = float(np.max(np.abs(mehler_closed(a, b, 0.5) - mehler_partial(a, b, 0.5, 60))))
    rec = spectral_reconstruction_check((1.0, 1.0), 1.0, 1.0, 40)
    return [
        CheckResult("mehler", "closed form vs 60-term sum, c=0.5", dev, 1e-8),
        CheckResult("mehler", "spectral reconstruction beta=1, N=40", rec, 1e-10),
    ]


# ---------------------------------------------------------------------------
# 8. Ermakov


def constant_td_config(b: float = 1.0, drive: bool = True) -> TimeDependentConfig:
    g1 = DriveVector.constant([0.3, 0.0, 0.1]) if drive else DriveVector()
    g2 = DriveVector.constant([0.0, 0.2, 0.0]) if drive else DriveVector()
    return TimeDependentConfig(
        1.0, 1.0, 1.0, Constant(1.0), Constant(1.0), Constant(1.0),
        Constant(0.2), Constant(0.2), Constant(0.0), g1=g1, g2=g2, b=b,
    )


def suite_ermakov() -> list:
    out = []
    worst = 0.0
    for W2 in (1.0, 4.0):
        erm = solve_ermakov(lambda t, W2=W2: W2, 0.0, 3.0)
        worst = max(worst, float(np.max(np.abs(erm.s - W2**-0.25))),
                    float(np.max(np.abs(erm.alpha - math.sqrt(W2) * erm.t))))
    out.append(CheckResult("ermakov", "constant-frequency fixed point", worst, 1e-10))

    W = lambda t: 1.0 + 0.1 * np.sin(t)  # noqa: E731
    erm = solve_ermakov(W, 0.0, 5.0)
    s_ref, a_ref = pinney_reference(W, 0.0, erm.t)
    dev = max(float(np.max(np.abs(erm.s - s_ref))), float(np.max(np.abs(erm.alpha - a_ref))))
    out.append(CheckResult("ermakov", "Pinney formula cross-check", dev, 1e-8))
    res = erm.residuals()
    out.append(CheckResult("ermakov", "ODE residual", res["ode"], 1e-8))
    out.append(CheckResult("ermakov", "alpha' s^2 = 1", res["alpha_dot_s2"], 1e-10))

    rng = np.random.default_rng(11)
    cfg = constant_td_config()
    tds = build_td_system(cfg, (0.0, 3.0))
    sys = PhysicalSystem(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.0, g1=cfg.g1, g2=cfg.g2)
    worst = 0.0
    for dt in (0.4, 1.3, 2.6):
        ep = Endpoints(rng.normal(0, 0.6, (3, 3, 3)), rng.normal(0, 0.6, (3, 3, 3)), 0.2, 0.2 + dt)
        k_td = td_three_body_kernel(tds, ep).require().amplitude
        k_c = three_body_kernel(sys, ep).require().amplitude
        worst = max(worst, float(np.max(np.abs(k_td - k_c) / np.abs(k_c))))
    out.append(CheckResult("ermakov", "time-dependent kernel reduces to constant kernel", worst, 1e-8))
    return out


# ---------------------------------------------------------------------------
# 9. delta limit


def delta_limit_error(log_kernel: Callable, tau_label: str, center, width: float, outputs) -> float:
    """Relative L2 error of ``int K(r, r') g(r') dr'`` against ``g(r)`` over sample points."""
    c = np.asarray(center, dtype=float).ravel()
    P = np.eye(c.size) / width**2
    num = den = 0.0
    worst_third = 0.0
    for r in outputs:
        val, third = gaussian_kernel_integral(lambda y: log_kernel(r, y), c.size, c, P)
        g = math.exp(-0.5 * float(np.sum((np.ravel(r) - c) ** 2)) / width**2)
        num += abs(val - g) ** 2
        den += g * g
        worst_third = max(worst_third, third)
    log.debug("delta limit %s: non-quadratic residue %.3g", tau_label, worst_third)
    return math.sqrt(num / den)


def suite_delta(tau: float = 1e-4, seed: int = 5) -> list:
    rng = np.random.default_rng(seed)
    center = rng.normal(0, 0.3, (3, 3))
    # the residual is the physical O(tau/width^2) spreading, linear in tau
    width = 1.0
    outputs = [center + rng.normal(0, width, (3, 3)) for _ in range(12)]
    t_a = 0.3

    sys = _gauge_test_system(GaugeChoice(0.7, 1.6, 2.3))

    def log_k(r_to, r_from):
        ep = Endpoints(np.reshape(r_from, (-1, 3, 3)), r_to, t_a, t_a + tau)
        return three_body_kernel(sys, ep).require().log_amplitude

    tds = build_td_system(
        TimeDependentConfig(
            1.0, 1.0, 1.0, Sinusoid(0.2, 1.0, 1.6, 1.0), Sinusoid(0.2, 1.0, 1.6, 1.0), Sinusoid(0.2, 1.0, 1.6, 1.0),
            Constant(0.2), Constant(0.2), Constant(0.0),
            g1=DriveVector.constant([0.3, 0.0, 0.1]), b=1.4,
        ),
        (0.0, 1.0),
    )

    def log_k_td(r_to, r_from):
        ep = Endpoints(np.reshape(r_from, (-1, 3, 3)), r_to, t_a, t_a + tau)
        return td_three_body_kernel(tds, ep).require().log_amplitude

    return [
        CheckResult("delta", "constant couplings, physical coordinates",
                    delta_limit_error(log_k, "constant", center, width, outputs), 1e-3),
        CheckResult("delta", "time-dependent couplings, physical coordinates",
                    delta_limit_error(log_k_td, "td", center, width, outputs), 1e-3),
    ]


SUITES = {
    "decoupling": suite_decoupling,
    "gauge": suite_gauge,
    "pde": suite_pde,
    "chapman": suite_chapman,
    "spectrum": suite_spectrum,
    "degeneracy": suite_degeneracy,
    "mehler": suite_mehler,
    "ermakov": suite_ermakov,
    "delta": suite_delta,
}


def run_suites(names, opts: GridOptions = GridOptions()) -> list:
    results = []
    for name in names:
        fn = SUITES[name]
        log.info("running suite %s", name)
        if name in ("pde", "spectrum"):
            results.extend(fn(opts))
        else:
            results.extend(fn())
    return results
