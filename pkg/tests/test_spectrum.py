import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from triprop.checks import brute_force_count, spectrum_test_system
from triprop.model import DriveVector, GaugeChoice, PhysicalSystem, Sinusoid
from triprop.oracle import discrete_spectrum
from triprop.spectrum import (
    LevelIndex,
    driven_eigenfunction,
    energy_level,
    enumerate_levels,
    hermite_eval,
    hermite_function,
    level_clusters,
    mehler_closed,
    mehler_partial,
    spectral_reconstruction_check,
    stationary_eigenfunction,
)
from triprop.timedep import ModeShift
from triprop.transform import JacobiFrame, normal_modes, to_jacobi


def uncoupled(w1_sq, w2_sq, M1=1.0, M2=1.0):
    zero = DriveVector()
    jac = JacobiFrame(M1, M2, M1 + M2, w1_sq, w2_sq, 0.0, zero, zero, 1.0, 1.0, np.zeros((2, 3)), GaugeChoice())
    return normal_modes(jac)


# ---------------------------------------------------------------------------
# Hermite polynomials


def test_hermite_low_orders():
    assert hermite_eval(0, 0.7) == 1.0
    assert hermite_eval(1, 0.7) == pytest.approx(1.4)
    assert hermite_eval(3, 1.0) == -4.0


def test_hermite_orthogonality():
    for m in range(9):
        for n in range(m):
            val, _ = integrate.quad(lambda x: hermite_eval(m, x) * hermite_eval(n, x) * math.exp(-x * x), -np.inf, np.inf)
            assert abs(val) < 1e-9


@given(st.integers(1, 50), st.floats(-5, 5))
def test_hermite_recurrence(n, x):
    hp, h, hm = hermite_eval(n + 1, x), hermite_eval(n, x), hermite_eval(n - 1, x)
    scale = max(abs(hp), abs(2 * x * h), abs(2 * n * hm), 1e-300)
    assert abs(hp - 2 * x * h + 2 * n * hm) <= 1e-12 * scale


def test_hermite_order_guard():
    hermite_eval(200, 0.5)
    with pytest.raises(ValueError):
        hermite_eval(201, 0.5)


def test_hermite_function_matches_polynomial():
    x = np.linspace(-4, 4, 17)
    for n in (0, 1, 5, 12):
        ref = hermite_eval(n, x) * np.exp(-x * x / 2) / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
        np.testing.assert_allclose(hermite_function(n, x), ref, rtol=1e-12, atol=1e-15)
    assert np.all(np.isfinite(hermite_function(400, np.linspace(-30, 30, 7))))


# ---------------------------------------------------------------------------
# energies and degeneracies


def test_energy_examples():
    frame = uncoupled(1.0, 4.0)
    assert energy_level(LevelIndex(), frame) == pytest.approx(4.5)
    assert energy_level(LevelIndex((1, 0, 0), (0, 0, 0)), frame) == 5.5
    assert energy_level(LevelIndex((1, 0, 0)), frame, hbar=2.0) == 11.0


def test_energy_requires_bound_modes():
    frame = normal_modes(to_jacobi(PhysicalSystem(1, 1, 1, -1.0, 0.2, 0.2)))
    with pytest.raises(ValueError, match="inverted"):
        energy_level(LevelIndex(), frame)


def test_level_index_validation():
    with pytest.raises(ValueError):
        LevelIndex((0, -1, 0))
    with pytest.raises(ValueError):
        LevelIndex((0, 0))


def test_energies_against_grid_hamiltonian():
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    m = frame.m
    grid = []
    for w2 in frame.Omega_sq:
        L = 14 / (m * math.sqrt(w2)) ** 0.5
        x = np.linspace(-L, L, 4001)
        grid.append(discrete_spectrum(lambda y, w2=w2: 0.5 * m * w2 * y * y, x, 5, mass=m))
    for n in range(5):
        for idx in (LevelIndex((n, 0, 0)), LevelIndex((0, 0, 0), (0, n, 0)), LevelIndex((n, 1, 0), (2, 0, n))):
            ref = sum(grid[0][k] for k in idx.n1) + sum(grid[1][k] for k in idx.n2)
            assert energy_level(idx, frame) == pytest.approx(ref, rel=1e-6)


def test_equal_frequencies_first_excited_sixfold():
    clusters = level_clusters(enumerate_levels(uncoupled(1.0, 1.0), 1.0, 10.0))
    assert clusters[0] == (pytest.approx(3.0), 1)
    assert clusters[1] == (pytest.approx(4.0), 6)


def test_irrational_ratio_combinatorial():
    levels = enumerate_levels(uncoupled(1.0, 2.0), 1.0, 14.0)
    i = 0
    for _, deg in level_clusters(levels):
        N1, N2 = levels[i].index.N1, levels[i].index.N2
        assert all((lv.index.N1, lv.index.N2) == (N1, N2) for lv in levels[i : i + deg])
        assert deg == math.comb(N1 + 2, 2) * math.comb(N2 + 2, 2)
        i += deg


def test_ratio_two_accidental_degeneracy():
    levels = enumerate_levels(uncoupled(1.0, 4.0), 1.0, 10.0)
    target = 4.5 + 2.0
    cluster = [lv for lv in levels if abs(lv.energy - target) < 1e-9]
    assert {(lv.index.N1, lv.index.N2) for lv in cluster} == {(2, 0), (0, 1)}
    assert len(cluster) == cluster[0].degeneracy == 6 + 3


def test_empty_below_ground():
    assert enumerate_levels(uncoupled(1.0, 4.0), 1.0, 4.0) == []


@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(4.0, 12.0))
def test_level_count_brute_force(w1_sq, w2_sq, e_max):
    frame = uncoupled(w1_sq, w2_sq)
    levels = enumerate_levels(frame, 1.0, e_max)
    assert len(levels) == brute_force_count(*(math.sqrt(w) for w in frame.Omega_sq), 1.0, e_max)
    energies = [lv.energy for lv in levels]
    assert energies == sorted(energies)


@given(st.integers(1, 4), st.integers(1, 4))
def test_rational_ratio_at_or_above_baseline(p, q):
    frame = uncoupled(1.0, (p / q) ** 2)
    levels = enumerate_levels(frame, 1.0, 10 * math.sqrt(frame.Omega1_sq) + 1.5 * sum(map(math.sqrt, frame.Omega_sq)))
    i = 0
    for _, deg in level_clusters(levels):
        members = {(lv.index.N1, lv.index.N2) for lv in levels[i : i + deg]}
        assert deg >= max(math.comb(a + 2, 2) * math.comb(b + 2, 2) for a, b in members)
        i += deg


# ---------------------------------------------------------------------------
# eigenfunctions
#
# The wavefunctions factor over Cartesian axes, so six-dimensional integrals
# reduce to two-dimensional planes: vary (X1[a], X2[a]) with the other axes
# held at a base point c.  If P_a is the plane integral of |psi|^2 then
# prod_a P_a = norm * |psi(c)|^4.


def _plane(frame, axis, base1, base2, n=241):
    W = [math.sqrt(w) for w in frame.Omega_sq]
    L1 = 9.0 / math.sqrt(frame.M1 * min(W))
    L2 = 9.0 / math.sqrt(frame.M2 * min(W))
    u = np.linspace(-L1, L1, n)
    v = np.linspace(-L2, L2, n)
    U, V = np.meshgrid(u, v, indexing="ij")
    X1 = np.broadcast_to(base1, U.shape + (3,)).copy()
    X2 = np.broadcast_to(base2, U.shape + (3,)).copy()
    X1[..., axis] += U
    X2[..., axis] += V
    return X1, X2, u[1] - u[0], v[1] - v[0]


def _norm(psi_fn, frame, base1, base2):
    total = 1.0
    for a in range(3):
        X1, X2, d1, d2 = _plane(frame, a, base1, base2)
        total *= float(np.sum(np.abs(psi_fn(X1, X2)) ** 2)) * d1 * d2
    c = abs(psi_fn(base1, base2))
    return total / c**4


BASE1 = np.array([0.13, -0.21, 0.08])
BASE2 = np.array([-0.05, 0.17, 0.11])
INDICES = [LevelIndex(), LevelIndex((1, 0, 2), (0, 3, 0)), LevelIndex((2, 1, 0), (1, 0, 1))]


@pytest.mark.parametrize("idx", INDICES)
def test_stationary_norm(idx):
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    norm = _norm(lambda X1, X2: stationary_eigenfunction(idx, frame, 1.0, X1, X2), frame, BASE1, BASE2)
    assert abs(norm - 1.0) < 1e-8


def test_stationary_ground_peak():
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    psi0 = stationary_eigenfunction(LevelIndex(), frame, 1.0, np.zeros(3), np.zeros(3))
    assert psi0 > 0
    assert abs(stationary_eigenfunction(LevelIndex(), frame, 1.0, BASE1, BASE2)) < psi0


def _plane_hamiltonian_residual(psi_fn, jac, energy, hbar=1.0, h=2e-3):
    """Residual of the axis-0 Jacobi Hamiltonian (4th-order differences) on a coarse probe set."""
    rng = np.random.default_rng(5)
    pts = rng.normal(scale=0.6, size=(40, 2))
    f1, f2 = jac.f1(0.0)[0], jac.f2(0.0)[0]

    def at(du, dv):
        X1 = np.tile(BASE1, (len(pts), 1))
        X2 = np.tile(BASE2, (len(pts), 1))
        X1[:, 0] = pts[:, 0] / math.sqrt(jac.M1) + du
        X2[:, 0] = pts[:, 1] / math.sqrt(jac.M2) + dv
        return psi_fn(X1, X2), X1[:, 0], X2[:, 0]

    c = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)
    d11 = sum(ck * at(k * h, 0)[0] for ck, k in zip(c, range(-2, 3)))
    d22 = sum(ck * at(0, k * h)[0] for ck, k in zip(c, range(-2, 3)))
    psi, x1, x2 = at(0, 0)
    V = 0.5 * jac.M1 * jac.omega1_sq * x1**2 + 0.5 * jac.M2 * jac.omega2_sq * x2**2 + jac.lam * x1 * x2 - f1 * x1 - f2 * x2
    H = -(hbar**2) / (2 * jac.M1) * d11 - hbar**2 / (2 * jac.M2) * d22 + V * psi
    return float(np.linalg.norm(H - energy * psi) / np.linalg.norm(psi))


@pytest.mark.parametrize("idx", INDICES)
def test_stationary_hamiltonian_residual(idx):
    jac = to_jacobi(spectrum_test_system())
    frame = normal_modes(jac)
    W1, W2 = (math.sqrt(w) for w in frame.Omega_sq)
    E_axis = (idx.n1[0] + 0.5) * W1 + (idx.n2[0] + 0.5) * W2
    res = _plane_hamiltonian_residual(lambda X1, X2: stationary_eigenfunction(idx, frame, 1.0, X1, X2), jac, E_axis)
    assert res < 1e-6


def test_stationary_rejects_drive():
    sys = PhysicalSystem(1, 1, 1, 1, 1, 1, g1=DriveVector.constant([0.1, 0, 0]))
    with pytest.raises(ValueError, match="driven"):
        stationary_eigenfunction(LevelIndex(), normal_modes(to_jacobi(sys)), 1.0, BASE1, BASE2)


@pytest.mark.parametrize("idx", INDICES[:2])
def test_driven_zero_drive_reduces(idx):
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    X1, X2, _, _ = _plane(frame, 1, BASE1, BASE2, n=9)
    a = driven_eigenfunction(idx, frame, 1.0, X1, X2, 0.0)
    b = stationary_eigenfunction(idx, frame, 1.0, X1, X2)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def _constant_drive_system():
    s = spectrum_test_system()
    return PhysicalSystem(s.m1, s.m2, s.m3, s.K21, s.K31, s.K32, s.sigma1, s.sigma2, s.sigma3,
                          g1=DriveVector.constant([0.4, 0, 0]), g3=DriveVector.constant([-0.3, 0, 0]))


def _static_shifts(frame, t_a, t_b):
    m = frame.m
    return tuple(
        tuple(ModeShift.static(-F(0.0)[a] / (m * w2), F(0.0)[a], t_a, t_b) for a in range(3))
        for w2, F in zip(frame.Omega_sq, frame.forces)
    )


@pytest.mark.parametrize("idx", INDICES[:2])
def test_driven_static_shift_is_displaced_eigenstate(idx):
    """Completing the square: a constant force displaces each mode and lowers E by F^2/(2 m W^2)."""
    jac = to_jacobi(_constant_drive_system())
    frame = normal_modes(jac)
    m = frame.m
    shifts = _static_shifts(frame, 0.0, 2.0)
    W = [math.sqrt(w) for w in frame.Omega_sq]
    F = [f(0.0)[0] for f in frame.forces]
    E_axis = sum((n[0] + 0.5) * w - Fj**2 / (2 * m * w * w) for n, w, Fj in zip((idx.n1, idx.n2), W, F))
    psi_fn = lambda X1, X2: driven_eigenfunction(idx, frame, 1.0, X1, X2, 0.0, shifts=shifts)  # noqa: E731
    assert _plane_hamiltonian_residual(psi_fn, jac, E_axis) < 1e-6
    # the time dependence is the stationary phase of the shifted energy
    E_total = energy_level(idx, frame) - sum(
        F_(0.0)[a] ** 2 / (2 * m * w2) for w2, F_ in zip(frame.Omega_sq, frame.forces) for a in range(3)
    )
    a0 = driven_eigenfunction(idx, frame, 1.0, BASE1, BASE2, 0.0, shifts=shifts)
    a1 = driven_eigenfunction(idx, frame, 1.0, BASE1, BASE2, 1.3, shifts=shifts)
    assert a1 / a0 == pytest.approx(np.exp(-1j * E_total * 1.3), rel=1e-10)


def test_driven_static_ground_peak_displaced():
    frame = normal_modes(to_jacobi(_constant_drive_system()))
    m = frame.m
    shifts = _static_shifts(frame, 0.0, 1.0)
    # equilibrium in mode variables: Y_j = F_j/(m W_j^2); map back to Jacobi coordinates
    Y = [F(0.0) / (m * w2) for w2, F in zip(frame.Omega_sq, frame.forces)]
    c, s = math.cos(frame.phi), math.sin(frame.phi)
    q1, q2 = math.sqrt(m) * Y[0], math.sqrt(m) * Y[1]
    X1 = (c * q1 + s * q2) / math.sqrt(frame.M1)
    X2 = (-s * q1 + c * q2) / math.sqrt(frame.M2)
    peak = abs(driven_eigenfunction(LevelIndex(), frame, 1.0, X1, X2, 0.0, shifts=shifts))
    undriven = normal_modes(to_jacobi(spectrum_test_system()))
    ref = stationary_eigenfunction(LevelIndex(), undriven, 1.0, np.zeros(3), np.zeros(3))
    assert peak == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.1])
def test_driven_norm_preserved(t):
    s = spectrum_test_system()
    sys = PhysicalSystem(s.m1, s.m2, s.m3, s.K21, s.K31, s.K32, s.sigma1, s.sigma2, s.sigma3,
                         g1=DriveVector(Sinusoid(0.5, 1.3), Sinusoid(0.2, 0.7, 0.4)),
                         g2=DriveVector.constant([0.0, 0.0, 0.3]))
    frame = normal_modes(to_jacobi(sys))
    idx = INDICES[1]
    # window kept well inside the first conjugate time of either mode
    assert max(frame.Omega_sq) ** 0.5 * 1.2 < 0.7 * math.pi
    norm = _norm(lambda X1, X2: driven_eigenfunction(idx, frame, 1.0, X1, X2, t, 0.0, 1.2), frame, BASE1, BASE2)
    assert abs(norm - 1.0) < 1e-8


# ---------------------------------------------------------------------------
# Mehler formula and spectral reconstruction


def test_mehler_c_zero():
    for a, b in [(0.0, 0.0), (0.7, -1.2), (1.5, 0.3)]:
        ref = math.exp(-(a * a + b * b))
        assert mehler_closed(a, b, 0.0) == pytest.approx(ref)
        assert mehler_partial(a, b, 0.0, 5) == pytest.approx(ref)


def test_mehler_origin_value():
    assert mehler_closed(0.0, 0.0, 0.5) == pytest.approx(1.1547005383792515290, rel=1e-15)
    assert mehler_partial(0.0, 0.0, 0.5, 60) == pytest.approx(1.1547005383792515290, rel=1e-12)


def test_mehler_convergence_sweep():
    a, b = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21))
    assert np.max(np.abs(mehler_closed(a, b, 0.5) - mehler_partial(a, b, 0.5, 60))) < 1e-8


def test_mehler_complex_argument():
    c = 0.6 * np.exp(0.9j)
    assert abs(mehler_closed(0.4, -0.8, c) - mehler_partial(0.4, -0.8, c, 120)) < 1e-12


def test_mehler_guards():
    with pytest.raises(ValueError):
        mehler_closed(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        mehler_partial(0.0, 0.0, 0.5, -1)


def test_reconstruction_ground_dominates():
    assert spectral_reconstruction_check((1.0, 1.0), 1.0, 10.0, 0) < 1e-4


def test_reconstruction_converged():
    assert spectral_reconstruction_check((1.0, 1.0), 1.0, 1.0, 40) < 1e-10
    frame = normal_modes(to_jacobi(spectrum_test_system()))
    assert spectral_reconstruction_check(frame, 1.0, 1.0, 60) < 1e-10


def test_reconstruction_truncated_is_visible():
    assert spectral_reconstruction_check((1.0, 1.0), 1.0, 1.0, 0) > 1e-2


def test_reconstruction_monotone_in_N():
    res = [spectral_reconstruction_check((1.3, 0.8), 1.0, 1.0, N) for N in range(0, 50, 4)]
    floor = 1e-13
    assert all(b <= a or b < floor for a, b in zip(res, res[1:]))
