import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triprop.model import Constant
from triprop.oracle import (
    BoundaryLeakError,
    GridState,
    chapman_kolmogorov_residual,
    dense_quadratic_kernel,
    discrete_spectrum,
    eig2_symmetric,
    evolve_grid_tdse,
    gaussian_kernel_integral,
    gaussian_state,
    kernel_apply,
    l2_error,
    pinney_reference,
)
from triprop.propagator import driven_kernel_1d, free_kernel, sho_kernel_1d


def free_gaussian(x, t, width, center=0.0, mass=1.0, hbar=1.0):
    z = 1 + 1j * hbar * t / (2 * mass * width**2)
    return (2 * math.pi * width**2) ** -0.25 * z**-0.5 * np.exp(-((x - center) ** 2) / (4 * width**2 * z))


def test_eig2_worked_example():
    lo, hi, angle = eig2_symmetric(1.0, 0.5, 2.0)
    assert lo == pytest.approx(0.79289321881345247560, abs=1e-15)
    assert hi == pytest.approx(2.2071067811865475244, abs=1e-15)
    v = np.array([math.cos(angle), math.sin(angle)])
    A = np.array([[1.0, 0.5], [0.5, 2.0]])
    assert np.allclose(A @ v, lo * v, atol=1e-14)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_eig2_trace_and_determinant(a11, a12, a22):
    lo, hi, angle = eig2_symmetric(a11, a12, a22)
    scale = max(1.0, abs(a11), abs(a12), abs(a22))
    assert lo <= hi
    assert abs(lo + hi - a11 - a22) <= 1e-13 * scale
    assert abs(lo * hi - (a11 * a22 - a12 * a12)) <= 1e-12 * scale**2
    v = np.array([math.cos(angle), math.sin(angle)])
    A = np.array([[a11, a12], [a12, a22]])
    assert np.linalg.norm(A @ v - lo * v) <= 1e-12 * scale


def test_grid_state_validation():
    with pytest.raises(ValueError):
        GridState(0.0, 0.0, np.zeros(32))
    with pytest.raises(ValueError):
        GridState(0.0, 0.1, np.zeros(4))
    with pytest.raises(ValueError):
        GridState(0.0, 0.1, np.full(32, np.nan))
    g = gaussian_state(-10, 10, 1001, width=0.8)
    assert g.norm == pytest.approx(1.0, abs=1e-12)


def test_cn_free_spreading():
    psi0 = gaussian_state(-15, 15, 4096, width=1.0)
    out = evolve_grid_tdse(psi0, lambda x, t: np.zeros_like(x), 0.0, 1.0, 4096)
    assert l2_error(out, free_gaussian(out.x, 1.0, 1.0)) < 1e-5
    rho = np.abs(out.values) ** 2
    var = np.sum(rho * out.x**2) * out.dx
    assert var == pytest.approx(1.0 * (1 + (1 / 2) ** 2), rel=1e-5)


def test_cn_coherent_state_follows_classical_orbit():
    psi0 = gaussian_state(-10, 10, 8192, center=1.0, width=math.sqrt(0.5))
    t = 2.0
    out = evolve_grid_tdse(psi0, lambda x, t: 0.5 * x**2, 0.0, t, 4096)
    mean = np.sum(np.abs(out.values) ** 2 * out.x) * out.dx
    assert mean == pytest.approx(math.cos(t), abs=1e-5)


def test_cn_norm_conserved():
    psi0 = gaussian_state(-10, 10, 512, center=0.5, width=0.7, momentum=1.0)
    out = evolve_grid_tdse(psi0, lambda x, t: 0.5 * (1 + 0.3 * math.sin(t)) * x**2, 0.0, 10.0, 10_000)
    assert abs(out.norm - psi0.norm) < 1e-10


def test_cn_boundary_leak_detected():
    psi0 = gaussian_state(-5, 5, 512, center=2.0, width=0.5, momentum=8.0)
    with pytest.raises(BoundaryLeakError):
        evolve_grid_tdse(psi0, lambda x, t: np.zeros_like(x), 0.0, 1.0, 500)


def test_kernel_apply_free_gaussian():
    psi0 = gaussian_state(-15, 15, 4096, width=1.0)
    out = kernel_apply(lambda x, y: free_kernel(1.0, y, x, 1.0, d=1).amplitude, psi0)
    assert l2_error(out, free_gaussian(out.x, 1.0, 1.0)) < 1e-5


def test_kernel_apply_short_time_on_output_grid():
    psi0 = gaussian_state(-8, 8, 40_001, width=1.0)
    out = kernel_apply(lambda x, y: free_kernel(1.0, y, x, 1e-2, d=1).amplitude, psi0, out=(-2.0, 0.25, 17))
    assert np.max(np.abs(out.values - free_gaussian(out.x, 1e-2, 1.0))) < 1e-6


def test_kernel_apply_rejects_caustic():
    psi0 = gaussian_state(-5, 5, 64)
    with pytest.raises(ValueError, match="caustic"):
        kernel_apply(lambda x, y: sho_kernel_1d(1.0, 1.0, y, x, math.pi).amplitude, psi0)


def test_chapman_kolmogorov_oscillator():
    fam = lambda x, y, t0, t1: sho_kernel_1d(1.2, 0.8, y, x, t1 - t0).amplitude  # noqa: E731
    # the intermediate time straddles the first caustic of the composed kernel
    assert chapman_kolmogorov_residual(fam, 0.0, 2.1, 3.9, np.linspace(-1.5, 1.5, 7)) < 1e-10


def test_chapman_kolmogorov_detects_wrong_phase():
    fam = lambda x, y, t0, t1: sho_kernel_1d(1.0, 1.0, y, x, t1 - t0).amplitude.conjugate()  # noqa: E731
    assert chapman_kolmogorov_residual(fam, 0.0, 0.4, 1.0, np.array([0.3])) > 1e-2


def test_spectrum_harmonic():
    x = np.linspace(-12, 12, 3001)
    E = discrete_spectrum(lambda x: 0.5 * 2.0 * x**2, x, 6, mass=1.0)
    np.testing.assert_allclose(E, math.sqrt(2.0) * (np.arange(6) + 0.5), atol=1e-6)


def test_spectrum_box_and_shift():
    # Dirichlet walls sit one spacing outside the grid, so pass interior nodes only
    L = 2.0
    x = np.linspace(0, L, 4003)[1:-1]
    E = discrete_spectrum(lambda x: np.zeros_like(x), x, 4, extrapolate=False)
    n = np.arange(1, 5)
    np.testing.assert_allclose(E, (n * math.pi / L) ** 2 / 2, rtol=1e-6)
    Ec = discrete_spectrum(lambda x: np.full_like(x, 0.75), x, 4, extrapolate=False)
    np.testing.assert_allclose(Ec - E, 0.75, atol=1e-10)


def test_spectrum_second_order_without_extrapolation():
    errs = []
    for n in (401, 801, 1601):
        x = np.linspace(-10, 10, n)
        errs.append(abs(discrete_spectrum(lambda x: 0.5 * x**2, x, 1, extrapolate=False)[0] - 0.5))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_spectrum_too_many_levels():
    with pytest.raises(ValueError):
        discrete_spectrum(lambda x: x**2, np.linspace(-1, 1, 10), 11)


def test_pinney_constant_frequency():
    t = np.linspace(0.0, 3.0, 31)
    s, alpha = pinney_reference(lambda t: 4.0, 0.0, t)
    np.testing.assert_allclose(s, 0.5**0.5, rtol=1e-12)
    np.testing.assert_allclose(alpha, 2.0 * t, atol=1e-11)


def test_dense_kernel_one_dimensional():
    H = np.array([[1.3 * 0.8]])
    k = dense_quadratic_kernel([1.3], H, [0.0], [0.2], [-0.5], 2.7)
    assert k == pytest.approx(sho_kernel_1d(1.3, 0.8, 0.2, -0.5, 2.7).amplitude, rel=1e-13)
    k = dense_quadratic_kernel([1.3], H, [0.4], [0.2], [-0.5], 2.7, hbar=0.7)
    ref = driven_kernel_1d(1.3, 0.8, Constant(0.4), 0.2, -0.5, 0.0, 2.7, hbar=0.7).amplitude
    assert k == pytest.approx(ref, rel=1e-11)


def test_dense_kernel_free_direction():
    k = dense_quadratic_kernel([2.0, 1.0], np.diag([0.0, 1.0]), [0.0, 0.0], [0.1, 0.2], [0.3, -0.4], 0.9)
    ref = free_kernel(2.0, 0.1, 0.3, 0.9, d=1).amplitude * sho_kernel_1d(1.0, 1.0, 0.2, -0.4, 0.9).amplitude
    assert k == pytest.approx(ref, rel=1e-13)


def test_gaussian_kernel_integral_free():
    # int K_free(x; y) N(y) dy equals the spread Gaussian, up to normalisation
    w = 0.9
    val, third = gaussian_kernel_integral(
        lambda y: free_kernel(1.0, y[..., 0], 0.4, 0.6, d=1).log_amplitude, 1, [0.0], [[1 / (2 * w**2)]]
    )
    ref = free_gaussian(0.4, 0.6, w) / (2 * math.pi * w**2) ** -0.25
    assert third < 1e-12
    assert val == pytest.approx(ref, rel=1e-12)
    assert cmath.isfinite(val)
