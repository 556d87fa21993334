import math

import numpy as np
import pytest

from conftest import R0
from starkres import (
    CutProximityError,
    FormFactor,
    QuadratureSettings,
    ResolventEvaluator,
    erfc_closed_form,
    erfc_free_element,
)

SQRT_PI = math.sqrt(math.pi)


@pytest.fixture(scope="module")
def ev0(coupling):
    return ResolventEvaluator(coupling, 0.0)


# ----------------------------------------------------------------------
# free line


def test_zero_coupling_everything_trivial():
    ev = ResolventEvaluator(FormFactor.zero(), 0.0)
    assert ev.free_matrix_element(2j) == 0
    assert complex(ev.free_continued(1 - 0.3j)) == 0
    assert complex(ev.F_value(1 - 0.3j)) == pytest.approx(0.3j, abs=1e-15)
    assert ev.F_derivative(0.5 - 0.2j) == pytest.approx(-1.0, abs=1e-12)


def test_direct_element_matches_closed_form(ev0):
    for z in (2j, 1 + 0.5j, 0.4 + 1.2j):
        assert abs(ev0.free_matrix_element(z)
                   - erfc_free_element(z)) < 1e-10


def test_large_z_limit(ev0, coupling):
    # z * r(z) -> -|phi|^2 along the imaginary axis
    vals = {}
    for mag in (1e3, 1e4):
        z = 1j * mag
        vals[mag] = complex(z * ev0.free_continued(z))
    # first-order Richardson in 1/|z|
    extrap = vals[1e4] + (vals[1e4] - vals[1e3]) / 9.0
    assert abs(extrap - (-SQRT_PI / 100.0)) < 1e-8


def test_continuity_across_positive_axis(ev0):
    up = complex(ev0.free_continued(1.0 + 1e-8j))
    dn = complex(ev0.free_continued(1.0 - 1e-8j))
    assert abs(up - dn) < 1e-7


def test_continued_equals_direct_in_upper_half(ev0, rng):
    for _ in range(50):
        z = complex(0.3 + 1.7 * rng.rand(), 0.05 + 1.5 * rng.rand())
        assert abs(complex(ev0.free_continued(z))
                   - ev0.free_matrix_element(z)) < 1e-9


def test_pole_term_near_one(ev0):
    # continued minus direct-integral branch equals i pi e^{-z}/(50 sqrt z)
    for z in (1.0 - 0.02j, 0.9 - 0.04j):
        jump = complex(ev0.free_continued(z)) - erfc_free_element(
            z, continued=False)
        expect = 1j * math.pi * np.exp(-z) / (50.0 * np.sqrt(z))
        assert abs(jump - expect) < 1e-12


def test_jump_across_cut_matches_pole_term(ev0):
    lam = 1.0
    eps = 1e-6
    up = ev0.free_matrix_element(lam + 1j * eps)
    # real coupling: value below the axis is the conjugate of above
    jump = up - np.conj(up)
    expect = 2j * math.pi * (math.exp(-lam) / 100.0) / math.sqrt(lam)
    assert abs(jump - expect) < 5e-5   # O(eps) agreement


def test_schwarz_reflection(ev0, rng):
    # for the real even coupling: r(conj z) = conj(r(z)) - conj(pole(z))
    for _ in range(20):
        z = complex(0.5 + rng.rand(), -(0.01 + 0.3 * rng.rand()))
        rz = complex(ev0.free_continued(z))
        rbar = complex(ev0.free_continued(np.conj(z)))
        pole = 1j * math.pi * np.exp(-z) / (50.0 * np.sqrt(z))
        assert abs(rbar - (np.conj(rz) - np.conj(pole))) < 1e-10


def test_F_at_reference_resonance(ev0):
    assert abs(complex(ev0.F_value(R0))) < 1e-12


def test_F_derivative_matches_finite_differences(ev0, rng):
    for _ in range(20):
        z = complex(0.8 + 0.4 * rng.rand(), -0.04 + 0.08 * rng.rand())
        if abs(z.imag) < 1e-3:
            z += 5e-3j
        h = 1e-6
        fd = (complex(ev0.F_value(z + h)) - complex(ev0.F_value(z - h))) \
            / (2 * h)
        assert abs(ev0.F_derivative(z) - fd) < 1e-6


def test_free_matches_erfc_F_on_grid(ev0):
    for x in np.linspace(0.6, 1.4, 10):
        for y in np.linspace(-0.4, 0.4, 10):
            z = complex(x, y)
            if abs(y) < 1e-9:
                continue
            assert abs(complex(ev0.F_value(z)) - erfc_closed_form(z)) < 1e-10


def test_cut_proximity_rejected(ev0):
    with pytest.raises(CutProximityError):
        ev0.free_continued(-0.5 + 1e-12j)
    with pytest.raises(CutProximityError):
        ev0.free_continued(1e-12j)


def test_determinism(ev0):
    z = np.array([1 - 0.01j, 0.95 - 0.03j])
    a = ev0.free_continued(z)
    b = ev0.free_continued(z)
    assert np.array_equal(a, b)


# ----------------------------------------------------------------------
# propagator time representation


def test_propagator_element_at_zero(coupling):
    ev = ResolventEvaluator(coupling, 0.01)
    assert complex(ev.propagator_element(0.0)) == pytest.approx(
        SQRT_PI / 100.0, abs=1e-15)


def test_propagator_unitarity_bound(coupling):
    ev = ResolventEvaluator(coupling, 0.3)
    s = np.linspace(0.0, 40.0, 81)
    vals = np.abs(ev.propagator_element(s))
    assert np.all(vals <= SQRT_PI / 100.0 + 1e-14)


def test_propagator_free_limit(coupling):
    # f -> 0: m(s) = (sqrt(pi)/100) (1+is)^{-1/2}, checked against direct
    # quadrature of the spreading-Gaussian integral
    from scipy.integrate import quad
    ev = ResolventEvaluator(coupling, 1e-7)
    for s in np.linspace(0.1, 6.0, 10):
        direct = quad(lambda k: (np.exp(-k * k) / 100.0
                                 * np.exp(-1j * k * k * s)).real,
                      -10, 10, epsabs=1e-13)[0] \
            + 1j * quad(lambda k: (np.exp(-k * k) / 100.0
                                   * np.exp(-1j * k * k * s)).imag,
                        -10, 10, epsabs=1e-13)[0]
        assert abs(complex(ev.propagator_element(s)) - direct) < 1e-9


def test_time_integrand_composition(coupling):
    ev = ResolventEvaluator(coupling, 0.05)
    s, z = 1.3 - 0.4j, 1.1 + 0.2j
    expect = np.exp(1j * z * s) * complex(ev.propagator_element(s))
    assert abs(complex(ev.stark_time_integrand(s, z)) - expect) < 1e-15


# ----------------------------------------------------------------------
# Stark line (f > 0)


def test_stark_zero_coupling():
    ev = ResolventEvaluator(FormFactor.zero(), 0.05)
    assert complex(ev.stark_matrix_element(1 - 0.01j)) == 0


def test_stark_matches_time_ray_below_axis(coupling):
    ev = ResolventEvaluator(coupling, 0.05)
    for z in (1 - 0.01j, 0.95 - 0.03j, 1.1 - 0.005j):
        assert abs(complex(ev.stark_matrix_element(z))
                   - ev.stark_time_ray(z)) < 1e-10


def test_time_ray_contour_independence(coupling):
    # rotation-angle invariance in the regime where the ray integral is
    # well conditioned (moderate f)
    ev = ResolventEvaluator(coupling, 0.05)
    z = 1 - 0.01j
    vals = [ev.stark_time_ray(z, g) for g in
            (math.pi / 12, math.pi / 8, math.pi / 6)]
    assert max(abs(a - b) for a in vals for b in vals) < 1e-8


def test_stark_upper_half_continuity_with_free(coupling):
    ev0 = ResolventEvaluator(coupling, 0.0)
    for f, tol in ((1e-3, 5e-9), (1e-4, 5e-11)):
        ev = ResolventEvaluator(coupling, f)
        assert abs(complex(ev.stark_matrix_element(2j))
                   - complex(ev0.free_continued(2j))) < tol


def test_stark_gamma_sector_validation(coupling):
    ev = ResolventEvaluator(coupling, 0.05)
    from starkres import SectorLimitError
    with pytest.raises(SectorLimitError):
        ev.stark_time_ray(1 - 0.01j, gamma=1.2)
    with pytest.raises(ValueError):
        QuadratureSettings(gamma=2.0)


def test_stark_morera_small_square(coupling):
    # closed-contour integral of F vanishes relative to the contour scale
    ev = ResolventEvaluator(coupling, 0.05)
    c = 1 - 0.03j
    h = 0.05
    xg, wg = np.polynomial.legendre.leggauss(24)
    corners = [c - h - h * 1j, c + h - h * 1j, c + h + h * 1j,
               c - h + h * 1j]
    total = 0.0
    peak = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        zs = 0.5 * (b - a) * xg + 0.5 * (a + b)
        vals = np.asarray(ev.F_value(zs))
        total += 0.5 * (b - a) * np.sum(wg * vals)
        peak = max(peak, float(np.max(np.abs(vals))))
    assert abs(total) < 1e-9 * peak * 8 * h


def test_stark_entire_no_jump_across_axis(coupling):
    ev = ResolventEvaluator(coupling, 0.02)
    up = complex(ev.stark_matrix_element(1.0 + 1e-9j))
    dn = complex(ev.stark_matrix_element(1.0 - 1e-9j))
    assert abs(up - dn) < 1e-7


# ----------------------------------------------------------------------
# dominance certificate


def test_certify_unique_reference(ev0):
    cert = ev0.certify_unique(1.0, 0.1)
    assert cert.certified and not cert.indeterminate
    assert cert.max_coupling < cert.min_linear


def test_certify_unique_zero_coupling():
    ev = ResolventEvaluator(FormFactor.zero(), 0.0)
    assert ev.certify_unique(1.0, 0.1).certified


def test_certify_large_amplitude_not_certified():
    ev = ResolventEvaluator(FormFactor.gaussian(1.0, 1.0), 0.0)
    cert = ev.certify_unique(1.0, 0.1)
    assert not cert.certified


def test_certify_rejects_stark():
    ev = ResolventEvaluator(FormFactor.gaussian(0.1), 0.05)
    with pytest.raises(ValueError):
        ev.certify_unique(1.0, 0.1)


def test_dump_integrand(tmp_path, ev0, coupling):
    p = tmp_path / "free.csv"
    ev0.dump_integrand(2j, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "k,re_integrand,im_integrand"
    assert len(lines) > 100
    ev = ResolventEvaluator(coupling, 0.05)
    p2 = tmp_path / "stark.csv"
    ev.dump_integrand(1 - 0.01j, p2)
    assert p2.read_text().startswith("x,")
