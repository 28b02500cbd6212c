import numpy as np
import pytest
from oracles import boundary_amplitudes_mp, line_weights_mp

from adskg.geometry import make_toy_model
from adskg.holography import (
    BoundaryKernel,
    boundary_two_point,
    build_series,
    default_fit_window,
    extract_boundary,
    indicial_polynomial,
    mellin_exponent_probe,
)
from adskg.propagators import frequency_sign_test, make_propagator


@pytest.fixture(scope="module")
def nu25():
    return make_toy_model("ads2_strip", nu=2.5, L=1.0)


def test_indicial_roots_annihilate_exactly(nu25):
    assert indicial_polynomial(nu25, nu25.nu_plus) == 0.0
    assert indicial_polynomial(nu25, nu25.nu_minus) == 0.0
    mid = 0.5 * (nu25.nu_minus + nu25.nu_plus)
    assert indicial_polynomial(nu25, mid) == pytest.approx(nu25.nu**2, rel=1e-15)


def test_series_coefficients_follow_recursion(nu25):
    sigma = 1.3
    s = build_series(nu25, w0=2.0, K=4, sigma=sigma)
    # hand-rolled c(alpha) = (alpha - nu_minus)(nu_plus - alpha)
    def c(alpha):
        return (alpha - nu25.nu_minus) * (nu25.nu_plus - alpha)

    shift = 0.0 - sigma**2
    want1 = -shift * 2.0 / c(nu25.nu_plus + 2)
    want2 = -shift * want1 / c(nu25.nu_plus + 4)
    assert s.coeffs[0] == 2.0
    assert s.coeffs[1] == 0.0 and s.coeffs[3] == 0.0
    assert s.coeffs[2] == pytest.approx(want1, rel=1e-15)
    assert s.coeffs[4] == pytest.approx(want2, rel=1e-15)


def test_series_evaluate_is_horner(nu25):
    s = build_series(nu25, w0=1.0, K=4, sigma=1.3)
    x = np.array([0.01, 0.05])
    direct = sum(s.coeffs[k] * x ** (s.alpha + k) for k in range(5))
    assert s.evaluate(x) == pytest.approx(direct, rel=1e-14)


def test_residual_slope_gains(nu25):
    slopes = [build_series(nu25, w0=1.0, K=k, sigma=1.3).residual_slope for k in range(5)]
    # even model: odd orders add nothing, even orders gain two each
    assert slopes[0] == pytest.approx(nu25.nu_plus + 2, abs=0.05)
    assert slopes[1] == pytest.approx(slopes[0], abs=1e-9)
    assert slopes[2] == pytest.approx(slopes[0] + 2, abs=0.05)
    assert slopes[4] == pytest.approx(slopes[0] + 4, abs=0.05)
    assert (slopes[4] - slopes[0]) / 4.0 >= 0.9


def test_resonant_orders_refused():
    m = make_toy_model("ads2_strip", nu=1.0, L=1.0)
    with pytest.raises(ValueError, match="resonant"):
        build_series(m, w0=1.0, K=2, sigma=0.5)
    mh = make_toy_model("ads2_strip", nu=0.5, L=1.0)
    with pytest.raises(ValueError, match="resonant"):
        build_series(mh, w0=1.0, K=1, sigma=0.5)
    # K = 0 never recurses, so it is allowed even at resonant nu
    assert build_series(m, w0=1.0, K=0, sigma=0.5).coeffs.tolist() == [1.0]


def test_trivial_shift_gives_exact_series():
    m3 = make_toy_model("ads3_cylinder", nu=0.7, L=1.0, ell=2.0 * np.pi)
    mu = m3.transverse_mu(1)
    s = build_series(m3, w0=1.0, K=0, sigma=np.sqrt(mu), m=1)
    assert s.residual_slope == np.inf


def test_extract_boundary_recovers_constant():
    m = make_toy_model("ads2_strip", nu=1.0, L=1.0)
    x = np.geomspace(1e-4, 0.3, 400)
    u = 3.0 * x ** (m.nu + 0.5) * (1.0 + 0.3 * x + 0.1 * x**2)
    fit = extract_boundary(u, m, (1e-3, 0.05), x=x, weighting="tilde")
    assert fit.value == pytest.approx(3.0, rel=1e-9)
    assert fit.quality > 0.999
    assert not fit.warn


def test_extract_boundary_weighting_consistency():
    m3 = make_toy_model("ads3_cylinder", nu=0.7, L=1.0)
    x = np.geomspace(1e-4, 0.3, 400)
    tilde = 2.0 * x ** (m3.nu + 0.5)
    phys = 2.0 * x ** float(m3.nu_plus)
    a = extract_boundary(tilde, m3, (1e-3, 0.05), x=x, weighting="tilde")
    b = extract_boundary(phys, m3, (1e-3, 0.05), x=x, weighting="physical")
    assert a.value == pytest.approx(b.value, rel=1e-10)


def test_contamination_warning_and_failure():
    m = make_toy_model("ads2_strip", nu=1.0, L=1.0)
    x = np.geomspace(1e-4, 0.3, 400)
    clean = x ** (m.nu + 0.5)
    fit = extract_boundary(clean + 1e-8 * x ** (m.nu + 0.5 - 2.0), m, (1e-3, 0.05), x=x)
    assert fit.warn and fit.contamination > 1e-6
    with pytest.raises(ValueError, match="contamination"):
        extract_boundary(clean + 1e-3 * x ** (m.nu + 0.5 - 2.0), m, (1e-3, 0.05), x=x)


def test_extract_boundary_window_validation():
    m = make_toy_model("ads2_strip", nu=1.0, L=1.0)
    x = np.geomspace(1e-4, 0.3, 50)
    u = x ** (m.nu + 0.5)
    with pytest.raises(ValueError, match="L/10"):
        extract_boundary(u, m, (1e-3, 0.2), x=x)
    with pytest.raises(ValueError, match="fewer than 8"):
        extract_boundary(u, m, (1e-3, 1.2e-3), x=x)


def test_default_fit_window_scales_with_frequency():
    m = make_toy_model("ads2_strip", nu=1.0, L=1.0)
    lo1, hi1 = default_fit_window(m, 4.0)
    lo2, hi2 = default_fit_window(m, 40.0)
    assert 0.0 < lo1 < hi1 <= m.L / 10.0
    assert hi2 == pytest.approx(0.8 / 40.0, rel=1e-12)
    assert lo2 < hi2


def test_mode_boundary_exponent(sm192, ads2):
    phi1 = sm192.branch(0).phi[:, 0]
    slope, r2 = mellin_exponent_probe(np.abs(phi1), ads2, sm192.grid.dof_x)
    assert abs(slope - (ads2.nu + 0.5)) <= 1e-2
    assert r2 > 0.999


def test_boundary_two_point_matches_oracle(sm192, ads2, tgrid):
    lp = make_propagator(sm192, "lambda_plus", tgrid, weighting="physical")
    bk = boundary_two_point(lp, ads2)
    amps = boundary_amplitudes_mp(1.0, 1.0, 5)
    weights = line_weights_mp(1.0, 1.0, 5)
    assert np.abs(bk.amplitudes[:5] / amps - 1.0).max() <= 1e-2
    assert np.abs(bk.weights[:5] / weights - 1.0).max() <= 1e-2
    assert bk.fit_quality[:5].min() > 0.999


def test_boundary_two_point_validation(sm192, ads2, tgrid, zoo):
    with pytest.raises(ValueError, match="physical weighting"):
        boundary_two_point(zoo["lambda_plus"], ads2)
    ret = make_propagator(sm192, "retarded", tgrid, weighting="physical")
    with pytest.raises(ValueError, match="lambda"):
        boundary_two_point(ret, ads2)


def test_boundary_kernel_structure(sm192, ads2, tgrid):
    lp = make_propagator(sm192, "lambda_plus", tgrid, weighting="physical")
    bk = boundary_two_point(lp, ads2)
    assert bk.frequency_sign == +1
    assert bk.weights == pytest.approx(bk.amplitudes**2 / (2.0 * bk.omega), rel=1e-15)
    tau = np.array([0.3, 1.1])
    vals = bk.trace_series(tau)
    flipped = bk.trace_series(-tau)
    assert vals == pytest.approx(np.conj(flipped), rel=1e-14)
    gram = bk.gram()
    evals = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    assert evals[0] >= -1e-10 * float(np.abs(evals).max())
    rep = frequency_sign_test(bk, sm192.m_floor_sqrt)
    assert rep["pass"] and rep["forbidden_fraction"] <= 1e-6


def test_minus_kernel_mirrors(sm192, ads2, tgrid):
    lm = make_propagator(sm192, "lambda_minus", tgrid, weighting="physical")
    bk = boundary_two_point(lm, ads2)
    assert bk.kind == "minus" and bk.frequency_sign == -1
    rep = frequency_sign_test(bk, sm192.m_floor_sqrt)
    assert rep["pass"]


def test_mellin_probe_validation(ads2):
    x = np.geomspace(1e-4, 0.3, 6)
    with pytest.raises(ValueError, match="at least 8"):
        mellin_exponent_probe(x**1.5, ads2, x)
