import numpy as np
import pytest

from adskg.propagators import (
    BiKernel,
    TimeCutoff,
    adjoint_check,
    apply,
    cauchy_group_residual,
    feynman_consistency,
    frequency_sign_test,
    make_feynman,
    make_propagator,
    support_check,
    time_slice_check,
    verify_two_point,
)


def test_mode_gain_closed_forms(zoo):
    w = zoo["causal"].omega
    tau = np.array([-0.4, 0.0, 0.7])
    ph = w[:, None] * tau[None, :]
    checks = {
        "retarded": np.where(tau[None, :] > 0, np.sin(ph), 0.0) / w[:, None],
        "advanced": np.where(tau[None, :] < 0, -np.sin(ph), 0.0) / w[:, None],
        "causal": np.sin(ph) / w[:, None],
        "lambda_plus": np.exp(1j * ph) / (2 * w[:, None]),
        "lambda_minus": np.exp(-1j * ph) / (2 * w[:, None]),
        "feynman": -1j * np.exp(1j * np.abs(ph)) / (2 * w[:, None]),
        "antifeynman": 1j * np.exp(-1j * np.abs(ph)) / (2 * w[:, None]),
    }
    for kind, want in checks.items():
        got = zoo[kind].mode_gain(tau)
        assert got == pytest.approx(want, abs=1e-15), kind


def test_kernel_grid_validation(sm192):
    with pytest.raises(ValueError, match="T >= 32"):
        make_propagator(sm192, "causal", 0.025 * np.arange(8))
    with pytest.raises(ValueError, match="uniform"):
        make_propagator(sm192, "causal", np.array([0.0, 0.1, 0.15] + list(0.2 + 0.1 * np.arange(40))))
    with pytest.raises(ValueError, match="too coarse"):
        make_propagator(sm192, "causal", 0.2 * np.arange(64))
    with pytest.raises(ValueError, match="unknown kind"):
        BiKernel(spectral=sm192, kind="schwinger", t_grid=0.025 * np.arange(64))


def test_two_point_algebra(zoo):
    rep = verify_two_point(zoo["lambda_plus"], zoo["lambda_minus"], zoo["causal"])
    assert rep["pass"]
    assert rep["commutator_identity"]["value"] <= 1e-12
    assert rep["hermiticity"]["value"] <= 1e-12
    for name in ("psd_lambda_plus", "psd_lambda_minus"):
        assert rep[name]["value"] >= rep[name]["tol"]


def test_two_point_algebra_catches_sign_fault(zoo):
    bad = zoo["lambda_plus"].mutated(0.05)
    rep = verify_two_point(bad, zoo["lambda_minus"], zoo["causal"])
    assert not rep["commutator_identity"]["pass"]


def test_mutation_bookkeeping(zoo):
    bad = zoo["lambda_plus"].mutated(0.01)
    assert bad.describe()["n_flipped"] == 1
    assert zoo["lambda_plus"].describe()["n_flipped"] == 0
    with pytest.raises(ValueError, match="lambda kernels"):
        zoo["causal"].mutated()


def test_support_is_exact(zoo):
    assert support_check(zoo["retarded"]) == 0.0
    assert support_check(zoo["advanced"]) == 0.0
    with pytest.raises(ValueError, match="retarded/advanced"):
        support_check(zoo["causal"])


def test_adjoint_pairing(zoo):
    assert adjoint_check(zoo["retarded"], zoo["advanced"]) <= 1e-12


def test_feynman_identity_and_construction(zoo):
    resid = feynman_consistency(
        zoo["lambda_plus"], zoo["lambda_minus"], zoo["retarded"], zoo["advanced"]
    )
    assert resid <= 1e-12
    f, fbar = make_feynman(
        zoo["lambda_plus"], zoo["lambda_minus"], zoo["retarded"], zoo["advanced"]
    )
    assert f.kind == "feynman" and fbar.kind == "antifeynman"


def test_frequency_sign_one_sided(zoo, sm192):
    for kind, key in (("lambda_plus", "mass_negative_half"), ("lambda_minus", "mass_positive_half")):
        rep = frequency_sign_test(zoo[kind], sm192.m_floor_sqrt)
        assert rep["pass"] and rep["forbidden_fraction"] <= 1e-6
        assert rep[key] <= 1e-6
    # the causal kernel makes no one-sided claim; both halves carry mass
    rep = frequency_sign_test(zoo["causal"], sm192.m_floor_sqrt)
    assert rep["mass_negative_half"] > 0.1 and rep["mass_positive_half"] > 0.1


def test_frequency_sign_mutation_detected(zoo, sm192):
    clean = frequency_sign_test(zoo["lambda_plus"], sm192.m_floor_sqrt)
    broken = frequency_sign_test(zoo["lambda_plus"].mutated(0.01), sm192.m_floor_sqrt)
    assert broken["forbidden_fraction"] >= 1e3 * clean["tol"]
    assert not broken["pass"]


def test_frequency_sign_window_validation(zoo, sm192):
    with pytest.raises(ValueError, match="window too short"):
        frequency_sign_test(zoo["lambda_plus"], sm192.m_floor_sqrt, T_w=1.0)


def test_time_slice_identity(zoo, sm192):
    # the residual is pure dt^2 stencil error, so halving the step must
    # shrink it fourfold
    br = sm192.branch(0)
    span = 1.92
    resids = []
    for dt in (0.0125, 0.00625):
        t = dt * np.arange(int(round(span / dt)))
        g = make_propagator(sm192, "causal", t)
        coef = np.zeros((t.size, br.omega.size))
        coef[:, 2] = np.cos(br.omega[2] * t)
        u = sm192.synthesize(coef)
        chi = TimeCutoff(t0=0.2 * span, t1=0.4 * span)
        resids.append(time_slice_check(g, sm192, chi, u))
    assert resids[1] <= 0.05
    order = np.log2(resids[0] / resids[1])
    assert order >= 1.8
    with pytest.raises(ValueError, match="causal"):
        chi_full = TimeCutoff(t0=0.2 * 19.175, t1=0.4 * 19.175)
        u_full = sm192.synthesize(
            np.zeros((zoo["retarded"].T, br.omega.size))
        )
        time_slice_check(zoo["retarded"], sm192, chi_full, u_full)


def test_apply_inverts_wave_operator(zoo, sm192):
    from adskg.propagators import apply_wave_operator

    t = zoo["retarded"].t_grid
    br = sm192.branch(0)
    envelope = np.exp(-(((t - 6.0) / 1.5) ** 2))
    coef = np.zeros((t.size, br.omega.size))
    coef[:, 1] = envelope
    f = sm192.synthesize(coef)
    u = apply(zoo["retarded"], f)
    pu = apply_wave_operator(sm192, u, zoo["retarded"].dt)
    err = np.abs(pu[2:-2] - f[3:-3]).max() / np.abs(f).max()
    # second-order stencil: the defect is dt^2 omega^2 / 12 up to envelope terms
    stencil_scale = zoo["retarded"].dt ** 2 * br.omega[1] ** 2 / 12.0
    assert err <= 1.5 * stencil_scale


def test_cauchy_group_composition(sm192):
    assert cauchy_group_residual(sm192, 0.3, 1.1) <= 1e-12
