import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import carleman_lab as cl
from carleman_lab.symbols import ConvexZone, RegionLabel

from conftest import random_spd


# ---------------------------------------------------------------- reduction

def test_reduce_identity():
    red = cl.reduce_coefficients(np.eye(2))
    assert red.a_nn == 1.0
    assert np.allclose(red.t, [0.0])
    assert np.allclose(red.b, [[1.0]])


def test_reduce_example():
    red = cl.reduce_coefficients(np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert red.a_nn == pytest.approx(1.0)
    assert red.t == pytest.approx([1.0])
    assert np.allclose(red.b, [[1.0]])
    assert np.linalg.eigvalsh(red.b)[0] > 0


def test_reduce_quadratic_form_identity_example():
    a = np.array([[2.0, 1.0], [1.0, 1.0]])
    red = cl.reduce_coefficients(a)
    xi_prime = np.array([1.0])
    xi = np.array([1.0, -red.t @ xi_prime])
    assert xi @ a @ xi == pytest.approx(1.0)
    assert xi_prime @ red.b @ xi_prime == pytest.approx(1.0)


@given(st.integers(2, 4), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_reduce_quadratic_form_identity_random(n, seed):
    rng = np.random.default_rng(seed)
    a = random_spd(n, rng)
    red = cl.reduce_coefficients(a)
    xi_prime = rng.standard_normal(n - 1)
    xi = np.concatenate([xi_prime, [-red.t @ xi_prime]])
    assert xi @ a @ xi == pytest.approx(xi_prime @ red.b @ xi_prime, rel=1e-12)


def test_reduce_rejects_nonsymmetric():
    with pytest.raises(cl.ValidationError, match="not symmetric"):
        cl.reduce_coefficients(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_reduce_rejects_indefinite():
    with pytest.raises(cl.ValidationError, match="not positive-definite"):
        cl.reduce_coefficients(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_model_coefficients_validation():
    with pytest.raises(cl.ValidationError, match="dimension"):
        cl.ModelCoefficients(np.array([[1.0]]), np.array([[1.0]]))
    with pytest.raises(cl.ValidationError, match="different shapes"):
        cl.ModelCoefficients(np.eye(2), np.eye(3))


def test_weight_spec_validation():
    with pytest.raises(cl.ValidationError, match="alpha_plus"):
        cl.WeightSpec(0.0, 1.0, 1.0)
    with pytest.raises(cl.ValidationError, match="alpha_minus"):
        cl.WeightSpec(1.0, -2.0, 1.0)
    with pytest.raises(cl.ValidationError, match="beta"):
        cl.WeightSpec(1.0, 1.0, -0.5)
    w = cl.WeightSpec(2.0, 1.0, 0.0)  # beta = 0 permitted
    assert w.phi_prime(+1, 0.0) == 2.0


def test_tangential_frequency_validation():
    with pytest.raises(cl.ValidationError, match="tau"):
        cl.TangentialFrequency(0.0, [1.0])
    with pytest.raises(cl.ValidationError, match="finite"):
        cl.TangentialFrequency(1.0, [np.inf])
    freq = cl.TangentialFrequency(3.0, [4.0])
    assert freq.lam == pytest.approx(5.0)
    assert freq.lam >= freq.tau and freq.lam >= freq.xi_abs


# ------------------------------------------------------------ symbol values

def test_symbol_values_example(satisfied_weight):
    coeffs = cl.ModelCoefficients.from_diagonal([4.0, 1.0], [1.0, 1.0])
    freq = cl.TangentialFrequency(1.0, [1.0])
    sv = cl.symbol_values(coeffs.reduced_plus, coeffs.reduced_minus,
                          satisfied_weight, freq, 0.0)
    assert sv.m_plus == pytest.approx(2.0)
    assert sv.e_plus == pytest.approx(5.0)
    assert sv.f_plus == pytest.approx(1.0)
    assert sv.s_plus == 0.0


@given(st.floats(0.1, 50.0))
@settings(max_examples=30, deadline=None)
def test_isotropic_m_is_xi_abs(c):
    coeffs = cl.ModelCoefficients.from_diagonal([c, c], [1.0, 1.0])
    assert coeffs.reduced_plus.m([2.5]) == pytest.approx(2.5, rel=1e-14)


@given(st.integers(0, 10**6))
@settings(max_examples=80, deadline=None)
def test_factor_symbol_identities(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    coeffs = cl.ModelCoefficients(random_spd(n, rng), random_spd(n, rng))
    w = cl.WeightSpec(rng.uniform(0.2, 4), rng.uniform(0.2, 4), rng.uniform(0, 3))
    freq = cl.TangentialFrequency(rng.uniform(0.1, 50), rng.standard_normal(n - 1) * 5)
    x_n = rng.uniform(-0.3, 0.3)
    sv = cl.symbol_values(coeffs.reduced_plus, coeffs.reduced_minus, w, freq, x_n)
    scale = abs(sv.e_plus) + abs(sv.f_plus) + 1
    assert sv.e_plus - sv.f_plus == pytest.approx(2 * sv.m_plus, abs=1e-12 * scale)
    assert sv.e_plus + sv.f_plus == pytest.approx(
        2 * freq.tau * sv.phi_prime_plus, abs=1e-12 * scale)
    assert sv.e_minus - sv.f_minus == pytest.approx(2 * sv.m_minus, abs=1e-12 * scale)


@given(st.integers(0, 10**6), st.floats(1e-3, 1e3))
@settings(max_examples=80, deadline=None)
def test_m_homogeneity(seed, rho):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    red = cl.reduce_coefficients(random_spd(n, rng))
    xi = rng.standard_normal(n - 1)
    assert red.m(rho * xi) == pytest.approx(rho * red.m(xi), rel=1e-12)


# ------------------------------------------------------------- sup m ratio

def test_sup_m_ratio_standard(std_coeffs):
    sup, witness = cl.sup_m_ratio(std_coeffs.reduced_plus, std_coeffs.reduced_minus)
    assert sup == pytest.approx(2.0)
    assert abs(witness[0]) == pytest.approx(1.0)


def test_sup_m_ratio_equal_sides():
    rng = np.random.default_rng(5)
    a = random_spd(3, rng)
    red = cl.reduce_coefficients(a)
    sup, _ = cl.sup_m_ratio(red, red)
    assert sup == pytest.approx(1.0, rel=1e-12)


def test_sup_m_ratio_diagonal_n3():
    coeffs = cl.ModelCoefficients.from_diagonal([9.0, 4.0, 1.0], [1.0, 1.0, 1.0])
    sup, witness = cl.sup_m_ratio(coeffs.reduced_plus, coeffs.reduced_minus)
    assert sup == pytest.approx(3.0)
    assert abs(witness[0]) == pytest.approx(1.0)
    assert witness[1] == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_sup_m_ratio_vs_sphere_sampling(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    red_p = cl.reduce_coefficients(random_spd(n, rng))
    red_m = cl.reduce_coefficients(random_spd(n, rng))
    sup, witness = cl.sup_m_ratio(red_p, red_m)
    if n == 2:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = rng.standard_normal((10_000, n - 1))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sampled = np.max(red_p.m(dirs) / red_m.m(dirs))
    assert sampled <= sup * (1 + 1e-9)
    assert sampled >= sup * (1 - 1e-2)
    assert red_p.m(witness) / red_m.m(witness) == pytest.approx(sup, rel=1e-10)


# ---------------------------------------------------------- condition check

def test_check_condition_satisfied(std_coeffs):
    rep = cl.check_condition(std_coeffs, cl.WeightSpec(3.0, 1.0, 1.0))
    assert rep.satisfied
    assert rep.sigma == pytest.approx(np.sqrt(1.5))
    assert rep.sigma == pytest.approx(1.22474, rel=1e-5)


def test_check_condition_violated(std_coeffs):
    rep = cl.check_condition(std_coeffs, cl.WeightSpec(1.0, 1.0, 1.0))
    assert not rep.satisfied
    assert rep.sigma is None


@given(st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_check_condition_isotropic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    c_p, c_m = rng.uniform(0.2, 5.0, size=2)
    coeffs = cl.ModelCoefficients.from_diagonal([c_p] * n, [c_m] * n)
    alpha_p, alpha_m = rng.uniform(0.2, 5.0, size=2)
    rep = cl.check_condition(coeffs, cl.WeightSpec(alpha_p, alpha_m, 1.0))
    assert rep.satisfied == (alpha_p > alpha_m)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_dichotomy_of_interface_signs(seed):
    """Satisfied weight never yields f_+ < 0 < f_- at x_n = 0; a strict
    violation admits a witness frequency with exactly that sign pattern."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    coeffs = cl.ModelCoefficients(random_spd(n, rng), random_spd(n, rng))
    w = cl.WeightSpec(rng.uniform(0.2, 4), rng.uniform(0.2, 4), 1.0)
    rep = cl.check_condition(coeffs, w)
    red_p, red_m = coeffs.reduced_plus, coeffs.reduced_minus
    dirs = rng.standard_normal((200, n - 1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    xi = dirs * rng.uniform(1.0, 50.0, size=(200, 1))
    m_p, m_m = red_p.m(xi), red_m.m(xi)
    taus = np.concatenate([rng.uniform(0.2, 2.0, 100) * m_p[:100] / w.alpha_plus,
                           rng.uniform(0.2, 2.0, 100) * m_m[100:] / w.alpha_minus])
    f_p = taus * w.alpha_plus - m_p
    f_m = taus * w.alpha_minus - m_m
    if rep.satisfied:
        assert not np.any((f_p < 0) & (f_m > 0))
    point = cl.find_violation(coeffs, w)
    if w.alpha_plus / w.alpha_minus < rep.sup_ratio:
        assert point is not None
        fp0 = point.tau0 * w.alpha_plus - red_p.m(point.xi0)
        fm0 = point.tau0 * w.alpha_minus - red_m.m(point.xi0)
        assert fp0 < 0 < fm0
    if rep.satisfied:
        assert point is None


# ------------------------------------------------------------------ regions

SIGMA0, SIGMA = 1.1, 1.2247448713915889


def test_classify_region_examples(std_coeffs, satisfied_weight):
    red_p = std_coeffs.reduced_plus

    def classify(tau, xi):
        freq = cl.TangentialFrequency(tau, [xi])
        return cl.classify_region(red_p, satisfied_weight, freq, SIGMA0, SIGMA)

    assert classify(1.0, 0.5) is RegionLabel.GAMMA_ONLY
    assert classify(1.0, 10.0) is RegionLabel.TILDE_ONLY
    assert classify(7.5, 10.0) is RegionLabel.BOTH


def test_classify_region_validates_sigmas(std_coeffs, satisfied_weight):
    freq = cl.TangentialFrequency(1.0, [1.0])
    with pytest.raises(cl.ValidationError):
        cl.classify_region(std_coeffs.reduced_plus, satisfied_weight, freq,
                           1.3, 1.2)


def test_region_cover_and_ellipticity(std_coeffs, satisfied_weight):
    """No cover failures above tau_2, and on single-cone samples the
    designated factor is elliptic with a positive fitted constant."""
    red_p = std_coeffs.reduced_plus
    red_m = std_coeffs.reduced_minus
    w = satisfied_weight
    gamma_margin, tilde_margin = np.inf, np.inf
    for tau in np.linspace(10.0, 100.0, 40):
        for xi_abs in np.linspace(0.5, 100.0, 60):
            freq = cl.TangentialFrequency(tau, [xi_abs])
            label = cl.classify_region(red_p, w, freq, SIGMA0, SIGMA)
            f_p = tau * w.alpha_plus - red_p.m(freq.xi)
            f_m = tau * w.alpha_minus - red_m.m(freq.xi)
            if label is RegionLabel.GAMMA_ONLY and xi_abs >= 2.0:
                gamma_margin = min(gamma_margin, f_p / freq.lam)
            if label is RegionLabel.TILDE_ONLY:
                tilde_margin = min(tilde_margin, -f_m / freq.lam)
    assert gamma_margin > 0
    assert tilde_margin > 0


# ------------------------------------------------------------ subellipticity

def test_bracket_example(std_coeffs):
    red = cl.reduce_coefficients(np.eye(2))
    w = cl.WeightSpec(3.0, 1.0, 1.0)
    freq = cl.TangentialFrequency(2.0, [0.5])
    rep = cl.subellipticity_report(red, w, freq, xi_n=1.0, x_n=0.0, delta=0.1)
    assert rep.bracket == pytest.approx(148.0)


def test_bracket_beta_zero(std_coeffs):
    w = cl.WeightSpec(3.0, 1.0, 0.0)
    freq = cl.TangentialFrequency(2.0, [1.0])
    rep = cl.subellipticity_report(std_coeffs.reduced_plus, w, freq,
                                   xi_n=0.0, x_n=0.0, delta=0.5)
    assert rep.factor_bracket == 0.0
    assert not rep.lemma_holds


def test_bracket_positive_on_char_set(std_coeffs):
    """On q2 = q1 = 0 with beta > 0 the bracket is strictly positive."""
    red = std_coeffs.reduced_plus
    w = cl.WeightSpec(3.0, 1.0, 2.0)
    xi = np.array([1.0])
    tau = red.m(xi) / w.alpha_plus  # f = 0 at x_n = 0
    freq = cl.TangentialFrequency(tau, xi)
    rep = cl.subellipticity_report(red, w, freq, xi_n=-red.s(xi), x_n=0.0,
                                   delta=0.1)
    assert rep.on_char_set
    assert rep.bracket > 0


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_bracket_closed_form_vs_fd(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    red = cl.reduce_coefficients(random_spd(n, rng))
    w = cl.WeightSpec(rng.uniform(0.3, 4), rng.uniform(0.3, 4), rng.uniform(0.1, 4))
    xi = rng.standard_normal(n - 1) * 3
    freq = cl.TangentialFrequency(rng.uniform(0.5, 20), xi)
    xi_n = rng.normal() * 3
    x_n = rng.normal() * 0.2
    rep = cl.subellipticity_report(red, w, freq, xi_n=xi_n, x_n=x_n, delta=0.1)
    g = red.g
    t = red.t
    tau = freq.tau

    def q2(xn, xin):
        phip = w.alpha_plus + w.beta * xn
        return (xin + t @ xi) ** 2 + xi @ g @ xi - (tau * phip) ** 2

    def q1(xn, xin):
        return tau * (w.alpha_plus + w.beta * xn) * (xin + t @ xi)

    h = 1e-6
    fd = ((q2(x_n, xi_n + h) - q2(x_n, xi_n - h)) / (2 * h)
          * (q1(x_n + h, xi_n) - q1(x_n - h, xi_n)) / (2 * h)
          - (q2(x_n + h, xi_n) - q2(x_n - h, xi_n)) / (2 * h)
          * (q1(x_n, xi_n + h) - q1(x_n, xi_n - h)) / (2 * h))
    assert fd == pytest.approx(rep.bracket, rel=1e-6, abs=1e-9)


# --------------------------------------------------------------- convexified

def test_convexified_zero_perturbation(std_coeffs):
    w = cl.WeightSpec(3.0, 1.0, 1.0)
    freq = cl.TangentialFrequency(1.0, [2.0])
    rep = cl.convexified_symbols(std_coeffs.reduced_plus, w, [0.0], 0.0,
                                 freq, 0.0, sigma0=SIGMA0, sigma=SIGMA)
    m = std_coeffs.reduced_plus.m(freq.xi)
    assert rep.frak_m.imag == pytest.approx(0.0, abs=1e-14)
    assert rep.frak_m.real == pytest.approx(m, rel=1e-14)
    assert rep.smooth_root
    assert rep.realpart_bound_ok
    assert rep.frak_e == pytest.approx(freq.tau * 3.0 + m)
    assert rep.frak_f == pytest.approx(freq.tau * 3.0 - m)


def test_convexified_boundary_equality_isotropic():
    red = cl.reduce_coefficients(np.eye(2))  # lambda0 = lambda1 = 1
    w = cl.WeightSpec(1.0, 1.0, 1.0)
    freq = cl.TangentialFrequency(1.0, [2.0])
    rep = cl.convexified_symbols(red, w, [1.0], 0.0, freq, 0.0,
                                 sigma0=1.1, sigma=1.2)
    # tau |kappa'| = lambda0 |xi| / (2 lambda1) exactly: threshold case
    assert rep.smooth_root
    assert (rep.frak_m ** 2).real == pytest.approx(0.75 * 4.0, rel=1e-14)
    assert rep.realpart_bound_ok


def test_convexified_nonsmooth_root():
    red = cl.reduce_coefficients(np.eye(2))
    w = cl.WeightSpec(1.0, 1.0, 1.0)
    freq = cl.TangentialFrequency(1.0, [2.0])
    rep = cl.convexified_symbols(red, w, [1.5], 0.0, freq, 0.0,
                                 sigma0=1.1, sigma=1.2)
    assert not rep.smooth_root


def test_convexified_principal_branch(std_coeffs):
    rng = np.random.default_rng(0)
    for _ in range(200):
        red = cl.reduce_coefficients(random_spd(3, rng))
        freq = cl.TangentialFrequency(rng.uniform(0.5, 20),
                                      rng.standard_normal(2) * 4)
        rep = cl.convexified_symbols(red, cl.WeightSpec(1.0, 1.0, 1.0),
                                     rng.standard_normal(2), rng.normal(),
                                     freq, 0.0, sigma0=1.1, sigma=1.3)
        assert rep.frak_m.real >= 0.0
        assert rep.zone in (ConvexZone.ZONE1, ConvexZone.ZONE2, ConvexZone.ZONE3)
        if rep.smooth_root:
            assert rep.realpart_bound_ok


def test_convexified_zone_cover_random():
    """Every random point lands in a zone (the three ranges overlap)."""
    rng = np.random.default_rng(42)
    red = cl.reduce_coefficients(np.diag([4.0, 1.0]))
    w = cl.WeightSpec(1.0, 1.0, 1.0)
    for _ in range(500):
        xi = rng.standard_normal(1) * rng.uniform(0.1, 30)
        freq = cl.TangentialFrequency(rng.uniform(0.05, 50), xi)
        cl.convexified_symbols(red, w, rng.standard_normal(1) * 0.3,
                               0.0, freq, 0.0, sigma0=1.05, sigma=1.4)
