import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bianchi_oms.analytic import (BianchiCoefficients, GrossChar, L_series, bessel_K, c_qr_integral,
                                  characters_of_conductor, eta_convert, fourier_component, gamma_factor,
                                  gauss_identity_residuals, gauss_sum, integral_formula_check, lambda_report,
                                  mellin_of_components, mellin_of_components_exact, standard_integral,
                                  standard_integral_closed, synthetic_coefficients)
from bianchi_oms.errors import (ConductorMismatch, CutoffInsufficient, Divergent, DomainError,
                                NotConvergent)
from bianchi_oms.quadratic import QuadraticField

K = QuadraticField(4)
CONDUCTORS = [K.one, K(2, 1), K(3, 0)]
XS = np.geomspace(1e-3, 50, 40)


@pytest.fixture(scope="module")
def synth():
    return synthetic_coefficients(K)


# Bessel layer

@pytest.mark.parametrize("n", range(6))
def test_bessel_against_mpmath(n):
    for x in XS:
        ref = float(mpmath.besselk(n, x))
        assert abs(bessel_K(n, x) - ref) <= 1e-10 * ref


def test_bessel_symmetry_and_domain():
    for n in range(6):
        assert np.array_equal(bessel_K(-n, XS), bessel_K(n, XS))
    with pytest.raises(DomainError):
        bessel_K(0, 0.0)
    with pytest.raises(DomainError):
        bessel_K(1, np.array([1.0, -2.0]))


def _asymptotic_series(n, x, terms):
    mu, a, total = 4 * n * n, 1.0, 1.0
    for j in range(1, terms):
        a *= (mu - (2 * j - 1) ** 2) / (j * 8 * x)
        total += a
    return total


def test_bessel_large_x_ratio():
    x = 50.0
    for n in range(6):
        ratio = bessel_K(n, x) / (math.sqrt(math.pi / (2 * x)) * math.exp(-x))
        # leading term alone: off by the first correction (4n^2 - 1)/(8x)
        assert abs(ratio - 1 - (4 * n * n - 1) / (8 * x)) < 0.03
        assert abs(ratio / _asymptotic_series(n, x, 4) - 1) < 1e-3
    lead = bessel_K(0, x) / (math.sqrt(math.pi / (2 * x)) * math.exp(-x))
    assert 2.4e-3 < 1 - lead < 2.6e-3
    for far in (1e3, 1e4):
        ratio = float(mpmath.besselk(0, far) / (mpmath.sqrt(mpmath.pi / (2 * far)) * mpmath.exp(-far)))
        assert abs(ratio - 1) < 1e-3


def ode_residual(n, x):
    """Relative residual of x^2 K'' + x K' - (x^2 + n^2) K with five-point differences."""
    h = 5e-3 * min(1.0, x / (n + 1))
    f = [bessel_K(n, x + j * h) for j in (-2, -1, 0, 1, 2)]
    d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
    d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    return abs(d2 + d1 / x - (1 + n * n / x ** 2) * f[2]) / abs(f[2])


@pytest.mark.parametrize("n", range(6))
def test_bessel_ode_residual(n):
    for x in np.geomspace(0.1, 50, 40):
        assert ode_residual(n, x) <= 1e-6


def test_standard_integral():
    lam = 4 * math.pi
    assert abs(standard_integral(2, 0, lam) / standard_integral_closed(2, 0, lam) - 1) <= 1e-8
    for j in range(1, 8):
        for m in range(-3, 4):
            if j <= abs(m):
                with pytest.raises(Divergent):
                    standard_integral(j, m, lam)
                continue
            q, c = standard_integral(j, m, lam), standard_integral_closed(j, m, lam)
            assert abs(q / c - 1) <= 1e-8
            assert standard_integral(j, -m, lam) == q
            assert abs(standard_integral(j, m, 2.5) - 2.5 ** (-j) * standard_integral(j, m, 1.0)) <= 1e-10 * abs(q)
    with pytest.raises(DomainError):
        standard_integral_closed(3, 0, -1.0)


def test_standard_integral_mpmath_oracle():
    ref = float(mpmath.quad(lambda t: t ** 3 * mpmath.besselk(2, 3 * t), [0, 1, mpmath.inf]))
    assert abs(standard_integral(4, 2, 3.0) / ref - 1) <= 1e-8


# Fourier components

def test_fourier_single_term():
    g = K(2, 1)
    co = BianchiCoefficients.single(K, g, 2.0)
    k, n, z, t = 2, 1, 0.3 - 0.1j, 0.2
    expect = 0j
    for u in K.units:
        alpha = complex(u * g) / K.delta_complex
        expect += (2.0 * (alpha / (1j * abs(alpha))) ** (k + 1 - n) * float(mpmath.besselk(n - k - 1, 4 * math.pi * abs(alpha) * t))
                   * cmath.exp(2j * math.pi * 2 * (alpha * z).real))
    assert abs(fourier_component(co, n, z, t, k) - expect) <= 1e-12 * abs(expect)


def test_fourier_decay_and_cutoff(synth):
    assert abs(fourier_component(synth, 1, 0.1, 20.0, 0)) < 1e-50
    with pytest.raises(DomainError):
        fourier_component(synth, 1, 0.1, 0.0, 0)
    grown = BianchiCoefficients(K, synth.values, 60, growth=(1.0, 1.0))
    with pytest.raises(CutoffInsufficient) as exc:
        fourier_component(grown, 1, 0.1, 0.01, 0)
    assert exc.value.details["required_norm"] > 60
    # |c(m)| <= N(m) holds for the synthetic family, so the tail bound applies
    small = BianchiCoefficients(K, synth.values, 60, growth=(1.0, 1.0))
    big = BianchiCoefficients(K, synth.values, 120, growth=(1.0, 1.0))
    head, tail = fourier_component(small, 1, 0.2, 0.8, 0, return_tail=True)
    assert 0 < tail <= 1e-12 * abs(head)
    assert abs(fourier_component(big, 1, 0.2, 0.8, 0) - head) <= tail


# Gauss sums

@pytest.mark.parametrize("f", CONDUCTORS[1:], ids=str)
def test_gauss_identities(f):
    chars = characters_of_conductor(K, f)
    assert len(chars) == len(residue_chars(f))
    for psi in chars:
        rep = gauss_identity_residuals(psi)
        assert rep["identity_i"] <= 1e-12
        assert rep["identity_ii"] <= 1e-12
        if rep["primitive"]:
            assert rep["vanishing"] <= 1e-12
            assert abs(abs(rep["tau"]) ** 2 - psi.conductor_norm) <= 1e-10


def residue_chars(f):
    from bianchi_oms.analytic import residue_group
    return residue_group(K, f).characters()


def test_gauss_sum_imprimitive_does_not_vanish():
    triv = characters_of_conductor(K, K(2, 1))[0]
    assert not triv.is_primitive()
    assert gauss_identity_residuals(triv)["vanishing"] > 1


def test_gauss_conductor_one():
    assert abs(gauss_sum(GrossChar.trivial(K)) - 1) < 1e-15
    psi = GrossChar(K, K.one, (), (1, 1))
    assert abs(gauss_sum(psi) - 1 / psi.infinity(K.delta_complex)) < 1e-15


def test_unit_compatibility():
    with pytest.raises(ConductorMismatch):
        GrossChar(K, K.one, (), (1, 0))
    GrossChar(K, K.one, (), (2, 2))


# Dirichlet series

def test_L_series_basics(synth):
    one = BianchiCoefficients.single(K, K.one)
    assert L_series(one, None, 2.7) == 1
    other = BianchiCoefficients.synthetic(K, lambda g: math.cos(g.norm()), 100)
    comb = BianchiCoefficients.synthetic(K, lambda g: 2 * synth(g) - 3j * other(g), 300)
    psi = characters_of_conductor(K, K(2, 1), primitive_only=True)[0]
    lhs = L_series(comb, psi, 3)
    rhs = 2 * L_series(synth, psi, 3) - 3j * L_series(other, psi, 3)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    small = BianchiCoefficients.synthetic(K, lambda g: g.norm() ** 0.5, 50)
    assert abs(L_series(small, psi, 2, by="elements") - L_series(small, psi, 2)) <= 1e-13


def test_L_series_counts_elements_per_ideal():
    # every nonzero element of norm <= 50 lies over exactly one generator, w elements per ideal
    gens = K.ideal_generators_up_to_norm(50)
    elems = list(K.elements_up_to_norm(50))
    assert len(elems) == K.w * len(gens)
    assert {K.canonical(z).coords for z in elems} == {g.coords for g in gens}


def test_L_series_convergence():
    co = BianchiCoefficients(K, {}, 10, growth=(1.0, 2.0))
    with pytest.raises(NotConvergent):
        L_series(co, None, 3)
    val, tail = L_series(co, None, 4, return_tail=True)
    assert val == 0 and 0 < tail < math.inf


# integral formula

@pytest.mark.parametrize("k", [0, 2])
def test_integral_formula_grid(synth, k):
    for f in CONDUCTORS:
        for s in (3, 4):
            for psi in characters_of_conductor(K, f, primitive_only=True):
                for n in range(2 * k + 3):
                    u = (k + 1 - n) / 2
                    try:
                        chi = GrossChar(K, f, psi.chi, (-u, u))
                    except ConductorMismatch:
                        continue
                    rep = integral_formula_check(synth, chi, s, k)
                    assert rep.n == n
                    assert rep.discrepancy <= 1e-6, (str(f), psi.chi, n, s)


def test_integral_formula_single_ideal_exact():
    co = BianchiCoefficients.single(K, K(1, 1), 1.5)
    for psi in characters_of_conductor(K, K(2, 1), primitive_only=True):
        rep = integral_formula_check(co, psi, 3, 2, exact=True)
        assert rep.discrepancy <= 1e-12


def test_integral_formula_zero_and_imprimitive(synth):
    zero = BianchiCoefficients(K, {}, 50)
    rep = integral_formula_check(zero, GrossChar.trivial(K), 3, 0)
    assert rep.lhs == 0 and rep.rhs == 0
    triv = characters_of_conductor(K, K(2, 1))[0]
    with pytest.raises(ConductorMismatch):
        integral_formula_check(synth, triv, 3, 0)


def test_mellin_paths_agree(synth):
    xs = [0.1 + 0.2j, -0.3j, 0.45]
    for n, power in ((0, 3), (1, 2), (2, 5)):
        a = mellin_of_components(synth, xs, n, 1, power)
        b = mellin_of_components_exact(synth, xs, n, 1, power)
        assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(b))


# c_{q,r}

def test_cqr(synth):
    zero = BianchiCoefficients(K, {}, 50)
    assert c_qr_integral(zero, 0.2, 1, 0, 2) == 0
    single = BianchiCoefficients.single(K, K(2, -1), 1.0)
    for q in range(3):
        for r in range(3):
            a = c_qr_integral(single, 0.25 + 0.1j, q, r, 2)
            b = c_qr_integral(single, 0.25 + 0.1j, q, r, 2, exact=True)
            assert abs(a - b) <= 1e-8 * abs(b)
    conj = synth.conjugate_ideals()
    x = 0.3 + 0.2j
    for q in range(3):
        for r in range(3):
            lhs = c_qr_integral(synth, x, r, q, 2)
            rhs = (-1) ** (q + r) * c_qr_integral(conj, -x.conjugate(), q, r, 2)
            assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), 1e-12)
    with pytest.raises(DomainError):
        c_qr_integral(synth, x, 3, 0, 2)


# normalised L-values

def test_lambda_report(synth):
    for f in CONDUCTORS:
        for t in ((0, 0), (1, 1), (2, 0), (0, 2), (1, 0), (2, 1), (2, 2)):
            for psi in characters_of_conductor(K, f, t, primitive_only=True):
                rep = lambda_report(synth, psi, 2)
                assert rep["discrepancy"] <= 1e-8
                assert rep["shift_vs_twist"] <= 1e-12
                assert rep["tau_rescaling"] <= 1e-10 * max(1.0, abs(gauss_sum(psi.inverse())))


def test_gamma_factor():
    assert abs(gamma_factor(0, 0) - 1 / (2j * math.pi) ** 2) < 1e-18
    assert abs(gamma_factor(2, 1, 1) - 2 * 1 / (2j * math.pi) ** 5) < 1e-18


# eta

def test_eta_convert():
    a = np.arange(9, dtype=np.int64).reshape(3, 3) + 1
    out = eta_convert(a, 2)
    assert out[1, 1] == a[1, 1] / 4
    assert out[2, 2] == a[0, 0] and out[0, 0] == a[2, 2]
    assert out[2, 1] * 2 == a[0, 1]
    assert np.array_equal(eta_convert(out, 2, inverse=True), a)
    b = np.array([[5]])
    assert eta_convert(b, 0)[0, 0] == 5
    with pytest.raises(ValueError):
        eta_convert(a, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.lists(st.floats(-1e6, 1e6), min_size=25, max_size=25))
def test_eta_round_trip(k, xs):
    a = np.array(xs[:(k + 1) ** 2], dtype=float).reshape(k + 1, k + 1)
    back = eta_convert(eta_convert(a, k), k, inverse=True)
    assert np.allclose(back, a, rtol=1e-14, atol=1e-300)
