from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bianchi_oms import padic
from bianchi_oms.errors import DenominatorAtP, RootOfUnityNotInL
from bianchi_oms.padic import AtLeast, Splitting, binomial_mod, make_local_field, sigma_embed, valuation
from bianchi_oms.quadratic import QuadraticField

FIELDS = [(4, 3), (4, 5), (4, 2), (3, 7), (3, 5), (8, 3), (7, 7)]


def _is_square_mod(a, p):
    return any((x * x - a) % p == 0 for x in range(p))


@pytest.mark.parametrize("D,p,kind,e", [(4, 3, Splitting.INERT, 1), (4, 5, Splitting.SPLIT, 1),
                                        (4, 2, Splitting.RAMIFIED, 2)])
def test_splitting_types(D, p, kind, e):
    fld = make_local_field(D, p, 10)
    assert fld.splitting is kind
    assert fld.e == e


@pytest.mark.parametrize("D,p", [(4, 3), (4, 5), (4, 7), (4, 13), (8, 3), (8, 5), (3, 7), (3, 5), (11, 3), (7, 11)])
def test_splitting_matches_residue_symbol(D, p):
    # odd p not dividing D: split iff -D is a square mod p
    fld = make_local_field(D, p, 4)
    expect = Splitting.SPLIT if _is_square_mod(-D, p) else Splitting.INERT
    assert fld.splitting is expect


def test_bad_inputs():
    with pytest.raises(ValueError):
        make_local_field(4, 9, 5)
    with pytest.raises(ValueError):
        make_local_field(4, 3, 0)


def test_sigma_of_one():
    for D, p in FIELDS:
        fld = make_local_field(D, p, 6)
        s1, s2 = sigma_embed(1, fld)
        assert s1 == fld.one and s2 == fld.one


def test_split_sigma_of_omega_are_the_two_roots():
    K = QuadraticField(4)
    fld = make_local_field(4, 5, 6)
    s1, s2 = sigma_embed(K.omega, fld)
    # brute-force roots of x^2 + 1 mod 5, then compare residues
    roots = sorted(x for x in range(5) if (x * x + 1) % 5 == 0)
    assert sorted([s1.coeffs[0] % 5, s2.coeffs[0] % 5]) == roots
    P = fld.modulus
    for s in (s1, s2):
        assert (s.coeffs[0] ** 2 + 1) % P == 0
    assert s1 != s2


def test_delta_norm_identity():
    K = QuadraticField(4)
    fld = make_local_field(4, 3, 10)
    s1, s2 = sigma_embed(K.delta, fld)
    # delta = 2i, so sigma1 * sigma2 = N(delta) = 4 = D
    assert s1 * s2 == fld.from_int(4)
    assert s1 * s1 == fld.from_int(-4)


def test_denominator_at_p():
    fld = make_local_field(4, 3, 5)
    with pytest.raises(DenominatorAtP):
        sigma_embed((Fraction(1, 3), 0), fld)
    s1, _ = sigma_embed((Fraction(1, 2), 0), fld)
    assert s1 * 2 == fld.one


def test_valuation_examples():
    fld = make_local_field(4, 3, 10)
    assert valuation(fld.from_int(3)) == 1
    assert valuation(fld.one) == 0
    assert valuation(fld.from_int(18)) == 2
    assert isinstance(valuation(fld.zero), AtLeast)
    ram = make_local_field(4, 2, 10)
    assert valuation(ram.uniformizer) == Fraction(1, 2)
    assert valuation(ram.from_int(2)) == 1


def test_binomial_mod():
    fld = make_local_field(4, 3, 10)
    assert binomial_mod(5, 0, fld) == fld.one
    assert binomial_mod(4, 2, fld) == fld.from_int(6)
    b = binomial_mod(3, 1, fld)
    assert b == fld.from_int(3) and valuation(b) == 1
    with pytest.raises(ValueError):
        binomial_mod(2, 3, fld)


def test_roots_of_unity():
    fld = make_local_field(4, 3, 8)
    z = padic.primitive_root_of_unity(8, fld)
    assert z ** 8 == fld.one and z ** 4 != fld.one
    with pytest.raises(RootOfUnityNotInL):
        padic.primitive_root_of_unity(5, fld)


# ---------------------------------------------------------------------------
# properties

fields = st.sampled_from(FIELDS)
coord = st.integers(-10**6, 10**6)


def _elem(fld, xs):
    return fld.element(*xs[: fld.d])


@settings(max_examples=150, deadline=None)
@given(fields, st.lists(coord, min_size=6, max_size=6))
def test_ring_axioms(Dp, xs):
    fld = make_local_field(*Dp, 6)
    x, y, z = _elem(fld, xs[0:2]), _elem(fld, xs[2:4]), _elem(fld, xs[4:6])
    assert (x + y) + z == x + (y + z)
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x * y == y * x
    assert x - x == fld.zero
    if x.is_unit():
        assert x * x.inverse() == fld.one


@settings(max_examples=150, deadline=None)
@given(fields, st.lists(coord, min_size=4, max_size=4), st.integers(0, 3), st.integers(0, 3))
def test_valuation_is_ultrametric(Dp, xs, a, b):
    fld = make_local_field(*Dp, 8)
    pi = fld.uniformizer
    x = _elem(fld, xs[0:2]) * pi ** a
    y = _elem(fld, xs[2:4]) * pi ** b
    vx, vy, vxy = valuation(x), valuation(y), valuation(x * y)
    if isinstance(vx, AtLeast) or isinstance(vy, AtLeast):
        return
    if not isinstance(vxy, AtLeast):
        assert vxy == vx + vy
    vs = valuation(x + y)
    if not isinstance(vs, AtLeast):
        assert vs >= min(vx, vy)


@settings(max_examples=150, deadline=None)
@given(fields, st.lists(st.integers(-1000, 1000), min_size=4, max_size=4))
def test_sigma_is_a_ring_homomorphism(Dp, xs):
    D, p = Dp
    K = QuadraticField(D)
    fld = make_local_field(D, p, 7)
    a, b = K(xs[0], xs[1]), K(xs[2], xs[3])
    sa, sb = sigma_embed(a, fld), sigma_embed(b, fld)
    sab, spl = sigma_embed(a * b, fld), sigma_embed(a + b, fld)
    for i in range(2):
        assert sab[i] == sa[i] * sb[i]
        assert spl[i] == sa[i] + sb[i]
    if fld.splitting is not Splitting.SPLIT:
        assert sa[1] == sa[0].conj()


@settings(max_examples=60, deadline=None)
@given(fields, st.lists(coord, min_size=2, max_size=2), st.integers(0, 4))
def test_divide_by_pi_power_inverts_multiplication(Dp, xs, s):
    fld = make_local_field(*Dp, 8)
    x = _elem(fld, xs)
    y = x * fld.uniformizer ** s
    back = padic.divide_by_pi_power(y.array(), s, fld)
    # storage is modulo p^M, so a ramified division by pi^s is only known
    # modulo p^(M - ceil(s/2)), i.e. 2 ceil(s/2) pi-digits are lost
    loss = s if fld.e == 1 else 2 * ((s + 1) // 2)
    diff = padic.LocalElement.from_array(back, fld) - x
    assert diff.vpi() >= fld.cap - loss


def test_array_vpi_matches_scalar():
    fld = make_local_field(4, 3, 6)
    rng = np.random.default_rng(3)
    arr = rng.integers(0, fld.modulus, size=(2, 40)).astype(fld.dtype)
    arr[:, :10] = 0
    arr[:, 10:20] = padic.mul(arr[:, 10:20], padic.scalar_array(fld.from_int(9), (1,)), fld)
    got = padic.vpi(arr, fld)
    for j in range(40):
        assert got[j] == padic.LocalElement.from_array(arr[:, j], fld).vpi()
