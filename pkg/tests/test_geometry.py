import random

import pytest
from hypothesis import given, settings, strategies as st

from bianchi_oms import geometry as geo
from bianchi_oms.errors import NotEuclidean
from bianchi_oms.geometry import Cusp, Divisor, build_level, decompose_path, divisor_of_paths, reduce_to_rep
from bianchi_oms.quadratic import Ideal, QuadraticField
from bianchi_oms.symbols import random_sl2

EUCLIDEAN = [4, 8, 3, 7, 11]


@pytest.fixture(scope="module")
def Zi():
    return QuadraticField(4)


def test_quadint_matches_complex_arithmetic():
    rng = random.Random(0)
    for D in EUCLIDEAN:
        K = QuadraticField(D)
        for _ in range(50):
            a = K(rng.randint(-30, 30), rng.randint(-30, 30))
            b = K(rng.randint(-30, 30), rng.randint(-30, 30))
            assert abs(complex(a * b) - complex(a) * complex(b)) < 1e-9
            assert abs(complex(a + b) - (complex(a) + complex(b))) < 1e-9
            assert a.norm() == round(abs(complex(a)) ** 2)


def test_delta_squares_to_minus_D():
    for D in EUCLIDEAN:
        K = QuadraticField(D)
        assert K.delta * K.delta == K(-D)
        assert complex(K.delta).imag > 0


def test_euclid_step_example(Zi):
    a, b = Zi(3, 2), Zi(1, 1)
    q, r = Zi.euclid_step(a, b)
    assert a == q * b + r and r.norm() < 2
    # exhaustive oracle: the best norm among nearby quotients
    best = min((a - Zi(x, y) * b).norm() for x in range(-5, 6) for y in range(-5, 6))
    assert r.norm() == best


def test_euclid_step_trivial_cases(Zi):
    assert Zi.euclid_step(Zi(6, 2), Zi(3, 1)) == (Zi(2), Zi.zero)
    assert Zi.euclid_step(Zi.zero, Zi(1, 1)) == (Zi.zero, Zi.zero)


def test_not_euclidean():
    K = QuadraticField(20)
    with pytest.raises(NotEuclidean):
        K.euclid_step(K(3), K(2))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(EUCLIDEAN), st.integers(-200, 200), st.integers(-200, 200),
       st.integers(-50, 50), st.integers(-50, 50))
def test_euclid_step_reduces_norm(D, ax, ay, bx, by):
    K = QuadraticField(D)
    a, b = K(ax, ay), K(bx, by)
    if not b:
        return
    q, r = K.euclid_step(a, b)
    assert a == q * b + r
    assert r.norm() < b.norm()
    g, s, u = K.xgcd(a, b)
    assert s * a + u * b == g
    assert g.divides(a) and g.divides(b)


def test_decompose_examples(Zi):
    zero, oo = Cusp.zero(Zi), Cusp.infinity(Zi)
    paths = decompose_path(zero, oo)
    assert paths == [geo.identity(Zi)]
    c = Cusp.from_element(Zi(2, 1))
    assert decompose_path(c, c) == []
    r = Cusp(Zi.one, Zi(1, 1))
    paths = decompose_path(r, oo)
    assert divisor_of_paths(paths) == Divisor.path(r, oo)
    for g in paths:
        assert geo.det(g) == Zi.one


def _random_cusp(K, rng, size=60):
    while True:
        a = K(rng.randint(-size, size), rng.randint(-size, size))
        c = K(rng.randint(-size, size), rng.randint(-size, size))
        if a or c:
            return Cusp(a, c)


@pytest.mark.parametrize("D", EUCLIDEAN)
def test_path_telescoping_and_determinism(D):
    K = QuadraticField(D)
    rng = random.Random(D)
    for _ in range(100):
        r, s = _random_cusp(K, rng), _random_cusp(K, rng)
        paths = decompose_path(r, s)
        assert divisor_of_paths(paths) == Divisor.path(r, s)
        assert decompose_path(r, s) == paths
        assert all(geo.det(g) == K.one for g in paths)


def test_decompose_divisor(Zi):
    rng = random.Random(5)
    cusps = [_random_cusp(Zi, rng) for _ in range(4)]
    D = Divisor([(cusps[0], 2), (cusps[1], -1), (cusps[2], 3), (cusps[3], -4)])
    total = Divisor()
    for n, g in geo.decompose_divisor(D):
        total = total + Divisor.of_matrix(g).scale(n)
    assert total == D
    with pytest.raises(ValueError):
        geo.decompose_divisor(Divisor([(cusps[0], 1)]))


def _coprime_pairs(K, gen):
    """Brute force: pairs (c, d) mod n with x c + y d = 1 mod n solvable."""
    I = Ideal(gen)
    res = I.residues()
    count = 0
    for c in res:
        for d in res:
            if any(I.contains(x * c + y * d - K.one) for x in res for y in res):
                count += 1
    return count


@pytest.mark.parametrize("gen", [(1, 0), (1, 1), (2, 1), (3, 0), (2, 0)])
def test_level_index(Zi, gen):
    g = Zi(*gen)
    lvl = build_level(g)
    assert len(lvl) == _coprime_pairs(Zi, g)
    # representatives have distinct bottom rows mod n
    assert len({lvl.key_of(r[2], r[3]) for r in lvl.reps}) == len(lvl)
    for rep in lvl.reps:
        gam, i = reduce_to_rep(rep, lvl)
        assert gam == geo.identity(Zi) and lvl.reps[i] == rep


@pytest.mark.parametrize("D,gen", [(4, (3, 0)), (4, (5, 0)), (3, (2, 0)), (8, (3, 0))])
def test_reduce_to_rep_random(D, gen):
    K = QuadraticField(D)
    lvl = build_level(K(*gen))
    rng = random.Random(17)
    for _ in range(500):
        g = random_sl2(K, rng, 20)
        gam, i = reduce_to_rep(g, lvl)
        assert geo.mat_mul(gam, lvl.reps[i]) == g
        assert geo.in_gamma1(gam, lvl.level)


def test_reduce_recovers_known_gamma(Zi):
    lvl = build_level(Zi(3))
    rng = random.Random(2)
    found = 0
    while found < 30:
        gam0 = random_sl2(Zi, rng, 15)
        if not geo.in_gamma1(gam0, lvl.level):
            continue
        found += 1
        j = rng.randrange(len(lvl))
        gam, i = reduce_to_rep(geo.mat_mul(gam0, lvl.reps[j]), lvl)
        assert (gam, i) == (gam0, j)


def test_level_json_round_trip(Zi):
    lvl = build_level(Zi(2, 1))
    back = geo.LevelData.from_json(lvl.to_json())
    assert back.reps == lvl.reps and back.lookup == lvl.lookup
