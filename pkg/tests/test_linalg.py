import numpy as np
import pytest
import sympy

from bianchi_oms import linalg, padic
from bianchi_oms.errors import PrecisionLoss
from bianchi_oms.padic import make_local_field

SPLIT = make_local_field(4, 5, 12)
INERT = make_local_field(4, 3, 12)


def _int_matrix(rng, n, m, rank=None, size=20):
    if rank is None:
        return rng.integers(-size, size, size=(n, m))
    return rng.integers(-size, size, size=(n, rank)) @ rng.integers(-size, size, size=(rank, m))


def _embed(A, fld):
    out = padic.zeros(A.shape, fld)
    out[0] = np.array(A, dtype=object) % fld.modulus
    return out


@pytest.mark.parametrize("fld", [SPLIT, INERT])
def test_charpoly_matches_sympy(fld):
    rng = np.random.default_rng(0)
    for n in (1, 2, 4, 6):
        A = _int_matrix(rng, n, n)
        cp = linalg.charpoly(_embed(A, fld), fld)
        x = sympy.Symbol("x")
        oracle = sympy.Poly(sympy.Matrix(A.tolist()).charpoly(x).as_expr(), x).all_coeffs()
        assert [c.coeffs[0] for c in cp] == [int(c) % fld.modulus for c in oracle]
        assert all(c.coeffs[1:] == (0,) * (fld.d - 1) for c in cp)


@pytest.mark.parametrize("fld", [SPLIT, INERT])
def test_inverse(fld):
    rng = np.random.default_rng(1)
    done = 0
    while done < 10:
        A = _int_matrix(rng, 5, 5)
        if int(round(np.linalg.det(A))) % fld.p == 0:
            continue
        done += 1
        Ai = linalg.inverse(_embed(A, fld), fld)
        assert (padic.matmul(_embed(A, fld), Ai, fld) == linalg.identity(5, fld)).all()


def test_singular_inverse_raises():
    A = np.array([[1, 2], [2, 4]])
    with pytest.raises(PrecisionLoss):
        linalg.inverse(_embed(A, SPLIT), SPLIT)


@pytest.mark.parametrize("fld", [SPLIT, INERT])
def test_kernel_rank(fld):
    rng = np.random.default_rng(2)
    for rank in (1, 3, 5):
        A = _int_matrix(rng, 7, 6, rank=rank, size=6)
        qrank = sympy.Matrix(A.tolist()).rank()
        Z, prec = linalg.kernel(_embed(A, fld), fld, with_precision=True)
        assert Z.shape[2] == 6 - qrank
        img = padic.matmul(_embed(A, fld), Z, fld)
        assert (padic.vpi(img, fld) >= prec).all()


def test_roots_of_split_polynomial():
    fld = SPLIT
    # (x - 2)(x - 3)(x + 1) with roots distinct mod 5
    coeffs = [fld.from_int(c) for c in (1, -4, 1, 6)]
    found = sorted(r.value.balanced()[0] for r in linalg.roots(coeffs, fld))
    assert found == [-1, 2, 3]


def test_roots_with_close_pair():
    fld = SPLIT
    # roots 1 and 26 agree mod 25; each returned root must match one of them
    # to its certified precision
    coeffs = [fld.one, fld.from_int(-27), fld.from_int(26)]
    rts = linalg.roots(coeffs, fld)
    assert sum(r.multiplicity for r in rts) == 2
    for r in rts:
        assert any((r.value.lift_int() - t) % 5 ** r.precision == 0 for t in (1, 26))
