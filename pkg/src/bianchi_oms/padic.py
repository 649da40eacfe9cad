"""Finite-precision arithmetic in O_L, the ring of integers of the
completion of K at a prime above p.

Elements are stored modulo p^M.  In the split case L = Q_p and an element is
a single residue; otherwise O_L = Z_p[omega] and an element is a coefficient
pair with respect to {1, omega}.  Valuations are normalised so v(p) = 1;
internally they are counted in powers of the uniformiser ("pi-units", so
v = vpi / e).

Array helpers operate on integer arrays whose leading axis has length
``fld.d`` (1 or 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DenominatorAtP, RootOfUnityNotInL
from .quadratic import QuadInt, QuadraticField


class Splitting(str, Enum):
    SPLIT = "split"
    INERT = "inert"
    RAMIFIED = "ramified"


def is_prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, math.isqrt(p) + 1))


def _vp_int(x: int, p: int) -> int:
    if x == 0:
        raise ValueError("valuation of zero")
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _hensel_root(t: int, n: int, r: int, p: int, M: int) -> int:
    """Lift a simple root r of X^2 - tX + n mod p to Z/p^M."""
    P = p**M
    for _ in range(M.bit_length() + 2):
        f = (r * r - t * r + n) % P
        df = (2 * r - t) % P
        r = (r - f * pow(df, -1, P)) % P
    assert (r * r - t * r + n) % P == 0
    return r


@dataclass(frozen=True)
class AtLeast:
    """Valuation sentinel for elements that vanish to working precision."""

    bound: Fraction

    def __repr__(self):
        return f">={self.bound}"


@dataclass(frozen=True)
class LocalFieldDesc:
    """Local data at p: splitting type, generator and working precision."""

    D: int
    p: int
    M: int
    splitting: Splitting
    t: int
    n: int
    # split: Hensel root of X^2 - tX + n (the image of omega under sigma_1)
    # ramified: shift r with pi = omega - r Eisenstein; inert: unused
    root: int = 0

    @property
    def e(self) -> int:
        return 2 if self.splitting is Splitting.RAMIFIED else 1

    @property
    def d(self) -> int:
        return 1 if self.splitting is Splitting.SPLIT else 2

    @property
    def modulus(self) -> int:
        return self.p**self.M

    @property
    def residue_size(self) -> int:
        return self.p**2 if self.splitting is Splitting.INERT else self.p

    @property
    def cap(self) -> int:
        """Valuation of zero in pi-units."""
        return self.e * self.M

    @property
    def eisenstein(self) -> tuple[int, int]:
        """(a, b) with pi^2 + a*pi + b = 0 (ramified case)."""
        r = self.root
        return 2 * r - self.t, r * r - self.t * r + self.n

    @cached_property
    def field(self) -> QuadraticField:
        return QuadraticField(self.D)

    def with_precision(self, M: int) -> "LocalFieldDesc":
        root = self.root
        if self.splitting is Splitting.SPLIT:
            root = _hensel_root(self.t, self.n, root % self.p, self.p, M)
        return LocalFieldDesc(self.D, self.p, M, self.splitting, self.t, self.n, root)

    # scalar constructors -------------------------------------------------
    def element(self, *coeffs: int) -> "LocalElement":
        c = [int(x) % self.modulus for x in coeffs] + [0] * (self.d - len(coeffs))
        return LocalElement(tuple(c[: self.d]), self)

    def from_int(self, a: int) -> "LocalElement":
        return self.element(a)

    @cached_property
    def zero(self) -> "LocalElement":
        return self.element(0)

    @cached_property
    def one(self) -> "LocalElement":
        return self.element(1)

    @cached_property
    def uniformizer(self) -> "LocalElement":
        if self.splitting is Splitting.RAMIFIED:
            return self.element(-self.root, 1)
        return self.element(self.p)

    @cached_property
    def dtype(self):
        return np.int64 if self.modulus < 2**60 else object


def make_local_field(D: int, p: int, M: int) -> LocalFieldDesc:
    """Local data at p for K = Q(sqrt(-D)) with precision p^M."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if M < 1:
        raise ValueError("precision must be positive")
    K = QuadraticField(D)
    t, n = K.t, K.n
    if D % p == 0:
        for r in range(p * p):
            a, b = 2 * r - t, r * r - t * r + n
            if a % p == 0 and b % p == 0 and b % (p * p):
                return LocalFieldDesc(D, p, M, Splitting.RAMIFIED, t, n, r)
        raise AssertionError("no Eisenstein shift found")
    roots = [r for r in range(p) if (r * r - t * r + n) % p == 0]
    if not roots:
        return LocalFieldDesc(D, p, M, Splitting.INERT, t, n, 0)
    return LocalFieldDesc(D, p, M, Splitting.SPLIT, t, n, _hensel_root(t, n, roots[0], p, M))


# ---------------------------------------------------------------------------
# array arithmetic


def asarray(x, fld: LocalFieldDesc) -> np.ndarray:
    return np.asarray(x, dtype=fld.dtype) % fld.modulus


def zeros(shape, fld: LocalFieldDesc) -> np.ndarray:
    return np.zeros((fld.d, *shape), dtype=fld.dtype)


def scalar_array(x: "LocalElement", shape=()) -> np.ndarray:
    fld = x.fld
    out = zeros(shape, fld)
    for i, c in enumerate(x.coeffs):
        out[i] = c
    return out


def mul(x: np.ndarray, y: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    P = fld.modulus
    if fld.d == 1:
        return mulmod(x, y, P)
    x0, x1 = x[0], x[1]
    y0, y1 = y[0], y[1]
    hi = mulmod(x1, y1, P)
    c0 = (mulmod(x0, y0, P) - fld.n * hi) % P
    c1 = (mulmod(x0, y1, P) + mulmod(x1, y0, P) + fld.t * hi) % P
    return np.stack([c0, c1])


def conj(x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    if fld.d == 1:
        raise ValueError("no conjugation on Q_p")
    return np.stack([(x[0] + fld.t * x[1]) % fld.modulus, (-x[1]) % fld.modulus])


def norm(x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """Norm to Z/p^M (identity when split)."""
    if fld.d == 1:
        return x[0] % fld.modulus
    P = fld.modulus
    x0, x1 = x[0], x[1]
    return (mulmod(x0, x0, P) + fld.t * mulmod(x0, x1, P) + fld.n * mulmod(x1, x1, P)) % P


def unit_inverse(x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    P = fld.modulus
    nrm = norm(x, fld)
    flat = np.asarray(nrm).reshape(-1)
    inv = np.array([pow(int(a), -1, P) for a in flat], dtype=fld.dtype).reshape(np.shape(nrm))
    if fld.d == 1:
        return inv[None]
    return mulmod(conj(x, fld), inv, P)


def mulmod(x: np.ndarray, y: np.ndarray, P: int) -> np.ndarray:
    """Elementwise (x * y) mod P for residues in [0, P)."""
    if P < 2**31 or np.asarray(x).dtype == object:
        return (x * y) % P
    s = 62 - P.bit_length()
    mask = (1 << s) - 1
    out = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    y = np.asarray(y)
    for shift in reversed(range(0, P.bit_length(), s)):
        dgt = (y >> shift) & mask
        out = ((out << s) % P + (x * dgt) % P) % P
    return out


def _matmul_int(A: np.ndarray, B: np.ndarray, P: int) -> np.ndarray:
    """(A @ B) mod P for residues in [0, P), avoiding int64 overflow."""
    if A.dtype == object or B.dtype == object:
        return (A.astype(object) @ B.astype(object)) % P
    inner = max(A.shape[-1], 1)
    if P * P * inner < 2**62:
        return (A @ B) % P
    # Horner over base-2^s digits of B so each partial product fits
    s = 62 - P.bit_length() - inner.bit_length()
    if s < 1:
        return (A.astype(object) @ B.astype(object)) % P
    mask = (1 << s) - 1
    out = None
    for shift in reversed(range(0, P.bit_length(), s)):
        part = (A @ ((B >> shift) & mask)) % P
        out = part if out is None else ((out << s) % P + part) % P
    return out


def matmul(A: np.ndarray, B: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """Matrix product over O_L; A is (d, ..., m, k), B is (d, ..., k, n)."""
    P = fld.modulus
    if fld.d == 1:
        return _matmul_int(A[0], B[0], P)[None]
    a0b0 = _matmul_int(A[0], B[0], P)
    a1b1 = _matmul_int(A[1], B[1], P)
    a0b1 = _matmul_int(A[0], B[1], P)
    a1b0 = _matmul_int(A[1], B[0], P)
    c0 = (a0b0 - fld.n * a1b1) % P
    c1 = (a0b1 + a1b0 + fld.t * a1b1) % P
    return np.stack([c0, c1])


def _vp_array(x: np.ndarray, p: int, cap: int) -> np.ndarray:
    """p-adic valuation of integer residues, capped (zero -> cap)."""
    x = np.asarray(x)
    v = np.zeros(x.shape, dtype=np.int64)
    live = x != 0
    y = np.where(live, x, 1).astype(x.dtype)
    for _ in range(cap):
        div = live & (y % p == 0)
        if not div.any():
            break
        v += div
        y = np.where(div, y // p, y)
    v[~live] = cap
    return np.minimum(v, cap)


def vpi(x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """Valuation in pi-units of each element (cap = e*M for zero)."""
    P, p, M = fld.modulus, fld.p, fld.M
    if fld.splitting is Splitting.RAMIFIED:
        u = (x[0] + mulmod(x[1], fld.root, P)) % P
        w = x[1] % P
        return np.minimum(2 * _vp_array(u, p, M), 2 * _vp_array(w, p, M) + 1).clip(max=2 * M)
    return np.minimum(_vp_array(x[0] % P, p, M), _vp_array(x[1] % P, p, M)) if fld.d == 2 else _vp_array(x[0] % P, p, M)


def reduce_mod_pi(x: np.ndarray, s, fld: LocalFieldDesc) -> np.ndarray:
    """Canonical representative of x modulo pi^s (s broadcast over cells).

    Cells with s <= 0 become zero; s is clamped to the cap.
    """
    P, p = fld.modulus, fld.p
    s = np.clip(np.asarray(s), 0, fld.cap)
    if fld.splitting is Splitting.RAMIFIED:
        u = (x[0] + mulmod(x[1], fld.root, P)) % P
        w = x[1] % P
        mu = _pow_array(p, (s + 1) // 2, fld)
        mw = _pow_array(p, s // 2, fld)
        u = u % mu
        w = w % mw
        return np.stack([(u - mulmod(w, fld.root, P)) % P, w])
    m = _pow_array(p, s, fld)
    return x % m


def _pow_array(p: int, s: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    s = np.asarray(s)
    table = np.array([p**i for i in range(fld.M + 1)], dtype=fld.dtype)
    return table[np.clip(s, 0, fld.M)]


def divide_by_pi_power(x: np.ndarray, s: int, fld: LocalFieldDesc) -> np.ndarray:
    """x / pi^s for elements with vpi >= s (the caller checks divisibility).

    Unramified: exact modulo p^(M-s).  Ramified: exact modulo p^(M-ceil(s/2)),
    since storage is modulo p^M rather than pi^(2M).
    """
    P, p = fld.modulus, fld.p
    if s <= 0:
        return x % P
    if fld.splitting is not Splitting.RAMIFIED:
        return (x // p**s) % P
    y = x % P
    if s % 2:
        # 1/pi = conj(pi) / (p b')
        cb = _pi_conj_data(fld)
        z0 = (mulmod(y[0], cb[0], P) - fld.n * mulmod(y[1], cb[1], P)) % P
        z1 = (mulmod(y[0], cb[1], P) + mulmod(y[1], cb[0], P) + fld.t * mulmod(y[1], cb[1], P)) % P
        y = mulmod(np.stack([z0 // p, z1 // p]), cb[2], P)
    half = s // 2
    if half:
        eps = scalar_array(_p_over_pi2(fld) ** half)
        y = mul(y // p**half, eps.reshape((2,) + (1,) * (y.ndim - 1)), fld)
    return y


def _pi_conj_data(fld: LocalFieldDesc) -> tuple[int, int, int]:
    # conj(pi) = conj(omega) - r = (t - r) - omega, and b' = N(pi)/p
    a, b = fld.eisenstein
    return (fld.t - fld.root) % fld.modulus, (-1) % fld.modulus, pow(b // fld.p, -1, fld.modulus)


def _p_over_pi2(fld: LocalFieldDesc) -> "LocalElement":
    # p/pi^2 = conj(pi)^2 / (p b'^2), computed over Z before reducing
    K = fld.field
    pc = K(fld.t - fld.root, -1)
    sq = pc * pc
    assert sq.x % fld.p == 0 and sq.y % fld.p == 0
    inv = pow(fld.eisenstein[1] // fld.p, -2, fld.modulus)
    return fld.element(sq.x // fld.p * inv, sq.y // fld.p * inv)


# ---------------------------------------------------------------------------
# scalars


class LocalElement:
    """Immutable element of O_L modulo p^M."""

    __slots__ = ("coeffs", "fld")

    def __init__(self, coeffs: tuple[int, ...], fld: LocalFieldDesc):
        self.coeffs = coeffs
        self.fld = fld

    @classmethod
    def from_array(cls, a: np.ndarray, fld: LocalFieldDesc) -> "LocalElement":
        return cls(tuple(int(v) % fld.modulus for v in np.asarray(a).reshape(-1)), fld)

    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=self.fld.dtype)

    def _wrap(self, a: np.ndarray) -> "LocalElement":
        return LocalElement.from_array(a, self.fld)

    def _coerce(self, other) -> "LocalElement":
        if isinstance(other, LocalElement):
            return other
        if isinstance(other, int):
            return self.fld.element(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap((self.array() + other.array()) % self.fld.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap((self.array() - other.array()) % self.fld.modulus)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return self._wrap((-self.array()) % self.fld.modulus)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(mul(self.array(), other.array(), self.fld))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        result, base = self.fld.one, self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.coeffs == other.coeffs and self.fld == other.fld

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"LocalElement({list(self.coeffs)}, p={self.fld.p}, M={self.fld.M})"

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def vpi(self) -> int:
        return int(vpi(self.array(), self.fld))

    def valuation(self):
        vp = self.vpi()
        if vp >= self.fld.cap:
            return AtLeast(Fraction(self.fld.M))
        return Fraction(vp, self.fld.e)

    def is_unit(self) -> bool:
        return self.vpi() == 0

    def inverse(self) -> "LocalElement":
        if not self.is_unit():
            raise ZeroDivisionError("not a unit in O_L")
        return self._wrap(unit_inverse(self.array(), self.fld))

    def conj(self) -> "LocalElement":
        return self._wrap(conj(self.array(), self.fld))

    def unit_part(self) -> tuple[int, "LocalElement"]:
        """(s, u) with self = pi^s * u (u determined modulo pi^{cap-s})."""
        s = self.vpi()
        if s >= self.fld.cap:
            raise ZeroDivisionError("zero to working precision")
        return s, self._wrap(divide_by_pi_power(self.array(), s, self.fld))

    def exact_div(self, other: "LocalElement") -> "LocalElement":
        """self / other, raising if other does not divide self."""
        s, u = other.unit_part()
        if self.vpi() < s:
            raise ZeroDivisionError("not divisible")
        q = divide_by_pi_power(self.array(), s, self.fld)
        return self._wrap(mul(q, unit_inverse(u.array(), self.fld), self.fld))

    def lift_int(self) -> int:
        if self.fld.d != 1:
            raise ValueError("not in Z_p")
        return self.coeffs[0]

    def balanced(self) -> tuple[int, ...]:
        P = self.fld.modulus
        return tuple(c - P if c > P // 2 else c for c in self.coeffs)


def sigma_embed(a, fld: LocalFieldDesc) -> tuple[LocalElement, LocalElement]:
    """(sigma_1(a), sigma_2(a)) for a in O_K, or in K with p-free denominator.

    ``a`` may be a QuadInt, an int, or a pair of Fractions (coordinates in
    the basis {1, omega}).
    """
    x, y = _coords(a)
    den = math.lcm(Fraction(x).denominator, Fraction(y).denominator)
    if den % fld.p == 0:
        raise DenominatorAtP(f"denominator {den} divisible by {fld.p}", a=a)
    P = fld.modulus
    inv = pow(den, -1, P)
    X = int(Fraction(x) * den) * inv % P
    Y = int(Fraction(y) * den) * inv % P
    if fld.splitting is Splitting.SPLIT:
        r1 = fld.root
        r2 = (fld.t - r1) % P
        return fld.element(X + Y * r1), fld.element(X + Y * r2)
    s1 = fld.element(X, Y)
    return s1, s1.conj()


def _coords(a):
    if isinstance(a, QuadInt):
        return a.x, a.y
    if isinstance(a, int):
        return a, 0
    x, y = a
    return x, y


def sigma_arrays(elements, fld: LocalFieldDesc) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised sigma embedding of a sequence of O_K elements.

    Returns two arrays of shape (d, len(elements)).
    """
    P = fld.modulus
    xs = np.array([z.x for z in elements], dtype=object) % P
    ys = np.array([z.y for z in elements], dtype=object) % P
    if fld.splitting is Splitting.SPLIT:
        r1 = fld.root
        r2 = (fld.t - r1) % P
        s1 = ((xs + ys * r1) % P).astype(fld.dtype)[None]
        s2 = ((xs + ys * r2) % P).astype(fld.dtype)[None]
        return s1, s2
    s1 = np.stack([xs.astype(fld.dtype), ys.astype(fld.dtype)])
    return s1, conj(s1, fld)


def valuation(x: LocalElement):
    """v(x) normalised with v(p) = 1, or an AtLeast sentinel for zero."""
    return x.valuation()


def binomial_mod(m: int, i: int, fld: LocalFieldDesc) -> LocalElement:
    """The binomial coefficient C(m, i) reduced modulo p^M."""
    if not 0 <= i <= m:
        raise ValueError("need 0 <= i <= m")
    return fld.from_int(math.comb(m, i))


def teichmuller(x: LocalElement) -> LocalElement:
    """Teichmuller representative of the residue class of x."""
    q = x.fld.residue_size
    y = x
    for _ in range(x.fld.M + 1):
        y = y**q
    return y


def residue_field_elements(fld: LocalFieldDesc) -> list[LocalElement]:
    if fld.splitting is Splitting.INERT:
        return [fld.element(a, b) for a in range(fld.p) for b in range(fld.p)]
    return [fld.element(a) for a in range(fld.p)]


def primitive_root_of_unity(m: int, fld: LocalFieldDesc) -> LocalElement:
    """A fixed primitive m-th root of unity in O_L.

    Raises RootOfUnityNotInL when L does not contain one.
    """
    q = fld.residue_size
    mp, pp = m, 1
    while mp % fld.p == 0:
        mp //= fld.p
        pp *= fld.p
    if (q - 1) % mp:
        raise RootOfUnityNotInL(f"mu_{m} not contained in L", order=m, residue_size=q)
    # smallest residue whose Teichmuller lift has exact order mp
    zeta_tame = None
    for cand in residue_field_elements(fld):
        if cand.is_zero():
            continue
        z = teichmuller(cand)
        if _order_is(z, mp):
            zeta_tame = z
            break
    assert zeta_tame is not None
    if pp == 1:
        return zeta_tame
    # wild part: only roots of unity coming from K itself can occur here
    for u in fld.field.units:
        z = sigma_embed(u, fld)[0]
        if _order_is(z, pp):
            return zeta_tame * z
    raise RootOfUnityNotInL(f"mu_{m} not contained in L", order=m, residue_size=q)


def _order_is(z: LocalElement, m: int) -> bool:
    if z ** m != z.fld.one:
        return False
    return all(z ** (m // q) != z.fld.one for q in range(2, m + 1) if m % q == 0 and is_prime(q))
