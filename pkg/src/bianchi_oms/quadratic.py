"""Exact arithmetic in the ring of integers of an imaginary quadratic field.

Elements are written ``x + y*omega`` where ``omega`` generates the ring of
integers with minimal polynomial ``X^2 - t X + n``.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import cached_property
from typing import Iterator

from .errors import NotEuclidean

# Discriminant magnitudes of the norm-Euclidean imaginary quadratic fields.
EUCLIDEAN_DISCRIMINANTS = (3, 4, 7, 8, 11)


def _is_squarefree(m: int) -> bool:
    return all(m % (q * q) for q in range(2, math.isqrt(m) + 1))


def _class_number(D: int) -> int:
    # count reduced positive definite forms of discriminant -D
    count = 0
    a = 1
    while 3 * a * a <= D:
        for b in range(-a + 1, a + 1):
            if (b * b + D) % (4 * a):
                continue
            c = (b * b + D) // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if math.gcd(math.gcd(a, abs(b)), c) == 1:
                count += 1
        a += 1
    return count


class QuadInt:
    """Element ``x + y*omega`` of O_K."""

    __slots__ = ("x", "y", "field")

    def __init__(self, x: int, y: int, field: "QuadraticField"):
        self.x = x
        self.y = y
        self.field = field

    def _coerce(self, other) -> "QuadInt":
        if isinstance(other, QuadInt):
            return other
        if isinstance(other, int):
            return QuadInt(other, 0, self.field)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return QuadInt(self.x + other.x, self.y + other.y, self.field)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return QuadInt(self.x - other.x, self.y - other.y, self.field)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return QuadInt(-self.x, -self.y, self.field)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t, n = self.field.t, self.field.n
        a, b, c, d = self.x, self.y, other.x, other.y
        return QuadInt(a * c - n * b * d, a * d + b * c + t * b * d, self.field)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "QuadInt":
        result = self.field.one
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, int):
            return self.x == other and self.y == 0
        if isinstance(other, QuadInt):
            return self.x == other.x and self.y == other.y
        return NotImplemented

    def __hash__(self):
        return hash((self.x, self.y))

    def __bool__(self):
        return bool(self.x or self.y)

    def __repr__(self):
        return f"QuadInt({self.x}, {self.y})"

    def __str__(self):
        if not self.y:
            return str(self.x)
        w = "w" if self.y == 1 else f"{self.y}*w"
        return w if not self.x else f"{self.x}+{w}".replace("+-", "-")

    @property
    def coords(self) -> tuple[int, int]:
        return (self.x, self.y)

    def norm(self) -> int:
        t, n = self.field.t, self.field.n
        return self.x * self.x + t * self.x * self.y + n * self.y * self.y

    def conj(self) -> "QuadInt":
        return QuadInt(self.x + self.field.t * self.y, -self.y, self.field)

    def __complex__(self):
        return self.x + self.y * self.field.omega_complex

    def divides(self, other: "QuadInt") -> bool:
        if not self:
            return not other
        num = other * self.conj()
        nb = self.norm()
        return num.x % nb == 0 and num.y % nb == 0

    def exact_div(self, other: "QuadInt") -> "QuadInt":
        """Return self / other, which must lie in O_K."""
        num = self * other.conj()
        nb = other.norm()
        if num.x % nb or num.y % nb:
            raise ValueError(f"{other} does not divide {self}")
        return QuadInt(num.x // nb, num.y // nb, self.field)


class QuadraticField:
    """The field K = Q(sqrt(-D)) for a fundamental discriminant -D.

    Holds the ring generator, the different generator ``delta`` with
    ``delta^2 = -D`` and positive imaginary part, the unit group and the
    class number.
    """

    def __init__(self, D: int):
        if D <= 0:
            raise ValueError("D must be positive")
        if D % 4 == 3:
            ok = _is_squarefree(D)
            self.t, self.n = 1, (1 + D) // 4
        elif D % 4 == 0 and (D // 4) % 4 in (1, 2):
            ok = _is_squarefree(D // 4)
            self.t, self.n = 0, D // 4
        else:
            ok = False
        if not ok:
            raise ValueError(f"-{D} is not a fundamental discriminant")
        self.D = D
        self.omega_complex = complex(self.t / 2, math.sqrt(D) / 2)
        self.h = _class_number(D)

    def __repr__(self):
        return f"QuadraticField(D={self.D})"

    def __eq__(self, other):
        return isinstance(other, QuadraticField) and other.D == self.D

    def __hash__(self):
        return hash(("QuadraticField", self.D))

    def __call__(self, x: int, y: int = 0) -> QuadInt:
        return QuadInt(x, y, self)

    @cached_property
    def zero(self) -> QuadInt:
        return QuadInt(0, 0, self)

    @cached_property
    def one(self) -> QuadInt:
        return QuadInt(1, 0, self)

    @cached_property
    def omega(self) -> QuadInt:
        return QuadInt(0, 1, self)

    @cached_property
    def delta(self) -> QuadInt:
        return QuadInt(-self.t, 2, self)

    @property
    def euclidean(self) -> bool:
        return self.D in EUCLIDEAN_DISCRIMINANTS

    @cached_property
    def units(self) -> tuple[QuadInt, ...]:
        if self.D == 4:
            return (self(1), self(0, 1), self(-1), self(0, -1))
        if self.D == 3:
            # omega = (1 + sqrt(-3))/2 is a primitive sixth root of unity
            w = self.omega
            return tuple(w**j for j in range(6))
        return (self(1), self(-1))

    @property
    def w(self) -> int:
        return len(self.units)

    def unit_inverse(self, u: QuadInt) -> QuadInt:
        return u.conj()

    def from_complex_round(self, z: complex) -> QuadInt:
        y = round(z.imag * 2 / math.sqrt(self.D))
        x = round(z.real - self.t * y / 2)
        return self(x, y)

    def in_cone(self, z: QuadInt) -> bool:
        """Canonical fundamental domain for the unit action on K^x."""
        if self.w == 2:
            return z.y > 0 or (z.y == 0 and z.x > 0)
        return z.x > 0 and z.y >= 0

    def canonical(self, z: QuadInt) -> QuadInt:
        """Unit multiple of z lying in the canonical cone (z nonzero)."""
        for u in self.units:
            v = u * z
            if self.in_cone(v):
                return v
        raise AssertionError("no unit multiple in cone")

    def canonical_unit(self, z: QuadInt) -> QuadInt:
        for u in self.units:
            if self.in_cone(u * z):
                return u
        raise AssertionError("no unit multiple in cone")

    def divide(self, a: QuadInt, b: QuadInt) -> tuple[Fraction, Fraction]:
        """Coordinates of a/b in K with respect to {1, omega}."""
        num = a * b.conj()
        nb = b.norm()
        return Fraction(num.x, nb), Fraction(num.y, nb)

    def euclid_step(self, a: QuadInt, b: QuadInt) -> tuple[QuadInt, QuadInt]:
        """Division with remainder a = q*b + r with N(r) < N(b).

        q is the lattice point nearest to a/b; ties go to the smallest
        (real part, imaginary part).
        """
        if not self.euclidean:
            raise NotEuclidean(f"Q(sqrt(-{self.D})) is not norm-Euclidean")
        if not b:
            raise ZeroDivisionError("division by zero in O_K")
        if not a:
            return self.zero, self.zero
        fx, fy = self.divide(a, b)
        x0, y0 = math.floor(fx), math.floor(fy)
        best = None
        for dx in (-1, 0, 1, 2):
            for dy in (-1, 0, 1, 2):
                q = self(x0 + dx, y0 + dy)
                r = a - q * b
                key = (r.norm(), 2 * q.x + self.t * q.y, q.y)
                if best is None or key < best[0]:
                    best = (key, q, r)
        _, q, r = best
        if r.norm() >= b.norm():
            raise NotEuclidean("rounding failed to reduce the norm")
        return q, r

    def gcd(self, a: QuadInt, b: QuadInt) -> QuadInt:
        while b:
            _, r = self.euclid_step(a, b)
            a, b = b, r
        return a

    def xgcd(self, a: QuadInt, b: QuadInt) -> tuple[QuadInt, QuadInt, QuadInt]:
        """Return (g, s, u) with s*a + u*b = g."""
        s0, s1 = self.one, self.zero
        u0, u1 = self.zero, self.one
        while b:
            q, r = self.euclid_step(a, b)
            a, b = b, r
            s0, s1 = s1, s0 - q * s1
            u0, u1 = u1, u0 - q * u1
        return a, s0, u0

    def elements_up_to_norm(self, bound: int) -> Iterator[QuadInt]:
        """All nonzero elements with norm at most bound."""
        ymax = math.isqrt(4 * bound // self.D + 1) + 1
        for y in range(-ymax, ymax + 1):
            # x^2 + t x y + n y^2 <= bound
            disc = self.t * self.t * y * y - 4 * (self.n * y * y - bound)
            if disc < 0:
                continue
            root = math.isqrt(disc)
            lo = (-self.t * y - root) // 2 - 1
            hi = (-self.t * y + root) // 2 + 1
            for x in range(lo, hi + 1):
                z = self(x, y)
                if z and z.norm() <= bound:
                    yield z

    def ideal_generators_up_to_norm(self, bound: int) -> list[QuadInt]:
        """One canonical generator per nonzero integral ideal of norm <= bound.

        Only meaningful when h = 1.
        """
        gens = [z for z in self.elements_up_to_norm(bound) if self.in_cone(z)]
        gens.sort(key=lambda z: (z.norm(), z.x, z.y))
        return gens

    @cached_property
    def delta_complex(self) -> complex:
        return complex(self.delta)

    def trace_complex(self, z: complex) -> float:
        return 2.0 * z.real

    def arg(self, z: QuadInt) -> float:
        return cmath.phase(complex(z))


class Ideal:
    """Principal ideal (nu) of O_K with a Hermite basis for residues."""

    def __init__(self, gen: QuadInt):
        if not gen:
            raise ValueError("zero ideal")
        self.field = gen.field
        self.gen = self.field.canonical(gen)
        v1 = self.gen.coords
        v2 = (self.gen * self.field.omega).coords
        self.h1, self.h2, self.h3 = _hermite(v1, v2)

    def __repr__(self):
        return f"Ideal({self.gen})"

    def __eq__(self, other):
        return isinstance(other, Ideal) and other.gen == self.gen

    def __hash__(self):
        return hash(("Ideal", self.gen.x, self.gen.y))

    def norm(self) -> int:
        return self.h1 * self.h3

    def reduce(self, z: QuadInt) -> QuadInt:
        """Canonical residue of z modulo the ideal."""
        x, y = z.x, z.y
        q = x // self.h1
        x -= q * self.h1
        y -= q * self.h2
        y %= self.h3
        return QuadInt(x, y, self.field)

    def residues(self) -> list[QuadInt]:
        return [QuadInt(x, y, self.field) for x in range(self.h1) for y in range(self.h3)]

    def contains(self, z: QuadInt) -> bool:
        return not self.reduce(z)

    def is_unit_mod(self, z: QuadInt) -> bool:
        """Whether z generates the unit ideal modulo this ideal."""
        if self.norm() == 1:
            return True
        return self.field.gcd(self.gen, z).norm() == 1

    def inverse_mod(self, z: QuadInt) -> QuadInt:
        g, s, _ = self.field.xgcd(z, self.gen)
        if g.norm() != 1:
            raise ValueError(f"{z} is not invertible modulo {self}")
        # s*z + u*gen = g with g a unit
        return self.reduce(s * self.field.unit_inverse(g))


def _hermite(v1: tuple[int, int], v2: tuple[int, int]) -> tuple[int, int, int]:
    """Basis {(h1, h2), (0, h3)} of the lattice spanned by v1, v2."""
    a, b = list(v1), list(v2)
    # gcd on first coordinates
    while b[0]:
        q = a[0] // b[0]
        a = [a[0] - q * b[0], a[1] - q * b[1]]
        a, b = b, a
    if a[0] < 0:
        a = [-a[0], -a[1]]
    h3 = abs(b[1])
    h1 = a[0]
    h2 = a[1] % h3
    return h1, h2, h3
