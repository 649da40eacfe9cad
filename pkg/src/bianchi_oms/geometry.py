"""Cusps, degree-zero divisors, unimodular paths and coset representatives
for Gamma_1(n) in SL_2(O_K).

Matrices over O_K are 4-tuples (a, b, c, d) of QuadInt.  The path attached
to g is the divisor {g.0} - {g.oo}.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .quadratic import Ideal, QuadInt, QuadraticField

Matrix = tuple  # (a, b, c, d)


def mat_mul(g: Matrix, h: Matrix) -> Matrix:
    a, b, c, d = g
    e, f, g2, h2 = h
    return (a * e + b * g2, a * f + b * h2, c * e + d * g2, c * f + d * h2)


def mat_inv(g: Matrix) -> Matrix:
    """Inverse of a determinant-one matrix."""
    a, b, c, d = g
    return (d, -b, -c, a)


def det(g: Matrix) -> QuadInt:
    a, b, c, d = g
    return a * d - b * c


def identity(K: QuadraticField) -> Matrix:
    return (K.one, K.zero, K.zero, K.one)


def S_matrix(K: QuadraticField) -> Matrix:
    return (K.zero, K(-1), K.one, K.zero)


def R_matrix(K: QuadraticField) -> Matrix:
    """Order-3 element (0, -1; 1, -1) permuting 0 -> 1 -> oo -> 0."""
    return (K.zero, K(-1), K.one, K(-1))


def mat_key(g: Matrix) -> tuple:
    return tuple(c for z in g for c in z.coords)


class Cusp:
    """Point (a : c) of P^1(K), normalised so that gcd(a, c) = 1 and the
    first nonzero of (c, a) lies in the canonical unit cone."""

    __slots__ = ("a", "c")

    def __init__(self, a: QuadInt, c: QuadInt):
        K = a.field
        if not a and not c:
            raise ValueError("(0 : 0) is not a cusp")
        g = K.gcd(a, c)
        a, c = a.exact_div(g), c.exact_div(g)
        u = K.canonical_unit(c if c else a)
        self.a, self.c = u * a, u * c

    @classmethod
    def infinity(cls, K: QuadraticField) -> "Cusp":
        return cls(K.one, K.zero)

    @classmethod
    def zero(cls, K: QuadraticField) -> "Cusp":
        return cls(K.zero, K.one)

    @classmethod
    def from_element(cls, z: QuadInt) -> "Cusp":
        return cls(z, z.field.one)

    @property
    def field(self) -> QuadraticField:
        return self.a.field

    def is_infinity(self) -> bool:
        return not self.c

    def key(self) -> tuple:
        return (self.a.x, self.a.y, self.c.x, self.c.y)

    def __eq__(self, other):
        return isinstance(other, Cusp) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        if self.is_infinity():
            return "Cusp(oo)"
        return f"Cusp({self.a}/{self.c})"

    def act(self, g: Matrix) -> "Cusp":
        """Mobius action g . (a : c)."""
        A, B, C, D = g
        return Cusp(A * self.a + B * self.c, C * self.a + D * self.c)

    def to_complex(self) -> complex:
        return complex(self.a) / complex(self.c)


class Divisor:
    """Finite formal Z-combination of cusps."""

    def __init__(self, terms=None):
        self.terms: Counter = Counter()
        if terms:
            for cusp, n in (terms.items() if isinstance(terms, dict) else terms):
                self.terms[cusp] += n
        self._clean()

    def _clean(self):
        for c in [c for c, n in self.terms.items() if n == 0]:
            del self.terms[c]

    @classmethod
    def path(cls, r: Cusp, s: Cusp) -> "Divisor":
        """{r} - {s}."""
        return cls([(r, 1), (s, -1)])

    @classmethod
    def of_matrix(cls, g: Matrix) -> "Divisor":
        K = g[0].field
        return cls.path(Cusp.zero(K).act(g), Cusp.infinity(K).act(g))

    def degree(self) -> int:
        return sum(self.terms.values())

    def __add__(self, other: "Divisor") -> "Divisor":
        out = Divisor()
        out.terms = self.terms.copy()
        for c, n in other.terms.items():
            out.terms[c] += n
        out._clean()
        return out

    def __neg__(self) -> "Divisor":
        return Divisor([(c, -n) for c, n in self.terms.items()])

    def __sub__(self, other: "Divisor") -> "Divisor":
        return self + (-other)

    def scale(self, m: int) -> "Divisor":
        return Divisor([(c, m * n) for c, n in self.terms.items()])

    def act(self, g: Matrix) -> "Divisor":
        return Divisor([(c.act(g), n) for c, n in self.terms.items()])

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, Divisor) and self.terms == other.terms

    def __repr__(self):
        return "Divisor(" + " + ".join(f"{n}{c}" for c, n in sorted(self.terms.items(), key=lambda t: t[0].key())) + ")"


def divisor_of_paths(paths: list[Matrix]) -> Divisor:
    out = Divisor()
    for g in paths:
        out = out + Divisor.of_matrix(g)
    return out


def paths_to_infinity(r: Cusp) -> list[Matrix]:
    """Unimodular matrices g_j whose paths sum to {r} - {oo}, from the
    continued fraction expansion of r given by the Euclidean algorithm."""
    K = r.field
    if r.is_infinity():
        return []
    a, c = r.a, r.c
    # convergents p_j / q_j with p_{-1} = 1, q_{-1} = 0, p_{-2} = 0, q_{-2} = 1
    p_prev, q_prev = K.one, K.zero
    p_prev2, q_prev2 = K.zero, K.one
    out = []
    j = 0
    while c:
        quo, rem = K.euclid_step(a, c)
        p = quo * p_prev + p_prev2
        q = quo * q_prev + q_prev2
        sign = 1 if j % 2 == 0 else -1
        out.append((p_prev, p * sign, q_prev, q * sign))
        p_prev2, q_prev2, p_prev, q_prev = p_prev, q_prev, p, q
        a, c = c, rem
        j += 1
    return out


def decompose_path(r: Cusp, s: Cusp) -> list[Matrix]:
    """Unimodular paths whose divisors sum to {r} - {s}."""
    if r == s:
        return []
    S = S_matrix(r.field)
    return paths_to_infinity(r) + [mat_mul(g, S) for g in paths_to_infinity(s)]


def decompose_divisor(D: Divisor) -> list[tuple[int, Matrix]]:
    """(multiplicity, path) pairs summing to a degree-zero divisor."""
    if D.degree() != 0:
        raise ValueError("divisor must have degree zero")
    out = []
    for cusp, n in sorted(D.terms.items(), key=lambda t: t[0].key()):
        for g in paths_to_infinity(cusp):
            out.append((n, g))
    return out


# ---------------------------------------------------------------------------
# level structure


def in_gamma1(g: Matrix, level: Ideal) -> bool:
    a, b, c, d = g
    return (det(g) == 1 and level.contains(a - 1) and level.contains(d - 1) and level.contains(c))


@dataclass
class LevelData:
    """Coset representatives for Gamma_1(n) \\ SL_2(O_K), indexed by bottom
    rows (c : d) modulo n."""

    field: QuadraticField
    level: Ideal
    reps: list = field(default_factory=list)
    lookup: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.reps)

    def key_of(self, c: QuadInt, d: QuadInt) -> tuple:
        rc, rd = self.level.reduce(c), self.level.reduce(d)
        return (rc.x, rc.y, rd.x, rd.y)

    def index_of(self, g: Matrix) -> int:
        return self.lookup[self.key_of(g[2], g[3])]

    def to_json(self) -> dict:
        return {"D": self.field.D, "level": list(self.level.gen.coords),
                "reps": [[list(z.coords) for z in g] for g in self.reps]}

    @classmethod
    def from_json(cls, obj: dict) -> "LevelData":
        K = QuadraticField(int(obj["D"]))
        lvl = Ideal(K(*obj["level"]))
        reps = [tuple(K(*z) for z in g) for g in obj["reps"]]
        out = cls(K, lvl, reps)
        out.lookup = {out.key_of(g[2], g[3]): i for i, g in enumerate(reps)}
        return out


def _complete_row(c: QuadInt, d: QuadInt) -> Matrix | None:
    K = c.field
    g, s, u = K.xgcd(c, d)
    if g.norm() != 1:
        return None
    ginv = K.unit_inverse(g)
    # s c + u d = g, so (u/g) d - (-s/g) c = 1
    return (u * ginv, -s * ginv, c, d)


def build_level(gen: QuadInt) -> LevelData:
    """Enumerate Gamma_1(n) \\ SL_2(O_K) for n = (gen)."""
    K = gen.field
    lvl = Ideal(gen)
    data = LevelData(K, lvl)
    if lvl.norm() == 1:
        data.reps = [identity(K)]
        data.lookup = {data.key_of(K.zero, K.one): 0}
        return data
    residues = lvl.residues()
    # small multiples of the generator used to search for coprime lifts
    shifts = [K.zero] + [z * lvl.gen for z in K.elements_up_to_norm(50)]
    shifts.sort(key=lambda z: (z.norm(), z.x, z.y))
    for c in residues:
        for d in residues:
            if K.gcd(K.gcd(c, d) if (c or d) else lvl.gen, lvl.gen).norm() != 1:
                continue
            rep = None
            for sc in shifts:
                cl = c + sc
                for sd in shifts:
                    rep = _complete_row(cl, d + sd)
                    if rep is not None:
                        break
                if rep is not None:
                    break
            assert rep is not None, "no coprime lift found"
            data.lookup[data.key_of(c, d)] = len(data.reps)
            data.reps.append(rep)
    return data


def reduce_to_rep(g: Matrix, lvl: LevelData) -> tuple[Matrix, int]:
    """(gamma, index) with gamma in Gamma_1(n) and g = gamma * reps[index]."""
    idx = lvl.index_of(g)
    gamma = mat_mul(g, mat_inv(lvl.reps[idx]))
    return gamma, idx
