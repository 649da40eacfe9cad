"""The p-adic L-function attached to an overconvergent eigenlift.

mu_p is represented by its values on the locally polynomial functions
P^{q,r}_{b,f} = z^q zbar^r 1_{b mod f} on O_{K,p}^x.  For f = (alpha) with
U_f Psi = lam_f Psi, such a function is sent to

    lam_f^-1 Psi({d_b/alpha} - {oo}) [(alpha x + d_b)^q (alpha y + d_b)^r]

where the polynomial is read through the two embeddings sigma_1, sigma_2.
Class number one is assumed throughout (one component, t_1 = 1).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import padic
from .analytic import GrossChar, ResidueGroup, _unit_root_exponent, residue_group
from .errors import ConductorMismatch, InsufficientWidth
from .geometry import Cusp, Divisor
from .padic import LocalElement, LocalFieldDesc, Splitting
from .quadratic import Ideal, QuadInt, QuadraticField
from .symbols import ModularSymbol


# ---------------------------------------------------------------------------
# values with a power of pi in the denominator


@dataclass(frozen=True)
class PadicValue:
    """numer * pi^-shift, with numer known modulo pi^precision."""

    numer: LocalElement
    shift: int
    precision: int

    @property
    def fld(self) -> LocalFieldDesc:
        return self.numer.fld

    def _aligned(self, other: "PadicValue"):
        s = max(self.shift, other.shift)
        pi = self.fld.uniformizer
        a = self.numer * pi ** (s - self.shift)
        b = other.numer * pi ** (s - other.shift)
        prec = min(self.precision + s - self.shift, other.precision + s - other.shift, self.fld.cap)
        return a, b, s, prec

    def __add__(self, other: "PadicValue") -> "PadicValue":
        a, b, s, prec = self._aligned(other)
        return PadicValue(a + b, s, prec)

    def __sub__(self, other: "PadicValue") -> "PadicValue":
        a, b, s, prec = self._aligned(other)
        return PadicValue(a - b, s, prec)

    def scale(self, c: LocalElement) -> "PadicValue":
        return PadicValue(self.numer * c, self.shift, min(self.precision + c.vpi(), self.fld.cap))

    def agrees(self, other: "PadicValue") -> bool:
        """Equality to the precision both sides are known to."""
        a, b, _, prec = self._aligned(other)
        return int(padic.vpi((a - b).array(), self.fld)) >= prec

    @property
    def relative_precision(self) -> int:
        """Digits known below the denominator: precision - shift."""
        return self.precision - self.shift

    def valuation(self):
        v = self.numer.vpi()
        if v >= self.precision:
            return None
        return (v - self.shift) / self.fld.e

    def to_dict(self) -> dict:
        return {"numerator": [str(c) for c in self.numer.coeffs], "pi_shift": self.shift,
                "precision": self.precision, "effective_precision": self.relative_precision}


def divide_by(x: LocalElement, prec: int, lam: LocalElement) -> PadicValue:
    """x / lam as a PadicValue (x known modulo pi^prec)."""
    v, u = lam.unit_part()
    fld = x.fld
    return PadicValue(x * u.inverse(), v, min(prec, fld.cap - v))


# ---------------------------------------------------------------------------
# ray class levels


@dataclass
class RayClassLevel:
    """Finite level f | p^oo: residues, unit image, class representatives
    and the lifts d_b."""

    field: QuadraticField
    p: int
    f: QuadInt                  # generator alpha of f; U_f has summands (1, b; 0, alpha)
    exponents: dict             # prime key -> exponent, keys "p" or "P", "Pbar"
    group: ResidueGroup
    residues: list              # all of O_K / f
    invertible: list            # (O_K / f)^x
    unit_image: list
    class_reps: list            # representatives of (O_K/f)^x / units
    lifts: dict                 # residue coords -> d_b

    @property
    def ideal(self) -> Ideal:
        return Ideal(self.f)

    def d(self, b: QuadInt) -> QuadInt:
        return self.lifts[self.ideal.reduce(b).coords]

    def cusp(self, b: QuadInt) -> Cusp:
        return Cusp(self.d(b), self.f)

    def check_cusps(self) -> bool:
        """As b runs over invertible classes, d_b/alpha runs over f^-1/O_K
        classes a with (a) f coprime to f, each once."""
        seen = set()
        I = self.ideal
        for b in self.invertible:
            db = self.d(b)
            if not I.is_unit_mod(db):
                return False
            seen.add(I.reduce(db).coords)
        return len(seen) == len(self.invertible) == self.group.order


def _smallest_lift(b: QuadInt, gen: QuadInt) -> QuadInt:
    """Smallest-norm element of b + (gen), ties broken by coordinates."""
    K = b.field
    q0 = K.from_complex_round(complex(b) / complex(gen))
    cands = [b - (q0 + e) * gen for e in [K.zero, *K.elements_up_to_norm(4)]]
    return min(cands, key=lambda c: (c.norm(), c.x, c.y))


def build_ray_level(fld: LocalFieldDesc, exponents: dict) -> RayClassLevel:
    """Level f = p^n (exponents {"p": n}) or, for split p, P^a Pbar^b
    (exponents {"P": a, "Pbar": b}) with P the prime seen by sigma_1."""
    K = fld.field
    if fld.splitting is Splitting.SPLIT:
        from .lifting import split_prime_generators
        beta, beta_bar = split_prime_generators(fld, 1)
        if "p" in exponents:
            a = b = exponents["p"]
        else:
            a, b = exponents.get("P", 0), exponents.get("Pbar", 0)
        gen = beta ** a * beta_bar ** b
        exps = {"P": a, "Pbar": b}
    else:
        n = exponents.get("p", 0)
        gen = K(fld.p) ** n
        exps = {"p": n}
    if gen.norm() == 1:
        raise ValueError("level must be a proper divisor of p^oo")
    I = Ideal(gen)
    G = residue_group(K, gen)
    residues = I.residues()
    units_img = []
    for u in K.units:
        r = I.reduce(u)
        if r not in units_img:
            units_img.append(r)
    reps, seen = [], set()
    for z in sorted(G.elements, key=lambda w: (w.norm(), w.x, w.y)):
        if z.coords in seen:
            continue
        reps.append(z)
        for u in K.units:
            seen.add(I.reduce(u * z).coords)
    lifts = {r.coords: _smallest_lift(r, gen) for r in residues}
    lvl = RayClassLevel(K, fld.p, gen, exps, G, residues, list(G.elements), units_img, reps, lifts)
    if len(reps) * len(units_img) != G.order:
        raise AssertionError("class count does not match |(O/f)^x| / |unit image|")
    return lvl


# ---------------------------------------------------------------------------
# locally polynomial functions and their values


@dataclass(frozen=True)
class LocallyPolynomial:
    """P^{q,r}_{b,f}: z^q zbar^r times the indicator of b mod f."""

    q: int
    r: int
    b: QuadInt


def _binomial_expansion(A: LocalElement, B: LocalElement, q: int) -> list[LocalElement]:
    """Coefficients of (A x + B)^q in x^0..x^q."""
    return [A ** i * B ** (q - i) * math.comb(q, i) for i in range(q + 1)]


def pairing_value(grid, A1, B1, A2, B2, q, r) -> tuple[LocalElement, int]:
    """mu[(A1 x + B1)^q (A2 y + B2)^r] and the precision it is known to."""
    if q >= grid.W or r >= grid.W:
        raise InsufficientWidth("evaluand degree exceeds the moment grid", q=q, r=r, W=grid.W)
    fld = grid.fld
    cx = _binomial_expansion(A1, B1, q)
    cy = _binomial_expansion(A2, B2, r)
    total = fld.zero
    prec = fld.cap
    for i in range(q + 1):
        for j in range(r + 1):
            c = cx[i] * cy[j]
            if c.is_zero():
                continue
            total = total + c * grid.cell(i, j)
            prec = min(prec, int(grid.eff[i, j]) + c.vpi())
    return total, prec


def _eigenvalue_of_level(Lp: "PadicLFunction", level: RayClassLevel) -> LocalElement:
    lam = Lp.fld.one
    for key, e in level.exponents.items():
        if e:
            lam = lam * Lp.eigenvalues[key] ** e
    return lam


def eval_locally_poly(Lp: "PadicLFunction", P: LocallyPolynomial, level: RayClassLevel) -> PadicValue:
    """lam_f^-1 Psi({d_b/alpha} - {oo})[(alpha x + d_b)^q (alpha y + d_b)^r]."""
    fld = Lp.fld
    db = level.d(P.b)
    grid = Lp.value_at(level.cusp(P.b))
    a1, a2 = padic.sigma_embed(level.f, fld)
    d1, d2 = padic.sigma_embed(db, fld)
    x, prec = pairing_value(grid, a1, d1, a2, d2, P.q, P.r)
    return divide_by(x, prec, _eigenvalue_of_level(Lp, level))


def classical_block_value(Lp: "PadicLFunction", P: LocallyPolynomial, level: RayClassLevel) -> PadicValue:
    """The same value computed from the classical symbol alone.

    The classical symbol's value at {a} - {oo}, a = d/alpha, is written in
    the basis (Y* - a X*)^{k-i} X*^i (x) (Ybar* - abar Xbar*)^{k-j} Xbar*^j,
    dual monomials being paired with binomial weights binom(k, m)^-1.  The
    coefficients C_{ij} = alpha^i alphabar^j c_{ij}(a) satisfy the
    triangular recursion below, which needs no division; the value is then
    lam_f^-1 C_{qr} / (binom(k,q) binom(k,r)).
    """
    phi = Lp.symbol.specialize()
    fld, k = phi.fld, phi.k
    q, r = P.q, P.r
    if q > k or r > k:
        raise InsufficientWidth("classical block only covers q, r <= k", q=q, r=r, k=k)
    db = level.d(P.b)
    D = Divisor.path(level.cusp(P.b), Cusp.infinity(level.field))
    m = phi.evaluate(D)
    a1, a2 = padic.sigma_embed(level.f, fld)
    d1, d2 = padic.sigma_embed(db, fld)
    C = [[m.cell(i, j) for j in range(k + 1)] for i in range(k + 1)]

    def solve(vec, A, Dd):
        out = []
        for i2 in range(k + 1):
            acc = vec[i2] * (A ** i2) * math.comb(k, i2)
            for i in range(i2):
                acc = acc - out[i] * (-Dd) ** (i2 - i) * math.comb(k - i, i2 - i)
            out.append(acc)
        return out

    C = [solve(row, a2, d2) for row in C]                       # along y
    C = [list(col) for col in zip(*C)]
    C = [solve(col, a1, d1) for col in C]                       # along x
    val = C[r][q]                                               # indexed [j][i]
    den = fld.from_int(math.comb(k, q) * math.comb(k, r))
    return divide_by(val.exact_div(den), fld.cap - den.vpi(), _eigenvalue_of_level(Lp, level))


def telescoping_sides(Lp: "PadicLFunction", q: int, r: int, level: RayClassLevel):
    """(sum over all b in O/f of the unscaled values, lam_f Psi({0}-{oo})[z^q zbar^r])."""
    Psi, fld = Lp.symbol, Lp.fld
    a1, a2 = padic.sigma_embed(level.f, fld)
    total, prec = fld.zero, fld.cap
    for b in level.residues:
        db = level.d(b)
        grid = Psi.evaluate(Divisor.path(Cusp(db, level.f), Cusp.infinity(level.field)))
        d1, d2 = padic.sigma_embed(db, fld)
        x, pr = pairing_value(grid, a1, d1, a2, d2, q, r)
        total, prec = total + x, min(prec, pr)
    base = Psi.evaluate(Divisor.path(Cusp.zero(level.field), Cusp.infinity(level.field)))
    lam = _eigenvalue_of_level(Lp, level)
    rhs = base.cell(q, r) * lam
    prec = min(prec, int(base.eff[q, r]) + lam.vpi())
    return total, rhs, prec


# ---------------------------------------------------------------------------
# characters in L


@functools.lru_cache(maxsize=None)
def embedded_root(m: int, fld: LocalFieldDesc) -> LocalElement:
    """Image of exp(2 pi i / m) in L, normalised so that the roots of unity
    of K go to their sigma_1 images."""
    K = fld.field
    z0 = padic.primitive_root_of_unity(m, fld)
    g = math.gcd(m, K.w)
    if g == 1:
        return z0
    target = None
    for u in K.units:
        j, w = _unit_root_exponent(u)
        if j * g == w:            # u = exp(2 pi i / g)
            target = padic.sigma_embed(u, fld)[0]
    for e in range(1, m):
        if math.gcd(e, m) != 1:
            continue
        z = z0 ** e
        if z ** (m // g) == target:
            return z
    raise AssertionError("no compatible root of unity")


def chi_padic(psi: GrossChar, z: QuadInt, fld: LocalFieldDesc) -> LocalElement:
    """chi(z) in L through embedded_root; zero when z is not coprime to f."""
    if psi.conductor_norm == 1:
        return fld.one
    if not Ideal(psi.f).is_unit_mod(z):
        return fld.zero
    G = psi.group
    return embedded_root(G.exponent, fld) ** G.chi_exponent(psi.chi, z)


def critical_exponents(psi: GrossChar) -> tuple[int, int]:
    a, b = psi.infinity_type
    if a.denominator != 1 or b.denominator != 1:
        raise ConductorMismatch("p-adic evaluation needs an integral infinity type")
    return int(a), int(b)


def psi_pfin_table(psi: GrossChar, level: RayClassLevel, fld: LocalFieldDesc) -> dict:
    """{b: psi_f(d_b)} over invertible b, so that psi_{p-fin} restricted to
    O_{K,p}^x is sum_b psi_f(d_b) P^{q,r}_{b,f}."""
    if not psi.f.divides(level.f):
        raise ConductorMismatch("conductor does not divide the level", conductor=str(psi.f), level=str(level.f))
    q, r = critical_exponents(psi)
    table = {b.coords: chi_padic(psi, level.d(b), fld) for b in level.invertible}
    # invariance under units: chi(u b) sigma_1(u)^q sigma_2(u)^r = chi(b)
    I = level.ideal
    for u in level.field.units:
        s1, s2 = padic.sigma_embed(u, fld)
        twist = s1 ** q * s2 ** r
        for b in level.invertible:
            if table[I.reduce(u * b).coords] * twist != table[b.coords]:
                raise ConductorMismatch("psi_p-fin is not invariant under the units of K",
                                        unit=str(u), q=q, r=r)
    return table


# ---------------------------------------------------------------------------
# the L-function


@dataclass
class PadicLFunction:
    """mu_p built from one lifted eigensymbol (class number one).

    eigenvalues: {"p": lam} for a non-split prime, {"P": lam1, "Pbar": lam2}
    when p splits (P the prime seen by sigma_1).
    """

    symbol: ModularSymbol
    eigenvalues: dict
    certificate: object = None
    slopes: dict = field(default_factory=dict)

    def __post_init__(self):
        from .lifting import _lam_at
        self.eigenvalues = {k: _lam_at(v, self.fld) for k, v in self.eigenvalues.items()}
        if not self.slopes:
            self.slopes = {k: v.valuation() for k, v in self.eigenvalues.items()}

    @property
    def fld(self) -> LocalFieldDesc:
        return self.symbol.fld

    def level(self, n: int = 1) -> RayClassLevel:
        return build_ray_level(self.fld, {"p": n})

    def value_at(self, cusp: Cusp):
        """Psi({cusp} - {oo}), memoised per cusp."""
        cache = self.__dict__.setdefault("_values", {})
        key = (cusp.a.coords, cusp.c.coords)
        if key not in cache:
            K = self.symbol.lvl.field
            cache[key] = self.symbol.evaluate(Divisor.path(cusp, Cusp.infinity(K)))
        return cache[key]


def mu_p_eval(Lp: PadicLFunction, psi: GrossChar, level: RayClassLevel | None = None) -> PadicValue:
    """mu_p(psi_{p-fin}) = sum_b psi_f(d_b) eval(P^{q,r}_{b,f})."""
    q, r = critical_exponents(psi)
    if level is None:
        level = Lp.level(1) if psi.conductor_norm == 1 else _level_of_conductor(Lp, psi)
    table = psi_pfin_table(psi, level, Lp.fld)
    total = None
    for b in level.invertible:
        c = table[b.coords]
        if c.is_zero():
            continue
        term = eval_locally_poly(Lp, LocallyPolynomial(q, r, b), level).scale(c)
        total = term if total is None else total + term
    if total is None:
        total = PadicValue(Lp.fld.zero, 0, Lp.fld.cap)
    return total


def _level_of_conductor(Lp: PadicLFunction, psi: GrossChar) -> RayClassLevel:
    fld = Lp.fld
    for n in range(1, 8):
        for exps in ([{"p": n}] if fld.splitting is not Splitting.SPLIT else
                     [{"P": a, "Pbar": n} for a in range(n + 1)] + [{"P": n, "Pbar": b} for b in range(n)]):
            try:
                lvl = build_ray_level(fld, exps)
            except ValueError:
                continue
            if lvl.ideal == Ideal(psi.f):
                return lvl
    raise ConductorMismatch("conductor is not a power of the primes above p", conductor=str(psi.f))


def admissibility_report(Lp: PadicLFunction) -> dict:
    """Moment valuation profile of mu = Psi({0} - {oo}) by total degree,
    slopes, and whether every stored moment of every value is integral."""
    Psi, fld = Lp.symbol, Lp.fld
    K = Psi.lvl.field
    mu = Psi.evaluate(Divisor.path(Cusp.zero(K), Cusp.infinity(K)))
    v = padic.vpi(mu.moments, fld)
    eff = mu.eff
    W = mu.W
    profile = []
    for deg in range(2 * W - 1):
        cells = [(i, deg - i) for i in range(W) if 0 <= deg - i < W]
        known = [(int(v[i, j]), int(eff[i, j])) for i, j in cells if eff[i, j] > 0]
        if not known:
            continue
        finite = [vv for vv, e in known if vv < e]
        profile.append({"degree": deg,
                        "min_valuation": (min(finite) / fld.e) if finite else None,
                        "precision": min(e for _, e in known) / fld.e})
    vals = np.array(Psi.values, dtype=object)
    integral = bool(((vals >= 0) & (vals < fld.modulus)).all())
    scale = getattr(Lp.certificate, "scale", 0)
    return {"profile": profile,
            "slopes": {k: str(s) for k, s in Lp.slopes.items()},
            "integral": integral and scale >= 0}
