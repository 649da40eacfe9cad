"""Complex-analytic side: Bessel functions, Fourier components, Gauss sums,
Dirichlet series, the Mellin-transform identity linking L-values to the
Fourier expansion, the c_{q,r} integrals and normalised L-values.

Everything here is floating point and assumes class number one.

Character convention.  A Grossencharacter of conductor (f) is stored as a
finite character chi on (O_K/f)^x together with an infinity type (a, b),
meaning psi_oo(z) = z^a zbar^b.  The value on an ideal (m) coprime to f is
psi((m)) = chi(m)^-1 psi_oo(m)^-1, which is well defined exactly when
chi(u) psi_oo(u) = 1 for every unit u.  Half-integral types with a - b
integral are allowed (psi_oo(z) = |z|^(a+b) (z/|z|)^(a-b)); these are the
unitary characters appearing in the Mellin identity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import (ConductorMismatch, CutoffInsufficient, Divergent, DomainError,
                     NotConvergent)
from .quadratic import Ideal, QuadInt, QuadraticField

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Bessel layer


def bessel_K(order, x):
    """Modified Bessel function of the second kind K_order(x) for x > 0.

    Symmetric in the order by construction (K_{-n} = K_n).
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("K_n(x) needs x > 0", x=float(np.min(xa)))
    out = special.kv(abs(order), xa)
    return float(out) if out.ndim == 0 else out


def standard_integral_closed(j, m, lam):
    """lam^-j 2^(j-2) Gamma((j+m)/2) Gamma((j-m)/2)."""
    if j <= abs(m):
        raise Divergent("integral of t^(j-1) K_m(lam t) diverges at 0", j=j, m=m)
    if lam <= 0:
        raise DomainError("lam must be positive", lam=lam)
    return lam ** (-j) * 2.0 ** (j - 2) * special.gamma((j + m) / 2) * special.gamma((j - m) / 2)


def _quad_half_line(f, scale=1.0, epsabs=0.0, epsrel=1e-12):
    """Integrate f over (0, oo): plain adaptive quadrature on (0, scale] and
    t = scale * e^u on the tail, which the exponential Bessel decay makes
    short."""
    head, _ = integrate.quad(f, 0.0, scale, epsabs=epsabs, epsrel=epsrel, limit=200)
    tail, _ = integrate.quad(lambda u: f(scale * math.exp(u)) * scale * math.exp(u),
                             0.0, 8.0, epsabs=epsabs, epsrel=epsrel, limit=200)
    return head + tail


def standard_integral(j, m, lam):
    """int_0^oo t^(j-1) K_m(lam t) dt by adaptive quadrature."""
    if j <= abs(m):
        raise Divergent("integral of t^(j-1) K_m(lam t) diverges at 0", j=j, m=m)
    if lam <= 0:
        raise DomainError("lam must be positive", lam=lam)
    # substitute x = lam t so the integrand has unit scale
    val = _quad_half_line(lambda x: x ** (j - 1) * special.kv(abs(m), x) if x > 0 else 0.0)
    return val * lam ** (-j)


# ---------------------------------------------------------------------------
# residue groups and characters


class ResidueGroup:
    """(O_K/f)^x with a normal form for discrete logarithms.

    Generators g_1, ..., g_s are chosen greedily; n_i is the order of g_i
    modulo <g_1, ..., g_{i-1}>, so every element is uniquely
    prod g_i^{e_i} with 0 <= e_i < n_i.
    """

    def __init__(self, K: QuadraticField, f: QuadInt):
        self.field = K
        self.ideal = Ideal(f)
        self.f = self.ideal.gen
        if self.ideal.norm() == 1:
            self.elements = [K.one]
        else:
            self.elements = [z for z in self.ideal.residues() if self.ideal.is_unit_mod(z)]
        self.order = len(self.elements)
        self._build()

    def key(self, z: QuadInt) -> tuple:
        return self.ideal.reduce(z).coords

    def mul(self, x: QuadInt, y: QuadInt) -> QuadInt:
        return self.ideal.reduce(x * y)

    def _build(self):
        K = self.field
        one = self.ideal.reduce(K.one)
        span = {one.coords: ()}  # element key -> exponent tuple over chosen gens
        gens, orders, relations = [], [], []
        for z in sorted(self.elements, key=lambda w: (w.norm(), w.x, w.y)):
            if len(span) == self.order:
                break
            if z.coords in span:
                continue
            # order of z modulo the current span
            n, zp = 1, z
            while zp.coords not in span:
                zp = self.mul(zp, z)
                n += 1
            relations.append(span[zp.coords])
            new = {}
            for key, ex in span.items():
                w = K(*key)
                for e in range(n):
                    new[self.ideal.reduce(w * z ** e).coords] = ex + (e,)
            # pad earlier exponent tuples
            span = new
            gens.append(z)
            orders.append(n)
        self.gens, self.orders, self.relations = gens, orders, relations
        s = len(gens)
        self.log = {k: tuple(ex) + (0,) * (s - len(ex)) for k, ex in span.items()}
        self.exponent = math.lcm(*(self._element_order(g) for g in gens)) if gens else 1

    def _element_order(self, z: QuadInt) -> int:
        n, zp, one = 1, self.ideal.reduce(z), self.ideal.reduce(self.field.one)
        while zp != one:
            zp = self.mul(zp, z)
            n += 1
        return n

    def dlog(self, z: QuadInt) -> tuple:
        return self.log[self.key(z)]

    def characters(self) -> list[tuple]:
        """All characters, each as a tuple of exponents c_i with
        chi(g_i) = zeta_m^{c_i}, m = exponent of the group."""
        m = self.exponent
        out = [()]
        for i, n in enumerate(self.orders):
            rel = self.relations[i]
            nxt = []
            for partial in out:
                target = sum(r * c for r, c in zip(rel, partial)) % m
                for c in range(m):
                    if (n * c - target) % m == 0:
                        nxt.append(partial + (c,))
            out = nxt
        return out

    def chi_exponent(self, chi: tuple, z: QuadInt) -> int:
        return sum(e * c for e, c in zip(self.dlog(z), chi)) % self.exponent


_GROUP_CACHE: dict = {}


def residue_group(K: QuadraticField, f: QuadInt) -> ResidueGroup:
    key = (K.D, Ideal(f).gen.coords)
    if key not in _GROUP_CACHE:
        _GROUP_CACHE[key] = ResidueGroup(K, f)
    return _GROUP_CACHE[key]


def _unit_root_exponent(u: QuadInt) -> tuple[int, int]:
    """(j, w) with u = exp(2 pi i j / w)."""
    K = u.field
    w = K.w
    j = round(cmath.phase(complex(u)) * w / TWO_PI) % w
    return j, w


@dataclass
class GrossChar:
    """Grossencharacter of conductor dividing (f) with chi(g_i) = zeta_m^c_i
    and infinity type (a, b), psi_oo(z) = z^a zbar^b."""

    field: QuadraticField
    f: QuadInt
    chi: tuple
    infinity_type: tuple = (0, 0)

    def __post_init__(self):
        self.f = Ideal(self.f).gen
        a, b = (Fraction(x) for x in self.infinity_type)
        if (a - b).denominator != 1:
            raise ValueError("a - b must be an integer")
        self.infinity_type = (a, b)
        G = self.group
        if len(self.chi) != len(G.gens):
            raise ValueError("character does not match the residue group")
        self.chi = tuple(int(c) % G.exponent for c in self.chi)
        for u in self.field.units:
            if Ideal(self.f).norm() > 1 and not Ideal(self.f).is_unit_mod(u):
                continue
            # chi(u) psi_oo(u) = 1, compared as roots of unity
            j, w = _unit_root_exponent(u)
            m = G.exponent
            lhs = Fraction(G.chi_exponent(self.chi, u), m) + Fraction(j * int(a - b), w)
            if lhs.denominator != 1:
                raise ConductorMismatch("chi is incompatible with the infinity type on units",
                                        unit=str(u), infinity_type=(str(a), str(b)))

    @cached_property
    def group(self) -> ResidueGroup:
        return residue_group(self.field, self.f)

    @classmethod
    def trivial(cls, K: QuadraticField) -> "GrossChar":
        return cls(K, K.one, ())

    @property
    def a(self) -> Fraction:
        return self.infinity_type[0]

    @property
    def b(self) -> Fraction:
        return self.infinity_type[1]

    @property
    def conductor_norm(self) -> int:
        return Ideal(self.f).norm()

    def is_primitive(self) -> bool:
        """Whether chi does not factor through (O_K/d)^x for a proper divisor d of f."""
        K, G = self.field, self.group
        N = self.conductor_norm
        if N == 1:
            return True
        for z in K.elements_up_to_norm(N - 1):
            if not z.divides(self.f):
                continue
            sub = Ideal(z)
            if all(G.chi_exponent(self.chi, e) == 0 for e in G.elements
                   if sub.norm() == 1 or sub.contains(e - K.one)):
                return False
        return True

    def inverse(self) -> "GrossChar":
        return GrossChar(self.field, self.f, tuple(-c for c in self.chi), (-self.a, -self.b))

    def twist(self, s0) -> "GrossChar":
        """psi |.|^s0: same chi, infinity type shifted by (s0, s0)."""
        s0 = Fraction(s0)
        return GrossChar(self.field, self.f, self.chi, (self.a + s0, self.b + s0))

    def chi_value(self, z: QuadInt) -> complex:
        """chi(z) for z coprime to f, else 0."""
        if self.conductor_norm == 1:
            return 1.0 + 0j
        if not Ideal(self.f).is_unit_mod(z):
            return 0j
        e = self.group.chi_exponent(self.chi, z)
        return cmath.exp(2j * math.pi * e / self.group.exponent)

    def infinity(self, z: complex) -> complex:
        """psi_oo(z) = |z|^(a+b) (z/|z|)^(a-b)."""
        z = complex(z)
        r = abs(z)
        return r ** float(self.a + self.b) * (z / r) ** int(self.a - self.b)

    def finite_part(self, z: QuadInt) -> complex:
        """psi_f on O_K: chi(z) for z coprime to f and 0 otherwise."""
        return self.chi_value(z)

    def ideal_value(self, m: QuadInt) -> complex:
        """psi((m)) via the canonical generator; 0 if (m) is not coprime to f."""
        if not m:
            return 0j
        g = self.field.canonical(m)
        x = self.chi_value(g)
        if x == 0:
            return 0j
        return 1.0 / (x * self.infinity(complex(g)))

    def to_dict(self) -> dict:
        return {"conductor": list(self.f.coords), "chi": list(self.chi),
                "order": self.group.exponent,
                "infinity_type": [str(self.a), str(self.b)]}


def characters_of_conductor(K: QuadraticField, f: QuadInt, infinity_type=None,
                            primitive_only=False) -> list[GrossChar]:
    """All characters of (O_K/f)^x, each paired with a unit-compatible
    infinity type.  With infinity_type=None the unitary type (d/2, -d/2) with
    the smallest |d| is chosen per character."""
    G = residue_group(K, f)
    out = []
    for chi in G.characters():
        if infinity_type is not None:
            cands = [infinity_type]
        else:
            w = K.w
            cands = [(Fraction(d, 2), Fraction(-d, 2))
                     for d in sorted(range(-w, w + 1), key=lambda d: (abs(d), -d))]
        for t in cands:
            try:
                psi = GrossChar(K, f, chi, t)
            except ConductorMismatch:
                continue
            if not primitive_only or psi.is_primitive():
                out.append(psi)
            break
    return out


# ---------------------------------------------------------------------------
# Gauss sums


def _cusp_reps(psi: GrossChar) -> list[tuple[QuadInt, complex]]:
    """Pairs (c, c/f) for [c/f] in f^-1/O_K with ((c/f) f, f) = 1.

    For f = O_K the single class is represented by 1 rather than 0, which
    keeps psi_oo(a) finite; every summand below is independent of the
    representative."""
    f = complex(psi.f)
    return [(c, complex(c) / f) for c in psi.group.elements] if psi.conductor_norm > 1 \
        else [(psi.field.one, 1.0 + 0j)]


def gauss_sum(psi: GrossChar, b: QuadInt | None = None) -> complex:
    """tau(psi) = sum psi(a f) psi_oo(a/delta) e^{2 pi i Tr(a b/delta)}, b = 1
    by default, over [a] in f^-1/O_K with (a) f coprime to f.

    Conductor one gives psi_oo(delta)^-1, which is 1 for type (0, 0).
    """
    K = psi.field
    delta = K.delta_complex
    bc = 1.0 if b is None else complex(b)
    total = 0j
    for c, a in _cusp_reps(psi):
        total += (psi.ideal_value(c) * psi.infinity(a / delta)
                  * cmath.exp(2j * math.pi * 2.0 * (a * bc / delta).real))
    return total


def gauss_identity_residuals(psi: GrossChar, bs=None) -> dict:
    """Largest deviations in the two twisted Gauss-sum identities:

    (i)  sum_a psi(af) psi_oo(a/delta) e(Tr(ab/delta)) = tau(psi) psi_f(b);
    (ii) sum_a psi(af)^-1 psi_oo(a/delta)^-1 e(Tr(ab/delta)) / tau(psi^-1)
         = psi_f(b)^-1 for b coprime to f and 0 otherwise.

    The vanishing half of (ii) only holds for primitive chi and is reported
    separately.
    """
    K = psi.field
    if bs is None:
        bs = list(Ideal(psi.f).residues()) + [K(7, -3), K(-11, 5)]
    inv = psi.inverse()
    tau, tau_inv = gauss_sum(psi), gauss_sum(inv)
    err_i = err_ii = err_vanish = 0.0
    for b in bs:
        coprime = Ideal(psi.f).is_unit_mod(b)
        lhs = gauss_sum(psi, b)
        lhs2 = gauss_sum(inv, b) / tau_inv
        if coprime:
            err_i = max(err_i, abs(lhs - tau * psi.finite_part(b)))
            err_ii = max(err_ii, abs(lhs2 - 1.0 / psi.finite_part(b)))
        else:
            err_vanish = max(err_vanish, abs(lhs), abs(lhs2))
    return {"tau": tau, "identity_i": err_i, "identity_ii": err_ii,
            "vanishing": err_vanish, "primitive": psi.is_primitive()}


# ---------------------------------------------------------------------------
# coefficients


@dataclass
class BianchiCoefficients:
    """Fourier coefficients c(m) indexed by canonical ideal generators.

    growth = (C, sigma) asserts |c(m)| <= C N(m)^sigma beyond the cutoff;
    growth = None means the family is zero beyond the cutoff.
    """

    field: QuadraticField
    values: dict
    cutoff: int
    growth: tuple | None = None
    normalized: bool = False
    weight: int | None = None
    provenance: str = ""
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        vals = {}
        for key, v in self.values.items():
            g = self.field.canonical(self.field(*key) if isinstance(key, tuple) else key)
            vals[g.coords] = complex(v)
        self.values = vals
        for g in self.field.ideal_generators_up_to_norm(self.cutoff):
            self.values.setdefault(g.coords, 0j)

    @classmethod
    def synthetic(cls, K: QuadraticField, fn, cutoff: int, **kw) -> "BianchiCoefficients":
        vals = {g.coords: fn(g) for g in K.ideal_generators_up_to_norm(cutoff)}
        return cls(K, vals, cutoff, **kw)

    @classmethod
    def single(cls, K: QuadraticField, gen: QuadInt, value=1.0) -> "BianchiCoefficients":
        return cls(K, {K.canonical(gen).coords: value}, gen.norm())

    def __call__(self, m: QuadInt) -> complex:
        if not m:
            return 0j
        return self.values.get(self.field.canonical(m).coords, 0j)

    def conjugate_ideals(self) -> "BianchiCoefficients":
        """c'(m) = c(mbar)."""
        K = self.field
        vals = {K.canonical(K(*k).conj()).coords: v for k, v in self.values.items()}
        return BianchiCoefficients(K, vals, self.cutoff, self.growth, self.normalized, self.weight)

    def element_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(beta, c(beta)) over all nonzero beta in O_K up to the cutoff
        with c(beta) != 0; each ideal appears once per unit."""
        if self._table is None:
            betas, cs = [], []
            for z in self.field.elements_up_to_norm(self.cutoff):
                v = self(z)
                if v != 0:
                    betas.append(complex(z))
                    cs.append(v)
            self._table = (np.array(betas, dtype=complex), np.array(cs, dtype=complex))
        return self._table

    def abscissa(self) -> float:
        """Re(s) beyond which the Dirichlet series converges absolutely."""
        if self.growth is None:
            return -math.inf
        return self.growth[1] + 1.0


def synthetic_coefficients(K: QuadraticField, cutoff: int = 300, rate: float = 10.0):
    """c(m) = N(m) exp(-N(m)/rate), zero beyond the cutoff."""
    return BianchiCoefficients.synthetic(K, lambda g: g.norm() * math.exp(-g.norm() / rate), cutoff)


def _ideal_density(K: QuadraticField) -> float:
    # elements of norm <= Y number about 2 pi Y / sqrt(D); doubled for safety
    return 2.0 * (TWO_PI / math.sqrt(K.D)) / K.w + 1.0


# ---------------------------------------------------------------------------
# Fourier components


def _phase_power(alpha: np.ndarray, e: int) -> np.ndarray:
    """(alpha / (i |alpha|))^e."""
    u = alpha / (1j * np.abs(alpha))
    return u ** e


def fourier_tail(coeffs: BianchiCoefficients, order: int, t: float) -> float:
    """Bound for the part of a Fourier component beyond the cutoff."""
    if coeffs.growth is None:
        return 0.0
    C, sigma = coeffs.growth
    K = coeffs.field
    X = coeffs.cutoff
    rho = _ideal_density(K) * K.w
    # sum over norms N > X of rho * C N^sigma K(4 pi t sqrt(N / D))
    total, N0, step = 0.0, X + 1, max(1, X)
    while True:
        N = np.arange(N0, N0 + step, dtype=float)
        x = 2.0 * TWO_PI * t * np.sqrt(N / K.D)
        terms = rho * C * N ** sigma * special.kv(abs(order), x)
        total += float(terms.sum())
        if terms[-1] < 1e-40 * max(total, 1e-300) or x[-1] > 700:
            break
        N0 += step
        step *= 2
        if N0 > 1e9:
            return math.inf
    return total


def fourier_component(coeffs: BianchiCoefficients, n: int, z: complex, t: float, k: int,
                      return_tail: bool = False, tol: float = 1e-12):
    """f_n(z, t) = sum_{alpha in D^-1} c(alpha delta) (alpha/(i|alpha|))^{k+1-n}
    K_{n-k-1}(4 pi |alpha| t) e^{2 pi i Tr(alpha z)}, truncated at the cutoff.

    Raises CutoffInsufficient if the tail bound exceeds tol times the head.
    """
    if t <= 0:
        raise DomainError("t must be positive", t=t)
    K = coeffs.field
    betas, cs = coeffs.element_table()
    head = 0j
    if len(betas):
        alpha = betas / K.delta_complex
        ph = _phase_power(alpha, k + 1 - n)
        bess = special.kv(abs(n - k - 1), 2.0 * TWO_PI * np.abs(alpha) * t)
        ex = np.exp(2j * math.pi * 2.0 * (alpha * complex(z)).real)
        head = complex(np.sum(cs * ph * bess * ex))
    tail = fourier_tail(coeffs, n - k - 1, t)
    scale = max(abs(head), float(np.sum(np.abs(cs))) * 1e-300 if len(cs) else 0.0)
    if tail > tol * scale and tail > 0:
        need = coeffs.cutoff
        while need < 10 ** 7:
            need *= 2
            probe = BianchiCoefficients(K, {}, need, coeffs.growth)
            if fourier_tail(probe, n - k - 1, t) <= tol * scale:
                break
        raise CutoffInsufficient("coefficient cutoff too small for this t",
                                 t=t, tail=tail, head=abs(head), required_norm=need)
    return (head, tail) if return_tail else head


def full_fourier_coefficient(coeffs, n, z, t, k):
    """Coefficient of X^{2k+2-n} Y^n in the vector-valued expansion:
    t binom(2k+2, n) f_n(z, t)."""
    return t * math.comb(2 * k + 2, n) * fourier_component(coeffs, n, z, t, k)


# ---------------------------------------------------------------------------
# Dirichlet series


def L_series(coeffs: BianchiCoefficients, psi: GrossChar | None, s, by: str = "ideals",
             return_tail: bool = False):
    """sum over integral ideals m coprime to f of c(m) psi(m) N(m)^-s.

    by="elements" sums over all nonzero generators and scales by 1/w; for
    class number one this is the same number.
    """
    K = coeffs.field
    s = complex(s)
    if s.real <= coeffs.abscissa():
        raise NotConvergent("Re(s) is not beyond the abscissa of absolute convergence",
                            s=s, abscissa=coeffs.abscissa())
    psi = psi or GrossChar.trivial(K)
    if by == "ideals":
        gens = K.ideal_generators_up_to_norm(coeffs.cutoff)
        scale = 1.0
    else:
        gens = list(K.elements_up_to_norm(coeffs.cutoff))
        scale = 1.0 / K.w
    total = 0j
    for g in gens:
        c = coeffs(g)
        if c == 0:
            continue
        total += c * psi.ideal_value(g) * g.norm() ** (-s)
    total *= scale
    tail = 0.0
    if coeffs.growth is not None:
        C, sigma = coeffs.growth
        X, e = coeffs.cutoff, s.real - sigma - 1.0
        tail = C * _ideal_density(K) * X ** (-e) / e
    return (total, tail) if return_tail else total


# ---------------------------------------------------------------------------
# the Mellin identity


def _weight_matrix(coeffs, xs, n, k):
    """W[x, alpha] = c (alpha/(i|alpha|))^{k+1-n} e^{2 pi i Tr(alpha x)}."""
    K = coeffs.field
    betas, cs = coeffs.element_table()
    alpha = betas / K.delta_complex
    ph = _phase_power(alpha, k + 1 - n)
    xs = np.asarray(xs, dtype=complex)
    ex = np.exp(2j * math.pi * 2.0 * np.real(np.outer(xs, alpha)))
    return alpha, (cs * ph)[None, :] * ex


def mellin_of_components(coeffs, xs, n, k, power, epsrel=1e-11):
    """int_0^oo t^power f_n(x, t) dt for every x in xs, by quadrature of the
    truncated Fourier series (one vector-valued integral)."""
    alpha, W = _weight_matrix(coeffs, xs, n, k)
    if not len(alpha):
        return np.zeros(len(xs), dtype=complex)
    if power + 1 <= abs(n - k - 1):
        raise Divergent("Mellin transform diverges at 0", power=power, order=n - k - 1)
    lam = 2.0 * TWO_PI * np.abs(alpha)
    order = abs(n - k - 1)
    m = len(xs)

    def integrand(t):
        if t <= 0:
            return np.zeros(2 * m)
        v = W @ (special.kv(order, lam * t) * t ** power)
        return np.concatenate([v.real, v.imag])

    # the slowest decaying term sets the scale of the split point
    scale = 1.0 / float(lam.min())
    head, _ = integrate.quad_vec(integrand, 0.0, scale, epsabs=0.0, epsrel=epsrel, limit=400)
    tail, _ = integrate.quad_vec(lambda u: integrand(scale * math.exp(u)) * scale * math.exp(u),
                                 0.0, 7.0, epsabs=0.0, epsrel=epsrel, limit=400)
    out = head + tail
    return out[:m] + 1j * out[m:]


def mellin_of_components_exact(coeffs, xs, n, k, power):
    """Same integral term by term through the closed-form standard integral."""
    alpha, W = _weight_matrix(coeffs, xs, n, k)
    if not len(alpha):
        return np.zeros(len(xs), dtype=complex)
    lam = 2.0 * TWO_PI * np.abs(alpha)
    j = power + 1
    if j <= abs(n - k - 1):
        raise Divergent("Mellin transform diverges at 0", power=power, order=n - k - 1)
    g = (lam ** (-j) * 2.0 ** (j - 2) * special.gamma((j + n - k - 1) / 2)
         * special.gamma((j - n + k + 1) / 2))
    return W @ g


def mellin_weight_n(psi: GrossChar, k: int) -> int:
    """The index n matched to a unitary psi of type (-u, u): n = k + 1 - 2u."""
    if psi.a + psi.b != 0:
        raise ConductorMismatch("Mellin identity needs a unitary infinity type (-u, u)",
                                infinity_type=(str(psi.a), str(psi.b)))
    n = k + 1 + 2 * psi.a
    if n.denominator != 1 or not 0 <= n <= 2 * k + 2:
        raise ConductorMismatch("infinity type outside the weight range", k=k, n=str(n))
    return int(n)


def mellin_constant(psi: GrossChar, k: int, n: int, s) -> complex:
    """4 (2pi)^{2s} i^{k+1-n} binom(2k+2,n)^-1 / (|delta|^{2s} Gamma(s+m/2)
    Gamma(s-m/2) w tau(psi^-1)), m = n-k-1."""
    K = psi.field
    s = complex(s)
    m = n - k - 1
    tau = gauss_sum(psi.inverse())
    return (4.0 * TWO_PI ** (2 * s) * 1j ** (k + 1 - n) / math.comb(2 * k + 2, n)
            / (abs(K.delta_complex) ** (2 * s) * special.gamma(s + m / 2) * special.gamma(s - m / 2)
               * K.w * tau))


def integral_formula_rhs(coeffs, psi, s, k, exact=False):
    """A(n, psi, s) sum_{[a]} psi(af)^-1 a^u abar^v int_0^oo t^{2s-2} F_n(a, t) dt
    with F_n = t binom(2k+2, n) f_n the full Fourier coefficient."""
    n = mellin_weight_n(psi, k)
    s = complex(s)
    if s.imag != 0:
        raise DomainError("quadrature path implemented for real s", s=s)
    power = 2 * s.real - 1
    if power == int(power):
        power = int(power)
    reps = _cusp_reps(psi)
    mel = (mellin_of_components_exact if exact else mellin_of_components)(
        coeffs, [a for _, a in reps], n, k, power)
    total = 0j
    for (c, a), val in zip(reps, mel):
        # a^u abar^-u = psi_oo(a)^-1 for the type (-u, u)
        weight = 1.0 / psi.infinity(a)
        total += weight / psi.ideal_value(c) * math.comb(2 * k + 2, n) * val
    return mellin_constant(psi, k, n, s) * total


@dataclass
class FormulaReport:
    lhs: complex
    rhs: complex
    discrepancy: float
    n: int
    s: float

    def to_dict(self):
        return {"lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "discrepancy": self.discrepancy, "n": self.n, "s": self.s}


def integral_formula_check(coeffs, psi, s, k, exact=False) -> FormulaReport:
    """Dirichlet series on one side, quadrature of the Fourier expansion on
    the other.  The discrepancy is relative to max(|lhs|, sum |terms|*1e-3)
    so that accidental cancellation in the series does not inflate it."""
    n = mellin_weight_n(psi, k)
    if not psi.is_primitive():
        raise ConductorMismatch("the Mellin identity needs psi of conductor exactly f",
                                conductor=str(psi.f))
    lhs = L_series(coeffs, psi, s)
    rhs = integral_formula_rhs(coeffs, psi, s, k, exact=exact)
    K = coeffs.field
    absum = sum(abs(coeffs(g)) * g.norm() ** (-float(s))
                for g in K.ideal_generators_up_to_norm(coeffs.cutoff))
    denom = max(abs(lhs), 1e-3 * absum, 1e-300)
    return FormulaReport(lhs, rhs, abs(lhs - rhs) / denom if absum else abs(lhs - rhs), n, float(s))


# ---------------------------------------------------------------------------
# c_{q,r} and normalised L-values


def c_qr_integral(coeffs, a: complex, q: int, r: int, k: int, exact=False) -> complex:
    """2 binom(2k+2,n)^-1 (-1)^{k+r+1} int_0^oo t^{q+r} F_n(a, t) dt with
    n = k-q+r+1 and F_n the full Fourier coefficient t binom(2k+2,n) f_n."""
    if not (0 <= q <= k and 0 <= r <= k):
        raise DomainError("need 0 <= q, r <= k", q=q, r=r, k=k)
    n = k - q + r + 1
    f = mellin_of_components_exact if exact else mellin_of_components
    val = f(coeffs, [complex(a)], n, k, q + r + 1)[0]
    return 2.0 * (-1) ** (k + r + 1) * val


def gamma_factor(q, r, t=1):
    """Gamma(q+t) Gamma(r+t) / ((2 pi i)^{q+t} (2 pi i)^{r+t})."""
    return special.gamma(q + t) * special.gamma(r + t) / ((2j * math.pi) ** (q + t) * (2j * math.pi) ** (r + t))


def critical_type(psi: GrossChar) -> tuple[int, int]:
    """(q, r) with psi_oo(z) = z^q zbar^r."""
    if psi.a.denominator != 1 or psi.b.denominator != 1:
        raise ConductorMismatch("critical characters need integral infinity type")
    return int(psi.a), int(psi.b)


def lambda_normalized(coeffs, psi: GrossChar, t=1) -> complex:
    """Lambda(Phi, psi, t) = Gamma(q+t)Gamma(r+t)/((2pi i)^{q+t}(2pi i)^{r+t}) L(Phi, psi, t)."""
    q, r = critical_type(psi)
    return gamma_factor(q, r, t) * L_series(coeffs, psi, t)


def unitary_part(psi: GrossChar) -> GrossChar:
    """psi |.|^{-(q+r)/2}, of type ((q-r)/2, (r-q)/2)."""
    return psi.twist(-(psi.a + psi.b) / 2)


def lambda_from_cqr(coeffs, psi: GrossChar, k: int, exact=False) -> complex:
    """Lambda(Phi, psi) assembled from the c_{q,r} integrals at the cusps of
    f^-1/O_K:

        2 (-1)^k / (D^{(q+r+2)/2} w tau(psi_u^-1)) sum_a psi_u(af)^-1 psi_u,oo(a)^-1 c_{r,q}(a)

    where psi_u is the unitary part of psi.  For psi_oo = z^A zbar^B the
    matching Fourier index is n = k+1+A-B, which is the c_{q,r} with
    (q, r) = (B, A).
    """
    A, B = critical_type(psi)
    if not (0 <= A <= k and 0 <= B <= k):
        raise DomainError("infinity type outside the critical range", type=(A, B), k=k)
    K = coeffs.field
    pu = unitary_part(psi)
    tau = gauss_sum(pu.inverse())
    total = 0j
    for c, a in _cusp_reps(pu):
        weight = 1.0 / pu.infinity(a)
        total += weight / pu.ideal_value(c) * c_qr_integral(coeffs, a, B, A, k, exact=exact)
    return 2.0 * (-1) ** k / (K.D ** ((A + B + 2) / 2) * K.w * tau) * total


def lambda_report(coeffs, psi, k, exact=False) -> dict:
    direct = lambda_normalized(coeffs, psi)
    via = lambda_from_cqr(coeffs, psi, k, exact=exact)
    pu = unitary_part(psi)
    q, r = critical_type(psi)
    # the two L-value conventions and the Gauss-sum rescaling
    l_shift = L_series(coeffs, pu, (q + r + 2) / 2)
    l_twist = L_series(coeffs, psi, 1)
    tau_lhs = gauss_sum(psi.inverse())
    tau_rhs = (abs(psi.field.delta_complex) ** (q + r) * psi.conductor_norm ** ((q + r) / 2)
               * gauss_sum(pu.inverse()))
    return {"lambda": direct, "lambda_from_cqr": via,
            "discrepancy": abs(direct - via) / max(abs(direct), 1e-300),
            "shift_vs_twist": abs(l_shift - l_twist),
            "tau_rescaling": abs(tau_lhs - tau_rhs)}


def interpolation_constant(psi: GrossChar, k: int, lam_f) -> complex:
    """(-1)^{k+q+r} 2 psi_f(x_f) lam_f / (psi(x_f) D w tau(psi^-1)).

    For class number one the idele x_f only has components at primes of f,
    so psi_f(x_f) = psi(x_f) and the ratio is 1.
    """
    q, r = critical_type(psi)
    K = psi.field
    return (-1) ** (k + q + r) * 2.0 * complex(lam_f) / (K.D * K.w * gauss_sum(psi.inverse()))


# ---------------------------------------------------------------------------
# eta


def eta_convert(values, k: int, inverse: bool = False) -> np.ndarray:
    """Rescale a (k+1)x(k+1) block from the basis X^q Y^{k-q} Xbar^r Ybar^{k-r}
    to the dual monomials X*^{k-q} Y*^q Xbar*^{k-r} Ybar*^r, dividing by
    binom(k,q) binom(k,r) (multiplying when inverse)."""
    a = np.asarray(values)
    if a.shape != (k + 1, k + 1):
        raise ValueError("expected a (k+1)x(k+1) block")
    exact = a.dtype == object or np.issubdtype(a.dtype, np.integer)
    out = np.empty(a.shape, dtype=object if exact else np.result_type(a.dtype, float))
    for q in range(k + 1):
        for r in range(k + 1):
            c = math.comb(k, q) * math.comb(k, r)
            if inverse:
                out[q, r] = a[k - q, k - r] * c
            else:
                out[k - q, k - r] = Fraction(a[q, r]) / c if exact else a[q, r] / c
    return out
