"""Modular symbols for Gamma_1(n) with values in moment grids, Hecke
operators, and the solver for the classical symbol space.

A symbol is stored by its values on the paths {r.0} - {r.oo} of the coset
representatives r.  The value on the path of any g = gamma * r is
value[r] | gamma^(-1), and general divisors are evaluated through the
continued-fraction decomposition.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import linalg, padic
from .distributions import (MomentGrid, Profile, action_matrices, eff_table, grid_width)
from .errors import (ClassDataMissing, NonPrincipalPower, PrecisionLoss, SchemaError,
                     VerificationFailed)
from .geometry import Cusp, Divisor, LevelData, Matrix
from .padic import LocalElement, LocalFieldDesc
from .quadratic import Ideal, QuadInt, QuadraticField


# ---------------------------------------------------------------------------
# embedding matrices and batched actions


def embed_matrices(mats: list[Matrix], fld: LocalFieldDesc) -> tuple[np.ndarray, np.ndarray]:
    """sigma_1 and sigma_2 images of O_K matrices, each of shape (d, B, 2, 2)."""
    flat = [z for g in mats for z in g]
    s1, s2 = padic.sigma_arrays(flat, fld)
    B = len(mats)
    return s1.reshape(fld.d, B, 2, 2), s2.reshape(fld.d, B, 2, 2)


def batched_action(mats: list[Matrix], k: int, W: int, fld: LocalFieldDesc):
    """Action matrices (T1, T2), each (d, B, W, W), for O_K matrices."""
    g1, g2 = embed_matrices(mats, fld)
    T1 = action_matrices(g1[..., 0, 0], g1[..., 0, 1], g1[..., 1, 0], g1[..., 1, 1], k, W, fld)
    T2 = action_matrices(g2[..., 0, 0], g2[..., 0, 1], g2[..., 1, 0], g2[..., 1, 1], k, W, fld)
    return T1, T2


def _act_batch(T1, T2, vals, fld):
    left = padic.matmul(T1, vals, fld)
    return padic.matmul(left, np.swapaxes(T2, -1, -2), fld)


def _scatter_add(out: np.ndarray, dst: np.ndarray, contrib: np.ndarray, P: int) -> np.ndarray:
    """out[:, dst[t]] += contrib[:, t], reduced mod P without overflow."""
    if contrib.dtype == object or out.dtype == object:
        for t, i in enumerate(dst):
            out[:, i] = (out[:, i] + contrib[:, t]) % P
        return out
    counts = np.bincount(dst, minlength=out.shape[1])
    chunk = max(1, (2**62) // P)
    if counts.max(initial=0) < chunk:
        np.add.at(out, (slice(None), dst), contrib)
        return out % P
    for s in range(0, len(dst), chunk):
        np.add.at(out, (slice(None), dst[s:s + chunk]), contrib[:, s:s + chunk])
        out %= P
    return out


# ---------------------------------------------------------------------------
# symbols


class ModularSymbol:
    """Gamma_1(n)-equivariant map from degree-zero divisors to moment grids.

    ``values`` has shape (d, G, W, W): one grid per coset representative.
    """

    def __init__(self, lvl: LevelData, k: int, fld: LocalFieldDesc, profile: Profile, N: int,
                 values: np.ndarray, reduce: bool = True):
        self.lvl = lvl
        self.k = k
        self.fld = fld
        self.profile = Profile(profile)
        self.N = N
        W = values.shape[2]
        self.eff = eff_table(self.profile, k, N, W, fld)
        v = np.array(values, dtype=fld.dtype) % fld.modulus
        if reduce:
            v = padic.reduce_mod_pi(v, self.eff[None], fld)
        v.setflags(write=False)
        self.values = v

    @classmethod
    def zero(cls, lvl, k, fld, profile=Profile.FULL, N=None) -> "ModularSymbol":
        profile = Profile(profile)
        N = k + 1 if N is None or profile is Profile.FULL else N
        W = k + 1 if profile is Profile.FULL else grid_width(k, N)
        return cls(lvl, k, fld, profile, N, padic.zeros((len(lvl), W, W), fld))

    @property
    def W(self) -> int:
        return self.values.shape[2]

    @property
    def G(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray, profile=None, N=None) -> "ModularSymbol":
        return ModularSymbol(self.lvl, self.k, self.fld, profile or self.profile,
                             self.N if N is None else N, values)

    def grid(self, i: int) -> MomentGrid:
        return MomentGrid(self.k, self.N, self.profile, self.values[:, i], self.fld, reduce=False)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def scale(self, c: LocalElement) -> "ModularSymbol":
        return self.with_values(padic.mul(self.values, c.array().reshape(-1, 1, 1, 1), self.fld))

    def __eq__(self, other):
        if not isinstance(other, ModularSymbol):
            return NotImplemented
        return (self.k, self.N, self.profile, self.values.shape) == (
            other.k, other.N, other.profile, other.values.shape) and bool((self.values == other.values).all())

    def is_zero(self) -> bool:
        return not self.values.any()

    def __repr__(self):
        return (f"ModularSymbol(D={self.lvl.field.D}, level={self.lvl.level.gen}, k={self.k}, "
                f"profile={self.profile.value}, N={self.N}, G={self.G})")

    def change_precision(self, fld: LocalFieldDesc) -> "ModularSymbol":
        vals = np.array(self.values, dtype=object) % fld.modulus
        return ModularSymbol(self.lvl, self.k, fld, self.profile, self.N, vals.astype(fld.dtype))

    def specialize(self) -> "ModularSymbol":
        k = self.k
        return ModularSymbol(self.lvl, k, self.fld, Profile.FULL, k + 1, self.values[:, :, :k + 1, :k + 1])

    # evaluation ------------------------------------------------------------
    def value_on_matrix(self, g: Matrix) -> MomentGrid:
        """phi({g.0} - {g.oo}) for g in SL_2(O_K)."""
        return self.evaluate_paths([(1, g)])

    def evaluate_paths(self, terms: list[tuple[int, Matrix]]) -> MomentGrid:
        fld = self.fld
        out = padic.zeros((self.W, self.W), fld)
        if terms:
            gammas, idx, coef = [], [], []
            for c, g in terms:
                gam, i = geo.reduce_to_rep(g, self.lvl)
                gammas.append(geo.mat_inv(gam))
                idx.append(i)
                coef.append(c)
            T1, T2 = batched_action(gammas, self.k, self.W, fld)
            contrib = _act_batch(T1, T2, self.values[:, idx], fld)
            cvec = np.array(coef, dtype=fld.dtype) % fld.modulus
            contrib = padic.mulmod(contrib, cvec[None, :, None, None], fld.modulus)
            out = _scatter_add(out[:, None], np.zeros(len(idx), dtype=int), contrib, fld.modulus)[:, 0]
        return MomentGrid(self.k, self.N, self.profile, out, fld)

    def evaluate(self, D: Divisor) -> MomentGrid:
        """phi(D) for a degree-zero divisor D."""
        return self.evaluate_paths(geo.decompose_divisor(D))

    # serialisation -----------------------------------------------------------
    def to_json(self, provenance: str = "computed") -> dict:
        return {
            "kind": "modular_symbol",
            "field": {"D": self.lvl.field.D, "p": self.fld.p, "M": self.fld.M},
            "level": list(self.lvl.level.gen.coords),
            "k": self.k, "N": self.N, "profile": self.profile.value,
            "provenance": provenance,
            "values": [[[[str(int(c)) for c in self.values[:, g, i, j]] for j in range(self.W)]
                        for i in range(self.W)] for g in range(self.G)],
        }

    @classmethod
    def from_json(cls, obj: dict, lvl: LevelData | None = None) -> "ModularSymbol":
        try:
            f = obj["field"]
            if "provenance" not in obj:
                raise SchemaError("symbol record lacks a provenance field")
            fld = padic.make_local_field(int(f["D"]), int(f["p"]), int(f["M"]))
            K = QuadraticField(int(f["D"]))
            if lvl is None:
                lvl = geo.build_level(K(*obj["level"]))
            vals = obj["values"]
            G, W = len(vals), len(vals[0])
            if G != len(lvl):
                raise SchemaError("number of values does not match the coset count",
                                  expected=len(lvl), got=G)
            arr = padic.zeros((G, W, W), fld)
            for g in range(G):
                for i in range(W):
                    for j in range(W):
                        for c, s in enumerate(vals[g][i][j]):
                            arr[c, g, i, j] = int(s)
            return cls(lvl, int(obj["k"]), fld, Profile(obj["profile"]), int(obj["N"]), arr)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SchemaError(f"malformed symbol record: {exc}") from exc


# ---------------------------------------------------------------------------
# Hecke operators


@dataclass
class HeckeOperator:
    """Double coset operator given by the O_K matrices in its sum."""

    name: str
    mats: list


def up_operator(K: QuadraticField, p: int) -> HeckeOperator:
    """U_p = sum over a mod (p) of (1, a; 0, p)."""
    ideal = Ideal(K(p))
    return HeckeOperator(f"U_{p}", [(K.one, a, K.zero, K(p)) for a in ideal.residues()])


def uprime_operator(beta: QuadInt, prime: QuadInt | None = None, n: int = 1) -> HeckeOperator:
    """U for a principal prime power (beta) = P^n: sum of (1, a; 0, beta)."""
    K = beta.field
    if prime is not None:
        target = prime.norm() ** n
        if beta.norm() != target or not (prime ** n).divides(beta):
            raise NonPrincipalPower(f"({beta}) is not the {n}-th power of ({prime})", beta=beta, prime=prime)
    ideal = Ideal(beta)
    return HeckeOperator(f"U_({beta})", [(K.one, a, K.zero, beta) for a in ideal.residues()])


def compose_operators(A: HeckeOperator, B: HeckeOperator) -> HeckeOperator:
    """Operator for applying A then B (matrices multiply as a*b)."""
    return HeckeOperator(f"{A.name}{B.name}", [geo.mat_mul(a, b) for a in A.mats for b in B.mats])


class Stencil:
    """Precomputed terms of a Hecke operator on the generators of a level:
    (phi|T)[i] = sum_t value[src_t] | mats_t for t with dst_t = i."""

    def __init__(self, lvl: LevelData, op: HeckeOperator):
        self.lvl = lvl
        self.op = op
        dst, src, mats = [], [], []
        K = lvl.field
        zero, inf = Cusp.zero(K), Cusp.infinity(K)
        for i, rep in enumerate(lvl.reps):
            for s in op.mats:
                g = geo.mat_mul(s, rep)
                for h in geo.decompose_path(zero.act(g), inf.act(g)):
                    gam, j = geo.reduce_to_rep(h, lvl)
                    dst.append(i)
                    src.append(j)
                    mats.append(geo.mat_mul(geo.mat_inv(gam), s))
        self.dst = np.array(dst, dtype=int)
        self.src = np.array(src, dtype=int)
        self.mats = mats
        self._cache: dict = {}

    def action(self, k: int, W: int, fld: LocalFieldDesc):
        key = (k, W, fld)
        if key not in self._cache:
            self._cache[key] = batched_action(self.mats, k, W, fld)
        return self._cache[key]

    def apply_values(self, values: np.ndarray, k: int, fld: LocalFieldDesc) -> np.ndarray:
        W = values.shape[-1]
        T1, T2 = self.action(k, W, fld)
        contrib = _act_batch(T1, T2, values[:, self.src], fld)
        out = padic.zeros(values.shape[1:], fld)
        return _scatter_add(out, self.dst, contrib, fld.modulus)


_STENCILS: dict = {}


def stencil_for(lvl: LevelData, op: HeckeOperator) -> Stencil:
    key = (id(lvl), op.name, len(op.mats))
    st = _STENCILS.get(key)
    if st is None or st.lvl is not lvl:
        st = Stencil(lvl, op)
        _STENCILS[key] = st
    return st


def apply_hecke(phi: ModularSymbol, op: HeckeOperator) -> ModularSymbol:
    st = stencil_for(phi.lvl, op)
    return phi.with_values(st.apply_values(phi.values, phi.k, phi.fld))


def apply_Up(phi: ModularSymbol) -> ModularSymbol:
    if not phi.lvl.level.contains(phi.lvl.field(phi.fld.p)):
        raise ValueError("U_p needs (p) to divide the level")
    return apply_hecke(phi, up_operator(phi.lvl.field, phi.fld.p))


def apply_Uprin(phi: ModularSymbol, beta: QuadInt, prime: QuadInt | None = None, n: int = 1) -> ModularSymbol:
    return apply_hecke(phi, uprime_operator(beta, prime, n))


def apply_Uf(phi: ModularSymbol, factors: list[tuple[QuadInt, int]]) -> ModularSymbol:
    """U_f for f = prod P^n, given as (prime generator, exponent) pairs."""
    out = phi
    for prime, n in factors:
        for _ in range(n):
            out = apply_Uprin(out, prime, prime, 1)
    return out


def hecke_eval_direct(phi: ModularSymbol, op: HeckeOperator, D: Divisor) -> MomentGrid:
    """(phi|T)(D) = sum_s phi(s.D)|s computed from the definition."""
    terms = []
    for s in op.mats:
        for n, g in geo.decompose_divisor(D.act(s)):
            terms.append((n, g, s))
    fld = phi.fld
    out = padic.zeros((phi.W, phi.W), fld)
    if not terms:
        return MomentGrid(phi.k, phi.N, phi.profile, out, fld)
    mats, idx, coef = [], [], []
    for n, g, s in terms:
        gam, i = geo.reduce_to_rep(g, phi.lvl)
        mats.append(geo.mat_mul(geo.mat_inv(gam), s))
        idx.append(i)
        coef.append(n)
    T1, T2 = batched_action(mats, phi.k, phi.W, fld)
    contrib = _act_batch(T1, T2, phi.values[:, idx], fld)
    cvec = np.array(coef, dtype=fld.dtype) % fld.modulus
    contrib = padic.mulmod(contrib, cvec[None, :, None, None], fld.modulus)
    out = _scatter_add(out[:, None], np.zeros(len(idx), dtype=int), contrib, fld.modulus)[:, 0]
    return MomentGrid(phi.k, phi.N, phi.profile, out, fld)


# ---------------------------------------------------------------------------
# tuples of symbols over class group representatives


@dataclass
class ClassData:
    """For one prime P: the permutation i -> j_i and alpha_i with
    P I_i = (alpha_i) I_{j_i}."""

    perm: list
    alphas: list

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError("class data permutation is not a bijection")


@dataclass
class SymbolTuple:
    components: list
    class_data: dict = field(default_factory=dict)  # prime key -> ClassData


def apply_Up_tuple(t: SymbolTuple, prime_key, hecke=None) -> SymbolTuple:
    """Component i of the result is the Hecke image of component j_i under
    the matrices (1, a; 0, alpha_i), a mod P."""
    if prime_key not in t.class_data:
        raise ClassDataMissing(f"no class data for prime {prime_key}", prime=prime_key)
    cd = t.class_data[prime_key]
    if hecke is None:
        hecke = lambda phi, alpha: apply_hecke(phi, uprime_operator(alpha))
    comps = [hecke(t.components[cd.perm[i]], cd.alphas[i]) for i in range(len(t.components))]
    return SymbolTuple(comps, t.class_data)


# ---------------------------------------------------------------------------
# relations


@dataclass
class RelationSet:
    """Formal identities sum coef * gamma . P(rep_j) = 0 among generator paths."""

    relations: list = field(default_factory=list)  # list of [(coef, gamma, j)]

    def add(self, lvl: LevelData, terms: list[tuple[int, Matrix]], check: bool = True):
        """Add sum coef * P(g) = 0 given as (coef, g) with g in SL_2(O_K)."""
        rel = []
        for c, g in terms:
            gam, j = geo.reduce_to_rep(g, lvl)
            rel.append((c, gam, j))
        if check:
            total = Divisor()
            for c, gam, j in rel:
                total = total + Divisor.of_matrix(geo.mat_mul(gam, lvl.reps[j])).scale(c)
            if not total.is_zero():
                raise ValueError("relation does not sum to the zero divisor")
        self.relations.append(rel)

    def __len__(self):
        return len(self.relations)


def unit_matrices(K: QuadraticField) -> list[Matrix]:
    return [(u, K.zero, K.zero, K.unit_inverse(u)) for u in K.units]


def random_sl2(K: QuadraticField, rng: random.Random, size: int) -> Matrix:
    """Random element of SL_2(O_K) with entries of size about ``size``."""
    while True:
        c = K(rng.randint(-size, size), rng.randint(-size, size))
        d = K(rng.randint(-size, size), rng.randint(-size, size))
        if not (c or d):
            continue
        g = geo._complete_row(c, d)
        if g is not None:
            t = K(rng.randint(-size, size), rng.randint(-size, size))
            a, b, c, d = g
            # left multiply by (1, t; 0, 1) for variety
            return (a + t * c, b + t * d, c, d)


def _kron_action(mats: list[Matrix], k: int, fld: LocalFieldDesc) -> np.ndarray:
    """Matrices acting on flattened (k+1)^2 blocks, shape (d, B, n, n)."""
    T1, T2 = batched_action(mats, k, k + 1, fld)
    n = (k + 1) ** 2
    # (T1 (x) T2)[(i, j), (a, b)] = T1[i, a] T2[j, b]
    K4 = padic.mul(T1[:, :, :, None, :, None], T2[:, :, None, :, None, :], fld)
    return K4.reshape(fld.d, len(mats), n, n)


@dataclass
class ClassicalSpace:
    """Basis of Symb_Gamma(V*_{k,k}(O_L)) and Hecke data at working precision."""

    lvl: LevelData
    k: int
    fld: LocalFieldDesc          # precision used for the solve
    basis: list                  # ModularSymbol, FULL profile
    coord_rows: list             # flat indices whose values are the coordinates
    relations: RelationSet
    hecke: dict = field(default_factory=dict)   # name -> matrix (d, n, n)
    eigen: list = field(default_factory=list)   # EigenData

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coordinates(self, phi: ModularSymbol) -> np.ndarray:
        flat = phi.values.reshape(self.fld.d, -1)
        return flat[:, self.coord_rows]

    def combine(self, coeffs: np.ndarray) -> ModularSymbol:
        fld = self.fld
        acc = np.zeros_like(self.basis[0].values)
        for b, sym in enumerate(self.basis):
            c = coeffs[:, b].reshape(-1, 1, 1, 1)
            acc = (acc + padic.mul(sym.values, c, fld)) % fld.modulus
        return self.basis[0].with_values(acc)


@dataclass
class EigenData:
    eigenvalues: dict        # operator name -> LocalElement
    symbol: ModularSymbol    # FULL-profile eigensymbol at solve precision
    slopes: dict             # operator name -> Fraction

    def eigenvalue(self, name: str) -> LocalElement:
        return self.eigenvalues[name]


def _relation_rows(relations: list, k: int, fld: LocalFieldDesc, roots_of: list, expr_stack: np.ndarray,
                   nroots: int) -> np.ndarray:
    """Rows (in the free unknowns) expressing sum coef * value[j] | gamma^(-1) = 0."""
    blk = (k + 1) ** 2
    if not relations:
        return padic.zeros((0, nroots * blk), fld)
    rel_idx, coefs, mats, gens = [], [], [], []
    for r, rel in enumerate(relations):
        for c, gam, j in rel:
            rel_idx.append(r)
            coefs.append(c)
            mats.append(geo.mat_inv(gam))
            gens.append(j)
    acts = _kron_action(mats, k, fld)
    contrib = padic.matmul(acts, expr_stack[:, gens], fld)
    cvec = np.array(coefs, dtype=object) % fld.modulus
    contrib = padic.mulmod(contrib, cvec.astype(fld.dtype)[None, :, None, None], fld.modulus)
    out = padic.zeros((len(relations), nroots, blk, blk), fld)
    roots = np.array([roots_of[j] for j in gens])
    flat_dst = np.array(rel_idx) * nroots + roots
    out = out.reshape(fld.d, len(relations) * nroots, blk, blk)
    out = _scatter_add(out, flat_dst, contrib, fld.modulus)
    out = out.reshape(fld.d, len(relations), nroots, blk, blk)
    # row (rel, cell) and column (root, cell')
    return np.transpose(out, (0, 1, 3, 2, 4)).reshape(fld.d, len(relations) * blk, nroots * blk)


class _IncrementalKernel:
    """Kernel of a growing row set, updated by restriction."""

    def __init__(self, n: int, fld: LocalFieldDesc):
        self.fld = fld
        self.K = linalg.identity(n, fld)
        self.precision = fld.cap  # K is exact modulo pi^precision

    def add_rows(self, A: np.ndarray, chunk: int = 2000):
        for s in range(0, A.shape[1], chunk):
            if self.K.shape[2] == 0:
                return
            B = padic.matmul(A[:, s:s + chunk], self.K, self.fld)
            if padic.vpi(B, self.fld).min() >= self.precision:
                continue
            Z, prec = linalg.kernel(B, self.fld, known=self.precision, with_precision=True)
            self.K = padic.matmul(self.K, Z, self.fld)
            self.precision = prec

    @property
    def dim(self) -> int:
        return self.K.shape[2]


def solve_classical_space(lvl: LevelData, k: int, fld: LocalFieldDesc, seed: int = 0,
                          batch: int = 40, max_batches: int = 12) -> ClassicalSpace:
    """Solve for Symb_Gamma(V*_{k,k}(O_L)) by linear algebra over O_L."""
    K = lvl.field
    rng = random.Random(seed)
    blk = (k + 1) ** 2
    G = len(lvl)
    S = geo.S_matrix(K)
    units = [J for J in unit_matrices(K) if J[0] != K.one]
    # monomial relations value[j] | gamma^(-1) = sign * value[i] from S and units
    neighbours = [[] for _ in range(G)]
    monomial = RelationSet()
    for i, rep in enumerate(lvl.reps):
        for M, sign in [(S, -1)] + [(J, 1) for J in units]:
            g = geo.mat_mul(rep, M)
            gam, j = geo.reduce_to_rep(g, lvl)
            monomial.add(lvl, [(1, g), (-sign, rep)])
            neighbours[i].append((j, gam, sign))
    # spanning forest: value[j] = expr[j] @ x_{root(j)}
    roots_of = [-1] * G
    expr: list = [None] * G
    cycle_terms = []
    nroots = 0
    ident = linalg.identity(blk, fld)
    for start in range(G):
        if roots_of[start] >= 0:
            continue
        roots_of[start] = nroots
        expr[start] = ident
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j, gam, sign in neighbours[i]:
                # value[j] | gamma^(-1) = sign * value[i]  =>  value[j] = sign * value[i] | gamma
                act = _kron_action([gam], k, fld)[:, 0]
                e = padic.matmul(act, expr[i], fld)
                if sign < 0:
                    e = (-e) % fld.modulus
                if roots_of[j] < 0:
                    roots_of[j] = nroots
                    expr[j] = e
                    queue.append(j)
                else:
                    cycle_terms.append((j, e))
        nroots += 1
    expr_stack = np.stack(expr, axis=1)
    inc = _IncrementalKernel(nroots * blk, fld)
    cyc = padic.zeros((len(cycle_terms), blk, nroots * blk), fld)
    for t, (j, e) in enumerate(cycle_terms):
        r = roots_of[j]
        cyc[:, t, :, r * blk:(r + 1) * blk] = (expr[j] - e) % fld.modulus
    inc.add_rows(cyc.reshape(fld.d, -1, nroots * blk))
    relations = RelationSet()
    # three-term relations
    R = geo.R_matrix(K)
    R2 = geo.mat_mul(R, R)
    for rep in lvl.reps:
        relations.add(lvl, [(1, rep), (1, geo.mat_mul(rep, R)), (1, geo.mat_mul(rep, R2))])
    inc.add_rows(_relation_rows(relations.relations, k, fld, roots_of, expr_stack, nroots))

    def consistency(mats):
        rs = RelationSet()
        zero, inf = Cusp.zero(K), Cusp.infinity(K)
        for g in mats:
            paths = geo.decompose_path(zero.act(g), inf.act(g))
            rs.add(lvl, [(1, h) for h in paths] + [(-1, g)], check=False)
        relations.relations.extend(rs.relations)
        inc.add_rows(_relation_rows(rs.relations, k, fld, roots_of, expr_stack, nroots))

    # paths rep * X for short words X, then random matrices until the
    # dimension has been stable for two batches
    small = [(K.one, K(a, b), K.zero, K.one) for a in range(-1, 2) for b in range(-1, 2) if a or b]
    small += [(K.one, K.zero, K(a, b), K.one) for a in range(-1, 2) for b in range(-1, 2) if a or b]
    consistency([geo.mat_mul(rep, X) for rep in lvl.reps for X in small])
    stable = 0
    for b in range(max_batches):
        before = inc.dim
        consistency([random_sl2(K, rng, 3 + 2 * b) for _ in range(batch)])
        stable = stable + 1 if inc.dim == before else 0
        if stable >= 2:
            break
    # torsion pivots along the way cost digits; drop to what is still exact
    if inc.precision < fld.cap:
        M_ok = inc.precision // fld.e
        if M_ok < 1:
            raise PrecisionLoss("classical solve lost all precision", precision=inc.precision)
        fld = fld.with_precision(M_ok)
        expr = [e if e is ident else (np.array(e, dtype=object) % fld.modulus).astype(fld.dtype) for e in expr]
    ker = np.array(inc.K, dtype=object) % fld.modulus
    ker = ker.astype(fld.dtype)
    basis_vecs, coord_idx = linalg.normalize_basis(ker, fld) if ker.shape[2] else (ker, [])
    # expand each basis vector to values on all generators
    basis = []
    for b in range(basis_vecs.shape[2]):
        x = basis_vecs[:, :, b]
        vals = padic.zeros((G, k + 1, k + 1), fld)
        for j in range(G):
            r = roots_of[j]
            v = linalg.mat_vec(expr[j], x[:, r * blk:(r + 1) * blk], fld)
            vals[:, j] = v.reshape(fld.d, k + 1, k + 1)
        basis.append(ModularSymbol(lvl, k, fld, Profile.FULL, k + 1, vals))
    # coordinates: the free unknown x[c] sits at value[root generator] cell
    root_gen = {}
    for j in range(G):
        if expr[j] is ident and roots_of[j] not in root_gen:
            root_gen[roots_of[j]] = j
    coord_rows = []
    for c in coord_idx:
        r, cell = divmod(c, blk)
        coord_rows.append(root_gen[r] * blk + cell)
    space = ClassicalSpace(lvl, k, fld, basis, coord_rows, relations)
    space.relations.relations[:0] = monomial.relations
    return space


def hecke_matrix(space: ClassicalSpace, op: HeckeOperator) -> np.ndarray:
    """Matrix of T on the basis: column b holds the coordinates of basis[b]|T."""
    fld = space.fld
    cols = [space.coordinates(apply_hecke(b, op)) for b in space.basis]
    if not cols:
        return padic.zeros((0, 0), fld)
    return np.stack(cols, axis=2)


def verify_symbol(phi: ModularSymbol, rng: random.Random, trials: int = 20) -> None:
    """phi(gamma D)|gamma = phi(D) for random gamma in Gamma_1(n) and D."""
    lvl = phi.lvl
    K = lvl.field
    for _ in range(trials):
        g = random_sl2(K, rng, 6)
        D = Divisor.of_matrix(g) + Divisor.path(Cusp(K(rng.randint(-9, 9), rng.randint(-9, 9)), K(rng.randint(1, 5))),
                                                Cusp.infinity(K))
        gam = _random_gamma1(lvl, rng)
        lhs = phi.evaluate(D.act(gam))
        T1, T2 = batched_action([gam], phi.k, phi.W, phi.fld)
        lhs_m = _act_batch(T1[:, 0], T2[:, 0], lhs.moments, phi.fld)
        rhs = phi.evaluate(D)
        if not (MomentGrid(phi.k, phi.N, phi.profile, lhs_m, phi.fld) == rhs):
            raise VerificationFailed("symbol is not Gamma-equivariant; relation set incomplete")


def _random_gamma1(lvl: LevelData, rng: random.Random) -> Matrix:
    K = lvl.field
    while True:
        g = random_sl2(K, rng, 8)
        gam, _ = geo.reduce_to_rep(g, lvl)
        if geo.in_gamma1(gam, lvl.level):
            return gam


def _congruence_lattice(s: int, fld: LocalFieldDesc) -> list[tuple[int, int]]:
    """Basis of {(x, y) : sigma_1(x + y w) = 0 mod pi^s} in Z^2."""
    p = fld.p
    if fld.splitting is padic.Splitting.SPLIT:
        m = p ** s
        return [(m, 0), ((-fld.root) % m, 1)]
    if fld.splitting is padic.Splitting.INERT:
        return [(p ** s, 0), (0, p ** s)]
    a, b = (s + 1) // 2, s // 2
    r = fld.root
    return [(p ** a, 0), ((-r * p ** b) % p ** a, p ** b)]


def _gauss_reduce(u, v, form):
    """Lagrange reduction of a rank-2 lattice basis for a positive form."""
    def dot(x, y):
        return (form(x[0] + y[0], x[1] + y[1]) - form(*x) - form(*y)) / 2
    if form(*u) > form(*v):
        u, v = v, u
    while True:
        q = round(dot(u, v) / form(*u))
        v = (v[0] - q * u[0], v[1] - q * u[1])
        if form(*v) >= form(*u):
            return u, v
        u, v = v, u


def _recognise(poly, approx: linalg.Root, fld: LocalFieldDesc, norm_bound: int,
               radius: int = 3) -> LocalElement | None:
    """Find a small algebraic integer of K matching a poorly separated root.

    The elements congruent to the approximation modulo pi^precision form a
    coset of a rank-2 lattice; after reducing the lattice we search the
    vectors nearest to the origin and accept the first exact root of norm at
    most norm_bound.  Candidates are only meaningful when they are much
    shorter than the lattice covolume, so larger ones are rejected too.
    """
    K = fld.field
    s = max(approx.precision, 1)
    coeffs = [int(c) for c in approx.value.coeffs]
    z0 = (coeffs[0], 0) if fld.d == 1 else (coeffs[0], coeffs[1])

    def form(x, y):
        return x * x + K.t * x * y + K.n * y * y

    u, v = _gauss_reduce(*_congruence_lattice(s, fld), form)
    # Babai rounding of -z0 in the reduced basis
    det_uv = u[0] * v[1] - u[1] * v[0]
    cu = round((-z0[0] * v[1] + z0[1] * v[0]) / det_uv)
    cv = round((-u[0] * z0[1] + u[1] * z0[0]) / det_uv)
    cands = []
    for i in range(cu - radius, cu + radius + 1):
        for j in range(cv - radius, cv + radius + 1):
            x, y = z0[0] + i * u[0] + j * v[0], z0[1] + i * u[1] + j * v[1]
            cands.append((form(x, y), x, y))
    cands.sort()
    index = abs(det_uv)
    for nm, x, y in cands:
        if nm > norm_bound or nm * fld.p > index:
            break
        s1 = padic.sigma_embed(K(x, y), fld)[0]
        if linalg.poly_eval(poly, s1).vpi() >= fld.cap:
            return s1
    return None


def eigen_decomposition(space: ClassicalSpace, ops: list[HeckeOperator], rng=None) -> list[EigenData]:
    """Simultaneous eigensymbols for the given commuting operators.

    Eigenvalues of the first operator are found from its characteristic
    polynomial; each eigenspace is then split by the remaining operators.
    """
    fld = space.fld
    rng = rng or random.Random(1)
    mats = [hecke_matrix(space, op) for op in ops]
    for op, m in zip(ops, mats):
        space.hecke[op.name] = m
    out: list[EigenData] = []
    if space.dim == 0:
        return out
    n = space.dim
    # archimedean size of Hecke eigenvalues: |lambda| <= 2 N(det)^(k+1)
    bounds = []
    for op in ops:
        nd = max(geo.det(g).norm() for g in op.mats)
        bounds.append(4 * nd ** (2 * (space.k + 1)))

    def eigvals(A, norm_bound):
        # (value, pi-adic precision) for each distinct root in O_L
        cp = linalg.charpoly(A, fld)
        vals = []
        for r in linalg.roots(cp, fld):
            if r.precision >= fld.cap:
                vals.append((r.value, fld.cap))
                continue
            z = _recognise(cp, r, fld, norm_bound)
            if z is not None:
                vals.append((z, fld.cap))
            elif r.multiplicity == 1:
                vals.append((r.value, r.precision))
        uniq = []
        for v, pr in vals:
            if all((v - u).vpi() < min(pr, upr) for u, upr in uniq):
                uniq.append((v, pr))
        return uniq

    def split(basis_cols, level, prec):
        # basis_cols: (d, n, m) columns spanning an invariant subspace
        if level == len(ops):
            for c in range(basis_cols.shape[2]):
                yield basis_cols[:, :, c], [], prec
            return
        A = mats[level]
        m = basis_cols.shape[2]
        # restriction of A to the subspace, via its identity minor
        B, rows = linalg.normalize_basis(basis_cols, fld)
        AB = padic.matmul(A, B, fld)
        Ar = AB[:, rows, :]
        for lam, lprec in eigvals(Ar, bounds[level]):
            shifted = (Ar - padic.mul(linalg.identity(m, fld), lam.array().reshape(-1, 1, 1), fld)) % fld.modulus
            try:
                kr, kprec = linalg.kernel(shifted, fld, known=min(prec, lprec), with_precision=True)
            except PrecisionLoss:
                continue
            if kr.shape[2] == 0:
                continue
            sub = padic.matmul(B, kr, fld)
            for vec, rest, p_out in split(sub, level + 1, min(prec, lprec, kprec)):
                yield vec, [lam] + rest, p_out

    full = linalg.identity(n, fld)
    for vec, lams, prec in split(full, 0, fld.cap):
        phi = space.combine(vec)
        evs = {op.name: lam for op, lam in zip(ops, lams)}
        if prec < fld.cap:
            # only the digits that survived the eigenvalue search are kept
            low = fld.with_precision(max(prec // fld.e, 1))
            phi = phi.change_precision(low)
            evs = {name: low.element(*lam.coeffs) for name, lam in evs.items()}
        slopes = {name: lam.valuation() for name, lam in evs.items()}
        out.append(EigenData(evs, phi, slopes))
    return out


def verify_eigensymbol(ed: EigenData, ops: list[HeckeOperator], rng: random.Random, trials: int = 50) -> None:
    """Check phi|T = lambda phi on generators and on random divisors."""
    phi = ed.symbol
    K = phi.lvl.field
    for op in ops:
        lam = ed.eigenvalues[op.name]
        lhs = apply_hecke(phi, op)
        if not lhs == phi.scale(lam):
            raise VerificationFailed(f"eigen residual nonzero for {op.name}")
        for _ in range(trials):
            D = Divisor.path(Cusp(K(rng.randint(-9, 9), rng.randint(-9, 9)), K(rng.randint(1, 6), rng.randint(-3, 3))),
                             Cusp.infinity(K))
            got = hecke_eval_direct(phi, op, D)
            if not got == phi.evaluate(D).scale(lam):
                raise VerificationFailed(f"eigen relation fails on a random divisor for {op.name}")
