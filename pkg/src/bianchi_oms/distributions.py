"""Truncated two-variable moment distributions and the weight (k, k)
action of pairs of Sigma_0 matrices.

A distribution mu is recorded through its moments mu(x^i y^j) on a square
grid 0 <= i, j < W.  Each cell carries an effective precision eff(i, j),
measured in powers of the uniformiser of L; two grids are equal when every
cell agrees modulo pi^eff.  Profiles:

    JOINT   eff = N - i - j                 (quotient by F^N)
    LEFT    eff = N - i on columns j <= k   (distributions in x, V* in y)
    RIGHT   eff = min(N - j, W - i)         (filtration along y only)
    FULL    full working precision on the (k+1)^2 block (the space V*)

In every profile the classical block i, j <= k is kept at full precision:
the filtrations require it to vanish, so it is never truncated.
"""

from __future__ import annotations

import json
from enum import Enum

import numpy as np

from . import padic
from .errors import InvalidMonoidElement, SchemaError
from .padic import LocalElement, LocalFieldDesc


class Profile(str, Enum):
    JOINT = "joint"
    LEFT = "left"
    RIGHT = "right"
    FULL = "full"


def grid_width(k: int, N: int) -> int:
    return max(N, k + 1)


def eff_table(profile: Profile, k: int, N: int, W: int, fld: LocalFieldDesc) -> np.ndarray:
    """Effective precision (pi-units) of every cell, clamped to [0, cap]."""
    i, j = np.indices((W, W))
    cap = fld.cap
    if profile is Profile.FULL:
        eff = np.full((W, W), cap)
    elif profile is Profile.JOINT:
        eff = N - i - j
    elif profile is Profile.LEFT:
        eff = np.where(j <= k, N - i, 0)
    elif profile is Profile.RIGHT:
        eff = np.minimum(N - j, W - i)
    else:
        raise ValueError(profile)
    classical = (i <= k) & (j <= k)
    eff = np.where(classical, cap, eff)
    return np.clip(eff, 0, cap)


class MomentGrid:
    """Immutable moment table of a class in an approximation module.

    ``moments`` has shape (d, W, W) and is kept canonically reduced modulo
    pi^eff cell by cell.
    """

    __slots__ = ("k", "N", "profile", "fld", "moments", "_eff")

    def __init__(self, k: int, N: int, profile: Profile, moments: np.ndarray, fld: LocalFieldDesc,
                 reduce: bool = True):
        self.k = k
        self.N = N
        self.profile = Profile(profile)
        self.fld = fld
        W = moments.shape[1]
        self._eff = eff_table(self.profile, k, N, W, fld)
        m = np.array(moments, dtype=fld.dtype) % fld.modulus
        if reduce:
            m = padic.reduce_mod_pi(m, self._eff, fld)
        m.setflags(write=False)
        self.moments = m

    # constructors --------------------------------------------------------
    @classmethod
    def zero(cls, k: int, N: int, profile: Profile, fld: LocalFieldDesc) -> "MomentGrid":
        W = k + 1 if Profile(profile) is Profile.FULL else grid_width(k, N)
        return cls(k, N, profile, padic.zeros((W, W), fld), fld)

    @classmethod
    def full(cls, k: int, block: np.ndarray, fld: LocalFieldDesc) -> "MomentGrid":
        return cls(k, k + 1, Profile.FULL, block, fld)

    @classmethod
    def dirac(cls, k: int, N: int, profile: Profile, fld: LocalFieldDesc,
              x0: LocalElement | None = None, y0: LocalElement | None = None) -> "MomentGrid":
        """Moments of the point mass at (x0, y0): m[i][j] = x0^i y0^j."""
        W = k + 1 if Profile(profile) is Profile.FULL else grid_width(k, N)
        x0 = fld.zero if x0 is None else x0
        y0 = fld.zero if y0 is None else y0
        xs = _powers(x0, W)
        ys = _powers(y0, W)
        m = padic.mul(xs[:, :, None], ys[:, None, :], fld)
        return cls(k, N, profile, m, fld)

    # basic properties ----------------------------------------------------
    @property
    def W(self) -> int:
        return self.moments.shape[1]

    @property
    def eff(self) -> np.ndarray:
        return self._eff

    def cell(self, i: int, j: int) -> LocalElement:
        return LocalElement.from_array(self.moments[:, i, j], self.fld)

    def _same_shape(self, other: "MomentGrid"):
        if (self.k, self.N, self.profile, self.W) != (other.k, other.N, other.profile, other.W):
            raise ValueError("incompatible moment grids")
        if self.fld != other.fld:
            raise ValueError("different local fields")

    def _new(self, m: np.ndarray) -> "MomentGrid":
        return MomentGrid(self.k, self.N, self.profile, m, self.fld)

    def __add__(self, other: "MomentGrid") -> "MomentGrid":
        self._same_shape(other)
        return self._new(self.moments + other.moments)

    def __sub__(self, other: "MomentGrid") -> "MomentGrid":
        self._same_shape(other)
        return self._new(self.moments - other.moments)

    def __neg__(self) -> "MomentGrid":
        return self._new(-self.moments)

    def scale(self, c: LocalElement) -> "MomentGrid":
        cs = c.array().reshape((self.fld.d, 1, 1))
        return self._new(padic.mul(self.moments, cs, self.fld))

    def __eq__(self, other):
        if not isinstance(other, MomentGrid):
            return NotImplemented
        try:
            self._same_shape(other)
        except ValueError:
            return False
        return bool((self.moments == other.moments).all())

    def __hash__(self):
        return hash((self.k, self.N, self.profile, self.moments.tobytes()))

    def is_zero(self) -> bool:
        return not self.moments.any()

    def __repr__(self):
        return f"MomentGrid(k={self.k}, N={self.N}, profile={self.profile.value}, W={self.W})"

    def min_valuation(self) -> int:
        """Least pi-adic valuation over the stored cells (cap if zero)."""
        return int(padic.vpi(self.moments, self.fld).min())

    # serialisation -------------------------------------------------------
    def to_json(self) -> dict:
        cells = [[[str(int(c)) for c in self.moments[:, i, j]] for j in range(self.W)] for i in range(self.W)]
        return {"k": self.k, "N": self.N, "profile": self.profile.value, "W": self.W,
                "field": {"D": self.fld.D, "p": self.fld.p, "M": self.fld.M}, "moments": cells}

    @classmethod
    def from_json(cls, obj: dict, fld: LocalFieldDesc | None = None) -> "MomentGrid":
        try:
            f = obj["field"]
            if fld is None:
                fld = padic.make_local_field(int(f["D"]), int(f["p"]), int(f["M"]))
            elif (fld.D, fld.p, fld.M) != (int(f["D"]), int(f["p"]), int(f["M"])):
                raise SchemaError("moment grid belongs to a different local field", field=f)
            W = int(obj["W"])
            cells = obj["moments"]
            m = padic.zeros((W, W), fld)
            for i in range(W):
                for j in range(W):
                    for c, s in enumerate(cells[i][j]):
                        m[c, i, j] = int(s)
            return cls(int(obj["k"]), int(obj["N"]), Profile(obj["profile"]), m, fld, reduce=False)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SchemaError(f"malformed moment grid: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _powers(x: LocalElement, W: int) -> np.ndarray:
    out = padic.zeros((W,), x.fld)
    acc = x.fld.one
    for i in range(W):
        out[:, i] = acc.array()
        acc = acc * x
    return out


# ---------------------------------------------------------------------------
# monoid elements


class Sigma0Pair:
    """Pair of 2x2 matrices over O_L acting on the two variables.

    Each factor is stored as an array of shape (d, 2, 2).
    """

    __slots__ = ("g1", "g2", "fld")

    def __init__(self, g1: np.ndarray, g2: np.ndarray, fld: LocalFieldDesc, check: bool = True):
        self.g1 = np.asarray(g1, dtype=fld.dtype) % fld.modulus
        self.g2 = np.asarray(g2, dtype=fld.dtype) % fld.modulus
        self.fld = fld
        if check:
            for g in (self.g1, self.g2):
                if not in_sigma0(g, fld):
                    raise InvalidMonoidElement("matrix fails p | c, a unit, det != 0",
                                               matrix=g.tolist())

    @classmethod
    def from_elements(cls, m1, m2, check: bool = True) -> "Sigma0Pair":
        """From two nested lists [[a, b], [c, d]] of LocalElements."""
        fld = m1[0][0].fld
        g1 = np.moveaxis(np.array([[m1[r][s].array() for s in range(2)] for r in range(2)]), -1, 0)
        g2 = np.moveaxis(np.array([[m2[r][s].array() for s in range(2)] for r in range(2)]), -1, 0)
        return cls(g1, g2, fld, check)

    @classmethod
    def embed(cls, gamma, fld: LocalFieldDesc, check: bool = True) -> "Sigma0Pair":
        """(sigma_1(gamma), sigma_2(gamma)) for gamma over O_K, given as a flat
        (a, b, c, d) tuple or as nested rows."""
        flat = list(gamma) if len(gamma) == 4 else [gamma[0][0], gamma[0][1], gamma[1][0], gamma[1][1]]
        s1, s2 = zip(*(padic.sigma_embed(z, fld) for z in flat))
        return cls.from_elements([[s1[0], s1[1]], [s1[2], s1[3]]],
                                 [[s2[0], s2[1]], [s2[2], s2[3]]], check)

    @classmethod
    def identity(cls, fld: LocalFieldDesc) -> "Sigma0Pair":
        one, zero = fld.one, fld.zero
        m = [[one, zero], [zero, one]]
        return cls.from_elements(m, m)

    def __mul__(self, other: "Sigma0Pair") -> "Sigma0Pair":
        return Sigma0Pair(padic.matmul(self.g1, other.g1, self.fld),
                          padic.matmul(self.g2, other.g2, self.fld), self.fld, check=False)

    def entries(self, which: int) -> list[LocalElement]:
        g = self.g1 if which == 1 else self.g2
        return [LocalElement.from_array(g[:, r, s], self.fld) for r in range(2) for s in range(2)]


def in_sigma0(g: np.ndarray, fld: LocalFieldDesc) -> bool:
    a = LocalElement.from_array(g[:, 0, 0], fld)
    c = LocalElement.from_array(g[:, 1, 0], fld)
    b = LocalElement.from_array(g[:, 0, 1], fld)
    d = LocalElement.from_array(g[:, 1, 1], fld)
    det = a * d - b * c
    return a.is_unit() and c.vpi() >= fld.e and not det.is_zero()


# ---------------------------------------------------------------------------
# the action


def _poly_mul(f: np.ndarray, g: np.ndarray, W: int, fld: LocalFieldDesc) -> np.ndarray:
    """Product of batched polynomials (d, B, deg) truncated to W terms."""
    d, B = f.shape[:2]
    out = np.zeros((d, B, W), dtype=fld.dtype)
    for s in range(min(g.shape[2], W)):
        if not g[:, :, s].any():
            continue
        n = min(f.shape[2], W - s)
        out[:, :, s:s + n] = (out[:, :, s:s + n] + padic.mul(f[:, :, :n], g[:, :, s, None], fld)) % fld.modulus
    return out


def action_matrices(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray, k: int, W: int,
                    fld: LocalFieldDesc) -> np.ndarray:
    """Matrices T with (mu|g)(x^m) = sum_i T[m, i] mu(x^i) for a batch of
    one-variable matrices g = (a, b; c, d), each entry of shape (d, B).

    Row m holds the coefficients of (a + c x)^(k - m) (b + d x)^m.  Rows
    m > k use the power series of (a + c x)^(-1) and need a to be a unit.
    Returns shape (d, B, W, W).
    """
    P = fld.modulus
    dd, B = a.shape
    lin_a = np.stack([a, c], axis=-1)  # a + c x
    lin_b = np.stack([b, d], axis=-1)  # b + d x
    one = np.zeros((dd, B, 1), dtype=fld.dtype)
    one[0] = 1
    # powers of a + c x and b + d x up to degree k
    pa, pb = [one], [one]
    for _ in range(k):
        pa.append(_poly_mul(pa[-1], lin_a, k + 1, fld))
        pb.append(_poly_mul(pb[-1], lin_b, k + 1, fld))
    T = np.zeros((dd, B, W, W), dtype=fld.dtype)
    rows = []
    for m in range(min(k + 1, W)):
        rows.append(_poly_mul(pa[k - m], pb[m], W, fld))
    if W > k + 1:
        # (a + c x)^(-1) = a^(-1) sum_l (-c/a)^l x^l
        ainv = padic.unit_inverse(a, fld)
        ratio = (-padic.mul(c, ainv, fld)) % P
        inv_series = np.zeros((dd, B, W), dtype=fld.dtype)
        term = ainv
        for l in range(W):
            inv_series[:, :, l] = term
            term = padic.mul(term, ratio, fld)
        step = _poly_mul(lin_b, inv_series, W, fld)
        prev = rows[-1]
        for m in range(k + 1, W):
            prev = _poly_mul(prev, step, W, fld)
            rows.append(prev)
    for m, r in enumerate(rows):
        T[:, :, m, : r.shape[2]] = r[:, :, :W]
    return T


def pair_action_matrices(pairs: list[Sigma0Pair], k: int, W: int, fld: LocalFieldDesc):
    """Stacked (T1, T2) for a list of pairs, each of shape (d, B, W, W)."""
    g1 = np.stack([g.g1 for g in pairs], axis=1)  # (d, B, 2, 2)
    g2 = np.stack([g.g2 for g in pairs], axis=1)
    T1 = action_matrices(g1[:, :, 0, 0], g1[:, :, 0, 1], g1[:, :, 1, 0], g1[:, :, 1, 1], k, W, fld)
    T2 = action_matrices(g2[:, :, 0, 0], g2[:, :, 0, 1], g2[:, :, 1, 0], g2[:, :, 1, 1], k, W, fld)
    return T1, T2


def apply_pair_matrices(T1: np.ndarray, T2: np.ndarray, m: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """T1 @ m @ T2^t over O_L; all arrays broadcast over leading batch axes."""
    left = padic.matmul(T1, m, fld)
    return padic.matmul(left, np.swapaxes(T2, -1, -2), fld)


def act_weight(mu: MomentGrid, g: Sigma0Pair) -> MomentGrid:
    """The weight (k, k) right action mu |_k g.

    Moment (i, j) of the result is mu evaluated on
    (a1 + c1 x)^(k-i) (b1 + d1 x)^i (a2 + c2 y)^(k-j) (b2 + d2 y)^j, with
    the series truncated at the grid width.  Classical (FULL) grids accept
    any matrix; other profiles require g in Sigma_0 for both factors.
    """
    fld = mu.fld
    if mu.profile is not Profile.FULL:
        for m in (g.g1, g.g2):
            if not in_sigma0(m, fld):
                raise InvalidMonoidElement("matrix fails p | c, a unit, det != 0", matrix=m.tolist())
    T1, T2 = pair_action_matrices([g], mu.k, mu.W, fld)
    new = apply_pair_matrices(T1[:, 0], T2[:, 0], mu.moments, fld)
    return MomentGrid(mu.k, mu.N, mu.profile, new, fld)


def act_weight_batch(mus: list[MomentGrid], pairs: list[Sigma0Pair]) -> list[MomentGrid]:
    """act_weight over many (mu, g) at once; all grids share k, N, profile and width."""
    if len(mus) != len(pairs):
        raise ValueError("need one matrix pair per grid")
    if not mus:
        return []
    mu0, fld = mus[0], mus[0].fld
    if any((m.k, m.N, m.profile, m.W) != (mu0.k, mu0.N, mu0.profile, mu0.W) for m in mus):
        raise ValueError("grids differ in weight, depth, profile or width")
    if mu0.profile is not Profile.FULL:
        for g in pairs:
            for m in (g.g1, g.g2):
                if not in_sigma0(m, fld):
                    raise InvalidMonoidElement("matrix fails p | c, a unit, det != 0", matrix=m.tolist())
    T1, T2 = pair_action_matrices(pairs, mu0.k, mu0.W, fld)
    moments = np.stack([m.moments for m in mus], axis=1)
    new = apply_pair_matrices(T1, T2, moments, fld)
    return [MomentGrid(mu0.k, mu0.N, mu0.profile, new[:, b], fld) for b in range(len(mus))]


# ---------------------------------------------------------------------------
# filtrations and maps between approximation modules


def filtration_bound(profile: Profile, k: int, N: int, W: int) -> np.ndarray:
    """Least pi-adic valuation demanded of each cell by F^N; cells that
    must vanish get a large sentinel."""
    i, j = np.indices((W, W))
    big = 10**9
    if profile is Profile.JOINT:
        bound = N - i - j
        vanish = (i <= k) & (j <= k)
    elif profile is Profile.LEFT:
        bound = np.where(j <= k, N - i, -big)
        vanish = (i <= k) & (j <= k)
    elif profile is Profile.RIGHT:
        bound = N - j
        vanish = j <= k
    else:
        bound = np.zeros((W, W), dtype=int)
        vanish = np.ones((W, W), dtype=bool)
    return np.where(vanish, big, bound)


def in_filtration(mu: MomentGrid, N: int, profile: Profile | None = None) -> bool:
    """Whether mu lies in F^N for the given profile (default: its own).

    Conditions are only checked to the precision each cell is stored at.
    """
    profile = mu.profile if profile is None else Profile(profile)
    need = filtration_bound(profile, mu.k, N, mu.W)
    have = padic.vpi(mu.moments, mu.fld)
    need = np.minimum(need, mu.eff)
    return bool((have >= need).all())


def specialize(mu: MomentGrid) -> MomentGrid:
    """The (k+1) x (k+1) block of moments, as an element of V*_{k,k}."""
    k = mu.k
    return MomentGrid.full(k, mu.moments[:, : k + 1, : k + 1], mu.fld)


def project(mu: MomentGrid, N_new: int) -> MomentGrid:
    """Image in the approximation module of depth N_new <= current width."""
    if mu.profile is Profile.FULL:
        if N_new < mu.k + 1:
            raise ValueError("cannot project V* below k+1")
        return mu
    if N_new > mu.W:
        raise ValueError(f"depth {N_new} exceeds grid width {mu.W}")
    W = grid_width(mu.k, N_new)
    return MomentGrid(mu.k, N_new, mu.profile, mu.moments[:, :W, :W], mu.fld)


def pad(mu: MomentGrid, N_new: int, profile: Profile | None = None) -> MomentGrid:
    """Zero-padded copy of mu at a larger depth (a set-theoretic lift)."""
    profile = mu.profile if profile is None else Profile(profile)
    W = grid_width(mu.k, N_new)
    m = padic.zeros((W, W), mu.fld)
    w = min(W, mu.W)
    m[:, :w, :w] = mu.moments[:, :w, :w]
    return MomentGrid(mu.k, N_new, profile, m, mu.fld)


def in_V_lambda(f: MomentGrid, lam: LocalElement, variant: str = "joint") -> bool:
    """Membership of a classical block in the lambda-twisted lattice:
    v(f(x^i y^j)) >= v(lam) - (i + j) for i + j <= floor(v(lam)) (joint),
    or with i alone (left) or j alone (right) in place of i + j."""
    fld = f.fld
    vl = lam.vpi()
    if vl >= fld.cap:
        raise ValueError("lambda vanishes to working precision")
    k = f.k
    i, j = np.indices((k + 1, k + 1))
    deg = {"joint": i + j, "left": i, "right": j}[variant]
    have = padic.vpi(f.moments[:, : k + 1, : k + 1], fld)
    floor_v = vl // fld.e
    need = np.where(deg <= floor_v, vl - fld.e * deg, 0)
    return bool((have >= need).all())


# ---------------------------------------------------------------------------
# random samples (property checks and the self-test)


def random_in_filtration(k: int, N: int, profile: Profile, fld: LocalFieldDesc,
                         rng: np.random.Generator, depth: int | None = None) -> MomentGrid:
    """Random element of F^N: cell (i, j) a random multiple of pi^bound.

    The grid is stored at ``depth`` (default N + 2) because every element of
    F^N is zero in the approximation module of depth N itself.
    """
    depth = N + 2 if depth is None else depth
    if depth <= N:
        raise ValueError("depth must exceed N")
    W = grid_width(k, depth)
    need = np.minimum(filtration_bound(profile, k, N, W), fld.cap)
    need = np.maximum(need, 0)
    raw = rng.integers(0, fld.modulus, size=(fld.d, W, W)).astype(fld.dtype)
    scaled = padic.zeros((W, W), fld)
    pi = fld.uniformizer
    for s in np.unique(need):
        mask = need == s
        if s >= fld.cap:
            continue
        factor = padic.scalar_array(pi ** int(s), (1,))
        scaled[:, mask] = padic.mul(raw[:, mask], factor, fld)
    return MomentGrid(k, depth, profile, scaled, fld)


def random_sigma0_pair(fld: LocalFieldDesc, rng: np.random.Generator) -> Sigma0Pair:
    """Random pair of matrices with a a unit, pi | c and nonzero determinant."""
    def elem():
        return LocalElement(tuple(int(x) for x in rng.integers(0, fld.modulus, size=fld.d)), fld)

    def mat():
        while True:
            a = elem()
            if not a.is_unit():
                continue
            b, c, d = elem(), elem() * fld.uniformizer ** fld.e, elem()
            if not (a * d - b * c).is_zero():
                return [[a, b], [c, d]]

    return Sigma0Pair.from_elements(mat(), mat())
