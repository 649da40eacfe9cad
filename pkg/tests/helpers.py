"""Independent oracles shared by several test files."""

import numpy as np
import sympy

from bianchi_oms import padic
from bianchi_oms.distributions import (Profile, Sigma0Pair, apply_pair_matrices, filtration_bound,
                                       grid_width, pair_action_matrices, random_in_filtration)
from bianchi_oms.lifting import split_prime_generators
from bianchi_oms.padic import LocalElement

_x = sympy.Symbol("x")


def series_action_row(a, b, c, d, k, m, W, P):
    """Coefficients of (a + c x)^(k-m) (b + d x)^m as a power series in x,
    truncated to W terms and reduced mod P (integer a, b, c, d, a invertible mod P)."""
    expr = (a + c * _x) ** (k - m) * (b + d * _x) ** m
    poly = sympy.series(expr, _x, 0, W).removeO() if k - m < 0 else sympy.expand(expr)
    out = []
    for i in range(W):
        coef = sympy.Rational(poly.coeff(_x, i))
        out.append(int(coef.p) * pow(int(coef.q), -1, P) % P)
    return out


def series_action_matrix(a, b, c, d, k, W, P):
    return np.array([series_action_row(a, b, c, d, k, m, W, P) for m in range(W)], dtype=object)


def random_unit(fld, rng):
    while True:
        u = LocalElement(tuple(int(v) for v in rng.integers(0, fld.modulus, size=fld.d)), fld)
        if u.is_unit():
            return u


def random_elem(fld, rng):
    return LocalElement(tuple(int(v) for v in rng.integers(0, fld.modulus, size=fld.d)), fld)


def _raw_act(grids, pairs, k, fld):
    """Exact images of stacked moment grids (d, B, W, W) with no reduction."""
    W = grids.shape[-1]
    T1, T2 = pair_action_matrices(pairs, k, W, fld)
    return apply_pair_matrices(T1, T2, grids, fld)


def _twisted_classical(fld, k, W, v, deg, rng, rows=None):
    """Integral grid whose classical part lies in the lambda-twisted lattice
    of valuation v: cell (i, j) carries pi^max(v - e*deg(i,j), 0).  The
    classical part is the (k+1)^2 block, or columns j <= k over ``rows``."""
    raw = rng.integers(0, fld.modulus, size=(fld.d, W, W)).astype(fld.dtype)
    pi = fld.uniformizer
    for i in range(k + 1 if rows is None else rows):
        for j in range(k + 1):
            s = max(v - fld.e * deg(i, j), 0)
            if s:
                raw[:, i, j] = padic.mul(raw[:, i, j], (pi ** s).array(), fld)
    return raw


def contraction_check(kind, k, N, count, fld, rng, n=1, v_range=None):
    """Run ``count`` random instances of one of the divisibility/contraction
    statements and return the number of failures.

    kind: "joint_div", "joint_contract" (joint, matrices (1, a; 0, p) in both variables),
    "left_div", "left_contract" (LEFT, (1, a; 0, beta) with beta generating P^n),
    "right_div", "right_contract" (RIGHT, (1, a; 0, betabar)).
    v(lambda) is drawn from ``v_range`` (default: below the slope bound).
    """
    W = grid_width(k, N + 2)        # random_in_filtration stores F^N at depth N + 2
    e = fld.e
    if kind.startswith("joint"):
        bound = e * (k + 1)
        p_el = fld.from_int(fld.p)
        mats = lambda a1, a2: ([[fld.one, a1], [fld.zero, p_el]], [[fld.one, a2], [fld.zero, p_el]])
        profile, deg = Profile.JOINT, (lambda i, j: i + j)
    else:
        beta, betabar = split_prime_generators(fld, n)
        which = beta if kind.startswith("left") else betabar
        s1, s2 = padic.sigma_embed(which, fld)
        bound = e * n * (k + 1)
        mats = lambda a1, a2: ([[fld.one, a1], [fld.zero, s1]], [[fld.one, a2], [fld.zero, s2]])
        if kind.startswith("left"):
            profile, deg = Profile.LEFT, (lambda i, j: i)
        else:
            profile, deg = Profile.RIGHT, (lambda i, j: j)
    contraction = kind.endswith("_contract")
    lo, hi = v_range if v_range is not None else (0, bound)
    vs = rng.integers(lo, hi, size=count)
    grids, pairs = [], []
    for t in range(count):
        if contraction:
            grids.append(random_in_filtration(k, N, profile, fld, rng).moments)
        else:
            # right profile: x is already a distribution, so every row is twisted
            rows = W if profile is Profile.RIGHT else None
            grids.append(_twisted_classical(fld, k, W, int(vs[t]), deg, rng, rows))
        m1, m2 = mats(random_elem(fld, rng), random_elem(fld, rng))
        pairs.append(Sigma0Pair.from_elements(m1, m2, check=False))
    out = _raw_act(np.stack(grids, axis=1), pairs, k, fld)
    val = padic.vpi(out, fld)              # (B, W, W)
    i, j = np.indices((W, W))
    live = (j <= k) if profile is Profile.LEFT else np.ones((W, W), dtype=bool)
    failures = 0
    for t in range(count):
        v = int(vs[t])
        if contraction:
            nxt = np.maximum(filtration_bound(profile, k, N + 1, W), 0)
            vanish = nxt >= 10**8
            need = np.where(vanish, fld.cap, np.minimum(v + nxt, fld.cap))
        else:
            need = np.full((W, W), min(v, fld.cap))
        if (val[t][live] < need[live]).any():
            failures += 1
    return failures
