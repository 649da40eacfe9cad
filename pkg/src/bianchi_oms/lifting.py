"""Overconvergent eigenlifts of classical symbols.

A classical U-eigensymbol phi (values in V*_{k,k}) is lifted one filtration
step at a time: starting from any padding of phi, each step applies U,
divides exactly by the eigenvalue and keeps the result modulo the next
filtration level.  The classical block is restored from phi after every
division, so no digits are lost there.

For a split prime the lift is done in two stages: first through the
x-variable with U at the prime seen by the first embedding, then through the
y-variable with U at its conjugate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import padic
from .distributions import Profile, eff_table, grid_width
from .errors import (DivisibilityFailure, NonPrincipalPower, PrecisionLoss, SlopeTooLarge,
                     UniquenessViolation)
from .padic import LocalElement, LocalFieldDesc, Splitting
from .quadratic import QuadInt
from .symbols import (HeckeOperator, ModularSymbol, compose_operators, stencil_for, up_operator,
                      uprime_operator)


@dataclass
class LiftConfig:
    """Depth N, working precision M and the eigenvalue(s) to lift with.

    ``lam`` is the U_p eigenvalue; for a split prime ``lam_pair`` holds the
    eigenvalues of U at the prime seen by the first embedding and at its
    conjugate, and ``n`` is an exponent with that prime's n-th power
    principal.
    """

    N: int
    M: int
    lam: LocalElement | None = None
    lam_pair: tuple | None = None
    n: int = 1


@dataclass
class LiftCertificate:
    slope: object
    N: int
    M: int
    scale: int                       # phi was multiplied by pi^scale before lifting
    residual_depth: list = field(default_factory=list)
    uniqueness_trials: int = 0
    steps: int = 0

    def to_dict(self) -> dict:
        def fmt(x):
            return str(x) if isinstance(x, Fraction) else x
        slope = {k: fmt(v) for k, v in self.slope.items()} if isinstance(self.slope, dict) else fmt(self.slope)
        return {"slope": slope, "N": self.N, "M": self.M, "scale": self.scale,
                "residual_depth": list(self.residual_depth),
                "uniqueness_trials": self.uniqueness_trials, "steps": self.steps}


# ---------------------------------------------------------------------------
# precision bookkeeping


def _div_loss(s: int, fld: LocalFieldDesc) -> int:
    """pi-adic digits lost by divide_by_pi_power(., s)."""
    return s if fld.e == 1 else 2 * ((s + 1) // 2)


def _divide(raw: np.ndarray, lam: LocalElement) -> np.ndarray:
    fld = lam.fld
    s, u = lam.unit_part()
    q = padic.divide_by_pi_power(raw, s, fld)
    uinv = padic.unit_inverse(u.array()[:, None], fld)[:, 0]
    return padic.mul(q, uinv.reshape((fld.d,) + (1,) * (raw.ndim - 1)), fld)


def _check_divisible(raw: np.ndarray, lam_v: int, eff: np.ndarray, fld: LocalFieldDesc,
                     known: np.ndarray | None = None):
    """Cells kept after division (eff > 0) must be divisible by pi^lam_v,
    reading each modulo pi^(eff + lam_v) or the precision it is known to."""
    prec = np.minimum(eff + lam_v, fld.cap)
    if known is not None:
        prec = np.minimum(prec, known)
    prec = np.where(eff > 0, prec, 0)
    red = padic.reduce_mod_pi(raw, prec[None], fld)
    bad = padic.vpi(red, fld) < np.minimum(lam_v, prec)[None]
    if bad.any():
        g, i, j = (int(x) for x in np.argwhere(bad)[0])
        raise DivisibilityFailure("U-image is not divisible by the eigenvalue",
                                  generator=g, i=i, j=j)


def residual_depth(res: np.ndarray, k: int, fld: LocalFieldDesc) -> list[int]:
    """Per generator, the largest N with the grid in the joint F^N (0 if
    the classical block is nonzero)."""
    W = res.shape[-1]
    i, j = np.indices((W, W))
    v = padic.vpi(res, fld)
    classical = (i <= k) & (j <= k)
    depth = np.where(classical, 10**9, v + i + j)
    out = []
    for g in range(res.shape[1]):
        if (v[g][classical] < fld.cap).any():
            out.append(0)
        else:
            out.append(int(min(depth[g].min(), fld.cap + 2 * (W - 1))))
    return out


def _at_precision(phi: ModularSymbol, M: int) -> ModularSymbol:
    if phi.fld.M < M:
        raise PrecisionLoss(f"symbol known to p^{phi.fld.M}, lift asks for p^{M}",
                            have=phi.fld.M, need=M)
    if phi.fld.M == M:
        return phi
    return phi.change_precision(phi.fld.with_precision(M))


def _lam_at(lam: LocalElement, fld: LocalFieldDesc) -> LocalElement:
    if lam.fld.M < fld.M:
        raise PrecisionLoss("eigenvalue known to lower precision than the lift",
                            have=lam.fld.M, need=fld.M)
    return fld.element(*lam.coeffs)


def normalisation_scale(block: np.ndarray, lam_v: int, variant: str, k: int, fld: LocalFieldDesc,
                        width: int | None = None) -> int:
    """Least s >= 0 with pi^s * block in the lambda-twisted lattice:
    v(cell (i, j)) >= v(lam) - e*deg for deg <= floor(v(lam)/e), where deg is
    i + j (joint), i (left) or j (right)."""
    i, j = np.indices(block.shape[-2:])
    deg = {"joint": i + j, "left": i, "right": j}[variant]
    have = padic.vpi(block, fld)
    need = np.where(deg <= lam_v // fld.e, lam_v - fld.e * deg, -10**9)
    gap = (need[None] - have).max(initial=0)
    return max(0, int(gap))


# ---------------------------------------------------------------------------
# joint lifting


def check_slope(lam: LocalElement, k: int, n: int = 1) -> int:
    """vpi(lam), raising SlopeTooLarge unless v(lam) < n(k+1)."""
    fld = lam.fld
    v = lam.vpi()
    if v >= n * fld.e * (k + 1):
        raise SlopeTooLarge(f"slope {lam.valuation()} is not below {n * (k + 1)}",
                            slope=str(lam.valuation()), bound=n * (k + 1))
    return v


def required_precision(k: int, N: int, lam_v: int, fld: LocalFieldDesc) -> int:
    """Least M (in p-units) for a joint lift to depth N with eigenvalue of
    pi-adic valuation lam_v."""
    need = N - (k + 1) + _div_loss(lam_v, fld)
    return max(-(-need // fld.e), 1)


def initial_lift(phi: ModularSymbol, N: int, profile: Profile = Profile.JOINT,
                 rng: random.Random | None = None, width: int | None = None) -> ModularSymbol:
    """Pad the classical values of phi to a grid of depth N.

    With ``rng`` the cells outside the classical block are filled with random
    integers instead of zeros; the result is then valid only as a lift to
    depth k+1 and is returned unreduced.
    """
    k, fld = phi.k, phi.fld
    W = grid_width(k, N) if width is None else width
    vals = padic.zeros((phi.G, W, W), fld)
    vals[:, :, :k + 1, :k + 1] = phi.values[:, :, :k + 1, :k + 1]
    if rng is not None:
        i, j = np.indices((W, W))
        outside = ~((i <= k) & (j <= k))
        if profile is Profile.LEFT:
            outside &= j <= k
        noise = np.array([[[rng.randrange(fld.modulus) if outside[a, b] else 0 for b in range(W)]
                           for a in range(W)] for _ in range(phi.G * fld.d)], dtype=object)
        noise = noise.reshape(fld.d, phi.G, W, W) % fld.modulus
        vals = (vals + noise.astype(fld.dtype)) % fld.modulus
        return ModularSymbol(phi.lvl, k, fld, profile, k + 1, vals, reduce=False)
    return ModularSymbol(phi.lvl, k, fld, profile, k + 1, vals)


def iterate_V(psi: ModularSymbol, op: HeckeOperator, lam: LocalElement, classical: np.ndarray,
              profile: Profile | None = None, eff_next: np.ndarray | None = None) -> ModularSymbol:
    """One step: (psi | op) / lam, read at depth psi.N + 1.

    ``classical`` is the block restored after division (the values of phi
    at full precision).  ``eff_next`` overrides the precision table of the
    result; by default it is the profile's table at depth N + 1.
    """
    fld, k = psi.fld, psi.k
    profile = psi.profile if profile is None else profile
    W = psi.W
    lam_v = lam.vpi()
    n_next = psi.N + 1
    if eff_next is None:
        eff_next = eff_table(profile, k, n_next, W, fld)
    raw = stencil_for(psi.lvl, op).apply_values(psi.values, k, fld)
    # only the digits below pi^(eff + v(lam)) matter after division
    _check_divisible(raw, lam_v, eff_next, fld)
    if (eff_next[eff_next < fld.cap] + _div_loss(lam_v, fld) > fld.cap).any():
        raise PrecisionLoss("working precision too small for this depth",
                            depth=n_next, cap=fld.cap, slope=lam_v)
    q = _divide(raw, lam)
    q[:, :, :k + 1, :k + 1] = classical
    q = padic.reduce_mod_pi(q, eff_next[None], fld)
    return ModularSymbol(psi.lvl, k, fld, profile, n_next, q, reduce=False)


def _eigen_residual(psi: ModularSymbol, op: HeckeOperator, lam: LocalElement) -> np.ndarray:
    fld = psi.fld
    raw = stencil_for(psi.lvl, op).apply_values(psi.values, psi.k, fld)
    lam_arr = lam.array().reshape(fld.d, 1, 1, 1)
    return (raw - padic.mul(psi.values, lam_arr, fld)) % fld.modulus


def lift(phi: ModularSymbol, cfg: LiftConfig, op: HeckeOperator | None = None,
         rng: random.Random | None = None) -> tuple[ModularSymbol, LiftCertificate]:
    """Joint U-eigenlift of a classical eigensymbol to depth cfg.N.

    Returns the lift (JOINT profile, depth N) and a certificate with the
    eigen-residual depth on every generator.
    """
    k = phi.k
    fld = phi.fld.with_precision(cfg.M) if phi.fld.M != cfg.M else phi.fld
    phi = _at_precision(phi, cfg.M)
    lam = _lam_at(cfg.lam, fld)
    if op is None:
        op = up_operator(phi.lvl.field, fld.p)
    lam_v = check_slope(lam, k)
    need = required_precision(k, cfg.N, lam_v, fld)
    if cfg.M < need:
        raise PrecisionLoss(f"lift to depth {cfg.N} needs M >= {need}", need=need, have=cfg.M)
    scale = normalisation_scale(phi.values, lam_v, "joint", k, fld)
    if scale:
        phi = phi.with_values(padic.mul(phi.values, _pi_power(scale, fld), fld))
    classical = phi.values[:, :, :k + 1, :k + 1].copy()
    psi = initial_lift(phi, cfg.N, Profile.JOINT, rng)
    steps = 0
    while psi.N < cfg.N:
        psi = iterate_V(psi, op, lam, classical, Profile.JOINT)
        steps += 1
    if psi.N != cfg.N:
        # N <= k+1: nothing to iterate, the padded classical symbol is the lift
        psi = ModularSymbol(psi.lvl, k, fld, Profile.JOINT, cfg.N, psi.values)
    res = _eigen_residual(psi, op, lam)
    cert = LiftCertificate(slope=lam.valuation(), N=cfg.N, M=cfg.M, scale=scale,
                           residual_depth=residual_depth(res, k, fld), steps=steps)
    return psi, cert


def _pi_power(s: int, fld: LocalFieldDesc) -> np.ndarray:
    return (fld.uniformizer ** s).array().reshape(fld.d, 1, 1, 1)


def verify_uniqueness(phi: ModularSymbol, cfg: LiftConfig, trials: int = 5, seed: int = 0,
                      op: HeckeOperator | None = None) -> dict:
    """Lift from ``trials`` different paddings (the first is the zero
    padding) and check that all results agree modulo F^N."""
    rng = random.Random(seed)
    lifts = []
    for t in range(trials):
        psi, _ = lift(phi, cfg, op, rng=None if t == 0 else rng)
        lifts.append(psi)
    depth = None
    for other in lifts[1:]:
        diff = (other.values - lifts[0].values) % other.fld.modulus
        d = min(residual_depth(diff, phi.k, other.fld)) if diff.any() else None
        if d is not None:
            depth = d if depth is None else min(depth, d)
        if not (other == lifts[0]):
            raise UniquenessViolation("lifts from different paddings disagree modulo F^N",
                                      depth=d, N=cfg.N)
    return {"trials": trials, "agree": True, "min_discrepancy_depth": depth}


# ---------------------------------------------------------------------------
# split primes


def split_prime_generators(fld: LocalFieldDesc, n: int = 1) -> tuple[QuadInt, QuadInt]:
    """(beta, delta) generating P^n and conj(P)^n, where P is the prime above
    p with sigma_1(P) non-unit.  Raises NonPrincipalPower if P^n is not
    principal."""
    if fld.splitting is not Splitting.SPLIT:
        raise ValueError("p does not split")
    K = fld.field
    target = fld.p ** n
    for z in K.elements_up_to_norm(target):
        if z.norm() != target:
            continue
        s1, s2 = padic.sigma_embed(z, fld)
        if s1.vpi() == n and s2.is_unit():
            return z, z.conj()
    raise NonPrincipalPower(f"no generator of norm {target} for the prime power", p=fld.p, n=n)


def split_operators(fld: LocalFieldDesc, n: int = 1) -> tuple[HeckeOperator, HeckeOperator]:
    """U at P^n and at conj(P)^n (P as in split_prime_generators)."""
    beta, delta = split_prime_generators(fld, n)
    return uprime_operator(beta), uprime_operator(delta)


def _right_eff(k: int, n: int, x_prec: int, W: int, left: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """Second-stage precision: columns j <= k as in the first stage, others
    min(n - j, x_prec - i)."""
    i, j = np.indices((W, W))
    eff = np.minimum(n - j, x_prec - i)
    eff = np.where(j <= k, left, eff)
    return np.clip(eff, 0, fld.cap)


def lift_split(phi: ModularSymbol, cfg: LiftConfig, rng: random.Random | None = None
               ) -> tuple[ModularSymbol, LiftCertificate]:
    """Two-stage lift of a simultaneous eigensymbol at a split prime.

    Stage one lifts in x with U at P^n (eigenvalue lam1^n) through
    distributions in x tensored with V_k in y; stage two lifts in y with U
    at conj(P)^n (eigenvalue lam2^n).  Finally U at P and at conj(P) are
    applied once each and both residuals are reported.
    """
    k = phi.k
    fld0 = phi.fld
    if fld0.splitting is not Splitting.SPLIT:
        raise ValueError("lift_split needs a split prime")
    fld = fld0.with_precision(cfg.M) if fld0.M != cfg.M else fld0
    phi = _at_precision(phi, cfg.M)
    lam1, lam2 = (_lam_at(x, fld) for x in cfg.lam_pair)
    n = cfg.n
    check_slope(lam1, k)
    check_slope(lam2, k)
    L1, L2 = lam1 ** n, lam2 ** n
    check_slope(L1, k, n)
    check_slope(L2, k, n)
    op1n, op2n = split_operators(fld, n)
    op1, op2 = split_operators(fld, 1) if n > 1 else (op1n, op2n)
    w1, w2 = L1.vpi(), L2.vpi()
    N = cfg.N
    A = N + w2  # x-depth of stage one, so that stage two keeps N digits in x
    need = max(A - (k + 1) + w1, N - (k + 1) + w2, A)
    if fld.cap < need:
        raise PrecisionLoss(f"split lift to depth {N} needs M >= {need}", need=need, have=cfg.M)
    W = max(A, k + 1)
    scale = normalisation_scale(phi.values, w1, "left", k, fld)
    if scale:
        phi = phi.with_values(padic.mul(phi.values, _pi_power(scale, fld), fld))
    classical = phi.values[:, :, :k + 1, :k + 1].copy()
    # stage one: LEFT profile, x-depth k+1 -> A
    psi = initial_lift(phi, A, Profile.LEFT, rng, width=W)
    steps = 0
    while psi.N < A:
        psi = iterate_V(psi, op1n, L1, classical, Profile.LEFT)
        steps += 1
    left_vals = psi.values.copy()
    left_eff = eff_table(Profile.LEFT, k, A, W, fld)
    # the second stage needs the first-stage columns in the twisted lattice
    s2 = normalisation_scale(left_vals[:, :, :, :k + 1], w2, "right", k, fld)
    if s2:
        raise DivisibilityFailure("first-stage lift is not in the twisted lattice for the second prime",
                                  scale=s2)
    x_prec = A - _div_loss(w2, fld)
    # every stage-two cell is computed from first-stage data known to pi^(A - i)
    x_known = np.broadcast_to(np.clip(A - np.arange(W), 0, fld.cap)[:, None], (W, W))
    x_known = np.where(eff_table(Profile.LEFT, k, A, W, fld) >= fld.cap, fld.cap, x_known)
    cols = left_vals[:, :, :, :k + 1].copy()
    depth = k + 1
    cur = ModularSymbol(phi.lvl, k, fld, Profile.RIGHT, depth, left_vals, reduce=False)
    while depth < N:
        eff_next = _right_eff(k, depth + 1, x_prec, W, left_eff, fld)
        raw = stencil_for(phi.lvl, op2n).apply_values(cur.values, k, fld)
        _check_divisible(raw, w2, eff_next, fld, known=x_known)
        q = _divide(raw, L2)
        q[:, :, :, :k + 1] = cols
        q = padic.reduce_mod_pi(q, eff_next[None], fld)
        depth += 1
        steps += 1
        cur = ModularSymbol(phi.lvl, k, fld, Profile.RIGHT, depth, q, reduce=False)
    Wn = grid_width(k, N)
    out = ModularSymbol(phi.lvl, k, fld, Profile.JOINT, N, cur.values[:, :, :Wn, :Wn])
    res1 = _eigen_residual(out, op1, lam1)
    res2 = _eigen_residual(out, op2, lam2)
    depth1 = residual_depth(res1, k, fld)
    depth2 = residual_depth(res2, k, fld)
    cert = LiftCertificate(slope={op1.name: lam1.valuation(), op2.name: lam2.valuation()}, N=N, M=cfg.M,
                           scale=scale, residual_depth=[min(a, b) for a, b in zip(depth1, depth2)], steps=steps)
    return out, cert


def joint_operator(fld: LocalFieldDesc) -> HeckeOperator:
    """U_p written as the composite of the two split-prime operators."""
    op1, op2 = split_operators(fld, 1)
    return compose_operators(op1, op2)
