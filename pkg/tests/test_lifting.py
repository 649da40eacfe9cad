import random

import numpy as np
import pytest

from bianchi_oms.distributions import Profile, random_in_filtration
from bianchi_oms.errors import DivisibilityFailure, PrecisionLoss, SlopeTooLarge
from bianchi_oms.lifting import (LiftConfig, check_slope, initial_lift, iterate_V, joint_operator, lift,
                                 lift_split, residual_depth, verify_uniqueness)
from bianchi_oms.symbols import ModularSymbol, apply_hecke

from conftest import LIFT_M, LIFT_N


def _residual(psi, op, lam):
    raw = apply_hecke(psi, op).values
    return (raw - psi.scale(lam).values) % psi.fld.modulus


@pytest.mark.parametrize("k", [0, 2])
def test_round_trip_and_residual(inert_spaces, inert_lifts, k):
    _, _, op = inert_spaces[k]
    rows = inert_lifts[k]
    assert rows, "no eigensymbol within the slope bound"
    for ed, lam, psi, cert in rows:
        assert psi.specialize() == ed.symbol.change_precision(psi.fld)
        assert min(cert.residual_depth) >= LIFT_N
        assert cert.steps == LIFT_N - (k + 1)
        # independent recomputation of the residual
        assert min(residual_depth(_residual(psi, op, _lam8(lam, psi)), k, psi.fld)) >= LIFT_N


def _lam8(lam, psi):
    return psi.fld.element(*lam.coeffs)


def test_slope_too_large(inert_spaces):
    for k, (space, eds, op) in inert_spaces.items():
        big = [ed for ed in eds if ed.eigenvalues[op.name].vpi() >= k + 1]
        assert big
        for ed in big:
            with pytest.raises(SlopeTooLarge):
                lift(ed.symbol, LiftConfig(N=LIFT_N, M=LIFT_M, lam=ed.eigenvalues[op.name]), op=op)
    fld = inert_spaces[0][0].fld
    with pytest.raises(SlopeTooLarge):
        check_slope(fld.from_int(3), 0)
    assert check_slope(fld.from_int(9), 2) == 2


def test_zero_symbol_lifts_to_zero(inert_spaces):
    space, eds, op = inert_spaces[0]
    zero = ModularSymbol.zero(space.basis[0].lvl, 0, space.fld)
    psi, cert = lift(zero, LiftConfig(N=LIFT_N, M=LIFT_M, lam=space.fld.one), op=op)
    assert psi.is_zero()
    assert initial_lift(zero, 6).is_zero()


def test_precision_too_small(inert_spaces):
    space, eds, op = inert_spaces[2]
    ed = next(e for e in eds if e.eigenvalues[op.name].vpi() == 1)
    with pytest.raises(PrecisionLoss):
        lift(ed.symbol, LiftConfig(N=8, M=5, lam=ed.eigenvalues[op.name]), op=op)


def test_divisibility_failure_on_non_eigen_input(inert_spaces):
    space, eds, op = inert_spaces[2]
    lam = next(e for e in eds if e.eigenvalues[op.name].vpi() == 1).eigenvalues[op.name]
    rng = np.random.default_rng(0)
    coeffs = rng.integers(0, space.fld.modulus, size=(space.fld.d, space.dim)).astype(space.fld.dtype)
    phi = space.combine(coeffs).change_precision(space.fld.with_precision(LIFT_M))
    lam8 = phi.fld.element(*lam.coeffs)
    psi = initial_lift(phi, LIFT_N)
    with pytest.raises(DivisibilityFailure) as exc:
        iterate_V(psi, op, lam8, phi.values[:, :, :3, :3].copy())
    assert exc.value.to_dict()["error"] == "divisibility_failure"


def test_fixed_point(inert_lifts, inert_spaces):
    for k, rows in inert_lifts.items():
        op = inert_spaces[k][2]
        for ed, lam, psi, cert in rows:
            lam8 = psi.fld.element(*lam.coeffs)
            out = iterate_V(psi, op, lam8, psi.values[:, :, :k + 1, :k + 1].copy())
            assert out.with_values(out.values, N=psi.N) == psi


@pytest.mark.parametrize("j", [3, 4, 5])
def test_contraction(inert_lifts, inert_spaces, j):
    """A perturbation in F^j of the input does not change the depth j+1 output."""
    k = 0
    op = inert_spaces[k][2]
    ed, lam, full, _ = inert_lifts[k][0]
    fld = full.fld
    lam8 = fld.element(*lam.coeffs)
    classical = full.values[:, :, :1, :1].copy()
    # the lift read at depth j, stored in the full-width grid
    base = full.with_values(full.values, N=j)
    rng = np.random.default_rng(j)
    eps = np.stack([random_in_filtration(k, j, Profile.JOINT, fld, rng, depth=full.W).moments
                    for _ in range(base.G)], axis=1)
    assert eps.any()
    pert = ModularSymbol(base.lvl, k, fld, Profile.JOINT, j, (base.values + eps) % fld.modulus, reduce=False)
    a = iterate_V(base, op, lam8, classical)
    b = iterate_V(pert, op, lam8, classical)
    assert a == b
    # a perturbation one level coarser is visible after the step
    eps2 = np.stack([random_in_filtration(k, j - 2, Profile.JOINT, fld, rng, depth=full.W).moments
                     for _ in range(base.G)], axis=1)
    worse = ModularSymbol(base.lvl, k, fld, Profile.JOINT, j, (base.values + eps2) % fld.modulus, reduce=False)
    assert not (iterate_V(worse, op, lam8, classical) == a)


def test_uniqueness(inert_spaces, inert_lifts):
    for k, rows in inert_lifts.items():
        op = inert_spaces[k][2]
        for ed, lam, psi, cert in rows:
            cfg = LiftConfig(N=LIFT_N, M=LIFT_M, lam=lam)
            assert verify_uniqueness(ed.symbol, cfg, trials=1, op=op)["agree"]
            rep = verify_uniqueness(ed.symbol, cfg, trials=3, seed=k, op=op)
            assert rep["agree"]
            assert rep["min_discrepancy_depth"] is None or rep["min_discrepancy_depth"] >= LIFT_N


def _ordinary_split(split_space):
    space, eds, (opP, opPbar) = split_space
    return [ed for ed in eds if ed.eigenvalues[opP.name].vpi() == 0 and ed.eigenvalues[opPbar.name].vpi() == 0]


def test_split_lift_matches_joint(split_space):
    space, eds, (opP, opPbar) = split_space
    rows = _ordinary_split(split_space)
    assert rows
    N, M = 5, 7
    for ed in rows:
        l1, l2 = ed.eigenvalues[opP.name], ed.eigenvalues[opPbar.name]
        psi, cert = lift_split(ed.symbol, LiftConfig(N=N, M=M, lam_pair=(l1, l2)))
        assert psi.specialize() == ed.symbol.change_precision(psi.fld)
        assert min(cert.residual_depth) >= N
        fl = psi.fld
        for op, lam in ((opP, l1), (opPbar, l2)):
            assert min(residual_depth(_residual(psi, op, fl.element(*lam.coeffs)), 0, fl)) >= N
        joint, _ = lift(ed.symbol, LiftConfig(N=N, M=M, lam=l1 * l2), op=joint_operator(space.fld))
        assert joint == psi


def test_split_lift_with_squared_prime(split_space):
    # U at P^2 with eigenvalue lam^2 lifts to the same symbol
    space, eds, (opP, opPbar) = split_space
    ed = _ordinary_split(split_space)[0]
    pair = (ed.eigenvalues[opP.name], ed.eigenvalues[opPbar.name])
    one, _ = lift_split(ed.symbol, LiftConfig(N=4, M=6, lam_pair=pair))
    two, cert = lift_split(ed.symbol, LiftConfig(N=4, M=6, lam_pair=pair, n=2))
    assert one == two
    assert min(cert.residual_depth) >= 4


def test_split_zero_symbol(split_space):
    space, _, _ = split_space
    zero = ModularSymbol.zero(space.basis[0].lvl, 0, space.fld)
    one = space.fld.one
    psi, _ = lift_split(zero, LiftConfig(N=4, M=6, lam_pair=(one, one)))
    assert psi.is_zero()


def test_split_slope_bound(split_space):
    space, eds, (opP, opPbar) = split_space
    ed = next(e for e in eds if e.eigenvalues[opP.name].vpi() == 1)
    with pytest.raises(SlopeTooLarge):
        lift_split(ed.symbol, LiftConfig(N=4, M=6, lam_pair=(ed.eigenvalues[opP.name],
                                                             ed.eigenvalues[opPbar.name])))
