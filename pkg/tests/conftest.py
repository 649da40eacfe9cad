"""Shared fixtures: classical spaces and eigenlifts reused across test files."""

import pytest

from bianchi_oms.geometry import build_level
from bianchi_oms.lifting import LiftConfig, lift, split_operators
from bianchi_oms.padic import make_local_field
from bianchi_oms.quadratic import QuadraticField
from bianchi_oms.symbols import eigen_decomposition, solve_classical_space, up_operator

SOLVE_M = 24        # precision of the classical solve; keeps >= 8 certified digits for k = 2
LIFT_N, LIFT_M = 6, 8


@pytest.fixture(scope="session")
def K():
    return QuadraticField(4)


@pytest.fixture(scope="session")
def inert_spaces(K):
    """k -> (space, eigendata, U_3) for Q(i), level (3), p = 3."""
    out = {}
    op = up_operator(K, 3)
    for k in (0, 2):
        fld = make_local_field(4, 3, SOLVE_M)
        space = solve_classical_space(build_level(K(3)), k, fld)
        out[k] = (space, eigen_decomposition(space, [op]), op)
    return out


@pytest.fixture(scope="session")
def inert_lifts(inert_spaces):
    """k -> list of (eigendata, lambda, lift, certificate) for slopes below k+1."""
    out = {}
    for k, (space, eds, op) in inert_spaces.items():
        rows = []
        for ed in eds:
            lam = ed.eigenvalues[op.name]
            if lam.vpi() >= k + 1:
                continue
            psi, cert = lift(ed.symbol, LiftConfig(N=LIFT_N, M=LIFT_M, lam=lam), op=op)
            rows.append((ed, lam, psi, cert))
        out[k] = rows
    return out


@pytest.fixture(scope="session")
def split_space(K):
    """(space, eigendata, (U_P, U_Pbar)) for Q(i), level (5), p = 5, k = 0."""
    fld = make_local_field(4, 5, SOLVE_M)
    space = solve_classical_space(build_level(K(5)), 0, fld)
    ops = split_operators(fld)
    return space, eigen_decomposition(space, list(ops)), ops


ACCEPTANCE_LINES = []


def record_acceptance(line: str):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
