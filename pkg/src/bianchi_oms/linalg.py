"""Dense linear algebra over O_L / p^M with valuation pivoting.

Matrices are integer arrays of shape (d, rows, cols) as in :mod:`padic`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import padic
from .errors import PrecisionLoss
from .padic import LocalElement, LocalFieldDesc


def identity(n: int, fld: LocalFieldDesc) -> np.ndarray:
    out = padic.zeros((n, n), fld)
    out[0] = np.eye(n, dtype=out.dtype)
    return out


def _unit_mask(x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    p = fld.p
    if fld.splitting is padic.Splitting.RAMIFIED:
        return (x[0] + padic.mulmod(x[1], fld.root, fld.modulus)) % p != 0
    if fld.d == 1:
        return x[0] % p != 0
    return (x[0] % p != 0) | (x[1] % p != 0)


@dataclass
class Reduction:
    """Result of full-pivot elimination: U A V = diag(pivots)."""

    rank: int
    V: np.ndarray          # column transform, shape (d, n, n)
    col_perm: np.ndarray   # kept for diagnostics
    pivot_vals: list       # pi-adic valuations of the pivots
    precision: int = 0     # remaining precision of the reduced matrix


def smith_reduce(A: np.ndarray, fld: LocalFieldDesc, loss_threshold: int | None = None,
                 known: int | None = None) -> Reduction:
    """Diagonalise A by row and column operations, pivoting on the entry of
    least valuation.

    A is taken to be known modulo pi^known (default: the cap); entries at or
    beyond that count as zero.  Raises PrecisionLoss when the best remaining
    pivot has valuation in [threshold, known), threshold defaulting to half
    of known: such a pivot cannot be told apart from zero.

    Minimal pivoting keeps the reduced block exact, but the column transform
    V is only good modulo pi^(known - largest pivot valuation); that figure
    is returned as `precision`.
    """
    P = fld.modulus
    prec = fld.cap if known is None else min(known, fld.cap)
    worst = 0
    A = np.array(A, dtype=fld.dtype) % P
    d, m, n = A.shape
    V = identity(n, fld)
    perm = np.arange(n)
    pivots = []
    r = 0
    while r < min(m, n):
        sub = A[:, r:, r:]
        units = _unit_mask(sub, fld)
        if units.any():
            i, j = np.unravel_index(np.argmax(units), units.shape)
            v = 0
        else:
            vals = padic.vpi(sub, fld)
            i, j = np.unravel_index(np.argmin(vals), vals.shape)
            v = int(vals[i, j])
            if v >= prec:
                break
            threshold = (prec + 1) // 2 if loss_threshold is None else loss_threshold
            if v >= threshold:
                raise PrecisionLoss(
                    f"pivot of valuation {v}/{fld.e} at step {r} is too close to working precision",
                    step=r, valuation=v, precision=prec)
            worst = max(worst, v)
        i += r
        j += r
        if i != r:
            A[:, [r, i], :] = A[:, [i, r], :]
        if j != r:
            A[:, :, [r, j]] = A[:, :, [j, r]]
            V[:, :, [r, j]] = V[:, :, [j, r]]
            perm[[r, j]] = perm[[j, r]]
        piv = A[:, r, r]
        unit = padic.divide_by_pi_power(piv, v, fld)
        uinv = padic.unit_inverse(unit[:, None], fld)[:, 0]
        # clear the column below the pivot
        col = A[:, r + 1:, r]
        if col.size and col.any():
            f = padic.mul(padic.divide_by_pi_power(col, v, fld), uinv[:, None], fld)
            A[:, r + 1:, r:] = (A[:, r + 1:, r:] - padic.mul(f[:, :, None], A[:, None, r, r:], fld)) % P
        # clear the row to the right, recording the column operation in V
        row = A[:, r, r + 1:]
        if row.size and row.any():
            g = padic.mul(padic.divide_by_pi_power(row, v, fld), uinv[:, None], fld)
            V[:, :, r + 1:] = (V[:, :, r + 1:] - padic.mul(V[:, :, r, None], g[:, None, :], fld)) % P
            A[:, r, r + 1:] = 0
        pivots.append(v)
        r += 1
    return Reduction(r, V, perm, pivots, prec - worst)


def kernel(A: np.ndarray, fld: LocalFieldDesc, loss_threshold: int | None = None,
           known: int | None = None, with_precision: bool = False):
    """Basis of the right kernel of A as columns, shape (d, n, n - rank).
    With with_precision, also return the pi-adic precision of the basis."""
    red = smith_reduce(A, fld, loss_threshold, known)
    Z = red.V[:, :, red.rank:]
    return (Z, red.precision) if with_precision else Z


def inverse(A: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    """Inverse of a square matrix over O_L with unit determinant."""
    P = fld.modulus
    n = A.shape[1]
    aug = np.concatenate([np.array(A, dtype=fld.dtype) % P, identity(n, fld)], axis=2)
    for r in range(n):
        units = _unit_mask(aug[:, r:, r], fld)
        if not units.any():
            raise PrecisionLoss("matrix is not invertible over O_L", column=r)
        i = r + int(np.argmax(units))
        if i != r:
            aug[:, [r, i], :] = aug[:, [i, r], :]
        uinv = padic.unit_inverse(aug[:, r, r][:, None], fld)
        aug[:, r, :] = padic.mul(aug[:, r, :], uinv, fld)
        f = aug[:, :, r].copy()
        f[:, r] = 0
        aug = (aug - padic.mul(f[:, :, None], aug[:, None, r, :], fld)) % P
    return aug[:, :, n:]


def normalize_basis(B: np.ndarray, fld: LocalFieldDesc) -> tuple[np.ndarray, list[int]]:
    """Rewrite a saturated basis (columns of B) so that some r rows form the
    identity.  Returns the new basis and the chosen row indices."""
    P = fld.modulus
    B = np.array(B, dtype=fld.dtype) % P
    d, n, r = B.shape
    work = B.copy()
    rows: list[int] = []
    for c in range(r):
        units = _unit_mask(work[:, :, c], fld)
        units[rows] = False
        if not units.any():
            raise PrecisionLoss("basis is not saturated", column=c)
        i = int(np.argmax(units))
        rows.append(i)
        uinv = padic.unit_inverse(work[:, i, c][:, None], fld)
        work[:, :, c] = padic.mul(work[:, :, c], uinv, fld)
        f = work[:, i, :].copy()
        f[:, c] = 0
        work = (work - padic.mul(work[:, :, c, None], f[:, None, :], fld)) % P
    order = np.argsort(rows)
    rows_sorted = [rows[i] for i in order]
    return work[:, :, order], rows_sorted


def mat_vec(A: np.ndarray, x: np.ndarray, fld: LocalFieldDesc) -> np.ndarray:
    return padic.matmul(A, x[:, :, None], fld)[:, :, 0]


def charpoly(A: np.ndarray, fld: LocalFieldDesc) -> list[LocalElement]:
    """Characteristic polynomial det(xI - A), highest degree first
    (division-free Berkowitz recursion)."""
    P = fld.modulus
    n = A.shape[1]
    if n == 0:
        return [fld.one]
    one = padic.scalar_array(fld.one)
    vect = np.stack([one, (-A[:, 0, 0]) % P], axis=1)  # (d, 2)
    for r in range(1, n):
        Ar = A[:, :r, :r]
        C = A[:, :r, r:r + 1]
        R = A[:, r:r + 1, :r]
        a = A[:, r, r]
        col = [one, (-a) % P]
        w = C
        for _ in range(r):
            col.append((-padic.matmul(R, w, fld)[:, 0, 0]) % P)
            w = padic.matmul(Ar, w, fld)
        col = np.stack(col, axis=1)  # (d, r+2)
        new = padic.zeros((r + 2,), fld)
        for i in range(r + 2):
            for j in range(min(i + 1, r + 1)):
                new[:, i] = (new[:, i] + padic.mul(col[:, i - j], vect[:, j], fld)) % P
        vect = new
    return [LocalElement.from_array(vect[:, i], fld) for i in range(n + 1)]


def poly_eval(coeffs: list[LocalElement], x: LocalElement) -> LocalElement:
    acc = x.fld.zero
    for c in coeffs:
        acc = acc * x + c
    return acc


def poly_derivative(coeffs: list[LocalElement]) -> list[LocalElement]:
    n = len(coeffs) - 1
    return [c * (n - i) for i, c in enumerate(coeffs[:-1])]


def _taylor_shift(coeffs: list[LocalElement], rho: LocalElement) -> list[LocalElement]:
    """Coefficients of f(rho + y), lowest degree first."""
    fld = rho.fld
    n = len(coeffs) - 1
    low = [fld.zero] * (n + 1)
    for c in coeffs:
        # low <- low * (y + rho) + c
        nxt = [fld.zero] * (n + 1)
        for i in range(n + 1):
            if i + 1 <= n:
                nxt[i + 1] = nxt[i + 1] + low[i]
            nxt[i] = nxt[i] + low[i] * rho
        nxt[0] = nxt[0] + c
        low = nxt
    return low


def _shift_scale(coeffs: list[LocalElement], rho: LocalElement) -> tuple[list[LocalElement], int]:
    """Coefficients of g(y) = f(rho + pi*y) / pi^s with s maximal."""
    fld = rho.fld
    n = len(coeffs) - 1
    low = _taylor_shift(coeffs, rho)
    pi = fld.uniformizer
    scaled = [low[i] * pi**i for i in range(n + 1)]
    s = min(c.vpi() for c in scaled)
    if s >= fld.cap:
        return scaled[::-1], s
    arrs = [padic.divide_by_pi_power(c.array(), s, fld) for c in reversed(scaled)]
    return [LocalElement.from_array(a, fld) for a in arrs], s


@dataclass
class Root:
    value: LocalElement
    precision: int     # known modulo pi^precision
    multiplicity: int  # residual multiplicity of the cluster


def roots(coeffs: list[LocalElement], fld: LocalFieldDesc) -> list[Root]:
    """Roots in O_L of a monic polynomial, found by recursive residue
    search.  Clusters that cannot be separated at working precision are
    returned once with their multiplicity and known precision."""
    found: list[Root] = []
    _roots_rec(coeffs, fld.zero, 0, 0, fld, found)
    return [_refine(coeffs, r) if r.multiplicity == 1 else r for r in found]


def _refine(coeffs, root: Root) -> Root:
    """Newton steps on the original polynomial; the Hensel condition
    v(f) > 2 v(f') certifies precision v(f) - v(f')."""
    fld = root.value.fld
    df = poly_derivative(coeffs)
    x, best = root.value, root
    for _ in range(2 * fld.cap.bit_length() + 4):
        fx, dfx = poly_eval(coeffs, x), poly_eval(df, x)
        vf, vd = fx.vpi(), dfx.vpi()
        if vd >= fld.cap or vf <= 2 * vd:
            break
        prec = min(vf - vd, fld.cap - vd)
        if prec > best.precision:
            best = Root(x, prec, 1)
        if vf >= fld.cap:
            break
        x = x - fx.exact_div(dfx)
    return best


def _roots_rec(coeffs, base, shift, lost, fld, found):
    # roots of coeffs(y); actual root = base + pi^shift * y
    pi = fld.uniformizer
    n = len(coeffs) - 1
    # degree of the reduction
    red_deg = max((n - i for i, c in enumerate(coeffs) if c.vpi() == 0), default=-1)
    if red_deg <= 0:
        return
    for cand in padic.residue_field_elements(fld):
        val = poly_eval(coeffs, cand)
        if val.vpi() == 0:
            continue
        mult = _residue_multiplicity(coeffs, cand)
        root = base + pi**shift * cand
        if mult == 1:
            r = _hensel(coeffs, cand, fld)
            found.append(Root(base + pi**shift * r, max(fld.cap - lost, shift + 1), 1))
            continue
        if shift + 1 >= fld.cap - lost:
            found.append(Root(root, shift + 1, mult))
            continue
        g, s = _shift_scale(coeffs, cand)
        if s >= fld.cap:
            found.append(Root(root, shift + 1, mult))
            continue
        _roots_rec(g, root, shift + 1, lost + s, fld, found)


def _residue_multiplicity(coeffs, rho) -> int:
    low = _taylor_shift(coeffs, rho)
    return next(i for i, c in enumerate(low) if c.vpi() == 0)


def _hensel(coeffs, x, fld):
    df = poly_derivative(coeffs)
    for _ in range(2 * fld.cap.bit_length() + 4):
        fx = poly_eval(coeffs, x)
        if fx.is_zero():
            break
        x = x - fx * poly_eval(df, x).inverse()
    return x
