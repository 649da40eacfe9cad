"""Lift the weight-2 classical eigensymbols of level (3) over Q(i) at the
inert prime 3 and evaluate the resulting p-adic L-function on the
characters of conductor dividing (3)."""

from bianchi_oms.analytic import GrossChar, characters_of_conductor
from bianchi_oms.geometry import build_level
from bianchi_oms.lifting import LiftConfig, lift
from bianchi_oms.padic import make_local_field
from bianchi_oms.padic_l import PadicLFunction, admissibility_report, mu_p_eval
from bianchi_oms.quadratic import QuadraticField
from bianchi_oms.symbols import eigen_decomposition, solve_classical_space, up_operator

K = QuadraticField(4)
k, N, M = 2, 6, 8
fld = make_local_field(4, 3, 3 * M)
op = up_operator(K, 3)
space = solve_classical_space(build_level(K(3)), k, fld)
print(f"classical space: dimension {space.dim}")

for ed in eigen_decomposition(space, [op]):
    lam = ed.eigenvalues[op.name]
    slope = ed.slopes[op.name]
    if lam.vpi() >= k + 1:
        print(f"slope {slope}: above the lifting bound, skipped")
        continue
    psi, cert = lift(ed.symbol, LiftConfig(N=N, M=M, lam=lam), op=op)
    Lp = PadicLFunction(psi, {"p": lam}, cert)
    print(f"slope {slope}: lifted, residual depth >= {min(cert.residual_depth)}, "
          f"integral: {admissibility_report(Lp)['integral']}")
    chars = [GrossChar.trivial(K)] + [c for q in range(k + 1) for r in range(k + 1)
                                      for c in characters_of_conductor(K, K(3), (q, r))]
    for ch in chars:
        v = mu_p_eval(Lp, ch)
        print(f"   conductor {ch.f}, type ({ch.a},{ch.b}), chi {ch.chi}: "
              f"valuation {v.valuation()}, known to {v.relative_precision} digits")
