"""Compare twisted Dirichlet series with the Mellin transform of the
Fourier-Bessel expansion for a synthetic coefficient family on Q(i)."""

from bianchi_oms.analytic import (characters_of_conductor, integral_formula_check, lambda_report,
                                  synthetic_coefficients)
from bianchi_oms.quadratic import QuadraticField

K = QuadraticField(4)
coeffs = synthetic_coefficients(K, cutoff=300)

for k in (0, 2):
    for f in (K.one, K(2, 1), K(3)):
        for psi in characters_of_conductor(K, f, primitive_only=True):
            try:
                rep = integral_formula_check(coeffs, psi, 3, k)
            except Exception as exc:      # type outside the weight range
                print(f"k={k} f={f} chi={psi.chi}: {exc}")
                continue
            print(f"k={k} f={f} chi={psi.chi} n={rep.n}: L = {rep.lhs:.12g}, "
                  f"discrepancy {rep.discrepancy:.1e}")

for f, t in ((K.one, (1, 1)), (K(3), (2, 0))):
    for psi in characters_of_conductor(K, f, t, primitive_only=True):
        rep = lambda_report(coeffs, psi, 2)
        print(f"Lambda at f={f}, type {t}: {rep['lambda']:.12g} (c_qr route differs by {rep['discrepancy']:.1e})")
