"""Command-line front end: bianchi-oms {lift, plf, classical, gauss, ingest, selftest}."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction

from . import __version__
from .config import RunConfig, load_config
from .errors import BianchiError, ConfigError
from .store import Cache, cache_root, canonical_bytes, content_key, ingest_file, atomic_write

SOLVE_FACTOR = 3      # classical space solved at SOLVE_FACTOR * M digits


def _coeffs(x) -> list[str]:
    return [str(int(c)) for c in x.coeffs]


def _fmt(x) -> str:
    return str(x) if isinstance(x, (Fraction, int)) else repr(x)


def _log(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# lift


def _eigen_inputs(cfg: RunConfig):
    """[(symbol, {key: eigenvalue}, {key: slope})] from the solver or an ingested file."""
    from .geometry import build_level
    from .lifting import split_operators
    from .padic import Splitting, make_local_field
    from .symbols import eigen_decomposition, solve_classical_space, up_operator

    K = cfg.field
    if cfg.eigen_source != "solver":
        kind, (phi, eig), _ = ingest_file(cfg.eigen_source)
        if kind != "symbol" or not eig:
            raise ConfigError("eigen_source must be a symbol record carrying eigenvalues",
                              path=cfg.eigen_source)
        return [(phi, eig, {k: v.valuation() for k, v in eig.items()})]
    fld = make_local_field(cfg.D, cfg.p, SOLVE_FACTOR * cfg.M)
    lvl = build_level(cfg.level_gen)
    space = solve_classical_space(lvl, cfg.k, fld)
    if fld.splitting is Splitting.SPLIT:
        ops = split_operators(fld)
        keys = ("P", "Pbar")
    else:
        ops = [up_operator(K, cfg.p)]
        keys = ("p",)
    out = []
    for ed in eigen_decomposition(space, ops):
        eig = {key: ed.eigenvalues[op.name] for key, op in zip(keys, ops)}
        out.append((ed.symbol, eig, {key: ed.slopes[op.name] for key, op in zip(keys, ops)}))
    return out


def compute_lifts(cfg: RunConfig) -> dict:
    from .lifting import LiftConfig, lift, lift_split
    from .symbols import up_operator

    records, skipped = [], []
    for idx, (phi, eig, slopes) in enumerate(_eigen_inputs(cfg)):
        head = {"id": idx, "eigenvalues": {k: _coeffs(v) for k, v in sorted(eig.items())},
                "slopes": {k: _fmt(v) for k, v in sorted(slopes.items())}}
        try:
            if "p" in eig:
                psi, cert = lift(phi, LiftConfig(N=cfg.N, M=cfg.M, lam=eig["p"]),
                                 op=up_operator(cfg.field, cfg.p))
            else:
                psi, cert = lift_split(phi, LiftConfig(N=cfg.N, M=cfg.M, lam_pair=(eig["P"], eig["Pbar"])))
        except BianchiError as exc:
            skipped.append({**head, "reason": exc.to_dict()})
            continue
        records.append({**head, "certificate": cert.to_dict(), "symbol": psi.to_json("lift")})
    return {"kind": "lift_run", "code_version": __version__,
            "config": {k: v for k, v in cfg.to_dict().items() if k in ("D", "p", "level", "k", "N", "M", "eigen_source")},
            "lifts": records, "skipped": skipped}


def _lift_key(cfg: RunConfig) -> str:
    return content_key("lift", D=cfg.D, p=cfg.p, level=list(cfg.level), k=cfg.k, N=cfg.N, M=cfg.M,
                       eigen_source=cfg.eigen_source)


def load_or_compute_lifts(cfg: RunConfig) -> tuple[dict, bytes, str]:
    cfg.validate(("D", "p", "level", "N", "M"))
    cache = Cache(cache_root(cfg.cache_dir))
    key = _lift_key(cfg)
    data = cache.get("lift", key)
    if data is None:
        _log(f"cache miss {key}")
        data = canonical_bytes(compute_lifts(cfg))
        cache.put("lift", key, data)
    else:
        _log(f"cache hit {key}")
    return json.loads(data), data, key


def cmd_lift(cfg: RunConfig) -> dict:
    run, data, key = load_or_compute_lifts(cfg)
    if cfg.out:
        atomic_write(cfg.out, data)
    return {"cache_key": key, "field": cfg.D, "p": cfg.p, "level": list(cfg.level), "weight": cfg.k,
            "lifts": [{k: r[k] for k in ("id", "eigenvalues", "slopes", "certificate")} for r in run["lifts"]],
            "skipped": run["skipped"], "artifact": cfg.out}


# ---------------------------------------------------------------------------
# plf


def character_table(cfg: RunConfig) -> list:
    """Trivial character plus every character mod (p) with integral type (q, r), 0 <= q, r <= k."""
    from .analytic import GrossChar, characters_of_conductor

    K = cfg.field
    table = [GrossChar.trivial(K)]
    for q in range(cfg.k + 1):
        for r in range(cfg.k + 1):
            table.extend(characters_of_conductor(K, K(cfg.p), infinity_type=(q, r)))
    return table


def cmd_plf(cfg: RunConfig) -> dict:
    from .padic_l import PadicLFunction, admissibility_report, critical_exponents, mu_p_eval
    from .padic import LocalElement
    from .symbols import ModularSymbol

    run, _, key = load_or_compute_lifts(cfg)
    chars = character_table(cfg)
    char_rows = [{"id": i, **c.to_dict()} for i, c in enumerate(chars)]
    symbols = []
    for rec in run["lifts"]:
        psi = ModularSymbol.from_json(rec["symbol"])
        eig = {k: LocalElement(tuple(int(c) % psi.fld.modulus for c in v), psi.fld) for k, v in rec["eigenvalues"].items()}
        Lp = PadicLFunction(psi, eig, None, {k: Fraction(v) for k, v in rec["slopes"].items()})
        evals = []
        for i, ch in enumerate(chars):
            q, r = critical_exponents(ch)
            row = {"character_id": i, "conductor": list(ch.f.coords), "q": q, "r": r}
            try:
                v = mu_p_eval(Lp, ch)
                row.update(value=v.to_dict(), effective_precision=v.relative_precision)
            except BianchiError as exc:
                row["error"] = exc.to_dict()
            evals.append(row)
        rep = admissibility_report(Lp)
        rep["integral"] = rep["integral"] and rec["certificate"]["scale"] >= 0
        symbols.append({"id": rec["id"], "slopes": rec["slopes"], "evaluations": evals,
                        "admissibility": rep})
    out = {"field": cfg.D, "p": cfg.p, "level": list(cfg.level), "weight": cfg.k, "cache_key": key,
           "characters": char_rows, "symbols": symbols}
    if cfg.out:
        atomic_write(cfg.out, canonical_bytes(out))
    return out


# ---------------------------------------------------------------------------
# analytic suites


def _default_conductors(cfg: RunConfig):
    K = cfg.field
    if cfg.conductors:
        return [K(*c) for c in cfg.conductors]
    if cfg.D == 4:
        return [K(2, 1), K(3)]
    raise ConfigError("no default conductors for this field; set 'conductors'", D=cfg.D)


def cmd_gauss(cfg: RunConfig, tol: float = 1e-12) -> dict:
    from .analytic import characters_of_conductor, gauss_identity_residuals

    cfg.validate(("D",))
    rows, worst = [], 0.0
    for f in _default_conductors(cfg):
        for psi in characters_of_conductor(cfg.field, f):
            res = gauss_identity_residuals(psi)
            err = max(res["identity_i"], res["identity_ii"])
            if res["primitive"]:
                err = max(err, res["vanishing"], abs(abs(res["tau"]) ** 2 - psi.conductor_norm))
            worst = max(worst, err)
            rows.append({"character": psi.to_dict(), "primitive": res["primitive"],
                         "tau": [f"{res['tau'].real:.15e}", f"{res['tau'].imag:.15e}"],
                         "max_residual": f"{err:.3e}"})
    return {"suite": "gauss", "tolerance": f"{tol:.0e}", "max_residual": f"{worst:.3e}",
            "ok": bool(worst <= tol), "characters": rows}


def cmd_classical(cfg: RunConfig, tol: float = 1e-6) -> dict:
    from .analytic import characters_of_conductor, integral_formula_check, synthetic_coefficients
    from .errors import ConductorMismatch

    cfg.validate(("D",))
    K = cfg.field
    coeffs = synthetic_coefficients(K, cutoff=cfg.cutoff)
    rows, worst = [], 0.0
    for f in [K.one] + _default_conductors(cfg):
        for psi in characters_of_conductor(K, f, primitive_only=True):
            try:
                rep = integral_formula_check(coeffs, psi, cfg.s, cfg.k, exact=False)
            except ConductorMismatch:
                continue
            worst = max(worst, rep.discrepancy)
            rows.append({"character": psi.to_dict(), "n": rep.n, "s": str(rep.s),
                         "lhs": [f"{rep.lhs.real:.15e}", f"{rep.lhs.imag:.15e}"],
                         "rhs": [f"{rep.rhs.real:.15e}", f"{rep.rhs.imag:.15e}"],
                         "discrepancy": f"{rep.discrepancy:.3e}"})
    return {"suite": "classical", "k": cfg.k, "tolerance": f"{tol:.0e}",
            "max_discrepancy": f"{worst:.3e}", "ok": bool(worst <= tol), "checks": rows}


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(path: str, cfg: RunConfig) -> dict:
    kind, obj, raw = ingest_file(path)
    data = canonical_bytes(raw)
    key = content_key("ingest", record_kind=kind, sha=hashlib.sha256(data).hexdigest())
    stored = Cache(cache_root(cfg.cache_dir)).put("ingested", key, data)
    summary = {"kind": kind, "provenance": raw["provenance"], "cache_key": key, "stored": str(stored)}
    if kind == "coefficients":
        summary.update(D=obj.field.D, cutoff=obj.cutoff, entries=len(raw["coefficients"]))
    else:
        phi, eig = obj
        summary.update(D=phi.lvl.field.D, p=phi.fld.p, k=phi.k, N=phi.N, eigenvalues=sorted(eig))
    return summary


# ---------------------------------------------------------------------------
# selftest


def _selftest_checks():
    import numpy as np

    from .analytic import (GrossChar, bessel_K, characters_of_conductor, gauss_identity_residuals,
                           integral_formula_check, standard_integral, standard_integral_closed,
                           synthetic_coefficients)
    from .distributions import Profile, act_weight, in_filtration, random_in_filtration, random_sigma0_pair
    from .geometry import build_level
    from .lifting import LiftConfig, lift
    from .padic import make_local_field
    from .padic_l import (LocallyPolynomial, PadicLFunction, build_ray_level, classical_block_value,
                          eval_locally_poly, telescoping_sides)
    from .padic import vpi
    from .quadratic import QuadraticField
    from .symbols import eigen_decomposition, solve_classical_space, up_operator

    K = QuadraticField(4)

    def filtration():
        fld, rng = make_local_field(4, 3, 8), np.random.default_rng(0)
        for prof in (Profile.JOINT, Profile.LEFT, Profile.RIGHT):
            for k in (0, 2):
                for _ in range(20):
                    mu = random_in_filtration(k, 8, prof, fld, rng)
                    if not in_filtration(act_weight(mu, random_sigma0_pair(fld, rng)), 8):
                        return False
        return True

    def bessel():
        ok = abs(bessel_K(-3, 2.0) - bessel_K(3, 2.0)) == 0
        return ok and abs(standard_integral(4, 1, 3.0) / standard_integral_closed(4, 1, 3.0) - 1) < 1e-8

    def gauss():
        worst = 0.0
        for psi in characters_of_conductor(K, K(2, 1)):
            r = gauss_identity_residuals(psi)
            worst = max(worst, r["identity_i"], r["identity_ii"])
        return worst < 1e-12

    def lift_and_evaluate():
        fld = make_local_field(4, 3, 18)
        op = up_operator(K, 3)
        eds = eigen_decomposition(solve_classical_space(build_level(K(3)), 0, fld), [op])
        for ed in eds:
            lam = ed.eigenvalues[op.name]
            if lam.vpi() >= 1:
                continue
            psi, cert = lift(ed.symbol, LiftConfig(N=4, M=6, lam=lam), op=op)
            if psi.specialize() != ed.symbol.change_precision(psi.fld) or min(cert.residual_depth) < 4:
                return False
            Lp = PadicLFunction(psi, {"p": lam}, cert)
            lvl = Lp.level(1)
            for b in lvl.invertible:
                P = LocallyPolynomial(0, 0, b)
                if not eval_locally_poly(Lp, P, lvl).agrees(classical_block_value(Lp, P, lvl)):
                    return False
            lhs, rhs, prec = telescoping_sides(Lp, 0, 0, lvl)
            if vpi((lhs - rhs).array(), psi.fld) < prec:
                return False
        return True

    def local_arithmetic():
        for D, p in ((4, 3), (4, 5), (4, 2)):
            fld = make_local_field(D, p, 10)
            x = fld.element(*range(2, 2 + fld.d))
            if x.is_unit() and x * x.inverse() != fld.one:
                return False
        return True

    def ray_levels():
        fld = make_local_field(4, 3, 6)
        for n in (1, 2):
            lvl = build_ray_level(fld, {"p": n})
            if not lvl.check_cusps() or len(lvl.class_reps) * len(lvl.unit_image) != len(lvl.invertible):
                return False
        return True

    def mellin():
        coeffs = synthetic_coefficients(K, cutoff=120)
        return integral_formula_check(coeffs, GrossChar.trivial(K), 3, 0).discrepancy < 1e-6

    def config_rejection():
        try:
            RunConfig(D=4, p=3, level=(5, 0), N=6, M=8).validate(("D", "p", "level"))
        except ConfigError:
            return True
        return False

    return [("local arithmetic", local_arithmetic), ("filtration stability", filtration),
            ("bessel layer", bessel), ("gauss sums", gauss), ("mellin identity", mellin),
            ("ray class levels", ray_levels), ("lift and evaluate", lift_and_evaluate),
            ("config rejection", config_rejection)]


def cmd_selftest(cfg: RunConfig) -> dict:
    rows = []
    for name, fn in _selftest_checks():
        t = time.perf_counter()
        try:
            ok, err = bool(fn()), None
        except BianchiError as exc:
            ok, err = False, exc.to_dict()
        rows.append({"check": name, "ok": ok, "seconds": f"{time.perf_counter() - t:.2f}",
                     **({"error": err} if err else {})})
    return {"suite": "selftest", "ok": all(r["ok"] for r in rows), "checks": rows}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bianchi-oms", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [("lift", "solve, decompose and lift classical eigensymbols"),
                           ("plf", "evaluate the p-adic L-function on characters"),
                           ("classical", "check the Mellin identity on synthetic coefficients"),
                           ("gauss", "check the Gauss-sum identities"),
                           ("selftest", "run the built-in invariant checks")]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", "-c", help="key = value configuration file")
        sp.add_argument("set", nargs="*", metavar="key=value", help="configuration overrides")
    sp = sub.add_parser("ingest", help="validate and store a coefficient table or symbol")
    sp.add_argument("path")
    sp.add_argument("--config", "-c")
    sp.add_argument("set", nargs="*", metavar="key=value")
    return ap


def run(argv=None) -> tuple[int, dict]:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "lift":
            return 0, cmd_lift(cfg)
        if args.command == "plf":
            return 0, cmd_plf(cfg)
        if args.command == "ingest":
            return 0, cmd_ingest(args.path, cfg)
        if args.command in ("classical", "gauss"):
            if cfg.D is None and args.config is None and not args.set:
                raise ConfigError("empty configuration")
            rep = (cmd_classical if args.command == "classical" else cmd_gauss)(cfg)
        else:
            rep = cmd_selftest(cfg)
        return (0 if rep["ok"] else 1), rep
    except BianchiError as exc:
        return 2, exc.to_dict()


def main(argv=None) -> int:
    code, payload = run(argv)
    stream = sys.stdout if code == 0 or "suite" in payload else sys.stderr
    stream.write(canonical_bytes(payload).decode("ascii"))
    return code


if __name__ == "__main__":
    sys.exit(main())
