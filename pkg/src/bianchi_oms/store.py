"""Persistence: canonical JSON, atomic writes, the result cache and ingestion
of externally supplied coefficient tables and symbols."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .errors import SchemaError

CACHE_ENV = "BIANCHI_CACHE_DIR"


def canonical_bytes(obj) -> bytes:
    """Deterministic serialisation: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=True) + "\n").encode("ascii")


def atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# ---------------------------------------------------------------------------
# cache


def cache_root(override: str | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "bianchi-oms"


def content_key(kind: str, **params) -> str:
    payload = {"kind": kind, "code_version": __version__, **params}
    return hashlib.sha256(canonical_bytes(payload)).hexdigest()[:32]


class Cache:
    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def get(self, kind: str, key: str) -> bytes | None:
        p = self.path(kind, key)
        return p.read_bytes() if p.exists() else None

    def put(self, kind: str, key: str, data: bytes) -> Path:
        return atomic_write(self.path(kind, key), data)


# ---------------------------------------------------------------------------
# ingestion


def load_schema(name: str) -> dict:
    text = resources.files("bianchi_oms").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise SchemaError(f"duplicate key {k!r}", field=k)
        seen[k] = v
    return seen


def parse_json(text: str, source: str = "<input>"):
    try:
        return json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", source=source, line=exc.lineno,
                          column=exc.colno) from exc


def validate(obj, schema_name: str, source: str = "<input>"):
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        field = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise SchemaError(f"{field}: {e.message}", source=source, field=field,
                          n_errors=len(errors))


def ingest_coefficients(obj: dict, source: str = "<input>"):
    """Validate a coefficient table and build BianchiCoefficients."""
    from .analytic import BianchiCoefficients
    from .quadratic import QuadraticField

    validate(obj, "coefficients", source)
    try:
        K = QuadraticField(obj["field"]["D"])
    except ValueError as exc:
        raise SchemaError(str(exc), source=source, field="field/D") from exc
    vals, first = {}, {}
    for idx, entry in enumerate(obj["coefficients"]):
        z = K(*entry["ideal"])
        if not z:
            raise SchemaError("zero ideal", source=source, field=f"coefficients/{idx}/ideal")
        key = K.canonical(z).coords
        if key in first:
            raise SchemaError("duplicate ideal", source=source, field=f"coefficients/{idx}/ideal",
                              first=f"coefficients/{first[key]}", ideal=list(key))
        if z.norm() > obj["cutoff"]:
            raise SchemaError("ideal beyond the stated cutoff", source=source,
                              field=f"coefficients/{idx}/ideal", norm=z.norm())
        first[key] = idx
        re_, im_ = (float(Fraction(v)) for v in entry["value"])
        vals[key] = complex(re_, im_)
    growth = None
    if "growth" in obj:
        growth = (float(obj["growth"]["C"]), float(obj["growth"]["sigma"]))
    return BianchiCoefficients(K, vals, obj["cutoff"], growth, obj.get("normalized", False),
                               obj.get("weight"), obj["provenance"])


def ingest_symbol(obj: dict, source: str = "<input>"):
    """Validate a symbol record; returns (ModularSymbol, eigenvalue dict)."""
    from .padic import LocalElement
    from .symbols import ModularSymbol

    validate(obj, "symbol", source)
    phi = ModularSymbol.from_json(obj)
    eig = {}
    for key, coeffs in obj.get("eigenvalues", {}).items():
        if len(coeffs) != phi.fld.d:
            raise SchemaError("eigenvalue has the wrong number of coordinates", source=source,
                              field=f"eigenvalues/{key}", expected=phi.fld.d)
        eig[key] = LocalElement(tuple(int(c) % phi.fld.modulus for c in coeffs), phi.fld)
    return phi, eig


def ingest_file(path) -> tuple[str, object, dict]:
    """Read and validate a file; returns (kind, object, parsed JSON)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read: {exc}", source=str(path)) from exc
    obj = parse_json(text, str(path))
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError("record must be an object with a 'kind' field", source=str(path), field="kind")
    if obj["kind"] == "bianchi_coefficients":
        return "coefficients", ingest_coefficients(obj, str(path)), obj
    if obj["kind"] == "modular_symbol":
        return "symbol", ingest_symbol(obj, str(path)), obj
    raise SchemaError(f"unknown kind {obj['kind']!r}", source=str(path), field="kind")
