"""Run configuration: a flat key = value file plus command-line overrides."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ConfigError
from .quadratic import QuadInt, QuadraticField

KEYS = ("D", "p", "level", "k", "N", "M", "eigen_source", "out", "cache_dir", "conductors",
        "cutoff", "s")


@dataclass(frozen=True)
class RunConfig:
    D: int | None = None
    p: int | None = None
    level: tuple | None = None        # coordinates of the level generator in {1, omega}
    k: int = 0
    N: int | None = None
    M: int | None = None
    eigen_source: str = "solver"      # "solver" or the path of an ingested classical symbol
    out: str | None = None
    cache_dir: str | None = None
    conductors: tuple = ()            # for gauss: generators as coordinate pairs
    cutoff: int = 300
    s: int = 3

    @property
    def field(self) -> QuadraticField:
        return QuadraticField(self.D)

    @property
    def level_gen(self) -> QuadInt:
        return self.field(*self.level)

    def validate(self, need: tuple = ("D",)) -> "RunConfig":
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ConfigError("missing configuration keys", missing=missing)
        if self.D is not None:
            try:
                self.field
            except ValueError as exc:
                raise ConfigError(f"bad discriminant: {exc}", D=self.D) from exc
        if self.k < 0:
            raise ConfigError("weight k must be non-negative", k=self.k)
        if self.p is not None and self.level is not None:
            if not self.field(self.p).divides(self.level_gen):
                raise ConfigError("(p) must divide the level", p=self.p, level=list(self.level))
        if self.N is not None and self.N < self.k + 2:
            raise ConfigError("N must be at least k + 2", N=self.N, k=self.k)
        if self.N is not None and self.M is not None and self.M < self.N:
            raise ConfigError("M must be at least N", M=self.M, N=self.N)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["level"] = list(self.level) if self.level else None
        d["conductors"] = [list(c) for c in self.conductors]
        return d


def _parse_pair(text: str) -> tuple[int, int]:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) == 1:
        return int(parts[0]), 0
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ValueError(f"expected 'x' or 'x,y', got {text!r}")


def _convert(key: str, value: str):
    if key in ("D", "p", "k", "N", "M", "cutoff", "s"):
        return int(value)
    if key == "level":
        return _parse_pair(value)
    if key == "conductors":
        return tuple(_parse_pair(t) for t in value.split(";") if t.strip())
    return value


def parse_pairs(lines, source: str = "<args>") -> dict:
    """key = value lines (# comments, blank lines ignored) to a dict of typed values."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", source=source, line=lineno, text=raw.rstrip())
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", source=source, line=lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", source=source, line=lineno)
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", source=source, line=lineno) from exc
    return out


def load_config(path: str | None = None, overrides=()) -> RunConfig:
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_pairs(fh, source=path)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", path=path) from exc
    values.update(parse_pairs(overrides))
    return RunConfig(**values)
