"""Run configuration: an INI-style file with sections [p], [q] and [run].

Harmonic terms are written ``m = cos_amp, sin_amp``::

    [p]
    1 = 2.0, 0.0

    [q]
    2 = 1.0, 0.0

    [run]
    n_max = 20
    engine = galerkin
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .potentials import OperatorSpec, PotentialError

__all__ = ["ConfigError", "Tolerances", "RunConfig", "load_config", "parse_config", "ENGINES", "FORMATS"]

ENGINES = ("galerkin", "monodromy", "both")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    galerkin_tol: float = 1e-9
    root_tol: float = 1e-8
    z_max: float = 26.0
    rtol: float = 1e-12
    floor_rel: float = 1e-11
    crosscheck_tol: float = 1e-7
    square_tol: float = 1e-8
    identity_tol: float = 1e-13
    qd_ratio_max: float = 4.0
    root_quality: float = 1e-6
    gap_zero: float = 1e-9
    decay_slope_max: float = -1.2


@dataclass(frozen=True)
class RunConfig:
    p_terms: tuple[tuple[int, float, float], ...] = ()
    q_terms: tuple[tuple[int, float, float], ...] = ()
    n_min: int = 1
    n_max: int = 10
    modes: int | None = None
    margin: int = 32
    engine: str = "galerkin"
    format: str = "csv"
    output: str | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def spec(self) -> OperatorSpec:
        return OperatorSpec.from_terms(self.p_terms, self.q_terms)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        _validate_run(cfg)
        return cfg

    def to_dict(self) -> dict:
        """Resolved configuration without the output destination."""
        d = asdict(self)
        d.pop("output")
        d["p_terms"] = [list(t) for t in self.p_terms]
        d["q_terms"] = [list(t) for t in self.q_terms]
        return d


_RUN_INT = {"n_min", "n_max", "modes", "margin"}
_RUN_STR = {"engine", "format", "output"}
_TOL_KEYS = {f.name for f in fields(Tolerances)}


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number; configparser does not keep these."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
        elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            where.setdefault((section, key), i)
    return where


def _terms(cp, section, where, source) -> tuple[tuple[int, float, float], ...]:
    if not cp.has_section(section):
        return ()
    out = []
    for key, raw in cp.items(section):
        line = where.get((section, key), "?")
        try:
            m = int(key)
        except ValueError:
            raise ConfigError(f"{source}:{line}: harmonic index {key!r} in [{section}] is not an integer") from None
        if m < 0:
            raise ConfigError(f"{source}:{line}: harmonic index must be >= 0, got {m}")
        parts = [x.strip() for x in raw.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"{source}:{line}: expected 'm = cos_amp, sin_amp', got {raw!r}")
        try:
            a, b = (float(x) for x in parts)
        except ValueError:
            raise ConfigError(f"{source}:{line}: amplitudes must be numbers, got {raw!r}") from None
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ConfigError(f"{source}:{line}: amplitudes must be finite")
        if section == "q" and m == 0 and a != 0.0:
            raise ConfigError(
                f"{source}:{line}: q must have zero mean over one period; "
                f"the m = 0 cosine amplitude must be 0, got {a!r}"
            )
        out.append((m, a, b))
    return tuple(sorted(out))


def _validate_run(cfg: RunConfig):
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {cfg.engine!r}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {cfg.format!r}")
    if cfg.n_max < 0:
        raise ConfigError("n_max must be >= 0")
    if not 1 <= cfg.n_min or cfg.n_min > max(cfg.n_max, 1):
        raise ConfigError(f"n_min must satisfy 1 <= n_min <= n_max, got {cfg.n_min}")
    if cfg.modes is not None and cfg.modes < 1:
        raise ConfigError("modes must be a positive integer")
    if cfg.margin < 0:
        raise ConfigError("margin must be >= 0")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: duplicate harmonic or key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: content before the first section header") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"{source}:{lineno}: cannot parse line") from None

    unknown = set(cp.sections()) - {"p", "q", "run"}
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}; expected [p], [q], [run]")
    where = _line_index(text)
    p_terms = _terms(cp, "p", where, source)
    q_terms = _terms(cp, "q", where, source)

    run, tols = {}, {}
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            line = where.get(("run", key), "?")
            try:
                if key in _RUN_INT:
                    run[key] = None if key == "modes" and raw.lower() in ("", "auto") else int(raw)
                elif key in _RUN_STR:
                    run[key] = raw.strip().lower() if key != "output" else raw.strip()
                elif key in _TOL_KEYS:
                    tols[key] = float(raw)
                else:
                    raise ConfigError(f"{source}:{line}: unknown key {key!r} in [run]")
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"{source}:{line}: bad value {raw!r} for {key}") from None

    cfg = RunConfig(p_terms=p_terms, q_terms=q_terms, tolerances=Tolerances(**tols), **run)
    _validate_run(cfg)
    try:
        cfg.spec()
    except PotentialError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
