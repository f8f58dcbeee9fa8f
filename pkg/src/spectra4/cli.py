"""``spectra4 <command> --config <path>``: run one computation and emit a report.

Exit status: 0 when every check of the command passes, 1 when a check fails
or an engine reports an error, 2 for configuration and usage errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import asymptotics, galerkin, monodromy, structmatrices
from .config import ENGINES, FORMATS, ConfigError, RunConfig, load_config
from .ladder import EigenLadder
from .report import Report, to_csv, to_json

log = logging.getLogger("spectra4")

QD_Z = (20.0, 40.0, 80.0)


def _workers() -> int:
    raw = os.environ.get("SPECTRA4_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SPECTRA4_THREADS must be an integer, got {raw!r}") from None


def _galerkin(cfg: RunConfig, n_max: int | None = None) -> EigenLadder:
    return galerkin.spectrum(
        cfg.spec(),
        cfg.n_max if n_max is None else n_max,
        N=cfg.modes,
        tol=cfg.tolerances.galerkin_tol,
        margin=cfg.margin,
        workers=_workers(),
    )


def _monodromy(cfg: RunConfig) -> EigenLadder:
    t = cfg.tolerances
    return monodromy.locate_eigenvalues(
        cfg.spec(), cfg.n_max, root_tol=t.root_tol, workers=_workers(), z_max=t.z_max, rtol=t.rtol
    )


def _ladder_rows(ladder: EigenLadder) -> list[dict]:
    return [
        {
            "n": e.n,
            "sector": e.sector,
            "sign": e.sign,
            "value": e.value,
            "engine": ladder.engine,
            "estimate": ladder.convergence.get((e.n, e.sign), float("nan")),
        }
        for e in ladder
    ]


def cmd_spectrum(cfg: RunConfig) -> Report:
    rep = Report("spectrum", ["n", "sector", "sign", "value", "engine", "estimate"])
    engines = ("galerkin", "monodromy") if cfg.engine == "both" else (cfg.engine,)
    for name in engines:
        try:
            ladder = _galerkin(cfg) if name == "galerkin" else _monodromy(cfg)
        except monodromy.MonodromyRangeError as exc:
            rep.errors.append(f"{name}: {exc}")
            continue
        rep.rows += _ladder_rows(ladder)
        rep.errors += [f"{name}: {e}" for e in ladder.errors]
        rep.summary[f"{name}_notes"] = ladder.notes
    rep.summary["count"] = len(rep.rows)
    return rep


def cmd_monodromy(cfg: RunConfig) -> Report:
    rep = Report("monodromy", ["n", "sector", "sign", "value", "char_det_rel", "det_defect"])
    ladder = _monodromy(cfg)
    t = cfg.tolerances
    defects = monodromy.liouville_defect(cfg.spec(), ladder.values, z_max=t.z_max, rtol=t.rtol) if len(ladder) else []
    worst_q = 0.0
    for e, d in zip(ladder, defects):
        qual = ladder.convergence.get((e.n, e.sign), float("nan"))
        worst_q = max(worst_q, qual)
        rep.rows.append(
            {"n": e.n, "sector": e.sector, "sign": e.sign, "value": e.value, "char_det_rel": qual, "det_defect": float(d)}
        )
    worst_d = float(np.max(defects)) if len(defects) else 0.0
    rep.errors += ladder.errors
    rep.summary.update(
        max_char_det_rel=worst_q,
        max_det_defect=worst_d,
        notes=ladder.notes,
        passed=worst_q <= t.root_quality and worst_d <= 1e-9,
    )
    return rep


def cmd_crosscheck(cfg: RunConfig) -> Report:
    rep = Report(
        "crosscheck",
        ["n", "sign", "sector_galerkin", "sector_monodromy", "galerkin", "monodromy", "rel_dev"],
    )
    g = _galerkin(cfg)
    m = _monodromy(cfg)
    rep.errors += [f"galerkin: {e}" for e in g.errors] + [f"monodromy: {e}" for e in m.errors]
    worst, mismatches = 0.0, []
    for e in g:
        other = m.get(e.n, e.sign)
        if other is None:
            continue
        dev = abs(other.value - e.value) / max(1.0, abs(e.value))
        worst = max(worst, dev)
        if other.sector != e.sector:
            mismatches.append(f"lambda_{e.n}^{e.sign}")
        rep.rows.append(
            {
                "n": e.n,
                "sign": e.sign,
                "sector_galerkin": e.sector,
                "sector_monodromy": other.sector,
                "galerkin": e.value,
                "monodromy": other.value,
                "rel_dev": dev,
            }
        )
    rep.summary.update(
        max_rel_dev=worst,
        tolerance=cfg.tolerances.crosscheck_tol,
        sector_mismatches=mismatches,
        passed=worst <= cfg.tolerances.crosscheck_tol,
    )
    return rep


def cmd_predict(cfg: RunConfig) -> Report:
    rep = Report("predict", ["n", "order0_minus", "order0_plus", "main_minus", "main_plus", "v_abs", "p_abs"])
    spec = cfg.spec()
    for n in range(cfg.n_min, cfg.n_max + 1):
        pr = asymptotics.predict(spec, n)
        rep.rows.append(
            {
                "n": n,
                "order0_minus": pr.order0_pm[0],
                "order0_plus": pr.order0_pm[1],
                "main_minus": pr.main_pm[0],
                "main_plus": pr.main_pm[1],
                "v_abs": pr.v_abs,
                "p_abs": pr.p_abs,
            }
        )
    return rep


def cmd_residuals(cfg: RunConfig) -> Report:
    cols = ["n", "sector", "sign", "value", "prediction", "residual", "residual_n_half", "residual_n_three_halves", "below_floor"]
    rep = Report("residuals", cols)
    spec = cfg.spec()
    ladder = _galerkin(cfg)
    rep.errors += ladder.errors
    tab = asymptotics.residual_table(ladder, spec, range(cfg.n_min, cfg.n_max + 1), cfg.tolerances.floor_rel)
    rep.errors += tab.errors
    for r in tab.rows:
        rep.rows.append(
            {
                "n": r.n,
                "sector": r.sector,
                "sign": r.sign,
                "value": r.value,
                "prediction": r.prediction,
                "residual": r.residual,
                "residual_n_half": r.scaled_half,
                "residual_n_three_halves": r.scaled_three_halves,
                "below_floor": r.below_floor,
            }
        )
    fit = asymptotics.decay_fit((r.n, r.residual) for r in tab.usable())
    # split the range at its geometric midpoint for the trend comparison
    n_mid = int(round(math.sqrt(cfg.n_min * cfg.n_max)))
    early = tab.max_scaled_half(cfg.n_min, n_mid)
    late = tab.max_scaled_half(n_mid, cfg.n_max)
    trend_ok = None if math.isnan(early) or math.isnan(late) else bool(late < early)
    slope_ok = None if fit.indeterminate else bool(fit.slope <= cfg.tolerances.decay_slope_max)
    rep.summary.update(
        slope=fit.slope,
        n_used=fit.n_used,
        n_zero=fit.n_zero,
        indeterminate=fit.indeterminate,
        n_split=n_mid,
        max_scaled_half_early=early,
        max_scaled_half_late=late,
        slope_ok=slope_ok,
        trend_ok=trend_ok,
        notes=tab.notes,
        passed=slope_ok is not False and trend_ok is not False,
    )
    return rep


def cmd_gaps(cfg: RunConfig) -> Report:
    rep = Report("gaps", ["n", "gap", "correct", "erovenko", "verdict"])
    ladder = _galerkin(cfg)
    rep.errors += ladder.errors
    rows, errors = asymptotics.gap_table(ladder, cfg.spec(), range(cfg.n_min, cfg.n_max + 1), cfg.tolerances.gap_zero)
    rep.errors += errors
    against = []
    for r in rows:
        rep.rows.append({"n": r.n, "gap": r.gap, "correct": r.correct, "erovenko": r.erovenko, "verdict": r.verdict})
        if r.verdict == asymptotics.EROVENKO:
            against.append(r.n)
    rep.summary.update(erovenko_rows=against, passed=not against)
    return rep


def cmd_identities(cfg: RunConfig) -> Report:
    rep = Report("identities", ["check", "z", "residual", "scaled", "tol", "passed"])
    tol = cfg.tolerances.identity_tol
    ok = True
    for c in structmatrices.verify_identities(tol):
        rep.rows.append({"check": c.name, "z": None, "residual": c.residual, "scaled": c.residual, "tol": c.tol, "passed": c.passed})
        ok &= c.passed
    spec = cfg.spec()
    scaled = []
    try:
        for z in QD_Z:
            r = structmatrices.quasi_diag_residual(spec, z)
            scaled.append(r * z**5)
            rep.rows.append({"check": "quasi-diagonal remainder", "z": z, "residual": r, "scaled": r * z**5, "tol": None, "passed": None})
    except structmatrices.DomainError as exc:
        rep.errors.append(str(exc))
    ratio = float("nan")
    if scaled and min(scaled) > 0:
        ratio = max(scaled) / min(scaled)
    # an identically zero remainder (p = q = 0) passes trivially
    qd_ok = (scaled and max(scaled) == 0) or ratio < cfg.tolerances.qd_ratio_max
    rep.summary.update(identities_passed=ok, qd_scaled_ratio=ratio, qd_ratio_max=cfg.tolerances.qd_ratio_max, passed=bool(ok and qd_ok))
    return rep


def cmd_square_check(cfg: RunConfig) -> Report:
    rep = Report("square-check", ["index", "value", "oracle", "deviation"])
    spec = cfg.spec()
    rows, errors = asymptotics.perfect_square_table(
        spec.p, cfg.n_max, N=cfg.modes, tol=cfg.tolerances.galerkin_tol, workers=_workers()
    )
    rep.errors += errors
    for r in rows:
        rep.rows.append({"index": r.index, "value": r.value, "oracle": r.oracle, "deviation": r.deviation})
    worst = max((r.deviation for r in rows), default=0.0)
    rep.summary.update(
        max_deviation=worst,
        tolerance=cfg.tolerances.square_tol,
        q_ignored=bool(cfg.q_terms),
        passed=worst <= cfg.tolerances.square_tol,
    )
    return rep


COMMANDS: dict[str, Callable[[RunConfig], Report]] = {
    "spectrum": cmd_spectrum,
    "monodromy": cmd_monodromy,
    "crosscheck": cmd_crosscheck,
    "predict": cmd_predict,
    "residuals": cmd_residuals,
    "gaps": cmd_gaps,
    "identities": cmd_identities,
    "square-check": cmd_square_check,
}


def run(command: str, cfg: RunConfig) -> Report:
    try:
        rep = COMMANDS[command](cfg)
    except (monodromy.MonodromyRangeError, structmatrices.DomainError, RuntimeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        rep = Report(command, [])
        rep.errors.append(str(exc))
    rep.config = cfg.to_dict()
    rep.summary.setdefault("passed", True)
    rep.summary["passed"] = rep.passed
    return rep


def render(rep: Report, fmt: str) -> str:
    return to_csv(rep) if fmt == "csv" else to_json(rep)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectra4", description="Periodic spectra of d^4 + 2 d p d + q on the circle.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI config with [p], [q], [run] sections")
    ap.add_argument("--out", help="output file (default: [run] output, else stdout)")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--nmax", type=int)
    ap.add_argument("--modes", type=int, help="Galerkin truncation N (default: automatic)")
    ap.add_argument("--engine", choices=ENGINES)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            n_max=args.nmax, modes=args.modes, engine=args.engine, format=args.format, output=args.out
        )
        _workers()
        rep = run(args.command, cfg)
    except ConfigError as exc:
        print(f"spectra4: error: {exc}", file=sys.stderr)
        return 2
    text = render(rep, cfg.format)
    if cfg.output:
        Path(cfg.output).write_text(text, newline="")
        log.info("wrote %s", cfg.output)
    else:
        sys.stdout.write(text)
    for e in rep.errors:
        print(f"spectra4: {e}", file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
