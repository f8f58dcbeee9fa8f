"""Eigenvalue predictions, residual and gap tables, decay fits, perfect-square oracle.

The sharp main terms are

    lam_n^{+-} ~ (pi n)^4 - 2 p0 (pi n)^2 - (||p||^2 - p0^2)/2 +- |V_n|,

with V = q - p''/2.  The coarser order-zero form only keeps the
``(pi n)^4 + 2 (pi n)^2 (-p0 +- |p_n|)`` part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import galerkin
from .ladder import EigenLadder
from .potentials import (
    FourierPotential,
    OperatorSpec,
    derivative,
    l2_norm_sq,
    mean,
    perfect_square_q,
    v_potential,
)

__all__ = [
    "AsymptoticPrediction",
    "ResidualRow",
    "ResidualTable",
    "GapRow",
    "DecayFit",
    "SquareRow",
    "predict",
    "residual_table",
    "gap_table",
    "decay_fit",
    "perfect_square_table",
    "perfect_square_check",
    "CORRECT",
    "EROVENKO",
    "TIE",
]

CORRECT = "correct-formula"
EROVENKO = "erovenko-formula"
TIE = "tie"


@dataclass(frozen=True)
class AsymptoticPrediction:
    n: int
    order0_pm: tuple[float, float]
    main_pm: tuple[float, float]
    v_abs: float
    p_abs: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.main_pm[0] + self.main_pm[1])


def predict(spec: OperatorSpec, n: int) -> AsymptoticPrediction:
    """Both prediction orders for index ``n >= 1``."""
    if n < 1:
        raise ValueError(f"predictions are defined for n >= 1, got {n}")
    p0 = mean(spec.p)
    s2 = (np.pi * n) ** 2
    v = abs(v_potential(spec).coeff(n))
    pn = abs(spec.p.coeff(n))
    mid = s2 * s2 - 2 * p0 * s2 - 0.5 * (l2_norm_sq(spec.p) - p0**2)
    base0 = s2 * s2 - 2 * p0 * s2
    return AsymptoticPrediction(
        n=n,
        order0_pm=(base0 - 2 * s2 * pn, base0 + 2 * s2 * pn),
        main_pm=(mid - v, mid + v),
        v_abs=v,
        p_abs=pn,
    )


@dataclass(frozen=True)
class ResidualRow:
    n: int
    sign: str
    sector: str
    value: float
    prediction: float
    residual: float
    below_floor: bool

    @property
    def scaled_half(self) -> float:
        return self.residual * math.sqrt(self.n)

    @property
    def scaled_three_halves(self) -> float:
        return self.residual * self.n**1.5


@dataclass
class ResidualTable:
    rows: list[ResidualRow]
    errors: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def usable(self) -> list[ResidualRow]:
        return [r for r in self.rows if not r.below_floor]

    def max_scaled_half(self, lo: int, hi: int) -> float:
        vals = [abs(r.scaled_half) for r in self.usable() if lo <= r.n <= hi]
        return max(vals) if vals else float("nan")


def residual_table(
    ladder: EigenLadder, spec: OperatorSpec, n_range: Iterable[int], floor_rel: float = 1e-11
) -> ResidualTable:
    """Residuals of the computed ladder against the main terms.

    Rows with ``|residual| < floor_rel * |lam|`` are flagged as below the
    numerical floor.  Pairing lam^- with the lower main term is always the
    min-over-pairing choice for a sorted pair, so it stays correct when
    ``|V_n|`` is below the floor.
    """
    table = ResidualTable([])
    for n in n_range:
        e_lo, e_hi = ladder.get(n, "-"), ladder.get(n, "+")
        if n < 1 or e_lo is None or e_hi is None:
            table.errors.append(f"ladder has no pair at n = {n}")
            continue
        lo, hi = predict(spec, n).main_pm
        for e, pred in ((e_lo, lo), (e_hi, hi)):
            r = e.value - pred
            table.rows.append(
                ResidualRow(n, e.sign, e.sector, e.value, pred, r, abs(r) < floor_rel * max(1.0, abs(e.value)))
            )
    return table


@dataclass(frozen=True)
class GapRow:
    n: int
    gap: float
    correct: float
    erovenko: float
    verdict: str


def _closer(gap: float, a: float, b: float, zero_floor: float) -> str:
    """Which of the predictions a (2|V_n|) and b (Erovenko) the gap sides with."""
    if math.isclose(a, b, rel_tol=1e-12, abs_tol=zero_floor * 1e-3):
        return TIE
    if gap < zero_floor:
        return CORRECT if a < b else EROVENKO

    def dist(pred):
        return abs(math.log(gap / pred)) if pred > 0 else math.inf

    da, db = dist(a), dist(b)
    if da == db:
        return TIE
    return CORRECT if da < db else EROVENKO


def gap_table(
    ladder: EigenLadder, spec: OperatorSpec, n_range: Iterable[int], zero_floor: float = 1e-9
) -> tuple[list[GapRow], list[str]]:
    V = v_potential(spec)
    pdd = derivative(spec.p, 2)
    rows, errors = [], []
    for n in n_range:
        if n < 1 or ladder.get(n, "-") is None or ladder.get(n, "+") is None:
            errors.append(f"ladder has no pair at n = {n}")
            continue
        lo, hi = ladder.pair(n)
        gap = hi - lo
        correct = 2 * abs(V.coeff(n))
        ero = 2 * math.sqrt(abs(spec.q.coeff(n)) ** 2 + abs(pdd.coeff(n)) ** 2 / 4)
        rows.append(GapRow(n, gap, correct, ero, _closer(gap, correct, ero, zero_floor)))
    return rows, errors


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    n_used: int
    n_zero: int

    @property
    def indeterminate(self) -> bool:
        return self.n_used < 2


def decay_fit(values: Iterable[tuple[float, float]]) -> DecayFit:
    """Least-squares slope of log|r| against log n; zero residuals are dropped and counted."""
    pts = [(float(n), abs(float(r))) for n, r in values]
    used = [(n, r) for n, r in pts if r != 0.0 and n > 0]
    n_zero = len(pts) - len(used)
    if len({n for n, _ in used}) < 2:
        return DecayFit(float("nan"), float("nan"), len(used), n_zero)
    x = np.log([n for n, _ in used])
    y = np.log([r for _, r in used])
    slope, intercept = np.polyfit(x, y, 1)
    return DecayFit(float(slope), float(intercept), len(used), n_zero)


@dataclass(frozen=True)
class SquareRow:
    index: int
    value: float
    oracle: float
    deviation: float


def perfect_square_table(
    p: FourierPotential, n_max: int, N: int | None = None, tol: float = 1e-9, workers: int = 1
) -> tuple[list[SquareRow], list[str]]:
    """H-ladder with ``q = p'' + p^2 - ||p||^2`` against squared Hill eigenvalues.

    ``alpha -> alpha^2`` is not monotone for negative alpha, so both sides are
    compared as sorted multisets of the lowest ``2 n_max + 1`` values.
    """
    spec = OperatorSpec(p, perfect_square_q(p))
    count = 2 * n_max + 1
    H = galerkin.spectrum(spec, n_max, N=N, tol=tol, workers=workers)
    # every negative alpha can push one positive alpha into the lowest squares
    h = galerkin.hill_spectrum(p, n_max + 2, N=N, tol=tol, workers=workers)
    n_neg = int(np.sum(h.values < 0))
    if n_neg:
        h = galerkin.hill_spectrum(p, n_max + 2 + n_neg, N=N, tol=tol, workers=workers)
    oracle = np.sort(h.values**2 - l2_norm_sq(p))[:count]
    errors = list(H.errors) + list(h.errors)
    rows = []
    for i, (lam, ref) in enumerate(zip(H.values, oracle)):
        rows.append(SquareRow(i, float(lam), float(ref), abs(lam - ref) / max(1.0, abs(lam))))
    return rows, errors


def perfect_square_check(
    p: FourierPotential, n_max: int, N: int | None = None, tol: float = 1e-9, workers: int = 1
) -> float:
    """max relative deviation between the two ladders (see :func:`perfect_square_table`)."""
    rows, errors = perfect_square_table(p, n_max, N, tol, workers)
    if errors:
        raise RuntimeError("; ".join(errors))
    return max(r.deviation for r in rows)


def order0_residuals(ladder: EigenLadder, spec: OperatorSpec, ns: Sequence[int]) -> list[tuple[int, float, float]]:
    """(n, lam^- - order0^-, lam^+ - order0^+) for the coarse prediction."""
    out = []
    for n in ns:
        pr = predict(spec, n)
        lo, hi = ladder.pair(n)
        out.append((n, lo - pr.order0_pm[0], hi - pr.order0_pm[1]))
    return out
