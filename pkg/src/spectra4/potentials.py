"""Real 1-periodic coefficients stored as finite Fourier series.

A potential is ``f(t) = sum_m c_m exp(i 2 pi m t)`` with ``c_{-m} = conj(c_m)``.
Coefficients live in a dense complex array indexed ``m + degree``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "FourierPotential",
    "OperatorSpec",
    "from_harmonics",
    "evaluate",
    "derivative",
    "mean",
    "l2_norm_sq",
    "v_potential",
    "perfect_square_q",
]

_REALITY_TOL = 1e-12
_MEAN_TOL = 1e-12


class PotentialError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FourierPotential:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size % 2 == 0:
            raise PotentialError("coefficient array must have odd length 2*degree+1")
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        mirror = np.conj(c[::-1])
        if np.max(np.abs(c - mirror)) > _REALITY_TOL * scale:
            raise PotentialError("coefficients violate c[-m] == conj(c[m])")
        c = 0.5 * (c + mirror)
        c[c.size // 2] = c[c.size // 2].real
        c = _trim(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex]) -> "FourierPotential":
        deg = max((abs(m) for m in coeffs), default=0)
        arr = np.zeros(2 * deg + 1, dtype=complex)
        for m, c in coeffs.items():
            arr[m + deg] = c
        return cls(arr)

    @classmethod
    def zero(cls) -> "FourierPotential":
        return cls(np.zeros(1))

    @classmethod
    def constant(cls, c: float) -> "FourierPotential":
        return cls(np.array([c], dtype=complex))

    @property
    def degree(self) -> int:
        return self.coeffs.size // 2

    def coeff(self, m: int) -> complex:
        d = self.degree
        return complex(self.coeffs[m + d]) if abs(m) <= d else 0j

    def coeff_array(self, ms) -> np.ndarray:
        """Vectorised lookup of c_m; zero outside the support."""
        ms = np.asarray(ms)
        d = self.degree
        out = np.zeros(ms.shape, dtype=complex)
        inside = np.abs(ms) <= d
        out[inside] = self.coeffs[ms[inside] + d]
        return out

    def __call__(self, t):
        return evaluate(self, t)

    def __add__(self, other: "FourierPotential") -> "FourierPotential":
        d = max(self.degree, other.degree)
        return FourierPotential(_pad(self.coeffs, d) + _pad(other.coeffs, d))

    def __sub__(self, other: "FourierPotential") -> "FourierPotential":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "FourierPotential":
        return FourierPotential(self.coeffs * factor)

    def shifted(self, c: float) -> "FourierPotential":
        return self + FourierPotential.constant(c)

    def convolve(self, other: "FourierPotential") -> "FourierPotential":
        # pointwise product of the functions; degree adds exactly
        return FourierPotential(np.convolve(self.coeffs, other.coeffs))

    def to_harmonics(self) -> list[tuple[int, float, float]]:
        """Inverse of :func:`from_harmonics` (nonzero terms only)."""
        out = []
        c0 = self.coeff(0).real
        if c0 != 0.0:
            out.append((0, c0, 0.0))
        for m in range(1, self.degree + 1):
            c = self.coeff(m)
            if c != 0:
                out.append((m, 2.0 * c.real, -2.0 * c.imag))
        return out

    def __repr__(self) -> str:
        return f"FourierPotential(degree={self.degree}, harmonics={self.to_harmonics()})"


def _pad(c: np.ndarray, degree: int) -> np.ndarray:
    d = c.size // 2
    if d == degree:
        return c
    out = np.zeros(2 * degree + 1, dtype=complex)
    out[degree - d : degree + d + 1] = c
    return out


def _trim(c: np.ndarray) -> np.ndarray:
    d = c.size // 2
    while d > 0 and c[0] == 0 and c[-1] == 0:
        c = c[1:-1]
        d -= 1
    return c


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Coefficients of ``H = d^4 + 2 d p d + q`` on the circle of length 2."""

    p: FourierPotential
    q: FourierPotential

    def __post_init__(self):
        q0 = self.q.coeff(0)
        scale = max(1.0, float(np.sqrt(l2_norm_sq(self.q))))
        if abs(q0) > _MEAN_TOL * scale:
            raise PotentialError(
                f"q must have zero mean over one period (got mean {q0.real!r})"
            )
        if q0 != 0:
            c = np.array(self.q.coeffs)
            c[self.q.degree] = 0.0
            object.__setattr__(self, "q", FourierPotential(c))

    @property
    def degree(self) -> int:
        return max(self.p.degree, self.q.degree)

    @classmethod
    def from_terms(cls, p_terms=(), q_terms=()) -> "OperatorSpec":
        return cls(from_harmonics(p_terms), from_harmonics(q_terms))


def from_harmonics(terms: Iterable[tuple[int, float, float]]) -> FourierPotential:
    """Build ``sum a_m cos(2 pi m t) + b_m sin(2 pi m t)`` from ``(m, a_m, b_m)`` triples.

    The sine amplitude of ``m = 0`` multiplies ``sin 0`` and is ignored.

    >>> from_harmonics([(1, 2.0, 0.0)]).coeff(1)
    (1+0j)
    """
    seen: dict[int, tuple[float, float]] = {}
    for m, a, b in terms:
        m = int(m)
        if m < 0:
            raise PotentialError(f"harmonic index must be >= 0, got {m}")
        if m in seen:
            raise PotentialError(f"duplicate harmonic m = {m}")
        seen[m] = (float(a), float(b))
    coeffs: dict[int, complex] = {}
    for m, (a, b) in seen.items():
        if m == 0:
            coeffs[0] = complex(a)
        else:
            coeffs[m] = complex(a, -b) / 2
            coeffs[-m] = complex(a, b) / 2
    return FourierPotential.from_dict(coeffs)


def evaluate(P: FourierPotential, t):
    """Value of the potential at ``t`` (scalar or array); imaginary round-off is dropped."""
    t_arr = np.asarray(t, dtype=float)
    d = P.degree
    ms = np.arange(-d, d + 1)
    vals = np.exp(2j * np.pi * np.multiply.outer(t_arr, ms)) @ P.coeffs
    out = vals.real
    return float(out) if out.ndim == 0 else out


def derivative(P: FourierPotential, order: int = 1) -> FourierPotential:
    if order < 0:
        raise PotentialError("derivative order must be >= 0")
    d = P.degree
    ms = np.arange(-d, d + 1)
    return FourierPotential(P.coeffs * (2j * np.pi * ms) ** order)


def mean(P: FourierPotential) -> float:
    return P.coeff(0).real


def l2_norm_sq(P: FourierPotential) -> float:
    """Integral of |P|^2 over one period, by Parseval."""
    return float(np.sum(np.abs(P.coeffs) ** 2))


def v_potential(spec: OperatorSpec) -> FourierPotential:
    """``V = q - p''/2``; coefficientwise ``V_m = q_m + 2 pi^2 m^2 p_m``."""
    return spec.q - derivative(spec.p, 2).scaled(0.5)


def perfect_square_q(p: FourierPotential) -> FourierPotential:
    """The q for which ``H = (-d^2 - p)^2 - ||p||^2``, i.e. ``p'' + p^2 - ||p||^2``."""
    sq = p.convolve(p)
    q = derivative(p, 2) + sq
    c = np.array(q.coeffs)
    # the zero mode of p*p is exactly ||p||^2
    c[q.degree] = 0.0
    return FourierPotential(c)
