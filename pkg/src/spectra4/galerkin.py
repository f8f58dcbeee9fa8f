"""Fourier-Galerkin spectra of H and of the Hill operator h = -d^2 - p.

Functions on [0, 2] are expanded in e_k = exp(i pi k t)/sqrt(2).  A period-1
coefficient couples k only to k + 2m, so even k (periodic) and odd k
(antiperiodic) are exact invariant subspaces and each is solved separately.

Within a sector the basis is ordered by |k| so the (pi k)^4 diagonal grows
down the matrix.  The Householder reduction in LAPACK then resolves the small
eigenvalues to near relative precision; the natural ordering -2N..2N loses
roughly eps * (2 pi N)^4 absolutely.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ladder import ANTIPERIODIC, PERIODIC, EigenLadder, label_sorted
from .potentials import FourierPotential, OperatorSpec

__all__ = [
    "SectorMatrix",
    "wavenumbers",
    "h_matrix",
    "hill_matrix",
    "spectrum",
    "hill_spectrum",
    "default_modes",
]

SECTORS = (PERIODIC, ANTIPERIODIC)


@dataclass(frozen=True, eq=False)
class SectorMatrix:
    sector: str
    N: int
    k: np.ndarray
    entries: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def wavenumbers(sector: str, N: int) -> np.ndarray:
    """Period-2 wavenumbers of a sector with |k| <= 2N, ordered by |k|."""
    if sector == PERIODIC:
        k = np.arange(-2 * N, 2 * N + 1, 2)
    elif sector == ANTIPERIODIC:
        k = np.arange(-2 * N + 1, 2 * N, 2)
    else:
        raise ValueError(f"unknown sector {sector!r}")
    return k[np.argsort(np.abs(k), kind="stable")]


def _couplings(k: np.ndarray):
    kj, kk = np.meshgrid(k, k, indexing="ij")
    return kj, kk, (kj - kk) // 2


def h_matrix(spec: OperatorSpec, sector: str, N: int) -> SectorMatrix:
    """H_jk = (pi k)^4 delta_jk - 2 (pi j)(pi k) p_{(j-k)/2} + q_{(j-k)/2}."""
    if N < spec.degree:
        raise ValueError(f"N = {N} is below the coefficient degree {spec.degree}")
    k = wavenumbers(sector, N)
    kj, kk, m = _couplings(k)
    H = -2 * np.pi**2 * kj * kk * spec.p.coeff_array(m) + spec.q.coeff_array(m)
    H[np.diag_indices_from(H)] += (np.pi * k) ** 4
    return SectorMatrix(sector, N, k, H)


def hill_matrix(p: FourierPotential, sector: str, N: int) -> SectorMatrix:
    """h_jk = (pi k)^2 delta_jk - p_{(j-k)/2}."""
    if N < p.degree:
        raise ValueError(f"N = {N} is below the coefficient degree {p.degree}")
    k = wavenumbers(sector, N)
    _, _, m = _couplings(k)
    h = -p.coeff_array(m)
    h[np.diag_indices_from(h)] += (np.pi * k) ** 2
    return SectorMatrix(sector, N, k, h)


def default_modes(n_max: int, degree: int, margin: int = 32) -> int:
    return 2 * n_max + degree + margin


def _solve(builder: Callable[[str, int], SectorMatrix], N: int, count: int, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 2)) as pool:
            mats = list(pool.map(lambda s: builder(s, N), SECTORS))
            eigs = list(pool.map(SectorMatrix.eigenvalues, mats))
    else:
        eigs = [builder(s, N).eigenvalues() for s in SECTORS]
    values = np.concatenate(eigs)
    sectors = [PERIODIC] * eigs[0].size + [ANTIPERIODIC] * eigs[1].size
    return label_sorted(values, sectors, count)


def _ladder(builder, degree, n_max, N, tol, margin, N_cap, engine, workers) -> EigenLadder:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    count = 2 * n_max + 1
    auto = N is None
    if auto:
        N = default_modes(n_max, degree, margin)
    elif N < max(degree, n_max):
        raise ValueError(f"N = {N} too small for n_max = {n_max} and degree {degree}")
    half = None
    while True:
        entries = _solve(builder, N, count, workers)
        N_half = N // 2
        if half is None and 4 * N_half + 1 >= count and N_half >= degree:
            half = _solve(builder, N_half, count, workers)
        conv, ok = {}, half is not None
        if half is not None:
            for e, h in zip(entries, half):
                est = abs(e.value - h.value)
                conv[(e.n, e.sign)] = est
                ok &= est <= tol * max(1.0, abs(e.value))
        ladder = EigenLadder(entries, engine=engine, convergence=conv)
        ladder.notes.append(f"N = {N}")
        if ok:
            return ladder
        if not auto or 2 * N > N_cap:
            worst = max(conv.values()) if conv else float("inf")
            ladder.errors.append(
                f"truncation N = {N} not converged: max |lam(N) - lam(N/2)| = {worst:.3e} "
                f"exceeds {tol:g} relative"
            )
            return ladder
        half, N = entries, 2 * N


def spectrum(
    spec: OperatorSpec,
    n_max: int,
    N: int | None = None,
    tol: float = 1e-9,
    margin: int = 32,
    N_cap: int = 2048,
    workers: int = 1,
) -> EigenLadder:
    """Ladder lam_0^+ .. lam_{n_max}^+ of H from the two sector matrices.

    With ``N=None`` the truncation starts at ``2 n_max + degree + margin`` and
    doubles until every level agrees with the N/2 result to ``tol`` relative.
    An explicit ``N`` is used as given and a failed comparison lands in
    ``ladder.errors``.
    """
    return _ladder(
        lambda s, n: h_matrix(spec, s, n), spec.degree, n_max, N, tol, margin, N_cap, "galerkin", workers
    )


def hill_spectrum(
    p: FourierPotential,
    n_max: int,
    N: int | None = None,
    tol: float = 1e-9,
    margin: int = 32,
    N_cap: int = 2048,
    workers: int = 1,
) -> EigenLadder:
    return _ladder(lambda s, n: hill_matrix(p, s, n), p.degree, n_max, N, tol, margin, N_cap, "hill", workers)
