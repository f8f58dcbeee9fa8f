from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LadderEntry", "EigenLadder", "PERIODIC", "ANTIPERIODIC", "label_sorted"]

PERIODIC = "periodic"
ANTIPERIODIC = "antiperiodic"


def sector_of(n: int) -> str:
    return PERIODIC if n % 2 == 0 else ANTIPERIODIC


@dataclass(frozen=True)
class LadderEntry:
    n: int
    sign: str  # "+" or "-"
    sector: str
    value: float


@dataclass
class EigenLadder:
    """Eigenvalues labelled lam_0^+ <= lam_1^- <= lam_1^+ <= ...

    ``errors`` carries anything a caller must not silently accept (failed
    convergence, bracketing failures); ``notes`` carries diagnostics.
    """

    entries: list[LadderEntry]
    engine: str = ""
    errors: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    convergence: dict[tuple[int, str], float] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    @property
    def n_max(self) -> int:
        return max((e.n for e in self.entries), default=-1)

    def get(self, n: int, sign: str) -> LadderEntry | None:
        for e in self.entries:
            if e.n == n and e.sign == sign:
                return e
        return None

    def value(self, n: int, sign: str) -> float:
        e = self.get(n, sign)
        if e is None:
            raise KeyError(f"ladder has no entry lambda_{n}^{sign}")
        return e.value

    def pair(self, n: int) -> tuple[float, float]:
        """(lam_n^-, lam_n^+); for n = 0 both are lam_0^+."""
        if n == 0:
            v = self.value(0, "+")
            return v, v
        return self.value(n, "-"), self.value(n, "+")

    def is_ordered(self) -> bool:
        v = self.values
        return bool(np.all(np.diff(v) >= 0))

    def parity_mismatches(self) -> list[LadderEntry]:
        """Entries whose sector disagrees with the parity of n."""
        return [e for e in self.entries if e.sector != sector_of(e.n)]


def slot_label(i: int) -> tuple[int, str]:
    """Position in the sorted ladder -> (n, sign)."""
    if i == 0:
        return 0, "+"
    return (i + 1) // 2, "-" if i % 2 == 1 else "+"


def label_sorted(values, sectors, count: int) -> list[LadderEntry]:
    """Sort eigenvalues ascending (stable) and label the first ``count`` slots."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")[:count]
    out = []
    for i, j in enumerate(order):
        n, sign = slot_label(i)
        out.append(LadderEntry(n, sign, sectors[j], float(values[j])))
    return out
