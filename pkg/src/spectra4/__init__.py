"""Periodic spectra of the fourth-order operator H = d^4 + 2 d p d + q on the circle."""

from .galerkin import hill_spectrum, spectrum
from .ladder import ANTIPERIODIC, PERIODIC, EigenLadder, LadderEntry
from .monodromy import char_det, integrate_fundamental, locate_eigenvalues
from .potentials import (
    FourierPotential,
    OperatorSpec,
    PotentialError,
    derivative,
    evaluate,
    from_harmonics,
    l2_norm_sq,
    mean,
    perfect_square_q,
    v_potential,
)

__version__ = "0.1.0"
