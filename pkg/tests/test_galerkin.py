import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import harmonic_eval
from spectra4 import galerkin
from spectra4.ladder import ANTIPERIODIC, PERIODIC, label_sorted, slot_label
from spectra4.potentials import FourierPotential, OperatorSpec, from_harmonics

P_TERMS = [(0, 0.3, 0), (1, 1.2, -0.4), (2, 0.0, 0.7)]
Q_TERMS = [(1, -0.5, 0.25), (3, 0.8, 0.0)]


def entry_by_quadrature(j, k, p_terms, q_terms, n=8192):
    """<e_j, H e_k> on [0, 2] with e_k = exp(i pi k t)/sqrt(2), H e_k expanded by the product rule."""
    t = 2 * np.arange(n) / n
    p, dp, q = harmonic_eval(p_terms, t), harmonic_eval(p_terms, t, 1), harmonic_eval(q_terms, t)
    ek = np.exp(1j * np.pi * k * t) / np.sqrt(2)
    w = 1j * np.pi * k
    Hek = (w**4 + 2 * w * dp + 2 * w**2 * p + q) * ek
    ej = np.exp(1j * np.pi * j * t) / np.sqrt(2)
    return 2 * np.mean(np.conj(ej) * Hek)


@pytest.mark.parametrize("sector", [PERIODIC, ANTIPERIODIC])
def test_entries_match_quadrature(sector):
    spec = OperatorSpec.from_terms(P_TERMS, Q_TERMS)
    S = galerkin.h_matrix(spec, sector, 6)
    for a in range(0, S.k.size, 2):
        for b in range(1, S.k.size, 3):
            ref = entry_by_quadrature(S.k[a], S.k[b], P_TERMS, Q_TERMS)
            assert S.entries[a, b] == pytest.approx(ref, rel=1e-10, abs=1e-10 * max(1, abs(S.entries[b, b])))


def test_hill_entries_match_quadrature():
    p = from_harmonics(P_TERMS)
    S = galerkin.hill_matrix(p, ANTIPERIODIC, 5)
    t = 2 * np.arange(4096) / 4096
    pv = harmonic_eval(P_TERMS, t)
    for a, j in enumerate(S.k):
        for b, k in enumerate(S.k):
            ref = np.mean(np.exp(-1j * np.pi * j * t) * ((np.pi * k) ** 2 - pv) * np.exp(1j * np.pi * k * t))
            assert S.entries[a, b] == pytest.approx(ref, abs=1e-11 * max(1, (np.pi * k) ** 2))


def test_matrix_shapes_and_hermitian():
    spec = OperatorSpec.from_terms(P_TERMS, Q_TERMS)
    P = galerkin.h_matrix(spec, PERIODIC, 10)
    A = galerkin.h_matrix(spec, ANTIPERIODIC, 10)
    assert P.entries.shape == (21, 21) and A.entries.shape == (20, 20)
    for S in (P, A):
        assert np.max(np.abs(S.entries - S.entries.conj().T)) <= 1e-13 * np.max(np.abs(S.entries))
    assert np.all(P.k % 2 == 0) and np.all(A.k % 2 != 0)
    assert np.all(np.diff(np.abs(P.k)) >= 0)


def test_free_and_constant_diagonal():
    k = galerkin.wavenumbers(PERIODIC, 4)
    S = galerkin.h_matrix(OperatorSpec.from_terms(), PERIODIC, 4)
    assert np.allclose(S.entries, np.diag((np.pi * k) ** 4))
    c = 1.7
    S = galerkin.h_matrix(OperatorSpec.from_terms([(0, c, 0)]), PERIODIC, 4)
    assert np.allclose(S.entries, np.diag((np.pi * k) ** 4 - 2 * c * (np.pi * k) ** 2))


def test_degree_precondition():
    with pytest.raises(ValueError):
        galerkin.h_matrix(OperatorSpec.from_terms([(5, 1, 0)]), PERIODIC, 3)
    with pytest.raises(ValueError):
        galerkin.spectrum(OperatorSpec.from_terms([(5, 1, 0)]), 2, N=3)


def test_free_spectrum():
    lad = galerkin.spectrum(OperatorSpec.from_terms(), 5)
    assert not lad.errors
    for n in range(1, 6):
        assert lad.pair(n) == pytest.approx(((np.pi * n) ** 4,) * 2, rel=1e-12)
    assert lad.value(0, "+") == pytest.approx(0, abs=1e-9)
    assert not lad.parity_mismatches()


def test_constant_p_spectrum_and_hill():
    c = 2.3
    lad = galerkin.spectrum(OperatorSpec.from_terms([(0, c, 0)]), 6)
    hill = galerkin.hill_spectrum(FourierPotential.constant(c), 6)
    for n in range(1, 7):
        s = (np.pi * n) ** 2
        assert lad.value(n, "+") == pytest.approx(s * s - 2 * c * s, rel=1e-12)
        assert hill.pair(n) == pytest.approx((s - c, s - c), rel=1e-12)


def test_multiplicity_four():
    lad = galerkin.spectrum(OperatorSpec.from_terms([(0, 10 * np.pi**2, 0)]), 8, N=128)
    hits = [e for e in lad if abs(e.value + 64 * np.pi**4) <= 1e-6]
    assert len(hits) == 4
    assert {e.sector for e in hits} == {PERIODIC}


def test_ladder_ordered_and_convergence_attached(spec_c7):
    lad = galerkin.spectrum(spec_c7, 20)
    assert lad.is_ordered() and len(lad) == 41
    assert len(lad.convergence) == 41
    assert all(v <= 1e-9 * max(1, abs(lad.value(n, s))) for (n, s), v in lad.convergence.items())


def test_unconverged_explicit_truncation_is_reported():
    spec = OperatorSpec.from_terms([(3, 400.0, 0)], [(1, 300.0, 0)])
    lad = galerkin.spectrum(spec, 6, N=6)
    assert lad.errors and "not converged" in lad.errors[0]


def test_convergence_improves_with_n(spec_c7):
    coarse = galerkin.spectrum(spec_c7, 10, N=14)
    fine = galerkin.spectrum(spec_c7, 10, N=56)
    errc = max(coarse.convergence.values())
    errf = max(fine.convergence.values())
    assert errf < errc


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_constant_shift_of_p(c, a, b):
    # H(p + c) = H(p) - 2 c d^2 holds entrywise; d^2 is diagonal in the basis
    base = OperatorSpec.from_terms([(1, a, b)], [(2, 1.0, 0.0)])
    shifted = OperatorSpec(base.p.shifted(c), base.q)
    for sector in (PERIODIC, ANTIPERIODIC):
        H0 = galerkin.h_matrix(base, sector, 20)
        H1 = galerkin.h_matrix(shifted, sector, 20)
        assert np.allclose(H1.entries - H0.entries, np.diag(-2 * c * (np.pi * H0.k) ** 2), atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_constant_shift_moves_levels_when_p_constant(c, p0):
    l0 = galerkin.spectrum(OperatorSpec.from_terms([(0, p0, 0)]), 6, N=40)
    l1 = galerkin.spectrum(OperatorSpec.from_terms([(0, p0 + c, 0)]), 6, N=40)
    for e in l0:
        if e.n >= 2:
            ref = e.value - 2 * c * (np.pi * e.n) ** 2
            assert l1.value(e.n, e.sign) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_slot_labels():
    assert [slot_label(i) for i in range(5)] == [(0, "+"), (1, "-"), (1, "+"), (2, "-"), (2, "+")]
    entries = label_sorted([5.0, 1.0, 3.0], ["a", "b", "c"], 3)
    assert [(e.n, e.sign, e.sector, e.value) for e in entries] == [(0, "+", "b", 1.0), (1, "-", "c", 3.0), (1, "+", "a", 5.0)]


def test_parallel_matches_serial(spec_c6):
    a = galerkin.spectrum(spec_c6, 12, workers=1)
    b = galerkin.spectrum(spec_c6, 12, workers=2)
    assert np.array_equal(a.values, b.values)
