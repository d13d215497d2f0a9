import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_resonances.errors import AuxBoxTooSmall, BandEdge, OutOfDomain
from lattice_resonances.periodic import (band_spectrum, borel_transforms, c_functions, deep_zeros,
                                         dip_points, discriminant_poly, dos, floquet_multiplier, floquet_weights,
                                         gap_eigenvalues, monodromy, predict_resonances,
                                         quantized_eigenvalues, quasimomentum)
from lattice_resonances.spectral import PotentialSpec, dirichlet_eigen, jacobi_matrix

pots = st.lists(st.floats(-2, 2), min_size=1, max_size=5)


@settings(max_examples=50, deadline=None)
@given(pots, st.floats(-4, 4), st.integers(0, 6))
def test_monodromy_det_and_cyclic_trace(V, E, k):
    m = monodromy(V, k % len(V), E)
    assert abs(m.det - 1) < 1e-9 * max(1, abs(m.ap) ** 2)
    assert abs(m.trace - monodromy(V, 0, E).trace) < 1e-8 * max(1, abs(m.trace))
    assert abs(m.trace - np.polynomial.polynomial.polyval(E, discriminant_poly(V))) < 1e-8 * max(1, abs(m.trace))


def test_period_two_trace():
    V = (0.3, -1.1)
    for E in (-2.0, 0.1, 1.7):
        assert abs(monodromy(V, 0, E).trace - ((E - V[0]) * (E - V[1]) - 2)) < 1e-12


def test_band_edges_closed_form():
    # E(E-3) - 2 = +-2
    bs = band_spectrum([0.0, 3.0])
    edges = sorted([(3 - math.sqrt(25)) / 2, (3 - math.sqrt(9)) / 2, (3 + math.sqrt(9)) / 2,
                    (3 + math.sqrt(25)) / 2])
    got = [e for b in bs.bands for e in b]
    assert np.allclose(got, edges, atol=1e-10)
    assert not bs.in_band(1.5) and bs.in_band(-0.5)
    with pytest.raises(BandEdge):
        bs.theta_p(1.5)
    # in the gap the multiplier is real with modulus below one
    m = floquet_multiplier(bs, 0.5)
    assert m.imag == 0 and 0 < abs(m) < 1
    assert abs(m + 1 / m - bs.delta(0.5)) < 1e-12
    assert abs(abs(floquet_multiplier(bs, -0.5)) - 1) < 1e-12


def test_free_band():
    bs = band_spectrum([0.0])
    assert np.allclose(bs.bands, [(-2, 2)], atol=1e-10)
    for E in (-1.5, 0.0, 0.9):
        assert abs(dos(bs, E) - 1 / (math.pi * math.sqrt(4 - E * E))) < 1e-10
        assert abs(2 * math.cos(quasimomentum(bs, E)) - E) < 1e-10


@pytest.mark.parametrize("V", [(0.0, 1.0), (0.5, -0.5, 1.0), (0, 0, 0, 0, 0, -0.5, -0.5)])
def test_each_band_carries_one_over_p(V):
    from scipy.integrate import quad
    bs = band_spectrum(V)
    assert len(bs.bands) == len(V)
    for a, b in bs.bands:
        w, _ = quad(bs.dos, a, b, limit=400)
        assert abs(w - 1 / len(V)) < 1e-6
        assert abs(bs.ids(b) - bs.ids(a) - 1 / len(V)) < 1e-6


def test_ids_against_eigenvalue_count():
    V = (0.0, 1.0, -0.7)
    bs = band_spectrum(V)
    L = 3 * 400 - 1
    lam = np.linalg.eigvalsh(jacobi_matrix(np.array(V * 400)))
    for E in (-1.9, -0.5, 0.4, 1.3):
        assert abs(np.sum(lam <= E) / lam.size - bs.ids(E)) < 2 / L


def test_quantization_matches_dirichlet_box():
    V = [0.0, 1.0]
    bs = band_spectrum(V)
    for k in (0, 1):
        L = 200 + k
        s = dirichlet_eigen(PotentialSpec.periodic(V), L, with_b=False)
        for I in bs.bands:
            I = (I[0] + 0.05, I[1] - 0.05)
            q = quantized_eigenvalues(bs, k, L, I)
            box = s.lambdas[(s.lambdas > I[0]) & (s.lambdas < I[1])]
            assert q.size == box.size
            assert np.max(np.abs(q - box)) < 1e-9


def test_floquet_weight_predicts_boundary_weight():
    V = [0.0, 1.0]
    bs = band_spectrum(V)
    k, L = 0, 400
    s = dirichlet_eigen(PotentialSpec.periodic(V), L, with_b=False)
    for j in range(s.n):
        lam = s.lambdas[j]
        if not (-1.3 < lam < -0.3):
            continue
        fw = floquet_weights(bs, k, lam)
        want = fw.fk / (L - k) / (1 + fw.tilde_f / (L - k))
        assert abs(math.exp(s.aN[j]) / want - 1) < 1e-6


def test_borel_box_self_convergence_and_exact():
    V = [0.0, 1.0]
    E = 0.4 - 0.3j
    a = borel_transforms(V, 1, E, L_aux=1500)
    b = borel_transforms(V, 1, E, L_aux=3000)
    assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) < 1e-10
    ex = borel_transforms(V, 1, E, method="exact")
    assert max(abs(b[0] - ex[0]), abs(b[1] - ex[1])) < 1e-10
    with pytest.raises(AuxBoxTooSmall):
        borel_transforms(V, 1, 0.4 - 1e-4j, L_aux=100)
    with pytest.raises(OutOfDomain):
        borel_transforms(V, 1, 0.4, L_aux=100)


def test_c_functions_free_and_herglotz():
    cf = c_functions([0.0], 0)
    for E in (-1.5, 0.0, 1.2):
        assert abs(cf.c(E) - 1j) < 1e-10
    assert dip_points([0.0], 0) == []
    cf = c_functions([0.0, 1.0, -0.5], 1)
    for lo, hi in cf.bs.bands:
        # outside (-2, 2) the lead has no spectrum and c is real
        lo, hi = max(lo, -1.99), min(hi, 1.99)
        for E in np.linspace(lo, hi, 9)[1:-1]:
            assert cf.c_N(E).imag > 0
            assert cf.c_Z(E).imag > 0


def test_gap_eigenvalues_dense():
    V = [-1.0, 0.5, 0.0]
    ev = gap_eigenvalues(V, "plus")
    assert ev
    H = jacobi_matrix(np.array(V * 80))
    lam = np.linalg.eigvalsh(H)
    bs = band_spectrum(V)
    # each half-line gap eigenvalue shows up as an edge state of a long box
    for E, mult in ev:
        assert not bs.in_band(E) and abs(mult) < 1
        assert np.min(np.abs(lam - E)) < 1e-8


def test_predict_brackets_perturbative_scale():
    V = [0.0, 1.0]
    L = 240
    s = dirichlet_eigen(PotentialSpec.periodic(V), L, with_b=False)
    pr = predict_resonances(V, 0, L, (-1.2, -0.4), lambdas=s.lambdas)
    assert pr
    for p in pr:
        assert p.ztilde.imag < 0
        # Re cot^-1 lies in [0, pi)
        assert abs(p.ztilde.real - p.lam) < 1 / (dos(band_spectrum(V), p.lam) * L)
        assert 0.1 / L < -p.ztilde.imag < 10 * math.log(L) / L
    with pytest.raises(ValueError):
        predict_resonances(V, 0, 241, (-1.2, -0.4))


def test_deep_zeros_none_for_free():
    assert deep_zeros([0.0], 0, "halfline", (-1, 1)) == []
