import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_resonances.core import (cot, cot_inverse, dz_dE, exp_minus_i_theta, free_halfline_apply,
                                     free_halfline_apply_sines, free_resolvent_entry, free_z,
                                     logsumexp_signed, theta)
from lattice_resonances.errors import BranchCut, OutOfDomain

re_part = st.floats(-5, 5)
im_part = st.floats(1e-3, 5)


def test_theta_trivial_points():
    tv = theta(0)
    assert abs(tv.theta - (-math.pi / 2)) < 1e-12
    assert abs(tv.z - 1j) < 1e-12
    assert abs(theta(math.sqrt(2)).theta - (-math.pi / 4)) < 1e-12


def test_theta_second_sheet_newton_oracle():
    E = 0.3 - 0.2j
    tv = theta(E)
    # independent route: Newton on 2cos(t) = E from the conjugate of the upper value
    # the continuation through (-2,2) keeps Re in (-pi,0) and flips Im
    t = complex(theta(0.3 + 0.2j).theta).conjugate()
    for _ in range(50):
        t -= (2 * cmath.cos(t) - E) / (-2 * cmath.sin(t))
    assert abs(tv.theta - t) < 1e-12
    assert tv.theta.imag < 0 and abs(tv.z) < 1 and tv.z.imag > 0
    assert abs(2 * cmath.cos(tv.theta) - E) < 1e-12
    assert tv.sheet == "second"


def test_branch_cut():
    for E in (2.0, -2.0, 3.5, -10.0):
        with pytest.raises(BranchCut):
            theta(E)
    theta(1.999999)


@given(re_part, im_part)
def test_theta_invariants_upper(x, y):
    E = complex(x, y)
    tv = theta(E)
    assert abs(2 * cmath.cos(tv.theta) - E) <= 1e-12 * max(1, abs(E))
    assert tv.theta.imag > 0 and -math.pi < tv.theta.real < 0
    assert abs(tv.z) > 1 and tv.z.imag > 0
    # conjugation rule on the physical sheet
    lo = theta(E.conjugate())
    assert abs(abs(tv.z) * abs(lo.z) - 1) < 1e-12
    assert abs(tv.z + 1 / tv.z - E) <= 1e-12 * max(1, abs(E))


@given(re_part, im_part)
def test_theta_invariants_lower(x, y):
    E = complex(x, -y)
    tv = theta(E)
    assert tv.theta.imag < 0 and abs(tv.z) < 1 and tv.z.imag > 0
    assert abs(2 * cmath.cos(tv.theta) - E) <= 1e-12 * max(1, abs(E))


@given(st.floats(-math.pi + 1e-3, -1e-3), st.floats(-3, 3))
def test_theta_inverts_2cos(a, b):
    t = complex(a, b)
    E = 2 * cmath.cos(t)
    if abs(E.imag) < 1e-9 and abs(E.real) >= 2:
        return
    assert abs(theta(E).theta - t) < 1e-9 * max(1, abs(t))


def test_two_forms_of_exponential_agree():
    for E in (0.4 + 0.1j, -1.2 - 0.3j, 3 + 1j):
        s = cmath.sqrt((E / 2) ** 2 - 1)
        cand = [E / 2 + s, E / 2 - s]
        want = [c for c in cand if c.imag > 0][0]
        assert abs(exp_minus_i_theta(E) - want) < 1e-12


def test_dz_dE_matches_finite_difference():
    E = 0.7 - 0.4j
    h = 1e-6
    fd = (free_z(E + h) - free_z(E - h)) / (2 * h)
    assert abs(dz_dE(free_z(E)) - fd) < 1e-8


def test_cot_inverse_examples():
    u = cot_inverse(2j)
    assert 0 <= u.real < math.pi and u.imag < 0
    assert abs(cot(u) - 2j) < 1e-12
    # closed form with the branch moved into the strip
    ref = cmath.log((2j + 1j) / (2j - 1j)) / 2j
    ref = complex(ref.real % math.pi, ref.imag)
    assert abs(u - ref) < 1e-12

    w = 1 + 1e6j
    u = cot_inverse(w)
    assert abs(cot(u) - w) / abs(w) < 1e-9
    assert u.imag < 0 and abs(u) < 1e-5

    eps = 1e-3
    u = cot_inverse(1j + eps)
    assert abs(u.imag + 0.5 * abs(math.log(eps / 2))) < 1e-3
    assert abs(cot(u) - (1j + eps)) < 1e-12


def test_cot_inverse_domain():
    with pytest.raises(OutOfDomain):
        cot_inverse(1 - 0.1j)
    with pytest.raises(OutOfDomain):
        cot_inverse(1j)


@given(st.floats(-50, 50), st.floats(1e-4, 50))
def test_cot_inverse_roundtrip(a, b):
    w = complex(a, b)
    if abs(w - 1j) < 1e-6:
        return
    u = cot_inverse(w)
    assert 0 <= u.real < math.pi and u.imag < 0
    assert abs(cot(u) - w) <= 1e-9 * max(1, abs(w))


def test_free_resolvent_physical_limit():
    # <0|(H0 - E)^-1|0> = -1/sqrt(E^2 - 4) above the spectrum
    E = 3.0 + 1e-13j
    g = free_resolvent_entry(0, 0, E)
    assert abs(g - (-1 / math.sqrt(2.25 - 1)) / 2) < 1e-9


def test_free_resolvent_geometric():
    E = 0.3 + 0.7j
    z = free_z(E)
    for n in range(-3, 4):
        # e^{2i theta} = z^-2
        assert abs(free_resolvent_entry(n + 2, n, E) - free_resolvent_entry(n, n, E) / z ** 2) < 1e-12


def test_free_resolvent_quadrature_oracle():
    E = 0.5 + 1e-6j
    # the integrand's pole sits ~5e-7 off the axis, so the periodic
    # trapezoid rule needs a few times 1e7 nodes; sum in chunks
    M, chunk = 40_000_000, 2_000_000
    acc = 0j
    for start in range(0, M, chunk):
        t = (np.arange(start, start + chunk) + 0.5) * (2 * math.pi / M)
        acc += np.sum(1 / (2 * np.cos(t) - E))
    ref = acc / M
    assert abs(free_resolvent_entry(0, 0, E) - ref) < 1e-6


def test_free_resolvent_dense_oracle():
    E = 0.4 + 0.8j
    N = 401
    H = np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1)
    G = np.linalg.solve(H - E * np.eye(N), np.eye(N))
    c = N // 2
    for d in range(4):
        assert abs(G[c, c + d] - free_resolvent_entry(0, d, E)) < 1e-10


@given(st.floats(-1.99, 1.99))
def test_free_resolvent_herglotz(x):
    assert free_resolvent_entry(0, 0, complex(x, 1e-12)).imag > 0


def test_halfline_apply_recursion_and_dirichlet():
    E = 1 + 0.5j
    v = np.zeros(6, complex)
    v[3] = 1
    u = free_halfline_apply(v, E, 60)
    ext = np.concatenate([[0], u])  # site -1 carries the Dirichlet zero
    lhs = ext[2:-1] + ext[:-3] - E * ext[1:-2]
    assert np.allclose(lhs, np.concatenate([v, np.zeros(lhs.size - v.size)]), atol=1e-12)
    assert np.allclose(u[:20], free_halfline_apply_sines(v, E, 20), atol=1e-10)


def test_halfline_apply_dense_oracle():
    E = 1 + 0.5j
    N = 200
    H = np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1) - E * np.eye(N)
    # outgoing tail: u(N) = z^-1... replaced by e^{i theta} u(N-1)
    H[-1, -1] += 1 / free_z(E)
    rhs = np.zeros(N, complex)
    rhs[3] = 1
    ref = np.linalg.solve(H, rhs)
    u = free_halfline_apply(rhs[:4], E, 50)
    assert np.max(np.abs(u - ref[:50])) < 1e-8


def test_halfline_apply_outgoing_decay():
    E = 0.2 + 0.3j
    u = free_halfline_apply([1.0], E, 40)
    ratio = u[30] / u[29]
    assert abs(ratio - 1 / free_z(E)) < 1e-12


def test_logsumexp_signed():
    s, l = logsumexp_signed([1, -1, 1], [np.log(3), np.log(1), np.log(0.5)])
    assert s == 1 and abs(l - np.log(2.5)) < 1e-14
    assert logsumexp_signed([0, 0], [1, 2]) == (0.0, -np.inf)
