"""Floquet theory for p-periodic potentials and the periodic resonance laws.

Conventions: T_j(E) = [[E - V_j, -1], [1, 0]] maps (u_j, u_{j-1}) to
(u_{j+1}, u_j).  The monodromy from offset k is T_{k+p-1} ... T_k.
In a band the Floquet multiplier is rho = exp(i p theta_p) with theta_p
increasing from -pi (bottom of the spectrum) to 0 (top).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .core import cot_inverse, free_z
from .errors import AuxBoxTooSmall, BandEdge, GridTooCoarse, NearDip, OutOfDomain
from .spectral import PotentialSpec, dirichlet_eigen


def _values(pot) -> np.ndarray:
    if isinstance(pot, PotentialSpec):
        if pot.kind != "periodic":
            raise ValueError("periodic potential required")
        return np.asarray(pot.values, dtype=float)
    return np.asarray(pot, dtype=float)


def transfer(E, v):
    return np.array([[E - v, -1.0], [1.0, 0.0]], dtype=complex if np.iscomplexobj(E) else float)


def partial_product(V, E, k):
    """T_{k-1} ... T_0 = [[a_k, b_k], [a_{k-1}, b_{k-1}]] (identity for k = 0).

    V is indexed periodically.
    """
    V = np.asarray(V, dtype=float)
    M = np.eye(2, dtype=complex if np.iscomplexobj(E) else float)
    for j in range(k):
        M = transfer(E, V[j % V.size]) @ M
    return M


class Monodromy(NamedTuple):
    k: int
    ap: float
    bp: float
    apm1: float
    bpm1: float

    @property
    def matrix(self):
        return np.array([[self.ap, self.bp], [self.apm1, self.bpm1]])

    @property
    def trace(self):
        return self.ap + self.bpm1

    @property
    def det(self):
        return self.ap * self.bpm1 - self.bp * self.apm1


def monodromy(pot, k: int, E) -> Monodromy:
    V = _values(pot)
    p = V.size
    M = np.eye(2, dtype=complex if np.iscomplexobj(E) else float)
    for j in range(k, k + p):
        M = transfer(E, V[j % p]) @ M
    return Monodromy(k, M[0, 0], M[0, 1], M[1, 0], M[1, 1])


def discriminant_poly(V) -> np.ndarray:
    """Coefficients (lowest first) of Delta(E) = trace of the monodromy."""
    V = np.asarray(V, dtype=float)
    # entries as polynomials in E
    M = [[np.array([1.0]), np.array([0.0])], [np.array([0.0]), np.array([1.0])]]
    for v in V:
        a = np.array([-v, 1.0])
        new = [[P.polysub(P.polymul(a, M[0][0]), M[1][0]), P.polysub(P.polymul(a, M[0][1]), M[1][1])],
               [M[0][0], M[0][1]]]
        M = new
    return P.polyadd(M[0][0], M[1][1])


@dataclass
class BandStructure:
    values: np.ndarray
    bands: list
    delta_c: np.ndarray
    crit: np.ndarray   # real critical points of Delta, sorted

    @property
    def p(self):
        return self.values.size

    def delta(self, E):
        return P.polyval(E, self.delta_c)

    def ddelta(self, E):
        return P.polyval(E, P.polyder(self.delta_c))

    def in_band(self, E, tol=0.0):
        return any(a - tol <= E <= b + tol for a, b in self.bands)

    def _sub_band(self, E):
        return int(np.sum(self.crit < E))

    def _check(self, E):
        d = self.delta(E)
        if abs(d) > 2 - 1e-10:
            raise BandEdge(f"E={E} is not in a band interior (|Delta|={abs(d)})")
        return d

    def theta_p(self, E) -> float:
        d = self._check(E)
        p = self.p
        b = self._sub_band(E)
        sgn = (-1) ** (p - 1 - b)
        s = math.acos(-sgn * d / 2)
        return (-p * math.pi + b * math.pi + s) / p

    def dtheta_p(self, E) -> float:
        d = self._check(E)
        return abs(self.ddelta(E)) / (self.p * math.sqrt(4 - d * d))

    def dos(self, E) -> float:
        return self.dtheta_p(E) / math.pi

    def rho(self, E) -> complex:
        """Floquet multiplier exp(i p theta_p) (|rho| < 1 in gaps)."""
        E = float(E)
        d = self.delta(E)
        if abs(d) < 2:
            return complex(np.exp(1j * self.p * self.theta_p(E)))
        r = d / 2 - math.copysign(math.sqrt(d * d / 4 - 1), d)
        return complex(r)

    floquet_multiplier = rho

    def ids(self, E) -> float:
        """Integrated density of states of the periodic operator on Z."""
        if E <= self.bands[0][0]:
            return 0.0
        if E >= self.bands[-1][1]:
            return 1.0
        if abs(self.delta(E)) < 2 - 1e-10:
            return 1.0 + self.theta_p(E) / math.pi
        below = [b for a, b in self.bands if b <= E + 1e-9]
        if not below:
            return 0.0
        v = 1.0 + self.theta_p(max(below) - 1e-7) / math.pi
        return round(v * self.p) / self.p

    # Floquet coefficient functions (band interior)
    def ab(self, E, k):
        M = partial_product(self.values, E, k)
        return M[0, 0], M[0, 1]

    def alpha(self, E, m):
        mono = monodromy(self.values, 0, E)
        r = self.rho(E)
        a_m, b_m = self.ab(E, m)
        return a_m * (mono.ap - 1 / r) + b_m * mono.apm1

    def f(self, E):
        return 2.0 / self.p * sum(abs(self.alpha(E, m)) ** 2 for m in range(self.p))

    def f0(self, E):
        r = self.rho(E)
        return abs(1 - r * r) ** 2 / self.f(E)

    def fk(self, E, k):
        mono = monodromy(self.values, 0, E)
        r = self.rho(E)
        a, b = self.ab(E, k + 1)
        return self.f0(E) * mono.apm1 ** 2 / abs(a * (r - mono.bpm1) + b * mono.apm1) ** 2

    def hk(self, E, k):
        """h_k modulo pi, in (-pi/2, pi/2]."""
        mono = monodromy(self.values, 0, E)
        r = self.rho(E)
        a, b = self.ab(E, k + 1)
        X = mono.apm1 * b + a * (mono.ap - r)
        h = math.atan2(X.imag, X.real)
        h = (h + math.pi / 2) % math.pi - math.pi / 2
        return h

    def tilde_f(self, E, k):
        """1/L correction in the boundary weight, such that
        |phi_l(L)|^2 = f_k / (L-k) * (1 + tilde_f / (L-k))^-1 at eigenvalues.

        Obtained by summing |u_l|^2 over the box with the quantization
        condition rho^{2N} = conj(alpha_{k+1}) / alpha_{k+1} inserted.
        """
        r = self.rho(E)
        f = self.f(E)
        ak1 = self.alpha(E, k + 1)
        r2N = np.conj(ak1) / ak1
        geo = (1 - r2N) / (1 - r * r)
        tot = 0.0
        for m in range(self.p):
            am = self.alpha(E, m)
            tot -= 2 * abs(am) ** 2 * ((am / np.conj(am)) * geo).real
        for m in range(k + 1):
            am = self.alpha(E, m)
            tot += 2 * abs(am) ** 2 * (1 - ((am / np.conj(am)) * r2N).real)
        return float(tot / f)


def band_spectrum(pot, step: float = 1e-3) -> BandStructure:
    V = _values(pot)
    p = V.size
    dc = discriminant_poly(V)
    crit = np.roots(P.polyder(dc)[::-1]) if p > 1 else np.array([])
    crit = np.sort(crit.real[np.abs(crit.imag) < 1e-9]) if crit.size else crit
    lo, hi = V.min() - 2.0 - 1e-6, V.max() + 2.0 + 1e-6
    for attempt in range(2):
        grid = np.arange(lo, hi + step, step)
        g = P.polyval(grid, dc)
        edges = []
        for target in (2.0, -2.0):
            h = g - target
            idx = np.flatnonzero(np.sign(h[:-1]) * np.sign(h[1:]) < 0)
            for i in idx:
                edges.append(brentq(lambda e: P.polyval(e, dc) - target, grid[i], grid[i + 1],
                                    xtol=1e-13, rtol=1e-15))
            edges += list(grid[np.flatnonzero(h == 0)])
        edges = np.sort(np.asarray(edges))
        bands = []
        for a, b in zip(edges[:-1], edges[1:]):
            if abs(P.polyval(0.5 * (a + b), dc)) <= 2:
                if bands and abs(bands[-1][1] - a) < 1e-12:
                    bands[-1] = (bands[-1][0], float(b))
                else:
                    bands.append((float(a), float(b)))
        if len(bands) <= p:
            return BandStructure(V, bands, dc, crit)
        step /= 10
    raise GridTooCoarse(f"found {len(bands)} bands for period {p}")


def quasimomentum(bs: BandStructure, E) -> float:
    return bs.theta_p(E)


def dos(bs: BandStructure, E) -> float:
    return bs.dos(E)


def floquet_multiplier(bs: BandStructure, E) -> complex:
    return bs.rho(E)


class FloquetWeights(NamedTuple):
    f: float
    f0: float
    fk: float
    hk: float
    tilde_f: float


def floquet_weights(bs: BandStructure, k: int, E) -> FloquetWeights:
    bs._check(E)
    return FloquetWeights(bs.f(E), bs.f0(E), bs.fk(E, k), bs.hk(E, k), bs.tilde_f(E, k))


def quantized_eigenvalues(bs: BandStructure, k: int, L: int, I, per_unit=40):
    """Solutions of exp(2i((L-k) theta_p - h_k)) = 1 in the interval I."""
    a, b = I
    n = max(200, int(per_unit * L * (b - a)))
    grid = np.linspace(a, b, n)

    def g(E):
        mono = monodromy(bs.values, 0, E)
        r = bs.rho(E)
        a_, b_ = bs.ab(E, k + 1)
        X = mono.apm1 * b_ + a_ * (mono.ap - r)
        # exp(2i(L-k)theta_p) = X / conj(X)  <=>  exp(i(L-k)theta_p) conj(X) is real
        return (np.exp(1j * (L - k) * bs.theta_p(E)) * np.conj(X)).imag

    vals = np.array([g(e) for e in grid])
    out = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        out.append(brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    return np.array(out)


# -- half-line Borel transforms --------------------------------------------

def reflected_values(V, k):
    """Potential of H_k^- seen from its Dirichlet end: W(n) = V((k - n) mod p)."""
    V = np.asarray(V, dtype=float)
    p = V.size
    return V[(k - np.arange(p)) % p]


def _mobius(W, E):
    M = np.eye(2, dtype=complex)
    for w in W:
        M = M @ np.array([[0.0, 1.0], [-1.0, w - E]], dtype=complex)
    return M


def m_roots(W, E):
    """Both fixed points of the period map for m_n = 1/(W_n - E - m_{n+1}).

    Returns (m_att, m_rep) where m_att is attracting for the recursion
    (the Borel transform itself when Im E != 0 on that side) and m_rep
    the other root.
    """
    M = _mobius(W, complex(E))
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    if abs(c) < 1e-300:
        # p-map is affine; only happens in degenerate cases
        raise OutOfDomain("degenerate period map")
    disc = np.sqrt((d - a) ** 2 + 4 * b * c)
    r1 = (-(d - a) + disc) / (2 * c)
    r2 = (-(d - a) - disc) / (2 * c)
    if abs(c * r1 + d) >= abs(c * r2 + d):
        return complex(r1), complex(r2)
    return complex(r2), complex(r1)


def borel_exact(W, E):
    """Integral of dN/(lambda - E) for the half-line operator with potential W (periodic)."""
    E = complex(E)
    ma, mr = m_roots(W, E)
    if E.imag != 0:
        return ma
    # real E: boundary value from above is the root with Im > 0
    return ma if ma.imag > mr.imag else mr


def borel_box(W, E, L_aux=3000):
    """Same transform from a Dirichlet box of L_aux + 1 sites."""
    W = np.asarray(W, dtype=float)
    spec = dirichlet_eigen(W[np.arange(L_aux + 1) % W.size], L_aux, with_b=False)
    return complex(np.sum(np.exp(2 * spec.log_phi0) / (spec.lambdas - complex(E))))


def borel_transforms(pot, k: int, E, L_aux: int = 3000, method: str = "box", tol=1e-8):
    """(B_k^-(E), B_0^+(E)).

    method="box" uses Dirichlet boxes of size L_aux (with L_aux = k mod p),
    method="exact" the fixed point of the period map.
    """
    V = _values(pot)
    p = V.size
    E = complex(E)
    Wm = reflected_values(V, k)
    Wp = V
    if method == "exact":
        return borel_exact(Wm, E), borel_exact(Wp, E)
    if E.imag == 0:
        raise OutOfDomain("box sums need Im E != 0; use method='exact' on the real axis")
    # finite-box error decays like exp(-|Im E| L / C); refuse hopeless requests
    if abs(E.imag) * L_aux < 40 * math.log(1 / tol) / 18:
        raise AuxBoxTooSmall(f"L_aux={L_aux} too small for Im E={E.imag}")
    La = L_aux - ((L_aux - k) % p)
    return borel_box(Wm, E, La), borel_box(Wp, E, L_aux)


class CFunctions:
    """n, S, Xi, g and c evaluators continued to a neighbourhood below the bands."""

    def __init__(self, pot, k: int = 0):
        self.V = _values(pot)
        self.k = k
        self.bs = band_spectrum(self.V)
        self.Wm = reflected_values(self.V, k)
        self.Wp = self.V

    @staticmethod
    def _branches(W, E):
        """(m_down, m_up): the transform continued from below and from above."""
        E = complex(E)
        ma, mr = m_roots(W, E)
        if E.imag < 0:
            return ma, mr
        if E.imag > 0:
            return mr, ma
        return (ma, mr) if ma.imag < mr.imag else (mr, ma)

    def _parts(self, W, E):
        mdown, mup = self._branches(W, E)
        pin = (mup - mdown) / 2j         # pi * n(E), continued
        S = (mup + mdown) / 2           # principal value, continued
        return pin, S, mdown

    def n_k_minus(self, E):
        return self._parts(self.Wm, E)[0] / math.pi

    def n_0_plus(self, E):
        return self._parts(self.Wp, E)[0] / math.pi

    def S_k_minus(self, E):
        return self._parts(self.Wm, E)[1]

    def S_0_plus(self, E):
        return self._parts(self.Wp, E)[1]

    def Xi_k_minus(self, E):
        return self._parts(self.Wm, E)[2] + complex(free_z(complex(E)))

    def Xi_0_plus(self, E):
        return self._parts(self.Wp, E)[2] + complex(free_z(complex(E)))

    def g_k_minus(self, E):
        pin, S, _ = self._parts(self.Wm, E)
        return (S + complex(free_z(complex(E)))) / pin

    def g_0_plus(self, E):
        pin, S, _ = self._parts(self.Wp, E)
        return (S + complex(free_z(complex(E)))) / pin

    def c_N(self, E):
        return self.g_k_minus(E)

    def c_Z(self, E):
        g0 = self.g_0_plus(E)
        gk = self.g_k_minus(E)
        return (g0 * gk - 1) / (g0 + gk)

    def c(self, E, geometry="halfline"):
        return self.c_N(E) if geometry == "halfline" else self.c_Z(E)

    def xi_product(self, E, geometry="halfline"):
        if geometry == "halfline":
            return self.Xi_k_minus(E)
        return self.Xi_k_minus(E) * self.Xi_0_plus(E)


def c_functions(pot, k: int = 0) -> CFunctions:
    return CFunctions(pot, k)


# -- predictions ------------------------------------------------------------

class Prediction(NamedTuple):
    l: int
    lam: float
    ztilde: complex
    zfirst: complex
    dip: bool


def predict_resonances(pot, k: int, L: int, I, geometry="halfline", lambdas=None,
                       dips: Optional[Sequence[float]] = None) -> List[Prediction]:
    """Closed-form approximations to the resonances closest to the real axis.

    `lambdas` may supply the Dirichlet eigenvalues; otherwise they are
    obtained from the quantization condition.
    """
    cf = pot if isinstance(pot, CFunctions) else CFunctions(pot, k)
    bs = cf.bs
    p = bs.p
    if (L - k) % p:
        raise ValueError(f"L={L} is not congruent to k={k} mod {p}")
    if lambdas is None:
        lambdas = quantized_eigenvalues(bs, k, L, I)
    lambdas = np.asarray([x for x in lambdas if I[0] <= x <= I[1]])
    if dips is None:
        dips = []
    out = []
    for l, lam in enumerate(lambdas):
        pinL = math.pi * bs.dos(lam) * L
        w0 = cf.c(complex(lam, -math.log(L) / L), geometry)
        inner = lam + cot_inverse(w0) / pinL
        zt = lam + cot_inverse(cf.c(inner, geometry)) / pinL
        zf = lam + cot_inverse(cf.c(complex(lam), geometry)) / pinL
        dip = any(abs(lam - d) < L ** -0.5 for d in dips)
        if dip:
            warnings.warn(f"lambda={lam} lies near a zero of c - i", NearDip)
        out.append(Prediction(l, float(lam), complex(zt), complex(zf), bool(dip)))
    return out


def dip_width(q, n, lam, E0, L):
    """Asymptotic imaginary part of the resonance near a zero of c - i of order q."""
    return q / (2 * math.pi * n) * math.log(abs(lam - E0) ** 2 + (q * math.log(L) / (2 * math.pi * n * L)) ** 2) / (2 * L)


# -- deep zeros -------------------------------------------------------------

def _wind(f, rect, n=200):
    x0, x1, y0, y1 = rect
    pts = np.concatenate([
        x0 + (x1 - x0) * np.linspace(0, 1, n, endpoint=False) + 1j * y0,
        x1 + 1j * (y0 + (y1 - y0) * np.linspace(0, 1, n, endpoint=False)),
        x1 - (x1 - x0) * np.linspace(0, 1, n, endpoint=False) + 1j * y1,
        x0 + 1j * (y1 - (y1 - y0) * np.linspace(0, 1, n, endpoint=False)),
    ])
    vals = np.array([f(e) for e in pts])
    vals = np.append(vals, vals[0])
    d = np.angle(vals[1:] / vals[:-1])
    if np.max(np.abs(d)) > 1.0:
        return _wind(f, rect, 4 * n) if n < 20000 else None
    return int(round(d.sum() / (2 * np.pi)))


def _newton_c(f, E, maxit=60, h=1e-7):
    for _ in range(maxit):
        fe = f(E)
        d = (f(E + h) - f(E - h)) / (2 * h)
        if d == 0:
            break
        step = fe / d
        E = E - step
        if abs(step) < 1e-14:
            break
    return E


def deep_zeros(pot, k: int, geometry, I, depth: float = 3.0, top: float = -1e-9,
               min_size=1e-3):
    """Zeros of c - i (equivalently of Xi) below I, as (E, order)."""
    cf = pot if isinstance(pot, CFunctions) else CFunctions(pot, k)
    if np.allclose(cf.V, 0):
        return []

    def f(E):
        return cf.xi_product(E, geometry)

    out = []
    stack = [(I[0], I[1], -depth, top)]
    while stack:
        R = stack.pop()
        n = _wind(f, R)
        if n is None or n == 0:
            continue
        x0, x1, y0, y1 = R
        if max(x1 - x0, y1 - y0) < min_size:
            E = _newton_c(f, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
            out.append((complex(E), n))
            continue
        if n == 1 and max(x1 - x0, y1 - y0) < 0.1:
            E = _newton_c(f, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
            if x0 <= E.real <= x1 and y0 <= E.imag <= y1 and abs(f(E)) < 1e-10:
                out.append((complex(E), 1))
                continue
        if x1 - x0 >= y1 - y0:
            xm = 0.5 * (x0 + x1)
            stack += [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = 0.5 * (y0 + y1)
            stack += [(x0, x1, y0, ym), (x0, x1, ym, y1)]
    return sorted(out, key=lambda t: (t[0].real, t[0].imag))


def dip_points(pot, k: int, geometry="halfline", I=(-2.0, 2.0), n: int = 4000,
               radius: float = 1e-4):
    """Real zeros of c - i inside the bands, as (E0, order).

    A scan of |Xi| on the real axis picks candidates, complex Newton
    polishes them and a small square around each gives the order.
    """
    cf = pot if isinstance(pot, CFunctions) else CFunctions(pot, k)
    if np.allclose(cf.V, 0):
        return []
    bs = cf.bs

    def f(E):
        return cf.xi_product(E, geometry)

    out = []
    for lo, hi in bs.bands:
        a, b = max(lo, I[0]), min(hi, I[1])
        if b - a < 1e-6:
            continue
        pad = 1e-4 * (b - a)
        grid = np.linspace(a + pad, b - pad, max(int(n * (b - a) / 4), 50))
        vals = np.array([abs(f(complex(e))) for e in grid])
        for i in range(1, grid.size - 1):
            if not (vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]):
                continue
            try:
                E = _newton_c(f, complex(grid[i]))
            except (OutOfDomain, ZeroDivisionError):
                continue
            if not (a < E.real < b) or abs(E.imag) > 1e-8 or abs(f(E)) > 1e-9:
                continue
            E0 = E.real
            if any(abs(E0 - e) < 1e-8 for e, _ in out):
                continue
            q = _wind(f, (E0 - radius, E0 + radius, -radius, radius))
            out.append((E0, int(abs(q)) if q else 1))
    return sorted(out)


def gap_eigenvalues(pot, side: str = "plus", k: int = 0):
    """Eigenvalues of the Dirichlet half-line periodic operator lying in gaps.

    side="plus" is H_0^+ (potential V(0), V(1), ... to the right of the
    Dirichlet point), side="minus" is H_k^- (V(k), V(k-1), ... to the left).
    Returns (E, multiplier) pairs; |multiplier| < 1 is the decay per period.
    """
    V = _values(pot)
    W = V if side == "plus" else reflected_values(V, k)
    p = W.size
    if p == 1:
        return []
    # u(-1) = 0 forces u(p-1) = 0 for a Floquet solution: the eigenvalues of
    # the cell block on sites 0..p-2 are the only candidates
    J = np.diag(W[:p - 1]) + np.diag(np.ones(p - 2), 1) + np.diag(np.ones(p - 2), -1)
    out = []
    for E in np.linalg.eigvalsh(J):
        M = monodromy(W, 0, float(E)).matrix
        mult = M[0, 0]
        tr = np.trace(M)
        if abs(tr) > 2 and abs(mult) < 1 and abs(M[1, 0]) < 1e-8 * max(1.0, abs(mult)):
            out.append((float(E), float(mult)))
    return out
