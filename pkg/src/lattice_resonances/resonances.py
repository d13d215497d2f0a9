"""Resonances of H_L^N (half-line) and H_L^Z (line) from the Dirichlet data.

A resonance is a zero in {Im E < 0} of
    halfline:  F(E) = S_L(E) + z(E)
    line:      F(E) = det(Gamma_L(E) + z(E) I)
with z(E) = exp(-i theta(E)).  Three routes are offered: roots of the
polynomial in z (small L), Newton in pole-local scaled coordinates, and
the first-order perturbative formula.  Counting uses winding numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import free_z, dz_dE, logsumexp_signed
from .errors import (ConditioningRefused, ContourUnstable, CountMismatch,
                     PoleHit, ValidityViolated)
from .spectral import DirichletSpectrum

POLY_MAX_L = 60
POLE_TOL = 1e-14


@dataclass
class Resonance:
    energy: complex
    geometry: str
    multiplicity: int = 1
    method: str = "newton"
    residual: float = 0.0
    log_width: float = float("nan")   # log|Im E|, always filled
    logscale: bool = False            # True when |Im E| is below 1e-300
    j: int = -1                       # index of the nearest Dirichlet eigenvalue

    @property
    def re(self) -> float:
        return self.energy.real

    @property
    def im(self) -> float:
        return self.energy.imag

    def row(self):
        v = self.log_width if self.logscale else self.energy.imag
        return [self.geometry, self.energy.real, v, int(self.logscale),
                self.multiplicity, self.method, self.residual]


RESONANCE_COLUMNS = ["geometry", "re", "im_or_logwidth", "logscale_flag",
                     "multiplicity", "method", "residual"]


class CharFunction:
    """Characteristic function of one geometry built on a DirichletSpectrum."""

    def __init__(self, spec: DirichletSpectrum, geometry: str = "halfline"):
        if geometry not in ("halfline", "line"):
            raise ValueError(f"unknown geometry {geometry!r}")
        self.spec = spec
        self.geometry = geometry
        self.lam = spec.lambdas
        self.aN = np.exp(spec.aN)
        self.p0 = spec.phi0()
        self.pL = spec.phiL()

    # -- global evaluation -------------------------------------------------
    def __call__(self, E):
        E = np.asarray(E, dtype=complex)
        z = free_z(E)
        inv = 1.0 / (self.lam[:, None] - E.ravel()[None, :])
        if self.geometry == "halfline":
            S = self.aN @ inv
            return (S + z.ravel()).reshape(E.shape)
        g00 = (self.p0 ** 2) @ inv
        gLL = (self.pL ** 2) @ inv
        g0L = (self.p0 * self.pL) @ inv
        zz = z.ravel()
        return ((g00 + zz) * (gLL + zz) - g0L ** 2).reshape(E.shape)

    # -- pole-local scaled form ------------------------------------------------
    def weight_log(self, j: int) -> float:
        """log of the residue scale at lambda_j."""
        if self.geometry == "halfline":
            return float(self.spec.aN[j])
        return float(2 * max(self.spec.log_phi0[j], self.spec.log_phiL[j]))

    def local(self, j: int, log_sigma: float, dt: complex):
        """G(dt) = F(lambda_j + sigma dt) * dt, and dG/d(dt).

        The pole at lambda_j is removed analytically and the residue is
        divided by sigma, so every quantity stays O(1) whatever the width.
        """
        lam = self.lam
        sigma = math.exp(log_sigma)
        delta = sigma * dt
        E = lam[j] + delta
        z = complex(free_z(E))
        zp = complex(dz_dE(z))
        mask = np.ones(lam.size, bool)
        mask[j] = False
        den = lam[mask] - lam[j] - delta
        inv = 1.0 / den
        inv2 = inv * inv
        if self.geometry == "halfline":
            aj = math.exp(self.spec.aN[j] - log_sigma)
            Sj = np.sum(self.aN[mask] * inv)
            Sj1 = np.sum(self.aN[mask] * inv2)
            G = dt * (Sj + z) - aj
            # d/d(dt) of dt*(Sj(sigma dt) + z)
            dG = (Sj + z) + dt * sigma * (Sj1 + zp)
            return G, dG
        p0, pL = self.p0[mask], self.pL[mask]
        m00 = np.sum(p0 * p0 * inv) + z
        mLL = np.sum(pL * pL * inv) + z
        m0L = np.sum(p0 * pL * inv)
        d00 = np.sum(p0 * p0 * inv2) + zp
        dLL = np.sum(pL * pL * inv2) + zp
        d0L = np.sum(p0 * pL * inv2)
        s = 0.5 * log_sigma
        w0 = self.spec.sign_phi0[j] * math.exp(self.spec.log_phi0[j] - s)
        wL = self.spec.sign_phiL[j] * math.exp(self.spec.log_phiL[j] - s)
        detM = m00 * mLL - m0L * m0L
        quad = w0 * w0 * mLL + wL * wL * m00 - 2 * w0 * wL * m0L  # w^T adj(M) w
        G = dt * detM - quad
        ddet = d00 * mLL + m00 * dLL - 2 * m0L * d0L
        dquad = w0 * w0 * dLL + wL * wL * d00 - 2 * w0 * wL * d0L
        dG = detM + dt * sigma * ddet - sigma * dquad
        return G, dG

    def nearest(self, E) -> int:
        return int(np.argmin(np.abs(self.lam - complex(E).real)))


def s_l(spec: DirichletSpectrum, E) -> complex:
    """S_L(E) = sum_j a_j^N / (lambda_j - E)."""
    E = complex(E)
    den = spec.lambdas - E
    if np.min(np.abs(den)) < POLE_TOL:
        raise PoleHit(f"E={E} is within {POLE_TOL} of a Dirichlet eigenvalue")
    terms = np.exp(spec.aN) / den
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def gamma_l(spec: DirichletSpectrum, E) -> np.ndarray:
    """2x2 matrix of resolvent entries <delta_a, (H_L - E)^-1 delta_b>, a, b in (0, L)."""
    E = complex(E)
    den = spec.lambdas - E
    if np.min(np.abs(den)) < POLE_TOL:
        raise PoleHit(f"E={E} is within {POLE_TOL} of a Dirichlet eigenvalue")
    p0, pL = spec.phi0(), spec.phiL()

    def fs(t):
        return complex(math.fsum(t.real), math.fsum(t.imag))

    g00 = fs(p0 * p0 / den)
    g0L = fs(p0 * pL / den)
    gLL = fs(pL * pL / den)
    return np.array([[g00, g0L], [g0L, gLL]])


# -- polynomial route -------------------------------------------------------

def char_poly(spec: DirichletSpectrum, geometry: str = "halfline") -> np.ndarray:
    """Coefficients (highest degree first) of the polynomial in z whose
    roots with Im z > 0, |z| < 1 give the resonances via E = z + 1/z."""
    L = spec.L
    if L > POLY_MAX_L:
        raise ConditioningRefused(f"polynomial route refused for L={L} > {POLY_MAX_L}")
    qs = [np.array([1.0, -lam, 1.0]) for lam in spec.lambdas]
    n = len(qs)
    pre = [np.array([1.0])]
    for q in qs:
        pre.append(np.convolve(pre[-1], q))
    suf = [np.array([1.0])]
    for q in reversed(qs):
        suf.append(np.convolve(suf[-1], q))
    suf = suf[::-1]
    full = pre[n]
    if geometry == "halfline":
        a = np.exp(spec.aN)
        out = full.copy()
        for j in range(n):
            loo = np.convolve(pre[j], suf[j + 1])
            out[2:] -= a[j] * loo
        return out
    a = np.exp(spec.aZ)
    b = spec.b if spec.b is not None else np.zeros(n)
    out = np.concatenate([full, [0.0]])  # z * prod q
    for j in range(n):
        loo = np.convolve(pre[j], suf[j + 1])
        out[2:] -= np.convolve([2 * a[j], b[j]], loo)
    return out


def poly_roots(spec, geometry="halfline"):
    """All resonance candidates from the polynomial, plus antibound states."""
    coef = char_poly(spec, geometry)
    # z = 0 is an exact root (once for halfline, twice for line); drop it
    # from the coefficient list instead of letting the solver split it
    k = 1 if geometry == "halfline" else 2
    coef = coef[:-k] if spec.n > 1 or geometry == "halfline" else coef
    # further roots at 0 show up as coefficients at rounding level; near the
    # free case they would otherwise scatter into a ring of fake roots
    scale = np.max(np.abs(coef))
    while coef.size > 1 and abs(coef[-1]) <= 1e-14 * scale:
        coef = coef[:-1]
    r = np.roots(coef)
    res, anti = [], []
    for z in r:
        if abs(z) < 1e-7 or abs(z) >= 1 - 1e-12:
            continue
        if z.imag > 1e-12:
            res.append(z + 1 / z)
        elif abs(z.imag) <= 1e-12:
            anti.append((z + 1 / z).real)
    return res, anti


# -- Newton --------------------------------------------------------------

def newton_local(cf: CharFunction, j: int, log_sigma: float, dt: complex,
                 tol=1e-14, maxit=100, max_halvings=40):
    with np.errstate(all="ignore"):
        return _newton_local(cf, j, log_sigma, dt, tol, maxit, max_halvings)


def _newton_local(cf, j, log_sigma, dt, tol, maxit, max_halvings):
    G, dG = cf.local(j, log_sigma, dt)
    for _ in range(maxit):
        if dG == 0:
            break
        step = G / dG
        t = 1.0
        for _h in range(max_halvings):
            nd = dt - t * step
            try:
                G2, dG2 = cf.local(j, log_sigma, nd)
            except (ZeroDivisionError, FloatingPointError):
                G2 = np.inf
            if np.isfinite(G2) and abs(G2) < abs(G) or abs(t * step) < tol * max(1, abs(dt)):
                break
            t *= 0.5
        if not np.isfinite(G2):
            break
        done = abs(t * step) <= tol * max(1.0, abs(nd))
        dt, G, dG = nd, G2, dG2
        if done or G == 0:
            break
    return dt, G, dG


def _make(cf, j, log_sigma, dt, G, method):
    sigma = math.exp(log_sigma)
    lam = cf.lam[j]
    im = sigma * dt.imag
    with np.errstate(divide="ignore"):
        lw = log_sigma + math.log(abs(dt.imag)) if dt.imag != 0 else -np.inf
    E = complex(lam + sigma * dt.real, im)
    resid = abs(G) / max(abs(dt), 1e-300)
    return Resonance(E, cf.geometry, 1, method, float(resid), float(lw),
                     bool(lw < math.log(1e-300)), j)


def polish(cf: CharFunction, E0: complex, method="newton", j: Optional[int] = None):
    """Newton from a global seed; returns a Resonance or None if the
    iteration escapes to the upper half-plane."""
    E0 = complex(E0)
    if j is None:
        j = cf.nearest(E0)
    delta = E0 - cf.lam[j]
    ls = min(0.0, math.log(max(abs(delta.imag), abs(delta), 1e-300)))
    dt = delta / math.exp(ls)
    dt, G, dG = newton_local(cf, j, ls, dt)
    r = _make(cf, j, ls, dt, G, method)
    k = cf.nearest(r.energy)
    if k != j and np.isfinite(r.energy.real):
        # root closer to another pole: redo in that chart for accuracy
        return polish(cf, r.energy, method, j=k) if abs(k - j) < cf.lam.size else r
    return r


# -- perturbative -----------------------------------------------------

def validity(spec, j, geometry="halfline", C=64.0):
    a = spec.aN[j] if geometry == "halfline" else spec.aZ[j]
    return a <= 2 * math.log(spec.d[j]) - math.log(C)


def perturbative_resonance(spec: DirichletSpectrum, j: int, geometry="halfline",
                           C: float = 64.0, check=True) -> Resonance:
    lam = spec.lambdas
    a_log = spec.aN[j] if geometry == "halfline" else spec.aZ[j]
    if check:
        if not validity(spec, j, geometry, C):
            raise ValidityViolated(f"a_{j} > d_{j}^2/C")
        lo = lam[j - 1] + lam[j] if j > 0 else -np.inf
        hi = lam[j + 1] + lam[j] if j + 1 < lam.size else np.inf
        if not (lo > -4 or j == 0) or not (hi < 4 or j + 1 == lam.size):
            raise ValidityViolated("neighbouring eigenvalues leave (-4, 4) on sums")
        if not (-2 < lam[j] < 2):
            raise ValidityViolated(f"lambda_{j} outside (-2, 2)")
    log_sigma, dt = _pert_local(spec, j, geometry)
    sigma = math.exp(log_sigma)
    lw = log_sigma + math.log(abs(dt.imag))
    E = complex(lam[j] + sigma * dt.real, sigma * dt.imag)
    return Resonance(E, geometry, 1, "perturbative", float("nan"), float(lw),
                     bool(lw < math.log(1e-300)), j)


# -- argument principle -----------------------------------------------------

def _winding_segment(f, a, b, fa, fb, depth=0, maxdepth=48, thr=0.5):
    d = np.angle(fb / fa)
    m = 0.5 * (a + b)
    fm = complex(f(np.array([m]))[0])
    if fm == 0 or not np.isfinite(fm):
        raise ContourUnstable("zero or pole on the contour")
    d1 = np.angle(fm / fa)
    d2 = np.angle(fb / fm)
    if abs(d) < thr and abs(d1 + d2 - d) < 1e-9:
        return d1 + d2
    if depth >= maxdepth:
        raise ContourUnstable("argument increment could not be resolved")
    return (_winding_segment(f, a, m, fa, fm, depth + 1, maxdepth, thr)
            + _winding_segment(f, m, b, fm, fb, depth + 1, maxdepth, thr))


def _edge_points(c0, c1, n, poles):
    t = np.linspace(0, 1, n + 1)
    if c0.imag == c1.imag and poles is not None and poles.size:
        # horizontal edge: add breakpoints above every pole and between poles
        lo, hi = sorted((c0.real, c1.real))
        inner = poles[(poles > lo) & (poles < hi)]
        mids = 0.5 * (inner[1:] + inner[:-1]) if inner.size > 1 else np.array([])
        dist = abs(c0.imag)
        extra = np.concatenate([inner, mids, inner - dist, inner + dist])
        extra = extra[(extra > lo) & (extra < hi)]
        t = np.unique(np.concatenate([t, (extra - c0.real) / (c1.real - c0.real)]))
    elif c0.real == c1.real and poles is not None and poles.size:
        # vertical edge: a pole-zero pair just beside it turns the argument
        # by 2 pi over a height comparable to its distance, so refine
        # geometrically towards the real axis on that scale
        lo, hi = sorted((c0.imag, c1.imag))
        delta = float(np.min(np.abs(poles - c0.real)))
        if delta > 0 and lo < delta and hi > -delta:
            g = delta * 2.0 ** np.arange(-2, 64)
            g = g[g < max(abs(lo), abs(hi))]
            ys = np.concatenate([g, -g, [0.0]])
            ys = ys[(ys > lo) & (ys < hi)]
            t = np.unique(np.concatenate([t, (ys - c0.imag) / (c1.imag - c0.imag)]))
    return c0 + (c1 - c0) * t


def winding(f, rect, n_per_edge=64, poles=None):
    x0, x1, y0, y1 = rect
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    total = 0.0
    for c0, c1 in zip(corners[:-1], corners[1:]):
        pts = _edge_points(c0, c1, n_per_edge, poles)
        vals = f(pts)
        if np.any(vals == 0) or not np.all(np.isfinite(vals)):
            raise ContourUnstable("zero or pole on the contour")
        for k in range(pts.size - 1):
            total += _winding_segment(f, pts[k], pts[k + 1], vals[k], vals[k + 1])
    return total / (2 * np.pi)


def count_in_rectangle(cf: CharFunction, rect, retries: int = 5, n_per_edge=64) -> int:
    """Number of zeros of F in the rectangle (x0, x1, y0, y1), with
    multiplicity.  Rectangles may straddle the real axis; the poles of F at
    the Dirichlet eigenvalues inside are then added back."""
    x0, x1, y0, y1 = map(float, rect)
    span = max(x1 - x0, y1 - y0)
    lam = cf.lam
    for attempt in range(retries + 1):
        eps = attempt * 1e-7 * span
        r = (x0 - eps, x1 + eps, y0 - eps, y1 + eps)
        # keep the vertical edges away from the poles on the real axis
        if r[2] < 0 < r[3]:
            close = np.min(np.abs(lam[:, None] - np.array([r[0], r[1]])[None, :])) if lam.size else 1
            if close < 1e-10:
                continue
        try:
            w = winding(cf, r, n_per_edge, poles=lam)
        except ContourUnstable:
            continue
        k = int(round(w))
        if abs(w - k) > 1e-3:
            continue
        if r[2] < 0 < r[3]:
            k += int(np.sum((lam > r[0]) & (lam < r[1])))
        return k
    raise ContourUnstable(f"winding number unstable on {rect}")


# -- drivers ----------------------------------------------------------------

def _dedupe(rs: List[Resonance], tol=1e-9):
    out = []
    for r in sorted(rs, key=lambda r: (r.energy.real, r.log_width)):
        if out and abs(r.energy.real - out[-1].energy.real) < tol and \
                abs(r.log_width - out[-1].log_width) < 1e-6:
            out[-1].multiplicity = max(out[-1].multiplicity, r.multiplicity)
            continue
        out.append(r)
    return out


def _in_rect(r, rect):
    if rect is None:
        return True
    x0, x1, y0, y1 = rect
    if not (x0 <= r.energy.real <= x1):
        return False
    if r.logscale:
        return y1 >= 0 and y0 < 0
    return y0 <= r.energy.imag <= y1


def find_resonances(spec: DirichletSpectrum, geometry="halfline", region=None,
                    seeds: Optional[Sequence[complex]] = None, certify: bool = True,
                    method: str = "auto", C: float = 64.0) -> List[Resonance]:
    """Resonances in `region` = (x0, x1, y0, y1), or everywhere if None.

    L <= 60 uses the polynomial route; larger boxes are seeded by `seeds`
    or by the perturbative formula on every eigenvalue in (-2, 2).
    """
    cf = CharFunction(spec, geometry)
    found: List[Resonance] = []
    if method == "poly" or (method == "auto" and spec.L <= POLY_MAX_L and seeds is None):
        roots, _ = poly_roots(spec, geometry)
        for E in roots:
            r = polish(cf, E, "poly")
            if not _isolated_root(cf, r.energy):
                continue
            if r.residual < 1e-8 and r.energy.imag < 0:
                found.append(r)
            elif abs(E) < 10:
                r0 = Resonance(E, geometry, 1, "poly", float(abs(cf(np.array([E]))[0])),
                               math.log(abs(E.imag)), False, cf.nearest(E))
                found.append(r0)
    else:
        if seeds is None:
            for j in range(spec.n):
                if not (-2 < spec.lambdas[j] < 2):
                    continue
                r = newton_from_perturbative(cf, j)
                if r is None or not (r.residual < 1e-8) or abs(r.energy.real - spec.lambdas[j]) > 0.5:
                    r0 = perturbative_resonance(spec, j, geometry, C, check=False)
                    E0 = r0.energy if r0.energy.imag < 0 else complex(spec.lambdas[j], -1e-3)
                    r = polish(cf, E0)
                if r is None:
                    continue
                if r.residual < 1e-8 and r.log_width > -np.inf and (r.energy.imag < 0 or r.logscale):
                    found.append(r)
        else:
            for E in seeds:
                r = polish(cf, E)
                if r.residual < 1e-8 and (r.energy.imag < 0 or r.logscale):
                    found.append(r)
    found = _dedupe([r for r in found if _in_rect(r, region)])
    if certify and region is not None:
        found = complete_in_region(cf, found, region)
    return found


def _isolated_root(cf, E, rel=1e-6):
    """True when one Newton step from E is small next to the distance to
    the nearest pole.  Where F is flat at rounding level (|z|^(2L) tiny)
    every point has a small residual but the step is of order one."""
    j = cf.nearest(E)
    delta = complex(E) - cf.lam[j]
    if delta == 0:
        return False
    ls = min(0.0, math.log(abs(delta)))
    sigma = math.exp(ls)
    with np.errstate(all="ignore"):
        G, dG = cf.local(j, ls, delta / sigma)
    if not (np.isfinite(G) and np.isfinite(dG)) or dG == 0:
        return False
    return abs(G / dG) * sigma <= rel * abs(delta)


def _known(found, rect):
    return sum(r.multiplicity for r in found if _in_rect(r, rect))


def complete_in_region(cf: CharFunction, found: List[Resonance], region, max_boxes=400,
                       min_size=1e-4) -> List[Resonance]:
    """Compare contour counts with the roots already known and search the
    sub-rectangles where roots are missing.  Raises CountMismatch when the
    two cannot be reconciled."""
    found = list(found)
    stack = [tuple(region)]
    boxes = 0
    while stack:
        R = stack.pop()
        boxes += 1
        if boxes > max_boxes:
            break
        n = count_in_rectangle(cf, R)
        k = _known(found, R)
        if n == k:
            continue
        if n < k:
            raise CountMismatch(f"{k} roots known in {R} but contour counts {n}",
                                found=found, counted=n)
        x0, x1, y0, y1 = R
        lo_y = min(y1, 0.0)
        news = []
        lam = cf.lam
        seeds = [complex(x, -y) for x in np.linspace(x0, x1, 5)[1:-1]
                 for y in np.geomspace(max(1e-6, -lo_y), -y0, 4)]
        for j in np.flatnonzero((lam > x0) & (lam < x1)):
            w = math.exp(cf.weight_log(j))
            seeds += [complex(lam[j], -w * t) for t in (0.5, 2.0)]
        for E in seeds:
            try:
                r = polish(cf, E)
            except (ZeroDivisionError, FloatingPointError, OverflowError):
                continue
            if r.residual < 1e-9 and r.energy.imag < 0 and _in_rect(r, R):
                news.append(r)
        if news:
            merged = _dedupe(found + news)
            if len(merged) > len(found):
                found = merged
                stack.append(R)
                continue
        if max(x1 - x0, lo_y - y0) < min_size:
            raise CountMismatch(f"could not locate {n - k} root(s) in {R}",
                                found=found, counted=n)
        if (x1 - x0) >= (lo_y - y0):
            xm = 0.5 * (x0 + x1)
            stack += [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = 0.5 * (y0 + lo_y)
            stack += [(x0, x1, y0, ym), (x0, x1, ym, y1)]
    n = count_in_rectangle(cf, region)
    k = _known(found, region)
    if n != k:
        raise CountMismatch(f"found {k} roots but contour counts {n}", found=found, counted=n)
    return found


def _pert_local(spec, j, geometry):
    """First-order offset from lambda_j as (log sigma, dt), E = lambda_j + sigma dt."""
    lam = spec.lambdas
    mask = np.ones(lam.size, bool)
    mask[j] = False
    z = complex(free_z(complex(lam[j])))
    den = lam[mask] - lam[j]
    if geometry == "halfline":
        q = 1.0 / (math.fsum(np.exp(spec.aN[mask]) / den) + z)
        return float(spec.aN[j]), complex(q)
    p0, pL = spec.phi0()[mask], spec.phiL()[mask]
    M = np.array([[np.sum(p0 * p0 / den) + z, np.sum(p0 * pL / den)],
                  [np.sum(p0 * pL / den), np.sum(pL * pL / den) + z]])
    s = max(spec.log_phi0[j], spec.log_phiL[j])
    w = np.array([spec.sign_phi0[j] * math.exp(spec.log_phi0[j] - s),
                  spec.sign_phiL[j] * math.exp(spec.log_phiL[j] - s)])
    return float(2 * s), complex(w @ np.linalg.solve(M, w))


def newton_from_perturbative(cf, j):
    """Newton in the chart where the first-order width is 1."""
    ls, dt = _pert_local(cf.spec, j, cf.geometry)
    if dt.imag == 0:
        return None
    shift = math.log(abs(dt.imag))
    ls2 = ls + shift
    dt2 = dt / abs(dt.imag)
    dt2, G, dG = newton_local(cf, j, ls2, dt2)
    return _make(cf, j, ls2, dt2, G, "newton")


def newton_grid(spec, geometry, rect, nx=None, ny=10):
    """Grid-seeded Newton search, used to cross-check the polynomial route.

    The default x resolution is a few seeds per eigenvalue spacing.
    """
    cf = CharFunction(spec, geometry)
    x0, x1, y0, y1 = rect
    if nx is None:
        nx = max(24, int(4 * spec.n * (x1 - x0) / 4))
    out = []
    for x in np.linspace(x0, x1, nx):
        for y in np.geomspace(-abs(y0), -max(abs(y1), 1e-6), ny):
            try:
                r = polish(cf, complex(x, y))
            except (ZeroDivisionError, FloatingPointError, OverflowError):
                continue
            if r.residual < 1e-10 and r.energy.imag < 0 and _in_rect(r, rect):
                out.append(r)
    return _dedupe(out)


@dataclass
class StripResult:
    log_depth: float
    method: str
    floor_log: float
    count_lambda: int


def resonance_free_strip(spec, geometry, I, eta_min: float = 1e-12, cap: float = 1.0,
                         top: float = 0.05) -> StripResult:
    """Depth of the resonance-free strip below the real interval I.

    When the shallowest resonance under I is deeper than eta_min the depth
    is resolved by bisection on contour counts; otherwise it is read off the
    pole-local Newton widths (contours cannot resolve widths that small).
    """
    cf = CharFunction(spec, geometry)
    lam = spec.lambdas
    x0, x1 = _safe_edges(lam, *I)
    inside = np.flatnonzero((lam > x0) & (lam < x1))
    a = spec.aN if geometry == "halfline" else spec.aZ
    with np.errstate(divide="ignore"):
        floor = [a[j] + 2 * math.log(spec.d[j]) + math.log(abs(math.sin(math.acos(lam[j] / 2))))
                 for j in inside if -2 < lam[j] < 2]
    floor_log = min(floor) if floor else float("nan")

    def n_shallow(eta):
        return count_in_rectangle(cf, (x0, x1, -eta, top))

    if n_shallow(eta_min) > 0:
        ws = []
        for j in inside:
            r = newton_from_perturbative(cf, j)
            if r is not None and r.residual < 1e-6:
                ws.append(r.log_width)
            else:
                ws.append(perturbative_resonance(spec, j, geometry, check=False).log_width)
        return StripResult(float(min(ws)), "newton-logscale", floor_log, inside.size)
    lo, hi = math.log(eta_min), math.log(cap)
    if n_shallow(cap) == 0:
        return StripResult(hi, "cap", floor_log, inside.size)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if n_shallow(math.exp(mid)) == 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3:
            break
    return StripResult(0.5 * (lo + hi), "bisection", floor_log, inside.size)


def _safe_edges(lam, x0, x1):
    """Move interval endpoints off the poles to the nearest midpoints."""
    def fix(x):
        if lam.size == 0:
            return x
        k = np.searchsorted(lam, x)
        lo = lam[k - 1] if k > 0 else x - 1
        hi = lam[k] if k < lam.size else x + 1
        if min(x - lo, hi - x) < 1e-3 * (hi - lo):
            return 0.5 * (lo + hi)
        return x
    return fix(x0), fix(x1)
