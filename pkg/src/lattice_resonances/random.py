"""Anderson model: i.i.d. potentials, Lyapunov exponent, IDS, localisation
checks, resonances with log-scale widths, rescaled point processes and the
limiting function Xi of the half-line problem.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.integrate import trapezoid

from .core import free_z
from .errors import ConfigInvalid, ScaleViolation, ValidityZone
from .resonances import (CharFunction, Resonance, complete_in_region, newton_from_perturbative,
                         perturbative_resonance, polish, validity)
from .spectral import (DirichletSpectrum, PotentialSpec, dirichlet_eigen, eigenvector_logs,
                       sturm_count)

RENORM_EVERY = 16


@dataclass(frozen=True)
class AndersonEnsemble:
    """i.i.d. site potentials; realization r is driven by its own sub-stream."""
    law: tuple = ("uniform", 0.0, 1.0)
    master_seed: int = 0

    def __post_init__(self):
        # validation lives in PotentialSpec
        PotentialSpec.anderson(0, self.law)
        if not (0 <= int(self.master_seed) < 2 ** 64):
            raise ConfigInvalid("master_seed must fit in 64 bits", field="master_seed")

    def subseed(self, r: int) -> int:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(r),))
        return int(ss.generate_state(1, np.uint64)[0])

    def stream(self, r: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.subseed(r)))

    def spec(self, r: int) -> PotentialSpec:
        return PotentialSpec.anderson(self.subseed(r), self.law)

    def omega(self, r: int, n: int) -> np.ndarray:
        """omega_0 ... omega_{n-1} of realization r."""
        return self.spec(r).on_box(n - 1)

    def potential(self, r: int, L: int, reversed: bool = False) -> np.ndarray:
        """V(0..L); reversed=True gives V(n) = omega_{L-n}, so that the
        right end of the box always sees omega_0, omega_1, ..."""
        w = self.omega(r, L + 1)
        return w[::-1].copy() if reversed else w

    def support(self):
        return PotentialSpec.anderson(0, self.law).law_support()

    def spectrum_hull(self):
        a, b = self.support()
        return a - 2.0, b + 2.0

    def degenerate(self) -> bool:
        a, b = self.support()
        return a == b


# -- Lyapunov exponent ----------------------------------------------------

def _lyap_values(Vs, E, backward=False):
    """log-norm growth of the cocycle for energies E (1d) and potential rows
    Vs (replicas x length).  Returns array (len(E), replicas)."""
    E = np.atleast_1d(np.asarray(E, dtype=float))[:, None]
    R, n = Vs.shape
    u = np.ones((E.shape[0], R))
    v = np.zeros((E.shape[0], R))
    acc = np.zeros((E.shape[0], R))
    cols = range(n - 1, -1, -1) if backward else range(n)
    for step, i in enumerate(cols):
        w = E - Vs[:, i][None, :]
        if backward:
            # inverse cocycle [[0, 1], [-1, E - V]] acting on (u_{n+1}, u_n)
            u, v = v, w * v - u
        else:
            u, v = w * u - v, u
        if (step + 1) % RENORM_EVERY == 0:
            nrm = np.hypot(u, v)
            acc += np.log(nrm)
            u /= nrm
            v /= nrm
    acc += np.log(np.hypot(u, v))
    return acc / (n + 1)


def lyapunov(ens: AndersonEnsemble, E, length: int = 100_000, replicas: int = 8,
             first: int = 0, backward: bool = False):
    """(rho, stderr) at E, averaging replicas r = first, ..., first+replicas-1."""
    if length < 1000:
        raise ConfigInvalid("length must be >= 1000", field="length")
    Vs = np.stack([ens.omega(first + r, length) for r in range(replicas)])
    vals = _lyap_values(Vs, E, backward)
    rho = vals.mean(axis=1)
    err = vals.std(axis=1, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(rho.shape, np.nan)
    if np.ndim(E) == 0:
        return float(rho[0]), float(err[0])
    return rho, err


def ids(ens: AndersonEnsemble, E, L: int = 20_000, replicas: int = 4, first: int = 0):
    """Integrated density of states by Sturm counts on boxes of L+1 sites."""
    if L < 1000:
        raise ConfigInvalid("L must be >= 1000", field="L")
    tot = 0
    for r in range(replicas):
        tot = tot + sturm_count(ens.omega(first + r, L + 1), E)
    N = tot / (replicas * (L + 1))
    return float(N[0]) if np.ndim(E) == 0 else N


@dataclass
class LyapunovCurve:
    grid: np.ndarray
    rho: np.ndarray
    n: np.ndarray
    N: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._rho = PchipInterpolator(self.grid, self.rho, extrapolate=False)
        self._N = PchipInterpolator(self.grid, self.N, extrapolate=False)
        self._n = PchipInterpolator(self.grid, self.n, extrapolate=False)

    def rho_at(self, E):
        return self._rho(E)

    def n_at(self, E):
        return np.maximum(self._n(E), 0.0)

    def N_at(self, E):
        return self._N(E)

    def integrate(self, f, I, pts: int = 400):
        """Integral over I of f(E, rho(E)) dN(E), using increments of N."""
        e = np.linspace(I[0], I[1], pts + 1)
        dN = np.diff(self._N(e))
        m = 0.5 * (e[1:] + e[:-1])
        return float(np.sum(f(m, self._rho(m)) * dN))

    def extremes(self, I, pts: int = 401):
        """(min, max) of rho over I; the two constants of the width window."""
        v = self._rho(np.linspace(I[0], I[1], pts))
        return float(np.nanmin(v)), float(np.nanmax(v))

    def total_mass(self):
        return float(trapezoid(self.n, self.grid))


def _grid(ens, step=1e-2, edge=0.05, fine=1e-3):
    lo, hi = ens.spectrum_hull()
    g = [np.arange(lo, hi + step / 2, step)]
    for x in (lo, hi, -2.0, 2.0):
        g.append(np.arange(x - edge, x + edge + fine / 2, fine))
    g = np.unique(np.round(np.concatenate(g), 12))
    return g[(g >= lo - 0.1) & (g <= hi + 0.1)]


def lyapunov_curve(ens: AndersonEnsemble, grid=None, length: int = 20_000, replicas: int = 8,
                   ids_L: int = 20_000, ids_replicas: int = 8, first: int = 10_000) -> LyapunovCurve:
    """rho, N and n on a grid.  Realizations first, first+1, ... are used so
    that the curve is independent of the samples it will be compared with."""
    grid = _grid(ens) if grid is None else np.asarray(grid, dtype=float)
    rho, err = lyapunov(ens, grid, length, replicas, first)
    N = ids(ens, grid, ids_L, ids_replicas, first + replicas)
    N = np.maximum.accumulate(N)
    # density by central differences of N over a fixed window; exact in mass
    h = 2e-2
    n = (ids(ens, grid + h / 2, ids_L, ids_replicas, first + replicas)
         - ids(ens, grid - h / 2, ids_L, ids_replicas, first + replicas)) / h
    meta = dict(length=length, replicas=replicas, ids_L=ids_L, ids_replicas=ids_replicas,
                stderr_max=float(np.nanmax(err)), first=first)
    return LyapunovCurve(grid, rho, np.maximum(n, 0.0), N, meta)


# -- localisation ------------------------------------------------------

class LocalizationReport(NamedTuple):
    centers: np.ndarray
    slope_left: np.ndarray
    slope_right: np.ndarray
    rho: np.ndarray
    within: np.ndarray
    fraction_within: float
    min_spacing: float
    minami_ok: bool


def _slope(d, y):
    if d.size < 8:
        return np.nan
    A = np.vstack([d, np.ones_like(d)]).T
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


def localization_diagnostics(spec: DirichletSpectrum, rho, delta: float = 0.2, window=None,
                             q: float = 4.0) -> LocalizationReport:
    """Decay slopes of log(|phi(x)| + |phi(x-1)|) away from each centre.

    `rho` is a callable E -> Lyapunov exponent (e.g. LyapunovCurve.rho_at).
    Slopes are fitted over |x - x_c| >= window (default delta * L).
    """
    if spec.L < 200:
        raise ConfigInvalid("localization diagnostics need L >= 200", field="L")
    lam = spec.lambdas
    P = eigenvector_logs(spec.V, lam, spec.center)
    # log(|phi(x)| + |phi(x-1)|), x = 1..L
    S = np.logaddexp(P[1:], P[:-1])
    x = np.arange(1, spec.n)
    w = delta * spec.L if window is None else window
    sl = np.full(lam.size, np.nan)
    sr = np.full(lam.size, np.nan)
    for j, c in enumerate(spec.center):
        d = x - c
        m = d <= -w
        sl[j] = _slope(-d[m], S[m, j])
        m = d >= w
        sr[j] = _slope(d[m], S[m, j])
    rh = np.asarray(rho(lam), dtype=float)
    okl = np.isnan(sl) | (np.abs(sl + rh) <= delta)
    okr = np.isnan(sr) | (np.abs(sr + rh) <= delta)
    within = okl & okr & ~(np.isnan(sl) & np.isnan(sr))
    msp = float(np.min(np.diff(lam))) if lam.size > 1 else np.inf
    return LocalizationReport(spec.center, sl, sr, rh, within, float(within.mean()),
                              msp, bool(msp >= spec.L ** (-q)))


# -- resonances -----------------------------------------------------------

def resonances_random(spec: DirichletSpectrum, geometry: str = "halfline", C: float = 64.0,
                      I=(-2.0, 2.0), certify_depth: Optional[float] = None):
    """One resonance per Dirichlet eigenvalue in I inside (-2, 2).

    Returns (resonances, valid) where valid[i] records whether the
    perturbative validity condition held for the eigenvalue behind
    resonances[i].  Widths are (sign, log) throughout.

    With certify_depth, the list is completed and checked against
    contour counts in I x [-certify_depth, 0); near the band edges a few
    eigenvalues have no resonance of their own and others share one.
    """
    cf = CharFunction(spec, geometry)
    out, flags = [], []
    lo, hi = max(I[0], -2.0), min(I[1], 2.0)
    for j in np.flatnonzero((spec.lambdas > lo) & (spec.lambdas < hi)):
        ok = validity(spec, j, geometry, C)
        r = newton_from_perturbative(cf, j)
        good = r is not None and r.residual < 1e-8 and np.isfinite(r.log_width) \
            and abs(r.energy.real - spec.lambdas[j]) < 0.5 and r.energy.imag <= 0
        if not good and ok:
            r, good = perturbative_resonance(spec, j, geometry, C, check=False), True
        if not good:
            r0 = perturbative_resonance(spec, j, geometry, C, check=False)
            E0 = r0.energy if r0.energy.imag < 0 else complex(spec.lambdas[j], -1e-3)
            try:
                r = polish(cf, E0, "polish")
            except (ZeroDivisionError, FloatingPointError, OverflowError):
                continue
            if not (r.residual < 1e-8 and r.energy.imag < 0
                    and abs(r.energy.real - spec.lambdas[j]) < 0.5):
                continue
        out.append(r)
        flags.append(bool(ok))
    # two eigenvalues can lead Newton to one root; keep the first
    keep, seen = [], []
    for r, f in zip(out, flags):
        if any(abs(r.energy.real - e.real) < 1e-12 and abs(r.log_width - lw) < 1e-9 for e, lw in seen):
            continue
        seen.append((r.energy, r.log_width))
        keep.append((r, f))
    res = [k[0] for k in keep]
    flags = [k[1] for k in keep]
    if certify_depth is not None:
        region = (lo, hi, -certify_depth, 0.05)
        inside = [r for r in res if r.energy.imag >= -certify_depth and lo <= r.energy.real <= hi]
        done = complete_in_region(cf, inside, region)
        old = {id(r): f for r, f in zip(res, flags)}
        res = sorted(done, key=lambda r: r.energy.real)
        flags = [old.get(id(r), False) for r in res]
    return res, np.array(flags, dtype=bool)


# -- rescaling ------------------------------------------------------------

class RescaledPoint(NamedTuple):
    x: float
    y: float
    realization: int
    scale: str  # "L" or "ell"


def eta(geometry: str) -> float:
    return 1.0 if geometry == "halfline" else 0.5


def default_ell(L: int) -> int:
    return int(math.ceil(math.log(L) ** 1.5))


def _check_ell(ell, L):
    if not (math.log(L) < ell < L):
        warnings.warn(f"ell={ell} is not between log L and L at L={L}", ScaleViolation)


def rescale(resonances: Sequence[Resonance], E0: float, L: int, eta_bullet: float,
            n0: float, rho0: float, realization: int = 0) -> List[RescaledPoint]:
    """x = n(E0) L (Re z - E0),  y = -log|Im z| / (2 eta rho(E0) L)."""
    if not n0 > 0:
        raise ConfigInvalid("n(E0) must be positive", field="E0")
    out = []
    for r in resonances:
        x = n0 * L * (r.energy.real - E0)
        y = -r.log_width / (2 * eta_bullet * rho0 * L)
        out.append(RescaledPoint(float(x), float(y), realization, "L"))
    return out


def rescale_deep(resonances, E0, L, eta_bullet, n0, rho0, ell=None, realization=0):
    """Same maps with the intermediate scale ell in place of L."""
    ell = default_ell(L) if ell is None else ell
    _check_ell(ell, L)
    if not n0 > 0:
        raise ConfigInvalid("n(E0) must be positive", field="E0")
    out = []
    for r in resonances:
        x = n0 * ell * (r.energy.real - E0)
        y = -r.log_width / (2 * eta_bullet * rho0 * ell)
        out.append(RescaledPoint(float(x), float(y), realization, "ell"))
    return out


# -- Xi -----------------------------------------------------------------

def _box(ens, r, L_aux):
    return dirichlet_eigen(ens.potential(r, L_aux, reversed=True), L_aux, with_b=False)


def xi_omega(ens: AndersonEnsemble, r: int, E, L_aux: int = 2000, c: float = 0.05,
             spec: Optional[DirichletSpectrum] = None) -> complex:
    """Xi(E) = int dN_omega/(lambda - E) + z(E), from a box of L_aux + 1 sites.

    The measure is the spectral measure at the Dirichlet end of the
    half-line operator with potential omega_0, omega_1, ...; the box uses
    the reversed potential so its last site carries omega_0.
    """
    E = complex(E)
    if E.imag >= -math.exp(-c * L_aux):
        raise ValidityZone(f"Im E={E.imag} too close to the axis for L_aux={L_aux}")
    if ens.degenerate() and ens.support()[0] == 0:
        return 0j
    spec = _box(ens, r, L_aux) if spec is None else spec
    w = np.exp(spec.aN)
    val = np.sum(w / (spec.lambdas - E))
    return complex(val + complex(free_z(E)))


def xi_zeros(ens: AndersonEnsemble, r: int, region, L_aux: int = 2000, certify: bool = True):
    """Zeros of Xi in region = (x0, x1, y0, y1) with y1 < 0.

    The finite-box Xi is the half-line characteristic function of the
    reversed box, so its zeros are the resonances of that box.
    """
    x0, x1, y0, y1 = region
    if y1 >= 0:
        raise ValidityZone("region must lie strictly below the real axis")
    if ens.degenerate() and ens.support()[0] == 0:
        return []
    spec = _box(ens, r, L_aux)
    res, _ = resonances_random(spec, "halfline", I=(x0, x1))
    inside = [z for z in res if x0 <= z.energy.real <= x1 and y0 <= z.energy.imag <= y1]
    if certify:
        cf = CharFunction(spec, "halfline")
        inside = complete_in_region(cf, inside, region)
    return sorted(inside, key=lambda z: (z.energy.real, z.energy.imag))


class Pairing(NamedTuple):
    L: int
    pairs: list       # (xi zero, resonance, distance)
    unmatched_xi: int
    unmatched_res: int
    max_distance: float


def pair_zeros(zeros: Sequence[Resonance], resonances: Sequence[Resonance], L: int) -> Pairing:
    """Greedy nearest-neighbour matching, accepted only if mutual."""
    Z = np.array([z.energy for z in zeros])
    R = np.array([z.energy for z in resonances])
    pairs = []
    if Z.size and R.size:
        D = np.abs(Z[:, None] - R[None, :])
        for i in range(Z.size):
            k = int(np.argmin(D[i]))
            if int(np.argmin(D[:, k])) == i:
                pairs.append((complex(Z[i]), complex(R[k]), float(D[i, k])))
    md = max((p[2] for p in pairs), default=0.0)
    return Pairing(L, pairs, Z.size - len(pairs), R.size - len(pairs), md)


def deep_resonances(ens: AndersonEnsemble, r: int, L: int, region, certify=True):
    """Resonances of the reversed-potential half-line box inside region."""
    spec = dirichlet_eigen(ens.potential(r, L, reversed=True), L, with_b=False)
    x0, x1, y0, y1 = region
    res, _ = resonances_random(spec, "halfline", I=(x0, x1))
    inside = [z for z in res if x0 <= z.energy.real <= x1 and y0 <= z.energy.imag <= y1]
    if certify:
        inside = complete_in_region(CharFunction(spec, "halfline"), inside, region)
    return inside
