"""Dirichlet spectral data of H_L = Delta + V on the sites 0..L.

Eigenvalues come from Sturm-sequence bisection.  Boundary values of the
normalised eigenvectors are kept as (sign, log|.|) pairs because in the
localised regime they go far below the double-precision range.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .core import logsumexp_signed
from .errors import ConfigInvalid, DegenerateSpacing

EIG_TOL = 1e-13
_RESCALE = 1e150


@dataclass(frozen=True)
class PotentialSpec:
    """Either a p-periodic table or an Anderson ensemble member.

    Anderson values are the prefix of one PCG64 stream, so a given seed
    describes the same random sequence for every box size.
    """
    kind: str
    values: tuple = ()
    seed: int = 0
    law: tuple = ("uniform", 0.0, 1.0)

    def __post_init__(self):
        if self.kind == "periodic":
            if len(self.values) < 1:
                raise ConfigInvalid("periodic potential needs p >= 1 values", field="values")
        elif self.kind == "anderson":
            name = self.law[0]
            if name == "uniform":
                if not (len(self.law) == 3 and self.law[1] < self.law[2]):
                    raise ConfigInvalid("uniform law needs a < b", field="law")
            elif name != "degenerate":
                raise ConfigInvalid(f"unknown law {name!r}", field="law")
        else:
            raise ConfigInvalid(f"unknown potential kind {self.kind!r}", field="kind")

    @classmethod
    def periodic(cls, values: Sequence[float]) -> "PotentialSpec":
        return cls("periodic", tuple(float(v) for v in values))

    @classmethod
    def anderson(cls, seed: int, law=("uniform", 0.0, 1.0)) -> "PotentialSpec":
        return cls("anderson", (), int(seed), tuple(law))

    @property
    def p(self) -> int:
        return len(self.values)

    def on_box(self, L: int) -> np.ndarray:
        """V(0), ..., V(L)."""
        n = L + 1
        if self.kind == "periodic":
            return np.asarray(self.values, dtype=float)[np.arange(n) % self.p]
        if self.law[0] == "degenerate":
            return np.full(n, float(self.law[1]))
        rng = np.random.Generator(np.random.PCG64(self.seed))
        a, b = self.law[1], self.law[2]
        return a + (b - a) * rng.random(n)

    def law_support(self):
        if self.law[0] == "degenerate":
            return float(self.law[1]), float(self.law[1])
        return float(self.law[1]), float(self.law[2])


@dataclass
class DirichletSpectrum:
    L: int
    V: np.ndarray
    lambdas: np.ndarray
    sign_phi0: np.ndarray
    log_phi0: np.ndarray
    sign_phiL: np.ndarray
    log_phiL: np.ndarray
    aN: np.ndarray  # log a_j^N = 2 log|phi_j(L)|
    aZ: np.ndarray  # log a_j^Z, a^Z = (phi_j(0)^2 + phi_j(L)^2) / 2
    d: np.ndarray
    center: np.ndarray
    b: Optional[np.ndarray] = None
    sign_b: Optional[np.ndarray] = None
    log_b: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.L + 1

    def weights(self, geometry="halfline"):
        return np.exp(self.aN if geometry == "halfline" else self.aZ)

    def phi0(self):
        return self.sign_phi0 * np.exp(self.log_phi0)

    def phiL(self):
        return self.sign_phiL * np.exp(self.log_phiL)

    def rows(self):
        if self.b is None:
            b_coefficients(self)
        for j in range(self.n):
            yield [j, self.lambdas[j], self.aN[j], self.aZ[j],
                   int(self.sign_phi0[j]), self.log_phi0[j],
                   int(self.sign_phiL[j]), self.log_phiL[j], self.b[j], self.d[j]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "lambda", "log_aN", "log_aZ", "sign_phi0", "log_phi0",
                        "sign_phiL", "log_phiL", "b", "d"])
            for r in self.rows():
                w.writerow([fmt(x) for x in r])


def fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(f"{float(x):.17g}")) if np.isfinite(x) else str(float(x))


def jacobi_matrix(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    n = V.size
    return np.diag(V) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)


def sturm_count(V, t):
    """Number of eigenvalues of the Jacobi matrix strictly below each t."""
    V = np.asarray(V, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cnt = np.zeros(t.shape, dtype=np.int64)
    q = V[0] - t
    tiny = 1e-300
    for i in range(V.size):
        if i:
            q = (V[i] - t) - 1.0 / q
        q = np.where(q == 0.0, -tiny, q)
        cnt += q < 0
    return cnt


def sturm_eigenvalues(V, tol: float = EIG_TOL, maxit: int = 200) -> np.ndarray:
    """All eigenvalues by simultaneous bisection on the Sturm count."""
    V = np.asarray(V, dtype=float)
    n = V.size
    lo = np.full(n, V.min() - 2.0 - 1e-9)
    hi = np.full(n, V.max() + 2.0 + 1e-9)
    k = np.arange(n)
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        c = sturm_count(V, mid)
        # c > k means eigenvalue k lies below mid
        below = c > k
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        if np.all(hi - lo <= tol):
            break
    return 0.5 * (lo + hi)


def _shoot(V, lam, reverse=False):
    """Solve (H - lam) u = 0 with one Dirichlet end, for a vector of lam.

    Returns log|u(n)| and sign u(n) for every site, shape (sites, lams).
    u is 1 at the starting site and 0 just outside it.
    """
    V = np.asarray(V, dtype=float)
    if reverse:
        V = V[::-1]
    n = V.size
    m = lam.size
    logs = np.empty((n, m))
    sg = np.empty((n, m))
    prev = np.zeros(m)
    cur = np.ones(m)
    off = np.zeros(m)
    with np.errstate(divide="ignore"):
        for i in range(n):
            logs[i] = np.log(np.abs(cur)) + off
            sg[i] = np.sign(cur)
            nxt = (lam - V[i]) * cur - prev
            prev, cur = cur, nxt
            big = np.abs(cur) > _RESCALE
            if big.any():
                s = np.where(big, 1.0 / _RESCALE, 1.0)
                cur = cur * s
                prev = prev * s
                off = off + np.where(big, np.log(_RESCALE), 0.0)
    if reverse:
        logs = logs[::-1]
        sg = sg[::-1]
    return logs, sg


def inverse_iteration(V, lam, iters: int = 2, seed: int = 12345):
    """Normalised eigenvector for eigenvalue lam by shifted solves."""
    V = np.asarray(V, dtype=float)
    n = V.size
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(n)
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0
    ab[2, :-1] = 1.0
    for k in range(8):
        # an exactly singular shift is possible; move it off a little more
        shift = lam + 1e-15 * 10.0 ** k * max(1.0, abs(lam))
        ab[1] = V - shift
        try:
            y = x
            for _ in range(iters):
                y = solve_banded((1, 1), ab, y)
                y /= np.linalg.norm(y)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(y)):
            x = y
            break
    i = int(np.argmax(np.abs(x)))
    return x * np.sign(x[i])


def _center(x, rel=1e-9):
    ax = np.abs(x)
    return int(np.flatnonzero(ax >= ax.max() * (1 - rel))[0])


def boundary_values(V, lambdas):
    """Signed log-scale phi_j(0), phi_j(L) for each eigenvalue, plus centres."""
    V = np.asarray(V, dtype=float)
    n = V.size
    lambdas = np.asarray(lambdas, dtype=float)
    centers = np.array([_center(inverse_iteration(V, lam)) for lam in lambdas])
    lf, sf = _shoot(V, lambdas)
    lb, sb = _shoot(V, lambdas, reverse=True)
    idx = np.arange(n)[:, None]
    c = centers[None, :]
    cols = np.arange(lambdas.size)
    lf_c = lf[centers, cols]
    lb_c = lb[centers, cols]
    with np.errstate(over="ignore", invalid="ignore"):
        left = np.where(idx <= c, np.exp(2 * (lf - lf_c)), 0.0)
        right = np.where(idx > c, np.exp(2 * (lb - lb_c)), 0.0)
    tot = left.sum(axis=0) + right.sum(axis=0)
    log_phic = -0.5 * np.log(tot)
    log_phi0 = log_phic - lf_c
    log_phiL = log_phic - lb_c
    sign_phi0 = sf[centers, cols]
    sign_phiL = sb[centers, cols]
    return sign_phi0, log_phi0, sign_phiL, log_phiL, centers


def eigenvector_logs(V, lambdas, centers=None):
    """log|phi_j(x)| on every site, shape (sites, eigenvalues).

    Each side of the centre comes from shooting inward from its Dirichlet
    end, the direction in which the solution grows, so the tails are
    accurate far below the double-precision floor.
    """
    V = np.asarray(V, dtype=float)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if centers is None:
        centers = np.array([_center(inverse_iteration(V, lam)) for lam in lambdas])
    lf, _ = _shoot(V, lambdas)
    lb, _ = _shoot(V, lambdas, reverse=True)
    cols = np.arange(lambdas.size)
    idx = np.arange(V.size)[:, None]
    c = np.asarray(centers)[None, :]
    prof = np.where(idx <= c, lf - lf[centers, cols], lb - lb[centers, cols])
    with np.errstate(under="ignore"):
        norm = 0.5 * np.log(np.sum(np.exp(2 * prof), axis=0))
    return prof - norm


def spacings(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas)
    d = np.ones(lam.size)
    if lam.size > 1:
        gaps = np.diff(lam)
        d[:-1] = np.minimum(d[:-1], gaps)
        d[1:] = np.minimum(d[1:], gaps)
    return d


def dirichlet_eigen(pot, L: int, with_b: bool = True) -> DirichletSpectrum:
    """Spectral data of the restriction of H to the sites 0..L.

    `pot` is a PotentialSpec or an explicit array of L+1 values.
    """
    if L < 0:
        raise ConfigInvalid("L must be >= 0", field="L")
    V = pot.on_box(L) if isinstance(pot, PotentialSpec) else np.asarray(pot, dtype=float)
    if V.size != L + 1:
        raise ConfigInvalid(f"expected {L + 1} potential values, got {V.size}", field="V")
    lam = sturm_eigenvalues(V)
    if lam.size > 1 and np.min(np.diff(lam)) < 1e-14:
        raise DegenerateSpacing("two Dirichlet eigenvalues coincide; Jacobi spectra are simple")
    s0, l0, sL, lL, centers = boundary_values(V, lam)
    aN = 2 * lL
    aZ = np.logaddexp(2 * l0, 2 * lL) - np.log(2.0)
    spec = DirichletSpectrum(L, V, lam, s0, l0, sL, lL, aN, aZ, spacings(lam), centers)
    if with_b:
        b_coefficients(spec)
    return spec


def b_coefficients(spec: DirichletSpectrum) -> np.ndarray:
    """b_j = sum_{j' != j} D_{jj'}^2 / (lambda_j' - lambda_j) with
    D_{jj'} = phi_j(0) phi_j'(L) - phi_j'(0) phi_j(L).

    These are the residues of det Gamma_L(E) at the eigenvalues.
    """
    n = spec.n
    lam = spec.lambdas
    if n == 1:
        spec.b = np.zeros(1)
        spec.sign_b = np.zeros(1)
        spec.log_b = np.full(1, -np.inf)
        return spec.b
    # log of the two products in D, all pairs
    l1 = spec.log_phi0[:, None] + spec.log_phiL[None, :]
    s1 = spec.sign_phi0[:, None] * spec.sign_phiL[None, :]
    l2 = l1.T
    s2 = s1.T
    # D = s1 e^l1 - s2 e^l2
    m = np.maximum(l1, l2)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = s1 * np.exp(l1 - m) - s2 * np.exp(l2 - m)
        logD2 = 2 * (m + np.log(np.abs(val)))
        gap = lam[None, :] - lam[:, None]
        np.fill_diagonal(gap, 1.0)
        terms_log = logD2 - np.log(np.abs(gap))
    terms_sign = np.sign(gap) * (val != 0)
    np.fill_diagonal(terms_sign, 0.0)
    sign_b = np.zeros(n)
    log_b = np.full(n, -np.inf)
    for j in range(n):
        sign_b[j], log_b[j] = logsumexp_signed(terms_sign[j], terms_log[j])
    spec.sign_b = sign_b
    spec.log_b = log_b
    spec.b = sign_b * np.exp(log_b)
    return spec.b
