"""Counting statistics for rescaled resonances and simple decay fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .errors import ConfigInvalid, TooFewRealizations


class Box(NamedTuple):
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x, y):
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)


def _disjoint(a: Box, b: Box) -> bool:
    return a.x1 <= b.x0 or b.x1 <= a.x0 or a.y1 <= b.y0 or b.y1 <= a.y0


@dataclass
class BoxCountExperiment:
    boxes: List[Box]
    counts: np.ndarray  # realizations x boxes
    mu: np.ndarray

    @property
    def realizations(self) -> int:
        return self.counts.shape[0]


def box_counts(points, boxes: Sequence, intensity: float = 1.0) -> BoxCountExperiment:
    """Count points per box per realization.

    `points` is a list (one entry per realization) of sequences of objects
    with .x and .y (RescaledPoint) or (x, y) pairs.
    """
    boxes = [Box(*map(float, b)) for b in boxes]
    for i in range(len(boxes)):
        if boxes[i].x1 <= boxes[i].x0 or boxes[i].y1 <= boxes[i].y0:
            raise ConfigInvalid(f"box {i} is empty", field="boxes")
        for k in range(i):
            if not _disjoint(boxes[i], boxes[k]):
                raise ConfigInvalid(f"boxes {k} and {i} overlap", field="boxes")
    C = np.zeros((len(points), len(boxes)), dtype=np.int64)
    for r, pts in enumerate(points):
        if len(pts) == 0:
            continue
        xy = np.array([(p.x, p.y) if hasattr(p, "x") else (p[0], p[1]) for p in pts], dtype=float)
        for b, box in enumerate(boxes):
            C[r, b] = int(np.count_nonzero(box.contains(xy[:, 0], xy[:, 1])))
    mu = np.array([intensity * b.area for b in boxes])
    return BoxCountExperiment(boxes, C, mu)


def chi2_poisson(samples, mu, min_expected: float = 5.0):
    """Chi-square statistic, degrees of freedom and p-value of integer
    samples against Poisson(mu), merging adjacent bins until every
    expected count is at least min_expected (the tail bin is open)."""
    x = np.asarray(samples, dtype=np.int64)
    n = x.size
    kmax = int(max(x.max() if n else 0, sps.poisson.ppf(1 - 1e-12, mu))) + 1
    probs = sps.poisson.pmf(np.arange(kmax + 1), mu)
    probs[-1] = sps.poisson.sf(kmax - 1, mu)  # open tail
    obs = np.bincount(np.minimum(x, kmax), minlength=kmax + 1).astype(float)
    # merge left to right, then fold a short final bin into its neighbour
    E, O = [], []
    e = o = 0.0
    for p, c in zip(probs * n, obs):
        e += p
        o += c
        if e >= min_expected:
            E.append(e)
            O.append(o)
            e = o = 0.0
    if e > 0:
        if E:
            E[-1] += e
            O[-1] += o
        else:
            E.append(e)
            O.append(o)
    E = np.array(E)
    O = np.array(O)
    if E.size < 2:
        return 0.0, 0, 1.0
    stat = float(np.sum((O - E) ** 2 / E))
    dof = E.size - 1
    return stat, dof, float(sps.chi2.sf(stat, dof))


class BoxStat(NamedTuple):
    mu: float
    mean: float
    variance: float
    mean_z: float
    chi2: float
    dof: int
    pvalue: float


class GofReport(NamedTuple):
    boxes: List[BoxStat]
    chi2: float
    dof: int
    pvalue: float
    rejected: bool
    means_ok: bool
    max_cov_z: float
    factorization_ok: bool

    def rows(self):
        for i, b in enumerate(self.boxes):
            yield [i, b.mu, b.mean, b.variance, b.mean_z, b.chi2, b.dof, b.pvalue]


GOF_COLUMNS = ["box", "mu", "mean", "variance", "mean_z", "chi2", "dof", "pvalue"]


def poisson_gof(exp: BoxCountExperiment, alpha: float = 0.01, min_realizations: int = 100,
                mu=None) -> GofReport:
    """Per-box chi-square tests against Poisson(mu_n), combined by adding
    the statistics (boxes are disjoint, hence independent in the limit).

    The covariance check between boxes is only a consistency check: a
    non-significant covariance does not prove independence.
    """
    R = exp.realizations
    if R < min_realizations:
        raise TooFewRealizations(f"{R} realizations, need at least {min_realizations}")
    mu = exp.mu if mu is None else np.asarray(mu, dtype=float)
    C = exp.counts
    out = []
    tot = 0.0
    dof = 0
    for b in range(C.shape[1]):
        m = float(C[:, b].mean())
        v = float(C[:, b].var(ddof=1)) if R > 1 else 0.0
        z = (m - mu[b]) / math.sqrt(mu[b] / R) if mu[b] > 0 else 0.0
        s, d, p = chi2_poisson(C[:, b], mu[b])
        out.append(BoxStat(float(mu[b]), m, v, float(z), s, d, p))
        tot += s
        dof += d
    pval = float(sps.chi2.sf(tot, dof)) if dof else 1.0
    # pairwise covariance z-scores
    zmax = 0.0
    B = C.shape[1]
    if B > 1 and R > 2:
        X = C - C.mean(axis=0)
        for i in range(B):
            for k in range(i):
                prod = X[:, i] * X[:, k]
                se = prod.std(ddof=1) / math.sqrt(R)
                if se > 0:
                    zmax = max(zmax, abs(prod.mean()) / se)
    means_ok = all(abs(b.mean_z) <= 3 for b in out)
    return GofReport(out, tot, dof, pval, bool(pval < alpha), means_ok, float(zmax),
                     bool(zmax <= 3))


def decay_fit(samples) -> tuple:
    """Least-squares line through (L, log_width) pairs: (slope, intercept, r2)."""
    s = sorted((float(a), float(b)) for a, b in samples)
    L = np.array([a for a, _ in s])
    y = np.array([b for _, b in s])
    if np.unique(L).size < 4:
        raise ConfigInvalid("decay_fit needs at least 4 distinct L", field="samples")
    A = np.vstack([L, np.ones_like(L)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * L + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def spacing_histogram(values, bins=20, range_=(0.0, 4.0)):
    """Histogram of nearest-neighbour spacings normalised to mean 1."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size < 3:
        return np.zeros(bins), np.linspace(*range_, bins + 1)
    s = np.diff(v)
    s = s / s.mean()
    h, e = np.histogram(s, bins=bins, range=range_, density=True)
    return h, e
