"""Complex-energy arithmetic shared by every other module.

The free operator is (H0 u)(n) = u(n+1) + u(n-1).  Its resolvent is
continued from the upper half-plane through (-2, 2); the continuation is
tracked through z = exp(-i theta(E)), the root of z**2 - E z + 1 = 0 with
positive imaginary part.  |z| > 1 above the real axis, |z| < 1 below.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import BranchCut, OutOfDomain

TOL = 1e-12
CUT_TOL = 1e-14


class ThetaValue(NamedTuple):
    theta: complex
    z: complex
    sheet: str  # "physical" (Im E >= 0) or "second" (continued, Im E < 0)


def free_z(E):
    """z(E) = exp(-i theta(E)), vectorised, no branch-cut checks.

    The larger root is formed first and the smaller one as its inverse so
    that neither loses digits to cancellation when |E| is large.
    """
    E = np.asarray(E, dtype=complex)
    s = np.sqrt(E * E / 4.0 - 1.0)
    # pick the sign of s that makes |E/2 + s| >= 1
    flip = (s.real * E.real + s.imag * E.imag) < 0
    s = np.where(flip, -s, s)
    big = E / 2.0 + s
    small = 1.0 / big
    return np.where(big.imag > 0, big, small)


def dz_dE(z):
    """Derivative of z(E), from 2 z z' - z - E z' = 0."""
    z = np.asarray(z, dtype=complex)
    return z * z / (z * z - 1.0)


def on_cut(E, tol: float = CUT_TOL) -> bool:
    E = complex(E)
    return abs(E.imag) <= tol and abs(E.real) >= 2.0 - tol


def theta(E) -> ThetaValue:
    """The determination of arccos(E/2) used throughout.

    Im theta > 0 and Re theta in (-pi, 0) for Im E > 0; continued
    analytically through (-2, 2) into the lower half-plane.
    """
    E = complex(E)
    if on_cut(E):
        raise BranchCut(f"E={E} lies on (-inf,-2] U [2,inf)")
    z = complex(free_z(E))
    th = 1j * np.log(z)
    sheet = "physical" if E.imag >= 0 else "second"
    return ThetaValue(complex(th), z, sheet)


def exp_minus_i_theta(E):
    """e^{-i theta(E)}; same branch as E/2 + sqrt((E/2)^2 - 1) with the
    root chosen so that the result has positive imaginary part."""
    return free_z(E)


def cot_inverse(w) -> complex:
    """Inverse of cot mapping C+ minus {i} onto [0, pi) x (-inf, 0)."""
    w = complex(w)
    if w.imag <= 0:
        raise OutOfDomain(f"Im w must be > 0, got {w}")
    if abs(w - 1j) < 1e-14:
        raise OutOfDomain("w = i is the logarithmic singularity of cot^-1")
    # t = (w+i)/(w-i) = 1 + 2i/(w-i); log1p keeps digits when |w| is large
    lt = np.log1p(2j / (w - 1j))
    arg = lt.imag
    if arg < 0:
        arg += 2 * np.pi
    re = arg / 2.0
    if re >= np.pi:  # pi - tiny rounds up; cot has period pi
        re -= np.pi
    return complex(re, -lt.real / 2.0)


def cot(u):
    return np.cos(u) / np.sin(u)


def free_resolvent_entry(n: int, m: int, E) -> complex:
    """<delta_n, (H0 - E)^-1 delta_m> on l^2(Z), continued to the cut plane."""
    tv = theta(E)
    einv = 1.0 / tv.z  # e^{i theta}
    return complex(einv ** abs(n - m) / (einv - tv.z))


def free_halfline_kernel(n, j, E):
    """Kernel of the Dirichlet half-line free resolvent (Dirichlet at -1)."""
    tv = theta(E)
    einv = 1.0 / tv.z
    n = np.asarray(n)
    j = np.asarray(j)
    return (einv ** np.abs(n - j) - einv ** (n + j + 2)) / (einv - tv.z)


def free_halfline_apply(v, E, window: int) -> np.ndarray:
    """R0^N(E) v on sites 0..window-1 for a finitely supported v.

    Uses the image-charge form of the kernel, which is algebraically the
    sine-sum formula but does not cancel growing exponentials.
    """
    v = np.asarray(v, dtype=complex)
    n = np.arange(window)[:, None]
    j = np.arange(v.size)[None, :]
    return free_halfline_kernel(n, j, E) @ v


def free_halfline_apply_sines(v, E, window: int) -> np.ndarray:
    """Same operator written with the explicit sine sums.

    Only reliable for small windows; kept as an independent check.
    """
    tv = theta(E)
    th = tv.theta
    v = np.asarray(v, dtype=complex)
    out = np.zeros(window, dtype=complex)
    s = np.sin(th)
    tail = np.sum(np.exp(1j * np.arange(v.size) * th) * v)
    for n in range(window):
        j = np.arange(min(n + 1, v.size))
        out[n] = np.sum(v[j] * np.sin((n - j) * th)) / s
        out[n] -= np.exp(1j * th) * np.sin((n + 1) * th) / s * tail
    return out


# signed log-scale numbers: (sign, log|x|)

def slog(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sign(x), np.log(np.abs(x))


def slog_exp(sign, logabs):
    return np.asarray(sign) * np.exp(logabs)


def logsumexp_signed(signs, logs):
    """log|sum s_i e^{l_i}| and its sign, skipping zero entries."""
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    keep = signs != 0
    if not keep.any():
        return 0.0, -np.inf
    m = logs[keep].max()
    tot = float(np.sum(signs[keep] * np.exp(logs[keep] - m)))
    if tot == 0:
        return 0.0, -np.inf
    return float(np.sign(tot)), m + np.log(abs(tot))
