"""Polynomial kernels: Taylor shifts, real-root isolation, |P|^p quadrature.

Coefficients are always in the local monomial basis c[0] + c[1] t + ...
Arrays of shape (m, d+1) hold m polynomials at once.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import QuadratureNonConvergence

GL_ORDER = 16
DEPTH_CAP = 60
ZERO_COEFF_RTOL = 1e-11
# a zero within 1e-9 of a cell end (in cell units) is treated as at the end
CLUSTER_RTOL = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_WT = 0.5 * _GL_W


def horner(c: np.ndarray, t):
    """Evaluate polynomial(s) with coefficients on the last axis at t."""
    c = np.asarray(c, dtype=float)
    out = np.zeros(np.broadcast_shapes(c.shape[:-1], np.shape(t)))
    for k in range(c.shape[-1] - 1, -1, -1):
        out = out * t + c[..., k]
    return out


def taylor_shift(c: np.ndarray, s) -> np.ndarray:
    """Coefficients of P(s + t) given those of P(t); vectorised over rows."""
    out = np.array(c, dtype=float, copy=True)
    s = np.asarray(s, dtype=float)
    if out.ndim == 2:
        s = s.reshape(-1, 1) if s.ndim else s
    d = out.shape[-1] - 1
    for i in range(d):
        for k in range(d - 1, i - 1, -1):
            if out.ndim == 2:
                out[:, k] += s[:, 0] * out[:, k + 1] if s.ndim else s * out[:, k + 1]
            else:
                out[k] += s * out[k + 1]
    return out


def scale_var(c: np.ndarray, w) -> np.ndarray:
    """Coefficients of P(w t)."""
    c = np.asarray(c, dtype=float)
    d = c.shape[-1]
    powers = np.power.outer(np.asarray(w, dtype=float), np.arange(d))
    return c * powers


def deriv_coeffs(c: np.ndarray, n: int = 1) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    d = c.shape[-1]
    if n >= d:
        return np.zeros(c.shape[:-1] + (1,))
    k = np.arange(n, d)
    fall = np.ones(d - n)
    for i in range(n):
        fall = fall * (k - i)
    return c[..., n:] * fall


def antideriv_coeffs(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    d = c.shape[-1]
    out = np.zeros(c.shape[:-1] + (d + 1,))
    out[..., 1:] = c / np.arange(1, d + 1)
    return out


def trim(c: np.ndarray) -> np.ndarray:
    """Drop trailing zero columns (keeps at least one)."""
    c = np.asarray(c, dtype=float)
    d = c.shape[-1]
    while d > 1 and not np.any(c[..., d - 1]):
        d -= 1
    return c[..., :d]


# -- root isolation -----------------------------------------------------


def _strip_low(b: np.ndarray) -> tuple[np.ndarray, int]:
    """Remove numerically-zero low coefficients; returns (rest, multiplicity)."""
    scale = float(np.sum(np.abs(b)))
    if scale == 0.0:
        return b, len(b)
    m = 0
    while m < len(b) - 1 and (
        abs(b[m]) <= ZERO_COEFF_RTOL * scale or abs(b[m]) <= CLUSTER_RTOL * abs(b[m + 1])
    ):
        m += 1
    return b[m:], m


def _deflate_at_one(b: np.ndarray) -> np.ndarray:
    """Divide out factors (t - 1) while Q(1) is numerically zero."""
    while len(b) > 1:
        scale = float(np.sum(np.abs(b)))
        if abs(float(np.sum(b))) > ZERO_COEFF_RTOL * scale:
            break
        d = len(b) - 1
        s = np.zeros(d)
        s[d - 1] = b[d]
        for k in range(d - 1, 0, -1):
            s[k - 1] = b[k] + s[k]
        b = s
    return b


def _no_root(b: np.ndarray) -> bool:
    """Coefficient-sign bound: True when P has no zero on [0, 1]."""
    b0 = b[0]
    if abs(b0) > float(np.sum(np.abs(b[1:]))):
        return True
    if b0 != 0.0:
        nz = b[1:][b[1:] != 0.0]
        if nz.size == 0 or np.all(np.sign(nz) == np.sign(b0)):
            return True
    return False


def unit_roots(c: np.ndarray, width: float) -> list[float]:
    """Zeros of P(x) = sum c_j x^j on the open interval (0, width).

    Works on Q(s) = P(width s) over [0, 1] by recursive bisection.  Each
    cell is deflated at numerically-zero endpoints, discarded by a
    coefficient-sign bound, or, when the derivative provably keeps its sign,
    resolved to one simple root by bisection and a guarded Newton step.
    Clusters that reach the depth cap are reported by their midpoint.
    """
    q = trim(scale_var(c, width))
    if q.shape[-1] <= 1:
        return []
    roots: list[float] = []
    stack = [(0.0, 1.0, 0)]
    while stack:
        u, v, depth = stack.pop()
        w = v - u
        b = scale_var(taylor_shift(q, u), w)
        b, m0 = _strip_low(b)
        if m0 and u > 0.0:
            roots.append(u)
        b = _deflate_at_one(b)
        if len(b) <= 1 or _no_root(b):
            continue
        if _no_root(deriv_coeffs(b)):
            lo_val, hi_val = b[0], float(np.sum(b))
            if np.sign(lo_val) != np.sign(hi_val):
                roots.append(u + w * float(_refine(b, 0.0, 1.0)))
            continue
        if depth >= DEPTH_CAP:
            roots.append(0.5 * (u + v))
            continue
        mid = 0.5 * (u + v)
        stack.append((mid, v, depth + 1))
        stack.append((u, mid, depth + 1))
    out = sorted(r * width for r in roots if 0.0 < r < 1.0)
    merged: list[float] = []
    for r in out:
        if not merged or r - merged[-1] > 1e-14 * width:
            merged.append(r)
    return merged


def _refine(b: np.ndarray, lo: float, hi: float) -> float:
    flo = horner(b, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = horner(b, mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    db = deriv_coeffs(b)
    for _ in range(2):
        d = horner(db, x)
        if d == 0.0:
            break
        nx = x - horner(b, x) / d
        if lo <= nx <= hi:
            x = nx
    return x


# -- quadrature of |P|^p -------------------------------------------------


@lru_cache(maxsize=256)
def _jacobi_rule(alpha_key: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for int_0^1 t^alpha g(t) dt."""
    x, w = roots_jacobi(GL_ORDER, 0.0, alpha_key)
    t = 0.5 * (x + 1.0)
    return t, w * 2.0 ** (-(1.0 + alpha_key))


def _gl(c, a, b, p):
    t = a + (b - a) * _GL_T
    return (b - a) * float(np.dot(_GL_WT, np.abs(horner(c, t)) ** p))


def _gj_left(r, mult, a, w, p):
    """int_a^{a+w} |(x-a)^mult R(x-a)|^p dx with R nonvanishing on [0, w]."""
    alpha = mult * p
    t, wt = _jacobi_rule(round(alpha, 14))
    vals = np.abs(horner(r, w * t)) ** p
    return w ** (1.0 + alpha) * float(np.dot(wt, vals))


def integrate_abs_pow(c: np.ndarray, h: float, p: float, rtol: float = 1e-10) -> float:
    """int_0^h |P(x)|^p dx for one polynomial piece.

    The interval is split at the zeros of P and each gap is halved, giving
    cells anchored at a zero.  A cell is rescaled to [0, 1]; an anchored
    zero of multiplicity m is divided out and integrated with a 16-point
    Gauss-Jacobi rule carrying the weight s^{m p}, the rest with 16-point
    Gauss-Legendre.  Adaptive halving stops once the correction falls below
    the cell's share of the absolute tolerance (depth cap 60).
    """
    c = trim(np.asarray(c, dtype=float))
    if not np.any(c):
        return 0.0
    if c.shape[-1] == 1:
        return h * abs(c[0]) ** p
    cuts = [0.0] + unit_roots(c, h) + [h]
    cells = []
    for u, v in zip(cuts[:-1], cuts[1:]):
        if v - u <= 0.0:
            continue
        half = 0.5 * (v - u)
        for base, sign in ((u, 1.0), (v, -1.0)):
            # Q(s) = P(base + sign * half * s), s in [0, 1]
            q = scale_var(taylor_shift(c, base), sign * half)
            rest, mult = _strip_low(q)
            cells.append((half, q, rest, mult))
    coarse = math.fsum(w * _cell_estimate(q, rest, mult, p) for w, q, rest, mult in cells)
    if coarse == 0.0:
        return 0.0
    density = rtol * coarse / h
    return math.fsum(w * _adaptive_cell(q, rest, mult, p, density) for w, q, rest, mult in cells)


def _cell_estimate(q, rest, mult, p):
    if mult:
        return _gj_left(rest, mult, 0.0, 1.0, p)
    return _gl(q, 0.0, 1.0, p)


def _adaptive_cell(q, rest, mult, p, density):
    """int_0^1 |Q|^p; tolerance density is per unit length of s."""
    if not mult:
        return _adaptive_gl(q, 0.0, 1.0, p, density, 0)
    # [0, x] keeps the Jacobi weight, [x/2, x] is peeled off as a regular cell
    parts: list[float] = []
    x = 1.0
    whole = _gj_left(rest, mult, 0.0, x, p)
    for depth in range(DEPTH_CAP + 1):
        half = 0.5 * x
        left = _gj_left(rest, mult, 0.0, half, p)
        right = _gl(q, half, x, p)
        if abs(whole - (left + right)) <= max(density * x, 1e-15 * abs(left + right)):
            parts += [left, right]
            return math.fsum(parts)
        # stripped low coefficients leave a floor |Q| <= sum |q_j| x^j on [0, x];
        # once its whole contribution is below half the cell budget, stop
        if x * float(np.dot(np.abs(q), x ** np.arange(len(q)))) ** p <= 0.5 * density:
            parts.append(whole)
            return math.fsum(parts)
        parts.append(_adaptive_gl(q, half, x, p, density, depth + 1))
        x, whole = half, left
    raise QuadratureNonConvergence("root-anchored cell did not converge")


def _adaptive_gl(c, a, b, p, density, depth0):
    total = []
    stack = [(a, b, _gl(c, a, b, p), depth0)]
    while stack:
        u, v, whole, depth = stack.pop()
        mid = 0.5 * (u + v)
        left = _gl(c, u, mid, p)
        right = _gl(c, mid, v, p)
        if abs(whole - (left + right)) <= max(density * (v - u), 1e-15 * abs(left + right)):
            total.append(left + right)
            continue
        if depth >= DEPTH_CAP:
            raise QuadratureNonConvergence(f"adaptive quadrature exceeded depth {DEPTH_CAP}")
        stack.append((mid, v, right, depth + 1))
        stack.append((u, mid, left, depth + 1))
    return math.fsum(total)
