"""Compactly supported piecewise polynomials and finite atomic measures.

Each piece stores coefficients in the local basis (x - x_i)^j, which keeps
pieces far from the origin well conditioned.  Convolution with a
normalised box, convolution with a finite atomic measure and
differentiation are exact up to floating-point rounding; sup norms and
L^p quasinorms rely on the root isolation and quadrature kernels in
``_numerics``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _numerics as nx
from .errors import (
    ConfigError,
    DegreeCapExceeded,
    DistributionalDerivative,
    NonPositiveWidth,
)

DEGREE_CAP = 64
BREAK_RTOL = 1e-12
MASS_FLOOR = 1e-300
JUMP_RTOL = 1e-7


def _merge_breaks(points: np.ndarray, scale: float | None = None) -> np.ndarray:
    pts = np.sort(np.asarray(points, dtype=float))
    if pts.size == 0:
        return pts
    if scale is None:
        scale = float(pts[-1] - pts[0]) or max(abs(pts[0]), 1.0)
    tol = BREAK_RTOL * scale
    keep = [pts[0]]
    for x in pts[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    # the outermost points are exact sums; keep the true right end
    if len(keep) > 1 and keep[-1] != pts[-1]:
        keep[-1] = pts[-1]
    return np.asarray(keep)


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Piecewise polynomial vanishing outside [breaks[0], breaks[-1]]."""

    breaks: np.ndarray
    coeffs: np.ndarray
    degree_cap: int = DEGREE_CAP

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if b.ndim != 1 or b.size < 2:
            raise ConfigError("need at least two breakpoints")
        if c.shape[0] != b.size - 1:
            raise ConfigError("one coefficient row per interval required")
        if not np.all(np.diff(b) > 0):
            raise ConfigError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ConfigError("non-finite breakpoint or coefficient")
        if c.shape[1] - 1 > self.degree_cap:
            raise DegreeCapExceeded(f"degree {c.shape[1] - 1} exceeds cap {self.degree_cap}")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "coeffs", c)

    # -- basic properties ---------------------------------------------

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breaks[0]), float(self.breaks[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breaks)

    @classmethod
    def zero(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewisePoly":
        return cls(np.array([lo, hi]), np.zeros((1, 1)))

    def _piece_index(self, x: np.ndarray, side: str) -> np.ndarray:
        side_np = "right" if side == "right" else "left"
        return np.searchsorted(self.breaks, x, side=side_np) - 1

    def _eval_side(self, x: np.ndarray, side: str) -> np.ndarray:
        idx = self._piece_index(x, side)
        inside = (idx >= 0) & (idx < self.n_pieces)
        out = np.zeros_like(x, dtype=float)
        if np.any(inside):
            i = idx[inside]
            t = x[inside] - self.breaks[i]
            out[inside] = nx.horner(self.coeffs[i], t)
        return out

    def __call__(self, x, side: str = "right"):
        """Evaluate; ``side`` picks the one-sided limit or their mean at jumps."""
        arr = np.asarray(x, dtype=float)
        flat = arr.reshape(-1)
        if side == "mean":
            out = 0.5 * (self._eval_side(flat, "right") + self._eval_side(flat, "left"))
        elif side in ("right", "left"):
            out = self._eval_side(flat, side)
        else:
            raise ConfigError(f"unknown side {side!r}")
        out = out.reshape(arr.shape)
        return float(out) if out.ndim == 0 else out

    # -- algebra -------------------------------------------------------

    def reexpand(self, new_breaks: np.ndarray) -> np.ndarray:
        """Coefficients of self on the intervals of a refining partition."""
        nb = np.asarray(new_breaks, dtype=float)
        mids = 0.5 * (nb[:-1] + nb[1:])
        idx = np.searchsorted(self.breaks, mids, side="right") - 1
        inside = (idx >= 0) & (idx < self.n_pieces)
        out = np.zeros((nb.size - 1, self.coeffs.shape[1]))
        if np.any(inside):
            i = idx[inside]
            s = nb[:-1][inside] - self.breaks[i]
            out[inside] = nx.taylor_shift(self.coeffs[i], s)
        return out

    def _combine(self, other: "PiecewisePoly", sign: float) -> "PiecewisePoly":
        lo = min(self.breaks[0], other.breaks[0])
        hi = max(self.breaks[-1], other.breaks[-1])
        nb = _merge_breaks(np.concatenate([self.breaks, other.breaks]), hi - lo)
        a = self.reexpand(nb)
        b = other.reexpand(nb)
        d = max(a.shape[1], b.shape[1])
        a = np.pad(a, ((0, 0), (0, d - a.shape[1])))
        b = np.pad(b, ((0, 0), (0, d - b.shape[1])))
        return PiecewisePoly(nb, a + sign * b, max(self.degree_cap, other.degree_cap))

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return self._combine(other, 1.0)

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks, self.coeffs * float(c), self.degree_cap)

    __rmul__ = __mul__

    def __neg__(self) -> "PiecewisePoly":
        return self * -1.0

    def translate(self, s: float) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks + s, self.coeffs, self.degree_cap)

    def dilate(self, lam: float) -> "PiecewisePoly":
        """x -> f(x / lam) / lam, the mass-preserving rescaling."""
        if lam <= 0:
            raise NonPositiveWidth(f"dilation factor must be positive, got {lam}")
        c = nx.scale_var(self.coeffs, 1.0 / lam) / lam
        return PiecewisePoly(self.breaks * lam, c, self.degree_cap)

    def simplify(self) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks, nx.trim(self.coeffs), self.degree_cap)

    # -- calculus ------------------------------------------------------

    def piece_integrals(self) -> np.ndarray:
        anti = nx.antideriv_coeffs(self.coeffs)
        return nx.horner(anti, self.widths)

    def integral(self) -> float:
        return math.fsum(self.piece_integrals())

    def antiderivative(self) -> "PiecewisePoly":
        """Primitive vanishing at the left end, on the same breakpoints.

        Outside the support it evaluates to 0 like every PiecewisePoly; use
        ``integral()`` for the value beyond the right end.
        """
        anti = nx.antideriv_coeffs(self.coeffs)
        masses = nx.horner(anti, self.widths)
        offsets = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
        anti[:, 0] += offsets
        return PiecewisePoly(self.breaks, anti, max(self.degree_cap, anti.shape[1] - 1))

    def regular_derivative(self, n: int = 1) -> "PiecewisePoly":
        if n == 0:
            return self
        return PiecewisePoly(self.breaks, nx.deriv_coeffs(self.coeffs, n), self.degree_cap)

    def jumps(self, order: int = 0) -> np.ndarray:
        """Jump f^(order)(x+) - f^(order)(x-) at every breakpoint."""
        c = nx.deriv_coeffs(self.coeffs, order)
        right = c[:, 0]
        left = nx.horner(c, self.widths)
        j = np.zeros(self.breaks.size)
        j[:-1] += right
        j[1:] -= left
        return j

    def endpoint_scale(self, order: int = 0) -> float:
        c = nx.deriv_coeffs(self.coeffs, order)
        vals = np.concatenate([np.abs(c[:, 0]), np.abs(nx.horner(c, self.widths))])
        return float(vals.max()) if vals.size else 0.0

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "type": "PiecewisePoly",
            "breakpoints": self.breaks.tolist(),
            "coefficients": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        return cls(np.asarray(d["breakpoints"]), np.asarray(d["coefficients"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "PiecewisePoly":
        return cls.from_dict(json.loads(s))

    def sample(self, n: int = 1000, side: str = "mean") -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(self.breaks[0], self.breaks[-1], n)
        return x, self(x, side=side)

    def write_csv(self, path: str | Path, n: int = 1000) -> None:
        x, y = self.sample(n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f(x)"])
            for xi, yi in zip(x, y):
                w.writerow([repr(float(xi)), repr(float(yi))])

    def __repr__(self) -> str:
        lo, hi = self.support
        return f"PiecewisePoly(pieces={self.n_pieces}, degree={self.degree}, support=[{lo:g}, {hi:g}])"


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite signed sum of point masses with strictly increasing locations."""

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).reshape(-1)
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if loc.size != m.size:
            raise ConfigError("locations and masses differ in length")
        loc, m = _coalesce(loc, m)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "AtomicMeasure":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0))
        loc, m = zip(*pairs)
        return cls(np.asarray(loc), np.asarray(m))

    def __len__(self) -> int:
        return self.locations.size

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def total_variation(self) -> float:
        return math.fsum(np.abs(self.masses))

    def to_dict(self) -> dict:
        return {"type": "AtomicMeasure", "atoms": [[x, b] for x, b in self.atoms()]}

    @classmethod
    def from_dict(cls, d: dict) -> "AtomicMeasure":
        return cls.from_pairs((x, b) for x, b in d["atoms"])


def _coalesce(loc: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if loc.size == 0:
        return loc, m
    order = np.argsort(loc, kind="stable")
    loc, m = loc[order], m[order]
    span = float(loc[-1] - loc[0]) or max(abs(float(loc[0])), 1.0)
    tol = BREAK_RTOL * span
    out_loc, out_m = [loc[0]], [[m[0]]]
    for x, b in zip(loc[1:], m[1:]):
        if x - out_loc[-1] <= tol:
            out_m[-1].append(b)
        else:
            out_loc.append(x)
            out_m.append([b])
    masses = np.array([math.fsum(g) for g in out_m])
    keep = np.abs(masses) >= MASS_FLOOR
    return np.asarray(out_loc)[keep], masses[keep]


@dataclass(frozen=True, eq=False)
class Distributional:
    """Regular piecewise-polynomial part plus a finite atomic part."""

    regular: PiecewisePoly
    singular: AtomicMeasure

    @property
    def has_atoms(self) -> bool:
        return len(self.singular) > 0

    def to_dict(self) -> dict:
        return {"regular": self.regular.to_dict(), "singular": self.singular.to_dict()}


# -- constructors and operators ---------------------------------------


def box(a: float) -> PiecewisePoly:
    """Normalised indicator a^{-1} 1_[0, a]."""
    if not (a > 0) or not math.isfinite(a):
        raise NonPositiveWidth(f"box width must be positive and finite, got {a}")
    return PiecewisePoly(np.array([0.0, a]), np.array([[1.0 / a]]))


def _window_tail(c: np.ndarray, s: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Coefficients in t of int_{s+t}^{end} P, for rows of c (end >= s + t)."""
    shifted = nx.taylor_shift(c, s)
    d = shifted.shape[1]
    L = end - s
    out = np.zeros((c.shape[0], d + 1))
    powers = np.power.outer(L, np.arange(1, d + 1))
    out[:, 0] = np.sum(shifted * powers / np.arange(1, d + 1), axis=1)
    out[:, 1:] = -shifted / np.arange(1, d + 1)
    return out


def _window_head(c: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Coefficients in t of int_0^{s+t} P."""
    anti = nx.antideriv_coeffs(c)
    return nx.taylor_shift(anti, s)


def _window_inner(c: np.ndarray, s: np.ndarray, a: float) -> np.ndarray:
    """Coefficients in t of int_{s+t}^{s+t+a} P, free of cancellation."""
    shifted = nx.taylor_shift(c, s)
    d = shifted.shape[1]
    out = np.zeros((c.shape[0], d + 1))
    # int_0^a (t + tau)^j dtau = sum_k C(j+1, k) t^k a^{j+1-k} / (j+1)
    for j in range(d):
        for k in range(j + 1):
            out[:, k] += shifted[:, j] * math.comb(j + 1, k) * a ** (j + 1 - k) / (j + 1)
    return out


def convolve_box(f: PiecewisePoly, a: float) -> PiecewisePoly:
    """(f * H_a)(x) = a^{-1} int_{x-a}^{x} f, piece by piece.

    Every output interval is assembled from the partial integral over the
    piece containing x - a, whole-piece masses in between and the partial
    integral over the piece containing x, so no global antiderivative is
    differenced.
    """
    if not (a > 0) or not math.isfinite(a):
        raise NonPositiveWidth(f"box width must be positive and finite, got {a}")
    if f.degree + 1 > f.degree_cap:
        raise DegreeCapExceeded(f"degree {f.degree + 1} exceeds cap {f.degree_cap}")
    xb = f.breaks
    m = f.n_pieces
    lo, hi = xb[0], xb[-1] + a
    nb = _merge_breaks(np.concatenate([xb, xb + a]), hi - lo)
    nb[0], nb[-1] = lo, hi
    y0 = nb[:-1]
    mids = 0.5 * (nb[:-1] + nb[1:])
    i_hi = np.searchsorted(xb, mids, side="right") - 1
    i_lo = np.searchsorted(xb, mids - a, side="right") - 1
    masses = f.piece_integrals()
    out = np.zeros((nb.size - 1, f.degree + 2))
    for k in range(nb.size - 1):
        ih, il = int(i_hi[k]), int(i_lo[k])
        row = np.zeros(f.degree + 2)
        if 0 <= ih < m and ih == il:
            row += _window_inner(f.coeffs[ih : ih + 1], np.array([y0[k] - a - xb[ih]]), a)[0]
        else:
            if 0 <= ih < m:
                row += _window_head(f.coeffs[ih : ih + 1], np.array([y0[k] - xb[ih]]))[0]
            if 0 <= il < m:
                row += _window_tail(
                    f.coeffs[il : il + 1], np.array([y0[k] - a - xb[il]]), np.array([xb[il + 1] - xb[il]])
                )[0]
            first = max(il + 1, 0)
            last = min(ih, m)
            if last > first:
                row[0] += math.fsum(masses[first:last])
        out[k] = row / a
    return PiecewisePoly(nb, out, f.degree_cap)


def iterated_box(widths: Sequence[float], degree_cap: int = DEGREE_CAP) -> PiecewisePoly:
    """H_{a_1} * ... * H_{a_k}; narrowest factors are convolved first."""
    w = [float(x) for x in widths]
    if not w:
        raise ConfigError("need at least one width")
    for x in w:
        if not (x > 0) or not math.isfinite(x):
            raise NonPositiveWidth(f"box width must be positive and finite, got {x}")
    if len(w) - 1 > degree_cap:
        raise DegreeCapExceeded(f"degree {len(w) - 1} exceeds cap {degree_cap}")
    order = sorted(w)
    f = PiecewisePoly(np.array([0.0, order[0]]), np.array([[1.0 / order[0]]]), degree_cap)
    for x in order[1:]:
        f = convolve_box(f, x)
    # support end is the exact float sum in the given order
    end = math.fsum(w)
    b = f.breaks.copy()
    b[-1] = end
    if b[-1] <= b[-2]:
        return f
    return PiecewisePoly(b, f.coeffs, degree_cap)


def derivative(f: PiecewisePoly, n: int) -> Distributional:
    """n-th distributional derivative of f.

    Lower-order jumps must vanish (up to a relative rounding tolerance);
    jumps of f^(n-1) become the atomic part.
    """
    if n < 0:
        raise ConfigError("derivative order must be non-negative")
    empty = AtomicMeasure(np.zeros(0), np.zeros(0))
    if n == 0:
        return Distributional(f, empty)
    for j in range(n - 1):
        jumps = f.jumps(j)
        scale = max(f.endpoint_scale(j), 1e-300)
        if np.any(np.abs(jumps) > JUMP_RTOL * scale):
            raise DistributionalDerivative(
                f"order-{j} derivative has jumps; order-{n} derivative is not a measure"
            )
    jumps = f.jumps(n - 1)
    scale = max(f.endpoint_scale(n - 1), 1e-300)
    keep = np.abs(jumps) > JUMP_RTOL * scale
    atoms = AtomicMeasure(f.breaks[keep], jumps[keep])
    return Distributional(f.regular_derivative(n), atoms)


def convolve_atomic(mu: AtomicMeasure, f: PiecewisePoly) -> PiecewisePoly:
    """sum_j b_j f(. - x_j), exact."""
    if len(mu) == 0:
        lo, hi = f.support
        return PiecewisePoly.zero(lo, hi)
    shifted = np.concatenate([f.breaks + x for x in mu.locations])
    lo, hi = float(shifted.min()), float(shifted.max())
    nb = _merge_breaks(shifted, hi - lo)
    nb[0], nb[-1] = lo, hi
    total = np.zeros((nb.size - 1, f.coeffs.shape[1]))
    # accumulate atom contributions in location order for determinism
    for x, b in zip(mu.locations, mu.masses):
        total += b * f.translate(x).reexpand(nb)
    return PiecewisePoly(nb, total, f.degree_cap)


# -- norms -------------------------------------------------------------


def sup_norm(f: PiecewisePoly) -> float:
    return sup_norm_at(f)[0]


def sup_norm_at(f: PiecewisePoly) -> tuple[float, float]:
    """Global max of |f| and a location where it is attained."""
    best, where = 0.0, float(f.breaks[0])
    for i in range(f.n_pieces):
        c = f.coeffs[i]
        h = f.breaks[i + 1] - f.breaks[i]
        cand = [0.0, h]
        if c.size > 2:
            cand += nx.unit_roots(nx.deriv_coeffs(c), h)
        t = np.asarray(cand)
        v = np.abs(nx.horner(c, t))
        k = int(np.argmax(v))
        if v[k] > best:
            best, where = float(v[k]), float(f.breaks[i] + t[k])
    return best, where


def lp_quasinorm(f: PiecewisePoly, p: float, tol: float = 1e-10) -> float:
    """||f||_p^p = int |f|^p for 0 < p <= 1."""
    if not (0 < p <= 1):
        raise ConfigError(f"p must lie in (0, 1], got {p}")
    parts = [nx.integrate_abs_pow(f.coeffs[i], float(f.breaks[i + 1] - f.breaks[i]), p, tol) for i in range(f.n_pieces)]
    return math.fsum(parts)


def lp_atomic(mu: AtomicMeasure, p: float) -> float:
    """sum_j |b_j|^p."""
    if not (0 < p <= 1):
        raise ConfigError(f"p must lie in (0, 1], got {p}")
    return math.fsum(np.abs(mu.masses) ** p)


def l1_norm(f: PiecewisePoly) -> float:
    return lp_quasinorm(f, 1.0)


# -- box-chain derivatives ---------------------------------------------


def chain_atoms(widths: Sequence[float]) -> AtomicMeasure:
    """prod_l (delta_0 - delta_{a_l}) / a_l, the n-th derivative of H_{a_1}*...*H_{a_n}."""
    locs = np.zeros(1)
    masses = np.ones(1)
    for a in widths:
        locs = np.concatenate([locs, locs + a])
        masses = np.concatenate([masses, -masses]) / a
    return AtomicMeasure(locs, masses)


def chain_derivative(widths: Sequence[float], n: int) -> Distributional:
    """n-th derivative of H_{a_1}*...*H_{a_k} built from atoms, not by differencing."""
    w = list(widths)
    if n < 0:
        raise ConfigError("derivative order must be non-negative")
    if n == 0:
        return derivative(iterated_box(w), 0)
    if n > len(w):
        raise DistributionalDerivative(f"order {n} exceeds chain length {len(w)}")
    mu = chain_atoms(w[:n])
    empty = AtomicMeasure(np.zeros(0), np.zeros(0))
    if n == len(w):
        return Distributional(PiecewisePoly.zero(0.0, math.fsum(w)), mu)
    return Distributional(convolve_atomic(mu, iterated_box(w[n:])), empty)


# -- sampling oracle (testing) -----------------------------------------


def grid_samples(f, h: float, x0: float | None = None) -> tuple[float, np.ndarray]:
    """Node samples of f on x0 + i h covering its support, mean value at jumps."""
    if isinstance(f, tuple):
        return f
    lo, hi = f.support
    if x0 is None:
        x0 = lo
    n = int(math.ceil((hi - x0) / h - 1e-9)) + 1
    x = x0 + h * np.arange(n)
    return x0, f(x, side="mean")


def grid_cells(f: PiecewisePoly, h: float, x0: float | None = None) -> tuple[float, np.ndarray]:
    """Cell averages of f over [x0 + i h, x0 + (i+1) h]."""
    lo, hi = f.support
    if x0 is None:
        x0 = lo
    n = int(math.ceil((hi - x0) / h - 1e-9))
    edges = x0 + h * np.arange(n + 1)
    F = f.antiderivative()
    vals = F(np.minimum(edges, hi), side="left")
    vals[edges >= hi] = f.integral()
    return x0, np.diff(vals) / h


def grid_oracle_convolve(f, g, h: float, rule: str = "trapezoid") -> tuple[np.ndarray, np.ndarray]:
    """Sampled convolution f*g on a step-h grid, for cross-checking.

    ``trapezoid`` multiplies node samples (mean value at jumps) and returns
    values at nodes x_f0 + x_g0 + i h.  ``cell`` convolves cell averages,
    which is exact at nodes for piecewise-constant inputs on the grid.
    """
    if rule == "trapezoid":
        xf, vf = grid_samples(f, h)
        xg, vg = grid_samples(g, h)
        conv = h * _fft_convolve(vf, vg)
        # trapezoid end correction is immaterial once both ends vanish
        x = xf + xg + h * np.arange(conv.size)
        return x, conv
    if rule == "cell":
        xf, cf = grid_cells(f, h)
        xg, cg = grid_cells(g, h)
        conv = h * _fft_convolve(cf, cg)
        x = xf + xg + h * (np.arange(conv.size) + 1)
        return x, conv
    raise ConfigError(f"unknown oracle rule {rule!r}")


def _fft_convolve(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = u.size + v.size - 1
    size = 1 << max(n - 1, 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(u, size) * np.fft.rfft(v, size), size)[:n]
    return out


# -- restriction and extrema -------------------------------------------


def extrema(f: PiecewisePoly, lo: float, hi: float) -> tuple[float, float]:
    """Exact (min, max) of f over [lo, hi]; the zero extension counts outside the support."""
    if hi < lo:
        raise ConfigError("empty interval")
    vals = []
    a, b = f.support
    if lo < a or hi > b:
        vals.append(0.0)
    i0 = max(int(np.searchsorted(f.breaks, lo, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(f.breaks, hi, side="left")), f.n_pieces)
    for i in range(i0, i1):
        x0 = f.breaks[i]
        u = max(lo, x0) - x0
        v = min(hi, f.breaks[i + 1]) - x0
        if v < u:
            continue
        c = f.coeffs[i]
        cand = [u, v]
        if c.size > 2 and v > u:
            shifted = nx.taylor_shift(c, u)
            cand += [u + t for t in nx.unit_roots(nx.deriv_coeffs(shifted), v - u)]
        vals.extend(nx.horner(c, np.asarray(cand)).tolist())
    if not vals:
        return 0.0, 0.0
    return min(vals), max(vals)


def integral_over(f: PiecewisePoly, lo: float, hi: float) -> float:
    """int_lo^hi f, exact piece by piece."""
    if hi <= lo:
        return 0.0
    parts = []
    i0 = max(int(np.searchsorted(f.breaks, lo, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(f.breaks, hi, side="left")), f.n_pieces)
    for i in range(i0, i1):
        x0 = f.breaks[i]
        u = max(lo, x0) - x0
        v = min(hi, f.breaks[i + 1]) - x0
        if v <= u:
            continue
        anti = nx.antideriv_coeffs(f.coeffs[i])
        parts.append(float(nx.horner(anti, v) - nx.horner(anti, u)))
    return math.fsum(parts)


def concat_disjoint(parts: Sequence[PiecewisePoly]) -> PiecewisePoly:
    """Join functions with disjoint, ordered supports; gaps are zero pieces."""
    if not parts:
        raise ConfigError("nothing to join")
    parts = sorted(parts, key=lambda f: f.breaks[0])
    d = max(f.coeffs.shape[1] for f in parts)
    breaks = [parts[0].breaks]
    coeffs = [np.pad(parts[0].coeffs, ((0, 0), (0, d - parts[0].coeffs.shape[1])))]
    for prev, f in zip(parts, parts[1:]):
        if f.breaks[0] < prev.breaks[-1]:
            raise ConfigError("supports overlap")
        if f.breaks[0] > prev.breaks[-1]:
            coeffs.append(np.zeros((1, d)))
            breaks.append(f.breaks)
        else:
            breaks.append(f.breaks[1:])
        coeffs.append(np.pad(f.coeffs, ((0, 0), (0, d - f.coeffs.shape[1]))))
    return PiecewisePoly(np.concatenate(breaks), np.concatenate(coeffs), max(f.degree_cap for f in parts))
