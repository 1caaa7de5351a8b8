"""Box chains H_{a_1} * ... * H_{a_k} with widths stored as logarithms.

Mollifier schedules produce widths far below the double-precision range,
so derivative norms are enclosed in the log domain.  When every atom of
the n-th derivative of the first n factors is separated by more than the
remaining support (a_l > a_{l+1} + a_{l+2} + ... for l <= n), the
copies of the tail chain do not overlap and

    ||Phi^(n)||_p^p  = 2^n (a_1...a_n)^{-p} ||Phi_{n+1,k}||_p^p
    ||Phi^(n)||_inf  =     (a_1...a_n)^{-1} ||Phi_{n+1,k}||_inf

with the tail norms pinned between explicit bounds.  A short unseparated
leading group is handled through the exact atoms of its own derivative.
Otherwise only the upper bounds survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonPositiveWidth
from .pwpoly import (
    PiecewisePoly,
    chain_atoms,
    chain_derivative,
    iterated_box,
    lp_quasinorm,
    sup_norm,
)

LOG2 = math.log(2.0)
MATERIALIZE_MAX = 10
MATERIALIZE_REL_FLOOR = 1e-8
QUAD_RTOL = 1e-10
GROUP_MAX = 10


@dataclass(frozen=True)
class LogEnclosure:
    """log_lo <= log(value) <= log_hi; method says how it was obtained."""

    log_lo: float
    log_hi: float
    method: str

    @property
    def lo(self) -> float:
        return _safe_exp(self.log_lo)

    @property
    def hi(self) -> float:
        return _safe_exp(self.log_hi)

    @property
    def log_mid(self) -> float:
        if not math.isfinite(self.log_lo):
            return self.log_hi
        return 0.5 * (self.log_lo + self.log_hi)

    def to_dict(self) -> dict:
        return {"log_lo": self.log_lo, "log_hi": self.log_hi, "method": self.method}


def _safe_exp(x: float) -> float:
    if x > 709.0:
        return math.inf
    if x < -745.0:
        return 0.0
    return math.exp(x)


@dataclass(frozen=True, eq=False)
class BoxChain:
    """Explicit factors plus an optional remainder.

    ``log_rest`` bounds (in log) the summed widths of further factors that
    are not listed; their convolution is some probability measure on
    [0, rest], which only enters through tail sums.
    """

    log_widths: np.ndarray
    log_rest: float = -math.inf

    def __post_init__(self):
        lw = np.asarray(self.log_widths, dtype=float).reshape(-1)
        if lw.size == 0:
            raise ConfigError("empty chain")
        if not np.all(np.isfinite(lw)):
            raise NonPositiveWidth("chain widths must be positive and finite")
        if math.isnan(self.log_rest) or self.log_rest == math.inf:
            raise NonPositiveWidth("remainder bound must be finite or -inf")
        object.__setattr__(self, "log_widths", lw)
        # suffix log-sums: tail[i] = log(a_i + ... + a_k + rest) (0-based)
        rev = np.logaddexp.accumulate(np.concatenate([[self.log_rest], lw[::-1]]))[::-1]
        object.__setattr__(self, "_tail", rev)
        object.__setattr__(self, "_prefix", np.concatenate([[0.0], np.cumsum(lw)]))

    @classmethod
    def from_widths(cls, widths: Sequence[float]) -> "BoxChain":
        w = np.asarray(widths, dtype=float)
        if np.any(~(w > 0)):
            raise NonPositiveWidth("chain widths must be positive")
        return cls(np.log(w))

    def __len__(self) -> int:
        return self.log_widths.size

    def widths(self) -> np.ndarray:
        return np.exp(self.log_widths)

    def log_support(self) -> float:
        return float(self._tail[0])

    def log_tail(self, n: int) -> float:
        """log(a_{n+1} + ... + a_k) with 1-based widths."""
        return float(self._tail[n])

    def log_prefix_product(self, n: int) -> float:
        """log(a_1 ... a_n)."""
        return float(self._prefix[n])

    def is_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.log_widths) < 0))

    def separated_upto(self, n: int) -> bool:
        """a_l > a_{l+1} + ... + a_k for every l <= n."""
        for l in range(min(n, len(self) - 1)):
            if not self.log_widths[l] > self._tail[l + 1] + 1e-12:
                return False
        return True

    def separation_index(self) -> int:
        """Largest n with separated_upto(n)."""
        for l in range(len(self) - 1):
            if not self.log_widths[l] > self._tail[l + 1] + 1e-12:
                return l
        return len(self)

    def materializable(self, start: int = 0, max_factors: int | None = None) -> bool:
        if self.log_rest > -math.inf:
            return False
        lw = self.log_widths[start:]
        if lw.size > (MATERIALIZE_MAX if max_factors is None else max_factors):
            return False
        return bool(lw.min() - lw.max() >= math.log(MATERIALIZE_REL_FLOOR))

    def _unit_widths(self) -> np.ndarray:
        return np.exp(self.log_widths - self.log_widths[0])

    def materialize(self) -> PiecewisePoly:
        w = self.widths()
        if not self.materializable(0, len(self)) or w.min() < 1e-300 or not np.all(np.isfinite(w)):
            raise ConfigError("chain widths span too many orders of magnitude to materialize")
        return iterated_box(w)

    # -- norm enclosures -------------------------------------------------

    def head(self, rel_floor: float = MATERIALIZE_REL_FLOOR, max_factors: int | None = None) -> PiecewisePoly:
        """Leading factors with a_l / a_1 >= rel_floor, rescaled so a_1 = 1."""
        cap = MATERIALIZE_MAX if max_factors is None else max_factors
        lw = self.log_widths
        floor = math.log(rel_floor) if rel_floor > 0 else -math.inf
        keep = 1
        while keep < min(lw.size, cap) and lw[keep] - lw[0] >= floor:
            keep += 1
        return iterated_box(np.exp(lw[:keep] - lw[0]))

    def dilated(self, log_lam: float) -> "BoxChain":
        return BoxChain(self.log_widths + log_lam, self.log_rest + log_lam)

    def _normalized_prefix(self, start: int) -> tuple[PiecewisePoly | None, float, float]:
        """Materializable head of factors start.. rescaled so the first width is 1.

        Returns (Psi, log_scale, log_rest) where Psi is the normalised head,
        log_scale = log a_{start+1} and log_rest is the log of the summed
        widths that were left out (-inf if none).
        """
        lw = self.log_widths[start:]
        base = float(lw[0])
        keep = 0
        floor = math.log(MATERIALIZE_REL_FLOOR)
        while keep < min(lw.size, MATERIALIZE_MAX) and lw[keep] - base >= floor:
            keep += 1
        if keep == 0:
            return None, base, float(self._tail[start])
        psi = iterated_box(np.exp(lw[:keep] - base))
        return psi, base, float(self._tail[start + keep])

    def _atom_group(self, n: int) -> tuple[int, np.ndarray] | None:
        """Smallest leading group g <= n after which factors g+1..n are separated.

        Returns (g, log|mu_i|) for the atoms mu of (H_{a_1} * ... * H_{a_g})^(g)
        when those atoms are spaced further apart than a_{g+1} + a_{g+2} + ...,
        so that copies of the remaining chain attached to them never overlap.
        """
        k = len(self)
        lw = self.log_widths
        g0 = 0
        for l in range(min(n, k - 1)):
            if not lw[l] > self._tail[l + 1] + 1e-12:
                g0 = l + 1
        if g0 == 0:
            return 0, np.zeros(1)
        for g in range(g0, min(n, k - 1, GROUP_MAX) + 1):
            if lw[:g].min() - lw[0] < math.log(MATERIALIZE_REL_FLOOR):
                return None
            mu = chain_atoms(np.exp(lw[:g] - lw[0]))
            gaps = np.diff(mu.locations)
            if not gaps.size or math.log(float(gaps.min())) + lw[0] > self._tail[g] + 1e-12:
                return g, np.log(np.abs(mu.masses)) - g * float(lw[0])
        return None

    def _tail_lp(self, n: int, p: float) -> tuple[float, float]:
        """log enclosure of ||H_{a_{n+1}} * ... (* rest)||_p^p."""
        log_lo = (1 - p) * float(self.log_widths[n])
        log_hi = (1 - p) * self.log_tail(n)
        psi, log_scale, log_rest = self._normalized_prefix(n)
        if psi is not None:
            norm = lp_quasinorm(psi, p, QUAD_RTOL)
            rest = _safe_exp(log_rest - log_scale)
            # dilation by lam scales ||.||_p^p by lam^{1-p}
            lo_t = math.log(norm) + math.log1p(-QUAD_RTOL)
            hi_t = math.log(norm + rest * sup_norm(psi) ** p) + math.log1p(QUAD_RTOL)
            log_lo = max(log_lo, (1 - p) * log_scale + lo_t)
            log_hi = min(log_hi, (1 - p) * log_scale + hi_t)
        return log_lo, log_hi

    def _tail_sup(self, n: int) -> tuple[float, float]:
        log_lo = -self.log_tail(n)
        log_hi = -float(self.log_widths[n])
        psi, log_scale, log_rest = self._normalized_prefix(n)
        if psi is not None:
            s = sup_norm(psi)
            rest = _safe_exp(log_rest - log_scale)
            lo_t = s - rest * _lipschitz(psi) if rest > 0.0 else s
            if lo_t > 0:
                log_lo = max(log_lo, math.log(lo_t) - log_scale)
            log_hi = min(log_hi, math.log(s) - log_scale)
        return log_lo, log_hi

    def _grouped_head(self, n: int) -> tuple[int, np.ndarray] | None:
        grp = self._atom_group(n)
        if grp is None or grp[0] > n:
            return None
        return grp

    def lp_enclosure(self, n: int, p: float) -> LogEnclosure:
        """Enclosure of ||Phi^(n)||_p^p for 0 <= n < k."""
        k = len(self)
        if not 0 <= n < k:
            raise ConfigError(f"derivative order {n} outside [0, {k})")
        if not (0 < p <= 1):
            raise ConfigError(f"p must lie in (0, 1], got {p}")
        if self.materializable():
            # dilation by lam scales ||f^(n)||_p^p by lam^{1-p-np}
            lam = float(self.log_widths[0])
            val = lp_quasinorm(chain_derivative(self._unit_widths(), n).regular, p, QUAD_RTOL)
            lv = math.log(val) + (1 - p - n * p) * lam
            return LogEnclosure(lv + math.log1p(-QUAD_RTOL), lv + math.log1p(QUAD_RTOL), "quadrature")
        grp = self._grouped_head(n)
        if grp is None:
            return _widened(-math.inf, self.log_lp_holder_bound(n, p), "bound")
        g, log_mu = grp
        # |mu|^p summed over the group atoms, 2^{n-g} atoms of unit-scaled size after it
        head = float(np.logaddexp.reduce(p * log_mu)) + (n - g) * LOG2
        head -= p * (self.log_prefix_product(n) - self.log_prefix_product(g))
        lo, hi = self._tail_lp(n, p)
        return _widened(head + lo, min(head + hi, self.log_lp_holder_bound(n, p)), "enclosure")

    def sup_enclosure(self, n: int) -> LogEnclosure:
        """Enclosure of ||Phi^(n)||_inf for 0 <= n < k."""
        k = len(self)
        if not 0 <= n < k:
            raise ConfigError(f"derivative order {n} outside [0, {k})")
        if self.materializable():
            lam = float(self.log_widths[0])
            val = sup_norm(chain_derivative(self._unit_widths(), n).regular)
            lv = math.log(val) - (1 + n) * lam
            return LogEnclosure(lv - 1e-12, lv + 1e-12, "exact")
        grp = self._grouped_head(n)
        if grp is None:
            return _widened(-math.inf, self.log_sup_bound(n), "bound")
        g, log_mu = grp
        head = float(log_mu.max()) - (self.log_prefix_product(n) - self.log_prefix_product(g))
        lo, hi = self._tail_sup(n)
        return _widened(head + lo, min(head + hi, self.log_sup_bound(n)), "enclosure")

    # -- textbook bounds ---------------------------------------------------

    def log_sup_bound(self, n: int) -> float:
        """log of 2^n / (a_1 ... a_{n+1})."""
        return n * LOG2 - self.log_prefix_product(n + 1)

    def log_lp_bound(self, n: int, p: float) -> float:
        """log of 2^n (a_1 ... a_{n+1})^{-p} (a_{n+1} + ... + a_k)."""
        return n * LOG2 - p * self.log_prefix_product(n + 1) + self.log_tail(n)

    def log_lp_holder_bound(self, n: int, p: float) -> float:
        """log of 2^n (a_1 ... a_n)^{-p} (a_{n+1} + ... + a_k)^{1-p}; always at most the previous bound."""
        return n * LOG2 - p * self.log_prefix_product(n) + (1 - p) * self.log_tail(n)

    def to_dict(self) -> dict:
        return {"log_widths": self.log_widths.tolist(), "log_rest": self.log_rest}


def _widened(log_lo: float, log_hi: float, method: str, margin: float = 1e-10) -> LogEnclosure:
    """Absorb accumulated rounding of the log-domain sums."""
    return LogEnclosure(log_lo - margin, log_hi + margin, method)


def _lipschitz(psi: PiecewisePoly) -> float:
    if psi.degree == 0:
        return math.inf
    return sup_norm(psi.regular_derivative(1))
