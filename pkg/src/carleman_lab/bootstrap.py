"""Sup-norm control from L^p derivative norms.

Checks the step inequality ||f||_inf <= ||f'||_inf^{1-p} ||f'||_p^p, its
n-fold iteration, and the resulting bound on ||f^(k)||_inf in terms of the
weighted quasinorm when the p-characteristic is finite.  Test functions
are compactly supported piecewise polynomials or Hermite functions
q(x) e^{-x^2}.

For Hermite functions, d/dx (H_k e^{-x^2}) = -H_{k+1} e^{-x^2} in the
physicists' basis, so n derivatives act as a signed index shift; roots and
values are computed in that basis, which stays well conditioned at the
degrees used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.polynomial import hermite as H
from scipy import integrate

from .errors import ConfigError, DistributionalDerivative, DivergentKappa, Inconclusive
from .pwpoly import PiecewisePoly, derivative, lp_quasinorm, sup_norm
from .weights import WeightSequence, kappa

SLACK_TOL = 1e-9
TAIL_TOL = 1e-14
MAX_HERMITE_ORDER = 40
LEAD_RTOL = 1e-17
DEFAULT_WINDOW = 16


# -- Hermite functions ------------------------------------------------------


@dataclass(frozen=True)
class HermiteFunction:
    """f(x) = q(x) exp(-x^2) with q given by monomial coefficients (low first)."""

    q: tuple[float, ...]

    def __post_init__(self):
        c = [float(v) for v in self.q]
        if not c:
            raise ConfigError("empty polynomial")
        if not all(math.isfinite(v) for v in c):
            raise ConfigError("polynomial coefficients must be finite")
        # c x^j e^{-x^2} peaks at |c| (j/2e)^{j/2}; a leading term far below the
        # largest such peak is invisible in f but wrecks the companion-matrix roots
        peaks = [_log_term_peak(v, j) for j, v in enumerate(c)]
        floor = max(peaks) + math.log(LEAD_RTOL)
        while len(c) > 1 and peaks[len(c) - 1] <= floor:
            c.pop()
        object.__setattr__(self, "q", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.q) - 1

    @property
    def coeff_bound(self) -> float:
        return max(abs(v) for v in self.q)

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.q)

    def hermite_coeffs(self, n: int = 0) -> np.ndarray:
        """Physicists' Hermite coefficients of L^n q."""
        b = H.poly2herm(np.asarray(self.q))
        return (-1.0) ** n * np.concatenate([np.zeros(n), b])

    def derivative_poly(self, n: int) -> np.ndarray:
        """Monomial coefficients of L^n q, so that f^(n) = e^{-x^2} L^n q."""
        return H.herm2poly(self.hermite_coeffs(n))

    def __call__(self, x, n: int = 0):
        x = np.asarray(x, dtype=float)
        return np.exp(-x * x) * H.hermval(x, self.hermite_coeffs(n))


def _log_term_peak(c: float, j: int) -> float:
    if c == 0.0:
        return -math.inf
    return math.log(abs(c)) + (0.5 * j * (math.log(j / 2.0) - 1.0) if j > 0 else 0.0)


def hermite_L(q: Sequence[float]) -> np.ndarray:
    """Lq = q' - 2 x q on monomial coefficients."""
    c = np.asarray(q, dtype=float)
    out = np.zeros(c.size + 1)
    out[: c.size - 1] += c[1:] * np.arange(1, c.size)
    out[1:] -= 2.0 * c
    return out


def pochhammer(x: float, k: int) -> float:
    """Rising factorial x (x+1) ... (x+k-1)."""
    return math.exp(math.lgamma(x + k) - math.lgamma(x)) if k > 0 else 1.0


def hermite_sup_bound(f: HermiteFunction, n: int) -> float:
    """m_q (d+2)_{n+1} ((d+n)/2)^{(d+n)/2} e^{-(d+n)/2}."""
    D = f.degree + n
    half = D / 2.0
    peak = math.exp(half * math.log(half) - half) if D > 0 else 1.0
    return f.coeff_bound * pochhammer(f.degree + 2, n + 1) * peak


def _tail_radius(coeffs: np.ndarray) -> float:
    """R with m (D+1) R^D e^{-R^2} < TAIL_TOL, where m bounds the coefficients."""
    D = max(len(coeffs) - 1, 0)
    m = float(np.max(np.abs(coeffs))) or 1.0
    R = max(1.0, math.sqrt(D / 2.0))
    while math.log(m * (D + 1)) + D * math.log(R) - R * R >= math.log(TAIL_TOL):
        R += 0.25
    return R


@dataclass(frozen=True)
class HermiteSup:
    n: int
    measured: float
    bound: float
    argmax: float
    radius: float

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound * (1 + SLACK_TOL)


def hermite_derivative_sup(f: HermiteFunction, n: int) -> HermiteSup:
    """sup |f^(n)| from the critical points, against the coefficient bound."""
    if not 0 <= n <= MAX_HERMITE_ORDER:
        raise ConfigError(f"order must lie in [0, {MAX_HERMITE_ORDER}]")
    bound = hermite_sup_bound(f, n)
    if f.is_zero:
        return HermiteSup(n, 0.0, bound, 0.0, 0.0)
    R = _tail_radius(f.derivative_poly(n))
    crit = H.hermroots(f.hermite_coeffs(n + 1))
    crit = np.real(crit[np.abs(np.imag(crit)) <= 1e-9 * (1 + np.abs(crit))])
    cand = np.concatenate([crit[np.abs(crit) <= R], [0.0, -R, R]])
    vals = np.abs(f(cand, n))
    i = int(np.argmax(vals))
    return HermiteSup(n, float(vals[i]), bound, float(cand[i]), R)


def _log_abs_factored(x: np.ndarray, log_lead: float, roots: np.ndarray, skip: Sequence[int]) -> np.ndarray:
    """log |lead * prod_{i not in skip} (x - z_i)|."""
    keep = np.ones(roots.size, dtype=bool)
    keep[list(skip)] = False
    z = roots[keep]
    out = np.full(np.shape(x), log_lead)
    for zi in z:
        out = out + np.log(np.abs(x - zi))
    return out


def hermite_lp(f: HermiteFunction, n: int, p: float) -> float:
    """||f^(n)||_p^p on the real line.

    Between consecutive real zeros a < b the integrand is written as
    (x-a)^p (b-x)^p g(x) with g smooth and handed to an algebraic-weight
    quadrature; the two unbounded ends are split off one unit from the
    extreme zeros.
    """
    if not (0 < p <= 1):
        raise ConfigError(f"p must lie in (0, 1], got {p}")
    if f.is_zero:
        return 0.0
    c = f.hermite_coeffs(n)
    D = len(c) - 1
    lead = abs(c[-1]) * 2.0**D
    if D == 0:
        return lead**p * math.sqrt(math.pi / p)
    z = H.hermroots(c)
    real = np.abs(np.imag(z)) <= 1e-9 * (1 + np.abs(z))
    order = np.argsort(np.real(z))
    z = z[order]
    real = real[order]
    ridx = [i for i in range(z.size) if real[i]]
    rvals = [float(np.real(z[i])) for i in ridx]
    log_lead = math.log(lead)

    def g(skip):
        def fn(x):
            return math.exp(p * (_log_abs_factored(np.asarray(x), log_lead, z, skip) - x * x))

        return fn

    opts = dict(epsabs=0.0, epsrel=1e-11, limit=200)
    parts = []
    if not rvals:
        parts.append(integrate.quad(g([]), -np.inf, np.inf, **opts)[0])
        return math.fsum(parts)
    lo, hi = rvals[0], rvals[-1]
    parts.append(integrate.quad(g([]), -np.inf, lo - 1.0, **opts)[0])
    parts.append(integrate.quad(g([ridx[0]]), lo - 1.0, lo, weight="alg", wvar=(0.0, p), **opts)[0])
    for k in range(len(rvals) - 1):
        a, b = rvals[k], rvals[k + 1]
        if b - a <= 0.0:
            continue
        parts.append(integrate.quad(g([ridx[k], ridx[k + 1]]), a, b, weight="alg", wvar=(p, p), **opts)[0])
    parts.append(integrate.quad(g([ridx[-1]]), hi, hi + 1.0, weight="alg", wvar=(p, 0.0), **opts)[0])
    parts.append(integrate.quad(g([]), hi + 1.0, np.inf, **opts)[0])
    return math.fsum(parts)


@dataclass(frozen=True)
class HermiteGrowth:
    p: float
    orders: tuple[int, ...]
    norms: tuple[float, ...]  # ||f^(n)||_p
    sigma: float
    log_constant: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "orders": list(self.orders),
            "norms": list(self.norms),
            "sigma": self.sigma,
            "log_constant": self.log_constant,
        }


def hermite_lp_growth(f: HermiteFunction, p: float, n_range: Iterable[int]) -> HermiteGrowth:
    """||f^(n)||_p over n_range with the least-squares fit log norm ~ C + sigma log n!."""
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
    ns = list(n_range)
    norms = [hermite_lp(f, n, p) ** (1.0 / p) for n in ns]
    xs = [math.lgamma(n + 1) for n in ns]
    if len(set(xs)) < 2:
        raise ConfigError("growth fit needs at least two orders with distinct n!")
    sigma, c0 = np.polyfit(xs, [math.log(v) for v in norms], 1)
    return HermiteGrowth(p, tuple(ns), tuple(norms), float(sigma), float(c0))


# -- step and chain inequalities --------------------------------------------

Model = Union[PiecewisePoly, HermiteFunction]


def _regular_derivative(f: PiecewisePoly, n: int) -> PiecewisePoly:
    d = derivative(f, n)
    if d.has_atoms:
        raise DistributionalDerivative(f"order-{n} derivative carries point masses")
    return d.regular


def derivative_sup(f: Model, n: int) -> float:
    if isinstance(f, HermiteFunction):
        return hermite_derivative_sup(f, n).measured
    return sup_norm(_regular_derivative(f, n))


def derivative_lp(f: Model, n: int, p: float) -> float:
    """||f^(n)||_p^p."""
    if isinstance(f, HermiteFunction):
        return hermite_lp(f, n, p)
    return lp_quasinorm(_regular_derivative(f, n), p)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class ChainCheck:
    """log-domain comparison of ||f||_inf against the n-fold step bound."""

    n: int
    p: float
    log_lhs: float
    log_rhs: float

    @property
    def slack(self) -> float:
        if self.log_lhs == -math.inf:
            return 0.0 if self.log_rhs == -math.inf else math.inf
        return self.log_rhs - self.log_lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -SLACK_TOL

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "log_lhs": self.log_lhs, "log_rhs": self.log_rhs, "slack": self.slack}


def bootstrap_step_check(f: Model, p: float) -> float:
    """||f'||_inf^{1-p} ||f'||_p^p - ||f||_inf (non-negative when the step inequality holds)."""
    _check_p(p)
    lhs = derivative_sup(f, 0)
    rhs = derivative_sup(f, 1) ** (1.0 - p) * derivative_lp(f, 1, p)
    return rhs - lhs


def bootstrap_chain_check(f: Model, p: float, n: int) -> ChainCheck:
    """log ||f||_inf against (1-p)^n log ||f^(n)||_inf + sum_j (1-p)^{j-1} log ||f^(j)||_p^p."""
    _check_p(p)
    if n < 1:
        raise ConfigError("chain order must be at least 1")
    q = 1.0 - p
    log_lhs = _log(derivative_sup(f, 0))
    terms = [q**n * _log(derivative_sup(f, n))]
    terms += [q ** (j - 1) * _log(derivative_lp(f, j, p)) for j in range(1, n + 1)]
    log_rhs = -math.inf if any(t == -math.inf for t in terms) else math.fsum(terms)
    return ChainCheck(n, p, log_lhs, log_rhs)


def greedy_step_log_bound(f: Model, p: float, n: int) -> float:
    """Bound on log ||f||_inf from applying the step inequality to f, f', ..., f^(n-1) in turn."""
    q = 1.0 - p
    bound = _log(derivative_sup(f, n))
    for j in range(n, 0, -1):
        # ||f^(j-1)||_inf <= ||f^(j)||_inf^{1-p} ||f^(j)||_p^p
        lp = _log(derivative_lp(f, j, p))
        bound = -math.inf if lp == -math.inf else q * bound + lp
    return bound


# -- sup-norm control from the quasinorm ------------------------------------


@dataclass(frozen=True)
class SupControlBound:
    """log of the constant C_k in ||f^(k)||_inf <= C_k ||f||_{p,M}."""

    log_value: float
    error_bound: float
    k: int
    kappa: float

    def to_dict(self) -> dict:
        return {"log_value": self.log_value, "error_bound": self.error_bound, "k": self.k, "kappa": self.kappa}


def sup_control_bound(
    M: WeightSequence, p: float, theta: float, k: int, kappa_tol: float = 1e-12
) -> SupControlBound:
    """theta q^{-k} + p q^{-k-1} kappa - sum_{j<=k} q^{j-k-1} p log M_j, with q = 1 - p."""
    _check_p(p)
    if theta < 0:
        raise ConfigError("theta must be non-negative")
    if k < 0:
        raise ConfigError("k must be non-negative")
    ks = kappa(M, p, tol=kappa_tol)
    if ks.status == "diverged":
        raise DivergentKappa("kappa(p, M) diverges; no sup-norm control")
    if ks.status != "finite":
        raise Inconclusive(f"kappa(p, M) could not be certified: {ks.note}")
    q = 1.0 - p
    scale = q ** (-k - 1)
    terms = [theta * q ** (-k), p * scale * ks.value]
    terms += [-p * q ** (j - k - 1) * M.logM(j) for j in range(1, k + 1)]
    return SupControlBound(math.fsum(terms), p * scale * ks.tail_bound, k, ks.value)


def quasinorm_window(f: Model, M: WeightSequence, p: float, n_win: int = DEFAULT_WINDOW) -> tuple[float, int]:
    """max_{n<=n_win} ||f^(n)||_p / M_n (a lower bound for the full quasinorm) and the arg max."""
    best, arg = 0.0, 0
    for n in range(n_win + 1):
        lm = M.logM(n)
        if lm == math.inf:
            continue
        try:
            val = derivative_lp(f, n, p)
        except DistributionalDerivative:
            break
        if val == 0.0:
            continue
        r = math.exp(math.log(val) / p - lm)
        if r > best:
            best, arg = r, n
    return best, arg


@dataclass(frozen=True)
class SupControlCheck:
    k: int
    log_sup: float
    log_bound: float
    quasinorm_window: float
    window_argmax: int
    vacuous: bool

    @property
    def slack(self) -> float:
        if self.log_sup == -math.inf or self.log_bound == math.inf:
            return math.inf
        return self.log_bound - self.log_sup

    @property
    def passed(self) -> bool:
        return self.slack >= -SLACK_TOL

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "log_sup": self.log_sup,
            "log_bound": self.log_bound,
            "quasinorm_window": self.quasinorm_window,
            "quasinorm_tag": "window lower bound",
            "window_argmax": self.window_argmax,
            "vacuous": self.vacuous,
            "slack": self.slack,
            "passed": self.passed,
        }


def verify_sup_control(
    f: Model,
    M: WeightSequence,
    p: float,
    theta: float,
    k: int,
    n_win: int = DEFAULT_WINDOW,
    on_divergent: str = "raise",
) -> SupControlCheck:
    """||f^(k)||_inf against exp(log C_k) times the windowed quasinorm.

    The window only lowers the quasinorm, so a pass on the window implies
    a pass for the full sup.  With ``on_divergent="vacuous"`` a divergent
    p-characteristic gives an infinite bound instead of an error.
    """
    if on_divergent not in ("raise", "vacuous"):
        raise ConfigError("on_divergent must be 'raise' or 'vacuous'")
    try:
        bound = sup_control_bound(M, p, theta, k)
        log_c, vacuous = bound.log_value + bound.error_bound, False
    except DivergentKappa:
        if on_divergent == "raise":
            raise
        log_c, vacuous = math.inf, True
    qn, arg = quasinorm_window(f, M, p, n_win)
    log_sup = _log(derivative_sup(f, k))
    log_bound = log_c + _log(qn) if qn > 0 else (math.inf if vacuous else -math.inf)
    return SupControlCheck(k, log_sup, log_bound, qn, arg, vacuous)


def _check_p(p: float) -> None:
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
