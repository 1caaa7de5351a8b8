"""Witnesses that function and derivative decouple in L^p for p < 1.

* the skewed saw-tooth: f_j -> 0 while f_j' -> 1 in L^p;
* the beta lift: g_j = 1_[a,b] * Phi_j approximates a step while every
  derivative of g_j stays small;
* the gamma lift: a primitive u of g - phi with u small in L^p although
  u' - g = -phi is a sum of mollifier bumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _numerics as nx
from .chains import BoxChain
from .errors import BadPeriod, ConfigError, DepthExhausted, DistributionalDerivative
from .mollifier import (
    MollifierPlan,
    build_invisible_carleman,
    build_invisible_sobolev,
    carleman_schedule,
)
from .pwpoly import (
    PiecewisePoly,
    concat_disjoint,
    convolve_box,
    derivative,
    extrema,
    integral_over,
    lp_quasinorm,
    sup_norm,
)
from .weights import WeightSequence, shift

TOL = 1e-9


@dataclass
class WitnessReport:
    kind: str
    index: float
    measured: dict
    bounds: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "index": self.index,
            "measured": self.measured,
            "bounds": self.bounds,
            "passed": self.passed,
            "details": self.details,
        }


# -- saw-tooth ------------------------------------------------------------


def sawtooth(j: int, eps_j: float) -> PiecewisePoly:
    """Skewed saw-tooth on [0, 1]: slope 1 for 1/j, then slope -1/(j eps_j) for eps_j."""
    if j < 1 or int(j) != j:
        raise ConfigError(f"j must be a positive integer, got {j}")
    if not (0 < eps_j < 1.0 / j):
        raise BadPeriod(f"need 0 < eps_j < 1/j, got eps_j={eps_j}, j={j}")
    rise, period = 1.0 / j, 1.0 / j + eps_j
    steep = -1.0 / (j * eps_j)
    breaks, coeffs = [0.0], []
    m = 0
    while True:
        x0 = m * period
        if x0 >= 1.0:
            break
        top = min(x0 + rise, 1.0)
        breaks.append(top)
        coeffs.append([0.0, 1.0])
        if top >= 1.0:
            break
        end = min(x0 + period, 1.0)
        breaks.append(end)
        coeffs.append([rise, steep])
        m += 1
    return PiecewisePoly(np.asarray(breaks), np.asarray(coeffs))


def _drop_length(j: int, eps_j: float) -> float:
    period = 1.0 / j + eps_j
    full = math.floor(1.0 / period)
    rem = 1.0 - full * period
    return full * eps_j + max(0.0, rem - 1.0 / j)


def douady_witness(p: float, j: int, eps_rule: Callable[[int], float] | None = None) -> WitnessReport:
    """Measured ||1 - f_j'||_p^p and ||f_j||_p^p on [0, 1] against (j eps_j)^{1-p} and j^{-p}."""
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
    eps_j = eps_rule(j) if eps_rule is not None else float(j) ** -3
    f = sawtooth(j, eps_j)
    one = PiecewisePoly(np.array([0.0, 1.0]), np.array([[1.0]]))
    defect = one - f.regular_derivative(1)
    m_defect = lp_quasinorm(defect, p)
    m_f = lp_quasinorm(f, p)
    bound_defect = (j * eps_j) ** (1.0 - p)
    bound_f = float(j) ** -p
    drops = _drop_length(j, eps_j)
    closed = drops * (1.0 + 1.0 / (j * eps_j)) ** p
    passed = m_defect <= bound_defect * (1 + TOL) and m_f <= bound_f * (1 + TOL)
    return WitnessReport(
        "douady",
        j,
        {"defect_lp": m_defect, "f_lp": m_f, "sup_f": sup_norm(f)},
        {"defect_lp": bound_defect, "f_lp": bound_f},
        passed,
        {
            "eps_j": eps_j,
            "drop_length_in_unit_interval": drops,
            "closed_form_defect": closed,
        },
    )


# -- beta lift ------------------------------------------------------------


def _mollifier_for(M: WeightSequence, p: float, eps: float, n_check: int):
    """(phi or None, chain, plan) with ||Phi^(n-1)||_p <= eps M_n for the lift."""
    if M.kind == "sobolev":
        k = int(M.params[0])
        b = build_invisible_sobolev(max(k - 1, 0), p, eps)
    else:
        # short windows still sit in the rising part of the tameness profile
        b = build_invisible_carleman(shift(M, 1), p, eps, n_check=max(n_check - 1, 6))
    return b.phi, b.plan.chain, b.plan


def beta_lift_function(steps: Sequence[tuple[float, float, float]], phi: PiecewisePoly) -> PiecewisePoly:
    """sum_i w_i 1_[a_i, b_i] * phi for weighted steps (a_i, b_i, w_i)."""
    out = None
    for a, b, w in steps:
        if not b > a:
            raise ConfigError("step interval must have b > a")
        term = (convolve_box(phi, b - a) * ((b - a) * w)).translate(a)
        out = term if out is None else out + term
    if out is None:
        raise ConfigError("no steps given")
    return out


def _step_gap_lp(phi: PiecewisePoly, p: float) -> float:
    """||1_[a,b] - 1_[a,b] * Phi||_p^p when supp Phi is shorter than b - a."""
    F = phi.antiderivative()
    lo, hi = phi.support
    one = PiecewisePoly(np.array([lo, hi]), np.array([[1.0]]))
    return lp_quasinorm(one - F, p) + lp_quasinorm(F, p)


def lift_beta_witness(
    a: float, b: float, p: float, M: WeightSequence, eps_j: float, n_check: int = 4
) -> WitnessReport:
    """||g - g_j||_p^p <= 2 eps_j and ||g_j^(n)||_p <= 2^{1/p} eps_j M_n for 1 <= n <= n_check."""
    if not b > a:
        raise ConfigError("need b > a")
    phi, chain, plan = _mollifier_for(M, p, eps_j, n_check)
    support = math.exp(chain.log_support())
    if support > b - a:
        raise ConfigError("mollifier support exceeds the step width")
    top = n_check if M.kind != "sobolev" else min(n_check, int(M.params[0]))
    measured, bounds, methods = {}, {}, {}
    if phi is not None:
        measured["gap_lp"] = _step_gap_lp(phi, p)
        methods["gap_lp"] = "quadrature"
    else:
        measured["gap_lp"] = 2.0 * support
        methods["gap_lp"] = "bound"
    bounds["gap_lp"] = 2.0 * eps_j
    ok = measured["gap_lp"] <= bounds["gap_lp"] * (1 + TOL)
    window = []
    gj = beta_lift_function([(a, b, 1.0)], phi) if phi is not None and len(chain) > top - 1 else None
    for n in range(1, top + 1):
        if n - 1 >= len(chain):
            break
        bound_pp = 2.0 * eps_j**p * math.exp(p * M.logM(n))
        if gj is not None and n < len(chain) + 1 and not derivative_has_atoms(gj, n):
            val = lp_quasinorm(derivative(gj, n).regular, p)
            meth = "quadrature"
        else:
            # (delta_a - delta_b) * Phi^(n-1): two disjoint copies
            enc = chain.lp_enclosure(n - 1, p)
            val = 2.0 * enc.hi
            meth = enc.method
        measured[f"deriv_lp[{n}]"] = val
        bounds[f"deriv_lp[{n}]"] = bound_pp
        methods[f"deriv_lp[{n}]"] = meth
        ok = ok and val <= bound_pp * (1 + TOL)
        window.append(val ** (1.0 / p) / math.exp(M.logM(n)))
    measured["derivative_window"] = max(window) if window else 0.0
    return WitnessReport(
        "beta",
        eps_j,
        measured,
        bounds,
        bool(ok),
        {"methods": methods, "mollifier": plan.to_dict(), "interval": [a, b]},
    )


def derivative_has_atoms(f: PiecewisePoly, n: int) -> bool:
    try:
        return derivative(f, n).has_atoms
    except DistributionalDerivative:
        return True


# -- oscillation partition -------------------------------------------------


def oscillation(f: PiecewisePoly, lo: float, hi: float) -> float:
    """sup over [lo, hi] of |f - mean of f over [lo, hi]|."""
    fmin, fmax = extrema(f, lo, hi)
    mean = integral_over(f, lo, hi) / (hi - lo)
    return max(fmax - mean, mean - fmin, 0.0)


@dataclass(frozen=True)
class PartitionCell:
    lo: float
    hi: float
    osc: float
    mean: float


def oscillation_partition(f: PiecewisePoly, p: float, eps: float, max_depth: int = 40) -> list[PartitionCell]:
    """Dyadic refinement of the unit cells [m, m+1] meeting supp f.

    A cell is halved until (osc)^p <= eps 2^{-|m|}; the weighted sum
    sum |I| osc^p is then at most 3 eps.
    """
    if not (0 < p <= 1):
        raise ConfigError(f"p must lie in (0, 1], got {p}")
    if not eps > 0:
        raise ConfigError("eps must be positive")
    lo, hi = f.support
    cells: list[PartitionCell] = []
    for m in range(math.floor(lo), math.ceil(hi)):
        thr = eps * 2.0 ** -abs(m)
        stack = [(float(m), float(m + 1), 0)]
        while stack:
            a, b, depth = stack.pop()
            osc = oscillation(f, a, b)
            if osc**p <= thr:
                cells.append(PartitionCell(a, b, osc, integral_over(f, a, b) / (b - a)))
                continue
            if depth >= max_depth:
                raise DepthExhausted(f"cell [{a}, {b}] still oscillates after {max_depth} halvings")
            mid = 0.5 * (a + b)
            stack.append((mid, b, depth + 1))
            stack.append((a, mid, depth + 1))
    cells.sort(key=lambda c: c.lo)
    return cells


def partition_sum(cells: Sequence[PartitionCell], p: float) -> float:
    return math.fsum((c.hi - c.lo) * c.osc**p for c in cells)


# -- gamma lift -------------------------------------------------------------


@dataclass
class GammaLift:
    u: PiecewisePoly
    phi: PiecewisePoly
    f: PiecewisePoly
    report: WitnessReport

    def __iter__(self):
        yield self.u
        yield self.report


def _log_norm_profile(chain: BoxChain, p: float, n_check: int) -> list[float]:
    """log upper enclosures of ||Phi^(k)||_p^p for k <= n_check."""
    return [chain.lp_enclosure(k, p).log_hi for k in range(min(n_check, len(chain) - 1) + 1)]


def _scaled_norm(profile: Sequence[float], log_lam: float, p: float, M1: WeightSequence) -> float:
    """max_k ||Phi_lam^(k)||_p / M1_k via ||Phi_lam^(k)||_p^p = lam^{1-p-kp} ||Phi^(k)||_p^p."""
    return max(math.exp((lh + (1 - p - k * p) * log_lam) / p - M1.logM(k)) for k, lh in enumerate(profile))


def lift_gamma_witness(
    g: PiecewisePoly,
    p: float,
    M: WeightSequence,
    eps: float,
    n_check: int = 4,
    head_factors: int = 3,
) -> GammaLift:
    """u with u' = g - phi, ||u||_p^p small and phi a sum of mollifier pairs.

    The partition is built at eps/3 so that its weighted oscillation sum is
    at most eps; every active cell gets a collar width
    delta = min(eps / N, |I_n| / 3), so sum delta_n <= eps.  A single
    Carleman chain for the shifted weight, with support schedule eps, is
    dilated into each collar and its achieved norm eps_n follows from the
    scaling law.  The bumps placed in phi are the chain's leading
    ``head_factors`` boxes, which have unit mass and fit in the same collar,
    so u' - g = -phi holds exactly.
    """
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
    if head_factors < 1:
        raise ConfigError("head_factors must be at least 1")
    f = g.antiderivative()
    f_sup = sup_norm(f)
    M1 = shift(M, 1)
    if f_sup == 0.0:
        zero = PiecewisePoly.zero(*g.support)
        rep = WitnessReport(
            "gamma", eps, {"u_lp": 0.0, "sum_eps_n_p": 0.0, "phi_lp": 0.0}, {"u_lp": eps, "sum_eps_n_p": eps}, True, {}
        )
        return GammaLift(zero, zero, f, rep)
    cells = oscillation_partition(f, p, eps / 3.0)
    active = [c for c in cells if c.mean != 0.0]
    n_act = len(active)
    delta_uniform = eps / n_act
    plan = carleman_schedule(M1, p, eps, K=None)
    base = plan.chain
    log_support = base.log_support()
    profile = _log_norm_profile(base, p, n_check)
    base_ratios = [math.exp(lh / p - M1.logM(k)) for k, lh in enumerate(profile)]
    head = base.head(rel_floor=0.0, max_factors=head_factors)
    head_scale = math.exp(base.log_widths[0])  # head is in units of a_1
    pieces, eps_n, budget, phi_lp = [], [], [], []
    for c in active:
        delta = min(delta_uniform, (c.hi - c.lo) / 3.0)
        budget.append(delta)
        # full-chain support fits in (1 - 2e-3) delta, offset 1e-3 delta inside the collar
        log_lam = math.log(delta * (1 - 2e-3)) - log_support
        eps_n.append(_scaled_norm(profile, log_lam, p, M1))
        phi_lp.append(2.0 * abs(c.mean) ** p * math.exp(profile[0] + (1 - p) * log_lam))
        bump = head.dilate(math.exp(log_lam) * head_scale)
        pieces.append(bump.translate(c.lo + 1e-3 * delta) * c.mean)
        pieces.append(bump.translate(c.hi - delta + 1e-3 * delta) * (-c.mean))
    phi = concat_disjoint(pieces)
    u = (g - phi).antiderivative()
    # measured ||u||_p^p: quadrature on the collar-free middles, bound on collars
    middle, collars = [], []
    for c, delta in zip(active, budget):
        mid_lo, mid_hi = c.lo + delta, c.hi - delta
        middle.append(_lp_shifted(f, -c.mean, mid_lo, mid_hi, p))
        fmin, fmax = extrema(f, c.lo, c.hi)
        collars.append(2.0 * delta * (max(abs(fmin), abs(fmax)) + abs(c.mean)) ** p)
    inactive = [c for c in cells if c.mean == 0.0]
    for c in inactive:
        middle.append(_lp_shifted(f, 0.0, c.lo, c.hi, p))
    u_lp = math.fsum(middle) + math.fsum(collars)
    u_bound = (2.0 ** (1 + p) * f_sup**p + 1.0) * eps
    sum_eps = math.fsum(e**p for e in eps_n)
    phi_lp = math.fsum(phi_lp)
    identity_err = _identity_error(u, g, phi)
    total = integral_over(g - phi, *u.support)
    g_lo, g_hi = g.support
    u_lo, u_hi = _nonzero_hull(u)
    measured = {
        "u_lp": u_lp,
        "sum_eps_n_p": sum_eps,
        "phi_lp": phi_lp,
        "identity_rel_err": identity_err,
        "integral_g_minus_phi": total,
        "partition_sum": partition_sum(cells, p),
        "sum_delta": math.fsum(budget),
        "support_excess": max(g_lo - u_lo, u_hi - g_hi, 0.0),
    }
    bounds = {
        "u_lp": u_bound,
        "sum_eps_n_p": eps,
        "identity_rel_err": 1e-12,
        "integral_g_minus_phi": 1e-10,
        "partition_sum": eps,
        "sum_delta": eps,
        "support_excess": eps,
    }
    checks = {
        "u_lp": u_lp <= u_bound,
        "sum_eps_n_p": sum_eps <= eps,
        "identity": identity_err <= 1e-12,
        "mass_balance": abs(total) <= 1e-10,
        "partition": measured["partition_sum"] <= eps * (1 + TOL),
        "collars": measured["sum_delta"] <= eps * (1 + TOL),
        "support": measured["support_excess"] <= eps,
    }
    details = {
        "checks": checks,
        "cells": len(cells),
        "active_cells": n_act,
        "delta": delta_uniform,
        "required_eps_n": delta_uniform ** (1.0 / p),
        "achieved_eps_n_max": max(eps_n),
        "achieved_eps_n_min": min(eps_n),
        "base_mollifier": {"K": plan.params["K"], "support": math.exp(log_support), "norm_ratios": base_ratios},
        "head_factors": head.degree + 1,
        "u_lp_method": "quadrature on cell middles + collar bound 2 delta (sup|f| + |mean|)^p",
    }
    rep = WitnessReport("gamma", eps, measured, bounds, all(checks.values()), details)
    return GammaLift(u, phi, f, rep)


def _nonzero_hull(f: PiecewisePoly, rtol: float = 1e-12) -> tuple[float, float]:
    """Hull of the pieces of f that are not numerically zero."""
    scale = float(np.max(np.abs(f.coeffs))) or 1.0
    nz = np.flatnonzero(np.max(np.abs(f.coeffs), axis=1) > rtol * scale)
    if nz.size == 0:
        return float(f.breaks[0]), float(f.breaks[0])
    return float(f.breaks[nz[0]]), float(f.breaks[nz[-1] + 1])


def _lp_shifted(f: PiecewisePoly, shift_by: float, lo: float, hi: float, p: float) -> float:
    """int_lo^hi |f + shift_by|^p, piece by piece."""
    if hi <= lo:
        return 0.0
    parts = []
    a, b = f.support
    # zero extension outside the support
    for x0, x1 in ((lo, min(hi, a)), (max(lo, b), hi)):
        if x1 > x0:
            parts.append((x1 - x0) * abs(shift_by) ** p)
    i0 = max(int(np.searchsorted(f.breaks, lo, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(f.breaks, hi, side="left")), f.n_pieces)
    for i in range(i0, i1):
        s = max(lo, f.breaks[i])
        e = min(hi, f.breaks[i + 1])
        if e <= s:
            continue
        c = nx.taylor_shift(f.coeffs[i], s - f.breaks[i]).copy()
        c[0] += shift_by
        parts.append(nx.integrate_abs_pow(c, e - s, p))
    return math.fsum(parts)


def _identity_error(u: PiecewisePoly, g: PiecewisePoly, phi: PiecewisePoly, n: int = 20001) -> float:
    """max |u' - g + phi| / (sup|g| + sup|phi|) on samples off the breakpoints."""
    lo, hi = u.support
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(lo, hi, n))
    du = u.regular_derivative(1)
    err = np.abs(du(x) - g(x) + phi(x))
    scale = float(np.max(np.abs(g(x))) + np.max(np.abs(phi.coeffs[:, 0])) + 1e-300)
    return float(err.max() / scale)
