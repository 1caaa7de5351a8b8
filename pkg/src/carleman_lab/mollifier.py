"""Invisible mollifiers: unit-mass box chains with tiny support and norm.

Two width schedules are provided.  The Sobolev schedule fixes k+1 widths
so that every derivative up to order k has small L^p quasinorm.  The
Carleman schedule builds widths a_l = c_l alpha_l from truncated weighted
products of the weight sequence and keeps every derivative under
eps * M_n.  Both plans carry certificates that are recomputed from the
widths, never assumed from the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .chains import BoxChain, LogEnclosure
from .errors import (
    CertificateFailure,
    ConfigError,
    KExhausted,
    NotApplicable,
    UnderflowWidth,
)
from .pwpoly import PiecewisePoly, derivative, sup_norm
from .weights import WeightSequence, kappa, minorant, p_regular

K_START = 8
K_MAX = 4096
EXPLICIT_FACTORS = 64
MASS_TOL = 1e-12


@dataclass(frozen=True)
class Certificate:
    name: str
    passed: bool
    value: float
    bound: float
    method: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "bound": self.bound,
            "method": self.method,
            "detail": self.detail,
        }


@dataclass
class MollifierPlan:
    mode: str
    p: float
    epsilon: float
    chain: BoxChain
    params: dict = field(default_factory=dict)
    intermediates: dict = field(default_factory=dict)
    certificates: list[Certificate] = field(default_factory=list)

    @property
    def log_widths(self) -> np.ndarray:
        return self.chain.log_widths

    @property
    def widths(self) -> np.ndarray:
        return self.chain.widths()

    @property
    def support_length(self) -> float:
        return math.exp(self.chain.log_support())

    @property
    def passed(self) -> bool:
        return bool(self.certificates) and all(c.passed for c in self.certificates)

    def certificate(self, name: str) -> Certificate:
        for c in self.certificates:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "p": self.p,
            "epsilon": self.epsilon,
            "params": self.params,
            "log_widths": self.chain.log_widths.tolist(),
            "log_rest": self.chain.log_rest,
            "intermediates": self.intermediates,
            "certificates": [c.to_dict() for c in self.certificates],
        }


class MollifierBuild(NamedTuple):
    phi: PiecewisePoly | None
    plan: MollifierPlan


def _check_p_open(p: float) -> None:
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")


def _check_eps(eps: float) -> None:
    if not (eps > 0) or not math.isfinite(eps):
        raise ConfigError(f"epsilon must be positive and finite, got {eps}")


# -- Sobolev schedule ---------------------------------------------------


def sobolev_schedule(k: int, p: float, eps: float) -> MollifierPlan:
    """Widths a_1..a_{k+1} for a W^{k,p}-invisible mollifier.

    a_1 = min{(eps^p / (2(k+1)))^{1/(1-p)}, eps/2} and, for l >= 2,
    a_l = min{(eps^p (a_1...a_{l-1})^p / (2^l (k+1)))^{1/(1-p)}, a_{l-1}/2}.
    Evaluated in logarithms, so widths below the double range are kept.
    """
    if k < 0 or int(k) != k:
        raise ConfigError(f"k must be a non-negative integer, got {k}")
    _check_p_open(p)
    _check_eps(eps)
    q = 1.0 - p
    le = math.log(eps)
    lk = math.log(k + 1)
    logs = [min((p * le - math.log(2.0) - lk) / q, le - math.log(2.0))]
    for l in range(2, k + 2):
        cand = (p * le + p * math.fsum(logs) - l * math.log(2.0) - lk) / q
        logs.append(min(cand, logs[-1] - math.log(2.0)))
    if not all(math.isfinite(x) for x in logs):
        raise UnderflowWidth("schedule produced a non-finite log-width")
    chain = BoxChain(np.asarray(logs))
    smallest = min(logs) / math.log(10.0)
    return MollifierPlan(
        mode="sobolev",
        p=p,
        epsilon=eps,
        chain=chain,
        params={"k": int(k)},
        intermediates={"log10_min_width": smallest, "representable": smallest > -300.0},
    )


def _norm_certificates(
    plan: MollifierPlan, orders: Iterable[int], log_targets: Sequence[float], name: str
) -> tuple[list[Certificate], list[LogEnclosure]]:
    certs, encs = [], []
    for n, lt in zip(orders, log_targets):
        enc = plan.chain.lp_enclosure(n, plan.p)
        encs.append(enc)
        certs.append(
            Certificate(
                f"{name}[{n}]",
                enc.log_hi <= lt,
                enc.log_hi,
                lt,
                enc.method,
                "log of upper estimate for ||Phi^(n)||_p^p vs log of target",
            )
        )
    return certs, encs


def _mass_certificate(chain: BoxChain) -> Certificate:
    # mass is invariant under dilation: measure the normalised head
    psi, _, log_rest = chain._normalized_prefix(0)
    m = psi.integral()
    ok = abs(m - 1.0) <= MASS_TOL
    detail = "integral of the explicit head" + ("" if log_rest == -math.inf else "; remainder factors have unit mass")
    return Certificate("mass", ok, m, MASS_TOL, "exact", detail)


def _support_certificate(chain: BoxChain, eps: float) -> Certificate:
    ls = chain.log_support()
    return Certificate("support", ls <= math.log(eps), math.exp(ls), eps, "exact", "sum of widths")


def certify_sobolev(plan: MollifierPlan) -> MollifierPlan:
    k, p, eps = plan.params["k"], plan.p, plan.epsilon
    certs = [_mass_certificate(plan.chain), _support_certificate(plan.chain, eps)]
    per_term = p * math.log(eps) - math.log(k + 1)
    terms, encs = _norm_certificates(plan, range(k + 1), [per_term] * (k + 1), "derivative")
    total_hi = math.fsum(math.exp(e.log_hi - p * math.log(eps)) for e in encs)
    methods = sorted({e.method for e in encs})
    certs.append(
        Certificate(
            "quasinorm",
            total_hi < 1.0,
            total_hi,
            1.0,
            "+".join(methods),
            "sum over n<=k of ||Phi^(n)||_p^p divided by eps^p",
        )
    )
    certs.extend(terms)
    plan.certificates = certs
    return plan


def build_invisible_sobolev(k: int, p: float, eps: float, strict: bool = True) -> MollifierBuild:
    """Sobolev mollifier with mass, support and quasinorm certificates.

    The piecewise polynomial is returned when the widths are representable;
    otherwise ``phi`` is None and the certificates come from the chain
    enclosures.
    """
    plan = certify_sobolev(sobolev_schedule(k, p, eps))
    phi = None
    if plan.chain.materializable(max_factors=len(plan.chain)) and plan.chain.log_widths.min() > math.log(1e-300):
        phi = plan.chain.materialize()
    if strict:
        _raise_on_failure(plan)
    return MollifierBuild(phi, plan)


def _raise_on_failure(plan: MollifierPlan) -> None:
    for c in plan.certificates:
        if not c.passed:
            raise CertificateFailure(c.name, c.to_dict())


# -- Carleman schedule ---------------------------------------------------


def _choose_r_rho(p: float, delta: float) -> tuple[float, float]:
    if math.isinf(delta):
        return p / 2.0, 1.0
    if not delta > 1.0:
        raise NotApplicable(f"growth exponent delta = {delta} must exceed 1")
    rho = (delta - 1.0) / 4.0
    r = p * (1.0 - (1.0 + rho) / delta)
    return min(max(r, 1e-300), p), rho


def _log_b(M: WeightSequence, l: int, K: int, r: float, q: float) -> float:
    """log b_{l,K} = sum_{j=0..K} r q^j log M_{l-1+j}."""
    lr, lq = math.log(r), math.log(q)
    return math.fsum(M.weighted_logM(l - 1 + j, lr + j * lq) for j in range(K + 1))


def _log_alpha(M: WeightSequence, l: int, K: int, r: float, q: float) -> float:
    """log alpha_{l,K} = log b_{l,K} - log b_{l+1,K}, summed termwise."""
    lr, lq = math.log(r), math.log(q)
    terms = []
    for j in range(K + 1):
        w = lr + j * lq
        terms.append(M.weighted_logM(l - 1 + j, w) - M.weighted_logM(l + j, w))
    return math.fsum(terms)


@dataclass(frozen=True)
class ScheduleWeight:
    weight: WeightSequence
    routed: bool
    clause: str
    delta: float


def schedule_weight(M: WeightSequence, p: float) -> ScheduleWeight:
    """Weight used to build the Carleman schedule (minorant under clause (i))."""
    _check_p_open(p)
    ks = kappa(M, p)
    if ks.status != "diverged":
        raise NotApplicable(f"kappa(p, M) is {ks.status}; the Carleman schedule needs it divergent")
    reg = p_regular(M, p)
    if not reg.regular:
        raise NotApplicable("weight sequence is not p-regular")
    if reg.clause == "i":
        N = minorant(M, p)
        regN = p_regular(N, p)
        return ScheduleWeight(N, True, "i", regN.delta_growth)
    return ScheduleWeight(M, False, "ii", reg.delta_growth)


def carleman_schedule(
    M: WeightSequence, p: float, eps: float, K: int | None = None, k_max: int = K_MAX
) -> MollifierPlan:
    """Widths a_l = l^{-(1+rho)} alpha_{l,K} for l = 1..K.

    With K None the doubling search 8, 16, ... stops at the first K whose
    support sum(a_l) is at most eps with log b_{1,K} >= 0.
    """
    _check_eps(eps)
    sw = schedule_weight(M, p)
    if K is not None:
        return _carleman_plan(M, sw, p, eps, int(K))
    K = K_START
    while K <= k_max:
        plan = _carleman_plan(M, sw, p, eps, K)
        if plan.intermediates["log_b1"] >= 0 and plan.chain.log_support() <= math.log(eps):
            return plan
        K *= 2
    raise KExhausted(f"no K <= {k_max} brings the support under {eps}")


def _carleman_plan(M: WeightSequence, sw: ScheduleWeight, p: float, eps: float, K: int) -> MollifierPlan:
    if K < 1:
        raise ConfigError("K must be at least 1")
    N = sw.weight
    q = 1.0 - p
    r, rho = _choose_r_rho(p, sw.delta)
    explicit = min(K, EXPLICIT_FACTORS)
    log_alpha = [_log_alpha(N, l, K, r, q) for l in range(1, explicit + 2)]
    log_c = [-(1.0 + rho) * math.log(l) for l in range(1, explicit + 1)]
    log_a = [lc + la for lc, la in zip(log_c, log_alpha)]
    if not all(math.isfinite(x) for x in log_a):
        bad = next(i for i, x in enumerate(log_a) if not math.isfinite(x))
        explicit = bad
        log_a = log_a[:bad]
        if explicit < 2:
            raise UnderflowWidth("leading Carleman widths are not representable even in logarithms")
    log_rest = -math.inf
    if K > explicit:
        # alpha decreases, so the unlisted factors sum to at most alpha_{L+1} sum_{l>L} c_l
        c_tail = math.fsum(l ** -(1.0 + rho) for l in range(explicit + 1, K + 1))
        la = log_alpha[explicit] if math.isfinite(log_alpha[explicit]) else log_alpha[explicit - 1]
        log_rest = la + math.log(c_tail)
    chain = BoxChain(np.asarray(log_a), log_rest)
    c_sum = math.fsum(l ** -(1.0 + rho) for l in range(1, K + 1))
    diffs = np.diff(np.asarray(log_alpha[: len(log_a) + 1]))
    return MollifierPlan(
        mode="carleman",
        p=p,
        epsilon=eps,
        chain=chain,
        params={"K": K, "r": r, "rho": rho, "delta": sw.delta, "routed_through_minorant": sw.routed},
        intermediates={
            "schedule_weight": N.describe(),
            "log_b1": _log_b(N, 1, K, r, q),
            "log_alpha": log_alpha[: len(log_a)],
            "log_c": log_c[: len(log_a)],
            "c_sum": c_sum,
            "alpha_decreasing": bool(np.all(diffs <= 1e-12)),
            "explicit_factors": len(log_a),
            "log_support_bound": math.log(c_sum) + log_alpha[0],
        },
    )


@dataclass(frozen=True)
class TamenessReport:
    p: float
    points: list[tuple[int, float]]
    theta_hat: float
    non_increasing_top: bool

    def values(self) -> list[float]:
        return [v for _, v in self.points]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "points": [[n, v] for n, v in self.points],
            "theta_hat": self.theta_hat,
            "non_increasing_top": self.non_increasing_top,
        }


def _log_sup_derivative(f, n: int) -> float:
    if hasattr(f, "log_sup_derivative"):
        return float(f.log_sup_derivative(n))
    if isinstance(f, MollifierPlan):
        f = f.chain
    if isinstance(f, BoxChain):
        return f.sup_enclosure(n).log_mid
    if isinstance(f, PiecewisePoly):
        d = derivative(f, n)
        if d.has_atoms:
            return math.inf
        s = sup_norm(d.regular)
        return math.log(s) if s > 0 else -math.inf
    if callable(f):
        return float(f(n))
    raise ConfigError(f"cannot take derivatives of {type(f).__name__}")


def tameness_diagnostic(f, p: float, n_range: Iterable[int]) -> TamenessReport:
    """(1-p)^n log ||f^(n)||_inf over n_range, with its max over the top half."""
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
    ns = list(n_range)
    if not ns:
        raise ConfigError("empty range")
    q = 1.0 - p
    pts = []
    for n in ns:
        ls = _log_sup_derivative(f, n)
        pts.append((n, (q**n) * ls if math.isfinite(ls) else ls))
    top = [v for n, v in pts if n >= ns[0] + (ns[-1] - ns[0]) / 2.0]
    nonincr = all(b <= a + 1e-12 for a, b in zip(top, top[1:]))
    return TamenessReport(p, pts, max(top), nonincr)


def certify_carleman(
    plan: MollifierPlan, M: WeightSequence, n_check: int, schedule_M: WeightSequence | None = None
) -> MollifierPlan:
    """Mass, support, ||Phi^(n)||_p <= eps M_n for n <= n_check, tameness window.

    The norm targets use the caller's weight M.  When the schedule was built
    from a minorant N <= M the same comparison against N is recorded as a
    diagnostic (``norm_vs_schedule_weight``), outside the pass decision.
    """
    p, eps = plan.p, plan.epsilon
    chain = plan.chain
    top = min(n_check, len(chain) - 1)
    certs = [_mass_certificate(chain), _support_certificate(chain, eps)]
    targets = [p * (math.log(eps) + M.logM(n)) for n in range(top + 1)]
    norm_certs, encs = _norm_certificates(plan, range(top + 1), targets, "norm")
    certs.extend(norm_certs)
    tame = tameness_diagnostic(chain, p, range(0, top + 1))
    lo = top // 2
    window = [v for n, v in tame.points if n >= lo]
    ok = all(b <= a + 1e-12 for a, b in zip(window, window[1:]))
    certs.append(
        Certificate(
            "tameness_window",
            ok,
            window[-1],
            window[0],
            "enclosure-midpoint",
            f"(1-p)^n log ||Phi^(n)||_inf non-increasing over n in [{lo}, {top}]",
        )
    )
    plan.certificates = certs
    ext_top = len(chain) - 1
    ext = tameness_diagnostic(chain, p, range(0, ext_top + 1)) if ext_top > top else tame
    plan.intermediates["tameness_window"] = tame.to_dict()
    plan.intermediates["tameness_extended"] = ext.to_dict()
    if schedule_M is not None and plan.params.get("routed_through_minorant"):
        plan.intermediates["norm_vs_schedule_weight"] = {
            "weight": schedule_M.describe(),
            "passed": [bool(e.log_hi <= p * (math.log(eps) + schedule_M.logM(n))) for n, e in enumerate(encs)],
        }
    return plan


def build_invisible_carleman(
    M: WeightSequence,
    p: float,
    eps: float,
    K: int | None = None,
    n_check: int = 6,
    k_max: int = K_MAX,
    strict: bool = True,
) -> MollifierBuild:
    """Carleman mollifier; with K None, doubles K until every certificate passes."""
    _check_eps(eps)
    if n_check < 0:
        raise ConfigError("n_check must be non-negative")
    sw = schedule_weight(M, p)
    Ks = [int(K)] if K is not None else _doubling(k_max)
    plan = None
    for k in Ks:
        plan = _carleman_plan(M, sw, p, eps, k)
        certify_carleman(plan, M, n_check, sw.weight)
        plan.intermediates["K_tried"] = Ks[: Ks.index(k) + 1]
        if plan.passed:
            break
    assert plan is not None
    if not plan.passed and strict:
        if K is None:
            failing = [c.name for c in plan.certificates if not c.passed]
            raise KExhausted(f"no K <= {k_max} passes all certificates; last failures: {failing}")
        _raise_on_failure(plan)
    phi = None
    if plan.chain.materializable(max_factors=len(plan.chain)) and plan.chain.log_widths.min() > math.log(1e-300):
        phi = plan.chain.materialize()
    return MollifierBuild(phi, plan)


def _doubling(k_max: int) -> list[int]:
    out, k = [], K_START
    while k <= k_max:
        out.append(k)
        k *= 2
    return out
