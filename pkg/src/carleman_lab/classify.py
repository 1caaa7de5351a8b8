"""Regime classification and compactly supported witnesses.

The p-characteristic decides between the coupled (smooth) phase and the
disconnected phase; inside the coupled phase, quasianalyticity depends on
theta and, at theta = 0, on the associated sequence N.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .chains import BoxChain
from .errors import (
    ConfigError,
    DivergentTail,
    Inconclusive,
    NotApplicable,
    RhoNotFound,
)
from .weights import (
    KappaResult,
    WeightSequence,
    associated_N,
    decay_regular,
    denjoy_carleman,
    from_table,
    is_log_convex,
    kappa,
    p_regular,
)

LOG2 = math.log(2.0)
N_PREFIX = 8
LOG_CONVEX_WINDOW = 64
# the infinite chain is summed a few factors past the listed ones;
# the widths fall super-exponentially, so the rest is far below rounding
EXTRA_TAIL = 12


@dataclass
class RegimeReport:
    p: float
    theta: float
    weight: str
    kappa: KappaResult
    phase: str  # coupled_smooth | disconnected | sobolev_degenerate | inconclusive
    regularity: dict
    quasianalytic: str  # yes | no | deferred_to_C_N | not_applicable
    quasianalytic_verdict: str | None
    confidence: str
    N_prefix: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "theta": self.theta,
            "weight": self.weight,
            "kappa": asdict(self.kappa),
            "phase": self.phase,
            "regularity": self.regularity,
            "quasianalytic": self.quasianalytic,
            "quasianalytic_verdict": self.quasianalytic_verdict,
            "confidence": self.confidence,
            "N_prefix": self.N_prefix,
            "notes": self.notes,
        }


def _check(p: float, theta: float) -> None:
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")
    if not theta >= 0:
        raise ConfigError(f"theta must be non-negative, got {theta}")


def _bounded_below(M: WeightSequence, n_hi: int) -> bool:
    """inf_n log M_n > -inf; families are decided by their closed form."""
    if M.kind in ("constant", "gevrey", "factorial", "expchar", "minorant", "sobolev"):
        return True
    top = n_hi if M.length is None else min(n_hi, M.length - 1)
    return all(M.logM(n) > -math.inf for n in range(top + 1))


def _associated_table(M: WeightSequence, p: float, theta: float, n_max: int) -> list[float]:
    return [associated_N(M, p, theta, n).log_value for n in range(n_max + 1)]


def classify(M: WeightSequence, p: float, theta: float = 0.0, n_window: int = 48) -> RegimeReport:
    """Phase, regularity gates and quasianalyticity verdict for (M, p, theta)."""
    _check(p, theta)
    ks = kappa(M, p)
    lc = is_log_convex(M, (0, LOG_CONVEX_WINDOW))
    reg: dict = {"log_convex": lc.ok, "bounded_below": _bounded_below(M, LOG_CONVEX_WINDOW)}
    notes: list[str] = []
    desc = M.describe()
    if M.degenerate:
        notes.append("degenerate weights: the completion splits as a sum of L^p copies, one per retained derivative")
        return RegimeReport(
            p, theta, desc, ks, "sobolev_degenerate", reg, "not_applicable", None, "analytic", [], notes
        )
    if ks.status == "diverged":
        try:
            pr = p_regular(M, p)
            reg["p_regular"] = pr.regular
            reg["p_regular_clause"] = pr.clause
            conf = pr.confidence
        except (NotApplicable, Inconclusive) as exc:
            reg["p_regular"] = None
            notes.append(f"p-regularity undecided: {exc}")
            conf = "heuristic"
        phase = "disconnected" if reg.get("p_regular") else "inconclusive"
        if phase == "inconclusive":
            notes.append("kappa diverges but p-regularity is not established")
        notes.append("quasianalyticity is not addressed when kappa diverges")
        return RegimeReport(p, theta, desc, ks, phase, reg, "not_applicable", None, conf, [], notes)
    if ks.status != "finite":
        notes.append(f"kappa inconclusive: {ks.note}")
        return RegimeReport(p, theta, desc, ks, "inconclusive", reg, "not_applicable", None, "heuristic", [], notes)

    prefix = _associated_table(M, p, theta, N_PREFIX - 1)
    try:
        dr = decay_regular(M, p)
        reg["decay_regular"] = dr.regular
        reg["decay_regular_confidence"] = dr.confidence
    except (NotApplicable, Inconclusive) as exc:
        dr = None
        reg["decay_regular"] = None
        notes.append(f"decay-regularity undecided: {exc}")
    if not (lc.ok and reg["bounded_below"]):
        notes.append("quasianalyticity theorem needs a log-convex sequence bounded away from zero")
        return RegimeReport(p, theta, desc, ks, "coupled_smooth", reg, "not_applicable", None, "heuristic", prefix, notes)
    if theta > 0:
        notes.append("theta > 0: a compactly supported witness exists, see quasianalyticity_witness")
        return RegimeReport(p, theta, desc, ks, "coupled_smooth", reg, "no", "non_quasianalytic", "analytic", prefix, notes)
    if dr is None or not dr.regular:
        notes.append("theta = 0 without decay-regularity: no criterion applies")
        return RegimeReport(p, theta, desc, ks, "coupled_smooth", reg, "not_applicable", None, "heuristic", prefix, notes)
    verdict, conf, detail = associated_quasianalyticity(M, p, n_window)
    notes.append(detail)
    return RegimeReport(p, theta, desc, ks, "coupled_smooth", reg, "deferred_to_C_N", verdict, conf, prefix, notes)


def associated_quasianalyticity(M: WeightSequence, p: float, n_window: int = 48) -> tuple[str | None, str, str]:
    """Denjoy-Carleman verdict for the associated sequence N.

    N_{n-1}/N_n is a weighted geometric mean of M_m/M_{m+1} over m >= n, so
    for log-convex M it is at most M_n/M_{n+1}: C_N inherits
    non-quasianalyticity.  For ratios (n+1)^(-sigma), Jensen's inequality
    gives N_{n-1}/N_n >= (n + 1 + 1/p)^(-sigma), the same p-series class.
    Other sequences fall back to the window heuristic on a table of N.
    """
    try:
        dm = denjoy_carleman(M, n_max=n_window)
    except Inconclusive:
        dm = None
    if dm is not None and dm.confidence == "analytic":
        if dm.verdict == "non_quasianalytic":
            return dm.verdict, "analytic", "N_(n-1)/N_n <= M_n/M_(n+1) and C_M is non-quasianalytic"
        if M.kind in ("constant", "gevrey", "factorial"):
            return dm.verdict, "analytic", "N_(n-1)/N_n >= (n+1+1/p)^(-sigma): same p-series as M"
    N = from_table(_associated_table(M, p, 0.0, n_window))
    try:
        dc = denjoy_carleman(N, n_max=n_window)
    except Inconclusive as exc:
        return None, "heuristic", f"Denjoy-Carleman test on N undecided: {exc}"
    return dc.verdict, "heuristic", f"window heuristic on N over n <= {n_window}: {dc.detail}"


# -- witnesses ----------------------------------------------------------------


@dataclass
class QuasianalyticityWitness:
    chain: BoxChain
    theta_prime: float
    p: float
    rho: float
    certificates: dict
    tameness: list[tuple[int, float]]

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.certificates.values())

    def theta_hat(self, window: tuple[int, int] | None = None) -> float:
        """Tameness profile at the top of the window, the estimate closest to the limit."""
        pts = self._window(window)
        return pts[-1][1]

    def _window(self, window):
        if window is None:
            return self.tameness
        lo, hi = window
        pts = [(n, v) for n, v in self.tameness if lo <= n <= hi]
        if not pts:
            raise ConfigError(f"no tameness points in window {window}")
        return pts

    def to_dict(self) -> dict:
        return {
            "theta_prime": self.theta_prime,
            "p": self.p,
            "rho": self.rho,
            "log_widths": self.chain.log_widths.tolist(),
            "log_rest": self.chain.log_rest,
            "certificates": self.certificates,
            "tameness": [[n, v] for n, v in self.tameness],
            "passed": self.passed,
        }


def witness_log_widths(M: WeightSequence, p: float, theta_prime: float, count: int) -> np.ndarray:
    """log a_1 = -log N_0, log a_n = log N_{n-2} - log N_{n-1}, so that 1/(a_1...a_{n+1}) = N_n."""
    logN = _associated_table(M, p, theta_prime, count - 1)
    out = [-logN[0]] + [logN[n - 2] - logN[n - 1] for n in range(2, count + 1)]
    return np.asarray(out)


def quasianalyticity_witness(
    M: WeightSequence, p: float, theta_prime: float, K: int = 14, n_check: int | None = None
) -> QuasianalyticityWitness:
    """Compactly supported Phi with finite weighted quasinorm and tameness level theta'."""
    _check(p, theta_prime)
    if theta_prime <= 0:
        raise ConfigError("theta' must be positive")
    if K < 3:
        raise ConfigError("K must be at least 3")
    ks = kappa(M, p)
    if ks.status != "finite":
        raise NotApplicable("the witness needs a finite p-characteristic")
    if M.degenerate or not _bounded_below(M, LOG_CONVEX_WINDOW):
        raise NotApplicable("the witness needs weights bounded away from zero")
    lc = is_log_convex(M, (0, K + EXTRA_TAIL + 2))
    if not lc.ok:
        raise NotApplicable(f"weights are not log-convex at n={lc.first_violation}")
    top = K - 1 if n_check is None else min(n_check, K - 1)
    try:
        lw_all = witness_log_widths(M, p, theta_prime, K + EXTRA_TAIL)
    except DivergentTail as exc:
        raise NotApplicable(str(exc)) from exc
    lw, extra = lw_all[:K], lw_all[K:]
    log_rest = float(np.logaddexp.reduce(extra))
    chain = BoxChain(lw, log_rest)
    q = 1.0 - p

    steps = np.diff(lw_all)  # log(a_{m+1} / a_m), m = 1..
    log_rho = float(np.max(steps[1:]))
    if not log_rho < 0:
        raise RhoNotFound(f"no rho < 1: max a_(m+1)/a_m = {math.exp(log_rho)} for m >= 2")
    rho = math.exp(log_rho)
    # a_{n+2} / a_{n+1} <= exp(-p^2 theta' q^{-n-1}), n >= 1
    decay = [
        float(steps[n] - (-(p**2) * theta_prime * q ** (-n - 1))) for n in range(1, len(steps))
    ]
    certs: dict = {}
    certs["ratio_decay"] = {
        "passed": max(decay) <= 1e-9 * max(1.0, float(np.max(np.abs(steps)))),
        "worst_excess": max(decay),
        "detail": "log(a_(n+2)/a_(n+1)) + p^2 theta' (1-p)^(-n-1) <= 0",
    }
    support = math.exp(chain.log_support())
    certs["support"] = {
        "passed": math.isfinite(support),
        "value": support,
        "geometric_bound": math.exp(lw_all[0]) + math.exp(lw_all[1]) / (1 - rho),
        "rho": rho,
    }
    norm_rows = []
    ok = True
    for n in range(top + 1):
        enc = chain.lp_enclosure(n, p)
        bound = n * LOG2 + p * M.logM(n) - math.log1p(-rho)
        row_ok = enc.log_hi <= bound + 1e-9 * max(1.0, abs(bound))
        ok = ok and row_ok
        norm_rows.append({"n": n, "log_hi": enc.log_hi, "log_bound": bound, "method": enc.method, "passed": row_ok})
    certs["norm"] = {"passed": ok, "rows": norm_rows, "detail": "||Phi^(n)||_p^p <= 2^n M_n^p / (1 - rho)"}
    tame = []
    for n in range(top + 1):
        enc = chain.sup_enclosure(n)
        tame.append((n, q**n * enc.log_mid))
    return QuasianalyticityWitness(chain, theta_prime, p, rho, certs, tame)


@dataclass
class ThetaStrictness:
    theta: float
    theta_prime: float
    window: tuple[int, int]
    theta_hat: float
    margin: float
    profile: list[tuple[int, float]]
    witness: QuasianalyticityWitness

    @property
    def passed(self) -> bool:
        return self.witness.passed and self.theta_hat > self.theta + self.margin

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "theta_prime": self.theta_prime,
            "window": list(self.window),
            "theta_hat": self.theta_hat,
            "margin": self.margin,
            "profile": [[n, v] for n, v in self.profile],
            "passed": self.passed,
            "witness_certificates": {k: v["passed"] for k, v in self.witness.certificates.items()},
        }


def theta_strictness_witness(
    M: WeightSequence,
    p: float,
    theta: float,
    theta_prime: float,
    window: tuple[int, int] = (10, 24),
    margin: float | None = None,
) -> ThetaStrictness:
    """Witness of level theta' whose tameness profile stays above theta on the window."""
    _check(p, theta)
    if not theta_prime > theta:
        raise ConfigError("need theta < theta'")
    lo, hi = window
    if not 0 <= lo < hi:
        raise ConfigError("window must satisfy 0 <= lo < hi")
    lc = is_log_convex(M, (0, hi + EXTRA_TAIL + 2))
    increasing = all(M.logM(n + 1) >= M.logM(n) for n in range(hi + 1))
    if not (lc.ok and increasing):
        raise NotApplicable("strictness needs an increasing log-convex sequence")
    wit = quasianalyticity_witness(M, p, theta_prime, K=hi + 2, n_check=hi)
    prof = wit._window(window)
    if margin is None:
        margin = 0.5 * (theta_prime - theta)
    # lower envelope over the window: the profile decreases towards theta'
    return ThetaStrictness(theta, theta_prime, window, min(v for _, v in prof), margin, prof, wit)
