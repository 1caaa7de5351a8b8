"""Weight sequences M = {M_n} and their scalar functionals.

Everything is stored and combined as log M_n.  Products such as
prod_j M_j^{(1-p)^{j-1} p} overflow long before they become interesting,
while their logarithms are harmless sums.

Builtin families carry an analytic description, so functionals on them
(p-characteristic, regularity, Denjoy-Carleman) return verdicts with
``confidence="analytic"``.  Tables only support windowed heuristics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    ConfigError,
    DivergentTail,
    Inconclusive,
    NonPositiveWeight,
    NotApplicable,
    NotLogConvex,
)

__all__ = [
    "WeightSequence",
    "KappaResult",
    "LogConvexity",
    "ProductBound",
    "AssociatedValue",
    "DCVerdict",
    "PRegularity",
    "DecayRegularity",
    "constant",
    "gevrey",
    "factorial",
    "exp_char",
    "sobolev_degenerate",
    "minorant_family",
    "from_table",
    "load_table",
    "parse_weight_spec",
    "kappa",
    "is_log_convex",
    "product_bound_check",
    "shift",
    "associated_N",
    "denjoy_carleman",
    "p_regular",
    "decay_regular",
    "minorant",
]

CONVEXITY_TOL = 1e-12
DEFAULT_WINDOW = 200
GROWTH_FLAT = 0.75
TABLE_TAILS = ("none", "log-linear")
_KINDS = ("constant", "gevrey", "factorial", "expchar", "sobolev", "minorant", "table")


@dataclass(frozen=True)
class WeightSequence:
    """A positive weight sequence, evaluated in log-domain.

    ``log M_n = log_scale + base(n + offset)`` where ``base`` depends on
    ``kind``:

    ========== =============================== ==========================
    kind       params                          base(m)
    ========== =============================== ==========================
    constant   (c,)                            log c
    gevrey     (sigma,)                        sigma * log m!
    factorial  ()                              log m!
    expchar    (c, p_bound)                    c * (1 - p_bound)^(-m)
    sobolev    (k,)                            0 for m <= k, +inf beyond
    minorant   (c0, log_c1, p_bound)           log_c1 + c0 (1-p)^(-m)/(m+1)
    table      ()                              values[m] (+ tail rule)
    ========== =============================== ==========================
    """

    kind: str
    params: tuple[float, ...] = ()
    offset: int = 0
    log_scale: float = 0.0
    values: tuple[float, ...] = field(default=(), repr=False)
    tail: str = "none"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown weight kind {self.kind!r}")
        if self.offset < 0:
            raise ConfigError("offset must be non-negative")
        if self.kind == "table":
            if self.tail not in TABLE_TAILS:
                raise ConfigError(f"unknown tail rule {self.tail!r}")
            if self.tail != "none" and len(self.values) < 2:
                raise ConfigError("a tail rule needs at least two table entries")
            if not self.values:
                raise ConfigError("empty weight table")
            for i, v in enumerate(self.values):
                if math.isnan(v) or v == -math.inf:
                    raise NonPositiveWeight(f"table entry {i} has log M = {v}")
            seen_inf = False
            for v in self.values:
                if v == math.inf:
                    seen_inf = True
                elif seen_inf:
                    raise ConfigError("+inf entries are only allowed as a terminal tail")
            if seen_inf and self.tail != "none":
                raise ConfigError("a table ending in +inf cannot carry a tail rule")

    # -- evaluation -----------------------------------------------------

    @property
    def length(self) -> int | None:
        """Number of available terms, or None when the sequence is infinite."""
        if self.kind == "table" and self.tail == "none":
            return len(self.values)
        return None

    @property
    def builtin(self) -> bool:
        return self.kind != "table"

    @property
    def degenerate(self) -> bool:
        if self.kind == "sobolev":
            return True
        return self.kind == "table" and self.values[-1] == math.inf

    def _const(self) -> float:
        c = self.log_scale
        if self.kind == "constant":
            c += math.log(self.params[0])
        elif self.kind == "minorant":
            c += self.params[1]
        return c

    def _base(self, m: int) -> float:
        kind = self.kind
        if kind == "constant":
            return 0.0
        if kind == "gevrey":
            return self.params[0] * math.lgamma(m + 1)
        if kind == "factorial":
            return math.lgamma(m + 1)
        if kind == "expchar":
            c, pb = self.params
            return _exp_or_inf(math.log(c) - m * math.log1p(-pb))
        if kind == "minorant":
            c0, _, pb = self.params
            return _exp_or_inf(math.log(c0) - m * math.log1p(-pb) - math.log(m + 1))
        if kind == "sobolev":
            return 0.0 if m <= self.params[0] else math.inf
        return self._table(m)

    def _table(self, m: int) -> float:
        vals = self.values
        if m < len(vals):
            return vals[m]
        if self.tail == "none":
            raise IndexError(f"table has no entry n={m} and no tail rule")
        slope = vals[-1] - vals[-2]
        return vals[-1] + (m - len(vals) + 1) * slope

    def logM(self, n: int) -> float:
        """log M_n; +inf on overflow or in the degenerate tail."""
        if n < 0:
            raise ValueError("index must be non-negative")
        return self._const() + self._base(n + self.offset)

    def weighted_logM(self, n: int, log_w: float) -> float:
        """w * log M_n with w = exp(log_w), safe when log M_n itself overflows."""
        w = math.exp(log_w)
        m = n + self.offset
        if self.kind in ("expchar", "minorant"):
            if self.kind == "expchar":
                c, pb = self.params
                lb = math.log(c) - m * math.log1p(-pb)
            else:
                c0, _, pb = self.params
                lb = math.log(c0) - m * math.log1p(-pb) - math.log(m + 1)
            return w * self._const() + _exp_or_inf(lb + log_w)
        base = self._base(m)
        if base == math.inf:
            return math.inf
        return w * (self._const() + base)

    def log_values(self, n_max: int) -> list[float]:
        return [self.logM(n) for n in range(n_max + 1)]

    # -- transformations ------------------------------------------------

    def shift(self, k: int) -> "WeightSequence":
        """The sequence n -> M_{n+k}."""
        if k < 0:
            raise ConfigError("shift must be non-negative")
        if k == 0 or self.kind == "constant":
            return self
        if self.kind == "table":
            vals = self.values
            if self.tail == "none" or len(vals) - k >= 2:
                rest = vals[k:]
                if not rest:
                    raise ConfigError("shift removes every table entry")
                return replace(self, values=tuple(rest))
            ext = tuple(self._table(m) for m in range(k, k + 2))
            return replace(self, values=ext)
        return replace(self, offset=self.offset + k)

    def scale(self, c: float) -> "WeightSequence":
        """The sequence c * M_n."""
        if not c > 0:
            raise ConfigError("scale factor must be positive")
        if self.kind == "constant":
            return replace(self, params=(self.params[0] * c,))
        return replace(self, log_scale=self.log_scale + math.log(c))

    def describe(self) -> str:
        if self.kind == "table":
            head = f"table[{len(self.values)}, tail={self.tail}]"
        else:
            head = self.kind + "(" + ",".join(_fmt(x) for x in self.params) + ")"
        if self.offset:
            head += f"|shift:{self.offset}"
        if self.log_scale:
            head += f"|logscale:{_fmt(self.log_scale)}"
        return head


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _exp_or_inf(x: float) -> float:
    return math.inf if x > 709.0 else math.exp(x)


# -- constructors -------------------------------------------------------


def constant(c: float = 1.0) -> WeightSequence:
    if not c > 0:
        raise NonPositiveWeight("constant weight must be positive")
    return WeightSequence("constant", (float(c),))


def gevrey(sigma: float) -> WeightSequence:
    if not sigma > 0:
        raise ConfigError("Gevrey exponent must be positive")
    return WeightSequence("gevrey", (float(sigma),))


def factorial() -> WeightSequence:
    return WeightSequence("factorial")


def exp_char(c: float, p: float) -> WeightSequence:
    """M_n = exp(c (1-p)^(-n)), bound to the exponent ``p``."""
    _check_p(p)
    if not c > 0:
        raise ConfigError("expchar constant must be positive")
    return WeightSequence("expchar", (float(c), float(p)))


def sobolev_degenerate(k: int) -> WeightSequence:
    if k < 0:
        raise ConfigError("Sobolev order must be non-negative")
    return WeightSequence("sobolev", (int(k),))


def minorant_family(c0: float, log_c1: float, p: float) -> WeightSequence:
    """N_n = C1 exp(c0 (n+1)^(-1) (1-p)^(-n))."""
    _check_p(p)
    if not c0 > 0:
        raise ConfigError("minorant rate must be positive")
    return WeightSequence("minorant", (float(c0), float(log_c1), float(p)))


def from_table(log_values, tail: str = "none") -> WeightSequence:
    return WeightSequence("table", values=tuple(float(v) for v in log_values), tail=tail)


def load_table(path: str | Path, tail: str = "none") -> WeightSequence:
    """Read a CSV with columns ``n,logM``; indices must run 0, 1, 2, ..."""
    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() in ("n", "#"):
                    continue
                rows.append((int(row[0]), float(row[1])))
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read weight table {path}: {exc}") from exc
    rows.sort()
    if [n for n, _ in rows] != list(range(len(rows))):
        raise ConfigError("table indices must be 0..N without gaps")
    return from_table([v for _, v in rows], tail=tail)


def parse_weight_spec(spec: str, base_dir: str | Path | None = None) -> WeightSequence:
    """Parse the CLI mini-language.

    >>> parse_weight_spec("gevrey:1.5|shift:2").describe()
    'gevrey(1.5)|shift:2'
    """
    head, *mods = [part.strip() for part in spec.split("|")]
    name, _, arg = head.partition(":")
    try:
        if name == "const":
            seq = constant(float(arg) if arg else 1.0)
        elif name == "gevrey":
            seq = gevrey(float(arg))
        elif name == "expchar":
            c, _, p = arg.partition("@")
            if not p:
                raise ConfigError("expchar needs the form expchar:c@p")
            seq = exp_char(float(c), float(p))
        elif name == "factorial":
            seq = factorial()
        elif name == "sobolev":
            seq = sobolev_degenerate(int(arg))
        elif name == "table":
            tail = "none"
            for m in mods:
                if m.startswith("tail:"):
                    tail = m[5:]
            path = Path(arg)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            seq = load_table(path, tail=tail)
        else:
            raise ConfigError(f"unknown weight family {name!r}")
        for m in mods:
            key, _, val = m.partition(":")
            if key == "shift":
                seq = seq.shift(int(val))
            elif key == "scale":
                seq = seq.scale(float(val))
            elif key == "tail":
                continue
            else:
                raise ConfigError(f"unknown modifier {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed weight spec {spec!r}: {exc}") from exc
    return seq


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ConfigError(f"p must lie in (0,1), got {p}")


# -- p-characteristic ---------------------------------------------------


@dataclass(frozen=True)
class KappaResult:
    status: str  # finite | diverged | inconclusive
    value: float | None
    truncation_index: int
    tail_bound: float
    witness: dict | None = None
    note: str = ""


def _ratio(M: WeightSequence, q: float) -> float:
    """Geometric ratio q / q_bound of the exponential families."""
    return q / (1.0 - M.params[-1])


def _tail(M: WeightSequence, q: float, J: int) -> tuple[float, float] | None:
    """(estimate, error bound) for sum_{j>J} q^j log M_j, or None if unknown.

    Only valid for sequences whose p-characteristic converges.
    """
    const = M._const()
    lq = math.log(q)
    c_part = const * q ** (J + 1) / (1.0 - q)
    s = M.offset
    kind = M.kind
    if kind == "constant":
        return c_part, 0.0
    if kind in ("gevrey", "factorial"):
        sigma = M.params[0] if kind == "gevrey" else 1.0
        m = J + 1 + s
        if m < 2:
            return None
        t_next = math.exp((J + 1) * lq) * sigma * math.lgamma(m + 1)
        ratio = q * math.lgamma(m + 2) / math.lgamma(m + 1)
        if ratio >= 1.0:
            return None
        return c_part, t_next / (1.0 - ratio)
    if kind == "expchar":
        c, pb = M.params
        rho = _ratio(M, q)
        if rho >= 1.0:
            return None
        lead = math.log(c) - s * math.log1p(-pb) + (J + 1) * math.log(rho)
        return c_part + math.exp(lead) / (1.0 - rho), 0.0
    if kind == "minorant":
        c0, _, pb = M.params
        rho = _ratio(M, q)
        if rho >= 1.0:
            return None
        lead = math.log(c0) - s * math.log1p(-pb) + (J + 1) * math.log(rho)
        return c_part, math.exp(lead) / ((J + s + 2) * (1.0 - rho))
    if kind == "table":
        n_vals = len(M.values)
        if M.tail == "none" or J < n_vals - 1:
            return None
        # log M_j = v + (j - L) d for j >= L = n_vals - 1
        L = n_vals - 1
        v, d = M.values[-1], M.values[-1] - M.values[-2]
        # sum_{j>J} q^j (v + (j-L) d)
        geo = q ** (J + 1) / (1.0 - q)
        lin = q ** (J + 1) * ((J + 1 - L) / (1.0 - q) + q / (1.0 - q) ** 2)
        return c_part + v * geo + d * lin, 0.0
    return None


def _check_weights(M: WeightSequence, n_hi: int) -> None:
    top = n_hi if M.length is None else min(n_hi, M.length - 1)
    for n in range(top + 1):
        if M.logM(n) == -math.inf:
            raise NonPositiveWeight(f"log M_{n} = -inf")
    lc = is_log_convex(M, (0, top))
    if not lc.ok:
        raise NotLogConvex(lc.first_violation)


def kappa(M: WeightSequence, p: float, tol: float = 1e-12, n_max: int = 10_000) -> KappaResult:
    """kappa(p, M) = sum_{j>=1} (1-p)^j log M_j with a certified truncation."""
    _check_p(p)
    q = 1.0 - p
    lq = math.log(q)
    _check_weights(M, min(n_max, 64))

    if M.degenerate:
        first_inf = _first_infinite(M)
        return KappaResult(
            "diverged", None, first_inf, math.inf,
            witness={"kind": "degenerate", "first_infinite_index": first_inf},
            note="degenerate weights: log M_n = +inf from the recorded index on",
        )

    kind = M.kind
    if kind in ("expchar", "minorant"):
        rho = _ratio(M, q)
        if rho >= 1.0:
            return _diverged_family(M, q, rho, n_max)

    if kind == "table" and M.tail == "none":
        n_vals = len(M.values)
        partial = math.fsum(M.weighted_logM(j, j * lq) for j in range(1, n_vals))
        return KappaResult(
            "inconclusive", None, n_vals - 1, math.inf,
            witness={"kind": "partial_sum", "partial_sum": partial},
            note="table without a tail rule: no certified tail",
        )

    terms: list[float] = []
    for J in range(0, n_max + 1):
        if J >= 1:
            terms.append(M.weighted_logM(J, J * lq))
        tb = _tail(M, q, J)
        if tb is None:
            continue
        est, bound = tb
        if bound < tol:
            value = math.fsum(terms + [est])
            return KappaResult("finite", value, J, bound)
    partial = math.fsum(terms)
    return KappaResult(
        "inconclusive", None, n_max, math.inf,
        witness={"kind": "partial_sum", "partial_sum": partial},
        note="tail bound did not reach the tolerance before n_max",
    )


def _first_infinite(M: WeightSequence) -> int:
    if M.kind == "sobolev":
        return max(0, int(M.params[0]) + 1 - M.offset)
    return M.values.index(math.inf)


def _diverged_family(M: WeightSequence, q: float, rho: float, n_max: int) -> KappaResult:
    lq = math.log(q)
    n_probe = min(n_max, 64)
    partial = math.fsum(M.weighted_logM(j, j * lq) for j in range(1, n_probe + 1))
    s = M.offset
    const_part = M._const() * q / (1.0 - q)
    if M.kind == "expchar":
        c, pb = M.params
        lower = c * math.exp(-s * math.log1p(-pb))
        witness = {
            "kind": "terms_bounded_below",
            "lower_bound": lower,
            "ratio": rho,
            "partial_sum": partial,
        }
        note = "every non-constant term is at least the recorded lower bound"
    else:
        c0, _, pb = M.params
        amp = c0 * math.exp(-s * math.log1p(-pb))
        if rho > 1.0:
            lower = min(amp * rho ** j / (j + s + 1) for j in range(1, n_probe + 1))
            lower = min(lower, amp * rho / (s + 2))
            witness = {
                "kind": "terms_bounded_below",
                "lower_bound": lower,
                "ratio": rho,
                "partial_sum": partial,
            }
            note = "terms grow geometrically"
        else:
            witness = {
                "kind": "harmonic_comparison",
                "coefficient": amp,
                "partial_sum": partial,
            }
            note = "terms equal coefficient/(j+s+1): harmonic divergence"
    witness["constant_part"] = const_part
    return KappaResult("diverged", None, n_probe, math.inf, witness=witness, note=note)


# -- log-convexity and products ----------------------------------------


@dataclass(frozen=True)
class LogConvexity:
    ok: bool
    first_violation: int | None


def is_log_convex(M: WeightSequence, n_range: tuple[int, int] = (0, 50)) -> LogConvexity:
    """Check log M_{n+1} + log M_{n-1} >= 2 log M_n on the interior of n_range."""
    lo, hi = n_range
    if M.length is not None:
        hi = min(hi, M.length - 1)
    vals = [M.logM(n) for n in range(lo, hi + 1)]
    for i in range(1, len(vals) - 1):
        a, b, c = vals[i - 1], vals[i], vals[i + 1]
        if b == math.inf:
            if c != math.inf:
                return LogConvexity(False, lo + i)
            continue
        if c == math.inf:
            continue
        if a + c - 2.0 * b < -CONVEXITY_TOL * max(1.0, abs(b)):
            return LogConvexity(False, lo + i)
    return LogConvexity(True, None)


@dataclass(frozen=True)
class ProductBound:
    slack: float
    worst_j: int


def product_bound_check(M: WeightSequence, n: int) -> ProductBound:
    """min over 0<=j<=n of log(M_0 M_n) - log(M_j M_{n-j})."""
    lc = is_log_convex(M, (0, n))
    if not lc.ok:
        raise NotLogConvex(lc.first_violation)
    vals = [M.logM(j) for j in range(n + 1)]
    best, arg = math.inf, 0
    for j in range(n + 1):
        lhs = vals[j] + vals[n - j]
        rhs = vals[0] + vals[n]
        if rhs == math.inf:
            slack = math.inf
        else:
            slack = rhs - lhs
        if slack < best:
            best, arg = slack, j
    return ProductBound(best, arg)


def shift(M: WeightSequence, k: int) -> WeightSequence:
    return M.shift(k)


# -- associated sequence -----------------------------------------------


@dataclass(frozen=True)
class AssociatedValue:
    log_value: float
    truncation_index: int
    tail_bound: float


def associated_N(
    M: WeightSequence,
    p: float,
    theta: float,
    n: int,
    K: int | None = None,
    tol: float = 1e-10,
) -> AssociatedValue:
    """log N_{n,theta} = theta (1-p)^(-n) + sum_{j>=1} (1-p)^(j-1) p log M_{n+j}.

    With ``K`` the sum is cut after K terms and the remainder is bounded
    (or evaluated in closed form where the family allows it); otherwise K
    grows until the remainder bound drops below ``tol``.
    """
    _check_p(p)
    if theta < 0:
        raise ConfigError("theta must be non-negative")
    q = 1.0 - p
    ks = kappa(M, p, tol=tol * q / p)
    if ks.status == "diverged":
        raise DivergentTail("kappa(p, M) = +inf, the associated sequence is infinite")
    Ms = M.shift(n)
    lq = math.log(q)
    factor = p / q
    lead = theta * math.exp(-n * lq)
    if K is None:
        if ks.status != "finite":
            raise Inconclusive("no certified tail for the associated sequence")
        kn = kappa(Ms, p, tol=tol * q / p)
        if kn.status != "finite":
            raise Inconclusive("no certified tail for the shifted sequence")
        return AssociatedValue(lead + factor * kn.value, kn.truncation_index, factor * kn.tail_bound)
    terms = [Ms.weighted_logM(j, j * lq) for j in range(1, K + 1)]
    tb = _tail(Ms, q, K)
    if tb is None:
        raise Inconclusive("no certified tail bound at the requested truncation")
    est, bound = tb
    return AssociatedValue(lead + factor * math.fsum(terms + [est]), K, factor * bound)


# -- Denjoy-Carleman ----------------------------------------------------


@dataclass(frozen=True)
class DCVerdict:
    verdict: str  # quasianalytic | non_quasianalytic
    confidence: str  # analytic | heuristic
    detail: str


def denjoy_carleman(M: WeightSequence, n_max: int = DEFAULT_WINDOW) -> DCVerdict:
    """Quasianalyticity of C_M via divergence of sum M_n / M_{n+1}."""
    if M.degenerate:
        raise NotApplicable("degenerate weights define no Carleman class")
    _check_weights(M, min(n_max, 64))
    kind = M.kind
    if kind == "constant":
        return DCVerdict("quasianalytic", "analytic", "M_n/M_{n+1} = 1 for all n")
    if kind in ("gevrey", "factorial"):
        sigma = M.params[0] if kind == "gevrey" else 1.0
        detail = f"M_n/M_(n+1) = (n+{M.offset}+1)^(-{_fmt(sigma)})"
        if sigma <= 1.0:
            return DCVerdict("quasianalytic", "analytic", detail + ": p-series diverges")
        return DCVerdict("non_quasianalytic", "analytic", detail + ": p-series converges")
    if kind in ("expchar", "minorant"):
        return DCVerdict(
            "non_quasianalytic", "analytic",
            "log(M_n/M_(n+1)) decreases geometrically to -inf",
        )
    return _dc_table(M, n_max)


def _dc_table(M: WeightSequence, n_max: int) -> DCVerdict:
    top = n_max if M.length is None else min(n_max, M.length - 2)
    if top < 8:
        raise Inconclusive("table too short for a Denjoy-Carleman heuristic")
    lo = max(1, top // 2)
    log_t = [M.logM(n) - M.logM(n + 1) for n in range(lo, top + 1)]
    ns = list(range(lo, top + 1))
    scaled = [math.log(n) + lt for n, lt in zip(ns, log_t)]
    if min(scaled) > math.log(0.05):
        return DCVerdict(
            "quasianalytic", "heuristic",
            f"n*M_n/M_(n+1) >= {_fmt(math.exp(min(scaled)))} on [{lo},{top}]",
        )
    ratios = [b - a for a, b in zip(log_t, log_t[1:])]
    if max(ratios) < math.log(0.99):
        return DCVerdict(
            "non_quasianalytic", "heuristic",
            f"ratio test: successive term ratios <= {_fmt(math.exp(max(ratios)))}",
        )
    slope = _fit_slope([math.log(n) for n in ns], log_t)
    if slope < -1.05:
        return DCVerdict(
            "non_quasianalytic", "heuristic",
            f"p-series fit: terms ~ n^{_fmt(slope)}",
        )
    raise Inconclusive("neither the harmonic nor the summability heuristic fired")


def _fit_slope(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx


# -- regularity ---------------------------------------------------------


@dataclass(frozen=True)
class PRegularity:
    regular: bool
    clause: str | None  # "i" | "ii" | None
    liminf_growth: float  # liminf (1-p)^n log M_n
    delta_growth: float  # liminf log M_n / (n log n)
    delta_def: float  # limsup n log n / log M_n = 1 / delta_growth
    confidence: str
    note: str = ""


def p_regular(M: WeightSequence, p: float, n_max: int = DEFAULT_WINDOW) -> PRegularity:
    """p-regularity for sequences with infinite p-characteristic.

    Two readings of the growth exponent coexist: the definition bounds
    ``delta_def = limsup n log n / log M_n`` below 1, while the mollifier
    construction uses ``delta_growth = liminf log M_n / (n log n)`` above 1.
    Both are reported; clause (ii) fires when ``delta_def < 1``.
    """
    _check_p(p)
    if M.degenerate:
        raise NotApplicable("p-regularity is not defined for degenerate weights")
    ks = kappa(M, p)
    if ks.status == "finite":
        raise NotApplicable("kappa(p, M) is finite; p-regularity applies only when it diverges")
    q = 1.0 - p
    conv = "clause (ii) uses delta_def = limsup n log n / log M_n < 1"
    if M.kind in ("expchar", "minorant"):
        rho = _ratio(M, q)
        s = M.offset
        if M.kind == "expchar":
            c, pb = M.params
            growth = math.inf if rho > 1.0 else c * math.exp(-s * math.log1p(-pb))
            if growth > 0:
                return PRegularity(True, "i", growth, math.inf, 0.0, "analytic", conv)
        else:
            if rho > 1.0:
                return PRegularity(True, "i", math.inf, math.inf, 0.0, "analytic", conv)
            # (1-p)^n log N_n -> 0 while log N_n / (n log n) -> inf
            return PRegularity(True, "ii", 0.0, math.inf, 0.0, "analytic", conv)
    return _p_regular_window(M, q, n_max, conv)


def _p_regular_window(M: WeightSequence, q: float, n_max: int, conv: str) -> PRegularity:
    top = n_max if M.length is None else min(n_max, M.length - 1)
    lo = max(2, top // 2)
    if top - lo < 4:
        raise Inconclusive("window too short for p-regularity estimates")
    lq = math.log(q)
    growth = [M.weighted_logM(n, n * lq) for n in range(lo, top + 1)]
    ratio = [M.logM(n) / (n * math.log(n)) for n in range(lo, top + 1)]
    liminf_growth = min(growth)
    delta_growth = min(ratio)
    delta_def = math.inf if delta_growth <= 0 else 1.0 / delta_growth
    # across [n/2, n] a positive limit keeps the ratio near 1, an O(1/n) decay halves it
    if liminf_growth > 0 and growth[-1] >= GROWTH_FLAT * growth[0]:
        return PRegularity(True, "i", liminf_growth, delta_growth, delta_def, "heuristic", conv)
    decaying = growth[-1] < GROWTH_FLAT * growth[0]
    if decaying and delta_def < 1.0:
        return PRegularity(True, "ii", liminf_growth, delta_growth, delta_def, "heuristic", conv)
    return PRegularity(False, None, liminf_growth, delta_growth, delta_def, "heuristic", conv)


@dataclass(frozen=True)
class DecayRegularity:
    regular: bool
    summable: bool
    epsilon_fit: bool
    epsilon: float | None
    confidence: str
    note: str = ""


def decay_regular(M: WeightSequence, p: float, n_max: int = DEFAULT_WINDOW) -> DecayRegularity:
    """Decay-regularity (finite p-characteristic regime).

    Reports both clauses separately: ``epsilon_fit`` for
    M_n / M_{n+1} >= eps^n (n >= 1) and ``summable`` for sum M_n / M_{n+1} < inf.
    """
    _check_p(p)
    if M.degenerate:
        raise NotApplicable("decay-regularity is not defined for degenerate weights")
    ks = kappa(M, p)
    if ks.status == "diverged":
        raise NotApplicable("kappa(p, M) diverges; decay-regularity needs it finite")
    kind = M.kind
    top = n_max if M.length is None else min(n_max, M.length - 2)
    eps_obs = _eps_fit(M, top)
    if kind == "constant":
        return DecayRegularity(True, False, True, 1.0, "analytic", "M_n/M_(n+1) = 1")
    if kind in ("gevrey", "factorial"):
        sigma = M.params[0] if kind == "gevrey" else 1.0
        return DecayRegularity(
            True, sigma > 1.0, True, eps_obs, "analytic",
            "ratios are (n+s+1)^(-sigma): polynomial, so an exponential floor exists",
        )
    if kind in ("expchar", "minorant"):
        return DecayRegularity(
            True, True, False, None, "analytic",
            "log-ratios decay geometrically: summable, no exponential floor",
        )
    # table heuristics
    lo = max(1, top // 2)
    log_t = [M.logM(n) - M.logM(n + 1) for n in range(1, top + 1)]
    per_n = [-lt / n for n, lt in zip(range(1, top + 1), log_t)]
    first = max(per_n[: lo])
    second = max(per_n[lo - 1:])
    eps_ok = second <= first + 1e-12
    window = log_t[lo - 1:]
    steps = [b - a for a, b in zip(window, window[1:])]
    summable = bool(steps) and max(steps) < math.log(0.99)
    if not summable and len(window) > 2:
        xs = [math.log(n) for n in range(lo, top + 1)]
        summable = _fit_slope(xs, window) < -1.05
    return DecayRegularity(
        eps_ok or summable, summable, eps_ok, eps_obs if eps_ok else None, "heuristic",
        "window heuristics on the available table",
    )


def _eps_fit(M: WeightSequence, top: int) -> float | None:
    vals = []
    for n in range(1, top + 1):
        lt = M.logM(n) - M.logM(n + 1)
        if not math.isfinite(lt):
            return None
        vals.append(lt / n)
    return math.exp(min(vals)) if vals else None


# -- minorant -----------------------------------------------------------


def minorant(M: WeightSequence, p: float, n_eval: int = DEFAULT_WINDOW) -> WeightSequence:
    """A p-regular minorant N_n = C1 exp(c0 (n+1)^(-1) (1-p)^(-n)) with N <= M.

    ``c0`` is the measured liminf of (1-p)^n log M_n (1 when that liminf
    is infinite); C1 is the smallest ratio M_n / exp(c0 ...) on
    ``0 <= n <= n_eval``.
    """
    reg = p_regular(M, p)
    if reg.clause != "i":
        raise NotApplicable("minorant needs clause (i) of p-regularity")
    c0 = reg.liminf_growth if math.isfinite(reg.liminf_growth) else 1.0
    q = 1.0 - p
    lq = math.log(q)
    gaps = []
    for n in range(n_eval + 1):
        lm = M.logM(n)
        shape = _exp_or_inf(math.log(c0) - n * lq - math.log(n + 1))
        if shape == math.inf:
            break
        gaps.append(lm - shape)
    return minorant_family(c0, min(gaps), p)
