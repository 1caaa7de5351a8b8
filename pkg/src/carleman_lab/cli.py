"""carleman-lab command line.

Every subcommand prints one JSON document::

    {"schema": 1, "command": ..., "config": {...}, "result": ..., "passed": ...,
     "meta": {"timestamp": ..., "version": ...}}

Floats are rounded to 12 significant digits; non-finite values become the
strings "inf", "-inf", "nan".  Only ``meta`` varies between identical runs.

Exit status: 0 when every requested certificate passes, 1 on a failed
certificate, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import bootstrap as bs
from . import classify as cl
from . import disconnexion as dx
from . import mollifier as ml
from ._numerics import taylor_shift
from .errors import CarlemanLabError, CertificateFailure, ConfigError
from .pwpoly import PiecewisePoly, iterated_box
from .weights import kappa, parse_weight_spec

SCHEMA = 1
SIG_DIGITS = 12
THREADS_ENV = "CARLEMAN_LAB_THREADS"


# -- JSON normalisation --------------------------------------------------------


def normalize(obj: Any) -> Any:
    """Plain JSON types with floats at 12 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(obj, np.ndarray):
        return [normalize(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return normalize(obj.to_dict())
    if is_dataclass(obj):
        return normalize(asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def envelope(command: str, config: dict, result: Any, passed: bool | None, timestamp: bool = True) -> dict:
    doc = {
        "schema": SCHEMA,
        "command": command,
        "config": normalize(config),
        "result": normalize(result),
        "passed": passed,
        "meta": {"version": _version()},
    }
    if timestamp:
        doc["meta"]["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def strip_volatile(doc: dict) -> dict:
    """Copy without the timestamp, for reproducibility comparisons."""
    out = dict(doc)
    out["meta"] = {k: v for k, v in doc.get("meta", {}).items() if k != "timestamp"}
    return out


# -- tables -----------------------------------------------------------------------


def render_report(rows: Sequence[dict], columns: Sequence[str] | None = None) -> tuple[str, str]:
    """(CSV table, JSON array) for flat rows; columns keep first-seen order."""
    rows = [normalize(r) for r in rows]
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else r.get(c) for c in columns])
    return buf.getvalue(), json.dumps(rows, indent=2) + "\n"


# -- argument helpers ---------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _pmap(fn: Callable, items: Sequence) -> list:
    """Order-preserving map over a capped thread pool."""
    n = min(_threads(), max(len(items), 1))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def parse_grid(spec: str) -> tuple[str, list[float]]:
    """'p=0.1:0.9:0.1' -> ('p', [0.1, ..., 0.9]); 'p=0.3,0.5' lists values."""
    name, sep, rng = spec.partition("=")
    if not sep or name.strip() not in ("p", "theta"):
        raise ConfigError(f"grid must look like p=start:stop:step, got {spec!r}")
    try:
        if ":" in rng:
            a, b, h = (float(v) for v in rng.split(":"))
            if not h > 0 or b < a:
                raise ConfigError("grid step must be positive and stop >= start")
            count = int(math.floor((b - a) / h + 1e-9)) + 1
            vals = [round(a + i * h, 12) for i in range(count)]
        else:
            vals = [float(v) for v in rng.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"malformed grid {spec!r}: {exc}") from exc
    return name.strip(), sorted(vals)


def parse_int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from exc


def bump_derivative() -> PiecewisePoly:
    """g = f' for the C^2 bump f(x) = (1 - x^2)^3 on [-1, 1]."""
    g = np.array([[0.0, -6.0, 0.0, 12.0, 0.0, -6.0]])
    return PiecewisePoly(np.array([-1.0, 1.0]), taylor_shift(g, -1.0))


def parse_function_spec(spec: str):
    """hermite:c0,c1,... | spline:w1,w2,... | bump | json:PATH (PiecewisePoly JSON)."""
    name, _, arg = spec.partition(":")
    try:
        if name == "hermite":
            return bs.HermiteFunction(tuple(float(v) for v in arg.split(",")))
        if name == "spline":
            return iterated_box([float(v) for v in arg.split(",")])
        if name == "bump":
            return bump_derivative().antiderivative()
        if name == "bump-derivative":
            return bump_derivative()
        if name == "json":
            return PiecewisePoly.from_json(Path(arg).read_text())
    except (ValueError, OSError) as exc:
        raise ConfigError(f"malformed function spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown function spec {spec!r}")


def _check_p(p: float) -> None:
    if not (0 < p < 1):
        raise ConfigError(f"p must lie in (0, 1), got {p}")


def _emit(samples: dict[str, PiecewisePoly], directory: str | None, n: int = 2001) -> list[str]:
    if not directory:
        return []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(samples):
        path = d / f"{name}.csv"
        samples[name].write_csv(path, n)
        written.append(str(path))
    return written


# -- subcommands ----------------------------------------------------------------------


def cmd_kappa(a) -> tuple[Any, bool | None]:
    M = parse_weight_spec(a.weight)
    if a.grid:
        _, ps = parse_grid(a.grid)
        for p in ps:
            _check_p(p)
        rows = _pmap(lambda p: {"p": p, **asdict(kappa(M, p))}, ps)
        return rows, None
    _check_p(a.p)
    return kappa(M, a.p), None


def cmd_classify(a) -> tuple[Any, bool | None]:
    M = parse_weight_spec(a.weight)
    if a.grid:
        key, vals = parse_grid(a.grid)

        def one(v):
            p, theta = (v, a.theta) if key == "p" else (a.p, v)
            r = cl.classify(M, p, theta)
            return {
                "p": p,
                "theta": theta,
                "phase": r.phase,
                "kappa_status": r.kappa.status,
                "kappa": r.kappa.value,
                "quasianalytic": r.quasianalytic,
                "verdict": r.quasianalytic_verdict,
                "confidence": r.confidence,
            }

        rows = _pmap(one, vals)
        rows.sort(key=lambda r: (r["p"], r["theta"]))
        if a.csv:
            Path(a.csv).write_text(render_report(rows)[0])
        return rows, None
    return cl.classify(M, a.p, a.theta), None


def cmd_mollifier(a) -> tuple[Any, bool | None]:
    _check_p(a.p)
    if a.mode == "sobolev":
        build = ml.build_invisible_sobolev(a.k, a.p, a.eps, strict=False)
    else:
        M = parse_weight_spec(a.weight)
        build = ml.build_invisible_carleman(
            M, a.p, a.eps, K=a.K, n_check=a.n_check, k_max=a.k_max, strict=False
        )
    out = build.plan.to_dict()
    out["passed"] = build.plan.passed
    if build.phi is not None:
        out["samples"] = _emit({"phi": build.phi}, a.emit_samples)
    elif a.emit_samples:
        out["samples"] = []
        out["samples_note"] = "widths span too many scales to materialise phi"
    return out, build.plan.passed


def cmd_disconnect(a) -> tuple[Any, bool | None]:
    _check_p(a.p)
    if a.kind == "douady":
        js = parse_int_list(a.j)
        reps = _pmap(lambda j: dx.douady_witness(a.p, j), js)
        samples = {f"f_{j}": dx.sawtooth(j, float(j) ** -3) for j in js}
        out = {"reports": [r.to_dict() for r in reps], "samples": _emit(samples, a.emit_samples)}
        return out, all(r.passed for r in reps)
    if a.kind == "beta":
        M = parse_weight_spec(a.weight)
        rep = dx.lift_beta_witness(a.a, a.b, a.p, M, a.eps, a.n_check)
        out = {"reports": [rep.to_dict()]}
        if a.emit_samples and M.kind == "sobolev":
            phi, _, _ = dx._mollifier_for(M, a.p, a.eps, a.n_check)
            if phi is not None:
                out["samples"] = _emit({"g_j": dx.beta_lift_function([(a.a, a.b, 1.0)], phi)}, a.emit_samples)
        return out, rep.passed
    M = parse_weight_spec(a.weight)
    g = parse_function_spec(a.g)
    res = dx.lift_gamma_witness(g, a.p, M, a.eps, a.n_check)
    out = {"reports": [res.report.to_dict()], "samples": _emit({"u": res.u, "f": res.f}, a.emit_samples)}
    return out, res.report.passed


def cmd_bootstrap(a) -> tuple[Any, bool | None]:
    _check_p(a.p)
    f = parse_function_spec(a.function)
    rows = []
    step = bs.bootstrap_step_check(f, a.p)
    rows.append({"inequality": "step", "order": 1, "slack": step, "holds": step >= -bs.SLACK_TOL})
    for n in range(1, a.n + 1):
        c = bs.bootstrap_chain_check(f, a.p, n)
        rows.append({"inequality": "chain", "order": n, "slack": c.slack, "holds": c.holds})
    if a.weight:
        M = parse_weight_spec(a.weight)
        for k in range(a.k + 1):
            v = bs.verify_sup_control(f, M, a.p, a.theta, k, n_win=a.n_win)
            rows.append({"inequality": "sup_control", "order": k, "slack": v.slack, "holds": v.passed})
    if a.csv:
        Path(a.csv).write_text(render_report(rows, ["inequality", "order", "slack", "holds"])[0])
    return rows, all(r["holds"] for r in rows)


def cmd_witness(a) -> tuple[Any, bool | None]:
    _check_p(a.p)
    M = parse_weight_spec(a.weight)
    if a.kind == "quasianalytic":
        w = cl.quasianalyticity_witness(M, a.p, a.theta_prime, K=a.K, n_check=a.n_check)
        return w, w.passed
    lo, _, hi = a.window.partition(":")
    try:
        window = (int(lo), int(hi))
    except ValueError as exc:
        raise ConfigError(f"window must look like lo:hi, got {a.window!r}") from exc
    t = cl.theta_strictness_witness(M, a.p, a.theta, a.theta_prime, window)
    return t, t.passed


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carleman-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--out", help="write the JSON document here instead of stdout")
    ap.add_argument("--no-timestamp", action="store_true", help="omit meta.timestamp")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, weight=True, p=True):
        if weight:
            sp.add_argument("-w", "--weight", required=True, help="weight spec, e.g. gevrey:1.5 or expchar:1@0.5")
        if p:
            sp.add_argument("-p", type=float, default=0.5)

    sp = sub.add_parser("kappa", help="p-characteristic")
    common(sp)
    sp.add_argument("--grid", help="sweep, e.g. p=0.1:0.9:0.1")
    sp.set_defaults(fn=cmd_kappa)

    sp = sub.add_parser("classify", help="regime report")
    common(sp)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--grid", help="sweep, e.g. p=0.1:0.9:0.1")
    sp.add_argument("--csv", help="also write the sweep table as CSV")
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("mollifier", help="invisible mollifiers")
    msub = sp.add_subparsers(dest="mode", required=True)
    s1 = msub.add_parser("sobolev")
    s1.add_argument("-k", type=int, required=True)
    common(s1, weight=False)
    s1.add_argument("--eps", type=float, required=True)
    s1.add_argument("--emit-samples", nargs="?", const="samples", default=None, metavar="DIR")
    s2 = msub.add_parser("carleman")
    common(s2)
    s2.add_argument("--eps", type=float, required=True)
    s2.add_argument("-K", type=int, default=None)
    s2.add_argument("--n-check", type=int, default=6)
    s2.add_argument("--k-max", type=int, default=ml.K_MAX)
    s2.add_argument("--emit-samples", nargs="?", const="samples", default=None, metavar="DIR")
    sp.set_defaults(fn=cmd_mollifier)

    sp = sub.add_parser("disconnect", help="disconnexion witnesses")
    dsub = sp.add_subparsers(dest="kind", required=True)
    d1 = dsub.add_parser("douady")
    common(d1, weight=False)
    d1.add_argument("-j", default="2,4,8,16")
    d1.add_argument("--emit-samples", nargs="?", const="samples", default=None, metavar="DIR")
    d2 = dsub.add_parser("beta")
    common(d2)
    d2.add_argument("-a", type=float, default=0.0)
    d2.add_argument("-b", type=float, default=1.0)
    d2.add_argument("--eps", type=float, default=0.1)
    d2.add_argument("--n-check", type=int, default=4)
    d2.add_argument("--emit-samples", nargs="?", const="samples", default=None, metavar="DIR")
    d3 = dsub.add_parser("gamma")
    common(d3)
    d3.add_argument("-g", default="bump-derivative", help="function spec for g")
    d3.add_argument("--eps", type=float, default=0.05)
    d3.add_argument("--n-check", type=int, default=4)
    d3.add_argument("--emit-samples", nargs="?", const="samples", default=None, metavar="DIR")
    sp.set_defaults(fn=cmd_disconnect)

    sp = sub.add_parser("bootstrap", help="sup-norm inequality slacks")
    sp.add_argument("-f", "--function", required=True, help="hermite:1,0,-1 | spline:1,0.5,0.3 | bump")
    sp.add_argument("-p", type=float, default=0.5)
    sp.add_argument("-n", type=int, default=3, help="highest chain order")
    sp.add_argument("-w", "--weight", default=None, help="also check sup control under these weights")
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("-k", type=int, default=2, help="highest derivative for sup control")
    sp.add_argument("--n-win", type=int, default=bs.DEFAULT_WINDOW)
    sp.add_argument("--csv", help="also write the slack table as CSV")
    sp.set_defaults(fn=cmd_bootstrap)

    sp = sub.add_parser("witness", help="compactly supported witnesses")
    wsub = sp.add_subparsers(dest="kind", required=True)
    w1 = wsub.add_parser("quasianalytic")
    common(w1)
    w1.add_argument("--theta-prime", type=float, required=True)
    w1.add_argument("-K", type=int, default=14)
    w1.add_argument("--n-check", type=int, default=None)
    w2 = wsub.add_parser("theta")
    common(w2)
    w2.add_argument("--theta", type=float, default=0.0)
    w2.add_argument("--theta-prime", type=float, required=True)
    w2.add_argument("--window", default="10:24")
    sp.set_defaults(fn=cmd_witness)
    return ap


def _config(a: argparse.Namespace) -> dict:
    skip = {"fn", "out", "no_timestamp"}
    return {k: v for k, v in sorted(vars(a).items()) if k not in skip}


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    command = " ".join(x for x in (a.command, getattr(a, "mode", None), getattr(a, "kind", None)) if x)
    try:
        result, passed = a.fn(a)
        status = 1 if passed is False else 0
    except ConfigError as exc:
        print(f"carleman-lab: configuration error: {exc}", file=sys.stderr)
        return 2
    except CertificateFailure as exc:
        result, passed, status = {"error": str(exc), "quantity": exc.quantity, "details": exc.details}, False, 1
    except CarlemanLabError as exc:
        result, passed, status = {"error": f"{type(exc).__name__}: {exc}"}, False, 1
    doc = envelope(command, _config(a), result, passed, timestamp=not a.no_timestamp)
    text = dumps(doc)
    if a.out:
        Path(a.out).write_text(text)
    else:
        stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
