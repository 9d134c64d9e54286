"""Command-line front end.

Exit codes: 0 ok, 1 a check failed, 2 usage or parse error, 3 numerical
singularity.  Outputs carry the package version, seed and a hash of the
resolved configuration and contain nothing run-dependent, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidOrderError, SingularInputError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_SINGULAR = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing



def parse_complex(text: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi`` (``j`` also accepted)."""
    t = str(text).strip().replace(" ", "")
    if not t:
        raise UsageError("empty complex literal")
    if t.endswith(("i", "j")) and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    t = t.replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot parse complex literal {text!r}") from None


def parse_points(text) -> list[complex]:
    if isinstance(text, (list, tuple)):
        return [parse_complex(p) for p in text]
    return [parse_complex(p) for p in str(text).split(",") if p.strip()]


def parse_int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    config = load_config(getattr(args, "config", None))
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update(config)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


# settings that change where or how fast results appear, never the results
_NOT_HASHED = {"output", "positions_output", "workers"}


def config_hash(command: str, cfg: dict) -> str:
    blob = json.dumps({"command": command, **{k: cfg[k] for k in sorted(cfg) if k not in _NOT_HASHED}},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ------------------------------------------------------------------- output


def split_scaled(value) -> tuple[float, float, float]:
    """(re, im, exponent) with value = (re + i im) * exp(exponent); exponent 0 when representable."""
    from .scaledarith import ScaledComplex

    if isinstance(value, ScaledComplex):
        if value.is_zero() or abs(value.log_abs()) < 700:
            z = value.to_complex()
            return z.real, z.imag, 0.0
        return value.mantissa.real, value.mantissa.imag, value.exponent
    z = complex(value)
    return z.real, z.imag, 0.0


def emit(rows: list[dict], fmt: str, meta: dict, output) -> None:
    if fmt == "json":
        text = json.dumps({"meta": meta, "rows": rows}, indent=2, sort_keys=True, default=str) + "\n"
    else:
        buf = io.StringIO()
        cols = list(rows[0]) if rows else []
        meta_cols = [c for c in sorted(meta) if c not in cols]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols + meta_cols)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in cols] + [_cell(meta[c]) for c in meta_cols])
        text = buf.getvalue()
    if output in (None, "-", ""):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return v


def _meta(command: str, cfg: dict) -> dict:
    return {"version": __version__, "seed": cfg.get("seed"), "config_hash": config_hash(command, cfg)}


def _fmt_points(points) -> str:
    return ";".join(f"{z.real!r}{z.imag:+}i" for z in points)


# ----------------------------------------------------------------- commands

EVAL_FUNCTIONS = (
    "d11", "d12", "d11-bulk", "d12-bulk", "d11-edge", "d12-edge", "d11-asym", "d12-asym",
    "rho", "rho-bulk", "cond-d11", "kappa", "kappa-bulk", "kappa-edge",
)


def _evaluate(fn: str, N, points):
    from . import kernels, overlaps

    if fn == "d11":
        return overlaps.d11_finite(N, points).value
    if fn == "d12":
        return overlaps.d12_finite(N, points).value
    if fn == "d11-bulk":
        return overlaps.d11_bulk(points).value
    if fn == "d12-bulk":
        return overlaps.d12_bulk(points).value
    if fn == "d11-edge":
        return overlaps.d11_edge(points).value
    if fn == "d12-edge":
        return overlaps.d12_edge(points).value
    if fn == "d11-asym":
        return overlaps.d11_bulk_asymptotic(points).value
    if fn == "d12-asym":
        return overlaps.d12_bulk_asymptotic(points).value
    if fn == "rho":
        return overlaps.rho_finite(N, points).value
    if fn == "rho-bulk":
        return overlaps.rho_bulk(points).value
    if fn == "cond-d11":
        return overlaps.conditional_expectation_d11(N, points)
    # reduced kernels take (x_bar, y | lam, lam_bar) given as points (x, y, lam)
    if len(points) != 3:
        raise UsageError("kernel functions take three points: x, y, lam")
    x, y, lam = points
    if fn == "kappa":
        return kernels.kappa_finite(N, x.conjugate(), y, lam, lam.conjugate())
    if fn == "kappa-bulk":
        return kernels.kappa_bulk(x.conjugate(), y, lam, lam.conjugate())
    return kernels.kappa_edge(x.conjugate(), y, lam, lam.conjugate())


def cmd_eval(args) -> int:
    cfg = resolve(args, {"fn": "d11", "N": None, "k": None, "points": None, "format": "csv",
                         "output": None, "seed": None})
    if cfg["fn"] not in EVAL_FUNCTIONS:
        raise UsageError(f"unknown function {cfg['fn']!r}")
    if cfg["points"] is None:
        raise UsageError("--points is required")
    points = parse_points(cfg["points"])
    needs_n = cfg["fn"] in ("d11", "d12", "rho", "cond-d11", "kappa")
    if needs_n and cfg["N"] is None:
        raise UsageError(f"--N is required for {cfg['fn']}")
    if cfg["k"] is not None and int(cfg["k"]) != len(points) and not cfg["fn"].startswith("kappa"):
        raise UsageError(f"--k {cfg['k']} does not match {len(points)} points")
    value = _evaluate(cfg["fn"], cfg["N"], points)
    re_, im_, ex = split_scaled(value)
    row = {"function": cfg["fn"], "N": "" if cfg["N"] is None else int(cfg["N"]), "k": len(points),
           "points": _fmt_points(points), "value_re": re_, "value_im": im_, "exponent": ex}
    emit([row], cfg["format"], _meta("eval", cfg), cfg["output"])
    return EXIT_OK


ORACLE_TOLERANCES = {"kernel": 1e-10, "lemma2": 1e-10, "lemma1": 1e-9, "quadrature": 1e-5}


def _oracle_kernel(rng):
    from .kernels import kappa_finite
    from .momentmatrix import build_moment_matrix, kernel_from_inverse

    worst, where = 0.0, None
    for _ in range(100):
        N = int(rng.integers(1, 13))
        xb, y, lam = (complex(*rng.uniform(-1.4, 1.4, 2)) for _ in range(3))
        ref = kernel_from_inverse(build_moment_matrix(N, lam, lam.conjugate()), xb, y)
        val = kappa_finite(N, xb, y, lam, lam.conjugate()).to_complex()
        err = abs(val - ref) / abs(ref)
        if err > worst:
            worst, where = err, {"N": N, "x_bar": str(xb), "y": str(y), "lam": str(lam)}
    return worst, where


def _oracle_lemma2(rng):
    from .specfun import phi_closed, phi_direct

    worst, where = 0.0, None
    for _ in range(50):
        x = complex(*rng.uniform(-3, 3, 2))
        for n in range(0, 51, 5):
            a, b = phi_closed(n, x), phi_direct(n, x)
            err = abs(a - b) / abs(b)
            if err > worst:
                worst, where = err, {"n": n, "x": str(x)}
    return worst, where


def _oracle_lemma1(rng):
    from .overlaps import d11_finite, d12_finite, lemma_factor, t_swap
    from .points import SpectralTuple

    worst, where, done = 0.0, None, 0
    while done < 50:
        N = int(rng.integers(2, 9))
        k = int(rng.integers(2, min(N, 4) + 1))
        lams = rng.normal(size=k) + 1j * rng.normal(size=k)
        bars = rng.normal(size=k) + 1j * rng.normal(size=k)
        pts = SpectralTuple.from_pairs(lams, bars)
        if abs(1 - (lams[0] - lams[1]) * (bars[0] - bars[1])) <= 0.1:
            continue
        a = d12_finite(N, pts).to_complex()
        b = lemma_factor(pts) * d11_finite(N, t_swap(pts)).to_complex()
        err = abs(a - b) / abs(a)
        done += 1
        if err > worst:
            worst, where = err, {"N": N, "k": k}
    return worst, where


def _oracle_quadrature(rng):
    from .overlaps import cm_marginal, d11_finite, d12_finite

    worst, where = 0.0, None
    cases = [(2, [0.3 + 0.1j], False), (3, [0.3 + 0.1j], False), (2, [-0.7 + 0.4j], False),
             (3, [0.3 + 0.1j, -0.5 + 0.4j], True)]
    for N, pts, off in cases:
        ref = (d12_finite if off else d11_finite)(N, pts).to_complex()
        err = abs(cm_marginal(N, pts, off) - ref)
        if err > worst:
            worst, where = err, {"N": N, "points": str(pts), "d12": off}
    return worst, where


ORACLES = {"kernel": _oracle_kernel, "lemma2": _oracle_lemma2, "lemma1": _oracle_lemma1,
           "quadrature": _oracle_quadrature}


def cmd_oracle_check(args) -> int:
    cfg = resolve(args, {"oracle": "all", "tolerance": None, "seed": 12345, "format": "json",
                         "output": None})
    names = list(ORACLES) if cfg["oracle"] == "all" else [cfg["oracle"]]
    for name in names:
        if name not in ORACLES:
            raise UsageError(f"unknown oracle {name!r}; choose from all, {', '.join(ORACLES)}")
    rows, ok = [], True
    for name in names:
        rng = np.random.default_rng([int(cfg["seed"]), len(name)])
        tol = float(cfg["tolerance"]) if cfg["tolerance"] is not None else ORACLE_TOLERANCES[name]
        worst, where = ORACLES[name](rng)
        worst = float(worst)
        passed = bool(worst <= tol)
        ok &= passed
        rows.append({"oracle": name, "max_deviation": worst, "tolerance": tol,
                     "passed": passed, "worst_case": json.dumps(where, sort_keys=True)})
        if not passed:
            print(f"oracle {name} failed: {worst:.3e} > {tol:.1e} at {where}", file=sys.stderr)
    emit(rows, cfg["format"], _meta("oracle-check", cfg), cfg["output"])
    return EXIT_OK if ok else EXIT_CHECK


def cmd_mc(args) -> int:
    from . import mcharness as mc

    cfg = resolve(args, {"N": 10, "target": "0", "target2": None, "radius": 0.3, "matrices": 10000,
                         "seed": 7, "workers": 1, "z_max": 3.0, "format": "csv", "output": None})
    N, radius, n, seed = int(cfg["N"]), float(cfg["radius"]), int(cfg["matrices"]), int(cfg["seed"])
    t1 = parse_complex(cfg["target"])
    if cfg["target2"] is None:
        est = mc.estimate_d11(N, t1, radius, n, seed, workers=int(cfg["workers"]))
        pred = mc.predict_d11(N, t1, radius)
    else:
        t2 = parse_complex(cfg["target2"])
        try:
            est = mc.estimate_d12(N, t1, t2, radius, n, seed, workers=int(cfg["workers"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        pred = mc.predict_d12(N, t1, t2, radius)
    est = replace(est, prediction=pred)
    row = {k: (float(v) if isinstance(v, str) and v else v) for k, v in zip(mc.CSV_COLUMNS, est.csv_row())}
    z = est.z_score
    row.update({"prediction_re": pred.real, "prediction_im": pred.imag, "z_score": z})
    emit([row], cfg["format"], _meta("mc", cfg), cfg["output"])
    return EXIT_OK if abs(z) < float(cfg["z_max"]) else EXIT_CHECK


def cmd_limits(args) -> int:
    from . import overlaps

    cfg = resolve(args, {"fn": "d11", "k": 2, "N_list": "50,100,200", "points": "0.3+0.2i,0.8-0.5i",
                         "theta": 0.0, "rate_tolerance": 0.2, "seed": None, "format": "csv",
                         "output": None})
    fn = cfg["fn"]
    points = parse_points(cfg["points"])
    if int(cfg["k"]) != len(points):
        raise UsageError(f"--k {cfg['k']} does not match {len(points)} points")
    n_list = parse_int_list(cfg["N_list"])
    theta = float(cfg["theta"])
    if fn == "d11":
        limit = overlaps.d11_bulk(points).to_complex()
        finite = lambda N: overlaps.d11_finite(N, points).to_complex() / N  # noqa: E731
        power = 1.0
    elif fn == "d12":
        limit = overlaps.d12_bulk(points).to_complex()
        finite = lambda N: overlaps.d12_finite(N, points).to_complex() / N  # noqa: E731
        power = 1.0
    elif fn == "d11-edge":
        limit = overlaps.d11_edge(points).to_complex()
        finite = lambda N: overlaps.d11_finite_edge_scaled(N, points, theta)  # noqa: E731
        power = 0.5
    elif fn == "d12-edge":
        limit = overlaps.d12_edge(points).to_complex()
        finite = lambda N: overlaps.d12_finite_edge_scaled(N, points, theta)  # noqa: E731
        power = 0.5
    else:
        raise UsageError(f"unknown limit function {fn!r}")
    rows, ok, prev = [], True, None
    for N in n_list:
        v = finite(N)
        res = abs(v - limit)
        ratio, expected = "", ""
        if prev is not None:
            ratio = prev[1] / res if res else math.inf
            expected = (N / prev[0]) ** power
            ok &= abs(ratio / expected - 1) <= float(cfg["rate_tolerance"])
        rows.append({"function": fn, "N": N, "value_re": v.real, "value_im": v.imag,
                     "limit_re": limit.real, "limit_im": limit.imag, "residual": res,
                     "residual_ratio": ratio, "expected_ratio": expected})
        prev = (N, res)
    emit(rows, cfg["format"], _meta("limits", cfg), cfg["output"])
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sde(args) -> int:
    from . import normalsde as sde

    cfg = resolve(args, {"N": 5, "t": 1.0, "runs": 10000, "seed": 7, "dt0": 0.01, "model": "ginibre",
                         "workers": 1, "ks_max": 0.02, "format": "json", "output": None,
                         "positions_output": None})
    try:
        ens = sde.run_to_time(int(cfg["N"]), float(cfg["t"]), float(cfg["dt0"]), int(cfg["runs"]),
                              int(cfg["seed"]), model=cfg["model"], workers=int(cfg["workers"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    meta = _meta("sde", cfg)
    summ = sde.summary(ens)
    if cfg["positions_output"]:
        Path(cfg["positions_output"]).write_text(sde.positions_to_csv(ens, meta))
    row = {k: summ[k] for k in ("N", "t_end", "runs", "dropped_runs", "model", "ks_statistic",
                                "ks_pvalue", "mean_steps", "rejected_steps")}
    emit([row], cfg["format"], meta, cfg["output"])
    return EXIT_OK if summ["ks_statistic"] < float(cfg["ks_max"]) else EXIT_CHECK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ginibre-overlaps",
                                description="Conditional eigenvector overlaps of the complex Ginibre ensemble.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--config", help="TOML file with defaults for any flag")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--output", "-o", help="output file (default stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"))

    sp = sub.add_parser("eval", help="evaluate one function at given points")
    sp.add_argument("--fn", choices=EVAL_FUNCTIONS)
    sp.add_argument("--N", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--points", help="comma-separated complex literals, e.g. 0,1+0.5i")
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("oracle-check", help="compare closed forms with independent oracles")
    sp.add_argument("--oracle", help="all, " + ", ".join(ORACLES))
    sp.add_argument("--tolerance", type=float, help="override every oracle tolerance")
    common(sp)
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("mc", help="Monte Carlo estimate against the finite-N prediction")
    sp.add_argument("--N", type=int)
    sp.add_argument("--target")
    sp.add_argument("--target2", help="second target for the off-diagonal estimator")
    sp.add_argument("--radius", type=float)
    sp.add_argument("--matrices", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--z-max", dest="z_max", type=float)
    common(sp)
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("limits", help="convergence of finite-N overlaps to their scaling limits")
    sp.add_argument("--fn", choices=("d11", "d12", "d11-edge", "d12-edge"))
    sp.add_argument("--k", type=int)
    sp.add_argument("--N-list", dest="N_list")
    sp.add_argument("--points")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--rate-tolerance", dest="rate_tolerance", type=float)
    common(sp)
    sp.set_defaults(func=cmd_limits)

    sp = sub.add_parser("sde", help="simulate the normal-matrix eigenvalue SDE")
    sp.add_argument("--N", type=int)
    sp.add_argument("--t", type=float)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--dt0", type=float)
    sp.add_argument("--model", help="ginibre (default), strong-drift or generator")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--ks-max", dest="ks_max", type=float)
    sp.add_argument("--positions-output", dest="positions_output")
    common(sp)
    sp.set_defaults(func=cmd_sde)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SingularInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (UsageError, InvalidOrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
