"""Command-line driver.

    eulerprim ec --field two_bump --level 0.3 --method all
    eulerprim primitive --field radial_exp --testfn bump:0.2:0.8
    eulerprim kacrice --profile gaussian --testfn bump:0.2:0.8
    eulerprim coarea --field two_bump
    eulerprim shotnoise --model gaussian --t 0.5,1,2 --reps 10000
    eulerprim moments --model gaussian --q 1,2 --p 2
    eulerprim validate --seed 42

Settings may also come from an INI file (``--config``): keys of ``[common]``
and of the section named after the command, spelled like the long flags with
dashes or underscores.  Flags override the file.

The report is JSON (sorted keys) on stdout or ``--output``.  ``--csv`` adds a
table whose columns are listed in CSV_COLUMNS.  Exit status: 0 all checks
passed, 1 a check failed or a module raised, 2 usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import time

from . import __version__
from . import shotnoise as sn
from .euler_integral import (
    PROFILES_1D,
    QuadratureSpec,
    coarea_check,
    euler_primitive_direct,
    euler_primitive_integral,
    kac_rice_1d,
)
from .fields import FIELD_REGISTRY, get_field, parse_testfn, testfn_to_record
from .moments import MomentReport, moment_check
from .topology import GridSpec, ec_curve, sample_values
from .validation import jsonable, run_check, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

COMMANDS = ("ec", "primitive", "kacrice", "coarea", "shotnoise", "moments", "validate")

DEFAULTS = {
    "field": "two_bump",
    "testfn": "bump:0.2:0.8",
    "model": "gaussian",
    "profile": "gaussian",
    "level": "0.1,0.3,0.5,0.8,0.95",
    "method": "all",
    "spacing": 1.0 / 256.0,
    "resolution": 512,
    "level_count": 128,
    "t": "0.5,1,2",
    "reps": 10000,
    "intensity": 1.0,
    "window": 2.0,
    "q": "1,2",
    "p": 2.0,
    "only": "",
    "seed": 42,
    "workers": None,
    "output": None,
    "csv": None,
}

CSV_COLUMNS = {
    "ec": ("level", "cubical", "bicov", "morse"),
    "shotnoise": ("t", "psi_re", "psi_im", "ecf_re", "ecf_im", "ecf_stderr", "mc_re", "mc_im", "mc_stderr", "limit_re", "limit_im", "limit_error"),
    "moments": MomentReport.COLUMNS,
    "validate": ("name", "passed", "wall_time_ms"),
}

INT_KEYS = {"resolution", "level_count", "reps", "seed", "workers"}
FLOAT_KEYS = {"spacing", "intensity", "window", "p"}


class UsageError(Exception):
    pass


def _floats(text) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [common] and per-command sections")
    common.add_argument("--seed", type=int, help="master seed (default 42)")
    common.add_argument("--workers", type=int, help="worker threads (default: available CPUs)")
    common.add_argument("--output", help="write the JSON report here instead of stdout")
    common.add_argument("--csv", help="write the command's CSV table here")
    p = argparse.ArgumentParser(prog="eulerprim", description="Euler characteristic primitives of planar fields.")
    p.add_argument("--version", action="version", version=f"eulerprim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ec", parents=[common], help="EC of excursion sets by lattice and Morse methods")
    s.add_argument("--field")
    s.add_argument("--level", help="comma-separated levels")
    s.add_argument("--method", choices=("cubical", "bicov", "morse", "all"))
    s.add_argument("--spacing", type=float)

    s = sub.add_parser("primitive", parents=[common], help="I_f(h) against the level integral")
    s.add_argument("--field")
    s.add_argument("--testfn", help="bump:a:b[:scale] or fourier:t")
    s.add_argument("--resolution", type=int)
    s.add_argument("--level-count", type=int, dest="level_count")
    s.add_argument("--method", choices=("cubical", "bicov", "morse"))

    s = sub.add_parser("kacrice", parents=[common], help="1D crossing identity")
    s.add_argument("--profile", choices=sorted(PROFILES_1D))
    s.add_argument("--testfn")

    s = sub.add_parser("coarea", parents=[common], help="perimeter integral against gradient integral")
    s.add_argument("--field")
    s.add_argument("--testfn")
    s.add_argument("--resolution", type=int)
    s.add_argument("--level-count", type=int, dest="level_count")

    s = sub.add_parser("shotnoise", parents=[common], help="characteristic function and stationary density")
    s.add_argument("--model", choices=sn.MODELS)
    s.add_argument("--t", help="comma-separated t panel")
    s.add_argument("--reps", type=int)
    s.add_argument("--intensity", type=float)

    s = sub.add_parser("moments", parents=[common], help="empirical moments of I_f(h) against the bound")
    s.add_argument("--model", choices=sn.MODELS)
    s.add_argument("--testfn")
    s.add_argument("--q", help="comma-separated moment orders")
    s.add_argument("--p", type=float)
    s.add_argument("--reps", type=int)
    s.add_argument("--window", type=float)

    s = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", help="comma-separated criterion prefixes")
    s.add_argument("--progress", action="store_true", help="print one line per check to stderr")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise UsageError(f"cannot read config file {args.config!r}")
        for section in ("common", args.command):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    key = key.replace("-", "_")
                    if key not in DEFAULTS:
                        raise UsageError(f"unknown config key {key!r} in [{section}]")
                    cfg[key] = val
    for key, val in vars(args).items():
        if key in DEFAULTS and val is not None:
            cfg[key] = val
    try:
        for k in INT_KEYS:
            if cfg[k] is not None:
                cfg[k] = int(cfg[k])
        for k in FLOAT_KEYS:
            cfg[k] = float(cfg[k])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    if cfg["workers"] < 1:
        raise UsageError("--workers must be positive")
    cfg["command"] = args.command
    _validate_refs(cfg)
    return cfg


def _validate_refs(cfg):
    cmd = cfg["command"]
    if cmd in ("ec", "primitive", "coarea") and cfg["field"] not in FIELD_REGISTRY:
        raise UsageError(f"unknown field {cfg['field']!r}; known: {', '.join(sorted(FIELD_REGISTRY))}")
    if cmd in ("primitive", "kacrice", "coarea", "moments"):
        try:
            parse_testfn(cfg["testfn"])
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad test function {cfg['testfn']!r}: {exc}") from None
    if cmd in ("shotnoise", "moments") and cfg["model"] not in sn.MODELS:
        raise UsageError(f"unknown model {cfg['model']!r}")
    if cmd == "kacrice" and cfg["profile"] not in PROFILES_1D:
        raise UsageError(f"unknown profile {cfg['profile']!r}")
    if cmd in ("primitive", "coarea") and (cfg["resolution"] < 64 or cfg["level_count"] < 32):
        raise UsageError("resolution must be >= 64 and level count >= 32")
    if cmd == "moments" and cfg["p"] <= 1.0:
        raise UsageError("p must exceed 1")
    if cmd in ("shotnoise", "moments") and cfg["reps"] < 2:
        raise UsageError("reps must be at least 2")
    for k in ("level", "t", "q"):
        _floats(cfg[k])


# ---------------------------------------------------------------------------
# commands: each returns (records, csv rows)


def cmd_ec(cfg):
    fld = get_field(cfg["field"])
    levels = _floats(cfg["level"])
    methods = ("cubical", "bicov", "morse") if cfg["method"] == "all" else (cfg["method"],)
    table = {}

    def body(_):
        spec = GridSpec.covering(fld.bbox, cfg["spacing"])
        values = sample_values(fld, spec) if set(methods) - {"morse"} else None
        for m in methods:
            table[m] = ec_curve(fld, levels, m, spec=spec, values=values)
        agree = all(list(table[m]) == list(table[methods[0]]) for m in methods)
        return {"levels": levels, **table}, "methods agree", agree

    rec = run_check("ec", body, None)
    rows = [[u] + [int(table[m][k]) if m in table else "" for m in ("cubical", "bicov", "morse")] for k, u in enumerate(levels)] if table else []
    return [rec], rows


def cmd_primitive(cfg):
    fld = get_field(cfg["field"])
    h = parse_testfn(cfg["testfn"])
    quad = QuadratureSpec(cfg["resolution"], cfg["level_count"])
    method = cfg["method"] if cfg["method"] != "all" else "cubical"

    def body(_):
        out = euler_primitive_integral(fld, h, quad, full_output=True, workers=cfg["workers"])
        vals = {"I_f": out["value"], "I_f_refined": out["refined"], "quadrature_error": out["error"], "testfn": testfn_to_record(h)}
        if h.fourier:
            return vals, None, True
        chi = euler_primitive_direct(fld, h, quad, method)
        vals.update({"chi_f": chi, "ec_method": method, "gap": abs(out["value"] - chi)})
        return vals, 1e-2, abs(out["value"] - chi) <= 1e-2

    return [run_check("primitive", body, None)], []


def cmd_kacrice(cfg):
    h = parse_testfn(cfg["testfn"])

    def body(_):
        kr = kac_rice_1d(PROFILES_1D[cfg["profile"]](), h)
        rel = abs(kr.rhs - 2.0 * kr.lhs) / abs(kr.rhs)
        return {"profile": cfg["profile"], "lhs_up": kr.lhs, "lhs_down": kr.lhs_down, "rhs": kr.rhs, "relative_gap": rel}, 1e-3, rel <= 1e-3

    return [run_check("kacrice", body, None)], []


def cmd_coarea(cfg):
    fld = get_field(cfg["field"])
    h = parse_testfn(cfg["testfn"])
    quad = QuadratureSpec(cfg["resolution"], cfg["level_count"])

    def body(_):
        lhs, rhs = coarea_check(fld, h, quad)
        rel = abs(lhs - rhs) / abs(rhs) if rhs else abs(lhs)
        return {"field": cfg["field"], "perimeter_side": lhs, "gradient_side": rhs, "relative_gap": rel}, 1e-2, rel <= 1e-2

    return [run_check("coarea", body, None)], []


def cmd_shotnoise(cfg):
    model = sn.make_model(cfg["model"])
    lam, reps, seed, workers = cfg["intensity"], cfg["reps"], cfg["seed"], cfg["workers"]
    records, rows = [], []
    for t in _floats(cfg["t"]):
        row = {"t": t}

        def body(_, t=t, row=row):
            p = sn.psi(1, t, model=model, intensity=lam)
            e = sn.empirical_cf(model, intensity=lam, t=t, reps=reps, seed=seed, workers=workers)
            g = sn.mc_gamma_at_origin(t, model, intensity=lam, reps=reps, seed=seed, workers=workers)
            vals = {"t": t, "psi": p, "empirical_cf": e.estimate, "empirical_cf_stderr": e.stderr, "mc_gamma": g.estimate, "mc_gamma_stderr": g.stderr}
            ok = abs(p - e.estimate) <= 3.0 * e.stderr + 1e-3
            row.update(psi=p, ecf=e, mc=g)
            if model.radial:
                lim = sn.stationary_limit_density(t, model, intensity=lam)
                vals.update(limit=lim.value, limit_error=lim.error, limit_terms=lim.terms)
                ok &= abs(lim.value - g.estimate) <= 3.0 * g.stderr + lim.error
                row.update(limit=lim)
            return vals, {"cf": "3 stderr + 1e-3", "limit": "3 stderr + quadrature error"}, ok, seed

        records.append(run_check(f"shotnoise_t={t}", body, None))
        if "mc" in row:
            lim = row.get("limit")
            rows.append([
                t, row["psi"].real, row["psi"].imag, row["ecf"].estimate.real, row["ecf"].estimate.imag, row["ecf"].stderr,
                row["mc"].estimate.real, row["mc"].estimate.imag, row["mc"].stderr,
                lim.value.real if lim else "", lim.value.imag if lim else "", lim.error if lim else "",
            ])
    return records, rows


def cmd_moments(cfg):
    model = sn.make_model(cfg["model"])
    h = parse_testfn(cfg["testfn"])
    records, rows = [], []
    for q in _floats(cfg["q"]):
        q = int(q)
        holder = {}

        def body(_, q=q, holder=holder):
            rep = moment_check(model, h, q, cfg["p"], cfg["window"], cfg["reps"], cfg["seed"], cfg["intensity"])
            holder["rep"] = rep
            vals = {k: getattr(rep, k) for k in MomentReport.COLUMNS}
            return vals, "empirical <= bound", rep.holds, cfg["seed"]

        records.append(run_check(f"moments_q={q}", body, None))
        if "rep" in holder:
            rows.append(next(csv.reader([holder["rep"].to_csv_row()])))
    return records, rows


def cmd_validate(cfg, progress=False):
    only = [o for o in cfg["only"].split(",") if o] or None

    def show(rec):
        if progress:
            print(f"{'PASS' if rec['passed'] else 'FAIL'} {rec['name']} ({rec['wall_time_ms'] / 1e3:.1f} s)", file=sys.stderr, flush=True)

    suite = run_suite(cfg["seed"], cfg["workers"], only, show)
    rows = [[r["name"], r["passed"], round(r["wall_time_ms"], 1)] for r in suite["checks"]]
    return suite["checks"], rows


HANDLERS = {
    "ec": cmd_ec,
    "primitive": cmd_primitive,
    "kacrice": cmd_kacrice,
    "coarea": cmd_coarea,
    "shotnoise": cmd_shotnoise,
    "moments": cmd_moments,
}


def run(cfg: dict, progress: bool = False) -> dict:
    t0 = time.perf_counter()
    if cfg["command"] == "validate":
        records, rows = cmd_validate(cfg, progress)
    else:
        records, rows = HANDLERS[cfg["command"]](cfg)
    passed = sum(r["passed"] for r in records)
    report = {
        "artifact": "eulerprim",
        "version": __version__,
        "command": cfg["command"],
        "config": {k: v for k, v in sorted(cfg.items()) if k not in ("output", "csv", "workers")},
        "master_seed": cfg["seed"],
        "checks": records,
        "summary": {"total": len(records), "passed": passed, "failed": len(records) - passed, "suite_passed": passed == len(records)},
        "total_wall_time_ms": 1e3 * (time.perf_counter() - t0),
    }
    return {"report": jsonable(report), "rows": rows}


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _write_csv(path, command, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS.get(command, ("name", "passed")))
    w.writerows(rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help/--version, 2 for usage
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        print(f"eulerprim: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out = run(cfg, progress=getattr(args, "progress", False))
        text = dumps(out["report"])
        if cfg["output"]:
            with open(cfg["output"], "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if cfg["csv"]:
            _write_csv(cfg["csv"], cfg["command"], out["rows"])
    except Exception as exc:
        print(f"eulerprim: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK if out["report"]["summary"]["suite_passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
