"""Command-line harness.

Every subcommand accepts ``--config run.json`` (strict schema, unknown keys
rejected) and command-line flags, which override the config.  CSV outputs
start with a provenance comment carrying the config hash and the seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .errors import ICWError, RegimeError
from .exactdist import (configuration_log_probs, configurations, dp_joint, enumerate_law,
                        exact_law, standardize)
from .landau import observables
from .model import ModelParams, require_uniqueness
from .quadrature import QUAD_TOL, cgf, site_means
from .sampler import METHODS, sample_exact, sample_glauber
from .stein import (MAX_EXACT_N, bound_terms, decomposition_terms, errorterm_bounds,
                    exact_site_means)
from .weights import WeightSequence, critical_beta, for_size, replicate

COMMANDS = ("fixed-point", "exact-dist", "dk-scan", "mgf", "sample", "stein-terms", "accept")

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "weights": {
            "oneOf": [
                {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["base"],
                    "properties": {
                        "base": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                 "minItems": 1},
                        "replicate": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "beta": {"type": "number", "minimum": 0},
        "h": {"type": "number"},
        "n": {"oneOf": [{"type": "integer", "minimum": 1},
                        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}]},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
        "s_grid": _NUMBER_LIST,
        "scan_beta": _NUMBER_LIST,
        "scan_h": _NUMBER_LIST,
        "count": {"type": "integer", "minimum": 1},
        "method": {"enum": list(METHODS) + ["auto", "dp", "enumerate"]},
        "source": {"enum": ["exact", "sample"]},
        "emit": {"enum": ["stats", "configurations"]},
        "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 10}},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {"weights": [1.0], "beta": 0.5, "h": 0.0, "seed": 0, "format": "csv"}


class UsageError(ICWError, ValueError):
    pass


def fmt(x) -> str:
    """Round-trip-safe number formatting (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _parse_number_list(text: str, name: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{name}: could not parse {text!r} as a comma-separated number list") from exc


def load_weights(value) -> Any:
    """Weights from a JSON file path, inline JSON, or an already-parsed object."""
    if isinstance(value, (list, dict)):
        return value
    text = value
    if os.path.exists(value):
        with open(value) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"weights: not valid JSON ({exc.msg} at position {exc.pos})") from exc


def _check_weight_entries(entries, where: str) -> list:
    if not isinstance(entries, list) or not entries:
        raise UsageError(f"{where} must be a non-empty array of positive numbers")
    for i, v in enumerate(entries):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not (v > 0) or not math.isfinite(v):
            raise UsageError(f"{where}[{i}] = {v!r} is not a positive finite number")
    return [float(v) for v in entries]


def weights_from_spec(spec, n: int | None = None) -> WeightSequence:
    if isinstance(spec, dict):
        unknown = set(spec) - {"base", "replicate"}
        if unknown:
            raise UsageError(f"weights: unknown key(s) {sorted(unknown)}")
        base = WeightSequence(_check_weight_entries(spec.get("base"), "weights.base"))
        k = spec.get("replicate", 1)
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise UsageError(f"weights.replicate = {k!r} must be a positive integer")
    else:
        base = WeightSequence(_check_weight_entries(spec, "weights"))
        k = 1
    if n is not None:
        return for_size(base, n)
    return replicate(base, k)


def build_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config: not valid JSON ({exc.msg})") from exc
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        if cfg.get("command", args.command) != args.command:
            raise UsageError(f"config is for {cfg['command']!r}, not {args.command!r}")
    cfg.pop("command", None)
    overrides = {
        "weights": load_weights(args.weights) if args.weights is not None else None,
        "beta": args.beta, "h": args.h, "seed": args.seed, "out": args.out, "format": args.format,
    }
    if args.n is not None:
        ns = [int(v) for v in _parse_number_list(args.n, "--n")]
        overrides["n"] = ns if len(ns) > 1 or args.command == "dk-scan" else ns[0]
    for key in ("s_grid", "count", "method", "source", "emit", "criteria", "tolerance", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "scan_grid", None):
        try:
            betas, hs = args.scan_grid.split(":")
        except ValueError as exc:
            raise UsageError("--scan-grid expects BETAS:HS, e.g. 0.1,0.2:0,0.1") from exc
        overrides["scan_beta"] = _parse_number_list(betas, "--scan-grid")
        overrides["scan_h"] = _parse_number_list(hs, "--scan-grid")
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    for k, v in DEFAULTS.items():
        cfg.setdefault(k, v)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def config_hash(command: str, cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    payload["command"] = command
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Emitter:
    def __init__(self, command: str, cfg: dict):
        self.command, self.cfg = command, cfg
        self.buffer = io.StringIO()

    def csv(self, header, rows):
        self.buffer.write(f"# icwlab {self.command} config_sha256={config_hash(self.command, self.cfg)} "
                          f"seed={self.cfg['seed']}\n")
        writer = csv.writer(self.buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])

    def json(self, obj):
        obj = dict(obj, provenance={"config_sha256": config_hash(self.command, self.cfg),
                                    "seed": self.cfg["seed"]})
        self.buffer.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def table(self, header, rows):
        if self.cfg["format"] == "json":
            self.json({"columns": list(header), "rows": [[_plain(v) for v in r] for r in rows]})
        else:
            self.csv(header, rows)

    def flush(self):
        text = self.buffer.getvalue()
        out = self.cfg.get("out")
        if out:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _plain(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    return _plain(v)


def _params(cfg) -> ModelParams:
    return ModelParams(float(cfg["beta"]), float(cfg["h"]))


def _single_n(cfg):
    n = cfg.get("n")
    if isinstance(n, list):
        if len(n) != 1:
            raise UsageError(f"this command takes a single n, got {n}")
        return n[0]
    return n


def cmd_fixed_point(cfg, em: Emitter):
    ws = weights_from_spec(cfg["weights"], _single_n(cfg))
    if "scan_beta" in cfg or "scan_h" in cfg:
        betas = cfg.get("scan_beta", [cfg["beta"]])
        hs = cfg.get("scan_h", [cfg["h"]])
        header = ["beta", "h", "in_regime", "x_star", "m_n_inf", "m_tilde", "chi", "chi_tilde",
                  "sigma_sq", "c_coef", "g2", "beta_c"]
        rows = []
        for b in betas:
            for h in hs:
                p = ModelParams(b, h)
                try:
                    o = observables(ws, p, ws.n)
                except (RegimeError, ICWError):
                    rows.append([b, h, False] + [None] * 8 + [critical_beta(ws)])
                    continue
                rows.append([b, h, True, o.x_star, o.m_n_inf, o.m_tilde, o.chi, o.chi_tilde,
                             o.sigma_sq, o.c_coef, o.g2, o.beta_c])
        em.table(header, rows)
        return
    o = observables(ws, _params(cfg), ws.n)
    if cfg["format"] == "csv":
        d = o.as_dict()
        em.csv(list(d), [list(d.values())])
    else:
        em.json({"observables": o.as_dict(), "weights": {"n": ws.n}})


def cmd_exact_dist(cfg, em: Emitter):
    ws = weights_from_spec(cfg["weights"], _single_n(cfg))
    p = _params(cfg)
    method = cfg.get("method", "auto")
    jd = {"dp": dp_joint, "enumerate": enumerate_law}.get(method, exact_law)(ws, p)
    em.table(["S", "T", "mass"], zip(jd.s, jd.t, jd.mass))


def _dk_point(spec, beta, h, n):
    ws = weights_from_spec(spec, n)
    p = ModelParams(beta, h)
    require_uniqueness(ws, p)
    dk = standardize(exact_law(ws, p), observables(ws, p, n)).d_k
    return [n, dk, math.sqrt(n) * dk]


def cmd_dk_scan(cfg, em: Emitter):
    ns = cfg.get("n")
    if ns is None:
        raise UsageError("dk-scan needs --n with a list of sizes")
    ns = ns if isinstance(ns, list) else [ns]
    args = [(cfg["weights"], float(cfg["beta"]), float(cfg["h"]), n) for n in ns]
    jobs = cfg.get("jobs", 1)
    if jobs > 1 and len(ns) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_dk_point, *zip(*args)))
    else:
        rows = [_dk_point(*a) for a in args]
    em.table(["n", "d_K", "sqrt_n_dK"], rows)


def cmd_mgf(cfg, em: Emitter):
    ws = weights_from_spec(cfg["weights"], _single_n(cfg))
    p = _params(cfg)
    grid = cfg.get("s_grid", [-0.5, -0.1, 0.0, 0.1, 0.5])
    tol = cfg.get("tolerance", QUAD_TOL)
    second = cgf(ws, p, 0.0, tol=tol).second_derivative_at_zero
    rows = [[s, cgf(ws, p, s, tol=tol, with_second=False).value, second] for s in grid]
    em.table(["s", "c_n", "c_n_second_at_0"], rows)


def cmd_sample(cfg, em: Emitter):
    ws = weights_from_spec(cfg["weights"], _single_n(cfg))
    p = _params(cfg)
    count = cfg.get("count", 1000)
    method = cfg.get("method", "auxiliary-field")
    if method == "auxiliary-field":
        batch = sample_exact(ws, p, count, cfg["seed"])
    elif method == "glauber-chain":
        batch = sample_glauber(ws, p, count, cfg["seed"])
    else:
        raise UsageError(f"sample method must be one of {METHODS}, got {method!r}")
    if cfg.get("emit", "stats") == "configurations":
        header = [f"s{i}" for i in range(ws.n)]
        em.table(header, batch.configurations.tolist())
    else:
        s = batch.configurations.sum(axis=1, dtype=np.int64)
        t = batch.configurations.astype(float) @ ws.values
        em.table(["S", "T"], zip(s, t))


def stein_rows(ws: WeightSequence, p: ModelParams, source: str, count: int, seed: int):
    """Rows of the stein-terms report: the three bound terms, error terms and the majorization."""
    require_uniqueness(ws, p)
    obs = observables(ws, p, ws.n)
    if source == "exact":
        if ws.n > MAX_EXACT_N:
            raise UsageError(f"exact source needs n <= {MAX_EXACT_N}; use --source sample")
        cfgs = configurations(ws.n)
        probs = np.exp(configuration_log_probs(ws, p, cfgs))
        means = exact_site_means(ws, p)
        bt = bound_terms(ws, p, obs, "exact-enumeration", site_means=means)
        src = "exact-enumeration"
    else:
        batch = sample_exact(ws, p, count, seed)
        cfgs = batch.configurations
        probs = np.full(cfgs.shape[0], 1.0 / cfgs.shape[0])
        means = site_means(ws, p)
        bt = bound_terms(ws, p, obs, "sample-batch", batch=batch, site_means=means)
        src = "sample-batch"
    diag = decomposition_terms(ws, p, obs, cfgs, means)
    mean_abs_xt = float(probs @ np.abs(diag.x_tilde))
    checks = errorterm_bounds(ws, p, obs, cfgs, means, mean_abs_xt)

    def stderr(values):
        if src == "exact-enumeration":
            return 0.0
        return float(np.std(values, ddof=1) / math.sqrt(values.size))

    common = [ws.n, p.beta, p.h, src]
    rows = [
        ["T1", bt.t1, None, *common, bt.stderr[0], None],
        ["T2", bt.t2, None, *common, bt.stderr[1], None],
        ["T3", bt.t3, None, *common, bt.stderr[2], None],
    ]
    for c in checks:
        vals = np.abs(c.values)
        rows.append([c.term, float(probs @ vals), float(probs @ c.bounds), *common, stderr(vals),
                     c.violations == 0])
    for name in ("R5", "R5_hat", "R5_bar", "R5_check"):
        vals = np.abs(diag.terms[name])
        rows.append([name, float(probs @ vals), None, *common, stderr(vals), None])
    dk = None
    if ws.integer_scale is not None or ws.n <= MAX_EXACT_N:
        dk = standardize(exact_law(ws, p), obs).d_k
    rows.append(["d_K", dk, bt.total, *common, 0.0,
                 None if dk is None else bool(dk <= bt.total + 1e-10)])
    root_n = math.sqrt(ws.n)
    rows.append(["sqrt_n_dK", None if dk is None else root_n * dk, None, *common, 0.0, None])
    rows.append(["sqrt_n_T123", root_n * bt.total, None, *common,
                 root_n * math.sqrt(sum(e * e for e in bt.stderr)), None])
    return rows


STEIN_HEADER = ["term", "mean_abs", "bound", "n", "beta", "h", "source", "stderr", "majorized"]


def cmd_stein_terms(cfg, em: Emitter):
    ws = weights_from_spec(cfg["weights"], _single_n(cfg))
    rows = stein_rows(ws, _params(cfg), cfg.get("source", "exact"), cfg.get("count", 20000), cfg["seed"])
    em.table(STEIN_HEADER, rows)


def cmd_accept(cfg, em: Emitter):
    from .acceptance import run_all

    results = run_all(cfg.get("criteria"), echo=lambda line: print(line, file=sys.stderr))
    # wall-clock time goes to the stderr lines only, keeping the artifact reproducible
    em.json({"criteria": [dict(number=r.number, title=r.title, passed=r.passed, detail=r.detail)
                          for r in results],
             "passed": all(r.passed for r in results)})
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "fixed-point": cmd_fixed_point,
    "exact-dist": cmd_exact_dist,
    "dk-scan": cmd_dk_scan,
    "mgf": cmd_mgf,
    "sample": cmd_sample,
    "stein-terms": cmd_stein_terms,
    "accept": cmd_accept,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icwlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--weights", help="weights file or inline JSON: [..] or {\"base\": [..], \"replicate\": k}")
    common.add_argument("--beta", type=float)
    common.add_argument("--h", type=float)
    common.add_argument("--n", help="number of vertices (comma-separated list for dk-scan)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixed-point", parents=[common], help="fixed point and observables")
    p.add_argument("--scan-grid", help="BETAS:HS sweep, e.g. 0.1,0.3:0,0.2")
    p = sub.add_parser("exact-dist", parents=[common], help="exact joint law of (S, T)")
    p.add_argument("--method", choices=("auto", "dp", "enumerate"))
    p = sub.add_parser("dk-scan", parents=[common], help="Kolmogorov distance over an n-grid")
    p.add_argument("--jobs", type=int, help="worker processes for the n-grid (default 1)")
    p = sub.add_parser("mgf", parents=[common], help="cumulant generating function by quadrature")
    p.add_argument("--s-grid", dest="s_grid", type=lambda v: _parse_number_list(v, "--s-grid"))
    p.add_argument("--tolerance", type=float, help="relative quadrature tolerance")
    p = sub.add_parser("sample", parents=[common], help="draw Gibbs configurations")
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--emit", choices=("stats", "configurations"))
    p = sub.add_parser("stein-terms", parents=[common], help="Stein bound and error terms")
    p.add_argument("--source", choices=("exact", "sample"))
    p.add_argument("--count", type=int)
    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--criteria", type=lambda v: [int(x) for x in v.split(",")])
    return parser


def _error(exc: Exception) -> int:
    obj = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, RegimeError) and exc.beta_c is not None:
        obj["beta_c"] = exc.beta_c
    if isinstance(exc, jsonschema.ValidationError):
        path = list(exc.absolute_path)
        where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")
        obj["message"] = f"{where or 'config'}: {exc.message}"
        obj["path"] = path
    sys.stderr.write(json.dumps(obj, default=_json_default) + "\n")
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.dry_run:
            ws_n = None
            if args.command not in ("accept", "dk-scan"):
                ws_n = weights_from_spec(cfg["weights"], _single_n(cfg)).n
                _params(cfg)
            print(json.dumps({"status": "ok", "command": args.command, "config": cfg, "n": ws_n,
                              "config_sha256": config_hash(args.command, cfg)}, sort_keys=True))
            return 0
        em = Emitter(args.command, cfg)
        status = HANDLERS[args.command](cfg, em) or 0
        em.flush()
        return status
    except (ICWError, ValueError, jsonschema.ValidationError, OSError) as exc:
        return _error(exc)


if __name__ == "__main__":
    sys.exit(main())
