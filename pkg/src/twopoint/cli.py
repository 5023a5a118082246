"""``twopoint`` command line: ``bench``, ``check`` and ``optimize-external``.

Settings come from a ``key = value`` config file (``#`` starts a comment)
and/or ``--key value`` flags; flags win. Exit codes: 0 success, 2 config
error, 3 run aborted or checks failed, 4 external protocol error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
from typing import Callable, Optional

import numpy as np

from twopoint import __version__
from twopoint.checks import SUITES
from twopoint.diagnostics import fit_exponents, replication_seed, run_replication
from twopoint.estimators import TwoPointOracle
from twopoint.external import ExternalObjective, ProtocolError
from twopoint.objectives import OBJECTIVES, setup_for
from twopoint.optimizer import RunAborted, ScheduleParams, average_iterate, default_parameters, run_bandit

log = logging.getLogger("twopoint")

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED, EXIT_PROTOCOL = 0, 2, 3, 4
BENCH_COLUMNS = ["rep", "seed", "d", "T", "eta", "delta", "avg_regret", "opt_error", "opt_error_se", "status"]


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _int(lo: int) -> Callable[[str], int]:
    def parse(s: str) -> int:
        v = int(s)
        if v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return parse


def _pos_float(s: str) -> float:
    v = float(s)
    if not (np.isfinite(v) and v > 0):
        raise ValueError("must be a positive number")
    return v


def _unit_interval(s: str) -> float:
    v = float(s)
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")
    return v


def _nonneg_float(s: str) -> float:
    v = float(s)
    if not (np.isfinite(v) and v >= 0):
        raise ValueError("must be a non-negative number")
    return v


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _int_list(s: str) -> list:
    vals = [int(p) for p in s.replace(" ", "").split(",") if p]
    if not vals or min(vals) < 1:
        raise ValueError("must be a comma-separated list of positive integers")
    return vals


def _str_list(s: str) -> list:
    return [p.strip() for p in s.split(",") if p.strip()]


_GEOMETRY = {"geometry": _choice("l2ball", "simplex"), "radius": _pos_float, "shrink": _unit_interval}
_OUTPUT = {"output": str, "format": _choice("csv", "json"), "seed": _int(0)}
KEYS = {
    "bench": {
        **_GEOMETRY, **_OUTPUT,
        "objective": _choice(*OBJECTIVES), "noise": _nonneg_float, "d": _int(1), "T": _int(1),
        "replications": _int(1), "eta": _pos_float, "delta": _pos_float, "dims": _int_list,
        "horizons": _int_list, "n_mc": _int(0),
    },
    "check": {**_OUTPUT, "suites": _str_list, "samples": _int(10_000)},
    "optimize-external": {
        **_GEOMETRY, **_OUTPUT,
        "command": str, "d": _int(1), "T": _int(1), "budget": _int(2), "G2": _pos_float,
        "eta": _pos_float, "delta": _pos_float,
    },
}
DEFAULTS = {
    "bench": {"geometry": "l2ball", "radius": 1.0, "objective": "abs_regression", "noise": 0.0, "d": 4,
              "T": 1000, "replications": 5, "format": "csv", "n_mc": 100_000},
    "check": {"suites": list(SUITES), "samples": 100_000, "format": "csv"},
    "optimize-external": {"geometry": "l2ball", "radius": 1.0, "G2": 1.0, "format": "json"},
}


def read_config_file(path: str) -> dict:
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            raw[key] = value
    return raw


def build_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge file and flag strings (flags win), parse and validate every key."""
    spec = KEYS[command]
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    cfg = dict(DEFAULTS[command])
    for key, raw in merged.items():
        if key not in spec:
            raise ConfigError(key, f"unknown key for {command}")
        try:
            cfg[key] = spec[key](str(raw))
        except ValueError as exc:
            raise ConfigError(key, f"invalid value {raw!r} ({exc})") from None
    if command == "check":
        unknown = [s for s in cfg["suites"] if s not in SUITES]
        if unknown:
            raise ConfigError("suites", f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    if command == "optimize-external":
        for key in ("command", "d", "T"):
            if key not in cfg:
                raise ConfigError(key, "required")
    if command in ("bench", "optimize-external") and cfg["geometry"] == "simplex" and cfg["d"] < 2:
        raise ConfigError("d", "simplex needs d >= 2")
    if command == "bench" and cfg["geometry"] == "simplex":
        for d in cfg.get("dims", []):
            if d < 2:
                raise ConfigError("dims", "simplex needs d >= 2")
    if "seed" not in cfg:
        cfg["seed"] = secrets.randbelow(2**31)
        print(f"seed = {cfg['seed']}", file=sys.stderr)
    return cfg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def _meta(command: str, cfg: dict) -> dict:
    return {"program": "twopoint", "version": __version__, "command": command, "seed": cfg["seed"],
            "config": {k: cfg[k] for k in sorted(cfg) if k != "output"}}  # reruns to other paths stay byte-identical


def write_table(path: Optional[str], fmt: str, columns: list, rows: list, meta: dict, extra: Optional[dict] = None) -> None:
    """CSV (header first, metadata as trailing ``#`` lines) or JSON mirror of the same records."""
    if fmt == "json":
        doc = {"meta": meta, "rows": [{c: r.get(c) for c in columns} for r in rows]}
        if extra:
            doc.update(extra)
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r.get(c)) for c in columns])
        buf.write(f"# program=twopoint version={meta['version']} command={meta['command']} seed={meta['seed']}\n")
        for k, v in meta["config"].items():
            buf.write(f"# config {k} = {_fmt(','.join(map(str, v)) if isinstance(v, list) else v)}\n")
        for k, v in (extra or {}).items():
            buf.write(f"# {k} = {json.dumps(_jsonable(v))}\n")
        text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_bench(cfg: dict) -> int:
    dims = cfg.get("dims", [cfg["d"]])
    horizons = cfg.get("horizons", [cfg["T"]])
    noise = cfg["noise"]
    obj_params = {"noise": noise} if noise > 0 else None
    rows, cells = [], []
    status = EXIT_OK
    cell = 0
    for d in dims:
        for T in horizons:
            cell_rows = []
            for r in range(cfg["replications"]):
                seed = replication_seed(cfg["seed"], cell, r)
                try:
                    row = run_replication(cfg["geometry"], cfg["objective"], d, T, seed, objective_params=obj_params,
                                          radius=cfg["radius"], shrink=cfg.get("shrink"), eta=cfg.get("eta"),
                                          delta=cfg.get("delta"), n_mc=cfg["n_mc"])
                except RunAborted as exc:
                    log.error("replication %d (d=%d, T=%d) aborted: %s", r, d, T, exc)
                    rows.append({"rep": r, "seed": seed, "d": d, "T": T, "status": "aborted"})
                    status = EXIT_ABORTED
                    break
                row.update(rep=r, status="ok")
                rows.append(row)
                cell_rows.append(row)
                log.info("d=%d T=%d rep=%d avg_regret=%.6g", d, T, r, row["avg_regret"])
            if status != EXIT_OK:
                break
            reg = np.array([x["avg_regret"] for x in cell_rows])
            opt = [x["opt_error"] for x in cell_rows if x["opt_error"] is not None]
            n = len(reg)
            summary = {
                "rep": "summary", "seed": cfg["seed"], "d": d, "T": T, "eta": cell_rows[0]["eta"],
                "delta": cell_rows[0]["delta"], "avg_regret": float(reg.mean()),
                "opt_error": float(np.mean(opt)) if opt else None,
                "opt_error_se": float(np.std(opt, ddof=1) / np.sqrt(len(opt))) if len(opt) > 1 else None,
                "status": "summary",
            }
            rows.append(summary)
            cells.append({"d": d, "T": T, "mean_regret": summary["avg_regret"],
                          "std_error": float(reg.std(ddof=1) / np.sqrt(n)) if n > 1 else None})
            cell += 1
        if status != EXIT_OK:
            break
    extra = {"cells": cells}
    if status == EXIT_OK and len(cells) >= 3 and all(c["mean_regret"] > 0 for c in cells):
        extra["fit"] = fit_exponents(cells)
    write_table(cfg.get("output"), cfg["format"], BENCH_COLUMNS, rows, _meta("bench", cfg), extra)
    return status


def cmd_check(cfg: dict) -> int:
    rng = np.random.default_rng(cfg["seed"])
    results = []
    for name in cfg["suites"]:
        for res in SUITES[name](rng, cfg["samples"]):
            print(res.line())
            results.append(res)
    rows = [{"suite": r.suite, "check": r.name, "status": "PASS" if r.passed else "FAIL", "detail": r.detail} for r in results]
    if cfg.get("output"):
        write_table(cfg["output"], cfg["format"], ["suite", "check", "status", "detail"], rows, _meta("check", cfg))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ABORTED


def cmd_optimize_external(cfg: dict) -> int:
    d = cfg["d"]
    budget = cfg.get("budget", 2 * cfg["T"])
    T = min(cfg["T"], budget // 2)
    setup = setup_for(cfg["geometry"], d, cfg["radius"], cfg.get("shrink"))
    params = default_parameters(setup, cfg["G2"], d, T)
    if "eta" in cfg or "delta" in cfg:
        params = ScheduleParams(T, d, cfg.get("eta", params.eta), cfg.get("delta", params.delta))
    try:
        child = ExternalObjective(cfg["command"])
    except OSError as exc:
        log.error("cannot start child %r: %s", cfg["command"], exc)
        return EXIT_PROTOCOL
    oracle = TwoPointOracle(child, lipschitz_l2=cfg["G2"])
    try:
        record = run_bandit(oracle, setup, params, cfg["seed"], track_losses=False)
        child.close()
    except RunAborted as exc:
        child.kill()
        cause = exc.cause
        if isinstance(cause, ProtocolError):
            log.error("protocol error after %d requests: %s", child.requests, cause)
            log.error("request: %s", cause.request)
            log.error("response: %s", cause.response)
        else:
            log.error("%s", exc)
        return EXIT_PROTOCOL
    except ProtocolError as exc:
        log.error("protocol error at shutdown: %s (request: %s)", exc, exc.request)
        return EXIT_PROTOCOL
    w_bar = average_iterate(record)
    trajectory = [{"t": t, "f_plus": e.f_plus, "f_minus": e.f_minus_or_anchor} for t, e in enumerate(record.estimates)]
    extra = {"average_iterate": w_bar, "T": T, "queries": record.total_queries, "eta": params.eta,
             "delta": params.delta_at(0)}
    print("average_iterate = " + " ".join(repr(float(c)) for c in w_bar))
    out = cfg.get("output")
    if out is not None:
        write_table(out, cfg["format"], ["t", "f_plus", "f_minus"], trajectory, _meta("optimize-external", cfg), extra)
    log.info("T=%d queries=%d", T, record.total_queries)
    return EXIT_OK


COMMANDS = {"bench": cmd_bench, "check": cmd_check, "optimize-external": cmd_optimize_external}


def configure_logging() -> None:
    level = os.environ.get("ZO_LOG", "info").lower()
    levels = {"off": logging.CRITICAL + 10, "info": logging.INFO, "trace": logging.DEBUG}
    root = logging.getLogger("twopoint")
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(levels.get(level, logging.INFO))
    root.propagate = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: config error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twopoint", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"twopoint {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, keys in KEYS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        for key in keys:
            p.add_argument(f"--{key}", dest=key, default=None)
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = make_parser().parse_args(argv)
    command = args.subcommand
    flags = {k: getattr(args, k) for k in KEYS[command]}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(command, file_values, flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[command](cfg)


if __name__ == "__main__":
    sys.exit(main())
