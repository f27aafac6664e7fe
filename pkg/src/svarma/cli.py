"""Command-line interface: simulate, estimate, select-order, diagnose, irf.

Configs are JSON files. Several ``--config`` files are merged left to right
at the top level, so the ``model`` block written by one command can be fed to
the next. Outputs are written only after the command has fully succeeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ContractError, SvarmaError
from .estimate import FitOptions, diagnostics, fit, select_order
from .filter import simulate, structural_shocks
from .irf import bootstrap_irf, irf
from .model import SvarmaSpec, ThetaVector, validate

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_VALIDATION = 5
EXIT_NUMERICAL = 6


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _usage(msg):
    return CliError(EXIT_USAGE, "usage", msg)


def _invalid(msg):
    return CliError(EXIT_VALIDATION, "validation", msg)


# -- deterministic serialization ---------------------------------------------------

def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits and non-finite values as null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _fmt_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Outputs:
    """Collects output files and writes them atomically at the end."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def commit(self) -> list:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(EXIT_IO, "io", f"cannot create output directory: {exc}") from None
        staged = []
        try:
            for name, text in self.files.items():
                fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                staged.append((tmp, self.out_dir / name))
            for tmp, final in staged:
                os.replace(tmp, final)
        except OSError as exc:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.remove(tmp)
            raise CliError(EXIT_IO, "io", f"cannot write outputs: {exc}") from None
        return [str(final) for _, final in staged]


# -- inputs -------------------------------------------------------------------------

def load_config(paths) -> dict:
    cfg: dict = {}
    for path in paths or []:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_IO, "io", f"cannot read config {path}: {exc}") from None
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_PARSE, "parse", f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise CliError(EXIT_PARSE, "parse", f"config {path} must be a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise _invalid(f"config {path} has unsupported schema_version {version}")
        cfg.update(obj)
    return cfg


def read_csv(path) -> tuple:
    """Read a numeric panel with a header row. Returns ``(names, data)``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot read data {path}: {exc}") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise CliError(EXIT_PARSE, "parse", f"malformed CSV {path}: {exc}") from None
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise CliError(EXIT_PARSE, "parse", f"CSV {path} needs a header and at least one row")
    names = [h.strip() for h in rows[0]]
    if len(set(names)) != len(names) or any(not h for h in names):
        raise CliError(EXIT_PARSE, "parse", f"CSV {path} has empty or duplicate column names")
    data = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise CliError(EXIT_PARSE, "parse", f"CSV {path} line {i}: expected {len(names)} fields")
        try:
            data[i - 2] = [float(v) for v in row]
        except ValueError:
            raise CliError(EXIT_PARSE, "parse", f"CSV {path} line {i}: non-numeric value") from None
    if not np.all(np.isfinite(data)):
        raise CliError(EXIT_PARSE, "parse", f"CSV {path} contains non-finite values")
    return names, data


def apply_transforms(names, data, transforms, columns=None) -> tuple:
    """Apply the ``transform`` list and select ``columns``.

    Each transform defines a new column ``name`` from earlier columns:

    * ``{"op": "log", "source": c}``
    * ``{"op": "diff", "source": c, "lag": k}``: ``x_t - x_{t-k}``
    * ``{"op": "lincomb", "terms": {c1: w1, c2: w2, ...}}``

    with an optional multiplier ``"scale"``. Leading rows made undefined by
    differencing are dropped.
    """
    cols = {n: data[:, i] for i, n in enumerate(names)}
    for k, tr in enumerate(transforms or []):
        if not isinstance(tr, dict) or "name" not in tr or "op" not in tr:
            raise _invalid(f"transform {k} needs 'name' and 'op'")
        op = tr["op"]
        refs = list(tr["terms"]) if op == "lincomb" else [tr.get("source")]
        for ref in refs:
            if ref not in cols:
                raise _invalid(f"transform {tr['name']!r} references unknown column {ref!r}")
        if op == "log":
            x = cols[tr["source"]]
            if np.any(x <= 0):
                raise _invalid(f"log of nonpositive values in {tr['source']!r}")
            new = np.log(x)
        elif op in ("diff", "lag-difference"):
            lag = int(tr.get("lag", 1))
            if lag < 1:
                raise _invalid("difference lag must be positive")
            x = cols[tr["source"]]
            new = np.full_like(x, np.nan)
            new[lag:] = x[lag:] - x[:-lag]
        elif op == "lincomb":
            new = sum(float(w) * cols[c] for c, w in tr["terms"].items())
        else:
            raise _invalid(f"unknown transform op {op!r}")
        cols[tr["name"]] = float(tr.get("scale", 1.0)) * new
    selected = list(columns) if columns else list(cols)
    for c in selected:
        if c not in cols:
            raise _invalid(f"unknown column {c!r}")
    Y = np.column_stack([cols[c] for c in selected])
    keep = np.all(np.isfinite(Y), axis=1)
    first = int(np.argmax(keep)) if keep.any() else len(keep)
    Y = Y[first:]
    if not np.all(np.isfinite(Y)):
        raise _invalid("transformed data contain undefined values after the leading rows")
    return selected, Y


def _spec_from(cfg, n_data=None) -> SvarmaSpec:
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise _invalid("config needs a 'model' object")
    model = dict(model)
    if "n" not in model:
        if n_data is None:
            raise _invalid("model.n is required")
        model["n"] = n_data
    try:
        spec = SvarmaSpec.from_json(model)
    except (KeyError, TypeError, ValueError) as exc:
        raise _invalid(f"invalid model: {exc}") from None
    if n_data is not None and spec.n != n_data:
        raise _invalid(f"model has n={spec.n} but the data have {n_data} columns")
    return spec


def _theta_from(cfg, spec) -> ThetaVector:
    model = cfg["model"]
    if "theta" not in model:
        raise _invalid("model.theta is required for this command")
    try:
        theta = ThetaVector.from_json(spec, model["theta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise _invalid(f"invalid theta: {exc}") from None
    problems = validate(spec, theta)
    if problems:
        raise _invalid("theta violates: " + "; ".join(problems))
    return theta


def _options(cfg, args) -> FitOptions:
    try:
        opts = FitOptions.from_json(cfg.get("options"))
    except (TypeError, ValueError) as exc:
        raise _invalid(f"invalid options: {exc}") from None
    if args.scheme:
        from dataclasses import replace

        opts = replace(opts, scheme=args.scheme)
    return opts


def _data(cfg, args) -> tuple:
    if not args.data:
        raise _usage("--data is required for this command")
    names, raw = read_csv(args.data)
    return apply_transforms(names, raw, cfg.get("transform"), cfg.get("columns"))


def _header(command, seed=None) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command}
    if seed is not None:
        out["seed"] = seed
    return out


# -- commands -----------------------------------------------------------------------

def cmd_simulate(cfg, args, out: Outputs):
    spec = _spec_from(cfg)
    theta = _theta_from(cfg, spec)
    sim = cfg.get("simulate", {})
    T = int(sim.get("T", 500))
    burnin = int(sim.get("burnin", 500))
    rng = np.random.default_rng(args.seed)
    path = simulate(spec, theta, T, rng, burnin=burnin)
    names = cfg.get("columns") or [f"y{i + 1}" for i in range(spec.n)]
    if len(names) != spec.n:
        raise _invalid("columns must name every simulated series")
    out.add("simulated.csv", csv_text(names, path.Y.tolist()))


def cmd_estimate(cfg, args, out: Outputs):
    names, Y = _data(cfg, args)
    spec = _spec_from(cfg, Y.shape[1])
    opts = _options(cfg, args)
    res = fit(Y, spec, opts)
    body = {**_header("estimate"), **res.to_json(), "columns": names, "options": opts.to_json()}
    out.add("estimate.json", dumps(body) + "\n")
    shocks = structural_shocks(res.theta_hat, Y).standardized
    out.add("shocks.csv", csv_text([f"e{i + 1}" for i in range(spec.n)], shocks.tolist()))


def cmd_select_order(cfg, args, out: Outputs):
    names, Y = _data(cfg, args)
    spec = _spec_from(cfg, Y.shape[1])
    grid = cfg.get("select_order", {})
    p_max, q_max = int(grid.get("p_max", 2)), int(grid.get("q_max", 2))
    sel = select_order(Y, spec, p_max, q_max, _options(cfg, args), threads=args.threads)
    model = spec.with_order(sel.p, sel.q).to_json()
    body = {**_header("select-order"), "p": sel.p, "q": sel.q, "table": sel.table,
            "model": model, "columns": names}
    out.add("select_order.json", dumps(body) + "\n")


def cmd_diagnose(cfg, args, out: Outputs):
    names, Y = _data(cfg, args)
    spec = _spec_from(cfg, Y.shape[1])
    theta = _theta_from(cfg, spec)
    lags = int(cfg.get("diagnose", {}).get("lags", 10))
    e = structural_shocks(theta, Y).standardized
    body = {**_header("diagnose"), "lags": lags, "columns": names, **diagnostics(e, lags)}
    out.add("diagnostics.json", dumps(body) + "\n")


def cmd_irf(cfg, args, out: Outputs):
    spec = _spec_from(cfg)
    theta = _theta_from(cfg, spec)
    icfg = cfg.get("irf", {})
    H = args.horizon if args.horizon is not None else int(icfg.get("horizon", 20))
    R = args.bootstrap if args.bootstrap is not None else int(icfg.get("bootstrap", 0))
    level = float(icfg.get("level", 0.95))
    shock = icfg.get("shock", "one-sd")
    if H < 0 or R < 0:
        raise _usage("--horizon and --bootstrap must be nonnegative")
    if R > 0:
        _, Y = _data(cfg, args)
        res = bootstrap_irf(spec, theta, Y, H, R, level, args.seed, shock=shock,
                            threads=args.threads, options=_options(cfg, args))
    else:
        res = irf(theta, H, shock)
    body = {**_header("irf", args.seed if R > 0 else None), **res.to_json()}
    out.add("irf.json", dumps(body) + "\n")
    out.add("irf.csv", csv_text(["horizon", "response_var", "shock", "point", "lo", "hi"],
                                res.long_rows()))


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "select-order": cmd_select_order,
    "diagnose": cmd_diagnose,
    "irf": cmd_irf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svarma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", action="append", default=[], help="JSON config; repeatable")
        p.add_argument("--data", help="input CSV with a header row")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes for order selection and bootstrap")
        p.add_argument("--scheme", choices=["A", "B", "C"], help="extra identification scheme to report")
        p.add_argument("--bootstrap", type=int, help="bootstrap replicates for irf bands (0 = none)")
        p.add_argument("--horizon", type=int, help="largest irf horizon")
    return parser


def _emit_error(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.seed < 0 or args.seed >= 2 ** 64:
        return _emit_error(EXIT_USAGE, "usage", "--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        return _emit_error(EXIT_USAGE, "usage", "--threads must be positive")
    out = Outputs(Path(args.out))
    try:
        cfg = load_config(args.config)
        COMMANDS[args.command](cfg, args, out)
        written = out.commit()
    except CliError as exc:
        return _emit_error(exc.code, exc.kind, str(exc))
    except ContractError as exc:
        return _emit_error(EXIT_VALIDATION, "validation", str(exc))
    except SvarmaError as exc:
        return _emit_error(EXIT_NUMERICAL, "numerical", f"{type(exc).__name__}: {exc}")
    except np.linalg.LinAlgError as exc:
        return _emit_error(EXIT_NUMERICAL, "numerical", str(exc))
    except Exception as exc:  # noqa: BLE001
        return _emit_error(EXIT_UNEXPECTED, "unexpected", f"{type(exc).__name__}: {exc}")
    for path in written:
        print(path)
    return EXIT_OK
