"""Command-line front end: kernel tables, estimate sweeps, inequality batches,
transforms and report aggregation.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 numerical non-convergence.
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
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .calibration import load_calibration
from .geometry import HyperbolicSpace
from .specfun import QuadratureError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3
CACHE_ENV = "HYPERFRAC_CACHE_DIR"
CACHE_SCHEMA = 1
FORMATS = ("csv", "json", "plot_columns")


class ConfigError(ValueError):
    """Bad configuration value, with the file position when known."""


# --------------------------------------------------------------------------
# configuration

def _float_list(text: str) -> list[float]:
    items = [s for s in (p.strip() for p in str(text).split(",")) if s]
    if not items:
        raise ConfigError("empty list")
    out = []
    for s in items:
        if ":" in s:
            out.extend(_range(s).tolist())
        else:
            out.append(_float(s))
    return out


def _float(text: str) -> float:
    s = str(text).strip().lower()
    if s in ("inf", "infinity"):
        return math.inf
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _range(text: str) -> np.ndarray:
    """'a:b:step' inclusive of b, or a comma list."""
    text = str(text).strip()
    if not text:
        raise ConfigError("empty grid")
    if ":" not in text:
        return np.asarray(_float_list(text))
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step, got {text!r}")
    a, b, h = (_float(p) for p in parts)
    if not h > 0 or b < a:
        raise ConfigError(f"empty grid {text!r}")
    count = int(math.floor((b - a) / h + 1e-9)) + 1
    return np.round(a + h * np.arange(count), 12)


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(text) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _choice(options):
    def parse(text):
        s = str(text).strip()
        if s not in options:
            raise ConfigError(f"{s!r} is not one of {', '.join(options)}")
        return s
    return parse


def _str(text) -> str:
    return str(text).strip()


FAMILY_CHOICES = ("heat", "poisson", "neg_poisson", "riesz_zero", "bgr")
ONLY_CHOICES = ("hardy", "isometry", "quadratic_form", "pointwise", "ground_state",
                "contraction", "poincare", "lq")
CHECK_CHOICES = ("estimates", "heat", "lq")
OP_CHOICES = ("forward", "roundtrip", "fractional", "shifted", "neumann")

# key -> parser; the same names are used in config files and as --flags
FIELDS: dict[str, Callable] = {
    "n": _int,
    "family": _choice(FAMILY_CHOICES),
    "sigma": _float_list,
    "y": _float_list,
    "t": _float_list,
    "alpha": _float_list,
    "p": _float_list,
    "q": _float_list,
    "r": _range,
    "lambda": _range,
    "method": _choice(("auto", "closed", "quadrature")),
    "negative_order": _bool,
    "regime": _choice(("near", "far", "both")),
    "spread_bound": _float,
    "override_exponent": _float,
    "tolerance": _float,
    "seed": _int,
    "cache_dir": _str,
    "output": _str,
    "format": _choice(FORMATS),
    "workers": _int,
    "only": lambda s: [_choice(ONLY_CHOICES)(x) for x in str(s).split(",") if x.strip()],
    "checks": lambda s: [_choice(CHECK_CHOICES)(x) for x in str(s).split(",") if x.strip()],
    "function": _str,
    "op": _choice(OP_CHOICES),
    "radius": _float,
    "input": _str,
}

COMMON_DEFAULTS = {"n": 3, "seed": 42, "workers": 1, "format": "csv", "output": "-"}
DEFAULTS = {
    "kernel": {"family": "poisson", "sigma": [0.5], "y": [1.0], "t": [1.0], "alpha": [0.5],
               "r": _range("0:5:0.01"), "method": "auto", "negative_order": False},
    "validate": {"family": None, "sigma": None, "y": [0.5, 1.0, 2.0], "t": [0.1, 0.5, 1.0, 2.0, 5.0],
                 "q": [1.2, 4.0 / 3.0, 2.0], "r": _range("0.01:20:0.01"), "regime": "both",
                 "checks": ["estimates"], "spread_bound": None, "override_exponent": None},
    "inequality": {"sigma": [0.25, 0.5, 0.75], "y": [0.5, 1.0], "only": None, "p": [1.0, 2.0, math.inf],
                   "tolerance": None},
    "transform": {"function": "heat:t=1", "op": "forward", "sigma": [0.5], "r": _range("0:10:0.05"),
                  "lambda": _range("0:10:0.05"), "radius": None, "input": None},
    "report": {"format": "csv"},
}


def read_config(path: str | os.PathLike) -> dict[str, Any]:
    """Flat 'key = value' file; '#' starts a comment. Errors name the line."""
    out: dict[str, Any] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
        try:
            out[key] = FIELDS[key](value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: field {key!r}: {exc}") from None
    return out


def resolve(command: str, cli: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    """Defaults, then the config file, then command-line values."""
    merged = dict(COMMON_DEFAULTS)
    merged.update(DEFAULTS[command])
    if config_path:
        merged.update(read_config(config_path))
    for key, raw in cli.items():
        if raw is None or key not in FIELDS:
            continue
        try:
            merged[key] = FIELDS[key](raw)
        except ConfigError as exc:
            raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from None
    if not merged["n"] >= 2:
        raise ConfigError("n must be at least 2")
    if merged["workers"] < 1:
        raise ConfigError("workers must be positive")
    if merged.get("cache_dir") is None:
        merged["cache_dir"] = os.environ.get(CACHE_ENV) or str(Path.home() / ".cache" / "hyperfrac")
    return merged


# --------------------------------------------------------------------------
# output

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def render_table(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([_jsonable(dict(zip(columns, row))) for row in rows], indent=2) + "\n"
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_cell(v) for v in row] for row in rows)
        return buf.getvalue()
    buf.write("# " + " ".join(columns) + "\n")
    for row in rows:
        buf.write(" ".join(str(_cell(v)).replace(" ", "_") or "-" for v in row) + "\n")
    return buf.getvalue()


def write_output(text: str, target: str) -> None:
    if target in ("-", ""):
        sys.stdout.write(text)
        return
    path = Path(target)
    if path.parent and not path.parent.exists():
        raise ConfigError(f"output directory {path.parent} does not exist")
    _atomic_write(path, text)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def bundle(command: str, config: dict, reports: list[dict]) -> dict:
    return {"schema_version": 1, "command": command, "version": __version__,
            "config": _jsonable(config), "passed": all(r["pass"] for r in reports),
            "reports": reports}


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if obj.size > 6:
            return {"start": float(obj[0]), "stop": float(obj[-1]), "count": int(obj.size)}
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    return obj


def _summary_rows(reports: list[dict]):
    columns = ("kind", "name", "pass", "value", "lhs", "reference", "detail")
    rows = []
    for rep in reports:
        kind = rep["kind"]
        if kind == "estimate":
            rows.append((kind, rep["name"], rep["pass"], rep["spread"], rep["ratio_max"],
                         rep["spread_bound"], rep["metadata"].get("params", "")))
        elif kind == "inequality":
            rows.append((kind, rep["name"], rep["pass"], rep["ratio"], rep["lhs"], rep["tolerance"],
                         rep["mode"]))
        else:
            rows.append((kind, rep["name"], rep["pass"], rep["local_exponent"], rep["value"],
                         rep["expected"], rep["classification"]))
    return columns, rows


def emit_reports(command: str, config: dict, reports: list[dict]) -> int:
    fmt = config["format"]
    if fmt == "json":
        text = json.dumps(_jsonable(bundle(command, config, reports)), indent=2, sort_keys=True) + "\n"
    else:
        columns, rows = _summary_rows(reports)
        text = render_table(columns, rows, fmt)
    write_output(text, config["output"])
    return EXIT_OK if all(r["pass"] for r in reports) else EXIT_FAIL


def _run_tasks(fn, tasks: list, workers: int) -> list:
    """Map in task order, optionally across processes; output order never depends on workers."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# --------------------------------------------------------------------------
# cache

@dataclass
class CacheEntry:
    key: str
    columns: list
    rows: list
    created_at: float = field(default_factory=time.time)
    schema_version: int = CACHE_SCHEMA


def cache_key(payload: dict) -> str:
    text = json.dumps(_jsonable({**payload, "code_version": __version__}), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def cache_load(cache_dir: str, key: str) -> CacheEntry | None:
    path = Path(cache_dir) / f"{key}.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError):
        return None
    if data.get("schema_version") != CACHE_SCHEMA or data.get("key") != key:
        return None
    return CacheEntry(data["key"], data["columns"], [tuple(r) for r in data["rows"]],
                      data["created_at"], data["schema_version"])


def cache_store(cache_dir: str, entry: CacheEntry) -> None:
    path = Path(cache_dir)
    path.mkdir(parents=True, exist_ok=True)
    _atomic_write(path / f"{entry.key}.json", json.dumps(entry.__dict__))


# --------------------------------------------------------------------------
# commands

def _kernel_rows(task):
    from .kernels import KernelSpec, kernel_table
    n, family, params, r, method = task
    spec = KernelSpec(family, HyperbolicSpace(n), **params)
    return kernel_table(spec, r, method)


def _kernel_params(cfg) -> list[dict]:
    fam = cfg["family"]
    if fam == "heat":
        return [{"t": t} for t in cfg["t"]]
    if fam in ("poisson", "neg_poisson"):
        return [{"sigma": s, "y": y} for s in cfg["sigma"] for y in cfg["y"]]
    if fam == "riesz_zero":
        return [{"alpha": a, "negative_order": cfg["negative_order"]} for a in cfg["alpha"]]
    return [{"sigma": s} for s in cfg["sigma"]]


def cmd_kernel(cfg: dict) -> int:
    from .kernels import KernelSpec, TABLE_COLUMNS
    space = HyperbolicSpace(cfg["n"])
    r = cfg["r"]
    params = _kernel_params(cfg)
    for p in params:
        KernelSpec(cfg["family"], space, **p)  # validates before any work
    key = cache_key({"family": cfg["family"], "n": cfg["n"], "params": params,
                     "grid": r.tolist(), "method": cfg["method"]})
    entry = cache_load(cfg["cache_dir"], key)
    if entry is None:
        tasks = [(cfg["n"], cfg["family"], p, r, cfg["method"]) for p in params]
        rows = [row for block in _run_tasks(_kernel_rows, tasks, cfg["workers"]) for row in block]
        entry = CacheEntry(key, list(TABLE_COLUMNS), [tuple(row) for row in rows])
        cache_store(cfg["cache_dir"], entry)
    write_output(render_table(entry.columns, entry.rows, cfg["format"]), cfg["output"])
    return EXIT_OK


def _estimate_tasks(cfg, calib) -> list:
    families = [cfg["family"]] if cfg["family"] else ["poisson", "riesz_zero", "bgr"]
    regimes = ["near", "far"] if cfg["regime"] == "both" else [cfg["regime"]]
    tasks = []
    for fam in families:
        if fam == "heat":
            continue
        if fam in ("poisson", "neg_poisson"):
            sigmas = cfg["sigma"] or [0.25, 0.5, 0.75]
            combos = [{"sigma": s, "y": y} for s in sigmas for y in cfg["y"]]
        elif fam == "riesz_zero":
            combos = [{"alpha": a} for a in (cfg["sigma"] or [0.25, 0.5, 0.75])]
        else:
            combos = [{"sigma": s} for s in (cfg["sigma"] or [0.5, 1.0, 2.0])]
        for params in combos:
            for regime in regimes:
                bound = cfg["spread_bound"] or calib["spread_bounds"][fam][regime]
                tasks.append((cfg["n"], fam, params, cfg["r"], regime, bound, cfg["override_exponent"]))
    return tasks


def _estimate_report(task):
    from .kernels import KernelSpec, validate_kernel_estimate
    n, fam, params, r, regime, bound, exponent = task
    spec = KernelSpec(fam, HyperbolicSpace(n), **params)
    try:
        rep = validate_kernel_estimate(spec, r, regime, bound, exponent)
    except ValueError as exc:
        if "no grid points" in str(exc):
            return None
        raise
    return {"kind": "estimate", **rep.to_dict()}


def _heat_report(cfg, calib) -> dict:
    from .heat import validate_heat_bounds
    space = HyperbolicSpace(cfg["n"])
    bound = cfg["spread_bound"] or calib["spread_bounds"]["heat"].get(str(cfg["n"]), 10.0)
    rep = validate_heat_bounds(space, cfg["t"], cfg["r"][::10], spread_bound=bound)
    return {"kind": "estimate", **rep.to_dict()}


def _lq_report(task) -> dict:
    from .inequalities import poisson_lq_norm
    n, sigma, q = task
    res = poisson_lq_norm(HyperbolicSpace(n), sigma, q)
    expected = "finite" if q < (n + 1) / n else "divergent"
    return {"kind": "lq", "name": f"poisson_lq_q={q:g}", "q": q, "sigma": sigma,
            "classification": res.classification, "expected": expected,
            "local_exponent": res.local_exponent, "value": res.value,
            "pass": res.classification == expected, "metadata": res.metadata}


def cmd_validate(cfg: dict) -> int:
    calib = load_calibration()
    if cfg["r"].size == 0:
        raise ConfigError("empty grid")
    reports: list[dict] = []
    if "estimates" in cfg["checks"]:
        results = _run_tasks(_estimate_report, _estimate_tasks(cfg, calib), cfg["workers"])
        reports.extend(r for r in results if r is not None)
    if "heat" in cfg["checks"] or cfg["family"] == "heat":
        reports.append(_heat_report(cfg, calib))
    if "lq" in cfg["checks"]:
        sigmas = cfg["sigma"] or [0.5]
        tasks = [(cfg["n"], s, q) for s in sigmas for q in cfg["q"]]
        reports.extend(_run_tasks(_lq_report, tasks, cfg["workers"]))
    if not reports:
        raise ConfigError("the selected checks produced no reports")
    return emit_reports("validate", cfg, reports)


def _inequality_task(task) -> dict:
    from . import inequalities as iq
    kind, n, params, tol = task
    space = HyperbolicSpace(n)
    h1 = iq.heat_function(space, 1.0)
    if kind == "hardy":
        rep = iq.hardy_sharp_case(space, params["sigma"], params["y"], **_tol(tol))
    elif kind == "isometry":
        rep = iq.isometry_constant(space, h1, params["sigma"], **_tol(tol))
    elif kind == "quadratic_form":
        f = h1 if params["function"] == "heat" else iq.gaussian_bump(1.0, 0.5)
        rep = iq.quadratic_form_identity(space, f, params["sigma"], radius=8.0 if f is h1 else None,
                                         **_tol(tol))
    elif kind == "pointwise":
        rep = iq.pointwise_integral_rep(space, iq.gaussian_bump(1.0, 0.5), params["sigma"],
                                        params["r"], **_tol(tol))
    elif kind == "ground_state":
        member = iq.default_family(space, params["seed"]).members()[params["index"]]
        rep = iq.ground_state_inhomogeneous(space, member, params["sigma"], params["y"], **_tol(tol))
    elif kind == "contraction":
        rep = iq.contraction_check(space, h1, params["sigma"], params["y"], params["p"], **_tol(tol))
    elif kind == "poincare":
        calib = load_calibration()
        rep = iq.poincare_sobolev_scan(space, params["sigma"], params["p"],
                                       iq.default_family(space, params["seed"]),
                                       floor=calib["poincare_sobolev_floor"])
    else:
        raise ConfigError(f"unknown check {kind}")
    return {"kind": "inequality", **rep.to_dict()}


def _tol(tol):
    return {} if tol is None else {"tolerance": tol}


def _inequality_tasks(cfg) -> list:
    n, tol = cfg["n"], cfg["tolerance"]
    only = cfg["only"] or ["hardy", "isometry", "quadratic_form"]
    sigmas = cfg["sigma"]
    for s in sigmas:
        if not 0 < s < 1:
            raise ConfigError(f"sigma must lie in (0, 1), got {s:g}")
    tasks = []
    for kind in only:
        if kind == "hardy":
            tasks += [("hardy", n, {"sigma": s, "y": y}, tol) for s in sigmas for y in cfg["y"]]
        elif kind == "isometry":
            tasks += [("isometry", n, {"sigma": s}, tol) for s in sigmas]
        elif kind == "quadratic_form":
            tasks += [("quadratic_form", n, {"sigma": s, "function": f}, tol)
                      for s in sigmas for f in ("heat", "bump")]
        elif kind == "pointwise":
            tasks += [("pointwise", n, {"sigma": s, "r": r}, tol)
                      for s in sigmas if s < 0.5 for r in (0.5, 1.0, 2.0)]
        elif kind == "ground_state":
            tasks += [("ground_state", n, {"index": i, "seed": cfg["seed"], "sigma": s, "y": y}, tol)
                      for i in range(5) for s in sigmas for y in cfg["y"]]
        elif kind == "contraction":
            tasks += [("contraction", n, {"sigma": s, "y": y, "p": p}, tol)
                      for s in sigmas for y in cfg["y"] for p in cfg["p"]]
        elif kind == "poincare":
            tasks.append(("poincare", n, {"sigma": 1.0, "p": 3.0, "seed": cfg["seed"]}, tol))
        elif kind == "lq":
            tasks.append(("lq", n, {}, tol))
    return tasks


def cmd_inequality(cfg: dict) -> int:
    tasks = _inequality_tasks(cfg)
    reports = []
    plain = [t for t in tasks if t[0] != "lq"]
    reports.extend(_run_tasks(_inequality_task, plain, cfg["workers"]))
    if any(t[0] == "lq" for t in tasks):
        reports.extend(_run_tasks(_lq_report, [(cfg["n"], s, q) for s in cfg["sigma"]
                                               for q in (1.2, 4.0 / 3.0, 2.0)], cfg["workers"]))
    if not reports:
        raise ConfigError("no checks selected")
    return emit_reports("inequality", cfg, reports)


def _parse_function(spec: str, space):
    from . import inequalities as iq
    name, _, rest = spec.partition(":")
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        k, _, v = item.partition("=")
        kw[k.strip()] = _float(v)
    try:
        if name == "heat":
            return iq.heat_function(space, kw.get("t", 1.0))
        if name == "bump":
            return iq.gaussian_bump(kw.get("center", 0.0), kw.get("width", 1.0))
        if name == "polynomial":
            return iq.truncated_polynomial(kw.get("support", 2.0), int(kw.get("power", 4)))
    except TypeError as exc:
        raise ConfigError(f"bad function parameters in {spec!r}: {exc}") from None
    raise ConfigError(f"unknown function {name!r}; use heat, bump or polynomial")


def _read_radial_csv(path: str, space):
    from .transform import RadialGridFunction
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows[1:]])
    except (ValueError, TypeError):
        raise ConfigError(f"{path}: expected a header and two numeric columns") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two rows")
    return RadialGridFunction(space, data[:, 0], data[:, 1])


def cmd_transform(cfg: dict) -> int:
    from . import transform as tr
    space = HyperbolicSpace(cfg["n"])
    if cfg["input"]:
        f = _read_radial_csv(cfg["input"], space)
        radius = cfg["radius"] or float(f.grid[-1])
    else:
        tf = _parse_function(cfg["function"], space)
        f = tf.grid_function(space)
        radius = cfg["radius"] or tf.radius
    sigma = cfg["sigma"][0]
    op, r, lam = cfg["op"], cfg["r"], cfg["lambda"]
    if op == "forward":
        out = tr.spherical_transform(f, lam, radius)
        columns, rows = ("lambda", "value"), list(zip(out.grid, out.values))
    elif op == "roundtrip":
        fhat = tr.spherical_transform(f, radius=radius)
        back = tr.inverse_spherical_transform(fhat, r)
        columns, rows = ("r", "value", "original"), list(zip(r, back.values, f(r)))
    elif op in ("fractional", "shifted"):
        fn = tr.fractional_laplacian if op == "fractional" else tr.shifted_fractional
        out = fn(f, sigma, r, radius=radius)
        columns, rows = ("r", "value"), list(zip(out.grid, out.values))
    else:
        limit = tr.neumann_limit(f, sigma, r_grid=r, radius=radius)
        columns, rows = ("r", "value"), list(zip(limit.grid, limit.values))
    write_output(render_table(columns, rows, cfg["format"]), cfg["output"])
    return EXIT_OK


def cmd_report(cfg: dict, files: list[str]) -> int:
    if not files:
        raise ConfigError("report needs at least one JSON bundle")
    reports = []
    for path in files:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict) or "reports" not in data:
            raise ConfigError(f"{path}: not a report bundle")
        reports.extend(data["reports"])
    return emit_reports("report", cfg, reports)


# --------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--n", help="dimension of H^n (default 3)")
    p.add_argument("--output", "-o", help="output path, '-' for stdout (default)")
    p.add_argument("--format", help="csv, json or plot_columns")
    p.add_argument("--cache-dir", dest="cache_dir", help=f"cache directory (env {CACHE_ENV})")
    p.add_argument("--seed", help="seed for test-function families (default 42)")
    p.add_argument("--workers", help="worker processes for sweeps (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperfrac", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="tabulate a kernel family on a radial grid")
    _add_common(k)
    k.add_argument("--family", help=f"one of {', '.join(FAMILY_CHOICES)}")
    k.add_argument("--sigma", help="order(s), comma list")
    k.add_argument("--y", help="extension variable(s), comma list")
    k.add_argument("--t", help="heat time(s), comma list")
    k.add_argument("--alpha", help="Riesz order(s), comma list")
    k.add_argument("--negative-order", dest="negative_order", help="true for P_0^{-alpha}")
    k.add_argument("--r", help="radial grid start:stop:step (inclusive)")
    k.add_argument("--method", help="auto, closed or quadrature")

    v = sub.add_parser("validate", help="two-sided estimate sweeps, heat bounds, L^q classification")
    _add_common(v)
    v.add_argument("--family", help="restrict the estimate sweep to one family")
    v.add_argument("--checks", help="comma list of estimates, heat, lq")
    v.add_argument("--sigma", help="orders, comma list")
    v.add_argument("--y", help="extension variables, comma list")
    v.add_argument("--t", help="heat times, comma list")
    v.add_argument("--q", help="exponents for the L^q classification")
    v.add_argument("--r", help="radial grid start:stop:step")
    v.add_argument("--regime", help="near, far or both")
    v.add_argument("--spread-bound", dest="spread_bound", help="override the calibrated spread bound")
    v.add_argument("--override-exponent", dest="override_exponent",
                   help="replace the envelope exponent (negative control)")

    q = sub.add_parser("inequality", help="batch of inequality and identity checks")
    _add_common(q)
    q.add_argument("--only", help=f"comma list from {', '.join(ONLY_CHOICES)}")
    q.add_argument("--sigma", help="orders, comma list")
    q.add_argument("--y", help="extension variables, comma list")
    q.add_argument("--p", help="Lebesgue exponents for the contraction check")
    q.add_argument("--tolerance", help="override the default tolerance of every check")

    t = sub.add_parser("transform", help="spherical transform utilities")
    _add_common(t)
    t.add_argument("--function", help="heat:t=1, bump:center=1,width=0.5 or polynomial:support=2")
    t.add_argument("--input", help="CSV with columns r,value instead of --function")
    t.add_argument("--op", help=f"one of {', '.join(OP_CHOICES)}")
    t.add_argument("--sigma", help="order for fractional, shifted and neumann")
    t.add_argument("--r", help="output radial grid")
    t.add_argument("--lambda", dest="lambda", help="output spectral grid for forward")
    t.add_argument("--radius", help="truncation radius")

    r = sub.add_parser("report", help="merge JSON report bundles into one summary")
    _add_common(r)
    r.add_argument("files", nargs="*", help="JSON bundles written with --format json")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    raw = {k: v for k, v in vars(args).items() if k not in ("command", "config", "files")}
    try:
        cfg = resolve(args.command, raw, args.config)
        if args.command == "kernel":
            return cmd_kernel(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "inequality":
            return cmd_inequality(cfg)
        if args.command == "transform":
            return cmd_transform(cfg)
        return cmd_report(cfg, args.files)
    except QuadratureError as exc:
        print(f"hyperfrac: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ConfigError, ValueError) as exc:
        print(f"hyperfrac: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
