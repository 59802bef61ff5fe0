"""``msobolev``: batch driver for the square-function experiments.

Every subcommand reads its parameters from flags, from a flat TOML file given
with ``--config``, or both (flags win). Parameters are validated before any
work starts, so a bad config never leaves a partial output file behind.

Output is JSON (nested reports) or CSV (tables). Both carry a schema id and
the resolved config, seed included. CSV files put them on two leading
``#`` comment lines, so ``pandas.read_csv(path, comment="#")`` reads the
table directly.

Exit codes::

    0  success
    2  usage error (unknown subcommand, bad flag syntax)
    3  config or schema validation failure
    4  a module rejected its input
    5  numerical failure (quadrature or calibration did not converge)

``MSOBOLEV_WORKERS`` sets the number of worker processes (default 1).
Results are gathered in submission order, so the output does not depend on it.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .constants import QuadratureError, constant_I_report, deficit_slope, smoothness_split
from .corpus import make_corpus
from .fields import make_grid
from .kernels import CalibrationError, hormander_scan
from .mms import build_space, default_mms_quadrature, square_function_mms
from .multiscale import SmoothnessOrder, default_scale_quadrature, equivalence_report, s0_ratio
from .radial import ball_profile
from .scales import make_scale_quadrature

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
WORKERS_ENV = "MSOBOLEV_WORKERS"

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_INPUT = 4
EXIT_NUMERIC = 5

CORPUS_KINDS = ("mode", "band", "gauss", "polywin")


class ConfigError(ValueError):
    """Raised when an experiment config fails validation."""


# ---------------------------------------------------------------------------
# config schema


@dataclass(frozen=True)
class Param:
    kind: type | str  # int, float, str, bool, "floats", "ints", "strs"
    default: object = None
    required: bool = False


_COMMON = {
    "command": Param(str),
    "out": Param(str),
    "format": Param(str),
    "seed": Param(int, 0),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "profile": {
        "dim": Param("ints", (1, 2, 3)),
        "tau_min": Param(float, 0.0),
        "tau_max": Param(float, 20.0),
        "num": Param(int, 201),
    },
    "constants": {
        "dim": Param("ints", required=True),
        "alpha": Param("floats", required=True),
        "tol": Param(float, 1e-6),
    },
    "equivalence": {
        "dim": Param(int, required=True),
        "alpha": Param(float, required=True),
        "p": Param(float, 2.0),
        "count": Param(int, 20),
        "size": Param(int, 0),
        "kinds": Param("strs", CORPUS_KINDS),
        "K": Param(int, 512),
        "mode": Param(str, "spectral"),
    },
    "hormander": {
        "dim": Param(int, required=True),
        "alpha": Param(float, required=True),
        "samples": Param(int, 128),
        "refine": Param(int, 0),
        "polish": Param(int, 3),
    },
    "mms": {
        "alpha": Param(float, required=True),
        "points": Param(str, required=True),
        "distances": Param(str),
        "K": Param(int, 64),
        "t_min": Param(float),
        "t_max": Param(float),
        "beyond_diameter": Param(bool, False),
    },
    "szero": {
        "dim": Param(int, required=True),
        "count": Param(int, 20),
        "size": Param(int, 0),
        "K": Param(int, 512),
    },
}

_DEFAULT_FORMAT = {"profile": "csv", "constants": "json", "equivalence": "csv", "hormander": "json", "mms": "csv", "szero": "csv"}
_DEFAULT_SIZE = {1: 256, 2: 64, 3: 24}


def _coerce(name: str, value, param: Param):
    def scalar(v, typ):
        if typ is bool:
            if isinstance(v, bool):
                return v
            raise ConfigError(f"{name}: expected a boolean, got {v!r}")
        if typ is int:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ConfigError(f"{name}: expected an integer, got {v!r}")
            return int(v)
        if typ is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name}: expected a finite number, got {v!r}")
            return float(v)
        if not isinstance(v, str):
            raise ConfigError(f"{name}: expected a string, got {v!r}")
        return v

    if isinstance(param.kind, str):
        typ = {"floats": float, "ints": int, "strs": str}[param.kind]
        items = value if isinstance(value, (list, tuple)) else [value]
        if not items:
            raise ConfigError(f"{name}: expected at least one value")
        return tuple(scalar(v, typ) for v in items)
    return scalar(value, param.kind)


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    """Merge file and flag values, apply defaults and check types and preconditions."""
    schema = {**_COMMON, **SCHEMAS[command]}
    unknown = sorted(set(file_cfg) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {', '.join(unknown)}")
    if file_cfg.get("command", command) != command:
        raise ConfigError(f"config is for {file_cfg['command']!r}, not {command!r}")
    merged = dict(file_cfg)
    merged.update({k: v for k, v in flags.items() if v is not None and v != ()})
    cfg = {"command": command}
    for name, param in schema.items():
        if name == "command":
            continue
        if name in merged:
            cfg[name] = _coerce(name, merged[name], param)
        elif param.required:
            raise ConfigError(f"missing required parameter {name!r}")
        else:
            cfg[name] = param.default
    cfg["format"] = cfg["format"] or _DEFAULT_FORMAT[command]
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    _check_preconditions(command, cfg)
    return cfg


def _check_preconditions(command: str, cfg: dict) -> None:
    def dims_ok(dims):
        for d in np.atleast_1d(dims):
            if d not in (1, 2, 3):
                raise ConfigError(f"dim must be 1, 2 or 3, got {d}")

    def alpha_ok(alphas):
        for a in np.atleast_1d(alphas):
            try:
                smoothness_split(float(a))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def positive(*names):
        for n in names:
            if cfg[n] is not None and cfg[n] <= 0:
                raise ConfigError(f"{n} must be positive, got {cfg[n]}")

    if "dim" in cfg:
        dims_ok(cfg["dim"])
    if "alpha" in cfg:
        alpha_ok(cfg["alpha"])
    if command == "profile":
        positive("num", "tau_max")
        if not 0 <= cfg["tau_min"] < cfg["tau_max"]:
            raise ConfigError("need 0 <= tau_min < tau_max")
    elif command == "constants":
        positive("tol")
    elif command in ("equivalence", "szero"):
        positive("count", "K")
        if cfg["size"] and cfg["size"] < 8:
            raise ConfigError("size must be at least 8")
        if command == "equivalence":
            try:
                SmoothnessOrder(cfg["alpha"], cfg["p"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if cfg["mode"] not in ("spectral", "direct"):
                raise ConfigError(f"mode must be spectral or direct, got {cfg['mode']!r}")
            bad = sorted(set(cfg["kinds"]) - set(CORPUS_KINDS))
            if bad:
                raise ConfigError(f"unknown corpus kinds: {', '.join(bad)}")
    elif command == "hormander":
        if cfg["samples"] < 100:
            raise ConfigError("samples must be at least 100")
        if cfg["refine"] < 0 or cfg["polish"] < 0:
            raise ConfigError("refine and polish must be non-negative")
    elif command == "mms":
        positive("K", "t_min", "t_max")
        if not Path(cfg["points"]).is_file():
            raise ConfigError(f"points file not found: {cfg['points']}")
        if cfg["distances"] is not None and not Path(cfg["distances"]).is_file():
            raise ConfigError(f"distance file not found: {cfg['distances']}")


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return data


# ---------------------------------------------------------------------------
# workers (module level so that they pickle)


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def _pmap(fn, items: list) -> list:
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _constant_row(job) -> dict:
    dim, alpha, tol = job
    est = constant_I_report(dim, alpha, tol)
    return {
        "dim": dim,
        "alpha": alpha,
        "N": smoothness_split(alpha),
        "I": est.value,
        "sqrt_I": math.sqrt(est.value),
        "log_grid": est.log_grid,
        "adaptive": est.adaptive,
        "tail": est.tail,
        "rel_diff": est.rel_diff,
        "slope": deficit_slope(dim, alpha),
        "expected_slope": 2 * smoothness_split(alpha) + 2,
    }


def _corpus(cfg: dict, kinds=CORPUS_KINDS):
    dim = cfg["dim"]
    size = cfg["size"] or _DEFAULT_SIZE[dim]
    grid = make_grid(dim, [size] * dim, [1.0] * dim)
    return make_corpus(grid, cfg["count"], cfg["seed"], kinds)


def _equivalence_row(job) -> dict:
    field, alpha, p, K, mode = job
    quad = default_scale_quadrature(field, K=K)
    if mode == "direct":
        L = field.grid.min_period
        quad = make_scale_quadrature(min(quad.t_min, 1e-3 * L), 0.45 * L, K)
    rep = equivalence_report(field, SmoothnessOrder(alpha, p), quad, mode)
    return {
        "field_id": field.meta["id"],
        "norm_S": rep.norm_S,
        "norm_frac": rep.norm_frac,
        "ratio": rep.ratio,
        "predicted": rep.predicted,
        "deviation": rep.deviation,
        "range_ok": rep.quadrature.get("range_ok"),
    }


def _szero_row(job) -> dict:
    field, K = job
    ratio, predicted = s0_ratio(field, default_scale_quadrature(field, K=K))
    return {
        "field_id": field.meta["id"],
        "ratio": ratio,
        "predicted": predicted,
        "deviation": ratio / predicted - 1.0,
    }


# ---------------------------------------------------------------------------
# runners: each returns (rows or report, extra summary)


def run_profile(cfg: dict):
    tau = np.linspace(cfg["tau_min"], cfg["tau_max"], cfg["num"])
    rows = []
    for dim in cfg["dim"]:
        F = ball_profile(dim, tau)
        rows.extend({"dim": dim, "tau": float(t), "F": float(v)} for t, v in zip(tau, F))
    return rows, {}


def run_constants(cfg: dict):
    jobs = [(d, a, cfg["tol"]) for d in cfg["dim"] for a in cfg["alpha"]]
    rows = _pmap(_constant_row, jobs)
    return rows, {"max_rel_diff": max(r["rel_diff"] for r in rows)}


def run_equivalence(cfg: dict):
    fields = _corpus(cfg, cfg["kinds"])
    jobs = [(f, cfg["alpha"], cfg["p"], cfg["K"], cfg["mode"]) for f in fields]
    rows = _pmap(_equivalence_row, jobs)
    ratios = np.array([r["ratio"] for r in rows])
    summary = {
        "ratio_min": float(ratios.min()),
        "ratio_max": float(ratios.max()),
        "ratio_spread": float(ratios.max() / ratios.min()),
        "all_range_ok": all(bool(r["range_ok"]) for r in rows),
    }
    if cfg["p"] == 2:
        summary["max_abs_deviation"] = max(abs(r["deviation"]) for r in rows)
    return rows, summary


def run_szero(cfg: dict):
    fields = _corpus(cfg, ("band",))
    rows = _pmap(_szero_row, [(f, cfg["K"]) for f in fields])
    return rows, {"max_abs_deviation": max(abs(r["deviation"]) for r in rows)}


def run_hormander(cfg: dict):
    rep = hormander_scan(
        cfg["dim"], cfg["alpha"], cfg["samples"], cfg["seed"], refine=cfg["refine"], polish=cfg["polish"]
    )
    ratios = rep.ratios
    report = rep.as_dict()
    report["max_over_median"] = float(ratios.max() / rep.median_ratio)
    report["samples"] = [
        {"x": list(map(float, x)), "y": list(map(float, y)), "norm": float(nv), "bound": float(b)}
        for x, y, nv, b in rep.samples
    ]
    report["polished"] = [
        {"x": list(map(float, x)), "y": list(map(float, y)), "norm": float(nv), "bound": float(b)}
        for x, y, nv, b in rep.polished
    ]
    return report, {}


def read_point_cloud(path: str):
    """Read ``id, x1..xk, weight, f[, g1..gN]`` columns from a CSV file with a header."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: no points")
    for need in ("id", "weight", "f"):
        if need not in cols:
            raise ConfigError(f"{path}: missing column {need!r}")
    xcols = sorted((c for c in cols if c[:1] == "x" and c[1:].isdigit()), key=lambda c: int(c[1:]))
    gcols = sorted((c for c in cols if c[:1] == "g" and c[1:].isdigit()), key=lambda c: int(c[1:]))
    try:
        ids = [r["id"] for r in rows]
        coords = np.array([[float(r[c]) for c in xcols] for r in rows]) if xcols else None
        weights = np.array([float(r["weight"]) for r in rows])
        f = np.array([float(r["f"]) for r in rows])
        gs = [np.array([float(r[c]) for r in rows]) for c in gcols]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ids, coords, weights, f, gs


def _euclidean(c, c0):
    return np.sqrt(np.sum((c - c0) ** 2, axis=1))


def run_mms(cfg: dict):
    ids, coords, weights, f, gs = read_point_cloud(cfg["points"])
    if cfg["distances"] is not None:
        try:
            D = np.loadtxt(cfg["distances"], delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"{cfg['distances']}: {exc}") from None
        space = build_space(ids, D, weights, coords=coords, seed=cfg["seed"])
    elif coords is not None:
        space = build_space(ids, _euclidean, weights, coords=coords, seed=cfg["seed"])
    else:
        raise ConfigError("points file has no x1.. columns and no distance matrix was given")
    if cfg["t_min"] is None and cfg["t_max"] is None:
        quad = default_mms_quadrature(space, cfg["K"])
    else:
        lo = cfg["t_min"] if cfg["t_min"] is not None else float(np.percentile(space.nearest_neighbor_distances(), 1))
        hi = cfg["t_max"] if cfg["t_max"] is not None else space.diameter
        quad = make_scale_quadrature(lo, hi, cfg["K"])
    res = square_function_mms(
        space, f, gs, SmoothnessOrder(cfg["alpha"]), quad, beyond_diameter=cfg["beyond_diameter"]
    )
    rows = [{"id": i, "S": float(v)} for i, v in zip(ids, res.values)]
    summary = {k: v for k, v in res.as_dict().items() if k != "values"}
    summary["l2_norm"] = float(np.sqrt(np.sum(weights * res.values**2)))
    return rows, summary


RUNNERS = {
    "profile": run_profile,
    "constants": run_constants,
    "equivalence": run_equivalence,
    "hormander": run_hormander,
    "mms": run_mms,
    "szero": run_szero,
}


# ---------------------------------------------------------------------------
# serialization


def schema_id(command: str) -> str:
    return f"msobolev.{command}/v{SCHEMA_VERSION}"


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def render(cfg: dict, payload, summary: dict) -> str:
    """Serialize a result; identical inputs give identical text."""
    command = cfg["command"]
    echo = _jsonable({k: v for k, v in cfg.items() if k not in ("out", "format")})
    if cfg["format"] == "json":
        doc = {
            "schema": schema_id(command),
            "version": __version__,
            "seed": cfg["seed"],
            "config": echo,
            "summary": _jsonable(summary),
            "results": _jsonable(payload),
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"
    rows = payload if isinstance(payload, list) else [_flatten(payload)]
    buf = io.StringIO()
    buf.write(f"# schema={schema_id(command)} version={__version__} seed={cfg['seed']}\n")
    buf.write("# config=" + json.dumps(echo, sort_keys=True) + "\n")
    if summary:
        buf.write("# summary=" + json.dumps(_jsonable(summary), sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _flatten(report: dict) -> dict:
    return {k: v for k, v in report.items() if not isinstance(v, (list, dict))}


def execute(command: str, file_cfg: dict, flags: dict) -> tuple[int, str, dict | None]:
    """Validate, run and render one command.

    Returns the exit code, the rendered text (or an error message) and the
    resolved config (None on failure).
    """
    try:
        _workers()
        cfg = resolve_config(command, file_cfg, flags)
        payload, summary = RUNNERS[command](cfg)
    except ConfigError as exc:
        return EXIT_CONFIG, f"config error: {exc}", None
    except (QuadratureError, CalibrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERIC, f"numerical failure: {exc}", None
    except (ValueError, TypeError) as exc:
        return EXIT_INPUT, f"invalid input: {exc}", None
    return EXIT_OK, render(cfg, payload, summary), cfg


# ---------------------------------------------------------------------------
# click front end


def _common(fn):
    fn = click.option("--seed", type=int, help="Seed for corpora and samplers (default 0).")(fn)
    fn = click.option("--format", "fmt", type=str, help="csv or json.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), help="Output file (default stdout).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML config file.")(fn)
    return fn


def _finish(command: str, config_path, flags: dict) -> None:
    try:
        file_cfg = load_config_file(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    code, text, cfg = execute(command, file_cfg, flags)
    if code != EXIT_OK:
        click.echo(text, err=True)
        sys.exit(code)
    out = cfg["out"]
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.version_option(__version__)
def main():
    """Multiscale square-function experiments on periodic grids and point clouds."""


@main.command()
@_common
@click.option("--dim", type=int, multiple=True, help="Dimension(s); default 1 2 3.")
@click.option("--tau-min", type=float)
@click.option("--tau-max", type=float)
@click.option("--num", type=int, help="Number of tau points per dimension.")
def profile(config_path, out, fmt, seed, dim, tau_min, tau_max, num):
    """Tabulate the ball profile F(tau)."""
    _finish("profile", config_path, dict(out=out, format=fmt, seed=seed, dim=dim, tau_min=tau_min, tau_max=tau_max, num=num))


@main.command()
@_common
@click.option("--dim", type=int, multiple=True)
@click.option("--alpha", type=float, multiple=True)
@click.option("--tol", type=float, help="Two-scheme relative tolerance.")
def constants(config_path, out, fmt, seed, dim, alpha, tol):
    """Sweep the p = 2 constant I(alpha, n) with both quadrature schemes."""
    _finish("constants", config_path, dict(out=out, format=fmt, seed=seed, dim=dim, alpha=alpha, tol=tol))


@main.command()
@_common
@click.option("--dim", type=int)
@click.option("--alpha", type=float)
@click.option("--p", type=float)
@click.option("--count", type=int, help="Corpus size.")
@click.option("--size", type=int, help="Grid points per axis.")
@click.option("--kinds", type=str, multiple=True, help="Corpus kinds: mode band gauss polywin.")
@click.option("--K", "K", type=int, help="Number of scales.")
@click.option("--mode", type=str, help="spectral or direct.")
def equivalence(config_path, out, fmt, seed, dim, alpha, p, count, size, kinds, K, mode):
    """Ratio ||S_alpha f||_p / ||(-Delta)^(alpha/2) f||_p over a corpus."""
    _finish(
        "equivalence",
        config_path,
        dict(out=out, format=fmt, seed=seed, dim=dim, alpha=alpha, p=p, count=count, size=size, kinds=kinds, K=K, mode=mode),
    )


@main.command()
@_common
@click.option("--dim", type=int)
@click.option("--alpha", type=float)
@click.option("--samples", type=int)
@click.option("--refine", type=int)
@click.option("--polish", type=int)
def hormander(config_path, out, fmt, seed, dim, alpha, samples, refine, polish):
    """Sampled scan of the kernel-difference bound."""
    _finish(
        "hormander",
        config_path,
        dict(out=out, format=fmt, seed=seed, dim=dim, alpha=alpha, samples=samples, refine=refine, polish=polish),
    )


@main.command()
@_common
@click.option("--alpha", type=float)
@click.option("--points", type=str, help="CSV with id, x1..xk, weight, f and optional g1..gN.")
@click.option("--distances", type=str, help="Optional CSV distance matrix in point order.")
@click.option("--K", "K", type=int)
@click.option("--t-min", type=float)
@click.option("--t-max", type=float)
@click.option("--beyond-diameter/--no-beyond-diameter", default=None)
def mms(config_path, out, fmt, seed, alpha, points, distances, K, t_min, t_max, beyond_diameter):
    """Square function on a point cloud."""
    _finish(
        "mms",
        config_path,
        dict(
            out=out, format=fmt, seed=seed, alpha=alpha, points=points, distances=distances,
            K=K, t_min=t_min, t_max=t_max, beyond_diameter=beyond_diameter,
        ),
    )


@main.command()
@_common
@click.option("--dim", type=int)
@click.option("--count", type=int)
@click.option("--size", type=int)
@click.option("--K", "K", type=int)
def szero(config_path, out, fmt, seed, dim, count, size, K):
    """Ratio ||S_0 f||_2 / ||f||_2 over random band-limited fields."""
    _finish("szero", config_path, dict(out=out, format=fmt, seed=seed, dim=dim, count=count, size=size, K=K))


if __name__ == "__main__":
    main()
