"""Command-line driver: read an experiment config, price every (generator, sampler) cell, emit a table.

Config files are INI-style with ``[market]``, ``[grid]``, ``[payoff]`` and
``[run]`` sections. Per-asset values are comma lists, a single value applied to
every asset, or ``linspace(a, b)`` for ``assets`` evenly spaced values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import __version__
from .errors import BasketQMCError, ValidationError
from .lowdisc import SAMPLERS, make_sampler
from .market import (ConstantVolatility, ExpDecayVolatility, MarketSpec, TimeGrid,
                     correlation_matrix, covariance_blocks)
from .pathgen import METHODS, build_generator, write_spectrum
from .pricer import PayoffSpec, PriceEstimate, price

log = logging.getLogger("basketqmc")

COLUMNS = ("generator", "sampler", "E", "price", "rmse", "seconds")
SCHEMA = "basketqmc-report/1"
FORMATS = ("csv", "json", "text")
SMOKE_PATHS = 512

_LINSPACE = re.compile(r"^linspace\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketSpec
    grid: TimeGrid
    payoff: PayoffSpec
    generators: tuple = ("pca",)
    samplers: tuple = ("rqmc",)
    p: float = 0.99
    eff_dims: tuple = (None,)
    batches: int = 10
    paths: int = 8192
    seed: int = 0
    fmt: str = "csv"
    out: str | None = None
    jobs: int = 1
    timing: bool = False
    name: str = "custom"
    echo: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.generators:
            if g not in METHODS:
                raise ValidationError(f"unknown generator {g!r}; choose from {', '.join(METHODS)}")
        for s in self.samplers:
            if s not in SAMPLERS:
                raise ValidationError(f"unknown sampler {s!r}; choose from {', '.join(SAMPLERS)}")
        if self.fmt not in FORMATS:
            raise ValidationError(f"unknown format {self.fmt!r}; choose from {', '.join(FORMATS)}")
        size = self.market.n_assets * len(self.grid)
        for e in self.eff_dims:
            if e is not None and not 1 <= e <= size:
                raise ValidationError(f"eff_dim {e} outside 1..{size}")
        if not 0 < self.p <= 1:
            raise ValidationError(f"anova_p must lie in (0, 1], got {self.p}")
        if self.batches < 2:
            raise ValidationError("batches must be at least 2")
        if self.paths < 1:
            raise ValidationError("paths must be positive")
        if self.jobs < 1:
            raise ValidationError("jobs must be positive")
        if abs(self.grid.maturity - self.payoff.maturity) > 1e-12 * self.payoff.maturity:
            raise ValidationError("grid maturity and payoff maturity differ")


@dataclass
class RunReport:
    rows: list
    config: dict
    version: str = __version__


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def bundled_configs() -> dict:
    """Name to path of every config shipped with the package."""
    root = resources.files("basketqmc") / "configs"
    return {p.name[:-4]: str(p) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".cfg")}


def resolve_config(name_or_path: str) -> str:
    if os.path.exists(name_or_path):
        return name_or_path
    known = bundled_configs()
    key = name_or_path[:-4] if name_or_path.endswith(".cfg") else name_or_path
    if key in known:
        return known[key]
    raise ValidationError(f"config {name_or_path!r} not found (bundled: {', '.join(known)})")


def _require(cp, section, key):
    if not cp.has_section(section):
        raise ValidationError(f"missing section [{section}]")
    if not cp.has_option(section, key):
        raise ValidationError(f"missing key '{key}' in section [{section}]")
    return cp.get(section, key)


def _float(value, where):
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"{where}: expected a number, got {value!r}") from None


def _int(value, where):
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"{where}: expected an integer, got {value!r}") from None


def _per_asset(value: str, m: int, where: str) -> np.ndarray:
    text = value.strip()
    match = _LINSPACE.match(text)
    if match:
        lo, hi = (_float(v, where) for v in match.groups())
        return np.linspace(lo, hi, m)
    parts = [p for p in re.split(r"[,\s]+", text) if p]
    vals = np.array([_float(p, where) for p in parts])
    if vals.size == 1:
        return np.full(m, vals[0])
    if vals.size != m:
        raise ValidationError(f"{where}: {vals.size} values for {m} assets")
    return vals


def _words(value: str) -> tuple:
    return tuple(w.strip().lower() for w in value.split(",") if w.strip())


def _eff_dims(value) -> tuple:
    if value is None or str(value).strip().lower() in ("", "none", "auto"):
        return (None,)
    return tuple(_int(v, "eff_dim") for v in str(value).split(",") if v.strip())


def parse_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate an experiment config; ``overrides`` replace ``[run]`` keys.

    Defaults: ``anova_p = 0.99``, ``batches = 10``, ``paths = 8192``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        resolved = resolve_config(path)
        try:
            with open(resolved, encoding="utf-8") as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ValidationError(f"{resolved}: {exc}") from None
        name = os.path.basename(resolved).rsplit(".", 1)[0]
    else:
        name = "custom"
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    m = _int(_require(cp, "market", "assets"), "[market] assets")
    if m < 1:
        raise ValidationError("[market] assets must be positive")
    spots = _per_asset(_require(cp, "market", "spot"), m, "[market] spot")
    rate = _float(_require(cp, "market", "rate"), "[market] rate")
    if cp.has_option("market", "correlation"):
        rows = [r for r in cp.get("market", "correlation").split(";") if r.strip()]
        corr = np.array([[_float(v, "[market] correlation") for v in r.split(",")] for r in rows])
    else:
        corr = correlation_matrix(m, _float(_require(cp, "market", "rho"), "[market] rho"))
    kind = cp.get("market", "volatility", fallback="constant").strip().lower()
    if kind == "constant":
        vol = ConstantVolatility(_per_asset(_require(cp, "market", "sigma"), m, "[market] sigma"))
    elif kind == "expdecay":
        vol = ExpDecayVolatility.from_initial(
            _per_asset(_require(cp, "market", "sigma0"), m, "[market] sigma0"),
            _per_asset(_require(cp, "market", "sigma_inf"), m, "[market] sigma_inf"),
            _per_asset(_require(cp, "market", "tau"), m, "[market] tau"),
        )
    else:
        raise ValidationError(f"[market] volatility: unknown model {kind!r} (constant or expdecay)")
    weights = None
    if cp.has_option("market", "weights"):
        weights = _per_asset(cp.get("market", "weights"), m, "[market] weights")
    market = MarketSpec(spots, rate, corr, vol, weights)

    steps = _int(_require(cp, "grid", "steps"), "[grid] steps")
    maturity = _float(_require(cp, "grid", "maturity"), "[grid] maturity")
    grid = TimeGrid.equally_spaced(steps, maturity)
    payoff = PayoffSpec(_float(_require(cp, "payoff", "strike"), "[payoff] strike"), maturity)

    run = dict(cp.items("run")) if cp.has_section("run") else {}
    run.update({k: str(v) for k, v in overrides.items()})
    cfg = ExperimentConfig(
        market=market,
        grid=grid,
        payoff=payoff,
        generators=_words(run.get("generators", run.get("generator", "pca"))),
        samplers=_words(run.get("samplers", run.get("sampler", "rqmc"))),
        p=_float(run.get("anova_p", "0.99"), "anova_p"),
        eff_dims=_eff_dims(run.get("eff_dim")),
        batches=_int(run.get("batches", "10"), "batches"),
        paths=_int(run.get("paths", "8192"), "paths"),
        seed=_int(run.get("seed", "0"), "seed"),
        fmt=run.get("format", "csv").strip().lower(),
        out=run.get("out"),
        jobs=_int(run.get("jobs", "1"), "jobs"),
        timing=run.get("timing", "false").strip().lower() in ("1", "true", "yes", "on"),
        name=name,
    )
    echo = {s: dict(cp.items(s)) for s in cp.sections()}
    echo["run"] = {
        "generators": list(cfg.generators), "samplers": list(cfg.samplers), "anova_p": cfg.p,
        "eff_dim": list(cfg.eff_dims), "batches": cfg.batches, "paths": cfg.paths, "seed": cfg.seed,
    }
    return replace(cfg, echo=echo)


# ---------------------------------------------------------------------------
# Running and reporting
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig, spectrum_path: str | None = None) -> RunReport:
    """Build each generator once, then price it with each sampler in config order."""
    cov = covariance_blocks(config.market, config.grid)
    rows = []
    for method in config.generators:
        if method == "kpa" and config.market.volatility.constant:
            log.info("kpa on constant volatility coincides with pca")
        for e in config.eff_dims:
            log.info("building %s generator (eff_dim=%s)", method, e)
            gen = build_generator(method, cov, config.grid, config.p, e)
            if spectrum_path and gen.eigenvalues is not None:
                stem, ext = os.path.splitext(spectrum_path)
                write_spectrum(gen, f"{stem}_{method}{ext or '.txt'}")
            for kind in config.samplers:
                sampler = make_sampler(kind, gen.columns)
                log.info("pricing %s x %s, E=%d", method, kind, gen.columns)
                try:
                    est = price(config.payoff, config.market, config.grid, gen, sampler,
                                config.batches, config.paths, config.seed, config.jobs,
                                timing=config.timing)
                except BasketQMCError as exc:
                    raise type(exc)(f"[{config.name}: {method} x {kind}] {exc}") from exc
                est.sampler = kind
                rows.append(est)
    return RunReport(rows, config.echo)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row_dict(est: PriceEstimate) -> dict:
    return {
        "generator": est.method, "sampler": est.sampler, "E": est.E,
        "price": est.price, "rmse": est.rmse, "seconds": est.seconds,
    }


def emit(report: RunReport, fmt: str = "csv") -> bytes:
    """Serialize a report; columns are always generator, sampler, E, price, rmse, seconds."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for est in report.rows:
            d = _row_dict(est)
            writer.writerow([_cell(d[c]) for c in COLUMNS])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        rows = []
        for est in report.rows:
            d = _row_dict(est)
            d.update(batches=est.batches, paths=est.paths, batch_means=[float(x) for x in est.batch_means],
                     discarded_variance=est.discarded_variance, events=est.events)
            rows.append(d)
        doc = {"schema": SCHEMA, "version": report.version, "columns": list(COLUMNS),
               "config": report.config, "rows": rows}
        return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")
    if fmt == "text":
        lines = [f"{'generator':<10} {'sampler':<8} {'E':>5} {'price':>12} {'rmse':>10} {'seconds':>8}"]
        for est in report.rows:
            secs = "" if est.seconds is None else f"{est.seconds:.2f}"
            lines.append(f"{est.method:<10} {est.sampler:<8} {est.E:>5} {est.price:>12.6f} "
                         f"{est.rmse:>10.6f} {secs:>8}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValidationError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def parse_report(data: bytes, fmt: str = "json") -> list:
    """Rows of an emitted csv or json report as dicts with typed values."""
    text = data.decode("utf-8")
    if fmt == "json":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValidationError(f"unsupported report schema {doc.get('schema')!r}")
        return [{c: r[c] for c in COLUMNS} for r in doc["rows"]]
    if fmt == "csv":
        out = []
        for r in csv.DictReader(io.StringIO(text)):
            out.append({
                "generator": r["generator"], "sampler": r["sampler"], "E": int(r["E"]),
                "price": float(r["price"]), "rmse": float(r["rmse"]),
                "seconds": float(r["seconds"]) if r["seconds"] else None,
            })
        return out
    raise ValidationError(f"cannot parse format {fmt!r}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="basketqmc", description="Price arithmetic Asian basket options "
                                 "with MC, LHS and randomized QMC path simulation.")
    ap.add_argument("--config", help="config file or bundled name (see --list-configs)")
    ap.add_argument("--sampler", help="comma list of samplers: " + ", ".join(SAMPLERS))
    ap.add_argument("--generator", help="comma list of generators: " + ", ".join(METHODS))
    ap.add_argument("--paths", type=int, help="paths per batch")
    ap.add_argument("--batches", type=int, help="number of batches")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--eff-dim", help="comma list of truncation dimensions (overrides --anova-p)")
    ap.add_argument("--anova-p", type=float, help="variance share used to pick the effective dimension")
    ap.add_argument("--format", choices=FORMATS, help="output format (default csv)")
    ap.add_argument("--out", help="write results here instead of standard output")
    ap.add_argument("--smoke", action="store_true", help=f"reduce paths per batch to {SMOKE_PATHS}")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads for batches")
    ap.add_argument("--dry-run", action="store_true", help="print the parsed config and exit")
    ap.add_argument("--timing", action="store_true", help="fill the seconds column")
    ap.add_argument("--spectrum", help="dump eigenvalue spectra to this path (one file per generator)")
    ap.add_argument("--list-configs", action="store_true", help="list bundled configs and exit")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress messages on standard error")
    return ap


def _overrides(args) -> dict:
    ov = {
        "samplers": args.sampler, "generators": args.generator, "paths": args.paths,
        "batches": args.batches, "seed": args.seed, "eff_dim": args.eff_dim, "anova_p": args.anova_p,
        "format": args.format, "out": args.out, "jobs": args.jobs,
    }
    if args.smoke:
        ov["paths"] = SMOKE_PATHS
    if args.timing:
        ov["timing"] = "true"
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.list_configs:
        for name, path in bundled_configs().items():
            print(f"{name}\t{path}")
        return 0
    try:
        if not args.config:
            raise ValidationError("--config is required")
        config = parse_config(args.config, _overrides(args))
        if args.dry_run:
            sys.stdout.write(json.dumps({"name": config.name, "config": config.echo}, indent=2) + "\n")
            return 0
        report = run(config, args.spectrum)
        data = emit(report, config.fmt)
        if config.out:
            with open(config.out, "wb") as fh:
                fh.write(data)
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BasketQMCError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
