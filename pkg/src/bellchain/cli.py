"""Command-line entry point: ``bellchain <command> [options]``.

Every command writes one CSV plus ``<csv>.json`` holding the resolved run
configuration, the package version and the wall time. ``bellchain replay
<sidecar.json>`` re-executes a recorded configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fit_gamma, scan, write_gamma_csv, write_scan_csv
from .chain_model import Boundary, ChainSpec, TimeGrid
from .diagrams import asymptotic_log2, diagram_counts, gaussian_log2, gaussian_params, write_diagrams_csv
from .exact_engine import BACKENDS, correlator_series, fmt_real, q_values, write_series_csv
from .oracle import evolve
from .shadows import reconstruct, sample_snapshots, write_shadow_csv

log = logging.getLogger("bellchain")

COMMANDS = ("correlator", "scan", "gamma", "critical-time", "diagrams", "asymptotic", "shadows")
OUTPUT_DIR_ENV = "BELLCHAIN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid run configuration; reported with the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname


def parse_int_list(text: str, fieldname: str) -> list[int]:
    """``1..5``, ``64,128`` and mixtures such as ``1..3,8``; the token ``all`` passes through as -1."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        try:
            if part == "all":
                out.append(-1)
            elif ".." in part:
                lo, hi = (int(x) for x in part.split(".."))
                if hi < lo:
                    raise ConfigError(fieldname, f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(fieldname, f"cannot parse {part!r} as an integer or a..b range") from None
    return out


def parse_float_list(text: str, fieldname: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(fieldname, f"expected comma-separated decimals, got {text!r}") from None


def parse_grid(text: str) -> TimeGrid:
    try:
        start, stop, steps = text.split(":")
        return TimeGrid(float(start), float(stop), int(steps))
    except ValueError as exc:
        raise ConfigError("grid", f"expected start:stop:steps ({exc})") from None


@dataclass
class RunConfig:
    command: str
    n_values: list[int]
    ranges: list[int]
    boundary: str = "open"
    grid: tuple[float, float, int] = (0.0, math.pi / 2, 2000)
    taus: list[float] | None = None
    seed: int = 0
    output: str = ""
    backend: str = "auto"
    workers: int = 1
    snapshots: int | None = None
    reconstructions: int = 10
    unbiased: bool = False
    snapshot_records: str | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ConfigError("n", "every N must be >= 2")
        if not self.ranges or any(r < 1 and r != -1 for r in self.ranges):
            raise ConfigError("r", "every range must be >= 1 (or 'all')")
        if self.boundary not in ("open", "periodic"):
            raise ConfigError("boundary", "must be 'open' or 'periodic'")
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"must be one of {', '.join(BACKENDS)}")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        TimeGrid(*self.grid)
        if self.command == "shadows":
            if max(self.n_values) > 10:
                raise ConfigError("n", "shadow simulation supports N <= 10")
            if self.snapshots is not None and self.snapshots < 1:
                raise ConfigError("m", "must be >= 1")
            if self.reconstructions < 1:
                raise ConfigError("n-rec", "must be >= 1")
        if self.command in ("gamma",) and len(set(self.n_values)) < 2:
            raise ConfigError("n", "gamma fits need at least two N values")
        if self.boundary == "periodic" and self.backend not in ("oracle",) and self.command in (
            "correlator",
            "scan",
            "gamma",
            "critical-time",
        ):
            raise ConfigError("backend", "periodic chains need --backend oracle")

    def specs(self) -> list[ChainSpec]:
        out = []
        for n in self.n_values:
            for r in self.ranges:
                rr = n - 1 if r == -1 else r
                spec = ChainSpec(n, rr, Boundary(self.boundary))
                if spec not in out:
                    out.append(spec)
        return out

    def time_grid(self) -> TimeGrid:
        return TimeGrid(*self.grid)

    def times(self) -> np.ndarray:
        return np.array(self.taus) if self.taus else self.time_grid().points()


def _run_correlator(cfg: RunConfig, fh) -> None:
    if cfg.taus:
        from .exact_engine import CorrelatorSeries

        series = []
        for spec in cfg.specs():
            taus = np.array(cfg.taus)
            q = q_values(spec, taus, cfg.backend)
            series.append(CorrelatorSeries(spec, cfg.time_grid(), taus, np.exp2(q - spec.n_spins), q))
    else:
        series = [correlator_series(s, cfg.time_grid(), cfg.backend, cfg.workers) for s in cfg.specs()]
    write_series_csv(series, fh)


def _run_scan(cfg: RunConfig, fh) -> None:
    write_scan_csv(scan(cfg.specs(), cfg.time_grid(), cfg.backend, cfg.workers), fh)


def _run_gamma(cfg: RunConfig, fh) -> None:
    result = scan(cfg.specs(), cfg.time_grid(), cfg.backend, cfg.workers)
    fits = [fit_gamma(r, cfg.n_values, cfg.time_grid(), cfg.backend, result) for r in sorted(set(cfg.ranges)) if r != -1]
    write_gamma_csv(fits, fh)


def _run_diagrams(cfg: RunConfig, fh) -> None:
    rows = []
    for n in sorted(set(cfg.n_values)):
        for r in sorted(set(n - 1 if r == -1 else r for r in cfg.ranges)):
            counts = diagram_counts(n, r)
            params = gaussian_params(n, r) if (r >= 2 and n % 2 == 0) else None
            rows.append((counts, params))
    write_diagrams_csv(rows, fh)


def _run_asymptotic(cfg: RunConfig, fh) -> None:
    import csv

    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["N", "r", "tau", "q_asymptotic", "q_gaussian", "q_exact"])
    taus = cfg.times()
    for spec in cfg.specs():
        n, r = spec.n_spins, spec.range
        qa = n + asymptotic_log2(n, r, taus)
        qg = n + gaussian_log2(n, r, taus)
        qe = q_values(spec, taus, cfg.backend)
        for row in zip(taus, qa, qg, qe):
            writer.writerow([n, r] + [fmt_real(float(x)) for x in row])


def _run_shadows(cfg: RunConfig, fh) -> None:
    rows = []
    records = open(cfg.snapshot_records, "w") if cfg.snapshot_records else None
    try:
        for k, spec in enumerate(cfg.specs()):
            m = cfg.snapshots or 10**4 * spec.n_spins
            for j, tau in enumerate(cfg.times()):
                state = evolve(spec, float(tau))
                point_seed = cfg.seed * 1_000_003 + k * 10_007 + j
                res = reconstruct(state, m, cfg.reconstructions, point_seed, cfg.unbiased)
                q_exact = float(q_values(spec, [tau], "oracle" if spec.boundary is Boundary.PERIODIC else "auto")[0])
                rows.append((spec.n_spins, spec.range, float(tau), q_exact, res))
                if records:
                    records.write(f"# N={spec.n_spins} r={spec.range} tau={fmt_real(float(tau))} reconstruction=0\n")
                    sample_snapshots(state, m, point_seed, 0).write_records(records)
    finally:
        if records:
            records.close()
    write_shadow_csv(rows, fh)


_RUNNERS = {
    "correlator": _run_correlator,
    "scan": _run_scan,
    "gamma": _run_gamma,
    "critical-time": _run_scan,
    "diagrams": _run_diagrams,
    "asymptotic": _run_asymptotic,
    "shadows": _run_shadows,
}


def resolve_output(cfg: RunConfig) -> Path:
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{cfg.command}.csv"


def run(cfg: RunConfig) -> Path:
    """Execute a validated config; returns the CSV path (sidecar alongside)."""
    cfg.validate()
    out = resolve_output(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with open(out, "w", newline="") as fh:
        _RUNNERS[cfg.command](cfg, fh)
    sidecar = {"config": asdict(cfg), "version": __version__, "wall_time_seconds": time.perf_counter() - start}
    Path(str(out) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", out)
    return out


def config_from_sidecar(path: str) -> RunConfig:
    data = json.loads(Path(path).read_text())["config"]
    data["grid"] = tuple(data["grid"])
    return RunConfig(**data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellchain", description="Bell correlations in finite-range Ising chains")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--n", required=True, help="spin counts: 64,128 or 2..12")
        p.add_argument("--r", required=True, help="ranges: 1..5, 3,4 or 'all' for N-1")
        p.add_argument("--boundary", default="open", choices=["open", "periodic"])
        p.add_argument("--grid", default=f"0:{math.pi / 2!r}:2000", help="start:stop:steps")
        p.add_argument("--tau", help="explicit comma-separated times (overrides --grid)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="", help=f"CSV path (default ${OUTPUT_DIR_ENV}/<command>.csv)")
        p.add_argument("--backend", default="auto", choices=list(BACKENDS))
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        if name == "shadows":
            p.add_argument("--m", type=int, default=None, help="snapshots per reconstruction (default 10^4 N)")
            p.add_argument("--n-rec", type=int, default=10)
            p.add_argument("--unbiased", action="store_true", help="pair-product estimator of |element|^2")
            p.add_argument("--records", default=None, help="export reconstruction-0 snapshots as bases,bits lines")

    replay = sub.add_parser("replay", help="re-run the configuration stored in a JSON sidecar")
    replay.add_argument("sidecar")
    replay.add_argument("--out", default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    grid = parse_grid(args.grid)
    return RunConfig(
        command=args.command,
        n_values=parse_int_list(args.n, "n"),
        ranges=parse_int_list(args.r, "r"),
        boundary=args.boundary,
        grid=(grid.start, grid.stop, grid.steps),
        taus=parse_float_list(args.tau, "tau") if args.tau else None,
        seed=args.seed,
        output=args.out,
        backend=args.backend,
        workers=args.workers,
        snapshots=getattr(args, "m", None),
        reconstructions=getattr(args, "n_rec", 10),
        unbiased=getattr(args, "unbiased", False),
        snapshot_records=getattr(args, "records", None),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "replay":
            cfg = config_from_sidecar(args.sidecar)
            if args.out is not None:
                cfg.output = args.out
        else:
            cfg = config_from_args(args)
        cfg.validate()
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"bellchain: config error: {exc}", file=sys.stderr)
        return 2
    try:
        out = run(cfg)
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"bellchain: run failed: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
