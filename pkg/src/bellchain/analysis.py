"""Classification, first-maximum and critical-time extraction, scaling fits."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from .chain_model import ChainSpec, TimeGrid
from .exact_engine import fmt_real, q_values

DEFAULT_GRID = TimeGrid(0.0, math.pi / 2, 2000)
MAX_TOL = 1e-6
CRIT_TOL = 1e-12


class Level(str, Enum):
    CONSISTENT_WITH_LHV = "consistent_with_lhv"
    ENTANGLED = "entangled"
    BELL_CORRELATED = "bell_correlated"


@dataclass(frozen=True)
class CorrelationClass:
    level: Level
    depth: int
    fraction: float

    @property
    def entangled(self) -> bool:
        return self.level is not Level.CONSISTENT_WITH_LHV

    @property
    def bell_correlated(self) -> bool:
        return self.level is Level.BELL_CORRELATED


def nonlocality_depth(q: float, n_spins: int) -> int:
    """Smallest nu with nu - 3 < Q <= nu - 2, clamped to [0, N]; 0 when Q <= 0."""
    if not q > 0:
        return 0
    return max(0, min(n_spins, math.ceil(q + 2)))


def classify_q(q: float, n_spins: int) -> CorrelationClass:
    """Classify from Q = N + log2 E (no underflow for large N)."""
    if q > 0:
        level = Level.BELL_CORRELATED
    elif q > -n_spins:
        level = Level.ENTANGLED
    else:
        level = Level.CONSISTENT_WITH_LHV
    return CorrelationClass(level, nonlocality_depth(q, n_spins), q / n_spins)


def classify(e_value: float, n_spins: int) -> CorrelationClass:
    if not 0.0 <= e_value <= 0.25 + 1e-12:
        raise ValueError(f"correlator value {e_value} outside [0, 1/4]")
    if e_value == 0:
        return CorrelationClass(Level.CONSISTENT_WITH_LHV, 0, -math.inf)
    # compare against the bounds exactly; log2 rounding would blur the equality cases
    if e_value > math.ldexp(1.0, -n_spins):
        level = Level.BELL_CORRELATED
    elif e_value > math.ldexp(1.0, -2 * n_spins):
        level = Level.ENTANGLED
    else:
        level = Level.CONSISTENT_WITH_LHV
    q = n_spins + math.log2(e_value)
    depth = nonlocality_depth(q, n_spins) if level is Level.BELL_CORRELATED else 0
    return CorrelationClass(level, depth, q / n_spins)


def _q_scalar(spec: ChainSpec, backend: str):
    return lambda t: float(q_values(spec, [t], backend)[0])


_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_max(f, a: float, b: float, tol: float) -> float:
    """Golden-section search for the maximum of a unimodal f on [a, b]."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


def _first_local_max(q: np.ndarray) -> int | None:
    inner = (q[1:-1] > q[:-2]) & (q[1:-1] >= q[2:]) & np.isfinite(q[1:-1])
    hits = np.nonzero(inner)[0]
    return int(hits[0]) + 1 if hits.size else None


def find_first_max(
    spec: ChainSpec,
    grid: TimeGrid = DEFAULT_GRID,
    backend: str = "auto",
    q: np.ndarray | None = None,
    mode: str = "first",
) -> tuple[float, float]:
    """Interior maximum of Q_N(tau) on the grid, golden-section refined.

    ``mode="first"`` takes the earliest local maximum. ``mode="global"``
    takes the largest interior grid value, which differs for long-range
    chains: their Q_N oscillates well before the GHZ peak at pi/4.
    """
    taus = grid.points()
    if q is None:
        q = q_values(spec, taus, backend)
    if mode == "first":
        i = _first_local_max(q)
    elif mode == "global":
        i = int(np.argmax(q[1:-1])) + 1 if np.isfinite(q[1:-1]).any() else None
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if i is None:
        raise ValueError(f"no interior maximum of Q on the grid for {spec}")
    f = _q_scalar(spec, backend)
    tau_star = golden_max(f, taus[i - 1], taus[i + 1], MAX_TOL)
    q_star = f(tau_star)
    if q_star < q[i]:
        tau_star, q_star = taus[i], float(q[i])
    return float(tau_star), float(q_star)


def find_critical_time(
    spec: ChainSpec,
    grid: TimeGrid = DEFAULT_GRID,
    backend: str = "auto",
    q: np.ndarray | None = None,
    first_max: tuple[float, float] | None = None,
) -> float | None:
    """First upward crossing of Q_N = 0 before the first maximum, or None."""
    taus = grid.points()
    if q is None:
        q = q_values(spec, taus, backend)
    tau_star, q_max = first_max if first_max is not None else find_first_max(spec, grid, backend, q)
    if q_max <= 0:
        return None
    f = _q_scalar(spec, backend)
    stop = np.searchsorted(taus, tau_star, side="right")
    for j in range(1, stop):
        if q[j - 1] <= 0 < q[j]:
            return float(optimize.brentq(f, taus[j - 1], taus[j], xtol=CRIT_TOL))
    # crossing falls between the last grid point and the refined maximum
    j = max(stop - 1, 0)
    if q[j] <= 0 < q_max:
        return float(optimize.brentq(f, taus[j], tau_star, xtol=CRIT_TOL))
    return None


@dataclass(frozen=True)
class ScanEntry:
    n_spins: int
    range: int
    tau_star: float
    q_max: float
    tau_crit: float | None

    @property
    def depth(self) -> int:
        return nonlocality_depth(self.q_max, self.n_spins)

    @property
    def beta(self) -> float:
        return self.depth / self.n_spins


@dataclass
class ScanResult:
    entries: list[ScanEntry] = field(default_factory=list)

    def get(self, n_spins: int, range_: int) -> ScanEntry:
        for e in self.entries:
            if e.n_spins == n_spins and e.range == range_:
                return e
        raise KeyError((n_spins, range_))


def scan_one(spec: ChainSpec, grid: TimeGrid = DEFAULT_GRID, backend: str = "auto") -> ScanEntry:
    q = q_values(spec, grid.points(), backend)
    first = find_first_max(spec, grid, backend, q)
    tau_c = find_critical_time(spec, grid, backend, q, first)
    return ScanEntry(spec.n_spins, spec.range, first[0], first[1], tau_c)


def _scan_job(args):
    return scan_one(*args)


def scan(
    specs: Iterable[ChainSpec], grid: TimeGrid = DEFAULT_GRID, backend: str = "auto", workers: int | None = 1
) -> ScanResult:
    """Scan every spec; entries come back sorted by (N, r) whatever the worker count."""
    jobs = sorted(set(specs), key=lambda s: (s.n_spins, s.range, s.boundary.value))
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_scan_job, [(s, grid, backend) for s in jobs]))
    else:
        entries = [scan_one(s, grid, backend) for s in jobs]
    return ScanResult(entries)


@dataclass(frozen=True)
class GammaFit:
    range: int
    gamma: float
    gamma_stderr: float
    intercept: float
    n_values: tuple[int, ...]


def fit_gamma(
    range_: int,
    n_values: Sequence[int],
    grid: TimeGrid = DEFAULT_GRID,
    backend: str = "auto",
    scan_result: ScanResult | None = None,
    workers: int | None = 1,
) -> GammaFit:
    """Least-squares line Q_max(N) = gamma N + intercept."""
    ns = tuple(sorted(set(int(n) for n in n_values)))
    if len(ns) < 2:
        raise ValueError("need at least two distinct N values for a fit")
    if scan_result is None:
        scan_result = scan([ChainSpec(n, range_) for n in ns], grid, backend, workers)
    q = [scan_result.get(n, min(range_, n - 1)).q_max for n in ns]
    fit = stats.linregress(ns, q)
    stderr = float(fit.stderr) if len(ns) > 2 else math.nan
    return GammaFit(range_, float(fit.slope), stderr, float(fit.intercept), ns)


def fraction_scan(
    ranges: Sequence[int],
    n_values: Sequence[int],
    grid: TimeGrid = DEFAULT_GRID,
    backend: str = "auto",
    scan_result: ScanResult | None = None,
    workers: int | None = 1,
) -> dict[tuple[int, int], float]:
    """beta = nu / N from the first maximum, keyed by (r, N)."""
    if scan_result is None:
        scan_result = scan([ChainSpec(n, r) for r in ranges for n in n_values], grid, backend, workers)
    return {(r, n): scan_result.get(n, min(r, n - 1)).beta for r in ranges for n in n_values}


SCAN_COLUMNS = ["N", "r", "tau_star", "q_max", "tau_crit", "nu", "beta"]
GAMMA_COLUMNS = ["r", "gamma", "gamma_stderr", "intercept"]


def write_scan_csv(result: ScanResult, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for e in result.entries:
        writer.writerow(
            [e.n_spins, e.range, fmt_real(e.tau_star), fmt_real(e.q_max), fmt_real(e.tau_crit), e.depth, fmt_real(e.beta)]
        )


def write_gamma_csv(fits: Iterable[GammaFit], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(GAMMA_COLUMNS)
    for g in fits:
        writer.writerow([g.range, fmt_real(g.gamma), fmt_real(g.gamma_stderr), fmt_real(g.intercept)])
