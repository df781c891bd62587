"""Spin-inversion diagram counting and the short-time asymptotic correlator.

At short times C- is dominated by diagrams in which every spin is flipped
exactly once: perfect matchings of the range-r chain graph, each carrying
``(-i sin tau)^(N/2) cos^(K-N/2) tau``. C+ keeps the no-flip term plus the
lowest correction, closed triangles of mutually coupled spins.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .exact_engine import fmt_real

MAX_SPANNING_SPINS = 24


def k_lines(n_spins: int, range_: int) -> int:
    """Number of coupled pairs K = r(2N - r - 1)/2 of an open chain."""
    r = min(range_, n_spins - 1)
    return r * (2 * n_spins - r - 1) // 2


def _check(n_spins: int, range_: int) -> int:
    if n_spins < 1 or range_ < 1:
        raise ValueError("n_spins and range must be positive")
    return min(range_, n_spins - 1)


def count_matchings(n_spins: int, range_: int) -> int:
    """Perfect matchings of {1..N} with edges 0 < |k - l| <= r (exact integer).

    Sweeps vertices left to right; the state is the set of still-unmatched
    vertices among the last r, as a bitmask with bit j = vertex pos-1-j. A
    vertex leaving the window unmatched kills the branch.
    """
    if n_spins % 2:
        return 0
    r = _check(n_spins, range_)
    overflow = 1 << r
    states = {0: 1}
    for _ in range(n_spins):
        nxt: dict[int, int] = {}
        for mask, count in states.items():
            opened = (mask << 1) | 1
            if opened < overflow:
                nxt[opened] = nxt.get(opened, 0) + count
            bit = 1
            while bit <= mask:
                if mask & bit:
                    closed = (mask & ~bit) << 1
                    if closed < overflow:
                        nxt[closed] = nxt.get(closed, 0) + count
                bit <<= 1
        states = nxt
    return states.get(0, 0)


def log_count_matchings(n_spins: int, range_: int) -> float:
    """ln P_r(N) via the same sweep in rescaled floating point."""
    if n_spins % 2:
        return -math.inf
    r = _check(n_spins, range_)
    size = 1 << r
    # transition table: new_mask <- old_mask
    src, dst = [], []
    for mask in range(size):
        if (mask << 1 | 1) < size:
            src.append(mask)
            dst.append(mask << 1 | 1)
        for j in range(r):
            if mask >> j & 1 and ((mask & ~(1 << j)) << 1) < size:
                src.append(mask)
                dst.append((mask & ~(1 << j)) << 1)
    src_a, dst_a = np.array(src), np.array(dst)
    vec = np.zeros(size)
    vec[0] = 1.0
    log_scale = 0.0
    for _ in range(n_spins):
        vec = np.bincount(dst_a, weights=vec[src_a], minlength=size)
        top = vec.max()
        vec /= top
        log_scale += math.log(top)
    return log_scale + math.log(vec[0]) if vec[0] > 0 else -math.inf


def count_triangles(n_spins: int, range_: int) -> int:
    """Triples i < j < k with k - i <= r."""
    return sum((d - 1) * (n_spins - d) for d in range(2, min(range_, n_spins - 1) + 1))


def count_spanning_clusters(n_spins: int, range_: int) -> int:
    """Perfect matchings in which every gap between neighbouring sites is bridged.

    A gap g (between sites g and g+1) is bridged when some matched pair
    (i, j) has i <= g < j. Enumerated depth-first: the lowest unmatched site
    is paired with each free partner in range, and a branch is cut as soon
    as the lowest unmatched site is not reached by any earlier pair.
    """
    if n_spins % 2:
        return 0
    if n_spins > MAX_SPANNING_SPINS:
        raise ValueError(f"spanning-cluster enumeration limited to N <= {MAX_SPANNING_SPINS}")
    r = _check(n_spins, range_)
    n = n_spins
    used = [False] * (n + 1)

    def walk(lowest: int, reach: int) -> int:
        while lowest < n and used[lowest]:
            lowest += 1
        if lowest == n:
            return 1
        if lowest > 0 and reach < lowest:
            return 0
        total = 0
        used[lowest] = True
        for partner in range(lowest + 1, min(n, lowest + r + 1)):
            if not used[partner]:
                used[partner] = True
                total += walk(lowest + 1, max(reach, partner))
                used[partner] = False
        used[lowest] = False
        return total

    return walk(0, 0)


def fit_matching_exponent(range_: int, n_values: Sequence[int]) -> float:
    """Least-squares slope of ln P_r(N) against N."""
    ns = sorted(set(int(n) for n in n_values))
    if len(ns) < 2:
        raise ValueError("need at least two distinct N values")
    if any(n % 2 for n in ns):
        raise ValueError("matching exponents need even N")
    logs = [math.log(count_matchings(n, range_)) for n in ns]
    return float(np.polyfit(ns, logs, 1)[0])


@dataclass(frozen=True)
class DiagramCounts:
    n_spins: int
    range: int
    k_lines: int
    p_count: int
    r_count: int
    spanning_count: int | None


def diagram_counts(n_spins: int, range_: int, spanning: bool = True) -> DiagramCounts:
    span = None
    if spanning and n_spins <= MAX_SPANNING_SPINS:
        span = count_spanning_clusters(n_spins, range_)
    return DiagramCounts(
        n_spins,
        min(range_, n_spins - 1),
        k_lines(n_spins, range_),
        count_matchings(n_spins, range_),
        count_triangles(n_spins, range_),
        span,
    )


def asymptotic_log2(n_spins: int, range_: int, taus) -> np.ndarray:
    """log2 of the leading-diagram correlator |C+|^2 |C-|^2.

    |C-|^2 = P^2 cos^(2K-N) sin^N and |C+|^2 = cos^(2K-6) (cos^6 + R^2 sin^6);
    the cross term of |C+|^2 drops out because its two pieces are real and
    purely imaginary.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    p = count_matchings(n_spins, range_)
    if p == 0:
        return np.full(taus.shape, -np.inf)
    k = k_lines(n_spins, range_)
    rr = count_triangles(n_spins, range_)
    n = n_spins
    c = np.abs(np.cos(taus))
    s = np.abs(np.sin(taus))
    with np.errstate(divide="ignore"):
        return (
            2 * math.log2(p)
            + (4 * k - n - 6) * np.log2(c)
            + n * np.log2(s)
            + np.log2(c**6 + float(rr) ** 2 * s**6)
        )


def asymptotic_correlator(n_spins: int, range_: int, tau):
    out = np.exp2(asymptotic_log2(n_spins, range_, tau))
    return float(out[0]) if np.ndim(tau) == 0 else out


def gaussian_log2(n_spins: int, range_: int, taus) -> np.ndarray:
    """log2 of the intermediate-time form P^2 R^2 exp(-beta_N tau^2) tau^(N+6)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    p, rr = count_matchings(n_spins, range_), count_triangles(n_spins, range_)
    if p == 0 or rr == 0:
        return np.full(taus.shape, -np.inf)
    beta = 2 * k_lines(n_spins, range_) - n_spins / 2
    with np.errstate(divide="ignore"):
        return 2 * math.log2(p * rr) - beta * taus**2 / math.log(2) + (n_spins + 6) * np.log2(taus)


@dataclass(frozen=True)
class AsymptoticParams:
    n_spins: int
    range: int
    beta_exponent: float
    tau_max: float
    e_tilde_max: float
    tau_crit: float | None


def gaussian_params(n_spins: int, range_: int) -> AsymptoticParams:
    """Peak position, scaled peak height and the Bell-crossing estimate.

    ``e_tilde_max`` is ln(2^N E) at the peak of the intermediate-time form;
    expanding to second order around ``tau_max`` (curvature -4 beta_N) gives
    the crossing ``tau_max - sqrt(e_tilde_max / (2 beta_N))``.
    """
    if n_spins % 2:
        raise ValueError("the diagram expansion needs even N")
    if range_ < 2:
        raise ValueError("range 1 has no triangle diagrams; the intermediate-time form degenerates")
    n = n_spins
    p, rr = count_matchings(n, range_), count_triangles(n, range_)
    beta = 2 * k_lines(n, range_) - n / 2
    tau_max = math.sqrt((n + 6) / (2 * beta))
    a = 1 + 6 / n
    e_tilde = n * (2 * math.log(p * rr) / n - a * math.log(1 / tau_max) + math.log(2) - a / 2)
    tau_crit = tau_max - math.sqrt(e_tilde / (2 * beta)) if e_tilde >= 0 else None
    return AsymptoticParams(n, min(range_, n - 1), beta, tau_max, e_tilde, tau_crit)


def asymptotic_crossing(n_spins: int, range_: int, stop: float = math.pi / 4, steps: int = 4000) -> float | None:
    """First time the leading-diagram correlator exceeds 2^-N, if any."""
    from scipy.optimize import brentq

    taus = np.linspace(0.0, stop, steps)
    q = n_spins + asymptotic_log2(n_spins, range_, taus)
    above = np.nonzero(q > 0)[0]
    if above.size == 0:
        return None
    j = above[0]
    return brentq(lambda t: n_spins + asymptotic_log2(n_spins, range_, t)[0], taus[j - 1], taus[j], xtol=1e-12)


DIAGRAM_COLUMNS = ["N", "r", "K", "P", "R", "spanning", "beta_N", "tau_max", "e_tilde_max", "tau_crit"]


def write_diagrams_csv(rows: Iterable[tuple[DiagramCounts, AsymptoticParams | None]], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(DIAGRAM_COLUMNS)
    for counts, params in rows:
        writer.writerow(
            [
                counts.n_spins,
                counts.range,
                counts.k_lines,
                counts.p_count,
                counts.r_count,
                "" if counts.spanning_count is None else counts.spanning_count,
                fmt_real(params.beta_exponent) if params else "",
                fmt_real(params.tau_max) if params else "",
                fmt_real(params.e_tilde_max) if params else "",
                fmt_real(params.tau_crit) if params else "",
            ]
        )
