"""Acceptance gate: one test, and one printed PASS/FAIL line, per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import math
import os

import numpy as np
import pytest

from bellchain.analysis import DEFAULT_GRID, find_critical_time, find_first_max, fit_gamma, scan
from bellchain.chain_model import ChainSpec
from bellchain.diagrams import (
    asymptotic_crossing,
    asymptotic_log2,
    count_matchings,
    count_spanning_clusters,
    count_triangles,
    fit_matching_exponent,
    gaussian_params,
)
from bellchain.exact_engine import correlator, correlator_r1, q_values
from bellchain.oracle import correlator_bruteforce, evolve, mqc_spectrum
from bellchain.shadows import reconstruct

from .conftest import record

pytestmark = pytest.mark.slow

LARGE_N = (64, 128, 256, 300)
WORKERS = os.cpu_count() or 1


def fib(k):
    a, b = 1, 1
    for _ in range(k - 1):
        a, b = b, a + b
    return a


def verdict(name, checks, info=""):
    """checks: list of (label, ok), label describing the failure. Records one line and asserts."""
    ok = all(c for _, c in checks)
    failed = [label for label, c in checks if not c]
    detail = f"{len(checks)} sub-checks hold" if ok else "failed: " + "; ".join(failed)
    if info:
        detail += f" [{info}]"
    record(name, ok, detail)
    assert ok, detail


@pytest.fixture(scope="module")
def large_scan():
    specs = [ChainSpec(n, r) for n in LARGE_N for r in range(1, 6)]
    return scan(specs, DEFAULT_GRID, workers=WORKERS)


def test_c01_oracle_equivalence():
    taus = np.linspace(0.0, math.pi / 2, 25)
    worst = 0.0
    for n in range(2, 13, 2):
        for r in range(1, n):
            spec = ChainSpec(n, r)
            e_t = np.exp2(q_values(spec, taus, backend="transfer") - n)
            e_o = np.array([correlator_bruteforce(spec, t) for t in taus])
            worst = max(worst, float(np.max(np.abs(e_t - e_o))))
    verdict("C1 oracle equivalence", [(f"max |dE| = {worst:.2e} > 1e-10", worst <= 1e-10)], f"max |dE| = {worst:.1e}")


def test_c02_nearest_neighbour_closed_form():
    taus = np.linspace(0.0, math.pi / 2, 101)
    worst = 0.0
    # the closed form presumes even N; odd chains are identically zero
    for n in range(2, 41, 2):
        e_t = np.exp2(q_values(ChainSpec(n, 1), taus, backend="transfer") - n)
        e_c = np.array([correlator_r1(n, t) for t in taus])
        worst = max(worst, float(np.max(np.abs(e_t - e_c))))
    checks = [(f"transfer vs closed form {worst:.2e} > 1e-12", worst <= 1e-12)]
    for n in (20, 40):
        tau, q = find_first_max(ChainSpec(n, 1))
        checks.append((f"N={n} first max at {tau:.4f}, |tau - pi/6| = {abs(tau - math.pi / 6):.4f} > 0.01",
                       abs(tau - math.pi / 6) <= 0.01))
        ratio = 2.0 ** (q - n - (-1.6 * n + 1))
        checks.append((f"N={n} max E / 2^(-1.6N+1) = {ratio:.3f} outside [1/1.15, 1.15]",
                       1 / 1.15 <= ratio <= 1.15))
    verdict("C2 r=1 closed form", checks)


def test_c03_critical_range(large_scan):
    checks = []
    for n in LARGE_N:
        for r in range(1, 6):
            q = large_scan.get(n, r).q_max
            checks.append((f"N={n} r={r} q_max={q:.3f} has wrong sign", (q > 0) == (r >= 4)))
    g = {r: fit_gamma(r, LARGE_N, scan_result=large_scan).gamma for r in range(1, 6)}
    checks += [
        (f"gamma(1) = {g[1]:.4f} not in -0.6 +- 0.02", abs(g[1] + 0.6) <= 0.02),
        (f"gamma(2) = {g[2]:.4f} not < 0", g[2] < 0),
        (f"gamma(3) = {g[3]:.4f} not < 0", g[3] < 0),
        (f"gamma(4) = {g[4]:.4f} not > 0", g[4] > 0),
        (f"gamma(5) = {g[5]:.4f} not > gamma(4)", g[5] > g[4]),
    ]
    verdict("C3 critical range", checks, "gamma = " + ", ".join(f"{g[r]:.4f}" for r in range(1, 6)))


def test_c04_one_axis_twisting():
    checks = []
    for n in (64, 300):
        e, _ = correlator(ChainSpec(n, n - 1), math.pi / 4, backend="closed-form")
        checks.append((f"N={n} E(pi/4) = {e!r}", abs(e - 0.25) <= 1e-10))
    scaled = []
    for n in (64, 128, 256):
        tau_c = find_critical_time(ChainSpec(n, n - 1))
        ok = tau_c is not None and abs(tau_c - 1.5 / n) <= 0.2 * 1.5 / n
        checks.append((f"N={n} tau_c*N = {None if tau_c is None else tau_c * n}", ok))
        scaled.append(f"{tau_c * n:.3f}" if tau_c else "none")
    verdict("C4 one-axis-twisting limit", checks, "tau_c*N = " + ", ".join(scaled))


def test_c05_critical_time_collapse():
    ns = (80, 100, 120, 140)
    specs = [ChainSpec(n, r) for r in (4, 5) for n in ns]
    res = scan(specs, DEFAULT_GRID, workers=WORKERS)
    checks, spreads = [], []
    for r in (4, 5):
        tc = np.array([res.get(n, r).tau_crit for n in ns], dtype=float)
        spread = (tc.max() - tc.min()) / tc.mean()
        checks.append((f"r={r} relative spread {spread:.4f} > 0.05", spread <= 0.05))
        spreads.append(f"r={r}: {spread:.4f}")
    for n in ns:
        a, b = res.get(n, 4).tau_crit, res.get(n, 5).tau_crit
        checks.append((f"N={n} tau_c(4)={a} not > tau_c(5)={b}", a > b))
    a = np.mean([r * res.get(n, r).tau_crit for r in (4, 5) for n in ns])
    verdict("C5 critical-time collapse", checks, "spread " + ", ".join(spreads) + f"; fitted a in tau_c ~ a/r: {a:.3f}")


def test_c06_diagram_counts():
    checks = [
        ("P(16, 3..5)", [count_matchings(16, r) for r in (3, 4, 5)] == [491, 3116, 12483]),
        ("R(16, 3..5)", [count_triangles(16, r) for r in (3, 4, 5)] == [40, 76, 120]),
        ("P(N, 2) = Fibonacci", all(count_matchings(n, 2) == fib(n // 2 + 1) for n in range(2, 61, 2))),
        ("spanning(10, 4) = 15", count_spanning_clusters(10, 4) == 15),
        ("spanning(10, 3) = 1", count_spanning_clusters(10, 3) == 1),
    ]
    verdict("C6 diagram counts", checks)


def test_c07_matching_exponents():
    ns = range(40, 201, 2)
    targets = {2: (0.2406, 0.005), 3: (0.427, 0.02), 4: (0.563, 0.02), 5: (0.670, 0.02)}
    checks, slopes = [], []
    for r, (target, tol) in targets.items():
        slope = fit_matching_exponent(r, ns)
        checks.append((f"r={r} slope {slope:.5f} not within {tol} of {target}", abs(slope - target) <= tol))
        slopes.append(f"{slope:.5f}")
    verdict("C7 matching exponents", checks, "slopes r=2..5: " + ", ".join(slopes))


def test_c08_asymptotics():
    taus = np.linspace(0.0, math.pi / 2, 20001)[1:-1]
    checks = []
    for r in (4, 5):
        checks.append((f"r={r} asymptotic never crosses", asymptotic_crossing(16, r) is not None))
    q3 = 16 + asymptotic_log2(16, 3, taus)
    checks.append((f"r=3 asymptotic reaches Q={q3.max():.3f}", bool(np.all(q3 <= 0))))
    t_asym = asymptotic_crossing(16, 4)
    t_exact = find_critical_time(ChainSpec(16, 4))
    rel = abs(t_asym - t_exact) / t_exact
    checks.append((f"r=4 crossing {t_asym:.4f} vs exact {t_exact:.4f}, rel {rel:.3f} > 0.15", rel <= 0.15))
    for n in range(12, 21, 2):
        for r in range(2, n):
            e = gaussian_params(n, r).e_tilde_max
            checks.append((f"N={n} r={r} e_tilde_max={e:.3f} has wrong sign", (e < 0) == (r <= 3)))
    verdict("C8 short-time asymptotics", checks, f"r=4 crossing {t_asym:.4f} vs exact {t_exact:.4f}")


def test_c09_parity_and_mqc():
    checks = []
    taus = np.linspace(0.0, math.pi / 2, 50)
    for n in (3, 5, 7):
        for r in range(1, n):
            e = np.exp2(q_values(ChainSpec(n, r), taus) - n)
            checks.append((f"N={n} r={r} max E = {e.max():.2e}", bool(np.all(e <= 1e-12))))
    for n in (4, 6):
        for r in range(1, n):
            for tau in (0.2, 0.5, math.pi / 4, 1.2):
                spec = ChainSpec(n, r)
                mqc = mqc_spectrum(evolve(spec, tau))
                e = correlator(spec, tau)[0]
                checks.append((f"N={n} r={r} tau={tau:.3f} I_N - E = {mqc[n] - e:.2e}", abs(mqc[n] - e) <= 1e-10))
                checks.append((f"N={n} r={r} tau={tau:.3f} sum I = {mqc.total!r}", abs(mqc.total - 1) <= 1e-10))
    verdict("C9 parity and MQC", checks)


def test_c10_classical_shadows():
    taus = np.linspace(0.0, math.pi / 2, 12)[1:-1]
    checks, counts = [], []
    for k, (n, r) in enumerate(((4, 3), (6, 5))):
        spec = ChainSpec(n, r)
        hits = 0
        for j, tau in enumerate(taus):
            res = reconstruct(evolve(spec, tau), 10**4 * n, 10, seed=1000 * k + j)
            q_exact = correlator(spec, tau)[1]
            hits += abs(res.q_mean - q_exact) <= 2 * res.q_std
        checks.append((f"(N={n}, r={r}) only {hits}/10 points within 2 q_std", hits >= 8))
        counts.append(f"({n},{r}): {hits}/10")
    verdict("C10 classical shadows", checks, ", ".join(counts))


def test_c11_fraction_universality(large_scan):
    b256 = large_scan.get(256, 4).beta
    b300 = large_scan.get(300, 4).beta
    g4 = fit_gamma(4, LARGE_N, scan_result=large_scan).gamma
    checks = [
        (f"|beta(256) - beta(300)| = {abs(b256 - b300):.4f} > 0.01", abs(b256 - b300) <= 0.01),
        (f"|beta(256) - gamma(4)| = {abs(b256 - g4):.4f} > 0.03", abs(b256 - g4) <= 0.03),
        (f"|beta(300) - gamma(4)| = {abs(b300 - g4):.4f} > 0.03", abs(b300 - g4) <= 0.03),
    ]
    verdict("C11 fraction universality", checks, f"beta(256)={b256:.4f}, beta(300)={b300:.4f}, gamma(4)={g4:.4f}")
