import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellchain.chain_model import Boundary, ChainSpec, TimeGrid
from bellchain.exact_engine import (
    amplitude_sums,
    correlator,
    correlator_all_to_all,
    correlator_r1,
    correlator_series,
    q_values,
    write_series_csv,
)
from bellchain.oracle import correlator_bruteforce

TAUS25 = np.linspace(0.0, math.pi / 2, 25)


def test_two_spin_amplitudes_at_quarter_period():
    amp = amplitude_sums(ChainSpec(2, 1), math.pi / 4)
    assert amp.c_plus == pytest.approx(math.cos(math.pi / 4), abs=1e-14)
    assert amp.c_minus == pytest.approx(-1j * math.sin(math.pi / 4), abs=1e-14)


@pytest.mark.parametrize("n, r", [(2, 1), (7, 3), (12, 5)])
def test_zero_time_amplitudes(n, r):
    amp = amplitude_sums(ChainSpec(n, r), 0.0)
    assert amp.c_plus == pytest.approx(1.0, abs=1e-14)
    assert amp.c_minus == 0
    assert correlator(ChainSpec(n, r), 0.0) == (0.0, -math.inf)


@pytest.mark.parametrize("n, r, tau", [(6, 2, 0.4), (9, 3, 1.1), (10, 4, 0.25)])
def test_amplitudes_match_direct_sum(brute, n, r, tau):
    amp = amplitude_sums(ChainSpec(n, r), tau)
    cp, cm = brute(n, r, tau)
    assert amp.c_plus == pytest.approx(cp, abs=1e-12)
    assert amp.c_minus == pytest.approx(cm, abs=1e-12)


def test_sixteen_spins_against_oracle():
    spec = ChainSpec(16, 3)
    e, _ = correlator(spec, 0.3, backend="transfer")
    assert e == pytest.approx(correlator_bruteforce(spec, 0.3), abs=1e-10)


def test_six_spins_against_oracle():
    spec = ChainSpec(6, 2)
    assert correlator(spec, 0.4)[0] == pytest.approx(correlator_bruteforce(spec, 0.4), abs=1e-12)


@pytest.mark.parametrize("n", [64, 300])
def test_all_to_all_ghz_point(n):
    e, q = correlator(ChainSpec(n, n - 1), math.pi / 4)
    assert e == pytest.approx(0.25, abs=1e-10)
    assert q == pytest.approx(n - 2, abs=1e-8)


def test_all_to_all_odd_chain_vanishes():
    for tau in np.linspace(0, math.pi, 9):
        assert correlator_all_to_all(3, tau) <= 1e-14


def test_all_to_all_fast_path_matches_transfer():
    spec = ChainSpec(10, 9)
    fast = q_values(spec, [0.2], backend="closed-form")[0]
    slow = q_values(spec, [0.2], backend="transfer")[0]
    assert fast == pytest.approx(slow, abs=1e-9)


def test_r1_closed_form_examples():
    assert correlator_r1(2, math.pi / 4) == pytest.approx(0.25, abs=1e-15)
    assert correlator_r1(4, math.pi / 6) == pytest.approx(81 / 4096, rel=1e-13)
    assert correlator_r1(8, 0.0) == 0.0
    assert correlator_r1(5, 0.7) == 0.0


@pytest.mark.parametrize("n", range(2, 41, 2))
def test_r1_transfer_matches_closed_form(n):
    taus = np.linspace(0.0, math.pi / 2, 31)
    e_transfer = np.exp2(q_values(ChainSpec(n, 1), taus, backend="transfer") - n)
    e_closed = np.array([correlator_r1(n, t) for t in taus])
    assert np.max(np.abs(e_transfer - e_closed)) <= 1e-12


@pytest.mark.parametrize("n", range(2, 13, 2))
def test_backend_equivalence(n):
    for r in range(1, n):
        spec = ChainSpec(n, r)
        e_oracle = np.exp2(q_values(spec, TAUS25, backend="oracle") - n)
        for backend in ("auto", "transfer"):
            e = np.exp2(q_values(spec, TAUS25, backend=backend) - n)
            assert np.max(np.abs(e - e_oracle)) <= 1e-10, (r, backend)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_odd_parity_nullity(n):
    taus = np.linspace(0.0, math.pi / 2, 50)
    for r in range(1, n):
        e = np.exp2(q_values(ChainSpec(n, r), taus, backend="transfer") - n)
        assert np.all(e <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 14).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))),
    st.floats(0.0, math.pi, allow_nan=False),
)
def test_period_pi_and_ghz_bound(nr, tau):
    n, r = nr
    spec = ChainSpec(n, r)
    e0 = correlator(spec, tau, backend="transfer")[0]
    e1 = correlator(spec, tau + math.pi, backend="transfer")[0]
    assert e1 == pytest.approx(e0, abs=1e-12)
    assert e0 <= 0.25 + 1e-12


def test_large_chain_stays_finite():
    q = q_values(ChainSpec(300, 5), np.linspace(0.01, 1.5, 40))
    assert np.all(np.isfinite(q))
    assert np.all(q <= 298 + 1e-9)


def test_periodic_chain_needs_oracle():
    spec = ChainSpec(8, 2, Boundary.PERIODIC)
    with pytest.raises(ValueError):
        correlator(spec, 0.3)
    assert correlator(spec, 0.3, backend="oracle")[0] > 0


def test_closed_form_backend_refuses_generic_range():
    with pytest.raises(ValueError):
        q_values(ChainSpec(10, 3), [0.1], backend="closed-form")


def test_unknown_backend():
    with pytest.raises(ValueError):
        q_values(ChainSpec(4, 1), [0.1], backend="gpu")


def test_series_parallel_matches_serial():
    spec, grid = ChainSpec(20, 3), TimeGrid(0.0, 1.0, 41)
    a = correlator_series(spec, grid)
    b = correlator_series(spec, grid, workers=3)
    assert np.array_equal(a.q_values, b.q_values)
    assert np.all(a.e_values <= 0.25)


def test_series_csv_format():
    series = correlator_series(ChainSpec(2, 1), TimeGrid(0.0, math.pi / 4, 2))
    buf = io.StringIO()
    write_series_csv([series], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "N,r,boundary,tau,e_value,q_value"
    assert lines[1] == "2,1,open,0,0,-inf"
    fields = lines[2].split(",")
    assert float(fields[3]) == math.pi / 4
    assert float(fields[4]) == pytest.approx(0.25, abs=1e-15)
