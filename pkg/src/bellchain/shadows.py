"""Classical-shadow estimation of the all-up/all-down x coherence.

Each snapshot measures every qubit in an independently drawn Pauli basis
(X, Y or Z) and records one outcome bitstring sampled from the exact Born
distribution. The single-qubit inverted shadow is ``3 U^dag|b><b|U - 1``
and the target operator is ``|-x><+x|`` on every qubit, so the estimate of
``<+x^N| rho |-x^N>`` is a product of per-qubit factors

    tr[|-x><+x| (3|b><b| - 1)] = 3 <+x|b><b|-x>

    X basis:  0 for both outcomes (|+x>, |-x> are orthogonal to one side)
    Y basis:  +3i/2 for |+i>,  -3i/2 for |-i>
    Z basis:  +3/2  for |0>,   -3/2  for |1>

Only snapshots without any X basis contribute, each with modulus (3/2)^N,
so the second moment of the per-snapshot estimator is exactly (3/2)^N.

Randomness is drawn from Philox streams keyed by (seed, reconstruction,
block of ``BLOCK`` snapshots), so any block can be regenerated on its own.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

from .exact_engine import fmt_real
from .oracle import StateVector

MAX_SHADOW_SPINS = 10
BLOCK = 4096
BASIS_LABELS = "XYZ"

_S_DAG = np.diag([1.0, -1j])
_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
# rotation applied before a computational-basis readout, indexed X, Y, Z
_ROTATIONS = np.stack([_H, _H @ _S_DAG, np.eye(2)]).astype(complex)
# per-qubit estimator factor, indexed [basis, bit]
_FACTORS = np.array([[0.0, 0.0], [1.5j, -1.5j], [1.5, -1.5]])


@dataclass(frozen=True)
class ShadowSnapshot:
    bases: str
    outcomes: tuple[int, ...]

    def to_record(self) -> str:
        return f"{self.bases},{''.join(map(str, self.outcomes))}"

    @classmethod
    def from_record(cls, line: str) -> "ShadowSnapshot":
        bases, bits = line.strip().split(",")
        if len(bases) != len(bits) or set(bases) - set(BASIS_LABELS) or set(bits) - {"0", "1"}:
            raise ValueError(f"malformed snapshot record {line!r}")
        return cls(bases, tuple(int(b) for b in bits))


@dataclass(frozen=True)
class ShadowBatch:
    """Snapshots as arrays: bases in {0: X, 1: Y, 2: Z}, outcome bits in {0, 1}."""

    bases: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        if self.bases.shape != self.outcomes.shape or self.bases.ndim != 2:
            raise ValueError("bases and outcomes must be equal-shape (M, N) arrays")

    @property
    def n_spins(self) -> int:
        return self.bases.shape[1]

    def __len__(self) -> int:
        return self.bases.shape[0]

    def __iter__(self) -> Iterator[ShadowSnapshot]:
        for b, o in zip(self.bases, self.outcomes):
            yield ShadowSnapshot("".join(BASIS_LABELS[i] for i in b), tuple(int(x) for x in o))

    def write_records(self, fh: IO[str]) -> None:
        for snap in self:
            fh.write(snap.to_record() + "\n")

    @classmethod
    def read_records(cls, fh: IO[str]) -> "ShadowBatch":
        snaps = [ShadowSnapshot.from_record(line) for line in fh if line.strip()]
        bases = np.array([[BASIS_LABELS.index(c) for c in s.bases] for s in snaps], dtype=np.uint8)
        outcomes = np.array([s.outcomes for s in snaps], dtype=np.uint8)
        return cls(bases, outcomes)


class _BornTable:
    """Cumulative outcome distributions per basis pattern, cached by pattern code."""

    def __init__(self, state: StateVector):
        self.n = state.n_spins
        self.psi = state.amplitudes
        self.cache: dict[int, np.ndarray] = {}

    def _compute(self, codes: np.ndarray) -> np.ndarray:
        n = self.n
        digits = (codes[:, None] // 3 ** np.arange(n - 1, -1, -1)) % 3
        psi = np.broadcast_to(self.psi.reshape((1,) + (2,) * n), (codes.size,) + (2,) * n)
        for k in range(n):
            gates = _ROTATIONS[digits[:, k]]
            moved = np.moveaxis(psi, k + 1, -1)
            shape = moved.shape
            moved = np.einsum("pab,pxb->pxa", gates, moved.reshape(codes.size, -1, 2))
            psi = np.moveaxis(moved.reshape(shape), -1, k + 1)
        probs = np.abs(psi.reshape(codes.size, -1)) ** 2
        return np.cumsum(probs, axis=1)

    def cdfs(self, codes: np.ndarray) -> np.ndarray:
        missing = [c for c in np.unique(codes).tolist() if c not in self.cache]
        if missing:
            for c, row in zip(missing, self._compute(np.array(missing))):
                self.cache[c] = row
        return np.stack([self.cache[c] for c in codes.tolist()])


def _block_rng(seed: int, reconstruction: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, reconstruction, block])))


def _blocks(table: _BornTable, m: int, seed: int, reconstruction: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    n = table.n
    weights = 3 ** np.arange(n - 1, -1, -1)
    for block, start in enumerate(range(0, m, BLOCK)):
        size = min(BLOCK, m - start)
        rng = _block_rng(seed, reconstruction, block)
        bases = rng.integers(0, 3, size=(size, n), dtype=np.uint8)
        u = rng.random(size)
        cdf = table.cdfs(bases.astype(np.int64) @ weights)
        index = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=1), 2**n - 1)
        outcomes = ((index[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
        yield bases, outcomes


def _check(state: StateVector, m: int) -> None:
    if state.n_spins > MAX_SHADOW_SPINS:
        raise ValueError(f"shadow sampling limited to N <= {MAX_SHADOW_SPINS}")
    if m < 1:
        raise ValueError("need at least one snapshot")


def sample_snapshots(state: StateVector, m: int, seed: int, reconstruction: int = 0) -> ShadowBatch:
    """Draw m random-Pauli snapshots of ``state``; deterministic given the keys."""
    _check(state, m)
    parts = list(_blocks(_BornTable(state), m, seed, reconstruction))
    return ShadowBatch(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def snapshot_estimates(bases: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """Per-snapshot estimates of <+x^N| rho |-x^N>."""
    return np.prod(_FACTORS[bases, outcomes], axis=1)


def estimate_coherence(snapshots) -> complex:
    """Mean single-snapshot estimate over a ShadowBatch or an iterable of ShadowSnapshot."""
    if not isinstance(snapshots, ShadowBatch):
        snaps = list(snapshots)
        if not snaps:
            raise ValueError("no snapshots to estimate from")
        snapshots = ShadowBatch(
            np.array([[BASIS_LABELS.index(c) for c in s.bases] for s in snaps], dtype=np.uint8),
            np.array([s.outcomes for s in snaps], dtype=np.uint8),
        )
    if len(snapshots) == 0:
        raise ValueError("no snapshots to estimate from")
    return complex(snapshot_estimates(snapshots.bases, snapshots.outcomes).mean())


@dataclass(frozen=True)
class ReconstructionResult:
    n_spins: int
    n_snapshots: int
    n_reconstructions: int
    q_mean: float
    q_std: float
    e_mean: float
    q_values: tuple[float, ...]
    e_values: tuple[float, ...]
    unbiased: bool = False


def _correlator_estimate(total: complex, total_sq: float, m: int, unbiased: bool) -> float:
    if unbiased:
        # mean over ordered pairs i != j of o_i conj(o_j)
        if m < 2:
            return math.nan
        return (abs(total) ** 2 - total_sq) / (m * (m - 1))
    return abs(total / m) ** 2


def reconstruct(
    state: StateVector, m: int, n_reconstructions: int = 10, seed: int = 0, unbiased: bool = False
) -> ReconstructionResult:
    """Repeat the shadow estimate of E_N over independent snapshot sets.

    The default squares the mean coherence estimate, which is biased upward
    by about (3/2)^N / M; ``unbiased=True`` drops the diagonal terms instead
    and can return E* <= 0 (Q* then becomes -inf or nan).
    """
    _check(state, m)
    if n_reconstructions < 1:
        raise ValueError("need at least one reconstruction")
    table = _BornTable(state)
    n = state.n_spins
    e_vals, q_vals = [], []
    for rec in range(n_reconstructions):
        total = 0j
        total_sq = 0.0
        for bases, outcomes in _blocks(table, m, seed, rec):
            o = snapshot_estimates(bases, outcomes)
            total += o.sum()
            total_sq += float(np.sum(np.abs(o) ** 2))
        e = _correlator_estimate(total, total_sq, m, unbiased)
        e_vals.append(e)
        if e > 0:
            q_vals.append(n + math.log2(e))
        else:
            q_vals.append(-math.inf if e == 0 else math.nan)
    q_arr = np.array(q_vals)
    q_std = float(q_arr.std(ddof=1)) if n_reconstructions > 1 and np.all(np.isfinite(q_arr)) else math.nan
    if n_reconstructions == 1:
        q_std = 0.0
    return ReconstructionResult(
        n,
        m,
        n_reconstructions,
        float(q_arr.mean()),
        q_std,
        float(np.mean(e_vals)),
        tuple(q_vals),
        tuple(e_vals),
        unbiased,
    )


SHADOW_COLUMNS = ["N", "r", "tau", "M", "n_rec", "q_exact", "q_mean", "q_std"]


def write_shadow_csv(rows, fh: IO[str]) -> None:
    """Rows are (n, r, tau, q_exact, ReconstructionResult)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SHADOW_COLUMNS)
    for n, r, tau, q_exact, res in rows:
        writer.writerow(
            [n, r, fmt_real(tau), res.n_snapshots, res.n_reconstructions, fmt_real(q_exact), fmt_real(res.q_mean), fmt_real(res.q_std)]
        )
