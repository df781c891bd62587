"""Chain geometry, rectangular couplings and the classical Ising energy.

Every coupled pair {k, l} contributes ``s_k * s_l`` exactly once to the
energy. With unit coupling amplitude the dimensionless time ``tau`` then
produces the GHZ state at ``tau = pi/4`` in the all-to-all limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class ChainSpec:
    """A chain of ``n_spins`` spin-1/2 with range-``range`` rectangular couplings.

    ``range`` values at or above ``n_spins - 1`` are clamped to the
    all-to-all case ``n_spins - 1``.
    """

    n_spins: int
    range: int
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        n, r = int(self.n_spins), int(self.range)
        if n < 2:
            raise ValueError(f"n_spins must be >= 2, got {self.n_spins}")
        if r < 1:
            raise ValueError(f"range must be >= 1, got {self.range}")
        object.__setattr__(self, "n_spins", n)
        object.__setattr__(self, "range", min(r, n - 1))
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def all_to_all(self) -> bool:
        return self.range >= self.n_spins - 1

    @property
    def parity_trivial(self) -> bool:
        """Odd chains have an identically vanishing correlator."""
        return self.n_spins % 2 == 1

    def to_config(self) -> dict:
        return {"n_spins": self.n_spins, "range": self.range, "boundary": self.boundary.value}

    @classmethod
    def from_config(cls, block: Mapping) -> "ChainSpec":
        unknown = set(block) - {"n_spins", "range", "boundary"}
        if unknown:
            raise ValueError(f"unknown ChainSpec keys: {sorted(unknown)}")
        return cls(int(block["n_spins"]), int(block["range"]), Boundary(block.get("boundary", "open")))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [start, stop], both endpoints included."""

    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.start < 0:
            raise ValueError("grid start must be >= 0")
        if not self.stop > self.start:
            raise ValueError("grid stop must exceed start")
        if int(self.steps) < 2:
            raise ValueError("grid needs at least 2 points")
        object.__setattr__(self, "steps", int(self.steps))

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.steps - 1)


def _distance(spec: ChainSpec, k: int, l: int) -> int:
    d = abs(k - l)
    if spec.boundary is Boundary.PERIODIC:
        d = min(d, spec.n_spins - d)
    return d


def coupling(spec: ChainSpec, k: int, l: int) -> int:
    """Rectangular coupling J_kl for 1-based site indices."""
    n = spec.n_spins
    if not (1 <= k <= n and 1 <= l <= n):
        raise IndexError(f"site indices must lie in 1..{n}, got ({k}, {l})")
    d = _distance(spec, k, l)
    return 1 if 0 < d <= spec.range else 0


def coupled_pairs(spec: ChainSpec) -> Iterator[tuple[int, int]]:
    """Yield each coupled unordered pair (k, l), k < l, once (1-based)."""
    n = spec.n_spins
    for k in range(1, n + 1):
        for l in range(k + 1, n + 1):
            if coupling(spec, k, l):
                yield k, l


def n_pairs(spec: ChainSpec) -> int:
    """Number of coupled pairs; r(2N - r - 1)/2 for open chains."""
    if spec.boundary is Boundary.OPEN:
        r, n = spec.range, spec.n_spins
        return r * (2 * n - r - 1) // 2
    return sum(1 for _ in coupled_pairs(spec))


def coupling_matrix(spec: ChainSpec) -> np.ndarray:
    """Dense symmetric 0/1 coupling matrix (0-based), zero diagonal."""
    n = spec.n_spins
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    if spec.boundary is Boundary.PERIODIC:
        d = np.minimum(d, n - d)
    return ((d > 0) & (d <= spec.range)).astype(np.int64)


def classical_energy(spec: ChainSpec, config: Sequence[int]) -> int:
    """H_s = sum over coupled pairs of s_k s_l, each pair counted once."""
    s = np.asarray(config, dtype=np.int64)
    if s.shape != (spec.n_spins,):
        raise ValueError(f"config must have length {spec.n_spins}, got shape {s.shape}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spin values must be +1 or -1")
    return int(s @ coupling_matrix(spec) @ s) // 2


def all_energies(spec: ChainSpec) -> np.ndarray:
    """Energies of all 2^N z-configurations.

    Index bit (N-1-k) encodes site k (0-based), bit value 0 meaning s = +1,
    so the array lines up with ``reshape((2,) * N)`` tensor axes.
    """
    n = spec.n_spins
    idx = np.arange(2**n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    s = 1 - 2 * bits
    return ((s @ coupling_matrix(spec)) * s).sum(axis=1) // 2
