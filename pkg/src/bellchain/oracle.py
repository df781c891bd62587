"""Brute-force 2^N state-vector reference.

Amplitudes are indexed by z-configurations with site k (0-based) on bit
N-1-k and bit value 0 meaning s = +1, so ``amplitudes.reshape((2,) * N)``
has one axis per site in chain order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain_model import ChainSpec, all_energies

MAX_ORACLE_SPINS = 16
MAX_MQC_SPINS = 12

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _check_cap(n: int, cap: int | None) -> None:
    cap = MAX_ORACLE_SPINS if cap is None else cap
    if n > cap:
        raise ValueError(f"state-vector oracle limited to N <= {cap}, got {n}")


@dataclass(frozen=True)
class StateVector:
    n_spins: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.n_spins:
            raise ValueError("amplitude count does not match 2^n_spins")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_bytes(self) -> bytes:
        """Little-endian (re, im) float64 pairs in index order."""
        return self.amplitudes.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, n_spins: int, data: bytes) -> "StateVector":
        return cls(n_spins, np.frombuffer(data, dtype="<c16").astype(complex))


def evolve(spec: ChainSpec, tau: float, cap: int | None = None) -> StateVector:
    """Evolve the x-polarized product state for time tau (open or periodic)."""
    n = spec.n_spins
    _check_cap(n, cap)
    energies = all_energies(spec)
    return StateVector(n, np.exp(-1j * tau * energies) / 2.0 ** (n / 2))


def ghz_state(n_spins: int, cap: int | None = None) -> StateVector:
    """(|+x>^N + |-x>^N)/sqrt(2) in the z basis."""
    _check_cap(n_spins, cap)
    idx = np.arange(2**n_spins)
    parity = np.array([bin(i).count("1") % 2 for i in idx])
    # <s|+x^N> = 2^-N/2, <s|-x^N> = 2^-N/2 prod(s)
    amps = (1.0 + (1 - 2 * parity)) / 2.0 ** (n_spins / 2) / np.sqrt(2.0)
    return StateVector(n_spins, amps)


def x_basis_amplitudes(state: StateVector) -> np.ndarray:
    """Amplitudes in the x eigenbasis (bit 0 = +1_x) via a Walsh-Hadamard sweep."""
    n = state.n_spins
    psi = state.amplitudes.reshape((2,) * n)
    for axis in range(n):
        psi = np.moveaxis(np.tensordot(_HADAMARD, psi, axes=([1], [axis])), 0, axis)
    return psi.reshape(-1)


def extremal_overlaps(state: StateVector) -> tuple[complex, complex]:
    """(<+x^N|psi>, <-x^N|psi>)."""
    n = state.n_spins
    amps = state.amplitudes
    idx = np.arange(amps.size)
    parity = np.array([bin(i).count("1") & 1 for i in idx])
    sign = 1 - 2 * parity
    scale = 2.0 ** (-n / 2)
    return complex(amps.sum() * scale), complex((sign * amps).sum() * scale)


def correlator_of_state(state: StateVector) -> float:
    cp, cm = extremal_overlaps(state)
    return abs(cp) ** 2 * abs(cm) ** 2


def correlator_bruteforce(spec: ChainSpec, tau: float, cap: int | None = None) -> float:
    return correlator_of_state(evolve(spec, tau, cap))


@dataclass(frozen=True)
class MqcSpectrum:
    """MQC intensities keyed by the eigenvalue difference m of (1/2) sum sigma_x."""

    intensities: dict[int, float]

    def __getitem__(self, m: int) -> float:
        return self.intensities.get(m, 0.0)

    @property
    def total(self) -> float:
        return float(sum(self.intensities.values()))


def _x_eigenvalues(n: int) -> np.ndarray:
    # bit value 1 is a -1_x spin; A = (1/2) sum sigma_x has eigenvalue n/2 - popcount
    pop = np.array([bin(i).count("1") for i in range(2**n)])
    return n / 2 - pop


def mqc_spectrum(state, cap: int | None = None) -> MqcSpectrum:
    """Multiple-quantum intensities I_m = Tr[rho_m^dagger rho_m].

    ``state`` is a StateVector or a dense 2^N x 2^N density matrix in the z
    basis. The all-up/all-down coherence sits at m = N.
    """
    if isinstance(state, StateVector):
        n = state.n_spins
        _check_cap(n, MAX_MQC_SPINS if cap is None else cap)
        # pure state: |rho_ij|^2 = p_i p_j, so I_m correlates the x-magnetization histogram with itself
        p = np.abs(x_basis_amplitudes(state)) ** 2
        # weight per eigenvalue, indexed by the number of -1_x spins j (eigenvalue n/2 - j)
        hist = np.bincount((n / 2 - _x_eigenvalues(n)).astype(int), weights=p, minlength=n + 1)
        intensities = {}
        for m in range(-n, n + 1):
            lo, hi = max(0, -m), min(n, n - m)
            intensities[m] = float(np.dot(hist[lo + m : hi + m + 1], hist[lo : hi + 1])) if lo <= hi else 0.0
        return MqcSpectrum(intensities)
    rho = np.asarray(state, dtype=complex)
    dim = rho.shape[0]
    n = int(round(np.log2(dim)))
    if rho.shape != (dim, dim) or 2**n != dim:
        raise ValueError("density matrix must be square with dimension 2^N")
    _check_cap(n, MAX_MQC_SPINS if cap is None else cap)
    h = np.ones((1, 1))
    for _ in range(n):
        h = np.kron(h, _HADAMARD)
    rho_x = h @ rho @ h.conj().T
    lam = _x_eigenvalues(n)
    diff = (lam[:, None] - lam[None, :]).astype(int)
    weights = np.abs(rho_x) ** 2
    return MqcSpectrum({m: float(weights[diff == m].sum()) for m in range(-n, n + 1)})
