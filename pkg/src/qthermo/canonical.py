"""Canonical distributions ``exp(-beta H)/Z`` and the beta <-> mean-energy map."""

from dataclasses import dataclass

import numpy as np

from .errors import QThermoError
from .linalg import hermitian_eig

OVERFLOW_LIMIT = 700.0


def _check_beta(beta, spread):
    if not (np.isfinite(beta) and beta > 0):
        raise QThermoError(f"beta must be positive and finite, got {beta}")
    if beta * spread > OVERFLOW_LIMIT:
        raise QThermoError(
            f"beta * spectral spread = {beta * spread:.1f} exceeds {OVERFLOW_LIMIT:g}; "
            "Boltzmann weights would underflow"
        )


def boltzmann_weights(energies, beta) -> np.ndarray:
    """Normalised weights ``exp(-beta E_n)/Z``, shifted by the ground energy."""
    energies = np.asarray(energies, dtype=float)
    _check_beta(beta, float(energies.max() - energies.min()))
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def log_partition_function(H, beta) -> float:
    energies = hermitian_eig(H).values
    e0 = energies[0]
    _check_beta(beta, float(energies[-1] - e0))
    return float(-beta * e0 + np.log(np.sum(np.exp(-beta * (energies - e0)))))


def partition_function(H, beta) -> float:
    return float(np.exp(log_partition_function(H, beta)))


def canonical_state(H, beta) -> np.ndarray:
    values, basis = hermitian_eig(H)
    p = boltzmann_weights(values, beta)
    rho = (basis * p) @ basis.conj().T
    return 0.5 * (rho + rho.conj().T)


def mean_energy(H, beta) -> float:
    values = hermitian_eig(H).values
    return float(np.dot(boltzmann_weights(values, beta), values))


@dataclass(frozen=True)
class CanonicalSpec:
    H: np.ndarray
    beta: float
    Z: float

    @classmethod
    def build(cls, H, beta):
        return cls(np.asarray(H, dtype=complex), float(beta), partition_function(H, beta))

    def state(self) -> np.ndarray:
        return canonical_state(self.H, self.beta)


def beta_for_energy(H, E, rtol=1e-10, max_iter=500) -> float:
    """Solve ``<H>_beta = E`` for ``beta > 0`` by bisection.

    ``E`` must lie strictly between the ground energy and ``Tr H / d``.
    """
    values = hermitian_eig(H).values
    e0, emean = float(values[0]), float(values.mean())
    if not (e0 < E < emean):
        raise QThermoError(
            f"mean energy {E!r} outside the attainable open interval ({e0!r}, {emean!r})"
        )

    def energy(b):
        return float(np.dot(boltzmann_weights(values, b), values))

    lo, hi = 1e-12, 1.0
    if energy(lo) < E:
        return lo
    spread = values[-1] - e0
    while energy(hi) > E:
        lo, hi = hi, 2.0 * hi
        if hi * spread > OVERFLOW_LIMIT:
            hi = OVERFLOW_LIMIT / spread
            break
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if energy(mid) > E:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi and abs(energy(0.5 * (lo + hi)) - E) <= 1e-9 * spread:
            break
    return 0.5 * (lo + hi)
