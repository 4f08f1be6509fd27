"""Seeded random operators and states for property checks."""

import numpy as np
from scipy.stats import unitary_group


def rng_from(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def random_hermitian(d, rng=None, scale=1.0) -> np.ndarray:
    rng = rng_from(rng)
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (A + A.conj().T) / np.sqrt(2 * d)


def random_unitary(d, rng=None) -> np.ndarray:
    rng = rng_from(rng)
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_density(d, rng=None, rank=None, mix=0.0) -> np.ndarray:
    """Hilbert-Schmidt random state of the given rank, optionally mixed with ``I/d``."""
    rng = rng_from(rng)
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    rho = (1 - mix) * rho + mix * np.eye(d) / d
    return 0.5 * (rho + rho.conj().T)


def random_pure(d, rng=None) -> np.ndarray:
    return random_density(d, rng, rank=1)
