"""Numerical tolerances and unit constants shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    herm_tol: float = 1e-10
    psd_tol: float = 1e-10
    trace_tol: float = 1e-10
    support_tol: float = 1e-12
    unitary_tol: float = 1e-8
    k: float = 1.0
    hbar: float = 1.0


DEFAULT = Settings()
