"""Dense Hermitian-operator algebra.

Operators are plain complex ``numpy`` arrays. The helpers here validate them,
diagonalise them and apply scalar functions through the spectral form.
"""

from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from ._config import DEFAULT
from .errors import BranchCutError, DimensionError, NotHermitianError


class Spectrum(NamedTuple):
    """Ascending eigenvalues and the unitary whose columns are eigenvectors."""

    values: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.values) @ self.basis.conj().T


def as_square(A, name="operator") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} has non-finite entries")
    return A


def hermiticity_error(A) -> float:
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def as_hermitian(A, tol=None, name="operator") -> np.ndarray:
    """Validate ``A`` as Hermitian and return its exactly symmetrised copy."""
    A = as_square(A, name)
    tol = DEFAULT.herm_tol if tol is None else tol
    dev = hermiticity_error(A)
    scale = max(1.0, float(np.max(np.abs(A))))
    if dev > tol * scale:
        raise NotHermitianError(f"{name} is not Hermitian: max |A - A^dag| = {dev:.3e}")
    return 0.5 * (A + A.conj().T)


def hermitian_eig(A, tol=None) -> Spectrum:
    A = as_hermitian(A, tol)
    values, basis = np.linalg.eigh(A)
    return Spectrum(values, basis)


def apply_function(A, f: Callable[[np.ndarray], np.ndarray], zero_convention=False,
                   support_tol=None) -> np.ndarray:
    """Return ``U f(diag) U^dag`` for Hermitian ``A``.

    With ``zero_convention`` eigenvalues at or below ``support_tol`` contribute
    nothing (the ``0 ln 0 = 0`` rule); ``f`` is only evaluated on the rest.
    """
    values, basis = hermitian_eig(A)
    support_tol = DEFAULT.support_tol if support_tol is None else support_tol
    fvals = np.zeros_like(values, dtype=complex)
    mask = values > support_tol if zero_convention else np.ones(values.shape, bool)
    with np.errstate(all="ignore"):
        fvals[mask] = f(values[mask])
    if not np.all(np.isfinite(fvals)):
        bad = values[~np.isfinite(fvals)]
        raise ValueError(f"function undefined at eigenvalue(s) {bad}")
    out = (basis * fvals) @ basis.conj().T
    if np.all(np.abs(fvals.imag) == 0):
        out = 0.5 * (out + out.conj().T)
    return out


def logm_psd(A, support_tol=None) -> np.ndarray:
    """Matrix log on the support of a positive semidefinite operator."""
    return apply_function(A, np.log, zero_convention=True, support_tol=support_tol)


def expm_hermitian(H, t=1.0, hbar=1.0) -> np.ndarray:
    """``exp(-i H t / hbar)`` computed spectrally, unitary to machine precision."""
    values, basis = hermitian_eig(H)
    phases = np.exp(-1j * values * (t / hbar))
    return (basis * phases) @ basis.conj().T


def unitarity_error(U) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def unitary_log(V, tol=None, cut_tol=1e-8) -> np.ndarray:
    """Principal logarithm of a unitary, eigenphases in (-pi, pi].

    Returns an anti-Hermitian matrix ``L`` with ``expm(L) == V``. Eigenphases
    within ``cut_tol`` of the branch cut are rejected: the caller has to choose
    a phase (see :func:`qthermo.passivity.extraction_schedule`).
    """
    V = as_square(V, "unitary")
    tol = DEFAULT.unitary_tol if tol is None else tol
    err = unitarity_error(V)
    if err > tol:
        raise ValueError(f"matrix is not unitary: max |V^dag V - I| = {err:.3e}")
    T, Z = scipy.linalg.schur(V, output="complex")
    phases = np.angle(np.diag(T))
    near_cut = np.abs(np.abs(phases) - np.pi) < cut_tol
    if np.any(near_cut):
        raise BranchCutError(
            f"eigenphase(s) {phases[near_cut]} lie within {cut_tol:g} of the branch cut at -pi"
        )
    L = (Z * (1j * phases)) @ Z.conj().T
    return 0.5 * (L - L.conj().T)


def tensor(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def kron_sum(A, B) -> np.ndarray:
    """``A (x) I + I (x) B``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    return np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)


def embed(op, dims: Sequence[int], index: int) -> np.ndarray:
    """Place ``op`` on factor ``index`` of a tensor product, identity elsewhere."""
    factors = [np.eye(d) for d in dims]
    factors[index] = op
    return tensor(*factors)


def partial_trace(M, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    ``keep`` is a factor index or a sequence of them, ordered as in ``dims``.
    """
    M = as_square(M)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != M.shape[0]:
        raise DimensionError(f"factor dims {dims} do not match operator dimension {M.shape[0]}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep index out of range for {n} factors")
    keep = sorted(set(keep))
    T = M.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract each traced factor's row axis with its column axis
    for removed, i in enumerate(traced):
        cur = i - removed
        ncur = T.ndim // 2
        T = np.trace(T, axis1=cur, axis2=cur + ncur)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return T.reshape(dk, dk)


def commutator(A, B) -> np.ndarray:
    return A @ B - B @ A


def trace_distance(rho, sigma) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    vals = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return 0.5 * float(np.sum(np.abs(vals)))


def expectation(A, rho) -> float:
    return float(np.real(np.trace(np.asarray(A) @ np.asarray(rho))))
