"""Density matrices, marginals and the Gibbs-von Neumann measure ``G = Tr rho ln rho``."""

from typing import Sequence

import numpy as np

from ._config import DEFAULT
from .errors import DimensionError, InvalidStateError
from .linalg import as_hermitian, hermitian_eig, partial_trace, tensor


def density_matrix(rho, psd_tol=None, trace_tol=None) -> np.ndarray:
    """Validate ``rho`` as a distribution and return a repaired copy.

    Eigenvalues in ``[-psd_tol, 0)`` are clipped to zero and the result is
    renormalised; anything more negative, or a trace off by more than
    ``trace_tol``, is rejected.
    """
    psd_tol = DEFAULT.psd_tol if psd_tol is None else psd_tol
    trace_tol = DEFAULT.trace_tol if trace_tol is None else trace_tol
    rho = as_hermitian(rho, name="density matrix")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"density matrix trace is {tr!r}, expected 1")
    values, basis = np.linalg.eigh(rho)
    if values[0] < -psd_tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {values[0]:.3e}")
    if values[0] < 0:
        values = np.clip(values, 0.0, None)
        values = values / values.sum()
        rho = (basis * values) @ basis.conj().T
        rho = 0.5 * (rho + rho.conj().T)
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def from_spectrum(probs, basis=None) -> np.ndarray:
    """Build ``sum_n p_n |b_n><b_n|`` from probabilities and basis columns."""
    probs = np.asarray(probs, dtype=float)
    if basis is None:
        return np.diag(probs).astype(complex)
    basis = np.asarray(basis, dtype=complex)
    return density_matrix((basis * probs) @ basis.conj().T)


def _plogp(values, support_tol):
    values = np.asarray(values, dtype=float)
    mask = values > support_tol
    return float(np.sum(values[mask] * np.log(values[mask])))


def gibbs_measure(rho, support_tol=None) -> float:
    """``Tr rho ln rho`` with ``0 ln 0 = 0``; lies in ``[ln(1/d), 0]``."""
    support_tol = DEFAULT.support_tol if support_tol is None else support_tol
    values = np.linalg.eigvalsh(density_matrix(rho))
    return min(0.0, _plogp(values, support_tol))


def entropy(rho, k=None) -> float:
    k = DEFAULT.k if k is None else k
    return -k * gibbs_measure(rho)


def relative_measure(rho, sigma, support_tol=None) -> float:
    """``Tr rho (ln rho - ln sigma)``; ``inf`` when supp(rho) is not inside supp(sigma)."""
    support_tol = DEFAULT.support_tol if support_tol is None else support_tol
    rho = density_matrix(rho)
    sigma = density_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError("states differ in dimension")
    r_vals, r_vecs = np.linalg.eigh(rho)
    s_vals, s_vecs = np.linalg.eigh(sigma)
    # overlap[i, j] = |<r_i|s_j>|^2
    overlap = np.abs(r_vecs.conj().T @ s_vecs) ** 2
    r_supp = r_vals > support_tol
    s_null = s_vals <= support_tol
    leak = overlap[np.ix_(r_supp, s_null)] @ np.ones(int(s_null.sum())) if s_null.any() else 0.0
    if np.any(np.asarray(leak) * r_vals[r_supp] > support_tol):
        return float("inf")
    log_s = np.where(s_null, 0.0, np.log(np.where(s_null, 1.0, s_vals)))
    cross = float(np.sum(r_vals[r_supp] * (overlap[r_supp] @ log_s)))
    return _plogp(r_vals, support_tol) - cross


def marginal(rho, dims: Sequence[int], keep) -> np.ndarray:
    rho = density_matrix(rho)
    return density_matrix(partial_trace(rho, dims, keep))


def correlation(rho, dims: Sequence[int]) -> float:
    """``G(rho) - G(rho_1) - G(rho_2)`` for a bipartite state; zero iff product."""
    if len(dims) != 2:
        raise DimensionError("correlation needs exactly two factors")
    rho = density_matrix(rho)
    return gibbs_measure(rho) - gibbs_measure(marginal(rho, dims, 0)) \
        - gibbs_measure(marginal(rho, dims, 1))


def validate_projectors(projectors, tol=1e-9) -> list:
    """Check orthogonality, idempotence and completeness of a projector set."""
    if len(projectors) == 0:
        raise ValueError("projector set is empty")
    Ks = [as_hermitian(K, tol=tol, name=f"projector {i}") for i, K in enumerate(projectors)]
    d = Ks[0].shape[0]
    if any(K.shape != (d, d) for K in Ks):
        raise DimensionError("projectors differ in dimension")
    for i, Ki in enumerate(Ks):
        for j, Kj in enumerate(Ks):
            target = Ki if i == j else np.zeros_like(Ki)
            if np.max(np.abs(Ki @ Kj - target)) > tol:
                kind = "idempotent" if i == j else "orthogonal"
                raise ValueError(f"projectors {i},{j} are not {kind}")
    if np.max(np.abs(sum(Ks) - np.eye(d))) > tol:
        raise ValueError("projectors do not sum to the identity")
    return Ks


def span_projector(vectors, dim=None) -> np.ndarray:
    """Orthogonal projector onto the span of the given vectors (or basis indices)."""
    vecs = []
    for v in vectors:
        if np.isscalar(v):
            e = np.zeros(dim, dtype=complex)
            e[int(v)] = 1.0
            vecs.append(e)
        else:
            vecs.append(np.asarray(v, dtype=complex))
    Q, _ = np.linalg.qr(np.column_stack(vecs))
    return Q @ Q.conj().T


def block_basis(K, tol=1e-9) -> np.ndarray:
    """Orthonormal columns spanning the range of projector ``K``."""
    values, basis = hermitian_eig(K)
    return basis[:, values > 0.5]


def decompose(rho, projectors, weight_tol=1e-14) -> list:
    """Split ``rho`` into normalised portions ``K_i rho K_i / w_i`` with weights ``w_i``.

    Zero-weight blocks are omitted. The portions are returned as full-space
    matrices supported on the range of their projector.
    """
    rho = density_matrix(rho)
    Ks = validate_projectors(projectors)
    if Ks[0].shape != rho.shape:
        raise DimensionError("projectors and state differ in dimension")
    parts = []
    for K in Ks:
        block = K @ rho @ K
        w = float(np.trace(block).real)
        if w > weight_tol:
            parts.append((w, density_matrix(block / w, trace_tol=1e-8)))
    return parts


def dephase(rho, projectors) -> np.ndarray:
    """``sum_i K_i rho K_i``."""
    Ks = validate_projectors(projectors)
    return sum(K @ rho @ K for K in Ks)


def product_state(*states) -> np.ndarray:
    return tensor(*[density_matrix(s) for s in states])
