"""Passive states, ergotropy, N-passivity and same-temperature criteria."""

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._config import DEFAULT
from .errors import BudgetExceededError, DimensionError
from .linalg import (as_hermitian, expm_hermitian, hermitian_eig, kron_sum, tensor,
                     unitary_log)
from .schedule import Schedule, Segment, propagate
from .states import density_matrix


@dataclass(frozen=True)
class PassiveForm:
    """Passive rearrangement of a state.

    ``aligning_unitary`` maps the eigenvectors of ``rho`` (descending
    eigenvalue) onto the energy eigenvectors (ascending energy). Within
    degenerate blocks it depends on the tie-break and is not canonical.
    """

    passive_state: np.ndarray
    aligning_unitary: np.ndarray
    ergotropy: float
    populations: np.ndarray
    energies: np.ndarray


def passive_form(rho, H) -> PassiveForm:
    rho = density_matrix(rho)
    H = as_hermitian(H, name="Hamiltonian")
    if rho.shape != H.shape:
        raise DimensionError(f"state {rho.shape} and Hamiltonian {H.shape} differ")
    lam, lam_vecs = np.linalg.eigh(rho)
    order = np.argsort(-lam, kind="stable")
    lam, lam_vecs = lam[order], lam_vecs[:, order]
    energies, e_vecs = hermitian_eig(H)
    V = e_vecs @ lam_vecs.conj().T
    passive = (e_vecs * lam) @ e_vecs.conj().T
    passive = 0.5 * (passive + passive.conj().T)
    initial = float(np.real(np.trace(H @ rho)))
    return PassiveForm(passive, V, initial - float(np.dot(lam, energies)), lam, energies)


def ergotropy(rho, H) -> float:
    return passive_form(rho, H).ergotropy


def _energy_blocks(energies, tol):
    blocks, current = [], [0]
    for i in range(1, len(energies)):
        if energies[i] - energies[current[-1]] <= tol:
            current.append(i)
        else:
            blocks.append(current)
            current = [i]
    blocks.append(current)
    return blocks


def is_passive(rho, H, tol=1e-9, strict=True) -> bool:
    """Passivity of ``rho`` with respect to ``H``.

    The state must commute with ``H`` and populations may not increase with
    energy. With ``strict`` (the two-sided ordering ``p_m >= p_n <=> E_m <= E_n``
    restricted to equal energies) degenerate levels must also carry equal
    populations; otherwise any populations within a degenerate level are
    accepted, which is exactly the zero-ergotropy condition.
    """
    rho = density_matrix(rho)
    energies, basis = hermitian_eig(H)
    spread = max(1.0, float(energies[-1] - energies[0]))
    blocks = _energy_blocks(energies, tol * spread)
    r = basis.conj().T @ rho @ basis
    probs = []
    for b in blocks:
        mask = np.ones(len(energies), bool)
        mask[b] = False
        if np.max(np.abs(r[np.ix_(b, mask)]), initial=0.0) > tol:
            return False
        p = np.linalg.eigvalsh(r[np.ix_(b, b)])
        if strict and p[-1] - p[0] > tol:
            return False
        probs.append(p)
    lowest_so_far = np.inf
    for p in probs:
        if p[-1] > lowest_so_far + tol:
            return False
        lowest_so_far = min(lowest_so_far, p[0])
    return True


def same_temperature_necessary(rho1, H1, rho2, H2, tol=1e-9) -> bool:
    """Joint passivity of ``rho1 (x) rho2`` under the non-interacting sum Hamiltonian."""
    return is_passive(tensor(density_matrix(rho1), density_matrix(rho2)), kron_sum(H1, H2),
                      tol=tol, strict=True)


# --- cyclic work extraction -------------------------------------------------

def _branch_safe(V):
    """Multiply ``V`` by a global phase that parks the branch cut in the widest spectral gap."""
    T, _ = scipy.linalg.schur(V, output="complex")
    phases = np.sort(np.angle(np.diag(T)))
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2 * np.pi]]))
    i = int(np.argmax(gaps))
    centre = phases[i] + 0.5 * gaps[i]
    return V * np.exp(1j * (np.pi - centre))


def extraction_schedule(rho, H0, tau, mode="piecewise", hbar=None) -> Schedule:
    """Cyclic Hamiltonian driving ``rho`` to its passive state.

    ``piecewise``: ``H0`` for ``tau/3``, then the constant generator
    ``G = i hbar ln(V') / (tau/3)``, then ``H0`` again. ``V'`` folds in the
    free evolution of the two holds so the full propagator is exactly the
    aligning unitary ``V``.

    ``formula``: ``H(t) = H0 cos(2 pi t/tau) - (2 i hbar/tau) sin^2(pi t/tau) ln V``
    sampled as written. Its accuracy is not guaranteed; measure it with
    :func:`extraction_report`.
    """
    hbar = DEFAULT.hbar if hbar is None else hbar
    H0 = as_hermitian(H0, name="H0")
    if not tau > 0:
        raise ValueError("tau must be positive")
    V = passive_form(rho, H0).aligning_unitary
    if mode == "piecewise":
        hold = tau / 3.0
        free = expm_hermitian(H0, hold, hbar)
        core = free.conj().T @ V @ free.conj().T
        G = 1j * hbar * unitary_log(_branch_safe(core)) / hold
        return Schedule((Segment(hold, H0), Segment(hold, G), Segment(hold, H0)))
    if mode == "formula":
        L = unitary_log(_branch_safe(V))

        def H(t):
            return H0 * np.cos(2 * np.pi * t / tau) \
                - (2j * hbar / tau) * np.sin(np.pi * t / tau) ** 2 * L

        return Schedule((Segment(tau, fn=H),))
    raise ValueError(f"unknown extraction mode {mode!r}; expected 'piecewise' or 'formula'")


def cyclic_work(rho, H0, U) -> float:
    """Work extracted when a cycle returning to ``H0`` implements ``U``."""
    rho = density_matrix(rho)
    final = U @ rho @ U.conj().T
    return float(np.real(np.trace(H0 @ rho) - np.trace(H0 @ final)))


def extraction_report(rho, H0, tau, mode="piecewise", steps=1000, hbar=None) -> dict:
    """Propagate an extraction schedule and compare with the ergotropy.

    ``fidelity`` is ``|Tr(V^dag U)|/d`` against the aligning unitary, blind to
    a global phase.
    """
    hbar = DEFAULT.hbar if hbar is None else hbar
    form = passive_form(rho, H0)
    sched = extraction_schedule(rho, H0, tau, mode, hbar)
    U, drift = propagate(sched, steps, hbar, return_drift=True)
    d = U.shape[0]
    return {
        "mode": mode,
        "steps": steps,
        "work": cyclic_work(rho, H0, U),
        "ergotropy": form.ergotropy,
        "fidelity": float(abs(np.trace(form.aligning_unitary.conj().T @ U)) / d),
        "unitarity_drift": drift,
    }


# --- N-passivity --------------------------------------------------------------

@dataclass(frozen=True)
class LevelSystem:
    energies: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.energies, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if E.ndim != 1 or E.shape != p.shape or E.size == 0:
            raise DimensionError("energies and probs must be 1-d arrays of equal length")
        if np.any(np.diff(E) < 0):
            raise ValueError("energies must be ascending")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probs must be non-negative and sum to 1 (sum={p.sum()!r})")
        object.__setattr__(self, "energies", E)
        object.__setattr__(self, "probs", p)

    @classmethod
    def canonical(cls, energies, beta):
        from .canonical import boltzmann_weights

        w = boltzmann_weights(energies, beta)
        return cls(energies, w / w.sum())

    @property
    def log_probs(self):
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def __len__(self):
        return len(self.energies)


def compositions(N, d) -> np.ndarray:
    """All ways of writing ``N`` as an ordered sum of ``d`` non-negative integers."""
    rows = []
    for bars in itertools.combinations(range(N + d - 1), d - 1):
        edges = (-1,) + bars + (N + d - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(d)])
    return np.array(rows, dtype=np.int64).reshape(-1, d)


@dataclass(frozen=True)
class NPassivity:
    passive: bool
    N: int
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.passive


def _composition_log_prob(comps, log_p):
    terms = np.where(comps > 0, comps * np.where(np.isfinite(log_p), log_p, 0.0), 0.0)
    total = terms.sum(axis=1)
    dead = (comps > 0) & ~np.isfinite(log_p)
    total[dead.any(axis=1)] = -np.inf
    return total


def is_n_passive(sys: LevelSystem, N: int, max_compositions=2_000_000) -> NPassivity:
    """Check passivity of ``N`` independent copies of ``sys``.

    Two occupation patterns ``a`` and ``b`` (each summing to ``N``) violate
    the condition when ``a`` has strictly lower energy and strictly lower
    probability, or equal energy and unequal probability. The returned
    witness is ``(a, b)`` with ``a`` the lower-energy pattern.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    d = len(sys)
    count = math.comb(N + d - 1, d - 1)
    if count > max_compositions:
        raise BudgetExceededError(
            f"{count} occupation patterns for N={N}, d={d} exceed budget {max_compositions}"
        )
    comps = compositions(N, d)
    energy = comps @ sys.energies
    logp = _composition_log_prob(comps, sys.log_probs)
    finite = sys.log_probs[np.isfinite(sys.log_probs)]
    tol_e = 1e-12 * N * max(1.0, float(np.max(np.abs(sys.energies))))
    tol_p = 1e-12 * N * max(1.0, float(np.max(np.abs(finite))) if finite.size else 1.0)

    order = np.argsort(energy, kind="stable")
    energy, logp, comps = energy[order], logp[order], comps[order]

    groups, start = [], 0
    for i in range(1, len(energy) + 1):
        if i == len(energy) or energy[i] - energy[i - 1] > tol_e:
            groups.append((start, i))
            start = i

    def witness(a, b):
        return NPassivity(False, N, (tuple(int(x) for x in comps[a]),
                                     tuple(int(x) for x in comps[b])))

    for lo, hi in groups:
        seg = logp[lo:hi]
        if hi - lo > 1 and np.isfinite(seg).any():
            i_max, i_min = int(np.argmax(seg)), int(np.argmin(seg))
            if seg[i_max] - seg[i_min] > tol_p:
                return witness(lo + i_min, lo + i_max)

    best, best_idx = np.inf, -1
    for lo, hi in groups:
        seg = logp[lo:hi]
        i_max = int(np.argmax(seg))
        if best_idx >= 0 and seg[i_max] > best + tol_p:
            return witness(best_idx, lo + i_max)
        i_min = int(np.argmin(seg))
        if seg[i_min] < best:
            best, best_idx = seg[i_min], lo + i_min
    return NPassivity(True, N)


def _triple_ratios(sys: LevelSystem):
    """``(i, j, k, r_E, r_p)`` for every triple ``E_i < E_j < E_k``.

    ``l = N r_E`` and ``m = N r_p`` locate where the pattern ``N`` copies in
    ``j`` ties in energy and in probability with ``N - n`` copies in ``i`` plus
    ``n`` copies in ``k``.
    """
    E, lp = sys.energies, sys.log_probs
    out = []
    for i, j, k in itertools.combinations(range(len(E)), 3):
        if not (E[i] < E[j] < E[k]) or not np.isfinite(lp[i]):
            continue
        r_e = (E[j] - E[i]) / (E[k] - E[i])
        if not np.isfinite(lp[j]):
            continue
        r_p = 0.0 if not np.isfinite(lp[k]) else (lp[i] - lp[j]) / (lp[i] - lp[k])
        out.append((i, j, k, r_e, r_p))
    return out


def triple_violation(sys: LevelSystem, N: int, tol=1e-9):
    """First triple with an integer separating ``l`` and ``m`` at this ``N``.

    Returns ``(i, j, k, n)`` or ``None``. An integer equal to ``l`` but not to
    ``m`` also counts, since it gives equal energies with unequal probability.
    A violation at ``N`` persists at every larger ``N`` (pad both patterns with
    the same copies) even when no integer separates ``l`` and ``m`` there, so
    read the test cumulatively: the first hit is the smallest failing ``N``.
    """
    for i, j, k, r_e, r_p in _triple_ratios(sys):
        l, m = N * r_e, N * r_p
        lo, hi = min(l, m), max(l, m)
        n = math.floor(lo + tol) + 1
        if n < hi - tol and 0 < n < N:
            return (i, j, k, n)
        nl = round(l)
        if abs(l - nl) <= tol and abs(l - m) > tol and 0 < nl < N:
            return (i, j, k, int(nl))
    return None


@dataclass(frozen=True)
class MinFailingN:
    brute_force: Optional[int]
    predicted: Optional[int]
    triple: Optional[tuple] = None

    @property
    def agree(self) -> bool:
        return self.brute_force == self.predicted


def min_failing_n(sys: LevelSystem, N_max: int, max_compositions=2_000_000) -> MinFailingN:
    """Smallest ``N <= N_max`` at which ``sys`` stops being N-passive.

    Reports both the direct enumeration result and the prediction from the
    three-level ``l``/``m`` separation test. For three-level systems the two
    coincide; with more levels the prediction is only an upper bound.
    """
    if not is_n_passive(sys, 1, max_compositions):
        raise ValueError("system is not passive at N=1")
    brute = predicted = None
    triple = None
    for N in range(1, N_max + 1):
        if predicted is None:
            hit = triple_violation(sys, N)
            if hit is not None:
                predicted, triple = N, hit
        if brute is None and not is_n_passive(sys, N, max_compositions):
            brute = N
        if brute is not None and predicted is not None:
            break
    return MinFailingN(brute, predicted, triple)


@dataclass(frozen=True)
class CompletePassivity:
    passive: bool
    beta: Optional[float]
    reason: str = ""

    def __bool__(self):
        return self.passive


def is_completely_passive(sys: LevelSystem, tol=1e-9) -> CompletePassivity:
    """Canonical test: every gap must give the same ``ln(p_i/p_j)/(E_j - E_i)``."""
    E, p = sys.energies, sys.probs
    if np.any(p <= 0):
        raise ValueError("complete passivity test needs strictly positive probabilities")
    levels, pops = [E[0]], [p[0]]
    for e, q in zip(E[1:], p[1:]):
        if e - levels[-1] <= tol:
            if abs(q - pops[-1]) > tol:
                return CompletePassivity(False, None,
                                         f"degenerate energy {e} carries unequal probabilities")
            continue
        levels.append(e)
        pops.append(q)
    if len(levels) == 1:
        return CompletePassivity(True, 0.0, "single energy level")
    betas = np.log(np.array(pops[:-1]) / np.array(pops[1:])) / np.diff(levels)
    spread = float(betas.max() - betas.min())
    beta = float(betas.mean())
    if spread > tol:
        return CompletePassivity(False, None, f"gap temperatures spread by {spread:.3e}")
    if beta < -tol:
        return CompletePassivity(False, None, f"negative common beta {beta:.3e}")
    return CompletePassivity(True, beta)


# --- ratio law -------------------------------------------------------------------

def boltzmann_factor(beta, gap):
    return math.exp(-beta * gap)


def check_ratio_law(beta, gaps, tol=1e-12) -> bool:
    """Multiplicative law ``f(a + b) = f(a) f(b)`` for ``f(x) = exp(-beta x)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    for a in gaps:
        for b in gaps:
            lhs = boltzmann_factor(beta, a + b)
            rhs = boltzmann_factor(beta, a) * boltzmann_factor(beta, b)
            if abs(lhs - rhs) > tol * max(1.0, abs(lhs)):
                return False
    return True


def ratio_law_residual(probs, energies, beta) -> float:
    """Largest relative deviation of ``p_i/p_j`` from ``exp(-beta (E_i - E_j))``."""
    p = np.asarray(probs, dtype=float)
    E = np.asarray(energies, dtype=float)
    ratio = p[:, None] / p[None, :]
    expected = np.exp(-beta * (E[:, None] - E[None, :]))
    return float(np.max(np.abs(ratio / expected - 1.0)))
