"""Collision-model heat baths, partial thermalisation and thermal-cycle ledgers."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ._config import DEFAULT
from .canonical import canonical_state
from .errors import DimensionError, QThermoError
from .interaction import conservation_error
from .linalg import as_hermitian, embed, expectation, partial_trace, trace_distance
from .schedule import Schedule, propagate
from .states import block_basis, density_matrix, gibbs_measure, validate_projectors

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdealBath:
    """Stream of fresh canonical ancillas at ``beta``.

    ``reuse_probability`` and ``mixing`` model departures from the ideal
    stream: with probability ``reuse_probability`` the previous ancilla is met
    again (still correlated with the system), after the bath has replaced a
    fraction ``mixing`` of the joint state by ``rho_sys (x) gamma``. Both
    default to 0. ``contact_time`` has no default on purpose: vanishing
    contacts freeze the dynamics.
    """

    beta: float
    ancilla_H: np.ndarray
    coupling: np.ndarray
    contact_time: float
    reuse_probability: float = 0.0
    mixing: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise QThermoError("bath beta must be positive")
        if not self.contact_time > 0:
            raise QThermoError("contact_time must be positive")
        if not (0 <= self.reuse_probability <= 1 and 0 <= self.mixing <= 1):
            raise QThermoError("reuse_probability and mixing must lie in [0, 1]")
        object.__setattr__(self, "ancilla_H", as_hermitian(self.ancilla_H, name="ancilla_H"))
        object.__setattr__(self, "coupling", as_hermitian(self.coupling, name="coupling"))

    @property
    def is_ideal(self):
        return self.reuse_probability == 0 and self.mixing == 0

    def ancilla_state(self):
        return canonical_state(self.ancilla_H, self.beta)


@dataclass
class CollisionTrace:
    states: list
    lyapunov: np.ndarray
    heat: np.ndarray
    distance: np.ndarray

    CSV_COLUMNS = ("collision", "lyapunov", "heat_into_bath", "trace_distance")

    @property
    def total_heat(self) -> float:
        return float(self.heat.sum())

    @property
    def final_state(self):
        return self.states[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for n in range(len(self.lyapunov)):
                heat = self.heat[n - 1] if n else 0.0
                w.writerow([n, repr(float(self.lyapunov[n])), repr(float(heat)),
                            repr(float(self.distance[n]))])


def _collision_unitary(H_sys, bath, steps, hbar):
    dims = (H_sys.shape[0], bath.ancilla_H.shape[0])
    if bath.coupling.shape[0] != dims[0] * dims[1]:
        raise DimensionError(f"coupling dimension {bath.coupling.shape[0]} does not match "
                             f"system {dims[0]} x ancilla {dims[1]}")
    err = conservation_error(bath.coupling, H_sys, bath.ancilla_H)
    if err > 1e-9 * max(1.0, float(np.max(np.abs(bath.coupling)))):
        raise QThermoError(f"bath coupling does not conserve system + ancilla energy ({err:.3e})")
    H = embed(H_sys, dims, 0) + embed(bath.ancilla_H, dims, 1) + bath.coupling
    return propagate(Schedule.constant(H, bath.contact_time), steps, hbar), dims


def thermalize(rho0, H_sys, bath: IdealBath, n_collisions, steps_per_collision=1,
               seed=None, hbar=None) -> CollisionTrace:
    """Sequence of collisions with fresh canonical ancillas.

    Records, before the first and after every collision, the Lyapunov value
    ``G + beta <H_sys>``, the heat deposited in the ancilla, and the trace
    distance to the canonical state of ``H_sys`` at the bath temperature.
    """
    hbar = DEFAULT.hbar if hbar is None else hbar
    H_sys = as_hermitian(H_sys, name="H_sys")
    rho = density_matrix(rho0)
    if rho.shape != H_sys.shape:
        raise DimensionError("state and system Hamiltonian differ in dimension")
    U, dims = _collision_unitary(H_sys, bath, steps_per_collision, hbar)
    gamma = bath.ancilla_state()
    target = canonical_state(H_sys, bath.beta)
    A = embed(bath.ancilla_H, dims, 1)
    rng = np.random.default_rng(seed)

    def phi(r):
        return gibbs_measure(r) + bath.beta * expectation(H_sys, r)

    states, lyap, heat, dist = [rho], [phi(rho)], [], [trace_distance(rho, target)]
    joint = None
    for _ in range(n_collisions):
        if joint is not None and rng.random() < bath.reuse_probability:
            fresh = np.kron(partial_trace(joint, dims, 0), gamma)
            joint = (1 - bath.mixing) * joint + bath.mixing * fresh
        else:
            joint = np.kron(rho, gamma)
        e_before = expectation(A, joint)
        joint = U @ joint @ U.conj().T
        heat.append(expectation(A, joint) - e_before)
        rho = density_matrix(partial_trace(joint, dims, 0))
        states.append(rho)
        lyap.append(phi(rho))
        dist.append(trace_distance(rho, target))
    return CollisionTrace(states, np.array(lyap), np.array(heat), np.array(dist))


def _block_canonical(H, beta, K):
    B = block_basis(K)
    local = canonical_state(B.conj().T @ H @ B, beta)
    return B @ local @ B.conj().T


def partial_thermalize_blocks(rho, H, beta, projectors) -> np.ndarray:
    """Thermalise within each block while keeping block weights.

    Each block ``K_i`` keeps its weight ``Tr K_i rho K_i`` and is replaced by
    the canonical state of ``K_i H K_i`` restricted to its range.
    """
    rho = density_matrix(rho)
    H = as_hermitian(H)
    Ks = validate_projectors(projectors)
    if Ks[0].shape != rho.shape:
        raise DimensionError("projectors and state differ in dimension")
    out = np.zeros_like(rho)
    for K in Ks:
        w = float(np.trace(K @ rho @ K).real)
        if w > 0:
            out += w * _block_canonical(H, beta, K)
    return density_matrix(out)


def partial_thermalize_isolated(rho, H, beta, K_isolated, K_contact) -> np.ndarray:
    """Leave the isolated block (coherences included) and thermalise the contact block."""
    rho = density_matrix(rho)
    H = as_hermitian(H)
    Ka, Kb = validate_projectors([K_isolated, K_contact])
    w = float(np.trace(Kb @ rho @ Kb).real)
    out = Ka @ rho @ Ka
    if w > 0:
        out = out + w * _block_canonical(H, beta, Kb)
    return density_matrix(out)


# --- thermal cycles --------------------------------------------------------------

@dataclass(frozen=True)
class Drive:
    """Isolated unitary drive of the system Hamiltonian along ``schedule``."""

    schedule: Schedule
    steps: int = 100


@dataclass(frozen=True)
class Contact:
    """Thermal contact: ``collisions`` fresh ancillas from ``bath``."""

    bath: IdealBath
    collisions: int = 1
    steps: int = 1


@dataclass
class CycleLedger:
    contacts: list
    net_work: float
    closure_error: float
    initial_state: np.ndarray = field(repr=False)
    final_state: np.ndarray = field(repr=False)
    hamiltonian_closed: bool = True
    energy_residual: float = 0.0

    CLOSURE_TOL = 1e-4

    @property
    def clausius_sum(self) -> float:
        return float(sum(b * q for b, q in self.contacts))

    @property
    def closed(self) -> bool:
        return self.closure_error <= self.CLOSURE_TOL

    @property
    def gibbs_drop(self) -> float:
        """``G(initial) - G(final)``; the open-cycle lower bound on the Clausius sum is its negative."""
        return gibbs_measure(self.initial_state) - gibbs_measure(self.final_state)

    @property
    def total_heat(self) -> float:
        return float(sum(q for _, q in self.contacts))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("contact", "beta", "heat_into_bath"))
            for i, (b, q) in enumerate(self.contacts):
                w.writerow([i, repr(float(b)), repr(float(q))])


def run_cycle(plan, rho0, H0, hbar=None, seed=None) -> CycleLedger:
    """Execute drives and thermal contacts in order and book the heat of each contact.

    ``net_work`` is the total work done on the system by the drives. Contacts
    use conserving couplings and product initial states, so they exchange
    heat without doing work.
    """
    hbar = DEFAULT.hbar if hbar is None else hbar
    H = as_hermitian(H0, name="H0")
    H_initial = H
    rho = density_matrix(rho0)
    if rho.shape != H.shape:
        raise DimensionError("initial state and Hamiltonian differ in dimension")
    rng = np.random.default_rng(seed)
    contacts, work, e_start = [], 0.0, expectation(H, rho)
    if not plan:
        raise QThermoError("empty cycle plan")
    for n, step in enumerate(plan):
        if isinstance(step, Drive):
            sched = step.schedule
            if sched.dim != H.shape[0]:
                raise DimensionError(f"drive {n} has dimension {sched.dim}")
            if np.max(np.abs(sched.start() - H)) > 1e-9:
                raise QThermoError(f"drive {n} does not start from the current Hamiltonian")
            U = propagate(sched, step.steps, hbar)
            e0 = expectation(H, rho)
            rho = density_matrix(U @ rho @ U.conj().T)
            H = sched.end()
            work += expectation(H, rho) - e0
        elif isinstance(step, Contact):
            trace = thermalize(rho, H, step.bath, step.collisions, step.steps,
                               seed=int(rng.integers(2**32)), hbar=hbar)
            rho = trace.final_state
            contacts.append((step.bath.beta, trace.total_heat))
        else:
            raise QThermoError(f"plan step {n} is neither a Drive nor a Contact: {step!r}")
    closed_H = bool(np.max(np.abs(H - H_initial)) <= 1e-9)
    residual = abs(work - (expectation(H, rho) - e_start) - sum(q for _, q in contacts))
    ledger = CycleLedger(contacts, work, trace_distance(rho, density_matrix(rho0)),
                         density_matrix(rho0), rho, closed_H, residual)
    if ledger.closed and ledger.clausius_sum < -1e-6:
        log.warning("closed cycle violates the Clausius sum: %g", ledger.clausius_sum)
    return ledger


@dataclass(frozen=True)
class EngineBounds:
    efficiency: float
    carnot_bound: float
    margin: float
    heat_in: float
    work_out: float


def engine_bounds(ledger: CycleLedger, heat_tol=1e-12) -> EngineBounds:
    """Efficiency ``W_out / Q_in`` against ``1 - T_cold/T_hot``.

    ``Q_in`` is the heat drawn from the hotter (smaller-beta) bath. A single
    temperature gives a zero bound.
    """
    active = [(b, q) for b, q in ledger.contacts if abs(q) > heat_tol]
    betas = sorted({round(b, 12) for b, _ in active})
    if not active:
        raise QThermoError("ledger exchanged no heat; efficiency undefined")
    if len(betas) > 2:
        raise QThermoError(f"engine bounds need at most two bath temperatures, got {betas}")
    b_hot, b_cold = betas[0], betas[-1]
    if len(betas) == 1:
        # one temperature: count only the contacts that gave heat up
        heat_in = -sum(q for _, q in active if q < 0)
    else:
        heat_in = -sum(q for b, q in active if round(b, 12) == b_hot)
    if heat_in <= heat_tol:
        raise QThermoError("no heat drawn from the hot bath; not an engine cycle")
    work_out = -ledger.net_work
    efficiency = work_out / heat_in
    carnot = 1.0 - b_hot / b_cold
    return EngineBounds(efficiency, carnot, carnot - efficiency, heat_in, work_out)
