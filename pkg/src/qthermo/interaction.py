"""Two coupled systems under ``H1 (x) I + I (x) H2 + V(t)`` with energy bookkeeping."""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._config import DEFAULT
from .canonical import canonical_state
from .errors import DimensionError, QThermoError
from .linalg import (as_hermitian, commutator, embed, expectation, expm_hermitian,
                     hermitian_eig, kron_sum, partial_trace)
from .schedule import Schedule
from .states import density_matrix, gibbs_measure, marginal, product_state


@dataclass
class EnergyLedger:
    """Energy changes over a run, split into work and heat.

    ``heat_Q1`` is the integrated flow ``<[H1, V]>/(i hbar)`` into system 1.
    ``H1`` and ``H2`` are held fixed, so their work terms vanish and all
    external work enters through ``V`` (``work_D_V``).
    """

    delta_H1: float = 0.0
    delta_H2: float = 0.0
    delta_V: float = 0.0
    work_D_H1: float = 0.0
    work_D_H2: float = 0.0
    work_D_V: float = 0.0
    heat_Q1: float = 0.0
    heat_Q2: float = 0.0
    residual: float = 0.0

    @property
    def delta_total(self):
        return self.delta_H1 + self.delta_H2 + self.delta_V


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    ledger: EnergyLedger
    dims: tuple
    h1: np.ndarray = field(default=None)
    h2: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    q1: np.ndarray = field(default=None)
    g1: np.ndarray = field(default=None)
    g2: np.ndarray = field(default=None)
    lyapunov: Optional[np.ndarray] = None

    CSV_COLUMNS = ("time", "H1", "H2", "V", "Q1", "G1", "G2")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for row in zip(self.times, self.h1, self.h2, self.v, self.q1, self.g1, self.g2):
                w.writerow([repr(float(x)) for x in row])


def evolve_joint(H1, H2, V_schedule: Schedule, rho0, steps, hbar=None, stride=None) -> Trajectory:
    """Midpoint propagation of the joint state with heat-flow quadrature.

    Each substep uses the generator at its midpoint; the heat-flow integrand
    and the rate of work ``<dV/dt>`` are sampled on the half-evolved state, so
    the ledger residual is a pure O(steps^-2) quadrature error. Jumps between
    schedule segments are booked as instantaneous work.
    """
    hbar = DEFAULT.hbar if hbar is None else hbar
    H1 = as_hermitian(H1, name="H1")
    H2 = as_hermitian(H2, name="H2")
    dims = (H1.shape[0], H2.shape[0])
    D = dims[0] * dims[1]
    if V_schedule.dim != D:
        raise DimensionError(f"coupling dimension {V_schedule.dim} != {dims[0]}*{dims[1]}")
    rho = density_matrix(rho0)
    if rho.shape != (D, D):
        raise DimensionError(f"joint state has shape {rho.shape}, expected {(D, D)}")
    A1 = embed(H1, dims, 0)
    A2 = embed(H2, dims, 1)
    H0 = A1 + A2
    counts = V_schedule.step_counts(steps)
    stride = stride or max(1, sum(counts) // 200)

    rec = {k: [] for k in ("t", "state", "h1", "h2", "v", "q1", "g1", "g2")}
    led = EnergyLedger()
    q1 = q2 = work = 0.0

    def record(t, rho, V):
        rec["t"].append(t)
        rec["state"].append(rho)
        rec["h1"].append(expectation(A1, rho))
        rec["h2"].append(expectation(A2, rho))
        rec["v"].append(expectation(V, rho))
        rec["q1"].append(q1)
        rec["g1"].append(gibbs_measure(partial_trace(rho, dims, 0)))
        rec["g2"].append(gibbs_measure(partial_trace(rho, dims, 1)))

    V_start = V_schedule.start()
    e1_0, e2_0, v_0 = expectation(A1, rho), expectation(A2, rho), expectation(V_start, rho)
    record(0.0, rho, V_start)
    prev_seg = None
    n = 0
    for i, seg, s, dt, t0 in V_schedule.grid(steps):
        if prev_seg is not None and i != prev_seg[0]:
            before = prev_seg[1].at(prev_seg[1].duration)
            work += expectation(seg.at(0.0) - before, rho)
        prev_seg = (i, seg)
        V = seg.at(s + 0.5 * dt)
        H = H0 + V
        half = expm_hermitian(H, 0.5 * dt, hbar)
        mid = half @ rho @ half.conj().T
        q1 += dt * float(np.real(np.trace(commutator(A1, V) @ mid) / (1j * hbar)))
        q2 += dt * float(np.real(np.trace(commutator(A2, V) @ mid) / (1j * hbar)))
        work += dt * expectation(seg.derivative(s + 0.5 * dt), mid)
        rho = half @ mid @ half.conj().T
        n += 1
        if n % stride == 0:
            record(t0 + s + dt, rho, seg.at(s + dt))
    V_end = V_schedule.end()
    if rec["t"][-1] != V_schedule.duration:
        record(V_schedule.duration, rho, V_end)

    led.delta_H1 = expectation(A1, rho) - e1_0
    led.delta_H2 = expectation(A2, rho) - e2_0
    led.delta_V = expectation(V_end, rho) - v_0
    led.heat_Q1, led.heat_Q2, led.work_D_V = q1, q2, work
    led.residual = max(abs(led.delta_H1 - q1), abs(led.delta_H2 - q2),
                       abs(led.delta_total - work))
    return Trajectory(np.array(rec["t"]), rec["state"], led, dims,
                      np.array(rec["h1"]), np.array(rec["h2"]), np.array(rec["v"]),
                      np.array(rec["q1"]), np.array(rec["g1"]), np.array(rec["g2"]))


def _resonant_pairs(H1, H2, gap_tol):
    """Index pairs of product eigenstates with equal total energy that change both factors."""
    e1, u1 = hermitian_eig(H1)
    e2, u2 = hermitian_eig(H2)
    d1, d2 = len(e1), len(e2)
    total = (e1[:, None] + e2[None, :]).ravel()
    pairs = []
    for a in range(d1 * d2):
        i, j = divmod(a, d2)
        for b in range(a + 1, d1 * d2):
            k, l = divmod(b, d2)
            if i != k and j != l and abs(total[a] - total[b]) <= gap_tol:
                pairs.append((a, b))
    return pairs, np.kron(u1, u2)


def energy_conserving_coupling(H1, H2, seed=None, gap_tol=1e-9) -> Optional[np.ndarray]:
    """Random coupling commuting with ``H1 (x) I + I (x) H2``.

    Only matrix elements between product eigenstates of equal total energy
    that change *both* local states are kept, so the coupling has zero mean
    on any product of states diagonal in the local energy bases. Returns
    ``None`` when no such element exists (no resonant exchange).
    """
    rng = np.random.default_rng(seed)
    pairs, U = _resonant_pairs(as_hermitian(H1), as_hermitian(H2), gap_tol)
    if not pairs:
        return None
    D = U.shape[0]
    M = np.zeros((D, D), dtype=complex)
    for a, b in pairs:
        z = rng.normal() + 1j * rng.normal()
        M[a, b] = z
        M[b, a] = np.conj(z)
    V = U @ M @ U.conj().T
    return 0.5 * (V + V.conj().T)


def exchange_coupling(H1, H2, strength=1.0, gap_tol=1e-9) -> Optional[np.ndarray]:
    """Deterministic partial-swap coupling: equal real amplitude on every resonant exchange.

    For two resonant qubits this is ``g (|01><10| + |10><01|)``.
    """
    pairs, U = _resonant_pairs(as_hermitian(H1), as_hermitian(H2), gap_tol)
    if not pairs:
        return None
    D = U.shape[0]
    M = np.zeros((D, D), dtype=complex)
    for a, b in pairs:
        M[a, b] = M[b, a] = strength
    return U @ M @ U.conj().T


def conservation_error(V, H1, H2) -> float:
    return float(np.max(np.abs(commutator(V, kron_sum(H1, H2)))))


@dataclass
class ContactRecord:
    delta_H1: float
    delta_H2: float
    temptheorem_lhs: float
    phi2_before: float
    phi2_after: float
    phi1_before: float
    phi1_after: float
    ledger: EnergyLedger


def contact_experiment(beta1, H1, beta2, H2, V, tau, steps=1, hbar=None) -> ContactRecord:
    """Couple two canonical states through a conserving ``V`` for time ``tau``.

    ``phi2`` is ``G(rho_2) + beta1 <H2>`` (system 1 acts as the canonical
    partner), ``phi1`` the mirror image.
    """
    H1 = as_hermitian(H1, name="H1")
    H2 = as_hermitian(H2, name="H2")
    V = as_hermitian(V, name="V")
    err = conservation_error(V, H1, H2)
    if err > 1e-9 * max(1.0, float(np.max(np.abs(V)))):
        raise QThermoError(f"coupling does not conserve H1 + H2 (max commutator {err:.3e})")
    rho1, rho2 = canonical_state(H1, beta1), canonical_state(H2, beta2)
    rho0 = product_state(rho1, rho2)
    traj = evolve_joint(H1, H2, Schedule.constant(V, tau), rho0, steps, hbar, stride=steps)
    dims = traj.dims
    final = traj.states[-1]
    m1, m2 = marginal(final, dims, 0), marginal(final, dims, 1)
    dH1, dH2 = traj.ledger.delta_H1, traj.ledger.delta_H2
    return ContactRecord(
        dH1, dH2, dH1 * (beta1 - beta2),
        gibbs_measure(rho2) + beta1 * expectation(H2, rho2),
        gibbs_measure(m2) + beta1 * expectation(H2, m2),
        gibbs_measure(rho1) + beta2 * expectation(H1, rho1),
        gibbs_measure(m1) + beta2 * expectation(H1, m1),
        traj.ledger,
    )
