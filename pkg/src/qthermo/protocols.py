"""Quasistatic isothermal driving and the three-stage reversible entropy protocol."""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._config import DEFAULT
from .canonical import boltzmann_weights, canonical_state, log_partition_function
from .errors import InvalidStateError, QThermoError
from .linalg import as_hermitian, commutator, expectation, trace_distance, unitary_log
from .passivity import _branch_safe
from .schedule import Schedule, propagate
from .states import density_matrix, entropy, gibbs_measure


@dataclass
class IsothermalResult:
    """Outcome of a stepwise isothermal drive.

    ``heat`` is the energy deposited in the bath, so ``work - delta_energy == heat``.
    ``discretization_error`` is ``work - ideal_work`` (positive for a finite
    number of steps).
    """

    work: float
    heat: float
    ideal_work: float
    discretization_error: float
    delta_energy: float
    delta_gibbs: float
    beta: float
    max_commutator: float = 0.0
    final_state: Optional[np.ndarray] = field(default=None, repr=False)
    history: Optional[np.ndarray] = field(default=None, repr=False)

    CSV_COLUMNS = ("step", "time", "work", "heat", "energy")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for row in self.history:
                w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def _grid_hamiltonians(path: Schedule, steps):
    """Hamiltonians at the substep boundaries of ``path``, plus their times."""
    Hs, ts = [path.start()], [0.0]
    for _, seg, s, dt, t0 in path.grid(steps):
        Hs.append(seg.at(s + dt))
        ts.append(t0 + s + dt)
    return Hs, np.array(ts)


def _all_diagonal(Hs):
    return all(np.count_nonzero(H - np.diag(np.diag(H))) == 0 for H in Hs)


def isothermal_drive(H_path: Schedule, beta, steps, rho0=None, keep_history=False) -> IsothermalResult:
    """Alternate small Hamiltonian increments with full rethermalisation.

    At each step the Hamiltonian jumps to its next grid value (work
    ``Tr(dH rho)`` on the current state), then the bath resets the state to the
    canonical state of the new Hamiltonian (heat by energy balance). The work
    converges to ``-(1/beta) ln(Z_f/Z_0)`` at first order in ``1/steps``.
    ``rho0`` defaults to the canonical state of the initial Hamiltonian.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise QThermoError(f"beta must be positive, got {beta}")
    Hs, ts = _grid_hamiltonians(H_path, steps)
    H_first, H_last = Hs[0], Hs[-1]
    rho = canonical_state(H_first, beta) if rho0 is None else density_matrix(rho0)
    e_start = expectation(H_first, rho)
    g_start = gibbs_measure(rho)
    max_comm = float(np.max(np.abs(commutator(rho, H_first))))

    if rho0 is None and _all_diagonal(Hs):
        E = np.array([np.diag(H).real for H in Hs])
        boltzmann_weights(E[np.argmax(np.ptp(E, axis=1))], beta)  # overflow guard
        P = np.exp(-beta * (E - E.min(axis=1, keepdims=True)))
        P /= P.sum(axis=1, keepdims=True)
        dW = np.einsum("kd,kd->k", E[1:] - E[:-1], P[:-1])
        dQ = np.einsum("kd,kd->k", E[1:], P[:-1] - P[1:])
        energies = np.einsum("kd,kd->k", E, P)
        rho = np.diag(P[-1]).astype(complex)
    else:
        dW, dQ, energies = [], [], [e_start]
        for H_old, H_new in zip(Hs[:-1], Hs[1:]):
            dW.append(expectation(H_new - H_old, rho))
            e_mid = expectation(H_new, rho)
            rho = canonical_state(H_new, beta)
            e_new = expectation(H_new, rho)
            dQ.append(e_mid - e_new)
            energies.append(e_new)
            max_comm = max(max_comm, float(np.max(np.abs(commutator(rho, H_new)))))
        dW, dQ, energies = np.array(dW), np.array(dQ), np.array(energies)

    work, heat = float(dW.sum()), float(dQ.sum())
    ideal = -(log_partition_function(H_last, beta) - log_partition_function(H_first, beta)) / beta
    history = None
    if keep_history:
        history = np.column_stack([np.arange(len(ts)), ts,
                                   np.concatenate([[0.0], np.cumsum(dW)]),
                                   np.concatenate([[0.0], np.cumsum(dQ)]), energies])
    return IsothermalResult(
        work=work, heat=heat, ideal_work=float(ideal), discretization_error=work - ideal,
        delta_energy=expectation(H_last, rho) - e_start,
        delta_gibbs=gibbs_measure(rho) - g_start, beta=float(beta),
        max_commutator=max_comm, final_state=rho, history=history,
    )


@dataclass
class ProtocolResult:
    total_heat_Q: float
    temperature_T: float
    entropy_diff_estimate: float
    entropy_diff_reference: float
    total_work: float
    mode: str
    isothermal: IsothermalResult = field(repr=False)
    stage_fidelities: tuple = (1.0, 1.0)
    final_distance: float = 0.0

    @property
    def error(self) -> float:
        return self.entropy_diff_estimate - self.entropy_diff_reference


def entropy_difference_reference(rho, rho_prime, k=None) -> float:
    """``S(rho') - S(rho)`` with ``S = -k Tr rho ln rho``."""
    return entropy(rho_prime, k) - entropy(rho, k)


def _sorted_spectrum(rho, label, tol):
    values, vecs = np.linalg.eigh(density_matrix(rho))
    order = np.argsort(-values, kind="stable")
    values, vecs = values[order], vecs[:, order]
    if values[-1] <= tol:
        raise InvalidStateError(
            f"{label} has a zero eigenvalue ({values[-1]:.3e}); the protocol needs "
            f"-kT ln p finite. Mix in a little of the identity, e.g. "
            f"(1 - eps) rho + eps I/d with eps ~ 1e-3."
        )
    return values, vecs


def _rotation_stage(H_from, H_to, V, tau, hbar):
    """Isolated stage Hamiltonian: switch ``H_from -> H_to`` while generating ``ln V``."""
    L = unitary_log(_branch_safe(V))

    def H(t):
        s_half = np.sin(np.pi * t / (2 * tau)) ** 2
        c_half = np.cos(np.pi * t / (2 * tau)) ** 2
        bump = np.sin(np.pi * t / tau) ** 2
        return H_from * (c_half - bump) + H_to * (s_half - bump) \
            - (2j * hbar / tau) * bump * L

    return Schedule.function(H, tau)


def entropy_protocol(rho, H_i, rho_prime, H_f, temperature_T, steps=10_000, mode="direct",
                     k=None, hbar=None, stage_time=1.0, stage_steps=2000,
                     keep_history=False) -> ProtocolResult:
    """Reversible route from ``(rho, H_i)`` to ``(rho_prime, H_f)`` through one bath.

    (a) isolated rotation of ``rho`` into the fixed basis ``{|n>}`` while the
    Hamiltonian becomes ``H_1 = -kT ln p_n``, leaving a canonical state;
    (b) quasistatic isothermal change ``H_1 -> H_2 = -kT ln p'_n``;
    (c) isolated rotation onto the eigenbasis of ``rho_prime`` with ``H_f``.
    Only stage (b) exchanges heat. ``direct`` applies the ideal rotations
    exactly; ``schedule`` integrates the explicit stage Hamiltonians and
    reports how closely they reach their targets.
    """
    k = DEFAULT.k if k is None else k
    hbar = DEFAULT.hbar if hbar is None else hbar
    if not temperature_T > 0:
        raise QThermoError("temperature must be positive")
    if mode not in ("direct", "schedule"):
        raise ValueError(f"unknown protocol mode {mode!r}")
    H_i = as_hermitian(H_i, name="H_i")
    H_f = as_hermitian(H_f, name="H_f")
    rho = density_matrix(rho)
    p, alpha = _sorted_spectrum(rho, "initial state", DEFAULT.support_tol)
    q, beta_vecs = _sorted_spectrum(rho_prime, "target state", DEFAULT.support_tol)
    d = len(p)
    kT = k * temperature_T
    H1 = np.diag(-kT * np.log(p)).astype(complex)
    H2 = np.diag(-kT * np.log(q)).astype(complex)
    target = (beta_vecs * q) @ beta_vecs.conj().T

    fidelities = (1.0, 1.0)
    if mode == "direct":
        rho_a = np.diag(p).astype(complex)
    else:
        Va = np.eye(d) @ alpha.conj().T
        Ua = propagate(_rotation_stage(H_i, H1, Va, stage_time, hbar), stage_steps, hbar)
        rho_a = density_matrix(Ua @ rho @ Ua.conj().T)
        fa = abs(np.trace(Va.conj().T @ Ua)) / d
    work_a = expectation(H1, rho_a) - expectation(H_i, rho)

    iso = isothermal_drive(Schedule.linear(H1, H2, 1.0), 1.0 / kT, steps,
                           rho0=None if mode == "direct" else rho_a, keep_history=keep_history)
    rho_b = iso.final_state

    if mode == "direct":
        rho_c = target
    else:
        Vc = beta_vecs @ np.eye(d)
        Uc = propagate(_rotation_stage(H2, H_f, Vc, stage_time, hbar), stage_steps, hbar)
        rho_c = density_matrix(Uc @ rho_b @ Uc.conj().T)
        fidelities = (float(fa), float(abs(np.trace(Vc.conj().T @ Uc)) / d))
    work_c = expectation(H_f, rho_c) - expectation(H2, rho_b)

    Q = iso.heat
    return ProtocolResult(
        total_heat_Q=Q, temperature_T=float(temperature_T),
        entropy_diff_estimate=-Q / temperature_T,
        entropy_diff_reference=entropy_difference_reference(rho, target, k),
        total_work=work_a + iso.work + work_c, mode=mode, isothermal=iso,
        stage_fidelities=fidelities, final_distance=trace_distance(rho_c, target),
    )
