"""Cycle builders shared by the bath tests and the acceptance suite."""

import numpy as np

from qthermo import rand
from qthermo.baths import Contact, Drive, IdealBath
from qthermo.canonical import canonical_state
from qthermo.interaction import exchange_coupling
from qthermo.schedule import Schedule, Segment

FULL_SWAP = np.pi / 2  # contact time for unit exchange strength


def ladder(w, d):
    return np.diag(w * np.arange(d)).astype(complex)


def qubit_bath(beta, H_sys, w, g=1.0, contact_time=FULL_SWAP):
    A = ladder(w, 2)
    return IdealBath(beta, A, exchange_coupling(H_sys, A, g), contact_time)


def random_closed_cycle(rng, d=None):
    """Random drives and partial contacts, closed by a full thermalisation.

    The system starts canonical at the last bath's temperature under ``H0`` and
    the last contact re-thermalises it there, so the marginal returns.
    """
    d = int(rng.choice([2, 3])) if d is None else d
    w0 = float(rng.uniform(0.5, 2.0))
    H0 = ladder(w0, d)
    H, plan = H0, []
    strokes = int(rng.integers(1, 4))
    for _ in range(strokes):
        w = float(rng.uniform(0.5, 2.0))
        H_next = ladder(w, d)
        bump = rand.random_hermitian(d, rng)
        plan.append(Drive(Schedule((Segment(0.5, H, H + bump), Segment(0.5, H + bump, H_next))),
                          steps=30))
        H = H_next
        bath = qubit_bath(float(rng.uniform(0.2, 3.0)), H, w,
                          contact_time=float(rng.uniform(0.2, 1.5)))
        plan.append(Contact(bath, collisions=int(rng.integers(1, 4))))
    plan.append(Drive(Schedule.linear(H, H0, 1.0), steps=30))
    beta_last = float(rng.uniform(0.2, 3.0))
    collisions = 1 if d == 2 else 400
    plan.append(Contact(qubit_bath(beta_last, H0, w0, contact_time=FULL_SWAP if d == 2 else 1.0),
                        collisions=collisions))
    return plan, canonical_state(H0, beta_last), H0


def carnot_qubit_cycle(beta_hot, beta_cold, w_cold, w_hot_end, steps):
    """Qubit cycle: adiabatic, hot isotherm in ``steps`` strokes, adiabatic, cold isotherm.

    Each isothermal stroke nudges the gap and then swaps in a fresh resonant
    ancilla, which thermalises the qubit exactly.
    """
    w_hot = w_cold * beta_cold / beta_hot
    w_cold_end = w_hot_end * beta_hot / beta_cold
    H0 = ladder(w_cold, 2)
    plan = [Drive(Schedule.linear(H0, ladder(w_hot, 2), 1.0), steps=4)]

    def isotherm(beta, w_from, w_to):
        out = []
        gaps = np.linspace(w_from, w_to, steps + 1)
        for a, b in zip(gaps[:-1], gaps[1:]):
            out.append(Drive(Schedule.linear(ladder(a, 2), ladder(b, 2), 1.0), steps=1))
            out.append(Contact(qubit_bath(beta, ladder(b, 2), b)))
        return out

    plan += isotherm(beta_hot, w_hot, w_hot_end)
    plan.append(Drive(Schedule.linear(ladder(w_hot_end, 2), ladder(w_cold_end, 2), 1.0), steps=4))
    plan += isotherm(beta_cold, w_cold_end, w_cold)
    return plan, canonical_state(H0, beta_cold), H0
