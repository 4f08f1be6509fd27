"""Randomised sweep over the inequalities the package relies on.

Every check draws from its own child of one seed sequence, so results do not
depend on which checks run or in what order.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import rand
from .baths import Contact, Drive, IdealBath, run_cycle
from .canonical import canonical_state
from .interaction import contact_experiment, energy_conserving_coupling
from .linalg import expectation, partial_trace
from .schedule import Schedule, Segment
from .states import gibbs_measure, relative_measure

DEFAULT_TOLERANCES = {
    "klein": 1e-9,
    "second_law": 1e-9,
    "partovi": 1e-9,
    "lucatheorem": 1e-8,
    "temptheorem": 1e-9,
    "betaclaus": 1e-9,
}


def _spectrum(d, rng):
    return np.diag(np.sort(rng.uniform(0.0, 2.0, size=d))).astype(complex)


def _klein(rng, dims):
    d = int(rng.choice(dims))
    return relative_measure(rand.random_density(d, rng), rand.random_density(d, rng))


def _second_law(rng, dims):
    d1, d2 = int(rng.choice(dims)), int(rng.choice(dims))
    r1, r2 = rand.random_density(d1, rng), rand.random_density(d2, rng)
    U = rand.random_unitary(d1 * d2, rng)
    joint = U @ np.kron(r1, r2) @ U.conj().T
    after = gibbs_measure(partial_trace(joint, (d1, d2), 0)) + \
        gibbs_measure(partial_trace(joint, (d1, d2), 1))
    return gibbs_measure(r1) + gibbs_measure(r2) - after


def _partovi(rng, dims):
    d = int(rng.choice(dims))
    H = rand.random_hermitian(d, rng, scale=3.0)
    beta = float(rng.uniform(0.1, 3.0))
    other = rand.random_density(d, rng)
    can = canonical_state(H, beta)
    return (gibbs_measure(other) + beta * expectation(H, other)) - \
        (gibbs_measure(can) + beta * expectation(H, can))


def _contact_pair(rng, dims):
    d = int(rng.choice(dims))
    H = _spectrum(d, rng)
    V = energy_conserving_coupling(H, H, seed=int(rng.integers(2**32)))
    return H, V, float(rng.uniform(0.1, 3.0))


def _lucatheorem(rng, dims):
    from .interaction import evolve_joint

    H, V, tau = _contact_pair(rng, dims)
    beta = float(rng.uniform(0.1, 3.0))
    partner = canonical_state(H, beta)
    other = rand.random_density(H.shape[0], rng)
    traj = evolve_joint(H, H, Schedule.constant(V, tau), np.kron(partner, other), 1, stride=1)
    after = partial_trace(traj.states[-1], traj.dims, 1)
    return (gibbs_measure(other) + beta * expectation(H, other)) - \
        (gibbs_measure(after) + beta * expectation(H, after))


def _temptheorem(rng, dims):
    H, V, tau = _contact_pair(rng, dims)
    b1, b2 = rng.uniform(0.1, 3.0, size=2)
    return contact_experiment(float(b1), H, float(b2), H, V, tau).temptheorem_lhs


def _betaclaus(rng, dims):
    d = int(rng.choice(dims))
    H = _spectrum(d, rng)
    rho0 = rand.random_density(d, rng)
    plan = []
    for _ in range(int(rng.integers(2, 5))):
        H_next = _spectrum(d, rng)
        bump = rand.random_hermitian(d, rng)
        path = Schedule((Segment(0.5, H, H + bump), Segment(0.5, H + bump, H_next)))
        plan.append(Drive(path, steps=20))
        H = H_next
        V = energy_conserving_coupling(H, H, seed=int(rng.integers(2**32)))
        bath = IdealBath(float(rng.uniform(0.1, 3.0)), H, V, float(rng.uniform(0.2, 2.0)))
        plan.append(Contact(bath, collisions=int(rng.integers(1, 4))))
    ledger = run_cycle(plan, rho0, plan[0].schedule.start(), seed=int(rng.integers(2**32)))
    return ledger.clausius_sum - (gibbs_measure(ledger.final_state) - gibbs_measure(rho0))


CHECKS = {
    "klein": _klein,
    "second_law": _second_law,
    "partovi": _partovi,
    "lucatheorem": _lucatheorem,
    "temptheorem": _temptheorem,
    "betaclaus": _betaclaus,
}


@dataclass
class VerifyReport:
    record: dict
    runtime: float

    @property
    def all_passed(self) -> bool:
        return self.record["all_passed"]


def verify_suite(seed=0, trials=100, dims=(2, 3, 4), tolerances=None, checks=None) -> VerifyReport:
    """Run every inequality check ``trials`` times; report pass counts and worst margins.

    A margin is ``lhs - rhs`` of the inequality, so it should be non-negative;
    a check passes when the margin is at least ``-tolerance``. ``runtime`` is
    kept out of ``record`` so the record is reproducible byte for byte.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dims = tuple(int(d) for d in dims)
    if not dims or min(dims) < 2:
        raise ValueError("dims must be a non-empty list of integers >= 2")
    tols = dict(DEFAULT_TOLERANCES)
    for key, val in (tolerances or {}).items():
        if key not in tols:
            raise ValueError(f"unknown tolerance {key!r}")
        if not (np.isfinite(val) and val >= 0):
            raise ValueError(f"tolerance {key!r} must be non-negative, got {val}")
        tols[key] = float(val)
    names = sorted(checks or CHECKS)
    children = dict(zip(sorted(CHECKS), np.random.SeedSequence(seed).spawn(len(CHECKS))))

    start = time.perf_counter()
    out = {}
    for name in names:
        rng = np.random.default_rng(children[name])
        margins = np.array([CHECKS[name](rng, dims) for _ in range(trials)])
        passed = int(np.sum(margins >= -tols[name]))
        out[name] = {
            "trials": trials,
            "passed": passed,
            "worst_margin": float(margins.min()),
            "tolerance": tols[name],
        }
    record = {
        "seed": int(seed),
        "trials": int(trials),
        "dims": list(dims),
        "checks": out,
        "all_passed": all(v["passed"] == v["trials"] for v in out.values()),
    }
    return VerifyReport(record, time.perf_counter() - start)
