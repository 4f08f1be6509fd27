import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qthermo import rand
from qthermo.canonical import canonical_state
from qthermo.errors import QThermoError
from qthermo.interaction import (Trajectory, conservation_error, contact_experiment,
                                 energy_conserving_coupling, evolve_joint, exchange_coupling)
from qthermo.linalg import expectation, expm_hermitian, partial_trace
from qthermo.schedule import Schedule, Segment
from qthermo.states import gibbs_measure

seeds = st.integers(0, 2**32 - 1)
H01 = np.diag([0.0, 1.0])


def basis_index(i, j, d2):
    return i * d2 + j


def test_decoupled_evolution(rng):
    H1, H2 = rand.random_hermitian(2, rng), rand.random_hermitian(3, rng)
    r1, r2 = rand.random_density(2, rng), rand.random_density(3, rng)
    traj = evolve_joint(H1, H2, Schedule.constant(np.zeros((6, 6)), 1.7), np.kron(r1, r2), 40)
    assert abs(traj.ledger.heat_Q1) <= 1e-12 and abs(traj.ledger.heat_Q2) <= 1e-12
    U1 = expm_hermitian(H1, 1.7)
    assert np.allclose(partial_trace(traj.states[-1], (2, 3), 0), U1 @ r1 @ U1.conj().T)


def test_resonant_qubits_partial_swap_closed_form():
    g, tau = 0.8, 1.1
    V = exchange_coupling(H01, H01, g)
    a, b = np.array([0.9, 0.1]), np.array([0.6, 0.4])
    traj = evolve_joint(H01, H01, Schedule.constant(V, tau), np.kron(np.diag(a), np.diag(b)), 5)
    # exchange inside the resonant block {|01>, |10>} rotates by angle g t
    expected = np.sin(g * tau) ** 2 * (a[0] * b[1] - a[1] * b[0])
    assert traj.ledger.delta_H1 == pytest.approx(expected, abs=1e-12)
    assert traj.ledger.delta_H1 == pytest.approx(-traj.ledger.delta_H2, abs=1e-9)


def test_coupling_supports():
    V = energy_conserving_coupling(H01, H01, seed=1)
    support = {(i, j) for i, j in zip(*np.nonzero(np.abs(V) > 1e-12))}
    assert support <= {(1, 2), (2, 1)} and support
    assert energy_conserving_coupling(H01, np.diag([0.0, np.sqrt(2)]), seed=1) is None

    H3 = np.diag([0.0, 1.0, 2.0])
    V = energy_conserving_coupling(H3, H3, seed=2)
    idx = lambda i, j: basis_index(i, j, 3)
    blocks = [{idx(0, 2), idx(1, 1), idx(2, 0)}, {idx(0, 1), idx(1, 0)}, {idx(1, 2), idx(2, 1)}]
    nz = {(i, j) for i, j in zip(*np.nonzero(np.abs(V) > 1e-12))}
    for blk in blocks:
        assert any(i in blk and j in blk for i, j in nz)
    assert all(any(i in blk and j in blk for blk in blocks) for i, j in nz)
    assert conservation_error(V, H3, H3) <= 1e-12


def test_contact_examples(rng):
    H = np.diag([0.0, 1.0, 2.0])
    V = energy_conserving_coupling(H, H, seed=3)
    same = contact_experiment(0.7, H, 0.7, H, V, 1.3)
    assert abs(same.delta_H1) <= 1e-9 and same.temptheorem_lhs == 0.0
    off = contact_experiment(2.0, H01, 1.0, H01, np.zeros((4, 4)), 1.0)
    assert off.delta_H1 == 0.0


def test_contact_rejects_nonconserving_coupling(rng):
    with pytest.raises(QThermoError):
        contact_experiment(1.0, H01, 2.0, H01, rand.random_hermitian(4, rng), 1.0)


def test_temperature_flow_resonant_qubits():
    for seed in range(50):
        V = energy_conserving_coupling(H01, H01, seed=seed)
        rec = contact_experiment(2.0, H01, 1.0, H01, V, 0.3 + 0.05 * seed)
        assert rec.temptheorem_lhs >= -1e-9
        # the colder system (larger beta) gains energy
        assert rec.delta_H1 >= -1e-12


@given(seeds, st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 4))
def test_temperature_flow_random_spectra(seed, b1, b2, tau):
    rng = np.random.default_rng(seed)
    H = np.diag(np.sort(rng.integers(0, 4, size=3)).astype(float))
    V = energy_conserving_coupling(H, H, seed=seed)
    if V is None:
        return
    rec = contact_experiment(b1, H, b2, H, V, tau)
    assert rec.temptheorem_lhs >= -1e-9
    assert rec.phi2_after <= rec.phi2_before + 1e-9


@given(seeds, st.floats(0.1, 3), st.floats(0.1, 4))
def test_canonical_partner_lowers_free_measure_of_arbitrary_state(seed, beta, tau):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    H = np.diag(np.sort(rng.uniform(0, 2, size=d)))
    H = np.diag(np.round(np.diag(H), 1))
    V = energy_conserving_coupling(H, H, seed=seed)
    if V is None:
        return
    other = rand.random_density(d, rng)
    traj = evolve_joint(H, H, Schedule.constant(V, tau), np.kron(canonical_state(H, beta), other),
                        1, stride=1)
    after = partial_trace(traj.states[-1], (d, d), 1)
    phi = lambda r: gibbs_measure(r) + beta * expectation(H, r)
    assert phi(after) <= phi(other) + 1e-8


def test_total_energy_conserved(rng):
    H = np.diag([0.0, 1.0, 2.0])
    V = energy_conserving_coupling(H, H, seed=9)
    rho = rand.random_density(9, rng)
    traj = evolve_joint(H, H, Schedule.constant(V, 2.0), rho, 17)
    assert abs(traj.ledger.delta_total) <= 1e-9
    assert abs(traj.ledger.work_D_V) <= 1e-12


def test_ledger_closure_is_second_order(rng):
    H1, H2 = np.diag([0.0, 1.0]), np.diag([0.0, 1.3])
    V0 = rand.random_hermitian(4, rng)
    rho = rand.random_density(4, rng)
    sched = Schedule.linear(np.zeros((4, 4)), V0, 2.0)
    res = [evolve_joint(H1, H2, sched, rho, n).ledger.residual for n in (50, 100, 200, 400)]
    c = np.array(res) * np.array([50, 100, 200, 400]) ** 2
    assert all(3.5 < res[i] / res[i + 1] < 4.5 for i in range(3)), res
    assert np.ptp(c) / c.mean() < 0.1


def test_jump_between_segments_is_booked_as_work(rng):
    H1, H2 = H01, H01
    V = exchange_coupling(H1, H2, 0.5)
    rho = rand.random_density(4, rng)
    sched = Schedule((Segment(1.0, np.zeros((4, 4))), Segment(1.0, V)))
    led = evolve_joint(H1, H2, sched, rho, 10).ledger
    assert led.work_D_V == pytest.approx(expectation(V, rho), abs=1e-12)
    assert abs(led.delta_total - led.work_D_V) <= 1e-12


def test_trajectory_csv(tmp_path, rng):
    V = exchange_coupling(H01, H01, 0.5)
    traj = evolve_joint(H01, H01, Schedule.constant(V, 1.0), rand.random_density(4, rng), 20,
                        stride=5)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == Trajectory.CSV_COLUMNS
    assert len(rows) == 1 + 5
    assert float(rows[-1][0]) == pytest.approx(1.0)
