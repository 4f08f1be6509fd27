import numpy as np
import pytest
from hypothesis import given, strategies as st

from qthermo import rand
from qthermo.canonical import (CanonicalSpec, beta_for_energy, canonical_state,
                               log_partition_function, mean_energy, partition_function)
from qthermo.errors import QThermoError
from qthermo.linalg import expectation
from qthermo.states import gibbs_measure

seeds = st.integers(0, 2**32 - 1)
H01 = np.diag([0.0, 1.0])


def test_canonical_examples(rng):
    # independent oracle: explicit Boltzmann weights
    w = np.exp(-np.array([0.0, 1.0]))
    assert np.allclose(np.diag(canonical_state(H01, 1.0)).real, w / w.sum(), atol=1e-12)
    assert np.allclose(np.diag(canonical_state(H01, 1.0)).real, [0.731059, 0.268941], atol=1e-6)
    H = rand.random_hermitian(4, rng, 3.0)
    assert np.max(np.abs(canonical_state(H, 1e-12) - np.eye(4) / 4)) <= 1e-9
    assert np.allclose(np.diag(canonical_state(np.diag([0.0, 1, 2]), np.log(2))).real,
                       [4 / 7, 2 / 7, 1 / 7], atol=1e-12)


def test_partition_function_examples():
    assert partition_function(np.zeros((3, 3)), 0.7) == pytest.approx(3.0)
    assert partition_function(H01, 1.0) == pytest.approx(1 + np.exp(-1), abs=1e-12)
    assert partition_function(H01, 1.0) == pytest.approx(1.367879, abs=1e-6)


def test_log_partition_function_survives_large_energies():
    H = np.diag([1000.0, 1001.0])
    assert log_partition_function(H, 1.0) == pytest.approx(-1000 + np.log(1 + np.exp(-1)))


def test_overflow_rejected():
    with pytest.raises(QThermoError):
        canonical_state(np.diag([0.0, 1.0]), 1e4)


def test_nonpositive_beta_rejected():
    for b in (0.0, -1.0, np.nan):
        with pytest.raises(QThermoError):
            canonical_state(H01, b)


def test_beta_for_energy_examples():
    assert beta_for_energy(H01, 0.268941) == pytest.approx(1.0, abs=1e-5)
    # E = 1/2 - beta/4 + O(beta^3) for the two-level system
    assert beta_for_energy(H01, 0.5 - 1e-6) == pytest.approx(4e-6, rel=1e-4)
    with pytest.raises(QThermoError):
        beta_for_energy(H01, 0.0)
    with pytest.raises(QThermoError):
        beta_for_energy(H01, 0.6)


def test_beta_for_energy_inverts_mean_energy(rng):
    for _ in range(10):
        H = rand.random_hermitian(4, rng, 2.0)
        b = float(rng.uniform(0.1, 5))
        assert beta_for_energy(H, mean_energy(H, b)) == pytest.approx(b, rel=1e-8)


def test_canonical_spec(rng):
    H = rand.random_hermitian(3, rng)
    spec = CanonicalSpec.build(H, 0.5)
    assert spec.Z == pytest.approx(partition_function(H, 0.5))
    assert np.allclose(spec.state(), canonical_state(H, 0.5))


@given(seeds, st.integers(2, 5), st.floats(0.05, 5))
def test_canonical_minimises_free_measure(seed, d, beta):
    rng = np.random.default_rng(seed)
    H = rand.random_hermitian(d, rng, 3.0)
    other = rand.random_density(d, rng)
    can = canonical_state(H, beta)
    lhs = gibbs_measure(other) + beta * expectation(H, other)
    rhs = gibbs_measure(can) + beta * expectation(H, can)
    assert lhs >= rhs - 1e-9
    # rearranged form
    assert gibbs_measure(other) - gibbs_measure(can) >= \
        -beta * (expectation(H, other) - expectation(H, can)) - 1e-9
    # minimum value is -ln Z
    assert rhs == pytest.approx(-log_partition_function(H, beta), abs=1e-10)


@given(seeds, st.floats(0.05, 5))
def test_factorisation_over_subsystems(seed, beta):
    rng = np.random.default_rng(seed)
    H1, H2 = rand.random_hermitian(2, rng), rand.random_hermitian(3, rng)
    H = np.kron(H1, np.eye(3)) + np.kron(np.eye(2), H2)
    joint = canonical_state(H, beta)
    assert np.max(np.abs(joint - np.kron(canonical_state(H1, beta),
                                         canonical_state(H2, beta)))) <= 1e-9


@given(seeds, st.integers(2, 5))
def test_mean_energy_decreasing_in_beta(seed, d):
    rng = np.random.default_rng(seed)
    H = rand.random_hermitian(d, rng, 2.0)
    E = [mean_energy(H, b) for b in np.linspace(0.01, 3, 60)]
    assert np.all(np.diff(E) < 0)
