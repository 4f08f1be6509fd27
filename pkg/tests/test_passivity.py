import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import unitary_group

from qthermo import rand
from qthermo.canonical import canonical_state
from qthermo.errors import BudgetExceededError
from qthermo.linalg import expectation, kron_sum, tensor
from qthermo.passivity import (LevelSystem, check_ratio_law, compositions, ergotropy,
                               extraction_report, extraction_schedule, is_completely_passive,
                               is_n_passive, is_passive, min_failing_n, passive_form,
                               ratio_law_residual, same_temperature_necessary,
                               triple_violation)
from qthermo.schedule import propagate

seeds = st.integers(0, 2**32 - 1)
H01 = np.diag([0.0, 1.0])
SWAP_EXAMPLE = LevelSystem([1.0, 3.0, 4.0], [1 / 2, 1 / 3, 1 / 6])
VARIANT = LevelSystem([1.0, 2.0, 4.0], [1 / 2, 1 / 3, 1 / 6])


def permutation_minimum(rho, H):
    """Lowest energy reachable by assigning the eigenvalues of ``rho`` to energy levels."""
    lam = np.linalg.eigvalsh(rho)
    E = np.linalg.eigvalsh(H)
    return min(float(np.dot(lam[list(p)], E)) for p in itertools.permutations(range(len(E))))


def random_pair(rng, d):
    return rand.random_density(d, rng), rand.random_hermitian(d, rng, 3.0)


# --- passive form and ergotropy ----------------------------------------------------

def test_qubit_example():
    form = passive_form(np.diag([0.3, 0.7]), H01)
    assert np.allclose(form.passive_state, np.diag([0.7, 0.3]))
    assert form.ergotropy == pytest.approx(0.4, abs=1e-12)


def test_excited_state_relaxes_to_ground():
    form = passive_form(np.diag([0.0, 1.0]), H01)
    assert np.allclose(form.passive_state, np.diag([1.0, 0.0]))
    assert form.ergotropy == pytest.approx(1.0)


def test_canonical_state_is_its_own_passive_form(rng):
    H = rand.random_hermitian(4, rng)
    can = canonical_state(H, 1.3)
    form = passive_form(can, H)
    assert np.allclose(form.passive_state, can, atol=1e-12)
    assert abs(form.ergotropy) <= 1e-12


def test_zero_ergotropy_cases(rng):
    assert abs(ergotropy(np.eye(3) / 3, rand.random_hermitian(3, rng))) <= 1e-12
    single = np.diag(SWAP_EXAMPLE.probs)
    assert abs(ergotropy(single, np.diag(SWAP_EXAMPLE.energies))) <= 1e-12


def test_ergotropy_matches_permutation_oracle_d3(rng):
    for _ in range(30):
        rho, H = random_pair(rng, 3)
        assert ergotropy(rho, H) == pytest.approx(expectation(H, rho) - permutation_minimum(rho, H),
                                                  abs=1e-10)


@given(seeds, st.integers(2, 4))
def test_ergotropy_non_negative_and_passive_state_passive(seed, d):
    rng = np.random.default_rng(seed)
    rho, H = random_pair(rng, d)
    form = passive_form(rho, H)
    assert form.ergotropy >= -1e-9
    assert is_passive(form.passive_state, H)


def test_random_unitaries_never_beat_passive_energy(rng):
    rho, H = random_pair(rng, 3)
    floor = expectation(H, passive_form(rho, H).passive_state)
    Us = unitary_group.rvs(3, size=10_000, random_state=rng)
    finals = np.einsum("nij,jk,nlk,li->n", Us, rho, Us.conj(), H).real
    assert finals.min() >= floor - 1e-9


def test_degenerate_ergotropy_is_basis_independent(rng):
    E = np.array([0.0, 1.0, 1.0, 2.0])
    rho = rand.random_density(4, rng)
    U = rand.random_unitary(4, rng)
    values = []
    for _ in range(10):
        W = np.eye(4, dtype=complex)
        W[1:3, 1:3] = rand.random_unitary(2, rng)
        basis = U @ W
        H = (basis * E) @ basis.conj().T
        values.append(ergotropy(rho, H))
    assert np.ptp(values) <= 1e-10


# --- strict and weak passivity ----------------------------------------------------

def test_is_passive_examples():
    assert is_passive(np.diag([0.7, 0.3]), H01)
    assert not is_passive(np.diag([0.3, 0.7]), H01)
    assert not is_passive(np.full((2, 2), 0.5), H01)
    H = np.diag([0.0, 1.0, 1.0])
    assert is_passive(np.diag([0.6, 0.2, 0.2]), H)
    assert not is_passive(np.diag([0.6, 0.3, 0.1]), H)
    assert is_passive(np.diag([0.6, 0.3, 0.1]), H, strict=False)


# --- extraction schedules ---------------------------------------------------------

def test_piecewise_extraction_qubit():
    for steps in (3, 30, 300):
        rep = extraction_report(np.diag([0.3, 0.7]), H01, 1.0, "piecewise", steps)
        assert rep["work"] == pytest.approx(0.4, abs=1e-9)
        assert rep["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_passive_state_extracts_nothing(rng):
    H = rand.random_hermitian(3, rng)
    rep = extraction_report(canonical_state(H, 0.9), H, 2.0, "piecewise", 30)
    assert abs(rep["work"]) <= 1e-9


@given(seeds, st.integers(2, 4), st.floats(0.3, 5))
def test_piecewise_extraction_is_exact(seed, d, tau):
    rng = np.random.default_rng(seed)
    rho, H = random_pair(rng, d)
    rep = extraction_report(rho, H, tau, "piecewise", 30)
    assert rep["work"] == pytest.approx(rep["ergotropy"], abs=1e-9)


def test_schedule_returns_to_h0(rng):
    rho, H = random_pair(rng, 3)
    for mode in ("piecewise", "formula"):
        s = extraction_schedule(rho, H, 1.5, mode)
        assert np.allclose(s.at(0.0), H) and np.allclose(s.at(1.5), H)


def test_formula_mode_reports_work_and_fidelity():
    rows = [extraction_report(np.diag([0.3, 0.7]), H01, 1.0, "formula", n) for n in (100, 1000)]
    for r in rows:
        assert 0 < r["work"] <= 0.4 + 1e-9
        assert 0 < r["fidelity"] <= 1 + 1e-12
    assert abs(rows[0]["work"] - rows[1]["work"]) < 1e-5


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        extraction_schedule(np.diag([0.3, 0.7]), H01, 1.0, "nope")


# --- N-passivity -----------------------------------------------------------------

def test_three_level_swap_example():
    assert is_n_passive(SWAP_EXAMPLE, 1)
    two = is_n_passive(SWAP_EXAMPLE, 2)
    assert not two
    assert two.witness == ((1, 0, 1), (0, 2, 0))


def test_swap_gain_is_one_36th():
    p, E = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)], [1, 3, 4]
    gain = (p[1] ** 2 - p[0] * p[2]) * ((E[1] + E[1]) - (E[0] + E[2]))
    assert gain == Fraction(1, 36)
    rho = np.diag(SWAP_EXAMPLE.probs)
    H = np.diag(SWAP_EXAMPLE.energies)
    two_copy = ergotropy(tensor(rho, rho), kron_sum(H, H))
    assert two_copy == pytest.approx(float(gain), abs=1e-12)


def test_variant_is_two_passive():
    assert is_n_passive(VARIANT, 2)


@pytest.mark.parametrize("E", [[0.0, 1.0, 2.0], [0.0, 0.3, 1.7], [1.0, 3.0, 4.0], [0.0, 1.0, 1.0]])
def test_canonical_is_n_passive(E):
    sys = LevelSystem.canonical(E, 0.8)
    for N in range(1, 6):
        assert is_n_passive(sys, N)


def test_min_failing_n_examples():
    m = min_failing_n(SWAP_EXAMPLE, 6)
    assert (m.brute_force, m.predicted) == (2, 2)
    v = min_failing_n(VARIANT, 12)
    assert v.brute_force == v.predicted == 3
    c = min_failing_n(LevelSystem.canonical([0.0, 1.0, 3.0], 1.0), 6)
    assert c.brute_force is None and c.predicted is None


def test_min_failing_n_requires_one_passivity():
    with pytest.raises(ValueError):
        min_failing_n(LevelSystem([0.0, 1.0], [0.3, 0.7]), 3)


def test_budget_guard():
    sys = LevelSystem.canonical(np.arange(8.0), 1.0)
    with pytest.raises(BudgetExceededError):
        is_n_passive(sys, 30, max_compositions=1000)


def test_compositions_count():
    assert compositions(4, 3).shape == (15, 3)
    assert np.all(compositions(4, 3).sum(axis=1) == 4)


def tensor_power_oracle(sys, N):
    p = np.ones(1)
    E = np.zeros(1)
    for _ in range(N):
        p = np.kron(p, sys.probs)
        E = (E[:, None] + sys.energies[None, :]).ravel()
    return is_passive(np.diag(p), np.diag(E))


@st.composite
def passive_systems(draw, d=3, integer_energies=False):
    seed = draw(seeds)
    rng = np.random.default_rng(seed)
    if integer_energies:
        E = np.sort(rng.integers(0, 5, size=d)).astype(float)
    else:
        E = np.sort(rng.uniform(0, 3, size=d))
    p = np.sort(rng.dirichlet(np.ones(d)))[::-1]
    p = p / p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return LevelSystem(E, p)


@given(passive_systems(),
       st.integers(1, 4))
def test_n_passivity_matches_tensor_power(sys, N):
    assert bool(is_n_passive(sys, N)) == tensor_power_oracle(sys, N)


@given(passive_systems(integer_energies=True), st.integers(1, 4))
def test_n_passivity_matches_tensor_power_with_degeneracies(sys, N):
    assert bool(is_n_passive(sys, N)) == tensor_power_oracle(sys, N)


@given(passive_systems(), st.integers(1, 25))
def test_triple_test_is_exact_for_three_levels(sys, N):
    # a violation at n carries over to every larger N by padding both patterns
    # with the same copies, so the criterion is cumulative in N
    if is_n_passive(sys, 1):
        predicted_fail = any(triple_violation(sys, n) is not None for n in range(1, N + 1))
        assert predicted_fail == (not is_n_passive(sys, N))


# --- complete passivity, joint passivity, ratio law -------------------------------

def test_complete_passivity_examples():
    can = is_completely_passive(LevelSystem.canonical([0.0, 1.0, 2.0], 1.0))
    assert can and can.beta == pytest.approx(1.0, abs=1e-12)
    assert not is_completely_passive(SWAP_EXAMPLE)
    assert is_completely_passive(LevelSystem([0.0, 2.0], [0.9, 0.1]))


def test_same_temperature_examples(rng):
    for _ in range(50):
        H1, H2 = rand.random_hermitian(2, rng, 2), rand.random_hermitian(3, rng, 2)
        assert same_temperature_necessary(canonical_state(H1, 0.7), H1,
                                          canonical_state(H2, 0.7), H2)
    assert not same_temperature_necessary(canonical_state(H01, 1.0), H01,
                                          canonical_state(H01, 2.0), H01)
    ground = np.diag([1.0, 0.0])
    assert not same_temperature_necessary(np.diag([0.8, 0.2]), H01, ground, H01)
    assert same_temperature_necessary(ground, H01, ground, H01)


def test_ratio_law():
    assert check_ratio_law(0.7, [1.0, 2.0])
    assert check_ratio_law(1.3, [0.0])
    with pytest.raises(ValueError):
        check_ratio_law(0.0, [1.0])


def test_canonical_probabilities_obey_ratio_law(rng):
    for _ in range(10):
        E = np.sort(rng.uniform(0, 3, size=4))
        beta = float(rng.uniform(0.1, 3))
        p = np.diag(canonical_state(np.diag(E), beta)).real
        assert ratio_law_residual(p, E, beta) <= 1e-12
