import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parityqa.encoding import PLAQUETTE, TRIANGLE, classical_energy, constraint_zpoly, encode_problem
from parityqa.meanfield import (BlochAngles, coherent_expectation, coherent_state, constraint_decomposition_check,
                                constraint_parts, evaluate_path, linear_path, mean_field_potential, path_csv,
                                potential_split)
from parityqa.operators import Schedule, assemble_driver, DriverConfig, pauli_z_string
from parityqa.problem import LogicalProblem, random_problem

SCHED = Schedule()


def _random_angles(rng, q):
    return BlochAngles(rng.uniform(0, np.pi, q), rng.uniform(0, 2 * np.pi, q))


def test_all_up_angles_give_all_up_energy(rng):
    e = encode_problem(random_problem(3, rng))
    m = BlochAngles(np.zeros(e.total_qubits), np.zeros(e.total_qubits))
    v = mean_field_potential(e, SCHED, 1.0, m)
    assert v == pytest.approx(classical_energy(e, np.ones(e.total_qubits, dtype=int)), abs=1e-10)


def test_equator_driver_expectation():
    h = {q: 1.0 + q for q in range(4)}
    m = BlochAngles(np.full(4, np.pi / 2), np.zeros(4))
    assert coherent_expectation({}, m, h) == pytest.approx(sum(h.values()))


def test_factorised_matches_state_vector(rng):
    q = 6
    m = _random_angles(rng, q)
    poly = {(0,): 0.3, (1, 4): -0.7, (0, 2, 5): 0.2, (1, 2, 3, 5): 1.1, (): 0.4}
    xf = {k: float(rng.uniform(0.1, 1)) for k in range(q)}
    op = sum((pauli_z_string(q, list(k), c) for k, c in poly.items()), pauli_z_string(q, [], 0.0)).matrix
    op = op + assemble_driver(q, DriverConfig(tuple(xf[k] for k in range(q)))).matrix
    psi = coherent_state(m)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert coherent_expectation(poly, m, xf) == pytest.approx(np.vdot(psi, op @ psi).real, abs=1e-10)


def test_coherent_state_size_bound():
    with pytest.raises(ValueError):
        coherent_state(BlochAngles(np.zeros(13), np.zeros(13)))


def test_expectation_rejects_unknown_qubit():
    with pytest.raises(ValueError):
        coherent_expectation({(3,): 1.0}, BlochAngles(np.zeros(2), np.zeros(2)))


def test_angle_validation():
    with pytest.raises(ValueError):
        BlochAngles(np.array([4.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        BlochAngles(np.array([0.0]), np.array([2 * np.pi]))
    with pytest.raises(ValueError):
        BlochAngles(np.zeros(2), np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 1))
def test_split_sums_to_total_and_v2_non_negative(seed, s):
    rng = np.random.default_rng(seed)
    e = encode_problem(random_problem(3, rng), float(rng.uniform(0.5, 4)))
    m = _random_angles(rng, e.total_qubits)
    v1, v2 = potential_split(e, SCHED, s, m)
    assert v1 + v2 == pytest.approx(mean_field_potential(e, SCHED, s, m), abs=1e-12)
    assert v2 >= 0


def test_v2_zero_on_codeword_vertices(rng):
    e = encode_problem(random_problem(4, rng))
    for s_logical in ([1, 1, 1, 1], [1, -1, -1, 1], [-1, -1, 1, -1]):
        m = BlochAngles.from_spins(e.encode_logical(s_logical))
        assert potential_split(e, SCHED, 0.6, m)[1] == 0.0


def test_v2_zero_at_start_when_modulated(rng):
    e = encode_problem(random_problem(3, rng))
    assert potential_split(e, SCHED, 0.0, _random_angles(rng, e.total_qubits))[1] == 0.0
    unmod = Schedule(modulate_constraints=False)
    assert potential_split(e, unmod, 0.0, _random_angles(rng, e.total_qubits))[1] > 0


def test_v2_matches_term_by_term_expansion(rng):
    e = encode_problem(random_problem(3, rng))
    m = _random_angles(rng, e.total_qubits)
    s = 0.37
    expect = s * sum(coherent_expectation(constraint_zpoly(c), m) for c in e.constraints)
    assert potential_split(e, SCHED, s, m)[1] == pytest.approx(expect, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_vertices_reproduce_classical_energy(seed):
    rng = np.random.default_rng(seed)
    e = encode_problem(random_problem(3, rng))
    spins = rng.choice([-1, 1], size=e.total_qubits)
    v = mean_field_potential(e, SCHED, 1.0, BlochAngles.from_spins(spins))
    assert v == pytest.approx(classical_energy(e, spins), abs=1e-10)


def test_phi_does_not_matter_without_driver(rng):
    e = encode_problem(random_problem(3, rng))
    q = e.total_qubits
    theta = rng.uniform(0, np.pi, q)
    a = mean_field_potential(e, SCHED, 1.0, BlochAngles(theta, np.zeros(q)))
    b = mean_field_potential(e, SCHED, 1.0, BlochAngles(theta, rng.uniform(0, 2 * np.pi, q)))
    assert a == pytest.approx(b, abs=1e-12)


def test_potential_needs_matching_angle_count(rng):
    e = encode_problem(random_problem(2, rng))
    with pytest.raises(ValueError):
        potential_split(e, SCHED, 0.5, BlochAngles(np.zeros(3), np.zeros(3)))
    with pytest.raises(ValueError):
        potential_split(e, SCHED, 1.5, BlochAngles(np.zeros(4), np.zeros(4)))


@pytest.mark.parametrize("scale", [1.0, 3.7])
def test_plaquette_decomposition(scale):
    e = encode_problem(LogicalProblem(4), constraint_scale=scale)
    for c in e.constraints:
        if c.shape == PLAQUETTE:
            assert constraint_decomposition_check(c) < 1e-12 * max(1.0, 64 * scale)


def test_decomposition_rejects_triangle():
    e = encode_problem(LogicalProblem(3))
    tri = next(c for c in e.constraints if c.shape == TRIANGLE)
    with pytest.raises(ValueError):
        constraint_decomposition_check(tri)


def test_only_first_part_touches_ancilla():
    e = encode_problem(LogicalProblem(3), constraint_scale=2.0)
    c = next(x for x in e.constraints if x.shape == PLAQUETTE)
    c1, c2, ident = constraint_parts(c)
    assert all(c.ancilla in k for k in c1)
    assert all(c.ancilla not in k for k in c2)
    assert ident == 16.0
    # C1 = -4C (w + n + e - s) Z_anc
    assert sorted(c1.values()) == [-8.0, -8.0, -8.0, 8.0]


def test_path_evaluation_and_csv(rng):
    e = encode_problem(random_problem(3, rng))
    a = BlochAngles.from_spins(e.encode_logical([1, 1, 1]))
    b = BlochAngles.from_spins(e.encode_logical([-1, 1, 1]))
    rows = evaluate_path(e, SCHED, 1.0, linear_path(a, b, 5))
    assert [r[0] for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert rows[0][1] == pytest.approx(classical_energy(e, e.encode_logical([1, 1, 1])), abs=1e-10)
    assert rows[-1][3] == 0.0 and rows[2][3] > 0
    text = path_csv(rows, {"s": 1.0})
    assert text.splitlines()[1] == "path_param,V,V1,V2"
    assert len(text.splitlines()) == 7
