import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from parityqa.encoding import PLAQUETTE, classical_energy, constraint_zpoly, encode_problem
from parityqa.meanfield import constraint_parts
from parityqa.operators import (DriverConfig, Schedule, SparseOperator, assemble_constraints, assemble_driver,
                                assemble_executable, assemble_logical, assemble_problem_part, diagonal_operator,
                                executable_sweep, logical_sweep, pauli_z_string, sweep_operator, zpoly_diagonal)
from parityqa.problem import LogicalProblem, ProblemError, Term, all_energies, logical_energy, random_problem

from conftest import all_spin_rows


def test_pauli_z_examples():
    assert pauli_z_string(1, [0], 1.0).diagonal().tolist() == [1, -1]
    assert pauli_z_string(2, [0, 1], -1.0).diagonal().tolist() == [-1, 1, 1, -1]


def test_pauli_z_matches_popcount():
    d = pauli_z_string(4, [0, 1, 2, 3]).diagonal()
    expect = [(-1) ** bin(b).count("1") for b in range(16)]
    assert d.tolist() == expect
    d = pauli_z_string(4, [1]).diagonal()
    assert d.tolist() == [1 - 2 * ((b >> 2) & 1) for b in range(16)]


def test_pauli_z_rejects_bad_support():
    with pytest.raises(ValueError):
        pauli_z_string(2, [2])
    with pytest.raises(ValueError):
        pauli_z_string(2, [0, 0])


def test_logical_quartic_eigenvalues():
    d = assemble_logical(LogicalProblem(4, (Term((0, 1, 2, 3), 1.0),))).diagonal()
    assert sorted(d.tolist()) == [-1.0] * 8 + [1.0] * 8


def test_logical_empty_is_zero():
    op = assemble_logical(LogicalProblem(3))
    assert np.all(op.diagonal() == 0) and op.is_diagonal()


def test_logical_diagonal_matches_energies(rng):
    p = random_problem(4, rng)
    d = assemble_logical(p).diagonal()
    for b, s in enumerate(all_spin_rows(4)):
        assert d[b] == pytest.approx(logical_energy(p, s), abs=1e-12)
    assert np.allclose(d, all_energies(p))


def test_logical_size_bound():
    with pytest.raises(ProblemError):
        assemble_logical(LogicalProblem(15))
    with pytest.raises(ProblemError):
        logical_sweep(LogicalProblem(15))


def test_executable_diagonal_is_classical_energy(rng):
    for n in (2, 3):
        e = encode_problem(random_problem(n, rng))
        d = assemble_executable(e).diagonal()
        assert np.allclose(d, classical_energy(e, all_spin_rows(e.total_qubits)), atol=1e-12)


def test_executable_diagonal_sampled_n4(rng):
    e = encode_problem(random_problem(4, rng))
    d = assemble_executable(e).diagonal()
    idx = rng.choice(d.shape[0], size=200, replace=False)
    rows = all_spin_rows(e.total_qubits)[idx]
    assert np.allclose(d[idx], classical_energy(e, rows), atol=1e-12)


def test_n2_no_terms_ground_degeneracy():
    e = encode_problem(LogicalProblem(2), constraint_scale=1.0)
    d = assemble_executable(e).diagonal()
    assert d.min() == 0 and np.sum(d == 0) == 4


def test_n3_lowest_levels_match_logical(rng):
    p = random_problem(3, rng)
    d = np.sort(assemble_executable(encode_problem(p)).diagonal())
    assert np.allclose(d[:8], np.sort(all_energies(p)), atol=1e-12)


def test_plaquette_operator_identity():
    e = encode_problem(LogicalProblem(3), constraint_scale=1.0)
    c = next(x for x in e.constraints if x.shape == PLAQUETTE)
    q = e.total_qubits
    c1, c2, ident = constraint_parts(c)
    rhs = zpoly_diagonal(q, c1) + zpoly_diagonal(q, c2) + ident
    lhs = zpoly_diagonal(q, constraint_zpoly(c))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_problem_operators_are_diagonal_and_constraints_psd(rng):
    e = encode_problem(random_problem(3, rng))
    for op in (assemble_problem_part(e), assemble_constraints(e)):
        assert op.is_diagonal() and op.is_hermitian()
    assert assemble_constraints(e).diagonal().min() >= -1e-12


def test_executable_size_bound():
    e = encode_problem(LogicalProblem(5))
    with pytest.raises(ProblemError):
        assemble_executable(e)
    with pytest.raises(ProblemError):
        executable_sweep(e)


def test_driver_single_qubit():
    assert assemble_driver(1, DriverConfig((1.0,))).matrix.toarray().tolist() == [[0, 1], [1, 0]]


def test_driver_two_qubits_spectrum():
    w = np.linalg.eigvalsh(assemble_driver(2, DriverConfig((1.0, 1.0))).matrix.toarray())
    assert np.allclose(w, [-2, 0, 0, 2])


def test_driver_spectrum_is_signed_sums(rng):
    h = rng.uniform(0.2, 2.0, size=3)
    w = np.linalg.eigvalsh(assemble_driver(3, DriverConfig(tuple(h))).matrix.toarray())
    expect = sorted(sum(sg * hv for sg, hv in zip(signs, h)) for signs in itertools.product((1, -1), repeat=3))
    assert np.allclose(w, expect)


def test_driver_matches_kron_construction(rng):
    h = rng.uniform(0.1, 1.0, size=4)
    x = np.array([[0, 1], [1, 0]])
    dense = sum(hv * np.kron(np.kron(np.eye(2 ** k), x), np.eye(2 ** (3 - k))) for k, hv in enumerate(h))
    assert np.allclose(assemble_driver(4, DriverConfig(tuple(h))).matrix.toarray(), dense)


def test_driver_is_off_diagonal_and_hermitian():
    d = assemble_driver(3, DriverConfig.uniform(3))
    assert np.all(d.diagonal() == 0) and d.is_hermitian()
    with pytest.raises(ValueError):
        assemble_driver(3, DriverConfig.uniform(2))
    with pytest.raises(ValueError):
        DriverConfig((float("nan"),))


def test_schedule_endpoints_validated():
    Schedule()
    with pytest.raises(ValueError):
        Schedule(alpha=lambda s: 1 - s * s / 2)
    with pytest.raises(ValueError):
        Schedule(total_time=0)


def test_sweep_operator_linear_schedule(rng):
    e = encode_problem(random_problem(2, rng))
    q = e.total_qubits
    drv = assemble_driver(q, DriverConfig.uniform(q))
    prob, cons = assemble_problem_part(e), assemble_constraints(e)
    sched = Schedule()
    assert (sweep_operator(drv, prob, cons, sched, 0.0).matrix != drv.matrix).nnz == 0
    end = sweep_operator(drv, prob, cons, sched, 1.0).matrix.toarray()
    assert np.allclose(end, (prob.matrix + cons.matrix).toarray(), atol=0)
    mid = sweep_operator(drv, prob, cons, sched, 0.5).matrix.toarray()
    assert np.allclose(mid, 0.5 * (drv.matrix + prob.matrix + cons.matrix).toarray(), atol=0)
    unmod = Schedule(modulate_constraints=False)
    mid = sweep_operator(drv, prob, cons, unmod, 0.5).matrix.toarray()
    assert np.allclose(mid, (0.5 * drv.matrix + 0.5 * prob.matrix + cons.matrix).toarray(), atol=0)
    with pytest.raises(ValueError):
        sweep_operator(drv, prob, cons, sched, 1.5)
    with pytest.raises(ValueError):
        sweep_operator(assemble_driver(2, DriverConfig.uniform(2)), prob, cons, sched, 0.5)


def test_sweep_hamiltonian_hermitian(rng):
    sw = executable_sweep(encode_problem(random_problem(3, rng)))
    for s in (0.0, 0.3, 1.0):
        assert sw.at(s).is_hermitian()
        assert np.allclose(sw.at(s).diagonal(), sw.diagonal_at(s))


def test_sparse_operator_algebra_and_dump():
    a = diagonal_operator([1.0, 2.0], 1)
    b = SparseOperator(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])), 1)
    c = (a + 2 * b)
    assert c.matrix.toarray().tolist() == [[1, 2], [2, 2]]
    assert c.to_coo_text().splitlines()[0] == "0 0 1.0"
    with pytest.raises(ValueError):
        a + diagonal_operator([1.0] * 4, 2)
    with pytest.raises(ValueError):
        SparseOperator(sp.csr_matrix((3, 3)), 1)
    assert not SparseOperator(sp.csr_matrix(np.array([[0, 1j], [1j, 0]])), 1).is_hermitian()
