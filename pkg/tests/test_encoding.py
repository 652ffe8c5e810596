import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parityqa.encoding import (ANCILLA, PAIR, PLAQUETTE, SINGLE, TRIANGLE, build_layout, classical_energy,
                               classical_energy_min_ancilla, codeword, constraint_penalty, encode_problem,
                               enumerate_codewords, gf2_rank, min_penalty, min_total_penalty,
                               normalized_ising, parity_check_matrix, physical_count, total_penalty)
from parityqa.problem import LogicalProblem, ProblemError, Term, ground_state, logical_energy, random_problem

from conftest import all_spin_rows


def _labels(qubits, ids):
    return [qubits[i].label for i in ids]


@pytest.mark.parametrize("n,phys,anc", [(1, 1, 0), (2, 3, 1), (3, 6, 3), (4, 10, 6), (5, 15, 10)])
def test_layout_counts(n, phys, anc):
    qubits, constraints = build_layout(n)
    kinds = [q.kind for q in qubits]
    assert kinds.count(SINGLE) + kinds.count(PAIR) == phys == physical_count(n)
    assert kinds.count(ANCILLA) == anc == len(constraints) == n * (n - 1) // 2
    assert len(qubits) == n * n
    assert [q.id for q in qubits] == list(range(n * n))
    assert len({q.position for q in qubits}) == len(qubits)


def test_layout_one_qubit_per_label():
    qubits, _ = build_layout(5)
    labels = [q.label for q in qubits if q.kind != ANCILLA]
    expected = [(i,) for i in range(5)] + list(itertools.combinations(range(5), 2))
    assert labels == expected


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_constraints_close_parity_loops(n):
    qubits, constraints = build_layout(n)
    for c in constraints:
        counts = {}
        for label in _labels(qubits, c.members):
            for i in label:
                counts[i] = counts.get(i, 0) + 1
        assert all(v % 2 == 0 for v in counts.values())
        assert len(c.members) == (4 if c.shape == PLAQUETTE else 3)
        assert qubits[c.ancilla].kind == ANCILLA


def test_triangles_sit_on_hypotenuse():
    qubits, constraints = build_layout(4)
    tri = [c for c in constraints if c.shape == TRIANGLE]
    assert len(tri) == 3
    # the first triangle joins the two leading singles with their pair
    assert sorted(_labels(qubits, tri[0].members)) == [(0,), (0, 1), (1,)]


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_parity_check_rank_by_counting_codewords(n):
    # independent of the elimination routine: count zero-syndrome vectors
    h = parity_check_matrix(n)
    m = physical_count(n)
    bits = (all_spin_rows(m) < 0).astype(np.int64)
    zero_syndrome = int(np.sum(np.all((bits @ h.T) % 2 == 0, axis=1)))
    assert zero_syndrome == 2 ** n
    assert gf2_rank(h) == m - n


def test_gf2_rank_small_cases():
    assert gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    assert gf2_rank(np.eye(4, dtype=np.uint8)) == 4
    assert gf2_rank(np.zeros((2, 3), dtype=np.uint8)) == 0


def test_codewords_n2():
    cw = {tuple(r) for r in enumerate_codewords(2)}
    assert cw == {(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)}


def test_codewords_n3_triangle_product():
    for r in enumerate_codewords(3):
        s12, s13, s23 = r[3], r[4], r[5]
        assert s12 * s23 * s13 == 1
    assert len(enumerate_codewords(3)) == 8


def test_codeword_bound():
    with pytest.raises(ProblemError):
        enumerate_codewords(13)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_codewords_have_zero_penalty_with_some_ancilla(n):
    # brute force over ancilla values rather than the closed-form minimiser
    e = encode_problem(LogicalProblem(n))
    anc = all_spin_rows(e.total_qubits - e.n_physical)
    for cw in enumerate_codewords(n):
        full = np.concatenate([np.tile(cw, (anc.shape[0], 1)), anc], axis=1)
        pen = total_penalty(e, full)
        assert pen.min() == 0
        assert np.sum(pen == 0) == 1  # the zero-penalty ancilla assignment is unique


def test_penalty_examples():
    _, constraints = build_layout(3)
    plaq = next(c for c in constraints if c.shape == PLAQUETTE)
    tri = next(c for c in constraints if c.shape == TRIANGLE)
    assert constraint_penalty(plaq, [1, 1, 1, 1], 1) == 0
    assert min(constraint_penalty(plaq, [-1, 1, 1, 1], a) for a in (1, -1)) == 4
    assert constraint_penalty(tri, [1, 1, 1], 1) == 0
    with pytest.raises(ValueError):
        constraint_penalty(tri, [1, 1, 1, 1], 1)


@pytest.mark.parametrize("shape_index", [0, 1])
def test_min_penalty_matches_brute_force_over_ancilla(shape_index):
    _, constraints = build_layout(3)
    c = [next(x for x in constraints if x.shape == s) for s in (TRIANGLE, PLAQUETTE)][shape_index]
    m = 6
    for row in all_spin_rows(m):
        members = [row[q] for q in c.members]
        expect = min(constraint_penalty(c, members, a) for a in (1, -1))
        assert min_penalty(c, row[None, :])[0] == expect
        # zero exactly for even parity (plaquette) / odd number of +1 (triangle)
        if c.shape == PLAQUETTE:
            assert (expect == 0) == (sum(v < 0 for v in members) % 2 == 0)
        else:
            assert (expect == 0) == (sum(v > 0 for v in members) % 2 == 1)


def test_quartic_term_maps_to_local_pair_coupling():
    e = encode_problem(LogicalProblem(4, (Term((0, 1, 2, 3), 1.0),)))
    (a, b), = e.couplings
    labels = {e.qubits[a].label, e.qubits[b].label}
    assert labels in ({(0, 1), (2, 3)}, {(0, 2), (1, 3)}, {(0, 3), (1, 2)})
    assert e.couplable(a, b)
    assert labels == {(0, 2), (1, 3)}  # the diagonal 13-24 of the shared plaquette
    assert e.couplings[(a, b)] == 1.0
    assert not e.fields


def test_field_terms():
    e = encode_problem(LogicalProblem(3, (Term((1,), 0.3), Term((0, 2), -0.2))))
    assert e.fields == {e.single(1): 0.3, e.pair(0, 2): -0.2}
    assert not e.couplings


def test_cubic_term_uses_single_and_pair():
    e = encode_problem(LogicalProblem(3, (Term((0, 1, 2), 0.5),)))
    (a, b), = e.couplings
    kinds = sorted(e.qubits[q].kind for q in (a, b))
    assert kinds == [PAIR, SINGLE]
    assert set(e.qubits[a].label) ^ set(e.qubits[b].label) == {0, 1, 2}


def test_encoding_invariants(rng):
    p = random_problem(5, rng)
    e = encode_problem(p)
    assert e.scale == pytest.approx(2.0 * p.max_abs_j)
    assert all(a != b for a, b in e.couplings)
    assert set(e.term_map) == {t.qubits for t in p.terms}
    # each term's representative realises exactly that product on codewords
    for t in p.terms:
        rep = e.term_map[t.qubits]
        labels = [set(e.qubits[q].label) for q in rep]
        sym = labels[0] if len(labels) == 1 else labels[0] ^ labels[1]
        assert sym == set(t.qubits)


def test_empty_problem_scale_is_c_over_j():
    e = encode_problem(LogicalProblem(3), c_over_j=2.5)
    assert e.scale == 2.5


def test_c_over_j_must_be_positive():
    with pytest.raises(ValueError):
        encode_problem(LogicalProblem(2), c_over_j=0.0)


def test_all_up_codeword_energy_zero():
    e = encode_problem(LogicalProblem(4))
    assert classical_energy(e, e.encode_logical([1, 1, 1, 1])) == 0.0


def test_classical_energy_length_mismatch():
    e = encode_problem(LogicalProblem(2))
    with pytest.raises(ValueError):
        classical_energy(e, [1, 1, 1])


def test_n3_ground_state_decodes(rng):
    for _ in range(5):
        p = random_problem(3, rng)
        e = encode_problem(p)
        configs = all_spin_rows(e.total_qubits)
        energies = classical_energy(e, configs)
        best = configs[np.argmin(energies)]
        e0, s0 = ground_state(p)
        assert energies.min() == pytest.approx(e0, abs=1e-12)
        assert tuple(e.decode_singles(best)) == s0


def test_non_codewords_pay_the_penalty(rng):
    p = random_problem(3, rng)
    e = encode_problem(p)
    phys = all_spin_rows(e.n_physical)
    cw = {tuple(r) for r in enumerate_codewords(3)}
    outside = np.array([r for r in phys if tuple(r) not in cw])
    spread = sum(abs(t.j) for t in p.terms)
    energies = classical_energy_min_ancilla(e, outside)
    assert energies.min() >= 4 * e.scale - spread - 1e-12
    assert np.all(min_total_penalty(e, outside) >= 4 * e.scale)


@pytest.mark.parametrize("quad", list(itertools.combinations(range(5), 4)))
def test_pairing_equivalence_on_codewords(quad):
    i, j, k, l = quad
    n = 5
    col = {}
    c = n
    for a in range(n):
        for b in range(a + 1, n):
            col[(a, b)] = c
            c += 1
    cws = enumerate_codewords(n).astype(int)
    p1 = cws[:, col[(i, j)]] * cws[:, col[(k, l)]]
    p2 = cws[:, col[(i, k)]] * cws[:, col[(j, l)]]
    p3 = cws[:, col[(i, l)]] * cws[:, col[(j, k)]]
    assert np.array_equal(p1, p2) and np.array_equal(p2, p3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_codeword_energy_equals_logical_energy(seed, n):
    rng = np.random.default_rng(seed)
    p = random_problem(n, rng)
    e = encode_problem(p, c_over_j=float(rng.uniform(0.5, 4)))
    s = rng.choice([-1, 1], size=n)
    assert classical_energy(e, e.encode_logical(s)) == pytest.approx(logical_energy(p, s), abs=1e-12)
    assert codeword(n, s)[:n].tolist() == list(s)


def test_to_json_deterministic_and_one_based(rng):
    p = random_problem(3, rng)
    a, b = encode_problem(p).to_json(), encode_problem(p).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["qubits"][0]["label"] == [1]
    assert {"fields", "couplings", "constraints", "constraint_scale", "c_over_j"} <= set(doc)


def test_normalized_ising_range(rng):
    e = encode_problem(random_problem(4, rng))
    poly, factor = normalized_ising(e)
    vals = np.array(list(poly.values()))
    assert np.max(np.abs(vals)) == pytest.approx(1.0)
    assert factor > 0
