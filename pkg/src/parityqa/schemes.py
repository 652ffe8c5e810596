"""Embedding schemes for terms that a single array cannot couple locally.

``second_level_encode`` re-encodes a whole first-level array, turning every
coupling into a local field. ``split_scheme2`` distributes the 3- and 4-body
terms over several arrays, each with its own ordering of the logical spins,
and ties the arrays' single-spin rows together ferromagnetically.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .encoding import (DEFAULT_C_OVER_J, SINGLE, Encoding, build_layout, encode_problem,
                       reference_scale)
from .problem import LogicalProblem, Term

EXHAUSTIVE_PERMUTATION_LIMIT = 8
SEAM_FACTOR = 2.0


def second_level_encode(e: Encoding, c_over_j: float | None = None) -> Encoding:
    """Treat every qubit of ``e`` as a logical spin and encode the result again.

    The first-level Hamiltonian (problem plus expanded constraints) has only
    1- and 2-body terms, so the second level realises all of it with local
    fields. The constant of the expansion is carried as ``offset``.
    """
    poly = e.full_zpoly()
    offset = poly.pop((), 0.0)
    terms = [(k, -v) for k, v in poly.items() if v != 0.0]
    lifted = LogicalProblem.from_terms(e.total_qubits, terms)
    enc = encode_problem(lifted, e.c_over_j if c_over_j is None else c_over_j, offset=offset)
    return Encoding(enc.n_logical, enc.qubits, enc.constraints, enc.fields, enc.couplings,
                    enc.c_over_j, enc.scale, enc.offset, enc.term_map, parent=e)


def decode_levels(e: Encoding, spins) -> np.ndarray:
    """Walk single-spin readouts down through every encoding level."""
    out = np.asarray(spins)
    while e is not None:
        out = e.decode_singles(out)
        e = e.parent
    return out


def realizable_masks(n: int) -> dict[int, frozenset[int]]:
    """Position sets (as bitmasks) of 3-/4-body terms that one array couples locally.

    Maps order -> set of masks. A coupling between two non-ancilla qubits in
    the same cell realises the symmetric difference of their labels.
    """
    qubits, constraints = build_layout(n)
    out: dict[int, set[int]] = {3: set(), 4: set()}
    for c in constraints:
        for a, b in itertools.combinations(c.members, 2):
            prod = set(qubits[a].label) ^ set(qubits[b].label)
            if len(prod) in out:
                out[len(prod)].add(sum(1 << p for p in prod))
    return {k: frozenset(v) for k, v in out.items()}


@dataclass(frozen=True)
class Seam:
    array_a: int
    qubit_a: int
    array_b: int
    qubit_b: int
    strength: float  # ferromagnetic: energy -strength * s_a * s_b


@dataclass(frozen=True)
class ArrayPart:
    encoding: Encoding
    permutation: tuple[int, ...]  # permutation[position] = logical index
    terms: tuple[Term, ...]  # in logical indices

    def position_of(self, logical: int) -> int:
        return self.permutation.index(logical)


@dataclass(frozen=True)
class MultiArrayEncoding:
    n_logical: int
    arrays: tuple[ArrayPart, ...]
    seams: tuple[Seam, ...]
    scale: float

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for part in self.arrays:
            out.append(acc)
            acc += part.encoding.total_qubits
        return out

    @property
    def total_qubits(self) -> int:
        return sum(p.encoding.total_qubits for p in self.arrays)

    def encode_logical(self, s) -> np.ndarray:
        s = np.asarray(s)
        return np.concatenate([part.encoding.encode_logical(s[list(part.permutation)])
                               for part in self.arrays])

    def split(self, spins) -> list[np.ndarray]:
        spins = np.asarray(spins)
        return [spins[..., o:o + part.encoding.total_qubits]
                for o, part in zip(self.offsets, self.arrays)]

    def decode_arrays(self, spins) -> list[np.ndarray]:
        """Per-array logical estimate read from each array's single-spin row."""
        out = []
        for part, chunk in zip(self.arrays, self.split(spins)):
            est = np.empty(self.n_logical, dtype=np.int8)
            est[list(part.permutation)] = chunk[: self.n_logical]
            out.append(est)
        return out

    def to_dict(self) -> dict:
        return {
            "n_logical": self.n_logical,
            "constraint_scale": self.scale,
            "arrays": [{"permutation": [i + 1 for i in part.permutation],
                        "terms": [{"qubits": [q + 1 for q in t.qubits], "j": t.j} for t in part.terms],
                        "encoding": part.encoding.to_dict()} for part in self.arrays],
            "seams": [{"array_a": s.array_a, "qubit_a": s.qubit_a, "array_b": s.array_b,
                       "qubit_b": s.qubit_b, "strength": s.strength} for s in self.seams],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classical_multi_energy(m: MultiArrayEncoding, spins) -> np.ndarray | float:
    from .encoding import classical_energy

    chunks = m.split(spins)
    out = sum(classical_energy(part.encoding, chunk) for part, chunk in zip(m.arrays, chunks))
    for seam in m.seams:
        out = out - seam.strength * chunks[seam.array_a][..., seam.qubit_a].astype(float) \
            * chunks[seam.array_b][..., seam.qubit_b]
    return out


def _term_mask(inv: np.ndarray, qubits) -> np.ndarray:
    """Bitmask of the positions holding ``qubits`` under each inverse permutation row."""
    mask = np.zeros(inv.shape[0], dtype=np.int64)
    for q in qubits:
        mask |= np.int64(1) << inv[:, q].astype(np.int64)
    return mask


class _ExhaustiveArray:
    def __init__(self, n: int, masks):
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int8)
        self.perms = perms
        self.inv = np.argsort(perms, axis=1).astype(np.int8)
        self.masks = masks
        self.terms: list[Term] = []

    def try_add(self, t: Term) -> bool:
        ok = np.isin(_term_mask(self.inv, t.qubits), list(self.masks[t.order]))
        if not ok.any():
            return False
        self.perms, self.inv = self.perms[ok], self.inv[ok]
        self.terms.append(t)
        return True

    def permutation(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.perms[0])


class _HillClimbArray:
    def __init__(self, n: int, masks, max_rounds: int = 200):
        self.n = n
        self.masks = masks
        self.perm = list(range(n))
        self.terms: list[Term] = []
        self.max_rounds = max_rounds

    def _score(self, perm, terms) -> int:
        inv = np.argsort(perm)
        return sum(int(sum(1 << int(inv[q]) for q in t.qubits) in self.masks[t.order]) for t in terms)

    def try_add(self, t: Term) -> bool:
        terms = self.terms + [t]
        perm, best = list(self.perm), self._score(self.perm, terms)
        for _ in range(self.max_rounds):
            if best == len(terms):
                break
            move = None
            for a, b in itertools.combinations(range(self.n), 2):
                perm[a], perm[b] = perm[b], perm[a]
                sc = self._score(perm, terms)
                perm[a], perm[b] = perm[b], perm[a]
                if sc > best:
                    best, move = sc, (a, b)
            if move is None:
                break
            perm[move[0]], perm[move[1]] = perm[move[1]], perm[move[0]]
        if best < len(terms):
            return False
        self.perm, self.terms = perm, terms
        return True

    def permutation(self) -> tuple[int, ...]:
        return tuple(self.perm)


def split_scheme2(p: LogicalProblem, c_over_j: float = DEFAULT_C_OVER_J,
                  exhaustive_limit: int = EXHAUSTIVE_PERMUTATION_LIMIT) -> MultiArrayEncoding:
    """Greedy first-fit placement of 3-/4-body terms over permuted arrays."""
    masks = realizable_masks(p.n)
    make = _ExhaustiveArray if p.n <= exhaustive_limit else _HillClimbArray
    arrays = []
    for t in p.terms:
        if t.order < 3:
            continue
        if not any(arr.try_add(t) for arr in arrays):
            arr = make(p.n, masks)
            if not arr.try_add(t):
                raise RuntimeError(f"term {t.qubits} cannot be placed on any array")
            arrays.append(arr)
    low = tuple(t for t in p.terms if t.order < 3)
    if not arrays:
        arrays.append(make(p.n, masks))

    scale = c_over_j * reference_scale(p)
    parts = []
    for k, arr in enumerate(arrays):
        perm = arr.permutation()
        inv = {logical: pos for pos, logical in enumerate(perm)}
        terms = tuple(arr.terms) + (low if k == 0 else ())
        local = LogicalProblem.from_terms(p.n, [([inv[q] for q in t.qubits], t.j) for t in terms])
        enc = encode_problem(local, c_over_j, constraint_scale=scale)
        parts.append(ArrayPart(enc, perm, terms))

    seams = []
    strength = SEAM_FACTOR * scale
    for k in range(len(parts) - 1):
        a, b = parts[k], parts[k + 1]
        for logical in range(p.n):
            seams.append(Seam(k, a.position_of(logical), k + 1, b.position_of(logical), strength))
    return MultiArrayEncoding(p.n, tuple(parts), tuple(seams), scale)


def verify_locality(m: MultiArrayEncoding) -> list[str]:
    """Post-hoc check; returns a description of every violation (empty when valid)."""
    problems = []
    seen: dict[tuple[int, ...], int] = {}
    for k, part in enumerate(m.arrays):
        enc = part.encoding
        for t in part.terms:
            if t.qubits in seen:
                problems.append(f"term {t.qubits} placed in arrays {seen[t.qubits]} and {k}")
            seen[t.qubits] = k
            positions = tuple(sorted(part.position_of(q) for q in t.qubits))
            if t.order < 3:
                continue
            mapped = enc.term_map.get(positions)
            if mapped is None or not enc.couplable(*mapped):
                problems.append(f"term {t.qubits} not locally realised in array {k}")
            elif set(enc.qubits[mapped[0]].label) ^ set(enc.qubits[mapped[1]].label) != set(positions):
                problems.append(f"term {t.qubits} mapped to the wrong qubits in array {k}")
    for s in m.seams:
        qa = m.arrays[s.array_a].encoding.qubits[s.qubit_a]
        qb = m.arrays[s.array_b].encoding.qubits[s.qubit_b]
        la = m.arrays[s.array_a].permutation[qa.label[0]]
        lb = m.arrays[s.array_b].permutation[qb.label[0]]
        if qa.kind != SINGLE or qb.kind != SINGLE or la != lb:
            problems.append(f"seam {s} joins different logical spins")
    return problems
