"""Two-dimensional parity layout and the single-array encoder.

Physical qubits live on the upper triangle of an (N+1) x (N+1) grid. Node
``(a, b)`` with ``0 <= a < b <= N`` stores the product of grid spins ``a``
and ``b``, where grid spin 0 is a fixed +1 reference and grid spin ``k``
is logical spin ``k - 1``. Row 0 therefore holds the single-spin qubits,
every other node a pair qubit.

Constraints:

* plaquette ``{(a,b), (a,b+1), (a+1,b), (a+1,b+1)}`` for ``a + 1 < b``;
  penalty ``C (w + n + e - s - 2 anc)^2``, zero iff the number of -1's is even.
* triangle ``{(a,a+1), (a,a+2), (a+1,a+2)}`` on the hypotenuse;
  penalty ``C (w + n + e - 2 anc - 1)^2``, zero iff the number of +1's is odd.

Energies use the problem sign convention: a field ``h`` on qubit ``q``
contributes ``-h s_q`` and a coupling ``J`` contributes ``-J s_a s_b``.
A Z-polynomial (``dict`` from sorted qubit tuples to coefficients, ``()``
for the constant) uses the plain convention ``E = sum c * prod s``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .problem import LogicalProblem, ProblemError, spin_table

DEFAULT_C_OVER_J = 2.0
CODEWORD_LIMIT = 12

SINGLE, PAIR, ANCILLA = "single", "pair", "ancilla"
PLAQUETTE, TRIANGLE = "plaquette", "triangle"

# per-shape (coefficients over members then ancilla, constant offset) of the squared form
_SHAPE_FORM = {
    PLAQUETTE: ((1, 1, 1, -1, -2), 0),
    TRIANGLE: ((1, 1, 1, -2), -1),
}
_ROLES = {PLAQUETTE: ("w", "n", "e", "s"), TRIANGLE: ("w", "n", "e")}


@dataclass(frozen=True)
class PhysicalQubit:
    id: int
    kind: str
    label: tuple[int, ...]  # logical indices for single/pair, (constraint id,) for ancilla
    position: tuple[int, int]

    @property
    def logical_set(self) -> frozenset[int]:
        return frozenset(self.label) if self.kind != ANCILLA else frozenset()

    def name(self) -> str:
        if self.kind == ANCILLA:
            return f"anc{self.label[0]}"
        return "".join(str(i + 1) for i in self.label) if max(self.label) < 9 else "_".join(
            str(i + 1) for i in self.label)


@dataclass(frozen=True)
class Constraint:
    id: int
    shape: str
    members: tuple[int, ...]  # ordered by role: w, n, e(, s)
    ancilla: int
    scale: float

    @property
    def roles(self) -> tuple[str, ...]:
        return _ROLES[self.shape]

    def coefficients(self) -> tuple[tuple[int, ...], int]:
        return _SHAPE_FORM[self.shape]

    def support(self) -> tuple[int, ...]:
        return self.members + (self.ancilla,)


def build_layout(n: int, scale: float = 1.0) -> tuple[tuple[PhysicalQubit, ...], tuple[Constraint, ...]]:
    """Qubits and constraints of the triangular array for ``n`` logical spins.

    Ids: singles ``0..n-1``, then pairs in lexicographic order, then one
    ancilla per constraint. Positions are doubled grid coordinates so that
    each ancilla sits at the integer centre of its cell.
    """
    if n < 1:
        raise ProblemError("n must be >= 1")
    qubits: list[PhysicalQubit] = []
    node_id: dict[tuple[int, int], int] = {}
    for b in range(1, n + 1):
        node_id[(0, b)] = len(qubits)
        qubits.append(PhysicalQubit(len(qubits), SINGLE, (b - 1,), (0, 2 * b)))
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            node_id[(a, b)] = len(qubits)
            qubits.append(PhysicalQubit(len(qubits), PAIR, (a - 1, b - 1), (2 * a, 2 * b)))

    cells = []
    for a in range(0, n - 1):
        cells.append((TRIANGLE, (node_id[(a, a + 1)], node_id[(a, a + 2)], node_id[(a + 1, a + 2)]),
                      (2 * a + 1, 2 * a + 3)))
    for a in range(0, n):
        for b in range(a + 2, n):
            # w=(a+1,b) n=(a,b) e=(a,b+1) s=(a+1,b+1)
            members = (node_id[(a + 1, b)], node_id[(a, b)], node_id[(a, b + 1)], node_id[(a + 1, b + 1)])
            cells.append((PLAQUETTE, members, (2 * a + 1, 2 * b + 1)))

    constraints = []
    for cid, (shape, members, pos) in enumerate(cells):
        anc = len(qubits)
        qubits.append(PhysicalQubit(anc, ANCILLA, (cid,), pos))
        constraints.append(Constraint(cid, shape, members, anc, scale))
    return tuple(qubits), tuple(constraints)


def physical_count(n: int) -> int:
    return n * (n + 1) // 2


def parity_check_matrix(n: int) -> np.ndarray:
    """GF(2) checks: one row per constraint over the non-ancilla qubits."""
    _, constraints = build_layout(n)
    h = np.zeros((len(constraints), physical_count(n)), dtype=np.uint8)
    for c in constraints:
        h[c.id, list(c.members)] = 1
    return h


def gf2_rank(mat: np.ndarray) -> int:
    m = (np.array(mat, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def codeword(n: int, s) -> np.ndarray:
    """Non-ancilla physical spins induced by logical configuration ``s``."""
    s = np.asarray(s, dtype=np.int8)
    out = [int(s[i]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            out.append(int(s[i] * s[j]))
    return np.array(out, dtype=np.int8)


def enumerate_codewords(n: int) -> np.ndarray:
    """All 2^n codewords, rows in logical basis order."""
    if n > CODEWORD_LIMIT:
        raise ProblemError(f"n={n} exceeds codeword enumeration bound {CODEWORD_LIMIT}")
    table = spin_table(n).astype(np.int8)
    cols = [table[:, i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            cols.append(table[:, i] * table[:, j])
    return np.stack(cols, axis=1)


def constraint_penalty(c: Constraint, member_spins, ancilla_spin: int) -> float:
    coeffs, const = c.coefficients()
    member_spins = list(member_spins)
    if len(member_spins) != len(c.members):
        raise ValueError(f"{c.shape} expects {len(c.members)} member spins, got {len(member_spins)}")
    x = sum(k * v for k, v in zip(coeffs, member_spins + [ancilla_spin])) + const
    return c.scale * x * x


def _member_sum(c: Constraint, spins: np.ndarray) -> np.ndarray:
    """Ancilla-free part ``X + const`` of the squared form, for rows of ``spins``."""
    coeffs, const = c.coefficients()
    x = np.full(spins.shape[:-1], const, dtype=np.int64)
    for k, q in zip(coeffs, c.members):
        x = x + k * spins[..., q].astype(np.int64)
    return x


def best_ancilla(c: Constraint, spins: np.ndarray) -> np.ndarray:
    """Penalty-minimising ancilla value (ties resolved to +1)."""
    x = _member_sum(c, spins)
    return np.where(x >= 0, 1, -1).astype(np.int8)


def min_penalty(c: Constraint, spins: np.ndarray) -> np.ndarray:
    """Penalty minimised over the ancilla: ``C (|X| - 2)^2``."""
    x = np.abs(_member_sum(c, spins))
    return c.scale * (x - 2.0) ** 2


def constraint_zpoly(c: Constraint) -> dict[tuple[int, ...], float]:
    """Expansion of ``C (sum k_i Z_i + k0)^2`` into identity, Z and ZZ terms."""
    coeffs, const = c.coefficients()
    support = c.support()
    poly: dict[tuple[int, ...], float] = {(): c.scale * (sum(k * k for k in coeffs) + const * const)}
    for i, (ki, qi) in enumerate(zip(coeffs, support)):
        if const:
            poly[(qi,)] = poly.get((qi,), 0.0) + 2 * c.scale * const * ki
        for kj, qj in zip(coeffs[i + 1:], support[i + 1:]):
            key = tuple(sorted((qi, qj)))
            poly[key] = poly.get(key, 0.0) + 2 * c.scale * ki * kj
    return poly


@dataclass(frozen=True)
class Encoding:
    n_logical: int
    qubits: tuple[PhysicalQubit, ...]
    constraints: tuple[Constraint, ...]
    fields: dict[int, float]
    couplings: dict[tuple[int, int], float]
    c_over_j: float
    scale: float
    offset: float = 0.0
    term_map: dict[tuple[int, ...], tuple[int, ...]] = field(default_factory=dict)
    parent: Encoding | None = None

    @property
    def total_qubits(self) -> int:
        return len(self.qubits)

    @property
    def n_physical(self) -> int:
        return physical_count(self.n_logical)

    @cached_property
    def neighbours(self) -> dict[int, frozenset[int]]:
        """Couplable partners: qubits sharing a constraint cell."""
        nb: dict[int, set[int]] = {q.id: set() for q in self.qubits}
        for c in self.constraints:
            sup = c.support()
            for a in sup:
                nb[a].update(x for x in sup if x != a)
        return {k: frozenset(v) for k, v in nb.items()}

    def couplable(self, a: int, b: int) -> bool:
        return b in self.neighbours[a]

    def nonlocal_couplings(self) -> list[tuple[int, int]]:
        return [k for k in self.couplings if not self.couplable(*k)]

    def single(self, i: int) -> int:
        return i

    def pair(self, i: int, j: int) -> int:
        if i == j:
            return i
        i, j = min(i, j), max(i, j)
        n = self.n_logical
        return n + i * n - i * (i + 1) // 2 + (j - i - 1)

    def problem_zpoly(self) -> dict[tuple[int, ...], float]:
        poly: dict[tuple[int, ...], float] = {}
        if self.offset:
            poly[()] = self.offset
        for q, h in self.fields.items():
            poly[(q,)] = poly.get((q,), 0.0) - h
        for k, jv in self.couplings.items():
            poly[k] = poly.get(k, 0.0) - jv
        return poly

    def constraints_zpoly(self) -> dict[tuple[int, ...], float]:
        poly: dict[tuple[int, ...], float] = {}
        for c in self.constraints:
            for k, v in constraint_zpoly(c).items():
                poly[k] = poly.get(k, 0.0) + v
        return poly

    def full_zpoly(self) -> dict[tuple[int, ...], float]:
        poly = self.problem_zpoly()
        for k, v in self.constraints_zpoly().items():
            poly[k] = poly.get(k, 0.0) + v
        return poly

    def readout(self, spins) -> np.ndarray:
        """Non-ancilla part of a full physical configuration."""
        return np.asarray(spins)[..., : self.n_physical]

    def decode_singles(self, spins) -> np.ndarray:
        return np.asarray(spins)[..., : self.n_logical]

    def extend(self, phys) -> np.ndarray:
        """Append penalty-minimising ancillas to non-ancilla spins (any leading shape)."""
        phys = np.asarray(phys, dtype=np.int8)
        full = np.zeros(phys.shape[:-1] + (self.total_qubits,), dtype=np.int8)
        full[..., : self.n_physical] = phys
        for c in self.constraints:
            full[..., c.ancilla] = best_ancilla(c, full)
        return full

    def encode_logical(self, s) -> np.ndarray:
        """Full physical configuration (with matched ancillas) for logical ``s``."""
        return self.extend(codeword(self.n_logical, s))

    def to_dict(self) -> dict:
        return {
            "n_logical": self.n_logical,
            "c_over_j": self.c_over_j,
            "constraint_scale": self.scale,
            "offset": self.offset,
            "qubits": [
                {"id": q.id, "kind": q.kind, "label": [i + 1 for i in q.label] if q.kind != ANCILLA
                 else [q.label[0]], "name": q.name(), "position": list(q.position)}
                for q in self.qubits
            ],
            "constraints": [
                {"id": c.id, "shape": c.shape, "members": dict(zip(c.roles, c.members)),
                 "ancilla": c.ancilla, "scale": c.scale}
                for c in self.constraints
            ],
            "fields": [{"qubit": q, "h": self.fields[q]} for q in sorted(self.fields)],
            "couplings": [{"qubits": list(k), "j": self.couplings[k], "local": self.couplable(*k)}
                          for k in sorted(self.couplings)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def reference_scale(p: LogicalProblem) -> float:
    """Energy unit J: the largest coefficient magnitude, or 1 for an empty problem."""
    m = p.max_abs_j
    return m if m > 0 else 1.0


def term_options(qubits: tuple[int, ...]) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Candidate (label, label) splits of a 3- or 4-body term, in preference order."""
    if len(qubits) == 4:
        i, j, k, l = qubits
        return [((i, j), (k, l)), ((i, k), (j, l)), ((i, l), (j, k))]
    if len(qubits) == 3:
        i, j, k = qubits
        return [((i,), (j, k)), ((j,), (i, k)), ((k,), (i, j))]
    raise ValueError("only 3- and 4-body terms need a split")


def encode_problem(p: LogicalProblem, c_over_j: float = DEFAULT_C_OVER_J,
                   constraint_scale: float | None = None, offset: float = 0.0) -> Encoding:
    """Map a logical problem onto one triangular array.

    Orders 1 and 2 become local fields; orders 3 and 4 become a coupling
    between two qubits, using the first split that is couplable on the
    array and the first split otherwise (reported by ``nonlocal_couplings``).
    """
    if c_over_j <= 0:
        raise ValueError("c_over_j must be positive")
    scale = constraint_scale if constraint_scale is not None else c_over_j * reference_scale(p)
    qubits, constraints = build_layout(p.n, scale)
    enc = Encoding(p.n, qubits, constraints, {}, {}, c_over_j, scale, offset)

    def qid(label):
        return enc.pair(label[0], label[-1]) if len(label) == 2 else enc.single(label[0])

    for t in p.terms:
        if t.order <= 2:
            q = qid(t.qubits)
            enc.fields[q] = enc.fields.get(q, 0.0) + t.j
            enc.term_map[t.qubits] = (q,)
            continue
        options = [tuple(sorted((qid(x), qid(y)))) for x, y in term_options(t.qubits)]
        chosen = next((o for o in options if enc.couplable(*o)), options[0])
        enc.couplings[chosen] = enc.couplings.get(chosen, 0.0) + t.j
        enc.term_map[t.qubits] = chosen
    return enc


def classical_energy(e: Encoding, spins) -> np.ndarray | float:
    """Energy of full physical configurations (ancillas included); any leading shape."""
    spins = np.asarray(spins)
    if spins.shape[-1] != e.total_qubits:
        raise ValueError(f"expected {e.total_qubits} spins, got {spins.shape[-1]}")
    s = spins.astype(np.float64)
    out = np.full(s.shape[:-1], e.offset)
    for q, h in e.fields.items():
        out = out - h * s[..., q]
    for (a, b), jv in e.couplings.items():
        out = out - jv * s[..., a] * s[..., b]
    for c in e.constraints:
        coeffs, const = c.coefficients()
        x = np.full(s.shape[:-1], float(const))
        for k, q in zip(coeffs, c.support()):
            x = x + k * s[..., q]
        out = out + c.scale * x * x
    return float(out) if out.ndim == 0 else out


def total_penalty(e: Encoding, spins) -> np.ndarray:
    s = np.asarray(spins)
    out = np.zeros(s.shape[:-1])
    for c in e.constraints:
        coeffs, const = c.coefficients()
        x = np.full(s.shape[:-1], float(const))
        for k, q in zip(coeffs, c.support()):
            x = x + k * s[..., q]
        out = out + c.scale * x * x
    return out


def min_total_penalty(e: Encoding, phys) -> np.ndarray:
    """Constraint penalty of non-ancilla spins with every ancilla chosen optimally."""
    phys = np.asarray(phys, dtype=np.int8)
    out = np.zeros(phys.shape[:-1])
    for c in e.constraints:
        out = out + min_penalty(c, phys)
    return out


def classical_energy_min_ancilla(e: Encoding, phys) -> np.ndarray | float:
    return classical_energy(e, e.extend(phys))


def normalized_ising(e: Encoding) -> tuple[dict[tuple[int, ...], float], float]:
    """Hardware-facing Z-polynomial (constraints merged in) scaled into [-1, 1].

    Returns the scaled polynomial without its constant and the scale factor.
    """
    poly = {k: v for k, v in e.full_zpoly().items() if k}
    factor = max((abs(v) for v in poly.values()), default=1.0) or 1.0
    return {k: v / factor for k, v in poly.items()}, factor
