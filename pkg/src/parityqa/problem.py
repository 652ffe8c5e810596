"""Logical fourth-order spin problems and exhaustive reference solvers.

A problem on ``n`` logical spins is a weighted list of Z-products of order
1 to 4. Its energy on a configuration ``s`` in {+1, -1}^n is

    E(s) = - sum_terms j * prod_{q in term} s[q]

Indices are 0-based in Python and 1-based in every file format.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 4
ENUMERATION_LIMIT = 24


class ProblemError(ValueError):
    """Raised for malformed or inconsistent problem input."""


@dataclass(frozen=True)
class Term:
    qubits: tuple[int, ...]
    j: float

    @property
    def order(self) -> int:
        return len(self.qubits)


@dataclass(frozen=True)
class LogicalProblem:
    n: int
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ProblemError(f"n must be a positive integer, got {self.n!r}")
        seen = set()
        for t in self.terms:
            _check_term(t.qubits, t.j, self.n)
            if t.qubits in seen:
                raise ProblemError(f"duplicate term {_one_based(t.qubits)}")
            seen.add(t.qubits)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[Sequence[int], float]]) -> LogicalProblem:
        """Build a problem from 0-based ``(qubits, j)`` pairs, merging repeats."""
        merged: dict[tuple[int, ...], float] = {}
        for qubits, j in terms:
            q = tuple(int(x) for x in qubits)
            _check_term(q, j, n, sorted_required=False)
            key = tuple(sorted(q))
            merged[key] = merged.get(key, 0.0) + float(j)
        return cls(n, tuple(Term(k, v) for k, v in merged.items()))

    @property
    def max_abs_j(self) -> float:
        return max((abs(t.j) for t in self.terms), default=0.0)

    def orders(self) -> set[int]:
        return {t.order for t in self.terms}


def _one_based(qubits):
    return [q + 1 for q in qubits]


def _check_term(qubits, j, n, sorted_required=True):
    if len(qubits) == 0:
        raise ProblemError("term has no qubits")
    if len(qubits) > MAX_ORDER:
        raise ProblemError(f"term {_one_based(qubits)} has order {len(qubits)} > {MAX_ORDER}")
    if len(set(qubits)) != len(qubits):
        raise ProblemError(f"term {_one_based(qubits)} repeats an index")
    if sorted_required and list(qubits) != sorted(qubits):
        raise ProblemError(f"term {_one_based(qubits)} is not sorted")
    for q in qubits:
        if not 0 <= q < n:
            raise ProblemError(f"term {_one_based(qubits)}: index {q + 1} out of range 1..{n}")
    if not math.isfinite(j):
        raise ProblemError(f"term {_one_based(qubits)} has non-finite coefficient {j}")


def parse_problem(text: str) -> LogicalProblem:
    """Parse the JSON problem format (1-based indices) into a validated problem."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemError("top level must be an object")
    extra = set(doc) - {"n", "terms"}
    if extra:
        raise ProblemError(f"unknown keys: {sorted(extra)}")
    if "n" not in doc or "terms" not in doc:
        raise ProblemError("both 'n' and 'terms' are required")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemError(f"'n' must be a positive integer, got {n!r}")
    if not isinstance(doc["terms"], list):
        raise ProblemError("'terms' must be a list")
    raw = []
    for entry in doc["terms"]:
        if not isinstance(entry, dict):
            raise ProblemError(f"term must be an object, got {entry!r}")
        extra = set(entry) - {"qubits", "j"}
        if extra:
            raise ProblemError(f"unknown term keys: {sorted(extra)}")
        qubits, j = entry.get("qubits"), entry.get("j")
        if not isinstance(qubits, list) or not all(
            isinstance(q, int) and not isinstance(q, bool) for q in qubits
        ):
            raise ProblemError(f"term qubits must be a list of integers, got {qubits!r}")
        if isinstance(j, bool) or not isinstance(j, (int, float)):
            raise ProblemError(f"term coefficient must be a number, got {j!r}")
        raw.append(([q - 1 for q in qubits], float(j)))
    return LogicalProblem.from_terms(n, raw)


def problem_to_json(p: LogicalProblem) -> str:
    terms = [{"qubits": _one_based(t.qubits), "j": t.j} for t in p.terms]
    return json.dumps({"n": p.n, "terms": terms}, indent=2)


def check_spins(s, n: int | None = None) -> np.ndarray:
    arr = np.asarray(s)
    if arr.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected {n} spins, got {arr.shape[0]}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spins must be +1 or -1")
    return arr.astype(np.int8)


def logical_energy(p: LogicalProblem, s) -> float:
    s = check_spins(s, p.n)
    e = 0.0
    for t in p.terms:
        e -= t.j * int(np.prod(s[list(t.qubits)]))
    return e


def spin_table(n: int) -> np.ndarray:
    """All 2^n configurations in basis order (qubit 0 most significant, +1 <-> bit 0)."""
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def index_of(s) -> int:
    """Basis index of a spin configuration under the same convention as spin_table."""
    out = 0
    for v in s:
        out = (out << 1) | (1 if v == -1 else 0)
    return out


def all_energies(p: LogicalProblem) -> np.ndarray:
    """Energies of every configuration, in basis order."""
    if p.n > ENUMERATION_LIMIT:
        raise ProblemError(f"n={p.n} exceeds enumeration bound {ENUMERATION_LIMIT}")
    table = spin_table(p.n)
    e = np.zeros(table.shape[0])
    for t in p.terms:
        e -= t.j * np.prod(table[:, list(t.qubits)], axis=1)
    return e


def brute_force_spectrum(p: LogicalProblem) -> list[tuple[float, tuple[int, ...]]]:
    """Every configuration with its energy, ascending; ties keep basis order."""
    e = all_energies(p)
    order = np.argsort(e, kind="stable")
    table = spin_table(p.n)
    return [(float(e[i]), tuple(int(v) for v in table[i])) for i in order]


def ground_state(p: LogicalProblem) -> tuple[float, tuple[int, ...]]:
    return brute_force_spectrum(p)[0]


def random_problem(n: int, rng: np.random.Generator, orders=(1, 2, 3, 4), scale: float = 1.0) -> LogicalProblem:
    """Dense random instance: every index set of the given orders, j ~ U[-scale, scale]."""
    terms = []
    for k in orders:
        for qubits in itertools.combinations(range(n), k):
            terms.append(Term(qubits, float(rng.uniform(-scale, scale))))
    return LogicalProblem(n, tuple(terms))
