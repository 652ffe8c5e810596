"""Sparse operators for the logical and executable annealing Hamiltonians.

Basis convention: qubit 0 is the most significant bit of the basis index and
spin +1 corresponds to bit 0, so ``Z_k |b> = (1 - 2 bit_k(b)) |b>``.
Units: hbar = 1, energies in J, time in 1/J.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .encoding import Encoding
from .problem import LogicalProblem, ProblemError

LOGICAL_LIMIT = 14
EXECUTABLE_LIMIT = 20


@dataclass(frozen=True)
class SparseOperator:
    matrix: sp.csr_matrix
    qubit_count: int

    def __post_init__(self):
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {self.qubit_count} qubits")

    @property
    def dim(self) -> int:
        return 1 << self.qubit_count

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def is_diagonal(self) -> bool:
        m = self.matrix.tocoo()
        return bool(np.all((m.row == m.col) | (m.data == 0)))

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        diff = self.matrix - self.matrix.conj().T
        scale = max(abs(self.matrix).max(), 1.0) if self.matrix.nnz else 1.0
        return (abs(diff).max() if diff.nnz else 0.0) <= rtol * scale

    def __add__(self, other: SparseOperator) -> SparseOperator:
        _check_same(self, other)
        return SparseOperator((self.matrix + other.matrix).tocsr(), self.qubit_count)

    def __mul__(self, c: float) -> SparseOperator:
        return SparseOperator((self.matrix * c).tocsr(), self.qubit_count)

    __rmul__ = __mul__

    def to_coo_text(self) -> str:
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        return "\n".join(f"{m.row[i]} {m.col[i]} {m.data[i].item()!r}" for i in order)


def _check_same(a: SparseOperator, b: SparseOperator):
    if a.qubit_count != b.qubit_count:
        raise ValueError(f"qubit count mismatch: {a.qubit_count} vs {b.qubit_count}")


def z_signs(q: int, k: int) -> np.ndarray:
    """Eigenvalues of Z on qubit ``k`` along the basis."""
    idx = np.arange(1 << q)
    return (1 - 2 * ((idx >> (q - 1 - k)) & 1)).astype(np.int8)


def diagonal_operator(values: np.ndarray, q: int) -> SparseOperator:
    return SparseOperator(sp.diags(np.asarray(values, dtype=np.float64), format="csr"), q)


def pauli_z_string(q: int, support, coeff: float = 1.0) -> SparseOperator:
    support = list(support)
    if len(set(support)) != len(support):
        raise ValueError("support indices must be distinct")
    for k in support:
        if not 0 <= k < q:
            raise ValueError(f"qubit {k} out of range for {q} qubits")
    diag = np.full(1 << q, float(coeff))
    for k in support:
        diag *= z_signs(q, k)
    return diagonal_operator(diag, q)


def zpoly_diagonal(q: int, poly: dict[tuple[int, ...], float]) -> np.ndarray:
    """Diagonal of ``sum c * Z_support`` over ``q`` qubits."""
    signs: dict[int, np.ndarray] = {}
    diag = np.zeros(1 << q)
    for support, c in poly.items():
        if not support:
            diag += c
            continue
        term = np.full(1 << q, float(c))
        for k in support:
            if k not in signs:
                signs[k] = z_signs(q, k)
            term *= signs[k]
        diag += term
    return diag


def logical_zpoly(p: LogicalProblem) -> dict[tuple[int, ...], float]:
    return {t.qubits: -t.j for t in p.terms}


def assemble_logical(p: LogicalProblem) -> SparseOperator:
    if p.n > LOGICAL_LIMIT:
        raise ProblemError(f"n={p.n} exceeds dense-diagonal bound {LOGICAL_LIMIT}")
    return diagonal_operator(zpoly_diagonal(p.n, logical_zpoly(p)), p.n)


def _check_executable(e: Encoding):
    if e.total_qubits > EXECUTABLE_LIMIT:
        raise ProblemError(f"{e.total_qubits} qubits exceed executable bound {EXECUTABLE_LIMIT}")


def assemble_problem_part(e: Encoding) -> SparseOperator:
    _check_executable(e)
    return diagonal_operator(zpoly_diagonal(e.total_qubits, e.problem_zpoly()), e.total_qubits)


def assemble_constraints(e: Encoding) -> SparseOperator:
    _check_executable(e)
    return diagonal_operator(zpoly_diagonal(e.total_qubits, e.constraints_zpoly()), e.total_qubits)


def assemble_executable(e: Encoding) -> SparseOperator:
    return assemble_problem_part(e) + assemble_constraints(e)


@dataclass(frozen=True)
class DriverConfig:
    h: tuple[float, ...]

    def __post_init__(self):
        if not all(np.isfinite(self.h)):
            raise ValueError("driver fields must be finite")

    @classmethod
    def uniform(cls, q: int, h: float = 1.0) -> DriverConfig:
        return cls((float(h),) * q)


def assemble_driver(q: int, d: DriverConfig) -> SparseOperator:
    if len(d.h) != q:
        raise ValueError(f"driver has {len(d.h)} fields for {q} qubits")
    dim = 1 << q
    idx = np.arange(dim)
    rows, cols, vals = [], [], []
    for k, hk in enumerate(d.h):
        if hk == 0:
            continue
        rows.append(idx)
        cols.append(idx ^ (1 << (q - 1 - k)))
        vals.append(np.full(dim, float(hk)))
    if not rows:
        return SparseOperator(sp.csr_matrix((dim, dim)), q)
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    m.sort_indices()
    return SparseOperator(m, q)


def _linear_alpha(s):
    return 1.0 - s


def _linear_beta(s):
    return s


@dataclass(frozen=True)
class Schedule:
    alpha: Callable[[float], float] = _linear_alpha
    beta: Callable[[float], float] = _linear_beta
    total_time: float = 50.0
    modulate_constraints: bool = True
    name: str = field(default="linear", compare=False)

    def __post_init__(self):
        ends = (self.alpha(0.0), self.beta(0.0), self.alpha(1.0), self.beta(1.0))
        if not np.allclose(ends, (1.0, 0.0, 0.0, 1.0), atol=1e-12):
            raise ValueError(f"schedule endpoints must be alpha(0)=1, beta(0)=0, alpha(1)=0, beta(1)=1; got {ends}")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")

    def coefficients(self, s: float) -> tuple[float, float, float]:
        """(driver, problem, constraint) weights at fraction ``s``."""
        a, b = float(self.alpha(s)), float(self.beta(s))
        return a, b, (b if self.modulate_constraints else 1.0)


def sweep_operator(driver: SparseOperator, problem_op: SparseOperator, constraint_op: SparseOperator | None,
                   sched: Schedule, s: float) -> SparseOperator:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    _check_same(driver, problem_op)
    a, b, c = sched.coefficients(s)
    m = a * driver.matrix + b * problem_op.matrix
    if constraint_op is not None:
        _check_same(driver, constraint_op)
        m = m + c * constraint_op.matrix
    return SparseOperator(sp.csr_matrix(m), driver.qubit_count)


@dataclass(frozen=True)
class SweepHamiltonian:
    """Pre-assembled ingredients of ``alpha(s) H_I + beta(s) H_p (+ C-part)``."""
    driver: SparseOperator
    problem: SparseOperator
    constraints: SparseOperator | None
    schedule: Schedule

    @property
    def qubit_count(self) -> int:
        return self.driver.qubit_count

    def at(self, s: float) -> SparseOperator:
        return sweep_operator(self.driver, self.problem, self.constraints, self.schedule, s)

    def diagonal_at(self, s: float) -> np.ndarray:
        _, b, c = self.schedule.coefficients(s)
        d = b * self.problem.diagonal()
        if self.constraints is not None:
            d = d + c * self.constraints.diagonal()
        return d


def logical_sweep(p: LogicalProblem, sched: Schedule | None = None, h: float = 1.0) -> SweepHamiltonian:
    if p.n > LOGICAL_LIMIT:
        raise ProblemError(f"n={p.n} exceeds dense-diagonal bound {LOGICAL_LIMIT}")
    sched = sched or Schedule()
    return SweepHamiltonian(assemble_driver(p.n, DriverConfig.uniform(p.n, h)), assemble_logical(p), None, sched)


def executable_sweep(e: Encoding, sched: Schedule | None = None, h: float = 1.0) -> SweepHamiltonian:
    _check_executable(e)
    sched = sched or Schedule()
    q = e.total_qubits
    return SweepHamiltonian(assemble_driver(q, DriverConfig.uniform(q, h)), assemble_problem_part(e),
                            assemble_constraints(e), sched)
