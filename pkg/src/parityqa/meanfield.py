"""Spin-coherent-state potential of the executable sweep.

For the product state with qubit ``j`` on the Bloch vector
``(sin t cos f, sin t sin f, cos t)``, every Z factor averages to
``cos t`` and every X factor to ``sin t cos f``, so the expectation of a
Z-polynomial plus transverse fields factorises qubit by qubit.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .encoding import Constraint, Encoding
from .operators import Schedule, pauli_z_string

EXPLICIT_LIMIT = 12


@dataclass(frozen=True)
class BlochAngles:
    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if theta.shape != phi.shape or theta.ndim != 1:
            raise ValueError("theta and phi must be equal-length 1-d arrays")
        if np.any(theta < 0) or np.any(theta > np.pi):
            raise ValueError("theta must lie in [0, pi]")
        if np.any(phi < 0) or np.any(phi >= 2 * np.pi):
            raise ValueError("phi must lie in [0, 2 pi)")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_spins(cls, spins) -> BlochAngles:
        """Poles of the Bloch sphere: +1 -> theta = 0, -1 -> theta = pi."""
        s = np.asarray(spins)
        return cls(np.where(s > 0, 0.0, np.pi), np.zeros(s.shape[0]))

    def __len__(self):
        return self.theta.shape[0]


def coherent_expectation(zpoly: dict[tuple[int, ...], float], m: BlochAngles,
                         xfields: dict[int, float] | None = None) -> float:
    """<Psi_m| sum c Z_support + sum h X_q |Psi_m> without building the state."""
    z = np.cos(m.theta)
    x = np.sin(m.theta) * np.cos(m.phi)
    total = 0.0
    for support, c in zpoly.items():
        for q in support:
            if not 0 <= q < len(m):
                raise ValueError(f"qubit {q} outside {len(m)} angles")
        total += c * float(np.prod(z[list(support)])) if support else c
    for q, h in (xfields or {}).items():
        total += h * x[q]
    return float(total)


def coherent_state(m: BlochAngles) -> np.ndarray:
    """Explicit product state cos(t/2)|0> + exp(-i f) sin(t/2)|1> per qubit (qubit 0 leftmost)."""
    if len(m) > EXPLICIT_LIMIT:
        raise ValueError(f"explicit state limited to {EXPLICIT_LIMIT} qubits")
    psi = np.ones(1, dtype=complex)
    for t, f in zip(m.theta, m.phi):
        psi = np.kron(psi, np.array([np.cos(t / 2), np.exp(-1j * f) * np.sin(t / 2)]))
    return psi


def _weights(sched: Schedule, s: float) -> tuple[float, float, float]:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    return sched.coefficients(s)


def constraint_expectation(c: Constraint, m: BlochAngles) -> float:
    """<C (sum k_i Z_i + k0)^2> on the product state.

    Distinct qubits are uncorrelated, so the mean square is the squared mean
    plus the sum of single-qubit variances k_i^2 (1 - <Z_i>^2); the result
    is non-negative and vanishes exactly on zero-penalty vertices.
    """
    coeffs, const = c.coefficients()
    z = np.cos(m.theta[list(c.support())])
    k = np.asarray(coeffs, dtype=float)
    mean = float(k @ z) + const
    return c.scale * (mean * mean + float(np.sum(k * k * (1.0 - z * z))))


def potential_split(e: Encoding, sched: Schedule, s: float, m: BlochAngles, h: float = 1.0) -> tuple[float, float]:
    """(V1, V2): the constraint-free part and the weighted constraint part of V."""
    if len(m) != e.total_qubits:
        raise ValueError(f"expected {e.total_qubits} angles, got {len(m)}")
    a, b, c = _weights(sched, s)
    driver = {q: a * h for q in range(e.total_qubits)}
    problem = {k: b * v for k, v in e.problem_zpoly().items()}
    v1 = coherent_expectation(problem, m, driver)
    v2 = c * sum(constraint_expectation(con, m) for con in e.constraints)
    return v1, v2


def mean_field_potential(e: Encoding, sched: Schedule, s: float, m: BlochAngles, h: float = 1.0) -> float:
    v1, v2 = potential_split(e, sched, s, m, h)
    return v1 + v2


def evaluate_path(e: Encoding, sched: Schedule, s: float, path, h: float = 1.0) -> list[tuple[float, float, float, float]]:
    """Rows (path_param, V, V1, V2) for ``(param, BlochAngles)`` pairs."""
    rows = []
    for param, m in path:
        v1, v2 = potential_split(e, sched, s, m, h)
        rows.append((float(param), v1 + v2, v1, v2))
    return rows


def linear_path(start: BlochAngles, end: BlochAngles, points: int):
    """Straight interpolation of the angles, as ``(param, BlochAngles)`` pairs."""
    for u in np.linspace(0.0, 1.0, points):
        theta = (1 - u) * start.theta + u * end.theta
        phi = np.mod((1 - u) * start.phi + u * end.phi, 2 * np.pi)
        yield float(u), BlochAngles(theta, phi)


def path_csv(rows, config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write(f"# config={json.dumps(config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_param", "V", "V1", "V2"])
    for r in rows:
        w.writerow([repr(x) for x in r])
    return buf.getvalue()


def constraint_parts(c: Constraint) -> tuple[dict, dict, float]:
    """Split a plaquette penalty into the ancilla part, the remainder and the identity.

    ``C_l = C1 + C2 + 8C I`` with ``C1 = -4C (w + n + e - s) Z_anc`` and
    ``C2 = 2C sum_{i<j} k_i k_j Z_i Z_j`` over the four members.
    """
    if c.shape != "plaquette":
        raise ValueError("the ancilla decomposition is defined for plaquettes only")
    coeffs, _ = c.coefficients()
    member_k = coeffs[:-1]
    c1 = {tuple(sorted((q, c.ancilla))): -4 * c.scale * k for q, k in zip(c.members, member_k)}
    c2 = {}
    for i, (qi, ki) in enumerate(zip(c.members, member_k)):
        for qj, kj in zip(c.members[i + 1:], member_k[i + 1:]):
            c2[tuple(sorted((qi, qj)))] = 2 * c.scale * ki * kj
    return c1, c2, 8 * c.scale


def constraint_decomposition_check(c: Constraint) -> float:
    """Largest entrywise deviation between C_l and C1 + C2 + 8C I on the constraint's 5 qubits."""
    c1, c2, ident = constraint_parts(c)
    local = {q: i for i, q in enumerate(c.support())}
    coeffs, const = c.coefficients()
    # left side straight from the squared form, one basis state at a time
    lhs = np.zeros(32)
    for b in range(32):
        spins = [1 - 2 * ((b >> (4 - i)) & 1) for i in range(5)]
        x = sum(k * v for k, v in zip(coeffs, spins)) + const
        lhs[b] = c.scale * x * x
    rhs = pauli_z_string(5, [], ident).diagonal()
    for part in (c1, c2):
        for support, v in part.items():
            rhs = rhs + pauli_z_string(5, [local[q] for q in support], v).diagonal()
    return float(np.max(np.abs(lhs - rhs)))
