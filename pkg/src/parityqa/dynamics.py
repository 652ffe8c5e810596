"""Schrodinger evolution along the annealing sweep.

Integration uses the fourth-order commutator-free Magnus scheme: on each
step two exponentials of linear combinations of H at the Gauss nodes act on
the state through ``expm_multiply``. Global phases are ignored everywhere.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .encoding import Encoding, enumerate_codewords
from .operators import DriverConfig, SweepHamiltonian
from .problem import spin_table
from .spectrum import lowest_eigenvalues

NORM_TOL = 1e-8
GROUND_TOL = 1e-9

_SQ3 = np.sqrt(3.0)
_NODES = (0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6)
_W1, _W2 = (3 - 2 * _SQ3) / 12, (3 + 2 * _SQ3) / 12


class EvolutionError(RuntimeError):
    pass


def driver_ground_state(d: DriverConfig, q: int) -> np.ndarray:
    """Product of (|0> - |1>)/sqrt(2): the ground state of sum h_m X_m for h_m > 0."""
    if len(d.h) != q:
        raise ValueError(f"driver has {len(d.h)} fields for {q} qubits")
    if any(h <= 0 for h in d.h):
        raise ValueError("driver ground state needs every h_m > 0")
    idx = np.arange(1 << q)
    parity = np.zeros(idx.shape, dtype=np.int64)
    for k in range(q):
        parity ^= (idx >> k) & 1
    return (1 - 2 * parity).astype(complex) / np.sqrt(1 << q)


def ground_projector_weight(h_final, state: np.ndarray, tol: float = GROUND_TOL) -> float:
    """Probability of ``state`` in the (possibly degenerate) ground space of ``h_final``."""
    if h_final.is_diagonal():
        d = h_final.diagonal()
        mask = d <= d.min() + tol
        return float(np.sum(np.abs(state[mask]) ** 2))
    k = min(8, h_final.dim)
    w, v = lowest_eigenvalues(h_final, k, vectors=True)
    v = v[:, w <= w[0] + tol]
    return float(np.sum(np.abs(v.conj().T @ state) ** 2))


def _expectation(m, state) -> float:
    return float(np.real(np.vdot(state, m @ state)))


@dataclass
class EvolutionResult:
    state: np.ndarray
    fidelity: float
    gauge_population: float | None
    codeword_probabilities: dict[tuple[int, ...], float] | None
    norm_drift: float
    steps: int
    trace: list[dict] = field(default_factory=list)

    @property
    def leakage(self) -> float | None:
        return None if self.gauge_population is None else 1.0 - self.gauge_population

    def trace_csv(self, config: dict | None = None) -> str:
        buf = io.StringIO()
        if config is not None:
            buf.write(f"# config={json.dumps(config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "fidelity", "leakage", "energy_expectation"])
        for row in self.trace:
            w.writerow([repr(row["t"]), repr(row["fidelity"]),
                        "" if row["leakage"] is None else repr(row["leakage"]), repr(row["energy"])])
        return buf.getvalue()


def _combined(sweep: SweepHamiltonian, weights: list[tuple[float, float]]):
    """Matrix of sum_w w * H(s) for (w, s) pairs, built from the sweep's parts."""
    a = b = c = 0.0
    for w, s in weights:
        ai, bi, ci = sweep.schedule.coefficients(s)
        a, b, c = a + w * ai, b + w * bi, c + w * ci
    diag = b * sweep.problem.diagonal()
    if sweep.constraints is not None:
        diag = diag + c * sweep.constraints.diagonal()
    return (a * sweep.driver.matrix + sp.diags(diag, format="csr")).tocsr()


def evolve(sweep: SweepHamiltonian, steps: int | None = None, initial: np.ndarray | None = None,
           encoding: Encoding | None = None, trace_stride: int = 0, h: float = 1.0) -> EvolutionResult:
    """Integrate i d|psi>/dt = H(t)|psi> over 0 <= t <= T.

    ``steps`` defaults to about 20 steps per unit time. When ``encoding`` is
    given, gauge population and per-codeword probabilities are reported.
    """
    T = sweep.schedule.total_time
    q = sweep.qubit_count
    if steps is None:
        steps = max(200, int(np.ceil(20 * T)))
    if steps < 1:
        raise EvolutionError("need at least one step")
    dt = T / steps
    if dt <= 1e-12 * T:
        raise EvolutionError("step size underflow")
    psi = driver_ground_state(DriverConfig.uniform(q, h), q) if initial is None else np.array(initial, complex)
    psi = psi / np.linalg.norm(psi)
    gauge = _gauge_mask(encoding) if encoding is not None else None

    trace = []

    def record(step):
        s = step * dt / T
        hs = sweep.at(min(s, 1.0))
        trace.append({"t": step * dt, "fidelity": ground_projector_weight(hs, psi),
                      "leakage": None if gauge is None else 1.0 - float(np.sum(np.abs(psi[gauge]) ** 2)),
                      "energy": _expectation(hs.matrix, psi)})

    if trace_stride:
        record(0)
    for n in range(steps):
        t0 = n * dt
        s1, s2 = (t0 + _NODES[0] * dt) / T, (t0 + _NODES[1] * dt) / T
        first = _combined(sweep, [(_W2, s1), (_W1, s2)])
        second = _combined(sweep, [(_W1, s1), (_W2, s2)])
        psi = expm_multiply(-1j * dt * first, psi)
        psi = expm_multiply(-1j * dt * second, psi)
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > NORM_TOL:
            raise EvolutionError(f"norm drift {drift:.3e} at t={t0 + dt:.4g} exceeds {NORM_TOL}")
        if trace_stride and ((n + 1) % trace_stride == 0 or n + 1 == steps):
            record(n + 1)

    final = sweep.at(1.0)
    fidelity = ground_projector_weight(final, psi)
    gauge_pop = None if gauge is None else float(np.sum(np.abs(psi[gauge]) ** 2))
    probs = None if encoding is None else measure_populations(psi, encoding)[0]
    return EvolutionResult(psi, fidelity, gauge_pop, probs, abs(np.linalg.norm(psi) - 1.0), steps, trace)


def _gauge_mask(e: Encoding) -> np.ndarray:
    from .operators import zpoly_diagonal

    pen = zpoly_diagonal(e.total_qubits, e.constraints_zpoly())
    return np.abs(pen) < 1e-9


def measure_populations(state: np.ndarray, e: Encoding) -> tuple[dict[tuple[int, ...], float], float]:
    """Probability of each logical configuration, summed over ancilla values.

    Weight on physical configurations that are not codewords is returned as
    the second value (leakage out of the code space).
    """
    state = np.asarray(state)
    q = e.total_qubits
    if state.shape[0] != 1 << q:
        raise ValueError(f"state has length {state.shape[0]}, expected {1 << q}")
    n, m = e.n_logical, e.n_physical
    n_anc = q - m
    weights = (np.abs(state) ** 2).reshape(1 << m, 1 << n_anc).sum(axis=1)
    lookup = -np.ones(1 << m, dtype=np.int64)
    cws = enumerate_codewords(n)
    bits = (cws == -1).astype(np.int64)
    phys_index = (bits * (1 << np.arange(m - 1, -1, -1))).sum(axis=1)
    lookup[phys_index] = np.arange(1 << n)
    table = spin_table(n)
    probs = {}
    inside = lookup >= 0
    for pi in np.nonzero(inside)[0]:
        probs[tuple(int(v) for v in table[lookup[pi]])] = float(weights[pi])
    leakage = float(weights[~inside].sum())
    return probs, leakage
