"""Instantaneous spectra along the sweep, minimal gaps and impurity states."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .encoding import Encoding, encode_problem
from .operators import (EXECUTABLE_LIMIT, SparseOperator, SweepHamiltonian, diagonal_operator,
                        executable_sweep, logical_sweep, zpoly_diagonal)
from .problem import LogicalProblem, ProblemError, all_energies

DENSE_LIMIT = 4096
DEFAULT_K = 12
DEGENERACY_TOL = 1e-10


class SolverError(RuntimeError):
    """The iterative eigensolver did not converge within its iteration cap."""


def lowest_eigenvalues(op: SparseOperator, k: int, vectors: bool = False, v0=None,
                       tol: float = 1e-10, maxiter: int | None = None):
    """The ``k`` smallest eigenvalues (ascending), optionally with eigenvectors.

    Diagonal operators are sorted exactly (basis vectors are eigenvectors);
    small operators use a dense solve, larger ones ARPACK Lanczos.
    """
    dim = op.dim
    if not 1 <= k <= dim:
        raise ValueError(f"k={k} must lie in 1..{dim}")
    if op.is_diagonal():
        d = op.diagonal()
        order = np.argsort(d, kind="stable")[:k]
        if not vectors:
            return d[order]
        vecs = np.zeros((dim, k))
        vecs[order, np.arange(k)] = 1.0
        return d[order], vecs
    if dim <= DENSE_LIMIT or k >= dim - 1:
        dense = op.matrix.toarray()
        if vectors:
            w, v = np.linalg.eigh(dense)
            return w[:k], v[:, :k]
        return np.linalg.eigvalsh(dense)[:k]
    if v0 is None:
        v0 = np.random.default_rng(12345).standard_normal(dim)
    try:
        w, v = eigsh(op.matrix, k=k, which="SA", tol=tol, v0=v0, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        raise SolverError(f"eigensolver did not converge for k={k}, dim={dim}: {exc}") from exc
    order = np.argsort(w)
    return (w[order], v[:, order]) if vectors else w[order]


@dataclass(frozen=True)
class SweepSpectrum:
    s_grid: np.ndarray
    levels: np.ndarray  # (len(s_grid), k), relative to the ground level
    ground: np.ndarray  # absolute E0 per grid point

    @property
    def k(self) -> int:
        return self.levels.shape[1]

    def gaps(self) -> np.ndarray:
        return self.levels[:, 1]

    def to_csv(self, config: dict | None = None) -> str:
        buf = io.StringIO()
        if config is not None:
            buf.write(f"# config={json.dumps(config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "level_index", "delta_e"])
        for s, row in zip(self.s_grid, self.levels):
            for i, v in enumerate(row):
                w.writerow([repr(float(s)), i, repr(float(v))])
        return buf.getvalue()


def _levels_at(args):
    sweep, s, k = args
    w = lowest_eigenvalues(sweep.at(float(s)), k)
    return w


def sweep_spectrum(sweep: SweepHamiltonian, s_grid, k: int | None = None, workers: int = 1) -> SweepSpectrum:
    """Lowest ``k`` levels at every grid point, computed independently per point."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid < 0) or np.any(s_grid > 1) or np.any(np.diff(s_grid) < 0):
        raise ValueError("s_grid must be sorted inside [0, 1]")
    dim = 1 << sweep.qubit_count
    k = min(DEFAULT_K, dim) if k is None else k
    jobs = [(sweep, s, k) for s in s_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_levels_at, jobs))
    else:
        rows = [_levels_at(j) for j in jobs]
    absolute = np.array(rows)
    return SweepSpectrum(s_grid, absolute - absolute[:, :1], absolute[:, 0].copy())


@dataclass
class GapReport:
    delta_min: float
    s_star: float
    degenerate_end: bool = False
    evaluations: int = 0
    chi: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class _GapProbe:
    """Evaluates E1 - E0 along a sweep, reusing the nearest ground vector as start."""

    def __init__(self, sweep: SweepHamiltonian):
        self.sweep = sweep
        self.cache: dict[float, float] = {}
        self.vectors: dict[float, np.ndarray] = {}

    def __call__(self, s: float) -> float:
        s = float(s)
        if s in self.cache:
            return self.cache[s]
        v0 = None
        if self.vectors:
            near = min(self.vectors, key=lambda x: abs(x - s))
            v0 = self.vectors[near]
        w, v = lowest_eigenvalues(self.sweep.at(s), 2, vectors=True, v0=v0)
        self.cache[s] = float(w[1] - w[0])
        self.vectors[s] = v[:, 0]
        return self.cache[s]


def minimal_gap(spec: SweepSpectrum, sweep: SweepHamiltonian | None = None, s_tol: float = 1e-3) -> GapReport:
    """Smallest E1 - E0 over the grid, refined around the coarse minimum when ``sweep`` is given.

    Refinement runs a bounded Brent search on the bracket formed by the
    coarse minimum's neighbours, to ``s_tol`` in s. Ties on the coarse grid
    go to the first grid point.
    """
    if spec.k < 2:
        raise ValueError("need at least two levels for a gap")
    gaps = spec.gaps()
    i = int(np.argmin(gaps))
    report = GapReport(float(gaps[i]), float(spec.s_grid[i]), evaluations=len(gaps))
    report.degenerate_end = bool(spec.s_grid[-1] == 1.0 and gaps[-1] < DEGENERACY_TOL)
    if sweep is None or len(gaps) < 3 or np.allclose(gaps, gaps[i], rtol=0, atol=1e-12):
        return report
    lo = spec.s_grid[max(i - 1, 0)]
    hi = spec.s_grid[min(i + 1, len(gaps) - 1)]
    probe = _GapProbe(sweep)
    minimize_scalar(probe, bounds=(lo, hi), method="bounded", options={"xatol": s_tol})
    report.evaluations += len(probe.cache)
    best = min(probe.cache.items(), key=lambda kv: kv[1])
    if best[1] < report.delta_min:
        report.delta_min, report.s_star = best[1], best[0]
    return report


def find_minimal_gap(sweep: SweepHamiltonian, coarse_points: int = 101, s_tol: float = 1e-3,
                     workers: int = 1) -> tuple[GapReport, SweepSpectrum]:
    grid = np.linspace(0.0, 1.0, coarse_points)
    spec = sweep_spectrum(sweep, grid, k=2, workers=workers)
    return minimal_gap(spec, sweep, s_tol), spec


def gap_ratio_scan(p: LogicalProblem, c_over_j_values, coarse_points: int = 11, s_tol: float = 1e-3,
                   sched=None, workers: int = 1) -> list[tuple[float, float, GapReport]]:
    """chi(beta) = minimal logical gap / minimal executable gap, per constraint ratio."""
    logical, _ = find_minimal_gap(logical_sweep(p, sched), coarse_points, s_tol)
    out = []
    for beta in c_over_j_values:
        if beta <= 0:
            raise ValueError("constraint ratio must be positive")
        exe, _ = find_minimal_gap(executable_sweep(encode_problem(p, beta), sched), coarse_points, s_tol, workers)
        chi = logical.delta_min / exe.delta_min if exe.delta_min > 0 else float("inf")
        exe.chi = chi
        out.append((float(beta), chi, exe))
    return out


def gauge_projector(e: Encoding) -> SparseOperator:
    """Diagonal 0/1 projector onto basis states with zero total constraint penalty."""
    if e.total_qubits > EXECUTABLE_LIMIT:
        raise ProblemError(f"{e.total_qubits} qubits exceed executable bound {EXECUTABLE_LIMIT}")
    pen = zpoly_diagonal(e.total_qubits, e.constraints_zpoly())
    return diagonal_operator((np.abs(pen) < 1e-9).astype(float), e.total_qubits)


@dataclass
class ImpurityReport:
    overlaps: list[float]
    impurity: list[bool]
    relative_energies: list[float]
    lowest_impurity_delta: float
    crossing_beta: float | None = None
    scan: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _final_diagonals(e: Encoding) -> tuple[np.ndarray, np.ndarray]:
    q = e.total_qubits
    if q > EXECUTABLE_LIMIT:
        raise ProblemError(f"{q} qubits exceed executable bound {EXECUTABLE_LIMIT}")
    return zpoly_diagonal(q, e.problem_zpoly()), zpoly_diagonal(q, e.constraints_zpoly())


def classify_impurities(e: Encoding, k: int = DEFAULT_K, threshold: float = 0.5) -> ImpurityReport:
    """Label the ``k`` lowest eigenstates of the final executable Hamiltonian.

    The final Hamiltonian is diagonal, so its eigenvectors are basis states
    and the gauge overlap of each is exactly 0 or 1.
    """
    prob, pen = _final_diagonals(e)
    energy = prob + pen
    gauge = np.abs(pen) < 1e-9
    op = diagonal_operator(energy, e.total_qubits)
    w, v = lowest_eigenvalues(op, min(k, op.dim), vectors=True)
    overlaps = (v * v * gauge[:, None]).sum(axis=0)
    e0 = w[0]
    outside = energy[~gauge]
    lowest = float(outside.min() - e0) if outside.size else float("inf")
    return ImpurityReport([float(x) for x in overlaps], [bool(x < threshold) for x in overlaps],
                          [float(x - e0) for x in w], lowest)


def rescaled(e: Encoding, c_over_j: float) -> Encoding:
    """Same encoding with every constraint scale set for ratio ``c_over_j``."""
    unit = e.scale / e.c_over_j
    scale = c_over_j * unit
    return replace(e, constraints=tuple(replace(c, scale=scale) for c in e.constraints),
                   c_over_j=c_over_j, scale=scale)


def impurity_crossing_scan(e: Encoding, beta_grid) -> tuple[float | None, list[dict]]:
    """Smallest beta at which the lowest impurity level clears every problem level.

    The problem levels are the codeword energies (the logical spectrum);
    between grid points the crossing is located by linear interpolation.
    """
    beta_grid = [float(b) for b in beta_grid]
    if any(b2 < b1 for b1, b2 in zip(beta_grid, beta_grid[1:])):
        raise ValueError("beta grid must be ascending")
    rows = []
    prev = None
    crossing = None
    for beta in beta_grid:
        eb = rescaled(e, beta)
        prob, pen = _final_diagonals(eb)
        energy = prob + pen
        gauge = np.abs(pen) < 1e-9
        e0 = energy.min()
        top = float(energy[gauge].max() - e0)
        imp = float(energy[~gauge].min() - e0) if (~gauge).any() else float("inf")
        rows.append({"beta": beta, "lowest_impurity_delta": imp, "max_problem_delta": top})
        margin = imp - top
        if crossing is None and margin > 0:
            if prev is None:
                crossing = beta
            else:
                pb, pm = prev
                crossing = pb + (beta - pb) * (0 - pm) / (margin - pm)
        prev = (beta, margin)
    return crossing, rows


def logical_levels(p: LogicalProblem) -> np.ndarray:
    e = np.sort(all_energies(p))
    return e - e[0]
