"""Readout decoding and the bit-flip fault-tolerance model.

Readouts are the non-ancilla physical spins (singles first, then pairs in
lexicographic order); ancilla values never enter decoding.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .encoding import enumerate_codewords, physical_count
from .problem import spin_table

ML_LIMIT = 20
_CHUNK = 1 << 14


def _check_readout(r, n) -> np.ndarray:
    r = np.asarray(r)
    if r.shape[-1] != physical_count(n):
        raise ValueError(f"readout needs {physical_count(n)} spins for n={n}, got {r.shape[-1]}")
    if not np.all((r == 1) | (r == -1)):
        raise ValueError("readout spins must be +1 or -1")
    return r.astype(np.int8)


def decode_ml_batch(readouts, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest codeword in Hamming distance for every row; ties go to the lowest basis index."""
    if n > ML_LIMIT:
        raise ValueError(f"n={n} exceeds ML decoding bound {ML_LIMIT}")
    r = _check_readout(readouts, n)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    m = physical_count(n)
    best_idx = np.zeros(r.shape[0], dtype=np.int64)
    best_dist = np.full(r.shape[0], m + 1, dtype=np.int64)
    total = 1 << n
    # distance = (m - <r, c>) / 2; codewords generated chunk by chunk
    rf = r.astype(np.float32)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK))
        bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
        s = (1 - 2 * bits).astype(np.int8)
        cols = [s[:, i] for i in range(n)]
        cols += [s[:, i] * s[:, j] for i in range(n) for j in range(i + 1, n)]
        cw = np.stack(cols, axis=1).astype(np.float32)
        dist = np.rint((m - rf @ cw.T) / 2).astype(np.int64)
        j = np.argmin(dist, axis=1)
        d = dist[np.arange(r.shape[0]), j]
        better = d < best_dist
        best_dist[better] = d[better]
        best_idx[better] = idx[j[better]]
    bits = (best_idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    logical = (1 - 2 * bits).astype(np.int8)
    if single:
        return logical[0], best_dist[0]
    return logical, best_dist


def decode_ml(readout, n: int) -> tuple[tuple[int, ...], int]:
    logical, dist = decode_ml_batch(readout, n)
    return tuple(int(v) for v in logical), int(dist)


def _pair_columns(n: int) -> dict[tuple[int, int], int]:
    cols, k = {}, n
    for i in range(n):
        for j in range(i + 1, n):
            cols[(i, j)] = cols[(j, i)] = k
            k += 1
    return cols


def decode_chain_vote_batch(readouts, n: int) -> np.ndarray:
    """Majority vote per logical spin over its N chain estimates.

    Estimates for spin i: single(i) itself and pair(i, j) * single(j) for
    every j != i. Ties resolve to +1.
    """
    r = _check_readout(readouts, n).astype(np.int64)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    cols = _pair_columns(n)
    votes = r[:, :n].copy()
    for i in range(n):
        for j in range(n):
            if j != i:
                votes[:, i] += r[:, cols[(i, j)]] * r[:, j]
    out = np.where(votes >= 0, 1, -1).astype(np.int8)
    return out[0] if single else out


def decode_chain_vote(readout, n: int) -> tuple[int, ...]:
    return tuple(int(v) for v in decode_chain_vote_batch(readout, n))


def decode_multi_array(m, spins, decoder: str = "ml") -> tuple[int, ...]:
    """Decode each array of a split encoding, then take a majority over arrays.

    ``spins`` holds every physical spin of ``m`` (ancillas included, which are
    ignored). Each array is decoded in its own position order and mapped
    back to logical order before voting; ties resolve to +1.
    """
    dec = _DECODERS[decoder]
    n = m.n_logical
    votes = np.zeros(n, dtype=np.int64)
    for part, chunk in zip(m.arrays, m.split(np.asarray(spins))):
        local = dec(chunk[: physical_count(n)], n)
        est = np.empty(n, dtype=np.int64)
        est[list(part.permutation)] = local
        votes += est
    return tuple(int(v) for v in np.where(votes >= 0, 1, -1))


def repetition_error_rate(n: int, p_e: float) -> float:
    """Failure probability of a strict-majority vote over ``n`` independent copies."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("p_e must lie in [0, 1]")
    return float(sum(math.comb(n, i) * p_e ** i * (1 - p_e) ** (n - i) for i in range(n // 2 + 1, n + 1)))


@dataclass(frozen=True)
class ErrorModelConfig:
    gamma: float
    sweep_time: float
    scheme: str = "one"
    m_arrays: int = 1

    def __post_init__(self):
        if self.scheme not in ("one", "two"):
            raise ValueError("scheme must be 'one' or 'two'")
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"flip probability gamma*T = {self.p_e} outside [0, 1]")
        if self.m_arrays < 1:
            raise ValueError("m_arrays must be >= 1")

    @property
    def p_e(self) -> float:
        return self.gamma * self.sweep_time


@dataclass(frozen=True)
class ErrorBudget:
    p_a: float
    p_b: float
    product: float  # clamped to [0, 1]
    raw_product: float
    clamped: bool

    def to_dict(self) -> dict:
        return asdict(self)


def total_error(cfg: ErrorModelConfig, n: int) -> ErrorBudget:
    m_phys = n * (n + 1) / 2
    if cfg.scheme == "one":
        p_a = repetition_error_rate(n, cfg.p_e) * m_phys
        p_b = 2.0 / n
    else:
        p_a = cfg.p_e * cfg.m_arrays * m_phys
        p_b = 2.0 / (cfg.m_arrays * n)
    raw = p_a * p_b
    clamped = min(max(raw, 0.0), 1.0)
    return ErrorBudget(p_a, p_b, clamped, raw, clamped != raw)


def fig3_data(n_values, p_values, scheme: str, m_arrays: int = 1) -> list[dict]:
    """Rows (n, p_e, scheme, total_error); total_error is the unclamped P_a * P_b."""
    rows = []
    for p in p_values:
        for n in n_values:
            b = total_error(ErrorModelConfig(p, 1.0, scheme, m_arrays), n)
            rows.append({"n": n, "p_e": p, "scheme": scheme, "total_error": b.raw_product})
    return rows


def fig3_csv(rows) -> str:
    lines = ["n,p_e,scheme,total_error"]
    lines += [f"{r['n']},{r['p_e']!r},{r['scheme']},{r['total_error']!r}" for r in rows]
    return "\n".join(lines) + "\n"


_DECODERS = {
    "ml": lambda r, n: decode_ml_batch(r, n)[0],
    "chain": decode_chain_vote_batch,
}


@dataclass(frozen=True)
class MonteCarloReport:
    n: int
    p_e: float
    decoder: str
    seed: int
    trials: int
    errors: int

    @property
    def rate(self) -> float:
        return self.errors / self.trials

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.trials)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(rate=self.rate, stderr=self.stderr)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _mc_chunk(args) -> int:
    n, p_e, trials, decoder, seq = args
    rng = np.random.default_rng(seq)
    cws = enumerate_codewords(n)
    table = spin_table(n)
    src = rng.integers(0, 1 << n, size=trials)
    flips = rng.random((trials, cws.shape[1])) < p_e
    readouts = np.where(flips, -cws[src], cws[src])
    decoded = _DECODERS[decoder](readouts, n)
    return int(np.any(decoded != table[src], axis=1).sum())


def monte_carlo_validate(n: int, p_e: float, trials: int, decoder: str = "ml", seed: int = 0,
                         workers: int = 1, chunk: int = 20000) -> MonteCarloReport:
    """Empirical logical error rate under independent flips of every readout spin.

    Each chunk of trials draws from its own stream spawned from ``seed``, so
    the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if decoder not in _DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    sizes = [min(chunk, trials - k) for k in range(0, trials, chunk)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(n, p_e, size, decoder, sq) for size, sq in zip(sizes, seqs)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(_mc_chunk, jobs))
    else:
        errors = sum(_mc_chunk(j) for j in jobs)
    return MonteCarloReport(n, p_e, decoder, seed, trials, errors)
