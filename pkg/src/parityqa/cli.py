"""Command-line entry point: ``parityqa <command> ...``.

Every command writes JSON (with a ``config`` key) or CSV (with a leading
``# config=...`` line) so each output records the settings that produced it.
Exit codes: 0 success, 2 validation error, 3 solver non-convergence, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import decoding, dynamics, meanfield, schemes, spectrum
from .encoding import DEFAULT_C_OVER_J, encode_problem
from .operators import Schedule, executable_sweep, logical_sweep
from .problem import LogicalProblem, ProblemError, parse_problem, random_problem

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_VALIDATION, "usage", message)


def _default_seed() -> int:
    raw = os.environ.get("QA_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_VALIDATION, "validation", f"QA_SEED must be an integer, got {raw!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _spin_list(text: str) -> list[int]:
    vals = [int(x) for x in text.split(",") if x.strip()]
    if any(v not in (1, -1) for v in vals):
        raise argparse.ArgumentTypeError("spins must be +1 or -1")
    return vals


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot read {path}: {exc.strerror}")


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"cannot write {path}: {exc.strerror}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_problem(args) -> LogicalProblem:
    if args.random is not None:
        if args.problem is not None:
            raise CliError(EXIT_VALIDATION, "validation", "give either a problem file or --random, not both")
        return random_problem(args.random, np.random.default_rng(args.seed))
    if args.problem is None:
        raise CliError(EXIT_VALIDATION, "validation", "a problem file or --random N is required")
    return parse_problem(_read(args.problem))


def _schedule(args) -> Schedule:
    return Schedule(total_time=args.sweep_time, modulate_constraints=args.modulate_constraints)


def _config(args, **extra) -> dict:
    skip = {"func", "output", "trace", "workers"}  # results do not depend on workers
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg.update(extra)
    return cfg


def _workers(args) -> int:
    return args.workers if args.workers is not None else (os.cpu_count() or 1)


def cmd_encode(args):
    p = _load_problem(args)
    if args.scheme == "two":
        m = schemes.split_scheme2(p, args.c_over_j)
        bad = schemes.verify_locality(m)
        if bad:
            raise CliError(EXIT_VALIDATION, "validation", "; ".join(bad))
        body = m.to_dict()
    else:
        e = encode_problem(p, args.c_over_j)
        if args.scheme == "one":
            e = schemes.second_level_encode(e)
        body = e.to_dict()
    _emit(_dump({"config": _config(args), "encoding": body}), args.output)


def cmd_spectrum(args):
    p = _load_problem(args)
    sched = _schedule(args)
    if args.logical:
        sweep = logical_sweep(p, sched)
    else:
        sweep = executable_sweep(encode_problem(p, args.c_over_j), sched)
    k = min(args.k, 1 << sweep.qubit_count)
    spec = spectrum.sweep_spectrum(sweep, np.linspace(0.0, 1.0, args.grid), k=k, workers=_workers(args))
    _emit(spec.to_csv(_config(args, problem_n=p.n)), args.output)


def cmd_gapscan(args):
    p = _load_problem(args)
    sched = _schedule(args)
    logical, _ = spectrum.find_minimal_gap(logical_sweep(p, sched), args.grid, args.s_tol)
    rows = spectrum.gap_ratio_scan(p, args.betas, args.grid, args.s_tol, sched, _workers(args))
    report = {
        "config": _config(args, problem_n=p.n),
        "logical": logical.to_dict(),
        "rows": [{"beta": b, "chi": chi, **rep.to_dict()} for b, chi, rep in rows],
    }
    _emit(_dump(report), args.output)


def cmd_impurity(args):
    p = _load_problem(args)
    e = encode_problem(p, args.c_over_j)
    rep = spectrum.classify_impurities(e, args.k)
    grid = args.betas if args.betas else list(np.round(np.linspace(0.5, 4.0, 36), 10))
    rep.crossing_beta, rep.scan = spectrum.impurity_crossing_scan(e, grid)
    _emit(_dump({"config": _config(args, problem_n=p.n), "impurity": rep.to_dict()}), args.output)


def cmd_evolve(args):
    p = _load_problem(args)
    sched = _schedule(args)
    if args.logical:
        sweep, enc = logical_sweep(p, sched), None
    else:
        enc = encode_problem(p, args.c_over_j)
        sweep = executable_sweep(enc, sched)
    res = dynamics.evolve(sweep, steps=args.steps, encoding=enc, trace_stride=args.trace_stride)
    cfg = _config(args, problem_n=p.n, steps_used=res.steps)
    report = {"config": cfg, "fidelity": res.fidelity, "gauge_population": res.gauge_population,
              "leakage": res.leakage, "norm_drift": res.norm_drift}
    if res.codeword_probabilities is not None:
        report["codeword_probabilities"] = [
            {"spins": list(k), "probability": v}
            for k, v in sorted(res.codeword_probabilities.items(), key=lambda kv: (-kv[1], kv[0]))]
    _emit(_dump(report), args.output)
    if args.trace:
        _emit(res.trace_csv(cfg), args.trace)


def _parse_readouts(text: str) -> tuple[int, list[list[int]]]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"malformed readout JSON: {exc}")
    if not isinstance(data, dict) or set(data) - {"n", "readouts"} or "n" not in data or "readouts" not in data:
        raise ProblemError('readout file must be {"n": <int>, "readouts": [[+-1, ...], ...]}')
    n, rows = data["n"], data["readouts"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemError("n must be a positive integer")
    if not isinstance(rows, list) or not rows:
        raise ProblemError("readouts must be a non-empty list")
    return n, rows


def cmd_decode(args):
    n, rows = _parse_readouts(_read(args.readouts))
    out = []
    for r in rows:
        r = np.asarray(r)
        if args.decoder == "ml":
            logical, dist = decoding.decode_ml(r, n)
            out.append({"logical": list(logical), "distance": dist})
        else:
            out.append({"logical": list(decoding.decode_chain_vote(r, n))})
    _emit(_dump({"config": _config(args, n=n), "decoded": out}), args.output)


def cmd_errormodel(args):
    if args.fig3:
        pes = args.fig3_pe or ([args.pe] if args.pe is not None else [0.1, 0.6])
        rows = []
        for pe in pes:
            decoding.ErrorModelConfig(pe, 1.0, args.scheme, args.m_arrays)
            rows += decoding.fig3_data(range(args.n_min, args.n_max + 1), [pe], args.scheme, args.m_arrays)
        text = f"# config={json.dumps(_config(args), sort_keys=True)}\n" + decoding.fig3_csv(rows)
        _emit(text, args.output)
        return
    if args.pe is not None:
        cfg = decoding.ErrorModelConfig(args.pe, 1.0, args.scheme, args.m_arrays)
    elif args.gamma is not None:
        cfg = decoding.ErrorModelConfig(args.gamma, args.sweep_time, args.scheme, args.m_arrays)
    else:
        raise CliError(EXIT_VALIDATION, "validation", "give --pe or --gamma")
    report = {"config": _config(args, p_e=cfg.p_e), "budget": decoding.total_error(cfg, args.n).to_dict()}
    if args.mc_trials:
        mc = decoding.monte_carlo_validate(args.n, cfg.p_e, args.mc_trials, args.decoder, args.seed, _workers(args))
        report["monte_carlo"] = mc.to_dict()
    _emit(_dump(report), args.output)


def cmd_meanfield_path(args):
    p = _load_problem(args)
    e = encode_problem(p, args.c_over_j)
    for name, s in (("--start", args.start), ("--end", args.end)):
        if len(s) != p.n:
            raise CliError(EXIT_VALIDATION, "validation", f"{name} needs {p.n} logical spins")
    a = meanfield.BlochAngles.from_spins(e.encode_logical(args.start))
    b = meanfield.BlochAngles.from_spins(e.encode_logical(args.end))
    rows = meanfield.evaluate_path(e, _schedule(args), args.s, meanfield.linear_path(a, b, args.grid))
    _emit(meanfield.path_csv(rows, _config(args, problem_n=p.n)), args.output)


def cmd_selftest(args):
    from .encoding import enumerate_codewords, min_total_penalty
    from .problem import spin_table

    checks = {}
    for n in (2, 3, 4):
        e = encode_problem(LogicalProblem(n, ()))
        m = e.n_physical
        configs = spin_table(m)
        weights = 1 << np.arange(m - 1, -1, -1)
        is_cw = np.isin((configs < 0) @ weights, (enumerate_codewords(n) < 0) @ weights)
        pen = min_total_penalty(e, configs)
        checks[f"penalty_soundness_n{n}"] = bool(np.all(pen[is_cw] == 0) and np.all(pen[~is_cw] >= 4 * e.scale))
    checks["decode_roundtrip_n4"] = bool(np.all(
        decoding.decode_ml_batch(enumerate_codewords(4), 4)[0] == spin_table(4)))
    plaq = [c for c in encode_problem(LogicalProblem(3, ())).constraints if c.shape == "plaquette"][0]
    checks["plaquette_decomposition"] = meanfield.constraint_decomposition_check(plaq) < 1e-12
    checks["error_formula_n5"] = abs(decoding.total_error(decoding.ErrorModelConfig(0.1, 1.0), 5).product - 0.05136) < 1e-12
    ok = all(checks.values())
    _emit(_dump({"config": _config(args), "checks": checks, "ok": ok}), args.output)
    if not ok:
        raise CliError(EXIT_VALIDATION, "selftest", "one or more self-checks failed")


def _problem_args(sp):
    sp.add_argument("problem", nargs="?", help="problem JSON file")
    sp.add_argument("--random", type=int, metavar="N", help="use a random N-spin instance drawn with --seed")


def _schedule_args(sp):
    sp.add_argument("--sweep-time", type=float, default=50.0)
    sp.add_argument("--modulate-constraints", action=argparse.BooleanOptionalAction, default=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parityqa", description="Parity-encoded annealing toolkit.", allow_abbrev=False)
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--output", help="output file (default: standard output)")
    common.add_argument("--seed", type=int, default=None, help="random seed (default: $QA_SEED or 0)")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    common.add_argument("--c-over-j", type=float, default=DEFAULT_C_OVER_J)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("encode", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    sp.add_argument("--scheme", choices=["flat", "one", "two"], default="flat")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("spectrum", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    _schedule_args(sp)
    sp.add_argument("--grid", type=int, default=101)
    sp.add_argument("--k", type=int, default=spectrum.DEFAULT_K)
    sp.add_argument("--logical", action="store_true", help="sweep the logical rather than the executable system")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("gapscan", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    _schedule_args(sp)
    sp.add_argument("--grid", type=int, default=11, help="coarse points before refinement")
    sp.add_argument("--s-tol", type=float, default=1e-3)
    sp.add_argument("--betas", type=_float_list, default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    sp.set_defaults(func=cmd_gapscan)

    sp = sub.add_parser("impurity", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    sp.add_argument("--k", type=int, default=spectrum.DEFAULT_K)
    sp.add_argument("--betas", type=_float_list, default=None)
    sp.set_defaults(func=cmd_impurity)

    sp = sub.add_parser("evolve", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    _schedule_args(sp)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--trace", help="write the evolution trace CSV here")
    sp.add_argument("--trace-stride", type=int, default=0)
    sp.add_argument("--logical", action="store_true")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("decode", parents=[common], allow_abbrev=False)
    sp.add_argument("readouts", help='JSON file {"n": N, "readouts": [[...], ...]}')
    sp.add_argument("--decoder", choices=["ml", "chain"], default="ml")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("errormodel", parents=[common], allow_abbrev=False)
    sp.add_argument("--scheme", choices=["one", "two"], default="one")
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--pe", type=float, default=None, help="flip probability (gamma * T)")
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--sweep-time", type=float, default=1.0)
    sp.add_argument("--m-arrays", type=int, default=1)
    sp.add_argument("--mc-trials", type=int, default=0)
    sp.add_argument("--decoder", choices=["ml", "chain"], default="ml")
    sp.add_argument("--fig3", action="store_true", help="emit the total-error table over --n-min..--n-max")
    sp.add_argument("--fig3-pe", type=_float_list, default=None)
    sp.add_argument("--n-min", type=int, default=5)
    sp.add_argument("--n-max", type=int, default=25)
    sp.set_defaults(func=cmd_errormodel)

    sp = sub.add_parser("meanfield-path", parents=[common], allow_abbrev=False)
    _problem_args(sp)
    _schedule_args(sp)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--start", type=_spin_list, required=True, help="logical spins, e.g. 1,-1,1")
    sp.add_argument("--end", type=_spin_list, required=True)
    sp.add_argument("--grid", type=int, default=21)
    sp.set_defaults(func=cmd_meanfield_path)

    sp = sub.add_parser("selftest", parents=[common], allow_abbrev=False)
    sp.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
        if args.workers is not None and args.workers < 1:
            raise CliError(EXIT_VALIDATION, "validation", "--workers must be >= 1")
        args.func(args)
        return EXIT_OK
    except CliError as exc:
        err = (exc.code, exc.kind, str(exc))
    except (spectrum.SolverError, dynamics.EvolutionError) as exc:
        err = (EXIT_SOLVER, "solver", str(exc))
    except OSError as exc:
        err = (EXIT_IO, "io", str(exc))
    except (ProblemError, ValueError, RuntimeError) as exc:
        err = (EXIT_VALIDATION, "validation", str(exc))
    code, kind, message = err
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
