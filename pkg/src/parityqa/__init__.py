"""Parity-encoded quantum annealing: encodings, sweep spectra, dynamics and decoding."""
from .encoding import Encoding, encode_problem
from .problem import LogicalProblem, ProblemError, Term, parse_problem

__all__ = ["Encoding", "LogicalProblem", "ProblemError", "Term", "encode_problem", "parse_problem"]
__version__ = "0.1.0"
