"""Rigorous numerics for nonlinear inequalities, plane graph enumeration and LP certificates."""

__version__ = "0.1.0"

from .numeric import ConstantName, DomainError, Dyadic, Interval, enclose_constant
from .poly import SparsePoly
from .expr import Box, Verdict, VerifyReport, dihedral_from_edges, eval_interval, verify_lower, verify_upper
from .bernstein import bernstein_verify, range_enclosure, to_bernstein

__all__ = [
    "Box",
    "ConstantName",
    "DomainError",
    "Dyadic",
    "Interval",
    "SparsePoly",
    "Verdict",
    "VerifyReport",
    "__version__",
    "bernstein_verify",
    "dihedral_from_edges",
    "enclose_constant",
    "eval_interval",
    "range_enclosure",
    "to_bernstein",
    "verify_lower",
    "verify_upper",
]
