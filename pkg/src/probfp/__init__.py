"""Static analysis of floating-point roundoff error for probabilistic programs.

Computes guaranteed enclosures (probability boxes) for the output
distribution of arithmetic over random inputs in a finite-precision
format, together with sound worst-case and confidence-conditional
relative-error bounds.
"""

from .formats import DOUBLE, HALF, SINGLE, FloatFormat, get_format
from .dists import Distribution, discretize, make_builtin, piecewise, sample
from .dsarith import DSStructure, FocalElement, PBox, condense, ds_to_pbox, ind_op, pbox_to_ds
from .errdist import (ErrorDistribution, covariance_bounds, error_pbox,
                      exact_error_density, hp_error_density, typical_density)
from .analysis import (AnalysisConfig, AnalysisError, AnalysisResult, BinaryOp,
                       ConstVal, Expr, Program, UnaryNeg, VarRef, analyze,
                       expr_text, run_samples)
from .parser import ParseError, parse_program, parse_sexpr_benchmark

__version__ = "0.1.0"

__all__ = [
    "DOUBLE", "HALF", "SINGLE", "FloatFormat", "get_format",
    "Distribution", "discretize", "make_builtin", "piecewise", "sample",
    "DSStructure", "FocalElement", "PBox", "condense", "ds_to_pbox",
    "ind_op", "pbox_to_ds",
    "ErrorDistribution", "covariance_bounds", "error_pbox",
    "exact_error_density", "hp_error_density", "typical_density",
    "AnalysisConfig", "AnalysisError", "AnalysisResult", "analyze",
    "run_samples",
    "ParseError", "parse_program", "parse_sexpr_benchmark",
    "BinaryOp", "ConstVal", "Expr", "Program", "UnaryNeg", "VarRef",
    "expr_text",
    "__version__",
]
