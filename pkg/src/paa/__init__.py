"""Probabilistic alias analysis toolkit for SSA-DisLang.

Parse SPMD programs, run the probabilistic points-to analysis, emit and
independently re-check derivation certificates, and stress-test the
analysis against a seeded concrete interpreter.
"""

from .analysis import (
    AnalysisError, AnalysisResult, analyze, classify_assign, eval_expr,
    merge, resolve_deref, resolve_field, resolve_var, transfer_stmt,
)
from .domain import (
    BOTTOM, BOTTOM_TYPE, AbstractAddress, AddrVal, AliasType, AnalysisConfig,
    Bottom, IntVal, ProbPair, ReachCtx, VarVal, alias_type,
)
from .syntax import ParseError, Program, VarName, parse, parse_file, pretty
from .ssa import Diagnostic, validate_ssa

__version__ = "0.1.0"

__all__ = [
    "AbstractAddress", "AddrVal", "AliasType", "AnalysisConfig",
    "AnalysisError", "AnalysisResult", "BOTTOM", "BOTTOM_TYPE", "Bottom",
    "Diagnostic", "IntVal", "ParseError", "ProbPair", "Program", "ReachCtx",
    "VarName", "VarVal", "alias_type", "analyze", "classify_assign",
    "eval_expr", "merge", "parse", "parse_file", "pretty", "resolve_deref",
    "resolve_field", "resolve_var", "transfer_stmt", "validate_ssa",
]
