"""SSA well-formedness validation.

The analysis assumes its input already has static-single-assignment
form; this module checks that precondition and reports violations as
diagnostics rather than exceptions.

Diagnostic codes:

``ssa-multi-def``
    an SSA variable is the target of more than one defining statement
    (plain assignment to a variable, ``fi``, or ``md``);
``ssa-undef-arg``
    a ``fi``/``md`` argument or ``mu`` variable has neither a defining
    statement nor a declaration;
``ssa-phi-placement``
    a ``fi`` does not directly follow a control-flow join (warning only:
    SSA builders differ on where they park their join annotations).
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Assign, If, Md, Mu, Phi, Program, RunStmt, Seq, Span, Stmt, VarLoc,
    VarName, While, ensure_stack_room,
)

ERROR = "error"
WARNING = "warning"

CODES = ("ssa-multi-def", "ssa-undef-arg", "ssa-phi-placement")


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    span: Span
    message: str

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.col}: {self.severity}: {self.code}: {self.message}"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "line": self.span.line,
            "col": self.span.col,
            "message": self.message,
        }


def _statements(stmt) -> list[Stmt]:
    """Flatten a statement tree into textual order, descending into blocks."""
    out: list[Stmt] = []

    def go(node) -> None:
        if node is None:
            return
        if isinstance(node, Seq):
            go(node.first)
            go(node.second)
            return
        out.append(node)
        if isinstance(node, RunStmt):
            go(node.body)
        elif isinstance(node, If):
            go(node.then_branch)
            go(node.else_branch)
        elif isinstance(node, While):
            go(node.body)

    go(stmt)
    return out


def _flatten_level(stmt) -> list[Stmt]:
    """One sequence level, without descending into nested blocks."""
    out: list[Stmt] = []

    def go(node) -> None:
        if isinstance(node, Seq):
            go(node.first)
            go(node.second)
        else:
            out.append(node)

    go(stmt)
    return out


def validate_ssa(program: Program) -> list[Diagnostic]:
    """Check the SSA precondition; an empty result means the program is clean.

    Deterministic: diagnostics come back sorted by source span.
    """
    ensure_stack_room(program)
    diags: list[Diagnostic] = []
    stmts = _statements(program.body)

    definitions: dict[VarName, list[Stmt]] = {}
    for stmt in stmts:
        target = None
        if isinstance(stmt, Assign) and isinstance(stmt.lhs, VarLoc):
            target = stmt.lhs.var
        elif isinstance(stmt, (Phi, Md)):
            target = stmt.target
        if target is not None:
            definitions.setdefault(target, []).append(stmt)

    for var, defs in definitions.items():
        for stmt in defs[1:]:
            diags.append(Diagnostic(
                ERROR, "ssa-multi-def", stmt.span,
                f"{var} is defined more than once"))

    declared_roots = {d.name for d in program.decls}

    def is_defined(var: VarName) -> bool:
        if var in definitions:
            return True
        return var.version == 0 and var.base in declared_roots

    for stmt in stmts:
        args: tuple[VarName, ...] = ()
        if isinstance(stmt, Phi):
            args = (stmt.left, stmt.right)
        elif isinstance(stmt, Md):
            args = (stmt.source,)
        elif isinstance(stmt, Mu):
            args = (stmt.var,)
        for var in args:
            if not is_defined(var):
                diags.append(Diagnostic(
                    ERROR, "ssa-undef-arg", stmt.span,
                    f"{var} is never defined"))

    _check_phi_placement(program.body, after_join=False, diags=diags)

    diags.sort(key=lambda d: (d.span, d.code, d.message))
    return diags


def _check_phi_placement(stmt, after_join: bool, diags: list[Diagnostic]) -> None:
    if stmt is None:
        return
    level = _flatten_level(stmt)
    # A fi is well-placed when it opens a loop body, or sits in a run of
    # fis immediately after an if/while at the same sequence level.
    preceded_by_join = after_join
    for node in level:
        if isinstance(node, Phi):
            if not preceded_by_join:
                diags.append(Diagnostic(
                    WARNING, "ssa-phi-placement", node.span,
                    f"fi defining {node.target} does not follow an if or while"))
            continue
        preceded_by_join = isinstance(node, (If, While))
        if isinstance(node, RunStmt):
            _check_phi_placement(node.body, after_join=False, diags=diags)
        elif isinstance(node, If):
            _check_phi_placement(node.then_branch, after_join=False, diags=diags)
            _check_phi_placement(node.else_branch, after_join=False, diags=diags)
        elif isinstance(node, While):
            _check_phi_placement(node.body, after_join=True, diags=diags)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)
