"""AST, lexer, parser and pretty-printer for SSA-DisLang.

SSA-DisLang is a small SPMD language: a program runs on a hierarchy of
machines, statements may hop between machines (``run``), and pointer
values may be reinterpreted across machines (``reform``).  Programs are
expected to already be in SSA form; ``fi`` / ``md`` / ``mu`` statements
are the SSA annotations.

Concrete surface syntax::

    machines { m0 (m1 m2) }
    field next = 0;
    var buf on m0[8];
    begin m0 {
      p_1 := &buf;
      x_1 := malloc();
      if c @0.7 then { y_1 := p_1; } else { y_2 := x_1; }
      y_3 := fi(y_1, y_2);
      while c @(0.9,2) do { mu(y_3); }
    }

Locations are ``x``, ``l->y`` (field) and ``[l]`` (dereference).
Expressions add integer arithmetic, ``&l``, ``malloc()``,
``run(e, m)`` and the two ``reform`` casts.  Every ``if`` carries a
branch probability (default 0.5) and every ``while`` a body probability
and an expected iteration count (defaults 0.9 and 2); the analysis
consumes these annotations.

All node classes are immutable.  Source spans are carried on the nodes
but excluded from equality, so two parses of equivalent text compare
equal structurally.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class ParseError(Exception):
    """Syntax or well-formedness error, formatted ``file:line:col: message``."""

    def __init__(self, message: str, line: int, col: int, filename: str = "<input>"):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(f"{filename}:{line}:{col}: {message}")


@dataclass(frozen=True, order=True)
class Span:
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


DUMMY_SPAN = Span()


@dataclass(frozen=True, order=True)
class VarName:
    """An SSA-indexed variable: base name plus integer version.

    ``x_2`` parses to ``VarName("x", 2)``; a bare ``x`` is version 0.
    """

    base: str
    version: int = 0

    def __str__(self) -> str:
        return self.base if self.version == 0 else f"{self.base}_{self.version}"


_VERSION_RE = re.compile(r"^(.*[^_])_(\d+)$")


def parse_var_name(text: str) -> VarName:
    """Split an identifier into (base, version); no ``_N`` suffix means 0."""
    m = _VERSION_RE.match(text)
    if m:
        return VarName(m.group(1), int(m.group(2)))
    return VarName(text, 0)


@dataclass(frozen=True)
class MachineHierarchy:
    root: str
    children: tuple["MachineHierarchy", ...] = ()

    def all_machines(self) -> list[str]:
        out = [self.root]
        for child in self.children:
            out.extend(child.all_machines())
        return out

    def __str__(self) -> str:
        if not self.children:
            return self.root
        return f"{self.root} ({' '.join(str(c) for c in self.children)})"


# ---------------------------------------------------------------------------
# Locations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarLoc:
    var: VarName
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class FieldLoc:
    base: "LocExpr"
    field_name: str
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class DerefLoc:
    inner: "LocExpr"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


LocExpr = Union[VarLoc, FieldLoc, DerefLoc]


def root_var(loc: LocExpr) -> VarName:
    """The variable at the bottom of a location chain.

    ``root_var([p->next]) == p``; base addresses and points-to lookups for
    composite locations key on this root.
    """
    while not isinstance(loc, VarLoc):
        loc = loc.base if isinstance(loc, FieldLoc) else loc.inner
    return loc.var


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocExp:
    loc: LocExpr
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    lhs: "Expr"
    rhs: "Expr"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class AddrOf:
    loc: LocExpr
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Malloc:
    site: int  # unique per textual occurrence, assigned by the parser
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class RunExp:
    inner: "Expr"
    machine: str
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class ReformAliasToInt:
    machine: str
    inner: "Expr"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class ReformIntToInt:
    from_machine: str
    to_machine: str
    inner: "Expr"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


Expr = Union[LocExp, IntLit, BinOp, AddrOf, Malloc, RunExp, ReformAliasToInt, ReformIntToInt]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    lhs: LocExpr
    rhs: Expr
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Phi:
    target: VarName
    left: VarName
    right: VarName
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Md:
    target: VarName
    source: VarName
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Mu:
    var: VarName
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class RunStmt:
    machine: str
    body: "Stmt"
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then_prob: float
    then_branch: Optional["Stmt"]
    else_branch: Optional["Stmt"]
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body_prob: float
    expected_iters: int
    body: Optional["Stmt"]
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


Stmt = Union[Assign, Phi, Md, Mu, Seq, RunStmt, If, While]

DEFAULT_THEN_PROB = 0.5
DEFAULT_BODY_PROB = 0.9
DEFAULT_EXPECTED_ITERS = 2


@dataclass(frozen=True)
class Decl:
    """A declared root variable: region of `size` cells owned by `machine`."""

    name: str
    machine: str
    size: int
    span: Span = field(default=DUMMY_SPAN, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Program:
    machines: MachineHierarchy
    field_table: dict  # field name -> offset
    decls: tuple[Decl, ...]
    entry_machine: str
    body: Optional[Stmt]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return (
            self.machines == other.machines
            and self.field_table == other.field_table
            and self.decls == other.decls
            and self.entry_machine == other.entry_machine
            and self.body == other.body
        )

    def machine_names(self) -> list[str]:
        return self.machines.all_machines()

    def decl_map(self) -> dict[str, Decl]:
        return {d.name: d for d in self.decls}

    def spans(self) -> dict[int, Span]:
        """Span of every node reachable from the body, keyed by node id."""
        out: dict[int, Span] = {}
        if self.body is not None:
            for node in walk(self.body):
                out[id(node)] = node.span
        return out


def stmt_count(body: Optional[Stmt]) -> int:
    """Number of statements in a body, without recursion."""
    if body is None:
        return 0
    count = 0
    stack = [body]
    while stack:
        node = stack.pop()
        count += 1
        if isinstance(node, Seq):
            stack.append(node.first)
            stack.append(node.second)
        elif isinstance(node, RunStmt):
            stack.append(node.body)
        elif isinstance(node, If):
            if node.then_branch is not None:
                stack.append(node.then_branch)
            if node.else_branch is not None:
                stack.append(node.else_branch)
        elif isinstance(node, While):
            if node.body is not None:
                stack.append(node.body)
    return count


def ensure_stack_room(program: "Program") -> None:
    """Long statement sequences nest linearly; give the recursive tree
    walkers (transfer, pretty, serializers) room proportional to program
    size instead of failing at the interpreter default."""
    needed = 1000 + 6 * stmt_count(program.body)
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)


def walk(node) -> Iterator:
    """Yield `node` and every AST node beneath it, preorder."""
    yield node
    if isinstance(node, Seq):
        yield from walk(node.first)
        yield from walk(node.second)
    elif isinstance(node, RunStmt):
        yield from walk(node.body)
    elif isinstance(node, If):
        yield from walk(node.cond)
        if node.then_branch is not None:
            yield from walk(node.then_branch)
        if node.else_branch is not None:
            yield from walk(node.else_branch)
    elif isinstance(node, While):
        yield from walk(node.cond)
        if node.body is not None:
            yield from walk(node.body)
    elif isinstance(node, Assign):
        yield from walk(node.lhs)
        yield from walk(node.rhs)
    elif isinstance(node, LocExp):
        yield from walk(node.loc)
    elif isinstance(node, BinOp):
        yield from walk(node.lhs)
        yield from walk(node.rhs)
    elif isinstance(node, AddrOf):
        yield from walk(node.loc)
    elif isinstance(node, (RunExp, ReformAliasToInt, ReformIntToInt)):
        yield from walk(node.inner)
    elif isinstance(node, FieldLoc):
        yield from walk(node.base)
    elif isinstance(node, DerefLoc):
        yield from walk(node.inner)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "machines", "field", "var", "on", "begin", "run", "if", "then", "else",
    "while", "do", "fi", "md", "mu", "malloc", "reform", "alis", "int",
}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>\#[^\n]*)
    | (?P<float>\d+\.\d+)
    | (?P<int>\d+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<assign>:=)
    | (?P<arrow>->)
    | (?P<punct>[{}()\[\];,@&+\-*=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, float, or the literal punctuation
    text: str
    line: int
    col: int


def tokenize(source: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col, filename)
        text = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            elif kind in ("assign", "arrow", "punct"):
                kind = text
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str, filename: str):
        self.filename = filename
        self.tokens = tokenize(source, filename)
        self.pos = 0
        self.machines: set[str] = set()
        self.field_table: dict[str, int] = {}
        self.next_site = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = text or kind
            found = tok.text or "end of input"
            raise ParseError(f"expected {want!r}, found {found!r}", tok.line, tok.col, self.filename)
        return self.advance()

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col, self.filename)

    def span_from(self, start: Token) -> Span:
        prev = self.tokens[max(self.pos - 1, 0)]
        return Span(start.line, start.col, prev.line, prev.col + len(prev.text))

    # -- program structure -------------------------------------------------

    def parse_program(self) -> Program:
        self.expect("keyword", "machines")
        self.expect("{")
        hierarchy = self.parse_hierarchy()
        self.expect("}")
        self.machines = set()
        for name in hierarchy.all_machines():
            if name in self.machines:
                raise self.error(f"duplicate machine {name!r}")
            self.machines.add(name)

        decls: list[Decl] = []
        seen_decls: set[str] = set()
        while self.at("keyword", "field") or self.at("keyword", "var"):
            if self.at("keyword", "field"):
                start = self.advance()
                name = self.expect("ident").text
                self.expect("=")
                offset = int(self.expect("int").text)
                self.expect(";")
                if name in self.field_table:
                    raise self.error(f"duplicate field {name!r}", start)
                self.field_table[name] = offset
            else:
                start = self.advance()
                ident = self.expect("ident")
                name = parse_var_name(ident.text).base
                self.expect("keyword", "on")
                machine = self.machine_name()
                self.expect("[")
                size = int(self.expect("int").text)
                self.expect("]")
                self.expect(";")
                if name in seen_decls:
                    raise self.error(f"duplicate variable declaration {name!r}", ident)
                seen_decls.add(name)
                decls.append(Decl(name, machine, size, self.span_from(start)))

        self.expect("keyword", "begin")
        entry = self.machine_name()
        self.expect("{")
        body = self.parse_stmt_seq(end="}")
        self.expect("}")
        self.expect("eof")
        return Program(hierarchy, self.field_table, tuple(decls), entry, body)

    def parse_hierarchy(self) -> MachineHierarchy:
        root = self.expect("ident").text
        children = []
        if self.at("("):
            self.advance()
            while not self.at(")"):
                children.append(self.parse_hierarchy())
            self.advance()
        return MachineHierarchy(root, tuple(children))

    def machine_name(self) -> str:
        tok = self.expect("ident")
        if tok.text not in self.machines:
            raise self.error(f"unknown machine {tok.text!r}", tok)
        return tok.text

    def field_offset(self, name: str) -> int:
        if name not in self.field_table:
            taken = set(self.field_table.values())
            offset = 0
            while offset in taken:
                offset += 1
            self.field_table[name] = offset
        return self.field_table[name]

    # -- statements ---------------------------------------------------------

    def parse_stmt_seq(self, end: str) -> Optional[Stmt]:
        stmts: list[Stmt] = []
        while not self.at(end):
            stmts.append(self.parse_stmt())
        if not stmts:
            return None
        node = stmts[-1]
        for prev in reversed(stmts[:-1]):
            node = Seq(prev, node, Span(prev.span.line, prev.span.col,
                                        node.span.end_line, node.span.end_col))
        return node

    def parse_stmt(self) -> Stmt:
        start = self.peek()
        if self.at("keyword", "run"):
            self.advance()
            self.expect("(")
            machine = self.machine_name()
            self.expect(")")
            self.expect("{")
            body = self.parse_stmt_seq(end="}")
            self.expect("}")
            if body is None:
                raise self.error("empty run block", start)
            return RunStmt(machine, body, self.span_from(start))
        if self.at("keyword", "if"):
            self.advance()
            cond = self.parse_expr()
            prob = self.parse_prob_annotation(DEFAULT_THEN_PROB)
            self.expect("keyword", "then")
            self.expect("{")
            then_branch = self.parse_stmt_seq(end="}")
            self.expect("}")
            self.expect("keyword", "else")
            self.expect("{")
            else_branch = self.parse_stmt_seq(end="}")
            self.expect("}")
            return If(cond, prob, then_branch, else_branch, self.span_from(start))
        if self.at("keyword", "while"):
            self.advance()
            cond = self.parse_expr()
            prob, iters = DEFAULT_BODY_PROB, DEFAULT_EXPECTED_ITERS
            if self.at("@"):
                at_tok = self.advance()
                self.expect("(")
                prob = self.prob_value(at_tok)
                self.expect(",")
                iters = int(self.expect("int").text)
                self.expect(")")
            self.expect("keyword", "do")
            self.expect("{")
            body = self.parse_stmt_seq(end="}")
            self.expect("}")
            return While(cond, prob, iters, body, self.span_from(start))
        if self.at("keyword", "mu"):
            self.advance()
            self.expect("(")
            var = parse_var_name(self.expect("ident").text)
            self.expect(")")
            self.expect(";")
            return Mu(var, self.span_from(start))

        lhs = self.parse_loc()
        self.expect(":=")
        if self.at("keyword", "fi") or self.at("keyword", "md"):
            if not isinstance(lhs, VarLoc):
                raise self.error("fi/md target must be a variable", start)
            kw = self.advance()
            self.expect("(")
            first = parse_var_name(self.expect("ident").text)
            if kw.text == "fi":
                self.expect(",")
                second = parse_var_name(self.expect("ident").text)
                self.expect(")")
                self.expect(";")
                return Phi(lhs.var, first, second, self.span_from(start))
            self.expect(")")
            self.expect(";")
            return Md(lhs.var, first, self.span_from(start))
        rhs = self.parse_expr()
        self.expect(";")
        return Assign(lhs, rhs, self.span_from(start))

    def parse_prob_annotation(self, default: float) -> float:
        if not self.at("@"):
            return default
        at_tok = self.advance()
        return self.prob_value(at_tok)

    def prob_value(self, at_tok: Token) -> float:
        tok = self.peek()
        if tok.kind not in ("float", "int"):
            raise self.error("expected probability after '@'", tok)
        self.advance()
        value = float(tok.text)
        if not 0.0 <= value <= 1.0:
            raise ParseError(f"probability {tok.text} outside [0,1]", tok.line, tok.col, self.filename)
        return value

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_additive()

    def parse_additive(self) -> Expr:
        start = self.peek()
        node = self.parse_term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.parse_term()
            node = BinOp(op, node, rhs, self.span_from(start))
        return node

    def parse_term(self) -> Expr:
        start = self.peek()
        node = self.parse_unary()
        while self.at("*"):
            self.advance()
            rhs = self.parse_unary()
            node = BinOp("*", node, rhs, self.span_from(start))
        return node

    def parse_unary(self) -> Expr:
        start = self.peek()
        if self.at("&"):
            self.advance()
            loc = self.parse_loc()
            return AddrOf(loc, self.span_from(start))
        if self.at("keyword", "reform"):
            self.advance()
            self.expect("(")
            if self.at("keyword", "alis"):
                self.advance()
                machine = self.machine_name()
                self.expect(",")
                self.expect("keyword", "int")
                machine2 = self.machine_name()
                if machine2 != machine:
                    raise self.error("alias-to-int reform must name one machine twice", start)
                self.expect(")")
                inner = self.parse_unary()
                return ReformAliasToInt(machine, inner, self.span_from(start))
            self.expect("keyword", "int")
            from_machine = self.machine_name()
            self.expect(",")
            self.expect("keyword", "int")
            to_machine = self.machine_name()
            self.expect(")")
            inner = self.parse_unary()
            return ReformIntToInt(from_machine, to_machine, inner, self.span_from(start))
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        start = self.peek()
        if self.at("keyword", "malloc"):
            self.advance()
            self.expect("(")
            self.expect(")")
            site = self.next_site
            self.next_site += 1
            return Malloc(site, self.span_from(start))
        if self.at("keyword", "run"):
            self.advance()
            self.expect("(")
            inner = self.parse_expr()
            self.expect(",")
            machine = self.machine_name()
            self.expect(")")
            return RunExp(inner, machine, self.span_from(start))
        if self.at("int"):
            tok = self.advance()
            return IntLit(int(tok.text), self.span_from(start))
        if self.at("("):
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        loc = self.parse_loc()
        return LocExp(loc, self.span_from(start))

    def parse_loc(self) -> LocExpr:
        start = self.peek()
        if self.at("["):
            self.advance()
            inner = self.parse_loc()
            self.expect("]")
            node: LocExpr = DerefLoc(inner, self.span_from(start))
        elif self.at("ident"):
            tok = self.advance()
            node = VarLoc(parse_var_name(tok.text), self.span_from(start))
        else:
            raise self.error(f"expected a location, found {self.peek().text!r}")
        while self.at("->"):
            self.advance()
            name = self.expect("ident").text
            self.field_offset(name)
            node = FieldLoc(node, name, self.span_from(start))
        return node


def parse(source: str, filename: str = "<input>") -> Program:
    """Parse SSA-DisLang source text into a Program.

    Malloc sites are numbered in textual order; field offsets not given a
    ``field`` declaration are auto-assigned in first-use order.
    """
    return _Parser(source, filename).parse_program()


def parse_file(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), filename=path)


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------


def _fmt_prob(p: float) -> str:
    return repr(p)


def pretty_loc(loc: LocExpr) -> str:
    if isinstance(loc, VarLoc):
        return str(loc.var)
    if isinstance(loc, FieldLoc):
        return f"{pretty_loc(loc.base)}->{loc.field_name}"
    return f"[{pretty_loc(loc.inner)}]"


def pretty_expr(expr: Expr, parent_prec: int = 0) -> str:
    # precedence: 1 additive, 2 multiplicative, 3 unary/primary
    if isinstance(expr, LocExp):
        return pretty_loc(expr.loc)
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BinOp):
        prec = 2 if expr.op == "*" else 1
        lhs = pretty_expr(expr.lhs, prec)
        rhs = pretty_expr(expr.rhs, prec + 1)
        text = f"{lhs} {expr.op} {rhs}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, AddrOf):
        return f"&{pretty_loc(expr.loc)}"
    if isinstance(expr, Malloc):
        return "malloc()"
    if isinstance(expr, RunExp):
        return f"run({pretty_expr(expr.inner)}, {expr.machine})"
    if isinstance(expr, ReformAliasToInt):
        return f"reform(alis {expr.machine}, int {expr.machine}) {pretty_expr(expr.inner, 3)}"
    if isinstance(expr, ReformIntToInt):
        return (f"reform(int {expr.from_machine}, int {expr.to_machine}) "
                f"{pretty_expr(expr.inner, 3)}")
    raise TypeError(f"not an expression: {expr!r}")


def _pretty_stmt(stmt: Stmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(stmt, Seq):
        _pretty_stmt(stmt.first, indent, out)
        _pretty_stmt(stmt.second, indent, out)
    elif isinstance(stmt, Assign):
        out.append(f"{pad}{pretty_loc(stmt.lhs)} := {pretty_expr(stmt.rhs)};")
    elif isinstance(stmt, Phi):
        out.append(f"{pad}{stmt.target} := fi({stmt.left}, {stmt.right});")
    elif isinstance(stmt, Md):
        out.append(f"{pad}{stmt.target} := md({stmt.source});")
    elif isinstance(stmt, Mu):
        out.append(f"{pad}mu({stmt.var});")
    elif isinstance(stmt, RunStmt):
        out.append(f"{pad}run ({stmt.machine}) {{")
        _pretty_stmt(stmt.body, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, If):
        out.append(f"{pad}if {pretty_expr(stmt.cond)} @{_fmt_prob(stmt.then_prob)} then {{")
        if stmt.then_branch is not None:
            _pretty_stmt(stmt.then_branch, indent + 1, out)
        out.append(f"{pad}}} else {{")
        if stmt.else_branch is not None:
            _pretty_stmt(stmt.else_branch, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, While):
        out.append(f"{pad}while {pretty_expr(stmt.cond)} "
                   f"@({_fmt_prob(stmt.body_prob)},{stmt.expected_iters}) do {{")
        if stmt.body is not None:
            _pretty_stmt(stmt.body, indent + 1, out)
        out.append(f"{pad}}}")
    else:
        raise TypeError(f"not a statement: {stmt!r}")


def pretty(program: Program) -> str:
    """Canonical source text; ``parse(pretty(p))`` equals ``p`` up to spans.

    Nested sequences print flattened, default annotations print explicitly,
    and all field offsets (including auto-assigned ones) are declared.
    """
    ensure_stack_room(program)
    lines = [f"machines {{ {program.machines} }}"]
    for name, offset in sorted(program.field_table.items(), key=lambda kv: (kv[1], kv[0])):
        lines.append(f"field {name} = {offset};")
    for decl in program.decls:
        lines.append(f"var {decl.name} on {decl.machine}[{decl.size}];")
    lines.append(f"begin {program.entry_machine} {{")
    if program.body is not None:
        _pretty_stmt(program.body, 1, lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


