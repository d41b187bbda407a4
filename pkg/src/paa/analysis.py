"""The probabilistic alias analysis: judgment engine and transfer rules.

The analysis walks a program once, threading an alias type `P` through
every statement and producing a derivation tree alongside the result.
Location resolution picks the most probable target (argmax; ties go to
the least target in the key order).  Field and dereference resolution
maximise products of the probabilities along the access path.

Assignments dispatch on syntactic shape, in this priority order:

    &2  field := &loc        &3  [loc] := &loc       &1  var := &loc
    []3 [loc] := [loc]       []1 non-deref := [loc]  []2 [loc] := other
    :=  everything else

The seven shapes partition the assignment space: exactly one rule fires
for any assignment.

Branch and loop annotations drive the probabilistic parts: an `if`
analyses both branches from the incoming state and merges them with the
branch weight; a `while` re-analyses its body `expected_iters` times and
folds all intermediate states with max-union.  `reform` and `run`
expressions only propagate values while the reaching probability (the
product of branch weights from entry) stays at or above the configured
threshold; below it they produce bottom.

A note on plain `l := e` (the `:=` rule): the post state maps the
target of `l` to the resolved value `a_e` with probability 1 plus
everything `P` already knew about the contents of `a_e`.  Keeping the
`(a_e, 1)` pair is what lets concrete executions of copies, mallocs and
casts find positive-probability witnesses in the result; the load and
store rules copy contents only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import syntax
from .derivation import (
    Derivation,
    RULE_ADD, RULE_ADDR1, RULE_ADDR2, RULE_ADDR3, RULE_ADDR_OF_E, RULE_ASSIGN,
    RULE_DEREF, RULE_EMPTY, RULE_FI, RULE_FIELD, RULE_IF, RULE_INT_LIT,
    RULE_LOAD, RULE_MALLOC, RULE_MD, RULE_MU, RULE_REFORM1, RULE_REFORM2,
    RULE_REFORM3, RULE_REFORM4, RULE_RUN_E, RULE_RUN_S, RULE_SEQ, RULE_STORE,
    RULE_STORE_DEREF, RULE_VAR, RULE_WHILE,
)
from .domain import (
    BOTTOM, BOTTOM_TYPE, MAX_UNION, WEIGHTED, ITERATED,
    AbstractAddress, AbstractValue, AddrVal, AliasKey, AliasType,
    AnalysisConfig, Bottom, IntVal, ProbPair, ReachCtx, Target,
    key_sort_key, malloc_region, sort_pairs, target_of_value, value_of_target,
)
from .ssa import Diagnostic, WARNING
from .syntax import (
    AddrOf, Assign, BinOp, DerefLoc, FieldLoc, If, IntLit, LocExp, LocExpr,
    Malloc, Md, Mu, Phi, Program, ReformAliasToInt, ReformIntToInt, RunExp,
    RunStmt, Seq, Span, Stmt, VarLoc, VarName, While, root_var,
)

DEFAULT_PHI_PROB = 0.5


class AnalysisError(Exception):
    """Hard analysis failure; `code` is machine-readable, `span` points at
    the offending syntax."""

    def __init__(self, code: str, message: str, span: Span = syntax.DUMMY_SPAN):
        self.code = code
        self.span = span
        super().__init__(f"{span.line}:{span.col}: {code}: {message}")


# ---------------------------------------------------------------------------
# Location resolution
# ---------------------------------------------------------------------------


def _lookup(P: AliasType, key: AliasKey, span: Span, what: str) -> list[ProbPair]:
    pairs = P.get(key)
    if not pairs:
        raise AnalysisError("unbound-location", f"no points-to entry for {what}", span)
    return sort_pairs(pairs)


def resolve_var(x: VarName, P: AliasType, span: Span = syntax.DUMMY_SPAN):
    """Most probable target of a variable."""
    pairs = _lookup(P, x, span, str(x))
    best = pairs[0]
    for pair in pairs[1:]:
        if pair.p > best.p:
            best = pair
    deriv = Derivation(RULE_VAR, (), {"var": x, "pairs": pairs},
                       {"value": value_of_target(best.target)})
    return value_of_target(best.target), deriv


def resolve_field(l: LocExpr, field_name: str, P: AliasType,
                  span: Span = syntax.DUMMY_SPAN):
    """Most probable target of ``l->y``.

    Both pair lists are read in key order; position j contributes a
    candidate when the j-th target of P(l) also occurs among the targets
    of P(y), and the winning candidate maximises ``p_j * q_j``.
    """
    root = root_var(l)
    base_pairs = _lookup(P, root, span, str(root))
    field_key = syntax.parse_var_name(field_name)
    field_pairs = _lookup(P, field_key, span, f"field {field_name}")
    field_targets = {pair.target for pair in field_pairs}
    best = None  # (product, target sort key, index)
    for j in range(min(len(base_pairs), len(field_pairs))):
        if base_pairs[j].target not in field_targets:
            continue
        product = base_pairs[j].p * field_pairs[j].p
        candidate = (-product, key_sort_key(field_pairs[j].target), j)
        if best is None or candidate < best:
            best = candidate
    if best is None:
        raise AnalysisError(
            "no-witness",
            f"no shared index between {root} and field {field_name}", span)
    chosen = field_pairs[best[2]].target
    deriv = Derivation(
        RULE_FIELD, (),
        {"root": root, "field": field_name,
         "root_pairs": base_pairs, "field_pairs": field_pairs},
        {"value": value_of_target(chosen)})
    return value_of_target(chosen), deriv


def resolve_deref(l: LocExpr, P: AliasType, span: Span = syntax.DUMMY_SPAN):
    """Most probable target of ``[l]``: maximise ``p_i * q_j^i`` over every
    target of P(l) and every target one level further down."""
    root = root_var(l)
    base_pairs = _lookup(P, root, span, str(root))
    inner: list[tuple[ProbPair, list[ProbPair]]] = []
    for pair in base_pairs:
        inner.append((pair, _lookup(P, pair.target, span, str(pair.target))))
    best = None
    chosen: Optional[Target] = None
    for i, (pair, pairs_i) in enumerate(inner):
        for j, inner_pair in enumerate(pairs_i):
            product = pair.p * inner_pair.p
            candidate = (-product, key_sort_key(inner_pair.target), i, j)
            if best is None or candidate < best:
                best = candidate
                chosen = inner_pair.target
    assert chosen is not None
    deriv = Derivation(
        RULE_DEREF, (),
        {"root": root, "root_pairs": base_pairs,
         "inner_pairs": {pair.target: pairs for pair, pairs in inner}},
        {"value": value_of_target(chosen)})
    return value_of_target(chosen), deriv


# ---------------------------------------------------------------------------
# Merge
# ---------------------------------------------------------------------------


def merge(p1: AliasType, p2: AliasType, w1: float, mode: str = WEIGHTED) -> AliasType:
    """Combine two alias types.

    weighted: convex combination with weight `w1` on `p1`, treating an
    absent target as probability 0; a target survives only if it comes
    from a side with positive weight.  maxUnion: union of the pair sets,
    keeping the larger probability per duplicate target.
    """
    if mode == WEIGHTED and not 0.0 <= w1 <= 1.0:
        raise ValueError(f"merge weight {w1} outside [0,1]")
    w2 = 1.0 - w1
    entries = {}
    for key in set(p1.entries) | set(p2.entries):
        left = {pr.target: pr.p for pr in p1.get(key)}
        right = {pr.target: pr.p for pr in p2.get(key)}
        pairs = []
        for target in set(left) | set(right):
            if mode == WEIGHTED:
                if not ((w1 > 0.0 and target in left) or (w2 > 0.0 and target in right)):
                    continue
                p = w1 * left.get(target, 0.0) + w2 * right.get(target, 0.0)
            else:
                p = max(left.get(target, 0.0), right.get(target, 0.0))
            pairs.append(ProbPair(target, p))
        entries[key] = frozenset(pairs)
    return AliasType(entries)


def _merge_pairs_max(acc: dict, pairs) -> None:
    for pair in pairs:
        if pair.target not in acc or pair.p > acc[pair.target]:
            acc[pair.target] = pair.p


# ---------------------------------------------------------------------------
# Assignment dispatch
# ---------------------------------------------------------------------------


def classify_assign(stmt: Assign) -> str:
    """Which transfer rule an assignment falls under; total over all
    syntactic shapes, and exactly one rule applies to each."""
    lhs, rhs = stmt.lhs, stmt.rhs
    if isinstance(rhs, AddrOf):
        if isinstance(lhs, FieldLoc):
            return RULE_ADDR2
        if isinstance(lhs, DerefLoc):
            return RULE_ADDR3
        return RULE_ADDR1
    if isinstance(rhs, LocExp) and isinstance(rhs.loc, DerefLoc):
        if isinstance(lhs, DerefLoc):
            return RULE_STORE_DEREF
        return RULE_LOAD
    if isinstance(lhs, DerefLoc):
        return RULE_STORE
    return RULE_ASSIGN


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------


@dataclass
class AnalysisResult:
    final: AliasType
    per_point: dict  # "line:col" -> pre-state AliasType
    derivation: Optional[Derivation]
    warnings: list = field(default_factory=list)


class Analyzer:
    """Single-use walker: one instance analyses one program once."""

    def __init__(self, program: Program, cfg: AnalysisConfig):
        self.program = program
        self.cfg = cfg
        self.machines = set(program.machine_names())
        self.decls = program.decl_map()
        self.warnings: list[Diagnostic] = []
        self.per_point: dict[str, AliasType] = {}
        # Branch weight of the join governing upcoming fi statements.
        self.pending_join: Optional[float] = None

    # -- helpers -------------------------------------------------------------

    def warn(self, code: str, message: str, span: Span) -> None:
        self.warnings.append(Diagnostic(WARNING, code, span, message))

    def base_addr(self, root: VarName, span: Span) -> AbstractAddress:
        decl = self.decls.get(root.base)
        if decl is None:
            raise AnalysisError("unbound-location",
                                f"no declared region for {root.base}", span)
        return AbstractAddress(decl.machine, decl.name, 0)

    def region_size(self, addr: AbstractAddress) -> Optional[int]:
        decl = self.decls.get(addr.region)
        return decl.size if decl is not None else None

    def shift_addr(self, addr: AbstractAddress, delta: int, span: Span) -> AbstractAddress:
        shifted = addr.shifted(delta)
        size = self.region_size(shifted)
        if shifted.offset < 0 or (size is not None and shifted.offset >= size):
            raise AnalysisError(
                "oob-offset",
                f"offset {shifted.offset} outside region {shifted.region}", span)
        return shifted

    def check_machine(self, name: str, span: Span) -> str:
        if name not in self.machines:
            raise AnalysisError("unknown-machine", f"machine {name!r} not declared", span)
        return name

    def field_offset(self, name: str, span: Span) -> int:
        if name not in self.program.field_table:
            raise AnalysisError("unknown-field", f"field {name!r} has no offset", span)
        return self.program.field_table[name]

    def lhs_key(self, loc: LocExpr, span: Span) -> AliasKey:
        # Variables key directly (they are registers); composite targets
        # key on the base address of their root region.
        if isinstance(loc, VarLoc):
            return loc.var
        return self.base_addr(root_var(loc), span)

    # -- expressions -----------------------------------------------------------

    def eval_expr(self, expr, P: AliasType, ctx: ReachCtx):
        value, deriv = self._eval(expr, P, ctx)
        return value, deriv

    def _expr_node(self, rule: str, expr, ctx: ReachCtx, premises, inputs: dict,
                   value: AbstractValue) -> Derivation:
        base = {"span": str(expr.span), "reach": ctx.reach_prob, "machine": ctx.machine}
        base.update(inputs)
        return Derivation(rule, tuple(premises), base, {"value": value})

    def _eval(self, expr, P: AliasType, ctx: ReachCtx):
        span = expr.span
        if isinstance(expr, LocExp):
            value, deriv = self._eval_loc(expr.loc, P, span)
            deriv = replace(deriv, inputs={
                "span": str(span), "reach": ctx.reach_prob, "machine": ctx.machine,
                **deriv.inputs})
            return value, deriv
        if isinstance(expr, IntLit):
            value = IntVal(expr.value)
            return value, self._expr_node(RULE_INT_LIT, expr, ctx, (), {"value_literal": expr.value}, value)
        if isinstance(expr, AddrOf):
            root = root_var(expr.loc)
            addr = self.base_addr(root, span)
            value = AddrVal(addr)
            return value, self._expr_node(RULE_ADDR_OF_E, expr, ctx, (), {"region": root}, value)
        if isinstance(expr, Malloc):
            value = AddrVal(AbstractAddress(ctx.machine, malloc_region(expr.site), 0))
            return value, self._expr_node(RULE_MALLOC, expr, ctx, (), {"site": expr.site}, value)
        if isinstance(expr, BinOp):
            lhs, d1 = self._eval(expr.lhs, P, ctx)
            rhs, d2 = self._eval(expr.rhs, P, ctx)
            value = self._apply_binop(expr.op, lhs, rhs, span)
            return value, self._expr_node(RULE_ADD, expr, ctx, (d1, d2), {"op": expr.op}, value)
        if isinstance(expr, RunExp):
            machine = self.check_machine(expr.machine, span)
            inner_value, inner_d = self._eval(expr.inner, P, ctx.on(machine))
            if ctx.reach_prob >= self.cfg.threshold:
                value = _retag(inner_value, ctx.machine)
            else:
                value = BOTTOM
            inputs = {"run_machine": machine, "threshold": self.cfg.threshold}
            return value, self._expr_node(RULE_RUN_E, expr, ctx, (inner_d,), inputs, value)
        if isinstance(expr, ReformAliasToInt):
            machine = self.check_machine(expr.machine, span)
            if ctx.reach_prob >= self.cfg.threshold:
                value, inner_d = self._eval(expr.inner, P, ctx)
                inputs = {"reform_machine": machine, "threshold": self.cfg.threshold}
                return value, self._expr_node(RULE_REFORM1, expr, ctx, (inner_d,), inputs, value)
            inputs = {"reform_machine": machine, "threshold": self.cfg.threshold}
            return BOTTOM, self._expr_node(RULE_REFORM2, expr, ctx, (), inputs, BOTTOM)
        if isinstance(expr, ReformIntToInt):
            from_machine = self.check_machine(expr.from_machine, span)
            to_machine = self.check_machine(expr.to_machine, span)
            inputs = {"from_machine": from_machine, "to_machine": to_machine,
                      "threshold": self.cfg.threshold}
            if ctx.reach_prob >= self.cfg.threshold:
                inner_value, inner_d = self._eval(expr.inner, P, ctx)
                value = _retag(inner_value, to_machine)
                return value, self._expr_node(RULE_REFORM3, expr, ctx, (inner_d,), inputs, value)
            return BOTTOM, self._expr_node(RULE_REFORM4, expr, ctx, (), inputs, BOTTOM)
        raise TypeError(f"not an expression: {expr!r}")

    def _eval_loc(self, loc: LocExpr, P: AliasType, span: Span):
        if isinstance(loc, VarLoc):
            return resolve_var(loc.var, P, span)
        if isinstance(loc, FieldLoc):
            return resolve_field(loc.base, loc.field_name, P, span)
        return resolve_deref(loc.inner, P, span)

    def _apply_binop(self, op: str, lhs: AbstractValue, rhs: AbstractValue,
                     span: Span) -> AbstractValue:
        if isinstance(lhs, Bottom) or isinstance(rhs, Bottom):
            return BOTTOM
        if isinstance(lhs, IntVal) and isinstance(rhs, IntVal):
            if op == "+":
                return IntVal(lhs.value + rhs.value)
            if op == "-":
                return IntVal(lhs.value - rhs.value)
            return IntVal(lhs.value * rhs.value)
        if isinstance(lhs, AddrVal) and isinstance(rhs, AddrVal):
            self.warn("addr-addr-arith",
                      "arithmetic on two addresses has no meaning; result is bottom", span)
            return BOTTOM
        if isinstance(lhs, AddrVal) and isinstance(rhs, IntVal):
            if op == "+":
                return AddrVal(self.shift_addr(lhs.addr, rhs.value, span))
            if op == "-":
                return AddrVal(self.shift_addr(lhs.addr, -rhs.value, span))
        if isinstance(lhs, IntVal) and isinstance(rhs, AddrVal) and op == "+":
            return AddrVal(self.shift_addr(rhs.addr, lhs.value, span))
        self.warn("addr-arith",
                  f"unsupported operand shapes for {op!r}; result is bottom", span)
        return BOTTOM

    # -- statements --------------------------------------------------------------

    def transfer(self, stmt: Stmt, P: AliasType, ctx: ReachCtx):
        self.per_point.setdefault(str(stmt.span), P)
        if isinstance(stmt, Seq):
            p1, d1 = self.transfer(stmt.first, P, ctx)
            p2, d2 = self.transfer(stmt.second, p1, ctx)
            node = Derivation(RULE_SEQ, (d1, d2), self._stmt_inputs(stmt, ctx),
                              {"writes": {}})
            return p2, node
        if isinstance(stmt, Phi):
            return self._transfer_phi(stmt, P, ctx)

        # Any other statement ends the influence of a preceding join.
        self.pending_join = None
        if isinstance(stmt, Assign):
            return self._transfer_assign(stmt, P, ctx)
        if isinstance(stmt, Md):
            return self._transfer_md(stmt, P, ctx)
        if isinstance(stmt, Mu):
            node = Derivation(RULE_MU, (), self._stmt_inputs(stmt, ctx, var=stmt.var),
                              {"writes": {}})
            return P, node
        if isinstance(stmt, RunStmt):
            machine = self.check_machine(stmt.machine, stmt.span)
            body_p, body_d = self.transfer(stmt.body, P, ctx.on(machine))
            self.pending_join = None
            node = Derivation(RULE_RUN_S, (body_d,),
                              self._stmt_inputs(stmt, ctx, run_machine=machine),
                              {"writes": {}})
            return body_p, node
        if isinstance(stmt, If):
            return self._transfer_if(stmt, P, ctx)
        if isinstance(stmt, While):
            return self._transfer_while(stmt, P, ctx)
        raise TypeError(f"not a statement: {stmt!r}")

    def _stmt_inputs(self, stmt, ctx: ReachCtx, reads=None, **extra) -> dict:
        inputs = {"span": str(stmt.span), "reach": ctx.reach_prob,
                  "machine": ctx.machine,
                  "reads": {k: sort_pairs(v) for k, v in (reads or {}).items()}}
        inputs.update(extra)
        return inputs

    def _write(self, P: AliasType, writes: dict) -> AliasType:
        return P.updated_many((key, pairs) for key, pairs in writes.items())

    def _empty_node(self, ctx: ReachCtx) -> Derivation:
        return Derivation(RULE_EMPTY, (),
                          {"span": "0:0", "reach": ctx.reach_prob,
                           "machine": ctx.machine, "reads": {}},
                          {"writes": {}})

    def _transfer_phi(self, stmt: Phi, P: AliasType, ctx: ReachCtx):
        p_left = self.pending_join if self.pending_join is not None else DEFAULT_PHI_PROB
        p_right = 1.0 - p_left
        writes = {stmt.target: _pairs_summing(
            [(stmt.left, p_left), (stmt.right, p_right)])}
        post = self._write(P, writes)
        node = Derivation(
            RULE_FI, (),
            self._stmt_inputs(stmt, ctx, target=stmt.target, left=stmt.left,
                              right=stmt.right, p_left=p_left, p_right=p_right),
            {"writes": _sorted(writes)})
        return post, node

    def _transfer_md(self, stmt: Md, P: AliasType, ctx: ReachCtx):
        source_pairs = sort_pairs(P.get(stmt.source))
        target_pairs = sort_pairs(P.get(stmt.target))
        reads = {stmt.source: source_pairs, stmt.target: target_pairs}
        premise_ok = len(source_pairs) == 1 and len(target_pairs) == 1
        if not premise_ok:
            if self.cfg.strict_md:
                raise AnalysisError(
                    "md-premise",
                    f"md needs singleton entries for {stmt.source} and {stmt.target}",
                    stmt.span)
            self.warn("md-premise",
                      f"md premises not singletons; {stmt.target} left unchanged",
                      stmt.span)
            writes = {}
        else:
            a = source_pairs[0].p
            chained = target_pairs[0].target
            writes = {stmt.target: _pairs_summing(
                [(chained, a), (stmt.source, 1.0 - a)])}
        post = self._write(P, writes)
        node = Derivation(
            RULE_MD, (),
            self._stmt_inputs(stmt, ctx, reads=reads, target=stmt.target,
                              source=stmt.source, strict=self.cfg.strict_md,
                              premise_ok=premise_ok),
            {"writes": _sorted(writes)})
        return post, node

    def _transfer_if(self, stmt: If, P: AliasType, ctx: ReachCtx):
        w = stmt.then_prob
        if stmt.then_branch is not None:
            p_then, d_then = self.transfer(stmt.then_branch, P, ctx.scaled(w))
        else:
            p_then, d_then = P, self._empty_node(ctx.scaled(w))
        self.pending_join = None
        if stmt.else_branch is not None:
            p_else, d_else = self.transfer(stmt.else_branch, P, ctx.scaled(1.0 - w))
        else:
            p_else, d_else = P, self._empty_node(ctx.scaled(1.0 - w))
        post = merge(p_then, p_else, w, self.cfg.if_merge)
        node = Derivation(
            RULE_IF, (d_then, d_else),
            self._stmt_inputs(stmt, ctx, then_prob=w, mode=self.cfg.if_merge),
            {"writes": delta(P, post)})
        self.pending_join = w
        return post, node

    def _transfer_while(self, stmt: While, P: AliasType, ctx: ReachCtx):
        w = stmt.body_prob
        premises = []
        if self.cfg.while_mode == ITERATED:
            states = [P]
            current = P
            for k in range(stmt.expected_iters):
                body_ctx = ctx.scaled(w ** (k + 1))
                self.pending_join = w
                if stmt.body is not None:
                    current, d = self.transfer(stmt.body, current, body_ctx)
                else:
                    d = self._empty_node(body_ctx)
                premises.append(d)
                states.append(current)
            post = states[0]
            for state in states[1:]:
                post = merge(post, state, 0.5, MAX_UNION)
        else:
            self.pending_join = w
            if stmt.body is not None:
                post, d = self.transfer(stmt.body, P, ctx.scaled(w))
            else:
                post, d = P, self._empty_node(ctx.scaled(w))
            premises.append(d)
        node = Derivation(
            RULE_WHILE, tuple(premises),
            self._stmt_inputs(stmt, ctx, body_prob=w,
                              expected_iters=stmt.expected_iters,
                              mode=self.cfg.while_mode),
            {"writes": delta(P, post)})
        self.pending_join = w
        return post, node

    def _transfer_assign(self, stmt: Assign, P: AliasType, ctx: ReachCtx):
        rule = classify_assign(stmt)
        span = stmt.span
        if rule == RULE_ADDR1:
            assert isinstance(stmt.rhs, AddrOf) and isinstance(stmt.lhs, VarLoc)
            region = root_var(stmt.rhs.loc)
            addr = self.base_addr(region, span)
            writes = {stmt.lhs.var: [ProbPair(addr, 1.0)]}
            node = Derivation(
                rule, (),
                self._stmt_inputs(stmt, ctx, lhs=stmt.lhs.var, region=region),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node
        if rule == RULE_ADDR2:
            assert isinstance(stmt.rhs, AddrOf) and isinstance(stmt.lhs, FieldLoc)
            lhs_root = root_var(stmt.lhs.base)
            rhs_root = root_var(stmt.rhs.loc)
            a1 = self.base_addr(lhs_root, span)
            a2 = self.base_addr(rhs_root, span)
            offset = self.field_offset(stmt.lhs.field_name, span)
            slot = self.shift_addr(a2, offset, span)
            writes = {a1: [ProbPair(slot, 1.0)]}
            node = Derivation(
                rule, (),
                self._stmt_inputs(stmt, ctx, lhs_region=lhs_root,
                                  rhs_region=rhs_root,
                                  field=stmt.lhs.field_name, offset=offset),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node
        if rule == RULE_ADDR3:
            assert isinstance(stmt.rhs, AddrOf) and isinstance(stmt.lhs, DerefLoc)
            lhs_root = root_var(stmt.lhs.inner)
            rhs_root = root_var(stmt.rhs.loc)
            a1 = self.base_addr(lhs_root, span)
            a2 = self.base_addr(rhs_root, span)
            pairs = _lookup(P, a1, span, str(a1))
            writes = {pair.target: [ProbPair(a2, pair.p)] for pair in pairs}
            node = Derivation(
                rule, (),
                self._stmt_inputs(stmt, ctx, reads={a1: pairs},
                                  lhs_region=lhs_root, rhs_region=rhs_root),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node
        if rule == RULE_LOAD:
            assert isinstance(stmt.rhs, LocExp) and isinstance(stmt.rhs.loc, DerefLoc)
            key = self.lhs_key(stmt.lhs, span)
            inner = LocExp(stmt.rhs.loc.inner, stmt.rhs.span)
            a_e, d_e = self._eval(inner, P, ctx)
            target = target_of_value(a_e)
            if target is None:
                raise AnalysisError("unbound-location",
                                    "dereferenced expression has no target", span)
            pairs = _lookup(P, target, span, str(target))
            writes = {key: pairs}
            node = Derivation(
                rule, (d_e,),
                self._stmt_inputs(stmt, ctx, reads={target: pairs}, lhs_key=key),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node
        if rule == RULE_STORE:
            assert isinstance(stmt.lhs, DerefLoc)
            a_l = self.base_addr(root_var(stmt.lhs.inner), span)
            a_e, d_e = self._eval(stmt.rhs, P, ctx)
            target = target_of_value(a_e)
            if target is None:
                raise AnalysisError("unbound-location",
                                    "stored expression has no target", span)
            value_pairs = _lookup(P, target, span, str(target))
            cell_pairs = _lookup(P, a_l, span, str(a_l))
            written = [
                ProbPair(value_pairs[k].target, min(value_pairs[k].p, cell_pairs[k].p))
                for k in range(min(len(value_pairs), len(cell_pairs)))
            ]
            writes = {cell.target: written for cell in cell_pairs}
            node = Derivation(
                rule, (d_e,),
                self._stmt_inputs(stmt, ctx,
                                  reads={target: value_pairs, a_l: cell_pairs},
                                  lhs_region=root_var(stmt.lhs.inner)),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node
        if rule == RULE_STORE_DEREF:
            assert isinstance(stmt.lhs, DerefLoc)
            assert isinstance(stmt.rhs, LocExp) and isinstance(stmt.rhs.loc, DerefLoc)
            a_l = self.base_addr(root_var(stmt.lhs.inner), span)
            inner = LocExp(stmt.rhs.loc.inner, stmt.rhs.span)
            a_e, d_e = self._eval(inner, P, ctx)
            target = target_of_value(a_e)
            if target is None:
                raise AnalysisError("unbound-location",
                                    "dereferenced expression has no target", span)
            value_pairs = _lookup(P, target, span, str(target))
            cell_pairs = _lookup(P, a_l, span, str(a_l))
            reads = {target: value_pairs, a_l: cell_pairs}
            acc: dict[Target, float] = {}
            for k in range(min(len(value_pairs), len(cell_pairs))):
                through = _lookup(P, value_pairs[k].target, span,
                                  str(value_pairs[k].target))
                reads[value_pairs[k].target] = through
                for deep in through:
                    p = min(value_pairs[k].p, cell_pairs[k].p * deep.p)
                    if deep.target not in acc or p > acc[deep.target]:
                        acc[deep.target] = p
            written = [ProbPair(t, p) for t, p in acc.items()]
            writes = {cell.target: written for cell in cell_pairs}
            node = Derivation(
                rule, (d_e,),
                self._stmt_inputs(stmt, ctx, reads=reads,
                                  lhs_region=root_var(stmt.lhs.inner)),
                {"writes": _sorted(writes)})
            return self._write(P, writes), node

        assert rule == RULE_ASSIGN
        key = self.lhs_key(stmt.lhs, span)
        a_e, d_e = self._eval(stmt.rhs, P, ctx)
        target = target_of_value(a_e)
        reads = {target: sort_pairs(P.get(target))} if target is not None else {}
        writes = {key: assign_pairs(P, a_e)}
        node = Derivation(
            rule, (d_e,),
            self._stmt_inputs(stmt, ctx, reads=reads, lhs_key=key),
            {"writes": _sorted(writes)})
        return self._write(P, writes), node


def assign_pairs(P: AliasType, value: AbstractValue) -> list[ProbPair]:
    """Pair set written by a plain assignment: the resolved value itself at
    probability 1, joined (by max) with the known contents of that value."""
    target = target_of_value(value)
    if target is None:
        return []
    acc = {pair.target: pair.p for pair in P.get(target)}
    if target not in acc or acc[target] < 1.0:
        acc[target] = 1.0
    return [ProbPair(t, p) for t, p in acc.items()]


def delta(pre: AliasType, post: AliasType) -> dict:
    """Entries of `post` that differ from `pre`; transfer rules only add or
    replace entries, so this is the full change set."""
    return {key: sort_pairs(pairs) for key, pairs in post.entries.items()
            if pre.get(key) != pairs}


def _sorted(writes: dict) -> dict:
    return {key: sort_pairs(pairs) for key, pairs in writes.items()}


def _pairs_summing(items: list) -> list[ProbPair]:
    """Build a pair set from (target, p) items, summing duplicates (the two
    branches of a join are mutually exclusive)."""
    acc: dict[Target, float] = {}
    for target, p in items:
        acc[target] = acc.get(target, 0.0) + p
    return [ProbPair(t, p) for t, p in acc.items()]


def _retag(value: AbstractValue, machine: str) -> AbstractValue:
    if isinstance(value, AddrVal):
        return AddrVal(replace(value.addr, machine=machine))
    return value


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def eval_expr(expr, P: AliasType, ctx: ReachCtx, cfg: AnalysisConfig,
              program: Program):
    """Evaluate one expression; returns (value, derivation)."""
    return Analyzer(program, cfg).eval_expr(expr, P, ctx)


def transfer_stmt(stmt: Stmt, P: AliasType, ctx: ReachCtx, cfg: AnalysisConfig,
                  program: Program):
    """Transfer one statement; returns (post alias type, derivation).

    When called on a bare fi outside its governing join, the branch weight
    defaults to 0.5.
    """
    return Analyzer(program, cfg).transfer(stmt, P, ctx)


def analyze(program: Program, cfg: Optional[AnalysisConfig] = None) -> AnalysisResult:
    """Run the analysis over a whole program from the bottom alias type.

    The per-point table records the pre-state at every statement span
    (first visit wins for re-analysed loop bodies).  Aborts with
    AnalysisError on the first hard error.
    """
    cfg = cfg or AnalysisConfig()
    if program.body is None:
        return AnalysisResult(BOTTOM_TYPE, {}, None, [])
    syntax.ensure_stack_room(program)
    walker = Analyzer(program, cfg)
    ctx = ReachCtx(1.0, program.entry_machine)
    final, deriv = walker.transfer(program.body, BOTTOM_TYPE, ctx)
    return AnalysisResult(final, walker.per_point, deriv, walker.warnings)
