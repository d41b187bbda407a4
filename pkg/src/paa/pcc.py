"""Certificates: export analysis derivations and re-verify them.

A certificate is a self-contained UTF-8 JSON document::

    {
      "version": 1,
      "digest": "<sha256 of the canonical pretty-printed source>",
      "config": { "threshold": "0.5", "if_merge": "weighted", ... },
      "final": { "<key>": [{"to": "<target>", "p": "<prob>"}, ...], ... },
      "derivation": {
        "rule": "<label>",
        "inputs": { "span": "L:C", "pre": {...}, "reach": "1.0", ... },
        "premises": [ ...nodes... ],
        "conclusion": { "post": {...} } | { "value": {...} }
      }
    }

Probabilities serialize as the shortest decimal string that round-trips
the underlying binary float, and verification compares them exactly; a
certificate is bit-stable for fixed inputs.

The checker walks the derivation in lockstep with the program structure
and, at every node, independently recomputes the rule label, the input
fields, and the conclusion from the program, the configuration and the
premise results.  It shares the data model and serializers with the
analysis but none of its dispatch or evaluation code, so a bug in the
analysis engine cannot silently vouch for itself.  Any mismatch rejects
the certificate with the offending node's path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Union

from .analysis import AnalysisResult
from .derivation import (
    ALL_RULES, Derivation,
    RULE_ADD, RULE_ADDR1, RULE_ADDR2, RULE_ADDR3, RULE_ADDR_OF_E, RULE_ASSIGN,
    RULE_DEREF, RULE_EMPTY, RULE_FI, RULE_FIELD, RULE_IF, RULE_INT_LIT,
    RULE_LOAD, RULE_MALLOC, RULE_MD, RULE_MU, RULE_REFORM1, RULE_REFORM2,
    RULE_REFORM3, RULE_REFORM4, RULE_RUN_E, RULE_RUN_S, RULE_SEQ, RULE_STORE,
    RULE_STORE_DEREF, RULE_VAR, RULE_WHILE,
)
from .domain import (
    BOTTOM, MAX_UNION, WEIGHTED, ITERATED,
    AbstractAddress, AbstractValue, AddrVal, AliasType, AnalysisConfig,
    Bottom, IntVal, ProbPair, Target, VarVal, format_alias_type, format_key,
    format_value, key_sort_key, malloc_region, sort_pairs, target_of_value,
    value_of_target,
)
from .syntax import (
    AddrOf, Assign, BinOp, DerefLoc, FieldLoc, If, IntLit, LocExp, Malloc,
    Md, Mu, Phi, Program, ReformAliasToInt, ReformIntToInt, RunExp, RunStmt,
    Seq, VarLoc, VarName, While, ensure_stack_room, parse_var_name, pretty,
    root_var,
)

CERT_VERSION = 1


def program_digest(program: Program) -> str:
    """Content hash of the canonical source text."""
    return hashlib.sha256(pretty(program).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Serialization (shared data-model code: used by export and by the checker
# to render its recomputed expectations)
# ---------------------------------------------------------------------------


def _ser(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return value
    if isinstance(value, (VarName, AbstractAddress)):
        return format_key(value)
    if isinstance(value, AliasType):
        return format_alias_type(value)
    if isinstance(value, ProbPair):
        return {"to": format_key(value.target), "p": repr(value.p)}
    if isinstance(value, (IntVal, AddrVal, VarVal, Bottom)):
        return format_value(value)
    if isinstance(value, (list, tuple)):
        return [_ser(v) for v in value]
    if isinstance(value, dict):
        return {_ser(k): _ser(v) for k, v in value.items()}
    raise TypeError(f"cannot serialize {value!r}")


def serialize_derivation(node: Optional[Derivation]):
    if node is None:
        return None
    return {
        "rule": node.rule,
        "inputs": _ser(node.inputs),
        "premises": [serialize_derivation(p) for p in node.premises],
        "conclusion": _ser(node.conclusion),
    }


def export_certificate(result: AnalysisResult, program: Program,
                       cfg: Optional[AnalysisConfig] = None) -> str:
    """Render an analysis result as a transferable certificate document;
    byte-deterministic for fixed inputs."""
    cfg = cfg or AnalysisConfig()
    ensure_stack_room(program)
    doc = {
        "version": CERT_VERSION,
        "digest": program_digest(program),
        "config": cfg.to_dict(),
        "final": format_alias_type(result.final),
        "derivation": serialize_derivation(result.derivation),
    }
    # compact rendering: indentation grows quadratically on long
    # statement chains (derivations nest linearly with program length)
    return json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = ""
    path: str = ""

    def __str__(self) -> str:
        if self.accepted:
            return "accepted"
        return f"rejected({self.reason}) at {self.path or '<document>'}"


class _Reject(Exception):
    def __init__(self, reason: str, path: str):
        self.reason = reason
        self.path = path
        super().__init__(f"{reason} at {path}")


# ---------------------------------------------------------------------------
# Independent rule recomputation
#
# Everything below re-derives judgments from scratch: small, explicit,
# and deliberately separate from paa.analysis.
# ---------------------------------------------------------------------------


def _ck_argmax(pairs: list[ProbPair]) -> Target:
    best = None
    for pair in sorted(pairs, key=lambda pr: key_sort_key(pr.target)):
        if best is None or pair.p > best.p:
            best = pair
    if best is None:
        raise ValueError("empty pair set")
    return best.target


def _ck_merge(p1: AliasType, p2: AliasType, w1: float, mode: str) -> AliasType:
    entries = {}
    for key in set(p1.entries) | set(p2.entries):
        left = {pr.target: pr.p for pr in p1.get(key)}
        right = {pr.target: pr.p for pr in p2.get(key)}
        pairs = []
        for target in set(left) | set(right):
            if mode == WEIGHTED:
                if not ((w1 > 0.0 and target in left)
                        or (w1 < 1.0 and target in right)):
                    continue
                p = w1 * left.get(target, 0.0) + (1.0 - w1) * right.get(target, 0.0)
            else:
                p = max(left.get(target, 0.0), right.get(target, 0.0))
            pairs.append(ProbPair(target, p))
        entries[key] = frozenset(pairs)
    return AliasType(entries)


def _ck_sum_pairs(items) -> list[ProbPair]:
    acc: dict = {}
    for target, p in items:
        acc[target] = acc.get(target, 0.0) + p
    return [ProbPair(t, p) for t, p in acc.items()]


def _ck_sorted(pairs) -> list[ProbPair]:
    return sorted(pairs, key=lambda pr: key_sort_key(pr.target))


def _ck_delta(pre: AliasType, post: AliasType) -> dict:
    return {key: _ck_sorted(pairs) for key, pairs in post.entries.items()
            if pre.get(key) != pairs}


class _Checker:
    def __init__(self, program: Program, cfg: AnalysisConfig):
        self.program = program
        self.cfg = cfg
        self.decls = program.decl_map()
        self.pending: Optional[float] = None

    # -- shared small helpers -------------------------------------------------

    def fail(self, reason: str, path: str):
        raise _Reject(reason, path)

    def base_addr(self, root: VarName, path: str) -> AbstractAddress:
        decl = self.decls.get(root.base)
        if decl is None:
            self.fail("undeclared-region", path)
        return AbstractAddress(decl.machine, decl.name, 0)

    def shift(self, addr: AbstractAddress, delta: int, path: str) -> AbstractAddress:
        shifted = addr.shifted(delta)
        decl = self.decls.get(shifted.region)
        size = decl.size if decl is not None else None
        if shifted.offset < 0 or (size is not None and shifted.offset >= size):
            self.fail("oob-offset", path)
        return shifted

    def lookup(self, P: AliasType, key, path: str) -> list[ProbPair]:
        pairs = P.get(key)
        if not pairs:
            self.fail("unbound-location", path)
        return sort_pairs(pairs)

    def node_shape(self, node, path: str) -> None:
        if not isinstance(node, dict):
            self.fail("malformed", path)
        if set(node.keys()) != {"rule", "inputs", "premises", "conclusion"}:
            self.fail("malformed", path)
        if node["rule"] not in ALL_RULES:
            self.fail("malformed", path)
        if not isinstance(node["premises"], list):
            self.fail("malformed", path)
        if not isinstance(node["inputs"], dict) or not isinstance(node["conclusion"], dict):
            self.fail("malformed", path)

    def expect_node(self, node, path: str, rule: str, inputs: dict,
                    premise_count: int) -> None:
        """Rule label, input fields (spans excepted), and premise arity must
        match the recomputation exactly."""
        self.node_shape(node, path)
        if node["rule"] != rule:
            self.fail("rule-mismatch", path)
        expected = {k: _ser(v) for k, v in inputs.items()}
        got = dict(node["inputs"])
        expected.pop("span", None)
        got.pop("span", None)
        if got != expected:
            self.fail("input-mismatch", path)
        if len(node["premises"]) != premise_count:
            self.fail("premise-arity", path)

    def expect_conclusion(self, node, path: str, conclusion: dict) -> None:
        if node["conclusion"] != _ser(conclusion):
            self.fail("conclusion-mismatch", path)

    # -- statements -----------------------------------------------------------
    #
    # The walker re-derives the full alias state; certificate nodes record
    # only the entries each rule read and wrote, and both are recomputed
    # and compared here.

    def apply_writes(self, P: AliasType, writes: dict) -> AliasType:
        return P.updated_many((k, v) for k, v in writes.items())

    def conclude(self, node, path: str, P: AliasType, writes: dict) -> AliasType:
        writes = {k: _ck_sorted(v) for k, v in writes.items()}
        self.expect_conclusion(node, path, {"writes": writes})
        return self.apply_writes(P, writes)

    def check_stmt(self, node, stmt, P: AliasType, reach: float, machine: str,
                   path: str) -> AliasType:
        base = {"reach": reach, "machine": machine, "reads": {}}
        if isinstance(stmt, Seq):
            self.expect_node(node, path, RULE_SEQ, base, 2)
            self.expect_conclusion(node, path, {"writes": {}})
            mid = self.check_stmt(node["premises"][0], stmt.first, P, reach,
                                  machine, path + ".premises[0]")
            return self.check_stmt(node["premises"][1], stmt.second, mid, reach,
                                   machine, path + ".premises[1]")
        if isinstance(stmt, Phi):
            p_left = self.pending if self.pending is not None else 0.5
            p_right = 1.0 - p_left
            self.expect_node(node, path, RULE_FI, {
                **base, "target": stmt.target, "left": stmt.left,
                "right": stmt.right, "p_left": p_left, "p_right": p_right}, 0)
            writes = {stmt.target: _ck_sum_pairs(
                [(stmt.left, p_left), (stmt.right, p_right)])}
            return self.conclude(node, path, P, writes)

        self.pending = None
        if isinstance(stmt, Md):
            return self.check_md(node, stmt, P, base, path)
        if isinstance(stmt, Mu):
            self.expect_node(node, path, RULE_MU, {**base, "var": stmt.var}, 0)
            return self.conclude(node, path, P, {})
        if isinstance(stmt, Assign):
            return self.check_assign(node, stmt, P, reach, machine, base, path)
        if isinstance(stmt, RunStmt):
            self.expect_node(node, path, RULE_RUN_S,
                             {**base, "run_machine": stmt.machine}, 1)
            self.expect_conclusion(node, path, {"writes": {}})
            post = self.check_stmt(node["premises"][0], stmt.body, P, reach,
                                   stmt.machine, path + ".premises[0]")
            self.pending = None
            return post
        if isinstance(stmt, If):
            w = stmt.then_prob
            self.expect_node(node, path, RULE_IF,
                             {**base, "then_prob": w, "mode": self.cfg.if_merge}, 2)
            post_t = self.check_block(node["premises"][0], stmt.then_branch, P,
                                      reach * w, machine, path + ".premises[0]")
            self.pending = None
            post_f = self.check_block(node["premises"][1], stmt.else_branch, P,
                                      reach * (1.0 - w), machine, path + ".premises[1]")
            post = _ck_merge(post_t, post_f, w, self.cfg.if_merge)
            self.expect_conclusion(node, path, {"writes": _ck_delta(P, post)})
            self.pending = w
            return post
        if isinstance(stmt, While):
            return self.check_while(node, stmt, P, reach, machine, base, path)
        self.fail("malformed", path)

    def check_block(self, node, stmt, P: AliasType, reach: float, machine: str,
                    path: str) -> AliasType:
        """A branch or loop body; an absent body is certified by an explicit
        empty node writing nothing."""
        if stmt is None:
            self.expect_node(node, path, RULE_EMPTY,
                             {"reach": reach, "machine": machine, "reads": {}}, 0)
            return self.conclude(node, path, P, {})
        return self.check_stmt(node, stmt, P, reach, machine, path)

    def check_md(self, node, stmt: Md, P: AliasType, base: dict, path: str) -> AliasType:
        source_pairs = sort_pairs(P.get(stmt.source))
        target_pairs = sort_pairs(P.get(stmt.target))
        premise_ok = len(source_pairs) == 1 and len(target_pairs) == 1
        if not premise_ok and self.cfg.strict_md:
            self.fail("md-premise", path)
        reads = {stmt.source: source_pairs, stmt.target: target_pairs}
        self.expect_node(node, path, RULE_MD, {
            **base, "reads": reads, "target": stmt.target, "source": stmt.source,
            "strict": self.cfg.strict_md, "premise_ok": premise_ok}, 0)
        if premise_ok:
            a = source_pairs[0].p
            writes = {stmt.target: _ck_sum_pairs(
                [(target_pairs[0].target, a), (stmt.source, 1.0 - a)])}
        else:
            writes = {}
        return self.conclude(node, path, P, writes)

    def check_while(self, node, stmt: While, P: AliasType, reach: float,
                    machine: str, base: dict, path: str) -> AliasType:
        w = stmt.body_prob
        inputs = {**base, "body_prob": w, "expected_iters": stmt.expected_iters,
                  "mode": self.cfg.while_mode}
        if self.cfg.while_mode == ITERATED:
            self.expect_node(node, path, RULE_WHILE, inputs, stmt.expected_iters)
            states = [P]
            current = P
            for k in range(stmt.expected_iters):
                self.pending = w
                current = self.check_block(
                    node["premises"][k], stmt.body, current, reach * (w ** (k + 1)),
                    machine, f"{path}.premises[{k}]")
                states.append(current)
            post = states[0]
            for state in states[1:]:
                post = _ck_merge(post, state, 0.5, MAX_UNION)
        else:
            self.expect_node(node, path, RULE_WHILE, inputs, 1)
            self.pending = w
            post = self.check_block(node["premises"][0], stmt.body, P, reach * w,
                                    machine, path + ".premises[0]")
        self.expect_conclusion(node, path, {"writes": _ck_delta(P, post)})
        self.pending = w
        return post

    def check_assign(self, node, stmt: Assign, P: AliasType, reach: float,
                     machine: str, base: dict, path: str) -> AliasType:
        lhs, rhs = stmt.lhs, stmt.rhs
        if isinstance(rhs, AddrOf):
            rhs_root = root_var(rhs.loc)
            if isinstance(lhs, FieldLoc):
                lhs_root = root_var(lhs.base)
                offset = self.program.field_table.get(lhs.field_name)
                if offset is None:
                    self.fail("unknown-field", path)
                self.expect_node(node, path, RULE_ADDR2, {
                    **base, "lhs_region": lhs_root, "rhs_region": rhs_root,
                    "field": lhs.field_name, "offset": offset}, 0)
                a1 = self.base_addr(lhs_root, path)
                slot = self.shift(self.base_addr(rhs_root, path), offset, path)
                writes = {a1: [ProbPair(slot, 1.0)]}
            elif isinstance(lhs, DerefLoc):
                lhs_root = root_var(lhs.inner)
                a1 = self.base_addr(lhs_root, path)
                a2 = self.base_addr(rhs_root, path)
                pairs = self.lookup(P, a1, path)
                self.expect_node(node, path, RULE_ADDR3, {
                    **base, "reads": {a1: pairs},
                    "lhs_region": lhs_root, "rhs_region": rhs_root}, 0)
                writes = {pair.target: [ProbPair(a2, pair.p)] for pair in pairs}
            else:
                self.expect_node(node, path, RULE_ADDR1, {
                    **base, "lhs": lhs.var, "region": rhs_root}, 0)
                addr = self.base_addr(rhs_root, path)
                writes = {lhs.var: [ProbPair(addr, 1.0)]}
            return self.conclude(node, path, P, writes)

        if isinstance(rhs, LocExp) and isinstance(rhs.loc, DerefLoc):
            inner = LocExp(rhs.loc.inner)
            if isinstance(lhs, DerefLoc):
                return self.check_store_deref(node, stmt, inner, P, reach,
                                              machine, base, path)
            key = self.lhs_key(lhs, path)
            value = self.check_premise_expr(node, inner, P, reach, machine, path)
            target = target_of_value(value)
            if target is None:
                self.fail("unbound-location", path)
            pairs = self.lookup(P, target, path)
            self.expect_node(node, path, RULE_LOAD,
                             {**base, "reads": {target: pairs}, "lhs_key": key}, 1)
            return self.conclude(node, path, P, {key: pairs})

        if isinstance(lhs, DerefLoc):
            lhs_root = root_var(lhs.inner)
            value = self.check_premise_expr(node, rhs, P, reach, machine, path)
            target = target_of_value(value)
            if target is None:
                self.fail("unbound-location", path)
            value_pairs = self.lookup(P, target, path)
            a_l = self.base_addr(lhs_root, path)
            cell_pairs = self.lookup(P, a_l, path)
            self.expect_node(node, path, RULE_STORE, {
                **base, "reads": {target: value_pairs, a_l: cell_pairs},
                "lhs_region": lhs_root}, 1)
            written = [ProbPair(value_pairs[k].target,
                                min(value_pairs[k].p, cell_pairs[k].p))
                       for k in range(min(len(value_pairs), len(cell_pairs)))]
            writes = {cell.target: written for cell in cell_pairs}
            return self.conclude(node, path, P, writes)

        key = self.lhs_key(lhs, path)
        value = self.check_premise_expr(node, rhs, P, reach, machine, path)
        target = target_of_value(value)
        reads = {target: sort_pairs(P.get(target))} if target is not None else {}
        self.expect_node(node, path, RULE_ASSIGN,
                         {**base, "reads": reads, "lhs_key": key}, 1)
        if target is None:
            pairs = []
        else:
            acc = {pair.target: pair.p for pair in P.get(target)}
            if acc.get(target, 0.0) < 1.0:
                acc[target] = 1.0
            pairs = [ProbPair(t, p) for t, p in acc.items()]
        return self.conclude(node, path, P, {key: pairs})

    def check_premise_expr(self, node, expr, P: AliasType, reach: float,
                           machine: str, path: str) -> AbstractValue:
        """Verify an assignment node's single expression premise first; the
        parent's reads and writes depend on its value."""
        self.node_shape(node, path)
        if len(node["premises"]) != 1:
            self.fail("premise-arity", path)
        return self.check_expr(node["premises"][0], expr, P, reach, machine,
                               path + ".premises[0]")

    def check_store_deref(self, node, stmt, inner, P: AliasType, reach: float,
                          machine: str, base: dict, path: str) -> AliasType:
        lhs_root = root_var(stmt.lhs.inner)
        value = self.check_premise_expr(node, inner, P, reach, machine, path)
        target = target_of_value(value)
        if target is None:
            self.fail("unbound-location", path)
        value_pairs = self.lookup(P, target, path)
        a_l = self.base_addr(lhs_root, path)
        cell_pairs = self.lookup(P, a_l, path)
        reads = {target: value_pairs, a_l: cell_pairs}
        acc: dict = {}
        for k in range(min(len(value_pairs), len(cell_pairs))):
            through = self.lookup(P, value_pairs[k].target, path)
            reads[value_pairs[k].target] = through
            for deep in through:
                p = min(value_pairs[k].p, cell_pairs[k].p * deep.p)
                if deep.target not in acc or p > acc[deep.target]:
                    acc[deep.target] = p
        self.expect_node(node, path, RULE_STORE_DEREF,
                         {**base, "reads": reads, "lhs_region": lhs_root}, 1)
        written = [ProbPair(t, p) for t, p in acc.items()]
        writes = {cell.target: written for cell in cell_pairs}
        return self.conclude(node, path, P, writes)

    def lhs_key(self, loc, path: str):
        if isinstance(loc, VarLoc):
            return loc.var
        return self.base_addr(root_var(loc), path)

    # -- expressions -----------------------------------------------------------

    def check_expr(self, node, expr, P: AliasType, reach: float, machine: str,
                   path: str) -> AbstractValue:
        base = {"reach": reach, "machine": machine}
        if isinstance(expr, LocExp):
            return self.check_loc(node, expr.loc, P, base, path)
        if isinstance(expr, IntLit):
            value = IntVal(expr.value)
            self.expect_node(node, path, RULE_INT_LIT,
                             {**base, "value_literal": expr.value}, 0)
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(expr, AddrOf):
            root = root_var(expr.loc)
            value = AddrVal(self.base_addr(root, path))
            self.expect_node(node, path, RULE_ADDR_OF_E, {**base, "region": root}, 0)
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(expr, Malloc):
            value = AddrVal(AbstractAddress(machine, malloc_region(expr.site), 0))
            self.expect_node(node, path, RULE_MALLOC, {**base, "site": expr.site}, 0)
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(expr, BinOp):
            self.expect_node(node, path, RULE_ADD, {**base, "op": expr.op}, 2)
            lhs = self.check_expr(node["premises"][0], expr.lhs, P, reach, machine,
                                  path + ".premises[0]")
            rhs = self.check_expr(node["premises"][1], expr.rhs, P, reach, machine,
                                  path + ".premises[1]")
            value = self.binop_value(expr.op, lhs, rhs, path)
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(expr, RunExp):
            self.expect_node(node, path, RULE_RUN_E, {
                **base, "run_machine": expr.machine,
                "threshold": self.cfg.threshold}, 1)
            inner = self.check_expr(node["premises"][0], expr.inner, P, reach,
                                    expr.machine, path + ".premises[0]")
            if reach >= self.cfg.threshold:
                value = self.retag(inner, machine)
            else:
                value = BOTTOM
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(expr, ReformAliasToInt):
            inputs = {**base, "reform_machine": expr.machine,
                      "threshold": self.cfg.threshold}
            if reach >= self.cfg.threshold:
                self.expect_node(node, path, RULE_REFORM1, inputs, 1)
                value = self.check_expr(node["premises"][0], expr.inner, P, reach,
                                        machine, path + ".premises[0]")
                self.expect_conclusion(node, path, {"value": value})
                return value
            self.expect_node(node, path, RULE_REFORM2, inputs, 0)
            self.expect_conclusion(node, path, {"value": BOTTOM})
            return BOTTOM
        if isinstance(expr, ReformIntToInt):
            inputs = {**base, "from_machine": expr.from_machine,
                      "to_machine": expr.to_machine, "threshold": self.cfg.threshold}
            if reach >= self.cfg.threshold:
                self.expect_node(node, path, RULE_REFORM3, inputs, 1)
                inner = self.check_expr(node["premises"][0], expr.inner, P, reach,
                                        machine, path + ".premises[0]")
                value = self.retag(inner, expr.to_machine)
                self.expect_conclusion(node, path, {"value": value})
                return value
            self.expect_node(node, path, RULE_REFORM4, inputs, 0)
            self.expect_conclusion(node, path, {"value": BOTTOM})
            return BOTTOM
        self.fail("malformed", path)

    def check_loc(self, node, loc, P: AliasType, base: dict, path: str) -> AbstractValue:
        if isinstance(loc, VarLoc):
            pairs = self.lookup(P, loc.var, path)
            self.expect_node(node, path, RULE_VAR,
                             {**base, "var": loc.var, "pairs": pairs}, 0)
            value = value_of_target(_ck_argmax(pairs))
            self.expect_conclusion(node, path, {"value": value})
            return value
        if isinstance(loc, FieldLoc):
            root = root_var(loc.base)
            root_pairs = self.lookup(P, root, path)
            field_key = parse_var_name(loc.field_name)
            field_pairs = self.lookup(P, field_key, path)
            self.expect_node(node, path, RULE_FIELD, {
                **base, "root": root, "field": loc.field_name,
                "root_pairs": root_pairs, "field_pairs": field_pairs}, 0)
            field_targets = {pair.target for pair in field_pairs}
            best = None
            for j in range(min(len(root_pairs), len(field_pairs))):
                if root_pairs[j].target not in field_targets:
                    continue
                product = root_pairs[j].p * field_pairs[j].p
                candidate = (-product, key_sort_key(field_pairs[j].target), j)
                if best is None or candidate < best:
                    best = candidate
            if best is None:
                self.fail("no-witness", path)
            value = value_of_target(field_pairs[best[2]].target)
            self.expect_conclusion(node, path, {"value": value})
            return value
        root = root_var(loc.inner)
        root_pairs = self.lookup(P, root, path)
        inner_pairs = {pair.target: self.lookup(P, pair.target, path)
                       for pair in root_pairs}
        self.expect_node(node, path, RULE_DEREF, {
            **base, "root": root, "root_pairs": root_pairs,
            "inner_pairs": inner_pairs}, 0)
        best = None
        chosen = None
        for i, pair in enumerate(root_pairs):
            for j, deep in enumerate(inner_pairs[pair.target]):
                product = pair.p * deep.p
                candidate = (-product, key_sort_key(deep.target), i, j)
                if best is None or candidate < best:
                    best = candidate
                    chosen = deep.target
        value = value_of_target(chosen)
        self.expect_conclusion(node, path, {"value": value})
        return value

    def binop_value(self, op: str, lhs: AbstractValue, rhs: AbstractValue,
                    path: str) -> AbstractValue:
        if isinstance(lhs, Bottom) or isinstance(rhs, Bottom):
            return BOTTOM
        if isinstance(lhs, IntVal) and isinstance(rhs, IntVal):
            if op == "+":
                return IntVal(lhs.value + rhs.value)
            if op == "-":
                return IntVal(lhs.value - rhs.value)
            return IntVal(lhs.value * rhs.value)
        if isinstance(lhs, AddrVal) and isinstance(rhs, AddrVal):
            return BOTTOM
        if isinstance(lhs, AddrVal) and isinstance(rhs, IntVal) and op in ("+", "-"):
            delta = rhs.value if op == "+" else -rhs.value
            return AddrVal(self.shift(lhs.addr, delta, path))
        if isinstance(lhs, IntVal) and isinstance(rhs, AddrVal) and op == "+":
            return AddrVal(self.shift(rhs.addr, lhs.value, path))
        return BOTTOM

    def retag(self, value: AbstractValue, machine: str) -> AbstractValue:
        if isinstance(value, AddrVal):
            return AddrVal(AbstractAddress(machine, value.addr.region,
                                           value.addr.offset))
        return value


def check_certificate(cert: Union[str, bytes, dict], program: Program,
                      cfg: Optional[AnalysisConfig] = None) -> Verdict:
    """Re-verify a certificate against a program and configuration.

    Hostile input is fine: malformed documents reject rather than raise.
    Accepted means every node re-derives, the digest matches the
    program, and the root conclusion equals the claimed final type.
    """
    cfg = cfg or AnalysisConfig()
    ensure_stack_room(program)
    if isinstance(cert, (str, bytes)):
        try:
            doc = json.loads(cert)
        except (json.JSONDecodeError, UnicodeDecodeError, RecursionError):
            return Verdict(False, "malformed", "<document>")
    else:
        doc = cert
    if not isinstance(doc, dict):
        return Verdict(False, "malformed", "<document>")
    expected_keys = {"version", "digest", "config", "final", "derivation"}
    if set(doc.keys()) != expected_keys or doc.get("version") != CERT_VERSION:
        return Verdict(False, "malformed", "<document>")
    if doc["digest"] != program_digest(program):
        return Verdict(False, "wrong-program", "digest")
    if doc["config"] != cfg.to_dict():
        return Verdict(False, "config-mismatch", "config")

    checker = _Checker(program, cfg)
    try:
        if program.body is None:
            if doc["derivation"] is not None:
                return Verdict(False, "rule-mismatch", "derivation")
            final = AliasType({})
        else:
            if doc["derivation"] is None:
                return Verdict(False, "malformed", "derivation")
            final = checker.check_stmt(doc["derivation"], program.body,
                                       AliasType({}), 1.0,
                                       program.entry_machine, "derivation")
        if doc["final"] != format_alias_type(final):
            return Verdict(False, "final-mismatch", "final")
    except _Reject as rej:
        return Verdict(False, rej.reason, rej.path)
    except (KeyError, TypeError, ValueError, AttributeError, IndexError):
        return Verdict(False, "malformed", "derivation")
    return Verdict(True)
