"""Seeded concrete interpreter and the statistical soundness harness.

The interpreter gives SSA-DisLang a deterministic-per-seed operational
semantics whose probabilistic choices mirror exactly the annotations the
analysis consumes: in the default `annotated` branch mode an `if` takes
its then branch with the annotated probability and a `while` draws its
body probability before every iteration.  `md` and `mu` are runtime
no-ops; `fi` takes whichever argument was defined most recently on the
executed path.

`conforms` implements the support-soundness reading of analysis
correctness: every concrete points-to fact in a final memory must have a
positive-probability witness in the analysed alias type, with variable
targets chased through the alias type's argmax chain.  `sample` runs a
seed range and aggregates final points-to frequencies, the raw material
for checking that annotated branch probabilities show up in the observed
target frequencies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .domain import AbstractAddress, AliasType, argmax_pair, malloc_region
from .syntax import (
    AddrOf, Assign, BinOp, FieldLoc, If, IntLit, LocExp, LocExpr,
    Malloc, Md, Mu, Phi, Program, ReformAliasToInt, ReformIntToInt, RunExp,
    RunStmt, Seq, Span, Stmt, VarLoc, VarName, While, ensure_stack_room,
    root_var,
)

ANNOTATED = "annotated"
CONCRETE = "concrete"

DEFAULT_MAX_STEPS = 10 ** 6


class InterpretError(Exception):
    def __init__(self, code: str, message: str, span: Span):
        self.code = code
        self.span = span
        super().__init__(f"{span.line}:{span.col}: {code}: {message}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    branch_mode: str = ANNOTATED

    def __post_init__(self) -> None:
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.branch_mode not in (ANNOTATED, CONCRETE):
            raise ValueError(f"unknown branch mode {self.branch_mode!r}")


@dataclass(frozen=True, order=True)
class ConcreteAddr:
    """A runtime cell.  `instance` separates allocations of one malloc
    site within a run; declared regions always use instance 0."""

    machine: str
    region: str
    instance: int
    offset: int

    def shifted(self, delta: int) -> "ConcreteAddr":
        return replace(self, offset=self.offset + delta)

    def abstract(self) -> AbstractAddress:
        return AbstractAddress(self.machine, self.region, self.offset)

    def __str__(self) -> str:
        if self.instance:
            return f"{self.machine}:{self.region}[{self.instance}]+{self.offset}"
        return f"{self.machine}:{self.region}+{self.offset}"


@dataclass(frozen=True)
class CInt:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class CAddr:
    addr: ConcreteAddr

    def __str__(self) -> str:
        return str(self.addr)


UNINIT = object()

ConcreteValue = Union[CInt, CAddr]


@dataclass
class ConcreteMemory:
    """Final state of a run: the variable environment plus every written
    memory cell (stores are flat; the machine lives inside the address)."""

    env: dict = field(default_factory=dict)      # VarName -> ConcreteValue
    store: dict = field(default_factory=dict)    # ConcreteAddr -> ConcreteValue

    def env_sorted(self):
        return sorted(self.env.items(), key=lambda kv: (kv[0].base, kv[0].version))

    def store_sorted(self):
        return sorted(self.store.items(), key=lambda kv: kv[0])


class _Interp:
    def __init__(self, program: Program, rc: RunConfig):
        self.program = program
        self.rc = rc
        self.rng = random.Random(rc.seed)
        self.decls = program.decl_map()
        self.memory = ConcreteMemory()
        self.def_time: dict[VarName, int] = {}
        self.clock = 0
        self.steps = 0
        self.malloc_counts: dict[int, int] = {}

    # -- plumbing ------------------------------------------------------------

    def tick(self, span: Span) -> None:
        self.steps += 1
        if self.steps > self.rc.max_steps:
            raise InterpretError("step-limit",
                                 f"exceeded {self.rc.max_steps} steps", span)

    def region_size(self, addr: ConcreteAddr) -> Optional[int]:
        decl = self.decls.get(addr.region)
        return decl.size if decl is not None else None

    def check_bounds(self, addr: ConcreteAddr, span: Span) -> ConcreteAddr:
        size = self.region_size(addr)
        if addr.offset < 0 or (size is not None and addr.offset >= size):
            raise InterpretError("oob-offset",
                                 f"offset {addr.offset} outside region {addr.region}", span)
        return addr

    def load(self, addr: ConcreteAddr, span: Span) -> ConcreteValue:
        self.check_bounds(addr, span)
        value = self.memory.store.get(addr, UNINIT)
        if value is UNINIT:
            raise InterpretError("uninit-read", f"read of uninitialised cell {addr}", span)
        return value

    def store(self, addr: ConcreteAddr, value: ConcreteValue, span: Span) -> None:
        self.check_bounds(addr, span)
        self.memory.store[addr] = value

    def read_var(self, var: VarName, span: Span) -> ConcreteValue:
        value = self.memory.env.get(var, UNINIT)
        if value is UNINIT:
            raise InterpretError("uninit-read", f"read of unassigned variable {var}", span)
        return value

    def write_var(self, var: VarName, value: ConcreteValue) -> None:
        self.memory.env[var] = value
        self.clock += 1
        self.def_time[var] = self.clock

    def base_addr(self, root: VarName, span: Span) -> ConcreteAddr:
        decl = self.decls.get(root.base)
        if decl is None:
            raise InterpretError("uninit-read",
                                 f"no declared region for {root.base}", span)
        return ConcreteAddr(decl.machine, decl.name, 0, 0)

    # -- locations -----------------------------------------------------------

    def loc_value(self, loc: LocExpr, span: Span) -> ConcreteValue:
        if isinstance(loc, VarLoc):
            return self.read_var(loc.var, span)
        if isinstance(loc, FieldLoc):
            base = self.loc_value(loc.base, span)
            addr = self.as_addr(base, span)
            offset = self.program.field_table.get(loc.field_name, 0)
            return self.load(addr.shifted(offset), span)
        base = self.loc_value(loc.inner, span)
        return self.load(self.as_addr(base, span), span)

    def as_addr(self, value: ConcreteValue, span: Span) -> ConcreteAddr:
        if not isinstance(value, CAddr):
            raise InterpretError("uninit-read",
                                 "dereference of a non-address value", span)
        return value.addr

    def assign_loc(self, loc: LocExpr, value: ConcreteValue, span: Span) -> None:
        if isinstance(loc, VarLoc):
            self.write_var(loc.var, value)
            return
        if isinstance(loc, FieldLoc):
            base = self.loc_value(loc.base, span)
            addr = self.as_addr(base, span)
            offset = self.program.field_table.get(loc.field_name, 0)
            self.store(addr.shifted(offset), value, span)
            return
        base = self.loc_value(loc.inner, span)
        self.store(self.as_addr(base, span), value, span)

    # -- expressions -----------------------------------------------------------

    def eval(self, expr, machine: str) -> ConcreteValue:
        span = expr.span
        if isinstance(expr, LocExp):
            return self.loc_value(expr.loc, span)
        if isinstance(expr, IntLit):
            return CInt(expr.value)
        if isinstance(expr, AddrOf):
            return CAddr(self.base_addr(root_var(expr.loc), span))
        if isinstance(expr, Malloc):
            instance = self.malloc_counts.get(expr.site, 0)
            self.malloc_counts[expr.site] = instance + 1
            return CAddr(ConcreteAddr(machine, malloc_region(expr.site), instance, 0))
        if isinstance(expr, BinOp):
            lhs = self.eval(expr.lhs, machine)
            rhs = self.eval(expr.rhs, machine)
            return self.binop(expr.op, lhs, rhs, span)
        if isinstance(expr, RunExp):
            inner = self.eval(expr.inner, expr.machine)
            return self.retag(inner, machine)
        if isinstance(expr, ReformAliasToInt):
            return self.eval(expr.inner, machine)
        if isinstance(expr, ReformIntToInt):
            inner = self.eval(expr.inner, machine)
            return self.retag(inner, expr.to_machine)
        raise TypeError(f"not an expression: {expr!r}")

    def binop(self, op: str, lhs: ConcreteValue, rhs: ConcreteValue,
              span: Span) -> ConcreteValue:
        if isinstance(lhs, CInt) and isinstance(rhs, CInt):
            if op == "+":
                return CInt(lhs.value + rhs.value)
            if op == "-":
                return CInt(lhs.value - rhs.value)
            return CInt(lhs.value * rhs.value)
        if isinstance(lhs, CAddr) and isinstance(rhs, CInt):
            delta = rhs.value if op == "+" else -rhs.value
            if op in ("+", "-"):
                return CAddr(self.check_bounds(lhs.addr.shifted(delta), span))
        if isinstance(lhs, CInt) and isinstance(rhs, CAddr) and op == "+":
            return CAddr(self.check_bounds(rhs.addr.shifted(lhs.value), span))
        raise InterpretError("addr-arith",
                             f"unsupported operands for {op!r} at runtime", span)

    def retag(self, value: ConcreteValue, machine: str) -> ConcreteValue:
        if isinstance(value, CAddr):
            return CAddr(replace(value.addr, machine=machine))
        return value

    def truthy(self, value: ConcreteValue) -> bool:
        if isinstance(value, CInt):
            return value.value != 0
        return True

    # -- statements ----------------------------------------------------------

    def exec(self, stmt: Stmt, machine: str) -> None:
        self.tick(stmt.span)
        if isinstance(stmt, Seq):
            self.exec(stmt.first, machine)
            self.exec(stmt.second, machine)
        elif isinstance(stmt, Assign):
            value = self.eval(stmt.rhs, machine)
            self.assign_loc(stmt.lhs, value, stmt.span)
        elif isinstance(stmt, Phi):
            self.exec_phi(stmt)
        elif isinstance(stmt, (Md, Mu)):
            pass
        elif isinstance(stmt, RunStmt):
            self.exec(stmt.body, stmt.machine)
        elif isinstance(stmt, If):
            if self.take_branch(stmt.cond, stmt.then_prob, machine):
                if stmt.then_branch is not None:
                    self.exec(stmt.then_branch, machine)
            elif stmt.else_branch is not None:
                self.exec(stmt.else_branch, machine)
        elif isinstance(stmt, While):
            while self.take_branch(stmt.cond, stmt.body_prob, machine):
                self.tick(stmt.span)
                if stmt.body is not None:
                    self.exec(stmt.body, machine)
        else:
            raise TypeError(f"not a statement: {stmt!r}")

    def exec_phi(self, stmt: Phi) -> None:
        left_t = self.def_time.get(stmt.left)
        right_t = self.def_time.get(stmt.right)
        if left_t is None and right_t is None:
            raise InterpretError("uninit-read",
                                 f"neither fi argument of {stmt.target} is defined",
                                 stmt.span)
        if right_t is None or (left_t is not None and left_t >= right_t):
            chosen = stmt.left
        else:
            chosen = stmt.right
        self.write_var(stmt.target, self.read_var(chosen, stmt.span))

    def take_branch(self, cond, prob: float, machine: str) -> bool:
        if self.rc.branch_mode == ANNOTATED:
            return self.rng.random() < prob
        return self.truthy(self.eval(cond, machine))


def interpret(program: Program, rc: Optional[RunConfig] = None) -> ConcreteMemory:
    """Execute a program; deterministic for a fixed seed."""
    rc = rc or RunConfig()
    ensure_stack_room(program)
    interp = _Interp(program, rc)
    if program.body is not None:
        interp.exec(program.body, program.entry_machine)
    return interp.memory


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass
class EmpiricalDistribution:
    """Aggregated final-state points-to frequencies over a seed range.

    Runs that raise are tallied in `error_counts` and excluded from the
    frequencies.
    """

    runs: int
    ok_runs: int
    counts: dict                 # key string -> {target string -> count}
    error_counts: dict           # error code -> count
    seeds: tuple

    def frequency(self, key: str, target: str) -> float:
        if self.ok_runs == 0:
            return 0.0
        return self.counts.get(key, {}).get(target, 0) / self.ok_runs

    def to_dict(self) -> dict:
        freqs = {}
        for key in sorted(self.counts):
            freqs[key] = {t: self.counts[key][t] / self.ok_runs
                          for t in sorted(self.counts[key])}
        return {
            "runs": self.runs,
            "ok_runs": self.ok_runs,
            "errors": dict(sorted(self.error_counts.items())),
            "frequencies": freqs,
        }


def _observe(memory: ConcreteMemory, counts: dict) -> None:
    for var, value in memory.env.items():
        if isinstance(value, CAddr):
            counts.setdefault(str(var), {}).setdefault(str(value.addr), 0)
            counts[str(var)][str(value.addr)] += 1
    for addr, value in memory.store.items():
        if isinstance(value, CAddr):
            counts.setdefault(f"&{addr}", {}).setdefault(str(value.addr), 0)
            counts[f"&{addr}"][str(value.addr)] += 1


def sample(program: Program, n: int, base_seed: int = 0,
           rc: Optional[RunConfig] = None) -> EmpiricalDistribution:
    """Interpret with seeds base_seed..base_seed+n-1 and aggregate."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    template = rc or RunConfig()
    counts: dict = {}
    errors: dict = {}
    ok = 0
    for seed in range(base_seed, base_seed + n):
        try:
            memory = interpret(program, replace(template, seed=seed))
        except InterpretError as exc:
            errors[exc.code] = errors.get(exc.code, 0) + 1
            continue
        ok += 1
        _observe(memory, counts)
    return EmpiricalDistribution(n, ok, counts, errors,
                                 tuple(range(base_seed, base_seed + n)))


# ---------------------------------------------------------------------------
# Conformance (support soundness)
# ---------------------------------------------------------------------------


@dataclass
class Conformance:
    violations: list  # (key string, value string) with no witness

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "conforms": self.ok,
            "violations": [{"key": k, "value": v} for k, v in self.violations],
        }


def chase_target(target, alias: AliasType) -> Optional[AbstractAddress]:
    """Follow variable targets through the argmax chain to an address, or
    None when the chain dead-ends or cycles."""
    seen = set()
    while isinstance(target, VarName):
        if target in seen:
            return None
        seen.add(target)
        pairs = alias.get(target)
        if not pairs:
            return None
        target = argmax_pair(pairs).target
    return target


def _has_witness(key, value: ConcreteAddr, alias: AliasType) -> bool:
    for pair in alias.get(key):
        if pair.p <= 0.0:
            continue
        resolved = chase_target(pair.target, alias)
        if resolved is None:
            continue
        if (resolved.machine == value.machine
                and resolved.region == value.region
                and resolved.offset == value.offset):
            return True
    return False


def conforms(memory: ConcreteMemory, alias: AliasType, program: Program) -> Conformance:
    """Support-soundness check of one concrete final state against the
    analysed alias type."""
    violations = []
    for var, value in memory.env_sorted():
        if isinstance(value, CAddr) and not _has_witness(var, value.addr, alias):
            violations.append((str(var), str(value.addr)))
    for addr, value in memory.store_sorted():
        if isinstance(value, CAddr):
            key = addr.abstract()
            if not _has_witness(key, value.addr, alias):
                violations.append((f"&{addr}", str(value.addr)))
    return Conformance(violations)


def check_runs(program: Program, alias: AliasType, n: int, base_seed: int = 0,
               rc: Optional[RunConfig] = None):
    """Sample a seed range and conformance-check every successful run.

    Returns the empirical distribution and a list of (seed, key, value)
    facts that had no positive-probability witness.
    """
    if n < 1:
        raise ValueError("sample size must be at least 1")
    template = rc or RunConfig()
    counts: dict = {}
    errors: dict = {}
    violations: list = []
    ok = 0
    for seed in range(base_seed, base_seed + n):
        try:
            memory = interpret(program, replace(template, seed=seed))
        except InterpretError as exc:
            errors[exc.code] = errors.get(exc.code, 0) + 1
            continue
        ok += 1
        _observe(memory, counts)
        verdict = conforms(memory, alias, program)
        for key, value in verdict.violations:
            violations.append((seed, key, value))
    dist = EmpiricalDistribution(n, ok, counts, errors,
                                 tuple(range(base_seed, base_seed + n)))
    return dist, violations
