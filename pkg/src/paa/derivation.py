"""Derivation trees: the proof objects the analysis emits.

Every rule application becomes one node recording the rule label, the
judgment inputs (span, pre alias type or the consulted slices, reaching
probability, machine), the sub-derivations, and the conclusion (post
alias type for statement rules, abstract value for expression rules).
The tree doubles as the transferable certificate payload; the checker
in `paa.pcc` re-derives every node without calling the analysis engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Location rules
RULE_VAR = "x^p"
RULE_FIELD = "->^p"
RULE_DEREF = "[l]^p"

# Expression rules
RULE_REFORM1 = "reform1^p"
RULE_REFORM2 = "reform2^p"
RULE_REFORM3 = "reform3^p"
RULE_REFORM4 = "reform4^p"
RULE_RUN_E = "run_e^p"
RULE_MALLOC = "malloc^p"
RULE_ADD = "+^p"

# Statement rules
RULE_MD = "md^p"
RULE_FI = "fi^p"
RULE_ADDR1 = "&1"
RULE_MU = "mu^p"
RULE_ADDR2 = "&2^p"
RULE_ADDR3 = "&3^p"
RULE_LOAD = "[]1^p"
RULE_STORE = "[]2^p"
RULE_STORE_DEREF = "[]3^p"
RULE_ASSIGN = ":=^p"
RULE_SEQ = ";^p"
RULE_RUN_S = "run_s^p"
RULE_IF = "if^p"
RULE_WHILE = "whl^p"

CORE_RULES = (
    RULE_VAR, RULE_FIELD, RULE_DEREF,
    RULE_REFORM1, RULE_REFORM2, RULE_REFORM3, RULE_REFORM4,
    RULE_RUN_E, RULE_MALLOC, RULE_ADD,
    RULE_MD, RULE_FI, RULE_ADDR1, RULE_MU, RULE_ADDR2, RULE_ADDR3,
    RULE_LOAD, RULE_STORE, RULE_STORE_DEREF, RULE_ASSIGN,
    RULE_SEQ, RULE_RUN_S, RULE_IF, RULE_WHILE,
)

# Plumbing labels for forms the core rules leave implicit: integer
# literals, address-of in operand position, and empty branch/loop bodies.
RULE_INT_LIT = "int"
RULE_ADDR_OF_E = "&_e"
RULE_EMPTY = "empty"

PLUMBING_RULES = (RULE_INT_LIT, RULE_ADDR_OF_E, RULE_EMPTY)

ALL_RULES = CORE_RULES + PLUMBING_RULES

ASSIGN_FAMILY = (
    RULE_ADDR1, RULE_ADDR2, RULE_ADDR3,
    RULE_LOAD, RULE_STORE, RULE_STORE_DEREF, RULE_ASSIGN,
)

STATEMENT_RULES = ASSIGN_FAMILY + (
    RULE_MD, RULE_FI, RULE_MU, RULE_SEQ, RULE_RUN_S, RULE_IF, RULE_WHILE,
)


@dataclass(frozen=True)
class Derivation:
    rule: str
    premises: tuple["Derivation", ...] = ()
    inputs: dict = field(default_factory=dict)
    conclusion: dict = field(default_factory=dict)

    def node_count(self) -> int:
        return 1 + sum(p.node_count() for p in self.premises)

    def iter_nodes(self):
        yield self
        for premise in self.premises:
            yield from premise.iter_nodes()
