"""Data model of the probabilistic alias analysis.

An alias type is a finite partial map from keys (SSA variables and
abstract addresses) to sets of probabilistic pairs ``(target, p)``:
"this key may point at `target` with probability `p`".  The empty map
is the bottom type.  Per-key probability masses are deliberately not
required to sum to 1; the store rules combine probabilities with `min`
and can exceed unit mass.

Keys and pair targets share one total order (variables first, then
addresses, each lexicographic).  Every iteration in the toolkit is
sorted under this order, which is what makes analysis output, argmax
tie-breaking, and certificate bytes deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

from .syntax import VarName

MALLOC_REGION_PREFIX = "#"


def malloc_region(site: int) -> str:
    """Region label for an allocation site; '#' keeps it out of the
    declared-variable namespace."""
    return f"{MALLOC_REGION_PREFIX}{site}"


@dataclass(frozen=True, order=True)
class AbstractAddress:
    """A memory cell: `offset` within `region` on `machine`.

    Regions are declared root variables or malloc sites; all allocations
    of one site share one abstract region.
    """

    machine: str
    region: str
    offset: int

    def shifted(self, delta: int) -> "AbstractAddress":
        return replace(self, offset=self.offset + delta)

    def __str__(self) -> str:
        return f"{self.machine}:{self.region}+{self.offset}"


# A points-to target (and an alias-type key): a variable or an address.
Target = Union[VarName, AbstractAddress]
AliasKey = Target


def key_sort_key(key: AliasKey) -> tuple:
    if isinstance(key, VarName):
        return (0, key.base, key.version)
    return (1, key.machine, key.region, key.offset)


def format_key(key: AliasKey) -> str:
    if isinstance(key, VarName):
        return str(key)
    return f"&{key}"


# ---------------------------------------------------------------------------
# Abstract values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntVal:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class AddrVal:
    addr: AbstractAddress

    def __str__(self) -> str:
        return str(self.addr)


@dataclass(frozen=True)
class VarVal:
    """A register target: resolution may land on a variable rather than a
    memory address when pair sets carry variable targets (fi/md output)."""

    var: VarName

    def __str__(self) -> str:
        return str(self.var)


@dataclass(frozen=True)
class Bottom:
    def __str__(self) -> str:
        return "bottom"


BOTTOM = Bottom()

AbstractValue = Union[IntVal, AddrVal, VarVal, Bottom]


def value_of_target(target: Target) -> AbstractValue:
    return VarVal(target) if isinstance(target, VarName) else AddrVal(target)


def target_of_value(value: AbstractValue) -> Optional[Target]:
    if isinstance(value, AddrVal):
        return value.addr
    if isinstance(value, VarVal):
        return value.var
    return None


def format_value(value: AbstractValue) -> dict:
    if isinstance(value, IntVal):
        return {"kind": "int", "value": value.value}
    if isinstance(value, AddrVal):
        return {"kind": "addr", "addr": str(value.addr)}
    if isinstance(value, VarVal):
        return {"kind": "var", "var": str(value.var)}
    return {"kind": "bottom"}


# ---------------------------------------------------------------------------
# Probabilistic pairs and alias types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbPair:
    target: Target
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability {self.p} outside [0,1]")

    def __str__(self) -> str:
        return f"({format_key(self.target)}, {self.p!r})"


def sort_pairs(pairs: Iterable[ProbPair]) -> list[ProbPair]:
    return sorted(pairs, key=lambda pr: key_sort_key(pr.target))


@dataclass(frozen=True)
class AliasType:
    """Immutable partial map key -> set of probabilistic pairs.

    Updates return new maps; snapshots are therefore free, which keeps
    per-statement state recording linear.
    """

    entries: dict = field(default_factory=dict)

    def get(self, key: AliasKey) -> frozenset:
        return self.entries.get(key, frozenset())

    def has(self, key: AliasKey) -> bool:
        return key in self.entries

    def updated(self, key: AliasKey, pairs: Iterable[ProbPair]) -> "AliasType":
        new = dict(self.entries)
        new[key] = frozenset(pairs)
        return AliasType(new)

    def updated_many(self, items: Iterable[tuple[AliasKey, Iterable[ProbPair]]]) -> "AliasType":
        new = dict(self.entries)
        for key, pairs in items:
            new[key] = frozenset(pairs)
        return AliasType(new)

    def items_sorted(self) -> list[tuple[AliasKey, list[ProbPair]]]:
        return [(k, sort_pairs(v))
                for k, v in sorted(self.entries.items(), key=lambda kv: key_sort_key(kv[0]))]

    def is_bottom(self) -> bool:
        return not self.entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, AliasType):
            return NotImplemented
        return self.entries == other.entries

    def __str__(self) -> str:
        if not self.entries:
            return "{}"
        parts = []
        for key, pairs in self.items_sorted():
            inner = ", ".join(str(p) for p in pairs)
            parts.append(f"{format_key(key)} -> {{{inner}}}")
        return "{" + "; ".join(parts) + "}"


BOTTOM_TYPE = AliasType({})


def alias_type(mapping: dict) -> AliasType:
    """Convenience constructor from ``{key: [(target, p), ...]}``."""
    entries = {}
    for key, pairs in mapping.items():
        entries[key] = frozenset(ProbPair(t, p) for t, p in pairs)
    return AliasType(entries)


def format_alias_type(alias: AliasType) -> dict:
    """JSON form: sorted keys, pair lists sorted by target, exact decimal
    probability strings (shortest round-tripping form of the float)."""
    doc = {}
    for key, pairs in alias.items_sorted():
        doc[format_key(key)] = [{"to": format_key(p.target), "p": repr(p.p)} for p in pairs]
    return doc


# ---------------------------------------------------------------------------
# Argmax selection
# ---------------------------------------------------------------------------


def argmax_pair(pairs: Iterable[ProbPair]) -> ProbPair:
    """The pair with the greatest probability; ties go to the least target
    in the key order.  Callers must pass a non-empty collection."""
    best: Optional[ProbPair] = None
    for pair in sort_pairs(pairs):
        if best is None or pair.p > best.p:
            best = pair
    if best is None:
        raise ValueError("argmax over an empty pair set")
    return best


# ---------------------------------------------------------------------------
# Analysis configuration and reaching context
# ---------------------------------------------------------------------------

WEIGHTED = "weighted"
MAX_UNION = "maxUnion"
ITERATED = "iterated"
LITERAL = "literal"


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs of the analysis.

    threshold: reaching-probability cutoff for reform/run casts.
    if_merge: how branch post-states combine (weighted convex combination
        or max-union).
    while_mode: iterated re-analysis of the loop body versus a literal
        single pass.
    strict_md: whether malformed md premises abort (True) or degrade to a
        warning and an identity transfer (False).
    """

    threshold: float = 0.5
    if_merge: str = WEIGHTED
    while_mode: str = ITERATED
    strict_md: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0,1]")
        if self.if_merge not in (WEIGHTED, MAX_UNION):
            raise ValueError(f"unknown if-merge mode {self.if_merge!r}")
        if self.while_mode not in (ITERATED, LITERAL):
            raise ValueError(f"unknown while mode {self.while_mode!r}")

    def to_dict(self) -> dict:
        return {
            "threshold": repr(self.threshold),
            "if_merge": self.if_merge,
            "while_mode": self.while_mode,
            "strict_md": self.strict_md,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnalysisConfig":
        return cls(
            threshold=float(doc["threshold"]),
            if_merge=doc["if_merge"],
            while_mode=doc["while_mode"],
            strict_md=bool(doc["strict_md"]),
        )


@dataclass(frozen=True)
class ReachCtx:
    """Where the analysis currently stands: the product of branch weights
    from program entry, and the machine executing the code."""

    reach_prob: float = 1.0
    machine: str = ""

    def scaled(self, weight: float) -> "ReachCtx":
        return replace(self, reach_prob=self.reach_prob * weight)

    def on(self, machine: str) -> "ReachCtx":
        return replace(self, machine=machine)
