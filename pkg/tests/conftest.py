from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from paa.domain import AbstractAddress, AliasType, ProbPair
from paa.syntax import VarName, parse


def V(base: str, version: int = 0) -> VarName:
    return VarName(base, version)


def A(machine: str, region: str, offset: int = 0) -> AbstractAddress:
    return AbstractAddress(machine, region, offset)


def mk_alias(mapping: dict) -> AliasType:
    return AliasType({key: frozenset(ProbPair(t, p) for t, p in pairs)
                      for key, pairs in mapping.items()})


RULE_TEST_HEADER = """machines { m0 (m1) }
field f = 2;
var a on m0[8];
var b on m0[8];
var d on m0[8];
var p on m0[1];
var q on m0[1];
var c on m0[1];
begin m0 {
}
"""


@pytest.fixture
def rule_program():
    """A declaration-only program giving rule-level tests their regions."""
    return parse(RULE_TEST_HEADER)
