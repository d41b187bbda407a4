"""Seeded program corpus for the statistical soundness suite.

Every generated program stays inside the fragment where the analysis is
support-sound: plain copies only read single-target variables, fi
arguments are never themselves fi-defined, reform/run expressions only
appear where the reaching probability meets the default threshold, and
nothing writes through fields or dereferences.
"""

from __future__ import annotations

import random

HEADER = """machines { m0 (m1) }
var r0 on m0[4];
var r1 on m0[4];
var r2 on m0[4];
var r3 on m0[4];
var s0 on m1[4];
var s1 on m1[4];
var c on m0[1];
begin m0 {
%s
}
"""


def _program(lines: list[str]) -> str:
    return HEADER % "\n".join(f"  {line}" for line in lines)


class _Names:
    def __init__(self):
        self.counter = 0
        self.single_target = []  # variables safe to copy from

    def fresh(self) -> str:
        self.counter += 1
        return f"v_{self.counter}"


def _straight_line(rng: random.Random, length: int) -> str:
    names = _Names()
    lines = []
    for _ in range(length):
        kind = rng.choice(["addr", "malloc", "copy", "mu"])
        if kind == "copy" and not names.single_target:
            kind = "addr"
        if kind == "addr":
            v = names.fresh()
            lines.append(f"{v} := &r{rng.randrange(4)};")
            names.single_target.append(v)
        elif kind == "malloc":
            v = names.fresh()
            lines.append(f"{v} := malloc();")
            names.single_target.append(v)
        elif kind == "copy":
            v = names.fresh()
            source = rng.choice(names.single_target)
            lines.append(f"{v} := {source};")
            names.single_target.append(v)
        else:
            lines.append(f"mu({rng.choice(names.single_target or ['c'])});")
    return _program(lines)


def _single_if(rng: random.Random, prob: float) -> str:
    names = _Names()
    lines = [f"{names.fresh()} := &r0;"]
    names.single_target.append("v_1")
    left, right, joined = names.fresh(), names.fresh(), names.fresh()
    lines.append(f"if c @{prob!r} then {{ {left} := &r{rng.randrange(2)}; }} "
                 f"else {{ {right} := &r{rng.randrange(2, 4)}; }}")
    lines.append(f"{joined} := fi({left}, {right});")
    lines.append(f"mu({joined});")
    return _program(lines)


def _nested_if(rng: random.Random, outer: float, inner: float) -> str:
    names = _Names()
    a, b, j, d = names.fresh(), names.fresh(), names.fresh(), names.fresh()
    inner_block = (f"if c @{inner!r} then {{ {a} := &r0; }} "
                   f"else {{ {b} := &r1; }} {j} := fi({a}, {b});")
    lines = [
        f"if c @{outer!r} then {{ {inner_block} }} else {{ {d} := &r2; }}",
        f"mu({d});",
    ]
    return _program(lines)


def _bounded_while(rng: random.Random, prob: float, iters: int,
                   with_phi: bool) -> str:
    names = _Names()
    lines = []
    if with_phi:
        init, joined, carried = names.fresh(), names.fresh(), names.fresh()
        lines.append(f"{init} := &r0;")
        lines.append(f"while c @({prob!r},{iters}) do {{ "
                     f"{joined} := fi({init}, {carried}); {carried} := &r1; }}")
    else:
        v = names.fresh()
        lines.append(f"while c @({prob!r},{iters}) do {{ {v} := &r{rng.randrange(3)}; }}")
    return _program(lines)


def _malloc_loop(rng: random.Random, prob: float, iters: int) -> str:
    # every iteration allocates at the same site; the abstract region
    # covers all concrete instances
    names = _Names()
    v, w = names.fresh(), names.fresh()
    return _program([
        f"while c @({prob!r},{iters}) do {{ {v} := malloc(); }}",
        f"{w} := &r{rng.randrange(4)};",
    ])


def _cross_machine(rng: random.Random, variant: int) -> str:
    names = _Names()
    lines = []
    if variant % 2 == 0:
        v, w, x = names.fresh(), names.fresh(), names.fresh()
        lines.append(f"{v} := run(malloc(), m1);")
        lines.append(f"{w} := reform(int m0, int m1) {v};")
        lines.append(f"{x} := reform(alis m1, int m1) {w};")
    else:
        v, w = names.fresh(), names.fresh()
        lines.append(f"run (m1) {{ {v} := &s{rng.randrange(2)}; }}")
        lines.append(f"{w} := run({v}, m1);")
        lines.append(f"mu({w});")
    return _program(lines)


def generate_corpus(seed: int = 2024) -> list[tuple[str, str]]:
    """(name, source) pairs; deterministic for a given seed."""
    rng = random.Random(seed)
    programs = []
    for i in range(4):
        programs.append((f"straight_{i}", _straight_line(rng, 5 + i * 2)))
    for i, p in enumerate([0.1, 0.3, 0.5, 0.7, 0.9]):
        programs.append((f"single_if_{i}", _single_if(rng, p)))
    for i, (outer, inner) in enumerate([(0.6, 0.5), (0.8, 0.3), (0.4, 0.7), (0.5, 0.5)]):
        programs.append((f"nested_if_{i}", _nested_if(rng, outer, inner)))
    for i, (p, n, phi) in enumerate([(0.9, 2, True), (0.5, 2, True),
                                     (0.7, 3, False), (0.9, 1, False)]):
        programs.append((f"while_{i}", _bounded_while(rng, p, n, phi)))
    programs.append(("while_malloc", _malloc_loop(rng, 0.8, 2)))
    for i in range(4):
        programs.append((f"cross_machine_{i}", _cross_machine(rng, i)))
    return programs
