import pytest
from hypothesis import given, settings, strategies as st

from paa.syntax import (
    Assign, DerefLoc, FieldLoc, If, IntLit, LocExp, Malloc, MachineHierarchy,
    Mu, ParseError, Phi, Program, RunStmt, Seq, VarLoc, VarName, While, parse,
    parse_var_name, pretty, walk,
)

from conftest import V


def test_parse_minimal_malloc():
    p = parse("machines { m0 } var x on m0[1]; begin m0 { x_1 := malloc(); }")
    assert p.entry_machine == "m0"
    assert p.decls[0].name == "x"
    assert p.body == Assign(VarLoc(V("x", 1)), Malloc(0))


def test_parse_fi_keyword():
    p = parse("machines { m0 } var x on m0[1]; begin m0 { x_3 := fi(x_1, x_2); }")
    assert p.body == Phi(V("x", 3), V("x", 1), V("x", 2))


def test_parse_if_annotation_passthrough():
    src = """machines { m0 } var c on m0[1]; var a on m0[1]; begin m0 {
      if c_1 @0.7 then { x_1 := &a; } else { x_2 := &a; }
    }"""
    p = parse(src)
    assert isinstance(p.body, If)
    assert p.body.then_prob == 0.7


def test_parse_defaults():
    src = """machines { m0 } var c on m0[1]; var a on m0[1]; begin m0 {
      if c then { x_1 := &a; } else { x_2 := &a; }
      while c do { mu(x_1); }
    }"""
    p = parse(src)
    assert isinstance(p.body, Seq)
    cond, loop = p.body.first, p.body.second
    assert cond.then_prob == 0.5
    assert loop.body_prob == 0.9 and loop.expected_iters == 2


def test_var_name_versions():
    assert parse_var_name("x") == VarName("x", 0)
    assert parse_var_name("x_0") == VarName("x", 0)
    assert parse_var_name("x_12") == VarName("x", 12)
    assert parse_var_name("foo_bar") == VarName("foo_bar", 0)
    assert str(VarName("x", 0)) == "x"
    assert str(VarName("x", 3)) == "x_3"


def test_malloc_sites_distinct():
    p = parse("machines { m0 } begin m0 { x_1 := malloc(); x_2 := malloc(); }")
    sites = [node.site for node in walk(p.body) if isinstance(node, Malloc)]
    assert sites == [0, 1]
    first, second = p.body.first, p.body.second
    assert first.rhs != second.rhs


def test_field_offsets_auto_assigned_in_first_use_order():
    src = """machines { m0 } field k = 1; var a on m0[8]; begin m0 {
      x_1 := a->fresh;
      x_2 := a->k;
      x_3 := a->later;
    }"""
    p = parse(src)
    assert p.field_table == {"k": 1, "fresh": 0, "later": 2}


def test_parse_error_position_and_expectation():
    with pytest.raises(ParseError) as exc:
        parse("machines { m0 }\nbegin m0 { x_1 := ; }")
    assert exc.value.line == 2
    assert "expected" in exc.value.message
    assert str(exc.value).startswith("<input>:2:")


@pytest.mark.parametrize("src,fragment", [
    ("machines { m0 (m1 m0) } begin m0 { }", "duplicate machine"),
    ("machines { m0 } var x on m0[1]; var x on m0[2]; begin m0 { }",
     "duplicate variable"),
    ("machines { m0 } begin m1 { }", "unknown machine"),
    ("machines { m0 } var c on m0[1]; begin m0 { if c @1.5 then { } else { } }",
     "outside [0,1]"),
    ("machines { m0 } begin m0 { x_1 := run(malloc(), m9); }", "unknown machine"),
], ids=["dup-machine", "dup-var", "unknown-entry", "bad-prob", "unknown-run"])
def test_parse_errors(src, fragment):
    with pytest.raises(ParseError) as exc:
        parse(src)
    assert fragment in exc.value.message


def test_pretty_prints_explicit_defaults():
    src = """machines { m0 } var c on m0[1]; var a on m0[1]; begin m0 {
      if c then { x_1 := &a; } else { x_2 := &a; }
    }"""
    text = pretty(parse(src))
    assert "@0.5" in text
    assert "@(0.9," not in text  # no while present


def test_pretty_flattens_seq():
    src = "machines { m0 } var a on m0[1]; begin m0 { x_1 := &a; x_2 := &a; x_3 := &a; }"
    text = pretty(parse(src))
    lines = [line.strip() for line in text.splitlines() if ":=" in line]
    assert lines == ["x_1 := &a;", "x_2 := &a;", "x_3 := &a;"]


def test_roundtrip_spec_examples():
    sources = [
        "machines { m0 } var x on m0[1]; begin m0 { x_1 := malloc(); }",
        "machines { m0 } var x on m0[1]; begin m0 { x_3 := fi(x_1, x_2); }",
        """machines { m0 (m1 m2) } field g = 3; var a on m0[4]; var c on m0[1];
        begin m0 {
          if c_1 @0.7 then { x_1 := &a; } else { x_2 := a->g; }
          x_3 := fi(x_1, x_2);
          run (m1) { y_1 := reform(int m0, int m1) x_3 + 2; }
          while c @(0.25,4) do { mu(y_1); }
          [a] := x_3;
          z_1 := [a];
        }""",
    ]
    for src in sources:
        once = parse(src)
        again = parse(pretty(once))
        assert again == once
        assert pretty(again) == pretty(once)


def test_spans_cover_and_nest():
    src = """machines { m0 } var a on m0[4]; var c on m0[1];
begin m0 {
  if c @0.7 then { x_1 := &a + 1; } else { x_2 := [a]; }
}"""
    p = parse(src)
    spans = p.spans()
    for node in walk(p.body):
        span = spans[id(node)]
        assert span.line > 0

    def contains(outer, inner):
        start_ok = (outer.line, outer.col) <= (inner.line, inner.col)
        end_ok = (outer.end_line, outer.end_col) >= (inner.end_line, inner.end_col)
        return start_ok and end_ok

    stmt = p.body
    for node in walk(stmt):
        assert contains(stmt.span, node.span)


# ---------------------------------------------------------------------------
# Random round-trip property
# ---------------------------------------------------------------------------

_names = st.sampled_from(["x", "y", "z", "w"])
_vars = st.builds(VarName, _names, st.integers(0, 3))
_regions = st.sampled_from(["a", "b", "d"])
_machines = st.sampled_from(["m0", "m1"])

_locs = st.recursive(
    st.builds(VarLoc, _vars),
    lambda inner: st.one_of(
        st.builds(FieldLoc, inner, st.sampled_from(["f", "g"])),
        st.builds(DerefLoc, inner),
    ),
    max_leaves=3,
)


def _exprs():
    from paa.syntax import AddrOf, BinOp, ReformAliasToInt, ReformIntToInt, RunExp
    base = st.one_of(
        st.builds(LocExp, _locs),
        st.builds(IntLit, st.integers(0, 9)),
        st.builds(AddrOf, _locs),
        st.builds(Malloc, st.integers(0, 5)),
    )
    return st.recursive(
        base,
        lambda inner: st.one_of(
            st.builds(BinOp, st.sampled_from(["+", "-", "*"]), inner, inner),
            st.builds(RunExp, inner, _machines),
            st.builds(ReformAliasToInt, _machines, inner),
            st.builds(ReformIntToInt, _machines, _machines, inner),
        ),
        max_leaves=4,
    )


_probs = st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0])


def _stmts():
    base = st.one_of(
        st.builds(Assign, _locs, _exprs()),
        st.builds(Phi, _vars, _vars, _vars),
        st.builds(Mu, _vars),
    )
    return st.recursive(
        base,
        lambda inner: st.one_of(
            st.builds(Seq, inner, inner),
            st.builds(RunStmt, _machines, inner),
            st.builds(If, _exprs(), _probs, st.one_of(st.none(), inner),
                      st.one_of(st.none(), inner)),
            st.builds(While, _exprs(), _probs, st.integers(0, 3),
                      st.one_of(st.none(), inner)),
        ),
        max_leaves=6,
    )


_programs = st.builds(
    lambda body: Program(
        machines=MachineHierarchy("m0", (MachineHierarchy("m1"),)),
        field_table={"f": 0, "g": 1},
        decls=tuple(),
        entry_machine="m0",
        body=body,
    ),
    st.one_of(st.none(), _stmts()),
)


@settings(max_examples=150, deadline=None)
@given(_programs)
def test_roundtrip_random_programs(program):
    # malloc sites do not print, so one parse canonicalises them; the
    # round-trip property is then exact.
    text = pretty(program)
    reparsed = parse(text)
    assert parse(pretty(reparsed)) == reparsed
    assert pretty(reparsed) == text
