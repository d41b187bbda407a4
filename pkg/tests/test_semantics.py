import pytest

from paa.analysis import analyze
from paa.domain import AbstractAddress
from paa.semantics import (
    CAddr, ConcreteAddr, InterpretError, RunConfig, chase_target,
    check_runs, conforms, interpret, sample,
)
from paa.syntax import parse

from conftest import V, mk_alias


def addr(machine, region, instance=0, offset=0):
    return ConcreteAddr(machine, region, instance, offset)


def test_single_assignment_binds_base():
    p = parse("machines { m0 } var a on m0[4]; begin m0 { x_1 := &a; }")
    memory = interpret(p)
    assert memory.env[V("x", 1)] == CAddr(addr("m0", "a"))


def test_probability_one_branch_is_seed_independent():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      if c @1.0 then { x_1 := &a; } else { x_2 := &b; }
      x_3 := fi(x_1, x_2);
    }""")
    expected = CAddr(addr("m0", "a"))
    for seed in range(50):
        memory = interpret(p, RunConfig(seed=seed))
        assert memory.env[V("x", 3)] == expected
        assert V("x", 2) not in memory.env


def test_degenerate_annotations_are_seed_independent():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      if c @0.0 then { x_1 := &a; } else { x_2 := &b; }
      while c @(0.0,2) do { y_1 := &a; }
    }""")
    baseline = interpret(p, RunConfig(seed=0))
    for seed in range(1, 50):
        memory = interpret(p, RunConfig(seed=seed))
        assert memory.env == baseline.env and memory.store == baseline.store
    assert V("x", 2) in baseline.env and V("y", 1) not in baseline.env


def test_annotated_branch_frequency_within_3_sigma():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      if c @0.7 then { x_1 := &a; } else { x_2 := &b; }
      x_3 := fi(x_1, x_2);
    }""")
    hits = 0
    for seed in range(1000):
        memory = interpret(p, RunConfig(seed=seed))
        if memory.env[V("x", 3)] == CAddr(addr("m0", "a")):
            hits += 1
    assert 0.65 <= hits / 1000 <= 0.75  # 3 sigma at n=1000, p=0.7 is 0.0435


def test_interpret_deterministic_per_seed():
    p = parse("""machines { m0 (m1) } var a on m0[2]; var c on m0[1]; begin m0 {
      x_1 := malloc();
      while c @(0.6,2) do { y_1 := &a; }
      z_1 := run(x_1, m1);
    }""")
    m1 = interpret(p, RunConfig(seed=41))
    m2 = interpret(p, RunConfig(seed=41))
    assert m1.env == m2.env and m1.store == m2.store


def test_malloc_regions_are_fresh_per_execution():
    p = parse("""machines { m0 } var c on m0[1]; var p on m0[4]; begin m0 {
      while c @(1.0,2) do { x_1 := malloc(); }
    }""")
    # probability 1.0 loops forever; bound the run instead
    with pytest.raises(InterpretError) as exc:
        interpret(p, RunConfig(seed=0, max_steps=50))
    assert exc.value.code == "step-limit"


def test_step_limit_reported():
    p = parse("""machines { m0 } var c on m0[1]; begin m0 {
      while c @(1.0,2) do { mu(c); }
    }""")
    with pytest.raises(InterpretError) as exc:
        interpret(p, RunConfig(max_steps=100))
    assert exc.value.code == "step-limit"


def test_uninit_read_is_hard_error():
    p = parse("machines { m0 } var a on m0[1]; begin m0 { y_1 := x_1; }")
    with pytest.raises(InterpretError) as exc:
        interpret(p)
    assert exc.value.code == "uninit-read"


def test_oob_offset():
    p = parse("""machines { m0 } var a on m0[2]; begin m0 {
      x_1 := &a + 5;
    }""")
    with pytest.raises(InterpretError) as exc:
        interpret(p)
    assert exc.value.code == "oob-offset"


def test_store_and_load_through_deref():
    p = parse("""machines { m0 } var a on m0[2]; var p on m0[1]; var q on m0[1];
    begin m0 {
      p_1 := &a;
      [p_1] := p_1 + 1;
      q_1 := [p_1];
    }""")
    memory = interpret(p)
    assert memory.store[addr("m0", "a")] == CAddr(addr("m0", "a", offset=1))
    assert memory.env[V("q", 1)] == CAddr(addr("m0", "a", offset=1))


def test_run_and_reform_retag_machines():
    p = parse("""machines { m0 (m1) } begin m0 {
      x_1 := run(malloc(), m1);
      y_1 := reform(int m0, int m1) x_1;
      z_1 := reform(alis m1, int m1) y_1;
    }""")
    memory = interpret(p)
    assert memory.env[V("x", 1)] == CAddr(addr("m0", "#0"))
    assert memory.env[V("y", 1)] == CAddr(addr("m1", "#0"))
    assert memory.env[V("z", 1)] == CAddr(addr("m1", "#0"))


def test_fi_takes_most_recent_definition():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      x_1 := &a;
      x_2 := &b;
      x_3 := fi(x_1, x_2);
      x_4 := fi(x_2, x_1);
    }""")
    memory = interpret(p)
    assert memory.env[V("x", 3)] == CAddr(addr("m0", "b"))
    assert memory.env[V("x", 4)] == CAddr(addr("m0", "b"))


def test_concrete_branch_mode_evaluates_condition():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; begin m0 {
      c_1 := 0;
      if c_1 @0.9 then { x_1 := &a; } else { x_2 := &b; }
      x_3 := fi(x_1, x_2);
    }""")
    memory = interpret(p, RunConfig(branch_mode="concrete"))
    assert memory.env[V("x", 3)] == CAddr(addr("m0", "b"))


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def test_sample_degenerate_single_run():
    p = parse("machines { m0 } var a on m0[1]; begin m0 { x_1 := &a; }")
    dist = sample(p, 1, base_seed=3)
    assert dist.runs == 1 and dist.ok_runs == 1
    assert dist.frequency("x_1", "m0:a+0") == 1.0


def test_sample_deterministic_program_yields_unit_frequencies():
    p = parse("""machines { m0 } var a on m0[4]; begin m0 {
      x_1 := &a;
      y_1 := x_1;
      z_1 := malloc();
    }""")
    dist = sample(p, 100)
    for key, targets in dist.counts.items():
        for target, count in targets.items():
            assert count / dist.ok_runs in (0.0, 1.0)


def test_sample_binomial_frequency():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      if c @0.7 then { x_1 := &a; } else { x_2 := &b; }
      x_3 := fi(x_1, x_2);
    }""")
    dist = sample(p, 1000, base_seed=0)
    freq = dist.frequency("x_3", "m0:a+0")
    assert abs(freq - 0.7) <= 0.05


def test_sample_counts_errors_separately():
    p = parse("""machines { m0 } var a on m0[1]; var c on m0[1]; begin m0 {
      if c @0.5 then { x_1 := &a; } else { y_1 := x_1; }
      mu(c);
    }""")
    dist = sample(p, 200, base_seed=0)
    assert dist.error_counts.get("uninit-read", 0) > 0
    assert dist.ok_runs + sum(dist.error_counts.values()) == 200
    # frequencies only over clean runs
    assert dist.frequency("x_1", "m0:a+0") == 1.0


# ---------------------------------------------------------------------------
# conforms
# ---------------------------------------------------------------------------


def test_conforms_exact_witness():
    p = parse("machines { m0 } var a on m0[1]; begin m0 { x_1 := &a; }")
    memory = interpret(p)
    alias = mk_alias({V("x", 1): [(AbstractAddress("m0", "a", 0), 1.0)]})
    assert conforms(memory, alias, p).ok


def test_conforms_flags_missing_witness():
    p = parse("machines { m0 } var a on m0[1]; var b on m0[1]; begin m0 { x_1 := &b; }")
    memory = interpret(p)
    alias = mk_alias({V("x", 1): [(AbstractAddress("m0", "a", 0), 1.0)]})
    verdict = conforms(memory, alias, p)
    assert not verdict.ok
    assert verdict.violations == [("x_1", "m0:b+0")]


def test_conforms_zero_probability_is_no_witness():
    p = parse("machines { m0 } var a on m0[1]; begin m0 { x_1 := &a; }")
    memory = interpret(p)
    alias = mk_alias({V("x", 1): [(AbstractAddress("m0", "a", 0), 0.0)]})
    assert not conforms(memory, alias, p).ok


def test_conforms_chases_variable_targets():
    p = parse("""machines { m0 } var a on m0[1]; var b on m0[1]; var c on m0[1];
    begin m0 {
      if c @0.7 then { x_1 := &a; } else { x_2 := &b; }
      x_3 := fi(x_1, x_2);
    }""")
    result = analyze(p)
    for seed in range(200):
        memory = interpret(p, RunConfig(seed=seed))
        assert conforms(memory, result.final, p).ok


def test_chase_detects_cycles():
    alias = mk_alias({V("x"): [(V("y"), 1.0)], V("y"): [(V("x"), 1.0)]})
    assert chase_target(V("x"), alias) is None


def test_check_runs_aggregates_and_checks():
    p = parse("""machines { m0 } var a on m0[1]; var c on m0[1]; begin m0 {
      x_1 := &a;
    }""")
    result = analyze(p)
    dist, violations = check_runs(p, result.final, 50, base_seed=9)
    assert violations == []
    assert dist.ok_runs == 50
    assert dist.frequency("x_1", "m0:a+0") == 1.0
