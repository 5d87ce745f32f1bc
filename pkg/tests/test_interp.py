import pytest
from hypothesis import given, settings, strategies as st

from tracetutor.minilang import (
    TERM_BUDGET,
    TERM_FAULT,
    TERM_NORMAL,
    execute,
    parse,
)

from corpus import P1, P2, P3, PROGRAMS
from reference_eval import reference_run


def final_scalar_writes(trace):
    values = {}
    for e in trace.events:
        if e.kind == "VAR_WRITE" and not isinstance(e.payload["new_value"], list):
            values[e.payload["name"]] = e.payload["new_value"]
    return values


def test_p1_hand_trace():
    trace = execute(parse(P1), {"n": 3})
    assert trace.termination == TERM_NORMAL
    assert trace.output_text() == "3"
    starts = [e for e in trace.events if e.kind == "LOOP_ITER_START"]
    assert [e.payload["iteration_index"] for e in starts] == [0, 1, 2]
    assert trace.events[-1].kind == "RETURN"
    assert trace.events[-1].payload["name"] == "main"


def test_p2_budget_exhaustion():
    trace = execute(parse(P2), {}, step_budget=10_000)
    assert trace.termination == TERM_BUDGET
    assert trace.events  # a prefix was still recorded


def test_p3_fault_sequence():
    trace = execute(parse(P3), {})
    assert trace.termination == TERM_FAULT
    assert trace.events[-1].kind == "FAULT"
    assert trace.events[-1].payload["reason"] == "index out of bounds"
    penultimate = trace.events[-2]
    assert penultimate.kind == "ARRAY_ACCESS"
    assert penultimate.payload == {"name": "a", "index": 4, "in_bounds": False}


def test_fault_events_unique_and_last():
    for name, source in PROGRAMS.items():
        trace = execute(parse(source), _zero_inputs(source), step_budget=2_000)
        faults = [e for e in trace.events if e.kind == "FAULT"]
        if trace.termination == TERM_FAULT:
            assert len(faults) == 1, name
            assert trace.events[-1].kind == "FAULT", name
        else:
            assert not faults, name


def test_out_of_bounds_access_is_penultimate():
    for name, source in PROGRAMS.items():
        trace = execute(parse(source), _zero_inputs(source), step_budget=2_000)
        for i, e in enumerate(trace.events):
            if e.kind == "ARRAY_ACCESS" and not e.payload["in_bounds"]:
                assert i == len(trace.events) - 2, name


def test_step_indices_strictly_increase():
    trace = execute(parse(P1), {"n": 3})
    steps = [e.step for e in trace.events]
    assert steps == list(range(len(steps)))


def test_determinism_byte_identical():
    for name, source in PROGRAMS.items():
        program = parse(source)
        inputs = _zero_inputs(source)
        first = execute(program, inputs, step_budget=2_000).to_json()
        second = execute(program, inputs, step_budget=2_000).to_json()
        assert first == second, name


def test_division_by_zero_is_trace_fault():
    trace = execute(parse(PROGRAMS["div_by_input"]), {"a": 5, "b": 0})
    assert trace.termination == TERM_FAULT
    assert trace.events[-1].payload["reason"] == "division by zero"


def test_division_truncates_toward_zero():
    trace = execute(parse(PROGRAMS["div_by_input"]), {"a": -7, "b": 2})
    assert trace.output_text() == "-3"
    trace = execute(parse(PROGRAMS["div_by_input"]), {"a": 7, "b": -2})
    assert trace.output_text() == "-3"


def test_recursion_depth_fault():
    trace = execute(parse(PROGRAMS["recurse_forever"]), {"n": 0})
    assert trace.termination == TERM_FAULT
    assert trace.events[-1].payload["reason"] == "recursion depth exceeded"


def test_recursive_sum_matches_closed_form():
    trace = execute(parse(PROGRAMS["recursive_sum"]), {"n": 8})
    assert trace.output_text() == "36"


def test_call_by_value_arrays():
    source = (
        "int poke(int[3] a){a[0] = 99; return a[0];}\n"
        "int main(int[3] a){int got = poke(a); print(got); print(a[0]); return 0;}\n"
    )
    trace = execute(parse(source), {"a": [1, 2, 3]})
    assert trace.output_text() == "99\n1"


def test_uninitialized_array_elements_read_zero():
    source = "int main(){int[3] a; print(a[2]); return 0;}"
    trace = execute(parse(source), {})
    assert trace.output_text() == "0"


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=-3, max_value=6), budget=st.integers(min_value=1, max_value=60))
def test_budget_monotonicity(n, budget):
    program = parse(P1)
    short = execute(program, {"n": n}, step_budget=budget)
    longer = execute(program, {"n": n}, step_budget=budget + 7)
    short_events = [e.to_dict() for e in short.events]
    longer_events = [e.to_dict() for e in longer.events]
    assert longer_events[: len(short_events)] == short_events


def test_missing_input_rejected():
    with pytest.raises(ValueError):
        execute(parse(P1), {})


def test_wrong_array_length_rejected():
    with pytest.raises(ValueError):
        execute(parse(PROGRAMS["array_max"]), {"a": [1, 2]})


def test_reference_equivalence_on_fixed_inputs():
    # broader seeded sweep lives in the acceptance suite
    for name, source in PROGRAMS.items():
        program = parse(source)
        inputs = _zero_inputs(source)
        trace = execute(program, inputs, step_budget=2_000)
        expected = reference_run(program, inputs, step_budget=2_000)
        assert trace.termination == expected["termination"], name
        assert trace.output_text() == expected["output"], name
        assert final_scalar_writes(trace) == expected["final_values"], name


def _zero_inputs(source):
    program = parse(source)
    inputs = {}
    for param in program.main.params:
        inputs[param.name] = [1] * param.size if param.is_array else 1
    return inputs
