import pytest

from tracetutor.minilang import (
    NOT_APPLICABLE,
    InvalidQuery,
    NodeKind,
    TraceQuery,
    execute,
    parse,
    query_trace,
)

from corpus import P1, P2, P3, PROGRAMS


def _loop_id(program):
    return program.loops()[0].node_id


def test_var_before_final_iteration():
    program = parse(P1)
    trace = execute(program, {"n": 3})
    q = TraceQuery("VAR_BEFORE_FINAL_ITER", {"loop_id": _loop_id(program), "var": "i"})
    assert query_trace(program, trace, q) == 2


def test_iter_count_zero_when_never_entered():
    program = parse(P1)
    trace = execute(program, {"n": 0})
    q = TraceQuery("ITER_COUNT", {"loop_id": _loop_id(program)})
    assert query_trace(program, trace, q) == 0


def test_iter_count_matches_n():
    program = parse(P1)
    for n in (1, 2, 5):
        trace = execute(program, {"n": n})
        q = TraceQuery("ITER_COUNT", {"loop_id": _loop_id(program)})
        assert query_trace(program, trace, q) == n


def test_var_before_final_iter_not_applicable_when_loop_skipped():
    program = parse(P1)
    trace = execute(program, {"n": 0})
    q = TraceQuery("VAR_BEFORE_FINAL_ITER", {"loop_id": _loop_id(program), "var": "i"})
    assert query_trace(program, trace, q) is NOT_APPLICABLE


def test_nonterminating_loop_line():
    program = parse(P2)
    trace = execute(program, {})
    q = TraceQuery("NONTERMINATING_LOOP_LINE", {})
    assert query_trace(program, trace, q) == 3


def test_nontermination_query_on_normal_run():
    program = parse(P1)
    trace = execute(program, {"n": 2})
    assert query_trace(program, trace, TraceQuery("NONTERMINATING_LOOP_LINE", {})) is NOT_APPLICABLE


def test_last_valid_array_index():
    program = parse(P3)
    trace = execute(program, {})
    q = TraceQuery("LAST_VALID_ARRAY_INDEX", {"name": "a"})
    assert query_trace(program, trace, q) == 3


def test_final_output():
    program = parse(PROGRAMS["multi_print"])
    trace = execute(program, {"x": 2})
    assert query_trace(program, trace, TraceQuery("FINAL_OUTPUT", {})) == "2\n4\n6"


def test_value_at_step_and_next_write_after():
    program = parse(P1)
    trace = execute(program, {"n": 3})
    starts = [e for e in trace.events if e.kind == "LOOP_ITER_START"]
    # value of s after each iteration start: next write to s
    answers = [
        query_trace(program, trace, TraceQuery("NEXT_WRITE_AFTER", {"var": "s", "step": e.step}))
        for e in starts
    ]
    assert answers == [0, 1, 3]
    at_start = [
        query_trace(program, trace, TraceQuery("VALUE_AT_STEP", {"var": "s", "step": e.step}))
        for e in starts
    ]
    assert at_start == [0, 0, 1]


def test_branch_outcome():
    program = parse(PROGRAMS["max_of_two"])
    trace = execute(program, {"a": 5, "b": 2})
    if_node = next(n for n in program.walk() if n.kind == NodeKind.IF)
    q = TraceQuery("BRANCH_OUTCOME", {"node_id": if_node.node_id, "occurrence": 0})
    assert query_trace(program, trace, q) is True
    trace = execute(program, {"a": 1, "b": 2})
    assert query_trace(program, trace, q) is False
    q_missing = TraceQuery("BRANCH_OUTCOME", {"node_id": if_node.node_id, "occurrence": 3})
    assert query_trace(program, trace, q_missing) is NOT_APPLICABLE


def test_invalid_queries():
    program = parse(P1)
    trace = execute(program, {"n": 1})
    with pytest.raises(InvalidQuery):
        query_trace(program, trace, TraceQuery("ITER_COUNT", {"loop_id": 99_999}))
    with pytest.raises(InvalidQuery):
        query_trace(program, trace,
                    TraceQuery("VAR_BEFORE_FINAL_ITER", {"loop_id": _loop_id(program), "var": "zz"}))
    with pytest.raises(InvalidQuery):
        query_trace(program, trace, TraceQuery("LAST_VALID_ARRAY_INDEX", {"name": "s"}))
    with pytest.raises(InvalidQuery):
        query_trace(program, trace, TraceQuery("NO_SUCH_KIND", {}))
