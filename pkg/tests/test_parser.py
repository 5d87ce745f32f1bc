import pytest

from tracetutor.minilang import NodeKind, ParseError, SemanticError, parse

from corpus import P1, PROGRAMS


def test_minimal_program():
    program = parse("int main(){return 0;}")
    assert len(program.functions) == 1
    assert program.main.name == "main"
    kinds = [n.kind for n in program.main.body]
    assert kinds == [NodeKind.RETURN]


def test_p1_for_node_has_header_parts():
    program = parse(P1)
    for_nodes = [n for n in program.walk() if n.kind == NodeKind.FOR]
    assert len(for_nodes) == 1
    loop = for_nodes[0]
    assert loop.init.kind == NodeKind.DECL and loop.init.name == "i"
    assert loop.cond.kind == NodeKind.BINOP and loop.cond.op == "<"
    assert loop.update.kind == NodeKind.ASSIGN and loop.update.name == "i"
    assert loop.line == 3


def test_undeclared_identifier():
    with pytest.raises(SemanticError) as exc:
        parse("int main(){x = 1;}")
    assert "undeclared identifier x" in str(exc.value)
    assert exc.value.line == 1


def test_duplicate_declaration():
    with pytest.raises(SemanticError) as exc:
        parse("int main(){int a = 1; int a = 2; return 0;}")
    assert "duplicate declaration a" in str(exc.value)


def test_shadowing_in_inner_scope_allowed():
    parse("int main(){int a = 1; if (a > 0) { int a = 2; print(a); } return 0;}")


def test_array_scalar_mismatch():
    with pytest.raises(SemanticError):
        parse("int main(){int[3] a; a = 5; return 0;}")
    with pytest.raises(SemanticError):
        parse("int main(){int x = 1; x[0] = 5; return 0;}")


def test_boolean_only_in_conditions():
    with pytest.raises(SemanticError):
        parse("int main(){int x = 1 < 2; return 0;}")
    with pytest.raises(SemanticError):
        parse("int main(){print(1 == 1); return 0;}")
    with pytest.raises(SemanticError):
        parse("int main(){if (1 + 2) { print(1); } return 0;}")


def test_missing_main():
    with pytest.raises(SemanticError) as exc:
        parse("int helper(){return 0;}")
    assert "main" in str(exc.value)


def test_parse_error_carries_position_and_expected():
    with pytest.raises(ParseError) as exc:
        parse("int main(){int x = ;}")
    assert exc.value.line == 1
    assert exc.value.col > 0
    assert exc.value.expected


def test_call_arity_checked():
    src = "int f(int a, int b){return a + b;} int main(){return f(1);}"
    with pytest.raises(SemanticError):
        parse(src)


def test_unknown_function_call():
    with pytest.raises(SemanticError) as exc:
        parse("int main(){return g(1);}")
    assert "undeclared identifier g" in str(exc.value)


def test_node_ids_stable_across_reparse():
    for source in PROGRAMS.values():
        first = parse(source)
        second = parse(source)
        ids_first = [(n.node_id, n.kind, n.line) for n in first.walk()]
        ids_second = [(n.node_id, n.kind, n.line) for n in second.walk()]
        assert ids_first == ids_second


def test_node_ids_unique_and_lines_in_range():
    for name, source in PROGRAMS.items():
        program = parse(source)
        seen = set()
        for node in program.walk():
            assert node.node_id not in seen, name
            seen.add(node.node_id)
            assert 1 <= node.line <= len(program.source_lines), name


def test_whole_corpus_parses():
    for name, source in PROGRAMS.items():
        program = parse(source)
        assert program.main is not None, name
