"""DSL parsing, serialization, and executor semantics."""
import pytest
from hypothesis import given, settings, strategies as st

from refinekit.program import (
    KEEP_ALL_PROGRAM, KeepAll, LineIndexedDoc, ProgramParseError,
    RefineProgram, RemoveLines, RemoveStr, SKIP_AMBIGUOUS, SKIP_NOT_FOUND,
    SKIP_OUT_OF_RANGE, SKIP_SHADOWED, execute_program, offset_program,
    parse_program, serialize_call)


def run(text: str, program_text: str):
    doc = LineIndexedDoc.from_text(text)
    return execute_program(doc, parse_program(program_text))


class TestParse:
    def test_remove_lines(self):
        p = parse_program("remove_lines(3, 5)")
        assert p.calls == (RemoveLines(3, 5),)

    def test_remove_str(self):
        p = parse_program('remove_str(7, "BUY NOW")')
        assert p.calls == (RemoveStr(7, "BUY NOW"),)

    def test_keep_all(self):
        p = parse_program("keep_all()")
        assert p.calls == (KeepAll(),)

    def test_multiple_calls_order_preserved(self):
        p = parse_program('remove_lines(1, 2)\nremove_str(4, "x y")')
        assert p.calls == (RemoveLines(1, 2), RemoveStr(4, "x y"))

    def test_escapes(self):
        p = parse_program(r'remove_str(1, "a\"b\\c\td")')
        assert p.calls == (RemoveStr(1, 'a"b\\c\td'),)

    def test_newline_escape_rejected_in_remove_str(self):
        # the escape exists in the grammar but a line never contains \n
        with pytest.raises(ProgramParseError) as exc:
            parse_program(r'remove_str(1, "a\nb")')
        assert exc.value.reason == "invalid-argument"

    def test_blank_lines_ignored(self):
        p = parse_program('\nremove_lines(1, 1)\n\n')
        assert p.calls == (RemoveLines(1, 1),)

    @pytest.mark.parametrize("text,reason", [
        ("destroy_all()", "unknown-function"),
        ("remove_lines(1)", "arity-error"),
        ("remove_lines(1, 2, 3)", "arity-error"),
        ('remove_str(x, "a")', "non-integer-argument"),
        ('remove_str(1, "a', "unterminated-string"),
        ('remove_str(1, "a"b")', "unterminated-string"),
        ('keep_all()\nremove_lines(1, 1)', "keep_all-mixed-with-other-calls"),
        ("", "empty-program"),
        ("   \n  ", "empty-program"),
        ("remove_lines 1 2", "malformed-call"),
        ("remove_lines(2, 1)", "invalid-argument"),
        ("remove_lines(0, 1)", "invalid-argument"),
        ('remove_str(0, "a")', "invalid-argument"),
        ('remove_str(1, "")', "invalid-argument"),
        ('keep_all(1)', "arity-error"),
    ])
    def test_parse_errors(self, text, reason):
        with pytest.raises(ProgramParseError) as exc:
            parse_program(text)
        assert exc.value.reason == reason

    def test_error_carries_line_number(self):
        with pytest.raises(ProgramParseError) as exc:
            parse_program("remove_lines(1, 1)\nbogus()")
        assert exc.value.line_no == 2


class TestSerialize:
    def test_canonical_forms(self):
        assert serialize_call(RemoveLines(3, 5)) == "remove_lines(3, 5)"
        assert serialize_call(RemoveStr(7, "BUY NOW")) == 'remove_str(7, "BUY NOW")'
        assert serialize_call(KeepAll()) == "keep_all()"

    def test_escaping(self):
        call = RemoveStr(1, 'a"b\\c\td')
        assert parse_program(serialize_call(call)).calls == (call,)

    def test_empty_program_serializes_to_keep_all(self):
        assert RefineProgram.from_calls([]).serialize() == "keep_all()"

    def test_parse_serialize_identity_on_canonical(self):
        text = 'remove_lines(1, 2)\nremove_str(4, "ads here")'
        assert parse_program(text).serialize() == text


call_strategy = st.one_of(
    st.tuples(st.integers(1, 9), st.integers(0, 5)).map(
        lambda t: RemoveLines(t[0], t[0] + t[1])),
    st.tuples(st.integers(1, 9), st.text(
        alphabet=st.characters(blacklist_characters="\n",
                               blacklist_categories=("Cs",)),
        min_size=1, max_size=12)).map(lambda t: RemoveStr(t[0], t[1])),
)


@given(st.lists(call_strategy, min_size=1, max_size=6))
@settings(max_examples=200, deadline=None)
def test_property_round_trip(calls):
    program = RefineProgram.from_calls(calls)
    assert parse_program(program.serialize()).calls == program.calls


class TestExecutor:
    def test_remove_middle_line(self):
        out, rep = run("A\nB\nC", "remove_lines(2, 2)")
        assert out == "A\nC"
        assert rep.applied == 1 and rep.removed_line_count == 1

    def test_remove_first_line(self):
        out, _ = run("A\nB\nC", "remove_lines(1, 1)")
        assert out == "B\nC"

    def test_remove_last_line_takes_preceding_newline(self):
        out, _ = run("A\nB\nC", "remove_lines(3, 3)")
        assert out == "A\nB"

    def test_remove_trailing_run(self):
        out, _ = run("A\nB\nC", "remove_lines(2, 3)")
        assert out == "A"

    def test_remove_all_lines(self):
        out, rep = run("A\nB\nC", "remove_lines(1, 3)")
        assert out == ""
        assert rep.output_empty and rep.all_lines_removed

    def test_remove_str_unique(self):
        out, rep = run("visit ads.example now", 'remove_str(1, "ads.example ")')
        assert out == "visit now"
        assert rep.applied == 1

    def test_remove_str_ambiguous_skips(self):
        out, rep = run("abab", 'remove_str(1, "ab")')
        assert out == "abab"
        assert rep.skipped[0][1] == SKIP_AMBIGUOUS
        assert rep.untouched

    def test_remove_str_not_found(self):
        out, rep = run("hello", 'remove_str(1, "zzz")')
        assert out == "hello"
        assert rep.skipped[0][1] == SKIP_NOT_FOUND

    def test_out_of_range_skips(self):
        out, rep = run("one line", "remove_lines(5, 6)")
        assert out == "one line"
        assert rep.skipped[0][1] == SKIP_OUT_OF_RANGE

    def test_remove_str_on_removed_line_skips(self):
        out, rep = run("A\nB", 'remove_lines(2, 2)\nremove_str(2, "B")')
        assert out == "A"
        assert rep.skipped[0][1] == SKIP_SHADOWED

    def test_keep_all_identity(self):
        out, rep = run("A\nB", "keep_all()")
        assert out == "A\nB" and rep.untouched

    def test_empty_document(self):
        out, rep = run("", "keep_all()")
        assert out == "" and rep.output_empty

    def test_line_indices_refer_to_original(self):
        # after removing line 1, line 3 still means original line 3
        out, _ = run("A\nB\nC", 'remove_lines(1, 1)\nremove_lines(3, 3)')
        assert out == "B"

    def test_order_invariance(self):
        doc = LineIndexedDoc.from_text("A\nB\nC\nD")
        p1 = parse_program("remove_lines(1, 1)\nremove_lines(3, 3)")
        p2 = parse_program("remove_lines(3, 3)\nremove_lines(1, 1)")
        assert execute_program(doc, p1)[0] == execute_program(doc, p2)[0]

    def test_adjacent_runs_merge_cleanly(self):
        out, _ = run("A\nB\nC\nD", "remove_lines(2, 2)\nremove_lines(3, 3)")
        assert out == "A\nD"

    def test_partial_range_overlap_out_of_range(self):
        out, rep = run("A\nB", "remove_lines(2, 5)")
        assert out == "A\nB"
        assert rep.skipped[0][1] == SKIP_OUT_OF_RANGE


@st.composite
def doc_and_program(draw):
    lines = draw(st.lists(
        st.text(alphabet=st.characters(blacklist_characters="\n",
                                       blacklist_categories=("Cs",)),
                max_size=20),
        min_size=1, max_size=8))
    text = "\n".join(lines)
    n = len(lines)
    calls = []
    for _ in range(draw(st.integers(0, 4))):
        if draw(st.booleans()):
            a = draw(st.integers(1, n))
            calls.append(RemoveLines(a, draw(st.integers(a, n))))
        else:
            ln = draw(st.integers(1, n))
            if lines[ln - 1]:
                i = draw(st.integers(0, len(lines[ln - 1]) - 1))
                j = draw(st.integers(i + 1, len(lines[ln - 1])))
                calls.append(RemoveStr(ln, lines[ln - 1][i:j]))
    return text, RefineProgram.from_calls(calls)


@given(doc_and_program())
@settings(max_examples=300, deadline=None)
def test_property_output_is_subsequence(case):
    text, program = case
    out, _ = execute_program(LineIndexedDoc.from_text(text), program)
    it = iter(text)
    assert all(c in it for c in out)


@given(doc_and_program())
@settings(max_examples=200, deadline=None)
def test_property_idempotent_under_reordering(case):
    text, program = case
    doc = LineIndexedDoc.from_text(text)
    out1, _ = execute_program(doc, program)
    reordered = RefineProgram.from_calls(tuple(reversed(program.calls)))
    out2, _ = execute_program(doc, reordered)
    assert out1 == out2


class TestOffset:
    def test_offset_shifts_line_numbers(self):
        p = parse_program('remove_lines(1, 2)\nremove_str(3, "x")')
        q = offset_program(p, 3)
        assert q.calls == (RemoveLines(4, 5), RemoveStr(6, "x"))

    def test_offset_zero_is_identity(self):
        p = parse_program("remove_lines(1, 1)")
        assert offset_program(p, 0).calls == p.calls

    def test_keep_all_not_offset(self):
        assert offset_program(KEEP_ALL_PROGRAM, 5).calls == (KeepAll(),)
