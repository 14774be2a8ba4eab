"""Surface syntax: parsing, printing, and the errors in between."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arclang.alt import (And, Atom, Compare, Constant, GroupingOp, JoinOuter, LiteralLeaf, Not, Or,
                         Quantified, program_to_dict, walk)
from arclang.parser import ParseError, parse_arc, print_arc


def reparse(src):
    return parse_arc(print_arc(parse_arc(src)))


ROUND_TRIPS = [
    "{ Q(A) | exists r in R [ Q.A = r.A ] }",
    "{ Q(A) | exists r in R [ Q.A = r.A and (r.B = 1 or r.B = 2) ] }",
    "{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ s.A = r.A ] ] }",
    "{ Q(A, c) | exists r in R, s in S, group(r.A), inner(r, s) "
    "[ Q.A = r.A and Q.c = count(s.B) and r.A = s.A ] }",
    "{ Q(m, n) | exists r in R, s in S, left(r, inner(lit 11 as v, s)) "
    "[ Q.m = r.m and Q.n = s.n and r.y = s.y and r.h = v.val ] }",
    "{ Q(A, B) | exists r in R, s in S, full(r, s) [ Q.A = r.A and Q.B = s.B and r.A = s.B ] }",
    "{ Q(A) | exists r in R [ Q.A = r.A and r.B * 2 + 1 <= r.C / 4 - 3 ] }",
    "{ Q(t) | exists r in R [ Q.t = r.t and r.t <> 'o''clock' ] }",
    "{ Q(A) | exists r in R [ Q.A = r.A and r.B = 3.25 and r.ok = true and r.no = false ] }",
    "{ Q(A) | exists r in R [ Q.A = r.A and r.B is null and r.C is not null ] }",
    "{ Q(A) | exists f in ext Minus [ Q.A = f.out and f.left = 5 and f.right = 3 ] }",
    "{ Q(d) | exists l1 in L [ Q.d = l1.d and not exists l2 in L [ l2.d <> l1.d ] ] }",
    "def V := { V(x) | exists r in R [ V.x = r.x ] }\n"
    "{ Q(x) | exists v in V [ Q.x = v.x ] }",
    "exists r in R [ exists s in S, group() [ r.id = s.id and r.q <= count(s.d) ] ]",
    "not exists r in R [ true ]",
    "{ S(left, right) | exists l in L [ S.left = l.d and S.right = l.d ] }",
]


@pytest.mark.parametrize("src", ROUND_TRIPS, ids=range(len(ROUND_TRIPS)))
def test_print_parse_fixed_point(src):
    p = parse_arc(src)
    text = print_arc(p)
    assert print_arc(parse_arc(text)) == text
    assert program_to_dict(parse_arc(text)) == program_to_dict(p)


class TestLexical:
    def test_keywords_are_case_insensitive(self):
        a = parse_arc("{ Q(A) | EXISTS r IN R [ Q.A = r.A AND NOT EXISTS s IN S [ s.A = r.A ] ] }")
        b = parse_arc("{ Q(A) | exists r in R [ Q.A = r.A and not exists s in S [ s.A = r.A ] ] }")
        assert program_to_dict(a) == program_to_dict(b)

    def test_identifiers_are_case_sensitive(self):
        p = parse_arc("{ Q(A) | exists r in R, R2 in r2 [ Q.A = r.A and R2.x = r.A ] }")
        names = {b.var for q in walk(p) if isinstance(q, Quantified) for b in q.bindings}
        assert names == {"r", "R2"}

    def test_comments_and_whitespace(self):
        p = parse_arc("-- heading comment\n{ Q(A) | -- mid\n  exists r in R [ Q.A = r.A ] }\n")
        assert program_to_dict(p) == program_to_dict(parse_arc(ROUND_TRIPS[0]))

    def test_quoted_text_doubling(self):
        p = parse_arc("{ Q(t) | exists r in R [ Q.t = r.t and r.t = 'a''b' ] }")
        consts = [n.value.val for n in walk(p) if isinstance(n, Constant) and n.value.tag == "text"]
        assert consts == ["a'b"]

    def test_keyword_spellings_allowed_as_attributes(self):
        p = parse_arc("{ S(left, right) | exists l in L [ S.left = l.left and S.right = l.group ] }")
        assert [a for a in walk(p) if getattr(a, "attribute", None) == "group"]


class TestStructure:
    def test_grouping_before_join_tree(self):
        p = parse_arc("{ Q(A, c) | exists r in R, s in S, group(r.A), left(r, s) "
                      "[ Q.A = r.A and Q.c = count(s.B) and r.A = s.A ] }")
        q = next(n for n in walk(p) if isinstance(n, Quantified))
        assert isinstance(q.grouping, GroupingOp) and isinstance(q.joins, JoinOuter)

    def test_join_tree_before_grouping_is_rejected(self):
        with pytest.raises(ParseError):
            parse_arc("{ Q(A, c) | exists r in R, s in S, left(r, s), group(r.A) "
                      "[ Q.A = r.A and Q.c = count(s.B) ] }")

    def test_or_binds_looser_than_and(self):
        p = parse_arc("{ Q(A) | exists r in R [ Q.A = r.A and r.B = 1 or r.B = 2 ] }")
        body = next(n for n in walk(p) if isinstance(n, Quantified)).body
        assert isinstance(body, Or) and isinstance(body.children[0], And)

    def test_not_exists_folds_into_polarity(self):
        p = parse_arc("{ Q(A) | exists r in R [ Q.A = r.A and "
                      "not exists s in S [ s.A = r.A ] and r.B = 1 ] }")
        body = next(n for n in walk(p) if isinstance(n, Quantified)).body
        assert isinstance(body, And) and len(body.children) == 3
        inner = body.children[1]
        assert isinstance(inner, Quantified) and inner.polarity == "notExists"

    def test_not_before_parenthesized_formula(self):
        p = parse_arc("{ Q(A) | exists r in R [ Q.A = r.A and not (r.B = 1 or r.B = 2) ] }")
        body = next(n for n in walk(p) if isinstance(n, Quantified)).body
        assert isinstance(body.children[1], Not)
        assert isinstance(body.children[1].child, Or)

    def test_nested_collection_source(self):
        p = parse_arc("{ Q(A) | exists x in { X(A) | exists y in Y [ X.A = y.A ] } "
                      "[ Q.A = x.A ] }")
        heads = {c.head.relation for c in walk(p) if hasattr(c, "head")}
        assert heads == {"Q", "X"}

    def test_inner_needs_two_children(self):
        with pytest.raises(ParseError):
            parse_arc("{ Q(A) | exists r in R, inner(r) [ Q.A = r.A ] }")

    def test_outer_joins_are_binary(self):
        with pytest.raises(ParseError):
            parse_arc("{ Q(A) | exists r in R, s in S, t in T, left(r, s, t) [ Q.A = r.A ] }")

    def test_comparison_operators(self):
        ops = set()
        p = parse_arc("{ Q(A) | exists r in R [ Q.A = r.A and r.B <> 1 and r.B < 2 "
                      "and r.B <= 3 and r.B > 0 and r.B >= 1 ] }")
        for n in walk(p):
            if isinstance(n, Atom) and isinstance(n.predicate, Compare):
                ops.add(n.predicate.op)
        assert ops == {"=", "<>", "<", "<=", ">", ">="}


class TestErrors:
    CASES = [
        "{ Q(A) | exists r in R [ Q.A = r.A ]",     # unclosed collection
        "{ Q() | exists r in R [ true ] }",         # empty head
        "{ Q(A, A) | exists r in R [ Q.A = r.A ] }",  # duplicate head attr
        "{ Q(A) | exists r in R [ Q.A == r.A ] }",  # C-style equality
        "{ Q(A) | exists r in R [ Q.A = r.A ] } trailing",
        "{ Q(A) | exists in R [ Q.A = r.A ] }",     # missing variable
        "{ Q(A) | exists r in R [ (Q.A) = r.A ] }",  # no parenthesized terms
        "{ Q(A) | exists r in R [ Q.A = 'open ] }",  # unterminated text
        "{ Q(A) | exists r in R, group(r.A), group(r.B) [ Q.A = r.A ] }",
        "def Q { Q(A) | exists r in R [ Q.A = r.A ] }",  # missing :=
    ]

    @pytest.mark.parametrize("src", CASES, ids=range(len(CASES)))
    def test_bad_programs_fail_with_position(self, src):
        with pytest.raises(ParseError) as exc:
            parse_arc(src)
        assert "line" in str(exc.value) and "column" in str(exc.value)


# A compact generator for random well-formed programs: one quantifier level
# with optional negated inner scope, random comparisons over two variables.
@st.composite
def small_programs(draw):
    attrs = ["A", "B", "C"]
    head_attr = draw(st.sampled_from(attrs))
    conj = [f"Q.{head_attr} = r.{head_attr}"]
    for _ in range(draw(st.integers(0, 2))):
        left = draw(st.sampled_from(attrs))
        op = draw(st.sampled_from(["=", "<>", "<", "<=", ">", ">="]))
        right = draw(st.one_of(st.integers(-9, 9),
                               st.sampled_from([f"s.{a}" for a in attrs])))
        conj.append(f"r.{left} {op} {right}")
    inner = draw(st.booleans())
    if inner:
        conj.append("not exists t in T [ t.A = r.A ]")
    return ("{ Q(%s) | exists r in R, s in S [ %s ] }"
            % (head_attr, " and ".join(conj)))


@settings(max_examples=60, deadline=None)
@given(small_programs())
def test_random_programs_round_trip(src):
    p = parse_arc(src)
    text = print_arc(p)
    assert print_arc(parse_arc(text)) == text
    assert program_to_dict(parse_arc(text)) == program_to_dict(p)
