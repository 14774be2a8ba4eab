"""SQL front end: parsing, translation shape, binder cleanliness, and
evaluation agreement with the hand-written comprehension forms.

The SQL texts are the worked examples the package documents; the expected
comprehensions and results come from the evaluator test suite, so these
tests pin the translation to the independently verified semantics.
"""

import pytest

from test_evaluator import (ARITH_DIRECT, ARITH_RELATIONAL, COUNT_V1, COUNT_V2, COUNT_V3,
                            DATALOG, EVERY_R_COVERED, GROUP_SUM_FIO, GROUP_SUM_FOI,
                            HAVING_ONE_SCOPE, LATERAL, LIKES, NO_R_UNCOVERED, NOT_IN_GUARDED,
                            OUTER_ON_CONSTANT, SETNULL, SQL, UNIQUE_EXPANDED, database, linked,
                            rows, rowset, run)

import oracles
from arclang.alt import program_to_dict
from arclang.binder import check_program
from arclang.evaluator import EvalError, Relation, evaluate
from arclang.parser import parse_arc, print_arc
from arclang.sqlfront import (SqlExists, SqlJoin, SqlParseError, SubqueryRef, UnsupportedSql,
                              parse_sql, sql_roundtrip_eval, translate_sql,
                              translation_warnings)

# ------------------------------------------------------------------
# The SQL texts of the worked examples
# ------------------------------------------------------------------

SQL_CORRELATED_LATERAL = """select x.A, z.B
from X as x
join lateral (
  select y.A as B
  from Y as y
  where x.A < y.A) as z
on true"""

SQL_GROUP_SUM = """select R.A, sum(R.B) sm
from R
group by R.A"""

SQL_SCALAR_DISTINCT = """select distinct R.A,
  (select sum(R2.B) sm
  from R R2
  where R2.A=R.A)
from R"""

SQL_LATERAL_DISTINCT = """select distinct R.A, X.sm
from R join lateral
  (select sum(R2.B) sm
  from R R2
  where R2.A=R.A) X
on true"""

SQL_HAVING = """select R.dept, avg(S.sal) av
from R, S
where R.empl=S.empl
group by R.dept
having sum(S.sal)>100"""

SQL_SENTENCE_ALL_COVERED = """select exists(
  select 1
  from R
  where R.q <=
    (select count(S.d)
    from S
    where S.id=R.id))"""

SQL_SENTENCE_NONE_UNCOVERED = """select not exists(
  select 1
  from R
  where R.q >
    (select count(S.d)
    from S
    where S.id=R.id))"""

SQL_NOT_IN = """select R.A
from R
where R.A not in
  (select S.A
  from S)"""

SQL_NOT_IN_GUARDED = """select R.A from R
where not exists
  (select 1
  from S
  where S.A=R.A
  or S.A is null
  or R.A is null)"""

SQL_OUTER_ON_CONSTANT = """select R.m, S.n
from R
left outer join S
on (R.h=11 and R.y=S.y)"""

SQL_SCALAR_SUM = """select R.A,
  (select sum(S.B) sm
  from S
  where S.A<R.A)
from R"""

SQL_LATERAL_SUM = """select R.A, X.sm
from R join lateral
  (select sum(S.B) sm
  from S
  where S.A<R.A) X
on true"""

SQL_LEFT_JOIN_GROUP = """select R.A, sum(S.B) sm
from R
left join S
on S.A<R.A
group by R.A"""

SQL_ARITH_DIRECT = """select R.A
from R,S,T
where R.B-S.B>T.B"""

SQL_ARITH_RELATIONAL = """select R.A
from R,S,T,">","-"
where R.B="-".left
and S.B="-".right
and ">".left="-".out
and ">".right=T.B"""

SQL_ARITH_PREDICATE_CALLS = """select R.A
from R,S,T
where "-"(R.B,S.B,x)
and ">"(x,T.B)"""

SQL_COUNT_CORRELATED = """select R.id
from R
where R.q =
  (select count(S.d)
  from S
  where S.id = R.id)"""

SQL_COUNT_DERIVED = """select R.id
from R,
  (select S.id, count(S.d) as ct
  from S
  group by S.id) as X
where R.q = X.ct and R.id = X.id"""

SQL_COUNT_OUTER = """select R.id
from R,
  (select R2.id, count(S.d) as ct
  from R R2 left join S
  on R2.id = S.id
  group by R2.id) as X
where R.q = X.ct and R.id = X.id"""

SQL_UNIQUE_SET = """select distinct L1.drinker
from Likes L1
where not exists
  (select 1
  from Likes L2
  where L1.drinker <> L2.drinker
  and not exists
    (select 1
    from Likes L3
    where L3.drinker = L2.drinker
    and not exists
      (select 1
      from Likes L4
      where L4.drinker = L1.drinker
      and L4.beer = L3.beer))
  and not exists
    (select 1
    from Likes L5
    where L5. drinker = L1.drinker
    and not exists
      (select 1
      from Likes L6
      where L6.drinker = L2.drinker
      and L6.beer = L5.beer)))"""

SQL_UNIQUE_MODULAR = """select distinct L1.drinker
from Likes L1
where not exists
  (select 1
  from Likes L2,Subset S1,Subset S2
  where L1.drinker <> L2.drinker
  and S1.left=L1.drinker
  and S1.right=L2.drinker
  and S2.left=L2.drinker
  and S2.right=L1.drinker)"""

SQL_SUBSET_INTO = """select distinct D1.drinker as left,
                D2.drinker as right
into Subset
from Likes D1, Likes D2
where not exists
  (select 1
  from Likes L3
  where not exists
    (select 1
    from Likes L4
    where L4.beer = L3.beer
    and D2.drinker = L4.drinker)
  and D1.drinker = L3.drinker)"""

SUPPORTED_TEXTS = {
    "correlated-lateral": SQL_CORRELATED_LATERAL,
    "group-sum": SQL_GROUP_SUM,
    "scalar-distinct": SQL_SCALAR_DISTINCT,
    "lateral-distinct": SQL_LATERAL_DISTINCT,
    "having": SQL_HAVING,
    "sentence-all-covered": SQL_SENTENCE_ALL_COVERED,
    "sentence-none-uncovered": SQL_SENTENCE_NONE_UNCOVERED,
    "not-in": SQL_NOT_IN,
    "not-in-guarded": SQL_NOT_IN_GUARDED,
    "outer-on-constant": SQL_OUTER_ON_CONSTANT,
    "scalar-sum": SQL_SCALAR_SUM,
    "lateral-sum": SQL_LATERAL_SUM,
    "left-join-group": SQL_LEFT_JOIN_GROUP,
    "arith-direct": SQL_ARITH_DIRECT,
    "arith-relational": SQL_ARITH_RELATIONAL,
    "count-correlated": SQL_COUNT_CORRELATED,
    "count-derived": SQL_COUNT_DERIVED,
    "count-outer": SQL_COUNT_OUTER,
    "unique-set": SQL_UNIQUE_SET,
    "unique-modular": SQL_UNIQUE_MODULAR,
}


def translated(text, schemas=None):
    return translate_sql(parse_sql(text), schemas)


def checked(text, schemas=None):
    prog = translated(text, schemas)
    lp, diags = check_program(prog)
    errors = [d for d in diags if d.severity == "error"]
    assert lp is not None and not errors, (text, diags)
    return prog


def run_sql(text, db, conv, schemas=None):
    return sql_roundtrip_eval(text, db, conv, schemas=schemas)


# ------------------------------------------------------------------
# Parsing
# ------------------------------------------------------------------

class TestParsing:
    def test_distinct_flag_and_items(self):
        ast = parse_sql(SQL_SCALAR_DISTINCT)
        assert ast.distinct is True
        assert len(ast.items) == 2

    def test_sentence_detection(self):
        ast = parse_sql(SQL_SENTENCE_ALL_COVERED)
        assert isinstance(ast.sentence, SqlExists)
        assert ast.sentence.negated is False
        ast = parse_sql(SQL_SENTENCE_NONE_UNCOVERED)
        assert ast.sentence.negated is True

    def test_join_chain_structure(self):
        ast = parse_sql(SQL_COUNT_OUTER)
        derived = ast.from_items[1]
        assert isinstance(derived, SubqueryRef) and derived.alias == "X"
        join = derived.select.from_items[0]
        assert isinstance(join, SqlJoin) and join.kind == "left"

    def test_lateral_flag(self):
        ast = parse_sql(SQL_LATERAL_SUM)
        join = ast.from_items[0]
        assert isinstance(join, SqlJoin)
        assert join.kind == "inner" and join.lateral is True

    def test_group_by_columns(self):
        ast = parse_sql(SQL_HAVING)
        assert [(c.table, c.name) for c in ast.group_by] == [("R", "dept")]
        assert ast.having is not None

    def test_not_in_is_marked_negated(self):
        ast = parse_sql(SQL_NOT_IN)
        assert ast.where.negated is True

    def test_keywords_are_case_insensitive(self):
        a = parse_sql("SELECT R.A FROM R WHERE R.A IS NOT NULL")
        b = parse_sql("select R.A from R where R.A is not null")
        assert print_arc(translate_sql(a)) == print_arc(translate_sql(b))

    def test_comments_and_semicolon(self):
        text = "select R.A -- take A\nfrom R;"
        assert print_arc(translated(text)) == print_arc(translated("select R.A from R"))

    def test_reserved_spellings_allowed_after_dot_and_as(self):
        ast = parse_sql("select S1.left as left from Subset S1")
        assert ast.items[0].alias == "left"
        assert ast.items[0].expr.name == "left"


# ------------------------------------------------------------------
# Translation passes every static check (zero diagnostics of error level)
# ------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(SUPPORTED_TEXTS))
def test_translation_is_binder_clean(name):
    checked(SUPPORTED_TEXTS[name])


@pytest.mark.parametrize("name", sorted(SUPPORTED_TEXTS))
def test_translation_prints_and_reparses(name):
    prog = translated(SUPPORTED_TEXTS[name])
    text = print_arc(prog)
    assert program_to_dict(parse_arc(text)) == program_to_dict(prog)


# ------------------------------------------------------------------
# Exact translated shapes for the load-bearing examples
# ------------------------------------------------------------------

class TestTranslatedShape:
    def expect(self, sql_text, arc_text):
        assert print_arc(translated(sql_text)).strip() == arc_text.strip()

    def test_group_sum_groups_in_scope(self):
        self.expect(SQL_GROUP_SUM,
                    "{ Q(A, sm) | exists R in R, group(R.A) "
                    "[ Q.A = R.A and Q.sm = sum(R.B) ] }")

    def test_not_in_grows_the_null_guards(self):
        self.expect(SQL_NOT_IN,
                    "{ Q(A) | exists R in R [ Q.A = R.A and not exists S in S "
                    "[ S.A = R.A or S.A is null or R.A is null ] ] }")

    def test_guarded_not_exists_translates_to_the_same_shape(self):
        assert print_arc(translated(SQL_NOT_IN)) == \
            print_arc(translated(SQL_NOT_IN_GUARDED))

    def test_outer_join_constant_becomes_a_literal_leaf(self):
        self.expect(SQL_OUTER_ON_CONSTANT,
                    "{ Q(m, n) | exists R in R, S in S, "
                    "left(R, inner(lit 11 as v1, S)) "
                    "[ Q.m = R.m and Q.n = S.n and R.h = v1.val and R.y = S.y ] }")

    def test_correlated_count_stays_in_formula(self):
        self.expect(SQL_COUNT_CORRELATED,
                    "{ Q(id) | exists R in R [ Q.id = R.id and "
                    "exists S in S, group() [ S.id = R.id and R.q = count(S.d) ] ] }")

    def test_derived_count_becomes_a_nested_grouped_collection(self):
        self.expect(SQL_COUNT_DERIVED,
                    "{ Q(id) | exists R in R, X in { X(id, ct) | "
                    "exists S in S, group(S.id) [ X.id = S.id and X.ct = count(S.d) ] } "
                    "[ Q.id = R.id and R.q = X.ct and R.id = X.id ] }")

    def test_outer_count_keeps_the_join_annotation(self):
        self.expect(SQL_COUNT_OUTER,
                    "{ Q(id) | exists R in R, X in { X(id, ct) | "
                    "exists R2 in R, S in S, group(R2.id), left(R2, S) "
                    "[ X.id = R2.id and X.ct = count(S.d) and R2.id = S.id ] } "
                    "[ Q.id = R.id and R.q = X.ct and R.id = X.id ] }")

    def test_exists_sentences_translate_to_sentences(self):
        self.expect(SQL_SENTENCE_ALL_COVERED,
                    "exists R in R [ exists S in S, group() "
                    "[ S.id = R.id and R.q <= count(S.d) ] ]")
        self.expect(SQL_SENTENCE_NONE_UNCOVERED,
                    "not exists R in R [ exists S in S, group() "
                    "[ S.id = R.id and R.q > count(S.d) ] ]")

    def test_having_splits_into_two_scopes(self):
        self.expect(SQL_HAVING,
                    "{ Q(dept, av) | exists x in { X(dept, av, sm) | "
                    "exists R in R, S in S, group(R.dept) "
                    "[ X.dept = R.dept and X.av = avg(S.sal) and X.sm = sum(S.sal) "
                    "and R.empl = S.empl ] } "
                    "[ Q.dept = x.dept and Q.av = x.av and x.sm > 100 ] }")

    def test_quoted_operator_tables_map_to_stock_externals(self):
        self.expect(SQL_ARITH_RELATIONAL,
                    "{ Q(A) | exists R in R, S in S, T in T, "
                    "bigger in ext Bigger, minus in ext Minus "
                    "[ Q.A = R.A and R.B = minus.left and S.B = minus.right "
                    "and bigger.left = minus.out and bigger.right = T.B ] }")


# ------------------------------------------------------------------
# Evaluation agrees with the hand-written comprehensions
# ------------------------------------------------------------------

class TestEvalAgreement:
    def test_count_trio_on_empty_join_partner(self):
        db = database(R=(("id", "q"), [(9, 0)]), S=(("id", "d"), []))
        assert rows(run_sql(SQL_COUNT_CORRELATED, db, SQL)) == \
            rows(run(COUNT_V1, db, SQL)) == {(9,): 1}
        assert rows(run_sql(SQL_COUNT_DERIVED, db, SQL)) == \
            rows(run(COUNT_V2, db, SQL)) == {}
        assert rows(run_sql(SQL_COUNT_OUTER, db, SQL)) == \
            rows(run(COUNT_V3, db, SQL)) == {(9,): 1}

    def test_count_trio_on_populated_join_partner(self):
        db = database(R=(("id", "q"), [(9, 2), (8, 1)]),
                      S=(("id", "d"), [(9, "a"), (9, "b"), (8, "c")]))
        for sql_text, hand in [(SQL_COUNT_CORRELATED, COUNT_V1),
                               (SQL_COUNT_DERIVED, COUNT_V2),
                               (SQL_COUNT_OUTER, COUNT_V3)]:
            assert rows(run_sql(sql_text, db, SQL)) == rows(run(hand, db, SQL))

    def test_group_sum_matches_in_scope_grouping(self):
        db = database(R=(("A", "B"), [(1, 2), (1, 3), (2, None), (3, 7)]))
        for conv in (SQL, DATALOG, SETNULL):
            assert rows(run_sql(SQL_GROUP_SUM, db, conv)) == \
                rows(run(GROUP_SUM_FIO, db, conv))

    def test_distinct_forms_agree_with_nested_grouping_on_sets(self):
        db = database(R=(("A", "B"), [(1, 2), (1, 3), (2, None), (3, 7)]))
        expect = rowset(run(GROUP_SUM_FOI, db, SETNULL))
        assert rowset(run_sql(SQL_SCALAR_DISTINCT, db, SETNULL)) == expect
        assert rowset(run_sql(SQL_LATERAL_DISTINCT, db, SETNULL)) == expect

    def test_distinct_dedupes_under_bags(self):
        db = database(R=(("A", "B"), [(1, 2), (1, 2), (2, 5)]))
        assert rows(run_sql(SQL_SCALAR_DISTINCT, db, SQL)) == {(1, 4): 1, (2, 5): 1}
        assert rows(run_sql(SQL_LATERAL_DISTINCT, db, SQL)) == {(1, 4): 1, (2, 5): 1}

    def test_having_matches_single_scope_form(self):
        db = database(R=(("empl", "dept"), [("e1", "d1"), ("e2", "d1"), ("e3", "d2")]),
                      S=(("empl", "sal"), [("e1", 50), ("e2", 70), ("e3", 40)]))
        assert rowset(run_sql(SQL_HAVING, db, SETNULL)) == \
            rowset(run(HAVING_ONE_SCOPE, db, SETNULL))

    def test_correlated_lateral(self):
        db = database(X=(("A",), [(1,), (5,)]), Y=(("A",), [(3,), (7,)]))
        assert rowset(run_sql(SQL_CORRELATED_LATERAL, db, SQL)) == \
            rowset(run(LATERAL, db, SQL)) == {(1, 3), (1, 7), (5, 7)}

    def test_sentences(self):
        db = database(R=(("id", "q"), [(9, 0)]), S=(("id", "d"), []))
        assert run_sql(SQL_SENTENCE_ALL_COVERED, db, SQL) is True
        assert run_sql(SQL_SENTENCE_NONE_UNCOVERED, db, SQL) is True
        assert evaluate(linked(EVERY_R_COVERED), db, SQL) is True
        assert evaluate(linked(NO_R_UNCOVERED), db, SQL) is True
        empty = database(R=(("id", "q"), []), S=(("id", "d"), []))
        assert run_sql(SQL_SENTENCE_ALL_COVERED, empty, SQL) is False
        assert run_sql(SQL_SENTENCE_NONE_UNCOVERED, empty, SQL) is True

    def test_not_in_and_its_guarded_spelling(self):
        with_null = database(R=(("A",), [(1,)]), S=(("A",), [(2,), (None,)]))
        plain = database(R=(("A",), [(1,), (2,)]), S=(("A",), [(2,)]))
        for db, expect in [(with_null, {}), (plain, {(1,): 1})]:
            assert rows(run_sql(SQL_NOT_IN, db, SQL)) == expect
            assert rows(run_sql(SQL_NOT_IN_GUARDED, db, SQL)) == expect
            assert rows(run(NOT_IN_GUARDED, db, SQL)) == expect

    def test_outer_join_on_constant(self):
        db = database(R=(("m", "y", "h"), [("m1", "y1", 11), ("m2", "y2", 11),
                                           ("m3", "y3", 7)]),
                      S=(("y", "n"), [("y1", "n1"), ("y3", "n3")]))
        assert rowset(run_sql(SQL_OUTER_ON_CONSTANT, db, SQL)) == \
            rowset(run(OUTER_ON_CONSTANT, db, SQL)) == \
            {("m1", "n1"), ("m2", None), ("m3", None)}

    def test_scalar_and_lateral_sum_agree(self):
        db = database(R=(("A",), [(1,), (5,)]), S=(("A", "B"), [(0, 3), (1, 4)]))
        expect = {(1, 3), (5, 7)}
        assert rowset(run_sql(SQL_SCALAR_SUM, db, SQL)) == expect
        assert rowset(run_sql(SQL_LATERAL_SUM, db, SQL)) == expect
        assert rowset(run_sql(SQL_LEFT_JOIN_GROUP, db, SQL)) == expect

    def test_left_join_grouping_merges_duplicates(self):
        # Grouping by R.A fuses the two copies of the R row into one group,
        # so the join-then-group form sums S.B once per joined copy (6) while
        # the per-row forms emit the per-row sum (3) twice.
        db = database(R=(("A",), [(1,), (1,)]), S=(("A", "B"), [(0, 3)]))
        assert rows(run_sql(SQL_SCALAR_SUM, db, SQL)) == {(1, 3): 2}
        assert rows(run_sql(SQL_LATERAL_SUM, db, SQL)) == {(1, 3): 2}
        assert rows(run_sql(SQL_LEFT_JOIN_GROUP, db, SQL)) == {(1, 6): 1}

    def test_arithmetic_direct_and_relationalized(self):
        hit = database(R=(("A", "B"), [(1, 10)]), S=(("B",), [(3,)]),
                       T=(("B",), [(5,)]))
        miss = database(R=(("A", "B"), [(1, 10)]), S=(("B",), [(3,)]),
                        T=(("B",), [(8,)]))
        for db, expect in [(hit, {(1,): 1}), (miss, {})]:
            assert rows(run_sql(SQL_ARITH_DIRECT, db, SQL)) == expect
            assert rows(run_sql(SQL_ARITH_RELATIONAL, db, SQL)) == expect
            assert rows(run(ARITH_DIRECT, db, SQL)) == expect
            assert rows(run(ARITH_RELATIONAL, db, SQL)) == expect

    def test_unique_set_query(self):
        db = database(Likes=(("drinker", "beer"), LIKES))
        assert rowset(run_sql(SQL_UNIQUE_SET, db, SETNULL)) == {("c",)}
        hand = database(L=(("d", "b"), LIKES))
        assert rowset(run(UNIQUE_EXPANDED, hand, SETNULL)) == {("c",)}

    def test_unique_modular_against_materialized_subset(self):
        subset = sorted(oracles.subset_pairs(LIKES))
        db = database(Likes=(("drinker", "beer"), LIKES),
                      Subset=(("left", "right"), subset))
        assert rowset(run_sql(SQL_UNIQUE_MODULAR, db, SETNULL)) == {("c",)}

    def test_count_star_with_schema_information(self):
        db = database(R=(("id", "q"), [(9, 0), (8, 1)]))
        schemas = {"R": ["id", "q"]}
        prog = translated("select count(*) ct from R", schemas)
        assert print_arc(prog).strip() == \
            "{ Q(ct) | exists R in R, group() [ Q.ct = count(R.id) ] }"
        assert rows(run_sql("select count(*) ct from R", db, SQL,
                            schemas=schemas)) == {(2,): 1}


# ------------------------------------------------------------------
# Rejections
# ------------------------------------------------------------------

UNSUPPORTED = [
    (SQL_SUBSET_INTO, "INTO"),
    (SQL_ARITH_PREDICATE_CALLS, "function call"),
    ("select R.A from R order by R.A", "ORDER BY"),
    ("select R.A from R union select S.A from S", "UNION"),
    ("select R.A from R except select S.A from S", "EXCEPT"),
    ("select R.A from R where R.A in (1, 2)", "IN over a value list"),
    ("select rank() from R", "function call"),
    ("select 1 from R", "constant select item"),
    ("select R.A from R left join lateral (select S.B from S) X on true",
     "LATERAL on an outer join"),
    ("select count(*) ct from R", "COUNT(*) without schema information"),
    ("select R.A from R where sum(R.B) > 1", "aggregate outside SELECT"),
    ("select R.A from R where (select min(S.B) from S) < (select max(S.B) from S)",
     "two scalar subqueries"),
    ("select R.m, S.n from R left join S on R.h = R.y", "touching only one side"),
    ("select R.A, R.B, sum(R.B) sm from R group by R.A having sum(R.B) > 0",
     "not a grouping key"),
    ("select exists(select 1 from R), exists(select 1 from S)", "SELECT without FROM"),
]


@pytest.mark.parametrize("text,needle", UNSUPPORTED,
                         ids=[n.lower().replace(" ", "-")[:28] for _, n in UNSUPPORTED])
def test_unsupported_constructs_are_named(text, needle):
    with pytest.raises(UnsupportedSql) as exc:
        translate_sql(parse_sql(text))
    assert exc.value.code == "E_UNSUPPORTED_SQL"
    assert needle.lower() in exc.value.construct.lower()


PARSE_ERRORS = [
    "select R.A from R, R",                     # duplicate alias
    "select R.A from (select S.A from S)",      # derived table needs alias
    "select A from R",                          # unqualified column
    "select R.A from R where",                  # dangling clause
    "select R.A from R extra things",           # trailing input
    "select R.A from R where R.A = 'oops",      # unterminated literal
    "select R.A from R where R.A ? 1",          # stray character
]


@pytest.mark.parametrize("text", PARSE_ERRORS)
def test_parse_errors(text):
    with pytest.raises(SqlParseError):
        parse_sql(text)


class TestRoundtripHelper:
    def test_returns_relation_for_queries(self):
        db = database(R=(("A",), [(1,)]))
        out = sql_roundtrip_eval("select R.A from R", db, SQL)
        assert isinstance(out, Relation)
        assert rows(out) == {(1,): 1}

    def test_returns_bool_for_sentences(self):
        db = database(R=(("id", "q"), []), S=(("id", "d"), []))
        assert sql_roundtrip_eval(SQL_SENTENCE_ALL_COVERED, db, SQL) is False

    def test_surfaces_binder_errors(self):
        db = database(R=(("A", "B"), [(1, 2)]))
        with pytest.raises(EvalError) as exc:
            sql_roundtrip_eval("select R.A, sum(R.B) sm from R", db, SQL)
        assert exc.value.code == "E_NONKEY_REF_POST_GROUP"


class TestTranslationWarnings:
    def test_grouping_over_outer_join_is_flagged(self):
        warns = translation_warnings(translated(SQL_LEFT_JOIN_GROUP))
        assert len(warns) == 1
        assert warns[0].startswith("W_OUTER_JOIN_GROUPING")

    def test_derived_table_with_outer_join_grouping_is_flagged(self):
        warns = translation_warnings(translated(SQL_COUNT_OUTER))
        assert len(warns) == 1
        assert "preserved-side" in warns[0]

    def test_plain_grouping_is_clean(self):
        assert translation_warnings(translated(SQL_GROUP_SUM)) == []

    def test_correlated_aggregate_is_clean(self):
        assert translation_warnings(translated(SQL_SCALAR_SUM)) == []
