"""Diagram construction and DOT rendering.

Golden files under tests/golden/ were fixed after a manual review of the
first correct render; the byte-compare tests pin the output format down to
whitespace so any change to the emitter is a deliberate golden update.
"""

import json
from pathlib import Path

import pytest

from arclang.binder import check_program
from arclang.higraph import Region, doc_to_dict, to_dot, to_higraph
from arclang.parser import parse_arc
from arclang.sqlfront import parse_sql, translate_sql

from test_evaluator import (ANCESTOR, COUNT_V1, COUNT_V2, COUNT_V3, EVERY_R_COVERED,
                            GROUP_SUM_FIO, GROUP_SUM_FOI, LEFT_AS_UNION, NOT_IN_GUARDED,
                            OUTER_ON_CONSTANT, UNIQUE_MODULAR)
from test_sqlfront import SQL_NOT_IN

GOLDEN_DIR = Path(__file__).parent / "golden"

BASIC_JOIN = """
{ Q(A) | exists r in R, s in S [ Q.A = r.A and r.B = s.B and s.C = 0 ] }
"""

GOLDEN_QUERIES = {
    "basic_join": BASIC_JOIN,
    "group_sum_fio": GROUP_SUM_FIO,
    "group_sum_foi": GROUP_SUM_FOI,
    "outer_join_literal": OUTER_ON_CONSTANT,
    "count_correlated": COUNT_V1,
    "count_derived": COUNT_V2,
    "count_outer_join": COUNT_V3,
}


def linked(src: str):
    lp, diags = check_program(parse_arc(src))
    assert lp is not None and not [d for d in diags if d.severity == "error"], diags
    return lp


def render(src: str, **kw) -> str:
    return to_dot(to_higraph(linked(src), **kw))


def count_regions(region: Region) -> int:
    return 1 + sum(count_regions(r) for r in region.regions)


def all_tables(region: Region):
    yield from region.tables
    for child in region.regions:
        yield from all_tables(child)


# ------------------------------------------------------------------
# Golden files
# ------------------------------------------------------------------

class TestGoldenFiles:
    @pytest.mark.parametrize("name", sorted(GOLDEN_QUERIES))
    def test_matches_checked_in_render(self, name):
        got = render(GOLDEN_QUERIES[name])
        want = (GOLDEN_DIR / f"{name}.dot").read_bytes()
        assert got.encode("utf-8") == want

    @pytest.mark.parametrize("name", sorted(GOLDEN_QUERIES))
    def test_two_renders_are_byte_identical(self, name):
        src = GOLDEN_QUERIES[name]
        assert render(src) == render(src)


# ------------------------------------------------------------------
# Structure
# ------------------------------------------------------------------

class TestStructure:
    def test_one_cluster_per_scope(self):
        for src in GOLDEN_QUERIES.values():
            lp = linked(src)
            doc = to_higraph(lp)
            assert count_regions(doc.root) == len(lp.scopes)

    def test_sentence_scopes_also_map_one_to_one(self):
        lp = linked(EVERY_R_COVERED)
        doc = to_higraph(lp)
        assert count_regions(doc.root) == len(lp.scopes)
        assert doc.root.kind == "canvas"

    def test_basic_join_shape(self):
        doc = to_higraph(linked(BASIC_JOIN))
        comparisons = [e for e in doc.edges if e.kind == "comparison"]
        assignments = [e for e in doc.edges if e.kind == "assignment"]
        assert len(comparisons) == 1 and len(assignments) == 1
        tables = list(all_tables(doc.root))
        assert [t.title for t in tables] == ["Q", "R", "S"]
        s_table = tables[2]
        assert [row.text for row in s_table.rows] == ["B", "C = 0"]

    def test_grouping_scope_is_double_bordered_with_shaded_key(self):
        doc = to_higraph(linked(GROUP_SUM_FIO))
        inner = doc.root.regions[0]
        assert inner.grouped
        r_table = inner.tables[0]
        assert [(row.text, row.shaded) for row in r_table.rows] == \
            [("A", True), ("B", False)]

    def test_aggregate_assignment_edge_is_labeled(self):
        doc = to_higraph(linked(GROUP_SUM_FIO))
        labels = sorted(e.label for e in doc.edges if e.kind == "assignment")
        assert labels == ["", "sum"]

    def test_aggregate_comparison_edge_is_labeled(self):
        doc = to_higraph(linked(COUNT_V1))
        labels = [e.label for e in doc.edges if e.kind == "comparison"]
        assert labels == ["", "count"]

    def test_nested_collection_head_carries_outer_references(self):
        doc = to_higraph(linked(GROUP_SUM_FOI))
        dot = to_dot(doc)
        # The outer head receives one of its values from the nested head.
        heads = [t for t in all_tables(doc.root) if t.kind == "head"]
        assert [t.title for t in heads] == ["Q", "X"]
        x_id = heads[1].id
        assert any(e.kind == "assignment" and e.src_table == x_id
                   for e in doc.edges)
        assert dot.count("peripheries") == 1

    def test_negated_scope_gets_a_label(self):
        dot = render(NOT_IN_GUARDED)
        assert 'label="¬"' in dot

    def test_outer_join_marks_the_optional_side(self):
        doc = to_higraph(linked(OUTER_ON_CONSTANT))
        optional = [e for e in doc.edges if e.optional]
        assert [e.optional for e in optional] == ["dst", "dst"]
        literal = [t for t in all_tables(doc.root) if t.kind == "literal"]
        assert len(literal) == 1 and literal[0].title == "11"

    def test_union_of_branches_renders_sibling_regions(self):
        lp = linked(LEFT_AS_UNION)
        doc = to_higraph(lp)
        assert count_regions(doc.root) == len(lp.scopes)
        assert "∨" in doc.root.notes

    def test_true_sentence_is_a_single_canvas(self):
        lp = linked("true")
        doc = to_higraph(lp)
        assert count_regions(doc.root) == 1
        assert doc.root.kind == "canvas" and doc.root.notes == ["true"]


# ------------------------------------------------------------------
# Defined relations: inline expansion and module boxes
# ------------------------------------------------------------------

class TestDefinedRelations:
    def test_uses_are_inlined_by_default(self):
        doc = to_higraph(linked(UNIQUE_MODULAR))
        heads = [t.title for t in all_tables(doc.root) if t.kind == "head"]
        assert heads.count("S") == 2  # one sub-diagram per use

    def test_collapse_renders_module_boxes(self):
        lp = linked(UNIQUE_MODULAR)
        doc = to_higraph(lp, collapse={"S"})
        modules = [t for t in all_tables(doc.root) if t.kind == "module"]
        assert [t.title for t in modules] == ["S", "S"]
        # Referenced attributes become ports on the box.
        assert [row.text for row in modules[0].rows] == ["left", "right"]

    def test_collapsing_then_expanding_restores_the_document(self):
        lp = linked(UNIQUE_MODULAR)
        base = to_higraph(lp)
        assert to_higraph(lp, collapse={"S"}) != base
        assert to_higraph(lp) == base

    def test_recursive_definitions_render_as_plain_tables(self):
        doc = to_higraph(linked(ANCESTOR))
        titles = [t.title for t in all_tables(doc.root)]
        assert "A" in titles
        kinds = {t.title: t.kind for t in all_tables(doc.root)}
        assert kinds["A"] == "relation"


# ------------------------------------------------------------------
# Serialization details
# ------------------------------------------------------------------

class TestSerialization:
    def test_doc_round_trips_through_json(self):
        doc = to_higraph(linked(GROUP_SUM_FOI))
        data = doc_to_dict(doc)
        assert json.loads(json.dumps(data)) == data

    def test_translated_sql_renders_without_error(self):
        program = translate_sql(parse_sql(SQL_NOT_IN))
        lp, diags = check_program(program)
        assert lp is not None and not [d for d in diags if d.severity == "error"]
        dot = to_dot(to_higraph(lp))
        assert "is null" in dot

    def test_html_sensitive_text_is_escaped(self):
        src = "{ Q(A) | exists r in R [ Q.A = r.A and r.B = 'x<&y' ] }"
        dot = render(src)
        assert "x&lt;&amp;y" in dot and "x<&y" not in dot
