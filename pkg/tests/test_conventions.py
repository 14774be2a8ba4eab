"""The convention switches and the empty-aggregate table."""

import pytest

from arclang.alt import NULL, int_value
from arclang.conventions import (BAG, NULL_EMPTY, SET, ZERO_EMPTY, ConventionError, Conventions,
                                 conventions_sql, conventions_souffle, empty_aggregate_value)


def test_presets():
    sql = conventions_sql()
    assert (sql.collection_semantics, sql.empty_aggregate) == (BAG, NULL_EMPTY)
    assert sql.division_by_zero == "null"
    dl = conventions_souffle()
    assert (dl.collection_semantics, dl.empty_aggregate) == (SET, ZERO_EMPTY)
    assert dl.division_by_zero == "error"


def test_conventions_are_frozen_and_validated():
    c = Conventions()
    with pytest.raises(Exception):
        c.collection_semantics = BAG
    with pytest.raises(ValueError):
        Conventions(collection_semantics="multiset")
    with pytest.raises(ValueError):
        Conventions(empty_aggregate="none")
    with pytest.raises(ValueError):
        Conventions(fixpoint_iteration_cap=0)
    with pytest.raises(ValueError):
        Conventions(division_by_zero="wrap")


# One row per (aggregate, empty_aggregate convention): what a group with no
# non-null inputs produces.
EMPTY_TABLE = [
    ("count", NULL_EMPTY, int_value(0)),
    ("count", ZERO_EMPTY, int_value(0)),
    ("countdistinct", NULL_EMPTY, int_value(0)),
    ("countdistinct", ZERO_EMPTY, int_value(0)),
    ("sum", NULL_EMPTY, NULL),
    ("sum", ZERO_EMPTY, int_value(0)),
    ("avg", NULL_EMPTY, NULL),
    ("min", NULL_EMPTY, NULL),
    ("max", NULL_EMPTY, NULL),
]


@pytest.mark.parametrize("fn,mode,expected", EMPTY_TABLE,
                         ids=[f"{fn}-{mode}" for fn, mode, _ in EMPTY_TABLE])
def test_empty_aggregate_value(fn, mode, expected):
    conv = Conventions(empty_aggregate=mode)
    assert empty_aggregate_value(fn, conv) == expected


@pytest.mark.parametrize("fn", ["avg", "min", "max"])
def test_no_neutral_element(fn):
    conv = Conventions(empty_aggregate=ZERO_EMPTY)
    with pytest.raises(ConventionError) as exc:
        empty_aggregate_value(fn, conv)
    assert exc.value.code == "E_NO_NEUTRAL"


def test_unknown_aggregate_rejected():
    with pytest.raises(ValueError):
        empty_aggregate_value("median", Conventions())
