"""Evaluation conventions: the switches real systems disagree on.

A Conventions value travels alongside a query into the evaluator; the tree
itself stays convention-free so the same parsed query can be run both ways.
"""

from dataclasses import dataclass

from .alt import NULL, Value, int_value

SET, BAG = "set", "bag"
NULL_EMPTY, ZERO_EMPTY = "null", "zero"


class ConventionError(ValueError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Conventions:
    collection_semantics: str = SET
    empty_aggregate: str = NULL_EMPTY
    fixpoint_iteration_cap: int = 10000
    division_by_zero: str = "null"  # "null" | "error"

    def __post_init__(self):
        if self.collection_semantics not in (SET, BAG):
            raise ValueError(f"collection_semantics: {self.collection_semantics!r}")
        if self.empty_aggregate not in (NULL_EMPTY, ZERO_EMPTY):
            raise ValueError(f"empty_aggregate: {self.empty_aggregate!r}")
        if self.fixpoint_iteration_cap < 1:
            raise ValueError("fixpoint_iteration_cap must be at least 1")
        if self.division_by_zero not in ("null", "error"):
            raise ValueError(f"division_by_zero: {self.division_by_zero!r}")


def conventions_sql() -> Conventions:
    """Bags, and aggregates of nothing are NULL (count excepted)."""
    return Conventions(BAG, NULL_EMPTY, 10000, "null")


def conventions_souffle() -> Conventions:
    """Sets, aggregates of nothing take the monoid neutral element, division
    by zero is a hard error."""
    return Conventions(SET, ZERO_EMPTY, 10000, "error")


def empty_aggregate_value(fn: str, conventions: Conventions) -> Value:
    """What an aggregate over zero non-null inputs produces. Counting is
    always zero; sum has a neutral element to fall back on when asked;
    avg, min, and max have none."""
    if fn in ("count", "countdistinct"):
        return int_value(0)
    if fn == "sum":
        return int_value(0) if conventions.empty_aggregate == ZERO_EMPTY else NULL
    if fn in ("avg", "min", "max"):
        if conventions.empty_aggregate == ZERO_EMPTY:
            raise ConventionError(
                "E_NO_NEUTRAL", f"{fn} over an empty group has no neutral element")
        return NULL
    raise ValueError(f"unknown aggregate {fn!r}")
