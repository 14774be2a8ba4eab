"""Independent reference computations for test expectations.

Everything here is deliberately naive (nested loops, dict/set algebra) and
shares no code with the package under test, so an evaluator bug cannot hide
behind a matching oracle bug.
"""

from fractions import Fraction
from itertools import product


def closure(pairs):
    """Transitive closure of a set of (a, b) edges."""
    reach = set(pairs)
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in list(product(reach, reach)):
            if b == c and (a, d) not in reach:
                reach.add((a, d))
                changed = True
    return reach


def matmul(a_rows, b_rows):
    """Sparse matrix product. Inputs are (row, col, val) triples; output is a
    {(row, col): val} dict holding only pairs with at least one contributing
    term (an all-zero dot product still appears, as 0)."""
    out = {}
    for (i, j, x), (j2, k, y) in product(a_rows, b_rows):
        if j == j2:
            out[(i, k)] = out.get((i, k), 0) + x * y
    return out


def unique_drinkers(likes):
    """Drinkers whose set of liked beers no other drinker matches exactly."""
    by_drinker = {}
    for d, b in likes:
        by_drinker.setdefault(d, set()).add(b)
    out = set()
    for d, beers in by_drinker.items():
        if not any(o != d and obeers == beers for o, obeers in by_drinker.items()):
            out.add(d)
    return out


def subset_pairs(likes):
    """(d1, d2) pairs where d1's beer set is a subset of d2's."""
    by_drinker = {}
    for d, b in likes:
        by_drinker.setdefault(d, set()).add(b)
    return {(d1, d2) for d1 in by_drinker for d2 in by_drinker
            if by_drinker[d1] <= by_drinker[d2]}


def group_sum(rows, key_cols, val_col):
    """{key tuple: sum} over rows (None values skipped); groups whose every
    value is None sum to None."""
    out = {}
    for r in rows:
        k = tuple(r[c] for c in key_cols)
        acc = out.setdefault(k, [0, 0])
        v = r[val_col]
        if v is not None:
            acc[0] += v
            acc[1] += 1
    return {k: (s if n else None) for k, (s, n) in out.items()}


def group_avg(rows, key_cols, val_col):
    """{key tuple: Fraction average} skipping None; all-None groups map to
    None."""
    sums, counts = {}, {}
    for r in rows:
        k = tuple(r[c] for c in key_cols)
        v = r[val_col]
        sums.setdefault(k, 0)
        counts.setdefault(k, 0)
        if v is not None:
            sums[k] += v
            counts[k] += 1
    return {k: (Fraction(sums[k], counts[k]) if counts[k] else None) for k in sums}


def left_join(left_rows, right_rows, on, right_width=None):
    """Nested-loop left outer join; unmatched left rows pair with a None
    padding tuple. `on(l, r)` decides matches."""
    width = right_width if right_width is not None else (len(right_rows[0]) if right_rows else 0)
    out = []
    for l in left_rows:
        matched = False
        for r in right_rows:
            if on(l, r):
                out.append(l + r)
                matched = True
        if not matched:
            out.append(l + (None,) * width)
    return out
