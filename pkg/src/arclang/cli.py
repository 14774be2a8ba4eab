"""Command-line surface: parse, check, evaluate, translate SQL, render
diagrams, compare patterns, classify aggregation direction, and run a few
self-contained demos.

Exit codes: 0 success, 1 errors or diagnosed differences, 2 usage errors.
The environment variable ARC_EXTERNAL_REGISTRY may name a JSON file that
replaces the built-in registry of computed relations for every command that
links a program.
"""

import argparse
import json
import os
import sys

from .alt import to_json
from .binder import ExpansionError, check_program, expand_abstract, load_registry
from .conventions import (BAG, NULL_EMPTY, SET, ZERO_EMPTY, ConventionError, Conventions,
                          conventions_souffle, conventions_sql)
from .evaluator import Database, EvalError, Relation, evaluate, relation_to_json
from .higraph import doc_to_dict, to_dot, to_higraph
from .parser import ParseError, _value_text, parse_arc, print_arc
from .patterns import classify_aggregation, pattern_diff
from .sqlfront import SqlParseError, UnsupportedSql, parse_sql, translate_sql, translation_warnings


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _registry():
    path = os.environ.get("ARC_EXTERNAL_REGISTRY")
    return load_registry(path) if path else None


def _link_or_report(program, registry):
    """Bind the program; diagnostics go to stderr. Returns None on errors."""
    lp, diagnostics = check_program(program, registry)
    for d in diagnostics:
        print(str(d), file=sys.stderr)
    return lp


# ------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------

def cmd_parse(args) -> int:
    program = parse_arc(_read(args.file))
    sys.stdout.write(to_json(program))
    return 0


def cmd_check(args) -> int:
    program = parse_arc(_read(args.file))
    _, diagnostics = check_program(program, _registry())
    for d in diagnostics:
        print(str(d))
    return 1 if any(d.severity == "error" for d in diagnostics) else 0


def cmd_eval(args) -> int:
    conventions = Conventions(
        collection_semantics=SET if args.semantics == "set" else BAG,
        empty_aggregate=NULL_EMPTY if args.agg_empty == "null" else ZERO_EMPTY,
        fixpoint_iteration_cap=args.fixpoint_cap)
    registry = _registry()
    program = parse_arc(_read(args.file))
    lp = _link_or_report(program, registry)
    if lp is None:
        return 1
    expanded = expand_abstract(program, registry)
    if expanded is not program:
        lp, _ = check_program(expanded, registry)
    db = Database.from_json(_read(args.db))
    out = evaluate(lp, db, conventions)
    if isinstance(out, Relation):
        sys.stdout.write(relation_to_json(out))
    else:
        print("true" if out else "false")
    return 0


def cmd_from_sql(args) -> int:
    program = translate_sql(parse_sql(_read(args.file)))
    for w in translation_warnings(program):
        print(w, file=sys.stderr)
    if args.emit == "json":
        sys.stdout.write(to_json(program))
    else:
        sys.stdout.write(print_arc(program))
    return 0


def cmd_render(args) -> int:
    program = parse_arc(_read(args.file))
    lp = _link_or_report(program, _registry())
    if lp is None:
        return 1
    doc = to_higraph(lp, collapse=tuple(args.collapse or ()))
    if args.format == "json":
        sys.stdout.write(json.dumps(doc_to_dict(doc), indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(to_dot(doc))
    return 0


def cmd_diff(args) -> int:
    a = parse_arc(_read(args.left))
    b = parse_arc(_read(args.right))
    difference = pattern_diff(a, b)
    if difference is None:
        print("patterns match")
        return 0
    print("patterns differ")
    print(difference)
    return 1


def cmd_classify(args) -> int:
    program = parse_arc(_read(args.file))
    labels = classify_aggregation(program)
    if not labels:
        print("no grouping scopes")
    for scope_id, label in labels:
        print(f"{scope_id}: {label}")
    return 0


# ------------------------------------------------------------------
# Demos — self-contained: queries and databases live in this file and run
# through the same library entry points as user input.
# ------------------------------------------------------------------

def _db(**relations) -> Database:
    return Database.from_obj({"relations": {
        name: {"schema": list(schema), "rows": [list(r) for r in rows]}
        for name, (schema, rows) in relations.items()}})


def _run(text: str, db: Database, conventions: Conventions) -> Relation:
    lp, diagnostics = check_program(expand_abstract(parse_arc(text)))
    if lp is None:  # demos ship known-good queries
        raise RuntimeError("; ".join(str(d) for d in diagnostics))
    return evaluate(lp, db, conventions)


def _rel_text(rel: Relation) -> str:
    rows = []
    for tup, count in rel.sorted_items():
        for _ in range(count):
            rows.append("(" + ", ".join(_value_text(v) for v in tup) + ")")
    return "{" + ", ".join(rows) + "}"


_COUNT_CORRELATED = """
{ Q(id) | exists r in R [ Q.id = r.id and
  exists s in S, group() [ r.id = s.id and r.q = count(s.d) ] ] }
"""

_COUNT_DERIVED = """
{ Q(id) | exists r in R,
  x in { X(id, ct) | exists s in S, group(s.id)
         [ X.id = s.id and X.ct = count(s.d) ] }
  [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }
"""

_COUNT_OUTER = """
{ Q(id) | exists r in R,
  x in { X(id, ct) | exists s in S, r2 in R, group(r2.id), left(r2, s)
         [ X.id = r2.id and X.ct = count(s.d) and r2.id = s.id ] }
  [ Q.id = r.id and r.id = x.id and r.q = x.ct ] }
"""


def demo_count_bug() -> int:
    db = _db(R=(("id", "q"), [(9, 0)]), S=(("id", "d"), []))
    conventions = conventions_sql()
    print("Which R-rows have exactly r.q partners in S?  Here R = {(9, 0)}")
    print("and S is empty, so id 9 (with zero partners) belongs in the answer.")
    print()
    for label, text in [("correlated count   ", _COUNT_CORRELATED),
                        ("derived-table count", _COUNT_DERIVED),
                        ("outer-join count   ", _COUNT_OUTER)]:
        print(f"  {label} -> {_rel_text(_run(text, db, conventions))}")
    print()
    print("The derived table loses the empty group before the join, so the")
    print("middle query drops id 9; counting per row or preserving rows with")
    print("an outer join keeps it.")
    return 0


_CONVENTIONS_QUERY = """
{ Q(ak, sm) | exists r in R,
  x in { X(sm) | exists s in S, group() [ s.a < r.ak and X.sm = sum(s.b) ] }
  [ Q.ak = r.ak and Q.sm = x.sm ] }
"""


def demo_conventions() -> int:
    db = _db(R=(("ak", "b"), [(1, 2)]), S=(("a", "b"), []))
    print("One query: per R-row, sum the S-values below its key.")
    print("One database: R = {(1, 2)}, S = {}.  Two evaluation conventions:")
    print()
    print(f"  sets, empty sum = 0     -> {_rel_text(_run(_CONVENTIONS_QUERY, db, conventions_souffle()))}")
    print(f"  bags, empty sum = null  -> {_rel_text(_run(_CONVENTIONS_QUERY, db, conventions_sql()))}")
    print()
    print("Same pattern, different answers: the result is only defined once")
    print("the conventions are fixed.")
    return 0


_MATMUL = """
{ C(row, col, val) | exists a in A, b in B, group(a.row, b.col)
  [ C.row = a.row and C.col = b.col and a.col = b.row
    and C.val = sum(a.val * b.val) ] }
"""


def demo_matrix() -> int:
    a = [(1, 1, 2), (1, 2, 3)]
    b = [(1, 1, 2), (2, 1, 2)]
    db = _db(A=(("row", "col", "val"), a), B=(("row", "col", "val"), b))
    print("Sparse matrix product as one grouped aggregation (row, col, val):")
    print()
    print(f"  A               = {_rel_text(db.get('A'))}")
    print(f"  B               = {_rel_text(db.get('B'))}")
    print(f"  A x B           = {_rel_text(_run(_MATMUL, db, conventions_souffle()))}")
    print()
    print("Pairs with a.col = b.row are multiplied, then summed per cell.")
    return 0


_UNIQUE_SET = """
def S := { S(left, right) |
  not exists l3 in L [ l3.d = S.left and
    not exists l4 in L [ l4.b = l3.b and l4.d = S.right ] ] }
{ Q(d) | exists l1 in L [ Q.d = l1.d and
  not exists l2 in L, s1 in S, s2 in S [ l2.d <> l1.d and
    s1.left = l1.d and s1.right = l2.d and
    s2.left = l2.d and s2.right = l1.d ] ] }
"""


def demo_unique_set() -> int:
    likes = [("a", "X"), ("a", "Y"), ("b", "X"), ("b", "Y"), ("c", "X")]
    db = _db(L=(("d", "b"), likes))
    print("Drinkers whose exact set of beers nobody else has.")
    print("S(left, right) holds when left's beers are a subset of right's;")
    print("a drinker is unique when no other drinker subsumes them both ways.")
    print()
    print(f"  L (drinker, beer) = {_rel_text(db.get('L'))}")
    print(f"  unique drinkers   = {_rel_text(_run(_UNIQUE_SET, db, conventions_souffle()))}")
    print()
    print("a and b share {X, Y}, so only c (with just {X}) is unique.")
    return 0


_DEMOS = {
    "count-bug": demo_count_bug,
    "conventions": demo_conventions,
    "matrix": demo_matrix,
    "unique-set": demo_unique_set,
}


def cmd_demo(args) -> int:
    return _DEMOS[args.name]()


# ------------------------------------------------------------------
# Argument parsing
# ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arc",
        description="Toolkit for an abstract relational calculus: comprehension "
                    "queries over relations, with switchable evaluation "
                    "conventions, SQL translation, diagram rendering, and "
                    "pattern comparison.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("parse", help="parse a query file and print its tree as JSON")
    p.add_argument("file", help="query file, or - for stdin")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check", help="report scoping and typing diagnostics")
    p.add_argument("file", help="query file, or - for stdin")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="evaluate a query against a database")
    p.add_argument("file", help="query file, or - for stdin")
    p.add_argument("--db", required=True, help="database JSON file")
    p.add_argument("--semantics", choices=("set", "bag"), default="set",
                   help="collection semantics (default: set)")
    p.add_argument("--agg-empty", choices=("null", "zero"), default="null",
                   help="aggregate of an empty collection (default: null)")
    p.add_argument("--fixpoint-cap", type=int, default=10000, metavar="N",
                   help="iteration cap for recursive definitions (default: 10000)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("from-sql", help="translate a SQL query, preserving its pattern")
    p.add_argument("file", help="SQL file, or - for stdin")
    p.add_argument("--emit", choices=("arc", "json"), default="arc",
                   help="output as query text or tree JSON (default: arc)")
    p.set_defaults(func=cmd_from_sql)

    p = sub.add_parser("render", help="render a query as a nested-region diagram")
    p.add_argument("file", help="query file, or - for stdin")
    p.add_argument("--format", choices=("dot", "json"), default="dot",
                   help="output format (default: dot)")
    p.add_argument("--collapse", action="append", metavar="NAME",
                   help="draw this defined relation as a closed box (repeatable)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("diff", help="compare two queries by relational pattern")
    p.add_argument("left", help="query file")
    p.add_argument("right", help="query file")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("classify", help="label each grouping scope FIO or FOI")
    p.add_argument("file", help="query file, or - for stdin")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("demo", help="run a built-in worked example")
    p.add_argument("name", choices=sorted(_DEMOS))
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return args.func(args)
    except (ParseError, SqlParseError, UnsupportedSql, EvalError, ExpansionError,
            ConventionError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
