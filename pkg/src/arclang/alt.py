"""Abstract language tree for comprehension-style relational queries.

A query is a collection comprehension `{ Head(attrs) | formula }` or a bare
Boolean formula (a sentence). Formulas quantify tuple variables over named
relations, nested collections, or external (computed) relations; a quantifier
scope may carry a grouping operator and a join tree annotation. Attribute
references (`r.A`) are resolved against bindings by the binder; this module
only defines the tree, structural equality, and the canonical JSON form.

Nodes are plain dataclasses. `uid` and `span` never participate in equality,
so trees compare structurally no matter where they came from (parser, SQL
translation, JSON).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

ALT_VERSION = 1

COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/")
AGGREGATE_FNS = ("sum", "count", "avg", "min", "max", "countdistinct")

_uid_counter = itertools.count(1)


def _next_uid() -> int:
    return next(_uid_counter)


@dataclass(frozen=True)
class SourceSpan:
    """Half-open source range in 0-based code points, plus the 0-based
    line/column of the start. Attached by the parser; builders leave None."""

    start: int
    end: int
    line: int
    column: int


class SchemaError(ValueError):
    """Raised when JSON input does not match the serialized tree format.

    `path` is a dotted/indexed location such as "main.collection.body.and[1]".
    """

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


# ------------------------------------------------------------------
# Values
# ------------------------------------------------------------------


@dataclass(frozen=True)
class Value:
    """A constant: arbitrary-precision int, exact decimal, text, bool, null.

    Exact decimals are Fraction-backed so aggregate averages need no floating
    point. Structural equality is tag-sensitive (int 2 != dec 2 as tree
    constants); numeric comparison semantics live in the evaluator.
    """

    tag: str  # "int" | "dec" | "text" | "bool" | "null"
    val: object = None

    def __post_init__(self):
        if self.tag not in ("int", "dec", "text", "bool", "null"):
            raise ValueError(f"bad value tag {self.tag!r}")

    @property
    def is_null(self) -> bool:
        return self.tag == "null"

    def __repr__(self):
        if self.tag == "null":
            return "Value(null)"
        return f"Value({self.tag} {self.val!r})"


NULL = Value("null")
TRUE = Value("bool", True)
FALSE = Value("bool", False)


def int_value(n: int) -> Value:
    return Value("int", int(n))


def dec_value(x) -> Value:
    """Exact decimal from an int, Fraction, or decimal string like '3.50'."""
    if isinstance(x, Fraction):
        return Value("dec", x)
    if isinstance(x, int):
        return Value("dec", Fraction(x))
    if isinstance(x, str):
        return Value("dec", _fraction_from_string(x))
    raise TypeError(f"cannot make a decimal from {x!r}")


def text_value(s: str) -> Value:
    return Value("text", str(s))


def bool_value(b: bool) -> Value:
    return TRUE if b else FALSE


def _fraction_from_string(s: str) -> Fraction:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(s)  # handles "3.5", "-0.25", "7"


def dec_string(fr: Fraction) -> str:
    """Canonical text for an exact decimal: plain decimal notation when the
    denominator is 2^a * 5^b, otherwise "p/q"."""
    den = fr.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{fr.numerator}/{fr.denominator}"
    shift = max(twos, fives)
    scaled = fr.numerator * 10**shift // fr.denominator
    if shift == 0:
        return str(scaled)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


# ------------------------------------------------------------------
# Terms and predicates
# ------------------------------------------------------------------


@dataclass(eq=True)
class Node:
    """Base for tree nodes; uid/span are bookkeeping, not structure."""

    uid: int = field(default_factory=_next_uid, init=False, compare=False, repr=False)
    span: Optional[SourceSpan] = field(default=None, init=False, compare=False, repr=False)

    def with_span(self, span: Optional[SourceSpan]):
        self.span = span
        return self


@dataclass(eq=True)
class Constant(Node):
    value: Value


@dataclass(eq=True)
class Attr(Node):
    """Attribute reference `variable.attribute`. The variable may name a
    quantifier binding or the enclosing collection's head."""

    variable: str
    attribute: str


@dataclass(eq=True)
class Arith(Node):
    op: str  # + - * /
    left: "Term"
    right: "Term"


@dataclass(eq=True)
class Aggregate(Node):
    """Aggregate call; never nested, and the argument mentions at least one
    attribute (both enforced by the binder, not here)."""

    fn: str  # sum count avg min max countdistinct
    arg: "Term"


Term = Union[Constant, Attr, Arith, Aggregate]


@dataclass(eq=True)
class Compare(Node):
    op: str  # = <> < <= > >=
    left: Term
    right: Term


@dataclass(eq=True)
class IsNull(Node):
    term: Term
    negated: bool = False


Predicate = Union[Compare, IsNull]


# ------------------------------------------------------------------
# Bindings and join trees
# ------------------------------------------------------------------


@dataclass(eq=True)
class RelationSource(Node):
    """Range over a named relation: base, defined earlier, or recursive."""

    name: str


@dataclass(eq=True)
class CollectionSource(Node):
    """Range over a nested collection, evaluated laterally: its body may
    reference bindings of enclosing scopes and earlier siblings."""

    collection: "CollectionExpr"


@dataclass(eq=True)
class ExternalSource(Node):
    """Range over an external relation (infinite, computed); only admissible
    with an access pattern from the registry."""

    name: str


BindingSource = Union[RelationSource, CollectionSource, ExternalSource]


@dataclass(eq=True)
class Binding(Node):
    var: str
    source: BindingSource


@dataclass(eq=True)
class JoinLeaf(Node):
    var: str


@dataclass(eq=True)
class LiteralLeaf(Node):
    """Singleton one-attribute relation {(value)}; referenced as `var.val`.
    Placing one on the opposite side of an outer join forces a constant
    comparison into that join's ON condition."""

    value: Value
    var: str


@dataclass(eq=True)
class JoinInner(Node):
    children: list  # of JoinTree, len >= 2


@dataclass(eq=True)
class JoinOuter(Node):
    kind: str  # "left" | "full"
    left: "JoinTree"
    right: "JoinTree"


JoinTree = Union[JoinLeaf, LiteralLeaf, JoinInner, JoinOuter]


@dataclass(eq=True)
class GroupingOp(Node):
    """Partition the scope's joined tuples by key attributes; empty keys mean
    a single group, even over an empty join."""

    keys: list  # of Attr


# ------------------------------------------------------------------
# Formulas
# ------------------------------------------------------------------


@dataclass(eq=True)
class Quantified(Node):
    polarity: str  # "exists" | "notExists"
    bindings: list  # of Binding, len >= 1
    grouping: Optional[GroupingOp]
    joins: Optional[JoinTree]
    body: "Formula"


@dataclass(eq=True)
class And(Node):
    children: list  # of Formula, len >= 2


@dataclass(eq=True)
class Or(Node):
    children: list  # of Formula, len >= 2


@dataclass(eq=True)
class Not(Node):
    child: "Formula"


@dataclass(eq=True)
class Atom(Node):
    predicate: Predicate


@dataclass(eq=True)
class TrueLit(Node):
    pass


Formula = Union[Quantified, And, Or, Not, Atom, TrueLit]


# ------------------------------------------------------------------
# Collections and programs
# ------------------------------------------------------------------


@dataclass(eq=True)
class HeadSpec(Node):
    relation: str
    attributes: list  # of str, distinct

    def __post_init__(self):
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError(f"duplicate head attribute in {self.relation}")


@dataclass(eq=True)
class CollectionExpr(Node):
    head: HeadSpec
    body: Formula


@dataclass(eq=True)
class Definition(Node):
    name: str
    collection: CollectionExpr


@dataclass(eq=True)
class Program(Node):
    """Ordered definitions (later ones may reference earlier ones, and
    recursive definitions reference themselves) plus a main collection or a
    Boolean sentence."""

    definitions: list  # of Definition
    main: Union[CollectionExpr, Formula]


# ------------------------------------------------------------------
# Traversal
# ------------------------------------------------------------------


def children(node) -> Iterator:
    """Direct child nodes, in source order."""
    if isinstance(node, Program):
        yield from node.definitions
        yield node.main
    elif isinstance(node, Definition):
        yield node.collection
    elif isinstance(node, CollectionExpr):
        yield node.head
        yield node.body
    elif isinstance(node, Quantified):
        yield from node.bindings
        if node.grouping is not None:
            yield node.grouping
        if node.joins is not None:
            yield node.joins
        yield node.body
    elif isinstance(node, (And, Or)):
        yield from node.children
    elif isinstance(node, Not):
        yield node.child
    elif isinstance(node, Atom):
        yield node.predicate
    elif isinstance(node, Binding):
        yield node.source
    elif isinstance(node, CollectionSource):
        yield node.collection
    elif isinstance(node, GroupingOp):
        yield from node.keys
    elif isinstance(node, JoinInner):
        yield from node.children
    elif isinstance(node, JoinOuter):
        yield node.left
        yield node.right
    elif isinstance(node, Compare):
        yield node.left
        yield node.right
    elif isinstance(node, IsNull):
        yield node.term
    elif isinstance(node, Arith):
        yield node.left
        yield node.right
    elif isinstance(node, Aggregate):
        yield node.arg


def walk(node) -> Iterator:
    """Preorder traversal including the node itself."""
    yield node
    for c in children(node):
        yield from walk(c)


def free_attribute_refs(node) -> set:
    """(variable, attribute) pairs not bound by any quantifier inside `node`.

    Head attributes are never quantifier-bound, so references to a head count
    as free even for the collection that declares it.
    """
    out = set()

    def go(n, bound: frozenset):
        if isinstance(n, Attr):
            if n.variable not in bound:
                out.add((n.variable, n.attribute))
            return
        if isinstance(n, Quantified):
            inner = bound | frozenset(b.var for b in n.bindings)
            for b in n.bindings:
                go(b.source, inner)
            if n.grouping is not None:
                go(n.grouping, inner)
            if n.joins is not None:
                go(n.joins, inner | _join_vars(n.joins))
            go(n.body, inner)
            return
        for c in children(n):
            go(c, bound)

    def _join_vars(jt) -> frozenset:
        vs = set()
        for sub in walk(jt):
            if isinstance(sub, LiteralLeaf):
                vs.add(sub.var)
        return frozenset(vs)

    go(node, frozenset())
    return out


# ------------------------------------------------------------------
# Canonical JSON
# ------------------------------------------------------------------


def value_to_json(v: Value):
    if v.tag == "int":
        return {"int": str(v.val)}
    if v.tag == "dec":
        return {"dec": dec_string(v.val)}
    if v.tag == "text":
        return {"text": v.val}
    if v.tag == "bool":
        return {"bool": v.val}
    return {"null": None}


def _term_to_json(t: Term):
    if isinstance(t, Constant):
        return {"const": value_to_json(t.value)}
    if isinstance(t, Attr):
        return {"attr": {"var": t.variable, "attr": t.attribute}}
    if isinstance(t, Arith):
        return {"arith": {"op": t.op, "left": _term_to_json(t.left), "right": _term_to_json(t.right)}}
    if isinstance(t, Aggregate):
        return {"agg": {"fn": t.fn, "arg": _term_to_json(t.arg)}}
    raise TypeError(f"not a term: {t!r}")


def _pred_to_json(p: Predicate):
    if isinstance(p, Compare):
        return {"compare": {"op": p.op, "left": _term_to_json(p.left), "right": _term_to_json(p.right)}}
    if isinstance(p, IsNull):
        return {"isNull": {"term": _term_to_json(p.term), "negated": p.negated}}
    raise TypeError(f"not a predicate: {p!r}")


def _jointree_to_json(jt: JoinTree):
    if isinstance(jt, JoinLeaf):
        return {"leaf": jt.var}
    if isinstance(jt, LiteralLeaf):
        return {"lit": {"value": value_to_json(jt.value), "var": jt.var}}
    if isinstance(jt, JoinInner):
        return {"inner": [_jointree_to_json(c) for c in jt.children]}
    if isinstance(jt, JoinOuter):
        return {jt.kind: {"left": _jointree_to_json(jt.left), "right": _jointree_to_json(jt.right)}}
    raise TypeError(f"not a join tree: {jt!r}")


def _formula_to_json(f: Formula):
    if isinstance(f, Quantified):
        q = {"polarity": f.polarity, "bindings": [_binding_to_json(b) for b in f.bindings]}
        if f.grouping is not None:
            q["grouping"] = {"keys": [_term_to_json(k) for k in f.grouping.keys]}
        if f.joins is not None:
            q["joins"] = _jointree_to_json(f.joins)
        q["body"] = _formula_to_json(f.body)
        return {"quantified": q}
    if isinstance(f, And):
        return {"and": [_formula_to_json(c) for c in f.children]}
    if isinstance(f, Or):
        return {"or": [_formula_to_json(c) for c in f.children]}
    if isinstance(f, Not):
        return {"not": _formula_to_json(f.child)}
    if isinstance(f, Atom):
        return {"atom": _pred_to_json(f.predicate)}
    if isinstance(f, TrueLit):
        return {"true": {}}
    raise TypeError(f"not a formula: {f!r}")


def _binding_to_json(b: Binding):
    s = b.source
    if isinstance(s, RelationSource):
        src = {"relation": s.name}
    elif isinstance(s, CollectionSource):
        src = {"collection": _collection_to_json(s.collection)}
    elif isinstance(s, ExternalSource):
        src = {"external": s.name}
    else:
        raise TypeError(f"not a binding source: {s!r}")
    return {"var": b.var, "source": src}


def _collection_to_json(c: CollectionExpr):
    return {
        "head": {"relation": c.head.relation, "attributes": list(c.head.attributes)},
        "body": _formula_to_json(c.body),
    }


def program_to_dict(p: Program) -> dict:
    d = {"alt_version": ALT_VERSION}
    d["definitions"] = [
        {"name": dfn.name, "collection": _collection_to_json(dfn.collection)} for dfn in p.definitions
    ]
    if isinstance(p.main, CollectionExpr):
        d["main"] = {"collection": _collection_to_json(p.main)}
    else:
        d["main"] = {"formula": _formula_to_json(p.main)}
    return d


def to_json(p: Program) -> str:
    """Canonical serialization: stable key order, two-space indent."""
    return json.dumps(program_to_dict(p), indent=2, ensure_ascii=False) + "\n"


# --- deserialization ---


def _expect_obj(x, path, allowed: set) -> dict:
    if not isinstance(x, dict):
        raise SchemaError(path, f"expected object, got {type(x).__name__}")
    for k in x:
        if k not in allowed:
            raise SchemaError(path, f"unknown field {k!r}")
    return x


def _one_key(x, path) -> str:
    if not isinstance(x, dict) or len(x) != 1:
        raise SchemaError(path, "expected an object with exactly one variant key")
    return next(iter(x))


def value_from_json(x, path="value") -> Value:
    k = _one_key(x, path)
    v = x[k]
    if k == "int":
        if not isinstance(v, str) or not _is_int_text(v):
            raise SchemaError(path, "int payload must be a decimal integer string")
        return int_value(int(v))
    if k == "dec":
        if not isinstance(v, str):
            raise SchemaError(path, "dec payload must be a string")
        try:
            return dec_value(v)
        except (ValueError, ZeroDivisionError):
            raise SchemaError(path, f"bad decimal literal {v!r}")
    if k == "text":
        if not isinstance(v, str):
            raise SchemaError(path, "text payload must be a string")
        return text_value(v)
    if k == "bool":
        if not isinstance(v, bool):
            raise SchemaError(path, "bool payload must be true or false")
        return bool_value(v)
    if k == "null":
        if v is not None:
            raise SchemaError(path, "null payload must be null")
        return NULL
    raise SchemaError(path, f"unknown value tag {k!r}")


def _is_int_text(s: str) -> bool:
    t = s[1:] if s[:1] == "-" else s
    return t.isdigit() and t != ""


def _term_from_json(x, path) -> Term:
    k = _one_key(x, path)
    v = x[k]
    if k == "const":
        return Constant(value_from_json(v, path + ".const"))
    if k == "attr":
        o = _expect_obj(v, path + ".attr", {"var", "attr"})
        if not isinstance(o.get("var"), str) or not isinstance(o.get("attr"), str):
            raise SchemaError(path + ".attr", "var and attr must be strings")
        return Attr(o["var"], o["attr"])
    if k == "arith":
        o = _expect_obj(v, path + ".arith", {"op", "left", "right"})
        if o.get("op") not in ARITH_OPS:
            raise SchemaError(path + ".arith.op", f"bad operator {o.get('op')!r}")
        return Arith(o["op"], _term_from_json(o.get("left"), path + ".arith.left"),
                     _term_from_json(o.get("right"), path + ".arith.right"))
    if k == "agg":
        o = _expect_obj(v, path + ".agg", {"fn", "arg"})
        if o.get("fn") not in AGGREGATE_FNS:
            raise SchemaError(path + ".agg.fn", f"bad aggregate {o.get('fn')!r}")
        return Aggregate(o["fn"], _term_from_json(o.get("arg"), path + ".agg.arg"))
    raise SchemaError(path, f"unknown term kind {k!r}")


def _pred_from_json(x, path) -> Predicate:
    k = _one_key(x, path)
    v = x[k]
    if k == "compare":
        o = _expect_obj(v, path + ".compare", {"op", "left", "right"})
        if o.get("op") not in COMPARE_OPS:
            raise SchemaError(path + ".compare.op", f"bad operator {o.get('op')!r}")
        return Compare(o["op"], _term_from_json(o.get("left"), path + ".compare.left"),
                       _term_from_json(o.get("right"), path + ".compare.right"))
    if k == "isNull":
        o = _expect_obj(v, path + ".isNull", {"term", "negated"})
        neg = o.get("negated", False)
        if not isinstance(neg, bool):
            raise SchemaError(path + ".isNull.negated", "must be a boolean")
        return IsNull(_term_from_json(o.get("term"), path + ".isNull.term"), neg)
    raise SchemaError(path, f"unknown predicate kind {k!r}")


def _jointree_from_json(x, path) -> JoinTree:
    k = _one_key(x, path)
    v = x[k]
    if k == "leaf":
        if not isinstance(v, str):
            raise SchemaError(path + ".leaf", "leaf must name a binding variable")
        return JoinLeaf(v)
    if k == "lit":
        o = _expect_obj(v, path + ".lit", {"value", "var"})
        if not isinstance(o.get("var"), str):
            raise SchemaError(path + ".lit.var", "var must be a string")
        return LiteralLeaf(value_from_json(o.get("value"), path + ".lit.value"), o["var"])
    if k == "inner":
        if not isinstance(v, list) or len(v) < 2:
            raise SchemaError(path + ".inner", "inner join needs at least two children")
        return JoinInner([_jointree_from_json(c, f"{path}.inner[{i}]") for i, c in enumerate(v)])
    if k in ("left", "full"):
        o = _expect_obj(v, f"{path}.{k}", {"left", "right"})
        if "left" not in o or "right" not in o:
            raise SchemaError(f"{path}.{k}", "outer join needs left and right")
        return JoinOuter(k, _jointree_from_json(o["left"], f"{path}.{k}.left"),
                         _jointree_from_json(o["right"], f"{path}.{k}.right"))
    raise SchemaError(path, f"unknown join tree kind {k!r}")


def _binding_from_json(x, path) -> Binding:
    o = _expect_obj(x, path, {"var", "source"})
    if not isinstance(o.get("var"), str):
        raise SchemaError(path + ".var", "var must be a string")
    sk = _one_key(o.get("source"), path + ".source")
    sv = o["source"][sk]
    if sk == "relation":
        if not isinstance(sv, str):
            raise SchemaError(path + ".source.relation", "must be a relation name")
        src = RelationSource(sv)
    elif sk == "collection":
        src = CollectionSource(_collection_from_json(sv, path + ".source.collection"))
    elif sk == "external":
        if not isinstance(sv, str):
            raise SchemaError(path + ".source.external", "must be a relation name")
        src = ExternalSource(sv)
    else:
        raise SchemaError(path + ".source", f"unknown source kind {sk!r}")
    return Binding(o["var"], src)


def _formula_from_json(x, path) -> Formula:
    k = _one_key(x, path)
    v = x[k]
    if k == "quantified":
        o = _expect_obj(v, path, {"polarity", "bindings", "grouping", "joins", "body"})
        if o.get("polarity") not in ("exists", "notExists"):
            raise SchemaError(path + ".polarity", f"bad polarity {o.get('polarity')!r}")
        if not isinstance(o.get("bindings"), list) or not o["bindings"]:
            raise SchemaError(path + ".bindings", "need at least one binding")
        bindings = [_binding_from_json(b, f"{path}.bindings[{i}]") for i, b in enumerate(o["bindings"])]
        grouping = None
        if "grouping" in o:
            g = _expect_obj(o["grouping"], path + ".grouping", {"keys"})
            if not isinstance(g.get("keys"), list):
                raise SchemaError(path + ".grouping.keys", "keys must be a list")
            keys = []
            for i, kx in enumerate(g["keys"]):
                t = _term_from_json(kx, f"{path}.grouping.keys[{i}]")
                if not isinstance(t, Attr):
                    raise SchemaError(f"{path}.grouping.keys[{i}]", "grouping keys must be attribute references")
                keys.append(t)
            grouping = GroupingOp(keys)
        joins = _jointree_from_json(o["joins"], path + ".joins") if "joins" in o else None
        if "body" not in o:
            raise SchemaError(path, "missing body")
        return Quantified(o["polarity"], bindings, grouping, joins,
                          _formula_from_json(o["body"], path + ".body"))
    if k in ("and", "or"):
        if not isinstance(v, list) or len(v) < 2:
            raise SchemaError(path, f"{k} needs at least two children")
        kids = [_formula_from_json(c, f"{path}.{k}[{i}]") for i, c in enumerate(v)]
        return And(kids) if k == "and" else Or(kids)
    if k == "not":
        return Not(_formula_from_json(v, path + ".not"))
    if k == "atom":
        return Atom(_pred_from_json(v, path + ".atom"))
    if k == "true":
        if v != {}:
            raise SchemaError(path + ".true", "payload must be an empty object")
        return TrueLit()
    raise SchemaError(path, f"unknown formula kind {k!r}")


def _collection_from_json(x, path) -> CollectionExpr:
    o = _expect_obj(x, path, {"head", "body"})
    h = _expect_obj(o.get("head"), path + ".head", {"relation", "attributes"})
    if not isinstance(h.get("relation"), str):
        raise SchemaError(path + ".head.relation", "must be a string")
    attrs = h.get("attributes")
    if not isinstance(attrs, list) or not attrs or not all(isinstance(a, str) for a in attrs):
        raise SchemaError(path + ".head.attributes", "must be a non-empty list of strings")
    if len(set(attrs)) != len(attrs):
        raise SchemaError(path + ".head.attributes", "head attributes must be distinct")
    if "body" not in o:
        raise SchemaError(path, "missing body")
    return CollectionExpr(HeadSpec(h["relation"], list(attrs)),
                          _formula_from_json(o["body"], path + ".body"))


def from_json(text_or_dict) -> Program:
    """Parse the canonical JSON form back into a Program; unknown fields are
    rejected with a SchemaError naming the offending path."""
    if isinstance(text_or_dict, str):
        try:
            data = json.loads(text_or_dict)
        except json.JSONDecodeError as e:
            raise SchemaError("$", f"not valid JSON: {e}")
    else:
        data = text_or_dict
    o = _expect_obj(data, "$", {"alt_version", "definitions", "main"})
    if o.get("alt_version") != ALT_VERSION:
        raise SchemaError("$.alt_version", f"unsupported version {o.get('alt_version')!r}")
    defs = []
    rawdefs = o.get("definitions", [])
    if not isinstance(rawdefs, list):
        raise SchemaError("$.definitions", "must be a list")
    for i, d in enumerate(rawdefs):
        od = _expect_obj(d, f"$.definitions[{i}]", {"name", "collection"})
        if not isinstance(od.get("name"), str):
            raise SchemaError(f"$.definitions[{i}].name", "must be a string")
        defs.append(Definition(od["name"],
                               _collection_from_json(od.get("collection"), f"$.definitions[{i}].collection")))
    if "main" not in o:
        raise SchemaError("$", "missing main")
    mk = _one_key(o["main"], "$.main")
    if mk == "collection":
        main = _collection_from_json(o["main"][mk], "$.main.collection")
    elif mk == "formula":
        main = _formula_from_json(o["main"][mk], "$.main.formula")
    else:
        raise SchemaError("$.main", f"unknown main kind {mk!r}")
    return Program(defs, main)
