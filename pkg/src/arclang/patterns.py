"""Pattern-level comparison of queries.

Two queries share a relational pattern when they combine their relations the
same way — same scope tree, same grouping and join structure, same predicate
skeleton — regardless of how range variables are spelled, how conjuncts are
ordered, or which operand of an equality comes first.  `canonicalize` maps a
program onto a unique representative of its pattern class:

* range variables are renamed v1, v2, ... in scope-tree preorder;
* binding lists are ordered by source (relation name, then a structural key
  for derived collections), ties keeping source order;
* n-ary connectives and inner join trees are flattened and their children
  sorted by a total structural key;
* grouping-key lists are sorted;
* operands of the commutative comparisons `=` and `<>` are ordered by the
  same structural key (`a = b` and `b = a` are one pattern).

Head relation and attribute names, comparison operators other than the
commutative pair, outer-join sides, and quantifier polarity all remain
significant: they are part of the pattern.  Pattern equality deliberately
stops short of semantic equivalence, which is undecidable; it captures
structural intent only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .alt import (Aggregate, And, Arith, Atom, Attr, Binding, CollectionExpr,
                  CollectionSource, Compare, Constant, Definition, ExternalSource,
                  GroupingOp, HeadSpec, IsNull, JoinInner, JoinLeaf, JoinOuter,
                  LiteralLeaf, Not, Or, Program, Quantified, RelationSource,
                  TrueLit, program_to_dict, walk)

__all__ = ["CanonicalForm", "canonicalize", "pattern_equal", "pattern_diff",
           "classify_aggregation"]


def _program_of(x) -> Program:
    """Accept a linked program, a bare Program, or a main expression."""
    prog = getattr(x, "program", x)
    if isinstance(prog, Program):
        return prog
    if isinstance(prog, (CollectionExpr, Quantified)):
        return Program([], prog)
    raise TypeError(f"cannot extract a program from {type(x).__name__}")


# ------------------------------------------------------------------
# Structural keys
# ------------------------------------------------------------------

_COMMUTATIVE = ("=", "<>")


def _skey(n) -> str:
    """Total structural key over canonical (already renamed) nodes."""
    if isinstance(n, Atom):
        return f"atom({_skey(n.predicate)})"
    if isinstance(n, Compare):
        return f"cmp({n.op},{_skey(n.left)},{_skey(n.right)})"
    if isinstance(n, IsNull):
        return f"isnull({int(n.negated)},{_skey(n.term)})"
    if isinstance(n, And):
        return "and(" + ",".join(_skey(c) for c in n.children) + ")"
    if isinstance(n, Or):
        return "or(" + ",".join(_skey(c) for c in n.children) + ")"
    if isinstance(n, Not):
        return f"not({_skey(n.child)})"
    if isinstance(n, TrueLit):
        return "true"
    if isinstance(n, Quantified):
        return "quant({},[{}],{},{},{})".format(
            n.polarity,
            ",".join(_skey(b) for b in n.bindings),
            _skey(n.grouping) if n.grouping is not None else "-",
            _skey(n.joins) if n.joins is not None else "-",
            _skey(n.body))
    if isinstance(n, Binding):
        return f"bind({n.var},{_skey(n.source)})"
    if isinstance(n, RelationSource):
        return f"rel({n.name})"
    if isinstance(n, ExternalSource):
        return f"ext({n.name})"
    if isinstance(n, CollectionSource):
        return f"coll({_skey(n.collection)})"
    if isinstance(n, CollectionExpr):
        return f"set({_skey(n.head)},{_skey(n.body)})"
    if isinstance(n, HeadSpec):
        return "head(" + n.relation + ";" + ",".join(n.attributes) + ")"
    if isinstance(n, GroupingOp):
        return "gamma(" + ",".join(_skey(k) for k in n.keys) + ")"
    if isinstance(n, JoinLeaf):
        return f"leaf({n.var})"
    if isinstance(n, LiteralLeaf):
        return f"lit({n.value.tag}:{n.value.val!r},{n.var})"
    if isinstance(n, JoinInner):
        return "inner(" + ",".join(_skey(c) for c in n.children) + ")"
    if isinstance(n, JoinOuter):
        return f"outer({n.kind},{_skey(n.left)},{_skey(n.right)})"
    if isinstance(n, Constant):
        return f"const({n.value.tag}:{n.value.val!r})"
    if isinstance(n, Attr):
        return f"@{n.variable}.{n.attribute}"
    if isinstance(n, Arith):
        return f"arith({n.op},{_skey(n.left)},{_skey(n.right)})"
    if isinstance(n, Aggregate):
        return f"agg({n.fn},{_skey(n.arg)})"
    raise TypeError(f"no structural key for {type(n).__name__}")


def _ekey(n, env) -> str:
    """Sort key for bindings, computed before this scope's names exist.

    References to already-renamed ancestors keep their canonical names; any
    other variable — locals of the source and same-scope siblings — erases
    to "?".  Collisions fall back to source order, which keeps the result
    deterministic.
    """
    if isinstance(n, Attr):
        return "@" + env.get(n.variable, "?") + "." + n.attribute
    if isinstance(n, Atom):
        return f"atom({_ekey(n.predicate, env)})"
    if isinstance(n, Compare):
        sides = [_ekey(n.left, env), _ekey(n.right, env)]
        if n.op in _COMMUTATIVE:
            sides.sort()
        return f"cmp({n.op},{sides[0]},{sides[1]})"
    if isinstance(n, IsNull):
        return f"isnull({int(n.negated)},{_ekey(n.term, env)})"
    if isinstance(n, (And, Or)):
        tag = "and" if isinstance(n, And) else "or"
        return tag + "(" + ",".join(sorted(_ekey(c, env) for c in n.children)) + ")"
    if isinstance(n, Not):
        return f"not({_ekey(n.child, env)})"
    if isinstance(n, TrueLit):
        return "true"
    if isinstance(n, Quantified):
        sub = dict(env)
        for b in n.bindings:
            sub.pop(b.var, None)
        for v in _lit_vars(n.joins):
            sub.pop(v, None)
        return "quant({},[{}],{},{},{})".format(
            n.polarity,
            ",".join(sorted(_ekey(b, sub) for b in n.bindings)),
            _ekey(n.grouping, sub) if n.grouping is not None else "-",
            _ekey(n.joins, sub) if n.joins is not None else "-",
            _ekey(n.body, sub))
    if isinstance(n, Binding):
        return f"bind({_ekey(n.source, env)})"
    if isinstance(n, RelationSource):
        return f"rel({n.name})"
    if isinstance(n, ExternalSource):
        return f"ext({n.name})"
    if isinstance(n, CollectionSource):
        return f"coll({_ekey(n.collection, env)})"
    if isinstance(n, CollectionExpr):
        inner = dict(env)
        inner.pop(n.head.relation, None)
        return f"set({_skey(n.head)},{_ekey(n.body, inner)})"
    if isinstance(n, GroupingOp):
        return "gamma(" + ",".join(sorted(_ekey(k, env) for k in n.keys)) + ")"
    if isinstance(n, JoinLeaf):
        return "leaf(" + env.get(n.var, "?") + ")"
    if isinstance(n, LiteralLeaf):
        return f"lit({n.value.tag}:{n.value.val!r})"
    if isinstance(n, JoinInner):
        return "inner(" + ",".join(sorted(_ekey(c, env) for c in n.children)) + ")"
    if isinstance(n, JoinOuter):
        return f"outer({n.kind},{_ekey(n.left, env)},{_ekey(n.right, env)})"
    if isinstance(n, (Constant, HeadSpec)):
        return _skey(n)
    if isinstance(n, Arith):
        return f"arith({n.op},{_ekey(n.left, env)},{_ekey(n.right, env)})"
    if isinstance(n, Aggregate):
        return f"agg({n.fn},{_ekey(n.arg, env)})"
    raise TypeError(f"no pre-rename key for {type(n).__name__}")


# ------------------------------------------------------------------
# Canonicalization
# ------------------------------------------------------------------

class _Canon:
    """One canonicalization walk; owns the v1, v2, ... counter."""

    def __init__(self):
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def collection(self, ce: CollectionExpr, env: dict) -> CollectionExpr:
        inner_env = dict(env)
        # The head name shadows any outer binding spelled the same way.
        inner_env.pop(ce.head.relation, None)
        body = self.quantified(ce.body, inner_env)
        return CollectionExpr(HeadSpec(ce.head.relation, list(ce.head.attributes)),
                              body)

    def quantified(self, q: Quantified, env: dict) -> Quantified:
        order = sorted(range(len(q.bindings)),
                       key=lambda i: (self._binding_key(q.bindings[i], env), i))
        env = dict(env)
        for i in order:
            env[q.bindings[i].var] = self.fresh()
        bindings = [Binding(env[q.bindings[i].var],
                            self._source(q.bindings[i].source, env))
                    for i in order]
        joins = self._jointree(q.joins, env)
        grouping = None
        if q.grouping is not None:
            keys = [self._term(k, env) for k in q.grouping.keys]
            grouping = GroupingOp(sorted(keys, key=_skey))
        body = self.formula(q.body, env)
        return Quantified(q.polarity, bindings, grouping, joins, body)

    def _binding_key(self, b: Binding, env: dict):
        s = b.source
        if isinstance(s, RelationSource):
            return (0, s.name, "")
        if isinstance(s, ExternalSource):
            return (1, s.name, "")
        return (2, s.collection.head.relation, _ekey(s.collection, env))

    def _source(self, s, env):
        if isinstance(s, RelationSource):
            return RelationSource(s.name)
        if isinstance(s, ExternalSource):
            return ExternalSource(s.name)
        return CollectionSource(self.collection(s.collection, env))

    # --- join trees ---

    def _jointree(self, node, env):
        if node is None:
            return None
        node = _flatten_join(node)
        node = _order_join(node, env)
        return self._build_join(node, env)

    def _build_join(self, n, env):
        if isinstance(n, JoinLeaf):
            return JoinLeaf(env.get(n.var, n.var))
        if isinstance(n, LiteralLeaf):
            env[n.var] = self.fresh()
            return LiteralLeaf(n.value, env[n.var])
        if isinstance(n, JoinInner):
            return JoinInner([self._build_join(c, env) for c in n.children])
        return JoinOuter(n.kind, self._build_join(n.left, env),
                         self._build_join(n.right, env))

    # --- formulas and terms ---

    def formula(self, f, env):
        if isinstance(f, (And, Or)):
            cls = And if isinstance(f, And) else Or
            flat = _flat_children(f, cls)
            # Fresh names must not depend on the incoming conjunct order, so
            # fix the order with a name-independent key before renaming (ties
            # keep source order) and hand out names in that order.  Re-sorting
            # afterwards would undo this when keys tie, so the pre-rename
            # order is also the final order.
            order = sorted(range(len(flat)),
                           key=lambda i: (_ekey(flat[i], env), i))
            return cls([self.formula(flat[i], env) for i in order])
        if isinstance(f, Not):
            return Not(self.formula(f.child, env))
        if isinstance(f, Quantified):
            return self.quantified(f, env)
        if isinstance(f, Atom):
            return Atom(self._pred(f.predicate, env))
        if isinstance(f, TrueLit):
            return TrueLit()
        raise TypeError(f"unexpected formula node {type(f).__name__}")

    def _pred(self, p, env):
        if isinstance(p, Compare):
            left = self._term(p.left, env)
            right = self._term(p.right, env)
            if p.op in _COMMUTATIVE and _skey(right) < _skey(left):
                left, right = right, left
            return Compare(p.op, left, right)
        if isinstance(p, IsNull):
            return IsNull(self._term(p.term, env), p.negated)
        raise TypeError(f"unexpected predicate node {type(p).__name__}")

    def _term(self, t, env):
        if isinstance(t, Constant):
            return Constant(t.value)
        if isinstance(t, Attr):
            return Attr(env.get(t.variable, t.variable), t.attribute)
        if isinstance(t, Arith):
            return Arith(t.op, self._term(t.left, env), self._term(t.right, env))
        if isinstance(t, Aggregate):
            return Aggregate(t.fn, self._term(t.arg, env))
        raise TypeError(f"unexpected term node {type(t).__name__}")


def _flat_children(node, cls):
    out = []
    for c in node.children:
        if isinstance(c, cls):
            out.extend(_flat_children(c, cls))
        else:
            out.append(c)
    return out


def _flatten_join(n):
    if isinstance(n, JoinInner):
        kids = []
        for c in n.children:
            c = _flatten_join(c)
            if isinstance(c, JoinInner):
                kids.extend(c.children)
            else:
                kids.append(c)
        return JoinInner(kids)
    if isinstance(n, JoinOuter):
        return JoinOuter(n.kind, _flatten_join(n.left), _flatten_join(n.right))
    return n


def _order_join(n, env):
    if isinstance(n, JoinInner):
        kids = [_order_join(c, env) for c in n.children]
        kids.sort(key=lambda c: _jkey(c, env))
        return JoinInner(kids)
    if isinstance(n, JoinOuter):
        return JoinOuter(n.kind, _order_join(n.left, env), _order_join(n.right, env))
    return n


def _jkey(n, env) -> str:
    """Ordering key for join-tree children; literal variables are not yet
    renamed at this point, so they do not participate."""
    if isinstance(n, JoinLeaf):
        return f"leaf({env.get(n.var, n.var)})"
    if isinstance(n, LiteralLeaf):
        return f"lit({n.value.tag}:{n.value.val!r})"
    if isinstance(n, JoinInner):
        return "inner(" + ",".join(_jkey(c, env) for c in n.children) + ")"
    return f"outer({n.kind},{_jkey(n.left, env)},{_jkey(n.right, env)})"


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """A pattern-class representative: canonical ALT plus its serialized key.

    Two queries have the same relational pattern exactly when their canonical
    forms compare equal.
    """

    program: Program
    key: str = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, CanonicalForm) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


def canonicalize(x) -> CanonicalForm:
    """Deterministic, idempotent pattern representative of a bound program."""
    program = _program_of(x)
    c = _Canon()
    defs = [Definition(d.name, c.collection(d.collection, {}))
            for d in program.definitions]
    if isinstance(program.main, CollectionExpr):
        main = c.collection(program.main, {})
    else:
        main = c.quantified(program.main, {})
    canon = Program(defs, main)
    key = json.dumps(program_to_dict(canon), sort_keys=True, default=str)
    return CanonicalForm(canon, key)


def pattern_equal(a, b) -> bool:
    """True when the two programs realize the same relational pattern."""
    return canonicalize(a) == canonicalize(b)


def pattern_diff(a, b):
    """None when pattern-equal; otherwise a one-line description of the first
    structural difference between the canonical forms."""
    da = program_to_dict(canonicalize(a).program)
    db = program_to_dict(canonicalize(b).program)
    return _first_diff(da, db, "$")


def _first_diff(a, b, path):
    if a == b:
        return None
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a:
                return f"{path}.{k}: only on the right"
            if k not in b:
                return f"{path}.{k}: only on the left"
            d = _first_diff(a[k], b[k], f"{path}.{k}")
            if d is not None:
                return d
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return f"{path}: {len(a)} vs {len(b)} elements"
        for i, (x, y) in enumerate(zip(a, b)):
            d = _first_diff(x, y, f"{path}[{i}]")
            if d is not None:
                return d
        return None
    return f"{path}: {a!r} vs {b!r}"


# ------------------------------------------------------------------
# FIO / FOI classification
# ------------------------------------------------------------------

def classify_aggregation(x):
    """Label every grouping scope FIO ("from the inside out") or FOI ("from
    the outside in").

    A grouping scope is FOI when it is the top scope of a derived collection
    that is (a) bound as a range in an outer scope, (b) correlated — its body
    compares one of its own attributes with an attribute of an outer binding —
    and (c) consumed, i.e. the binding's output is read in the outer scope.
    Every other grouping scope, including plain in-scope grouping and
    uncorrelated derived collections, is FIO.

    Returns [(scope id, label)] in preorder; scope ids are paths like
    "Q", "Q/x", or "Q/exists[1]".
    """
    program = _program_of(x)
    out = []
    for d in program.definitions:
        _classify_quantified(d.collection.body, d.name, None, set(), out)
    main = program.main
    if isinstance(main, CollectionExpr):
        _classify_quantified(main.body, main.head.relation, None, set(), out)
    else:
        _classify_quantified(main, "sentence", None, set(), out)
    return out


def _classify_quantified(q, path, ctx, declared, out):
    local = set(declared)
    local.update(b.var for b in q.bindings)
    local.update(_lit_vars(q.joins))
    if q.grouping is not None:
        foi = bool(ctx and ctx["top"] is q and ctx["correlated"] and ctx["consumed"])
        out.append((path, "FOI" if foi else "FIO"))
    for b in q.bindings:
        if isinstance(b.source, CollectionSource):
            ce = b.source.collection
            sub_ctx = {"top": ce.body,
                       "correlated": _is_correlated(ce, local),
                       "consumed": _is_consumed(q, b.var)}
            _classify_quantified(ce.body, f"{path}/{b.var}", sub_ctx, local, out)
    _walk_formula(q.body, path, local, out, [0])


def _walk_formula(f, path, declared, out, counter):
    if isinstance(f, (And, Or)):
        for c in f.children:
            _walk_formula(c, path, declared, out, counter)
    elif isinstance(f, Not):
        _walk_formula(f.child, path, declared, out, counter)
    elif isinstance(f, Quantified):
        counter[0] += 1
        _classify_quantified(f, f"{path}/exists[{counter[0]}]", None, declared, out)


def _lit_vars(joins):
    if joins is None:
        return ()
    return [n.var for n in walk(joins) if isinstance(n, LiteralLeaf)]


def _is_correlated(ce: CollectionExpr, outer_declared) -> bool:
    """True when any comparison inside ce ties one of its own rows to an
    outer row — the filter that makes the collection per-group rather than a
    standalone grouped table."""
    inner = {n.var for n in walk(ce) if isinstance(n, (Binding, JoinLeaf, LiteralLeaf))}
    outer = set(outer_declared) - inner
    for n in walk(ce):
        if isinstance(n, Compare):
            vars_ = {t.variable for t in walk(n) if isinstance(t, Attr)}
            if vars_ & inner and vars_ & outer:
                return True
    return False


def _is_consumed(q: Quantified, var: str) -> bool:
    roots = [q.body]
    if q.grouping is not None:
        roots.extend(q.grouping.keys)
    roots.extend(b.source for b in q.bindings if b.var != var)
    return any(isinstance(n, Attr) and n.variable == var
               for root in roots for n in walk(root))
