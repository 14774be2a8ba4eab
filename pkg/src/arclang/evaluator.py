"""Nested-loop evaluation of linked programs over small instances.

Environments map variables to rows (attribute -> value); a separate head
environment accumulates output attributes as assignments fire. Multiplicity
is threaded as an integer alongside every environment so bag semantics costs
nothing extra: under sets every relation access collapses counts to one and
each scope deduplicates its results.

The quantifier at the root of a collection body (or of each top-level
disjunct) is the generator: its environments decide how many rows come out.
Every quantifier nested deeper is a satisfaction test and contributes each
distinct head extension once, which is exactly the nested/flat multiplicity
split SQL exhibits between EXISTS and a plain join.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .alt import (NULL, Aggregate, And, Arith, Atom, Attr, Binding, CollectionExpr,
                  CollectionSource, Compare, Constant, ExternalSource, Formula, IsNull, JoinInner,
                  JoinLeaf, JoinOuter, LiteralLeaf, Not, Or, Program, Quantified, RelationSource,
                  TrueLit, Value, bool_value, dec_string, dec_value, int_value, text_value, walk)
from .binder import LinkedProgram, PlanStep, _flatten_and, bind, plan_access
from .conventions import BAG, SET, ConventionError, Conventions, empty_aggregate_value


class EvalError(Exception):
    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code


# ------------------------------------------------------------------
# Values
# ------------------------------------------------------------------

_NUMERIC = ("int", "dec")


def _as_fraction(v: Value) -> Fraction:
    return Fraction(v.val)


def value_compare(op: str, a: Value, b: Value) -> bool:
    """Two-valued comparison: anything against null is false, as is any
    comparison across incompatible types. Ints and decimals compare as
    numbers."""
    if a.tag == "null" or b.tag == "null":
        return False
    if a.tag in _NUMERIC and b.tag in _NUMERIC:
        x, y = _as_fraction(a), _as_fraction(b)
    elif a.tag == b.tag:
        x, y = a.val, b.val
    else:
        return False
    if op == "=":
        return x == y
    if op == "<>":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    if op == ">=":
        return x >= y
    raise ValueError(f"unknown comparison {op!r}")


def value_arith(op: str, a: Value, b: Value, conventions: Conventions) -> Value:
    if a.tag == "null" or b.tag == "null":
        return NULL
    if a.tag not in _NUMERIC or b.tag not in _NUMERIC:
        raise EvalError("E_TYPE", f"{op} needs numbers, got {a.tag} and {b.tag}")
    if op == "/":
        if b.val == 0:
            if conventions.division_by_zero == "null":
                return NULL
            raise EvalError("E_DIV_ZERO", "division by zero")
        return dec_value(_as_fraction(a) / _as_fraction(b))
    if a.tag == "int" and b.tag == "int":
        if op == "+":
            return int_value(a.val + b.val)
        if op == "-":
            return int_value(a.val - b.val)
        if op == "*":
            return int_value(a.val * b.val)
    x, y = _as_fraction(a), _as_fraction(b)
    if op == "+":
        return dec_value(x + y)
    if op == "-":
        return dec_value(x - y)
    if op == "*":
        return dec_value(x * y)
    raise ValueError(f"unknown operator {op!r}")


def value_sort_key(v: Value):
    if v.tag == "null":
        return (3, 0)
    if v.tag in _NUMERIC:
        return (0, 0, _as_fraction(v))
    if v.tag == "text":
        return (1, 0, v.val)
    return (2, 0, v.val)  # bool


def row_sort_key(tup):
    return tuple(value_sort_key(v) for v in tup)


def eval_aggregate(fn: str, values, conventions: Conventions) -> Value:
    """Aggregate a multiset of values; nulls drop out before anything else
    happens, so only the all-null or empty case consults the convention."""
    vals = [v for v in values if v.tag != "null"]
    if fn == "count":
        return int_value(len(vals))
    if fn == "countdistinct":
        return int_value(len(set(vals)))
    if not vals:
        return empty_aggregate_value(fn, conventions)
    if fn in ("sum", "avg"):
        for v in vals:
            if v.tag not in _NUMERIC:
                raise EvalError("E_TYPE", f"{fn} over non-numeric value {v.tag}")
        if fn == "sum":
            if all(v.tag == "int" for v in vals):
                return int_value(sum(v.val for v in vals))
            return dec_value(sum((_as_fraction(v) for v in vals), Fraction(0)))
        total = sum((_as_fraction(v) for v in vals), Fraction(0))
        return dec_value(total / len(vals))
    if fn in ("min", "max"):
        tags = {("num" if v.tag in _NUMERIC else v.tag) for v in vals}
        if len(tags) > 1:
            raise EvalError("E_TYPE", f"{fn} over mixed types {sorted(tags)}")
        op = "<" if fn == "min" else ">"
        best = vals[0]
        for v in vals[1:]:
            if value_compare(op, v, best):
                best = v
        return best
    raise ValueError(f"unknown aggregate {fn!r}")


# ------------------------------------------------------------------
# Relations and databases
# ------------------------------------------------------------------


@dataclass
class Relation:
    name: str
    schema: tuple
    rows: Counter = field(default_factory=Counter)

    @staticmethod
    def from_rows(name, schema, rows):
        r = Relation(name, tuple(schema))
        for tup in rows:
            r.add(tuple(tup))
        return r

    def add(self, tup, count=1):
        if len(tup) != len(self.schema):
            raise EvalError("E_SCHEMA", f"{self.name}: row arity {len(tup)} vs "
                                        f"schema arity {len(self.schema)}")
        self.rows[tuple(tup)] += count

    def iter_rows(self, dedup: bool):
        for tup, count in self.rows.items():
            if count > 0:
                yield tup, (1 if dedup else count)

    def distinct(self) -> "Relation":
        r = Relation(self.name, self.schema)
        for tup in self.rows:
            r.rows[tup] = 1
        return r

    def sorted_items(self):
        return sorted(self.rows.items(), key=lambda kv: row_sort_key(kv[0]))

    def total_rows(self):
        return sum(self.rows.values())

    def to_json_obj(self):
        rows = []
        for tup, count in self.sorted_items():
            for _ in range(count):
                rows.append([_value_to_db_json(v) for v in tup])
        return {"schema": list(self.schema), "rows": rows}

    @staticmethod
    def from_json_obj(name, obj):
        if not isinstance(obj, dict) or set(obj) - {"schema", "rows"}:
            raise EvalError("E_SCHEMA", f"{name}: expected schema and rows")
        schema = obj.get("schema")
        rows = obj.get("rows")
        if not isinstance(schema, list) or not all(isinstance(a, str) for a in schema):
            raise EvalError("E_SCHEMA", f"{name}: schema must be a list of attribute names")
        if not isinstance(rows, list):
            raise EvalError("E_SCHEMA", f"{name}: rows must be a list")
        rel = Relation(name, tuple(schema))
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != len(schema):
                raise EvalError("E_SCHEMA", f"{name}: row {i} does not fit the schema")
            rel.add(tuple(_value_from_db_json(x, f"{name} row {i}") for x in row))
        return rel


def _value_to_db_json(v: Value):
    if v.tag == "int":
        return v.val
    if v.tag == "dec":
        return {"dec": dec_string(v.val)}
    if v.tag == "text":
        return v.val
    if v.tag == "bool":
        return v.val
    return None


def _value_from_db_json(x, where):
    if x is None:
        return NULL
    if isinstance(x, bool):
        return bool_value(x)
    if isinstance(x, int):
        return int_value(x)
    if isinstance(x, Fraction):
        return dec_value(x)
    if isinstance(x, float):
        # Only reachable when a dict is built in Python; JSON text goes
        # through parse_float and arrives exact.
        return dec_value(Fraction(str(x)))
    if isinstance(x, str):
        return text_value(x)
    if isinstance(x, dict):
        from .alt import value_from_json
        try:
            return value_from_json(x, where)
        except Exception as e:
            raise EvalError("E_SCHEMA", f"{where}: {e}")
    raise EvalError("E_SCHEMA", f"{where}: unsupported value {x!r}")


@dataclass
class Database:
    relations: dict = field(default_factory=dict)

    def get(self, name) -> Relation:
        if name not in self.relations:
            raise EvalError("E_SCHEMA", f"relation {name} is not in the database")
        return self.relations[name]

    @staticmethod
    def from_json(text: str) -> "Database":
        data = json.loads(text, parse_float=Fraction)
        return Database.from_obj(data)

    @staticmethod
    def from_obj(data) -> "Database":
        if not isinstance(data, dict) or set(data) - {"relations"}:
            raise EvalError("E_SCHEMA", "database JSON needs a single relations object")
        rels = data.get("relations")
        if not isinstance(rels, dict):
            raise EvalError("E_SCHEMA", "relations must be an object")
        db = Database()
        for name, obj in rels.items():
            db.relations[name] = Relation.from_json_obj(name, obj)
        return db

    def to_json(self) -> str:
        obj = {"relations": {name: rel.to_json_obj()
                             for name, rel in sorted(self.relations.items())}}
        return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def relation_to_json(rel: Relation) -> str:
    obj = {"name": rel.name}
    obj.update(rel.to_json_obj())
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# ------------------------------------------------------------------
# External relations
# ------------------------------------------------------------------

_ARITH_SEMANTICS = {"minus": "-", "add": "+", "mul": "*"}


def external_rows(spec, pattern, bound, conventions):
    """Rows of a computed relation reachable under one access pattern. Null
    operands produce no rows: the relation is a graph over values, and null
    is not a value in it."""
    if spec.semantics in _ARITH_SEMANTICS:
        a1, a2, a3 = spec.attributes
        x, y = bound[a1], bound[a2]
        if x.tag == "null" or y.tag == "null":
            return []
        out = value_arith(_ARITH_SEMANTICS[spec.semantics], x, y, conventions)
        if pattern[2] == "f":
            return [{a1: x, a2: y, a3: out}]
        z = bound[a3]
        return [{a1: x, a2: y, a3: z}] if value_compare("=", out, z) else []
    if spec.semantics in ("cmp_gt", "cmp_lt"):
        a1, a2 = spec.attributes
        x, y = bound[a1], bound[a2]
        op = ">" if spec.semantics == "cmp_gt" else "<"
        return [{a1: x, a2: y}] if value_compare(op, x, y) else []
    if spec.semantics == "like":
        a1, a2 = spec.attributes
        x, y = bound[a1], bound[a2]
        if x.tag != "text" or y.tag != "text":
            return []
        regex = "".join(".*" if ch == "%" else "." if ch == "_" else re.escape(ch)
                        for ch in y.val)
        return [{a1: x, a2: y}] if re.fullmatch(regex, x.val) else []
    raise EvalError("E_TYPE", f"external semantics {spec.semantics!r} not implemented")


# ------------------------------------------------------------------
# The evaluator proper
# ------------------------------------------------------------------


class _Evaluator:
    def __init__(self, lp: LinkedProgram, db: Database, conventions: Conventions, plan):
        self.lp = lp
        self.db = db
        self.conv = conventions
        self.plan = plan
        self.computed = {}  # intensional name -> Relation
        self.overrides = {}  # fixpoint-in-progress substitutions
        self.dedup = conventions.collection_semantics == SET
        self.step_by_binding = {}
        for steps in plan.steps.values():
            for st in steps:
                self.step_by_binding[st.binding.uid] = st

    # -- relation access --

    def relation(self, name) -> Relation:
        if name in self.overrides:
            return self.overrides[name]
        if name in self.computed:
            return self.computed[name]
        return self.db.get(name)

    def binding_rows(self, binding: Binding, env, henv):
        src = binding.source
        if isinstance(src, RelationSource):
            rel = self.relation(src.name)
            for tup, count in rel.iter_rows(self.dedup):
                yield dict(zip(rel.schema, tup)), count
            return
        if isinstance(src, CollectionSource):
            rel = self.eval_collection(src.collection, env)
            for tup, count in rel.iter_rows(False):
                yield dict(zip(rel.schema, tup)), count
            return
        step = self.step_by_binding[binding.uid]
        spec = self.lp.registry[src.name]
        bound = {attr: self.eval_term(term, env, henv) for attr, term in step.bound_terms}
        for row in external_rows(spec, step.pattern, bound, self.conv):
            yield row, 1

    def var_schema(self, scope, var):
        for b in scope.bindings:
            if b.var == var:
                src = b.source
                if isinstance(src, RelationSource):
                    return self.relation(src.name).schema
                if isinstance(src, CollectionSource):
                    return tuple(src.collection.head.attributes)
                return self.lp.registry[src.name].attributes
        return ("val",)  # literal leaf

    # -- terms and predicates --

    def eval_term(self, t, env, henv, group=None) -> Value:
        if isinstance(t, Constant):
            return t.value
        if isinstance(t, Attr):
            target = self.lp.links[t.uid]
            if isinstance(target, (Binding, LiteralLeaf)):
                row = env.get(t.variable)
                if row is None:
                    raise EvalError("E_SCHEMA", f"{t.variable} is not bound here")
                if t.attribute not in row:
                    raise EvalError("E_SCHEMA",
                                    f"{t.variable} has no attribute {t.attribute}; "
                                    f"its schema is {sorted(row)}")
                return row[t.attribute]
            if t.attribute not in henv:
                raise EvalError("E_HEAD_READ",
                                f"{t.variable}.{t.attribute} read before any assignment "
                                f"gave it a value")
            return henv[t.attribute]
        if isinstance(t, Arith):
            return value_arith(t.op, self.eval_term(t.left, env, henv, group),
                               self.eval_term(t.right, env, henv, group), self.conv)
        if isinstance(t, Aggregate):
            if group is None:
                raise EvalError("E_SCHEMA", "aggregate outside a grouping context")
            values = []
            for genv, count in group:
                v = self.eval_term(t.arg, genv, henv)
                values.extend([v] * count)
            return eval_aggregate(t.fn, values, self.conv)
        raise TypeError(t)

    def eval_predicate(self, p, env, henv, group=None) -> bool:
        if isinstance(p, Compare):
            return value_compare(p.op, self.eval_term(p.left, env, henv, group),
                                 self.eval_term(p.right, env, henv, group))
        v = self.eval_term(p.term, env, henv, group)
        return (v.tag != "null") if p.negated else (v.tag == "null")

    # -- formula machinery --

    def eval_collection(self, coll: CollectionExpr, env) -> Relation:
        head = coll.head
        rel = Relation(head.relation, tuple(head.attributes))
        for henv, mult in self.gen_body(coll.body, env, {}, 1):
            tup = []
            for attr in head.attributes:
                if attr not in henv:
                    raise EvalError("E_HEAD_READ",
                                    f"head attribute {head.relation}.{attr} left unassigned")
                tup.append(henv[attr])
            rel.add(tuple(tup), mult)
        return rel.distinct() if self.dedup else rel

    def gen_body(self, f: Formula, env, henv, mult):
        """Generator position: the root of a collection body and each
        disjunct under it."""
        if isinstance(f, Quantified) and f.polarity == "exists":
            yield from self.eval_scope(f, env, henv, mult)
            return
        if isinstance(f, Or):
            for c in f.children:
                yield from self.gen_body(c, env, henv, mult)
            return
        for h in self.process_conjuncts(_flatten_and(f), env, [henv]):
            yield h, mult

    def process_conjuncts(self, conjuncts, env, henvs, group=None):
        """Run one environment's worth of tests and assignments, returning
        the surviving head environments. Assignments fire first so later
        comparisons can read what they wrote."""
        ordered = ([c for c in conjuncts if self._is_assignment(c)]
                   + [c for c in conjuncts if not self._is_assignment(c)])
        for conj in ordered:
            henvs = self._apply(conj, env, henvs, group)
            if not henvs:
                break
        return henvs

    def _is_assignment(self, conj):
        return isinstance(conj, Atom) and conj.predicate.uid in self.lp.assignment_target

    def _apply(self, conj, env, henvs, group):
        if isinstance(conj, TrueLit):
            return henvs
        if isinstance(conj, Atom):
            p = conj.predicate
            target = self.lp.assignment_target.get(p.uid)
            if target is not None:
                _, attr = target
                source = p.right if (isinstance(p.left, Attr)
                                     and self.lp.links.get(p.left.uid) is target[0]
                                     and p.left.attribute == attr) else p.left
                out = []
                for h in henvs:
                    val = self.eval_term(source, env, h, group)
                    if attr in h:
                        if value_compare("=", h[attr], val):
                            out.append(h)
                    else:
                        h2 = dict(h)
                        h2[attr] = val
                        out.append(h2)
                return out
            return [h for h in henvs if self.eval_predicate(p, env, h, group)]
        if isinstance(conj, And):
            return self.process_conjuncts(_flatten_and(conj), env, henvs, group)
        if isinstance(conj, Or):
            out, seen = [], set()
            for h in henvs:
                for child in conj.children:
                    for h2 in self._apply(child, env, [h], group):
                        key = frozenset(h2.items())
                        if key not in seen:
                            seen.add(key)
                            out.append(h2)
            return out
        if isinstance(conj, Not):
            return [h for h in henvs if not self._apply(conj.child, env, [h], group)]
        if isinstance(conj, Quantified):
            if conj.polarity == "notExists":
                return [h for h in henvs if not self._scope_test(conj, env, h)]
            out, seen = [], set()
            for h in henvs:
                for h2 in self._scope_test(conj, env, h):
                    key = frozenset(h2.items())
                    if key not in seen:
                        seen.add(key)
                        out.append(h2)
            return out
        raise TypeError(conj)

    def _scope_test(self, q: Quantified, env, henv):
        """Distinct head extensions a nested quantifier can produce; a bare
        satisfaction test returns the unchanged head environment once."""
        out, seen = [], set()
        for h, _ in self.eval_scope(q, env, henv, 1):
            key = frozenset(h.items())
            if key not in seen:
                seen.add(key)
                out.append(h)
        return out

    # -- scope enumeration --

    def eval_scope(self, q: Quantified, env, henv, mult):
        scope = self.lp.scope_by_node[q.uid]
        conjuncts = [c for c in _flatten_and(q.body) if not self._consumed_as_on(c)]
        if q.grouping is None:
            for senv, m in self.enumerate_envs(q, scope, env, henv):
                full = {**env, **senv}
                for h in self.process_conjuncts(conjuncts, full, [henv]):
                    yield h, mult * m
            return

        pre, post = [], []
        for c in conjuncts:
            if self._post_grouping(c, scope):
                post.append(c)
            else:
                pre.append(c)
        groups, order = {}, []
        for senv, m in self.enumerate_envs(q, scope, env, henv):
            full = {**env, **senv}
            if pre and not self.process_conjuncts(pre, full, [henv]):
                continue
            key = tuple(self.eval_term(k, full, henv) for k in q.grouping.keys)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((full, m))
        if not q.grouping.keys and not groups:
            # Grouping on nothing always produces exactly one group, even
            # over an empty join; grouping on keys produces none.
            groups[()] = []
            order.append(())
        for key in order:
            members = groups[key]
            rep = members[0][0] if members else dict(env)
            for h in self.process_conjuncts(post, rep, [henv], group=members):
                yield h, mult

    def _post_grouping(self, conj, scope) -> bool:
        for node in walk(conj):
            if isinstance(node, Aggregate) and self.lp.node_scope.get(node.uid) is scope:
                return True
            if isinstance(node, Attr):
                from .alt import HeadSpec
                if isinstance(self.lp.links.get(node.uid), HeadSpec):
                    return True
        return False

    def enumerate_envs(self, q: Quantified, scope, env, henv):
        if q.joins is not None:
            yield from self.eval_jointree(q.joins, scope, env, henv, {}, 1)
            return
        steps = self.plan.steps.get(q.uid, [])

        def rec(i, senv, mult):
            if i == len(steps):
                yield dict(senv), mult
                return
            b = steps[i].binding
            for row, m in self.binding_rows(b, {**env, **senv}, henv):
                senv[b.var] = row
                yield from rec(i + 1, senv, mult * m)
                del senv[b.var]

        yield from rec(0, {}, 1)

    def eval_jointree(self, node, scope, env, henv, senv, mult):
        """Conditions whose references span both operands of an outer join
        were placed on that node by the binder and behave as ON clauses;
        everything else stays in the body as a post-join filter."""
        if isinstance(node, JoinLeaf):
            b = next(bd for bd in scope.bindings if bd.var == node.var)
            for row, m in self.binding_rows(b, {**env, **senv}, henv):
                yield {**senv, node.var: row}, mult * m
            return
        if isinstance(node, LiteralLeaf):
            yield {**senv, node.var: {"val": node.value}}, mult
            return
        if isinstance(node, JoinInner):
            def rec(i, acc, m):
                if i == len(node.children):
                    yield dict(acc), m
                    return
                for ext, m2 in self.eval_jointree(node.children[i], scope, env, henv,
                                                  acc, 1):
                    yield from rec(i + 1, ext, m * m2)

            yield from rec(0, senv, mult)
            return
        conds = self._on_conditions(node)
        left_rows = list(self.eval_jointree(node.left, scope, env, henv, senv, 1))
        right_rows = list(self.eval_jointree(node.right, scope, env, henv, senv, 1))
        right_vars, left_vars = set(), set()
        _jointree_vars(node.right, right_vars)
        _jointree_vars(node.left, left_vars)
        null_right = {v: {a: NULL for a in self.var_schema(scope, v)} for v in right_vars}
        null_left = {v: {a: NULL for a in self.var_schema(scope, v)} for v in left_vars}
        matched_right = set()
        for lext, lm in left_rows:
            hit = False
            for j, (rext, rm) in enumerate(right_rows):
                merged = {**lext, **{v: rext[v] for v in right_vars}}
                if self._conds_pass(conds, {**env, **merged}, henv):
                    hit = True
                    matched_right.add(j)
                    yield merged, mult * lm * rm
            if not hit:
                yield {**lext, **null_right}, mult * lm
        if node.kind == "full":
            for j, (rext, rm) in enumerate(right_rows):
                if j not in matched_right:
                    yield {**rext, **null_left}, mult * rm

    def _consumed_as_on(self, conj) -> bool:
        if not isinstance(conj, Atom):
            return False
        target = self.lp.join_condition.get(conj.predicate.uid)
        return isinstance(target, JoinOuter)

    def _on_conditions(self, node):
        return [self._pred(uid) for uid, target in self.lp.join_condition.items()
                if target is node]

    def _pred(self, uid):
        if not hasattr(self, "_pred_map"):
            self._pred_map = {}
            for node in walk(self.lp.program):
                if isinstance(node, (Compare, IsNull)):
                    self._pred_map[node.uid] = node
        return self._pred_map[uid]

    def _conds_pass(self, conds, env, henv):
        return all(self.eval_predicate(p, env, henv) for p in conds)


def _jointree_vars(node, out: set):
    if isinstance(node, (JoinLeaf, LiteralLeaf)):
        out.add(node.var)
    elif isinstance(node, JoinInner):
        for c in node.children:
            _jointree_vars(c, out)
    elif isinstance(node, JoinOuter):
        _jointree_vars(node.left, out)
        _jointree_vars(node.right, out)


# ------------------------------------------------------------------
# Definitions and fixpoints
# ------------------------------------------------------------------


def _reachable_defs(lp: LinkedProgram):
    wanted, stack = set(), []

    def scan(node):
        for sub in walk(node):
            if isinstance(sub, RelationSource) and sub.name in lp.defs_by_name:
                if sub.name not in wanted:
                    wanted.add(sub.name)
                    stack.append(sub.name)

    scan(lp.program.main)
    while stack:
        scan(lp.defs_by_name[stack.pop()].collection)
    return [d.name for d in lp.program.definitions if d.name in wanted]


def _sccs(lp: LinkedProgram, names):
    deps = {}
    for n in names:
        deps[n] = {s.name for s in walk(lp.defs_by_name[n].collection)
                   if isinstance(s, RelationSource) and s.name in lp.defs_by_name}
    reach = {n: set(deps[n]) for n in names}
    changed = True
    while changed:
        changed = False
        for n in names:
            extra = set().union(*(reach.get(m, set()) for m in reach[n])) if reach[n] else set()
            if not extra <= reach[n]:
                reach[n] |= extra
                changed = True
    seen, sccs = set(), []
    for n in names:  # names are in definition order
        if n in seen:
            continue
        comp = {n} | {m for m in names if m in reach[n] and n in reach[m]}
        seen |= comp
        sccs.append(sorted(comp, key=names.index))
    # Order components so dependencies come first.
    sccs.sort(key=lambda comp: max(names.index(n) for n in comp))
    ordered, placed = [], set()
    remaining = list(sccs)
    while remaining:
        for comp in list(remaining):
            outside = set().union(*(deps[n] for n in comp)) - set(comp)
            if outside <= placed:
                ordered.append(comp)
                placed |= set(comp)
                remaining.remove(comp)
                break
        else:
            ordered.extend(remaining)  # defensive; cycles across comps cannot happen
            break
    return ordered


class FixpointEngine:
    def __init__(self, ev: _Evaluator):
        self.ev = ev

    def run(self, comp):
        ev, lp = self.ev, self.ev.lp
        if ev.conv.collection_semantics == BAG:
            raise EvalError("E_BAG_RECURSION",
                            "recursive definitions need set semantics; duplicates have "
                            "no least fixpoint")
        cap = ev.conv.fixpoint_iteration_cap
        full = {n: Relation(n, tuple(lp.defs_by_name[n].collection.head.attributes))
                for n in comp}
        linear = all(self._linear(n, comp) for n in comp)
        for n in comp:
            ev.overrides[n] = full[n]
        try:
            delta = {}
            for n in comp:
                rel = ev.eval_collection(lp.defs_by_name[n].collection, {})
                delta[n] = set(rel.rows)
                full[n].rows.update({t: 1 for t in delta[n]})
            rounds = 1
            while any(delta.values()):
                if rounds >= cap:
                    raise EvalError("E_FIXPOINT_CAP",
                                    f"fixpoint did not settle within {cap} iterations")
                new_delta = {n: set() for n in comp}
                if linear:
                    for n in comp:
                        derived = self._round_linear(n, comp, full, delta)
                        new_delta[n] = derived - set(full[n].rows)
                else:
                    for n in comp:
                        rel = ev.eval_collection(lp.defs_by_name[n].collection, {})
                        new_delta[n] = set(rel.rows) - set(full[n].rows)
                for n in comp:
                    full[n].rows.update({t: 1 for t in new_delta[n]})
                delta = new_delta
                rounds += 1
        finally:
            for n in comp:
                ev.overrides.pop(n, None)
        for n in comp:
            ev.computed[n] = full[n]

    def _linear(self, name, comp):
        """One recursive occurrence per disjunct keeps the delta rewrite a
        plain name substitution; anything denser falls back to re-running
        the whole body each round."""
        body = self.ev.lp.defs_by_name[name].collection.body
        branches = body.children if isinstance(body, Or) else [body]
        for br in branches:
            occ = sum(1 for s in walk(br)
                      if isinstance(s, RelationSource) and s.name in comp)
            if occ > 1:
                return False
        return True

    def _round_linear(self, name, comp, full, delta):
        ev, lp = self.ev, self.ev.lp
        coll = lp.defs_by_name[name].collection
        body = coll.body
        branches = body.children if isinstance(body, Or) else [body]
        derived = set()
        for br in branches:
            occ_names = {s.name for s in walk(br)
                         if isinstance(s, RelationSource) and s.name in comp}
            for m in occ_names:
                d = Relation(m, full[m].schema)
                d.rows.update({t: 1 for t in delta[m]})
                saved = ev.overrides[m]
                ev.overrides[m] = d
                try:
                    for henv, _ in ev.gen_body(br, {}, {}, 1):
                        derived.add(tuple(henv[a] for a in coll.head.attributes))
                finally:
                    ev.overrides[m] = saved
        return derived


# ------------------------------------------------------------------
# Entry points
# ------------------------------------------------------------------


def _prepare(lp: LinkedProgram, db: Database, conventions: Conventions) -> _Evaluator:
    plan = plan_access(lp)
    if isinstance(plan, list):
        raise EvalError(plan[0].code, plan[0].message)
    ev = _Evaluator(lp, db, conventions, plan)
    names = _reachable_defs(lp)
    for comp in _sccs(lp, names):
        recursive = len(comp) > 1 or comp[0] in lp.recursive_defs
        if recursive:
            FixpointEngine(ev).run(comp)
        else:
            name = comp[0]
            ev.computed[name] = ev.eval_collection(lp.defs_by_name[name].collection, {})
    return ev


def eval_query(lp: LinkedProgram, db: Database, conventions: Conventions) -> Relation:
    if not isinstance(lp.program.main, CollectionExpr):
        raise EvalError("E_SCHEMA", "program is a sentence; use eval_sentence")
    ev = _prepare(lp, db, conventions)
    return ev.eval_collection(lp.program.main, {})


def eval_sentence(lp: LinkedProgram, db: Database, conventions: Conventions) -> bool:
    main = lp.program.main
    if isinstance(main, CollectionExpr):
        raise EvalError("E_SCHEMA", "program is a collection; use eval_query")
    ev = _prepare(lp, db, conventions)
    return bool(ev.process_conjuncts([main], {}, [{}]))


def evaluate(lp: LinkedProgram, db: Database, conventions: Conventions):
    if isinstance(lp.program.main, CollectionExpr):
        return eval_query(lp, db, conventions)
    return eval_sentence(lp, db, conventions)
