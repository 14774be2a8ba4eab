"""Name resolution and legality checks over parsed programs.

Binding walks the tree once, building a scope tree (collections and
quantifiers), linking every attribute reference to the binding or head it
names, and classifying predicates. The separate check functions validate
grouping legality, head-assignment completeness, recursion stratification,
and external access patterns; they assume a successfully bound program.

An equality with a bare head attribute on one side doubles as the definition
of that attribute's output value. When several such equalities target the
same attribute in one scope, the syntactically first is the assignment and
the rest demote to comparisons; candidates spread across different scopes of
one branch are ambiguous and rejected.

A definition whose head attributes are all read but never assigned describes
a membership test rather than an enumerable set; it is marked `abstract` and
skips head-completeness checks. Abstract names bind and render fine, but
evaluation refuses them until `expand_abstract` splices their bodies into
the use sites.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .alt import (Aggregate, And, Arith, Atom, Attr, Binding, CollectionExpr, CollectionSource,
                  Compare, Constant, Definition, ExternalSource, Formula, GroupingOp, HeadSpec,
                  IsNull, JoinInner, JoinLeaf, JoinOuter, LiteralLeaf, Not, Or, Program, Quantified,
                  RelationSource, SourceSpan, TrueLit, children, walk)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    span: Optional[SourceSpan]
    message: str

    def __str__(self):
        where = ""
        if self.span is not None:
            where = f" at line {self.span.line + 1}, column {self.span.column + 1}"
        return f"{self.severity} {self.code}{where}: {self.message}"


@dataclass(frozen=True)
class ExternalSpec:
    """A computed relation: attribute names, admissible access patterns
    (strings over b/f aligned with the attributes), and the key of the
    built-in that computes it."""

    name: str
    attributes: tuple
    patterns: tuple
    semantics: str


def default_registry() -> dict:
    specs = [
        ExternalSpec("Minus", ("left", "right", "out"), ("bbf", "bbb"), "minus"),
        ExternalSpec("Add", ("left", "right", "out"), ("bbf", "bbb"), "add"),
        ExternalSpec("Mul", ("left", "right", "out"), ("bbf", "bbb"), "mul"),
        ExternalSpec("*", ("left", "right", "out"), ("bbf", "bbb"), "mul"),
        ExternalSpec("Bigger", ("left", "right"), ("bb",), "cmp_gt"),
        ExternalSpec("Smaller", ("left", "right"), ("bb",), "cmp_lt"),
        ExternalSpec("Like", ("string", "pattern"), ("bb",), "like"),
    ]
    return {s.name: s for s in specs}


KNOWN_SEMANTICS = ("minus", "add", "mul", "cmp_gt", "cmp_lt", "like")


def load_registry(source) -> dict:
    """Registry from a JSON file path, JSON text, or already-parsed list.
    Entries: {"name":..., "attributes": [...], "patterns": ["bbf"],
    "semantics": "minus"}. Unknown names fall back on nothing: the default
    registry is replaced, not extended."""
    if isinstance(source, str):
        if source.lstrip().startswith("["):
            data = json.loads(source)
        else:
            with open(source, "r", encoding="utf-8") as fh:
                data = json.load(fh)
    else:
        data = source
    if not isinstance(data, list):
        raise ValueError("registry JSON must be a list of external specs")
    out = {}
    for i, e in enumerate(data):
        if not isinstance(e, dict) or set(e) - {"name", "attributes", "patterns", "semantics"}:
            raise ValueError(f"registry entry {i}: unknown or missing fields")
        name, attrs = e.get("name"), e.get("attributes")
        pats, sem = e.get("patterns"), e.get("semantics")
        if not isinstance(name, str) or not isinstance(attrs, list) or not isinstance(pats, list):
            raise ValueError(f"registry entry {i}: bad field types")
        if sem not in KNOWN_SEMANTICS:
            raise ValueError(f"registry entry {i}: unknown semantics {sem!r}")
        for p in pats:
            if len(p) != len(attrs) or set(p) - {"b", "f"}:
                raise ValueError(f"registry entry {i}: pattern {p!r} does not fit {attrs}")
        out[name] = ExternalSpec(name, tuple(attrs), tuple(pats), sem)
    return out


@dataclass
class Scope:
    """A region of the scope tree: the collection itself or one quantifier."""

    kind: str  # "collection" | "quantifier"
    node: Union[CollectionExpr, Quantified]
    parent: Optional["Scope"]
    depth: int
    children: list = field(default_factory=list)
    bindings: list = field(default_factory=list)  # Binding nodes, in order
    literal_vars: dict = field(default_factory=dict)  # var -> LiteralLeaf

    @property
    def uid(self):
        return self.node.uid

    def nearest_collection(self) -> Optional["Scope"]:
        s = self
        while s is not None and s.kind != "collection":
            s = s.parent
        return s

    def var_names(self):
        return [b.var for b in self.bindings] + list(self.literal_vars)


@dataclass
class LinkedProgram:
    program: Program
    registry: dict
    scopes: list  # preorder
    scope_by_node: dict  # uid of Quantified/CollectionExpr -> Scope
    node_scope: dict  # uid of any body node -> enclosing Scope
    links: dict  # Attr uid -> Binding | HeadSpec
    predicate_class: dict  # predicate uid -> class string
    assignment_target: dict  # predicate uid -> (HeadSpec, attr name)
    relation_kinds: dict  # name -> base | intensional | external | abstract
    recursive_defs: set
    join_condition: dict  # predicate uid -> JoinTree node
    pred_order: dict  # predicate uid -> syntactic index
    defs_by_name: dict  # name -> Definition
    diagnostics: list  # warnings surfaced by bind itself

    def scope_of(self, node) -> Scope:
        return self.node_scope[node.uid]


_ERR = "error"
_WARN = "warning"


def _flatten_and(f: Formula) -> list:
    if isinstance(f, And):
        out = []
        for c in f.children:
            out.extend(_flatten_and(c))
        return out
    return [f]


def _is_aggregate_bearing(node) -> bool:
    return any(isinstance(n, Aggregate) for n in walk(node))


class _Binder:
    def __init__(self, program: Program, registry: dict):
        self.program = program
        self.registry = registry
        self.diags = []
        self.scopes = []
        self.scope_by_node = {}
        self.node_scope = {}
        self.links = {}
        self.pred_order = {}
        self._pred_counter = itertools.count()
        self.defs_by_name = {d.name: d for d in program.definitions}
        self.relation_kinds = {}
        self.predicate_class = {}
        self.assignment_target = {}
        self.join_condition = {}
        self.recursive_defs = set()

    def error(self, code, span, message):
        self.diags.append(Diagnostic(_ERR, code, span, message))

    def warn(self, code, span, message):
        self.diags.append(Diagnostic(_WARN, code, span, message))

    # --- scope construction and resolution ---

    def run(self):
        for d in self.program.definitions:
            if d.name in self.relation_kinds:
                self.error("E_DUPLICATE_BINDING", d.span, f"relation {d.name} defined twice")
            self.relation_kinds[d.name] = "intensional"
        for d in self.program.definitions:
            self.visit_collection(d.collection, None)
        main = self.program.main
        if isinstance(main, CollectionExpr):
            self.visit_collection(main, None)
        else:
            self.visit_formula(main, self.make_scope("collection", main, None))
        self.compute_recursion()
        self.classify_predicates()
        self.assign_join_conditions()

    def make_scope(self, kind, node, parent) -> Scope:
        s = Scope(kind, node, parent, 0 if parent is None else parent.depth + 1)
        if parent is not None:
            parent.children.append(s)
        self.scopes.append(s)
        self.scope_by_node[node.uid] = s
        return s

    def visit_collection(self, coll: CollectionExpr, parent: Optional[Scope]):
        scope = self.make_scope("collection", coll, parent)
        self.node_scope[coll.head.uid] = scope
        self.visit_formula(coll.body, scope)

    def visit_formula(self, f: Formula, scope: Scope):
        self.node_scope[f.uid] = scope
        if isinstance(f, Quantified):
            q = self.make_scope("quantifier", f, scope)
            seen = set()
            for b in f.bindings:
                self.node_scope[b.uid] = q
                if b.var in seen:
                    self.error("E_DUPLICATE_BINDING", b.span,
                               f"variable {b.var} bound twice in one scope")
                seen.add(b.var)
                # The source is resolved before the variable joins the
                # scope, so a collection source sees only earlier siblings.
                self.visit_source(b.source, q)
                q.bindings.append(b)
            if f.joins is not None:
                self.visit_jointree(f.joins, q, seen)
            if f.grouping is not None:
                self.node_scope[f.grouping.uid] = q
                for k in f.grouping.keys:
                    self.resolve_attr(k, q)
            self.visit_formula(f.body, q)
            return
        if isinstance(f, (And, Or)):
            for c in f.children:
                self.visit_formula(c, scope)
            return
        if isinstance(f, Not):
            self.visit_formula(f.child, scope)
            return
        if isinstance(f, Atom):
            p = f.predicate
            self.node_scope[p.uid] = scope
            self.pred_order[p.uid] = next(self._pred_counter)
            if isinstance(p, Compare):
                self.visit_term(p.left, scope)
                self.visit_term(p.right, scope)
            else:
                self.visit_term(p.term, scope)
            return
        # TrueLit: nothing to resolve

    def visit_source(self, src, scope: Scope):
        self.node_scope[src.uid] = scope
        if isinstance(src, RelationSource):
            if src.name not in self.relation_kinds:
                self.relation_kinds[src.name] = "base"
        elif isinstance(src, ExternalSource):
            self.relation_kinds[src.name] = "external"
        elif isinstance(src, CollectionSource):
            self.visit_collection(src.collection, scope)

    def visit_jointree(self, jt, scope: Scope, binding_vars: set):
        self.node_scope[jt.uid] = scope
        covered = []

        def leaves(n):
            self.node_scope[n.uid] = scope
            if isinstance(n, JoinLeaf):
                covered.append((n.var, n))
            elif isinstance(n, LiteralLeaf):
                if n.var in binding_vars or n.var in scope.literal_vars:
                    self.error("E_DUPLICATE_BINDING", n.span,
                               f"literal leaf variable {n.var} collides with another binding")
                scope.literal_vars[n.var] = n
            elif isinstance(n, JoinInner):
                for c in n.children:
                    leaves(c)
            elif isinstance(n, JoinOuter):
                leaves(n.left)
                leaves(n.right)

        leaves(jt)
        seen_leaf = set()
        for var, node in covered:
            if var not in binding_vars:
                self.error("E_UNBOUND_VAR", node.span,
                           f"join tree leaf {var} names no binding of this scope")
            elif var in seen_leaf:
                self.error("E_JOINTREE_COVERAGE", node.span,
                           f"binding {var} appears twice in the join tree")
            seen_leaf.add(var)
        missing = binding_vars - seen_leaf
        if missing and not self.diags_with("E_UNBOUND_VAR"):
            for var in sorted(missing):
                self.error("E_JOINTREE_COVERAGE", jt.span,
                           f"binding {var} missing from the join tree")

    def diags_with(self, code):
        return [d for d in self.diags if d.code == code]

    def visit_term(self, t, scope: Scope):
        self.node_scope[t.uid] = scope
        if isinstance(t, Attr):
            self.resolve_attr(t, scope)
        elif isinstance(t, Arith):
            self.visit_term(t.left, scope)
            self.visit_term(t.right, scope)
        elif isinstance(t, Aggregate):
            self.visit_term(t.arg, scope)
        # Constant: nothing

    def resolve_attr(self, ref: Attr, scope: Scope):
        self.node_scope[ref.uid] = scope
        target = None
        s = scope
        while s is not None:
            if s.kind == "quantifier":
                for b in s.bindings:
                    if b.var == ref.variable:
                        target = b
                        break
                if target is None and ref.variable in s.literal_vars:
                    target = s.literal_vars[ref.variable]
            else:
                head = s.node.head if isinstance(s.node, CollectionExpr) else None
                if head is not None and head.relation == ref.variable:
                    target = head
            if target is not None:
                break
            s = s.parent
        if target is None:
            self.error("E_UNBOUND_VAR", ref.span,
                       f"{ref.variable}.{ref.attribute}: no binding named {ref.variable} in scope")
            return
        self.links[ref.uid] = target
        if isinstance(target, HeadSpec):
            if ref.attribute not in target.attributes:
                self.error("E_UNBOUND_VAR", ref.span,
                           f"head {target.relation} has no attribute {ref.attribute}")
            nearest = scope.nearest_collection()
            if nearest is None or nearest.node.head is not target:
                self.error("E_HEAD_IN_BODY", ref.span,
                           f"{target.relation}.{ref.attribute} reaches past the nearest "
                           f"enclosing collection; only quantifier bindings cross scopes")
        elif isinstance(target, Binding):
            src = target.source
            if isinstance(src, CollectionSource):
                if ref.attribute not in src.collection.head.attributes:
                    self.error("E_UNBOUND_VAR", ref.span,
                               f"collection {src.collection.head.relation} has no "
                               f"attribute {ref.attribute}")
            elif isinstance(src, ExternalSource):
                spec = self.registry.get(src.name)
                if spec is not None and ref.attribute not in spec.attributes:
                    self.error("E_UNBOUND_VAR", ref.span,
                               f"external {src.name} has no attribute {ref.attribute}")
        elif isinstance(target, LiteralLeaf):
            if ref.attribute != "val":
                self.error("E_UNBOUND_VAR", ref.span,
                           f"literal leaf {target.var} has only the attribute val")

    # --- recursion structure ---

    def compute_recursion(self):
        names = list(self.defs_by_name)
        deps = {n: set() for n in names}
        for n in names:
            for sub in walk(self.defs_by_name[n].collection):
                if isinstance(sub, RelationSource) and sub.name in self.defs_by_name:
                    deps[n].add(sub.name)
        # Tarjan is overkill at this scale; iterate reachability instead.
        reach = {n: set(deps[n]) for n in names}
        changed = True
        while changed:
            changed = False
            for n in names:
                extra = set()
                for m in reach[n]:
                    extra |= reach.get(m, set())
                if not extra <= reach[n]:
                    reach[n] |= extra
                    changed = True
        for n in names:
            if n in reach[n]:
                self.recursive_defs.add(n)

    # --- predicate classification ---

    def head_candidates(self, coll: CollectionExpr):
        """Equalities with a bare attribute of this collection's head on one
        side, in syntactic order. Only predicates on an all-positive
        existential spine qualify: under any negation the equality tests a
        value instead of producing one, so a doubly negated equality still
        cannot define an output."""
        out = []

        def go(f, spine):
            if isinstance(f, Atom):
                p = f.predicate
                if spine and isinstance(p, Compare) and p.op == "=":
                    for side, other in ((p.left, p.right), (p.right, p.left)):
                        if isinstance(side, Attr) and self.links.get(side.uid) is coll.head:
                            out.append((p, side.attribute, other))
                            break
                return
            if isinstance(f, Not):
                go(f.child, False)
                return
            if isinstance(f, (And, Or)):
                for c in f.children:
                    go(c, spine)
                return
            if isinstance(f, Quantified):
                # A nested collection has its own head; do not descend into
                # binding sources here.
                go(f.body, spine and f.polarity == "exists")
                return

        go(coll.body, True)
        return out

    def branch_profiles(self, coll: CollectionExpr):
        """Per disjunctive branch, the candidate predicates by attribute."""
        cand = {p.uid: (attr, p) for p, attr, _ in self.head_candidates(coll)}

        def go(f, spine):
            if isinstance(f, Atom):
                if spine and f.predicate.uid in cand:
                    attr, p = cand[f.predicate.uid]
                    return [{attr: [p]}]
                return [{}]
            if isinstance(f, Not):
                return [{}]
            if isinstance(f, And):
                profiles = [{}]
                for c in f.children:
                    merged = []
                    for left in profiles:
                        for right in go(c, spine):
                            m = {k: list(v) for k, v in left.items()}
                            for k, v in right.items():
                                m.setdefault(k, []).extend(v)
                            merged.append(m)
                    profiles = merged
                return profiles
            if isinstance(f, Or):
                out = []
                for c in f.children:
                    out.extend(go(c, spine))
                return out
            if isinstance(f, Quantified):
                if f.polarity == "exists" and spine:
                    return go(f.body, spine)
                return [{}]
            return [{}]

        return go(coll.body, True)

    def classify_predicates(self):
        designated = set()
        for coll in self._all_collections():
            for branch in self.branch_profiles(coll):
                for attr, preds in branch.items():
                    preds = sorted(preds, key=lambda p: self.pred_order[p.uid])
                    designated.add(preds[0].uid)
        for coll in self._all_collections():
            for p, attr, _ in self.head_candidates(coll):
                if p.uid in designated and p.uid not in self.assignment_target:
                    self.assignment_target[p.uid] = (coll.head, attr)
        for uid in self.pred_order:
            pred = self._pred_by_uid(uid)
            agg = _is_aggregate_bearing(pred)
            if uid in self.assignment_target:
                self.predicate_class[uid] = "aggregation+assignment" if agg else "assignment"
            else:
                self.predicate_class[uid] = "aggregation+comparison" if agg else "comparison"

    def _all_collections(self):
        for s in self.scopes:
            if s.kind == "collection" and isinstance(s.node, CollectionExpr):
                yield s.node

    def _pred_by_uid(self, uid):
        if not hasattr(self, "_pred_map"):
            self._pred_map = {}
            for node in walk(self.program):
                if isinstance(node, (Compare, IsNull)):
                    self._pred_map[node.uid] = node
        return self._pred_map[uid]

    # --- join condition placement ---

    def assign_join_conditions(self):
        for s in self.scopes:
            if s.kind != "quantifier" or s.node.joins is None:
                continue
            jt = s.node.joins
            parent = {}
            leaf_of = {}

            def index(n, par):
                parent[n.uid] = par
                if isinstance(n, (JoinLeaf, LiteralLeaf)):
                    leaf_of[n.var] = n
                elif isinstance(n, JoinInner):
                    for c in n.children:
                        index(c, n)
                elif isinstance(n, JoinOuter):
                    index(n.left, n)
                    index(n.right, n)

            index(jt, None)
            for conj in _flatten_and(s.node.body):
                if not isinstance(conj, Atom):
                    continue
                p = conj.predicate
                if self.predicate_class.get(p.uid) not in ("comparison",):
                    continue
                vars_here = set()
                for sub in walk(p):
                    if isinstance(sub, Attr):
                        tgt = self.links.get(sub.uid)
                        if isinstance(tgt, Binding) and tgt in s.bindings:
                            vars_here.add(tgt.var)
                        elif isinstance(tgt, LiteralLeaf) and tgt.var in leaf_of:
                            vars_here.add(tgt.var)
                nodes = [leaf_of[v] for v in vars_here if v in leaf_of]
                if not nodes:
                    self.join_condition[p.uid] = jt
                    continue
                paths = []
                for n in nodes:
                    path = []
                    cur = n
                    while cur is not None:
                        path.append(cur)
                        cur = parent.get(cur.uid)
                    paths.append(list(reversed(path)))
                lca = None
                for layer in zip(*paths):
                    first = layer[0]
                    if all(x is first for x in layer):
                        lca = first
                    else:
                        break
                self.join_condition[p.uid] = lca if lca is not None else jt


def bind(program: Program, registry: Optional[dict] = None):
    """Resolve and classify. Returns a LinkedProgram, or the list of error
    diagnostics when resolution fails."""
    reg = registry if registry is not None else default_registry()
    b = _Binder(program, reg)
    b.run()
    errors = [d for d in b.diags if d.severity == _ERR]
    if errors:
        return errors
    lp = LinkedProgram(
        program=program, registry=reg, scopes=b.scopes, scope_by_node=b.scope_by_node,
        node_scope=b.node_scope, links=b.links, predicate_class=b.predicate_class,
        assignment_target=b.assignment_target, relation_kinds=b.relation_kinds,
        recursive_defs=b.recursive_defs, join_condition=b.join_condition,
        pred_order=b.pred_order, defs_by_name=b.defs_by_name,
        diagnostics=[d for d in b.diags if d.severity == _WARN],
    )
    _mark_abstract(lp)
    return lp


def _mark_abstract(lp: LinkedProgram):
    """A definition whose head attributes are all read yet none assigned
    characterizes membership instead of enumerating tuples."""
    helper = _Binder(lp.program, lp.registry)  # only for candidate search
    helper.links = lp.links
    for d in lp.program.definitions:
        head = d.collection.head
        cands = helper.head_candidates(d.collection)
        if cands:
            continue
        read = set()
        for node in walk(d.collection.body):
            if isinstance(node, Attr) and lp.links.get(node.uid) is head:
                read.add(node.attribute)
        if read == set(head.attributes):
            lp.relation_kinds[d.name] = "abstract"


def is_sentence(p: Program) -> bool:
    return not isinstance(p.main, CollectionExpr)


# ------------------------------------------------------------------
# Checks
# ------------------------------------------------------------------


def check_grouping(lp: LinkedProgram) -> list:
    diags = []
    for s in lp.scopes:
        if s.kind != "quantifier":
            continue
        q = s.node
        grouped = q.grouping is not None
        if grouped and q.polarity == "notExists":
            diags.append(Diagnostic(_WARN, "W_NEGATED_GROUPING", q.span,
                                    "grouping directly under a negated scope; the combination "
                                    "is unusual and easy to misread"))
        key_set = {(k.variable, k.attribute) for k in q.grouping.keys} if grouped else set()
        for conj in _flatten_and(q.body):
            for node in walk(conj):
                if not isinstance(node, (Compare, IsNull)):
                    continue
                pred = node
                if lp.node_scope.get(pred.uid) is not s:
                    continue  # belongs to a deeper scope
                has_agg = _is_aggregate_bearing(pred)
                if has_agg and not grouped:
                    diags.append(Diagnostic(_ERR, "E_AGG_NO_GROUP", pred.span,
                                            "aggregate outside any grouping scope"))
                    continue
                if not grouped:
                    continue
                cls = lp.predicate_class.get(pred.uid)
                if has_agg:
                    bad = _nonkey_refs(lp, pred, s, key_set, skip_aggregates=True)
                elif cls == "assignment":
                    bad = _nonkey_refs(lp, pred, s, key_set, skip_aggregates=False)
                else:
                    bad = []  # aggregate-free comparisons filter before grouping
                for ref in bad:
                    diags.append(Diagnostic(_ERR, "E_NONKEY_REF_POST_GROUP", ref.span,
                                            f"{ref.variable}.{ref.attribute} is not a grouping "
                                            f"key and may not appear after grouping"))
    return diags


def _nonkey_refs(lp: LinkedProgram, pred, scope: Scope, key_set, skip_aggregates):
    """References to this scope's own bindings that are not grouping keys,
    ignoring everything under aggregate calls when asked to."""
    bad = []

    def go(t, inside_agg):
        if isinstance(t, Attr):
            tgt = lp.links.get(t.uid)
            own = (isinstance(tgt, Binding) and tgt in scope.bindings) or \
                  (isinstance(tgt, LiteralLeaf) and t.variable in scope.literal_vars)
            if own and not inside_agg and (t.variable, t.attribute) not in key_set:
                bad.append(t)
            return
        if isinstance(t, Aggregate):
            go(t.arg, inside_agg or skip_aggregates)
            return
        for c in children(t):
            go(c, inside_agg)

    for side in children(pred):
        go(side, False)
    return bad


def check_heads(lp: LinkedProgram) -> list:
    diags = []
    helper = _Binder(lp.program, lp.registry)
    helper.links = lp.links
    helper.pred_order = lp.pred_order

    def check_collection(coll: CollectionExpr, abstract_ok: bool):
        if abstract_ok:
            return
        head = coll.head
        referenced = set()
        for node in walk(coll.body):
            if isinstance(node, Attr) and lp.links.get(node.uid) is head:
                referenced.add(node.attribute)
        profiles = helper.branch_profiles(coll)
        for i, branch in enumerate(profiles, start=1):
            for attr in head.attributes:
                preds = branch.get(attr, [])
                if not preds:
                    where = f" on branch {i}" if len(profiles) > 1 else ""
                    diags.append(Diagnostic(_ERR, "E_HEAD_UNASSIGNED", head.span,
                                            f"head attribute {attr} has no assignment{where}"))
                    continue
                scopes_used = {lp.node_scope[p.uid].uid for p in preds}
                if len(scopes_used) > 1:
                    diags.append(Diagnostic(_ERR, "E_HEAD_MULTIASSIGNED", preds[-1].span,
                                            f"head attribute {attr} is assigned in more than "
                                            f"one scope of the same branch"))

    for d in lp.program.definitions:
        check_collection(d.collection, lp.relation_kinds.get(d.name) == "abstract")
        for node in walk(d.collection.body):
            if isinstance(node, CollectionSource):
                check_collection(node.collection, False)
    main = lp.program.main
    if isinstance(main, CollectionExpr):
        check_collection(main, False)
    for node in walk(main):
        if isinstance(node, CollectionSource):
            check_collection(node.collection, False)
    return diags


def check_recursion(lp: LinkedProgram) -> list:
    """Cycles may not pass through negation, grouping, or the null-extendable
    side of an outer join."""
    diags = []
    defs = lp.defs_by_name
    edges = {}  # name -> list of (target, restricted, span, why)
    for name, d in defs.items():
        edges[name] = []
        _restricted_refs(lp, d.collection, name, edges[name])
    # Transitive reachability with restriction tracking.
    reach_restricted = {}
    for name in defs:
        seen = {}
        stack = [(name, False)]
        while stack:
            cur, restr = stack.pop()
            for tgt, r, span, why in edges.get(cur, []):
                nr = restr or r
                if tgt not in seen or (nr and not seen[tgt][0]):
                    seen[tgt] = (nr, span, why)
                    stack.append((tgt, nr))
        reach_restricted[name] = seen
    for name in defs:
        hit = reach_restricted[name].get(name)
        if hit is not None and hit[0]:
            diags.append(Diagnostic(_ERR, "E_UNSTRATIFIED", hit[1],
                                    f"recursive definition {name} depends on itself "
                                    f"through {hit[2]}"))
    return diags


def _restricted_refs(lp: LinkedProgram, coll: CollectionExpr, defname: str, out: list):
    def go(f, negated, grouped):
        if isinstance(f, Quantified):
            g = grouped or f.grouping is not None
            n = negated or f.polarity == "notExists"
            null_side_vars = set()
            if f.joins is not None:
                _null_extendable_vars(f.joins, null_side_vars)
            for b in f.bindings:
                if isinstance(b.source, RelationSource) and b.source.name in lp.defs_by_name:
                    why = None
                    if n:
                        why = "a negated scope"
                    elif g:
                        why = "a grouping scope"
                    elif b.var in null_side_vars:
                        why = "the optional side of an outer join"
                    out.append((b.source.name, why is not None, b.span, why or "a positive path"))
                elif isinstance(b.source, CollectionSource):
                    go(b.source.collection.body, n, g)
            go(f.body, n, g)
            return
        if isinstance(f, Not):
            go(f.child, not negated, grouped)
            return
        if isinstance(f, (And, Or)):
            for c in f.children:
                go(c, negated, grouped)

    go(coll.body, False, False)


def _null_extendable_vars(jt, out: set):
    def collect(n, optional):
        if isinstance(n, JoinLeaf):
            if optional:
                out.add(n.var)
        elif isinstance(n, LiteralLeaf):
            pass
        elif isinstance(n, JoinInner):
            for c in n.children:
                collect(c, optional)
        elif isinstance(n, JoinOuter):
            collect(n.left, optional or n.kind == "full")
            collect(n.right, True)

    collect(jt, False)


def check_program(program: Program, registry: Optional[dict] = None):
    """bind plus all static checks. Returns (LinkedProgram or None, diagnostics)."""
    bound = bind(program, registry)
    if isinstance(bound, list):
        return None, bound
    diags = list(bound.diagnostics)
    diags += check_grouping(bound)
    diags += check_heads(bound)
    diags += check_recursion(bound)
    return bound, diags


# ------------------------------------------------------------------
# Access planning
# ------------------------------------------------------------------


@dataclass(frozen=True)
class PlanStep:
    binding: Binding
    pattern: Optional[str]  # access pattern for externals, else None
    bound_terms: tuple  # ((attr, term node), ...) equalities feeding 'b' slots


@dataclass
class EvaluationOrder:
    steps: dict  # scope uid -> list of PlanStep


def plan_access(lp: LinkedProgram):
    """Choose a binding order per scope such that every external relation is
    reached with an admissible access pattern. Scope bodies supply candidate
    equalities; outer-scope attributes and constants are always available."""
    diags = []
    order = {}
    for s in lp.scopes:
        if s.kind != "quantifier":
            continue
        steps, errs = _plan_scope(lp, s)
        diags.extend(errs)
        if not errs:
            order[s.uid] = steps
    if diags:
        return diags
    return EvaluationOrder(order)


def _plan_scope(lp: LinkedProgram, s: Scope):
    diags = []
    eqs = []  # (attr-ref side, other term) equality conjuncts of this scope
    for conj in _flatten_and(s.node.body):
        if isinstance(conj, Atom) and isinstance(conj.predicate, Compare) \
                and conj.predicate.op == "=":
            p = conj.predicate
            eqs.append((p.left, p.right))
            eqs.append((p.right, p.left))
    placed = []
    placed_vars = set(s.literal_vars)
    pending = list(s.bindings)
    while pending:
        progress = False
        for b in list(pending):
            step = _try_place(lp, s, b, placed_vars, eqs)
            if step is not None:
                placed.append(step)
                placed_vars.add(b.var)
                pending.remove(b)
                progress = True
        if not progress:
            break
    for b in pending:
        if isinstance(b.source, ExternalSource):
            diags.append(Diagnostic(_ERR, "E_UNSAFE_EXTERNAL", b.span,
                                    f"external {b.source.name}: no admissible access pattern; "
                                    f"its operands are not reachable from bound attributes"))
        else:
            diags.append(Diagnostic(_ERR, "E_CYCLIC_LATERAL", b.span,
                                    f"binding {b.var} cannot be ordered"))
    if not diags:
        for step in placed:
            b = step.binding
            if isinstance(b.source, RelationSource) \
                    and lp.relation_kinds.get(b.source.name) == "abstract":
                diags.append(Diagnostic(_ERR, "E_ABSTRACT_UNEXPANDED", b.span,
                                        f"abstract relation {b.source.name} cannot be "
                                        f"evaluated; expand it first"))
    return placed, diags


def _try_place(lp: LinkedProgram, s: Scope, b: Binding, placed_vars, eqs):
    src = b.source
    if isinstance(src, (RelationSource,)):
        return PlanStep(b, None, ())
    if isinstance(src, CollectionSource):
        # Left-to-right resolution already guarantees lateral references
        # point backward; nothing further to verify.
        return PlanStep(b, None, ())
    spec = lp.registry.get(src.name)
    if spec is None:
        return None
    for pattern in spec.patterns:
        bound = []
        ok = True
        for attr, mode in zip(spec.attributes, pattern):
            if mode == "f":
                continue
            term = _feeding_term(lp, s, b, attr, placed_vars, eqs)
            if term is None:
                ok = False
                break
            bound.append((attr, term))
        if ok:
            return PlanStep(b, pattern, tuple(bound))
    return None


def _feeding_term(lp: LinkedProgram, s: Scope, b: Binding, attr, placed_vars, eqs):
    for side, other in eqs:
        if not (isinstance(side, Attr) and side.variable == b.var and side.attribute == attr):
            continue
        if isinstance(lp.links.get(side.uid), Binding) and lp.links[side.uid] is not b:
            continue
        if _term_available(lp, s, other, placed_vars, b):
            return other
    return None


def _term_available(lp: LinkedProgram, s: Scope, t, placed_vars, current: Binding):
    for node in walk(t):
        if isinstance(node, Aggregate):
            return False
        if isinstance(node, Attr):
            tgt = lp.links.get(node.uid)
            if isinstance(tgt, HeadSpec):
                return False
            if isinstance(tgt, Binding):
                if tgt is current:
                    return False
                if tgt in s.bindings and tgt.var not in placed_vars:
                    return False
    return True


# ------------------------------------------------------------------
# Abstract-relation expansion
# ------------------------------------------------------------------


class ExpansionError(ValueError):
    pass


def expand_abstract(program: Program, registry: Optional[dict] = None) -> Program:
    """Splice the bodies of abstract definitions into their use sites.

    A use `v in Abs` contributes one connector equality `v.a = T` per head
    attribute of Abs; each is consumed as the substitution for that
    attribute, the binding disappears, and the definition body (alpha-renamed,
    head references substituted) joins the scope's conjunction. Definitions
    left without uses are dropped from the result.
    """
    from .alt import from_json, to_json  # structural deep copy via the JSON form

    for _ in range(8):
        bound = bind(from_json(to_json(program)), registry)
        if isinstance(bound, list):
            raise ExpansionError(f"program does not bind: {bound[0]}")
        lp = bound
        abstract = {n for n, k in lp.relation_kinds.items() if k == "abstract"}
        if not abstract:
            return lp.program
        expander = _Expander(lp, abstract)
        program = expander.run()
        if not expander.changed:
            return program
    raise ExpansionError("abstract definitions nest too deep to expand")


class _Expander:
    def __init__(self, lp: LinkedProgram, abstract: set):
        self.lp = lp
        self.abstract = abstract
        self.counter = itertools.count(1)
        self.changed = False

    def run(self) -> Program:
        p = self.lp.program
        defs = [d for d in p.definitions if d.name not in self.abstract]
        new_defs = [Definition(d.name, self.expand_collection(d.collection)) for d in defs]
        if isinstance(p.main, CollectionExpr):
            main = self.expand_collection(p.main)
        else:
            main = self.expand_formula(p.main)
        return Program(new_defs, main)

    def expand_collection(self, coll: CollectionExpr) -> CollectionExpr:
        return CollectionExpr(HeadSpec(coll.head.relation, list(coll.head.attributes)),
                              self.expand_formula(coll.body))

    def expand_formula(self, f: Formula) -> Formula:
        if isinstance(f, Quantified):
            abstract_uses = [b for b in f.bindings
                             if isinstance(b.source, RelationSource) and b.source.name in self.abstract]
            if not abstract_uses:
                bindings = [self.expand_binding(b) for b in f.bindings]
                return Quantified(f.polarity, bindings, self._copy_grouping(f.grouping),
                                  f.joins, self.expand_formula(f.body))
            self.changed = True
            conjuncts = _flatten_and(f.body)
            keep = list(conjuncts)
            extra = []
            remaining = []
            for b in f.bindings:
                if b not in abstract_uses:
                    remaining.append(self.expand_binding(b))
                    continue
                dfn = self.lp.defs_by_name[b.source.name]
                subst = {}
                for attr in dfn.collection.head.attributes:
                    conn = self._find_connector(keep, b, attr)
                    if conn is None:
                        raise ExpansionError(
                            f"use of {b.source.name} does not pin attribute {attr} "
                            f"with an equality")
                    keep.remove(conn)
                    subst[attr] = self._other_side(conn.predicate, b, attr)
                extra.append(self._instantiate(dfn, subst))
            if not remaining:
                raise ExpansionError(
                    f"scope would lose all bindings when expanding; add a concrete binding")
            body_parts = [self.expand_formula(c) for c in keep] + extra
            body = body_parts[0] if len(body_parts) == 1 else And(body_parts)
            return Quantified(f.polarity, remaining, self._copy_grouping(f.grouping),
                              f.joins, body)
        if isinstance(f, And):
            return And([self.expand_formula(c) for c in f.children])
        if isinstance(f, Or):
            return Or([self.expand_formula(c) for c in f.children])
        if isinstance(f, Not):
            return Not(self.expand_formula(f.child))
        return f

    def expand_binding(self, b: Binding) -> Binding:
        if isinstance(b.source, CollectionSource):
            return Binding(b.var, CollectionSource(self.expand_collection(b.source.collection)))
        return b

    @staticmethod
    def _copy_grouping(g):
        if g is None:
            return None
        return GroupingOp([Attr(k.variable, k.attribute) for k in g.keys])

    def _find_connector(self, conjuncts, b: Binding, attr: str):
        for conj in conjuncts:
            if not (isinstance(conj, Atom) and isinstance(conj.predicate, Compare)
                    and conj.predicate.op == "="):
                continue
            p = conj.predicate
            for side in (p.left, p.right):
                if isinstance(side, Attr) and side.variable == b.var and side.attribute == attr:
                    other = p.right if side is p.left else p.left
                    if not any(isinstance(n, Attr) and n.variable == b.var for n in walk(other)):
                        return conj
        return None

    @staticmethod
    def _other_side(p: Compare, b: Binding, attr: str):
        if isinstance(p.left, Attr) and p.left.variable == b.var and p.left.attribute == attr:
            return p.right
        return p.left

    def _instantiate(self, dfn: Definition, subst: dict) -> Formula:
        """Fresh-rename the definition's quantifier variables, then replace
        head references with the pinned terms."""
        n = next(self.counter)
        rename = {}
        for node in walk(dfn.collection.body):
            if isinstance(node, Binding):
                rename.setdefault(node.var, f"{node.var}__x{n}")
            elif isinstance(node, LiteralLeaf):
                rename.setdefault(node.var, f"{node.var}__x{n}")
        head = dfn.collection.head

        def copy_term(t):
            if isinstance(t, Constant):
                return Constant(t.value)
            if isinstance(t, Attr):
                if t.variable == head.relation and t.attribute in subst:
                    return copy_term(subst[t.attribute])
                return Attr(rename.get(t.variable, t.variable), t.attribute)
            if isinstance(t, Arith):
                return Arith(t.op, copy_term(t.left), copy_term(t.right))
            if isinstance(t, Aggregate):
                return Aggregate(t.fn, copy_term(t.arg))
            raise TypeError(t)

        def copy_jt(n_):
            if isinstance(n_, JoinLeaf):
                return JoinLeaf(rename.get(n_.var, n_.var))
            if isinstance(n_, LiteralLeaf):
                return LiteralLeaf(n_.value, rename.get(n_.var, n_.var))
            if isinstance(n_, JoinInner):
                return JoinInner([copy_jt(c) for c in n_.children])
            return JoinOuter(n_.kind, copy_jt(n_.left), copy_jt(n_.right))

        def copy_formula(f):
            if isinstance(f, Quantified):
                bs = []
                for b in f.bindings:
                    src = b.source
                    if isinstance(src, RelationSource):
                        ns = RelationSource(src.name)
                    elif isinstance(src, ExternalSource):
                        ns = ExternalSource(src.name)
                    else:
                        ns = CollectionSource(CollectionExpr(
                            HeadSpec(src.collection.head.relation,
                                     list(src.collection.head.attributes)),
                            copy_formula(src.collection.body)))
                    bs.append(Binding(rename.get(b.var, b.var), ns))
                grouping = None
                if f.grouping is not None:
                    grouping = GroupingOp([copy_term(k) for k in f.grouping.keys])
                joins = copy_jt(f.joins) if f.joins is not None else None
                return Quantified(f.polarity, bs, grouping, joins, copy_formula(f.body))
            if isinstance(f, And):
                return And([copy_formula(c) for c in f.children])
            if isinstance(f, Or):
                return Or([copy_formula(c) for c in f.children])
            if isinstance(f, Not):
                return Not(copy_formula(f.child))
            if isinstance(f, Atom):
                p = f.predicate
                if isinstance(p, Compare):
                    return Atom(Compare(p.op, copy_term(p.left), copy_term(p.right)))
                return Atom(IsNull(copy_term(p.term), p.negated))
            return TrueLit()

        return copy_formula(dfn.collection.body)
