"""Diagram construction for linked programs.

Scopes become nested regions, bindings become table nodes with one port per
referenced attribute, and predicates become edges between ports: comparison
predicates as plain connecting lines, assignment predicates as arrows into
head-table ports.  Grouping scopes get a double border with shaded key
attributes, negated scopes a "¬" label, and the optional side of an outer
join an empty-circle edge end.  Bindings to defined relations inline the
definition's sub-diagram; names listed in `collapse` (and recursive
definitions, which cannot be inlined finitely) render as single module
boxes instead.

Selection constants (e.g. `s.C = 0`) and null tests are folded into their
table as an extra text row rather than drawn as separate constant nodes.

`to_dot` serializes a document to DOT text deterministically: equal
documents yield byte-identical output.
"""

from __future__ import annotations

import html
import re
from dataclasses import asdict, dataclass, field

from .alt import (Aggregate, And, Atom, Attr, Binding, CollectionExpr, CollectionSource, Compare,
                  Constant, ExternalSource, HeadSpec, IsNull, JoinInner, JoinLeaf, JoinOuter,
                  LiteralLeaf, Not, Or, Quantified, RelationSource, TrueLit, walk)
from .binder import LinkedProgram
from .parser import _formula_text, _jointree_text, _pred_text, _term_text, _value_text

__all__ = ["Edge", "HigraphDoc", "PortRow", "Region", "TableNode", "doc_to_dict",
           "to_dot", "to_higraph"]


# ------------------------------------------------------------------
# Document model
# ------------------------------------------------------------------

@dataclass
class PortRow:
    port: str  # "" for plain text rows that nothing links to
    text: str
    shaded: bool = False


@dataclass
class TableNode:
    id: str
    kind: str  # "relation" | "external" | "head" | "literal" | "module"
    title: str
    rows: list = field(default_factory=list)


@dataclass
class Region:
    id: str
    kind: str  # "collection" | "exists" | "notExists" | "canvas"
    grouped: bool = False
    tables: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    notes: list = field(default_factory=list)


@dataclass
class Edge:
    kind: str  # "comparison" | "assignment"
    src_table: str
    src_port: str
    dst_table: str
    dst_port: str
    label: str = ""
    optional: str = ""  # "" | "src" | "dst" | "both": empty-circle ends


@dataclass
class HigraphDoc:
    root: Region
    edges: list = field(default_factory=list)


def doc_to_dict(doc: HigraphDoc) -> dict:
    return asdict(doc)


# ------------------------------------------------------------------
# Construction
# ------------------------------------------------------------------

_FLIP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def _tree_vars(node) -> set:
    return {n.var for n in walk(node) if isinstance(n, (JoinLeaf, LiteralLeaf))}


class _Builder:
    def __init__(self, lp: LinkedProgram, collapse):
        self.lp = lp
        self.collapse = frozenset(collapse or ())
        self._region_n = 0
        self._table_n = 0
        self.edges = []
        # Join nodes that carry at least one predicate, by object identity.
        self._conditioned = {id(n) for n in lp.join_condition.values()}

    # --- id supply ---

    def _region_id(self) -> str:
        rid = f"r{self._region_n}"
        self._region_n += 1
        return rid

    def _table_id(self) -> str:
        tid = f"t{self._table_n}"
        self._table_n += 1
        return tid

    # --- table helpers ---

    def _port(self, table: TableNode, attr: str) -> str:
        for row in table.rows:
            if row.port and row.text == attr:
                return row.port
        base = "a_" + re.sub(r"[^0-9A-Za-z_]", "_", attr)
        taken = {row.port for row in table.rows}
        port = base
        k = 2
        while port in taken:
            port = f"{base}_{k}"
            k += 1
        table.rows.append(PortRow(port, attr))
        return port

    # --- program entry ---

    def build(self) -> HigraphDoc:
        main = self.lp.program.main
        tables = {}
        if isinstance(main, CollectionExpr):
            root = self.collection(main, tables)
        else:
            root = Region(self._region_id(), "canvas")
            self.walk_body(main, root, tables)
            if isinstance(main, TrueLit):
                root.notes.append("true")
        return HigraphDoc(root, self.edges)

    def collection(self, ce: CollectionExpr, tables: dict) -> Region:
        region = Region(self._region_id(), "collection")
        head = TableNode(self._table_id(), "head", ce.head.relation,
                         [PortRow("a_" + re.sub(r"[^0-9A-Za-z_]", "_", a), a)
                          for a in ce.head.attributes])
        tables[ce.head.uid] = head
        region.tables.append(head)
        self.walk_body(ce.body, region, tables)
        return region

    def quantified(self, q: Quantified, tables: dict) -> Region:
        kind = "exists" if q.polarity == "exists" else "notExists"
        region = Region(self._region_id(), kind, grouped=q.grouping is not None)
        for b in q.bindings:
            self.binding(b, region, tables)
        if q.joins is not None:
            for n in walk(q.joins):
                if isinstance(n, LiteralLeaf):
                    t = TableNode(self._table_id(), "literal", _value_text(n.value),
                                  [PortRow("v", _value_text(n.value))])
                    tables[n.uid] = t
                    region.tables.append(t)
                elif isinstance(n, JoinOuter) and id(n) not in self._conditioned:
                    region.notes.append(f"× {_jointree_text(n)}")
        if q.grouping is not None:
            for key in q.grouping.keys:
                if isinstance(key, Attr):
                    end = self.endpoint(key, tables)
                    if end is not None:
                        table, port, _ = end
                        for row in table.rows:
                            if row.port == port:
                                row.shaded = True
        self.walk_body(q.body, region, tables)
        return region

    def binding(self, b: Binding, region: Region, tables: dict):
        src = b.source
        if isinstance(src, CollectionSource):
            sub_tables = tables  # lateral collections may reference outer rows
            sub = self.collection(src.collection, sub_tables)
            tables[b.uid] = sub_tables[src.collection.head.uid]
            region.regions.append(sub)
            return
        if isinstance(src, ExternalSource):
            t = TableNode(self._table_id(), "external", src.name)
            spec = self.lp.registry.get(src.name)
            if spec is not None:
                for a in spec.attributes:
                    self._port(t, a)
            tables[b.uid] = t
            region.tables.append(t)
            return
        name = src.name
        defn = self.lp.defs_by_name.get(name)
        if defn is not None and name not in self.lp.recursive_defs \
                and name not in self.collapse:
            sub_tables = {}  # definitions are closed: fresh ids per expansion
            sub = self.collection(defn.collection, sub_tables)
            tables[b.uid] = sub_tables[defn.collection.head.uid]
            region.regions.append(sub)
            return
        kind = "module" if (defn is not None and name in self.collapse) else "relation"
        t = TableNode(self._table_id(), kind, name)
        tables[b.uid] = t
        region.tables.append(t)

    # --- formulas ---

    def walk_body(self, f, region: Region, tables: dict):
        if isinstance(f, And):
            for c in f.children:
                self.walk_body(c, region, tables)
        elif isinstance(f, Quantified):
            region.regions.append(self.quantified(f, tables))
        elif isinstance(f, Atom):
            self.predicate(f.predicate, region, tables)
        elif isinstance(f, Or) and all(isinstance(c, Quantified) for c in f.children):
            region.notes.append("∨")
            for c in f.children:
                region.regions.append(self.quantified(c, tables))
        elif isinstance(f, TrueLit):
            pass
        else:
            region.notes.append(_formula_text(f))

    def predicate(self, p, region: Region, tables: dict):
        if isinstance(p, IsNull):
            anchor = self._table_of(p.term, tables)
            if anchor is None:
                region.notes.append(_pred_text(p))
                return
            word = "is not null" if p.negated else "is null"
            anchor[0].rows.append(PortRow("", f"{self._row_label(p.term)} {word}"))
            return
        uid = p.uid
        cls = self.lp.predicate_class.get(uid, "comparison")
        if cls.endswith("assignment"):
            self.assignment(p, region, tables)
        else:
            self.comparison(p, region, tables)

    def assignment(self, p: Compare, region: Region, tables: dict):
        head, attr = self.lp.assignment_target[p.uid]
        head_table = tables.get(head.uid)
        sides = [p.left, p.right]
        is_target = [isinstance(s, Attr) and self.lp.links.get(s.uid) is head
                     and s.attribute == attr for s in sides]
        value = sides[0] if is_target[1] else sides[1]
        if head_table is not None and isinstance(value, Constant):
            head_table.rows.append(PortRow("", "{} = {}".format(
                attr, _value_text(value.value))))
            return
        end = self.endpoint(value, tables)
        if head_table is None or end is None:
            region.notes.append(_pred_text(p))
            return
        src_table, src_port, _ = end
        self.edges.append(Edge("assignment", src_table.id, src_port,
                               head_table.id, self._port(head_table, attr),
                               label=self._fn_label(value)))

    def comparison(self, p: Compare, region: Region, tables: dict):
        sides = [p.left, p.right]
        const_idx = [i for i, s in enumerate(sides) if isinstance(s, Constant)]
        if len(const_idx) == 1:
            i = 1 - const_idx[0]
            anchor = self._table_of(sides[i], tables)
            if anchor is not None:
                op = p.op if i == 0 else _FLIP[p.op]
                anchor[0].rows.append(PortRow("", "{} {} {}".format(
                    self._row_label(sides[i]), op,
                    _value_text(sides[const_idx[0]].value))))
                return
        left = self.endpoint(p.left, tables)
        right = self.endpoint(p.right, tables)
        if left is None or right is None:
            region.notes.append(_pred_text(p))
            return
        (lt, lp_, lv), (rt, rp, rv) = left, right
        fns = [fn for fn in (self._fn_label(p.left), self._fn_label(p.right)) if fn]
        parts = fns + ([p.op] if p.op != "=" else [])
        label = " ".join(parts)
        optional = self._optional_ends(p.uid, lv, rv)
        self.edges.append(Edge("comparison", lt.id, lp_, rt.id, rp,
                               label=label, optional=optional))

    def _optional_ends(self, uid, src_var, dst_var) -> str:
        join = self.lp.join_condition.get(uid)
        if not isinstance(join, JoinOuter):
            return ""
        if join.kind == "left":
            opt = _tree_vars(join.right)
        elif join.kind == "right":
            opt = _tree_vars(join.left)
        else:
            opt = _tree_vars(join.left) | _tree_vars(join.right)
        src, dst = src_var in opt, dst_var in opt
        if src and dst:
            return "both"
        if src:
            return "src"
        if dst:
            return "dst"
        return ""

    # --- term resolution ---

    def _table_of(self, term, tables: dict):
        """(table, range var) for a term anchored at one attribute; creates
        no port row."""
        if isinstance(term, Aggregate):
            return self._table_of(term.arg, tables)
        if not isinstance(term, Attr):
            return None
        target = self.lp.links.get(term.uid)
        table = tables.get(getattr(target, "uid", None))
        if table is None:
            return None
        return table, term.variable

    def endpoint(self, term, tables: dict):
        """(table, port, range var) for a term anchored at one attribute."""
        anchor = self._table_of(term, tables)
        if anchor is None:
            return None
        table, var = anchor
        while isinstance(term, Aggregate):
            term = term.arg
        if table.kind == "literal":
            return table, table.rows[0].port, var
        return table, self._port(table, term.attribute), var

    def _fn_label(self, term) -> str:
        return term.fn if isinstance(term, Aggregate) else ""

    def _row_label(self, term) -> str:
        if isinstance(term, Aggregate):
            return f"{term.fn}({self._row_label(term.arg)})"
        if isinstance(term, Attr):
            return term.attribute
        if isinstance(term, Constant):
            return _value_text(term.value)
        return _term_text(term)


def to_higraph(lp: LinkedProgram, collapse=()) -> HigraphDoc:
    """Build the diagram document for a bound program.

    `collapse` names defined relations to draw as single module boxes
    instead of inlining their sub-diagrams.
    """
    return _Builder(lp, collapse).build()


# ------------------------------------------------------------------
# DOT serialization
# ------------------------------------------------------------------

_REGION_STYLE = {
    "collection": [("style", "rounded")],
    "exists": [("style", "rounded")],
    "notExists": [("style", "rounded"), ("label", "¬")],
    "canvas": [("style", "rounded")],
}


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _table_label(t: TableNode) -> str:
    border = "2" if t.kind == "module" else "1"
    lines = [f'<TABLE BORDER="{border}" CELLBORDER="0" CELLSPACING="0" CELLPADDING="4">']
    if t.kind == "literal":
        row = t.rows[0]
        lines.append(f'<TR><TD PORT="{row.port}">{html.escape(row.text)}</TD></TR>')
    else:
        title = html.escape(t.title)
        lines.append(f'<TR><TD ALIGN="CENTER" BORDER="1" SIDES="B"><B>{title}</B></TD></TR>')
        for row in t.rows:
            attrs = ' ALIGN="LEFT"'
            if row.port:
                attrs += f' PORT="{row.port}"'
            if row.shaded:
                attrs += ' BGCOLOR="lightgray"'
            lines.append(f"<TR><TD{attrs}>{html.escape(row.text)}</TD></TR>")
    lines.append("</TABLE>")
    return "".join(lines)


def _emit_region(region: Region, out: list, depth: int):
    pad = "  " * depth
    out.append(f"{pad}subgraph {_q('cluster_' + region.id)} {{")
    attrs = list(_REGION_STYLE[region.kind])
    if region.kind != "notExists":
        attrs.append(("label", ""))
    if region.grouped:
        attrs.append(("peripheries", "2"))
    inner = "  " * (depth + 1)
    out.append(inner + "graph [" + ", ".join(f"{k}={_q(v)}" for k, v in attrs) + "]")
    for t in region.tables:
        out.append(f"{inner}{_q(t.id)} [label=<{_table_label(t)}>]")
    for i, note in enumerate(region.notes):
        out.append(f"{inner}{_q(region.id + '_n' + str(i))} "
                   f"[shape={_q('plaintext')}, label={_q(note)}]")
    for child in region.regions:
        _emit_region(child, out, depth + 1)
    out.append(f"{pad}}}")


def _emit_edge(e: Edge, out: list):
    attrs = []
    if e.kind == "assignment":
        attrs += [("dir", "forward"), ("arrowhead", "normal")]
    elif e.optional == "dst":
        attrs += [("dir", "forward"), ("arrowhead", "odot")]
    elif e.optional == "src":
        attrs += [("dir", "back"), ("arrowtail", "odot")]
    elif e.optional == "both":
        attrs += [("dir", "both"), ("arrowhead", "odot"), ("arrowtail", "odot")]
    if e.label:
        attrs.append(("label", e.label))
    text = f"  {_q(e.src_table)}:{_q(e.src_port)} -> {_q(e.dst_table)}:{_q(e.dst_port)}"
    if attrs:
        text += " [" + ", ".join(f"{k}={_q(v)}" for k, v in attrs) + "]"
    out.append(text)


def to_dot(doc: HigraphDoc) -> str:
    out = ["digraph higraph {"]
    out.append('  graph [compound="true", fontname="Helvetica", fontsize="11", '
               'labeljust="l", nodesep="0.4", ranksep="0.4"]')
    out.append('  node [shape="plain", fontname="Helvetica", fontsize="11"]')
    out.append('  edge [dir="none", fontname="Helvetica", fontsize="10"]')
    _emit_region(doc.root, out, 1)
    for e in doc.edges:
        _emit_edge(e, out)
    out.append("}")
    return "\n".join(out) + "\n"
