"""SQL front end: parse a small SELECT dialect and translate it into the
tree shapes the rest of the toolkit uses.

The dialect covers what the worked examples need: comma joins, LEFT/FULL
OUTER JOIN with ON, JOIN LATERAL, scalar subqueries in the select list and
in WHERE comparisons, [NOT] IN, [NOT] EXISTS, IS [NOT] NULL, GROUP BY,
HAVING, DISTINCT, and arithmetic. Anything else is rejected by name.

Translation is pattern-preserving: every scope, grouping, and join
annotation in the SQL survives as the corresponding tree structure, so the
output can be compared against hand-written queries by pattern rather than
only by result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .alt import (AGGREGATE_FNS, TRUE, FALSE, NULL, Aggregate, And, Arith, Atom, Attr, Binding,
                  CollectionExpr, CollectionSource, Compare, Constant, ExternalSource, GroupingOp,
                  HeadSpec, IsNull, JoinInner, JoinLeaf, JoinOuter, LiteralLeaf, Not, Or, Program,
                  Quantified, RelationSource, TrueLit, Value, dec_value, int_value, text_value,
                  walk)


class SqlParseError(Exception):
    def __init__(self, message, line=None, col=None):
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.col = col


class UnsupportedSql(Exception):
    """A recognized construct outside the supported subset."""

    code = "E_UNSUPPORTED_SQL"

    def __init__(self, construct):
        super().__init__(f"unsupported SQL: {construct}")
        self.construct = construct


# ------------------------------------------------------------------
# Lexer
# ------------------------------------------------------------------

_KEYWORDS = {
    "select", "distinct", "from", "where", "group", "by", "having", "as",
    "join", "lateral", "left", "full", "outer", "inner", "on", "not", "in",
    "exists", "is", "null", "and", "or", "true", "false", "count", "sum",
    "avg", "min", "max", "order", "union", "except", "intersect", "into",
}

# Keywords that can never serve as a table name, alias, or column name.
_RESERVED = {
    "select", "distinct", "from", "where", "group", "having", "join", "on",
    "and", "or", "not", "in", "is", "as", "by", "left", "full", "outer",
    "lateral", "order", "union", "except", "intersect", "into",
}

_PUNCT = ("<=", ">=", "<>", "!=", "(", ")", ",", ".", ";", "*", "+", "-",
          "/", "=", "<", ">")


@dataclass
class _Tok:
    kind: str  # name | quoted | int | dec | text | punct | eof
    text: str
    line: int
    col: int

    @property
    def keyword(self) -> Optional[str]:
        if self.kind == "name" and self.text.lower() in _KEYWORDS:
            return self.text.lower()
        return None


def _lex(text: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("name", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                toks.append(_Tok("dec", text[i:j], line, start_col))
            else:
                toks.append(_Tok("int", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SqlParseError("unterminated text literal", line, start_col)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(text[j])
                j += 1
            toks.append(_Tok("text", "".join(buf), line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise SqlParseError("unterminated quoted name", line, start_col)
            toks.append(_Tok("quoted", text[i + 1:j], line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(_Tok("punct", "<>" if p == "!=" else p, line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise SqlParseError(f"unexpected character {c!r}", line, start_col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ------------------------------------------------------------------
# AST
# ------------------------------------------------------------------

@dataclass
class SqlColumn:
    table: str
    name: str


@dataclass
class SqlLit:
    value: Value


@dataclass
class SqlArith:
    op: str
    left: object
    right: object


@dataclass
class SqlAgg:
    fn: str
    arg: object  # expression, or "*" for count(*)


@dataclass
class SqlScalar:
    sub: "SqlSelect"


@dataclass
class SqlCompare:
    op: str
    left: object
    right: object


@dataclass
class SqlIsNull:
    term: object
    negated: bool


@dataclass
class SqlIn:
    term: object
    sub: "SqlSelect"
    negated: bool


@dataclass
class SqlExists:
    sub: "SqlSelect"
    negated: bool


@dataclass
class SqlAnd:
    children: list


@dataclass
class SqlOr:
    children: list


@dataclass
class SqlNot:
    child: object


@dataclass
class SelectItem:
    expr: object
    alias: Optional[str]


@dataclass
class TableRef:
    name: str
    alias: str
    quoted: bool = False


@dataclass
class SubqueryRef:
    select: "SqlSelect"
    alias: str


@dataclass
class SqlJoin:
    kind: str  # inner | left | full
    left: object
    right: object  # TableRef | SubqueryRef
    on: object
    lateral: bool = False


@dataclass
class SqlSelect:
    distinct: bool
    items: list
    from_items: list  # chains: TableRef | SubqueryRef | SqlJoin
    where: object
    group_by: list
    having: object
    sentence: Optional[SqlExists] = None  # select [not] exists(...), no FROM


SqlAst = SqlSelect


# ------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.toks = _lex(text)
        self.pos = 0

    def peek(self, ahead=0) -> _Tok:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_kw(self, *kws) -> bool:
        return self.peek().keyword in kws

    def at_punct(self, p) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == p

    def eat_kw(self, kw) -> _Tok:
        t = self.peek()
        if t.keyword != kw:
            raise SqlParseError(f"expected {kw.upper()}, found {t.text!r}", t.line, t.col)
        return self.next()

    def eat_punct(self, p) -> _Tok:
        t = self.peek()
        if not self.at_punct(p):
            raise SqlParseError(f"expected {p!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def eat_name(self) -> _Tok:
        t = self.peek()
        if t.kind != "name" or t.text.lower() in _RESERVED:
            raise SqlParseError(f"expected a name, found {t.text!r}", t.line, t.col)
        return self.next()

    def eat_any_name(self) -> _Tok:
        """A name in a position where no keyword can follow (after AS or a
        dot), so even reserved spellings like `left` are allowed."""
        t = self.peek()
        if t.kind != "name":
            raise SqlParseError(f"expected a name, found {t.text!r}", t.line, t.col)
        return self.next()

    # --- statement ---

    def statement(self) -> SqlSelect:
        sel = self.select()
        t = self.peek()
        if t.keyword in ("union", "except", "intersect"):
            raise UnsupportedSql(t.keyword.upper())
        if self.at_punct(";"):
            self.next()
        t = self.peek()
        if t.kind != "eof":
            raise SqlParseError(f"trailing input {t.text!r}", t.line, t.col)
        return sel

    def select(self) -> SqlSelect:
        self.eat_kw("select")
        distinct = False
        if self.at_kw("distinct"):
            self.next()
            distinct = True
        items = [self.select_item()]
        while self.at_punct(","):
            self.next()
            items.append(self.select_item())
        if self.at_kw("into"):
            raise UnsupportedSql("INTO")
        if not self.at_kw("from"):
            return self._no_from_select(distinct, items)
        self.next()
        from_items = [self.from_chain()]
        while self.at_punct(","):
            self.next()
            from_items.append(self.from_chain())
        self._check_aliases(from_items)
        where = None
        if self.at_kw("where"):
            self.next()
            where = self.expr()
        group_by = []
        if self.at_kw("group"):
            self.next()
            self.eat_kw("by")
            group_by.append(self.column_ref())
            while self.at_punct(","):
                self.next()
                group_by.append(self.column_ref())
        having = None
        if self.at_kw("having"):
            self.next()
            having = self.expr()
        if self.at_kw("order"):
            raise UnsupportedSql("ORDER BY")
        if self.at_kw("into"):
            raise UnsupportedSql("INTO")
        return SqlSelect(distinct, items, from_items, where, group_by, having)

    def _no_from_select(self, distinct, items) -> SqlSelect:
        if distinct or len(items) != 1 or not isinstance(items[0].expr, SqlExists):
            raise UnsupportedSql("SELECT without FROM (other than SELECT [NOT] EXISTS)")
        return SqlSelect(False, [], [], None, [], None, sentence=items[0].expr)

    def select_item(self) -> SelectItem:
        expr = self.expr()
        alias = None
        if self.at_kw("as"):
            self.next()
            alias = self.eat_any_name().text
        elif self.peek().kind == "name" and self.peek().text.lower() not in _KEYWORDS:
            alias = self.next().text
        return SelectItem(expr, alias)

    def _check_aliases(self, from_items):
        seen = set()

        def visit(item):
            if isinstance(item, SqlJoin):
                visit(item.left)
                visit(item.right)
                return
            if item.alias in seen:
                raise SqlParseError(f"duplicate table alias {item.alias!r}")
            seen.add(item.alias)

        for chain in from_items:
            visit(chain)

    # --- FROM ---

    def from_chain(self):
        node = self.from_factor()
        while True:
            kind = None
            lateral = False
            if self.at_kw("join"):
                self.next()
                kind = "inner"
            elif self.at_kw("inner") and self.peek(1).keyword == "join":
                self.next()
                self.next()
                kind = "inner"
            elif self.at_kw("left", "full"):
                kind = self.next().keyword
                if self.at_kw("outer"):
                    self.next()
                self.eat_kw("join")
            else:
                return node
            if self.at_kw("lateral"):
                self.next()
                lateral = True
                if kind != "inner":
                    raise UnsupportedSql("LATERAL on an outer join")
            right = self.from_factor()
            self.eat_kw("on")
            on = self.expr()
            node = SqlJoin(kind, node, right, on, lateral)

    def from_factor(self):
        t = self.peek()
        if self.at_punct("("):
            self.next()
            if self.peek().keyword != "select":
                raise SqlParseError("expected a subquery after '('", t.line, t.col)
            sub = self.select()
            self.eat_punct(")")
            return SubqueryRef(sub, self._alias(required=True))
        if t.kind == "quoted":
            self.next()
            return TableRef(t.text, self._alias() or t.text, quoted=True)
        name = self.eat_name().text
        return TableRef(name, self._alias() or name)

    def _alias(self, required=False) -> Optional[str]:
        if self.at_kw("as"):
            self.next()
            return self.eat_any_name().text
        t = self.peek()
        if t.kind == "name" and t.text.lower() not in _KEYWORDS:
            return self.next().text
        if required:
            raise SqlParseError("a derived table needs an alias", t.line, t.col)
        return None

    # --- expressions ---

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        first = self.and_expr()
        if not self.at_kw("or"):
            return first
        children = [first]
        while self.at_kw("or"):
            self.next()
            children.append(self.and_expr())
        return SqlOr(children)

    def and_expr(self):
        first = self.not_expr()
        if not self.at_kw("and"):
            return first
        children = [first]
        while self.at_kw("and"):
            self.next()
            children.append(self.not_expr())
        return SqlAnd(children)

    def not_expr(self):
        if self.at_kw("not"):
            self.next()
            child = self.not_expr()
            if isinstance(child, SqlExists):
                return SqlExists(child.sub, negated=not child.negated)
            return SqlNot(child)
        return self.predicate()

    def predicate(self):
        if self.at_kw("exists"):
            self.next()
            self.eat_punct("(")
            sub = self.select()
            self.eat_punct(")")
            return SqlExists(sub, negated=False)
        left = self.additive()
        t = self.peek()
        if self.at_kw("is"):
            self.next()
            negated = False
            if self.at_kw("not"):
                self.next()
                negated = True
            self.eat_kw("null")
            return SqlIsNull(left, negated)
        if self.at_kw("not") and self.peek(1).keyword == "in":
            self.next()
            self.next()
            return SqlIn(left, self._in_subquery(), negated=True)
        if self.at_kw("in"):
            self.next()
            return SqlIn(left, self._in_subquery(), negated=False)
        if t.kind == "punct" and t.text in ("=", "<>", "<", "<=", ">", ">="):
            op = self.next().text
            right = self.additive()
            return SqlCompare(op, left, right)
        return left

    def _in_subquery(self) -> SqlSelect:
        self.eat_punct("(")
        if self.peek().keyword != "select":
            raise UnsupportedSql("IN over a value list")
        sub = self.select()
        self.eat_punct(")")
        return sub

    def additive(self):
        node = self.multiplicative()
        while self.peek().kind == "punct" and self.peek().text in ("+", "-"):
            op = self.next().text
            node = SqlArith(op, node, self.multiplicative())
        return node

    def multiplicative(self):
        node = self.primary()
        while self.peek().kind == "punct" and self.peek().text in ("*", "/"):
            op = self.next().text
            node = SqlArith(op, node, self.primary())
        return node

    def primary(self):
        t = self.peek()
        if self.at_punct("("):
            if self.peek(1).keyword == "select":
                self.next()
                sub = self.select()
                self.eat_punct(")")
                return SqlScalar(sub)
            self.next()
            inner = self.expr()
            self.eat_punct(")")
            return inner
        if t.keyword in AGGREGATE_FNS:
            fn = self.next().keyword
            self.eat_punct("(")
            if self.at_punct("*"):
                self.next()
                arg = "*"
            else:
                if self.at_kw("distinct"):
                    self.next()
                    if fn != "count":
                        raise UnsupportedSql(f"DISTINCT inside {fn.upper()}")
                    fn = "countdistinct"
                arg = self.additive()
            self.eat_punct(")")
            return SqlAgg(fn, arg)
        if t.kind == "int":
            self.next()
            return SqlLit(int_value(int(t.text)))
        if t.kind == "dec":
            self.next()
            return SqlLit(dec_value(t.text))
        if t.kind == "text":
            self.next()
            return SqlLit(text_value(t.text))
        if t.keyword == "true":
            self.next()
            return SqlLit(TRUE)
        if t.keyword == "false":
            self.next()
            return SqlLit(FALSE)
        if t.keyword == "null":
            self.next()
            return SqlLit(NULL)
        if self.at_punct("-"):
            self.next()
            inner = self.primary()
            if isinstance(inner, SqlLit) and inner.value.tag in ("int", "dec"):
                return SqlLit(Value(inner.value.tag, -inner.value.val))
            raise SqlParseError("unary minus only applies to number literals",
                               t.line, t.col)
        if t.kind in ("name", "quoted"):
            if self.peek(1).kind == "punct" and self.peek(1).text == "(":
                raise UnsupportedSql(f"function call {t.text!r}")
            return self.column_ref()
        raise SqlParseError(f"unexpected token {t.text!r}", t.line, t.col)

    def column_ref(self) -> SqlColumn:
        t = self.peek()
        if t.kind == "quoted":
            self.next()
            table = t.text
        else:
            table = self.eat_name().text
        if not self.at_punct("."):
            raise SqlParseError(f"columns must be table-qualified ({table}.col)",
                               t.line, t.col)
        self.next()
        return SqlColumn(table, self.eat_any_name().text)


def parse_sql(text: str) -> SqlAst:
    return _Parser(text).statement()


# ------------------------------------------------------------------
# Translation
# ------------------------------------------------------------------

# Quoted operator table names map onto the stock computed relations so the
# result stays printable and bindable.
OPERATOR_TABLE_NAMES = {
    "-": "Minus", "+": "Add", "*": "Mul", ">": "Bigger", "<": "Smaller",
}

# Default head attribute names for unaliased aggregates, matching the
# shorthands the worked examples use.
_AGG_NAMES = {"sum": "sm", "count": "ct", "avg": "av", "min": "mn",
              "max": "mx", "countdistinct": "cd"}


class _Scope:
    """One SELECT's translation state: bindings plus the alias environment."""

    def __init__(self, translator, parent):
        self.tr = translator
        self.parent = parent
        self.aliases = {}  # alias -> var name
        self.bindings = []
        self.first_table: Optional[str] = None
        self.first_table_alias: Optional[str] = None

    def resolve(self, alias) -> str:
        s = self
        while s is not None:
            if alias in s.aliases:
                return s.aliases[alias]
            s = s.parent
        raise SqlParseError(f"unknown table alias {alias!r}")

    def add(self, alias, source, var_base=None) -> str:
        var = self.tr.fresh_var(var_base or alias)
        self.aliases[alias] = var
        self.bindings.append(Binding(var, source))
        return var


class _Translator:
    def __init__(self, schemas=None):
        self.schemas = schemas or {}
        self.used_vars = set()
        self.lit_count = 0

    def fresh_var(self, base) -> str:
        name = "".join(ch for ch in base if ch.isalnum() or ch == "_").lstrip("_") or "t"
        if name[0].isdigit():
            name = "t" + name
        cand, k = name, 1
        while cand in self.used_vars:
            k += 1
            cand = f"{name}_{k}"
        self.used_vars.add(cand)
        return cand

    def fresh_literal_var(self) -> str:
        self.lit_count += 1
        return self.fresh_var(f"v{self.lit_count}")

    # --- FROM ---

    def build_scope(self, sel: SqlSelect, parent: Optional[_Scope]):
        """Bindings, an optional join tree, and the ON-derived conjuncts."""
        scope = _Scope(self, parent)
        pieces = []  # join tree parts, one per comma factor
        conjuncts = []
        has_outer = False
        for chain in sel.from_items:
            part, outer = self._chain(chain, scope, conjuncts)
            if isinstance(part, list):
                pieces.extend(part)
            else:
                pieces.append(part)
            has_outer = has_outer or outer
        if not has_outer:
            return scope, None, conjuncts
        nodes = [JoinLeaf(p) if isinstance(p, str) else p for p in pieces]
        tree = nodes[0] if len(nodes) == 1 else JoinInner(nodes)
        return scope, tree, conjuncts

    def _chain(self, item, scope: _Scope, conjuncts):
        """Returns (tree part, contains_outer). A pure-inner chain comes back
        as a list of leaf var names so it can flatten into a parent."""
        if isinstance(item, TableRef):
            base = None
            if item.quoted:
                base = OPERATOR_TABLE_NAMES.get(item.name, item.name).lower()
            elif scope.first_table is None:
                scope.first_table = item.name
                scope.first_table_alias = item.alias
            var = scope.add(item.alias, self._table_source(item), var_base=base)
            return [var], False
        if isinstance(item, SubqueryRef):
            inner = self.collection(item.select, scope, _head_name(item.alias))
            var = scope.add(item.alias, CollectionSource(inner))
            return [var], False
        left_part, left_outer = self._chain(item.left, scope, conjuncts)
        right_part, right_outer = self._chain(item.right, scope, conjuncts)
        if item.kind == "inner":
            if not _is_on_true(item.on):
                conjuncts.extend(self.bool_conjuncts(item.on, scope))
            if left_outer or right_outer:
                return JoinInner([_as_node(left_part), _as_node(right_part)]), True
            return left_part + right_part, False
        # Outer join: split the ON condition, lifting constants to literal
        # leaves on the opposite side so every conjunct spans the join node.
        left_node = _as_node(left_part)
        right_node = _as_node(right_part)
        left_vars = _leaf_vars(left_node)
        right_vars = _leaf_vars(right_node)
        left_lits, right_lits = [], []
        for cond in _split_and(item.on):
            conjuncts.append(self._on_condition(cond, scope, left_vars, right_vars,
                                                left_lits, right_lits))
        if left_lits:
            left_node = _wrap_lits(left_node, left_lits)
        if right_lits:
            right_node = _wrap_lits(right_node, right_lits)
        return JoinOuter(item.kind, left_node, right_node), True

    def _table_source(self, ref: TableRef):
        if ref.quoted:
            return ExternalSource(OPERATOR_TABLE_NAMES.get(ref.name, ref.name))
        return RelationSource(ref.name)

    def _on_condition(self, cond, scope, left_vars, right_vars, left_lits, right_lits):
        if not isinstance(cond, SqlCompare):
            raise UnsupportedSql("outer-join ON condition that is not a comparison")
        if _has_aggregate(cond.left) or _has_aggregate(cond.right):
            raise UnsupportedSql("aggregate outside SELECT or HAVING")
        sides = [cond.left, cond.right]
        used = {scope.resolve(c.table) for s in sides for c in _columns(s)}
        on_left = bool(used & left_vars)
        on_right = bool(used & right_vars)
        if on_left and on_right:
            return Atom(Compare(cond.op, self.term(cond.left, scope),
                                self.term(cond.right, scope)))
        lit_slots = [i for i, s in enumerate(sides) if isinstance(s, SqlLit)]
        if len(lit_slots) == 1 and (on_left or on_right):
            i = lit_slots[0]
            var = self.fresh_literal_var()
            leaf = LiteralLeaf(sides[i].value, var)
            (right_lits if on_left else left_lits).append(leaf)
            terms = [None, None]
            terms[i] = Attr(var, "val")
            terms[1 - i] = self.term(sides[1 - i], scope)
            return Atom(Compare(cond.op, terms[0], terms[1]))
        raise UnsupportedSql("outer-join ON condition touching only one side")

    # --- expressions ---

    def term(self, e, scope: _Scope):
        if isinstance(e, SqlColumn):
            return Attr(scope.resolve(e.table), e.name)
        if isinstance(e, SqlLit):
            return Constant(e.value)
        if isinstance(e, SqlArith):
            return Arith(e.op, self.term(e.left, scope), self.term(e.right, scope))
        if isinstance(e, SqlAgg):
            return Aggregate(e.fn, self.agg_arg(e, scope))
        if isinstance(e, SqlScalar):
            raise UnsupportedSql("scalar subquery in this position")
        raise UnsupportedSql(f"term {type(e).__name__}")

    def agg_arg(self, agg: SqlAgg, scope: _Scope):
        if agg.arg != "*":
            return self.term(agg.arg, scope)
        table = scope.first_table
        if table is None or not self.schemas.get(table):
            raise UnsupportedSql("COUNT(*) without schema information")
        # count(*) counts rows; the stand-in column may hold nulls, which
        # count() would drop. Documented as a caveat of the translation.
        return Attr(scope.resolve(scope.first_table_alias), self.schemas[table][0])

    def bool_conjuncts(self, e, scope: _Scope) -> list:
        if e is None or _is_on_true(e):
            return []
        if isinstance(e, SqlAnd):
            out = []
            for c in e.children:
                out.extend(self.bool_conjuncts(c, scope))
            return out
        return [self.formula(e, scope)]

    def formula(self, e, scope: _Scope):
        if isinstance(e, SqlAnd):
            return _and(self.bool_conjuncts(e, scope))
        if isinstance(e, SqlOr):
            return Or([self.formula(c, scope) for c in e.children])
        if isinstance(e, SqlNot):
            return Not(self.formula(e.child, scope))
        if isinstance(e, SqlExists):
            return self.exists_formula(e, scope)
        if isinstance(e, SqlIn):
            return self.membership(e, scope)
        if isinstance(e, SqlIsNull):
            if _has_aggregate(e.term):
                raise UnsupportedSql("aggregate outside SELECT or HAVING")
            return Atom(IsNull(self.term(e.term, scope), e.negated))
        if isinstance(e, SqlCompare):
            return self.comparison(e, scope)
        if _is_on_true(e):
            return TrueLit()
        if isinstance(e, SqlAgg):
            raise UnsupportedSql("aggregate outside SELECT or HAVING")
        raise UnsupportedSql(f"predicate {type(e).__name__}")

    def comparison(self, e: SqlCompare, scope: _Scope):
        scalar_sides = [isinstance(s, SqlScalar) for s in (e.left, e.right)]
        if all(scalar_sides):
            raise UnsupportedSql("comparison between two scalar subqueries")
        if not any(scalar_sides):
            if _has_aggregate(e.left) or _has_aggregate(e.right):
                raise UnsupportedSql("aggregate outside SELECT or HAVING")
            return Atom(Compare(e.op, self.term(e.left, scope),
                                self.term(e.right, scope)))
        # A scalar subquery compared in WHERE becomes a quantified scope whose
        # body carries the comparison against the subquery's output term.
        sub = e.left if scalar_sides[0] else e.right
        other = e.right if scalar_sides[0] else e.left
        return self.scalar_where(sub.sub, e.op, other, scalar_left=scalar_sides[0],
                                 scope=scope)

    def scalar_where(self, sub: SqlSelect, op, other, scalar_left, scope: _Scope):
        if sub.group_by or sub.having or sub.distinct or sub.sentence:
            raise UnsupportedSql("scalar subquery in WHERE with grouping")
        if len(sub.items) != 1:
            raise UnsupportedSql("scalar subquery selecting several columns")
        inner_scope, joins, on_conjuncts = self.build_scope(sub, scope)
        conjuncts = self.bool_conjuncts(sub.where, inner_scope) + on_conjuncts
        out_term = self.term(sub.items[0].expr, inner_scope)
        other_term = self.term(other, scope)
        sides = (out_term, other_term) if scalar_left else (other_term, out_term)
        conjuncts.append(Atom(Compare(op, *sides)))
        grouping = GroupingOp([]) if _has_aggregate(sub.items[0].expr) else None
        return Quantified("exists", inner_scope.bindings, grouping, joins,
                          _and(conjuncts))

    def membership(self, e: SqlIn, scope: _Scope):
        sub = e.sub
        if sub.group_by or sub.having or sub.sentence or len(sub.items) != 1:
            raise UnsupportedSql("IN subquery with grouping or several columns")
        inner_scope, joins, on_conjuncts = self.build_scope(sub, scope)
        conjuncts = self.bool_conjuncts(sub.where, inner_scope) + on_conjuncts
        member = self.term(sub.items[0].expr, inner_scope)
        outer = self.term(e.term, scope)
        grouping = GroupingOp([]) if _has_aggregate(sub.items[0].expr) else None
        if not e.negated:
            conjuncts.append(Atom(Compare("=", member, outer)))
            return Quantified("exists", inner_scope.bindings, grouping, joins,
                              _and(conjuncts))
        # NOT IN keeps its three-valued surprise: a null on either side makes
        # the membership test succeed, emptying the answer.
        conjuncts.append(Or([Atom(Compare("=", member, outer)),
                             Atom(IsNull(member, False)),
                             Atom(IsNull(outer, False))]))
        return Quantified("notExists", inner_scope.bindings, grouping, joins,
                          _and(conjuncts))

    def exists_formula(self, e: SqlExists, scope: Optional[_Scope]):
        sub = e.sub
        if sub.group_by or sub.having or sub.sentence:
            raise UnsupportedSql("EXISTS subquery with grouping")
        inner_scope, joins, on_conjuncts = self.build_scope(sub, scope)
        conjuncts = self.bool_conjuncts(sub.where, inner_scope) + on_conjuncts
        polarity = "notExists" if e.negated else "exists"
        return Quantified(polarity, inner_scope.bindings, None, joins,
                          _and(conjuncts))

    # --- SELECT bodies ---

    def collection(self, sel: SqlSelect, parent: Optional[_Scope],
                   head_name: str) -> CollectionExpr:
        if sel.sentence is not None:
            raise UnsupportedSql("EXISTS sentence used as a table")
        if sel.having is not None:
            return self.grouped_with_selection(sel, parent, head_name)
        scope, joins, on_conjuncts = self.build_scope(sel, parent)
        items = self._named_items(sel)
        any_aggregate = any(_has_aggregate(e) for _, e in items)

        assignments = []
        for name, e in items:
            if isinstance(e, SqlScalar):
                if joins is not None:
                    raise UnsupportedSql("scalar select item together with an "
                                         "outer join")
                var = self._lateral_binding(e.sub, scope, name)
                term = Attr(var, self._sole_output_name(e.sub))
            else:
                term = self.term(e, scope)
            assignments.append(Atom(Compare("=", Attr(head_name, name), term)))
        where_conjuncts = self.bool_conjuncts(sel.where, scope)

        grouping = None
        if sel.group_by:
            grouping = GroupingOp([self.term(c, scope) for c in sel.group_by])
        elif any_aggregate:
            grouping = GroupingOp([])
        elif sel.distinct:
            grouping = GroupingOp([a.predicate.right for a in assignments])

        body = _and(assignments + where_conjuncts + on_conjuncts)
        q = Quantified("exists", scope.bindings, grouping, joins, body)
        return CollectionExpr(HeadSpec(head_name, [n for n, _ in items]), q)

    def grouped_with_selection(self, sel: SqlSelect, parent, head_name):
        """GROUP BY + HAVING: an inner grouped collection computes keys and
        aggregates; the outer scope selects and filters."""
        inner_scope, joins, on_conjuncts = self.build_scope(sel, parent)
        inner_head = "X" if head_name != "X" else "X0"
        key_items = [(c.name, self.term(c, inner_scope)) for c in sel.group_by]
        agg_items = []  # (attr name, Aggregate term, signature)
        taken = {n for n, _ in key_items}

        def add_aggregate(e: SqlAgg, alias):
            sig = _agg_signature(e)
            for name, _, existing in agg_items:
                if existing == sig:
                    return name
            base = alias or _AGG_NAMES[e.fn]
            name, k = base, 1
            while name in taken:
                k += 1
                name = f"{base}_{k}"
            taken.add(name)
            agg_items.append((name, Aggregate(e.fn, self.agg_arg(e, inner_scope)), sig))
            return name

        out_names = []  # (select head name, inner attribute it reads)
        for item in sel.items:
            e = item.expr
            if isinstance(e, SqlAgg):
                inner_attr = add_aggregate(e, item.alias)
                out_names.append((item.alias or inner_attr, inner_attr))
            elif isinstance(e, SqlColumn):
                matches = [n for n, t in key_items
                           if isinstance(t, Attr)
                           and t.variable == inner_scope.resolve(e.table)
                           and t.attribute == e.name]
                if not matches:
                    raise UnsupportedSql(f"selected column {e.table}.{e.name} "
                                         "is not a grouping key")
                out_names.append((item.alias or e.name, matches[0]))
            else:
                raise UnsupportedSql("HAVING query selecting an expression")

        having = _replace_aggs(sel.having, add_aggregate)

        inner_assigns = [Atom(Compare("=", Attr(inner_head, n), t))
                         for n, t in key_items]
        inner_assigns += [Atom(Compare("=", Attr(inner_head, n), t))
                          for n, t, _ in agg_items]
        inner_body = _and(inner_assigns
                          + self.bool_conjuncts(sel.where, inner_scope)
                          + on_conjuncts)
        inner_q = Quantified("exists", inner_scope.bindings,
                             GroupingOp([t for _, t in key_items]), joins,
                             inner_body)
        inner_attrs = [n for n, _ in key_items] + [n for n, _, _ in agg_items]
        inner = CollectionExpr(HeadSpec(inner_head, inner_attrs), inner_q)

        outer_scope = _Scope(self, parent)
        x = outer_scope.add("__sel", CollectionSource(inner), var_base="x")
        # In HAVING, every grouping-key column resolves to the derived table,
        # whose attribute names were taken from those very columns.
        having_scope = _Scope(self, parent)
        having_scope.aliases = {"__sel": x, **{c.table: x for c in sel.group_by}}
        having_scope.bindings = outer_scope.bindings

        assignments = [Atom(Compare("=", Attr(head_name, out), Attr(x, inner_attr)))
                       for out, inner_attr in out_names]
        having_conjuncts = self.bool_conjuncts(having, having_scope)
        grouping = None
        if sel.distinct:
            grouping = GroupingOp([a.predicate.right for a in assignments])
        body = _and(assignments + having_conjuncts)
        q = Quantified("exists", outer_scope.bindings, grouping, None, body)
        return CollectionExpr(HeadSpec(head_name, [n for n, _ in out_names]), q)

    def _lateral_binding(self, sub: SqlSelect, scope: _Scope, name_hint) -> str:
        inner = self.collection(sub, scope, "X")
        return scope.add(f"__scalar_{name_hint}", CollectionSource(inner),
                         var_base="x")

    def _sole_output_name(self, sub: SqlSelect) -> str:
        items = self._named_items(sub)
        if len(items) != 1:
            raise UnsupportedSql("scalar subquery selecting several columns")
        return items[0][0]

    def _named_items(self, sel: SqlSelect) -> list:
        """[(head attribute name, expression)] with synthesized names."""
        out = []
        used = set()
        for item in sel.items:
            e = item.expr
            if item.alias:
                base = item.alias
            elif isinstance(e, SqlColumn):
                base = e.name
            elif isinstance(e, SqlAgg):
                base = _AGG_NAMES[e.fn]
            elif isinstance(e, SqlScalar):
                base = self._sole_output_name(e.sub)
            elif isinstance(e, SqlLit):
                raise UnsupportedSql("constant select item outside EXISTS")
            else:
                base = "expr"
            name, k = base, 1
            while name in used:
                k += 1
                name = f"{base}_{k}"
            used.add(name)
            out.append((name, e))
        return out


# --- small helpers ---

def _head_name(alias: str) -> str:
    name = "".join(ch for ch in alias if ch.isalnum() or ch == "_").lstrip("_") or "X"
    return name[0].upper() + name[1:]


def _is_on_true(e) -> bool:
    return isinstance(e, SqlLit) and e.value is TRUE


def _split_and(e) -> list:
    if isinstance(e, SqlAnd):
        out = []
        for c in e.children:
            out.extend(_split_and(c))
        return out
    return [e]


def _columns(e) -> list:
    if isinstance(e, SqlColumn):
        return [e]
    if isinstance(e, SqlArith):
        return _columns(e.left) + _columns(e.right)
    if isinstance(e, SqlAgg) and e.arg != "*":
        return _columns(e.arg)
    return []


def _has_aggregate(e) -> bool:
    if isinstance(e, SqlAgg):
        return True
    if isinstance(e, SqlArith):
        return _has_aggregate(e.left) or _has_aggregate(e.right)
    return False


def _replace_aggs(e, add_aggregate):
    """Rewrite aggregates in a HAVING expression into column reads of the
    derived table (registering them as inner outputs as a side effect)."""
    if e is None:
        return None
    if isinstance(e, SqlAgg):
        return SqlColumn("__sel", add_aggregate(e, None))
    if isinstance(e, SqlAnd):
        return SqlAnd([_replace_aggs(c, add_aggregate) for c in e.children])
    if isinstance(e, SqlOr):
        return SqlOr([_replace_aggs(c, add_aggregate) for c in e.children])
    if isinstance(e, SqlNot):
        return SqlNot(_replace_aggs(e.child, add_aggregate))
    if isinstance(e, SqlCompare):
        return SqlCompare(e.op, _replace_aggs(e.left, add_aggregate),
                          _replace_aggs(e.right, add_aggregate))
    if isinstance(e, SqlIsNull):
        return SqlIsNull(_replace_aggs(e.term, add_aggregate), e.negated)
    if isinstance(e, (SqlColumn, SqlLit)):
        return e
    raise UnsupportedSql(f"HAVING over {type(e).__name__}")


def _as_node(part):
    if isinstance(part, list):
        leaves = [JoinLeaf(v) for v in part]
        return leaves[0] if len(leaves) == 1 else JoinInner(leaves)
    return part


def _leaf_vars(node) -> set:
    if isinstance(node, (JoinLeaf, LiteralLeaf)):
        return {node.var}
    if isinstance(node, JoinInner):
        return set().union(*(_leaf_vars(c) for c in node.children))
    return _leaf_vars(node.left) | _leaf_vars(node.right)


def _wrap_lits(node, lits):
    if isinstance(node, JoinInner):
        return JoinInner(lits + list(node.children))
    return JoinInner(lits + [node])


def _and(conjuncts: list):
    if not conjuncts:
        return TrueLit()
    if len(conjuncts) == 1:
        return conjuncts[0]
    return And(conjuncts)


def _agg_signature(e: SqlAgg) -> str:
    def sig(x):
        if x == "*":
            return "*"
        if isinstance(x, SqlColumn):
            return f"{x.table}.{x.name}"
        if isinstance(x, SqlLit):
            return repr(x.value)
        if isinstance(x, SqlArith):
            return f"({sig(x.left)}{x.op}{sig(x.right)})"
        raise UnsupportedSql("aggregate over this expression")

    return f"{e.fn}({sig(e.arg)})"


def translate_sql(ast: SqlAst, schemas=None) -> Program:
    """Program for one parsed statement. `schemas` (name -> attribute list)
    is only needed to resolve COUNT(*)."""
    tr = _Translator(schemas)
    if ast.sentence is not None:
        main = tr.exists_formula(ast.sentence, None)
        return Program([], main)
    return Program([], tr.collection(ast, None, "Q"))


def translation_warnings(program: Program) -> list:
    """Semantic caveats worth surfacing after translation.

    Grouping over an outer join is flagged because it fuses duplicate
    preserved-side rows into one group, which changes results under bag
    semantics relative to the correlated per-row aggregate it is commonly
    meant to replace."""
    out = []
    for node in walk(program):
        if isinstance(node, Quantified) and node.grouping is not None \
                and node.joins is not None \
                and any(isinstance(j, JoinOuter) for j in walk(node.joins)):
            out.append("W_OUTER_JOIN_GROUPING: grouping over an outer join "
                       "merges duplicate preserved-side rows into one group; "
                       "a correlated aggregate keeps them separate under bag "
                       "semantics")
    return out


def sql_roundtrip_eval(text: str, db, conventions, registry=None, schemas=None):
    """Parse, translate, link, and evaluate in one step. Returns a relation
    for queries and a bool for EXISTS sentences."""
    from .binder import check_program
    from .evaluator import EvalError, evaluate

    lp, diags = check_program(translate_sql(parse_sql(text), schemas), registry)
    errors = [d for d in diags if d.severity == "error"]
    if lp is None or errors:
        raise EvalError(errors[0].code, str(errors[0]))
    return evaluate(lp, db, conventions)
