"""Parser and pretty-printer for the ASCII comprehension syntax.

The surface form is `{ Head(attrs) | formula }` preceded by any number of
`def Name := { ... }` definitions, or a bare Boolean formula (a sentence).
Quantifier scopes list bindings first, then an optional `group(keys)`, then
an optional join tree; the body sits in square brackets:

    { Q(A) | exists r in R, s in S, group(r.A), inner(r, s) [ ... ] }

Keywords are case-insensitive; identifiers are case-sensitive. Comments run
from `--` to end of line. Text literals use single quotes with '' doubling.

`print_arc` is the inverse up to structural equality: parsing its output
yields a tree equal to the input. It refuses the few trees the grammar
cannot spell (terms that would need parentheses, non-terminating decimal
constants); those never come out of the parser itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .alt import (AGGREGATE_FNS, COMPARE_OPS, NULL, FALSE, TRUE, Aggregate, And, Arith, Atom, Attr,
                  Binding, CollectionExpr, CollectionSource, Compare, Constant, Definition,
                  ExternalSource, Formula, GroupingOp, HeadSpec, IsNull, JoinInner, JoinLeaf,
                  JoinOuter, LiteralLeaf, Not, Or, Program, Quantified, RelationSource, SourceSpan,
                  TrueLit, Value, dec_string, dec_value, int_value, text_value)

KEYWORDS = frozenset([
    "def", "exists", "not", "in", "and", "or", "group", "inner", "left", "full",
    "lit", "as", "is", "null", "true", "false", "ext",
])

_PUNCT2 = (":=", "<=", ">=", "<>")
_PUNCT1 = "{}()[]|,.=<>+-*/"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, expected, found: str):
        self.span = span
        self.expected = tuple(sorted(expected))
        self.found = found
        alts = " or ".join(self.expected)
        super().__init__(f"line {span.line + 1}, column {span.column + 1}: expected {alts}, found {found}")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "dec" | "text" | "punct" | "eof"
    text: str
    start: int
    end: int
    line: int
    column: int

    @property
    def keyword(self) -> Optional[str]:
        """Lower-cased text when this identifier spells a keyword."""
        if self.kind == "ident" and self.text.lower() in KEYWORDS:
            return self.text.lower()
        return None

    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end, self.line, self.column)


def tokenize(text: str) -> list:
    toks = []
    i, line, col = 0, 0, 0
    n = len(text)

    def advance(k):
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 0
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        start, sline, scol = i, line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ident", text[i:j], start, j, sline, scol))
            advance(j - i)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n - 1 and text[j] == "." and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                toks.append(Token("dec", text[i:j], start, j, sline, scol))
            else:
                toks.append(Token("int", text[i:j], start, j, sline, scol))
            advance(j - i)
            continue
        if c == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError(SourceSpan(start, n, sline, scol), ["closing '"], "end of input")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(text[j])
                j += 1
            toks.append(Token("text", "".join(buf), start, j, sline, scol))
            advance(j - i)
            continue
        two = text[i:i + 2]
        if two in _PUNCT2:
            toks.append(Token("punct", two, start, i + 2, sline, scol))
            advance(2)
            continue
        if c in _PUNCT1:
            toks.append(Token("punct", c, start, i + 1, sline, scol))
            advance(1)
            continue
        raise ParseError(SourceSpan(start, start + 1, sline, scol), ["a token"], repr(c))
    toks.append(Token("eof", "", n, n, line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    # --- token plumbing ---

    def peek(self, k=0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_kw(self, *kws) -> bool:
        return self.peek().keyword in kws

    def at_punct(self, p) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == p

    def eat_kw(self, kw):
        if not self.at_kw(kw):
            self.fail([f"'{kw}'"])
        return self.next()

    def eat_punct(self, p):
        if not self.at_punct(p):
            self.fail([f"'{p}'"])
        return self.next()

    def eat_name(self) -> Token:
        t = self.peek()
        if t.kind != "ident" or t.keyword is not None:
            self.fail(["a name"])
        return self.next()

    def eat_attr_name(self) -> Token:
        # Attribute positions (after `.`, inside a head) can never start a
        # construct, so keyword spellings like `left` are fine there.
        t = self.peek()
        if t.kind != "ident":
            self.fail(["an attribute name"])
        return self.next()

    def fail(self, expected):
        t = self.peek()
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(t.span(), expected, found)

    def spanned(self, node, start_tok: Token):
        prev = self.toks[self.pos - 1] if self.pos > 0 else start_tok
        node.span = SourceSpan(start_tok.start, prev.end, start_tok.line, start_tok.column)
        return node

    # --- grammar ---

    def program(self) -> Program:
        t0 = self.peek()
        defs = []
        while self.at_kw("def"):
            d0 = self.next()
            name = self.eat_name()
            self.eat_punct(":=")
            coll = self.collection()
            defs.append(self.spanned(Definition(name.text, coll), d0))
        if self.at_punct("{"):
            main = self.collection()
        else:
            main = self.formula()
        if self.peek().kind != "eof":
            self.fail(["end of input"])
        return self.spanned(Program(defs, main), t0)

    def collection(self) -> CollectionExpr:
        t0 = self.eat_punct("{")
        name = self.eat_name()
        self.eat_punct("(")
        attrs = [self.eat_attr_name().text]
        while self.at_punct(","):
            self.next()
            attrs.append(self.eat_attr_name().text)
        self.eat_punct(")")
        if len(set(attrs)) != len(attrs):
            raise ParseError(t0.span(), ["distinct head attributes"], repr(name.text))
        head = self.spanned(HeadSpec(name.text, attrs), name)
        self.eat_punct("|")
        body = self.formula()
        self.eat_punct("}")
        return self.spanned(CollectionExpr(head, body), t0)

    def formula(self) -> Formula:
        t0 = self.peek()
        first = self.and_formula()
        if not self.at_kw("or"):
            return first
        kids = [first]
        while self.at_kw("or"):
            self.next()
            kids.append(self.and_formula())
        return self.spanned(Or(kids), t0)

    def and_formula(self) -> Formula:
        t0 = self.peek()
        first = self.unary_formula()
        if not self.at_kw("and"):
            return first
        kids = [first]
        while self.at_kw("and"):
            self.next()
            kids.append(self.unary_formula())
        return self.spanned(And(kids), t0)

    def unary_formula(self) -> Formula:
        t0 = self.peek()
        if self.at_kw("not"):
            if self.peek(1).keyword == "exists":
                return self.quantified()
            self.next()
            return self.spanned(Not(self.unary_formula()), t0)
        if self.at_kw("exists"):
            return self.quantified()
        if self.at_punct("("):
            self.next()
            f = self.formula()
            self.eat_punct(")")
            return f
        if self.at_kw("true") and not self._starts_predicate_after_literal():
            self.next()
            return self.spanned(TrueLit(), t0)
        return self.spanned(Atom(self.predicate()), t0)

    def _starts_predicate_after_literal(self) -> bool:
        # `true` is almost always the trivial formula; only read it as a bool
        # constant when an operator follows, as in `true = r.flag`.
        t = self.peek(1)
        return t.kind == "punct" and t.text in COMPARE_OPS + ("+", "-", "*", "/")

    def quantified(self) -> Quantified:
        t0 = self.peek()
        polarity = "exists"
        if self.at_kw("not"):
            self.next()
            polarity = "notExists"
        self.eat_kw("exists")
        bindings = [self.binding()]
        grouping = None
        joins = None
        while self.at_punct(","):
            self.next()
            if self.at_kw("group"):
                if grouping is not None or joins is not None:
                    self.fail(["a join tree"])
                grouping = self.grouping()
            elif self.at_kw("inner", "left", "full"):
                if joins is not None:
                    self.fail(["'['"])
                joins = self.jointree()
            else:
                if grouping is not None or joins is not None:
                    self.fail(["'group'", "a join tree"])
                bindings.append(self.binding())
        self.eat_punct("[")
        body = self.formula()
        self.eat_punct("]")
        return self.spanned(Quantified(polarity, bindings, grouping, joins, body), t0)

    def binding(self) -> Binding:
        var = self.eat_name()
        self.eat_kw("in")
        if self.at_punct("{"):
            src = self.spanned(CollectionSource(self.collection()), var)
        elif self.at_kw("ext"):
            self.next()
            src = self.spanned(ExternalSource(self.eat_name().text), var)
        else:
            rel = self.eat_name()
            src = self.spanned(RelationSource(rel.text), rel)
        return self.spanned(Binding(var.text, src), var)

    def grouping(self) -> GroupingOp:
        t0 = self.eat_kw("group")
        self.eat_punct("(")
        keys = []
        if not self.at_punct(")"):
            keys.append(self.attr_ref())
            while self.at_punct(","):
                self.next()
                keys.append(self.attr_ref())
        self.eat_punct(")")
        return self.spanned(GroupingOp(keys), t0)

    def jointree(self):
        t0 = self.peek()
        kind = t0.keyword
        self.next()
        self.eat_punct("(")
        kids = [self.joinleaf()]
        while self.at_punct(","):
            self.next()
            kids.append(self.joinleaf())
        self.eat_punct(")")
        if kind == "inner":
            if len(kids) < 2:
                raise ParseError(t0.span(), ["at least two join children"], str(len(kids)))
            return self.spanned(JoinInner(kids), t0)
        if len(kids) != 2:
            raise ParseError(t0.span(), [f"exactly two children for '{kind}'"], str(len(kids)))
        return self.spanned(JoinOuter(kind, kids[0], kids[1]), t0)

    def joinleaf(self):
        t0 = self.peek()
        if self.at_kw("inner", "left", "full"):
            return self.jointree()
        if self.at_kw("lit"):
            self.next()
            v = self.value_literal()
            self.eat_kw("as")
            var = self.eat_name()
            return self.spanned(LiteralLeaf(v, var.text), t0)
        name = self.eat_name()
        return self.spanned(JoinLeaf(name.text), name)

    def predicate(self):
        t0 = self.peek()
        left = self.term()
        if self.at_kw("is"):
            self.next()
            negated = False
            if self.at_kw("not"):
                self.next()
                negated = True
            self.eat_kw("null")
            return self.spanned(IsNull(left, negated), t0)
        t = self.peek()
        if t.kind == "punct" and t.text in COMPARE_OPS:
            self.next()
            right = self.term()
            return self.spanned(Compare(t.text, left, right), t0)
        self.fail(["a comparison operator", "'is'"])

    # Terms: * and / bind tighter than + and -; the grammar has no
    # parenthesized terms, so nothing to the contrary can be written.

    def term(self):
        t0 = self.peek()
        node = self.mul_term()
        while self.at_punct("+") or self.at_punct("-"):
            op = self.next().text
            node = self.spanned(Arith(op, node, self.mul_term()), t0)
        return node

    def mul_term(self):
        t0 = self.peek()
        node = self.primary_term()
        while self.at_punct("*") or self.at_punct("/"):
            op = self.next().text
            node = self.spanned(Arith(op, node, self.primary_term()), t0)
        return node

    def primary_term(self):
        t0 = self.peek()
        if self.at_punct("-"):
            self.next()
            t = self.peek()
            if t.kind == "int":
                self.next()
                return self.spanned(Constant(int_value(-int(t.text))), t0)
            if t.kind == "dec":
                self.next()
                return self.spanned(Constant(dec_value("-" + t.text)), t0)
            self.fail(["a number"])
        if t0.kind in ("int", "dec", "text") or t0.keyword in ("true", "false", "null"):
            return self.spanned(Constant(self.value_literal()), t0)
        if t0.kind == "ident" and t0.keyword is None:
            if t0.text.lower() in AGGREGATE_FNS and self.peek(1).kind == "punct" and self.peek(1).text == "(":
                fn = self.next().text.lower()
                self.eat_punct("(")
                arg = self.term()
                self.eat_punct(")")
                return self.spanned(Aggregate(fn, arg), t0)
            return self.attr_ref()
        self.fail(["a value", "an attribute reference"])

    def attr_ref(self) -> Attr:
        var = self.eat_name()
        self.eat_punct(".")
        attr = self.eat_attr_name()
        return self.spanned(Attr(var.text, attr.text), var)

    def value_literal(self) -> Value:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return int_value(int(t.text))
        if t.kind == "dec":
            self.next()
            return dec_value(t.text)
        if t.kind == "text":
            self.next()
            return text_value(t.text)
        if t.keyword == "true":
            self.next()
            return TRUE
        if t.keyword == "false":
            self.next()
            return FALSE
        if t.keyword == "null":
            self.next()
            return NULL
        if t.kind == "punct" and t.text == "-":
            self.next()
            t2 = self.peek()
            if t2.kind == "int":
                self.next()
                return int_value(-int(t2.text))
            if t2.kind == "dec":
                self.next()
                return dec_value("-" + t2.text)
            self.fail(["a number"])
        self.fail(["a value"])


def parse_arc(text: str) -> Program:
    """Parse a program: definitions followed by a collection or sentence."""
    return _Parser(text).program()


# ------------------------------------------------------------------
# Printing
# ------------------------------------------------------------------


def _value_text(v: Value) -> str:
    if v.tag == "int":
        return str(v.val)
    if v.tag == "dec":
        s = dec_string(v.val)
        if "/" in s:
            raise ValueError(f"decimal constant {s} has no literal spelling; keep it in JSON form")
        return s if "." in s else s + ".0"
    if v.tag == "text":
        return "'" + v.val.replace("'", "''") + "'"
    if v.tag == "bool":
        return "true" if v.val else "false"
    return "null"


_ARITH_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _term_text(t, parent_prec=0, right_side=False) -> str:
    if isinstance(t, Constant):
        return _value_text(t.value)
    if isinstance(t, Attr):
        return f"{t.variable}.{t.attribute}"
    if isinstance(t, Aggregate):
        return f"{t.fn}({_term_text(t.arg)})"
    if isinstance(t, Arith):
        prec = _ARITH_PREC[t.op]
        if prec < parent_prec or (right_side and prec == parent_prec):
            raise ValueError("term shape needs parentheses the grammar does not have; keep it in JSON form")
        left = _term_text(t.left, prec, False)
        right = _term_text(t.right, prec, True)
        return f"{left} {t.op} {right}"
    raise TypeError(f"not a term: {t!r}")


def _pred_text(p) -> str:
    if isinstance(p, Compare):
        return f"{_term_text(p.left)} {p.op} {_term_text(p.right)}"
    if isinstance(p, IsNull):
        return f"{_term_text(p.term)} is {'not ' if p.negated else ''}null"
    raise TypeError(f"not a predicate: {p!r}")


def _jointree_text(jt) -> str:
    if isinstance(jt, JoinLeaf):
        return jt.var
    if isinstance(jt, LiteralLeaf):
        return f"lit {_value_text(jt.value)} as {jt.var}"
    if isinstance(jt, JoinInner):
        return "inner(" + ", ".join(_jointree_text(c) for c in jt.children) + ")"
    if isinstance(jt, JoinOuter):
        return f"{jt.kind}({_jointree_text(jt.left)}, {_jointree_text(jt.right)})"
    raise TypeError(f"not a join tree: {jt!r}")


def _binding_text(b: Binding) -> str:
    if isinstance(b.source, RelationSource):
        return f"{b.var} in {b.source.name}"
    if isinstance(b.source, ExternalSource):
        return f"{b.var} in ext {b.source.name}"
    return f"{b.var} in {_collection_text(b.source.collection)}"


def _formula_text(f, parent=None) -> str:
    if isinstance(f, Quantified):
        parts = [_binding_text(b) for b in f.bindings]
        if f.grouping is not None:
            parts.append("group(" + ", ".join(_term_text(k) for k in f.grouping.keys) + ")")
        if f.joins is not None:
            parts.append(_jointree_text(f.joins))
        kw = "exists" if f.polarity == "exists" else "not exists"
        return f"{kw} " + ", ".join(parts) + f" [ {_formula_text(f.body)} ]"
    if isinstance(f, And):
        texts = []
        for c in f.children:
            t = _formula_text(c, parent="and")
            if isinstance(c, (And, Or)):
                t = f"({t})"
            texts.append(t)
        return " and ".join(texts)
    if isinstance(f, Or):
        texts = []
        for c in f.children:
            t = _formula_text(c, parent="or")
            if isinstance(c, Or):
                t = f"({t})"
            texts.append(t)
        return " or ".join(texts)
    if isinstance(f, Not):
        # Parenthesize so `not exists` never fuses into a negated quantifier.
        return f"not ({_formula_text(f.child)})"
    if isinstance(f, Atom):
        return _pred_text(f.predicate)
    if isinstance(f, TrueLit):
        return "true"
    raise TypeError(f"not a formula: {f!r}")


def _collection_text(c: CollectionExpr) -> str:
    head = f"{c.head.relation}({', '.join(c.head.attributes)})"
    return f"{{ {head} | {_formula_text(c.body)} }}"


def print_arc(p: Program) -> str:
    """Deterministic text whose reparse is structurally equal to `p`."""
    lines = [f"def {d.name} := {_collection_text(d.collection)}" for d in p.definitions]
    if isinstance(p.main, CollectionExpr):
        lines.append(_collection_text(p.main))
    else:
        lines.append(_formula_text(p.main))
    return "\n".join(lines) + "\n"
