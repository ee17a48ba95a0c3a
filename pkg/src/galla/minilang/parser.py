"""Recursive-descent parser from MiniLang source to a pre-order UAST node list.

Grammar (indentation-sensitive, a subset of Python's surface syntax)::

    program    := (NEWLINE | stmt)*
    stmt       := funcdef | if | while | for | simple NEWLINE
    funcdef    := 'def' NAME '(' [NAME (',' NAME)*] ')' ':' suite      # top level only
    if         := 'if' expr ':' suite ['else' ':' suite]
    while      := 'while' expr ':' suite
    for        := 'for' NAME 'in' 'range' '(' expr [',' expr] ')' ':' suite
    simple     := 'return' expr | NAME '=' expr | call
    suite      := simple NEWLINE | NEWLINE INDENT stmt+ DEDENT
    expr       := and ('or' and)*
    and        := not ('and' not)*
    not        := 'not' not | cmp
    cmp        := arith [('<' | '==') arith]
    arith      := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | primary
    primary    := NUMBER | 'True' | 'False' | NAME | call | '(' expr ')'
    call       := NAME '(' [expr (',' expr)*] ')'

Function bodies attach their statements directly under FunctionDecl; the
bodies of if/while/for are wrapped in a Block node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import MiniSyntaxError, Token, tokenize
from .uast import ROOT, UastNode


@dataclass
class _Node:
    node_type: str
    begin: int
    end: int
    children: list["_Node"] = field(default_factory=list)
    name: str | None = None
    op: str | None = None
    # Extent including enclosing parentheses, used when this node is an operand.
    outer_begin: int = -1
    outer_end: int = -1

    def __post_init__(self):
        if self.outer_begin < 0:
            self.outer_begin = self.begin
        if self.outer_end < 0:
            self.outer_end = self.end


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0

    # -- token helpers -------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str, tok: Token | None = None) -> MiniSyntaxError:
        tok = tok or self.tok
        return MiniSyntaxError(msg, tok.line, tok.col)

    def check(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.check(kind, text):
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text or kind
            got = self.tok.text or self.tok.kind
            raise self.error(f"expected {want!r}, got {got!r}")
        return t

    # -- statements ----------------------------------------------------
    def program(self) -> _Node:
        stmts: list[_Node] = []
        while not self.check("EOF"):
            if self.accept("NEWLINE"):
                continue
            if self.check("INDENT"):
                raise self.error("unexpected indent")
            stmts.append(self.statement(top_level=True))
        if stmts:
            return _Node("Program", stmts[0].begin, stmts[-1].end, stmts)
        return _Node("Program", 0, 0)

    def statement(self, top_level: bool = False) -> _Node:
        if self.check("KEYWORD", "def"):
            if not top_level:
                raise self.error("function definitions are only allowed at top level")
            return self.funcdef()
        if self.check("KEYWORD", "if"):
            return self.if_stmt()
        if self.check("KEYWORD", "while"):
            return self.while_stmt()
        if self.check("KEYWORD", "for"):
            return self.for_stmt()
        node = self.simple()
        self.expect("NEWLINE")
        return node

    def simple(self) -> _Node:
        start = self.tok
        if self.accept("KEYWORD", "return"):
            value = self.expr()
            return _Node("ReturnStmt", start.begin, value.outer_end, [value])
        if self.check("NAME") and self.tokens[self.pos + 1].kind == "OP" and self.tokens[self.pos + 1].text == "=":
            name = self.expect("NAME")
            self.expect("OP", "=")
            target = _Node("Variable", name.begin, name.end, name=name.text)
            value = self.expr()
            return _Node("AssignStmt", name.begin, value.outer_end, [target, value], name=name.text)
        value = self.expr()
        if value.node_type != "CallExpr" or value.outer_begin != value.begin:
            raise self.error("only calls may be used as statements", start)
        return value

    def suite(self) -> list[_Node]:
        self.expect("OP", ":")
        if self.accept("NEWLINE"):
            self.expect("INDENT")
            body = [self.statement()]
            while not self.accept("DEDENT"):
                if self.check("EOF"):
                    raise self.error("unexpected end of input")
                body.append(self.statement())
            return body
        node = self.simple()
        self.expect("NEWLINE")
        return [node]

    @staticmethod
    def _block(body: list[_Node]) -> _Node:
        return _Node("Block", body[0].begin, body[-1].end, body)

    def funcdef(self) -> _Node:
        start = self.expect("KEYWORD", "def")
        name = self.expect("NAME")
        self.expect("OP", "(")
        params: list[_Node] = []
        if not self.check("OP", ")"):
            while True:
                p = self.expect("NAME")
                if any(q.name == p.text for q in params):
                    raise self.error(f"duplicate parameter {p.text!r}", p)
                params.append(_Node("Parameter", p.begin, p.end, name=p.text))
                if not self.accept("OP", ","):
                    break
        self.expect("OP", ")")
        body = self.suite()
        children = []
        if params:
            children.append(_Node("Parameters", params[0].begin, params[-1].end, params))
        children.extend(body)
        return _Node("FunctionDecl", start.begin, body[-1].end, children, name=name.text)

    def _condition(self) -> _Node:
        cond = self.expr()
        return _Node("ConditionExpr", cond.begin, cond.end, [cond])

    def if_stmt(self) -> _Node:
        start = self.expect("KEYWORD", "if")
        cond = self._condition()
        then = self._block(self.suite())
        children = [cond, then]
        end = then.end
        if self.check("KEYWORD", "else"):
            self.pos += 1
            other = self._block(self.suite())
            children.append(other)
            end = other.end
        return _Node("IfStmt", start.begin, end, children)

    def while_stmt(self) -> _Node:
        start = self.expect("KEYWORD", "while")
        cond = self._condition()
        body = self._block(self.suite())
        return _Node("WhileStmt", start.begin, body.end, [cond, body])

    def for_stmt(self) -> _Node:
        start = self.expect("KEYWORD", "for")
        var = self.expect("NAME")
        self.expect("KEYWORD", "in")
        callee = self.expect("NAME")
        if callee.text != "range":
            raise self.error("for loops iterate over range(...)", callee)
        call = self.call_rest(callee)
        if not 1 <= len(call.children) <= 2:
            raise self.error("range takes one or two arguments", callee)
        body = self._block(self.suite())
        target = _Node("Variable", var.begin, var.end, name=var.text)
        return _Node("ForStmt", start.begin, body.end, [target, call, body], name=var.text)

    # -- expressions ---------------------------------------------------
    def expr(self) -> _Node:
        return self._binary_chain(self.and_expr, ("or",), keyword=True)

    def and_expr(self) -> _Node:
        return self._binary_chain(self.not_expr, ("and",), keyword=True)

    def _binary_chain(self, operand, ops, keyword=False) -> _Node:
        left = operand()
        kind = "KEYWORD" if keyword else "OP"
        while self.tok.kind == kind and self.tok.text in ops:
            op = self.tok.text
            self.pos += 1
            right = operand()
            left = _Node("BinaryExpr", left.outer_begin, right.outer_end, [left, right], op=op)
        return left

    def not_expr(self) -> _Node:
        start = self.accept("KEYWORD", "not")
        if start is not None:
            operand = self.not_expr()
            return _Node("UnaryExpr", start.begin, operand.outer_end, [operand], op="not")
        return self.comparison()

    def comparison(self) -> _Node:
        left = self.arith()
        if self.tok.kind == "OP" and self.tok.text in ("<", "=="):
            op = self.tok.text
            self.pos += 1
            right = self.arith()
            if self.tok.kind == "OP" and self.tok.text in ("<", "=="):
                raise self.error("chained comparisons are not supported")
            return _Node("BinaryExpr", left.outer_begin, right.outer_end, [left, right], op=op)
        return left

    def arith(self) -> _Node:
        return self._binary_chain(self.term, ("+", "-"))

    def term(self) -> _Node:
        return self._binary_chain(self.unary, ("*", "/"))

    def unary(self) -> _Node:
        start = self.accept("OP", "-")
        if start is not None:
            operand = self.unary()
            return _Node("UnaryExpr", start.begin, operand.outer_end, [operand], op="-")
        return self.primary()

    def primary(self) -> _Node:
        t = self.tok
        if t.kind == "NUMBER" or (t.kind == "KEYWORD" and t.text in ("True", "False")):
            self.pos += 1
            return _Node("Literal", t.begin, t.end, name=t.text)
        if t.kind == "NAME":
            self.pos += 1
            if self.check("OP", "("):
                return self.call_rest(t)
            return _Node("Variable", t.begin, t.end, name=t.text)
        if t.kind == "OP" and t.text == "(":
            self.pos += 1
            inner = self.expr()
            close = self.expect("OP", ")")
            inner.outer_begin = t.begin
            inner.outer_end = close.end
            return inner
        raise self.error(f"unexpected {t.text or t.kind!r}")

    def call_rest(self, name: Token) -> _Node:
        self.expect("OP", "(")
        args: list[_Node] = []
        if not self.check("OP", ")"):
            args.append(self.expr())
            while self.accept("OP", ","):
                args.append(self.expr())
        close = self.expect("OP", ")")
        return _Node("CallExpr", name.begin, close.end, args, name=name.text)


def _flatten(root: _Node, byte_offsets: list[int] | None) -> list[UastNode]:
    nodes: list[UastNode] = []

    def conv(pos: int) -> int:
        return pos if byte_offsets is None else byte_offsets[pos]

    stack: list[tuple[_Node, int]] = [(root, ROOT)]
    while stack:
        n, parent = stack.pop()
        idx = len(nodes)
        nodes.append(UastNode(idx, n.node_type, conv(n.begin), conv(n.end), parent, name=n.name, op=n.op))
        if parent != ROOT:
            nodes[parent].children.append(idx)
        for child in reversed(n.children):
            stack.append((child, idx))
    return nodes


def _byte_offsets(source: str) -> list[int] | None:
    if source.isascii():
        return None
    offsets = [0]
    for ch in source:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    return offsets


def parse(source: str) -> list[UastNode]:
    """Parse MiniLang source into a pre-order list of UAST nodes (index 0 is Program).

    Raises MiniSyntaxError (a SyntaxError) on invalid input.
    """
    root = _Parser(source).program()
    return _flatten(root, _byte_offsets(source))
