"""Textual network format: s-expression declarations with inline matrices.

A document is a sequence of declarations; arguments may name earlier
declarations or nest anonymous ones inline, mirroring the recursive
way networks compose:

    (input x 1)
    (mux y x (const 0) (affine z [[-1]] [0] x))
    (output y)

Grammar (names in mux/affine/const positions may be omitted for inline
use; affine accepts several children, concatenated):

    doc    := decl+
    decl   := "(" "input" name dim ")"
            | "(" "const" name? vec ")"
            | "(" "affine" name? matrix vec arg+ ")"
            | "(" "mux" name? arg arg arg ")"
            | "(" "output" arg ")"
    arg    := name | decl
    vec    := "[" rational ("," rational)* "]" | rational
    matrix := "[" vec ("," vec)* "]"

Decimal literals parse exactly; serialization is canonical (dense
names, lowest-terms rationals) and parse(serialize(n)) reproduces n.
"""

from __future__ import annotations

from fractions import Fraction

from .core import Affine, Input, Mux, Network, build, const
from .errors import AmnetError, AmnSyntaxError, SemanticError
from .rationals import format_rat, rat

_PUNCT = "()[],"


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, int, int]] = []
        line, col = 1, 1
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "\n":
                line += 1
                col = 1
                i += 1
            elif ch == ";":
                while i < len(text) and text[i] != "\n":
                    i += 1
            elif ch.isspace():
                col += 1
                i += 1
            elif ch in _PUNCT:
                self.toks.append((ch, line, col))
                col += 1
                i += 1
            else:
                j = i
                while j < len(text) and not text[j].isspace() and text[j] not in _PUNCT + ";":
                    j += 1
                self.toks.append((text[i:j], line, col))
                col += j - i
                i = j
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self, expect: str | None = None):
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else ("", 1, 1)
            raise AmnSyntaxError("unexpected end of input", last[1], last[2])
        self.pos += 1
        if expect is not None and tok[0] != expect:
            raise AmnSyntaxError(f"expected {expect!r}, found {tok[0]!r}", tok[1], tok[2])
        return tok


def _is_number(text: str) -> bool:
    try:
        rat(text)
        return True
    except (ValueError, TypeError):
        return False


class _Parser:
    def __init__(self, text: str):
        self.toks = _Tokens(text)
        self.nodes: list = []
        self.names: dict[str, int] = {}
        self.order: list[str] = []
        self.output: int | None = None
        self.anon = 0

    def fresh(self) -> str:
        self.anon += 1
        return f"_t{self.anon}"

    def register(self, name: str | None, node, where) -> int:
        self.nodes.append(node)
        nid = len(self.nodes) - 1
        if name is None:
            name = self.fresh()
        if name in self.names:
            raise SemanticError(f"duplicate name {name!r} (line {where[1]})")
        self.names[name] = nid
        self.order.append(name)
        return nid

    def parse_vec(self) -> tuple[Fraction, ...]:
        tok = self.toks.peek()
        if tok and tok[0] != "[":
            t = self.toks.next()
            if not _is_number(t[0]):
                raise AmnSyntaxError(f"expected a rational, found {t[0]!r}", t[1], t[2])
            return (rat(t[0]),)
        self.toks.next("[")
        vals = []
        while True:
            t = self.toks.next()
            if not _is_number(t[0]):
                raise AmnSyntaxError(f"expected a rational, found {t[0]!r}", t[1], t[2])
            vals.append(rat(t[0]))
            sep = self.toks.next()
            if sep[0] == "]":
                return tuple(vals)
            if sep[0] != ",":
                raise AmnSyntaxError(f"expected ',' or ']', found {sep[0]!r}", sep[1], sep[2])

    def parse_matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        self.toks.next("[")
        rows = []
        while True:
            tok = self.toks.peek()
            if tok is None:
                raise AmnSyntaxError("unterminated matrix", 0, 0)
            if tok[0] == "]":
                self.toks.next()
                return tuple(rows)
            if tok[0] == ",":
                self.toks.next()
                continue
            rows.append(self.parse_vec())

    def parse_arg(self) -> int:
        tok = self.toks.peek()
        if tok is None:
            raise AmnSyntaxError("unexpected end of input", 0, 0)
        if tok[0] == "(":
            return self.parse_decl(top=False)
        t = self.toks.next()
        name = t[0]
        if name not in self.names:
            raise SemanticError(
                f"reference to undeclared node {name!r} (line {t[1]})"
            )
        return self.names[name]

    def _opt_name(self):
        tok = self.toks.peek()
        if tok and tok[0] not in _PUNCT and not _is_number(tok[0]):
            return self.toks.next()[0]
        return None

    def parse_decl(self, top: bool) -> int:
        lparen = self.toks.next("(")
        head = self.toks.next()
        kind = head[0]
        if kind == "input":
            name = self.toks.next()
            dim_tok = self.toks.next()
            try:
                dim = int(dim_tok[0])
            except ValueError:
                raise AmnSyntaxError(
                    f"input dimension must be an integer, found {dim_tok[0]!r}",
                    dim_tok[1], dim_tok[2],
                )
            self.toks.next(")")
            return self.register(name[0], Input(dim), lparen)
        if kind == "const":
            name = self._opt_name()
            vec = self.parse_vec()
            self.toks.next(")")
            return self.register(name, const(vec), lparen)
        if kind == "affine":
            name = self._opt_name()
            mat = self.parse_matrix()
            bias = self.parse_vec()
            children = []
            while True:
                tok = self.toks.peek()
                if tok is None:
                    raise AmnSyntaxError("unterminated affine declaration", head[1], head[2])
                if tok[0] == ")":
                    self.toks.next()
                    break
                children.append(self.parse_arg())
            if not children:
                raise SemanticError(f"affine needs at least one child (line {head[1]})")
            return self.register(name, Affine(mat, bias, tuple(children)), lparen)
        if kind == "mux":
            # (mux name a b g) or (mux a b g): collect items, then decide
            items: list = []  # ("sym", tok) or ("id", nid)
            while True:
                tok = self.toks.peek()
                if tok is None:
                    raise AmnSyntaxError("unterminated mux declaration", head[1], head[2])
                if tok[0] == ")":
                    self.toks.next()
                    break
                if tok[0] == "(":
                    items.append(("id", self.parse_decl(top=False)))
                else:
                    items.append(("sym", self.toks.next()))
            name = None
            if len(items) == 4:
                kind0, first = items[0]
                if kind0 != "sym" or _is_number(first[0]):
                    raise SemanticError(
                        f"a four-argument mux starts with its name (line {head[1]})"
                    )
                name = first[0]
                items = items[1:]
            if len(items) != 3:
                raise SemanticError(
                    f"mux takes exactly three arguments, found {len(items)} (line {head[1]})"
                )
            args = []
            for kind_i, val in items:
                if kind_i == "id":
                    args.append(val)
                else:
                    if val[0] not in self.names:
                        raise SemanticError(
                            f"reference to undeclared node {val[0]!r} (line {val[1]})"
                        )
                    args.append(self.names[val[0]])
            return self.register(name, Mux(args[0], args[1], args[2]), lparen)
        if kind == "output":
            nid = self.parse_arg()
            self.toks.next(")")
            if self.output is not None:
                raise SemanticError(f"multiple output declarations (line {head[1]})")
            self.output = nid
            return nid
        raise AmnSyntaxError(f"unknown declaration {kind!r}", head[1], head[2])

    def run(self) -> Network:
        while self.toks.peek() is not None:
            self.parse_decl(top=True)
        if self.output is None:
            raise SemanticError("document declares no output")
        try:
            return build(self.nodes, self.output)
        except AmnetError as exc:
            raise SemanticError(str(exc)) from exc


def parse_amn(text: str) -> Network:
    """Parse document text into a validated Network."""
    return _Parser(text).run()


def _vec_text(vals) -> str:
    return "[" + ",".join(format_rat(v) for v in vals) + "]"


def serialize_amn(net: Network) -> str:
    """Canonical text: one named declaration per node, in id order."""
    names = {}
    for nid, node in enumerate(net.nodes):
        names[nid] = "x" if isinstance(node, Input) else f"n{nid}"
    lines = []
    for nid, node in enumerate(net.nodes):
        if isinstance(node, Input):
            lines.append(f"(input {names[nid]} {node.dim})")
        elif isinstance(node, Affine):
            if not node.children:
                lines.append(f"(const {names[nid]} {_vec_text(node.b)})")
            else:
                mat = "[" + ",".join(_vec_text(row) for row in node.a) + "]"
                kids = " ".join(names[c] for c in node.children)
                lines.append(f"(affine {names[nid]} {mat} {_vec_text(node.b)} {kids})")
        else:
            lines.append(
                f"(mux {names[nid]} {names[node.first]} {names[node.second]} {names[node.guard]})"
            )
    lines.append(f"(output {names[net.output]})")
    return "\n".join(lines) + "\n"


def load_amn(path: str) -> Network:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_amn(handle.read())


def parse_vector(text: str) -> tuple[Fraction, ...]:
    """Comma-separated rationals, e.g. "1,0.5,-2/3"."""
    return tuple(rat(p.strip()) for p in text.split(",") if p.strip())


def load_vector_csv(path: str) -> tuple[Fraction, ...]:
    """One vector from a CSV file; a non-numeric first row is a header."""
    rows = _csv_rows(path)
    if len(rows) == 1:
        return rows[0]
    return tuple(v for row in rows for v in row)


def load_matrix_csv(path: str) -> tuple[tuple[Fraction, ...], ...]:
    return _csv_rows(path)


def _csv_rows(path: str):
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for ln in handle:
            ln = ln.strip()
            if not ln:
                continue
            cells = [c.strip() for c in ln.split(",")]
            try:
                rows.append(tuple(rat(c) for c in cells))
            except (ValueError, TypeError):
                if rows:
                    raise
                # header row: skip
    return tuple(rows)
