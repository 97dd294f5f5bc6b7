"""Self-contained SMT-LIB 2 solver for quantifier-free linear real
arithmetic, usable as an external solver binary (``amnet-smtlib``).

This is a deliberately independent implementation: its own reader, its
own atom representation, and a Gaussian-elimination plus
Fourier-Motzkin feasibility core with native strict-inequality
tracking.  It shares no code with the package's simplex kernel, so the
two can cross-check each other through the subprocess interface.

Scope: QF_LRA with and/or/not/=>/ite-free boolean structure.  Anything
nonlinear or quantified answers ``unknown``.  Models are printed as
``define-fun`` entries with exact rational values.
"""

from __future__ import annotations

import sys
from fractions import Fraction

_ROW_CAP = 200_000  # Fourier-Motzkin intermediate row guard


class _Unsupported(Exception):
    pass


# --------------------------------------------------------------- reader

def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            yield text[i + 1 : j]
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i : j + 1]
            i = j + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield text[i:j]
            i = j
    return


def read_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    for tok in _tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise _Unsupported("unbalanced parentheses")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise _Unsupported("unbalanced parentheses")
    return stack[0]


# -------------------------------------------------- terms and formulas

class Lin:
    """Linear expression: coefficient map plus constant."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=Fraction(0)):
        self.coeffs = dict(coeffs or {})
        self.const = const

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Lin(out, self.const + other.const)

    def __sub__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) - v
        return Lin(out, self.const - other.const)

    def scaled(self, factor: Fraction):
        return Lin({k: v * factor for k, v in self.coeffs.items()}, self.const * factor)

    def is_const(self) -> bool:
        return not any(v != 0 for v in self.coeffs.values())


def _num(tok: str) -> Fraction | None:
    try:
        return Fraction(tok)
    except ValueError:
        return None


class Problem:
    def __init__(self):
        self.vars: list[str] = []
        self.assertions: list = []
        self.status: str | None = None
        self.model: dict[str, Fraction] = {}
        self.out: list[str] = []

    # term -> Lin
    def term(self, node) -> Lin:
        if isinstance(node, str):
            v = _num(node)
            if v is not None:
                return Lin(const=v)
            if node in self.vars:
                return Lin({node: Fraction(1)})
            raise _Unsupported(f"unknown symbol {node}")
        head = node[0]
        args = node[1:]
        if head == "-" and len(args) == 1:
            return self.term(args[0]).scaled(Fraction(-1))
        if head == "-":
            acc = self.term(args[0])
            for a in args[1:]:
                acc = acc - self.term(a)
            return acc
        if head == "+":
            acc = Lin()
            for a in args:
                acc = acc + self.term(a)
            return acc
        if head == "*":
            acc = Lin(const=Fraction(1))
            for a in args:
                t = self.term(a)
                if acc.is_const():
                    acc = t.scaled(acc.const)
                elif t.is_const():
                    acc = acc.scaled(t.const)
                else:
                    raise _Unsupported("nonlinear product")
            return acc
        if head == "/" and len(args) == 2:
            denom = self.term(args[1])
            if not denom.is_const() or denom.const == 0:
                raise _Unsupported("division by non-constant")
            return self.term(args[0]).scaled(Fraction(1) / denom.const)
        if head == "to_real" and len(args) == 1:
            return self.term(args[0])
        raise _Unsupported(f"unsupported term {head}")

    # formula tree: ("atom", Lin, rel) with rel in {"<=", "<", "="};
    # ("and"/"or", [children]); ("not", child)
    def formula(self, node):
        if isinstance(node, str):
            if node == "true":
                return ("and", [])
            if node == "false":
                return ("or", [])
            raise _Unsupported(f"boolean symbol {node}")
        head = node[0]
        args = node[1:]
        if head in ("and", "or"):
            return (head, [self.formula(a) for a in args])
        if head == "not" and len(args) == 1:
            return ("not", self.formula(args[0]))
        if head == "=>" and len(args) == 2:
            return ("or", [("not", self.formula(args[0])), self.formula(args[1])])
        if head in ("<=", "<", ">=", ">", "="):
            if len(args) != 2:
                raise _Unsupported(f"{head} wants 2 arguments")
            lhs = self.term(args[0]) - self.term(args[1])
            if head == "<=":
                return ("atom", lhs, "<=")
            if head == "<":
                return ("atom", lhs, "<")
            if head == ">=":
                return ("atom", lhs.scaled(Fraction(-1)), "<=")
            if head == ">":
                return ("atom", lhs.scaled(Fraction(-1)), "<")
            return ("atom", lhs, "=")
        if head in ("forall", "exists"):
            raise _Unsupported("quantified assertion")
        raise _Unsupported(f"unsupported connective {head}")

    def run(self, commands) -> None:
        for cmd in commands:
            if not isinstance(cmd, list) or not cmd:
                continue
            head = cmd[0]
            if head in ("set-option", "set-info", "set-logic", "push", "pop", "exit"):
                continue
            if head == "declare-fun" and len(cmd) == 4 and cmd[2] == []:
                self.vars.append(cmd[1])
            elif head == "declare-const" and len(cmd) == 3:
                self.vars.append(cmd[1])
            elif head == "assert":
                try:
                    self.assertions.append(self.formula(cmd[1]))
                except _Unsupported:
                    self.assertions.append(("unknown",))
            elif head == "check-sat":
                self.check()
            elif head == "get-model":
                self.print_model()

    def check(self) -> None:
        if any(a[0] == "unknown" for a in self.assertions):
            self.status = "unknown"
            self.out.append("unknown")
            return
        try:
            model = _search(self.assertions, self.vars)
        except _Unsupported:
            self.status = "unknown"
            self.out.append("unknown")
            return
        if model is None:
            self.status = "unsat"
            self.out.append("unsat")
        else:
            self.status = "sat"
            self.model = model
            self.out.append("sat")

    def print_model(self) -> None:
        if self.status != "sat":
            self.out.append('(error "no model available")')
            return
        lines = ["("]
        for name in self.vars:
            val = self.model.get(name, Fraction(0))
            lines.append(f"  (define-fun {name} () Real {_rat_sexp(val)})")
        lines.append(")")
        self.out.append("\n".join(lines))


def _rat_sexp(v: Fraction) -> str:
    if v.denominator == 1:
        return f"{v.numerator}.0" if v >= 0 else f"(- {-v.numerator}.0)"
    if v >= 0:
        return f"(/ {v.numerator}.0 {v.denominator}.0)"
    return f"(- (/ {-v.numerator}.0 {v.denominator}.0))"


# ----------------------------------------------- decision procedure

def _neg(f):
    kind = f[0]
    if kind == "atom":
        lhs, rel = f[1], f[2]
        if rel == "<=":
            return ("atom", lhs.scaled(Fraction(-1)), "<")
        if rel == "<":
            return ("atom", lhs.scaled(Fraction(-1)), "<=")
        # equality: split into two strict sides
        return ("or", [("atom", lhs, "<"), ("atom", lhs.scaled(Fraction(-1)), "<")])
    if kind == "and":
        return ("or", [_neg(c) for c in f[1]])
    if kind == "or":
        return ("and", [_neg(c) for c in f[1]])
    if kind == "not":
        return f[1]
    raise _Unsupported("negation of unsupported node")


def _search(assertions, names) -> dict[str, Fraction] | None:
    """DPLL-style case split; leaves decided by Gauss + Fourier-Motzkin.

    Assignments discovered from single-variable equalities propagate
    eagerly, so most guard atoms decide syntactically and disjunctions
    split complementarily (child k is tried with children 0..k-1
    negated), which keeps the branch count at the true case count.
    """

    def substituted(lin: Lin, known) -> Lin:
        if not any(v in known and c != 0 for v, c in lin.coeffs.items()):
            return lin
        coeffs = {}
        const = lin.const
        for v, c in lin.coeffs.items():
            if c == 0:
                continue
            if v in known:
                const += c * known[v]
            else:
                coeffs[v] = c
        return Lin(coeffs, const)

    def decide(lin: Lin, rel: str):
        # -> True / False / ("assign", var, val) / residual Lin
        if lin.is_const():
            if rel == "<=":
                return lin.const <= 0
            if rel == "<":
                return lin.const < 0
            return lin.const == 0
        if rel == "=" and len([c for c in lin.coeffs.values() if c != 0]) == 1:
            var, coeff = next((v, c) for v, c in lin.coeffs.items() if c != 0)
            return ("assign", var, -lin.const / coeff)
        return lin

    def settle(lin: Lin, rel: str, atoms, known) -> bool:
        queue = [(lin, rel)]
        while queue:
            cur, crel = queue.pop()
            got = decide(substituted(cur, known), crel)
            if got is True:
                continue
            if got is False:
                return False
            if isinstance(got, tuple):
                _, var, val = got
                known[var] = val
                rest = []
                for alin, arel in atoms:
                    if alin.coeffs.get(var):
                        queue.append((alin, arel))
                    else:
                        rest.append((alin, arel))
                atoms[:] = rest
                continue
            atoms.append((got, crel))
        return True

    def formula_status(f, known):
        """True/False when every atom involved is decided, else None."""
        kind = f[0]
        if kind == "atom":
            got = decide(substituted(f[1], known), f[2])
            return got if isinstance(got, bool) else None
        if kind == "and":
            out = True
            for c in f[1]:
                s = formula_status(c, known)
                if s is False:
                    return False
                if s is None:
                    out = None
            return out
        if kind == "or":
            out = False
            for c in f[1]:
                s = formula_status(c, known)
                if s is True:
                    return True
                if s is None:
                    out = None
            return out
        if kind == "not":
            s = formula_status(f[1], known)
            return None if s is None else not s
        return None

    def go(pending, atoms, known):
        while pending:
            f = pending.pop()
            kind = f[0]
            if kind == "atom":
                if not settle(f[1], f[2], atoms, known):
                    return None
            elif kind == "and":
                pending.extend(reversed(f[1]))
            elif kind == "not":
                pending.append(_neg(f[1]))
            elif kind == "or":
                live = []
                satisfied = False
                for child in f[1]:
                    s = formula_status(child, known)
                    if s is True:
                        satisfied = True
                        break
                    if s is None:
                        live.append(child)
                if satisfied:
                    continue
                if not live:
                    return None
                if len(live) == 1:
                    pending.append(live[0])
                    continue
                # cut the whole subtree when the accumulated atoms are
                # already infeasible
                try:
                    if atoms and _lra_feasible(atoms, ()) is None:
                        return None
                except _Unsupported:
                    pass
                negated = []
                for k, child in enumerate(live):
                    branch = pending + negated + [child]
                    found = go(branch, list(atoms), dict(known))
                    if found is not None:
                        return found
                    negated = negated + [_neg(child)]
                return None
            else:
                raise _Unsupported(f"node {kind}")
        model = _lra_feasible(atoms, names)
        if model is None:
            return None
        model.update(known)
        return model

    def weight(f):
        # atoms first, then small atom-only disjunctions (strong splits),
        # then everything else; pruning bites earliest this way
        if f[0] == "atom":
            return 0
        if f[0] == "or" and all(c[0] == "atom" for c in f[1]):
            return 1
        return 2

    ordered = sorted(assertions, key=weight)
    return go(list(reversed(ordered)), [], {})


def _lra_feasible(atoms, names) -> dict[str, Fraction] | None:
    """Exact feasibility of a conjunction of linear atoms.

    Equalities go out by substitution; remaining variables fall to
    Fourier-Motzkin elimination with strictness carried through sums.
    A witness comes back by assigning eliminated variables in reverse.
    """
    eqs = []  # list of (var, Lin rhs) substitutions, applied in order
    ineqs = []  # (Lin, strict) meaning lin <= 0 or lin < 0

    def substitute(lin: Lin, var: str, repl: Lin) -> Lin:
        c = lin.coeffs.get(var)
        if not c:
            return lin
        out = Lin(dict(lin.coeffs), lin.const)
        del out.coeffs[var]
        return out + repl.scaled(c)

    todo_eq = []
    for lin, rel in atoms:
        if rel == "=":
            todo_eq.append(lin)
        else:
            ineqs.append((lin, rel == "<"))

    while todo_eq:
        lin = todo_eq.pop()
        for var, repl in eqs:
            lin = substitute(lin, var, repl)
        pivot = next(
            (v for v in sorted(lin.coeffs) if lin.coeffs[v] != 0), None
        )
        if pivot is None:
            if lin.const != 0:
                return None
            continue
        coeff = lin.coeffs[pivot]
        rhs = Lin(
            {k: -v / coeff for k, v in lin.coeffs.items() if k != pivot},
            -lin.const / coeff,
        )
        eqs.append((pivot, rhs))
        todo_eq = [substitute(t, pivot, rhs) for t in todo_eq]
        ineqs = [(substitute(t, pivot, rhs), s) for t, s in ineqs]

    # Fourier-Motzkin on the remaining inequalities; eliminate the
    # variable with the fewest lower-times-upper pairings first
    elim_stack = []  # (var, lowers, uppers) for witness reconstruction
    rows = ineqs
    while True:
        counts: dict[str, list[int]] = {}
        for lin, _ in rows:
            for v, c in lin.coeffs.items():
                if c != 0:
                    lo_hi = counts.setdefault(v, [0, 0])
                    lo_hi[0 if c < 0 else 1] += 1
        if not counts:
            break
        var = min(counts, key=lambda v: (counts[v][0] * counts[v][1], v))
        lowers, uppers, rest = [], [], []
        for lin, strict in rows:
            c = lin.coeffs.get(var, Fraction(0))
            if c == 0:
                rest.append((lin, strict))
            else:
                bound = Lin(
                    {k: -v / c for k, v in lin.coeffs.items() if k != var},
                    -lin.const / c,
                )
                if c > 0:
                    uppers.append((bound, strict))  # var <= bound
                else:
                    lowers.append((bound, strict))  # var >= bound
        new_rows = list(rest)
        for lo, lo_s in lowers:
            for hi, hi_s in uppers:
                new_rows.append((lo - hi, lo_s or hi_s))  # lo <= hi
        if len(new_rows) > _ROW_CAP:
            raise _Unsupported("Fourier-Motzkin row explosion")
        seen = {}
        dedup = []
        for lin, strict in new_rows:
            key = (tuple(sorted((k, v) for k, v in lin.coeffs.items() if v != 0)), lin.const)
            prev = seen.get(key)
            if prev is None:
                seen[key] = strict
                dedup.append((lin, strict))
            elif strict and not prev:
                seen[key] = True
                dedup.append((lin, strict))
        rows = dedup
        elim_stack.append((var, lowers, uppers))

    for lin, strict in rows:
        if lin.is_const():
            if strict and not lin.const < 0:
                return None
            if not strict and not lin.const <= 0:
                return None
        else:  # pragma: no cover - eliminated above
            raise _Unsupported("leftover variable after elimination")

    # witness: walk eliminations backwards, then equalities backwards;
    # variables constrained by nothing default to zero
    model: dict[str, Fraction] = {}

    def lin_value(lin: Lin) -> Fraction:
        return sum(
            (c * model.setdefault(v, Fraction(0)) for v, c in lin.coeffs.items() if c != 0),
            lin.const,
        )

    for var, lowers, uppers in reversed(elim_stack):
        lo_vals = [(lin_value(b), s) for b, s in lowers]
        hi_vals = [(lin_value(b), s) for b, s in uppers]
        lo = max((v for v, _ in lo_vals), default=None)
        hi = min((v for v, _ in hi_vals), default=None)
        if lo is None and hi is None:
            model[var] = Fraction(0)
        elif lo is None:
            model[var] = hi - 1
        elif hi is None:
            model[var] = lo + 1
        elif lo == hi:
            model[var] = lo
        else:
            model[var] = (lo + hi) / 2
    for var, rhs in reversed(eqs):
        model[var] = lin_value(rhs)
    for name in names:
        model.setdefault(name, Fraction(0))
    return model


def solve_text(text: str) -> str:
    problem = Problem()
    try:
        commands = read_sexprs(text)
    except _Unsupported:
        return "unknown\n"
    problem.run(commands)
    return "\n".join(problem.out) + "\n"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: amnet-smtlib <file.smt2|->", file=sys.stderr)
        return 3
    if argv[0] == "-":
        text = sys.stdin.read()
    else:
        with open(argv[0], "r", encoding="utf-8") as handle:
            text = handle.read()
    sys.stdout.write(solve_text(text))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
