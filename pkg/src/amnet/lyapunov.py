"""Counterexample-guided synthesis of max-of-affine Lyapunov functions,
and lambda-contractiveness checking for saturated linear feedback loops.

The search alternates two exact procedures:

* candidate synthesis over the finite counterexample set, solved as a
  rational LP after fixing which piece is active at each counterexample
  (the active-piece patterns are enumerated lazily, warm-started from
  the previous candidate, with set-partition symmetry pruning);
* counterexample search over the whole domain, posed against the
  network encodings of the candidate and the dynamics.

Counterexample search comes in two equivalent forms: the formula route
(`f_solve`) conjoins the three graph encodings and the violation
disjunction verbatim, while the case route (`f_solve_cases`) splits on
which piece attains the max, giving piece-count many small queries.
Both decide the same set; the loop uses the case route for speed and
the formula route serves as an independent recheck.

A positivity margin eta > 0 replaces the exact "x != 0 implies
V(x) > 0" clause: candidates must grow at least eta per unit inf-norm,
and the violation search runs over the domain minus the eta-ball, so
both sides stay linear and the certified claim is explicit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .core import Builder, Network, evaluate
from .errors import DimError
from .formula import And, Exists, Or, RealVar, lin_atom, strip_exists, vec_names
from .lp import Feasible, LinSystem, Optimal, Row, feasible, maximize
from .rationals import RatLike, format_rat, rat, rat_mat, rat_vec
from .smt import encode_smt
from .solver import (
    DEFAULT_TIMEOUT,
    Query,
    Sat,
    Unknown,
    Unsat,
    solve,
    with_assertions,
)

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class MaxAffineFn:
    """V(x) = max_i (g_i . x + h_i)."""

    pieces: tuple[tuple[tuple[Fraction, ...], Fraction], ...]

    @staticmethod
    def make(pieces) -> "MaxAffineFn":
        out = tuple((rat_vec(g), rat(h)) for g, h in pieces)
        if not out:
            raise DimError("a max-affine function needs at least one piece")
        dims = {len(g) for g, _ in out}
        if len(dims) != 1:
            raise DimError("pieces have mixed dimensions")
        return MaxAffineFn(out)

    @property
    def dim(self) -> int:
        return len(self.pieces[0][0])

    def value(self, x: Sequence[RatLike]) -> Fraction:
        xv = rat_vec(x)
        return max(
            sum((gi * xi for gi, xi in zip(g, xv)), h) for g, h in self.pieces
        )

    def argmax(self, x: Sequence[RatLike]) -> int:
        xv = rat_vec(x)
        vals = [
            sum((gi * xi for gi, xi in zip(g, xv)), h) for g, h in self.pieces
        ]
        best = max(vals)
        return vals.index(best)

    def to_network(self) -> Network:
        """Chained pairwise-max mux network computing V."""
        b = Builder(self.dim)
        piece_nodes = [
            b.affine([g], [h], b.input) for g, h in self.pieces
        ]
        acc = piece_nodes[-1]
        for nid in reversed(piece_nodes[:-1]):
            guard = b.affine([[-1, 1]], [0], nid, acc)
            acc = b.mux(nid, acc, guard)
        return b.network(acc)


def inf_norm_fn(n: int) -> MaxAffineFn:
    """The canonical seed candidate: V(x) = max_i |x_i|."""
    pieces = []
    for i in range(n):
        e = [Fraction(0)] * n
        e[i] = _ONE
        pieces.append((tuple(e), _ZERO))
        pieces.append((tuple(-v for v in e), _ZERO))
    return MaxAffineFn(tuple(pieces))


@dataclass(frozen=True)
class LyapSpec:
    """What to prove about x(t+1) = dynamics(x(t))."""

    dynamics: Network
    variant: str = "roa"  # global | roa | decay | invariant
    domain: tuple[tuple[Fraction, Fraction], ...] | None = None
    gamma: Fraction = _ONE
    eta: Fraction = Fraction(1, 1000)

    @staticmethod
    def make(dynamics: Network, variant: str = "roa", domain=None,
             gamma=1, eta="1/1000") -> "LyapSpec":
        if dynamics.input_dim != dynamics.output_dim:
            raise DimError("dynamics must map the state space to itself")
        if variant not in ("global", "roa", "decay", "invariant"):
            raise ValueError(f"unknown variant {variant!r}")
        g = rat(gamma)
        if not (0 < g <= 1):
            raise ValueError("decay rate must lie in (0, 1]")
        e = rat(eta)
        if e <= 0:
            raise ValueError("margin eta must be positive")
        box = None
        if domain is not None:
            box = tuple((rat(lo), rat(hi)) for lo, hi in domain)
            if len(box) != dynamics.input_dim:
                raise DimError("domain box dimension mismatch")
            if any(lo >= hi for lo, hi in box):
                raise ValueError("domain box must have positive volume")
        if variant != "global" and box is None:
            raise ValueError(f"variant {variant!r} needs a domain box")
        return LyapSpec(dynamics, variant, box, g, e)

    @property
    def rho(self) -> Fraction:
        return self.gamma if self.variant == "decay" else _ONE

    @property
    def dim(self) -> int:
        return self.dynamics.input_dim


@dataclass(frozen=True)
class Polyhedron:
    """S(G, w) = {x : Gx <= w} with w > 0 componentwise."""

    g: tuple[tuple[Fraction, ...], ...]
    w: tuple[Fraction, ...]

    @staticmethod
    def make(g, w) -> "Polyhedron":
        gm = rat_mat(g)
        wv = rat_vec(w)
        if len(gm) != len(wv):
            raise DimError("polyhedron row count differs from w length")
        if any(v <= 0 for v in wv):
            raise ValueError("w must be strictly positive")
        return Polyhedron(gm, wv)


# ------------------------------------------------------------------ e-solve

@dataclass(frozen=True)
class Candidate:
    fn: MaxAffineFn
    margin: Fraction


@dataclass(frozen=True)
class NoCandidate:
    pass


def _partition_patterns(m: int, k: int):
    """Restricted-growth strings: active-piece patterns up to relabeling."""

    def go(prefix, used):
        if len(prefix) == m:
            yield tuple(prefix)
            return
        for nxt in range(min(used + 1, k - 1) + 1):
            yield from go(prefix + [nxt], max(used, nxt))

    yield from go([], -1)


def e_solve(spec: LyapSpec, cex: Sequence[Sequence[RatLike]], n_pieces: int,
            warm: MaxAffineFn | None = None,
            pattern_budget: int = 10_000) -> Union[Candidate, NoCandidate]:
    """Max-affine candidate decreasing on every counterexample.

    All piece offsets are zero (so V(0) = 0 holds by construction), and
    per counterexample the active piece must clear eta * inf-norm for
    positivity and force every piece below rho * V(x) - eta at the
    image point.  Fixing the active pieces makes this one LP; patterns
    are tried warm-start first, then by canonical enumeration, with the
    shared feasibility margin maximized so candidates sit centered.
    """
    if n_pieces < 1:
        raise DimError("n_pieces must be at least 1")
    n = spec.dim
    points = [rat_vec(c) for c in cex]
    for p in points:
        if len(p) != n:
            raise DimError("counterexample dimension mismatch")
    if not points:
        return Candidate(inf_norm_fn(n), _ONE)

    images = [evaluate(spec.dynamics, p) for p in points]
    norms = [max(abs(v) for v in p) for p in points]
    k = n_pieces
    m = len(points)
    nvars = k * n + 1  # piece coefficients plus shared margin t
    t_col = k * n

    def gcol(piece: int, coord: int) -> int:
        return piece * n + coord

    def try_pattern(pattern) -> Candidate | None:
        rows: list[Row] = []

        def add(coeffs_map, rel, rhs):
            coeffs = [_ZERO] * nvars
            for col, c in coeffs_map.items():
                coeffs[col] += c
            rows.append(Row(tuple(coeffs), rel, rat(rhs)))

        for c_idx, (xc, xp, nrm) in enumerate(zip(points, images, norms)):
            j = pattern[c_idx]
            # argmax: g_j . xc >= g_i . xc
            for i in range(k):
                if i == j:
                    continue
                add(
                    {
                        **{gcol(i, d): xc[d] for d in range(n)},
                        **{gcol(j, d): -xc[d] for d in range(n)},
                    },
                    "<=",
                    0,
                )
            # positivity with margin: g_j . xc >= (eta + t) ||xc||_inf
            add(
                {**{gcol(j, d): -xc[d] for d in range(n)}, t_col: nrm},
                "<=",
                -spec.eta * nrm,
            )
            if spec.variant != "invariant":
                # decrease: g_i . xp <= rho (g_j . xc) - (eta + t) ||xc||_inf
                # the margin scales with the point so small counterexamples
                # near the eta-ball stay feasible for homogeneous candidates
                for i in range(k):
                    coeffs = {gcol(i, d): xp[d] for d in range(n)}
                    for d in range(n):
                        coeffs[gcol(j, d)] = coeffs.get(gcol(j, d), _ZERO) - spec.rho * xc[d]
                    coeffs[t_col] = coeffs.get(t_col, _ZERO) + nrm
                    add(coeffs, "<=", -spec.eta * nrm)
        # normalization box and margin bounds
        for i in range(k):
            for d in range(n):
                add({gcol(i, d): _ONE}, "<=", 1)
                add({gcol(i, d): -_ONE}, "<=", 1)
        add({t_col: -_ONE}, "<=", 0)
        add({t_col: _ONE}, "<=", 1)

        objective = [_ZERO] * nvars
        objective[t_col] = _ONE
        result = maximize(LinSystem(tuple(rows), nvars), objective)
        if not isinstance(result, Optimal):
            return None
        point = result.point
        pieces = tuple(
            (tuple(point[gcol(i, d)] for d in range(n)), _ZERO) for i in range(k)
        )
        return Candidate(MaxAffineFn(pieces), result.value)

    def decreases_on_all(fn: MaxAffineFn) -> bool:
        for xc, xp, nrm in zip(points, images, norms):
            if fn.value(xc) < spec.eta * nrm:
                return False
            if spec.variant != "invariant":
                if fn.value(xp) > spec.rho * fn.value(xc) - spec.eta * nrm:
                    return False
        return True

    def simplified(cand: Candidate) -> Candidate:
        # LP vertices carry large denominators; round them off while the
        # counterexample constraints still hold exactly
        for den in (4, 16, 128, 4096):
            approx = MaxAffineFn(
                tuple(
                    (tuple(v.limit_denominator(den) for v in g), h)
                    for g, h in cand.fn.pieces
                )
            )
            if approx.pieces != cand.fn.pieces and decreases_on_all(approx):
                return Candidate(approx, cand.margin)
        return cand

    tried = 0
    if warm is not None and len(warm.pieces) == k:
        pattern = tuple(warm.argmax(p) for p in points)
        tried += 1
        found = try_pattern(pattern)
        if found is not None:
            return simplified(found)
    for pattern in _partition_patterns(m, k):
        if tried >= pattern_budget:
            break
        tried += 1
        found = try_pattern(pattern)
        if found is not None:
            return simplified(found)
    return NoCandidate()


# ------------------------------------------------------------------ f-solve

@dataclass(frozen=True)
class Counterexample:
    point: tuple[Fraction, ...]


@dataclass(frozen=True)
class Certified:
    pass


FSolveResult = Union[Counterexample, Certified, Unknown]


def violation(spec: LyapSpec, fn: MaxAffineFn, x: Sequence[RatLike]) -> str | None:
    """Exact recheck of the searched condition at a point.

    Returns "domain" when x is outside the searched region, the name of
    the violated clause ("positivity" or "decrease"/"invariance"), or
    None when the point satisfies the conditions.
    """
    xv = rat_vec(x)
    if max(abs(v) for v in xv) < spec.eta:
        return "domain"
    if spec.domain is not None:
        for v, (lo, hi) in zip(xv, spec.domain):
            if not (lo <= v <= hi):
                return "domain"
    vx = fn.value(xv)
    xp = evaluate(spec.dynamics, xv)
    vp = fn.value(xp)
    if spec.variant == "invariant":
        if vx <= 0:
            return "positivity"
        return None
    if vx <= 0:
        return "positivity"
    if vp - spec.rho * vx >= 0:
        return "decrease"
    return None


def _domain_atoms(spec: LyapSpec, x_names: Sequence[str]):
    atoms = []
    if spec.domain is not None:
        for name, (lo, hi) in zip(x_names, spec.domain):
            atoms.append(lin_atom([(name, 1)], ">=", lo))
            atoms.append(lin_atom([(name, 1)], "<=", hi))
    return atoms


def _origin_exclusion(spec: LyapSpec, x_names: Sequence[str]) -> Or:
    cases = []
    for name in x_names:
        cases.append(lin_atom([(name, 1)], ">=", spec.eta))
        cases.append(lin_atom([(name, 1)], "<=", -spec.eta))
    return Or(tuple(cases))


def f_solve(spec: LyapSpec, fn: MaxAffineFn, backend: str = "enumerate",
            timeout: float = DEFAULT_TIMEOUT,
            solver_cmd: str | None = None) -> FSolveResult:
    """Violation search posed against the graph encodings.

    The formula conjoins the encodings of V at x, of the dynamics, and
    of V at the image point, then asks for a positivity violation or a
    decrease violation inside the domain minus the eta-ball.
    """
    if fn.dim != spec.dim:
        raise DimError("candidate dimension differs from dynamics")
    vnet = fn.to_network()
    enc_v = encode_smt(vnet, x_name="x", y_name="v", aux_prefix="a_")
    enc_f = encode_smt(spec.dynamics, x_name="x", y_name="xp", aux_prefix="f_")
    enc_vp = encode_smt(vnet, x_name="xp", y_name="vp", aux_prefix="b_")

    x_names = enc_v.free_in
    evars: list[RealVar] = []
    parts = []
    for enc in (enc_v, enc_f, enc_vp):
        vs, body = strip_exists(enc.formula)
        evars.extend(vs)
        parts.extend(body.children if isinstance(body, And) else (body,))
    evars.extend(RealVar(n) for n in (*enc_f.free_out, "v", "vp"))

    parts.extend(_domain_atoms(spec, x_names))
    parts.append(_origin_exclusion(spec, x_names))
    if spec.variant == "invariant":
        viol = Or(
            (
                lin_atom([("v", 1)], "<=", 0),
                And((lin_atom([("v", 1)], "<=", 0), lin_atom([("vp", 1)], ">", 0))),
            )
        )
    else:
        viol = Or(
            (
                lin_atom([("v", 1)], "<=", 0),
                lin_atom([("vp", 1), ("v", -spec.rho)], ">=", 0),
            )
        )
    parts.append(viol)
    formula = Exists(tuple(evars), And(tuple(parts)))
    verdict = solve(Query(formula=formula, backend=backend, timeout=timeout,
                          solver_cmd=solver_cmd))
    if isinstance(verdict, Unknown):
        return verdict
    if isinstance(verdict, Unsat):
        return Certified()
    point = tuple(verdict.model[n] for n in x_names)
    if violation(spec, fn, point) in (None, "domain") and backend != "enumerate":
        # float model from an external solver; re-derive exactly
        return f_solve(spec, fn, backend="enumerate")
    return Counterexample(point)


def _strengthen_witness(spec: LyapSpec, fn: MaxAffineFn,
                        point: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    """Scale a violating point outward and simplify its coordinates.

    LP witnesses tend to sit on the eta-ball with huge denominators;
    violation regions are cones for homogeneous candidates under linear
    dynamics, so pushing toward the domain boundary and rounding to a
    small denominator usually stays violating.  Every move is verified
    exactly and discarded otherwise.
    """
    best = point
    if spec.domain is not None and any(v != 0 for v in point):
        limit = None
        for v, (lo, hi) in zip(point, spec.domain):
            if v > 0:
                s = hi / v
            elif v < 0:
                s = lo / v
            else:
                continue
            limit = s if limit is None else min(limit, s)
        for scale in (limit, limit / 2 if limit else None, Fraction(4), Fraction(2)):
            if scale is None or scale <= 1:
                continue
            cand = tuple(scale * v for v in point)
            if violation(spec, fn, cand) in ("positivity", "decrease"):
                best = cand
                break
    for den in (8, 64, 1024, 10**6, 10**12):
        approx = tuple(v.limit_denominator(den) for v in best)
        if approx == best:
            break
        if violation(spec, fn, approx) in ("positivity", "decrease"):
            return approx
    return best


def f_solve_cases(spec: LyapSpec, fn: MaxAffineFn,
                  backend: str = "enumerate") -> FSolveResult:
    """Violation search split on the piece attaining each max.

    Same satisfying set as ``f_solve``: a positivity violation pins
    every piece at or below zero (one query), and a decrease violation
    at image-piece i requires g_i . x+ >= rho * g_j . x for every j
    (one query per piece).  Each query keeps the dynamics encoding, so
    switched dynamics still case-split inside the solver.  Witnesses
    are strengthened away from the eta-ball before being returned.
    """
    if fn.dim != spec.dim:
        raise DimError("candidate dimension differs from dynamics")
    enc_f = encode_smt(spec.dynamics, x_name="x", y_name="xp", aux_prefix="f_")
    x_names = enc_f.free_in
    xp_names = enc_f.free_out
    base = list(_domain_atoms(spec, x_names))
    base.append(_origin_exclusion(spec, x_names))

    def ask(extra, with_dynamics: bool) -> tuple[Fraction, ...] | None:
        if with_dynamics:
            formula = with_assertions(enc_f, base + extra)
        else:
            matrix = And(tuple(base + extra))
            formula = matrix
        verdict = solve(Query(formula=formula, backend=backend))
        if isinstance(verdict, Sat):
            return tuple(verdict.model[n] for n in x_names)
        return None

    # positivity violation: every piece of V at or below zero
    pos = [
        lin_atom([(n, g_d) for n, g_d in zip(x_names, g)], "<=", -h)
        for g, h in fn.pieces
    ]
    witness = ask(pos, with_dynamics=False)
    if witness is not None:
        return Counterexample(_strengthen_witness(spec, fn, witness))
    if spec.variant == "invariant":
        return Certified()

    # decrease violation piece by piece: V(x+) attained by piece i
    seen = set()
    for gi, hi in fn.pieces:
        if (gi, hi) in seen:
            continue
        seen.add((gi, hi))
        extra = []
        for gj, hj in fn.pieces:
            # g_i . xp + h_i >= rho * (g_j . x + h_j)
            terms = [(n, -g_d) for n, g_d in zip(xp_names, gi)]
            terms += [(n, spec.rho * g_d) for n, g_d in zip(x_names, gj)]
            extra.append(lin_atom(terms, "<=", hi - spec.rho * hj))
        witness = ask(extra, with_dynamics=True)
        if witness is not None:
            return Counterexample(_strengthen_witness(spec, fn, witness))
    return Certified()


def prune_pieces(fn: MaxAffineFn, domain) -> MaxAffineFn:
    """Drop pieces that never strictly attain the max over the box."""
    box = tuple((rat(lo), rat(hi)) for lo, hi in domain)
    n = fn.dim
    kept: list[tuple[tuple[Fraction, ...], Fraction]] = []
    seen = set()
    pieces = [p for p in fn.pieces if not (p in seen or seen.add(p))]
    for i, (gi, hi) in enumerate(pieces):
        rows = []
        for d, (lo, hi_b) in enumerate(box):
            e = [_ZERO] * n
            e[d] = _ONE
            rows.append(Row(tuple(e), "<=", hi_b))
            rows.append(Row(tuple(-v for v in e), "<=", -lo))
        for j, (gj, hj) in enumerate(pieces):
            if i == j:
                continue
            rows.append(
                Row(tuple(gj_d - gi_d for gi_d, gj_d in zip(gi, gj)), "<", hi - hj)
            )
        if isinstance(feasible(LinSystem(tuple(rows), n)), Feasible):
            kept.append((gi, hi))
    if not kept:
        kept = [pieces[0]]
    return MaxAffineFn(tuple(kept))


# -------------------------------------------------------------------- cegis

@dataclass
class CegisState:
    counterexamples: list[tuple[Fraction, ...]] = field(default_factory=list)
    iteration: int = 0
    candidate: MaxAffineFn | None = None
    history: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class Stable:
    fn: MaxAffineFn
    log: tuple[str, ...]
    iterations: int


@dataclass(frozen=True)
class CegisUnknown:
    reason: str
    state: CegisState


def _log_pieces(lines: list[str], tag: str, fn: MaxAffineFn) -> None:
    for g, h in fn.pieces:
        gtxt = ",".join(format_rat(v) for v in g)
        lines.append(f"{tag} piece g=[{gtxt}] h={format_rat(h)}")


def cegis(spec: LyapSpec, n_pieces: int, max_iters: int,
          x0: Sequence[RatLike], backend: str = "enumerate",
          time_budget: float = 600.0,
          progress=None) -> Union[Stable, CegisUnknown]:
    """Alternate candidate synthesis and violation search.

    Starts from the single seed counterexample, stops with Stable when
    the violation search comes back empty, and reports Unknown when
    synthesis fails, iterations run out, or the time budget is spent.
    The returned certificate has redundant pieces pruned and rechecks
    against the formula-route search.
    """
    state = CegisState()
    x0v = rat_vec(x0)
    if violation(spec, inf_norm_fn(spec.dim), x0v) == "domain" and spec.domain:
        for v, (lo, hi) in zip(x0v, spec.domain):
            if not (lo <= v <= hi):
                raise DimError("seed point lies outside the domain box")
    state.counterexamples.append(x0v)
    state.history.append(f"seed cex=[{','.join(format_rat(v) for v in x0v)}]")
    deadline = time.monotonic() + time_budget
    warm = None

    for it in range(max_iters):
        state.iteration = it
        if time.monotonic() > deadline:
            return CegisUnknown("time budget exhausted", state)
        got = e_solve(spec, state.counterexamples, n_pieces, warm=warm)
        if isinstance(got, NoCandidate):
            state.history.append(f"iter={it} e-solve infeasible")
            return CegisUnknown("no candidate within piece budget", state)
        cand = got.fn
        state.candidate = cand
        _log_pieces(state.history, f"iter={it}", cand)
        if progress:
            progress(f"iter={it} cex={len(state.counterexamples)} margin={got.margin}")
        found = f_solve_cases(spec, cand, backend=backend)
        if isinstance(found, Unknown):
            return CegisUnknown(f"violation search unknown: {found.reason}", state)
        if isinstance(found, Certified):
            final = prune_pieces(cand, spec.domain) if spec.domain else cand
            state.history.append(f"iter={it} verdict=stable pieces={len(final.pieces)}")
            _log_pieces(state.history, "final", final)
            return Stable(final, tuple(state.history), it + 1)
        point = found.point
        why = violation(spec, cand, point)
        assert why in ("positivity", "decrease"), "witness must recheck exactly"
        assert point not in state.counterexamples, "counterexamples must be new"
        state.counterexamples.append(point)
        state.history.append(
            f"iter={it} cex=[{','.join(format_rat(v) for v in point)}] clause={why}"
        )
        warm = cand
    return CegisUnknown("iteration cap reached", state)


def parse_certificate_log(text: str) -> MaxAffineFn:
    """Recover the final certificate from a cegis log."""
    pieces = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("final piece "):
            gpart = line.split("g=[", 1)[1].split("]", 1)[0]
            hpart = line.split("h=", 1)[1]
            pieces.append(([rat(v) for v in gpart.split(",")], rat(hpart)))
    if not pieces:
        raise ValueError("log contains no final certificate")
    return MaxAffineFn.make(pieces)


# ---------------------------------------------------------- contractiveness

@dataclass(frozen=True)
class Verified:
    pass


@dataclass(frozen=True)
class Refuted:
    x: tuple[Fraction, ...]
    x_plus: tuple[Fraction, ...]
    epsilon: Fraction


ContractiveResult = Union[Verified, Refuted, Unknown]


def saturated_loop(a, b, f, u_min, u_max) -> Network:
    """x+ = A x + B sat(F x) with asymmetric saturation bounds."""
    am = rat_mat(a)
    bv = rat_vec(b)
    fv = rat_vec(f)
    n = len(am)
    if any(len(r) != n for r in am) or len(bv) != n or len(fv) != n:
        raise DimError("A must be n x n, B and F length n")
    lo, hi = rat(u_min), rat(u_max)
    bld = Builder(n)
    fx = bld.affine([fv], [0], bld.input)
    top = bld.const([hi])
    bot = bld.const([-lo])
    low_guard = bld.affine([[1]], [lo], fx)  # fx + u_min <= 0 iff fx <= -u_min
    inner = bld.mux(bot, fx, low_guard)
    high_guard = bld.affine([[-1]], [hi], fx)  # -fx + u_max <= 0 iff fx >= u_max
    sat_u = bld.mux(top, inner, high_guard)
    rows = [list(arow) + [bval] for arow, bval in zip(am, bv)]
    out = bld.affine(rows, [0] * n, bld.input, sat_u)
    return bld.network(out)


def contractive_check(a, b, f, u_min, u_max, poly: Polyhedron, lam,
                      backend: str = "enumerate", scale_w=1,
                      timeout: float = DEFAULT_TIMEOUT,
                      solver_cmd: str | None = None) -> ContractiveResult:
    """Is S(G, w) lambda-contractive for the saturated closed loop?

    Poses the negated condition with epsilon free: some x in the
    epsilon-scaled polyhedron (0 < epsilon <= 1) whose image leaves the
    lambda-epsilon-scaled one.  V1(x) = max_i(g_i x - eps w_i) <= 0 is
    the source membership (a conjunction over pieces), V2 > 0 the image
    escape (a disjunction); unsatisfiable means Verified.
    """
    lam_v = rat(lam)
    if not (0 < lam_v < 1):
        raise ValueError("lambda must lie strictly between 0 and 1")
    delta = rat(scale_w)
    w = tuple(delta * v for v in poly.w)
    loop = saturated_loop(a, b, f, u_min, u_max)
    n = loop.input_dim
    if len(poly.g[0]) != n:
        raise DimError("polyhedron dimension differs from the state dimension")

    enc = encode_smt(loop, x_name="x", y_name="xp", aux_prefix="f_")
    x_names = enc.free_in
    xp_names = enc.free_out
    atoms = []
    # x in S(G, eps w): g_i . x - w_i eps <= 0
    for g, wi in zip(poly.g, w):
        atoms.append(
            lin_atom([*zip(x_names, g), ("eps", -wi)], "<=", 0)
        )
    atoms.append(lin_atom([("eps", 1)], ">", 0))
    atoms.append(lin_atom([("eps", 1)], "<=", 1))
    # image escapes S(G, lambda eps w): some g_i . x+ - lambda w_i eps > 0
    escape = Or(
        tuple(
            lin_atom([*zip(xp_names, g), ("eps", -lam_v * wi)], ">", 0)
            for g, wi in zip(poly.g, w)
        )
    )
    formula = with_assertions(enc, atoms + [escape])
    verdict = solve(Query(formula=formula, backend=backend, timeout=timeout,
                          solver_cmd=solver_cmd))
    if isinstance(verdict, Unknown):
        return verdict
    if isinstance(verdict, Unsat):
        return Verified()
    x = tuple(verdict.model[nm] for nm in x_names)
    eps = verdict.model["eps"]
    xp = evaluate(loop, x)
    return Refuted(x=x, x_plus=xp, epsilon=eps)


def check_refutation(a, b, f, u_min, u_max, poly: Polyhedron, lam,
                     witness: Refuted, scale_w=1) -> bool:
    """Exact componentwise validation of a Refuted witness."""
    lam_v = rat(lam)
    delta = rat(scale_w)
    w = tuple(delta * v for v in poly.w)
    if not (0 < witness.epsilon <= 1):
        return False
    loop = saturated_loop(a, b, f, u_min, u_max)
    xp = evaluate(loop, witness.x)
    if tuple(xp) != tuple(witness.x_plus):
        return False
    for g, wi in zip(poly.g, w):
        if sum((gi * xi for gi, xi in zip(g, witness.x)), _ZERO) > witness.epsilon * wi:
            return False
    return any(
        sum((gi * vi for gi, vi in zip(g, xp)), _ZERO) > lam_v * witness.epsilon * wi
        for g, wi in zip(poly.g, w)
    )
