"""Command-line surface.

Verdicts print as ``VERDICT: <word>`` followed by ``key=value`` lines.
Exit codes: 0 solved/verified, 1 refuted or counterexample found,
2 unknown, 64 usage error, 65 input/data error.  Long runs emit
heartbeat lines on stderr.  Configuration precedence is CLI flag over
environment (AMNET_SMT_SOLVER, AMNET_TIMEOUT) over config file
(key=value lines, --config or ./amnet.cfg) over defaults.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import lyapunov, mip, optimize, smt, solver, train
from .core import evaluate
from .errors import AmnetError
from .rationals import decimal_str, format_rat, rat
from .sexpr import (
    load_amn,
    load_matrix_csv,
    load_vector_csv,
    parse_vector,
    serialize_amn,
)

EXIT_SOLVED = 0
EXIT_REFUTED = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 64
EXIT_ERROR = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _load_config(path: str | None) -> dict[str, str]:
    candidates = [path] if path else ["amnet.cfg"]
    for cand in candidates:
        if cand and os.path.exists(cand):
            out = {}
            with open(cand, "r", encoding="utf-8") as handle:
                for ln in handle:
                    ln = ln.strip()
                    if not ln or ln.startswith("#") or "=" not in ln:
                        continue
                    key, val = ln.split("=", 1)
                    out[key.strip()] = val.strip()
            return out
    return {}


def _settings(args) -> tuple[str | None, float]:
    cfg = _load_config(getattr(args, "config", None))
    solver_cmd = (
        getattr(args, "solver", None)
        or os.environ.get("AMNET_SMT_SOLVER")
        or cfg.get("solver")
    )
    timeout_txt = (
        getattr(args, "timeout", None)
        or os.environ.get("AMNET_TIMEOUT")
        or cfg.get("timeout")
    )
    timeout = float(timeout_txt) if timeout_txt else solver.DEFAULT_TIMEOUT
    return solver_cmd, timeout


def _backend(name: str) -> str:
    return {"enum": "enumerate", "smt": "external"}.get(name, name)


def _vec_arg(text: str) -> tuple[Fraction, ...]:
    if os.path.exists(text):
        return load_vector_csv(text)
    return parse_vector(text)


def _box_arg(text: str):
    pairs = []
    for part in text.split(";"):
        lo, hi = part.split(",")
        pairs.append((rat(lo.strip()), rat(hi.strip())))
    return pairs


def _print_verdict(word: str, **kv) -> None:
    print(f"VERDICT: {word}")
    for key, val in kv.items():
        print(f"{key}={val}")


def _fmt_point(point) -> str:
    return ",".join(format_rat(v) for v in point)


def _cmd_eval(args) -> int:
    net = load_amn(args.net)
    x = _vec_arg(args.input)
    y = evaluate(net, x)
    _print_verdict("ok", output=_fmt_point(y), decimal=",".join(decimal_str(v) for v in y))
    return EXIT_SOLVED


def _cmd_encode(args) -> int:
    net = load_amn(args.net)
    if args.format == "smt":
        res = smt.encode_smt(net)
        text = smt.emit_smtlib(res, logic=args.logic)
    else:
        if args.big_m == "auto":
            if not args.box:
                raise AmnetError("--big-m auto needs --box")
            big_m = mip.derive_big_m(net, _box_arg(args.box))
        else:
            big_m = rat(args.big_m)
        box = _box_arg(args.box) if args.box and args.per_mux else None
        model = mip.encode_mip(net, big_m, per_mux_box=box)
        text = mip.emit_lp(model)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
        _print_verdict("ok", out=args.out)
    else:
        sys.stdout.write(text)
    return EXIT_SOLVED


def _cmd_check(args) -> int:
    net = load_amn(args.net)
    solver_cmd, timeout = _settings(args)
    verdict = solver.check_graph_membership(
        net,
        _vec_arg(args.point),
        _vec_arg(args.output),
        backend=_backend(args.backend),
        timeout=timeout,
        solver_cmd=solver_cmd,
    )
    if isinstance(verdict, solver.Sat):
        _print_verdict("member")
        return EXIT_SOLVED
    if isinstance(verdict, solver.Unsat):
        _print_verdict("non-member")
        return EXIT_REFUTED
    _print_verdict("unknown", reason=verdict.reason)
    return EXIT_UNKNOWN


def _cmd_minimize(args) -> int:
    objective = load_amn(args.objective)
    constraints = [load_amn(p) for p in args.constraint or []]
    solver_cmd, timeout = _settings(args)
    lo_txt, hi_txt = args.bracket.split(",")
    cfg = optimize.BisectionConfig.make(
        lo_txt.strip(),
        hi_txt.strip(),
        args.eps,
        backend=_backend(args.backend),
        timeout=timeout,
        solver_cmd=solver_cmd,
    )
    result = optimize.minimize(objective, constraints, cfg)
    if isinstance(result, optimize.Optimal):
        lo, hi = result.interval
        _print_verdict(
            "optimal",
            lo=format_rat(lo),
            hi=format_rat(hi),
            width=decimal_str(hi - lo),
            value=format_rat(result.value),
            value_decimal=decimal_str(result.value),
            witness=_fmt_point(result.witness),
            bisection_queries=result.bisection_queries,
        )
        return EXIT_SOLVED
    if isinstance(result, optimize.InfeasibleProblem):
        _print_verdict("infeasible")
        return EXIT_REFUTED
    if isinstance(result, optimize.BracketError):
        _print_verdict("bracket-error", detail=result.detail)
        return EXIT_REFUTED
    _print_verdict("unknown", reason=result.reason)
    return EXIT_UNKNOWN


def _cmd_train(args) -> int:
    net = load_amn(args.net)
    data = train.load_dataset_csv(args.data, net.input_dim)
    solver_cmd, timeout = _settings(args)
    if args.mode == "gd":
        cfg = train.TrainConfig(
            learning_rate=args.lr,
            max_iters=args.iters,
            seed=args.seed,
        )
        result = train.gd_train(net, data, cfg)
        _print_verdict(
            "trained",
            loss=decimal_str(rat(str(result.loss_trace[-1])) if result.loss_trace else 0),
            iters=len(result.loss_trace) - 1,
            theta=",".join(decimal_str(v, 17) for v in result.theta.theta),
        )
        return EXIT_SOLVED
    result = train.consistency_train(
        net,
        data,
        args.eps,
        backend=_backend(args.backend),
        timeout=timeout,
        solver_cmd=solver_cmd,
    )
    if isinstance(result, train.Params):
        _print_verdict("params", theta=",".join(format_rat(v) for v in result.theta.theta))
        return EXIT_SOLVED
    if isinstance(result, train.Inconsistent):
        _print_verdict("inconsistent")
        return EXIT_REFUTED
    _print_verdict("unknown", reason=result.reason)
    return EXIT_UNKNOWN


def _cmd_lyapunov(args) -> int:
    solver_cmd, timeout = _settings(args)
    dynamics = load_amn(args.dynamics)
    box = _box_arg(args.box) if args.box else None
    spec = lyapunov.LyapSpec.make(
        dynamics, args.variant, domain=box, gamma=args.gamma, eta=args.eta
    )
    if args.recheck:
        with open(args.recheck, "r", encoding="utf-8") as handle:
            fn = lyapunov.parse_certificate_log(handle.read())
        found = lyapunov.f_solve(spec, fn, backend=_backend(args.backend),
                                 timeout=timeout, solver_cmd=solver_cmd)
        if isinstance(found, lyapunov.Certified):
            _print_verdict("stable", pieces=len(fn.pieces), source="recheck")
            return EXIT_SOLVED
        if isinstance(found, lyapunov.Counterexample):
            _print_verdict("refuted", x=_fmt_point(found.point))
            return EXIT_REFUTED
        _print_verdict("unknown", reason=found.reason)
        return EXIT_UNKNOWN

    x0 = _vec_arg(args.x0) if args.x0 else tuple(
        hi for _, hi in (box or [(0, 1)] * dynamics.input_dim)
    )
    result = lyapunov.cegis(
        spec,
        n_pieces=args.pieces,
        max_iters=args.max_iters,
        x0=x0,
        backend=_backend(args.backend),
        time_budget=args.time_budget,
        progress=lambda line: print(line, file=sys.stderr, flush=True),
    )
    if isinstance(result, lyapunov.Stable):
        if args.log:
            with open(args.log, "w", encoding="utf-8") as handle:
                handle.write("\n".join(result.log) + "\n")
        kv = {"iterations": result.iterations, "pieces": len(result.fn.pieces)}
        for i, (g, h) in enumerate(result.fn.pieces):
            kv[f"piece{i}"] = f"[{_fmt_point(g)}] {format_rat(h)}"
        _print_verdict("stable", **kv)
        return EXIT_SOLVED
    _print_verdict(
        "unknown",
        reason=result.reason,
        counterexamples=len(result.state.counterexamples),
    )
    return EXIT_UNKNOWN


def _cmd_contractive(args) -> int:
    solver_cmd, timeout = _settings(args)
    a = load_matrix_csv(args.A)
    b = load_vector_csv(args.B)
    f = load_vector_csv(args.F)
    g = load_matrix_csv(args.G)
    w = load_vector_csv(args.w)
    poly = lyapunov.Polyhedron.make(g, w)
    result = lyapunov.contractive_check(
        a, b, f, args.umin, args.umax, poly, args.lam,
        backend=_backend(args.backend),
        scale_w=args.scale_w,
        timeout=timeout,
        solver_cmd=solver_cmd,
    )
    if isinstance(result, lyapunov.Verified):
        _print_verdict("verified", **{"lambda": args.lam, "scale_w": args.scale_w})
        return EXIT_SOLVED
    if isinstance(result, lyapunov.Refuted):
        _print_verdict(
            "refuted",
            x=_fmt_point(result.x),
            x_decimal=",".join(decimal_str(v) for v in result.x),
            x_plus=_fmt_point(result.x_plus),
            epsilon=format_rat(result.epsilon),
        )
        return EXIT_REFUTED
    _print_verdict("unknown", reason=result.reason)
    return EXIT_UNKNOWN


def _cmd_canon(args) -> int:
    net = load_amn(args.net)
    sys.stdout.write(serialize_amn(net))
    return EXIT_SOLVED


def build_parser() -> _Parser:
    parser = _Parser(prog="amnet", description=__doc__)
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a network at a point")
    p.add_argument("net")
    p.add_argument("--input", required=True, help="comma-separated values or a CSV file")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("encode", help="emit SMT-LIB or LP text")
    p.add_argument("format", choices=["smt", "mip"])
    p.add_argument("net")
    p.add_argument("--out")
    p.add_argument("--logic", default="QF_LRA", choices=["QF_LRA", "QF_NRA"])
    p.add_argument("--big-m", default="auto", help="rational constant or 'auto'")
    p.add_argument("--box", help="per-coordinate intervals 'lo,hi;lo,hi;...'")
    p.add_argument("--per-mux", action="store_true", help="per-mux big-M from the box")
    p.set_defaults(fn=_cmd_encode)

    p = sub.add_parser("check", help="graph membership of a point pair")
    p.add_argument("net")
    p.add_argument("--point", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--backend", default="enum", choices=["enum", "smt"])
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("minimize", help="bisection minimization")
    p.add_argument("--objective", required=True)
    p.add_argument("--constraint", action="append")
    p.add_argument("--bracket", required=True, help="'lo,hi'")
    p.add_argument("--eps", required=True)
    p.add_argument("--backend", default="auto", choices=["auto", "enum", "smt"])
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.set_defaults(fn=_cmd_minimize)

    p = sub.add_parser("train", help="fit parameters to data")
    p.add_argument("mode", choices=["gd", "consistency"])
    p.add_argument("--net", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--eps", default="0")
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", default="external", choices=["external", "enum", "smt"])
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("lyapunov", help="counterexample-guided stability search")
    p.add_argument("--dynamics", required=True)
    p.add_argument("--variant", default="roa",
                   choices=["global", "roa", "decay", "invariant"])
    p.add_argument("--box", help="'lo,hi;lo,hi' domain")
    p.add_argument("--pieces", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--gamma", default="1")
    p.add_argument("--eta", default="1/1000")
    p.add_argument("--x0", help="seed counterexample")
    p.add_argument("--time-budget", type=float, default=600.0)
    p.add_argument("--log", help="write the certificate log here")
    p.add_argument("--recheck", help="verify the final certificate from a log file")
    p.add_argument("--backend", default="enum", choices=["enum", "smt"])
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.set_defaults(fn=_cmd_lyapunov)

    p = sub.add_parser("contractive", help="lambda-contractiveness of a polyhedron")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--F", required=True)
    p.add_argument("--G", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--umin", required=True)
    p.add_argument("--umax", required=True)
    p.add_argument("--scale-w", default="1")
    p.add_argument("--backend", default="enum", choices=["enum", "smt"])
    p.add_argument("--solver")
    p.add_argument("--timeout", type=float)
    p.set_defaults(fn=_cmd_contractive)

    p = sub.add_parser("canon", help="canonicalize network text")
    p.add_argument("net")
    p.set_defaults(fn=_cmd_canon)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AmnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
