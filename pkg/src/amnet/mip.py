"""Big-M mixed-integer encoding of networks and LP-format export.

Every mux gets one binary that is 1 exactly when its enable condition
holds (guard value <= 0).  The guard pair keeps its strict half as a
genuinely strict row for the internal exact solver; text export has to
relax it by a configurable epsilon since the LP file format cannot
express strictness.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import Affine, Input, Mux, Network
from .errors import DimError, UnboundedError
from .formula import vec_names
from .rationals import decimal_str, rat
from .smt import _reachable

_ONE = Fraction(1)


@dataclass(frozen=True)
class MipRow:
    real_terms: tuple[tuple[str, Fraction], ...]
    bin_terms: tuple[tuple[str, Fraction], ...]
    rel: str  # "<=", "<", "="
    rhs: Fraction


@dataclass(frozen=True)
class MipModel:
    real_vars: tuple[str, ...]
    bin_vars: tuple[str, ...]
    lin_eqs: tuple[MipRow, ...]
    big_m_rows: tuple[MipRow, ...]
    big_m: Fraction
    io_bindings: tuple[tuple[str, ...], tuple[str, ...]]

    @property
    def rows(self) -> tuple[MipRow, ...]:
        return self.lin_eqs + self.big_m_rows


def _node_names(net: Network, nid: int) -> list[str]:
    return vec_names(f"n{nid}", net.dims[nid])


def encode_mip(net: Network, big_m, per_mux_box: Sequence | None = None) -> MipModel:
    """Mixed-integer constraint system whose solutions are Graph(net).

    Input components reuse the free x names; the output is bound by
    explicit equality rows y = v_out.  With ``per_mux_box`` given, each
    mux uses its own constant derived from interval propagation instead
    of the global ``big_m``.
    """
    m_global = rat(big_m)
    if m_global <= 0:
        raise DimError("big-M must be positive")
    reach = sorted(_reachable(net), key=net.topo.index)
    per_mux = _per_mux_bounds(net, per_mux_box) if per_mux_box is not None else {}

    x_names = tuple(vec_names("x", net.input_dim))
    y_names = tuple(vec_names("y", net.output_dim))
    names: dict[int, list[str]] = {}
    real_vars: list[str] = list(x_names)
    bin_vars: list[str] = []
    lin_eqs: list[MipRow] = []
    big_rows: list[MipRow] = []

    for nid in reach:
        node = net.nodes[nid]
        if isinstance(node, Input):
            names[nid] = list(x_names)
            continue
        mine = _node_names(net, nid)
        names[nid] = mine
        real_vars.extend(mine)
        if isinstance(node, Affine):
            stacked: list[str] = []
            for c in node.children:
                stacked.extend(names[c])
            for comp, vn in enumerate(mine):
                terms = [(vn, _ONE)]
                terms.extend(
                    (cv, -coeff)
                    for coeff, cv in zip(node.a[comp], stacked)
                    if coeff != 0
                )
                lin_eqs.append(MipRow(tuple(terms), (), "=", node.b[comp]))
            continue
        # mux: one binary, Eq-style guard pair plus branch envelopes
        b_name = f"b{nid}"
        bin_vars.append(b_name)
        mval = per_mux.get(nid, m_global)
        g = names[node.guard][0]
        k_names = names[node.first]
        l_names = names[node.second]
        # -M b < v_m  and  v_m <= M (1 - b)
        big_rows.append(MipRow(((g, Fraction(-1)),), ((b_name, -mval),), "<", 0))
        big_rows.append(MipRow(((g, _ONE),), ((b_name, mval),), "<=", mval))
        for vj, vk, vl in zip(mine, k_names, l_names):
            # b = 0 pins v_j = v_l (else branch)
            big_rows.append(
                MipRow(((vj, _ONE), (vl, -_ONE)), ((b_name, -mval),), "<=", 0)
            )
            big_rows.append(
                MipRow(((vj, -_ONE), (vl, _ONE)), ((b_name, -mval),), "<=", 0)
            )
            # b = 1 pins v_j = v_k (enabled branch)
            big_rows.append(
                MipRow(((vj, _ONE), (vk, -_ONE)), ((b_name, mval),), "<=", mval)
            )
            big_rows.append(
                MipRow(((vj, -_ONE), (vk, _ONE)), ((b_name, mval),), "<=", mval)
            )

    for yn, vn in zip(y_names, names[net.output]):
        if yn != vn:
            lin_eqs.append(MipRow(((yn, _ONE), (vn, -_ONE)), (), "=", 0))
    real_vars.extend(n for n in y_names if n not in real_vars)

    return MipModel(
        real_vars=tuple(dict.fromkeys(real_vars)),
        bin_vars=tuple(bin_vars),
        lin_eqs=tuple(lin_eqs),
        big_m_rows=tuple(big_rows),
        big_m=m_global,
        io_bindings=(x_names, y_names),
    )


def _interval_eval(net: Network, box) -> dict[int, list[tuple[Fraction, Fraction]]]:
    if box is None:
        raise UnboundedError("an input box is required to bound internal signals")
    iv = [(rat(lo), rat(hi)) for lo, hi in box]
    if len(iv) != net.input_dim:
        raise DimError(f"box has {len(iv)} coordinates, input dim is {net.input_dim}")
    for lo, hi in iv:
        if lo > hi:
            raise UnboundedError(f"empty interval [{lo}, {hi}]")
    out: dict[int, list[tuple[Fraction, Fraction]]] = {}
    for nid in net.topo:
        node = net.nodes[nid]
        if isinstance(node, Input):
            out[nid] = list(iv)
        elif isinstance(node, Affine):
            stacked: list[tuple[Fraction, Fraction]] = []
            for c in node.children:
                stacked.extend(out[c])
            rows = []
            for comp in range(node.out_dim):
                lo = hi = node.b[comp]
                for coeff, (clo, chi) in zip(node.a[comp], stacked):
                    if coeff >= 0:
                        lo += coeff * clo
                        hi += coeff * chi
                    else:
                        lo += coeff * chi
                        hi += coeff * clo
                rows.append((lo, hi))
            out[nid] = rows
        else:
            out[nid] = [
                (min(flo, slo), max(fhi, shi))
                for (flo, fhi), (slo, shi) in zip(out[node.first], out[node.second])
            ]
    return out


def derive_big_m(net: Network, input_box) -> Fraction:
    """Interval-propagated bound dominating every internal signal, times 2."""
    intervals = _interval_eval(net, input_box)
    mag = Fraction(0)
    for rows in intervals.values():
        for lo, hi in rows:
            mag = max(mag, abs(lo), abs(hi))
    return mag * 2 if mag > 0 else Fraction(1)


def _per_mux_bounds(net: Network, box) -> dict[int, Fraction]:
    intervals = _interval_eval(net, box)
    bounds: dict[int, Fraction] = {}
    for nid in net.mux_ids:
        node = net.nodes[nid]
        mag = Fraction(0)
        for ref in (nid, node.first, node.second, node.guard):
            for lo, hi in intervals[ref]:
                mag = max(mag, abs(lo), abs(hi))
        bounds[nid] = mag * 2 if mag > 0 else Fraction(1)
    return bounds


def _lp_terms(row: MipRow) -> str:
    parts = []
    for name, coeff in (*row.real_terms, *row.bin_terms):
        if coeff < 0:
            parts.append(f"- {decimal_str(-coeff)} {name}")
        else:
            lead = "+ " if parts else ""
            parts.append(f"{lead}{decimal_str(coeff)} {name}")
    return " ".join(parts) if parts else "0 x_dummy"


def emit_lp(model: MipModel, eps_strict=Fraction(1, 10**9)) -> str:
    """CPLEX-LP text.  Strict rows are relaxed by ``eps_strict`` because
    the format has no strict inequalities; the header records this."""
    eps = rat(eps_strict)
    lines = [
        f"\\ strict inequalities relaxed by eps_strict={decimal_str(eps)}",
        "Minimize",
        " obj: 0",
        "Subject To",
    ]
    for i, row in enumerate(model.rows):
        if row.rel == "<":
            rel, rhs = "<=", row.rhs - eps
        else:
            rel, rhs = row.rel, row.rhs
        lines.append(f" c{i}: {_lp_terms(row)} {rel} {decimal_str(rhs)}")
    lines.append("Bounds")
    lines.extend(f" {name} free" for name in model.real_vars)
    if model.bin_vars:
        lines.append("Binary")
        lines.extend(f" {name}" for name in model.bin_vars)
    lines.append("End")
    return "\n".join(lines) + "\n"
