"""Knill-Laflamme violation, KL cost and noise-strength sweeps.

For logical states ``i, j`` and a Kraus family ``{K_a}`` the violation is

    V_ij = sum_{a,b} | delta_ij + (-1)^delta_ij <i|K_a^dag K_b|j> |

so off-diagonal entries sum ``|<i|K_a^dag K_b|j>|`` and diagonal entries sum
``|1 - <i|K_a^dag K_b|i>|``. Note that the diagonal form compares every product
against 1, so it has a floor of roughly ``(j_max + 1)^2`` even for a code that
corrects the channel perfectly; it is reported as defined.

Two evaluation routes exist. ``gram`` forms all ``K_a|i>`` and ``K_b|j>`` and
takes their Gram matrix; it works for any family. ``moments`` is specific to the
diagonal dephasing family: ``<i|K_a^dag K_b|j>`` depends on ``a, b`` only through
``1/sqrt(a! b!)`` and ``s = a + b``, so the double sum collapses to a single sum
over ``s`` (see ``_kernels``). It scales to the very large ``j_max`` that
dephasing needs at high cutoffs, where the Gram route cannot be stored.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import _kernels
from .codewords import (
    Basis,
    CodeSpec,
    CodewordPair,
    Family,
    build_pair,
)
from .errors import SqvacError, UncertifiedKrausSet, ValidationError
from .fockspace import FockVector
from .noise import ChannelKind, ChannelSpec, KrausSet, make_kraus

__all__ = [
    "dual_basis",
    "kl_violation",
    "kl_cost",
    "KLCost",
    "KLReport",
    "sweep",
    "evaluate_point",
    "CSV_COLUMNS",
    "reports_to_csv",
    "reports_to_json",
]

CONVERGENCE_FACTOR = 1.4
_GRAM_CHUNK = 2048


def dual_basis(pair: CodewordPair, tol: float = 1e-8) -> CodewordPair:
    """``(|0> + |1>)/sqrt2, (|0> - |1>)/sqrt2``; applying it twice gives back the input."""
    for v in (pair.zero_L, pair.one_L):
        if abs(v.norm() - 1.0) > tol:
            raise ValidationError("dual_basis needs normalized codewords")
    if abs(pair.overlap()) > tol:
        raise ValidationError("dual_basis needs orthogonal codewords")
    z, o = pair.zero_L.amplitudes, pair.one_L.amplitudes
    plus = FockVector((z + o) / math.sqrt(2.0)).normalized()
    minus = FockVector((z - o) / math.sqrt(2.0)).normalized()
    basis = Basis.DUAL if pair.basis is Basis.COMPUTATIONAL else Basis.COMPUTATIONAL
    return CodewordPair(plus, minus, pair.spec, pair.construction, basis)


def _check_inputs(bra: FockVector, ket: FockVector, kraus: KrausSet) -> None:
    if not kraus.certified:
        raise UncertifiedKrausSet(
            f"Kraus family has completeness defect {kraus.completeness_defect:.3g} "
            f"> {kraus.tolerance:.3g}")
    if bra.dim != kraus.dim or ket.dim != kraus.dim:
        raise ValidationError(
            f"dimension mismatch: states {bra.dim}/{ket.dim}, Kraus family {kraus.dim}")


def _violation_gram(bra: FockVector, ket: FockVector, diagonal: bool, kraus: KrausSet) -> float:
    total = 0.0
    w = kraus.stack(ket)
    for start in range(0, kraus.size, _GRAM_CHUNK):
        u = kraus.stack(bra, slice(start, start + _GRAM_CHUNK))
        g = u.conj() @ w.T
        total += float(np.sum(np.abs(1.0 - g))) if diagonal else float(np.sum(np.abs(g)))
    return total


def _violation_moments(bra: FockVector, ket: FockVector, diagonal: bool, kraus: KrausSet) -> float:
    J = kraus.j_max
    g = kraus.gamma
    if g == 0.0:
        val = complex(np.vdot(bra.amplitudes, ket.amplitudes))
        return abs(1.0 - val) if diagonal else abs(val)
    if diagonal:
        # every product <i|K_a K_b|i> is real and in [0, 1], so |1 - x| = 1 - x and the
        # double sum is (J+1)^2 minus sum_n |c_n|^2 (sum_a k_a(n))^2
        p = np.abs(bra.amplitudes) ** 2
        levels = np.flatnonzero(p)
        s = sum(p[n] * _kernels.sqrt_poisson_sum(g * n * n, J) ** 2 for n in levels)
        return float((J + 1) ** 2 - s)
    w = np.conj(bra.amplitudes) * ket.amplitudes
    levels = np.flatnonzero(w)
    if levels.size == 0:
        return 0.0
    log_g = _kernels.log_pair_sums(J)
    return float(_kernels.dephasing_offdiag_sum(
        np.ascontiguousarray(w[levels].real), np.ascontiguousarray(w[levels].imag),
        levels.astype(np.int64), g, log_g))


def kl_violation(braket_pair, i_equals_j: bool, kraus: KrausSet, method: str = "auto") -> float:
    """``V_ij`` for ``braket_pair = (|i>, |j>)``.

    ``method`` is ``"gram"``, ``"moments"`` (dephasing only) or ``"auto"``, which
    picks ``moments`` for dephasing and ``gram`` otherwise. The diagonal moments
    shortcut needs ``|i> == |j>``; other diagonal requests go through ``gram``.
    """
    bra, ket = braket_pair
    _check_inputs(bra, ket, kraus)
    if method == "auto":
        method = "moments" if kraus.is_diagonal else "gram"
    if method == "moments":
        if not kraus.is_diagonal:
            raise ValidationError("the moments route applies to the dephasing family only")
        if i_equals_j and not np.array_equal(bra.amplitudes, ket.amplitudes):
            method = "gram"
        else:
            return _violation_moments(bra, ket, i_equals_j, kraus)
    if method != "gram":
        raise ValidationError(f"unknown method {method!r}")
    return _violation_gram(bra, ket, i_equals_j, kraus)


@dataclass(frozen=True)
class KLCost:
    total: float
    components: dict  # (i, j) -> V_ij


def kl_cost(pair: CodewordPair, kraus: KrausSet, method: str = "auto") -> KLCost:
    """Sum of ``V_ij`` over the four logical index pairs, with the components."""
    comps = {}
    for i in (0, 1):
        for j in (0, 1):
            comps[(i, j)] = kl_violation((pair.codeword(i), pair.codeword(j)), i == j, kraus, method)
    return KLCost(float(sum(comps.values())), comps)


# -- sweeps --------------------------------------------------------------------------

@dataclass
class KLReport:
    code: CodeSpec
    channel: ChannelSpec
    basis: Basis
    pairs: list  # (i, j, V)
    truncation: dict  # n_max, j_max, completeness_defect
    nbar: float = math.nan
    valid: bool = False
    converged: bool | None = None
    refined: dict = field(default_factory=dict)  # (i, j) -> V at the larger cutoff
    error: str = ""

    def value(self, i: int, j: int) -> float:
        for a, b, v in self.pairs:
            if (a, b) == (i, j):
                return v
        raise KeyError((i, j))


def _labels(basis: Basis, idx: int) -> str:
    if basis is Basis.DUAL:
        return "+" if idx == 0 else "-"
    return str(idx)


def _violations(pair: CodewordPair, kraus: KrausSet, pairs) -> list:
    return [(i, j, kl_violation((pair.codeword(i), pair.codeword(j)), i == j, kraus))
            for i, j in pairs]


def _converged(v0: float, v1: float) -> bool:
    return abs(v1 - v0) <= max(0.01 * abs(v0), 1e-10)


def evaluate_point(code: CodeSpec, kind: ChannelKind, gamma: float, basis: Basis = Basis.COMPUTATIONAL,
                   pairs=((0, 1),), epsilon: float = 1e-12, check_convergence: bool = True) -> KLReport:
    """One ``(code, gamma)`` sweep point; failures are captured in the report, not raised."""
    basis = Basis(basis)
    kind = ChannelKind(kind)
    channel = None
    try:
        channel = ChannelSpec(kind, gamma, code.n_max, epsilon)
        with threadpool_limits(1):
            pair = build_pair(code)
            nbar = pair.zero_L.mean_photon_number()
            if basis is Basis.DUAL:
                pair = dual_basis(pair)
            kraus = make_kraus(channel)
            report = KLReport(code, channel, basis, [], {
                "n_max": code.n_max, "j_max": kraus.j_max,
                "completeness_defect": kraus.completeness_defect}, nbar)
            report.valid = kraus.certified
            if not report.valid:
                report.error = "completeness defect above tolerance"
                return report
            report.pairs = _violations(pair, kraus, pairs)
            if check_convergence:
                big = code.with_n_max(int(math.ceil(CONVERGENCE_FACTOR * code.n_max)))
                pair2 = build_pair(big)
                if basis is Basis.DUAL:
                    pair2 = dual_basis(pair2)
                kraus2 = make_kraus(ChannelSpec(kind, gamma, big.n_max, epsilon))
                report.refined = {(i, j): v for i, j, v in _violations(pair2, kraus2, pairs)}
                report.converged = all(_converged(v, report.refined[(i, j)]) for i, j, v in report.pairs)
            return report
    except (SqvacError, ValueError, MemoryError) as exc:
        return KLReport(code, channel, basis, [], {"n_max": code.n_max, "j_max": -1,
                                                    "completeness_defect": math.nan},
                        error=f"{type(exc).__name__}: {exc}")


def _evaluate_args(args):
    return evaluate_point(*args)


def sweep(codes, channel_kind, gammas, basis: Basis = Basis.COMPUTATIONAL, pairs=((0, 1),),
          jobs: int = 1, epsilon: float = 1e-12, check_convergence: bool = True) -> list[KLReport]:
    """Evaluate every ``(code, gamma)`` point, codes outermost, in input order.

    Points are independent and pure, so ``jobs > 1`` only changes wall time: the
    returned list is ordered by input index and numerically identical.
    """
    tasks = [(code, ChannelKind(channel_kind), float(g), Basis(basis), tuple(pairs), epsilon,
              check_convergence) for code in codes for g in gammas]
    if not tasks:
        return []
    if jobs <= 1:
        return [_evaluate_args(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_args, tasks))


CSV_COLUMNS = ["family", "m", "strength", "nbar", "channel", "basis", "gamma", "i", "j", "V",
               "n_max", "j_max", "defect", "valid", "converged", "error"]


def _rows(reports):
    for rep in reports:
        base = {
            "family": rep.code.family.value, "m": rep.code.m, "strength": rep.code.strength,
            "nbar": rep.nbar, "channel": rep.channel.kind.value if rep.channel else "",
            "basis": rep.basis.value, "gamma": rep.channel.gamma if rep.channel else math.nan,
            "n_max": rep.truncation["n_max"], "j_max": rep.truncation["j_max"],
            "defect": rep.truncation["completeness_defect"], "valid": rep.valid,
            "converged": rep.converged, "error": rep.error,
        }
        if not rep.pairs:
            yield {**base, "i": "", "j": "", "V": math.nan}
        for i, j, v in rep.pairs:
            yield {**base, "i": _labels(rep.basis, i), "j": _labels(rep.basis, j), "V": v}


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in _rows(reports):
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    rows = []
    for row in _rows(reports):
        rows.append({c: (None if isinstance(row[c], float) and math.isnan(row[c]) else row[c])
                     for c in CSV_COLUMNS})
    return json.dumps({"columns": CSV_COLUMNS, "rows": rows}, indent=1)
