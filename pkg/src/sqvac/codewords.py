"""Logical codewords of the rotation-symmetric squeezed-vacuum and cat families.

A squeezed-vacuum codeword with ``m`` legs is a phased sum of ``m`` copies of a
squeezed vacuum elongated along ``pi j / m``. Summing the rotated copies acts as
a roots-of-unity filter on the Fock expansion, so ``psi_k`` lives only on levels
``2(l m + k*)`` with ``k* = (-k) mod m``. Both routes (operator sum and filtered
closed form) are implemented so they can be checked against each other.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from .errors import ConvergenceError, CutoffError, DegenerateCodewordError, ValidationError
from .fockspace import (
    DEFAULT_TOLERANCES,
    FockVector,
    ToleranceConfig,
    coherent_cutoff,
    squeezed_vacuum_log_amplitudes,
    suggest_cutoff,
)
from .gaussian import (
    SqueezeParams,
    displacement_unitary,
    squeeze_unitary,
)

__all__ = [
    "Family",
    "Construction",
    "Basis",
    "CodeSpec",
    "CodewordPair",
    "psi_k_superposition",
    "psi_k_closed_form",
    "build_pair",
    "cat_pair",
    "mean_photon_number",
    "cat_mean_photon_number",
    "calibrate_cat_alpha",
    "calibrate_squeezing_r",
    "phase_sharpness",
    "support_summary",
    "pair_to_json",
    "pair_from_json",
]

SERIES_REL_TOL = 1e-16
SERIES_MAX_TERMS = 100_000


class Family(str, enum.Enum):
    SQUEEZED = "squeezed"
    CAT = "cat"


class Construction(str, enum.Enum):
    SUPERPOSITION = "superposition"
    CLOSED_FORM = "closed_form"


class Basis(str, enum.Enum):
    COMPUTATIONAL = "computational"
    DUAL = "dual"


def _check_even_m(m) -> int:
    if int(m) != m or m < 2 or m % 2:
        raise ValidationError(f"number of legs must be an even integer >= 2, got {m!r}")
    return int(m)


def _check_strength(x) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValidationError(f"strength must be finite and >= 0, got {x}")
    return x


@dataclass(frozen=True)
class CodeSpec:
    """Identifies a codeword pair; ``strength`` is ``r`` (squeezed) or ``|alpha|`` (cat).

    ``n_max=None`` resolves to a default cutoff for the family and strength.
    """

    family: Family
    m: int
    strength: float
    n_max: int | None = None

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ValidationError(f"unknown code family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "m", _check_even_m(self.m))
        object.__setattr__(self, "strength", _check_strength(self.strength))
        n_max = self.n_max
        if n_max is None:
            n_max = default_cutoff(family, self.strength)
        if int(n_max) != n_max or n_max < 2:
            raise ValidationError(f"n_max must be an integer >= 2, got {n_max!r}")
        object.__setattr__(self, "n_max", int(n_max))

    def with_n_max(self, n_max: int) -> "CodeSpec":
        return CodeSpec(self.family, self.m, self.strength, n_max)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "m": self.m, "strength": self.strength,
                "n_max": self.n_max}


def default_cutoff(family: Family, strength: float) -> int:
    if Family(family) is Family.SQUEEZED:
        return suggest_cutoff(strength)
    return coherent_cutoff(strength)


@dataclass(frozen=True, eq=False)
class CodewordPair:
    zero_L: FockVector
    one_L: FockVector
    spec: CodeSpec
    construction: Construction = Construction.CLOSED_FORM
    basis: Basis = Basis.COMPUTATIONAL

    def __post_init__(self):
        if self.zero_L.dim != self.one_L.dim:
            raise ValidationError("codewords must share a cutoff")

    def overlap(self) -> complex:
        return self.zero_L.inner(self.one_L)

    def codeword(self, logical: int) -> FockVector:
        if logical not in (0, 1):
            raise ValidationError(f"logical index must be 0 or 1, got {logical!r}")
        return self.zero_L if logical == 0 else self.one_L


# -- squeezed-vacuum family -------------------------------------------------------

def _filtered_log_amplitudes(m: int, k: int, r: float):
    """Surviving half-levels ``q = l m + k*`` and the log of their (unnormalized) weights.

    Terms run until they drop below ``SERIES_REL_TOL`` of the largest one. The ``1/sqrt(cosh r)`` prefactor is common to all terms
    and dropped.
    """
    kstar = (-k) % m
    if r == 0.0:
        q = np.array([kstar])
        return q, np.array([0.0 if kstar == 0 else -np.inf])
    qs, logs = [], []
    peak = -np.inf
    start = 0
    chunk = 512
    while True:
        ell = np.arange(start, start + chunk)
        q = ell * m + kstar
        la = squeezed_vacuum_log_amplitudes(q, r) + 0.5 * math.log(math.cosh(r))
        qs.append(q)
        logs.append(la)
        peak = max(peak, float(la.max()))
        start += chunk
        # terms are eventually decreasing; stop once the last one is negligible
        if 2 * (la[-1] - peak) < math.log(SERIES_REL_TOL) and la[-1] < la[-2]:
            break
        if start >= SERIES_MAX_TERMS:
            raise ConvergenceError(
                f"codeword series did not converge within {SERIES_MAX_TERMS} terms (m={m}, r={r})")
    q = np.concatenate(qs)
    la = np.concatenate(logs)
    return q, la


def _squeezed_tail(m: int, k: int, r: float, n_max: int) -> float:
    q, la = _filtered_log_amplitudes(m, k, r)
    if not np.isfinite(la).any():
        return 0.0
    logw = 2 * la
    log_norm = logsumexp(logw)
    beyond = 2 * q > n_max
    if not beyond.any():
        return 0.0
    return float(np.exp(logsumexp(logw[beyond]) - log_norm))


def _psi_closed_form(m: int, k: int, r: float, n_max: int,
                     tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> FockVector:
    """Closed-form ``psi_k`` for any ``m >= 1`` (odd ``m`` is used by circuit targets)."""
    if int(m) != m or m < 1:
        raise ValidationError(f"number of legs must be a positive integer, got {m!r}")
    if int(k) != k or not 0 <= k < m:
        raise ValidationError(f"k must be an integer in [0, {m - 1}], got {k!r}")
    r = _check_strength(r)
    q, la = _filtered_log_amplitudes(int(m), int(k), r)
    if not np.isfinite(la).any():
        raise DegenerateCodewordError(
            f"psi_{k} of the {m}-legged code vanishes at r=0 and cannot be normalized")
    logw = 2 * la
    log_norm = logsumexp(logw)
    beyond = 2 * q > n_max
    tail = float(np.exp(logsumexp(logw[beyond]) - log_norm)) if beyond.any() else 0.0
    if tail > tail_tol:
        raise CutoffError(
            f"n_max={n_max} drops probability {tail:.3g} > {tail_tol:g} of psi_{k} (m={m}, r={r}); "
            f"try n_max >= {suggest_cutoff(r)}")
    amps = np.zeros(n_max + 1, dtype=complex)
    keep = ~beyond
    amps[2 * q[keep]] = np.exp(la[keep] - 0.5 * log_norm)
    return FockVector(amps)


def psi_k_closed_form(m: int, k: int, r: float, n_max: int,
                      tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> FockVector:
    """``psi_k`` from the filtered Fock series, normalized by the full infinite series.

    Nonzero only on ``|2(l m + k*)>``; the retained norm is ``1 - tail`` with the
    tail bounded by ``tail_tol``.
    """
    return _psi_closed_form(_check_even_m(m), k, r, n_max, tail_tol)


def _psi_superposition(m: int, k: int, r: float, n_max: int,
                       tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> FockVector:
    if int(k) != k or not 0 <= k < m:
        raise ValidationError(f"k must be an integer in [0, {m - 1}], got {k!r}")
    r = _check_strength(r)
    if r > 0:
        tail = _squeezed_tail(m, k, r, n_max)
        if tail > tail_tol:
            raise CutoffError(f"n_max={n_max} drops probability {tail:.3g} of psi_{k} (m={m}, r={r})")
    vac = FockVector.vacuum(n_max)
    total = np.zeros(n_max + 1, dtype=complex)
    for j in range(m):
        leg = squeeze_unitary(SqueezeParams(r, math.pi * j / m), n_max) @ vac
        total += np.exp(2j * math.pi * j * k / m) * leg.amplitudes
    if np.linalg.norm(total) <= 1e-10 * m:
        raise DegenerateCodewordError(
            f"psi_{k} of the {m}-legged code has vanishing norm at r={r}")
    return FockVector(total).normalized().with_phase_convention()


def psi_k_superposition(m: int, k: int, r: float, n_max: int,
                        tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> FockVector:
    """``psi_k`` as a phased sum of ``m`` rotated squeezed vacua, each built by ``expm``."""
    return _psi_superposition(_check_even_m(m), k, r, n_max, tail_tol)


# -- cat family ----------------------------------------------------------------------

def _cat_legs(m: int, alpha_abs: float, n_max: int):
    vac = FockVector.vacuum(n_max)
    for j in range(m):
        alpha = alpha_abs * np.exp(2j * math.pi * j / m)
        yield (displacement_unitary(alpha, n_max) @ vac).amplitudes


def _cat_closed_form(m: int, alpha_abs: float, n_max: int, offset: int) -> np.ndarray:
    """Roots-of-unity filter of a coherent state: ``alpha^n / sqrt(n!)`` on ``n = offset mod m``."""
    amps = np.zeros(n_max + 1, dtype=complex)
    if alpha_abs == 0.0:
        if offset == 0:
            amps[0] = 1.0
        return amps
    n = np.arange(offset, n_max + 1, m)
    logmag = n * math.log(alpha_abs) - 0.5 * gammaln(n + 1)
    amps[n] = np.exp(logmag - logmag.max())
    return amps


def cat_pair(m: int, alpha_abs: float, n_max: int | None = None,
             construction: Construction = Construction.CLOSED_FORM,
             tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> CodewordPair:
    """m-legged cat pair: equal and alternating-sign sums of coherent states at ``|alpha| e^{2 pi i j/m}``.

    The closed form keeps the Fock levels that survive the phased leg sum
    (``n = 0`` and ``n = m/2 mod m``); the superposition route sums displaced vacua.
    """
    spec = CodeSpec(Family.CAT, m, alpha_abs, n_max)
    construction = Construction(construction)
    tail = float(poisson.sf(spec.n_max, spec.strength ** 2))
    if tail > tail_tol:
        raise CutoffError(f"n_max={spec.n_max} drops coherent probability {tail:.3g} for |alpha|={alpha_abs}")
    if construction is Construction.CLOSED_FORM:
        zero = _cat_closed_form(spec.m, spec.strength, spec.n_max, 0)
        one = _cat_closed_form(spec.m, spec.strength, spec.n_max, spec.m // 2)
    else:
        zero = np.zeros(spec.n_max + 1, dtype=complex)
        one = np.zeros(spec.n_max + 1, dtype=complex)
        for j, leg in enumerate(_cat_legs(spec.m, spec.strength, spec.n_max)):
            zero += leg
            one += (-1) ** j * leg
    if np.linalg.norm(one) <= 1e-10 * spec.m:
        raise DegenerateCodewordError(f"cat logical-1 vanishes at |alpha|={alpha_abs}")
    return CodewordPair(
        FockVector(zero).normalized().with_phase_convention(),
        FockVector(one).normalized().with_phase_convention(),
        spec, construction)


def build_pair(spec: CodeSpec, construction: Construction = Construction.CLOSED_FORM) -> CodewordPair:
    """Logical pair ``(psi_0, psi_{m/2})`` for squeezed codes, or the cat pair."""
    construction = Construction(construction)
    if spec.family is Family.CAT:
        return cat_pair(spec.m, spec.strength, spec.n_max, construction)
    build = psi_k_closed_form if construction is Construction.CLOSED_FORM else psi_k_superposition
    zero = build(spec.m, 0, spec.strength, spec.n_max)
    one = build(spec.m, spec.m // 2, spec.strength, spec.n_max)
    return CodewordPair(zero, one, spec, construction)


# -- mean photon number and calibration ---------------------------------------------

def mean_photon_number(m: int, k: int, r: float) -> float:
    """Mean photon number of the untruncated ``psi_k`` of the ``m``-legged squeezed code.

    Accepts any ``m >= 1``; ``m = 1`` is the bare squeezed vacuum.
    """
    if int(m) != m or m < 1:
        raise ValidationError(f"number of legs must be a positive integer, got {m!r}")
    if int(k) != k or not 0 <= k < m:
        raise ValidationError(f"k must be an integer in [0, {m - 1}], got {k!r}")
    r = _check_strength(r)
    q, la = _filtered_log_amplitudes(int(m), int(k), r)
    if not np.isfinite(la).any():
        raise DegenerateCodewordError(f"psi_{k} of the {m}-legged code vanishes at r=0")
    w = np.exp(2 * (la - la.max()))
    return float(np.sum(2 * q * w) / np.sum(w))


def cat_mean_photon_number(m: int, alpha_abs: float, logical: int = 0) -> float:
    """Mean photon number of the untruncated cat codeword (Poisson weights on its support)."""
    m = _check_even_m(m)
    alpha_abs = _check_strength(alpha_abs)
    offset = 0 if logical == 0 else m // 2
    mu = alpha_abs ** 2
    if mu == 0.0:
        if offset:
            raise DegenerateCodewordError("cat logical-1 vanishes at alpha=0")
        return 0.0
    top = int(mu + 40 * math.sqrt(mu) + 200)
    n = np.arange(offset, top + 1, m)
    logp = n * math.log(mu) - gammaln(n + 1)
    w = np.exp(logp - logp.max())
    return float(np.sum(n * w) / np.sum(w))


def _bisect(f, lo: float, hi: float, target: float, tol: float, max_iter: int, what: str) -> float:
    flo = f(lo)
    fhi = f(hi)
    for _ in range(60):
        if fhi >= target:
            break
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = f(hi)
    else:
        raise ConvergenceError(f"{what}: could not bracket target {target}")
    if abs(fhi - target) <= tol:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm - target) <= tol:
            return mid
        if fm < target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"{what}: no convergence to {tol:g} after {max_iter} iterations")


def calibrate_cat_alpha(m: int, target_nbar: float, tol: float = 1e-6, max_iter: int = 200) -> float:
    """``|alpha|`` whose cat logical-0 has mean photon number ``target_nbar``.

    Bisection on ``(0, sqrt(4 target))``; the upper end is doubled if it does not
    bracket the target (possible for many legs at small targets).
    """
    m = _check_even_m(m)
    if not target_nbar > 0:
        raise ValidationError("target mean photon number must be positive")
    return _bisect(lambda a: cat_mean_photon_number(m, a), 0.0, math.sqrt(4 * target_nbar),
                   target_nbar, tol, max_iter, "calibrate_cat_alpha")


def calibrate_squeezing_r(m: int, target_nbar: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Squeezing ``r`` whose logical-0 (``psi_0``) has mean photon number ``target_nbar``."""
    if int(m) != m or m < 1:
        raise ValidationError(f"number of legs must be a positive integer, got {m!r}")
    if not target_nbar > 0:
        raise ValidationError("target mean photon number must be positive")
    return _bisect(lambda r: mean_photon_number(m, 0, r), 0.0, 1.0,
                   target_nbar, tol, max_iter, "calibrate_squeezing_r")


# -- diagnostics ---------------------------------------------------------------------

def phase_sharpness(v: FockVector, n_angles: int = 1024) -> float:
    """Peak of ``|sum_n c_n e^{-i n theta}|^2 / (n_max + 1)`` over a uniform angle grid.

    A proxy for how well the phase is localized: a Fock state gives ``1/(n_max+1)``
    and a perfectly phase-localized state approaches 1.
    """
    if n_angles < 1:
        raise ValidationError("n_angles must be positive")
    theta = 2 * math.pi * np.arange(n_angles) / n_angles
    n = np.arange(v.dim)
    amps = np.exp(-1j * np.outer(theta, n)) @ v.amplitudes
    return float(np.max(np.abs(amps) ** 2) / v.dim)


def allowed_residues(pair: CodewordPair) -> tuple[int, int, int]:
    """``(modulus, residue of zero_L, residue of one_L)`` for the pair's Fock support."""
    m = pair.spec.m
    if pair.spec.family is Family.SQUEEZED:
        return 2 * m, 0, m
    return m, 0, m // 2


def off_support_mass(v: FockVector, modulus: int, residue: int) -> float:
    n = np.arange(v.dim)
    return float(np.sum(v.probabilities()[n % modulus != residue]))


def support_summary(pair: CodewordPair, n_levels: int = 20,
                    tol: ToleranceConfig | None = None) -> dict:
    tol = tol or DEFAULT_TOLERANCES
    modulus, r0, r1 = allowed_residues(pair)
    out = {}
    for name, v, res in (("zero_L", pair.zero_L, r0), ("one_L", pair.one_L, r1)):
        occupied = np.flatnonzero(v.probabilities() > tol.tail_tol)
        out[name] = {
            "first_levels": [int(n) for n in occupied[:n_levels]],
            "allowed": f"n = {res} mod {modulus}",
            "off_support_mass": off_support_mass(v, modulus, res),
            "tail_mass": v.tail_mass(tol.guard_band),
            "mean_photon_number": v.mean_photon_number(),
        }
    out["overlap_abs"] = abs(pair.overlap())
    return out


# -- serialization -------------------------------------------------------------------

def _encode(v: FockVector) -> list:
    return [[float(c.real), float(c.imag)] for c in v.amplitudes]


def _decode(rows) -> FockVector:
    arr = np.asarray(rows, dtype=float)
    return FockVector(arr[:, 0] + 1j * arr[:, 1])


def pair_to_dict(pair: CodewordPair) -> dict:
    return {
        "spec": pair.spec.to_dict(),
        "construction": pair.construction.value,
        "basis": pair.basis.value,
        "zero_L": _encode(pair.zero_L),
        "one_L": _encode(pair.one_L),
        "norm_residual": {
            "zero_L": abs(pair.zero_L.norm() ** 2 - 1.0),
            "one_L": abs(pair.one_L.norm() ** 2 - 1.0),
        },
    }


def pair_to_json(pair: CodewordPair) -> str:
    # json writes floats with repr, which round-trips binary64 exactly
    return json.dumps(pair_to_dict(pair), indent=1)


def pair_from_json(text: str) -> CodewordPair:
    d = json.loads(text)
    s = d["spec"]
    spec = CodeSpec(Family(s["family"]), s["m"], s["strength"], s["n_max"])
    return CodewordPair(_decode(d["zero_L"]), _decode(d["one_L"]), spec,
                        Construction(d["construction"]), Basis(d.get("basis", "computational")))
