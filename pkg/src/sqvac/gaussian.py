"""Gaussian unitaries on the truncated Fock space: squeezing, rotation, displacement."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import ValidationError
from .fockspace import (
    DEFAULT_TOLERANCES,
    FockOperator,
    FockVector,
    annihilation,
    creation,
    expm,
    squeezed_vacuum_log_amplitudes,
)

__all__ = [
    "SqueezeParams",
    "TruncationWarning",
    "squeeze_phase",
    "squeeze_unitary",
    "rotation_unitary",
    "displacement_unitary",
    "squeezed_vacuum_fock",
    "coherent_state_fock",
]


class TruncationWarning(UserWarning):
    """Emitted when a state built at a given cutoff carries non-negligible tail mass."""


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing magnitude ``r`` and elongation direction ``theta``.

    ``theta`` is reduced to ``[0, pi)`` because a squeezed vacuum elongated along
    ``theta`` and ``theta + pi`` are the same state.
    """

    r: float
    theta: float = 0.0

    def __post_init__(self):
        r = float(self.r)
        theta = float(self.theta)
        if not (math.isfinite(r) and math.isfinite(theta)):
            raise ValidationError("squeezing parameters must be finite")
        if r < 0:
            raise ValidationError(f"squeezing magnitude must be >= 0, got {r}")
        theta = math.fmod(theta, math.pi)
        if theta < 0:
            theta += math.pi
        if theta >= math.pi:  # fmod round-off on values just below a multiple of pi
            theta = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)

    @property
    def phi(self) -> float:
        return squeeze_phase(self.theta)

    @property
    def zeta(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)


def squeeze_phase(theta: float) -> float:
    """Phase of the complex squeezing parameter for elongation direction ``theta``."""
    return math.fmod(2.0 * theta + math.pi, 2.0 * math.pi)


def squeeze_unitary(p: SqueezeParams, n_max: int) -> FockOperator:
    """``S(zeta) = exp[(conj(zeta) a^2 - zeta a^dag^2) / 2]`` with ``zeta = r e^{i phi(theta)}``."""
    if n_max < 2:
        raise ValidationError(f"squeeze_unitary needs n_max >= 2, got {n_max}")
    return _squeeze_cached(p.r, p.theta, int(n_max))


@lru_cache(maxsize=64)
def _squeeze_cached(r: float, theta: float, n_max: int) -> FockOperator:
    p = SqueezeParams(r, theta)
    zeta = p.zeta
    # theta = 0 and pi/2 give real zeta; keep the generator real then
    if abs(zeta.imag) <= 1e-15 * max(abs(zeta), 1.0):
        zeta = complex(zeta.real, 0.0)
    a = annihilation(n_max).matrix
    ad = creation(n_max).matrix
    gen = 0.5 * (np.conj(zeta) * (a @ a) - zeta * (ad @ ad))
    if zeta.imag == 0.0:
        gen = gen.real
    out = expm(FockOperator(gen, f"S({r:g},{theta:g})"))
    return out


def rotation_unitary(theta: float, n_max: int) -> FockOperator:
    """``R(theta) = exp(i theta n)``, counter-clockwise phase-space rotation."""
    if n_max < 1:
        raise ValidationError(f"rotation_unitary needs n_max >= 1, got {n_max}")
    n = np.arange(n_max + 1)
    return FockOperator(np.diag(np.exp(1j * theta * n)), f"R({theta:g})")


def displacement_unitary(alpha: complex, n_max: int,
                         tail_tol: float = DEFAULT_TOLERANCES.tail_tol,
                         guard_band: int = DEFAULT_TOLERANCES.guard_band) -> FockOperator:
    """``D(alpha) = exp(alpha a^dag - conj(alpha) a)``.

    Warns with :class:`TruncationWarning` when the coherent state ``D(alpha)|0>``
    puts more than ``tail_tol`` above ``n_max - guard_band``.
    """
    if n_max < 2:
        raise ValidationError(f"displacement_unitary needs n_max >= 2, got {n_max}")
    alpha = complex(alpha)
    if not cmath.isfinite(alpha):
        raise ValidationError("displacement amplitude must be finite")
    edge = n_max - guard_band
    if edge >= 0 and poisson.sf(edge, abs(alpha) ** 2) > tail_tol:
        warnings.warn(
            f"coherent tail beyond n={edge} exceeds {tail_tol:g} for |alpha|={abs(alpha):.4g}; "
            f"n_max={n_max} is too small", TruncationWarning, stacklevel=2)
    a = annihilation(n_max).matrix
    ad = creation(n_max).matrix
    gen = alpha * ad - np.conj(alpha) * a
    if alpha.imag == 0.0:
        gen = gen.real
    return expm(FockOperator(gen, f"D({alpha:g})"))


def squeezed_vacuum_fock(p: SqueezeParams, n_max: int) -> FockVector:
    """Closed-form ``S(r, theta)|0>`` truncated at ``n_max`` (not renormalized)."""
    amps = np.zeros(n_max + 1, dtype=complex)
    half = np.arange(n_max // 2 + 1)
    if p.r == 0.0:
        amps[0] = 1.0
        return FockVector(amps)
    mag = np.exp(squeezed_vacuum_log_amplitudes(half, p.r))
    amps[0::2] = mag * np.exp(2j * p.theta * half)
    return FockVector(amps)


def coherent_state_fock(alpha: complex, n_max: int) -> FockVector:
    """Closed-form coherent state ``e^{-|alpha|^2/2} alpha^n / sqrt(n!)`` (not renormalized)."""
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[0] = 1.0
        return FockVector(amps)
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return FockVector(np.exp(logmag + 1j * n * cmath.phase(alpha)))
