"""Truncated Fock-space linear algebra.

States live on ``{|0>, ..., |n_max>}`` as dense complex vectors and operators as
dense complex matrices. Everything here is immutable: arrays are copied on
construction and flagged read-only, so values can be shared freely between
threads and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, xlogy
from scipy.stats import poisson

from .errors import CutoffError, ValidationError

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOLERANCES",
    "FockVector",
    "FockOperator",
    "annihilation",
    "creation",
    "number_operator",
    "identity",
    "expm",
    "fidelity",
    "tail_mass",
    "suggest_cutoff",
    "coherent_cutoff",
    "squeezed_vacuum_log_amplitudes",
]


@dataclass(frozen=True)
class ToleranceConfig:
    norm_tol: float = 1e-10
    unitary_tol: float = 1e-8
    guard_band: int = 10
    tail_tol: float = 1e-12

    def __post_init__(self):
        for name in ("norm_tol", "unitary_tol", "tail_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.guard_band < 1:
            raise ValidationError("guard_band must be a positive integer")

    def check_cutoff(self, n_max: int) -> None:
        if self.guard_band >= n_max:
            raise CutoffError(f"guard_band={self.guard_band} must be smaller than n_max={n_max}")


DEFAULT_TOLERANCES = ToleranceConfig()


def _frozen_array(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FockVector:
    """Pure oscillator state; ``amplitudes[n]`` is the coefficient of ``|n>``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen_array(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise ValidationError("amplitudes must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, n: int, n_max: int) -> "FockVector":
        if not 0 <= n <= n_max:
            raise ValidationError(f"Fock level {n} outside 0..{n_max}")
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[n] = 1.0
        return cls(amps)

    @classmethod
    def vacuum(cls, n_max: int) -> "FockVector":
        return cls.basis(0, n_max)

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = DEFAULT_TOLERANCES.norm_tol) -> bool:
        return abs(float(np.sum(self.probabilities())) - 1.0) <= tol

    def normalized(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / nrm)

    def tail_mass(self, k: int) -> float:
        return tail_mass(self, k)

    def inner(self, other: "FockVector") -> complex:
        """``<self|other>``."""
        _check_same_dim(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: "FockOperator") -> complex:
        return self.inner(op @ self)

    def mean_photon_number(self) -> float:
        n = np.arange(self.dim)
        return float(np.sum(n * self.probabilities()) / np.sum(self.probabilities()))

    def with_phase_convention(self, rel_threshold: float = 1e-6) -> "FockVector":
        """Return the state rotated so its first significant amplitude is real-positive.

        "Significant" means ``|c_n| >= rel_threshold * max|c|``; this keeps round-off
        residue on off-support levels from choosing the phase.
        """
        mags = np.abs(self.amplitudes)
        peak = mags.max()
        if peak == 0.0:
            return self
        first = int(np.argmax(mags >= rel_threshold * peak))
        phase = self.amplitudes[first] / mags[first]
        return FockVector(self.amplitudes / phase)

    def resized(self, n_max: int) -> "FockVector":
        """Zero-pad (or cut) to a new cutoff; cutting may drop at most ``tail_tol`` probability."""
        if n_max < 0:
            raise ValidationError(f"n_max must be >= 0, got {n_max}")
        dropped = float(np.sum(self.probabilities()[n_max + 1:]))
        if dropped > DEFAULT_TOLERANCES.tail_tol:
            raise CutoffError(f"cutting to n_max={n_max} drops probability {dropped:.3g}")
        out = np.zeros(n_max + 1, dtype=complex)
        keep = min(n_max, self.n_max) + 1
        out[:keep] = self.amplitudes[:keep]
        return FockVector(out)

    def __add__(self, other: "FockVector") -> "FockVector":
        _check_same_dim(self, other)
        return FockVector(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _check_same_dim(self, other)
        return FockVector(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar) -> "FockVector":
        return FockVector(self.amplitudes * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on the truncated Fock space."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        mat = _frozen_array(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise ValidationError("operator matrix must be square and non-empty")
        object.__setattr__(self, "matrix", mat)

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T, f"{self.label}^dag" if self.label else "")

    def __matmul__(self, other):
        if isinstance(other, FockVector):
            if other.dim != self.dim:
                raise ValidationError(f"dimension mismatch: operator {self.dim}, vector {other.dim}")
            return FockVector(self.matrix @ other.amplitudes)
        if isinstance(other, FockOperator):
            if other.dim != self.dim:
                raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")
            label = f"{self.label}*{other.label}" if self.label and other.label else ""
            return FockOperator(self.matrix @ other.matrix, label)
        return NotImplemented

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if other.dim != self.dim:
            raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return FockOperator(self.matrix + other.matrix)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        if other.dim != self.dim:
            raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return FockOperator(self.matrix - other.matrix)

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.matrix * scalar, self.label)

    __rmul__ = __mul__

    def unitarity_residual(self, guard_band: int = DEFAULT_TOLERANCES.guard_band) -> float:
        """``max|U^dag U - I|`` on the block below the top ``guard_band`` levels."""
        keep = self.dim - guard_band
        if keep < 1:
            raise CutoffError(f"guard_band={guard_band} leaves nothing of a {self.dim}-dim space")
        u = self.matrix
        gram = u.conj().T @ u
        return float(np.max(np.abs(gram[:keep, :keep] - np.eye(keep))))

    def is_unitary(self, tol: float = DEFAULT_TOLERANCES.unitary_tol,
                   guard_band: int = DEFAULT_TOLERANCES.guard_band) -> bool:
        return self.unitarity_residual(guard_band) <= tol


def _check_same_dim(u: FockVector, v: FockVector) -> None:
    if u.dim != v.dim:
        raise ValidationError(f"dimension mismatch: n_max {u.n_max} vs {v.n_max}")


def _check_n_max(n_max: int, minimum: int = 1) -> int:
    if int(n_max) != n_max or n_max < minimum:
        raise ValidationError(f"n_max must be an integer >= {minimum}, got {n_max!r}")
    return int(n_max)


def annihilation(n_max: int) -> FockOperator:
    n_max = _check_n_max(n_max)
    return FockOperator(np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1), "a")


def creation(n_max: int) -> FockOperator:
    n_max = _check_n_max(n_max)
    return FockOperator(np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=-1), "a^dag")


def number_operator(n_max: int) -> FockOperator:
    n_max = _check_n_max(n_max)
    return FockOperator(np.diag(np.arange(n_max + 1, dtype=float)), "n")


def identity(n_max: int) -> FockOperator:
    n_max = _check_n_max(n_max, minimum=0)
    return FockOperator(np.eye(n_max + 1), "I")


def expm(generator: FockOperator) -> FockOperator:
    """Matrix exponential by scaling-and-squaring with Pade approximants.

    The generator is first split into the connected components of its sparsity
    graph (e.g. the even and odd parity sectors of a squeezing generator); each
    block is exponentiated on its own, which is exact and several times cheaper.
    """
    mat = generator.matrix
    if not np.all(np.isfinite(mat)):
        raise ValidationError("expm: generator contains NaN or Inf")
    if np.isrealobj(mat) or not np.any(mat.imag):
        work = mat.real
    else:
        work = mat
    pattern = csr_matrix((work != 0) | (work.T != 0))
    n_comp, labels = connected_components(pattern, directed=False)
    if n_comp == 1:
        out = scipy.linalg.expm(work)
    else:
        out = np.zeros(work.shape, dtype=work.dtype)
        for c in range(n_comp):
            idx = np.flatnonzero(labels == c)
            if idx.size == 1:
                out[idx[0], idx[0]] = np.exp(work[idx[0], idx[0]])
            else:
                block = np.ix_(idx, idx)
                out[block] = scipy.linalg.expm(work[block])
    return FockOperator(out, generator.label)


def fidelity(u: FockVector, v: FockVector) -> float:
    """``|<u|v>|^2``."""
    return abs(u.inner(v)) ** 2


def tail_mass(v: FockVector, k: int) -> float:
    """Probability carried by the top ``k`` levels, ``sum_{n > n_max - k} |c_n|^2``."""
    if k < 0:
        raise ValidationError("tail width must be non-negative")
    if k == 0:
        return 0.0
    return float(np.sum(v.probabilities()[-k:]))


def squeezed_vacuum_log_amplitudes(half: np.ndarray, r: float) -> np.ndarray:
    """Log-magnitude of ``<2n|S(r, theta)|0>`` for ``n = half``.

    ``log[ sqrt((2n)!) / (2^n n!) * tanh(r)^n / sqrt(cosh r) ]``; ``-inf`` where the
    amplitude vanishes (only ``r = 0``, ``n > 0``).
    """
    half = np.asarray(half, dtype=float)
    return (0.5 * gammaln(2 * half + 1) - half * math.log(2.0) - gammaln(half + 1)
            + xlogy(half, math.tanh(r)) - 0.5 * math.log(math.cosh(r)))


_MIN_CUTOFF = 20


def suggest_cutoff(r: float, safety: float = 1.5,
                   tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> int:
    """Cutoff for a squeezed vacuum of magnitude ``r``.

    Smallest ``n_max`` whose analytic tail ``sum_{2n > n_max} |c_2n|^2`` is at most
    ``tail_tol``, multiplied by ``safety`` and never below 20.
    """
    if r < 0 or not math.isfinite(r):
        raise ValidationError(f"squeezing magnitude must be finite and >= 0, got {r}")
    if safety < 1.0:
        raise ValidationError("safety factor must be >= 1")
    if r == 0.0:
        return _MIN_CUTOFF
    t2 = math.tanh(r) ** 2
    # |c_2n|^2 ~ t2^n / sqrt(pi n cosh r): enumerate well past the tolerance
    span = int(math.ceil((math.log(tail_tol) - 40.0) / math.log(t2))) + 10
    half = np.arange(span + 1)
    probs = np.exp(2.0 * squeezed_vacuum_log_amplitudes(half, r))
    tails = np.cumsum(probs[::-1])[::-1]  # tails[n] = sum_{n' >= n}
    # need tail strictly beyond n_max: first half-index h with tails[h] <= tol,
    # so levels 2h and above are dropped and n_max = 2h - 1
    h = int(np.argmax(tails <= tail_tol))
    base = max(2 * h - 1, 1)
    return max(int(math.ceil(base * safety)), _MIN_CUTOFF)


def coherent_cutoff(alpha_abs: float, safety: float = 1.5,
                    tail_tol: float = DEFAULT_TOLERANCES.tail_tol) -> int:
    """Cutoff for coherent states of modulus ``alpha_abs`` (Poisson tail <= tail_tol)."""
    if alpha_abs < 0 or not math.isfinite(alpha_abs):
        raise ValidationError(f"|alpha| must be finite and >= 0, got {alpha_abs}")
    if safety < 1.0:
        raise ValidationError("safety factor must be >= 1")
    mu = alpha_abs ** 2
    if mu == 0.0:
        return _MIN_CUTOFF
    n = int(poisson.isf(tail_tol, mu))
    while poisson.sf(n, mu) > tail_tol:
        n += 1
    while n > 0 and poisson.sf(n - 1, mu) <= tail_tol:
        n -= 1
    return max(int(math.ceil(max(n, 1) * safety)), _MIN_CUTOFF)
