"""Kraus families for photon loss and dephasing on the truncated Fock space.

Loss:       K_j = sqrt(gamma^j / j!) (1 - gamma)^{n/2} a^j,        j = 0..n_max
Dephasing:  K_j = sqrt(gamma^j / j!) exp(-gamma n^2 / 2) n^j,      j = 0..j_max

The damping factor of the loss operators sits to the left of ``a^j``, so it acts
on the lowered photon number. The dephasing series is infinite even on a
truncated space and is cut at the smallest ``j_max`` whose completeness defect
is at most ``epsilon``.

Operators are produced on demand rather than stored: at sweep cutoffs a
dephasing family can have tens of thousands of members.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, pdtrc

from .errors import KrausCapExceeded, ValidationError
from .fockspace import DEFAULT_TOLERANCES, FockOperator, FockVector

__all__ = [
    "ChannelKind",
    "ChannelSpec",
    "KrausSet",
    "DEPHASING_JMAX_CAP",
    "loss_kraus",
    "dephasing_kraus",
    "dephasing_defect",
    "make_kraus",
    "kl_matrix_element",
]

DEPHASING_JMAX_CAP = 200_000
_MATERIALIZE_LIMIT = 32_000_000  # complex entries; about 512 MB


class ChannelKind(str, enum.Enum):
    LOSS = "loss"
    DEPHASING = "dephasing"


@dataclass(frozen=True)
class ChannelSpec:
    kind: ChannelKind
    gamma: float
    n_max: int
    epsilon: float = 1e-12

    def __post_init__(self):
        try:
            kind = ChannelKind(self.kind)
        except ValueError:
            raise ValidationError(f"unknown channel {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        gamma = float(self.gamma)
        if not math.isfinite(gamma) or gamma < 0:
            raise ValidationError(f"noise strength gamma must be finite and >= 0, got {gamma}")
        if kind is ChannelKind.LOSS and gamma >= 1:
            raise ValidationError(f"loss strength gamma must be < 1, got {gamma}")
        object.__setattr__(self, "gamma", gamma)
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        if not self.epsilon > 0:
            raise ValidationError("completeness tolerance epsilon must be > 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "gamma": self.gamma, "n_max": self.n_max,
                "epsilon": self.epsilon}


@dataclass(frozen=True, eq=False)
class KrausSet:
    """A finite Kraus family with its completeness certificate.

    ``kind`` is ``"loss"``, ``"dephasing"`` or ``"explicit"`` (operators supplied by
    the caller). ``tolerance`` is the defect bound the family must meet to be used.
    """

    kind: str
    gamma: float
    n_max: int
    j_max: int
    completeness_defect: float
    tolerance: float
    _explicit: tuple = field(default=(), repr=False)

    @property
    def size(self) -> int:
        return self.j_max + 1

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def certified(self) -> bool:
        return bool(self.completeness_defect <= self.tolerance)

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "dephasing"

    @classmethod
    def from_operators(cls, operators, epsilon: float = 1e-12) -> "KrausSet":
        mats = tuple(np.array(op.matrix if isinstance(op, FockOperator) else op, dtype=complex)
                     for op in operators)
        if not mats:
            raise ValidationError("a Kraus family needs at least one operator")
        dim = mats[0].shape[0]
        if any(m.shape != (dim, dim) for m in mats):
            raise ValidationError("Kraus operators must be square and share a dimension")
        total = sum(m.conj().T @ m for m in mats)
        defect = float(np.max(np.abs(np.eye(dim) - total)))
        for m in mats:
            m.setflags(write=False)
        return cls("explicit", math.nan, dim - 1, len(mats) - 1, defect, epsilon, mats)

    # -- coefficients ------------------------------------------------------------

    def _loss_log_coeffs(self, j: np.ndarray, n: np.ndarray) -> np.ndarray:
        """log of ``<n|K_j|n+j>`` on a broadcast grid; ``-inf`` where it vanishes."""
        g = self.gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * (gammaln(n + j + 1) - gammaln(j + 1) - gammaln(n + 1)
                         + (j * math.log(g) if g > 0 else np.where(j == 0, 0.0, -np.inf))
                         + n * math.log1p(-g))
        return np.where(n + j <= self.n_max, out, -np.inf)

    def diagonal(self, j: int) -> np.ndarray:
        """Diagonal of dephasing operator ``K_j``."""
        if self.kind != "dephasing":
            raise ValidationError("only dephasing operators are diagonal")
        self._check_index(j)
        n = np.arange(self.dim, dtype=float)
        if self.gamma == 0.0:
            return np.ones(self.dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            logk = (0.5 * (j * math.log(self.gamma) - math.lgamma(j + 1.0))
                    + j * np.log(n) - 0.5 * self.gamma * n * n)
        if j == 0:
            logk = -0.5 * self.gamma * n * n
        return np.exp(logk)

    def _check_index(self, j: int) -> None:
        if not 0 <= j <= self.j_max:
            raise ValidationError(f"Kraus index {j} outside 0..{self.j_max}")

    def operator(self, j: int) -> FockOperator:
        self._check_index(j)
        if self.kind == "explicit":
            return FockOperator(self._explicit[j], f"K_{j}")
        if self.kind == "dephasing":
            return FockOperator(np.diag(self.diagonal(j)), f"K_{j}^dephasing")
        n = np.arange(self.dim - j)
        mat = np.zeros((self.dim, self.dim))
        mat[n, n + j] = np.exp(self._loss_log_coeffs(np.full(n.shape, j), n))
        return FockOperator(mat, f"K_{j}^loss")

    @property
    def operators(self) -> list[FockOperator]:
        """All operators as dense matrices; refused when that would not fit in memory."""
        if self.size * self.dim ** 2 > _MATERIALIZE_LIMIT:
            raise ValidationError(
                f"{self.size} dense {self.dim}x{self.dim} operators are too many to materialize; "
                "use stack() or operator(j)")
        return [self.operator(j) for j in range(self.size)]

    def __len__(self) -> int:
        return self.size

    def stack(self, v: FockVector, rows: slice | None = None) -> np.ndarray:
        """Matrix whose row ``a`` is ``K_a|v>`` (optionally only the rows in ``rows``)."""
        if v.dim != self.dim:
            raise ValidationError(f"dimension mismatch: Kraus set {self.dim}, vector {v.dim}")
        idx = np.arange(self.size)[rows if rows is not None else slice(None)]
        if idx.size * self.dim > _MATERIALIZE_LIMIT:
            raise ValidationError("Kraus stack too large; evaluate in row chunks")
        c = v.amplitudes
        if self.kind == "explicit":
            return np.stack([self._explicit[j] @ c for j in idx]) if idx.size else np.zeros((0, self.dim), complex)
        if self.kind == "dephasing":
            return np.stack([self.diagonal(int(j)) * c for j in idx]) if idx.size else np.zeros((0, self.dim), complex)
        n = np.arange(self.dim)
        jj = idx[:, None]
        logc = self._loss_log_coeffs(jj, n[None, :])
        src = np.minimum(n[None, :] + jj, self.dim - 1)
        return np.where(np.isfinite(logc), np.exp(logc) * c[src], 0.0)

    def completeness_profile(self) -> np.ndarray:
        """Per-level ``1 - sum_j <n|K_j^dag K_j|n>`` (loss and dephasing are diagonal here)."""
        if self.kind == "loss":
            n = np.arange(self.dim)
            total = np.zeros(self.dim)
            for j in range(self.size):
                # K_j^dag K_j is diagonal with entry C(n, j) gamma^j (1-gamma)^(n-j) at level n
                w = np.zeros(self.dim)
                w[j:] = np.exp(2 * self._loss_log_coeffs(np.full(self.dim - j, j), n[: self.dim - j]))
                total += w
            return 1.0 - total
        if self.kind == "dephasing":
            n = np.arange(self.dim, dtype=float)
            return pdtrc(self.j_max, self.gamma * n * n)
        total = sum(m.conj().T @ m for m in self._explicit)
        return np.real(np.diag(np.eye(self.dim) - total))


def loss_kraus(spec: ChannelSpec) -> KrausSet:
    """Loss family ``j = 0..n_max`` (only ``K_0 = I`` at ``gamma = 0``)."""
    if spec.kind is not ChannelKind.LOSS:
        raise ValidationError("loss_kraus needs a loss channel spec")
    j_max = 0 if spec.gamma == 0.0 else spec.n_max
    ks = KrausSet("loss", spec.gamma, spec.n_max, j_max, 0.0, 10 * DEFAULT_TOLERANCES.norm_tol)
    defect = float(np.max(np.abs(ks.completeness_profile())))
    return KrausSet("loss", spec.gamma, spec.n_max, j_max, defect, 10 * DEFAULT_TOLERANCES.norm_tol)


def dephasing_defect(gamma: float, n_max: int, j_max: int) -> float:
    """Completeness defect of the dephasing family cut at ``j_max``.

    Level ``n`` is short by the Poisson tail ``P(X > j_max)`` with mean
    ``gamma n^2``; the worst level is the top one.
    """
    return float(pdtrc(j_max, gamma * n_max * n_max))


def dephasing_kraus(spec: ChannelSpec, cap: int = DEPHASING_JMAX_CAP) -> KrausSet:
    """Dephasing family with the smallest ``j_max`` whose defect is at most ``epsilon``.

    The defect is monotone in ``j_max``, so the minimal cut is found by doubling
    followed by bisection. Raises :class:`KrausCapExceeded` past ``cap``.
    """
    if spec.kind is not ChannelKind.DEPHASING:
        raise ValidationError("dephasing_kraus needs a dephasing channel spec")
    g, n, eps = spec.gamma, spec.n_max, spec.epsilon
    if g == 0.0:
        return KrausSet("dephasing", g, n, 0, 0.0, eps)

    def ok(j):
        return dephasing_defect(g, n, j) <= eps

    hi = 1
    while not ok(hi):
        if hi >= cap:
            raise KrausCapExceeded(
                f"dephasing series needs j_max > {cap} at gamma={g}, n_max={n}",
                dephasing_defect(g, n, cap))
        hi = min(2 * hi, cap)
    lo = hi // 2  # ok(lo) is false, or lo == 0
    if lo == 0 and ok(0):
        hi = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return KrausSet("dephasing", g, n, hi, dephasing_defect(g, n, hi), eps)


def make_kraus(spec: ChannelSpec) -> KrausSet:
    if spec.kind is ChannelKind.LOSS:
        return loss_kraus(spec)
    return dephasing_kraus(spec)


def kl_matrix_element(bra: FockVector, Ka: FockOperator, Kb: FockOperator, ket: FockVector) -> complex:
    """``<bra| Ka^dag Kb |ket>``."""
    if not (bra.dim == ket.dim == Ka.dim == Kb.dim):
        raise ValidationError("dimension mismatch between states and Kraus operators")
    return complex(np.vdot(Ka.matrix @ bra.amplitudes, Kb.matrix @ ket.amplitudes))
