"""Wigner functions on rectangular phase-space grids (hbar = 1, unit integral).

    W(q, p) = (1/pi) <v| D(alpha) P D(alpha)^dag |v>,   alpha = (q + i p) / sqrt(2),

with ``P = diag((-1)^n)`` the parity operator. The state is zero-padded to a
cutoff large enough to hold every displaced copy, then evaluated spectrally.
``D(i y) = exp(i y X)`` with ``X = a + a^dag`` is diagonal in the eigenbasis
``X = Q diag(mu) Q^T``, and ``D(x) = R(pi/2) exp(-i x X) R(-pi/2)``. Parity
anticommutes with ``X`` and so maps eigenvector ``k`` to the one with eigenvalue
``-mu_k`` (up to a sign), which turns the inner product for a whole row of ``q``
values into one matrix product. :func:`wigner_point` evaluates the same formula
point by point with explicit displacement matrices and serves as the reference.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import CutoffError, ValidationError
from .fockspace import DEFAULT_TOLERANCES, FockVector, tail_mass
from .gaussian import displacement_unitary

__all__ = [
    "WignerGrid",
    "wigner",
    "wigner_point",
    "padded_cutoff",
    "default_axis",
    "grid_to_csv",
    "grid_to_json",
    "grid_to_pgm",
    "purity",
    "rotation_residual",
]

CONVENTION = "hbar=1, integral-normalized"


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``values[i, j] = W(q_axis[i], p_axis[j])``."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    n_pad: int = 0
    convention: str = CONVENTION

    @property
    def dq(self) -> float:
        return float(self.q_axis[1] - self.q_axis[0]) if self.q_axis.size > 1 else 1.0

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0]) if self.p_axis.size > 1 else 1.0

    def integral(self) -> float:
        return float(self.values.sum() * self.dq * self.dp)

    def q_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dp

    def at(self, q: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.q_axis - q)))
        j = int(np.argmin(np.abs(self.p_axis - p)))
        return float(self.values[i, j])


def default_axis(extent: float = 6.0, points: int = 201) -> np.ndarray:
    return np.linspace(-extent, extent, points)


def _check_axis(axis, name) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 1 or not np.all(np.isfinite(axis)):
        raise ValidationError(f"{name} must be a finite 1-D grid")
    if axis.size > 1:
        d = np.diff(axis)
        if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12) or d[0] <= 0:
            raise ValidationError(f"{name} must be uniform and increasing")
    return axis


def padded_cutoff(v: FockVector, alpha_max: float, margin: float = 6.0) -> int:
    """Cutoff that holds ``v`` displaced by up to ``alpha_max``: ``(sqrt(n_top) + alpha_max + margin)^2``."""
    probs = v.probabilities()
    occupied = np.flatnonzero(probs > DEFAULT_TOLERANCES.tail_tol * max(probs.max(), 1e-300))
    n_top = int(occupied[-1]) if occupied.size else 0
    return max(v.n_max, int(math.ceil((math.sqrt(n_top) + alpha_max + margin) ** 2)))


def _displaced(v: FockVector, alpha: complex, n_pad: int) -> FockVector:
    """``D(-alpha)|v>`` with an explicit displacement matrix at cutoff ``n_pad``."""
    return displacement_unitary(-alpha, n_pad, tail_tol=1.0) @ v.resized(n_pad)


def wigner_point(v: FockVector, q: float, p: float, n_pad: int | None = None) -> float:
    """Reference single-point evaluation through an explicit ``expm`` displacement."""
    alpha = complex(q, p) / math.sqrt(2.0)
    n_pad = n_pad or padded_cutoff(v, abs(alpha))
    phi = _displaced(v, alpha, n_pad).amplitudes
    parity = np.where(np.arange(n_pad + 1) % 2 == 0, 1.0, -1.0)
    return float(np.sum(parity * np.abs(phi) ** 2) / math.pi)


def _audit(q_axis, p_axis, x, mu, Q, s, n, tol) -> None:
    """Tail-mass check of the displaced state at the grid corners and edge midpoints.

    The displaced states come from the same eigen-decomposition as the grid values:
    ``D(-x) D(-iy) v = R(pi/2) Q e^{i x mu} s_y``.
    """
    iq = sorted({0, q_axis.size - 1, q_axis.size // 2})
    ip = sorted({0, p_axis.size - 1, p_axis.size // 2})
    rot = np.exp(0.5j * math.pi * n)
    worst = 0.0
    for i in iq:
        for j in ip:
            phi = FockVector(rot * (Q @ (np.exp(1j * x[i] * mu) * s[:, j])))
            worst = max(worst, tail_mass(phi, tol.guard_band))
    if worst > tol.tail_tol:
        raise CutoffError(
            f"displaced state leaks {worst:.3g} into the top {tol.guard_band} levels at "
            f"n_pad={n.size - 1}; increase the padding cutoff or shrink the grid")


def wigner(v: FockVector, q_axis=None, p_axis=None, n_pad: int | None = None,
           audit: bool = True, tol=DEFAULT_TOLERANCES) -> WignerGrid:
    q_axis = _check_axis(default_axis() if q_axis is None else q_axis, "q_axis")
    p_axis = _check_axis(default_axis() if p_axis is None else p_axis, "p_axis")
    nrm = v.norm() ** 2
    if abs(nrm - 1.0) > 1e-8:
        raise ValidationError(f"wigner needs a normalized state (norm^2 = {nrm!r})")
    alpha_max = math.sqrt(max(abs(q_axis[0]), abs(q_axis[-1])) ** 2
                          + max(abs(p_axis[0]), abs(p_axis[-1])) ** 2) / math.sqrt(2.0)
    if n_pad is None:
        n_pad = padded_cutoff(v, alpha_max)
    if n_pad < v.n_max:
        raise CutoffError(f"padding cutoff {n_pad} is below the state cutoff {v.n_max}")
    dim = n_pad + 1
    n = np.arange(dim)
    mu, Q = eigh_tridiagonal(np.zeros(dim), np.sqrt(np.arange(1, dim, dtype=float)))
    # parity maps eigenvector k onto eigenvector dim-1-k up to a sign
    par = np.where(n % 2 == 0, 1.0, -1.0)
    flip = dim - 1 - np.arange(dim)
    sigma = np.einsum("nk,nk->k", par[:, None] * Q, Q[:, flip])
    if np.max(np.abs(np.abs(sigma) - 1.0)) > 1e-8:
        raise RuntimeError("parity does not pair the position eigenvectors as expected")

    c = v.resized(n_pad).amplitudes
    x = q_axis / math.sqrt(2.0)
    y = p_axis / math.sqrt(2.0)
    # phi(x, y) = D(-x) D(-iy) v, equal to D(-alpha) v up to a global phase
    t = Q.T @ c                                          # eigen-coordinates of v
    ry = Q @ (np.exp(-1j * np.outer(mu, y)) * t[:, None])  # D(-iy) v for every y
    s = Q.T @ (np.exp(-0.5j * math.pi * n)[:, None] * ry)  # R(-pi/2), then eigen-coordinates
    if audit:
        _audit(q_axis, p_axis, x, mu, Q, s, n, tol)
    z = sigma[:, None] * np.conj(s[flip, :]) * s          # k-resolved parity weights
    phase = np.exp(2j * np.outer(x, mu))
    values = np.real(phase @ z) / math.pi
    return WignerGrid(q_axis, p_axis, values, n_pad)


def purity(grid: WignerGrid) -> float:
    """``2 pi * integral W^2``, equal to 1 for a pure state on an adequate grid."""
    return float(2 * math.pi * np.sum(grid.values ** 2) * grid.dq * grid.dp)


def rotation_residual(grid: WignerGrid, angle: float) -> float:
    """Max ``|W(R p) - W(p)|`` with the rotated point resampled to the nearest grid node.

    Only nodes whose rotated image stays inside the grid are compared.
    """
    qq, pp = np.meshgrid(grid.q_axis, grid.p_axis, indexing="ij")
    c, s = math.cos(angle), math.sin(angle)
    qr = c * qq - s * pp
    pr = s * qq + c * pp
    inside = ((qr >= grid.q_axis[0] - 1e-9) & (qr <= grid.q_axis[-1] + 1e-9)
              & (pr >= grid.p_axis[0] - 1e-9) & (pr <= grid.p_axis[-1] + 1e-9))
    i = np.clip(np.rint((qr - grid.q_axis[0]) / grid.dq).astype(int), 0, grid.q_axis.size - 1)
    j = np.clip(np.rint((pr - grid.p_axis[0]) / grid.dp).astype(int), 0, grid.p_axis.size - 1)
    diff = np.abs(grid.values[i, j] - grid.values)
    return float(diff[inside].max())


# -- output ----------------------------------------------------------------------------

def grid_to_csv(grid: WignerGrid) -> str:
    buf = io.StringIO()
    buf.write(f"# {grid.convention}; q: {float(grid.q_axis[0])!r}..{float(grid.q_axis[-1])!r} ({grid.q_axis.size}), "
              f"p: {float(grid.p_axis[0])!r}..{float(grid.p_axis[-1])!r} ({grid.p_axis.size}), n_pad={grid.n_pad}\n")
    buf.write("q,p,W\n")
    for i, q in enumerate(grid.q_axis):
        for j, p in enumerate(grid.p_axis):
            buf.write(f"{float(q)!r},{float(p)!r},{float(grid.values[i, j])!r}\n")
    return buf.getvalue()


def grid_to_json(grid: WignerGrid) -> str:
    return json.dumps({
        "q_axis": [float(q) for q in grid.q_axis],
        "p_axis": [float(p) for p in grid.p_axis],
        "values": [float(w) for w in grid.values.ravel()],
        "shape": list(grid.values.shape),
        "order": "row-major, values[i, j] = W(q_axis[i], p_axis[j])",
        "n_pad": grid.n_pad,
        "convention": grid.convention,
    })


def grid_to_pgm(grid: WignerGrid) -> bytes:
    """8-bit greyscale heat map, symmetric about W = 0 (mid-grey); p increases upward."""
    w = grid.values.T[::-1, :]
    scale = float(np.max(np.abs(w))) or 1.0
    pix = np.clip(np.rint(127.5 + 127.5 * w / scale), 0, 255).astype(np.uint8)
    header = f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode()
    return header + pix.tobytes()
