"""Compiled inner loops for the dephasing Knill-Laflamme sums.

The dephasing Kraus family can need tens of thousands of terms at the cutoffs
used in loss/dephasing sweeps, so the pairwise sums are reorganized by
``s = a + b`` and evaluated here instead of over explicit ``(a, b)`` pairs.
"""

import math

import numpy as np
from numba import njit

_REL_STOP = 1e-22


@njit(cache=True)
def _log_pair_weight(a, b):
    return -0.5 * (math.lgamma(a + 1.0) + math.lgamma(b + 1.0))


@njit(cache=True)
def log_pair_sums(j_max):
    """``G[s] = log sum_{a+b=s, 0<=a,b<=j_max} 1/sqrt(a! b!)`` for ``s = 0..2 j_max``.

    Each sum is walked outward from its largest term ``a = s/2`` using the ratio
    ``t(a+1)/t(a) = sqrt((s-a)/(a+1))`` and stopped once terms fall below
    ``1e-22`` of the running total.
    """
    out = np.empty(2 * j_max + 1)
    for s in range(2 * j_max + 1):
        lo = max(0, s - j_max)
        hi = min(s, j_max)
        c = s // 2
        if c < lo:
            c = lo
        if c > hi:
            c = hi
        ref = _log_pair_weight(c, s - c)
        total = 1.0
        # upward from the centre
        t = 1.0
        a = c
        while a < hi:
            t *= math.sqrt((s - a) / (a + 1.0))
            a += 1
            total += t
            if t < _REL_STOP * total:
                break
        t = 1.0
        a = c
        while a > lo:
            t *= math.sqrt(a / (s - a + 1.0))
            a -= 1
            total += t
            if t < _REL_STOP * total:
                break
        out[s] = ref + math.log(total)
    return out


@njit(cache=True)
def sqrt_poisson_sum(lam, j_max):
    """``sum_{a<=j_max} sqrt(Poisson(a; lam))``, walked outward from the mode."""
    if lam == 0.0:
        return 1.0
    mode = int(math.floor(lam))
    if mode > j_max:
        mode = j_max
    log_ref = 0.5 * (mode * math.log(lam) - lam - math.lgamma(mode + 1.0))
    total = 1.0
    t = 1.0
    a = mode
    while a < j_max:
        t *= math.sqrt(lam / (a + 1.0))
        a += 1
        total += t
        if t < _REL_STOP * total:
            break
    t = 1.0
    a = mode
    while a > 0:
        t *= math.sqrt(a / lam)
        a -= 1
        total += t
        if t < _REL_STOP * total:
            break
    return math.exp(log_ref) * total


@njit(cache=True)
def dephasing_offdiag_sum(w_re, w_im, levels, gamma, log_g):
    """``sum_s | sum_n w_n exp(G_s + s/2 log(gamma) + s log(n) - gamma n^2) |``.

    ``levels`` are the Fock indices carrying weight ``w_n``; level 0 only
    contributes at ``s = 0``. The exponent is bounded above by the log of a
    Poisson-type sum, so no overflow occurs; terms below ``e^-745`` are skipped.
    """
    n_s = log_g.shape[0]
    half_log_gamma = 0.5 * math.log(gamma)
    n_lev = levels.shape[0]
    log_n = np.empty(n_lev)
    quad = np.empty(n_lev)
    for i in range(n_lev):
        n = levels[i]
        log_n[i] = math.log(n) if n > 0 else -np.inf
        quad[i] = gamma * n * n
    total = 0.0
    for s in range(n_s):
        base = log_g[s] + s * half_log_gamma
        acc_re = 0.0
        acc_im = 0.0
        for i in range(n_lev):
            if levels[i] == 0:
                if s != 0:
                    continue
                x = log_g[0]
            else:
                x = base + s * log_n[i] - quad[i]
            if x < -745.0:
                continue
            e = math.exp(x)
            acc_re += w_re[i] * e
            acc_im += w_im[i] * e
        total += math.sqrt(acc_re * acc_re + acc_im * acc_im)
    return total
