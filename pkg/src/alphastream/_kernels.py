"""Tight per-stream loops for the Monte Carlo lab.

These mirror the engine implementations in procedures.py operation-for-
operation (same accumulation order), so their float output is bit-identical
to driving an engine step by step -- the equivalence test in the suite
asserts exact equality.  With numba present the loops are JIT-compiled;
without it the same source runs as plain Python.

``gt`` is a dense table with gt[i] = gamma value at absolute index i,
covering i = 0..T, including the zero-extension.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit

    def _jit(fn):
        return _njit(cache=True)(fn)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    def _jit(fn):
        return fn

    HAVE_NUMBA = False


@_jit
def lord_stream(p, gt, alpha, w0):
    T = p.shape[0]
    alphas = np.empty(T, np.float64)
    rejected = np.zeros(T, np.bool_)
    tau = np.empty(T, np.int64)
    R = 0
    for i in range(T):
        t = i + 1
        a = w0 * gt[t]
        if R >= 1:
            a += (alpha - w0) * gt[t - tau[0]]
            s = 0.0
            for j in range(1, R):
                s += gt[t - tau[j]]
            a += alpha * s
        alphas[i] = a
        if p[i] <= a:
            rejected[i] = True
            tau[R] = t
            R += 1
    return alphas, rejected


@_jit
def saffron_stream(p, gt, alpha, w0, lam):
    T = p.shape[0]
    alphas = np.empty(T, np.float64)
    rejected = np.zeros(T, np.bool_)
    tau = np.empty(T, np.int64)
    cand = np.empty(T, np.int64)
    c0 = 0
    R = 0
    for i in range(T):
        t = i + 1
        a = w0 * gt[t - c0]
        if R >= 1:
            a += (alpha - w0) * gt[t - tau[0] - cand[0]]
            s = 0.0
            for j in range(1, R):
                s += gt[t - tau[j] - cand[j]]
            a += alpha * s
        alpha_t = min(lam, (1.0 - lam) * a)
        alphas[i] = alpha_t
        rej = p[i] <= alpha_t
        if p[i] <= lam:
            c0 += 1
            for j in range(R):
                cand[j] += 1
        if rej:
            rejected[i] = True
            tau[R] = t
            cand[R] = 0
            R += 1
    return alphas, rejected


@_jit
def addis_stream(p, gt, alpha, w0, lam, eta):
    T = p.shape[0]
    alphas = np.empty(T, np.float64)
    rejected = np.zeros(T, np.bool_)
    tau_star = np.empty(T, np.int64)
    cand = np.empty(T, np.int64)
    c0 = 0
    sel = 0
    R = 0
    for i in range(T):
        a = w0 * gt[sel - c0]
        if R >= 1:
            a += (alpha - w0) * gt[sel - tau_star[0] - cand[0]]
            s = 0.0
            for j in range(1, R):
                s += gt[sel - tau_star[j] - cand[j]]
            a += alpha * s
        alpha_t = min(lam, (eta - lam) * a)
        alphas[i] = alpha_t
        rej = p[i] <= alpha_t
        if p[i] <= lam:
            c0 += 1
            for j in range(R):
                cand[j] += 1
        if rej:
            rejected[i] = True
            tau_star[R] = sel + 1
            cand[R] = 0
            R += 1
        if p[i] <= eta:
            sel += 1
    return alphas, rejected


@_jit
def gai_stream(p, gt, alpha, w0):
    """Proportional investing: spend W(rho)*gamma_{t-rho}, earn the cap."""
    T = p.shape[0]
    alphas = np.empty(T, np.float64)
    rejected = np.zeros(T, np.bool_)
    wealth = w0
    snapshot = w0
    rho = 0
    R = 0
    for i in range(T):
        t = i + 1
        a = snapshot * gt[t - rho]
        alphas[i] = a
        wealth -= a
        if p[i] <= a:
            rejected[i] = True
            wealth += (alpha - w0) if R == 0 else alpha
            R += 1
            rho = t
            snapshot = wealth
    return alphas, rejected


def warmup():
    """Force JIT compilation of all kernels (first call is the slow one)."""
    p = np.array([0.01, 0.5, 0.9])
    gt = np.array([0.5, 0.5, 0.25, 0.125, 0.0625])
    lord_stream(p, gt, 0.05, 0.005)
    saffron_stream(p, gt, 0.05, 0.025, 0.5)
    addis_stream(p, gt, 0.05, 0.025, 0.25, 0.5)
    gai_stream(p, gt, 0.05, 0.025)
