"""Hot loops: GLM loss/gradient and the proximal-gradient solver.

Two implementations of the same algorithm live here:

* numba ``@njit`` kernels (default when numba imports), and
* a pure-numpy path built on :func:`prox_loop`, which also serves arbitrary
  Python loss callbacks.

Set ``L1TCL_DISABLE_NUMBA=1`` to force the numpy path.  The flag is read at
import time; :func:`set_backend` switches at runtime (tests, benchmarks).
"""
from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import expit

from .errors import DomainError

IDENTITY, SIGMOID, EXPONENTIAL = 0, 1, 2

# solver exit status
OK, BAD_DOMAIN, DIVERGED = 0, 1, 2

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False

_USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("L1TCL_DISABLE_NUMBA", "").lower() not in (
    "1", "true", "yes", "on")


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` for subsequent GLM solves."""
    global _USE_NUMBA
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba is not installed")
        _USE_NUMBA = True
    elif name == "numpy":
        _USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def link_G(u: np.ndarray, code: int) -> np.ndarray:
    if code == IDENTITY:
        return 0.5 * u * u
    if code == SIGMOID:
        return np.logaddexp(0.0, u)
    return u + np.exp(-u)


def link_dG(u: np.ndarray, code: int) -> np.ndarray:
    if code == IDENTITY:
        return u
    if code == SIGMOID:
        return expit(u)
    return -np.expm1(-u)


def glm_value_grad(X: np.ndarray, y: np.ndarray, b: np.ndarray, code: int):
    """Mean negative log-likelihood (F term dropped) and its gradient at ``b``."""
    u = X @ b
    if code == EXPONENTIAL:
        neg = np.flatnonzero(u < 0.0)
        if neg.size:
            raise DomainError(int(neg[0]), float(u[neg[0]]))
    n = X.shape[0]
    f = float(np.mean(link_G(u, code) - y * u))
    g = X.T @ (link_dG(u, code) - y) / n
    return f, g


def prox_loop(value_grad, center, lam, max_iters, step0, decay, decay_every, tol,
              line_search, patience):
    """Minimize ``f(center + delta) + lam * ||delta||_1`` from ``delta = 0``.

    ``value_grad(theta) -> (f, grad)`` may raise :class:`DomainError`; under a
    line search that just shrinks the step, otherwise it propagates.

    Returns ``(delta, iterations, objective, converged, history)``.
    """
    center = np.asarray(center, dtype=np.float64)
    delta = np.zeros_like(center)
    f, g = value_grad(center + delta)
    obj = f + lam * float(np.sum(np.abs(delta)))
    hist = [obj]
    step = step0
    calm = 0
    converged = False
    it = 0
    for k in range(max_iters):
        if not line_search:
            step = step0 * decay ** (k // decay_every)
        stalled = False
        while True:
            v = delta - step * g
            cand = np.sign(v) * np.maximum(np.abs(v) - step * lam, 0.0)
            try:
                fc, gc = value_grad(center + cand)
                ok = math.isfinite(fc)
            except DomainError:
                if not line_search:
                    raise
                ok = False
            if not line_search:
                break
            if ok:
                diff = cand - delta
                if fc <= f + float(g @ diff) + float(diff @ diff) / (2.0 * step):
                    break
            step *= 0.5
            if step < 1e-30:
                stalled = True
                break
        if stalled:
            converged = True
            break
        if not ok:
            it = k + 1
            return delta, it, math.inf, False, np.array(hist)
        delta, f, g = cand, fc, gc
        new_obj = f + lam * float(np.sum(np.abs(delta)))
        rel = abs(obj - new_obj) / max(abs(obj), 1.0)
        obj = new_obj
        hist.append(obj)
        it = k + 1
        calm = calm + 1 if rel < tol else 0
        if calm >= patience:
            converged = True
            break
    return delta, it, obj, converged, np.array(hist)


def _prox_glm_numpy(X, y, center, lam, code, max_iters, step0, decay, decay_every, tol,
                    line_search, patience):
    return prox_loop(lambda b: glm_value_grad(X, y, b, code), center, lam, max_iters, step0,
                     decay, decay_every, tol, line_search, patience)


# ---------------------------------------------------------------- numba path

if NUMBA_AVAILABLE:
    from numba import njit

    @njit(cache=True)
    def _G_nb(u, code):
        if code == 0:
            return 0.5 * u * u
        if code == 1:
            if u > 0.0:
                return u + math.log1p(math.exp(-u))
            return math.log1p(math.exp(u))
        return u + math.exp(-u)

    @njit(cache=True)
    def _dG_nb(u, code):
        if code == 0:
            return u
        if code == 1:
            if u >= 0.0:
                return 1.0 / (1.0 + math.exp(-u))
            e = math.exp(u)
            return e / (1.0 + e)
        return -math.expm1(-u)

    @njit(cache=True)
    def _value_grad_nb(X, y, b, code, g):
        """Fill ``g`` with the gradient; return (value, bad_row).

        The two matrix-vector products go through BLAS; the link evaluations
        are fused into one scalar loop.
        """
        n = X.shape[0]
        u = np.dot(X, b)
        r = np.empty(n)
        f = 0.0
        for i in range(n):
            ui = u[i]
            if code == 2 and ui < 0.0:
                return ui, i
            f += _G_nb(ui, code) - y[i] * ui
            r[i] = (_dG_nb(ui, code) - y[i]) / n
        g[:] = np.dot(X.T, r)
        return f / n, -1

    @njit(cache=True)
    def _prox_glm_nb(X, y, center, lam, code, max_iters, step0, decay, decay_every, tol,
                     line_search, patience):
        d = center.shape[0]
        delta = np.zeros(d)
        cand = np.zeros(d)
        theta = np.empty(d)
        g = np.empty(d)
        gc = np.empty(d)
        hist = np.empty(max_iters + 1)
        for j in range(d):
            theta[j] = center[j]
        f, bad = _value_grad_nb(X, y, theta, code, g)
        if bad >= 0:
            return delta, 0, f, False, BAD_DOMAIN, bad, hist[:0]
        obj = f
        hist[0] = obj
        step = step0
        calm = 0
        converged = False
        it = 0
        for k in range(max_iters):
            if not line_search:
                step = step0 * decay ** (k // decay_every)
            stalled = False
            ok = True
            fc = 0.0
            while True:
                for j in range(d):
                    v = delta[j] - step * g[j]
                    a = abs(v) - step * lam
                    if a > 0.0:
                        cand[j] = a if v > 0.0 else -a
                    else:
                        cand[j] = 0.0
                    theta[j] = center[j] + cand[j]
                fc, bad = _value_grad_nb(X, y, theta, code, gc)
                if bad >= 0:
                    if not line_search:
                        return delta, k, fc, False, BAD_DOMAIN, bad, hist[:it + 1]
                    ok = False
                else:
                    ok = math.isfinite(fc)
                if not line_search:
                    break
                if ok:
                    lin = 0.0
                    sq = 0.0
                    for j in range(d):
                        dj = cand[j] - delta[j]
                        lin += g[j] * dj
                        sq += dj * dj
                    if fc <= f + lin + sq / (2.0 * step):
                        break
                step *= 0.5
                if step < 1e-30:
                    stalled = True
                    break
            if stalled:
                converged = True
                break
            if not ok:
                return delta, k + 1, math.inf, False, DIVERGED, -1, hist[:it + 1]
            l1 = 0.0
            for j in range(d):
                delta[j] = cand[j]
                g[j] = gc[j]
                l1 += abs(cand[j])
            f = fc
            new_obj = f + lam * l1
            rel = abs(obj - new_obj) / max(abs(obj), 1.0)
            obj = new_obj
            it = k + 1
            hist[it] = obj
            if rel < tol:
                calm += 1
            else:
                calm = 0
            if calm >= patience:
                converged = True
                break
        return delta, it, obj, converged, OK, -1, hist[:it + 1]


def prox_glm(X, y, center, lam, code, max_iters, step0, decay, decay_every, tol,
             line_search, patience):
    """Dispatch the GLM l1-deviation solve to the active backend.

    Returns ``(delta, iterations, objective, converged, history)``; raises
    :class:`DomainError` for an out-of-domain index under a fixed schedule.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    center = np.ascontiguousarray(center, dtype=np.float64)
    if _USE_NUMBA:
        delta, it, obj, conv, status, bad, hist = _prox_glm_nb(
            X, y, center, float(lam), int(code), int(max_iters), float(step0), float(decay),
            int(decay_every), float(tol), bool(line_search), int(patience))
        if status == BAD_DOMAIN:
            raise DomainError(int(bad), float(obj))
        return delta.copy(), int(it), float(obj), bool(conv), hist.copy()
    return _prox_glm_numpy(X, y, center, lam, code, max_iters, step0, decay, decay_every, tol,
                           line_search, patience)
