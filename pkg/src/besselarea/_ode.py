"""Adaptive 8(5,3) Dormand-Prince integrator for the radial Schrodinger equation.

State is ``(phi, phi', int phi^2)`` for ``phi'' = (c/x^2 + x - lam) phi``.
Jitted with numba when available; the same code runs as plain Python otherwise.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

try:
    from numba import njit
    _jit = njit(cache=True, nogil=True)
except ImportError:  # pragma: no cover - exercised only without numba
    def _jit(f):
        return f

_A = np.ascontiguousarray(_dop.A[:_dop.N_STAGES, :_dop.N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_dop.N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)
_NS = _dop.N_STAGES

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXP = -1.0 / 8.0


@_jit
def _rhs(x, y, c, lam, out):
    out[0] = y[1]
    out[1] = (c / (x * x) + x - lam) * y[0]
    out[2] = y[0] * y[0]


@_jit
def integrate(x0, x1, y0, c, lam, rtol, hmax, A, B, C, E3, E5):
    """Integrate from ``x0`` to ``x1`` (either direction).

    Returns ``(y1, sign_changes, n_steps)``; ``sign_changes`` counts the sign
    flips of ``phi`` between accepted steps.
    """
    ns = B.shape[0]
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    y = y0.copy()
    K = np.zeros((ns + 1, 3))
    ytmp = np.zeros(3)
    ynew = np.zeros(3)
    f = np.zeros(3)
    _rhs(x0, y, c, lam, f)
    K[0, :] = f
    kscale = math.sqrt(abs(lam) + 1.0)
    h = min(hmax, 0.01 * span, 0.1 / kscale)
    x = x0
    changes = 0
    steps = 0
    while True:
        remaining = abs(x1 - x)
        if remaining <= 1e-14 * span:
            break
        if h > remaining:
            h = remaining
        hs = h * direction
        for s in range(1, ns):
            for i in range(3):
                acc = 0.0
                for j in range(s):
                    acc += A[s, j] * K[j, i]
                ytmp[i] = y[i] + hs * acc
            _rhs(x + C[s] * hs, ytmp, c, lam, f)
            K[s, :] = f
        for i in range(3):
            acc = 0.0
            for j in range(ns):
                acc += B[j] * K[j, i]
            ynew[i] = y[i] + hs * acc
        _rhs(x + hs, ynew, c, lam, f)
        K[ns, :] = f
        # error norm on (phi, phi') relative to the local amplitude
        amp_old = math.sqrt(y[0] * y[0] + y[1] * y[1] / (kscale * kscale))
        amp_new = math.sqrt(ynew[0] * ynew[0] + ynew[1] * ynew[1] / (kscale * kscale))
        amp = max(amp_old, amp_new, 1e-300)
        err5 = 0.0
        err3 = 0.0
        for i in range(2):
            scale = rtol * amp * (1.0 if i == 0 else kscale)
            e5 = 0.0
            e3 = 0.0
            for j in range(ns + 1):
                e5 += E5[j] * K[j, i]
                e3 += E3[j] * K[j, i]
            err5 += (e5 / scale) ** 2
            err3 += (e3 / scale) ** 2
        if err5 == 0.0 and err3 == 0.0:
            err = 0.0
        else:
            err = h * err5 / math.sqrt((err5 + 0.01 * err3) * 2.0)
        if err < 1.0:
            if (ynew[0] > 0.0) != (y[0] > 0.0) and ynew[0] != 0.0 and y[0] != 0.0:
                changes += 1
            x = x + hs
            for i in range(3):
                y[i] = ynew[i]
            K[0, :] = K[ns, :]
            steps += 1
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** _ERR_EXP)
            h = min(h * factor, hmax)
        else:
            h = h * max(_MIN_FACTOR, _SAFETY * err ** _ERR_EXP)
            if h < 1e-14 * span:
                raise RuntimeError("step size underflow")
    return y, changes, steps


def run(x0: float, x1: float, y0, c: float, lam: float, rtol: float, hmax: float):
    """Python-facing wrapper binding the Dormand-Prince tableau."""
    return integrate(float(x0), float(x1), np.asarray(y0, dtype=float), float(c), float(lam),
                     float(rtol), float(hmax), _A, _B, _C, _E3, _E5)
