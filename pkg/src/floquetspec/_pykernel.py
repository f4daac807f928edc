"""Pure-Python matriciant integrator, used when the compiled kernel is unavailable.

Same Dormand-Prince 5(4) scheme, step controller and status codes as
``_ckernel.pyx``; coefficients are evaluated through closures instead of
postfix programs.
"""
from __future__ import annotations

import math

import numpy as np

from .expr import DomainError

ST_OK, ST_UNDERFLOW, ST_BLOWUP, ST_DOMAIN, ST_MAXSTEPS = range(5)

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_C = (0.0, 0.2, 0.3, 0.8, 8 / 9, 1.0)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def integrate_matriciant(n, period, lam, funcs, phase, ts, tol, max_steps=1_000_000, blowup=1e12):
    """Fallback with the compiled kernel's signature, except ``funcs`` replaces the programs.

    ``funcs[j]`` evaluates coefficient ``a_j`` at ``t`` for ``j < n``.
    """
    ts = np.asarray(ts, dtype=float)
    nts = len(ts)
    out = np.zeros((nts, n, n), dtype=complex)
    phase = [complex(p) for p in phase]
    lam = complex(lam)
    m = n * n + 1

    def rhs(t, y):
        row = np.empty(n, dtype=complex)
        for j in range(n):
            v = funcs[j](t)
            row[j] = (lam - v) * phase[0] if j == 0 else -v * phase[j]
        U = y[:-1].reshape(n, n)
        dy = np.empty(m, dtype=complex)
        dU = dy[:-1].reshape(n, n)
        dU[:-1] = U[1:]
        dU[-1] = row @ U
        dy[-1] = row[-1]
        return dy

    y = np.zeros(m, dtype=complex)
    y[:-1] = np.eye(n).ravel()
    t = 0.0
    ti = 0
    steps = rejected = 0
    err_bound = 0.0
    status = ST_OK
    hmin = 1e-14 * period
    while ti < nts and ts[ti] <= 0.0:
        out[ti] = y[:-1].reshape(n, n)
        ti += 1
    if ti == nts:
        return out, complex(y[-1]), steps, rejected, err_bound, status, t

    h = min(period / 64.0, ts[-1])
    last_rejected = False
    try:
        k1 = rhs(t, y)
        while ti < nts:
            if steps >= max_steps:
                status = ST_MAXSTEPS
                break
            clipped = False
            hstep = h
            if t + hstep >= ts[ti] - 1e-15 * (1.0 + abs(ts[ti])):
                hstep = ts[ti] - t
                clipped = True
            if hstep < hmin and not clipped:
                status = ST_UNDERFLOW
                break
            ks = [k1]
            for stage in range(1, 6):
                acc = y + hstep * sum(a * k for a, k in zip(_A[stage], ks))
                ks.append(rhs(t + _C[stage] * hstep, acc))
            ynew = y + hstep * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
            k7 = rhs(t + hstep, ynew)
            ks.append(k7)
            errvec = hstep * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
            sc = tol + tol * np.maximum(np.abs(y), np.abs(ynew))
            err = math.sqrt(float(np.mean((np.abs(errvec) / sc) ** 2)))
            if err <= 1.0:
                steps += 1
                t += hstep
                err_bound += err * tol
                y = ynew
                k1 = k7
                if np.max(np.abs(y[:-1])) > blowup:
                    status = ST_BLOWUP
                    break
                if clipped:
                    t = ts[ti]
                    while ti < nts and ts[ti] <= t:
                        out[ti] = y[:-1].reshape(n, n)
                        ti += 1
                fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
                if last_rejected:
                    fac = min(fac, 1.0)
                fac = max(fac, 0.2)
                if not clipped or hstep * fac > h:
                    h = hstep * fac
                last_rejected = False
            else:
                rejected += 1
                h = hstep * max(0.2, 0.9 * err ** -0.2)
                last_rejected = True
                if h < hmin:
                    status = ST_UNDERFLOW
                    break
    except DomainError:
        status = ST_DOMAIN
    return out, complex(y[-1]), steps, rejected, err_bound, status, t
