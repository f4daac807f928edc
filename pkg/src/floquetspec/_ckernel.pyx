# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled matriciant integrator.

Dormand-Prince 5(4) with proportional step control for dU/dt = A(t, lam) U,
A the companion matrix whose last row is built from postfix coefficient
programs.  Runs without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, cosh, sinh, fabs, sqrt, pow, floor, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    MAX_STACK = 64

cdef enum:
    OP_CONST = 0
    OP_T = 1
    OP_S = 2
    OP_ADD = 3
    OP_SUB = 4
    OP_MUL = 5
    OP_DIV = 6
    OP_POW = 7
    OP_NEG = 8
    OP_SIN = 9
    OP_COS = 10
    OP_EXP = 11
    OP_COSH = 12
    OP_SINH = 13
    OP_SECH = 14
    OP_ABS = 15
    OP_SQRT = 16

cdef enum:
    ST_OK = 0
    ST_UNDERFLOW = 1
    ST_BLOWUP = 2
    ST_DOMAIN = 3
    ST_MAXSTEPS = 4


cdef inline int run_program(const int* codes, int ncode, const double* consts,
                            double t, double s, double* out) noexcept nogil:
    cdef double stack[MAX_STACK]
    cdef int sp = 0
    cdef int ci = 0
    cdef int k, op
    cdef double a, b, r
    for k in range(ncode):
        op = codes[k]
        if op == OP_CONST:
            stack[sp] = consts[ci]
            ci += 1
            sp += 1
            continue
        if op == OP_T:
            stack[sp] = t
            sp += 1
            continue
        if op == OP_S:
            stack[sp] = s
            sp += 1
            continue
        if op <= OP_POW:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 2
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            elif op == OP_MUL:
                r = a * b
            elif op == OP_DIV:
                if b == 0.0:
                    return ST_DOMAIN
                r = a / b
            else:
                if a == 0.0 and b < 0.0:
                    return ST_DOMAIN
                if a < 0.0 and b != floor(b):
                    return ST_DOMAIN
                r = pow(a, b)
        else:
            a = stack[sp - 1]
            if op == OP_NEG:
                r = -a
            elif op == OP_SIN:
                r = sin(a)
            elif op == OP_COS:
                r = cos(a)
            elif op == OP_EXP:
                r = exp(a)
            elif op == OP_COSH:
                r = cosh(a)
            elif op == OP_SINH:
                r = sinh(a)
            elif op == OP_SECH:
                b = exp(-fabs(a))
                r = 2.0 * b / (1.0 + b * b)
            elif op == OP_ABS:
                r = fabs(a)
            else:
                if a < 0.0:
                    return ST_DOMAIN
                r = sqrt(a)
            sp -= 1
        if not isfinite(r):
            return ST_DOMAIN
        stack[sp] = r
        sp += 1
    out[0] = stack[0]
    return ST_OK


cdef struct Coeffs:
    int n
    const int* codes
    const long* code_off
    const double* consts
    const long* const_off
    const double complex* phase
    double complex lam


cdef inline int last_row(Coeffs* cf, double t, double complex* row) noexcept nogil:
    """row[j] = multiplier of u^(j) in u^(n); trace of A is row[n-1]."""
    cdef int j, st
    cdef double v
    for j in range(cf.n):
        st = run_program(cf.codes + cf.code_off[j], <int>(cf.code_off[j + 1] - cf.code_off[j]),
                         cf.consts + cf.const_off[j], t, 0.0, &v)
        if st != ST_OK:
            return st
        if j == 0:
            row[0] = (cf.lam - v) * cf.phase[0]
        else:
            row[j] = -v * cf.phase[j]
    return ST_OK


cdef inline int rhs(Coeffs* cf, double t, const double complex* y, double complex* dy,
                    double complex* row) noexcept nogil:
    # y holds U row-major (n*n entries) followed by the running trace integral.
    cdef int n = cf.n
    cdef int r, c, j, st
    cdef double complex acc
    st = last_row(cf, t, row)
    if st != ST_OK:
        return st
    for r in range(n - 1):
        for c in range(n):
            dy[r * n + c] = y[(r + 1) * n + c]
    for c in range(n):
        acc = 0.0
        for j in range(n):
            acc = acc + row[j] * y[j * n + c]
        dy[(n - 1) * n + c] = acc
    dy[n * n] = row[n - 1]
    return ST_OK


cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0, B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double C2 = 0.2, C3 = 0.3, C4 = 0.8, C5 = 8.0 / 9.0


def integrate_matriciant(int n, double period, double complex lam,
                         const int[::1] codes, const long[::1] code_off,
                         const double[::1] consts, const long[::1] const_off,
                         const double complex[::1] phase, const double[::1] ts,
                         double tol, long max_steps=1000000, double blowup=1e12):
    """Integrate the matriciant from t = 0, recording U at each ``ts`` (sorted, >= 0).

    Returns ``(Us, trace_integral, steps, rejected, err_bound, status, t_stop)``.
    """
    cdef int m = n * n + 1
    cdef Py_ssize_t nts = ts.shape[0]
    out = np.zeros((nts, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] outv = out
    cdef double complex* buf = <double complex*> malloc(sizeof(double complex) * (10 * m + n))
    if buf == NULL:
        raise MemoryError()
    cdef double complex* y = buf
    cdef double complex* ynew = buf + m
    cdef double complex* k1 = buf + 2 * m
    cdef double complex* k2 = buf + 3 * m
    cdef double complex* k3 = buf + 4 * m
    cdef double complex* k4 = buf + 5 * m
    cdef double complex* k5 = buf + 6 * m
    cdef double complex* k6 = buf + 7 * m
    cdef double complex* k7 = buf + 8 * m
    cdef double complex* tmp = buf + 9 * m
    cdef double complex* row = buf + 10 * m
    cdef Coeffs cf
    cf.n = n
    cf.codes = &codes[0]
    cf.code_off = &code_off[0]
    cf.consts = &consts[0] if consts.shape[0] > 0 else NULL
    cf.const_off = &const_off[0]
    cf.phase = &phase[0]
    cf.lam = lam

    cdef double t = 0.0, h, hstep, err, sc, e, fac, t_end, ynorm, err_bound = 0.0
    cdef long steps = 0, rejected = 0
    cdef int status = ST_OK, i, r, c
    cdef Py_ssize_t ti = 0
    cdef bint clipped, last_rejected = False
    cdef double hmin = 1e-14 * period

    with nogil:
        for i in range(m):
            y[i] = 0.0
        for i in range(n):
            y[i * n + i] = 1.0
        while ti < nts and ts[ti] <= 0.0:
            for r in range(n):
                for c in range(n):
                    outv[ti, r, c] = y[r * n + c]
            ti += 1
        if ti < nts:
            t_end = ts[nts - 1]
            h = period / 64.0
            if h > t_end:
                h = t_end
            status = rhs(&cf, t, y, k1, row)
        while ti < nts and status == ST_OK:
            if steps >= max_steps:
                status = ST_MAXSTEPS
                break
            clipped = False
            hstep = h
            if t + hstep >= ts[ti] - 1e-15 * (1.0 + fabs(ts[ti])):
                hstep = ts[ti] - t
                clipped = True
            if hstep < hmin and not clipped:
                status = ST_UNDERFLOW
                break
            for i in range(m):
                tmp[i] = y[i] + hstep * A21 * k1[i]
            status = rhs(&cf, t + C2 * hstep, tmp, k2, row)
            if status != ST_OK:
                break
            for i in range(m):
                tmp[i] = y[i] + hstep * (A31 * k1[i] + A32 * k2[i])
            status = rhs(&cf, t + C3 * hstep, tmp, k3, row)
            if status != ST_OK:
                break
            for i in range(m):
                tmp[i] = y[i] + hstep * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            status = rhs(&cf, t + C4 * hstep, tmp, k4, row)
            if status != ST_OK:
                break
            for i in range(m):
                tmp[i] = y[i] + hstep * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            status = rhs(&cf, t + C5 * hstep, tmp, k5, row)
            if status != ST_OK:
                break
            for i in range(m):
                tmp[i] = y[i] + hstep * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            status = rhs(&cf, t + hstep, tmp, k6, row)
            if status != ST_OK:
                break
            for i in range(m):
                ynew[i] = y[i] + hstep * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            status = rhs(&cf, t + hstep, ynew, k7, row)
            if status != ST_OK:
                break
            err = 0.0
            for i in range(m):
                e = abs(hstep * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
                sc = abs(y[i])
                if abs(ynew[i]) > sc:
                    sc = abs(ynew[i])
                sc = tol + tol * sc
                err = err + (e / sc) * (e / sc)
            err = sqrt(err / m)
            if err <= 1.0:
                steps += 1
                t = t + hstep
                err_bound = err_bound + err * tol
                ynorm = 0.0
                for i in range(m):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                    if i < m - 1 and abs(y[i]) > ynorm:
                        ynorm = abs(y[i])
                if ynorm > blowup:
                    status = ST_BLOWUP
                    break
                if clipped:
                    t = ts[ti]
                    while ti < nts and ts[ti] <= t:
                        for r in range(n):
                            for c in range(n):
                                outv[ti, r, c] = y[r * n + c]
                        ti += 1
                fac = 10.0 if err == 0.0 else 0.9 * pow(err, -0.2)
                if fac > 10.0:
                    fac = 10.0
                if last_rejected and fac > 1.0:
                    fac = 1.0
                if fac < 0.2:
                    fac = 0.2
                if not clipped or hstep * fac > h:
                    h = hstep * fac
                last_rejected = False
            else:
                rejected += 1
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                h = hstep * fac
                last_rejected = True
                if h < hmin:
                    status = ST_UNDERFLOW
                    break
    trace_integral = complex(y[m - 1].real, y[m - 1].imag)
    free(buf)
    return out, trace_integral, steps, rejected, err_bound, status, t


def eval_program(const int[::1] codes, const double[::1] consts, double t, double s=0.0):
    """Evaluate one postfix program (used to cross-check the tree evaluator)."""
    cdef double v
    cdef int st = run_program(&codes[0], <int>codes.shape[0],
                              &consts[0] if consts.shape[0] > 0 else NULL, t, s, &v)
    if st != ST_OK:
        return None
    return v
