# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled first-passage kernels.

All kernels simulate ``n`` independent paths started at ``d0 <= 0`` relative to
the level and report, per path, the passage time, the overshoot above the
level, a status code (0 passed, 1 abandoned, 2 step cap) and the abandonment
exponent ``q*t + alpha*distance`` used for the truncation bound.
"""

import numpy as np
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, sqrt, floor, pow, fabs
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport int64_t, int8_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_normal, random_standard_uniform, random_standard_exponential,
    random_poisson, random_multinomial, binomial_t,
)

cdef enum:
    MAXSTACK = 128

cdef struct JumpSpec:
    int family
    double p0
    double p1
    double* vals
    double* cum
    int nvals


cdef inline double draw_jump(bitgen_t* rng, JumpSpec* js) noexcept nogil:
    cdef double u
    cdef int lo, hi, mid
    if js.family == 1:
        return js.p0
    elif js.family == 2:
        return js.p0 + (js.p1 - js.p0) * random_standard_uniform(rng)
    elif js.family == 3:
        return js.p1 + js.p0 * random_standard_exponential(rng)
    elif js.family == 4:
        return js.p0 + js.p1 * random_standard_normal(rng)
    elif js.family == 5:
        u = random_standard_uniform(rng)
        lo = 0
        hi = js.nvals - 1
        while lo < hi:
            mid = (lo + hi) >> 1
            if js.cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        return js.vals[lo]
    elif js.family == 6:
        u = 1.0 - random_standard_uniform(rng)
        return js.p1 * pow(u, -1.0 / js.p0)
    return 0.0


cdef double bridge_cross(bitgen_t* rng, double a, double b, double L, double sigma, int maxdepth) noexcept nogil:
    """Crossing time of 0 by a Brownian bridge from a (<0) to b over duration L, or -1.

    Midpoints are sampled from the exact bridge law; leaves decide with the
    closed-form crossing probability and report the leaf midpoint as the time.
    """
    cdef double st_t0[MAXSTACK]
    cdef double st_a[MAXSTACK]
    cdef double st_t1[MAXSTACK]
    cdef double st_b[MAXSTACK]
    cdef int st_d[MAXSTACK]
    cdef int top = 0
    cdef double t0, t1, aa, bb, ln, m, tm, p
    cdef int dep
    st_t0[0] = 0.0
    st_a[0] = a
    st_t1[0] = L
    st_b[0] = b
    st_d[0] = 0
    top = 1
    while top > 0:
        top -= 1
        t0 = st_t0[top]
        aa = st_a[top]
        t1 = st_t1[top]
        bb = st_b[top]
        dep = st_d[top]
        ln = t1 - t0
        if aa >= 0.0:
            return t0
        if bb < 0.0:
            p = exp(-2.0 * aa * bb / (sigma * sigma * ln))
            if p < 1e-16:
                continue
            if dep >= maxdepth or p < 1e-3:
                if random_standard_uniform(rng) < p:
                    return t0 + 0.5 * ln
                continue
        elif dep >= maxdepth:
            return t0 + 0.5 * ln
        tm = t0 + 0.5 * ln
        m = 0.5 * (aa + bb) + sigma * sqrt(0.25 * ln) * random_standard_normal(rng)
        if top + 2 > MAXSTACK:
            return tm
        # right child first so the left child is processed first
        st_t0[top] = tm
        st_a[top] = m
        st_t1[top] = t1
        st_b[top] = bb
        st_d[top] = dep + 1
        top += 1
        st_t0[top] = t0
        st_a[top] = aa
        st_t1[top] = tm
        st_b[top] = m
        st_d[top] = dep + 1
        top += 1
    return -1.0


cdef inline bint passed(double d, bint strict) noexcept nogil:
    if strict:
        return d > 0.0
    return d >= 0.0


cdef int sorted_fractions(bitgen_t* rng, int64_t k, double span, double* out) noexcept nogil:
    """k sorted uniforms on [0, span) via normalised exponential spacings."""
    cdef int64_t i
    cdef double acc = 0.0
    for i in range(k):
        acc += random_standard_exponential(rng)
        out[i] = acc
    acc += random_standard_exponential(rng)
    for i in range(k):
        out[i] = out[i] / acc * span
    return 0


cdef struct WalkParams:
    int step_mode
    double dt
    double drift
    double sigma
    double rate
    double qstep
    double alpha
    double log_cut
    int64_t max_steps
    int n_min
    bint strict
    bint bridge
    int depth


cdef int fine_steps(bitgen_t* rng, WalkParams* P, JumpSpec* js, double* d, int64_t* n, int64_t B,
                    int64_t nj, double* jv, double* jt, double* tcross, double* logb) noexcept nogil:
    """Advance up to B single steps using the pre-drawn jumps (values jv at block times jt).

    Returns 0 if still running, 1 on passage (tcross set), 2 on abandonment, 3 on step cap.
    """
    cdef int64_t s, k = 0
    cdef double prev, tk, ln, inc, cross, expo
    for s in range(B):
        prev = <double>s
        while k < nj and jt[k] < s + 1.0:
            tk = jt[k]
            ln = (tk - prev) * P.dt
            if ln > 0.0:
                inc = P.drift * ln
                if P.sigma > 0.0:
                    inc += P.sigma * sqrt(ln) * random_standard_normal(rng)
                if P.bridge and P.sigma > 0.0:
                    cross = bridge_cross(rng, d[0], d[0] + inc, ln, P.sigma, P.depth)
                    if cross >= 0.0:
                        d[0] = 0.0
                        tcross[0] = n[0] + prev - s + cross / P.dt
                        return 1
                d[0] += inc
            d[0] += jv[k]
            k += 1
            prev = tk
            if P.bridge and passed(d[0], P.strict):
                tcross[0] = n[0] + tk - s
                return 1
        ln = (s + 1.0 - prev) * P.dt
        if ln > 0.0:
            inc = P.drift * ln
            if P.sigma > 0.0:
                inc += P.sigma * sqrt(ln) * random_standard_normal(rng)
            if P.bridge and P.sigma > 0.0:
                cross = bridge_cross(rng, d[0], d[0] + inc, ln, P.sigma, P.depth)
                if cross >= 0.0:
                    d[0] = 0.0
                    tcross[0] = n[0] + prev - s + cross / P.dt
                    return 1
            d[0] += inc
        n[0] += 1
        if n[0] >= P.n_min and passed(d[0], P.strict):
            tcross[0] = <double>n[0]
            return 1
        expo = P.qstep * n[0] + P.alpha * (-d[0])
        if expo > P.log_cut:
            logb[0] = expo
            return 2
        if n[0] >= P.max_steps:
            logb[0] = expo
            return 3
    return 0


def walk_passage(bitgen, Py_ssize_t n, double d0, int n_min, bint strict, int step_mode,
                 double dt, double drift, double sigma, double rate,
                 int jfam, double jp0, double jp1, double[::1] jvals, double[::1] jcum, double[::1] jprob,
                 double jpos_mean, double max_up,
                 double qstep, double alpha, double log_cut, int64_t max_steps,
                 bint bridge, int depth, double zskip, int64_t max_block,
                 double[::1] out_time, double[::1] out_over, int8_t[::1] out_status, double[::1] out_logb):
    """Discrete-time walk passage to [0, inf) (or (0, inf) when strict) from d0.

    step_mode 0: jump-diffusion step over dt (Gaussian plus compound Poisson).
    step_mode 1: iid draws from the discrete law (jvals, jprob).
    Far below the level, several steps are taken at once when the block cannot
    reach the level (exactly for bounded discrete steps, and up to a Gaussian
    tail of probability 2*Phi(-zskip) for diffusion blocks).
    """
    cdef bitgen_t* rng = <bitgen_t*> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
    cdef JumpSpec js
    cdef WalkParams P
    cdef Py_ssize_t i, kv
    cdef double d, dist, det, spos, J, sumj, tcross, logb, expo, Bdt
    cdef int64_t nstep, B, Bn, nj, k, cap = 1024
    cdef int res
    cdef binomial_t binom
    cdef int nv = jvals.shape[0]
    cdef double* jv = <double*> malloc(cap * sizeof(double))
    cdef double* jt = <double*> malloc((cap + 1) * sizeof(double))
    cdef int64_t* counts = <int64_t*> malloc((nv + 1) * sizeof(int64_t))
    if jv == NULL or jt == NULL or counts == NULL:
        raise MemoryError()
    js.family = jfam
    js.p0 = jp0
    js.p1 = jp1
    js.vals = &jvals[0] if nv > 0 else NULL
    js.cum = &jcum[0] if nv > 0 else NULL
    js.nvals = nv
    P.step_mode = step_mode
    P.dt = dt
    P.drift = drift
    P.sigma = sigma
    P.rate = rate
    P.qstep = qstep
    P.alpha = alpha
    P.log_cut = log_cut
    P.max_steps = max_steps
    P.n_min = n_min
    P.strict = strict
    P.bridge = bridge
    P.depth = depth
    binom.has_binomial = 0
    with bitgen.lock, nogil:
        for i in range(n):
            d = d0
            nstep = 0
            res = 0
            tcross = 0.0
            logb = 0.0
            while res == 0:
                dist = -d
                expo = qstep * nstep + alpha * (dist if dist > 0.0 else 0.0)
                if expo > log_cut:
                    res = 2
                    logb = expo
                    break
                if nstep >= max_steps:
                    res = 3
                    logb = expo
                    break
                B = 1
                if dist > 0.0:
                    if step_mode == 1:
                        B = <int64_t> floor(dist / max_up * (1.0 - 1e-12))
                        if B > max_block:
                            B = max_block
                    else:
                        B = 1
                        while 2 * B <= max_block:
                            Bdt = 2.0 * B * dt
                            det = (drift if drift > 0.0 else 0.0) * Bdt + zskip * sigma * sqrt(Bdt) + 2.0 * rate * Bdt * jpos_mean
                            if det > 0.5 * dist:
                                break
                            B *= 2
                    if B > max_steps - nstep:
                        B = max_steps - nstep
                if step_mode == 1:
                    if B >= 2:
                        for kv in range(nv):
                            counts[kv] = 0
                        random_multinomial(rng, B, counts, &jprob[0], nv, &binom)
                        sumj = 0.0
                        for kv in range(nv):
                            sumj += counts[kv] * jvals[kv]
                        d += sumj
                        nstep += B
                        continue
                    d += draw_jump(rng, &js)
                    nstep += 1
                    if nstep >= n_min and passed(d, strict):
                        res = 1
                        tcross = <double>nstep
                    continue
                # jump-diffusion step or block
                Bdt = B * dt
                nj = random_poisson(rng, rate * Bdt) if rate > 0.0 else 0
                if nj > cap:
                    cap = nj + 1024
                    jv = <double*> realloc(jv, cap * sizeof(double))
                    jt = <double*> realloc(jt, (cap + 1) * sizeof(double))
                spos = 0.0
                sumj = 0.0
                for k in range(nj):
                    J = draw_jump(rng, &js)
                    jv[k] = J
                    sumj += J
                    if J > 0.0:
                        spos += J
                if B >= 2:
                    det = (drift if drift > 0.0 else 0.0) * Bdt + zskip * sigma * sqrt(Bdt)
                    if det + spos < dist:
                        d += drift * Bdt + sigma * sqrt(Bdt) * random_standard_normal(rng) + sumj
                        nstep += B
                        continue
                if nj == 0 and not (bridge and sigma > 0.0):
                    # plain single steps without jumps
                    for k in range(B):
                        d += drift * dt + sigma * sqrt(dt) * random_standard_normal(rng)
                        nstep += 1
                        if nstep >= n_min and passed(d, strict):
                            res = 1
                            tcross = <double>nstep
                            break
                        expo = qstep * nstep + alpha * (-d)
                        if expo > log_cut:
                            res = 2
                            logb = expo
                            break
                        if nstep >= max_steps:
                            res = 3
                            logb = expo
                            break
                    continue
                sorted_fractions(rng, nj, <double>B, jt)
                res = fine_steps(rng, &P, &js, &d, &nstep, B, nj, jv, jt, &tcross, &logb)
            if res == 1:
                out_status[i] = 0
                out_time[i] = tcross
                out_over[i] = d
                out_logb[i] = 0.0
            else:
                out_status[i] = 1 if res == 2 else 2
                out_time[i] = <double>nstep
                out_over[i] = d
                out_logb[i] = logb
    free(jv)
    free(jt)
    free(counts)


def levy_passage(bitgen, Py_ssize_t n, double d0, bint strict,
                 double drift, double rate,
                 int jfam, double jp0, double jp1, double[::1] jvals, double[::1] jcum,
                 double q, double alpha, double log_cut, int64_t max_events,
                 double[::1] out_time, double[::1] out_over, int8_t[::1] out_status, double[::1] out_logb):
    """Exact continuous-time passage for drift plus compound Poisson (no Gaussian part).

    Between jumps the path moves linearly, so with drift <= 0 the level can only
    be crossed at jump epochs; with drift > 0 it may be reached by creeping.
    """
    cdef bitgen_t* rng = <bitgen_t*> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
    cdef JumpSpec js
    cdef Py_ssize_t i
    cdef double d, t, E, expo
    cdef int64_t ev
    cdef int res
    cdef int nv = jvals.shape[0]
    js.family = jfam
    js.p0 = jp0
    js.p1 = jp1
    js.vals = &jvals[0] if nv > 0 else NULL
    js.cum = &jcum[0] if nv > 0 else NULL
    js.nvals = nv
    with bitgen.lock, nogil:
        for i in range(n):
            d = d0
            t = 0.0
            ev = 0
            res = 0
            expo = 0.0
            while True:
                expo = q * t + alpha * (-d if d < 0.0 else 0.0)
                if expo > log_cut:
                    res = 2
                    break
                if ev >= max_events:
                    res = 3
                    break
                if rate > 0.0:
                    E = random_standard_exponential(rng) / rate
                else:
                    E = 1e300
                if drift > 0.0 and d + drift * E >= 0.0:
                    t += -d / drift
                    d = 0.0
                    res = 1
                    break
                t += E
                d += drift * E + draw_jump(rng, &js)
                ev += 1
                if passed(d, strict):
                    res = 1
                    break
            out_time[i] = t
            out_over[i] = d
            if res == 1:
                out_status[i] = 0
                out_logb[i] = 0.0
            else:
                out_status[i] = 1 if res == 2 else 2
                out_logb[i] = expo
