# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loops for the two simulators.

Both loops consume pre-drawn random numbers from caller-owned buffers and
return a status code whenever a buffer runs dry (or the occupancy table is too
small), leaving the state exactly as it was before the event that could not be
processed. The caller refills and calls again, so results do not depend on the
buffer size. ``_fallback.py`` is a line-by-line pure-Python twin.
"""
from libc.math cimport INFINITY

# status codes (mirrored in _fallback.py)
DEF DONE = 0
DEF NEED_ARR1 = 1
DEF NEED_ARR2 = 2
DEF NEED_TIMER = 3
DEF NEED_SVC1 = 4
DEF NEED_SVC2 = 5
DEF NEED_EXP = 6
DEF NEED_UNIF = 7
DEF NEED_GROW = 8


cdef inline void _accumulate(double t, double t1, double warmup, double* V, int k,
                             double[::1] acc, double[::1] levels1, double[::1] above1,
                             double[::1] levels2, double[::1] above2) noexcept nogil:
    cdef double start, d, v, v0, v1, x, part
    cdef int j, i, nl
    cdef double[::1] levels
    cdef double[::1] above
    if t1 <= warmup:
        return
    start = t if t > warmup else warmup
    d = t1 - start
    for j in range(2):
        v = V[j]
        if j == 0:
            levels = levels1
            above = above1
        else:
            levels = levels2
            above = above2
        nl = levels.shape[0]
        if j == k and v > 0.0:
            v0 = v - (start - t)
            v1 = v0 - d
            if v1 < 0.0:
                v1 = 0.0
            acc[1 + 2 * j] += 0.5 * (v0 + v1) * d
            acc[2 + 2 * j] += (v0 * v0 * v0 - v1 * v1 * v1) / 3.0
            acc[15 + j] += d
            for i in range(nl):
                x = levels[i]
                part = v0 - x
                if part > d:
                    part = d
                if part > 0.0:
                    above[i] += part
        else:
            acc[1 + 2 * j] += v * d
            acc[2 + 2 * j] += v * v * d
            if v > 0.0:
                acc[15 + j] += d
            else:
                acc[5 + j] += d
            for i in range(nl):
                if v > levels[i]:
                    above[i] += d
    if k == 0:
        acc[7] += d
    acc[0] += d


def run_workload(double[::1] state, long long[::1] istate, double[::1] params,
                 double[::1] exp_a1, double[::1] exp_a2, double[::1] exp_t,
                 double[::1] svc1, double[::1] svc2, long long[::1] pos,
                 double[::1] acc, double[::1] levels1, double[::1] above1,
                 double[::1] levels2, double[::1] above2, double[::1] switch_out):
    """Advance the workload simulation; see ``_fallback.run_workload`` for the layout."""
    cdef double lam1 = params[0], lam2 = params[1], c1 = params[2], c2 = params[3]
    cdef double t_end = params[4], warmup = params[5]
    cdef double t = state[0]
    cdef double V[2]
    cdef double na1 = state[3], na2 = state[4], nt = state[5]
    cdef int k = <int>istate[0]
    cdef long long nsw = istate[1]
    cdef long long p_a1 = pos[0], p_a2 = pos[1], p_t = pos[2], p_s1 = pos[3], p_s2 = pos[4]
    cdef long long cap_sw = switch_out.shape[0]
    cdef double te, tz, b, drain
    cdef int etype, status = DONE
    V[0] = state[1]
    V[1] = state[2]

    with nogil:
        while True:
            if na1 < 0.0:
                if lam1 > 0.0:
                    if p_a1 >= exp_a1.shape[0]:
                        status = NEED_ARR1
                        break
                    na1 = t + exp_a1[p_a1] / lam1
                    p_a1 += 1
                else:
                    na1 = INFINITY
            if na2 < 0.0:
                if lam2 > 0.0:
                    if p_a2 >= exp_a2.shape[0]:
                        status = NEED_ARR2
                        break
                    na2 = t + exp_a2[p_a2] / lam2
                    p_a2 += 1
                else:
                    na2 = INFINITY
            if nt < 0.0:
                if p_t >= exp_t.shape[0]:
                    status = NEED_TIMER
                    break
                if k == 0:
                    nt = t + exp_t[p_t] / c1
                else:
                    nt = t + exp_t[p_t] / c2
                p_t += 1

            if V[k] > 0.0:
                tz = t + V[k]
            else:
                tz = INFINITY
            te = na1
            etype = 0
            if na2 < te:
                te = na2
                etype = 1
            if nt < te:
                te = nt
                etype = 2
            if tz < te:
                te = tz
                etype = 3

            if te >= t_end:
                _accumulate(t, t_end, warmup, V, k, acc, levels1, above1, levels2, above2)
                if V[k] > 0.0:
                    drain = t_end - t
                    if drain > V[k]:
                        drain = V[k]
                    acc[10 + k] += drain
                    V[k] -= drain
                t = t_end
                status = DONE
                break
            if etype == 0 and p_s1 >= svc1.shape[0]:
                status = NEED_SVC1
                break
            if etype == 1 and p_s2 >= svc2.shape[0]:
                status = NEED_SVC2
                break

            _accumulate(t, te, warmup, V, k, acc, levels1, above1, levels2, above2)
            if V[k] > 0.0:
                if etype == 3:
                    acc[10 + k] += V[k]
                    V[k] = 0.0
                else:
                    drain = te - t
                    if drain > V[k]:
                        drain = V[k]
                    acc[10 + k] += drain
                    V[k] -= drain
            t = te

            if etype == 0:
                b = svc1[p_s1]
                p_s1 += 1
                V[0] += b
                acc[8] += b
                if t >= warmup:
                    acc[12] += 1.0
                na1 = -1.0
            elif etype == 1:
                b = svc2[p_s2]
                p_s2 += 1
                V[1] += b
                acc[9] += b
                if t >= warmup:
                    acc[13] += 1.0
                na2 = -1.0
            elif etype == 2:
                if k == 1 and t >= warmup:
                    if nsw < cap_sw:
                        switch_out[nsw] = V[0]
                        nsw += 1
                    acc[17] += 1.0
                if t >= warmup:
                    acc[14] += 1.0
                k = 1 - k
                nt = -1.0

    state[0] = t
    state[1] = V[0]
    state[2] = V[1]
    state[3] = na1
    state[4] = na2
    state[5] = nt
    istate[0] = k
    istate[1] = nsw
    pos[0] = p_a1
    pos[1] = p_a2
    pos[2] = p_t
    pos[3] = p_s1
    pos[4] = p_s2
    return status


def run_queue_lengths(double[::1] state, long long[::1] istate, double[::1] params,
                      double[::1] expo, double[::1] unif, long long[::1] pos,
                      double[::1] table, long long cap1, long long cap2):
    """Advance the (n1, n2, k) CTMC; see ``_fallback.run_queue_lengths``."""
    cdef double a1 = params[0], a2 = params[1], s1 = params[2], s2 = params[3]
    cdef double c1 = params[4], c2 = params[5], t_end = params[6], warmup = params[7]
    cdef double t = state[0]
    cdef long long n1 = istate[0], n2 = istate[1]
    cdef int k = <int>istate[2]
    cdef long long pe = pos[0], pu = pos[1]
    cdef double rs, rc, total, te, u, start
    cdef long long cell
    cdef int etype, status = DONE

    with nogil:
        while True:
            if pe >= expo.shape[0]:
                status = NEED_EXP
                break
            if pu >= unif.shape[0]:
                status = NEED_UNIF
                break
            rs = 0.0
            if k == 0:
                rc = c1
                if n1 > 0:
                    rs = s1
            else:
                rc = c2
                if n2 > 0:
                    rs = s2
            total = a1 + a2 + rs + rc
            te = t + expo[pe] / total
            cell = ((n1 * (cap2 + 1)) + n2) * 2 + k
            if te >= t_end:
                if t_end > warmup:
                    start = t if t > warmup else warmup
                    table[cell] += t_end - start
                t = t_end
                status = DONE
                break
            u = unif[pu] * total
            if u < a1:
                etype = 0
            elif u < a1 + a2:
                etype = 1
            elif u < a1 + a2 + rs:
                etype = 2
            else:
                etype = 3
            if (etype == 0 and n1 >= cap1) or (etype == 1 and n2 >= cap2):
                status = NEED_GROW
                break
            pe += 1
            pu += 1
            if te > warmup:
                start = t if t > warmup else warmup
                table[cell] += te - start
            t = te
            if etype == 0:
                n1 += 1
            elif etype == 1:
                n2 += 1
            elif etype == 2:
                if k == 0:
                    n1 -= 1
                else:
                    n2 -= 1
            else:
                k = 1 - k

    state[0] = t
    istate[0] = n1
    istate[1] = n2
    istate[2] = k
    pos[0] = pe
    pos[1] = pu
    return status
