"""Pure-Python twin of the compiled event loops in ``_speedups.pyx``.

Same arguments, same buffer protocol, same floating-point operation order, so
both implementations give bit-identical results for the same inputs.

Workload loop layout
--------------------
state   : [t, V1, V2, next_arrival1, next_arrival2, next_timer]; a negative
          "next" time means the clock must be (re)drawn from its buffer.
istate  : [server position (0 = queue 1, 1 = queue 2), switch samples stored]
params  : [lambda1, lambda2, c1, c2, t_end, warmup]
pos     : read positions in the five random buffers
acc     : post-warmup accumulators unless noted
          0 observed time        1 int V1        2 int V1^2
          3 int V2               4 int V2^2      5 time V1 = 0
          6 time V2 = 0          7 time server at queue 1
          8 work input 1 (all time)       9 work input 2 (all time)
          10 work drained 1 (all time)    11 work drained 2 (all time)
          12 arrivals 1      13 arrivals 2      14 timer expiries
          15 time V1 > 0     16 time V2 > 0     17 switch epochs seen

Queue-length loop layout
------------------------
state   : [t];  istate: [n1, n2, server position]
params  : [eps*lambda1, eps*lambda2, eps*mu1, eps*mu2, c1, c2, t_end, warmup]
table   : occupancy time of cell ((n1 * (cap2 + 1)) + n2) * 2 + k
"""
import math

DONE = 0
NEED_ARR1 = 1
NEED_ARR2 = 2
NEED_TIMER = 3
NEED_SVC1 = 4
NEED_SVC2 = 5
NEED_EXP = 6
NEED_UNIF = 7
NEED_GROW = 8

ACC_SIZE = 18


def _accumulate(t, t1, warmup, V, k, acc, levels1, above1, levels2, above2):
    if t1 <= warmup:
        return
    start = t if t > warmup else warmup
    d = t1 - start
    for j in range(2):
        v = V[j]
        if j == 0:
            levels, above = levels1, above1
        else:
            levels, above = levels2, above2
        if j == k and v > 0.0:
            v0 = v - (start - t)
            v1 = v0 - d
            if v1 < 0.0:
                v1 = 0.0
            acc[1 + 2 * j] += 0.5 * (v0 + v1) * d
            acc[2 + 2 * j] += (v0 * v0 * v0 - v1 * v1 * v1) / 3.0
            acc[15 + j] += d
            for i, x in enumerate(levels):
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
            for i, x in enumerate(levels):
                if v > x:
                    above[i] += d
    if k == 0:
        acc[7] += d
    acc[0] += d


def run_workload(state, istate, params, exp_a1, exp_a2, exp_t, svc1, svc2, pos,
                 acc, levels1, above1, levels2, above2, switch_out):
    """Advance the workload simulation until ``t_end`` or a buffer runs dry.

    Returns a status code; on a non-zero code the caller refills the named
    buffer, resets its position and calls again.
    """
    lam1, lam2, c1, c2, t_end, warmup = (float(v) for v in params)
    t = float(state[0])
    V = [float(state[1]), float(state[2])]
    na1, na2, nt = float(state[3]), float(state[4]), float(state[5])
    k = int(istate[0])
    nsw = int(istate[1])
    p_a1, p_a2, p_t, p_s1, p_s2 = (int(v) for v in pos)
    cap_sw = len(switch_out)
    # plain lists: element access on numpy arrays is slow and returns numpy scalars
    acc_l = [float(v) for v in acc]
    lv1 = [float(v) for v in levels1]
    lv2 = [float(v) for v in levels2]
    ab1 = [float(v) for v in above1]
    ab2 = [float(v) for v in above2]
    ea1, ea2, et = exp_a1.tolist(), exp_a2.tolist(), exp_t.tolist()
    s1, s2 = svc1.tolist(), svc2.tolist()
    switches = []
    status = DONE

    while True:
        if na1 < 0.0:
            if lam1 > 0.0:
                if p_a1 >= len(ea1):
                    status = NEED_ARR1
                    break
                na1 = t + ea1[p_a1] / lam1
                p_a1 += 1
            else:
                na1 = math.inf
        if na2 < 0.0:
            if lam2 > 0.0:
                if p_a2 >= len(ea2):
                    status = NEED_ARR2
                    break
                na2 = t + ea2[p_a2] / lam2
                p_a2 += 1
            else:
                na2 = math.inf
        if nt < 0.0:
            if p_t >= len(et):
                status = NEED_TIMER
                break
            if k == 0:
                nt = t + et[p_t] / c1
            else:
                nt = t + et[p_t] / c2
            p_t += 1

        tz = t + V[k] if V[k] > 0.0 else math.inf
        te, etype = na1, 0
        if na2 < te:
            te, etype = na2, 1
        if nt < te:
            te, etype = nt, 2
        if tz < te:
            te, etype = tz, 3

        if te >= t_end:
            _accumulate(t, t_end, warmup, V, k, acc_l, lv1, ab1, lv2, ab2)
            if V[k] > 0.0:
                drain = t_end - t
                if drain > V[k]:
                    drain = V[k]
                acc_l[10 + k] += drain
                V[k] -= drain
            t = t_end
            status = DONE
            break
        if etype == 0 and p_s1 >= len(s1):
            status = NEED_SVC1
            break
        if etype == 1 and p_s2 >= len(s2):
            status = NEED_SVC2
            break

        _accumulate(t, te, warmup, V, k, acc_l, lv1, ab1, lv2, ab2)
        if V[k] > 0.0:
            if etype == 3:
                acc_l[10 + k] += V[k]
                V[k] = 0.0
            else:
                drain = te - t
                if drain > V[k]:
                    drain = V[k]
                acc_l[10 + k] += drain
                V[k] -= drain
        t = te

        if etype == 0:
            b = s1[p_s1]
            p_s1 += 1
            V[0] += b
            acc_l[8] += b
            if t >= warmup:
                acc_l[12] += 1.0
            na1 = -1.0
        elif etype == 1:
            b = s2[p_s2]
            p_s2 += 1
            V[1] += b
            acc_l[9] += b
            if t >= warmup:
                acc_l[13] += 1.0
            na2 = -1.0
        elif etype == 2:
            if k == 1 and t >= warmup:
                if nsw + len(switches) < cap_sw:
                    switches.append(V[0])
                acc_l[17] += 1.0
            if t >= warmup:
                acc_l[14] += 1.0
            k = 1 - k
            nt = -1.0

    if switches:
        switch_out[nsw:nsw + len(switches)] = switches
        nsw += len(switches)
    state[:] = [t, V[0], V[1], na1, na2, nt]
    istate[0] = k
    istate[1] = nsw
    pos[:] = [p_a1, p_a2, p_t, p_s1, p_s2]
    acc[:] = acc_l
    above1[:] = ab1
    above2[:] = ab2
    return status


def run_queue_lengths(state, istate, params, expo, unif, pos, table, cap1, cap2):
    """Advance the ``(n1, n2, k)`` chain until ``t_end``, a dry buffer or a full table."""
    a1, a2, s1, s2, c1, c2, t_end, warmup = (float(v) for v in params)
    t = float(state[0])
    n1, n2, k = (int(v) for v in istate)
    pe, pu = (int(v) for v in pos)
    ex, un = expo.tolist(), unif.tolist()
    occ = table.tolist()
    status = DONE

    while True:
        if pe >= len(ex):
            status = NEED_EXP
            break
        if pu >= len(un):
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
        te = t + ex[pe] / total
        cell = ((n1 * (cap2 + 1)) + n2) * 2 + k
        if te >= t_end:
            if t_end > warmup:
                start = t if t > warmup else warmup
                occ[cell] += t_end - start
            t = t_end
            status = DONE
            break
        u = un[pu] * total
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
            occ[cell] += te - start
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
    istate[:] = [n1, n2, k]
    pos[:] = [pe, pu]
    table[:] = occ
    return status
