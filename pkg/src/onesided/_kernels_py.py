"""Pure numpy implementation of the first-passage kernels.

Same signatures and output conventions as the compiled module.  Paths are
advanced in lock-step with vectorised numpy operations; the rare cases that
need per-step detail inside a skipped block (jumps that might reach the level)
are handled path by path.  With bridge monitoring, the crossing time inside a
step is reported at the step midpoint rather than refined.
"""

from __future__ import annotations

import math

import numpy as np


def _draw_jumps(rng: np.random.Generator, jfam, jp0, jp1, jvals, jcum, size):
    if jfam == 1:
        return np.full(size, jp0)
    if jfam == 2:
        return jp0 + (jp1 - jp0) * rng.random(size)
    if jfam == 3:
        return jp1 + jp0 * rng.standard_exponential(size)
    if jfam == 4:
        return jp0 + jp1 * rng.standard_normal(size)
    if jfam == 5:
        u = rng.random(size)
        return np.asarray(jvals)[np.searchsorted(np.asarray(jcum), u, side="right").clip(0, len(jvals) - 1)]
    if jfam == 6:
        u = 1.0 - rng.random(size)
        return jp1 * u ** (-1.0 / jp0)
    return np.zeros(size)


def _passed(d, strict):
    return d > 0.0 if strict else d >= 0.0


def _bridge_prob(a, b, ln, sigma):
    with np.errstate(over="ignore", invalid="ignore"):
        p = np.where(b >= 0.0, 1.0, np.exp(-2.0 * a * b / (sigma * sigma * ln)))
    return np.where(a >= 0.0, 1.0, p)


def _fine_block(rng, d, n, B, jv, jt, par):
    """Scalar walk through one block with pre-drawn jumps; mirrors the compiled helper."""
    dt, drift, sigma, qstep, alpha, log_cut, max_steps, n_min, strict, bridge = par
    k = 0
    nj = len(jv)
    for s in range(B):
        prev = float(s)
        while k < nj and jt[k] < s + 1.0:
            tk = jt[k]
            ln = (tk - prev) * dt
            if ln > 0:
                inc = drift * ln + (sigma * math.sqrt(ln) * rng.standard_normal() if sigma > 0 else 0.0)
                if bridge and sigma > 0:
                    p = float(_bridge_prob(np.array(d), np.array(d + inc), ln, sigma))
                    if rng.random() < p:
                        return 1, 0.0, n + prev - s + 0.5 * (tk - prev), 0.0
                d += inc
            d += jv[k]
            k += 1
            prev = tk
            if bridge and _passed(d, strict):
                return 1, d, n + tk - s, 0.0
        ln = (s + 1.0 - prev) * dt
        if ln > 0:
            inc = drift * ln + (sigma * math.sqrt(ln) * rng.standard_normal() if sigma > 0 else 0.0)
            if bridge and sigma > 0:
                p = float(_bridge_prob(np.array(d), np.array(d + inc), ln, sigma))
                if rng.random() < p:
                    return 1, 0.0, n + prev - s + 0.5 * (s + 1.0 - prev), 0.0
            d += inc
        n += 1
        if n >= n_min and _passed(d, strict):
            return 1, d, float(n), 0.0
        expo = qstep * n + alpha * (-d)
        if expo > log_cut:
            return 2, d, float(n), expo
        if n >= max_steps:
            return 3, d, float(n), expo
    return 0, d, float(n), 0.0


def walk_passage(bitgen, n, d0, n_min, strict, step_mode, dt, drift, sigma, rate,
                 jfam, jp0, jp1, jvals, jcum, jprob, jpos_mean, max_up,
                 qstep, alpha, log_cut, max_steps, bridge, depth, zskip, max_block,
                 out_time, out_over, out_status, out_logb):
    rng = np.random.Generator(bitgen)
    jvals = np.asarray(jvals, dtype=float)
    jprob = np.asarray(jprob, dtype=float)
    d = np.full(n, float(d0))
    steps = np.zeros(n, dtype=np.int64)
    tcross = np.zeros(n)
    status = np.full(n, -1, dtype=np.int8)
    logb = np.zeros(n)
    par = (dt, drift, sigma, qstep, alpha, log_cut, max_steps, n_min, strict, bridge)
    exps = 2.0 ** np.arange(0, 63)
    exps = exps[exps <= max_block]
    act = np.arange(n)
    while act.size:
        da = d[act]
        dist = -da
        expo = qstep * steps[act] + alpha * np.maximum(dist, 0.0)
        ab = expo > log_cut
        cap = (~ab) & (steps[act] >= max_steps)
        status[act[ab]] = 1
        logb[act[ab]] = expo[ab]
        status[act[cap]] = 2
        logb[act[cap]] = expo[cap]
        act = act[~(ab | cap)]
        if not act.size:
            break
        da = d[act]
        dist = -da
        if step_mode == 1:
            B = np.where(dist > 0, np.floor(dist / max_up * (1.0 - 1e-12)), 1).astype(np.int64)
            B = np.clip(B, 1, max_block)
            B = np.minimum(B, max_steps - steps[act])
            blk = B >= 2
            if blk.any():
                counts = rng.multinomial(B[blk], jprob)
                d[act[blk]] += counts @ jvals
                steps[act[blk]] += B[blk]
            one = act[~blk]
            if one.size:
                d[one] += _draw_jumps(rng, 5, 0, 0, jvals, jcum, one.size)
                steps[one] += 1
                hit = (steps[one] >= n_min) & _passed(d[one], strict)
                status[one[hit]] = 0
                tcross[one[hit]] = steps[one[hit]]
        else:
            # block sizes: largest power of two keeping the deterministic reach below half the distance
            Bdt = exps[None, :] * dt
            reach = max(drift, 0.0) * Bdt + zskip * sigma * np.sqrt(Bdt) + 2.0 * rate * Bdt * jpos_mean
            ok = reach <= 0.5 * np.maximum(dist, 0.0)[:, None]
            ok[:, 0] = True
            B = exps[ok.sum(axis=1) - 1].astype(np.int64)
            B = np.where(dist > 0, B, 1)
            B = np.minimum(B, max_steps - steps[act])
            nj = rng.poisson(rate * B * dt) if rate > 0 else np.zeros(act.size, dtype=np.int64)
            tot = int(nj.sum())
            jv_all = _draw_jumps(rng, jfam, jp0, jp1, jvals, jcum, tot)
            offs = np.concatenate([[0], np.cumsum(nj)])
            sumj = np.add.reduceat(np.append(jv_all, 0.0), offs[:-1]) * (nj > 0)
            spos = np.add.reduceat(np.append(np.maximum(jv_all, 0.0), 0.0), offs[:-1]) * (nj > 0)
            det = max(drift, 0.0) * B * dt + zskip * sigma * np.sqrt(B * dt)
            safe = (B >= 2) & (det + spos < dist)
            if safe.any():
                ix = act[safe]
                Bs = B[safe]
                d[ix] += drift * Bs * dt + sigma * np.sqrt(Bs * dt) * rng.standard_normal(ix.size) + sumj[safe]
                steps[ix] += Bs
            simple = (~safe) & (B == 1) & (nj == 0)
            if simple.any():
                ix = act[simple]
                a = d[ix]
                b = a + drift * dt + sigma * math.sqrt(dt) * rng.standard_normal(ix.size)
                steps[ix] += 1
                if bridge and sigma > 0:
                    p = _bridge_prob(a, b, dt, sigma)
                    cr = rng.random(ix.size) < p
                    status[ix[cr]] = 0
                    tcross[ix[cr]] = steps[ix[cr]] - 0.5
                    d[ix] = np.where(cr, 0.0, b)
                else:
                    d[ix] = b
                    hit = (steps[ix] >= n_min) & _passed(b, strict)
                    status[ix[hit]] = 0
                    tcross[ix[hit]] = steps[ix[hit]]
            rest = np.nonzero((~safe) & ~simple)[0]
            for r in rest:
                i = act[r]
                jv = jv_all[offs[r]:offs[r + 1]]
                u = np.cumsum(rng.standard_exponential(len(jv) + 1))
                jt = u[:-1] / u[-1] * B[r]
                res, dn, tn, lb = _fine_block(rng, d[i], int(steps[i]), int(B[r]), jv, jt, par)
                d[i] = dn
                if res == 0:
                    steps[i] = int(round(tn))
                elif res == 1:
                    status[i] = 0
                    tcross[i] = tn
                    steps[i] = int(math.ceil(tn))
                else:
                    status[i] = 1 if res == 2 else 2
                    steps[i] = int(round(tn))
                    logb[i] = lb
        act = act[status[act] < 0]
    done = status == 0
    out_status[:] = status
    out_time[:] = np.where(done, tcross, steps.astype(float))
    out_over[:] = d
    out_logb[:] = np.where(done, 0.0, logb)


def levy_passage(bitgen, n, d0, strict, drift, rate, jfam, jp0, jp1, jvals, jcum,
                 q, alpha, log_cut, max_events, out_time, out_over, out_status, out_logb):
    rng = np.random.Generator(bitgen)
    d = np.full(n, float(d0))
    t = np.zeros(n)
    ev = np.zeros(n, dtype=np.int64)
    status = np.full(n, -1, dtype=np.int8)
    logb = np.zeros(n)
    act = np.arange(n)
    while act.size:
        expo = q * t[act] + alpha * np.maximum(-d[act], 0.0)
        ab = expo > log_cut
        cap = (~ab) & (ev[act] >= max_events)
        status[act[ab]] = 1
        status[act[cap]] = 2
        logb[act[ab | cap]] = expo[ab | cap]
        act = act[~(ab | cap)]
        if not act.size:
            break
        E = rng.standard_exponential(act.size) / rate if rate > 0 else np.full(act.size, 1e300)
        da = d[act]
        creep = (drift > 0) & (da + drift * E >= 0)
        if np.any(creep):
            ix = act[creep]
            t[ix] += -d[ix] / drift
            d[ix] = 0.0
            status[ix] = 0
        ix = act[~creep]
        if ix.size:
            t[ix] += E[~creep]
            d[ix] += drift * E[~creep] + _draw_jumps(rng, jfam, jp0, jp1, jvals, jcum, ix.size)
            ev[ix] += 1
            hit = _passed(d[ix], strict)
            status[ix[hit]] = 0
        act = act[status[act] < 0]
    out_status[:] = status
    out_time[:] = t
    out_over[:] = d
    out_logb[:] = np.where(status == 0, 0.0, logb)
