"""
Compiled inner loops for training and greedy evaluation on the cabin MDP.

The dynamics here mirror ``model``/``comfort``/``env`` operation for
operation (same expression order) so results agree with the Python path to
rounding; ``tests/test_kernel.py`` holds the two against each other.

Eligibility traces are applied lazily.  All weights whose trace was
replaced at step ``s`` carry the same trace value, so instead of touching
every traced weight each step the kernel keeps one accumulator ``pend[s]``
per replacement step and adds ``c * delta * e(k - s)`` to each live one.
A weight reads as ``theta[i] + pend[set_step[i]]`` and its accumulator is
folded into ``theta`` when the trace is replaced again or the episode ends.
Per-step cost is O(trace lifetime + features) instead of O(traced weights).
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

OK = 0
DIVERGED_DELTA = 1
DIVERGED_MODEL = 2


@nb.njit(cache=True, inline="always")
def _state_part(Tc, Tm, Tamb, lo, hi, width, shift, intervals, stride, block_start, out):
    T = lo.shape[0]
    for t in range(T):
        idx = block_start[t]
        for j in range(3):
            if stride[t, j] == 0:
                continue
            x = Tc if j == 0 else (Tm if j == 1 else Tamb)
            if x < lo[t, j]:
                x = lo[t, j]
            elif x > hi[t, j]:
                x = hi[t, j]
            b = int(math.floor((x - lo[t, j] + shift[t, j]) / width[t, j]))
            if b < 0:
                b = 0
            elif b > intervals[t, j] - 1:
                b = intervals[t, j] - 1
            idx += b * stride[t, j]
        out[t] = idx


@nb.njit(cache=True, inline="always")
def _env_step(Tc, Tm, Tamb, a, act_flow, act_temp, act_ifan, act_iin, mp, cp, rp, env):
    """Returns (Tc', Tm', reward, q_h, t_e, comfortable, energy, out_of_envelope)."""
    solar, occ, gm, gc, cck, cm, dt, nsub = mp[0], mp[1], mp[2], mp[3], mp[4], mp[5], mp[6], int(mp[7])
    i_fan = act_ifan[a]
    tx = act_temp[a]
    q_h = i_fan * (tx - Tc) - act_iin[a] * (Tamb - Tc)
    h = dt / nsub
    for _ in range(nsub):
        cabin_in = i_fan * (tx - Tc) + solar + occ + (Tm - Tc) * gm - (Tc - Tamb) * gc
        dTc = cabin_in / cck
        dTm = (Tc - Tm) * gm / cm
        Tc = Tc + h * dTc
        Tm = Tm + h * dTm
    icl, target, band, divisor = cp[0], cp[1], cp[2], cp[3]
    vel = act_flow[a] / divisor
    if vel <= 0.1:
        te = 0.5 * (Tc + Tm)
    else:
        draft = (0.24 - 0.75 * math.sqrt(vel)) / (1.0 + icl)
        te = 0.55 * Tc + 0.45 * Tm + draft * (36.5 - Tc)
    comfortable = abs(te - target) <= band
    r_comfort = 0.0 if comfortable else -1.0
    energy = abs(q_h) + rp[1] * act_flow[a]
    r = r_comfort - energy / rp[0]
    out = not (env[0] <= Tc <= env[1] and env[0] <= Tm <= env[1])
    return Tc, Tm, r, q_h, te, comfortable, energy, out


@nb.njit(cache=True, inline="always")
def _greedy(theta, sp, act_off):
    """First-index argmax of Q-hat over all actions."""
    best = -np.inf
    best_a = 0
    for a in range(act_off.shape[0]):
        q = 0.0
        for t in range(sp.shape[0]):
            q += theta[sp[t] + act_off[a, t]]
        if q > best:
            best = q
            best_a = a
    return best_a


@nb.njit(cache=True)
def evaluate_greedy(theta, starts, max_steps, geo_f, geo_i, block_start, act_off,
                    act_flow, act_temp, act_ifan, act_iin, mp, cp, rp, env, r_min):
    """Deterministic greedy rollouts.

    Returns per-scenario ``(reward_sum, comfort_steps, abs_qh_sum, energy_sum)``.
    """
    lo, hi, width, shift = geo_f[0], geo_f[1], geo_f[2], geo_f[3]
    intervals, stride = geo_i[0], geo_i[1]
    n = starts.shape[0]
    out = np.zeros((n, 4))
    sp = np.empty(block_start.shape[0], dtype=np.int64)
    for i in range(n):
        Tc, Tm, Tamb = starts[i, 0], starts[i, 1], starts[i, 2]
        absorbed = not (env[0] <= Tc <= env[1] and env[0] <= Tm <= env[1])
        for k in range(max_steps):
            if absorbed:
                out[i, 0] += r_min
                continue
            _state_part(Tc, Tm, Tamb, lo, hi, width, shift, intervals, stride, block_start, sp)
            a = _greedy(theta, sp, act_off)
            Tc, Tm, r, q_h, te, comf, energy, exited = _env_step(
                Tc, Tm, Tamb, a, act_flow, act_temp, act_ifan, act_iin, mp, cp, rp, env)
            out[i, 0] += r
            out[i, 1] += 1.0 if comf else 0.0
            out[i, 2] += abs(q_h)
            out[i, 3] += energy
            absorbed = exited
    return out


@nb.njit(cache=True, inline="always")
def _q(theta, pend, set_step, sp, act_off, a):
    q = 0.0
    for t in range(sp.shape[0]):
        i = sp[t] + act_off[a, t]
        q += theta[i] + pend[set_step[i]]
    return q


@nb.njit(cache=True, inline="always")
def _select(theta, pend, set_step, sp, act_off, eps, u0, u1, qbuf):
    """Epsilon-greedy with uniform tie-breaking, driven by two uniforms."""
    n_act = act_off.shape[0]
    if u0 < eps:
        return int(u1 * n_act)
    best = -np.inf
    for a in range(n_act):
        q = _q(theta, pend, set_step, sp, act_off, a)
        qbuf[a] = q
        if q > best:
            best = q
    m = 0
    for a in range(n_act):
        if qbuf[a] == best:
            m += 1
    pick = int(u1 * m)
    for a in range(n_act):
        if qbuf[a] == best:
            if pick == 0:
                return a
            pick -= 1
    return n_act - 1


@nb.njit(cache=True)
def train_episodes(theta, starts, uniforms, forced, eps, step_size, gamma, lam, trace_floor,
                   max_steps, geo_f, geo_i, block_start, act_off,
                   act_flow, act_temp, act_ifan, act_iin, mp, cp, rp, env, r_min, diag):
    """Run Sarsa(lambda) for ``starts.shape[0]`` episodes, updating ``theta`` in place.

    ``uniforms[e, k]`` are the two uniforms consumed by action selection at
    step ``k`` of episode ``e`` (step ``max_steps`` included for the final
    bootstrap action).  ``forced[e, k] >= 0`` overrides the selection.
    Returns a status code; on divergence ``diag`` receives
    ``(episode, step, delta, Tc, Tm)``.
    """
    lo, hi, width, shift = geo_f[0], geo_f[1], geo_f[2], geo_f[3]
    intervals, stride = geo_i[0], geo_i[1]
    W = theta.shape[0]
    T = block_start.shape[0]
    n_act = act_off.shape[0]
    rho = gamma * lam
    c = step_size

    # trace value n steps after replacement, by repeated decay, until it drops
    decay = np.zeros(max_steps + 1)
    k0 = -1
    e = 1.0
    while k0 < max_steps:
        k0 += 1
        decay[k0] = e
        e = e * rho
        if not e >= trace_floor:
            break

    # slot ``max_steps`` is a permanent zero for untraced weights
    none = max_steps
    set_step = np.full(W, none, dtype=np.int64)
    pend = np.zeros(max_steps + 1)
    traced = np.empty(T * max_steps, dtype=np.int64)
    sp = np.empty(T, dtype=np.int64)
    sp2 = np.empty(T, dtype=np.int64)
    qbuf = np.empty(n_act)

    for ep in range(starts.shape[0]):
        Tc, Tm, Tamb = starts[ep, 0], starts[ep, 1], starts[ep, 2]
        absorbed = not (env[0] <= Tc <= env[1] and env[0] <= Tm <= env[1])
        n_traced = 0
        for k in range(max_steps + 1):
            pend[k] = 0.0
        _state_part(Tc, Tm, Tamb, lo, hi, width, shift, intervals, stride, block_start, sp)
        if forced[ep, 0] >= 0:
            a = forced[ep, 0]
        else:
            a = _select(theta, pend, set_step, sp, act_off, eps, uniforms[ep, 0, 0], uniforms[ep, 0, 1], qbuf)
        for k in range(max_steps):
            if absorbed:
                Tc2, Tm2, r, absorbed2 = Tc, Tm, r_min, True
            else:
                Tc2, Tm2, r, q_h, te, comf, energy, exited = _env_step(
                    Tc, Tm, Tamb, a, act_flow, act_temp, act_ifan, act_iin, mp, cp, rp, env)
                if not (math.isfinite(Tc2) and math.isfinite(Tm2)):
                    diag[0], diag[1], diag[2], diag[3], diag[4] = ep, k, np.nan, Tc, Tm
                    return DIVERGED_MODEL
                absorbed2 = exited
            _state_part(Tc2, Tm2, Tamb, lo, hi, width, shift, intervals, stride, block_start, sp2)
            if forced[ep, k + 1] >= 0:
                a2 = forced[ep, k + 1]
            else:
                a2 = _select(theta, pend, set_step, sp2, act_off, eps,
                             uniforms[ep, k + 1, 0], uniforms[ep, k + 1, 1], qbuf)
            q_sa = _q(theta, pend, set_step, sp, act_off, a)
            q_next = 0.0
            if not absorbed2:
                q_next = _q(theta, pend, set_step, sp2, act_off, a2)
            delta = r + gamma * q_next - q_sa
            if not math.isfinite(delta):
                diag[0], diag[1], diag[2], diag[3], diag[4] = ep, k, delta, Tc, Tm
                return DIVERGED_DELTA

            # replacing traces: fold what the old trace earned, restart at k
            for t in range(T):
                i = sp[t] + act_off[a, t]
                s = set_step[i]
                if s == none:
                    traced[n_traced] = i
                    n_traced += 1
                else:
                    theta[i] += pend[s]
                set_step[i] = k
            # every live trace group earns c * delta * e
            cd = c * delta
            first = k - k0
            if first < 0:
                first = 0
            for s in range(first, k + 1):
                pend[s] += cd * decay[k - s]

            Tc, Tm, absorbed, a = Tc2, Tm2, absorbed2, a2
            for t in range(T):
                sp[t] = sp2[t]

        for j in range(n_traced):
            i = traced[j]
            theta[i] += pend[set_step[i]]
            set_step[i] = none
    return OK
