"""Compiled inner loops for the single-node dynamics.

All state arrays are owned by a ``MoveState`` and mutated in place. A move
of node u from part a to part b changes modularity by ``num / (4 m^2)`` with
the integer ``num = 4m (c_ub - c_ua) - 2 d_u (vol_b - vol_a + d_u)``.
"""

import numpy as np
from numba import njit

CLOSE, BETWEEN, FAR = 0, 1, 2
HEAT_BATH, METROPOLIS = 0, 1


@njit(cache=True)
def delta_numerator(u, b, labels, counts, vol, deg, m):
    a = labels[u]
    return 4 * m * (counts[u, b] - counts[u, a]) - 2 * deg[u] * (vol[b] - vol[a] + deg[u])


@njit(cache=True)
def score(internal, vol, m):
    s_int = 0
    for x in internal:
        s_int += x
    tax = 0.0
    for x in vol:
        tax += float(x) * float(x)
    return s_int / m - tax / (4.0 * m * m)


@njit(cache=True)
def region_of(dist, nu1, nu2):
    if dist <= nu1 + 1e-12:
        return CLOSE
    if dist >= nu2 - 1e-12:
        return FAR
    return BETWEEN


@njit(cache=True)
def _rescan(overlap, perms, sigma, best):
    k = overlap.shape[0]
    top = -1
    top_row = 0
    for s in range(perms.shape[0]):
        v = 0
        for i in range(k):
            v += overlap[perms[s, i], i]
        if v > top:
            top = v
            top_row = s
    best[0] = top
    for i in range(k):
        sigma[i] = perms[top_row, i]


@njit(cache=True)
def apply_move(u, b, labels, counts, vol, internal, indptr, indices, deg,
               planted, overlap, sigma, best, perms):
    a = labels[u]
    if a == b:
        return
    internal[a] -= counts[u, a]
    internal[b] += counts[u, b]
    vol[a] -= deg[u]
    vol[b] += deg[u]
    labels[u] = b
    for e in range(indptr[u], indptr[u + 1]):
        v = indices[e]
        counts[v, a] -= 1
        counts[v, b] += 1
    j = planted[u]
    overlap[a, j] -= 1
    overlap[b, j] += 1
    own = sigma[j]
    val = best[0]
    if own == a:
        val -= 1
    if own == b:
        val += 1
    if val == best[0] + 1:
        best[0] = val
    else:
        _rescan(overlap, perms, sigma, best)


@njit(cache=True)
def greedy_steps(labels, counts, vol, internal, indptr, indices, deg, m,
                 planted, overlap, sigma, best, perms, max_steps,
                 out_node, out_label, out_num, out_best):
    """Best-improvement ascent; ties go to the smallest (node, label). Returns moves made."""
    n, k = counts.shape
    steps = 0
    while steps < max_steps:
        top = 0
        tu = -1
        tb = -1
        for u in range(n):
            a = labels[u]
            for b in range(k):
                if b == a:
                    continue
                num = 4 * m * (counts[u, b] - counts[u, a]) - 2 * deg[u] * (vol[b] - vol[a] + deg[u])
                if num > top:
                    top = num
                    tu = u
                    tb = b
        if tu < 0:
            break
        apply_move(tu, tb, labels, counts, vol, internal, indptr, indices, deg,
                   planted, overlap, sigma, best, perms)
        out_node[steps] = tu
        out_label[steps] = tb
        out_num[steps] = top
        out_best[steps] = best[0]
        steps += 1
    return steps


@njit(cache=True)
def heat_bath_choice(labels, counts, vol, deg, m, beta_n, uniform, buf):
    """Pick a neighbour with probability proportional to exp(beta n q'); returns u*k + b."""
    n, k = counts.shape
    scale = beta_n / (4.0 * m * m)
    top = -np.inf
    for u in range(n):
        a = labels[u]
        for b in range(k):
            if b == a:
                buf[u * k + b] = -np.inf
                continue
            num = 4 * m * (counts[u, b] - counts[u, a]) - 2 * deg[u] * (vol[b] - vol[a] + deg[u])
            x = scale * num
            buf[u * k + b] = x
            if x > top:
                top = x
    total = 0.0
    for idx in range(n * k):
        if buf[idx] > -np.inf:
            w = np.exp(buf[idx] - top)
            buf[idx] = w
            total += w
        else:
            buf[idx] = 0.0
    target = uniform * total
    acc = 0.0
    last = -1
    for idx in range(n * k):
        w = buf[idx]
        if w > 0.0:
            acc += w
            last = idx
            if acc > target:
                return idx
    return last


@njit(cache=True)
def run_chain(labels, counts, vol, internal, indptr, indices, deg, m,
              planted, overlap, sigma, best, perms,
              kernel, beta_n, uniforms, nu1, nu2, step0, tau, exit_step, sample_every,
              out_step, out_q, out_d, out_region, buf, code, powers, visits):
    """Advance the chain ``len(uniforms)`` steps.

    ``tau`` and ``exit_step`` are one-element arrays holding the first step
    inside and the first step outside the close region (-1 while unseen). When ``visits`` is non-empty the state
    code ``sum_u labels[u] * k**u`` is tracked in ``code[0]`` and its
    occupation counted after every step. Returns the number of samples written.
    """
    n, k = counts.shape
    track = visits.shape[0] > 0
    written = 0
    for s in range(uniforms.shape[0]):
        if kernel == HEAT_BATH:
            idx = heat_bath_choice(labels, counts, vol, deg, m, beta_n, uniforms[s, 0], buf)
            u = idx // k
            b = idx % k
            if track:
                code[0] += (b - labels[u]) * powers[u]
            apply_move(u, b, labels, counts, vol, internal, indptr, indices, deg,
                       planted, overlap, sigma, best, perms)
        else:
            pick = int(uniforms[s, 0] * n * (k - 1))
            if pick >= n * (k - 1):
                pick = n * (k - 1) - 1
            u = pick // (k - 1)
            b = pick % (k - 1)
            if b >= labels[u]:
                b += 1
            num = 4 * m * (counts[u, b] - counts[u, labels[u]]) \
                - 2 * deg[u] * (vol[b] - vol[labels[u]] + deg[u])
            x = beta_n * num / (4.0 * m * m)
            if x >= 0.0 or uniforms[s, 1] < np.exp(x):
                if track:
                    code[0] += (b - labels[u]) * powers[u]
                apply_move(u, b, labels, counts, vol, internal, indptr, indices, deg,
                           planted, overlap, sigma, best, perms)
        if track:
            visits[code[0]] += 1
        step = step0 + s + 1
        dist = 1.0 - best[0] / n
        reg = region_of(dist, nu1, nu2)
        if tau[0] < 0 and reg == CLOSE:
            tau[0] = step
        if exit_step[0] < 0 and reg != CLOSE:
            exit_step[0] = step
        if step % sample_every == 0:
            out_step[written] = step
            out_q[written] = score(internal, vol, m)
            out_d[written] = dist
            out_region[written] = reg
            written += 1
    return written
