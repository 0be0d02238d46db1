"""Compiled inner loops: transition-graph construction and Howard policy
iteration for the maximum cycle mean.

The exact variant works on int64 edge weights and keeps every cycle mean as
a reduced fraction num/den, with the bias of node u stored scaled by den[u].
Callers must make sure |weights| * V^2 stays well inside int64.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fill_edges(Y, N, R, sup_norm, count_only, indptr, dst, wx, wy):
    h = 1.0 / N
    V = N * N
    total = 0
    for u in range(V):
        yx = Y[u, 0]
        yy = Y[u, 1]
        jx0 = int(math.floor((yx - R) / h - 0.5))
        jx1 = int(math.ceil((yx + R) / h - 0.5))
        jy0 = int(math.floor((yy - R) / h - 0.5))
        jy1 = int(math.ceil((yy + R) / h - 0.5))
        if not count_only:
            total = indptr[u]
        for jy in range(jy0, jy1 + 1):
            cy = (jy + 0.5) * h
            for jx in range(jx0, jx1 + 1):
                cx = (jx + 0.5) * h
                dx = cx - yx
                dy = cy - yy
                if sup_norm:
                    d = max(abs(dx), abs(dy))
                else:
                    d = math.sqrt(dx * dx + dy * dy)
                if d < R:
                    if not count_only:
                        mx = jx // N
                        my = jy // N
                        dst[total] = (jy - my * N) * N + (jx - mx * N)
                        wx[total] = mx
                        wy[total] = my
                    total += 1
        if count_only:
            indptr[u + 1] = total
    return total


def build_edges(Y: np.ndarray, N: int, R: float, sup_norm: bool):
    V = N * N
    indptr = np.zeros(V + 1, dtype=np.int64)
    dummy32 = np.zeros(1, dtype=np.int32)
    dummy64 = np.zeros(1, dtype=np.int64)
    E = _fill_edges(Y, N, R, sup_norm, True, indptr, dummy32, dummy64, dummy64)
    dst = np.empty(E, dtype=np.int32)
    wx = np.empty(E, dtype=np.int64)
    wy = np.empty(E, dtype=np.int64)
    _fill_edges(Y, N, R, sup_norm, False, indptr, dst, wx, wy)
    return indptr, dst, wx, wy


@njit(cache=True)
def _gcd(a, b):
    a = abs(a)
    b = abs(b)
    while b:
        a, b = b, a % b
    return a


@njit(cache=True)
def _evaluate_exact(indptr, dst, w, pi, num, den, X, state, path):
    V = pi.shape[0]
    state[:] = 0
    for s in range(V):
        if state[s] != 0:
            continue
        L = 0
        u = s
        while state[u] == 0:
            state[u] = 1
            path[L] = u
            L += 1
            u = dst[pi[u]]
        if state[u] == 1:
            idx = L - 1
            while path[idx] != u:
                idx -= 1
            S = 0
            hp = idx
            for t in range(idx, L):
                S += w[pi[path[t]]]
                if path[t] < path[hp]:
                    hp = t
            ln = L - idx
            g = _gcd(S, ln)
            n_ = S // g
            d_ = ln // g
            head = path[hp]
            X[head] = 0
            num[head] = n_
            den[head] = d_
            state[head] = 2
            pos = hp
            for _ in range(ln - 1):
                pos -= 1
                if pos < idx:
                    pos = L - 1
                node = path[pos]
                succ = dst[pi[node]]
                X[node] = d_ * w[pi[node]] - n_ + X[succ]
                num[node] = n_
                den[node] = d_
                state[node] = 2
            L = idx
        for t in range(L - 1, -1, -1):
            node = path[t]
            succ = dst[pi[node]]
            num[node] = num[succ]
            den[node] = den[succ]
            X[node] = den[succ] * w[pi[node]] - num[succ] + X[succ]
            state[node] = 2


@njit(cache=True)
def greedy_policy(indptr, w):
    V = indptr.shape[0] - 1
    pi = np.empty(V, dtype=np.int64)
    for u in range(V):
        be = indptr[u]
        for e in range(indptr[u] + 1, indptr[u + 1]):
            if w[e] > w[be]:
                be = e
        pi[u] = be
    return pi


def reverse_index(indptr, dst):
    """CSR of incoming edges.

    For node v, ``rev[rptr[v]:rptr[v+1]]`` are the edge ids and ``rsrc`` the
    matching source nodes, stored contiguously for sequential scans.
    """
    order = np.argsort(dst, kind="stable").astype(np.int64)
    counts = np.bincount(dst, minlength=indptr.shape[0] - 1)
    rptr = np.zeros(indptr.shape[0], dtype=np.int64)
    np.cumsum(counts, out=rptr[1:])
    src = np.repeat(np.arange(indptr.shape[0] - 1, dtype=np.int32), np.diff(indptr))
    return rptr, order, src[order]


@njit(cache=True)
def direction_weights(jx, jy, d0, d1):
    w = np.empty(jx.shape[0], dtype=np.int64)
    for e in range(jx.shape[0]):
        w[e] = jx[e] * d0 + jy[e] * d1
    return w


@njit(cache=True)
def howard_exact(indptr, dst, w, pi, max_iter, rptr, rev, rsrc, gauss_seidel):
    """Maximise cycle means over the policy space. ``pi`` is updated in place.

    Mean improvements are spread by a reverse breadth-first search from the
    nodes attaining the current best mean, so that every node able to reach
    the best policy cycle adopts it in one sweep. Returns
    (num, den, X, iterations, converged).
    """
    V = pi.shape[0]
    num = np.zeros(V, dtype=np.int64)
    den = np.ones(V, dtype=np.int64)
    X = np.zeros(V, dtype=np.int64)
    state = np.zeros(V, dtype=np.int8)
    path = np.empty(V, dtype=np.int64)
    mark = np.zeros(V, dtype=np.int8)
    queue = np.empty(V, dtype=np.int64)
    it = 0
    while it < max_iter:
        it += 1
        _evaluate_exact(indptr, dst, w, pi, num, den, X, state, path)
        changed = False
        # best mean over all nodes
        bn = num[0]
        bd = den[0]
        for u in range(1, V):
            if num[u] * bd > bn * den[u]:
                bn = num[u]
                bd = den[u]
        head = 0
        tail = 0
        for u in range(V):
            if num[u] == bn and den[u] == bd:
                mark[u] = 1
                queue[tail] = u
                tail += 1
            else:
                mark[u] = 0
        if tail == V:
            head = V
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(rptr[v], rptr[v + 1]):
                u = rsrc[k]
                if mark[u] == 0:
                    mark[u] = 1
                    pi[u] = rev[k]
                    num[u] = bn
                    den[u] = bd
                    queue[tail] = u
                    tail += 1
                    changed = True
        for u in range(V):
            if tail == V:
                break
            if mark[u]:
                continue
            cn = num[u]
            cd = den[u]
            be = -1
            for e in range(indptr[u], indptr[u + 1]):
                v = dst[e]
                if num[v] * cd > cn * den[v]:
                    cn = num[v]
                    cd = den[v]
                    be = e
            if be >= 0:
                pi[u] = be
                changed = True
        if changed:
            continue
        for u in range(V):
            best = X[u]
            be = -1
            nu = num[u]
            du = den[u]
            for e in range(indptr[u], indptr[u + 1]):
                v = dst[e]
                if num[v] == nu and den[v] == du:
                    val = du * w[e] - nu + X[v]
                    if val > best:
                        best = val
                        be = e
            if be >= 0:
                pi[u] = be
                if gauss_seidel:
                    X[u] = best
                changed = True
        if not changed:
            return num, den, X, it, True
    return num, den, X, it, False


@njit(cache=True)
def _evaluate_float(indptr, dst, w, pi, lam, X, state, path):
    V = pi.shape[0]
    state[:] = 0
    for s in range(V):
        if state[s] != 0:
            continue
        L = 0
        u = s
        while state[u] == 0:
            state[u] = 1
            path[L] = u
            L += 1
            u = dst[pi[u]]
        if state[u] == 1:
            idx = L - 1
            while path[idx] != u:
                idx -= 1
            S = 0.0
            hp = idx
            for t in range(idx, L):
                S += w[pi[path[t]]]
                if path[t] < path[hp]:
                    hp = t
            ln = L - idx
            lm = S / ln
            head = path[hp]
            X[head] = 0.0
            lam[head] = lm
            state[head] = 2
            pos = hp
            for _ in range(ln - 1):
                pos -= 1
                if pos < idx:
                    pos = L - 1
                node = path[pos]
                succ = dst[pi[node]]
                X[node] = w[pi[node]] - lm + X[succ]
                lam[node] = lm
                state[node] = 2
            L = idx
        for t in range(L - 1, -1, -1):
            node = path[t]
            succ = dst[pi[node]]
            lam[node] = lam[succ]
            X[node] = w[pi[node]] - lam[succ] + X[succ]
            state[node] = 2


@njit(cache=True)
def howard_float(indptr, dst, w, pi, max_iter, eps):
    V = pi.shape[0]
    lam = np.zeros(V)
    X = np.zeros(V)
    state = np.zeros(V, dtype=np.int8)
    path = np.empty(V, dtype=np.int64)
    it = 0
    while it < max_iter:
        it += 1
        _evaluate_float(indptr, dst, w, pi, lam, X, state, path)
        changed = False
        for u in range(V):
            best = lam[u] + eps
            be = -1
            for e in range(indptr[u], indptr[u + 1]):
                if lam[dst[e]] > best:
                    best = lam[dst[e]]
                    be = e
            if be >= 0:
                pi[u] = be
                changed = True
        if changed:
            continue
        for u in range(V):
            best = X[u] + eps
            be = -1
            for e in range(indptr[u], indptr[u + 1]):
                v = dst[e]
                if abs(lam[v] - lam[u]) <= eps:
                    val = w[e] - lam[u] + X[v]
                    if val > best:
                        best = val
                        be = e
            if be >= 0:
                pi[u] = be
                changed = True
        if not changed:
            return lam, X, it, True
    return lam, X, it, False


@njit(cache=True)
def rim_mask(indptr, jx, jy):
    """Edges whose target cell is extreme in its row or column of the fan."""
    E = jx.shape[0]
    keep = np.zeros(E, dtype=np.bool_)
    V = indptr.shape[0] - 1
    for u in range(V):
        lo = indptr[u]
        hi = indptr[u + 1]
        if hi == lo:
            continue
        xmin = jx[lo]
        xmax = jx[lo]
        for e in range(lo, hi):
            xmin = min(xmin, jx[e])
            xmax = max(xmax, jx[e])
        W = xmax - xmin + 1
        cmin = np.empty(W, dtype=np.int64)
        cmax = np.empty(W, dtype=np.int64)
        amin = np.full(W, -1, dtype=np.int64)
        amax = np.full(W, -1, dtype=np.int64)
        for e in range(lo, hi):
            c = jx[e] - xmin
            if amin[c] < 0 or jy[e] < cmin[c]:
                cmin[c] = jy[e]
                amin[c] = e
            if amax[c] < 0 or jy[e] > cmax[c]:
                cmax[c] = jy[e]
                amax[c] = e
        for c in range(W):
            if amin[c] >= 0:
                keep[amin[c]] = True
                keep[amax[c]] = True
        # row extremes
        e = lo
        while e < hi:
            f = e
            bmin = e
            bmax = e
            while f < hi and jy[f] == jy[e]:
                if jx[f] < jx[bmin]:
                    bmin = f
                if jx[f] > jx[bmax]:
                    bmax = f
                f += 1
            keep[bmin] = True
            keep[bmax] = True
            e = f
    return keep
