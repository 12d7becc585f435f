"""Hot loops of tree growing and tree application.

Two interchangeable backends:

``numba``
    explicit loops compiled with ``@njit``.
``numpy``
    vectorised equivalents.  Used when numba is missing or when the
    environment variable ``ABACPIP_NUMBA`` is set to ``0``.

The grower itself (node bookkeeping, stopping rules, feature ordering) is
written once.  The numba backend compiles it; the numpy backend re-executes
the same function body with the numpy kernels bound in place of the jitted
ones.  Per-node randomness comes from a counter-based 64-bit hash instead of
a stateful generator, so both backends draw identical values and grow
bit-identical trees.

Split search works on integer codes: a per-node histogram of (code, class)
weights is swept once per candidate feature.  A split sends ``x <= t`` left;
``t`` is the floor-midpoint between adjacent observed codes, so an unseen
code placed inside a contiguous cluster block falls on the side of its
nearest observed neighbours.
"""

from __future__ import annotations

import os
import types

import numpy as np

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

ENV_FLAG = "ABACPIP_NUMBA"

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0
_GAIN_RTOL = 1e-12


# -- counter-based hashing (splitmix64 finaliser) ----------------------------

@njit(cache=True, nogil=True)
def _mix_nb(a, b):
    z = np.uint64(a) * np.uint64(_GOLDEN) + np.uint64(b) + np.uint64(1)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _mix_py(a, b):
    z = (int(a) * _GOLDEN + int(b) + 1) & _M64
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


# -- numba kernels --------------------------------------------------------------

@njit(cache=True, nogil=True)
def _terminal_nb(y, w, work, s, e, min_split, regression):
    total = 0.0
    first = -1
    mixed = False
    for i in range(s, e):
        r = work[i]
        total += w[r]
        if not regression:
            c = np.int64(y[r])
            if first < 0:
                first = c
            elif c != first:
                mixed = True
    if total < min_split:
        return True
    return False if regression else not mixed


@njit(cache=True, nogil=True)
def _clear(hist, lo, hi, K):
    # the grower allocates ``hist`` zeroed; kernels restore that state
    for c in range(lo, hi + 1):
        for k in range(K):
            hist[c, k] = 0.0


@njit(cache=True, nogil=True)
def _gini_score_nb(L, tot, ntot, K):
    nl = 0.0
    for k in range(K):
        nl += L[k]
    sl = 0.0
    sr = 0.0
    for k in range(K):
        sl += L[k] * L[k]
        rk = tot[k] - L[k]
        sr += rk * rk
    return sl / nl + sr / (ntot - nl)


@njit(cache=True, nogil=True)
def _split_gini_nb(XT, y, w, work, s, e, K, max_codes, order, mtry, random_thr,
                   node_seed, hist, vec):
    L = vec[0]
    tot = vec[1]
    n_feat = order.shape[0]
    best = -1.0
    best_f = -1
    best_t = 0
    tried = 0
    for oi in range(n_feat):
        if tried >= mtry:
            break
        f = order[oi]
        M = max_codes[f]
        lo = M + 1
        hi = -1
        for i in range(s, e):
            r = work[i]
            c = XT[f, r]
            hist[c, np.int64(y[r])] += w[r]
            if c < lo:
                lo = c
            if c > hi:
                hi = c
        if lo == hi:
            for k in range(K):
                hist[lo, k] = 0.0
            continue
        tried += 1
        # codes outside [lo, hi] hold zeros, so these sums match full-range ones
        for k in range(K):
            acc = 0.0
            for c in range(lo, hi + 1):
                acc += hist[c, k]
            tot[k] = acc
        ntot = 0.0
        for k in range(K):
            ntot += tot[k]
        for k in range(K):
            L[k] = 0.0
        if random_thr:
            u = np.float64(_mix_nb(node_seed, n_feat + f) >> np.uint64(11)) * _INV53
            t = lo + np.int64(u * (hi - lo))
            for c in range(lo, t + 1):
                for k in range(K):
                    L[k] += hist[c, k]
            score = _gini_score_nb(L, tot, ntot, K)
            if score > best or (score == best and f < best_f):
                best = score
                best_f = f
                best_t = t
            _clear(hist, lo, hi, K)
            continue
        prev = -1
        for c in range(lo, hi + 1):
            row = 0.0
            for k in range(K):
                row += hist[c, k]
            if row > 0.0:
                if prev >= 0:
                    score = _gini_score_nb(L, tot, ntot, K)
                    if score > best or (score == best and f < best_f):
                        best = score
                        best_f = f
                        best_t = (prev + c) // 2
                prev = c
            for k in range(K):
                L[k] += hist[c, k]
        _clear(hist, lo, hi, K)
    return best_f, best_t


@njit(cache=True, nogil=True)
def _split_mse_nb(XT, y, w, work, s, e, max_codes, order, mtry, hist):
    n_feat = order.shape[0]
    best = -np.inf
    best_parent = 0.0
    best_f = -1
    best_t = 0
    tried = 0
    for oi in range(n_feat):
        if tried >= mtry:
            break
        f = order[oi]
        M = max_codes[f]
        lo = M + 1
        hi = -1
        for i in range(s, e):
            r = work[i]
            c = XT[f, r]
            hist[c, 0] += w[r] * y[r]
            hist[c, 1] += w[r]
            if c < lo:
                lo = c
            if c > hi:
                hi = c
        if lo == hi:
            _clear(hist, lo, hi, 2)
            continue
        tried += 1
        stot = 0.0
        wtot = 0.0
        for c in range(lo, hi + 1):
            stot += hist[c, 0]
            wtot += hist[c, 1]
        parent = stot * stot / wtot
        sl = 0.0
        wl = 0.0
        prev = -1
        for c in range(lo, hi + 1):
            if hist[c, 1] > 0.0:
                if prev >= 0:
                    sr = stot - sl
                    score = sl * sl / wl + sr * sr / (wtot - wl)
                    if score > best or (score == best and f < best_f):
                        best = score
                        best_parent = parent
                        best_f = f
                        best_t = (prev + c) // 2
                prev = c
            sl += hist[c, 0]
            wl += hist[c, 1]
        _clear(hist, lo, hi, 2)
    if best_f >= 0 and not best > best_parent + _GAIN_RTOL * abs(best_parent) + 1e-300:
        best_f = -1
    return best_f, best_t


@njit(cache=True, nogil=True)
def _best_split_nb(XT, y, w, work, s, e, K, max_codes, order, mtry, random_thr,
                   node_seed, regression, hist, vec):
    if regression:
        return _split_mse_nb(XT, y, w, work, s, e, max_codes, order, mtry, hist)
    return _split_gini_nb(XT, y, w, work, s, e, K, max_codes, order, mtry, random_thr,
                          node_seed, hist, vec)


@njit(cache=True, nogil=True)
def _partition_nb(XT, work, buf, s, e, f, t):
    nl = s
    nr = 0
    for i in range(s, e):
        r = work[i]
        if XT[f, r] <= t:
            work[nl] = r
            nl += 1
        else:
            buf[nr] = r
            nr += 1
    for i in range(nr):
        work[nl + i] = buf[i]
    return nl


@njit(cache=True, nogil=True)
def _apply_nb(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


# -- shared grower ------------------------------------------------------------------

mix = _mix_nb
terminal = _terminal_nb
best_split = _best_split_nb
partition = _partition_nb


@njit(cache=True, nogil=True)
def _grow_nb(XT, y, w, idx, n_classes, max_codes, max_depth, min_split, mtry,
             random_thr, seed, regression):
    n = idx.shape[0]
    n_feat = XT.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    end = np.zeros(cap, np.int64)
    depth = np.zeros(cap, np.int64)
    stack = np.empty(cap, np.int64)
    work = idx.copy()
    buf = np.empty(n, np.int64)
    hist = np.zeros((max_codes.max() + 1, max(n_classes, 2)), np.float64)
    vec = np.zeros((2, max(n_classes, 2)), np.float64)
    keys = np.empty(n_feat, np.uint64)
    order = np.arange(n_feat)
    shuffle = random_thr or mtry < n_feat
    end[0] = n
    n_nodes = 1
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = end[node]
        if depth[node] >= max_depth or terminal(y, w, work, s, e, min_split, regression):
            continue
        node_seed = mix(seed, node)
        if shuffle:
            for j in range(n_feat):
                keys[j] = mix(node_seed, j)
            order = np.argsort(keys, kind="mergesort")
        f, t = best_split(XT, y, w, work, s, e, n_classes, max_codes, order, mtry,
                          random_thr, node_seed, regression, hist, vec)
        if f < 0:
            continue
        mid = partition(XT, work, buf, s, e, f, t)
        if mid == s or mid == e:
            continue
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = t
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = mid
        start[rc] = mid
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        stack[sp] = rc
        stack[sp + 1] = lc
        sp += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), end[:n_nodes].copy(), work)


# -- numpy kernels -----------------------------------------------------------------

def _terminal_np(y, w, work, s, e, min_split, regression):
    rows = work[s:e]
    if w[rows].sum() < min_split:
        return True
    if regression:
        return False
    labels = y[rows]
    return labels.min() == labels.max()


def _gini_scores_np(Lm, tot, ntot, K):
    nl = np.zeros(len(Lm))
    for k in range(K):
        nl += Lm[:, k]
    sl = np.zeros(len(Lm))
    sr = np.zeros(len(Lm))
    for k in range(K):
        sl += Lm[:, k] * Lm[:, k]
        rk = tot[k] - Lm[:, k]
        sr += rk * rk
    return sl / nl + sr / (ntot - nl)


def _feature_hist(XT, f, rows, weights, M):
    return np.bincount(XT[f, rows], weights=weights, minlength=M + 1)


def _best_split_np(XT, y, w, work, s, e, K, max_codes, order, mtry, random_thr,
                   node_seed, regression, hist=None, vec=None):
    rows = work[s:e]
    ww = w[rows]
    yy = y[rows]
    n_feat = len(order)
    best = -np.inf if regression else -1.0
    best_parent = 0.0
    best_f, best_t = -1, 0
    tried = 0
    labels = yy.astype(np.int64)
    wy = ww * yy
    for f in order:
        if tried >= mtry:
            break
        f = int(f)
        M = int(max_codes[f])
        x = XT[f, rows]
        lo, hi = int(x.min()), int(x.max())
        if lo == hi:
            continue
        tried += 1
        if regression:
            S = np.bincount(x, weights=wy, minlength=M + 1)
            W = np.bincount(x, weights=ww, minlength=M + 1)
            cs, cw = np.cumsum(S), np.cumsum(W)
            stot, wtot = cs[-1], cw[-1]
            parent = stot * stot / wtot
            obs = np.flatnonzero(W > 0.0)
            prev, nxt = obs[:-1], obs[1:]
            sl, wl = cs[prev], cw[prev]
            sr = stot - sl
            scores = sl * sl / wl + sr * sr / (wtot - wl)
            j = int(np.argmax(scores))
            if scores[j] > best or (scores[j] == best and f < best_f):
                best, best_parent, best_f = scores[j], parent, f
                best_t = (int(prev[j]) + int(nxt[j])) // 2
            continue
        H = np.bincount(x * K + labels, weights=ww, minlength=(M + 1) * K).reshape(M + 1, K)
        C = np.cumsum(H, axis=0)
        tot = C[-1]
        ntot = 0.0
        for k in range(K):
            ntot += tot[k]
        if random_thr:
            u = float(_mix_py(node_seed, n_feat + f) >> 11) * _INV53
            t = lo + int(u * (hi - lo))
            score = _gini_scores_np(C[t:t + 1], tot, ntot, K)[0]
            if score > best or (score == best and f < best_f):
                best, best_f, best_t = score, f, t
            continue
        obs = np.flatnonzero(H.sum(axis=1) > 0.0)
        prev, nxt = obs[:-1], obs[1:]
        scores = _gini_scores_np(C[prev], tot, ntot, K)
        j = int(np.argmax(scores))
        if scores[j] > best or (scores[j] == best and f < best_f):
            best, best_f = scores[j], f
            best_t = (int(prev[j]) + int(nxt[j])) // 2
    if regression and best_f >= 0 and not best > best_parent + _GAIN_RTOL * abs(best_parent) + 1e-300:
        best_f = -1
    return best_f, best_t


def _partition_np(XT, work, buf, s, e, f, t):
    rows = work[s:e].copy()
    m = XT[f, rows] <= t
    nl = int(m.sum())
    work[s:s + nl] = rows[m]
    work[s + nl:e] = rows[~m]
    return s + nl


def _apply_np(X, feature, threshold, left, right):
    node = np.zeros(len(X), dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while len(active):
        nd = node[active]
        go_left = X[active, feature[nd]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return node


def _rebind(fn, **kernels):
    """Copy of ``fn`` (plain Python) whose globals resolve to ``kernels``."""
    src = getattr(fn, "py_func", fn)
    scope = dict(src.__globals__)
    scope.update(kernels)
    return types.FunctionType(src.__code__, scope, src.__name__ + "_np", src.__defaults__)


_grow_np = _rebind(_grow_nb, mix=_mix_py, terminal=_terminal_np,
                   best_split=_best_split_np, partition=_partition_np)


# -- backend selection -------------------------------------------------------------

class Backend:
    def __init__(self, name, grow, apply):
        self.name = name
        self._grow = grow
        self._apply = apply

    def grow(self, XT, y, w, idx, n_classes, max_codes, max_depth, min_split, mtry,
             random_thr, seed, regression):
        return self._grow(XT, np.asarray(y, np.float64), w, idx, np.int64(n_classes),
                          max_codes, np.int64(max_depth), np.float64(min_split),
                          np.int64(mtry), bool(random_thr), np.uint64(seed), bool(regression))

    def apply(self, X, feature, threshold, left, right):
        return self._apply(np.ascontiguousarray(X, dtype=np.int64), feature, threshold, left, right)

    def __repr__(self):
        return f"Backend({self.name!r})"


NUMPY = Backend("numpy", _grow_np, _apply_np)
NUMBA = Backend("numba", _grow_nb, _apply_nb) if HAVE_NUMBA else None


def available_backends() -> list:
    return [b.name for b in (NUMBA, NUMPY) if b is not None]


def get_backend(name=None) -> Backend:
    """Backend by name; default follows the ``ABACPIP_NUMBA`` flag."""
    if name is None:
        flag = os.environ.get(ENV_FLAG, "1").strip().lower()
        name = "numpy" if flag in ("0", "false", "no", "off") or not HAVE_NUMBA else "numba"
    if isinstance(name, Backend):
        return name
    if name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return NUMBA
    if name == "numpy":
        return NUMPY
    raise ValueError(f"unknown backend {name!r}")
