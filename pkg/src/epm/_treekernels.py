"""Compiled inner loops for tree growth and weakest-link pruning.

The split rule mirrors :func:`epm.regtree.best_split`: candidates are ranked
by the cumulative-sum loss, and every candidate within a small tolerance of
the minimum is re-scored with the two-pass loss before the first minimum is
kept. Random numbers are supplied by the caller as a (nodes, p + 1 + K)
uniform table so that node ``t`` always consumes row ``t``.
"""

import numpy as np
from numba import njit

TIE_RTOL = 1e-8


@njit(cache=True)
def _two_pass(yv, goes_left):
    nl = 0
    sl = 0.0
    sr = 0.0
    for i in range(yv.size):
        if goes_left[i]:
            nl += 1
            sl += yv[i]
        else:
            sr += yv[i]
    ml = sl / nl
    mr = sr / (yv.size - nl)
    loss = 0.0
    for i in range(yv.size):
        d = yv[i] - (ml if goes_left[i] else mr)
        loss += d * d
    return loss


@njit(cache=True)
def _scan_cont(xv, yv, min_leaf, total):
    """Best threshold cut of one continuous column: (loss, lo, hi) or loss=inf."""
    m = xv.size
    order = np.argsort(xv, kind="mergesort")
    xs = xv[order]
    ys = yv[order]
    cs = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    fast = np.full(m - 1, np.inf)
    best = np.inf
    for i in range(m - 1):
        if xs[i] < xs[i + 1]:
            nl = i + 1.0
            nr = m - nl
            if nl >= min_leaf and nr >= min_leaf:
                ls = cs[i]
                rs = cs[m - 1] - ls
                f = (cs2[i] - ls * ls / nl) + (cs2[m - 1] - cs2[i] - rs * rs / nr)
                fast[i] = f
                if f < best:
                    best = f
    if best == np.inf:
        return np.inf, 0.0, 0.0
    tol = TIE_RTOL * (total + 1.0)
    best_exact = np.inf
    k = -1
    goes = np.empty(m, dtype=np.bool_)
    for i in range(m - 1):
        if fast[i] <= best + tol:
            thr = xs[i]
            for r in range(m):
                goes[r] = xv[r] <= thr
            e = _two_pass(yv, goes)
            if e < best_exact:
                best_exact = e
                k = i
    return best_exact, xs[k], xs[k + 1]


@njit(cache=True)
def _scan_cat(xv, yv, K, min_leaf, total, left_out):
    """Best consecutive-by-mean partition of one categorical column.

    ``left_out[c]`` is set for codes sent left; codes absent from the node
    are flagged with 2 so the caller can route them by coin.
    """
    m = xv.size
    cnt = np.zeros(K)
    s = np.zeros(K)
    s2 = np.zeros(K)
    for i in range(m):
        c = int(xv[i])
        cnt[c] += 1.0
        s[c] += yv[i]
        s2[c] += yv[i] * yv[i]
    present = np.zeros(K, dtype=np.int64)
    npres = 0
    for c in range(K):
        if cnt[c] > 0:
            present[npres] = c
            npres += 1
    if npres < 2:
        return np.inf
    pres = present[:npres]
    means = s[pres] / cnt[pres]
    # Sort by mean; codes are already increasing so a stable sort breaks ties by code.
    order = pres[np.argsort(means, kind="mergesort")]
    ct = cnt.sum()
    st = s.sum()
    s2t = s2.sum()
    fast = np.full(npres - 1, np.inf)
    best = np.inf
    c_n = 0.0
    c_s = 0.0
    c_s2 = 0.0
    for j in range(npres - 1):
        c = order[j]
        c_n += cnt[c]
        c_s += s[c]
        c_s2 += s2[c]
        r_n = ct - c_n
        if c_n >= min_leaf and r_n >= min_leaf:
            r_s = st - c_s
            f = (c_s2 - c_s * c_s / c_n) + ((s2t - c_s2) - r_s * r_s / r_n)
            fast[j] = f
            if f < best:
                best = f
    if best == np.inf:
        return np.inf
    tol = TIE_RTOL * (total + 1.0)
    best_exact = np.inf
    k = -1
    member = np.zeros(K, dtype=np.bool_)
    goes = np.empty(m, dtype=np.bool_)
    for j in range(npres - 1):
        if fast[j] <= best + tol:
            member[:] = False
            for a in range(j + 1):
                member[order[a]] = True
            for r in range(m):
                goes[r] = member[int(xv[r])]
            e = _two_pass(yv, goes)
            if e < best_exact:
                best_exact = e
                k = j
    for c in range(K):
        left_out[c] = 2 if cnt[c] == 0 else 0
    for a in range(k + 1):
        left_out[order[a]] = 1
    return best_exact


@njit(cache=True)
def grow(X, y, cat_k, min_leaf, n_min, n_vars, random_threshold, var_floor, U):
    """Grow one tree; returns the flat node arrays (trimmed to size)."""
    n, p = X.shape
    kmax = 1
    for j in range(p):
        if cat_k[j] > kmax:
            kmax = cat_k[j]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    is_cat = np.zeros(cap, dtype=np.bool_)
    cat_left = np.zeros((cap, kmax), dtype=np.bool_)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    mean = np.zeros(cap)
    var = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    sse = np.zeros(cap)

    rows = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    # stack of (start, end, parent, is_right)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_parent = np.empty(cap, dtype=np.int64)
    st_side = np.empty(cap, dtype=np.int64)
    top = 0
    st_start[0] = 0
    st_end[0] = n
    st_parent[0] = -1
    st_side[0] = 0
    top = 1
    t = 0
    lbest = np.zeros(kmax, dtype=np.int64)
    ltmp = np.zeros(kmax, dtype=np.int64)
    while top > 0:
        top -= 1
        a = st_start[top]
        b = st_end[top]
        par = st_parent[top]
        if par >= 0:
            if st_side[top] == 1:
                right[par] = t
            else:
                left[par] = t
        m = b - a
        seg = rows[a:b]
        yv = y[seg]
        mu = yv.mean()
        e = 0.0
        for i in range(m):
            d = yv[i] - mu
            e += d * d
        mean[t] = mu
        count[t] = m
        sse[t] = e
        v = e / (m - 1) if m > 1 else 0.0
        if var_floor >= 0.0:
            v = max(v, var_floor) if m > 1 else var_floor
        var[t] = v
        node = t
        t += 1
        if m < n_min or m < 2 or e <= 0.0:
            continue
        total = 0.0
        for i in range(m):
            total += yv[i] * yv[i]
        perm = np.argsort(U[node, :p], kind="mergesort")
        best_loss = np.inf
        best_j = -1
        best_lo = 0.0
        best_hi = 0.0
        evaluated = 0
        for q in range(p):
            j = perm[q]
            xv = X[seg, j]
            if cat_k[j] > 0:
                loss = _scan_cat(xv, yv, cat_k[j], min_leaf, total, ltmp)
                lo = 0.0
                hi = 0.0
            else:
                loss, lo, hi = _scan_cont(xv, yv, min_leaf, total)
            if loss < np.inf:
                evaluated += 1
                if loss < best_loss or (loss == best_loss and j < best_j):
                    best_loss = loss
                    best_j = j
                    best_lo = lo
                    best_hi = hi
                    if cat_k[j] > 0:
                        lbest[:] = ltmp[:]
            # beyond the quota only while nothing splittable has been found
            if evaluated >= n_vars:
                break
        if best_j < 0:
            continue
        feature[node] = best_j
        xv = X[seg, best_j]
        goes = np.empty(m, dtype=np.bool_)
        if cat_k[best_j] > 0:
            is_cat[node] = True
            K = cat_k[best_j]
            for c in range(K):
                if lbest[c] == 2:
                    cat_left[node, c] = U[node, p + 1 + c] < 0.5
                else:
                    cat_left[node, c] = lbest[c] == 1
            for i in range(m):
                goes[i] = cat_left[node, int(xv[i])]
        else:
            thr = 0.5 * (best_lo + best_hi)
            if random_threshold:
                thr = best_lo + U[node, p] * (best_hi - best_lo)
            if not (best_lo <= thr and thr < best_hi):
                thr = best_lo
            threshold[node] = thr
            for i in range(m):
                goes[i] = xv[i] <= thr
        nl = 0
        for i in range(m):
            if goes[i]:
                buf[nl] = seg[i]
                nl += 1
        nr = nl
        for i in range(m):
            if not goes[i]:
                buf[nr] = seg[i]
                nr += 1
        rows[a:b] = buf[:m]
        # right first so that the left subtree is numbered first
        st_start[top] = a + nl
        st_end[top] = b
        st_parent[top] = node
        st_side[top] = 1
        top += 1
        st_start[top] = a
        st_end[top] = a + nl
        st_parent[top] = node
        st_side[top] = 0
        top += 1
    return (feature[:t], threshold[:t], is_cat[:t], cat_left[:t], left[:t], right[:t],
            mean[:t], var[:t], count[:t], sse[:t])


@njit(cache=True)
def collapse_alphas(feature, left, right, sse):
    """Weakest-link pruning: the complexity value at which each node becomes a leaf.

    Original leaves get 0; the root gets the last alpha of the sequence.
    Nodes whose split does not reduce error are collapsed at alpha 0, and
    nodes removed together with an ancestor keep +inf (they are unreachable
    once the ancestor is a leaf).
    """
    N = feature.size
    leafy = feature < 0
    alpha_of = np.where(leafy, 0.0, np.inf)
    r_sub = np.zeros(N)
    n_leaf = np.zeros(N, dtype=np.int64)
    reach = np.zeros(N, dtype=np.bool_)
    scale = 1e-12 * (sse[0] + 1.0)
    first = True
    while not leafy[0]:
        for t in range(N - 1, -1, -1):
            if leafy[t]:
                r_sub[t] = sse[t]
                n_leaf[t] = 1
            else:
                r_sub[t] = r_sub[left[t]] + r_sub[right[t]]
                n_leaf[t] = n_leaf[left[t]] + n_leaf[right[t]]
        reach[:] = False
        reach[0] = True
        for t in range(N):
            if reach[t] and not leafy[t]:
                reach[left[t]] = True
                reach[right[t]] = True
        if first:
            first = False
            hit = False
            for t in range(N - 1, -1, -1):
                if reach[t] and not leafy[t] and sse[t] - r_sub[t] <= scale:
                    leafy[t] = True
                    alpha_of[t] = 0.0
                    hit = True
            if hit:
                first = True
            continue
        g_min = np.inf
        for t in range(N):
            if reach[t] and not leafy[t]:
                g = (sse[t] - r_sub[t]) / (n_leaf[t] - 1)
                if g < g_min:
                    g_min = g
        lim = g_min * (1.0 + 1e-10) + 1e-15
        for t in range(N):
            if reach[t] and not leafy[t]:
                g = (sse[t] - r_sub[t]) / (n_leaf[t] - 1)
                if g <= lim:
                    leafy[t] = True
                    alpha_of[t] = g_min
    return alpha_of


@njit(cache=True)
def pruned_sse(feature, threshold, is_cat, cat_left, left, right, mean, alpha_of,
               X, y, betas):
    """Squared error on (X, y) of the tree pruned at each value in ``betas``."""
    out = np.zeros(betas.size)
    width = cat_left.shape[1]
    for r in range(X.shape[0]):
        for k in range(betas.size):
            beta = betas[k]
            t = 0
            while feature[t] >= 0 and alpha_of[t] > beta:
                xv = X[r, feature[t]]
                if is_cat[t]:
                    c = int(xv)
                    go = c >= 0 and c < width and c == xv and cat_left[t, c]
                else:
                    go = xv <= threshold[t]
                t = left[t] if go else right[t]
            d = mean[t] - y[r]
            out[k] += d * d
    return out
