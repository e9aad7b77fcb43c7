"""Brute-force reference implementations, kept deliberately independent of
the library's vectorized code paths: plain Python loops, math.exp/sqrt, and
exhaustive enumeration. Tests compare the implementation against these."""

from __future__ import annotations

import math
from itertools import product

import numpy as np


def softmax_vec(xs):
    m = max(xs)
    es = [math.exp(x - m) for x in xs]
    s = sum(es)
    return [e / s for e in es]


def cosine(a, b):
    num = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return num / (na * nb)


def pairwise_cosine(rows):
    n = len(rows)
    out = [[cosine(rows[i], rows[j]) for j in range(n)] for i in range(n)]
    return np.asarray(out)


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def head_attention(h, w):
    """One attention head, elementwise: project, cosine scores, softmax over
    the other regions, weighted sum of projected rows."""
    h = np.asarray(h)
    w = np.asarray(w)
    n = h.shape[0]
    projected = matmul(h, w)
    attn = np.zeros((n, n))
    for i in range(n):
        scores = []
        for j in range(n):
            if j == i:
                continue
            scores.append(cosine(projected[i], projected[j]))
        probs = softmax_vec(scores)
        k = 0
        for j in range(n):
            if j == i:
                continue
            attn[i, j] = probs[k]
            k += 1
    agg = np.zeros_like(projected)
    for i in range(n):
        for j in range(n):
            agg[i] += attn[i, j] * projected[j]
    return attn, agg


def multi_head_aggregate(h, ws):
    """Run each head independently, lay the outputs into disjoint column
    blocks scaled by 1/T, then softmax each row."""
    parts = [head_attention(h, w)[1] for w in ws]
    stacked = np.concatenate(parts, axis=1) / len(ws)
    return np.asarray([softmax_vec(row) for row in stacked])


def attentive_fusion(views, mem_key, mem_value):
    """Direct evaluation: per view, slot scores, softmax over slots, l1 row
    normalization, then read from the value memory."""
    mem_key = np.asarray(mem_key)
    mem_value = np.asarray(mem_value)
    outs = []
    for e in views:
        e = np.asarray(e)
        n, slots = e.shape[0], mem_key.shape[0]
        read = np.zeros((n, mem_value.shape[1]))
        for i in range(n):
            scores = [sum(e[i, d] * mem_key[s, d] for d in range(e.shape[1]))
                      for s in range(slots)]
            probs = softmax_vec(scores)
            l1 = sum(abs(p) for p in probs)
            probs = [p / l1 for p in probs]
            for s in range(slots):
                read[i] += probs[s] * mem_value[s]
        outs.append(read)
    return outs


def self_attention(e, wq, wk, wv):
    e = np.asarray(e)
    q = matmul(e, wq)
    k = matmul(e, wk)
    v = matmul(e, wv)
    n = e.shape[0]
    out = np.zeros_like(v)
    for i in range(n):
        scores = [sum(q[i, d] * k[j, d] for d in range(q.shape[1])) for j in range(n)]
        probs = softmax_vec(scores)
        for j in range(n):
            out[i] += probs[j] * v[j]
    return out


def od_rows(origin_emb, dest_emb):
    origin_emb = np.asarray(origin_emb)
    dest_emb = np.asarray(dest_emb)
    n = origin_emb.shape[0]
    p_out = np.zeros((n, n))
    p_in = np.zeros((n, n))
    for i in range(n):
        p_out[i] = softmax_vec([float(origin_emb[i] @ dest_emb[j]) for j in range(n)])
        p_in[i] = softmax_vec([float(dest_emb[i] @ origin_emb[j]) for j in range(n)])
    return p_out, p_in


def od_loss(p_out, p_in, trips):
    total = 0.0
    for o, d in trips:
        total += -math.log(max(p_out[o][d], 1e-12))
        total += -math.log(max(p_in[d][o], 1e-12))
    return total


def reconstruction_loss(emb, target):
    emb = np.asarray(emb)
    target = np.asarray(target)
    n = emb.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            dot = sum(emb[i, k] * emb[j, k] for k in range(emb.shape[1]))
            total += (target[i, j] - dot) ** 2
    return total


def lasso_kkt_residual(fit, X, y):
    """Worst violation of the subgradient conditions for the standardized
    problem (1/2N)||yc - Z w||^2 + lam ||w||_1 the solver actually solved."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    Z = (X - fit.mean) / fit.scale
    resid = (y - y.mean()) - Z @ fit.coef_std
    grad = Z.T @ resid / n  # stationarity needs grad_j == lam * sign(w_j)
    worst = 0.0
    for j in range(X.shape[1]):
        if fit.coef_std[j] != 0.0:
            worst = max(worst, abs(grad[j] - fit.l1_weight * np.sign(fit.coef_std[j])))
        else:
            worst = max(worst, max(abs(grad[j]) - fit.l1_weight, 0.0))
    return worst


def ista_lasso(X, y, lam, iters=200_000, tol=1e-12):
    """Independent lasso solver: proximal gradient descent on the
    standardized problem. Slow but a different algorithm entirely."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / scale
    yc = y - y.mean()
    lip = np.linalg.eigvalsh(Z.T @ Z / n).max()
    step = 1.0 / max(lip, 1e-12)
    w = np.zeros(X.shape[1])
    for _ in range(iters):
        grad = Z.T @ (Z @ w - yc) / n
        w_new = w - step * grad
        w_new = np.sign(w_new) * np.maximum(np.abs(w_new) - step * lam, 0.0)
        if np.abs(w_new - w).max() < tol:
            w = w_new
            break
        w = w_new
    coef = w / scale
    intercept = float(y.mean() - mean @ coef)
    return coef, intercept


def best_inertia(X, k):
    """Exhaustive minimum k-means objective over every labeling (tiny N)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    best = math.inf
    for labels in product(range(k), repeat=n):
        inertia = 0.0
        for c in range(k):
            members = [i for i in range(n) if labels[i] == c]
            if not members:
                continue
            center = X[members].mean(axis=0)
            inertia += sum(((X[i] - center) ** 2).sum() for i in members)
        best = min(best, inertia)
    return best


def nmi_contingency(a, b):
    """NMI from an explicitly built contingency table."""
    a = list(a)
    b = list(b)
    n = len(a)
    la = sorted(set(a))
    lb = sorted(set(b))
    table = [[0] * len(lb) for _ in la]
    for x, y in zip(a, b):
        table[la.index(x)][lb.index(y)] += 1
    ra = [sum(row) for row in table]
    cb = [sum(table[i][j] for i in range(len(la))) for j in range(len(lb))]
    mi = 0.0
    for i in range(len(la)):
        for j in range(len(lb)):
            nij = table[i][j]
            if nij:
                mi += (nij / n) * math.log(n * nij / (ra[i] * cb[j]))
    ha = -sum((c / n) * math.log(c / n) for c in ra if c)
    hb = -sum((c / n) * math.log(c / n) for c in cb if c)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    return mi / ((ha + hb) / 2)


def ari_pairs(a, b):
    """ARI by enumerating all point pairs."""
    a = list(a)
    b = list(b)
    n = len(a)
    together_both = together_a = together_b = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            sa = a[i] == a[j]
            sb = b[i] == b[j]
            together_a += sa
            together_b += sb
            together_both += sa and sb
    expected = together_a * together_b / total
    maximum = (together_a + together_b) / 2
    if maximum == expected:
        return 1.0
    return (together_both - expected) / (maximum - expected)
