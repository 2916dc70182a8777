"""Numba kernels for survey propagation on a CSR factor graph with a live-edge mask.

A dead edge is a literal that no longer takes part in the formula (its
clause was satisfied or the literal was falsified by a fixing). Clauses
with no live edge contribute nothing.
"""
import math

import numpy as np
from numba import njit

@njit(cache=True)
def clause_f(e, clause_ptr, edge_clause, edge_neg, edge_live, s):
    """Probability that every other live member of the clause of ``e`` falsifies it."""
    c = edge_clause[e]
    f = 1.0
    for e2 in range(clause_ptr[c], clause_ptr[c + 1]):
        if e2 != e and edge_live[e2]:
            if edge_neg[e2]:
                f *= s[e2, 0]
            else:
                f *= s[e2, 2]
    return f


@njit(cache=True)
def _mul(at, ai, af, bt, bi, bf):
    return at * bt + ai * bt + at * bi, ai * bi, af * bf + ai * bf + af * bi


@njit(cache=True)
def _collect_u(i, var_ptr, var_edges, clause_ptr, edge_clause, edge_neg, edge_live, s, buf_u, buf_e):
    d = 0
    for p in range(var_ptr[i], var_ptr[i + 1]):
        e = var_edges[p]
        if not edge_live[e]:
            continue
        f = clause_f(e, clause_ptr, edge_clause, edge_neg, edge_live, s)
        if edge_neg[e]:
            buf_u[d, 0] = 0.0
            buf_u[d, 1] = 1.0 - f
            buf_u[d, 2] = f
        else:
            buf_u[d, 0] = f
            buf_u[d, 1] = 1.0 - f
            buf_u[d, 2] = 0.0
        buf_e[d] = e
        d += 1
    return d


@njit(cache=True)
def flipped_f(edge_neg, edge_live, s):
    """Per-edge probability that the literal is forced false; 1.0 on dead edges."""
    q = np.ones(edge_neg.size)
    for e in range(edge_neg.size):
        if edge_live[e]:
            q[e] = s[e, 0] if edge_neg[e] else s[e, 2]
    return q


@njit(cache=True)
def update_var(i, var_ptr, var_edges, cb, edge_neg, edge_live, q, s, damping, buf_w, buf_e, pre, suf):
    """Recompute every outgoing cavity survey s(i, c) of variable ``i``.

    Incoming messages only warn towards satisfying their clause, so the
    survey product splits into two scalar products: ``a`` over clauses
    where ``i`` appears positively and ``b`` over negated ones (each
    factor is the probability of no warning). The cavity survey is then
    ((1-a) b, a b, (1-b) a) up to normalization. ``q`` (see flipped_f) is
    kept in sync with ``s``. Returns the largest component change, or -1.0
    if some cavity product has zero norm.
    """
    d = 0
    for p in range(var_ptr[i], var_ptr[i + 1]):
        e = var_edges[p]
        if not edge_live[e]:
            continue
        f = 1.0
        for e2 in range(cb[e, 0], cb[e, 1]):
            if e2 != e:
                f *= q[e2]
        buf_w[d] = 1.0 - f
        buf_e[d] = e
        d += 1
    if d == 0:
        return 0.0
    ap = 1.0
    an = 1.0
    for k in range(d):
        pre[k, 0] = ap
        pre[k, 1] = an
        if edge_neg[buf_e[k]]:
            an *= buf_w[k]
        else:
            ap *= buf_w[k]
    ap = 1.0
    an = 1.0
    for k in range(d - 1, -1, -1):
        suf[k, 0] = ap
        suf[k, 1] = an
        if edge_neg[buf_e[k]]:
            an *= buf_w[k]
        else:
            ap *= buf_w[k]
    change = 0.0
    for k in range(d):
        a = pre[k, 0] * suf[k, 0]
        b = pre[k, 1] * suf[k, 1]
        t = (1.0 - a) * b
        m = a * b
        f = (1.0 - b) * a
        z = t + m + f
        if not z > 0.0:
            return -1.0
        r = 1.0 / z
        t *= r
        m *= r
        f *= r
        e = buf_e[k]
        if damping > 0.0:
            t = damping * s[e, 0] + (1.0 - damping) * t
            m = damping * s[e, 1] + (1.0 - damping) * m
            f = damping * s[e, 2] + (1.0 - damping) * f
        c = max(abs(t - s[e, 0]), abs(m - s[e, 1]), abs(f - s[e, 2]))
        if c > change:
            change = c
        s[e, 0] = t
        s[e, 1] = m
        s[e, 2] = f
        q[e] = t if edge_neg[e] else f
    return change


@njit(cache=True)
def max_degree(var_ptr):
    best = 0
    for i in range(var_ptr.size - 1):
        d = var_ptr[i + 1] - var_ptr[i]
        if d > best:
            best = d
    return best


@njit(cache=True)
def sweep(order, var_ptr, var_edges, cb, edge_neg, edge_live, q, s, damping):
    """One sequential pass over the variables in ``order``.

    Returns ``(max_change, contradiction_var)``; the latter is -1 when no
    cavity product vanished.
    """
    dmax = max(max_degree(var_ptr), 1)
    buf_w = np.empty(dmax)
    buf_e = np.empty(dmax, dtype=np.int64)
    pre = np.empty((dmax, 2))
    suf = np.empty((dmax, 2))
    worst = 0.0
    for idx in range(order.size):
        i = order[idx]
        ch = update_var(i, var_ptr, var_edges, cb, edge_neg, edge_live, q, s, damping, buf_w, buf_e, pre, suf)
        if ch < 0.0:
            return worst, i
        if ch > worst:
            worst = ch
    return worst, -1


@njit(cache=True)
def node_surveys(var_ptr, var_edges, clause_ptr, edge_clause, edge_neg, edge_live, s):
    """Full products of incoming u-messages: normalized surveys and log-norms.

    Isolated variables get the identity and log-norm 0; a vanishing product
    gives a zero row and log-norm -inf.
    """
    n = var_ptr.size - 1
    out = np.zeros((n, 3))
    lognorm = np.zeros(n)
    dmax = max_degree(var_ptr)
    buf_u = np.empty((max(dmax, 1), 3))
    buf_e = np.empty(max(dmax, 1), dtype=np.int64)
    for i in range(n):
        d = _collect_u(i, var_ptr, var_edges, clause_ptr, edge_clause, edge_neg, edge_live, s, buf_u, buf_e)
        t, m, f = 0.0, 1.0, 0.0
        acc = 0.0
        dead = False
        for k in range(d):
            t, m, f = _mul(t, m, f, buf_u[k, 0], buf_u[k, 1], buf_u[k, 2])
            z = t + m + f
            if not z > 0.0:
                dead = True
                break
            t /= z
            m /= z
            f /= z
            acc += math.log(z)
        if dead:
            lognorm[i] = -np.inf
        else:
            out[i, 0] = t
            out[i, 1] = m
            out[i, 2] = f
            lognorm[i] = acc
    return out, lognorm


@njit(cache=True)
def clause_messages(clause_ptr, edge_clause, edge_neg, edge_live, s):
    n_edges = edge_clause.size
    u = np.zeros((n_edges, 3))
    for e in range(n_edges):
        if not edge_live[e]:
            u[e, 1] = 1.0
            continue
        f = clause_f(e, clause_ptr, edge_clause, edge_neg, edge_live, s)
        if edge_neg[e]:
            u[e, 1] = 1.0 - f
            u[e, 2] = f
        else:
            u[e, 0] = f
            u[e, 1] = 1.0 - f
    return u


@njit(cache=True)
def clause_terms(clause_ptr, edge_neg, edge_live, s):
    """Per-clause ``(K_live, log(1 - prod of flipped F))``; the log is -inf on a certain violation."""
    m = clause_ptr.size - 1
    k_live = np.zeros(m, dtype=np.int64)
    logs = np.zeros(m)
    for c in range(m):
        p = 1.0
        k = 0
        for e in range(clause_ptr[c], clause_ptr[c + 1]):
            if edge_live[e]:
                k += 1
                if edge_neg[e]:
                    p *= s[e, 0]
                else:
                    p *= s[e, 2]
        k_live[c] = k
        if k == 0:
            continue
        if p >= 1.0:
            logs[c] = -np.inf
        else:
            logs[c] = math.log1p(-p)
    return k_live, logs


@njit(cache=True)
def trivial_measure(edge_live, s):
    """Largest ``max(s_T, s_F)`` over live edges."""
    best = 0.0
    for e in range(edge_live.size):
        if edge_live[e]:
            v = s[e, 0] if s[e, 0] > s[e, 2] else s[e, 2]
            if v > best:
                best = v
    return best
