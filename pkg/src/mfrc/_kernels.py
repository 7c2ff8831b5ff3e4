"""Numba-compiled inner loops.

Everything here is sequential and free of fastmath so results are
bit-reproducible for a fixed input; trainers rely on that for their
determinism guarantees.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def sgd_step(u, i, r, w, wbu_u, wbi_i, P, Q, bu, bi, lam, eta, use_bias):
    """One weighted SGD update for rating (u, i, r) with weight ``w``.

    The error is computed once from the pre-update state; the factor
    rows then update simultaneously from that snapshot.  ``wbu_u`` and
    ``wbi_i`` scale the regularization pull of this entity.
    """
    k = P.shape[1]
    dot = 0.0
    for f in range(k):
        dot += P[u, f] * Q[i, f]
    e = r - (bu[u] + bi[i] + dot)
    ew = e * w
    if use_bias:
        bu[u] -= eta * (lam * wbu_u * bu[u] - ew)
        bi[i] -= eta * (lam * wbi_i * bi[i] - ew)
    for f in range(k):
        pf = P[u, f]
        qf = Q[i, f]
        P[u, f] = pf - eta * (lam * wbu_u * pf - ew * qf)
        Q[i, f] = qf - eta * (lam * wbi_i * qf - ew * pf)


@numba.njit(cache=True)
def sgd_epoch(users, items, ratings, w, wbu, wbi, P, Q, bu, bi, lam, eta,
              order, use_bias):
    """Apply :func:`sgd_step` to every training triple in ``order``."""
    for t in range(order.shape[0]):
        idx = order[t]
        u = users[idx]
        i = items[idx]
        sgd_step(u, i, ratings[idx], w[idx], wbu[u], wbi[i],
                 P, Q, bu, bi, lam, eta, use_bias)


@numba.njit(cache=True)
def predict_raw(users, items, P, Q, bu, bi):
    """Unclipped scores ``bu[u] + bi[i] + p_u . q_i`` per triple."""
    n = users.shape[0]
    k = P.shape[1]
    out = np.empty(n, dtype=np.float64)
    for t in range(n):
        u = users[t]
        i = items[t]
        dot = 0.0
        for f in range(k):
            dot += P[u, f] * Q[i, f]
        out[t] = bu[u] + bi[i] + dot
    return out


@numba.njit(cache=True)
def count_rank_pairs(truth, pred):
    """Concordant / discordant / skipped counts over one user's pairs.

    Pairs with equal true ratings are skipped; on an ordered true pair a
    predicted tie counts as discordant.
    """
    c = 0
    d = 0
    s = 0
    n = truth.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            if truth[a] == truth[b]:
                s += 1
            elif truth[a] > truth[b]:
                if pred[a] > pred[b]:
                    c += 1
                else:
                    d += 1
            else:
                if pred[b] > pred[a]:
                    c += 1
                else:
                    d += 1
    return c, d, s
