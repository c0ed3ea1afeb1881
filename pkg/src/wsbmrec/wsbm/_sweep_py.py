"""Pure-Python E-step sweep, used when the compiled kernel is unavailable."""

import numpy as np


def estep_sweep(indptr, indices, data, d, mu, c_r, c_b, c_q, c_s, log_prior, use_q):
    """One sequential coordinate-ascent pass over vertices in index order.

    Updates ``mu`` in place. Each vertex sees the rows already updated in
    this pass, which is what keeps the bound monotone.
    """
    dmu = d @ mu
    for i in range(mu.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        nb = indices[lo:hi]
        a = data[lo:hi]
        m = mu[nb]
        r = a @ m
        b = m.sum(axis=0)
        di = d[i]
        s = di * (dmu - di * mu[i])
        logit = log_prior + c_r @ r + c_b @ b + c_s @ s
        if use_q:
            logit += c_q @ ((a * a) @ m)
        logit -= logit.max()
        w = np.exp(logit)
        new = w / w.sum()
        dmu += di * (new - mu[i])
        mu[i] = new
