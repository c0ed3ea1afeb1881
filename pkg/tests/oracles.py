"""Independent reference computations used to derive expected test values.

Nothing here imports the package's numerical code: every quantity is
recomputed with plain loops and ``math`` so that agreement is meaningful.
"""

import itertools
import math

import numpy as np


# -- graphs ---------------------------------------------------------------------

def planted_adjacency(n, within=5, between=0, blocks=2):
    """Deterministic planted graph: constant weight inside blocks, another between."""
    z = np.arange(n) * blocks // n
    A = np.where(z[:, None] == z[None, :], within, between).astype(np.int64)
    np.fill_diagonal(A, 0)
    return A, z


def noisy_planted_adjacency(n, seed, lam_in=4.0, lam_out=0.5, blocks=2):
    rng = np.random.default_rng(seed)
    z = np.arange(n) * blocks // n
    lam = np.where(z[:, None] == z[None, :], lam_in, lam_out)
    A = np.triu(rng.poisson(lam), 1)
    A = A + A.T
    return A.astype(np.int64), z


def same_partition(a, b):
    """True when labelings ``a`` and ``b`` agree up to a permutation of labels."""
    a, b = list(a), list(b)
    fwd, bwd = {}, {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


# -- likelihoods ----------------------------------------------------------------

def loglik_loop(A, labels, theta, alpha=0.5, weight=None, weight_family="poisson_weight"):
    """Sum over unordered dyads of the combined unnormalised log-likelihood.

    ``labels`` are 0-based. Degrees are weighted row sums of ``A``.
    """
    n = len(A)
    d = [sum(A[i]) for i in range(n)]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            k, l = labels[i], labels[j]
            x = float(A[i][j])
            t = theta[k][l]
            total += alpha * ((x * math.log(t) if x else 0.0) - d[i] * d[j] * t)
            if alpha < 1 and x > 0:
                if weight_family == "poisson_weight":
                    lam = weight[k][l]
                    total += (1 - alpha) * (x * math.log(lam) - lam)
                else:
                    mu, var = weight[k][l]
                    tau = 1.0 / var
                    total += (1 - alpha) * (x * mu * tau - 0.5 * x * x * tau - 0.5 * mu * mu * tau + 0.5 * math.log(tau))
    return total


def gamma_marginal(count, exposure, a0=1.0, b0=1.0):
    """log of integral of exp(count*log(t) - exposure*t) Gamma(t; a0, b0) dt."""
    a = a0 + count
    b = b0 + exposure
    return a0 * math.log(b0) - math.lgamma(a0) + math.lgamma(a) - a * math.log(b)


def normal_gamma_marginal(n, s, ss, m0=0.0, k0=1.0, a0=1.0, b0=1.0):
    """log of integral of prod_e tau^(1/2) exp(-tau (x_e - mu)^2 / 2), tempered sums given."""
    kn = k0 + n
    mn = (k0 * m0 + s) / kn
    an = a0 + n / 2
    bn = b0 + 0.5 * (ss + k0 * m0 * m0 - kn * mn * mn)
    return (math.lgamma(an) - math.lgamma(a0) + a0 * math.log(b0) - an * math.log(bn)
            + 0.5 * math.log(k0 / kn))


def _logsumexp(vals):
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def exact_log_evidence(A, K, alpha=0.5, weight_family="poisson_weight",
                       prior_e=(1.0, 1.0), prior_w=None):
    """Brute-force log p(A) over all K^n labelings with bundle parameters integrated out.

    Uses a uniform label prior ``K^-n`` and the same tempered, base-measure-free
    likelihood as :func:`loglik_loop`.
    """
    n = len(A)
    d = [sum(A[i]) for i in range(n)]
    if prior_w is None:
        prior_w = (1.0, 1.0) if weight_family == "poisson_weight" else (0.0, 1.0, 1.0, 1.0)
    terms = []
    for z in itertools.product(range(K), repeat=n):
        agg = {}
        for i in range(n):
            for j in range(i + 1, n):
                key = tuple(sorted((z[i], z[j])))
                r, s, b, q = agg.get(key, (0.0, 0.0, 0.0, 0.0))
                x = float(A[i][j])
                agg[key] = (r + x, s + d[i] * d[j], b + (x > 0), q + x * x)
        lp = -n * math.log(K)
        for k in range(K):
            for l in range(k, K):
                r, s, b, q = agg.get((k, l), (0.0, 0.0, 0.0, 0.0))
                lp += gamma_marginal(alpha * r, alpha * s, *prior_e)
                w = 1.0 - alpha
                if w > 0:
                    if weight_family == "poisson_weight":
                        lp += gamma_marginal(w * r, w * b, *prior_w)
                    else:
                        lp += normal_gamma_marginal(w * b, w * r, w * q, *prior_w)
        terms.append(lp)
    return _logsumexp(terms)


# -- metrics --------------------------------------------------------------------

def metrics_oracle(instance, threshold=3.0):
    """MAE, RMSE and macro P/R/F by explicit counting.

    ``instance`` maps user -> list of (item, actual, predicted) and ``"L"`` -> list length.
    """
    L = instance["L"]
    abs_err, sq_err, count = 0.0, 0.0, 0
    precs, recs = [], []
    for user, rows in sorted(instance["users"].items()):
        for _, actual, pred in rows:
            abs_err += abs(pred - actual)
            sq_err += (pred - actual) ** 2
            count += 1
        # rank: higher prediction first, then lower item id
        ranked = sorted(rows, key=lambda t: (-t[2], t[0]))[:L]
        rec_items = [t[0] for t in ranked]
        tp = fp = fn = 0
        for item, actual, _ in rows:
            liked = actual >= threshold
            inside = item in rec_items
            if inside and liked:
                tp += 1
            elif inside:
                fp += 1
            elif liked:
                fn += 1
        if tp + fp > 0:
            precs.append(tp / (tp + fp))
        if tp + fn > 0:
            recs.append(tp / (tp + fn))
    P = sum(precs) / len(precs)
    R = sum(recs) / len(recs)
    F = 0.0 if P + R == 0 else 2 * P * R / (P + R)
    return abs_err / count, math.sqrt(sq_err / count), P, R, F


def random_metric_instance(rng, max_users=10, max_items=20):
    """Random per-user (item, actual, predicted) rows; predictions on a coarse grid so ties occur."""
    n_users = int(rng.integers(1, max_users + 1))
    n_items = int(rng.integers(1, max_items + 1))
    users = {}
    for u in range(1, n_users + 1):
        k = int(rng.integers(1, n_items + 1))
        items = rng.choice(np.arange(1, n_items + 1), size=k, replace=False)
        actual = rng.integers(1, 6, size=k)
        pred = np.round(rng.uniform(1, 5, size=k) * 2) / 2
        users[u] = [(int(i), float(a), float(p)) for i, a, p in zip(items, actual, pred)]
    first = users[1][0]
    users[1][0] = (first[0], 5.0, first[2])  # at least one liked item overall
    return {"L": int(rng.integers(1, n_items + 1)), "users": users}


class StubContext:
    """Prediction context answering from a fixed (user, item) -> score table."""

    def __init__(self, table):
        self.table = table

    def predict_pairs(self, users, items):
        return np.array([self.table[(int(u), int(i))] for u, i in zip(users, items)])


def flatten_instance(instance):
    rows = [(u, i, a, p) for u, rs in instance["users"].items() for i, a, p in rs]
    u, i, a, p = (np.array(c) for c in zip(*rows))
    return u.astype(np.int64), i.astype(np.int64), a, p


# -- text -----------------------------------------------------------------------

def tfidf_by_hand(docs):
    """Raw-count tf times log(s/df), words sorted; docs are whitespace token lists."""
    vocab = sorted({w for doc in docs for w in doc})
    s = len(docs)
    X = np.zeros((len(vocab), s))
    for wi, w in enumerate(vocab):
        df = sum(1 for doc in docs if w in doc)
        for j, doc in enumerate(docs):
            X[wi, j] = doc.count(w) * math.log(s / df)
    return vocab, X
