"""User similarities, neighbourhood collaborative filtering and the hybrid blend.

Scalar functions (:func:`sim_basic`, :func:`sim_rating`, :func:`cf_predict`)
are direct, readable reference implementations. :class:`HybridRecommender`
computes the same quantities for every (user, item) cell at once with dense
matrix products, which is what evaluation and top-N ranking use.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .corpus import ItemSimilarityMatrix, content_scores
from .errors import UndefinedMetricError, UnknownUserError, UnpredictableError, ValidationError
from .ingest import RatingsTable, UserProfile

log = logging.getLogger(__name__)

RATING_MIN, RATING_MAX = 1.0, 5.0
ROUTES = ("old_user", "new_user", "new_item")


@dataclass(frozen=True)
class BlendWeights:
    """Similarity weights (``alpha_basic``, ``beta_rating``) and prediction weights (``gamma_*``)."""

    alpha_basic: float = 0.2
    beta_rating: float = 0.8
    gamma_content: float = 0.4
    gamma_cf: float = 0.6

    def __post_init__(self):
        vals = (self.alpha_basic, self.beta_rating, self.gamma_content, self.gamma_cf)
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise ValidationError(f"blend weights must be finite and non-negative, got {vals}")
        if self.alpha_basic + self.beta_rating <= 0:
            raise ValidationError("alpha_basic + beta_rating must be positive")
        if self.gamma_content + self.gamma_cf <= 0:
            raise ValidationError("gamma_content + gamma_cf must be positive")


@dataclass(frozen=True)
class Prediction:
    user_id: int
    item_id: int
    p_content: float | None
    pp_cf: float | None
    p_final: float
    route: str


def _cosine(x, y) -> float:
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return 0.0
    return float(np.dot(x, y) / (nx * ny))


def sim_basic(a: UserProfile, i: UserProfile) -> float:
    """Cosine between two users' quantised (age, gender, occupation) vectors."""
    return _cosine(a.attribute_vector, i.attribute_vector)


def _user_ratings(train: RatingsTable, user: int) -> dict:
    mask = train.users == user
    if not np.any(mask):
        raise UndefinedMetricError(f"user {user} has no training ratings; rating similarity is undefined")
    return dict(zip(train.items[mask].tolist(), train.ratings[mask].tolist()))


def sim_rating(a: int, i: int, train: RatingsTable, corated: bool = False) -> float:
    """Cosine between two users' rating vectors.

    By default the vectors span the whole item universe with unrated items at
    zero. With ``corated=True`` both norms are taken over shared items only.
    Users with no shared item get 0 either way.
    """
    ra, ri = _user_ratings(train, a), _user_ratings(train, i)
    common = sorted(ra.keys() & ri.keys())
    if not common:
        return 0.0
    dot = sum(ra[k] * ri[k] for k in common)
    if corated:
        na = np.sqrt(sum(ra[k] ** 2 for k in common))
        ni = np.sqrt(sum(ri[k] ** 2 for k in common))
    else:
        na = np.sqrt(sum(v * v for v in ra.values()))
        ni = np.sqrt(sum(v * v for v in ri.values()))
    return float(dot / (na * ni))


def sim_integrated(sim1: float, sim2: float | None, weights: BlendWeights, a_is_new: bool) -> float:
    """``sim1`` for a new user, otherwise ``alpha*sim1 + beta*sim2`` (weights are not renormalised)."""
    if a_is_new:
        return float(sim1)
    if sim2 is None:
        raise ValidationError("an existing user needs a rating similarity")
    return weights.alpha_basic * sim1 + weights.beta_rating * sim2


def cf_predict(a: int, j: int, neighbor_sims: dict, train: RatingsTable, user_mean: float | None = None) -> float:
    """Mean-centred neighbourhood prediction of user ``a``'s rating of item ``j``.

    Parameters
    ----------
    neighbor_sims : dict
        Neighbour user id -> similarity to ``a``. Only neighbours who rated
        ``j`` in ``train`` contribute.
    user_mean : float, optional
        ``a``'s mean rating; defaults to the training mean, which must exist.
    """
    if user_mean is None:
        mask = train.users == a
        if not np.any(mask):
            raise UndefinedMetricError(f"user {a} has no training ratings and no mean was given")
        user_mean = float(np.mean(train.ratings[mask]))
    num = den = 0.0
    for u, s in sorted(neighbor_sims.items()):
        if u == a:
            continue
        mask = train.users == u
        hit = mask & (train.items == j)
        if not np.any(hit):
            continue
        dev = float(train.ratings[hit][0]) - float(np.mean(train.ratings[mask]))
        num += s * dev
        den += abs(s)
    if den == 0.0:
        return float(user_mean)
    return float(user_mean + num / den)


def _top_k_mask(scores: np.ndarray, k: int, exclude_self: bool = True) -> np.ndarray:
    """Boolean mask of each row's ``k`` largest entries (ties to the lower column index)."""
    n_rows, n_cols = scores.shape
    s = scores.astype(np.float64, copy=True)
    if exclude_self:
        np.fill_diagonal(s, -np.inf)
    k = min(k, n_cols - (1 if exclude_self else 0))
    mask = np.zeros(scores.shape, dtype=bool)
    if k <= 0:
        return mask
    # stable sort on -s keeps the lower index first among equal scores
    order = np.argsort(-s, axis=1, kind="stable")[:, :k]
    np.put_along_axis(mask, order, True, axis=1)
    return mask


class HybridRecommender:
    """Fitted prediction context over a training split.

    Parameters
    ----------
    train : RatingsTable
    profiles : dict
        user id -> :class:`UserProfile`; needed for every training user and
        for any new user queried later. Missing profiles give zero
        basic-information similarity.
    item_sims : ItemSimilarityMatrix
        Content similarities. Items rated in ``train`` but absent here get no
        content signal, so their content prediction is the user's mean.
    weights : BlendWeights
    communities : dict, optional
        user id -> community label. When given, a user's neighbours are the
        other members of its community; otherwise (the traditional method)
        the ``n_neighbors`` users with the highest integrated similarity.
    n_neighbors : int
        Neighbour count for the traditional method.
    n_fallback : int
        Neighbour count for new users and singleton communities.
    corated : bool
        Rating-similarity variant, see :func:`sim_rating`.
    """

    def __init__(self, train: RatingsTable, profiles: dict, item_sims: ItemSimilarityMatrix,
                 weights: BlendWeights = BlendWeights(), communities: dict | None = None,
                 n_neighbors: int = 30, n_fallback: int = 20, corated: bool = False):
        if len(train) == 0:
            raise ValidationError("training table is empty")
        if n_neighbors < 1 or n_fallback < 1:
            raise ValidationError("neighbour counts must be positive")
        self.train = train
        self.profiles = profiles
        self.weights = weights
        self.n_neighbors = n_neighbors
        self.n_fallback = n_fallback
        self.corated = corated
        self.method = "wsbm" if communities is not None else "traditional"

        self.user_ids = train.user_ids()
        self.user_index = {int(u): k for k, u in enumerate(self.user_ids)}
        catalog = np.asarray(item_sims.item_ids, dtype=np.int64)
        extra = np.setdiff1d(train.item_ids(), catalog)
        self.item_ids = np.concatenate([catalog, extra])
        self.item_index = {int(i): k for k, i in enumerate(self.item_ids)}
        n_u, n_i = len(self.user_ids), len(self.item_ids)

        rows = np.searchsorted(self.user_ids, train.users)
        cols = np.array([self.item_index[int(i)] for i in train.items], dtype=np.int64)
        self.values = sp.csr_matrix((train.ratings.astype(np.float64), (rows, cols)), shape=(n_u, n_i))
        if self.values.nnz != len(train):
            raise ValidationError("training table has repeated (user, item) pairs")
        self.rated = self.values.copy()
        self.rated.data[:] = 1.0
        counts = np.asarray(self.rated.sum(axis=1)).ravel()
        self.user_means = np.asarray(self.values.sum(axis=1)).ravel() / counts
        self.global_mean = float(np.mean(train.ratings))
        self.item_has_ratings = np.asarray(self.rated.sum(axis=0)).ravel() > 0

        sims = np.zeros((n_i, n_i))
        m = len(catalog)
        sims[:m, :m] = item_sims.values
        extra_idx = np.arange(m, n_i)
        sims[extra_idx, extra_idx] = 1.0
        self.content = content_scores(self.rated, self.values, sims, self.user_means)

        self.attr = np.array([self._attr(u) for u in self.user_ids])
        self.sim1 = self._attr_cosine(self.attr, self.attr)
        self.sim2 = self._rating_cosine()
        self.sim = weights.alpha_basic * self.sim1 + weights.beta_rating * self.sim2

        self.neighbors = self._neighbor_mask(communities)
        self.cf = self._cf_matrix(self.sim * self.neighbors, self.user_means)
        self.scores = self._blend(self.content, self.cf)

    # -- construction helpers ------------------------------------------------

    def _attr(self, user) -> np.ndarray:
        prof = self.profiles.get(int(user))
        return np.zeros(3) if prof is None else prof.attribute_vector.astype(np.float64)

    @staticmethod
    def _attr_cosine(x, y) -> np.ndarray:
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (x @ y.T) / np.outer(nx, ny)
        return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)

    def _rating_cosine(self) -> np.ndarray:
        R = self.values
        dot = (R @ R.T).toarray()
        if self.corated:
            R2 = R.multiply(R).tocsr()
            left = (R2 @ self.rated.T).toarray()  # a's squared norm over i's items
            with np.errstate(divide="ignore", invalid="ignore"):
                out = dot / np.sqrt(left * left.T)
        else:
            norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=1)).ravel())
            with np.errstate(divide="ignore", invalid="ignore"):
                out = dot / np.outer(norms, norms)
        out = np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)
        out[dot == 0] = 0.0
        return out

    def _neighbor_mask(self, communities) -> np.ndarray:
        n = len(self.user_ids)
        if communities is None:
            return _top_k_mask(self.sim, self.n_neighbors)
        missing = [int(u) for u in self.user_ids if int(u) not in communities]
        if missing:
            raise ValidationError(f"{len(missing)} training users have no community, e.g. {missing[:5]}")
        labels = np.array([communities[int(u)] for u in self.user_ids])
        mask = labels[:, None] == labels[None, :]
        np.fill_diagonal(mask, False)
        lonely = ~mask.any(axis=1)
        if lonely.any():
            log.info("%d singleton-community users use the top-%d fallback", int(lonely.sum()), self.n_fallback)
            mask[lonely] = _top_k_mask(self.sim, self.n_fallback)[lonely]
        assert mask.shape == (n, n)
        return mask

    def _cf_matrix(self, W: np.ndarray, means: np.ndarray) -> np.ndarray:
        """Rows of mean-centred predictions for weight rows ``W`` over training users."""
        dev = self.values.copy()
        dev.data -= np.repeat(self.user_means, np.diff(dev.indptr))
        num = np.asarray((sp.csr_matrix(dev.T) @ W.T).T)
        den = np.asarray((sp.csr_matrix(self.rated.T) @ np.abs(W).T).T)
        out = np.broadcast_to(means[:, None], num.shape).copy()
        ok = den > 0
        out[ok] += num[ok] / den[ok]
        return out

    def _blend(self, content, cf) -> np.ndarray:
        w = self.weights
        out = w.gamma_content * content + w.gamma_cf * cf
        # nobody rated these items: content only
        out[:, ~self.item_has_ratings] = content[:, ~self.item_has_ratings]
        return np.clip(out, RATING_MIN, RATING_MAX)

    # -- queries --------------------------------------------------------------

    def is_known(self, user: int) -> bool:
        return int(user) in self.user_index

    def new_user_cf(self, profile: UserProfile) -> np.ndarray:
        """Collaborative predictions over all items for a user with no history."""
        v = profile.attribute_vector.astype(np.float64)[None, :]
        s1 = self._attr_cosine(v, self.attr)
        W = s1 * _top_k_mask(s1, self.n_fallback, exclude_self=False)
        return self._cf_matrix(W, np.array([self.global_mean]))[0]

    def _profile_for(self, user, profile):
        if profile is not None:
            return profile
        prof = self.profiles.get(int(user))
        if prof is None:
            raise UnknownUserError(f"user {user} has no training ratings and no profile")
        return prof

    def predict(self, user: int, item: int, profile: UserProfile | None = None) -> Prediction:
        """Route one (user, item) query and return the blended prediction."""
        j = self.item_index.get(int(item))
        new_item = j is None or not self.item_has_ratings[j]
        if self.is_known(user):
            a = self.user_index[int(user)]
            if j is None:
                raise UnpredictableError(f"item {item} has neither ratings nor content")
            p = float(self.content[a, j])
            if new_item:
                return Prediction(int(user), int(item), p, None, float(np.clip(p, RATING_MIN, RATING_MAX)), "new_item")
            return Prediction(int(user), int(item), p, float(self.cf[a, j]), float(self.scores[a, j]), "old_user")
        if new_item:
            raise UnpredictableError(f"new user {user} and unrated item {item}: no signal")
        pp = float(self.new_user_cf(self._profile_for(user, profile))[j])
        return Prediction(int(user), int(item), None, pp, float(np.clip(pp, RATING_MIN, RATING_MAX)), "new_user")

    def score_row(self, user: int, profile: UserProfile | None = None) -> np.ndarray:
        """Final predictions for every catalogue item; NaN where unpredictable."""
        if self.is_known(user):
            return self.scores[self.user_index[int(user)]]
        row = np.clip(self.new_user_cf(self._profile_for(user, profile)), RATING_MIN, RATING_MAX)
        row[~self.item_has_ratings] = np.nan
        return row

    def predict_pairs(self, users, items, profiles: dict | None = None) -> np.ndarray:
        """Final predictions for aligned ``users``/``items`` arrays (NaN where unpredictable)."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        out = np.full(len(users), np.nan)
        cols = np.array([self.item_index.get(int(i), -1) for i in items], dtype=np.int64)
        rows = np.array([self.user_index.get(int(u), -1) for u in users], dtype=np.int64)
        known = (rows >= 0) & (cols >= 0)
        out[known] = self.scores[rows[known], cols[known]]
        profiles = self.profiles if profiles is None else profiles
        for u in np.unique(users[rows < 0]):
            sel = (users == u) & (cols >= 0)
            prof = profiles.get(int(u))
            if prof is None or not sel.any():
                continue
            out[sel] = self.score_row(int(u), prof)[cols[sel]]
        return out


def hybrid_predict(a: int, j: int, context: HybridRecommender, profile: UserProfile | None = None) -> Prediction:
    """Functional wrapper over :meth:`HybridRecommender.predict`."""
    return context.predict(a, j, profile)


def rank_items(item_ids, scores, n: int) -> list[int]:
    """Item ids by descending score, ties by ascending id; NaN scores dropped."""
    item_ids = np.asarray(item_ids, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    keep = ~np.isnan(scores)
    item_ids, scores = item_ids[keep], scores[keep]
    order = np.lexsort((item_ids, -scores))
    return item_ids[order[:n]].tolist()


def recommend_top_n(a: int, n: int, context: HybridRecommender, profile: UserProfile | None = None) -> list[tuple[int, float]]:
    """Top-``n`` (item, score) pairs among items ``a`` has not rated in training."""
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    row = context.score_row(a, profile)
    cand = np.ones(len(context.item_ids), dtype=bool)
    if context.is_known(a):
        cand[context.rated[context.user_index[int(a)]].indices] = False
    ids = rank_items(context.item_ids[cand], row[cand], n)
    pos = {int(i): float(s) for i, s in zip(context.item_ids, row)}
    return [(i, pos[i]) for i in ids]


def write_recommendations(rows, path_or_file) -> None:
    """CSV ``user_id,item_id,rank,score``; ``rows`` holds ``(user, [(item, score), ...])``."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "item_id", "rank", "score"])
        for user, recs in rows:
            for rank, (item, score) in enumerate(recs, 1):
                w.writerow([user, item, rank, repr(float(score))])
    finally:
        if own:
            fh.close()
