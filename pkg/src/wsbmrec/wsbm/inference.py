"""Mean-field variational Bayes EM for the weighted stochastic block model.

The posterior is factorised as ``q(theta) prod_i q(z_i)``. The E-step updates
each ``q(z_i)`` in turn (ascending vertex order) given everything else; the
M-step sets every bundle posterior to its conjugate optimum. Both are exact
coordinate-ascent moves on the evidence lower bound, so the bound never
decreases.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError, NumericalError, SelectionError, UnknownUserError, ValidationError
from .families import WEIGHT_FAMILIES, get_family
from .kernels import get_sweep

log = logging.getLogger(__name__)

# relative slack for the per-iteration monotonicity check
MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class Priors:
    existence: tuple = (1.0, 1.0)
    poisson_weight: tuple = (1.0, 1.0)
    normal_weight: tuple = (0.0, 1.0, 1.0, 1.0)

    def for_family(self, name):
        return {"poisson_existence": self.existence, "poisson_weight": self.poisson_weight,
                "normal_weight": self.normal_weight}[name]


@dataclass
class WsbmModel:
    K: int
    alpha_mix: float
    families: tuple
    theta: np.ndarray  # K x K existence rates (posterior means)
    weight_theta: np.ndarray  # K x K (Poisson) or K x K x 2 (normal mean, variance)
    qZ: np.ndarray  # n x K
    q_theta: dict  # family name -> {hyperparameter: K x K array}
    elbo: float
    user_ids: tuple
    elbo_trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.qZ.shape[0]

    def labels(self) -> np.ndarray:
        return communities(self)

    def community_sizes(self) -> list[int]:
        lab = communities(self)
        return [int(np.sum(lab == k)) for k in range(1, self.K + 1)]


@dataclass
class ModelSelection:
    candidates: list  # (K, model, approx_log_evidence)
    chosen_k: int
    posterior: np.ndarray
    failures: dict = field(default_factory=dict)

    @property
    def model(self) -> WsbmModel:
        for k, m, _ in self.candidates:
            if k == self.chosen_k:
                return m
        raise SelectionError("chosen model missing from candidates")


class _GraphArrays:
    """CSR arrays in the dtypes the sweep kernels expect."""

    def __init__(self, graph):
        A = sp.csr_matrix(graph.adjacency, dtype=np.float64)
        A.sort_indices()
        self.A = A
        self.B = A.copy()
        self.B.data[:] = 1.0
        self.A2 = A.multiply(A).tocsr()
        self.indptr = np.ascontiguousarray(A.indptr, dtype=np.intp)
        self.indices = np.ascontiguousarray(A.indices, dtype=np.intp)
        self.data = np.ascontiguousarray(A.data, dtype=np.float64)
        self.d = np.ascontiguousarray(graph.degrees, dtype=np.float64)
        self.d2 = self.d ** 2


def _bundle(M):
    """Ordered-pair block sums -> unordered-dyad bundle sums."""
    M = 0.5 * (M + M.T)
    out = M.copy()
    out[np.diag_indices_from(out)] *= 0.5
    return out


def expected_stats(ga: _GraphArrays, mu: np.ndarray, need_q: bool = True) -> dict:
    """Expected bundle aggregates (r, b, q, s) under ``q(Z)`` with rows ``mu``."""
    stats = {
        "r": _bundle(mu.T @ (ga.A @ mu)),
        "b": _bundle(mu.T @ (ga.B @ mu)),
        "s": _bundle(np.outer(ga.d @ mu, ga.d @ mu) - mu.T @ (ga.d2[:, None] * mu)),
    }
    stats["q"] = _bundle(mu.T @ (ga.A2 @ mu)) if need_q else np.zeros_like(stats["r"])
    stats["s"] = np.maximum(stats["s"], 0.0)
    return stats


class _Fitter:
    def __init__(self, graph, K, priors, alpha_mix, weight_family, backend):
        self.graph = graph
        self.K = K
        self.alpha = float(alpha_mix)
        self.exist = get_family("poisson_existence")
        self.wfam = get_family(weight_family)
        self.families = ("poisson_existence", weight_family)
        self.prior_e = priors.for_family("poisson_existence")
        self.prior_w = priors.for_family(weight_family)
        self.ga = _GraphArrays(graph)
        self.need_q = weight_family == "normal_weight"
        self.sweep = get_sweep(backend)
        self.log_prior = np.full(K, -math.log(K))
        self.upper = np.triu(np.ones((K, K), dtype=bool))

    def m_step(self, stats):
        return (
            self.exist.posterior(self.prior_e, stats, self.alpha),
            self.wfam.posterior(self.prior_w, stats, 1.0 - self.alpha),
        )

    def elbo(self, mu, stats, post_e, post_w):
        ll = self.exist.expected_loglik(post_e, stats, self.alpha) + self.wfam.expected_loglik(post_w, stats, 1.0 - self.alpha)
        kl = self.exist.kl(post_e, self.prior_e) + self.wfam.kl(post_w, self.prior_w)
        bundle_terms = float(np.sum((ll - kl)[self.upper]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -float(np.sum(np.where(mu > 0, mu * np.log(mu), 0.0)))
        label_prior = float(np.sum(mu @ self.log_prior))
        return bundle_terms + label_prior + ent

    def coefficient_matrices(self, post_e, post_w):
        K = self.K
        C = {key: np.zeros((K, K)) for key in "rbqs"}
        for coeffs in (self.exist.coefficients(post_e, self.alpha), self.wfam.coefficients(post_w, 1.0 - self.alpha)):
            for key, val in coeffs.items():
                C[key] += val
        return {k: np.ascontiguousarray(v) for k, v in C.items()}

    def e_step(self, mu, post_e, post_w):
        C = self.coefficient_matrices(post_e, post_w)
        ga = self.ga
        self.sweep(ga.indptr, ga.indices, ga.data, ga.d, mu, C["r"], C["b"], C["q"], C["s"], self.log_prior, self.need_q)


def spectral_labels(graph, K: int, rng) -> np.ndarray:
    """0-based labels from seeded k-means on the top-K normalised-adjacency eigenvectors."""
    from scipy.cluster.vq import kmeans2
    from scipy.sparse.linalg import eigsh

    A = sp.csr_matrix(graph.adjacency, dtype=np.float64)
    strength = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros_like(strength)
    inv[strength > 0] = 1.0 / np.sqrt(strength[strength > 0])
    L = sp.diags(inv) @ A @ sp.diags(inv)
    n = graph.n
    if n <= 2000 or K >= n - 1:
        _, vecs = np.linalg.eigh(L.toarray())
        emb = vecs[:, ::-1][:, :K]
    else:
        v0 = np.full(n, 1.0 / math.sqrt(n))
        _, vecs = eigsh(L, k=K, which="LA", v0=v0)
        emb = vecs[:, ::-1]
    norms = np.linalg.norm(emb, axis=1)
    emb = emb / np.where(norms > 0, norms, 1.0)[:, None]
    _, labels = kmeans2(emb, K, minit="++", seed=rng)
    return labels


def initial_qz(graph, K: int, seed, init: str = "spectral", noise: float = 0.2) -> np.ndarray:
    """Starting rows for q(Z).

    ``"random"`` draws each row from a flat Dirichlet. ``"spectral"`` mixes a
    one-hot spectral clustering (weight ``1 - noise``) with such a draw, so
    seeded restarts still differ.
    """
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet(np.ones(K), size=graph.n)
    if init == "random" or K == 1:
        return np.ascontiguousarray(draws)
    if init != "spectral":
        raise ValidationError(f"unknown init {init!r}")
    hard = np.zeros((graph.n, K))
    hard[np.arange(graph.n), spectral_labels(graph, K, rng)] = 1.0
    return np.ascontiguousarray((1.0 - noise) * hard + noise * draws)


def vb_fit(graph, K: int, priors: Priors | None = None, alpha_mix: float = 0.5, tol: float = 1e-8,
           max_iter: int = 200, seed: int = 0, weight_family: str = "poisson_weight",
           backend: str | None = None, init: str = "spectral", init_qz=None) -> WsbmModel:
    """Fit a K-community WSBM by variational Bayes EM.

    Iterates M-step, then (E-step, M-step) pairs, until the bound improves by
    less than ``tol * max(1, |L|)`` or ``max_iter`` E-steps have run.
    """
    priors = priors or Priors()
    n = graph.n
    if K < 1 or K > n:
        raise DimensionError(f"K={K} must lie in [1, n={n}]")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if not 0.0 <= alpha_mix <= 1.0:
        raise ValidationError(f"alpha_mix must lie in [0, 1], got {alpha_mix}")
    if weight_family not in WEIGHT_FAMILIES:
        raise ValidationError(f"weight family must be one of {WEIGHT_FAMILIES}")

    fit = _Fitter(graph, K, priors, alpha_mix, weight_family, backend)
    if init_qz is None:
        mu = initial_qz(graph, K, seed, init)
    else:
        mu = np.ascontiguousarray(init_qz, dtype=np.float64).copy()
    if K == 1:
        mu[:] = 1.0

    stats = expected_stats(fit.ga, mu, fit.need_q)
    post_e, post_w = fit.m_step(stats)
    elbo = fit.elbo(mu, stats, post_e, post_w)
    if not math.isfinite(elbo):
        raise NumericalError("non-finite evidence lower bound", iteration=0)
    trace = [elbo]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if K > 1:
            fit.e_step(mu, post_e, post_w)
        stats = expected_stats(fit.ga, mu, fit.need_q)
        post_e, post_w = fit.m_step(stats)
        new = fit.elbo(mu, stats, post_e, post_w)
        if not math.isfinite(new):
            raise NumericalError("non-finite evidence lower bound", iteration=it)
        if new < elbo - MONOTONE_RTOL * max(1.0, abs(elbo)):
            warnings.warn(f"bound decreased at iteration {it}: {elbo!r} -> {new!r}", RuntimeWarning, stacklevel=2)
        trace.append(new)
        gain = new - elbo
        elbo = new
        if gain < tol * max(1.0, abs(elbo)):
            converged = True
            break

    return WsbmModel(
        K=K,
        alpha_mix=float(alpha_mix),
        families=fit.families,
        theta=fit.exist.point_estimate(post_e),
        weight_theta=fit.wfam.point_estimate(post_w),
        qZ=mu,
        q_theta={fit.families[0]: post_e, fit.families[1]: post_w},
        elbo=float(elbo),
        user_ids=tuple(int(u) for u in graph.user_ids),
        elbo_trace=trace,
        n_iter=it,
        converged=converged,
        seed=seed,
    )


def restart_seed(seed: int, K: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, K, restart]).generate_state(1)[0])


def select_k(graph, k_range=(1, 8), restarts: int = 5, seed: int = 0, **fit_kwargs) -> ModelSelection:
    """Pick K by approximate posterior ``p(K | A)`` under a uniform prior over candidates.

    Each candidate's log evidence is approximated by its best bound over
    ``restarts`` seeded fits. Failed candidates are recorded and skipped.
    """
    lo, hi = k_range
    if lo < 1 or hi < lo:
        raise ValidationError(f"empty or invalid k range {k_range}")
    if hi > graph.n:
        raise DimensionError(f"k range upper bound {hi} exceeds n={graph.n}")
    candidates, failures = [], {}
    for K in range(lo, hi + 1):
        best = None
        n_restarts = 1 if K == 1 else restarts
        for r in range(n_restarts):
            try:
                m = vb_fit(graph, K, seed=restart_seed(seed, K, r), **fit_kwargs)
            except NumericalError as exc:
                failures.setdefault(K, []).append(str(exc))
                continue
            if best is None or m.elbo > best.elbo:
                best = m
        if best is not None:
            candidates.append((K, best, best.elbo))
            log.info("K=%d best bound %.6f sizes %s", K, best.elbo, best.community_sizes())
    if not candidates:
        raise SelectionError(f"every candidate K in {k_range} failed: {failures}")
    ev = np.array([c[2] for c in candidates])
    post = np.exp(ev - ev.max())
    post /= post.sum()
    chosen = candidates[int(np.argmax(ev))][0]  # argmax takes the first, i.e. smaller K, on ties
    return ModelSelection(candidates, chosen, post, failures)


def communities(model: WsbmModel) -> np.ndarray:
    """Hard labels ``1..K``: argmax of each q(z_i) row, ties to the smaller label."""
    return np.argmax(model.qZ, axis=1) + 1


def nearest_neighbors(model: WsbmModel, user: int) -> set[int]:
    """Every other member of ``user``'s community."""
    ids = np.asarray(model.user_ids)
    hit = np.nonzero(ids == user)[0]
    if len(hit) == 0:
        raise UnknownUserError(f"user {user} is not a vertex of the fitted graph")
    lab = communities(model)
    members = ids[lab == lab[hit[0]]]
    return {int(u) for u in members if u != user}
