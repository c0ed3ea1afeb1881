"""Stage functions that connect ingestion, content model, communities and prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .comments import build_classifier, improve_ratings, read_comment_file, read_labeled_comments
from .config import PipelineConfig
from .copurchase import build_graph
from .corpus import (ItemSimilarityMatrix, LsaModel, build_term_doc_matrix, item_documents, item_similarity,
                     load_stopwords, numerical_rank, truncated_svd)
from .errors import DataIOError
from .ingest import RatingsTable, parse_descriptions, parse_items, parse_ratings, parse_users
from .predict import HybridRecommender
from .wsbm import communities, select_k

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    ratings: RatingsTable
    profiles: dict
    items: dict
    descriptions: dict | None = None


def resolve_paths(config: PipelineConfig, data_dir=None) -> PipelineConfig:
    """Fill unset MovieLens file paths from ``data_dir`` (u.data / u.user / u.item)."""
    if data_dir is None:
        return config
    d = Path(data_dir)
    if not d.is_dir():
        raise DataIOError(f"data directory {d} does not exist")
    for key, name in (("ratings", "u.data"), ("users", "u.user"), ("items", "u.item")):
        if getattr(config, key) is None:
            setattr(config, key, str(d / name))
    return config


def load_dataset(config: PipelineConfig) -> Dataset:
    for key in ("ratings", "users", "items"):
        if getattr(config, key) is None:
            raise DataIOError(f"no {key} file configured")
    desc = parse_descriptions(config.descriptions) if config.descriptions else None
    return Dataset(parse_ratings(config.ratings), parse_users(config.users), parse_items(config.items), desc)


def content_model(dataset: Dataset, config: PipelineConfig) -> tuple[ItemSimilarityMatrix, LsaModel, int]:
    """Item similarities, the LSA factorisation behind them, and the vocabulary size."""
    ids, docs = item_documents(dataset.items, dataset.descriptions)
    X = build_term_doc_matrix(docs, load_stopwords(), config.sigma)
    M = min(config.lsa_dim, numerical_rank(X.matrix))
    lsa = truncated_svd(X, M)
    return item_similarity(lsa, ids), lsa, X.shape[0]


def apply_comments(train: RatingsTable, config: PipelineConfig) -> RatingsTable:
    """Replace training ratings that have an appended comment by their corrected value."""
    if not (config.comments and config.labeled_comments):
        return train
    clf = build_classifier(read_labeled_comments(config.labeled_comments))
    fixed = {(u, i): fr for u, i, _, _, fr in improve_ratings(read_comment_file(config.comments), clf, config.comment_blend)}
    if not fixed:
        return train
    new = np.array([fixed.get((int(u), int(i)), r) for u, i, r in zip(train.users, train.items, train.ratings)])
    log.info("corrected %d training ratings from comments", int(np.sum(new != train.ratings)))
    return train.with_ratings(new)


def fit_communities(train: RatingsTable, config: PipelineConfig, seed: int | None = None):
    graph = build_graph(train, weighted_degree=config.weighted_degree)
    k_hi = min(config.k_max, graph.n)
    sel = select_k(
        graph, (min(config.k_min, k_hi), k_hi), restarts=config.restarts,
        seed=config.seed if seed is None else seed,
        alpha_mix=config.alpha_mix, weight_family=config.weight_family, tol=config.tol, max_iter=config.max_iter,
    )
    return graph, sel


def community_map(model) -> dict:
    return {int(u): int(z) for u, z in zip(model.user_ids, communities(model))}


def recommenders(train, dataset: Dataset, sims, model, config: PipelineConfig):
    """``(ours, traditional)`` prediction contexts over the same training split."""
    kw = dict(weights=config.blend, n_neighbors=config.n_neighbors, n_fallback=config.n_fallback, corated=config.corated)
    ours = HybridRecommender(train, dataset.profiles, sims, communities=community_map(model), **kw)
    trad = HybridRecommender(train, dataset.profiles, sims, **kw)
    return ours, trad
