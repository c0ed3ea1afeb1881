"""Item documents, tf-idf term-document matrix, LSA and content-based prediction."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .errors import ColdStartError, DegenerateInputError, DimensionError, EmptyVocabularyError

_TOKEN = re.compile(r"[a-z0-9]+(?:['\-][a-z0-9]+)*")

# dense LAPACK below this many cells, ARPACK above
_DENSE_SVD_CELLS = 40_000_000


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def load_stopwords(path=None) -> frozenset[str]:
    """One word per line. ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("wsbmrec.data").joinpath("stopwords.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def item_documents(items: dict, descriptions: dict | None = None) -> tuple[list[int], list[str]]:
    """Build one text per item from title, genre labels and an optional description.

    Returns ``(item_ids, documents)`` sorted by item id.
    """
    ids = sorted(items)
    docs = []
    for iid in ids:
        info = items[iid]
        parts = [info.title, " ".join(info.genres)]
        if descriptions and iid in descriptions:
            parts.append(descriptions[iid])
        docs.append(" ".join(parts))
    return ids, docs


@dataclass(frozen=True)
class TermDocMatrix:
    matrix: sp.csr_matrix  # r words x s documents
    vocabulary: dict
    sigma: float

    @property
    def shape(self):
        return self.matrix.shape


def build_term_doc_matrix(documents, stopwords=frozenset(), sigma: float = 0.0, tokenizer=tokenize) -> TermDocMatrix:
    """tf-idf with raw term counts and ``idf = log(s / df)``.

    Words whose largest weight over all documents falls below ``sigma`` are
    dropped. Rows follow sorted word order; columns follow input order.
    """
    s = len(documents)
    if s < 1:
        raise EmptyVocabularyError("no documents")
    counts = [Counter(t for t in tokenizer(doc) if t not in stopwords) for doc in documents]
    df = Counter()
    for c in counts:
        df.update(c.keys())
    if not df:
        raise EmptyVocabularyError("all documents are empty after stopword removal")
    words = sorted(df)
    idf = {w: math.log(s / df[w]) for w in words}

    best = dict.fromkeys(words, 0.0)
    for c in counts:
        for w, tf in c.items():
            v = tf * idf[w]
            if v > best[w]:
                best[w] = v
    kept = [w for w in words if best[w] >= sigma]
    if not kept:
        raise EmptyVocabularyError(f"no word reaches threshold sigma={sigma}")
    vocab = {w: r for r, w in enumerate(kept)}

    rows, cols, vals = [], [], []
    for j, c in enumerate(counts):
        for w, tf in c.items():
            r = vocab.get(w)
            if r is not None and idf[w] > 0:
                rows.append(r)
                cols.append(j)
                vals.append(tf * idf[w])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(kept), s), dtype=np.float64)
    return TermDocMatrix(mat, vocab, float(sigma))


@dataclass(frozen=True)
class LsaModel:
    U: np.ndarray  # r x M
    S: np.ndarray  # M, descending
    V: np.ndarray  # s x M

    @property
    def M(self) -> int:
        return len(self.S)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T

    def item_vectors(self) -> np.ndarray:
        """Columns of X_M expressed in the latent basis (``V diag(S)``).

        U has orthonormal columns, so inner products between these rows equal
        inner products between the corresponding columns of X_M.
        """
        return self.V * self.S


def _fix_signs(U, V):
    # deterministic orientation: largest-magnitude entry of each V column is positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def truncated_svd(X, M: int) -> LsaModel:
    """Top-``M`` singular triplets of the term-document matrix.

    ``M`` is clipped to the numerical rank so that every retained singular
    value is strictly positive.
    """
    mat = X.matrix if isinstance(X, TermDocMatrix) else X
    r, s = mat.shape
    if M < 1 or M > min(r, s):
        raise DimensionError(f"latent dimension {M} outside [1, min(r, s)={min(r, s)}]")
    all_zero = mat.count_nonzero() == 0 if sp.issparse(mat) else not np.any(mat)
    if all_zero:
        raise DegenerateInputError("term-document matrix is all zero")

    if r * s <= _DENSE_SVD_CELLS or M >= min(r, s) - 1:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=np.float64)
        U, S, Vt = np.linalg.svd(dense, full_matrices=False)
        U, S, V = U[:, :M], S[:M], Vt[:M].T
    else:
        v0 = np.full(min(r, s), 1.0 / math.sqrt(min(r, s)))
        U, S, Vt = svds(sp.csr_matrix(mat, dtype=np.float64), k=M, v0=v0)
        order = np.argsort(S)[::-1]
        U, S, V = U[:, order], S[order], Vt[order].T

    tol = S[0] * max(r, s) * np.finfo(np.float64).eps
    rank = int(np.sum(S > tol))
    U, S, V = U[:, :rank], S[:rank], V[:, :rank]
    U, V = _fix_signs(U, V)
    return LsaModel(np.ascontiguousarray(U), S.copy(), np.ascontiguousarray(V))


def numerical_rank(X) -> int:
    mat = X.matrix if isinstance(X, TermDocMatrix) else X
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    return int(np.linalg.matrix_rank(dense))


@dataclass(frozen=True)
class ItemSimilarityMatrix:
    values: np.ndarray  # s x s
    item_ids: tuple

    def index(self) -> dict:
        return {iid: k for k, iid in enumerate(self.item_ids)}

    def get(self, j, k) -> float:
        idx = self.index()
        return float(self.values[idx[j], idx[k]])


def item_similarity(model: LsaModel, item_ids=None) -> ItemSimilarityMatrix:
    """Cosine similarity between the columns of X_M; zero columns get 0 everywhere."""
    W = model.item_vectors()
    norms = np.linalg.norm(W, axis=1)
    nz = norms > 0
    Wn = np.zeros_like(W)
    Wn[nz] = W[nz] / norms[nz, None]
    sims = Wn @ Wn.T
    np.clip(sims, -1.0, 1.0, out=sims)
    sims = 0.5 * (sims + sims.T)
    diag = np.where(nz, 1.0, 0.0)
    np.fill_diagonal(sims, diag)
    if item_ids is None:
        item_ids = range(1, W.shape[0] + 1)
    return ItemSimilarityMatrix(sims, tuple(int(i) for i in item_ids))


def content_predict(user: int, item: int, sims: ItemSimilarityMatrix, train) -> float:
    """Similarity-weighted mean of the user's own ratings over positively similar items.

    Falls back to the user's mean training rating when no reference item has
    positive similarity to ``item``.
    """
    mask = train.users == user
    if not np.any(mask):
        raise ColdStartError(f"user {user} has no training ratings")
    idx = sims.index()
    if item not in idx:
        raise ColdStartError(f"item {item} has no content document")
    j = idx[item]
    num = den = 0.0
    for k_item, rating in zip(train.items[mask], train.ratings[mask]):
        if k_item == item or k_item not in idx:
            continue
        s = sims.values[j, idx[k_item]]
        if s > 0:
            num += s * rating
            den += s
    if den == 0.0:
        return float(np.mean(train.ratings[mask]))
    return num / den


def content_scores(rated: sp.csr_matrix, values: sp.csr_matrix, sims: np.ndarray, user_means: np.ndarray) -> np.ndarray:
    """Batch form of :func:`content_predict` for every (user, item) cell.

    ``rated`` is the 0/1 users x items indicator and ``values`` the matching
    rating matrix, both over the same item ordering as ``sims``.
    """
    pos = np.where(sims > 0, sims, 0.0)
    np.fill_diagonal(pos, 0.0)
    num = np.asarray(values @ pos)
    den = np.asarray(rated @ pos)
    out = np.empty_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    fallback = np.broadcast_to(user_means[:, None], out.shape)
    out[~ok] = fallback[~ok]
    return out
