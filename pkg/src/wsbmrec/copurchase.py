"""User-user co-purchase network built from shared rated items."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class CoPurchaseGraph:
    """Undirected weighted graph; ``adjacency[i, j]`` counts items rated by both users.

    ``degrees`` is the weighted degree (strength) unless the graph was built
    with ``weighted_degree=False``, in which case it is the neighbour count.
    """

    adjacency: sp.csr_matrix
    degrees: np.ndarray
    user_ids: np.ndarray
    user_index: dict = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.user_ids)

    def vertex(self, user_id: int) -> int:
        return self.user_index[user_id]


def incidence(train, user_ids=None, item_ids=None) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Binary users x items matrix of rated pairs."""
    if user_ids is None:
        user_ids = np.unique(train.users)
    if item_ids is None:
        item_ids = np.unique(train.items)
    rows = np.searchsorted(user_ids, train.users)
    cols = np.searchsorted(item_ids, train.items)
    data = np.ones(len(rows), dtype=np.int64)
    B = sp.csr_matrix((data, (rows, cols)), shape=(len(user_ids), len(item_ids)))
    B.data[:] = 1  # duplicate (user, item) rows count once
    return B, user_ids, item_ids


def from_adjacency(adjacency, user_ids=None, weighted_degree: bool = True) -> CoPurchaseGraph:
    A = sp.csr_matrix(adjacency, dtype=np.int64)
    A.setdiag(0)
    A.eliminate_zeros()
    A.sort_indices()
    n = A.shape[0]
    if user_ids is None:
        user_ids = np.arange(1, n + 1)
    user_ids = np.asarray(user_ids, dtype=np.int64)
    if weighted_degree:
        deg = np.asarray(A.sum(axis=1)).ravel().astype(np.float64)
    else:
        deg = np.diff(A.indptr).astype(np.float64)
    index = {int(u): k for k, u in enumerate(user_ids)}
    return CoPurchaseGraph(A, deg, user_ids, index)


def build_graph(train, weighted_degree: bool = True) -> CoPurchaseGraph:
    """Vertices are the distinct training users; edge weight = number of co-rated items."""
    B, user_ids, _ = incidence(train)
    A = (B @ B.T).tocsr()
    return from_adjacency(A, user_ids, weighted_degree)


def isolated_vertices(graph: CoPurchaseGraph) -> set[int]:
    strength = np.asarray(graph.adjacency.sum(axis=1)).ravel()
    return {int(u) for u in graph.user_ids[strength == 0]}


def write_edge_list(graph: CoPurchaseGraph, path) -> None:
    """One ``i<TAB>j<TAB>weight`` line per undirected edge, by user id, i < j."""
    upper = sp.triu(graph.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w") as fh:
        for r, c, w in zip(upper.row[order], upper.col[order], upper.data[order]):
            fh.write(f"{graph.user_ids[r]}\t{graph.user_ids[c]}\t{int(w)}\n")


def read_edge_list(path, weighted_degree: bool = True) -> CoPurchaseGraph:
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if rows.size == 0:
        return from_adjacency(sp.csr_matrix((0, 0)), np.zeros(0, np.int64), weighted_degree)
    ids = np.unique(rows[:, :2])
    r = np.searchsorted(ids, rows[:, 0])
    c = np.searchsorted(ids, rows[:, 1])
    A = sp.coo_matrix((rows[:, 2], (r, c)), shape=(len(ids), len(ids)))
    return from_adjacency(A + A.T, ids, weighted_degree)
