"""Combined existence/weight log-likelihood for hard community labels."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .families import get_family

DEFAULT_FAMILIES = ("poisson_existence", "poisson_weight")


def _upper_pairs(graph):
    n = graph.n
    iu, ju = np.triu_indices(n, k=1)
    A = graph.adjacency
    w = np.asarray(A[iu, ju]).ravel().astype(np.float64) if n > 1 else np.zeros(0)
    return iu, ju, w


def log_likelihood(graph, labels, theta, alpha_mix: float = 0.5, families=DEFAULT_FAMILIES, weight_theta=None) -> float:
    """``alpha * sum_E T_e . eta_e + (1 - alpha) * sum_W T_w . eta_w``.

    ``labels`` are community ids in ``1..K``. ``theta`` holds the K x K
    existence rates; ``weight_theta`` the weight-family bundle parameters,
    required only when ``alpha_mix < 1``. The existence sum runs over every
    unordered dyad, the weight sum over dyads with ``A_ij > 0``.
    """
    if not 0.0 <= alpha_mix <= 1.0:
        raise ValidationError(f"alpha_mix must lie in [0, 1], got {alpha_mix}")
    exist = get_family(families[0])
    theta = exist.check_theta(theta)
    K = theta.shape[0]
    z = np.asarray(labels, dtype=np.int64) - 1
    if z.shape != (graph.n,) or np.any(z < 0) or np.any(z >= K):
        raise ValidationError(f"labels must be a length-{graph.n} vector in 1..{K}")

    iu, ju, w = _upper_pairs(graph)
    zi, zj = z[iu], z[ju]
    dd = graph.degrees[iu] * graph.degrees[ju]
    eta = exist.natural_params(theta)[zi, zj]
    total = alpha_mix * float(np.sum(exist.sufficient_stats(w, dd) * eta))

    if alpha_mix < 1.0:
        if weight_theta is None:
            raise ValidationError("weight_theta is required when alpha_mix < 1")
        wfam = get_family(families[1])
        on = w > 0
        eta_w = wfam.natural_params(weight_theta)[zi[on], zj[on]]
        total += (1.0 - alpha_mix) * float(np.sum(wfam.sufficient_stats(w[on]) * eta_w))
    return total
