"""Exponential families for edge existence and edge weights, with conjugate priors.

Every dyad statistic the fitting code needs is a linear combination of four
per-bundle aggregates:

``r``  sum of weights ``A_ij``
``b``  number of weighted edges (``A_ij > 0``)
``q``  sum of squared weights
``s``  sum of degree products ``d_i d_j`` (all dyads, including non-edges)

A family converts posterior hyperparameters into the coefficients with which
these aggregates enter a vertex's label logits (used by the E-step), and
evaluates the expected log-likelihood, KL divergence and closed-form log
marginal for a bundle. All likelihoods drop base measures that do not depend
on the bundle parameter.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

from ..errors import DomainError


def _gamma_kl(a, b, a0, b0):
    return (a - a0) * digamma(a) - gammaln(a) + gammaln(a0) + a0 * (np.log(b) - np.log(b0)) + a * (b0 - b) / b


class _GammaRateFamily:
    """Poisson-type likelihood ``x log(rate) - c * rate`` with a Gamma(shape, rate) prior."""

    count_key = "r"  # aggregate multiplying log(rate)
    exposure_key = "s"  # aggregate multiplying -rate
    default_prior = (1.0, 1.0)

    def posterior(self, prior, stats, weight):
        a0, b0 = prior
        return {"shape": a0 + weight * stats[self.count_key], "rate": b0 + weight * stats[self.exposure_key]}

    @staticmethod
    def _expectations(post):
        return digamma(post["shape"]) - np.log(post["rate"]), post["shape"] / post["rate"]

    def coefficients(self, post, weight):
        e_log, e_rate = self._expectations(post)
        return {self.count_key: weight * e_log, self.exposure_key: -weight * e_rate}

    def expected_loglik(self, post, stats, weight):
        e_log, e_rate = self._expectations(post)
        return weight * (stats[self.count_key] * e_log - stats[self.exposure_key] * e_rate)

    def kl(self, post, prior):
        return _gamma_kl(post["shape"], post["rate"], *prior)

    def log_marginal(self, prior, stats, weight):
        a0, b0 = prior
        a = a0 + weight * stats[self.count_key]
        b = b0 + weight * stats[self.exposure_key]
        return a0 * np.log(b0) - gammaln(a0) + gammaln(a) - a * np.log(b)

    def point_estimate(self, post):
        return post["shape"] / post["rate"]

    @staticmethod
    def check_theta(theta):
        theta = np.asarray(theta, dtype=np.float64)
        if np.any(~np.isfinite(theta)) or np.any(theta <= 0):
            raise DomainError("Poisson rates must be positive and finite")
        return theta


class PoissonExistence(_GammaRateFamily):
    """Degree-corrected Poisson existence: ``A_ij ~ Poisson(d_i d_j theta)``.

    Sufficient statistic ``(A_ij, -d_i d_j)``, natural parameter ``(log theta, theta)``.
    """

    name = "poisson_existence"
    exposure_key = "s"

    @staticmethod
    def sufficient_stats(x, dd):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([x, -np.asarray(dd, dtype=np.float64) * np.ones_like(x)], axis=-1)

    def natural_params(self, theta):
        theta = self.check_theta(theta)
        return np.stack([np.log(theta), theta], axis=-1)

    @staticmethod
    def log_base_measure(x, dd):
        x = np.asarray(x, dtype=np.float64)
        dd = np.asarray(dd, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            xlog = np.where(x > 0, x * np.log(dd), 0.0)
        return xlog - gammaln(x + 1)


class PoissonWeight(_GammaRateFamily):
    """Poisson edge weights on observed edges.

    Sufficient statistic ``(A_ij, -1)``, natural parameter ``(log lambda, lambda)``.
    """

    name = "poisson_weight"
    exposure_key = "b"

    @staticmethod
    def sufficient_stats(x, dd=None):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([x, -np.ones_like(x)], axis=-1)

    def natural_params(self, theta):
        theta = self.check_theta(theta)
        return np.stack([np.log(theta), theta], axis=-1)

    @staticmethod
    def log_base_measure(x, dd=None):
        return -gammaln(np.asarray(x, dtype=np.float64) + 1)


class NormalWeight:
    """Gaussian edge weights with a Normal-Gamma prior ``(mean0, kappa0, shape0, rate0)``.

    Sufficient statistic ``(x, x^2, 1)``; natural parameter
    ``(mu tau, -tau/2, -mu^2 tau/2 + log(tau)/2)`` for precision ``tau``.
    The bundle parameter is ``(mean, variance)`` in the last axis.
    """

    name = "normal_weight"
    default_prior = (0.0, 1.0, 1.0, 1.0)

    @staticmethod
    def check_theta(theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape[-1] != 2:
            raise DomainError("normal bundle parameters need (mean, variance) in the last axis")
        if np.any(~np.isfinite(theta)) or np.any(theta[..., 1] <= 0):
            raise DomainError("normal variances must be positive and finite")
        return theta

    @staticmethod
    def sufficient_stats(x, dd=None):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([x, x * x, np.ones_like(x)], axis=-1)

    def natural_params(self, theta):
        theta = self.check_theta(theta)
        mu, tau = theta[..., 0], 1.0 / theta[..., 1]
        return np.stack([mu * tau, -0.5 * tau, -0.5 * mu * mu * tau + 0.5 * np.log(tau)], axis=-1)

    @staticmethod
    def log_base_measure(x, dd=None):
        return np.full(np.shape(x), -0.5 * np.log(2 * np.pi))

    def posterior(self, prior, stats, weight):
        m0, k0, a0, b0 = prior
        n = weight * stats["b"]
        s = weight * stats["r"]
        ss = weight * stats["q"]
        kn = k0 + n
        mn = (k0 * m0 + s) / kn
        an = a0 + 0.5 * n
        bn = b0 + 0.5 * (ss + k0 * m0 * m0 - kn * mn * mn)
        return {"mean": mn, "kappa": kn, "shape": an, "rate": np.maximum(bn, b0 * 1e-12)}

    @staticmethod
    def _expectations(post):
        e_tau = post["shape"] / post["rate"]
        e_logtau = digamma(post["shape"]) - np.log(post["rate"])
        e_mutau = post["mean"] * e_tau
        e_mu2tau = 1.0 / post["kappa"] + post["mean"] ** 2 * e_tau
        return e_tau, e_logtau, e_mutau, e_mu2tau

    def coefficients(self, post, weight):
        e_tau, e_logtau, e_mutau, e_mu2tau = self._expectations(post)
        return {
            "r": weight * e_mutau,
            "q": -0.5 * weight * e_tau,
            "b": weight * (-0.5 * e_mu2tau + 0.5 * e_logtau),
        }

    def expected_loglik(self, post, stats, weight):
        e_tau, e_logtau, e_mutau, e_mu2tau = self._expectations(post)
        return weight * (stats["r"] * e_mutau - 0.5 * stats["q"] * e_tau + stats["b"] * (0.5 * e_logtau - 0.5 * e_mu2tau))

    def kl(self, post, prior):
        m0, k0, a0, b0 = prior
        kl_tau = _gamma_kl(post["shape"], post["rate"], a0, b0)
        ratio = k0 / post["kappa"]
        e_tau = post["shape"] / post["rate"]
        return kl_tau + 0.5 * (ratio - 1.0 - np.log(ratio) + k0 * (post["mean"] - m0) ** 2 * e_tau)

    def log_marginal(self, prior, stats, weight):
        m0, k0, a0, b0 = prior
        post = self.posterior(prior, stats, weight)
        return (
            gammaln(post["shape"]) - gammaln(a0) + a0 * np.log(b0) - post["shape"] * np.log(post["rate"])
            + 0.5 * np.log(k0 / post["kappa"])
        )

    def point_estimate(self, post):
        # variance reported as 1 / E[tau]
        return np.stack([post["mean"], post["rate"] / post["shape"]], axis=-1)


FAMILIES = {f.name: f for f in (PoissonExistence(), PoissonWeight(), NormalWeight())}
WEIGHT_FAMILIES = ("poisson_weight", "normal_weight")


def get_family(name):
    try:
        return FAMILIES[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
