"""Gaussian and Gaussian-mixture densities: evaluation, sampling and EM fitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)
DEFAULT_COV_FLOOR = 1e-6
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Normal distribution with mean ``mean`` (shape ``(n,)``) and PD covariance ``cov``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float)).copy()
        n = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (n, n):
            raise ValueError(f"mean of length {n} needs a {n}x{n} covariance, got {cov.shape}")
        scale = max(1.0, np.abs(cov).max())
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)

    def logpdf(self, x) -> np.ndarray:
        """Log density at ``x``; ``x`` may be a single point or an ``(count, n)`` array."""
        return _gaussian_logpdf(np.asarray(x, dtype=float), self.mean, self.chol)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))


def _gaussian_logpdf(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    n = mean.shape[0]
    diff = np.atleast_2d(x - mean) if x.ndim <= 1 else x - mean
    if diff.shape[-1] != n:
        raise ValueError(f"points must have dimension {n}, got {diff.shape[-1]}")
    flat = diff.reshape(-1, n)
    z = scipy.linalg.solve_triangular(chol, flat.T, lower=True)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    out = -0.5 * (n * LOG_2PI + logdet + np.einsum("ij,ij->j", z, z))
    if x.ndim <= 1:
        return out[0]
    return out.reshape(diff.shape[:-1])


@dataclass(frozen=True, eq=False)
class Gmm:
    """Weighted mixture of Gaussians sharing one dimension."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        comps = tuple(c if isinstance(c, Gaussian) else Gaussian(*c) for c in self.components)
        if w.ndim != 1 or len(comps) != w.shape[0] or not comps:
            raise ValueError("weights and components must be non-empty and of equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("mixture weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")
        w /= w.sum()
        if len({c.n for c in comps}) != 1:
            raise ValueError("all components must share the same dimension")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return self.components[0].n

    def __len__(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def covs(self) -> np.ndarray:
        return np.array([c.cov for c in self.components])

    def component_logpdf(self, x) -> np.ndarray:
        """``log(w_i) + log N(x; mu_i, Sigma_i)`` stacked on the last axis."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return np.stack([lw + c.logpdf(x) for lw, c in zip(logw, self.components)], axis=-1)

    def logpdf(self, x) -> np.ndarray:
        return logsumexp(self.component_logpdf(x), axis=-1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def responsibilities(self, x) -> np.ndarray:
        """Posterior component probabilities, computed in the log domain."""
        lp = self.component_logpdf(x)
        return np.exp(lp - logsumexp(lp, axis=-1, keepdims=True))

    def mixture_mean(self) -> np.ndarray:
        return self.weights @ self.means

    def mixture_cov(self) -> np.ndarray:
        mu = self.mixture_mean()
        d = self.means - mu
        return np.einsum("i,ijk->jk", self.weights, self.covs) + np.einsum("i,ij,ik->jk", self.weights, d, d)

    def sample(self, count: int, seed=None):
        return sample(self, count, seed)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "components": [{"mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in self.components],
        }

    @classmethod
    def from_dict(cls, data) -> "Gmm":
        """Accept ``{"weights", "components"}`` or a list of ``{"weight", "mean", "cov"}``."""
        if isinstance(data, dict):
            comps = [Gaussian(c["mean"], c["cov"]) for c in data["components"]]
            return cls(data["weights"], tuple(comps))
        comps = [Gaussian(c["mean"], c["cov"]) for c in data]
        return cls([c["weight"] for c in data], tuple(comps))


def gaussian_pdf(g: Gaussian, x) -> float:
    return float(g.pdf(np.asarray(x, dtype=float)))


def gmm_pdf(g: Gmm, x) -> float:
    return float(g.pdf(np.asarray(x, dtype=float)))


def log_likelihood(g: Gmm, samples) -> float:
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.size == 0:
        return 0.0
    return float(g.logpdf(X).sum())


def sample(g: Gmm, count: int, seed=None):
    """Draw ``count`` points; returns ``(points, labels)``.

    Each draw picks a component from the weights, then a Gaussian point from
    it. ``seed`` may be an int, ``None`` or a ``numpy.random.Generator``.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    labels = rng.choice(len(g), size=count, p=g.weights)
    z = rng.standard_normal((count, g.n))
    points = np.empty((count, g.n))
    for i, c in enumerate(g.components):
        sel = labels == i
        points[sel] = c.mean + z[sel] @ c.chol.T
    return points, labels


@dataclass(frozen=True, eq=False)
class EmFit:
    """Result of :func:`em_fit`; ``history[i]`` is the log-likelihood after ``i`` updates."""

    gmm: Gmm
    log_likelihood: float
    history: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _kmeans_pp(X, k, rng, subset=2000):
    if X.shape[0] > subset:
        X = X[rng.choice(X.shape[0], size=subset, replace=False)]
    centers = [X[rng.integers(X.shape[0])]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.choice(X.shape[0], p=d2 / total) if total > 0 else rng.integers(X.shape[0])
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _m_step(X, resp, cov_floor):
    count, n = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], n, n))
    for i in range(resp.shape[1]):
        d = X - means[i]
        covs[i] = (resp[:, i, None] * d).T @ d / nk[i]
        covs[i] = 0.5 * (covs[i] + covs[i].T) + cov_floor * np.eye(n)
    return weights, means, covs


def _weighted_logprob(X, weights, means, covs):
    out = np.empty((X.shape[0], len(weights)))
    for i in range(len(weights)):
        out[:, i] = np.log(weights[i]) + _gaussian_logpdf(X, means[i], np.linalg.cholesky(covs[i]))
    return out


def em_fit(samples, k: int, seed=0, max_iters: int = 500, tol: float = 1e-6,
           cov_floor: float = DEFAULT_COV_FLOOR) -> EmFit:
    """Fit a ``k``-component mixture to ``samples`` by expectation-maximization.

    Initialization is k-means++ seeding followed by one hard-assignment
    M-step. Iteration stops once the relative change in log-likelihood drops
    below ``tol`` or after ``max_iters`` updates. Every M-step adds
    ``cov_floor * I`` to the covariances so collapsed clusters stay PD.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise ValueError("k must be at least 1")
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} samples, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)
    nearest = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    resp = np.zeros((X.shape[0], k))
    resp[np.arange(X.shape[0]), nearest] = 1.0
    weights, means, covs = _m_step(X, resp, cov_floor)

    history = []
    converged = False
    n_iter = 0
    while True:
        logp = _weighted_logprob(X, weights, means, covs)
        lognorm = logsumexp(logp, axis=1)
        ll = float(lognorm.sum())
        if history and abs(ll - history[-1]) <= tol * abs(history[-1]):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        if n_iter >= max_iters:
            break
        resp = np.exp(logp - lognorm[:, None])
        weights, means, covs = _m_step(X, resp, cov_floor)
        n_iter += 1

    gmm = Gmm(weights, tuple(Gaussian(mu, S) for mu, S in zip(means, covs)))
    return EmFit(gmm=gmm, log_likelihood=ll, history=history, n_iter=n_iter, converged=converged)
