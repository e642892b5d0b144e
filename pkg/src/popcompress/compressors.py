"""Distortion metric, the oracle Gaussian channel and K-means-family quantizers.

The three scalar quantizers share one Lloyd kernel (see ``_backend``):

* :func:`kmeans_quantize` - unit importances,
* :func:`hessian_kmeans_quantize` - per-weight importances ``h``,
* :func:`diameter_reg_quantize` - importances plus a ``beta`` pull on the
  farthest centroid pair, which shrinks the codebook diameter.

Initial centroids are drawn without replacement from the distinct weight
values. With ``restarts > 1`` the run with the lowest (penalized) objective
wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .bounds import oracle_alpha
from .errors import ParameterError
from .linreg import Dataset, LinearProblem, as_weights, empirical_risk

DEFAULT_MAX_ITERS = 100


@dataclass(frozen=True)
class Quantization:
    centroids: np.ndarray
    assignments: np.ndarray
    iterations_run: int
    final_objective: float
    beta: float = 0.0
    objective_history: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.size

    @property
    def diameter(self) -> float:
        return codebook_diameter(self)

    @property
    def penalized_objective(self) -> float:
        """Weighted cost plus ``beta`` times the squared codebook diameter."""
        return self.final_objective + self.beta * self.diameter


@dataclass(frozen=True)
class OracleChannel:
    """Gaussian test channel ``W-hat = (1-alpha) W + alpha w* + xi``."""

    target_distortion: float
    alpha: float
    noise_scale_diag: np.ndarray

    @classmethod
    def for_problem(cls, problem: LinearProblem, n: int, target_distortion: float):
        alpha = oracle_alpha(target_distortion, problem.d, n, problem.noise_var)
        # covariance of xi: (1 - alpha) (D / d) Sigma_X^{-1}
        scale = (1.0 - alpha) * (target_distortion / problem.d) / problem.sigma_x_diag
        return cls(float(target_distortion), alpha, scale)

    def apply(self, w: np.ndarray, w_star: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.alpha == 1.0:
            return w_star.copy()
        xi = np.sqrt(self.noise_scale_diag) * rng.standard_normal(w.size)
        return (1.0 - self.alpha) * w + self.alpha * w_star + xi


def _same_dims(a, b, names=("w_hat", "w")):
    a = as_weights(a, names[0])
    b = as_weights(b, names[1])
    if a.shape != b.shape:
        raise ParameterError(f"{names[0]} and {names[1]} differ in length: {a.size} vs {b.size}")
    return a, b


def distortion(w_hat, w, dataset: Dataset) -> float:
    """Increase in empirical risk from replacing ``w`` by ``w_hat``."""
    w_hat, w = _same_dims(w_hat, w)
    return empirical_risk(w_hat, dataset) - empirical_risk(w, dataset)


def quadratic_distortion(w_hat, w_erm, dataset: Dataset) -> float:
    """``(w_hat - w)^T (X X^T / n) (w_hat - w)``.

    Equal to :func:`distortion` when ``w_erm`` is the exact least-squares
    solution, since the gradient vanishes there and the loss is quadratic.
    """
    w_hat, w_erm = _same_dims(w_hat, w_erm, ("w_hat", "w_erm"))
    if w_hat.size != dataset.d:
        raise ParameterError(f"weights have length {w_hat.size}, dataset has d={dataset.d}")
    proj = dataset.x.T @ (w_hat - w_erm)
    return float(proj @ proj) / dataset.n


def oracle_compress(w, problem: LinearProblem, n: int, target_distortion: float,
                    seed=None) -> np.ndarray:
    """Pass ``w`` through the oracle channel calibrated to ``target_distortion``.

    ``n`` is the training-set size that produced ``w``. Requires
    ``0 < D <= d * noise_var / n``; at the upper edge the output is exactly w*.
    """
    w = as_weights(w)
    if w.size != problem.d:
        raise ParameterError(f"w has length {w.size}, problem has d={problem.d}")
    channel = OracleChannel.for_problem(problem, n, target_distortion)
    return channel.apply(w, problem.w_star, np.random.default_rng(seed))


def _validate_h(h, d):
    h = as_weights(h, "h")
    if h.size != d:
        raise ParameterError(f"h has length {h.size}, expected {d}")
    if np.any(h < 0):
        raise ParameterError("h entries must be nonnegative")
    if not np.any(h > 0):
        raise ParameterError("h must have at least one positive entry")
    return h


def initial_centroids(w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """K starting centroids drawn without replacement from the distinct values of ``w``."""
    distinct = np.unique(w)
    if distinct.size >= k:
        return rng.choice(distinct, size=k, replace=False)
    extra = rng.choice(w, size=k - distinct.size, replace=False)
    return np.concatenate([rng.permutation(distinct), extra])


def _quantize(w, h, k, beta, max_iters, seed, restarts, init, regularize):
    w = as_weights(w)
    d = w.size
    h = _validate_h(h, d)
    if int(k) != k or not 1 <= k <= d:
        raise ParameterError(f"k must be an integer in [1, {d}], got {k}")
    k = int(k)
    if not (beta >= 0 and math.isfinite(beta)):
        raise ParameterError(f"beta must be nonnegative, got {beta}")
    if int(max_iters) != max_iters or max_iters < 1:
        raise ParameterError(f"max_iters must be a positive integer, got {max_iters}")
    if restarts < 1:
        raise ParameterError(f"restarts must be >= 1, got {restarts}")

    if init is not None:
        inits = [as_weights(init, "init")]
        if inits[0].size != k:
            raise ParameterError(f"init has {inits[0].size} centroids, expected {k}")
    else:
        rng = np.random.default_rng(seed)
        inits = [initial_centroids(w, k, rng) for _ in range(restarts)]

    best = None
    for start in inits:
        centroids, assignments, iters, history = _backend.run_lloyd(
            w, h, start, float(beta), int(max_iters), regularize)
        q = Quantization(centroids, assignments, int(iters), float(history[-1]),
                         float(beta) if regularize else 0.0, history)
        if best is None or q.penalized_objective < best.penalized_objective:
            best = q
    return best


def kmeans_quantize(w, k: int, max_iters: int = DEFAULT_MAX_ITERS, seed=None,
                    restarts: int = 1, init=None) -> Quantization:
    """Plain Lloyd's algorithm on the scalar entries of ``w``."""
    w = as_weights(w)
    return _quantize(w, np.ones_like(w), k, 0.0, max_iters, seed, restarts, init, False)


def hessian_kmeans_quantize(w, h, k: int, max_iters: int = DEFAULT_MAX_ITERS, seed=None,
                            restarts: int = 1, init=None) -> Quantization:
    """Minimize ``sum_j h_j (w_j - c_{a(j)})^2`` by alternating assignments and weighted means.

    Points are assigned by plain distance: for a fixed point the weight
    ``h_j`` scales every candidate cost equally, so it does not change the
    argmin.
    """
    return _quantize(w, h, k, 0.0, max_iters, seed, restarts, init, False)


def diameter_reg_quantize(w, h, k: int, beta: float, max_iters: int = DEFAULT_MAX_ITERS,
                          seed=None, restarts: int = 1, init=None) -> Quantization:
    """Hessian-weighted K-means with a ``beta * max |c_i - c_j|^2`` penalty.

    Each iteration assigns points to the nearest centroid, then pulls the
    farthest pair of the previous iterate towards each other::

        c_k1 = (sum_{C_k1} h w + beta * c_k2_prev) / (sum_{C_k1} h + beta)

    and symmetrically for ``c_k2``. Both use previous-iterate values, so the
    update does not depend on pair order. The other centroids take plain
    weighted means. With ``beta = 0`` the result is bit-identical to
    :func:`hessian_kmeans_quantize`.
    """
    return _quantize(w, h, k, beta, max_iters, seed, restarts, init, True)


def weighted_cost(w, h, centroids, assignments) -> float:
    """Unpenalized weighted squared quantization error."""
    w = as_weights(w)
    h = as_weights(h, "h")
    r = w - np.asarray(centroids)[np.asarray(assignments)]
    return float(np.sum(h * r * r))


def reconstruct(q: Quantization) -> np.ndarray:
    return q.centroids[q.assignments]


def rate_estimate(q: Quantization, d: int | None = None, mode: str = "entropy") -> float:
    """Description-length proxy for the quantizer output, in nats.

    ``mode="entropy"`` gives ``d`` times the empirical entropy of the
    assignment histogram; ``mode="log_k"`` gives the ``d ln K`` ceiling.
    """
    if d is None:
        d = q.assignments.size
    if mode == "log_k":
        return d * math.log(q.k)
    if mode != "entropy":
        raise ParameterError(f"unknown rate mode {mode!r}")
    counts = np.bincount(q.assignments, minlength=q.k)
    p = counts[counts > 0] / q.assignments.size
    entropy = -float(np.sum(p * np.log(p)))
    # clamp rounding: entropy lies in [0, ln K]
    return d * min(max(entropy, 0.0), math.log(q.k))


def codebook_diameter(q: Quantization) -> float:
    """Largest squared distance between two centroids (0 for a single centroid)."""
    c = np.asarray(q.centroids, dtype=np.float64)
    if c.size < 2:
        return 0.0
    return float((c.max() - c.min()) ** 2)


def c_wstar_estimate(w_hat, w_star) -> float:
    """Realized ``||w_hat - w*||^2``, a per-run proxy for C(w*)."""
    w_hat, w_star = _same_dims(w_hat, w_star, ("w_hat", "w_star"))
    delta = w_hat - w_star
    return float(delta @ delta)
