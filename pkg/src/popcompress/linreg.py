"""Synthetic Gaussian linear-regression problems.

Data follow ``Y_i = X_i^T w* + eps_i`` with ``X_i ~ N(0, diag(sigma_x_diag))``
and ``eps_i ~ N(0, noise_var)``. The design matrix is stored d x n (column i
is sample i), matching the ``W = (X X^T)^{-1} X Y`` form of the ERM solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, ParameterError, RankError, SingularityError

#: Jitter around the +/-1 cluster centres of w*.
WSTAR_JITTER = 0.01

#: Condition number above which the normal equations are declared singular.
MAX_CONDITION = 1e12


def as_weights(values, name: str = "w") -> np.ndarray:
    """Return ``values`` as a finite 1-d float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class LinearProblem:
    """Ground-truth model: ``w_star``, diagonal covariance of X and noise variance."""

    w_star: np.ndarray
    sigma_x_diag: np.ndarray
    noise_var: float

    def __post_init__(self):
        w_star = as_weights(self.w_star, "w_star")
        sigma = as_weights(self.sigma_x_diag, "sigma_x_diag")
        if w_star.size < 1:
            raise ParameterError("dimension must be >= 1")
        if sigma.shape != w_star.shape:
            raise ParameterError(
                f"sigma_x_diag has length {sigma.size}, expected {w_star.size}"
            )
        if np.any(sigma <= 0):
            raise ParameterError("sigma_x_diag entries must be positive")
        if not (np.isfinite(self.noise_var) and self.noise_var > 0):
            raise ParameterError(f"noise_var must be positive, got {self.noise_var}")
        object.__setattr__(self, "w_star", w_star)
        object.__setattr__(self, "sigma_x_diag", sigma)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def d(self) -> int:
        return self.w_star.size

    @property
    def sigma_x_norm(self) -> float:
        """Spectral norm of the (diagonal) covariance."""
        return float(self.sigma_x_diag.max())


@dataclass(frozen=True)
class Dataset:
    """Training sample: ``x`` is d x n, ``y`` has length n."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or y.ndim != 1:
            raise ParameterError("x must be d x n and y a vector")
        if x.shape[1] != y.size:
            raise ParameterError(f"x has {x.shape[1]} columns but y has {y.size} entries")
        if y.size < 1:
            raise ParameterError("dataset must hold at least one sample")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[0]


def sample_problem(d: int, noise_var: float, sigma_x_diag=None, seed: int = 0) -> LinearProblem:
    """Draw a problem whose w* entries sit near the two centres +1 and -1.

    Each coordinate is ``s + N(0, 0.01^2)`` with ``s`` uniform on {+1, -1}.
    ``sigma_x_diag`` defaults to the identity.
    """
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    d = int(d)
    if sigma_x_diag is None:
        sigma_x_diag = np.ones(d)
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=d)
    w_star = signs + WSTAR_JITTER * rng.standard_normal(d)
    return LinearProblem(w_star=w_star, sigma_x_diag=sigma_x_diag, noise_var=noise_var)


def sample_dataset(problem: LinearProblem, n: int, seed: int = 0) -> Dataset:
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    x = np.sqrt(problem.sigma_x_diag)[:, None] * rng.standard_normal((problem.d, int(n)))
    noise = np.sqrt(problem.noise_var) * rng.standard_normal(int(n))
    return Dataset(x=x, y=x.T @ problem.w_star + noise)


def erm_fit(dataset: Dataset) -> np.ndarray:
    """Least-squares solution ``(X X^T)^{-1} X Y`` via a Cholesky solve.

    Raises
    ------
    RankError
        If ``n <= d``.
    SingularityError
        If the condition number of ``X X^T`` exceeds ``MAX_CONDITION``.
    """
    d, n = dataset.x.shape
    if n <= d:
        raise RankError(f"need n > d for a unique ERM solution, got n={n}, d={d}")
    gram = dataset.x @ dataset.x.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularityError(f"X X^T is ill-conditioned (condition number {cond:.3g})")
    factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(factor, dataset.x @ dataset.y, check_finite=False)


def _check_dim(w: np.ndarray, d: int) -> np.ndarray:
    w = as_weights(w)
    if w.size != d:
        raise ParameterError(f"weight vector has length {w.size}, expected {d}")
    return w


def empirical_risk(w, dataset: Dataset) -> float:
    """Mean squared error ``(1/n) ||Y - X^T w||^2`` on the sample."""
    w = _check_dim(w, dataset.d)
    residual = dataset.y - dataset.x.T @ w
    return float(residual @ residual) / dataset.n


def population_risk(w, problem: LinearProblem) -> float:
    """Exact risk under the generating model: ``(w - w*)^T Sigma (w - w*) + noise_var``."""
    w = _check_dim(w, problem.d)
    delta = w - problem.w_star
    return float(np.sum(problem.sigma_x_diag * delta * delta)) + problem.noise_var


def exact_gen_error(problem: LinearProblem, n: int) -> float:
    """Expected generalization error of the ERM solution, valid for ``n > d + 1``."""
    d = problem.d
    if n <= d + 1:
        raise DomainError(f"closed form needs n > d + 1, got n={n}, d={d}")
    return problem.noise_var * d / n * (2.0 + (d + 1) / (n - d - 1))


def hessian_diag(dataset: Dataset) -> np.ndarray:
    """Diagonal of ``(1/n) X X^T``.

    This is the curvature convention used throughout the distortion formulas;
    the literal Hessian of the mean squared error is twice this.
    """
    return np.einsum("ji,ji->j", dataset.x, dataset.x) / dataset.n


def save_weights(path, w) -> None:
    """Write one decimal float per line (round-trip exact)."""
    w = as_weights(w)
    with open(path, "w") as fh:
        fh.writelines(f"{v!r}\n" for v in w.tolist())


def load_weights(path) -> np.ndarray:
    with open(path) as fh:
        values = [float(line) for line in fh if line.strip()]
    if not values:
        raise ParameterError(f"{path}: no weights found")
    return as_weights(values)
