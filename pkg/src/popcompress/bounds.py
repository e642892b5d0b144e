"""Closed-form generalization, rate-distortion and tradeoff bounds.

All rates are in nats. Convert with :func:`nats_to_bits` for display only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ParameterError

#: Relative slack allowed when a distortion sits on the edge of the oracle domain.
_EDGE_RTOL = 1e-12


def nats_to_bits(nats: float) -> float:
    return nats / math.log(2.0)


def _nonneg(value, name):
    if not (value >= 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a finite nonnegative number, got {value}")
    return float(value)


def _positive(value, name):
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive, got {value}")
    return float(value)


def _check_regression_dims(d, n):
    if int(d) != d or d < 1 or int(n) != n or n < 1:
        raise ParameterError(f"d and n must be positive integers, got d={d}, n={n}")
    if n <= d + 1:
        raise DomainError(f"requires n > d + 1, got n={n}, d={d}")


@dataclass(frozen=True)
class BoundInputs:
    """Problem constants shared by the linear-regression bounds."""

    n: int
    d: int
    noise_var: float
    c_wstar: float = 0.0
    sigma_x_norm: float = 1.0

    @property
    def loss_scale(self) -> float:
        """``C(w*) ||Sigma_X|| + noise_var``, the loss's sub-Gaussian scale."""
        return self.c_wstar * self.sigma_x_norm + self.noise_var

    @property
    def sub_gaussian_var(self) -> float:
        """sigma^2 for which :func:`mi_gen_bound` coincides with :func:`linreg_gen_bound`."""
        return 2.0 * self.loss_scale**2


def mi_gen_bound(sub_gaussian_var: float, n: int, mi_nats: float) -> float:
    """``sqrt(2 sigma^2 I / n)`` for a sigma-sub-Gaussian loss."""
    _positive(sub_gaussian_var, "sub_gaussian_var")
    _positive(n, "n")
    mi_nats = _nonneg(mi_nats, "mi_nats")
    return math.sqrt(2.0 * sub_gaussian_var * mi_nats / n)


def linreg_gen_bound(c_wstar: float, sigma_x_norm: float, noise_var: float, n: int,
                     mi_nats: float) -> float:
    """``2 (C(w*) ||Sigma_X|| + noise_var) sqrt(I / n)``."""
    c_wstar = _nonneg(c_wstar, "c_wstar")
    sigma_x_norm = _nonneg(sigma_x_norm, "sigma_x_norm")
    noise_var = _nonneg(noise_var, "noise_var")
    _positive(n, "n")
    mi_nats = _nonneg(mi_nats, "mi_nats")
    return 2.0 * (c_wstar * sigma_x_norm + noise_var) * math.sqrt(mi_nats / n)


def _erm_excess_distortion(d, n, noise_var):
    # d sigma'^2 / (n - d - 1): expected distortion when W-hat collapses onto w*
    return d * noise_var / (n - d - 1)


def rd_upper_rate(distortion: float, d: int, n: int, noise_var: float) -> float:
    """Upper bound on R(D) for the ERM solution, clamped at zero."""
    _check_regression_dims(d, n)
    noise_var = _positive(noise_var, "noise_var")
    if not distortion > 0:
        raise DomainError(f"distortion must be positive, got {distortion}")
    log_arg = _erm_excess_distortion(d, n, noise_var) / distortion
    return d / 2.0 * max(0.0, math.log(log_arg))


def dr_upper_distortion(rate_nats: float, d: int, n: int, noise_var: float) -> float:
    """Upper bound on D(R): ``d sigma'^2 / (n - d - 1) * exp(-2R/d)``."""
    _check_regression_dims(d, n)
    noise_var = _positive(noise_var, "noise_var")
    rate_nats = _nonneg(rate_nats, "rate_nats")
    return _erm_excess_distortion(d, n, noise_var) * math.exp(-2.0 * rate_nats / d)


def tradeoff_bound(rate_nats: float, inputs: BoundInputs) -> float:
    """Generalization term plus distortion term at the same rate."""
    gen = linreg_gen_bound(inputs.c_wstar, inputs.sigma_x_norm, inputs.noise_var,
                           inputs.n, rate_nats)
    return gen + dr_upper_distortion(rate_nats, inputs.d, inputs.n, inputs.noise_var)


def oracle_alpha(distortion: float, d: int, n: int, noise_var: float) -> float:
    """Mixing weight ``n D / (d sigma'^2)`` of the oracle channel.

    Raises :class:`DomainError` unless ``0 < D <= d sigma'^2 / n``. Values
    within a relative 1e-12 of the upper edge are snapped to exactly 1.
    """
    if int(d) != d or d < 1 or int(n) != n or n < 1:
        raise ParameterError(f"d and n must be positive integers, got d={d}, n={n}")
    noise_var = _positive(noise_var, "noise_var")
    if not (distortion > 0 and math.isfinite(distortion)):
        raise DomainError(f"distortion must be positive, got {distortion}")
    alpha = n * distortion / (d * noise_var)
    if alpha > 1.0 + _EDGE_RTOL:
        raise DomainError(
            f"distortion {distortion} exceeds d*noise_var/n = {d * noise_var / n}"
        )
    return min(alpha, 1.0)


def oracle_rate(distortion: float, d: int, n: int, noise_var: float) -> float:
    """Mutual information of the oracle channel on the Gaussian surrogate of W.

    ``(d/2) ln(d sigma'^2 / ((n-d-1) D) - n/(n-d-1) + 1)``, evaluated as
    ``(d/2) log1p(n (1 - alpha) / (alpha (n - d - 1)))`` so that the edge
    ``alpha = 1`` gives exactly zero.
    """
    _check_regression_dims(d, n)
    alpha = oracle_alpha(distortion, d, n, noise_var)
    return d / 2.0 * math.log1p(n * (1.0 - alpha) / (alpha * (n - d - 1)))
