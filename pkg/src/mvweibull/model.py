"""Multivariate Weibull survival model with a positive-stable (Gumbel-type) dependence.

The joint survival function of ``d`` event times is

    S(x) = exp(-w ** alpha),   w = sum_k u_k,   u_k = (x_k / scale_k) ** (shape_k / alpha)

with ``0 < alpha <= 1``. ``alpha == 1`` gives independent Weibull margins and
every margin is Weibull(shape_k, scale_k) for any ``alpha``.

Dimensions are indexed from 0 throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError

__all__ = [
    "DomainError",
    "DimensionParams",
    "ModelParams",
    "joint_survival",
    "log_joint_survival",
    "marginal_survival",
    "marginal_hazard",
    "survival_partial",
    "log_survival_partial",
    "log_sub_density",
    "dependence_polynomial",
    "marginal_moment",
    "product_moment",
    "pearson_correlation",
    "correlation_matrix",
]


@dataclass(frozen=True)
class DimensionParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise DomainError(f"shape must be positive and finite, got {self.shape!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"scale must be positive and finite, got {self.scale!r}")


@dataclass(frozen=True)
class ModelParams:
    """Dependence parameter plus one (shape, scale) pair per dimension."""

    alpha: float
    dims: tuple[DimensionParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if len(self.dims) < 2:
            raise DomainError(f"need at least 2 dimensions, got {len(self.dims)}")

    @classmethod
    def from_arrays(cls, alpha: float, shapes: Iterable[float], scales: Iterable[float]) -> "ModelParams":
        shapes, scales = list(shapes), list(scales)
        if len(shapes) != len(scales):
            raise DomainError("shapes and scales differ in length")
        return cls(float(alpha), tuple(DimensionParams(float(g), float(s)) for g, s in zip(shapes, scales)))

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def shapes(self) -> np.ndarray:
        return np.array([p.shape for p in self.dims])

    @property
    def scales(self) -> np.ndarray:
        return np.array([p.scale for p in self.dims])

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "shapes": self.shapes.tolist(), "scales": self.scales.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls.from_arrays(data["alpha"], data["shapes"], data["scales"])


def _check_times(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise DomainError(f"expected {d} coordinates per time point, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("event times must be finite and strictly positive")
    return x


def _check_dim(params: ModelParams, k: int) -> None:
    if not 0 <= k < params.d:
        raise DomainError(f"dimension index {k} out of range for d={params.d}")


def _log_u(alpha, shapes, log_scales, log_x):
    return (shapes / alpha) * (log_x - log_scales)


def log_joint_survival(params: ModelParams, x) -> np.ndarray | float:
    """Log of the joint survival function; ``x`` has shape ``(d,)`` or ``(n, d)``."""
    x = _check_times(x, params.d)
    log_u = _log_u(params.alpha, params.shapes, np.log(params.scales), np.log(x))
    log_w = logsumexp(log_u, axis=-1)
    out = -np.exp(params.alpha * log_w)
    return float(out) if np.ndim(out) == 0 else out


def joint_survival(params: ModelParams, x) -> np.ndarray | float:
    """Joint survival probability P(X_1 > x_1, ..., X_d > x_d)."""
    return np.exp(log_joint_survival(params, x))


def marginal_survival(params: ModelParams, k: int, t):
    _check_dim(params, k)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    dim = params.dims[k]
    return np.exp(-((t / dim.scale) ** dim.shape))


def marginal_hazard(params: ModelParams, k: int, t):
    """Weibull hazard ``shape / scale**shape * t**(shape - 1)`` of dimension ``k``."""
    _check_dim(params, k)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("hazard is only defined for t > 0")
    dim = params.dims[k]
    return dim.shape / dim.scale**dim.shape * t ** (dim.shape - 1.0)


def dependence_polynomial(m: int, alpha: float) -> np.ndarray:
    """Coefficients ``c[0..m]`` of Q_m with ``(-1)^m d^m/dw^m exp(-w^a) = exp(-v) w^-m Q_m(v)``, ``v = w^a``.

    Built from Q_0 = 1 and Q_{m+1}(v) = (a v + m) Q_m(v) - a v Q_m'(v). All
    coefficients are nonnegative for ``0 < a <= 1``.
    """
    a = alpha
    if m == 0:
        return np.array([1.0])
    if m == 1:
        return np.array([0.0, a])
    if m == 2:
        return np.array([0.0, a * (1 - a), a * a])
    if m == 3:
        return np.array([0.0, a * (1 - a) * (2 - a), 3 * a * a * (1 - a), a**3])
    c = dependence_polynomial(3, alpha)
    for order in range(3, m):
        nxt = np.zeros(order + 2)
        j = np.arange(order + 1)
        nxt[1:] += a * c
        nxt[: order + 1] += (order - a * j) * c
        c = nxt
    return c


def _dependence_polynomial_recursive(m: int, alpha: float) -> np.ndarray:
    c = np.array([1.0])
    for order in range(m):
        nxt = np.zeros(order + 2)
        j = np.arange(order + 1)
        nxt[1:] += alpha * c
        nxt[: order + 1] += (order - alpha * j) * c
        c = nxt
    return c


def log_sub_density(alpha: float, shapes, log_scales, log_x, observed) -> np.ndarray:
    """Vectorised log of ``(-1)^|A| d^|A| S / dx_A`` for a fixed observed subset ``A``.

    ``log_scales`` and ``log_x`` broadcast to ``(n, d)``; ``observed`` is a
    boolean mask of length ``d``. An empty mask gives ``log S``.
    """
    observed = np.asarray(observed, dtype=bool)
    shapes = np.asarray(shapes, dtype=float)
    log_u = _log_u(alpha, shapes, log_scales, log_x)
    log_w = logsumexp(log_u, axis=-1)
    log_v = alpha * log_w
    out = -np.exp(log_v)
    m = int(observed.sum())
    if m == 0:
        return out
    coefs = dependence_polynomial(m, alpha)
    j = np.nonzero(coefs > 0)[0]
    log_q = logsumexp(np.log(coefs[j]) + np.multiply.outer(log_v, j.astype(float)), axis=-1)
    jac = np.log(shapes[observed] / alpha) + log_u[..., observed] - np.broadcast_to(log_x, log_u.shape)[..., observed]
    return out - m * log_w + log_q + jac.sum(axis=-1)


def _mask(observed: Iterable[int] | np.ndarray, d: int) -> np.ndarray:
    observed = np.asarray(observed)
    if observed.dtype == bool:
        if observed.shape != (d,):
            raise DomainError(f"observed mask must have length {d}")
        return observed
    mask = np.zeros(d, dtype=bool)
    for k in observed.ravel():
        if not 0 <= int(k) < d:
            raise DomainError(f"dimension index {k} out of range for d={d}")
        mask[int(k)] = True
    return mask


def log_survival_partial(params: ModelParams, x, observed) -> np.ndarray | float:
    x = _check_times(x, params.d)
    mask = _mask(observed, params.d)
    if not mask.any():
        raise DomainError("observed set is empty; use joint_survival for fully censored points")
    out = log_sub_density(params.alpha, params.shapes, np.log(params.scales), np.log(x), mask)
    return float(out) if np.ndim(out) == 0 else out


def survival_partial(params: ModelParams, x, observed) -> np.ndarray | float:
    """Signed mixed partial ``(-1)^|A| d^|A| S / prod_{k in A} dx_k`` at ``x``.

    ``observed`` is either a collection of dimension indices or a boolean
    mask. With every dimension observed this is the joint density.
    """
    return np.exp(log_survival_partial(params, x, observed))


def marginal_moment(params: ModelParams, k: int, s: float) -> float:
    _check_dim(params, k)
    dim = params.dims[k]
    return float(np.exp(s * np.log(dim.scale) + gammaln(1.0 + s / dim.shape)))


def _log_product_moment(params: ModelParams, i: int, j: int, s: float, t: float) -> float:
    a = params.alpha
    gi, gj = params.dims[i].shape, params.dims[j].shape
    return (
        s * np.log(params.dims[i].scale)
        + t * np.log(params.dims[j].scale)
        + gammaln(1.0 + s * a / gi)
        + gammaln(1.0 + t * a / gj)
        + gammaln(1.0 + s / gi + t / gj)
        - gammaln(1.0 + s * a / gi + t * a / gj)
    )


def product_moment(params: ModelParams, i: int, j: int, s: float = 1.0, t: float = 1.0) -> float:
    """E[X_i^s X_j^t] from the positive-stable mixture representation."""
    _check_dim(params, i)
    _check_dim(params, j)
    if i == j:
        raise DomainError("product_moment needs two distinct dimensions")
    if s < 0 or t < 0:
        raise DomainError("moment orders must be nonnegative")
    return float(np.exp(_log_product_moment(params, i, j, s, t)))


def pearson_correlation(params: ModelParams, i: int, j: int) -> float:
    _check_dim(params, i)
    _check_dim(params, j)
    if i == j:
        raise DomainError("pearson_correlation needs two distinct dimensions")
    if params.alpha == 1.0:
        return 0.0
    mi, mj = marginal_moment(params, i, 1), marginal_moment(params, j, 1)
    vi = marginal_moment(params, i, 2) - mi * mi
    vj = marginal_moment(params, j, 2) - mj * mj
    cov = product_moment(params, i, j, 1, 1) - mi * mj
    return cov / np.sqrt(vi * vj)


def correlation_matrix(params: ModelParams) -> np.ndarray:
    d = params.d
    out = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            out[i, j] = out[j, i] = pearson_correlation(params, i, j)
    return out

