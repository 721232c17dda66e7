"""Post-fit quantities: hazard curves, hazard ratios and correlation intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError
from .model import ModelParams, pearson_correlation


def _z(level: float) -> float:
    if not 0 < level < 1:
        raise DomainError("confidence level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def _check_cov(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise DomainError("expected a finite 2x2 covariance matrix")
    if not np.allclose(cov, cov.T, rtol=1e-8, atol=0.0):
        raise DomainError("covariance matrix is not symmetric")
    scale = max(np.abs(cov).max(), np.finfo(float).tiny)
    if np.linalg.eigvalsh(cov)[0] < -1e-10 * scale:
        raise DomainError("covariance matrix is not positive semidefinite")
    return cov


@dataclass(frozen=True)
class HazardCurve:
    """Weibull hazard ``h(t) = coefficient / t**exponent`` and its delta-method variance.

    ``Var[h(t)] = (a - b*log(t) + q*log(t)**2) / t**(2*exponent)``.
    """

    coefficient: float
    exponent: float
    a: float
    b: float
    q: float

    def hazard(self, t):
        return self.coefficient / np.asarray(t, dtype=float) ** self.exponent

    def variance(self, t):
        z = np.log(np.asarray(t, dtype=float))
        return (self.a - self.b * z + self.q * z * z) / np.exp(2.0 * self.exponent * z)

    def to_dict(self) -> dict:
        return {"coefficient": self.coefficient, "exponent": self.exponent, "a": self.a, "b": self.b, "q": self.q}


def hazard_curve(shape: float, scale: float, cov) -> HazardCurve:
    """Hazard curve of a Weibull(shape, scale) margin with uncertainty from ``cov``.

    ``cov`` is the 2x2 covariance of the (shape, scale) estimates on the
    natural scale. The gradient of h(t) is
    ``(h * (1/shape - log(scale) + log t), -h * shape / scale)``.
    """
    if not (shape > 0 and scale > 0):
        raise DomainError("shape and scale must be positive")
    cov = _check_cov(cov)
    c = shape / scale**shape
    k = 1.0 / shape - math.log(scale)
    r = shape / scale
    s_gg, s_gl, s_ll = cov[0, 0], cov[0, 1], cov[1, 1]
    c2 = c * c
    return HazardCurve(
        coefficient=c,
        exponent=1.0 - shape,
        a=c2 * (k * k * s_gg - 2.0 * r * k * s_gl + r * r * s_ll),
        b=-c2 * (2.0 * k * s_gg - 2.0 * r * s_gl),
        q=c2 * s_gg,
    )


@dataclass(frozen=True)
class HazardRatio:
    ratio: float
    lower: float
    upper: float
    level: float = 0.95

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "lower": self.lower, "upper": self.upper, "level": self.level}


def hazard_ratio(shape: float, coef: float, delta: float = 1.0, cov=None, level: float = 0.95) -> HazardRatio:
    """Hazard ratio for a change ``delta`` in a covariate acting on ``log scale``.

    Under ``scale = exp(x . beta)`` the Weibull hazard is proportional to
    ``exp(-shape * x . beta)``, so the ratio is ``exp(-shape * coef * delta)``.
    The interval is built on the log scale from the first-order variance
    ``delta^2 (coef^2 s_gg + 2 shape coef s_gb + shape^2 s_bb)`` and is
    always returned ordered (lower, upper).
    """
    if not (shape > 0 and math.isfinite(coef) and math.isfinite(delta)):
        raise DomainError("need positive shape and finite coefficient/delta")
    log_hr = -shape * coef * delta
    ratio = math.exp(log_hr)
    if cov is None:
        return HazardRatio(ratio, ratio, ratio, level)
    cov = _check_cov(cov)
    var = delta**2 * (coef**2 * cov[0, 0] + 2.0 * shape * coef * cov[0, 1] + shape**2 * cov[1, 1])
    half = _z(level) * math.sqrt(max(var, 0.0))
    return HazardRatio(ratio, math.exp(log_hr - half), math.exp(log_hr + half), level)


def fisher_z_interval(r: float, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 4:
        raise DomainError("Fisher z interval needs n >= 4")
    if not -1 < r < 1:
        raise DomainError("correlation must lie strictly inside (-1, 1)")
    z = math.atanh(r)
    half = _z(level) / math.sqrt(n - 3)
    return math.tanh(z - half), math.tanh(z + half)


def correlation_with_ci(params: ModelParams, i: int, j: int, n: int, level: float = 0.95) -> tuple[float, float, float]:
    """Model-implied Pearson correlation of ``X_i, X_j`` with a Fisher-z interval."""
    if n < 4:
        raise DomainError("Fisher z interval needs n >= 4")
    r = pearson_correlation(params, i, j)
    lo, hi = fisher_z_interval(r, n, level)
    return r, lo, hi
