"""Maximum-likelihood fitting with Wald inference.

Optimisation runs in an unconstrained coordinate system:

    alpha    -> logit(alpha)
    shape_k  -> log(shape_k)
    beta_k   -> beta_k          (the intercept is log(scale_k) in constant-scale mode)

The vector is laid out as ``[alpha, shape_1, beta_1..., shape_2, beta_2..., ...]``.
Reported estimates and covariances are on the natural scale (alpha, shapes,
scales for intercept-only fits; alpha, shapes and raw coefficients otherwise),
mapped from the unconstrained covariance with the delta method.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, stats
from scipy.special import expit

from .errors import DomainError, IdentifiabilityError, SingularHessianError
from .likelihood import DEFAULT_CENSOR_TIME, Cohort, LogLikelihood, RegressionParams, RegressionSpec
from .model import ModelParams

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class FitConfig:
    """Optimiser and inference settings.

    ``initial`` is ``"marginal"`` (independent univariate Weibull fits per
    dimension, alpha = 0.5) or explicit :class:`RegressionParams`.
    ``gtol`` applies to the max-abs gradient of the *mean* negative
    log-likelihood in unconstrained coordinates.
    """

    initial: str | RegressionParams = "marginal"
    initial_alpha: float = 0.5
    gtol: float = 1e-5
    max_iter: int = 1000
    fd_step: float = 1e-5
    hessian_step: float = 1e-4
    ci_level: float = 0.95
    t_c: float = DEFAULT_CENSOR_TIME

    def __post_init__(self):
        if not (self.gtol > 0 and self.fd_step > 0 and self.hessian_step > 0):
            raise DomainError("tolerances and step sizes must be positive")
        if not 0 < self.ci_level < 1:
            raise DomainError("ci_level must lie in (0, 1)")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")


def parameter_names(spec: RegressionSpec) -> list[str]:
    """Names of the natural-scale parameters in vector order."""
    names = ["alpha"]
    for k in range(spec.d):
        names.append(f"shape_{k + 1}")
        if spec.is_intercept_only:
            names.append(f"scale_{k + 1}")
        else:
            names.extend(f"beta_{k + 1}:{c}" for c in spec.coef_names(k))
    return names


def transform_to_unconstrained(params: RegressionParams | ModelParams) -> np.ndarray:
    """Map parameters to R^p. ``alpha == 1`` maps to ``+inf``."""
    if isinstance(params, ModelParams):
        params = RegressionParams.from_model_params(params)
    a = params.alpha
    out = [math.inf if a == 1.0 else math.log(a / (1.0 - a))]
    for g, b in zip(params.shapes, params.coefs):
        out.append(math.log(g))
        out.extend(b.tolist())
    return np.array(out)


def transform_from_unconstrained(z, spec: RegressionSpec) -> RegressionParams:
    z = np.asarray(z, dtype=float)
    expected = 1 + sum(1 + spec.n_coef(k) for k in range(spec.d))
    if z.shape != (expected,):
        raise DomainError(f"expected {expected} unconstrained coordinates, got {z.shape}")
    alpha = float(expit(z[0]))
    shapes, coefs, pos = [], [], 1
    for k in range(spec.d):
        shapes.append(math.exp(z[pos]))
        p = spec.n_coef(k)
        coefs.append(z[pos + 1 : pos + 1 + p].copy())
        pos += 1 + p
    return RegressionParams(alpha, tuple(shapes), tuple(coefs))


def _natural_vector(params: RegressionParams, spec: RegressionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Natural-scale estimates and the diagonal Jacobian d(natural)/d(unconstrained)."""
    a = params.alpha
    values, jac = [a], [a * (1.0 - a)]
    for g, b in zip(params.shapes, params.coefs):
        values.append(g)
        jac.append(g)
        if spec.is_intercept_only:
            lam = math.exp(b[0])
            values.append(lam)
            jac.append(lam)
        else:
            values.extend(b.tolist())
            jac.extend([1.0] * len(b))
    return np.array(values), np.array(jac)


def _steps(x, rel):
    return rel * np.maximum(np.abs(x), 1.0)


def numerical_gradient(f: Callable[[np.ndarray], float], x, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def numerical_hessian(f: Callable[[np.ndarray], float], x, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate steps ``step * max(|x_i|, 1)``."""
    x = np.asarray(x, dtype=float)
    p = x.size
    h = _steps(x, step)
    f0 = f(x)
    H = np.empty((p, p))
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(p)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def covariance_from_hessian(hessian) -> np.ndarray:
    """Invert the Hessian of a negative log-likelihood.

    Raises :class:`SingularHessianError` (with the condition number attached)
    when the matrix is not finite, not positive definite, or numerically
    singular.
    """
    H = np.asarray(hessian, dtype=float)
    if not np.all(np.isfinite(H)):
        raise SingularHessianError("Hessian has non-finite entries")
    H = 0.5 * (H + H.T)
    eig = np.linalg.eigvalsh(H)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    if eig[0] <= 0 or cond > 1e14:
        raise SingularHessianError("Hessian is not positive definite", cond)
    cov = np.linalg.inv(H)
    return 0.5 * (cov + cov.T)


def fit_univariate_weibull(times, events) -> tuple[float, float]:
    """Right-censored Weibull MLE ``(shape, scale)`` for one dimension."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(events, dtype=bool)
    n_events = d.sum()
    if n_events == 0:
        raise IdentifiabilityError("no observed events")
    log_t = np.log(t)

    def nll(z):
        a, b = z
        g = math.exp(a)
        y = log_t - b
        zz = np.exp(np.clip(g * y, None, 700))
        ll = np.sum(d * (a + g * y - log_t)) - zz.sum()
        grad_b = -g * n_events + g * zz.sum()
        grad_a = np.sum(d * (1.0 + g * y)) - np.sum(g * y * zz)
        return -ll, -np.array([grad_a, grad_b])

    z0 = np.array([0.0, math.log(t.sum() / n_events)])
    res = optimize.minimize(nll, z0, jac=True, method="BFGS")
    return math.exp(res.x[0]), math.exp(res.x[1])


def initial_params(cohort: Cohort, spec: RegressionSpec, config: FitConfig) -> RegressionParams:
    if isinstance(config.initial, RegressionParams):
        return config.initial
    if config.initial != "marginal":
        raise DomainError(f"unknown initial-value policy {config.initial!r}")
    shapes, coefs = [], []
    for k in range(cohort.d):
        times = np.where(cohort.occurred[:, k], cohort.times[:, k], config.t_c)
        g, lam = fit_univariate_weibull(times, cohort.occurred[:, k])
        shapes.append(g)
        b = np.zeros(spec.n_coef(k))
        if spec.intercept:
            b[0] = math.log(lam)
        coefs.append(b)
    return RegressionParams(config.initial_alpha, tuple(shapes), tuple(coefs))


@dataclass
class FitResult:
    params: RegressionParams
    spec: RegressionSpec
    names: list[str]
    estimates: np.ndarray
    covariance: np.ndarray
    cov_unconstrained: np.ndarray
    std_errors: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ci_level: float
    loglik: float
    loglik_initial: float
    iterations: int
    converged: bool
    grad_norm: float
    n_obs: int
    t_c: float
    at_boundary: bool = False
    messages: list[str] = field(default_factory=list)

    def model_params(self) -> ModelParams:
        return self.params.to_model_params()

    def index(self, name: str) -> int:
        return self.names.index(name)

    def cov_block(self, names) -> np.ndarray:
        idx = [self.index(n) for n in names]
        return self.covariance[np.ix_(idx, idx)]

    def to_dict(self) -> dict:
        def arr(x):
            return [None if not np.isfinite(v) else float(v) for v in np.ravel(x)]

        p = len(self.names)
        return {
            "kind": "mvweibull-fit",
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "names": list(self.names),
            "estimates": arr(self.estimates),
            "std_errors": arr(self.std_errors),
            "ci_lower": arr(self.ci_lower),
            "ci_upper": arr(self.ci_upper),
            "ci_level": self.ci_level,
            "covariance": [arr(row) for row in np.reshape(self.covariance, (p, p))],
            "cov_unconstrained": [arr(row) for row in np.reshape(self.cov_unconstrained, (p, p))],
            "loglik": self.loglik,
            "loglik_initial": self.loglik_initial,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "n_obs": self.n_obs,
            "t_c": self.t_c,
            "at_boundary": self.at_boundary,
            "messages": list(self.messages),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        def arr(x):
            return np.array([np.nan if v is None else v for v in x], dtype=float)

        def mat(x):
            return np.array([arr(row) for row in x]).reshape(len(x), len(x))

        return cls(
            params=RegressionParams.from_dict(data["params"]),
            spec=RegressionSpec.from_dict(data["spec"]),
            names=list(data["names"]),
            estimates=arr(data["estimates"]),
            covariance=mat(data["covariance"]),
            cov_unconstrained=mat(data["cov_unconstrained"]),
            std_errors=arr(data["std_errors"]),
            ci_lower=arr(data["ci_lower"]),
            ci_upper=arr(data["ci_upper"]),
            ci_level=data["ci_level"],
            loglik=data["loglik"],
            loglik_initial=data["loglik_initial"],
            iterations=data["iterations"],
            converged=data["converged"],
            grad_norm=data["grad_norm"],
            n_obs=data["n_obs"],
            t_c=data["t_c"],
            at_boundary=data.get("at_boundary", False),
            messages=list(data.get("messages", [])),
        )


def _wald(estimates, covariance, level, names):
    se = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    se[~np.isfinite(np.diag(covariance))] = np.nan
    z = stats.norm.ppf(0.5 + level / 2.0)
    lo, hi = estimates - z * se, estimates + z * se
    i = names.index("alpha")
    lo[i] = max(lo[i], np.finfo(float).tiny) if np.isfinite(lo[i]) else lo[i]
    hi[i] = min(hi[i], 1.0) if np.isfinite(hi[i]) else hi[i]
    return se, lo, hi


def fit(dataset: Cohort, spec: RegressionSpec | None = None, config: FitConfig | None = None) -> FitResult:
    """Maximise the censored log-likelihood.

    Parameters
    ----------
    dataset : Cohort
        Observed times (censored coordinates are replaced by ``config.t_c``).
    spec : RegressionSpec, optional
        Covariates on ``log scale_k``; intercept-only when omitted.
    config : FitConfig, optional

    Returns
    -------
    FitResult
        ``converged`` is true iff the max-abs gradient of the mean negative
        log-likelihood is below ``config.gtol`` at the returned point.
    """
    config = config or FitConfig()
    spec = spec or RegressionSpec.intercept_only(dataset.d)
    if dataset.n == 0:
        raise IdentifiabilityError("empty dataset")
    if spec.d != dataset.d:
        raise DomainError(f"spec has {spec.d} dimensions, dataset has {dataset.d}")
    empty = [k + 1 for k in range(dataset.d) if not dataset.occurred[:, k].any()]
    if empty:
        raise IdentifiabilityError(f"no observed events in dimension(s) {empty}; shape is not identifiable")

    loglik = LogLikelihood(dataset, spec, config.t_c)
    n = dataset.n

    def nll_total(z):
        try:
            value = loglik(transform_from_unconstrained(z, spec))
        except DomainError:
            return math.inf
        return -value if math.isfinite(value) else math.inf

    def objective(z):
        return nll_total(z) / n

    def gradient(z):
        g = numerical_gradient(objective, z, config.fd_step)
        if not np.all(np.isfinite(g)):
            g = np.where(np.isfinite(g), g, 0.0)
        return g

    z0 = transform_to_unconstrained(initial_params(dataset, spec, config))
    if not np.all(np.isfinite(z0)):
        raise DomainError("initial alpha must lie strictly inside (0, 1)")
    f0 = objective(z0)
    if not math.isfinite(f0):
        raise DomainError("log-likelihood is not finite at the initial point")

    messages = []
    iterations = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(
            objective, z0, jac=gradient, method="BFGS", options={"gtol": config.gtol, "maxiter": config.max_iter}
        )
        z, iterations = res.x, res.nit
        grad = gradient(z)
        if not np.max(np.abs(grad)) < config.gtol:
            # derivative-free restart out of a stalled line search
            log.info("BFGS stopped at gradient %.3g (%s); restarting", np.max(np.abs(grad)), res.message)
            messages.append(f"BFGS restart: {res.message}")
            nm = optimize.minimize(
                objective, z, method="Nelder-Mead",
                options={"maxiter": 200 * z.size, "xatol": 1e-8, "fatol": 1e-12},
            )
            res2 = optimize.minimize(
                objective, nm.x, jac=gradient, method="BFGS", options={"gtol": config.gtol, "maxiter": config.max_iter}
            )
            iterations += nm.nit + res2.nit
            if res2.fun <= res.fun:
                z = res2.x
            grad = gradient(z)

    f_hat = objective(z)
    if not f_hat <= f0:
        z, f_hat = z0, f0
        grad = gradient(z)
    grad_norm = float(np.max(np.abs(grad)))
    converged = bool(grad_norm < config.gtol)
    params = transform_from_unconstrained(z, spec)
    at_boundary = params.alpha > 1.0 - BOUNDARY_TOL
    if at_boundary:
        messages.append("alpha at independence boundary")

    names = parameter_names(spec)
    p = len(names)
    H = numerical_hessian(nll_total, z, config.hessian_step)
    cov_z = np.full((p, p), np.nan)
    try:
        cov_z = covariance_from_hessian(H)
    except SingularHessianError as exc:
        if params.alpha > 0.99:
            # alpha drifts to the boundary where its curvature vanishes; condition on it
            try:
                cov_z[1:, 1:] = covariance_from_hessian(H[1:, 1:])
                messages.append("alpha excluded from covariance (flat likelihood near independence)")
            except SingularHessianError as exc2:
                messages.append(str(exc2))
        else:
            messages.append(str(exc))

    estimates, jac = _natural_vector(params, spec)
    cov = jac[:, None] * cov_z * jac[None, :]
    se, lo, hi = _wald(estimates, cov, config.ci_level, names)
    return FitResult(
        params=params,
        spec=spec,
        names=names,
        estimates=estimates,
        covariance=cov,
        cov_unconstrained=cov_z,
        std_errors=se,
        ci_lower=lo,
        ci_upper=hi,
        ci_level=config.ci_level,
        loglik=-f_hat * n,
        loglik_initial=-f0 * n,
        iterations=int(iterations),
        converged=converged,
        grad_norm=grad_norm,
        n_obs=n,
        t_c=config.t_c,
        at_boundary=at_boundary,
        messages=messages,
    )
