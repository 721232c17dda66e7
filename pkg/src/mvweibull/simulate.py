"""Exact sampling from the multivariate Weibull model.

Uses the frailty (Marshall-Olkin) representation: with ``W`` positive stable,
``E[exp(-sW)] = exp(-s**alpha)``, and independent unit exponentials ``E_k``,

    X_k = scale_k * (E_k / W) ** (alpha / shape_k)

has joint survival ``exp(-(sum_k u_k) ** alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainError
from .likelihood import DEFAULT_CENSOR_TIME, Cohort, RegressionParams, RegressionSpec, pattern_histogram
from .model import ModelParams

# rows per independent RNG substream; fixes the stream layout for a given seed
CHUNK_SIZE = 8192


def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """Positive stable variates with Laplace transform ``exp(-s**alpha)``.

    Kanter's construction from ``U ~ Uniform(0, pi)`` and ``E ~ Exp(1)``:

        W = (A(U) / E) ** ((1 - alpha) / alpha)
        A(u) = sin(alpha u) ** (alpha / (1 - alpha)) * sin((1 - alpha) u) / sin(u) ** (1 / (1 - alpha))

    ``alpha == 1`` is the degenerate law at 1.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if alpha == 1.0:
        return 1.0 if size is None else np.ones(size)
    u = rng.uniform(0.0, np.pi, size)
    e = rng.standard_exponential(size)
    log_a = (
        (alpha / (1.0 - alpha)) * np.log(np.sin(alpha * u))
        + np.log(np.sin((1.0 - alpha) * u))
        - np.log(np.sin(u)) / (1.0 - alpha)
    )
    return np.exp((1.0 - alpha) / alpha * (log_a - np.log(e)))


def _event_times(alpha, shapes, log_scales, rng, n):
    d = len(shapes)
    w = sample_positive_stable(alpha, rng, n)
    e = rng.standard_exponential((n, d))
    return np.exp(log_scales + (alpha / np.asarray(shapes)) * (np.log(e) - np.log(np.atleast_1d(w))[:, None]))


def sample_event_times(params: ModelParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Latent event times; shape ``(d,)`` when ``size`` is None, else ``(size, d)``."""
    n = 1 if size is None else int(size)
    x = _event_times(params.alpha, params.shapes, np.log(params.scales), rng, n)
    return x[0] if size is None else x


@dataclass(frozen=True)
class CovariateDist:
    """Marginal law of one simulated covariate.

    ``kind`` is ``"bernoulli"`` (``p``), ``"normal"`` (``mean``, ``sd``),
    ``"constant"`` (``value``) or ``"resample"`` (``values``, drawn with
    replacement).
    """

    kind: str
    p: float = 0.5
    mean: float = 0.0
    sd: float = 1.0
    value: float = 0.0
    values: tuple[float, ...] = ()

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "bernoulli":
            return (rng.uniform(size=n) < self.p).astype(float)
        if self.kind == "normal":
            return rng.normal(self.mean, self.sd, n)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "resample":
            if not self.values:
                raise DomainError("resample covariate needs at least one value")
            return rng.choice(np.asarray(self.values, dtype=float), n)
        raise DomainError(f"unknown covariate distribution {self.kind!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "CovariateDist":
        data = dict(data)
        kind = data.pop("dist", data.pop("kind", None))
        if "values" in data:
            data["values"] = tuple(float(v) for v in data["values"])
        return cls(kind, **data)


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams | RegressionParams
    n: int
    t_c: float = DEFAULT_CENSOR_TIME
    seed: int = 0
    spec: RegressionSpec | None = None
    covariates: Mapping[str, CovariateDist] = field(default_factory=dict)
    # event times below this are recorded at it; 1.0 mimics day-granular records
    min_time: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if not self.t_c > 0:
            raise DomainError("censoring time must be positive")
        if not self.min_time >= 0:
            raise DomainError("min_time must be nonnegative")


def generate_dataset(config: SimConfig) -> tuple[Cohort, dict[str, int]]:
    """Simulate a right-censored competing-risks cohort plus its pattern histogram.

    Rows are generated in fixed chunks of ``CHUNK_SIZE``, each from its own
    child of ``SeedSequence(seed)``, so the output for a given seed does not
    depend on how the chunks are scheduled. Event times are floored at
    ``config.min_time``; the default 0 keeps the exact continuous law, while
    1 mirrors the day-1 recording of same-day events in real cohorts.
    """
    params = config.params
    if isinstance(params, ModelParams):
        params = RegressionParams.from_model_params(params)
    spec = config.spec or RegressionSpec.intercept_only(params.d)
    names = spec.all_covariates()
    missing = [name for name in names if name not in config.covariates]
    if missing:
        raise DomainError(f"no distribution given for covariates {missing}")

    n_chunks = -(-config.n // CHUNK_SIZE)
    seeds = np.random.SeedSequence(config.seed).spawn(n_chunks)
    times, covs = [], {name: [] for name in names}
    for c, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        m = min(CHUNK_SIZE, config.n - c * CHUNK_SIZE)
        # always draw a full chunk so a smaller n yields a prefix of a larger one
        chunk_cov = {name: config.covariates[name].draw(rng, CHUNK_SIZE) for name in names}
        part = Cohort(np.ones((CHUNK_SIZE, params.d)), np.zeros((CHUNK_SIZE, params.d)), chunk_cov)
        log_scales = np.column_stack([spec.design_matrix(k, part) @ params.coefs[k] for k in range(params.d)])
        times.append(_event_times(params.alpha, params.shapes, log_scales, rng, CHUNK_SIZE)[:m])
        for name in names:
            covs[name].append(chunk_cov[name][:m])

    latent = np.maximum(np.vstack(times), config.min_time)
    occurred = latent <= config.t_c
    observed = np.where(occurred, latent, config.t_c)
    cohort = Cohort(observed, occurred, {name: np.concatenate(v) for name, v in covs.items()})
    return cohort, pattern_histogram(cohort)
