"""Censoring patterns, covariate-dependent scales and the censored log-likelihood.

Each subject contributes exactly one term: the signed mixed partial of the
joint survival function over the dimensions whose event was observed, taken
at the observed times with censored coordinates held at the follow-up cutoff
``t_c``. Subjects with no observed event contribute ``log S(t_c, ..., t_c)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError, NonFiniteLikelihood
from .model import ModelParams, log_sub_density

DEFAULT_CENSOR_TIME = 1096.0


@dataclass(frozen=True, order=True)
class CensoringPattern:
    """The subset of dimensions whose event occurred.

    Cases are numbered like the classic three-event table: the all-observed
    pattern first, then observed subsets by increasing size, and the fully
    censored pattern last. For ``d = 3`` that is
    ``{0,1,2}, {0}, {1}, {2}, {0,1}, {0,2}, {1,2}, {}`` for cases 1..8.
    """

    d: int
    observed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "observed", frozenset(int(k) for k in self.observed))
        if any(not 0 <= k < self.d for k in self.observed):
            raise DomainError(f"pattern {sorted(self.observed)} out of range for d={self.d}")

    @classmethod
    def all_patterns(cls, d: int) -> list["CensoringPattern"]:
        out = [cls(d, frozenset(range(d)))]
        for size in range(1, d):
            out.extend(cls(d, frozenset(c)) for c in itertools.combinations(range(d), size))
        out.append(cls(d, frozenset()))
        return out

    @classmethod
    def from_label(cls, label: str, d: int) -> "CensoringPattern":
        if label == "None":
            return cls(d)
        return cls(d, frozenset(int(tok.strip()[1:]) - 1 for tok in label.split(",")))

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.d, dtype=bool)
        m[list(self.observed)] = True
        return m

    @property
    def case_number(self) -> int:
        return CensoringPattern.all_patterns(self.d).index(self) + 1

    @property
    def case_indices(self) -> tuple[int, ...]:
        """One-hot indicator over the ``2^d - 1`` patterns with at least one event."""
        n = 2**self.d - 1
        out = [0] * n
        if self.observed:
            out[self.case_number - 1] = 1
        return tuple(out)

    @property
    def label(self) -> str:
        if not self.observed:
            return "None"
        return ",".join(f"E{k + 1}" for k in sorted(self.observed))

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class Observation:
    times: tuple[float, ...]
    occurred: tuple[bool, ...]
    covariates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "occurred", tuple(bool(e) for e in self.occurred))
        if len(self.times) != len(self.occurred):
            raise DataError("times and occurred flags differ in length")


@dataclass
class Cohort:
    """Column-oriented dataset: ``times`` and ``occurred`` are ``(n, d)`` arrays."""

    times: np.ndarray
    occurred: np.ndarray
    covariates: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 2:
            raise DataError(f"times must be a 2-D (n, d) array, got shape {self.times.shape}")
        self.occurred = np.asarray(self.occurred, dtype=bool).reshape(self.times.shape)
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}
        for name, col in self.covariates.items():
            if col.shape != (self.n,):
                raise DataError(f"covariate {name!r} has {col.shape[0]} values for {self.n} rows")

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def d(self) -> int:
        return self.times.shape[1]

    def __len__(self):
        return self.n

    def __iter__(self) -> Iterator[Observation]:
        names = list(self.covariates)
        for i in range(self.n):
            yield Observation(
                tuple(self.times[i]),
                tuple(self.occurred[i]),
                {name: float(self.covariates[name][i]) for name in names},
            )

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], d: int | None = None) -> "Cohort":
        observations = list(observations)
        if not observations:
            if d is None:
                raise DataError("cannot infer dimension of an empty dataset")
            return cls(np.empty((0, d)), np.empty((0, d), dtype=bool))
        names = list(observations[0].covariates)
        return cls(
            np.array([o.times for o in observations]),
            np.array([o.occurred for o in observations]),
            {name: np.array([o.covariates[name] for o in observations]) for name in names},
        )

    def take(self, index) -> "Cohort":
        return Cohort(self.times[index], self.occurred[index], {k: v[index] for k, v in self.covariates.items()})

    def scaled(self, factor: float) -> "Cohort":
        return Cohort(self.times * factor, self.occurred.copy(), dict(self.covariates))


def pattern_of(obs: Observation) -> CensoringPattern:
    return CensoringPattern(len(obs.occurred), frozenset(k for k, e in enumerate(obs.occurred) if e))


def pattern_histogram(cohort: Cohort) -> dict[str, int]:
    """Counts per censoring pattern, in case order, keyed by pattern label."""
    codes = cohort.occurred @ (1 << np.arange(cohort.d))
    counts = np.bincount(codes, minlength=2**cohort.d)
    out = {}
    for pat in CensoringPattern.all_patterns(cohort.d):
        code = sum(1 << k for k in pat.observed)
        out[pat.label] = int(counts[code])
    return out


@dataclass(frozen=True)
class RegressionSpec:
    """Covariate names entering ``log scale_k`` for each dimension, intercept first."""

    covariates: tuple[tuple[str, ...], ...]
    intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(tuple(c) for c in self.covariates))

    @classmethod
    def intercept_only(cls, d: int) -> "RegressionSpec":
        return cls(tuple(() for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.covariates)

    @property
    def is_intercept_only(self) -> bool:
        return self.intercept and not any(self.covariates)

    def n_coef(self, k: int) -> int:
        return len(self.covariates[k]) + int(self.intercept)

    def coef_names(self, k: int) -> list[str]:
        return (["intercept"] if self.intercept else []) + list(self.covariates[k])

    def all_covariates(self) -> list[str]:
        seen = {}
        for names in self.covariates:
            for name in names:
                seen.setdefault(name, None)
        return list(seen)

    def design_matrix(self, k: int, cohort: Cohort) -> np.ndarray:
        cols = [np.ones(cohort.n)] if self.intercept else []
        for name in self.covariates[k]:
            if name not in cohort.covariates:
                raise DataError(f"covariate {name!r} (dimension {k + 1}) missing from dataset")
            cols.append(cohort.covariates[name])
        if not cols:
            return np.zeros((cohort.n, 0))
        return np.column_stack(cols)

    def to_dict(self) -> dict:
        return {"intercept": self.intercept, "covariates": [list(c) for c in self.covariates]}

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionSpec":
        return cls(tuple(tuple(c) for c in data["covariates"]), bool(data.get("intercept", True)))


@dataclass(frozen=True)
class RegressionParams:
    alpha: float
    shapes: tuple[float, ...]
    coefs: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(float(g) for g in self.shapes))
        object.__setattr__(self, "coefs", tuple(np.atleast_1d(np.asarray(b, dtype=float)) for b in self.coefs))
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if any(not (np.isfinite(g) and g > 0) for g in self.shapes):
            raise DomainError(f"shapes must be positive, got {self.shapes}")
        if len(self.coefs) != len(self.shapes):
            raise DomainError("need one coefficient vector per dimension")
        if any(not np.all(np.isfinite(b)) for b in self.coefs):
            raise DomainError("regression coefficients must be finite")

    @property
    def d(self) -> int:
        return len(self.shapes)

    @classmethod
    def from_model_params(cls, params: ModelParams) -> "RegressionParams":
        return cls(params.alpha, tuple(params.shapes), tuple(np.array([np.log(s)]) for s in params.scales))

    def to_model_params(self) -> ModelParams:
        if any(b.shape != (1,) for b in self.coefs):
            raise DomainError("only intercept-only regression parameters map to constant scales")
        return ModelParams.from_arrays(self.alpha, self.shapes, [math.exp(b[0]) for b in self.coefs])

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "shapes": list(self.shapes), "coefs": [b.tolist() for b in self.coefs]}

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionParams":
        return cls(data["alpha"], tuple(data["shapes"]), tuple(np.asarray(b) for b in data["coefs"]))


def _check_consistent(spec: RegressionSpec, params: RegressionParams) -> None:
    if spec.d != params.d:
        raise DomainError(f"spec has {spec.d} dimensions, parameters have {params.d}")
    for k in range(spec.d):
        if params.coefs[k].shape != (spec.n_coef(k),):
            raise DomainError(
                f"dimension {k + 1}: expected {spec.n_coef(k)} coefficients, got {params.coefs[k].shape[0]}"
            )


def resolve_scales(spec: RegressionSpec, params: RegressionParams, obs: Observation, index: int | None = None) -> np.ndarray:
    """Per-dimension scale ``exp(beta_k . (1, covariates...))`` for one subject."""
    _check_consistent(spec, params)
    out = np.empty(spec.d)
    for k in range(spec.d):
        row = [1.0] if spec.intercept else []
        for name in spec.covariates[k]:
            if name not in obs.covariates:
                where = "" if index is None else f" in observation {index}"
                raise DataError(f"missing covariate {name!r}{where}")
            row.append(float(obs.covariates[name]))
        out[k] = math.exp(float(np.dot(params.coefs[k], row))) if row else 1.0
    return out


def observation_loglik(
    params: RegressionParams,
    spec: RegressionSpec,
    obs: Observation,
    t_c: float = DEFAULT_CENSOR_TIME,
    index: int | None = None,
) -> float:
    scales = resolve_scales(spec, params, obs, index)
    occurred = np.asarray(obs.occurred, dtype=bool)
    times = np.where(occurred, np.asarray(obs.times, dtype=float), t_c)
    if np.any(times <= 0):
        raise DomainError(f"non-positive event time in observation {index if index is not None else ''}".rstrip())
    value = float(log_sub_density(params.alpha, np.asarray(params.shapes), np.log(scales), np.log(times), occurred))
    if not math.isfinite(value):
        raise NonFiniteLikelihood([index if index is not None else 0])
    return value


class LogLikelihood:
    """Total log-likelihood of a fixed cohort, precompiled for repeated evaluation.

    Rows are grouped by censoring pattern once so each call is a handful of
    vectorised array operations. The per-row terms are summed with
    ``math.fsum`` so the total does not depend on row order.
    """

    def __init__(self, cohort: Cohort, spec: RegressionSpec, t_c: float = DEFAULT_CENSOR_TIME):
        if spec.d != cohort.d:
            raise DataError(f"spec has {spec.d} dimensions, dataset has {cohort.d}")
        self.spec = spec
        self.t_c = float(t_c)
        self.n = cohort.n
        self.designs = [spec.design_matrix(k, cohort) for k in range(spec.d)]
        times = np.where(cohort.occurred, cohort.times, self.t_c)
        if np.any(times <= 0):
            bad = np.nonzero(np.any(times <= 0, axis=1))[0]
            raise DataError(f"non-positive event times in observations {bad[:10].tolist()}")
        self.log_x = np.log(times)
        codes = cohort.occurred @ (1 << np.arange(cohort.d))
        self.groups = []
        for code in np.unique(codes):
            rows = np.nonzero(codes == code)[0]
            mask = np.array([(int(code) >> k) & 1 for k in range(cohort.d)], dtype=bool)
            self.groups.append((rows, mask))

    def log_scales(self, params: RegressionParams) -> np.ndarray:
        cols = [X @ b if X.shape[1] else np.zeros(self.n) for X, b in zip(self.designs, params.coefs)]
        return np.column_stack(cols) if cols else np.zeros((self.n, 0))

    def terms(self, params: RegressionParams) -> np.ndarray:
        _check_consistent(self.spec, params)
        log_scales = self.log_scales(params)
        shapes = np.asarray(params.shapes)
        out = np.empty(self.n)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for rows, mask in self.groups:
                out[rows] = log_sub_density(params.alpha, shapes, log_scales[rows], self.log_x[rows], mask)
        return out

    def __call__(self, params: RegressionParams, strict: bool = False) -> float:
        terms = self.terms(params)
        finite = np.isfinite(terms)
        if not finite.all():
            if strict:
                raise NonFiniteLikelihood(np.nonzero(~finite)[0])
            return -math.inf
        return math.fsum(terms)


def total_loglik(
    params: RegressionParams | ModelParams,
    spec: RegressionSpec | None,
    dataset: Cohort | Iterable[Observation],
    t_c: float = DEFAULT_CENSOR_TIME,
    strict: bool = False,
) -> float:
    """Sum of per-subject log-likelihood terms.

    ``params`` may be constant-scale :class:`ModelParams`, in which case the
    spec defaults to intercept-only. With ``strict=True`` a non-finite term
    raises :class:`NonFiniteLikelihood` naming the offending rows; otherwise
    the total is ``-inf``.
    """
    if isinstance(params, ModelParams):
        params = RegressionParams.from_model_params(params)
    if spec is None:
        spec = RegressionSpec.intercept_only(params.d)
    if not isinstance(dataset, Cohort):
        dataset = Cohort.from_observations(list(dataset), d=params.d)
    if dataset.n == 0:
        return 0.0
    return LogLikelihood(dataset, spec, t_c)(params, strict=strict)
