import mpmath as mp
import numpy as np
import pytest

from mvweibull import ModelParams
from mvweibull.presets import RECIDIVISM_PARAMS

_ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title}" + (f" -- {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def recidivism():
    return RECIDIVISM_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)


def mp_survival(alpha, shapes, scales):
    """Joint survival transcribed in mpmath, independent of the numpy code path."""
    a = mp.mpf(alpha)
    g = [mp.mpf(v) for v in shapes]
    lam = [mp.mpf(v) for v in scales]

    def S(*x):
        w = mp.fsum((x[k] / lam[k]) ** (g[k] / a) for k in range(len(x)))
        return mp.exp(-(w**a))

    return S


def mp_mixed_partial(params: ModelParams, x, observed, dps=40):
    """(-1)^|A| d^|A| S / dx_A by arbitrary-precision finite differences."""
    with mp.workdps(dps):
        S = mp_survival(params.alpha, params.shapes, params.scales)
        order = tuple(1 if k in observed else 0 for k in range(params.d))
        val = mp.diff(S, tuple(mp.mpf(float(v)) for v in x), order)
        return float((-1) ** len(observed) * val)


def point_fit(params, spec=None, n_obs=1000):
    """A FitResult at given parameters with zero covariance (for report plumbing)."""
    from mvweibull import FitResult, RegressionParams, RegressionSpec
    from mvweibull.estimation import _natural_vector, parameter_names

    if isinstance(params, ModelParams):
        params = RegressionParams.from_model_params(params)
    spec = spec or RegressionSpec.intercept_only(params.d)
    est, _ = _natural_vector(params, spec)
    p = est.size
    zeros = np.zeros((p, p))
    return FitResult(
        params=params, spec=spec, names=parameter_names(spec), estimates=est,
        covariance=zeros, cov_unconstrained=zeros, std_errors=np.zeros(p),
        ci_lower=est.copy(), ci_upper=est.copy(), ci_level=0.95, loglik=0.0,
        loglik_initial=0.0, iterations=0, converged=True, grad_norm=0.0,
        n_obs=n_obs, t_c=1096.0,
    )
