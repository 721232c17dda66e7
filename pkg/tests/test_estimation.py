import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvweibull import (
    Cohort,
    DomainError,
    FitConfig,
    FitResult,
    IdentifiabilityError,
    ModelParams,
    RegressionParams,
    RegressionSpec,
    SingularHessianError,
    fit,
)
from mvweibull.estimation import (
    covariance_from_hessian,
    fit_univariate_weibull,
    numerical_hessian,
    parameter_names,
    transform_from_unconstrained,
    transform_to_unconstrained,
)
from mvweibull.simulate import CovariateDist, SimConfig, generate_dataset

TRUTH = ModelParams.from_arrays(0.475, [0.777, 0.804, 0.659], [9926.352, 2742.914, 1543.809])


@pytest.fixture(scope="module")
def fit20k():
    cohort, _ = generate_dataset(SimConfig(TRUTH, 20_000, seed=11))
    return cohort, fit(cohort)


# transforms -------------------------------------------------------------


def test_transform_origin():
    z = transform_to_unconstrained(ModelParams.from_arrays(0.5, [1.0, 1.0], [1.0, 1.0]))
    np.testing.assert_allclose(z, 0.0, atol=1e-15)


def test_transform_alpha_one_is_infinite():
    z = transform_to_unconstrained(ModelParams.from_arrays(1.0, [1.0, 2.0], [3.0, 4.0]))
    assert z[0] == math.inf


@settings(max_examples=200)
@given(
    st.floats(1e-3, 1 - 1e-3),
    st.lists(st.floats(0.05, 20.0), min_size=2, max_size=4),
    st.data(),
)
def test_transform_roundtrip(alpha, shapes, data):
    d = len(shapes)
    scales = data.draw(st.lists(st.floats(1e-2, 1e5), min_size=d, max_size=d))
    p = RegressionParams.from_model_params(ModelParams.from_arrays(alpha, shapes, scales))
    spec = RegressionSpec.intercept_only(d)
    back = transform_from_unconstrained(transform_to_unconstrained(p), spec)
    assert back.alpha == pytest.approx(alpha, rel=1e-12)
    np.testing.assert_allclose(back.shapes, shapes, rtol=1e-12)
    for c0, c1 in zip(p.coefs, back.coefs):
        np.testing.assert_allclose(c1, c0, rtol=1e-12, atol=1e-12)


def test_parameter_names():
    assert sorted(parameter_names(RegressionSpec.intercept_only(2))) == ["alpha", "scale_1", "scale_2", "shape_1", "shape_2"]
    names = parameter_names(RegressionSpec((("x",), ())))
    assert "beta_1:x" in names and "beta_2:intercept" in names


# numerical derivatives ----------------------------------------------------


def test_hessian_of_quadratic():
    A = np.array([[3.0, 0.4, -1.0], [0.4, 2.0, 0.3], [-1.0, 0.3, 5.0]])
    b = np.array([1.0, -2.0, 0.5])
    H = numerical_hessian(lambda x: 0.5 * x @ A @ x + b @ x, np.array([0.3, -0.7, 1.1]))
    np.testing.assert_allclose(H, A, atol=1e-6)


def test_covariance_from_singular_hessian():
    with pytest.raises(SingularHessianError):
        covariance_from_hessian(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularHessianError):
        covariance_from_hessian(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_univariate_standard_errors_match_observed_information():
    rng = np.random.default_rng(5)
    g, lam, tc = 0.8, 500.0, 1096.0
    x = lam * rng.weibull(g, 4000)
    d = x <= tc
    t = np.minimum(x, tc)
    g_hat, lam_hat = fit_univariate_weibull(t, d)

    def nll(z):
        a, b = z
        gg = math.exp(a)
        y = np.log(t) - b
        return -(np.sum(d * (a + gg * y - np.log(t))) - np.sum(np.exp(gg * y)))

    z = np.array([math.log(g_hat), math.log(lam_hat)])
    cov_num = covariance_from_hessian(numerical_hessian(nll, z))

    # analytic observed information in (log shape, log scale)
    y = np.log(t) - z[1]
    zz = np.exp(g_hat * y)
    hbb = -np.sum(g_hat**2 * zz)
    hab = np.sum(g_hat * zz * (1 + g_hat * y)) - g_hat * d.sum()
    haa = np.sum(d * g_hat * y) - np.sum(g_hat * y * zz * (1 + g_hat * y))
    cov_exact = np.linalg.inv(-np.array([[haa, hab], [hab, hbb]]))
    np.testing.assert_allclose(np.sqrt(np.diag(cov_num)), np.sqrt(np.diag(cov_exact)), rtol=0.01)
    assert abs(g_hat - g) < 4 * math.sqrt(cov_exact[0, 0]) * g


# fitting ----------------------------------------------------------------------


def test_recovery(fit20k):
    _, res = fit20k
    assert res.converged
    truth = {"alpha": TRUTH.alpha}
    for k in range(3):
        truth[f"shape_{k + 1}"] = TRUTH.shapes[k]
        truth[f"scale_{k + 1}"] = TRUTH.scales[k]
    z = (res.estimates - [truth[n] for n in res.names]) / res.std_errors
    assert np.all(np.abs(z) < 3), z
    assert np.all(res.ci_lower < res.estimates) and np.all(res.estimates < res.ci_upper)
    assert res.loglik >= res.loglik_initial


def test_fixed_point(fit20k):
    cohort, res = fit20k
    again = fit(cohort, config=FitConfig(initial=res.params))
    np.testing.assert_allclose(
        transform_to_unconstrained(again.params), transform_to_unconstrained(res.params), rtol=0, atol=1e-6
    )
    assert again.loglik >= res.loglik - 1e-6


def test_scale_invariance():
    cohort, _ = generate_dataset(SimConfig(TRUTH, 5000, seed=12))
    c = 7.0
    a = fit(cohort)
    b = fit(cohort.scaled(c), config=FitConfig(t_c=1096.0 * c))
    assert b.params.alpha == pytest.approx(a.params.alpha, rel=1e-3)
    np.testing.assert_allclose(b.params.shapes, a.params.shapes, rtol=1e-3)
    np.testing.assert_allclose(b.model_params().scales, c * np.asarray(a.model_params().scales), rtol=1e-3)


def test_independent_data_goes_to_boundary():
    indep = ModelParams.from_arrays(1.0, TRUTH.shapes, TRUTH.scales)
    cohort, _ = generate_dataset(SimConfig(indep, 20_000, seed=13))
    res = fit(cohort)
    assert res.params.alpha > 0.95
    for k in range(3):
        i = res.index(f"shape_{k + 1}")
        assert abs(res.estimates[i] - indep.shapes[k]) < 3 * res.std_errors[i]
        i = res.index(f"scale_{k + 1}")
        assert abs(res.estimates[i] - indep.scales[k]) < 3 * res.std_errors[i]


def test_no_events_in_dimension():
    times = np.array([[10.0, 1096.0], [20.0, 1096.0]])
    with pytest.raises(IdentifiabilityError):
        fit(Cohort(times, times < 1096.0))


def test_empty_dataset():
    with pytest.raises(IdentifiabilityError):
        fit(Cohort(np.empty((0, 2)), np.empty((0, 2), dtype=bool)))


def test_spec_dimension_mismatch(fit20k):
    cohort, _ = fit20k
    with pytest.raises(DomainError):
        fit(cohort, RegressionSpec.intercept_only(2))


def test_intercept_only_spec_equals_default():
    cohort, _ = generate_dataset(SimConfig(TRUTH, 3000, seed=14))
    a = fit(cohort)
    b = fit(cohort, RegressionSpec.intercept_only(3))
    np.testing.assert_array_equal(a.estimates, b.estimates)


def test_regression_recovery():
    spec = RegressionSpec((("x",), ("x", "z")))
    truth = RegressionParams(0.6, (0.9, 0.7), (np.array([6.0, -0.8]), np.array([5.5, 0.5, 0.3])))
    cov = {"x": CovariateDist("bernoulli", p=0.4), "z": CovariateDist("normal", 0.0, sd=1.0)}
    cohort, _ = generate_dataset(SimConfig(truth, 8000, seed=15, spec=spec, covariates=cov))
    res = fit(cohort, spec)
    assert res.converged
    want = {
        "alpha": 0.6, "shape_1": 0.9, "shape_2": 0.7,
        "beta_1:intercept": 6.0, "beta_1:x": -0.8,
        "beta_2:intercept": 5.5, "beta_2:x": 0.5, "beta_2:z": 0.3,
    }
    assert sorted(res.names) == sorted(want)
    z = (res.estimates - [want[n] for n in res.names]) / res.std_errors
    assert np.all(np.abs(z) < 3.5), z


def test_result_json_roundtrip(fit20k):
    _, res = fit20k
    back = FitResult.from_dict(res.to_dict())
    np.testing.assert_array_equal(back.estimates, res.estimates)
    np.testing.assert_array_equal(back.covariance, res.covariance)
    assert back.names == res.names and back.converged == res.converged
