import math

import numpy as np
import pytest

from mvweibull import (
    CensoringPattern,
    Cohort,
    DataError,
    ModelParams,
    NonFiniteLikelihood,
    Observation,
    RegressionParams,
    RegressionSpec,
    observation_loglik,
    pattern_of,
    resolve_scales,
    total_loglik,
)
from mvweibull.likelihood import LogLikelihood, pattern_histogram
from mvweibull.model import log_joint_survival
from mvweibull.presets import RECIDIVISM_REGRESSION, RECIDIVISM_SPEC
from mvweibull.simulate import SimConfig, generate_dataset

from conftest import mp_mixed_partial

TC = 1096.0

# (case, events, p-vector) for the three-event case table
CASE_TABLE = [
    (1, (True, True, True), (1, 0, 0, 0, 0, 0, 0)),
    (2, (True, False, False), (0, 1, 0, 0, 0, 0, 0)),
    (3, (False, True, False), (0, 0, 1, 0, 0, 0, 0)),
    (4, (False, False, True), (0, 0, 0, 1, 0, 0, 0)),
    (5, (True, True, False), (0, 0, 0, 0, 1, 0, 0)),
    (6, (True, False, True), (0, 0, 0, 0, 0, 1, 0)),
    (7, (False, True, True), (0, 0, 0, 0, 0, 0, 1)),
    (8, (False, False, False), (0, 0, 0, 0, 0, 0, 0)),
]


def obs(times, occurred, **cov):
    times = [t if e else TC for t, e in zip(times, occurred)]
    return Observation(tuple(times), tuple(occurred), cov)


def weibull_independent_loglik(shapes, scales, times, occurred, t_c):
    """Plain sum of univariate censored Weibull log-likelihoods."""
    total = 0.0
    for row_t, row_e in zip(times, occurred):
        for g, lam, t, e in zip(shapes, scales, row_t, row_e):
            t = t if e else t_c
            z = (t / lam) ** g
            total += (math.log(g / lam) + (g - 1) * math.log(t / lam) if e else 0.0) - z
    return total


class TestPatterns:
    @pytest.mark.parametrize("case,events,pvec", CASE_TABLE)
    def test_case_table(self, case, events, pvec):
        pat = pattern_of(obs((10, 20, 30), events))
        assert pat.case_number == case
        assert pat.case_indices == pvec

    def test_labels(self):
        assert pattern_of(obs((1, 1, 1), (True, True, True))).label == "E1,E2,E3"
        assert pattern_of(obs((1, 1, 1), (False, False, False))).label == "None"
        assert pattern_of(obs((1, 1, 1), (False, True, True))).observed == frozenset({1, 2})

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_patterns_exhaustive_and_exclusive(self, d):
        pats = CensoringPattern.all_patterns(d)
        assert len(pats) == 2**d == len(set(pats))
        vectors = [p.case_indices for p in pats]
        assert len(set(vectors)) == 2**d
        assert sum(sum(v) for v in vectors) == 2**d - 1
        for p in pats:
            assert CensoringPattern.from_label(p.label, d) == p

    def test_histogram_in_case_order(self):
        rows = [obs((5, 5, 5), ev) for _, ev, _ in CASE_TABLE] + [obs((5, 5, 5), (False, False, True))]
        hist = pattern_histogram(Cohort.from_observations(rows))
        assert list(hist) == ["E1,E2,E3", "E1", "E2", "E3", "E1,E2", "E1,E3", "E2,E3", "None"]
        assert hist["E3"] == 2 and sum(hist.values()) == 9


class TestResolveScales:
    def test_zero_slopes(self):
        spec = RegressionSpec((("x",), ("x",), ()))
        params = RegressionParams(0.5, (1, 1, 1), ([2.0, 0.0], [2.0, 0.0], [2.0]))
        for x in (-3.0, 0.0, 5.0):
            np.testing.assert_allclose(resolve_scales(spec, params, obs((1, 1, 1), (0, 0, 0), x=x)), math.exp(2.0))

    def test_published_intercept_and_sex_effect(self):
        base = {name: 0.0 for name in RECIDIVISM_SPEC.all_covariates()}
        female = resolve_scales(RECIDIVISM_SPEC, RECIDIVISM_REGRESSION, obs((1, 1, 1), (0, 0, 0), **base))
        male = resolve_scales(
            RECIDIVISM_SPEC, RECIDIVISM_REGRESSION, obs((1, 1, 1), (0, 0, 0), **{**base, "sex_dummy": 1.0})
        )
        assert female[0] == pytest.approx(math.exp(10.994), rel=1e-14)
        assert male[0] == pytest.approx(math.exp(10.994 - 1.154), rel=1e-14)

    def test_missing_covariate_names_row_and_column(self):
        spec = RegressionSpec((("age",), (), ()))
        params = RegressionParams(0.5, (1, 1, 1), ([1.0, 0.1], [1.0], [1.0]))
        with pytest.raises(DataError, match=r"'age'.*observation 7"):
            resolve_scales(spec, params, obs((1, 1, 1), (0, 0, 0)), index=7)

    def test_zero_slope_regression_equals_constant_scales(self, recidivism, rng):
        cohort, _ = generate_dataset(SimConfig(recidivism, 300, seed=1))
        cohort.covariates["z"] = rng.normal(size=cohort.n)
        spec = RegressionSpec((("z",), ("z",), ("z",)))
        reg = RegressionParams(
            recidivism.alpha, tuple(recidivism.shapes), tuple([math.log(s), 0.0] for s in recidivism.scales)
        )
        assert total_loglik(reg, spec, cohort) == total_loglik(recidivism, None, cohort)


class TestObservationLoglik:
    def test_all_censored_is_log_survival(self, recidivism):
        o = obs((1, 1, 1), (False, False, False))
        expected = log_joint_survival(recidivism, [TC] * 3)
        assert observation_loglik(RegressionParams.from_model_params(recidivism), RegressionSpec.intercept_only(3), o) == pytest.approx(expected, rel=1e-14)

    def test_two_events_matches_finite_differences(self, recidivism):
        o = obs((150.0, 400.0, 0.0), (True, True, False))
        ll = observation_loglik(RegressionParams.from_model_params(recidivism), RegressionSpec.intercept_only(3), o)
        assert math.exp(ll) == pytest.approx(mp_mixed_partial(recidivism, [150.0, 400.0, TC], (0, 1)), rel=1e-6)

    @pytest.mark.parametrize("case,events,_", CASE_TABLE)
    def test_independence_is_separable(self, recidivism, case, events, _):
        p = ModelParams.from_arrays(1.0, recidivism.shapes, recidivism.scales)
        o = obs((17.0, 250.0, 1000.0), events)
        ll = observation_loglik(RegressionParams.from_model_params(p), RegressionSpec.intercept_only(3), o)
        ref = weibull_independent_loglik(p.shapes, p.scales, [o.times], [o.occurred], TC)
        assert ll == pytest.approx(ref, rel=1e-12)

    def test_censored_coordinates_use_cutoff(self, recidivism):
        rp, spec = RegressionParams.from_model_params(recidivism), RegressionSpec.intercept_only(3)
        a = observation_loglik(rp, spec, Observation((10.0, 500.0, 3.0), (True, False, False)))
        b = observation_loglik(rp, spec, Observation((10.0, TC, TC), (True, False, False)))
        assert a == b


@pytest.fixture(scope="module")
def cohort():
    from mvweibull.presets import RECIDIVISM_PARAMS

    return generate_dataset(SimConfig(RECIDIVISM_PARAMS, 2000, seed=5))[0]


class TestTotalLoglik:
    def test_empty_dataset(self, recidivism):
        assert total_loglik(recidivism, None, []) == 0.0

    def test_single_censored_row(self, recidivism):
        row = obs((1, 1, 1), (False, False, False))
        assert total_loglik(recidivism, None, [row]) == pytest.approx(log_joint_survival(recidivism, [TC] * 3))

    def test_vectorised_equals_row_sum(self, recidivism, cohort):
        rp, spec = RegressionParams.from_model_params(recidivism), RegressionSpec.intercept_only(3)
        rows = list(cohort)[:300]
        expected = math.fsum(observation_loglik(rp, spec, o, TC, i) for i, o in enumerate(rows))
        assert total_loglik(rp, spec, rows) == pytest.approx(expected, rel=1e-13)

    def test_permutation_invariant(self, recidivism, cohort, rng):
        a = total_loglik(recidivism, None, cohort)
        for _ in range(3):
            b = total_loglik(recidivism, None, cohort.take(rng.permutation(cohort.n)))
            assert abs(a - b) <= 1e-9 * abs(a)

    def test_regression_vectorised_equals_rows(self, rng):
        cohort, _ = generate_dataset(SimConfig(
            RECIDIVISM_REGRESSION, 200, seed=2, spec=RECIDIVISM_SPEC,
            covariates=_recidivism_covariates(),
        ))
        rows = list(cohort)
        expected = math.fsum(observation_loglik(RECIDIVISM_REGRESSION, RECIDIVISM_SPEC, o) for o in rows)
        assert total_loglik(RECIDIVISM_REGRESSION, RECIDIVISM_SPEC, cohort) == pytest.approx(expected, rel=1e-13)

    def test_strict_mode_flags_rows(self, recidivism):
        rows = [obs((5, 5, 5), (False, False, False)), obs((5, 5, 5), (True, False, False))]
        extreme = RegressionParams(0.3, (1e300, 1.0, 1.0), ([0.0], [0.0], [0.0]))
        assert total_loglik(extreme, None, rows) == -math.inf
        with pytest.raises(NonFiniteLikelihood) as err:
            total_loglik(extreme, None, rows, strict=True)
        assert err.value.indices == [0, 1]

    def test_dimension_mismatch(self, cohort):
        with pytest.raises(DataError):
            LogLikelihood(cohort, RegressionSpec.intercept_only(2))

    def test_likelihood_dominates_perturbations(self, recidivism):
        cohort, _ = generate_dataset(SimConfig(recidivism, 20_000, seed=99))
        ll = LogLikelihood(cohort, RegressionSpec.intercept_only(3))
        truth = ll(RegressionParams.from_model_params(recidivism))
        rng = np.random.default_rng(4)
        wins, trials = 0, 40
        for _ in range(trials):
            signs = rng.choice([-1.0, 1.0], size=3)
            shapes = recidivism.shapes * (1.0 + 0.2 * signs)
            perturbed = ModelParams.from_arrays(recidivism.alpha, shapes, recidivism.scales)
            wins += truth > ll(RegressionParams.from_model_params(perturbed))
        assert wins / trials >= 0.95


def _recidivism_covariates():
    from mvweibull.simulate import CovariateDist

    return {
        "sex_dummy": CovariateDist("bernoulli", p=0.9),
        "log_tmsrv": CovariateDist("normal", mean=2.5, sd=1.0),
        "arrests_by_age": CovariateDist("normal", mean=0.3, sd=0.15),
        "race": CovariateDist("bernoulli", p=0.5),
        "sextrt": CovariateDist("bernoulli", p=0.02),
        "educat": CovariateDist("bernoulli", p=0.3),
        "crime_dummy1": CovariateDist("bernoulli", p=0.05),
        "crime_dummy2": CovariateDist("bernoulli", p=0.3),
    }
