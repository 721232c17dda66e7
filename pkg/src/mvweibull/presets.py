"""Reference estimates for the 1994 prison-release recidivism cohort.

Dimension order: sex-crime arrest, violent-crime arrest, other-crime arrest.
Times are in days with follow-up ending at day 1096.
"""

from __future__ import annotations

import numpy as np

from .likelihood import RegressionParams, RegressionSpec
from .model import ModelParams

RECIDIVISM_PARAMS = ModelParams.from_arrays(
    alpha=0.475,
    shapes=(0.777, 0.804, 0.659),
    scales=(9926.352, 2742.914, 1543.809),
)

RECIDIVISM_COHORT_SIZE = 33740

_COMMON = ("sex_dummy", "log_tmsrv", "arrests_by_age", "race")
_RELEASE = ("crime_dummy1", "crime_dummy2")

RECIDIVISM_SPEC = RegressionSpec(
    (
        _COMMON + ("sextrt",) + _RELEASE,
        _COMMON + ("educat",) + _RELEASE,
        _COMMON + ("educat",) + _RELEASE,
    )
)

RECIDIVISM_REGRESSION = RegressionParams(
    alpha=0.522,
    shapes=(0.812, 0.871, 0.706),
    coefs=(
        np.array([10.994, -1.154, 0.069, -1.597, -0.184, -0.073, -0.600, -0.134]),
        np.array([8.821, -0.714, 0.138, -1.834, -0.443, -0.145, 0.397, -0.205]),
        np.array([7.858, -0.507, 0.178, -2.152, -0.396, -0.243, 0.656, 0.113]),
    ),
)

PRESETS = {"recidivism": RECIDIVISM_PARAMS}
