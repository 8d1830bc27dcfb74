import numpy as np
import pytest

from cohortps import (
    Cohort,
    ConditionalOnExposure,
    RandomSample,
    RngStream,
    sample_conditional_cohort,
    sample_random_cohort,
)


def cohort_from_arrays(X, e, true_propensity=None):
    """Build a cohort with whatever design matches the exposure counts."""
    X = np.asarray(X, dtype=float)
    e = np.asarray(e)
    n_exposed = int(np.sum(e == 1))
    n_controls = int(np.sum(e == 0))
    if n_exposed and n_controls:
        design = ConditionalOnExposure(
            n_exposed=n_exposed, controls_per_case=n_controls / n_exposed
        )
    else:
        design = RandomSample(n_rows=len(e))
    return Cohort(covariates=X, exposure=e, design=design, true_propensity=true_propensity)


@pytest.fixture(scope="session")
def small_cohort():
    """A conditionally sampled cohort big enough for every learner."""
    return sample_conditional_cohort(60, 1.0, RngStream(base_seed=314, stream_index=0))


@pytest.fixture(scope="session")
def medium_cohort():
    return sample_conditional_cohort(200, 1.0, RngStream(base_seed=314, stream_index=1))


@pytest.fixture(scope="session")
def random_cohort_3000():
    return sample_random_cohort(3000, RngStream(base_seed=314, stream_index=2))
