import numpy as np
import pytest

from rimkit.linear import estimate_dichotomy, noisy_spec
from rimkit.nonlinear import NonlinearField, make_cutoff
from rimkit.spectral import make_splitting, shifted_dirichlet_laplacian

GAP_D = np.array([[0.3, -0.2, 0.1, 0.25]])


@pytest.fixture(scope="session")
def gap_model():
    # mu = (1, -2, -7, -14)
    return shifted_dirichlet_laplacian(4, 2.0)


@pytest.fixture(scope="session")
def gap_spec(gap_model):
    return noisy_spec(gap_model, GAP_D, [1.0], 3, -60.0, 80.0, 0.001)


@pytest.fixture(scope="session")
def gap_split(gap_model):
    return make_splitting(gap_model, 0.0)


@pytest.fixture(scope="session")
def gap_dich(gap_spec, gap_split):
    return estimate_dichotomy(gap_spec, gap_split)


@pytest.fixture(scope="session")
def tanh_cutoff(gap_dich):
    """Mode-coupling tanh field scaled so the contraction budget is 0.495."""
    c = 0.99 * 2.4 / (40 * gap_dich.K)
    return make_cutoff(NonlinearField("lipschitz_componentwise", c, mixing="sine"), 4.0, dim=4)


@pytest.fixture(scope="session")
def zero_cutoff():
    return make_cutoff(NonlinearField("zero"), 4.0, dim=4)
