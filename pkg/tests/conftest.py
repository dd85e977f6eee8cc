import numpy as np
import pytest

import carleman_lab as cl


@pytest.fixture(scope="session")
def std_coeffs():
    return cl.ModelCoefficients.from_diagonal([4.0, 1.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def satisfied_weight():
    return cl.WeightSpec(3.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def violated_weight():
    return cl.WeightSpec(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def std_grid():
    return cl.make_grid(-0.3, 0.3, 601)


def random_spd(n, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(rng.uniform(0.2, 5.0, size=n)) @ q.T


@pytest.fixture(scope="session")
def spd_factory():
    return random_spd
