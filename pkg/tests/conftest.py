import numpy as np
import pytest

from rotcool.basis import MolecularParams, build_model


@pytest.fixture(scope="session")
def toy_params():
    """Smallest nontrivial system: 4 ground + 6 excited sub-levels."""
    return MolecularParams(
        b_g=1.0, b_e=1.0, mu0=1.0, gamma0=1.0e6, j_max_g=1, j_max_e=1, temperature=3.0
    )


@pytest.fixture(scope="session")
def toy_model(toy_params):
    return build_model(toy_params)


@pytest.fixture(scope="session")
def j2_params():
    return MolecularParams(
        b_g=1.0, b_e=1.05, mu0=1.0, gamma0=1.0e6, j_max_g=2, j_max_e=2, temperature=2.5
    )


@pytest.fixture(scope="session")
def j2_model(j2_params):
    return build_model(j2_params)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
