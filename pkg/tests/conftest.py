import numpy as np
import pytest

from qkdbound import computational_basis, ghz_projector, born_distribution, sep_isotropic


@pytest.fixture
def zz():
    z = computational_basis(2)
    return [z, z]


def ent_sep(d, n, ms):
    return born_distribution(ghz_projector(d, n), ms).probs, born_distribution(sep_isotropic(d, n), ms).probs


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
