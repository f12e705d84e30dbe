import numpy as np
import pytest

from dualchain.chains import bd_kernel, make_bd
from dualchain.duals import siegmund_dual, siegmund_function
from dualchain.intertwining import build_intertwining


@pytest.fixture
def chain_a():
    # two states, births 0.3, deaths 0.2; pi = (0.4, 0.6)
    return make_bd(p=[0.3, 0.0], q=[0.0, 0.2])


@pytest.fixture
def chain_b():
    # three states; pi = (1/6, 1/3, 1/2)
    return make_bd(p=[0.2, 0.3, 0.0], q=[0.0, 0.1, 0.2])


@pytest.fixture
def pipeline_a(chain_a):
    P = bd_kernel(chain_a)
    return P, build_intertwining(P, siegmund_function(1), siegmund_dual(P).dual)


@pytest.fixture
def pipeline_b(chain_b):
    P = bd_kernel(chain_b)
    return P, build_intertwining(P, siegmund_function(2), siegmund_dual(P).dual)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
