import numpy as np
import pytest

from utm.problems import heat_dirichlet, multipoint_diffusion, third_order_example
from utm.solver import ProblemInstance, SolverConfig, prepare


def instance(rp, **kw) -> ProblemInstance:
    return ProblemInstance(rp.op, rp.B, rp.ctx.pkg, rp.ctx, rp.Q, **kw)


@pytest.fixture(scope="session")
def third():
    return third_order_example()


@pytest.fixture(scope="session")
def heat():
    return heat_dirichlet()


@pytest.fixture(scope="session")
def multipoint():
    return multipoint_diffusion()


@pytest.fixture(scope="session")
def third_prob(third):
    return prepare(instance(third))


@pytest.fixture(scope="session")
def heat_prob(heat):
    return prepare(instance(heat))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CFG = SolverConfig()
