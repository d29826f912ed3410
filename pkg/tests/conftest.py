import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ocdbench.netio import load_network, parse_bif

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


# 3-node binary chain A -> B -> C with strong but non-deterministic links;
# small enough to recover exactly within the unit-test time budget.
CHAIN3_BIF = """\
network chain3 {
}
variable A {
  type discrete [ 2 ] { a0, a1 };
}
variable B {
  type discrete [ 2 ] { b0, b1 };
}
variable C {
  type discrete [ 2 ] { c0, c1 };
}
probability ( A ) {
  table 0.7, 0.3;
}
probability ( B | A ) {
  ( a0 ) 0.85, 0.15;
  ( a1 ) 0.2, 0.8;
}
probability ( C | B ) {
  ( b0 ) 0.9, 0.1;
  ( b1 ) 0.25, 0.75;
}
"""


@pytest.fixture(scope="session")
def chain3_net():
    return parse_bif(CHAIN3_BIF, name="chain3")


@pytest.fixture(scope="session")
def chain3_bif_text():
    return CHAIN3_BIF


@pytest.fixture(scope="session")
def asia_net():
    return load_network("asia")


@pytest.fixture(scope="session")
def asia_truth(asia_net):
    return asia_net.adjacency()


def assert_matrix_equal(a: np.ndarray, b: np.ndarray) -> None:
    np.testing.assert_array_equal(np.asarray(a), np.asarray(b))
