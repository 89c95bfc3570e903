import numpy as np
import pytest

from dyncanon.explicit import build_model
from dyncanon.triple import GBDTTriple, SignatureJ, ex1_triple, random_admissible


@pytest.fixture(scope="session")
def ex1():
    return build_model(ex1_triple())


@pytest.fixture(scope="session")
def zero_pi():
    t = GBDTTriple(np.eye(2), np.eye(2), np.zeros((2, 2)), SignatureJ(1, 1))
    return build_model(t)


# (n, m1, m2, spectrum, method) for the random models used across modules
RANDOM_SPECS = [
    (2, 1, 1, "offreal", "inertia"),
    (3, 2, 2, "offreal", "inertia"),
    (3, 1, 2, "offreal", "inertia"),
    (4, 2, 2, "offreal", "inertia"),
    (4, 1, 1, "upper", "lyapunov"),
]


def make_random(i, seed=0):
    n, m1, m2, spectrum, method = RANDOM_SPECS[i]
    return random_admissible(n, SignatureJ(m1, m2), seed, spectrum=spectrum, method=method)


@pytest.fixture(scope="session", params=range(len(RANDOM_SPECS)), ids=lambda i: "n{}m{}{}".format(*RANDOM_SPECS[i][:3]))
def rand_model(request):
    return build_model(make_random(request.param))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
