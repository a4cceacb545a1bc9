import sympy as sp
import pytest
from hypothesis import settings

from sfunc3d.system import parse_system

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

x, y, z = sp.symbols("x y z")
s, r, b = sp.symbols("s r b")

LORENZ_DOC = {"vars": ["x", "y", "z"], "params": ["s", "r", "b"],
              "f": "s*(y-x)", "g": "r*x-x*z-y", "h": "-b*z+x*y"}


@pytest.fixture(scope="session")
def lorenz():
    return parse_system(LORENZ_DOC)


@pytest.fixture(scope="session")
def lorenz_branch(lorenz):
    return lorenz.substitute({s: sp.Rational(1, 2), r: 0, b: 1})


@pytest.fixture(scope="session")
def toy():
    return parse_system({"vars": ["x", "y", "z"], "params": [], "f": "x", "g": "y", "h": "2*z"})


@pytest.fixture(scope="session")
def trivial():
    return parse_system({"vars": ["x", "y", "z"], "params": [], "f": "1", "g": "1", "h": "0"})


# reference objects for the integrable Lorenz case
S_LORENZ = (x**2 - z) * y / (x**2 * z + y**2)
I_LORENZ = sp.Rational(1, 2) * (x**4 - 2 * x**2 * z - y**2) / (x**4 - 2 * x**2 * z + z**2)
