import pytest
import sympy as sp

from sfunc3d import kernel
from sfunc3d.reduction import (SympyDsolveAdapter, UnsolvedODE, annihilates, external_solver_from_env,
                               first_integral, make_associated_ode, solve_1ode)

from conftest import S_LORENZ

x, y, z = sp.symbols("x y z")
V = (x, y, z)


def equivalent_in_yz(H1, H2):
    """Functional equivalence of two first integrals of the same planar field."""
    d = kernel.differentiate
    cross = d(H1, y) * d(H2, z) - d(H1, z) * d(H2, y)
    return kernel.is_zero(cross) and (H1.has(y) or H1.has(z))


def test_make_ode_examples():
    assert make_associated_ode(S_LORENZ, V).rhs == kernel.normalize(-(x**2 - z) * y / (x**2 * z + y**2))
    assert make_associated_ode(0, V).rhs == 0
    ode = make_associated_ode(-z / y, V)
    assert ode.rhs == z / y and ode.dependent == z and ode.independent == y and ode.parameter == x


def test_lorenz_ode():
    sol = solve_1ode(make_associated_ode(S_LORENZ, V))
    ref = sp.Rational(1, 2) * (x**4 - 2 * x**2 * z - y**2) / (x**4 - 2 * x**2 * z + z**2)
    assert equivalent_in_yz(sol.H, ref)
    assert sol.classification == "rational" and sol.check == "proved"
    # annihilation property with the S = I_y / I_z convention
    assert kernel.is_zero(kernel.differentiate(sol.H, y) - S_LORENZ * kernel.differentiate(sol.H, z))


def test_separable_example():
    sol = solve_1ode(make_associated_ode(-z / y, V))
    assert equivalent_in_yz(sol.H, z / y)
    assert sol.classification == "rational"


def test_zero_rhs():
    sol = solve_1ode(make_associated_ode(0, V))
    assert sol.H == z


@pytest.mark.parametrize("rhs, method", [
    (y * z, "separable"),
    (z + y, "linear"),
    (z / y + y**2 / z, "bernoulli"),
    ((y + z) / (y - z), "homogeneous"),
    (-(2 * y * z + 1) / (y**2 + 3 * z**2), "exact"),
])
def test_cascade_methods(rhs, method):
    sol = first_integral(rhs, z, y)
    assert sol.method_used.startswith(method)
    assert annihilates(sol.H, rhs, y, z) is not None


def test_reciprocal_orientation():
    # as dz/dy this is nonlinear in z; read as dy/dz it is linear in y
    rhs = 1 / (y + z**2)
    sol = first_integral(rhs, z, y)
    assert annihilates(sol.H, rhs, y, z) is not None


def test_liouvillian_result():
    sol = first_integral(2 * y * z + 1, z, y)
    assert sol.classification == "liouvillian"
    assert sol.H.has(sp.Integral)
    assert kernel.is_zero(kernel.differentiate(sol.H, y) + (2 * y * z + 1) * kernel.differentiate(sol.H, z))


def test_darboux_strategy_finds_rational_integral():
    H0 = (y * z + 1) * (z - y**2) / y**3
    F = kernel.normalize(-sp.diff(H0, y) / sp.diff(H0, z))
    from sfunc3d.reduction import _DarbouxSearch
    H = _DarbouxSearch(3, time_budget=60)(F, y, z)
    assert H is not None and annihilates(H, F, y, z) is not None


def test_unsolved_raises():
    with pytest.raises(UnsolvedODE):
        first_integral(z**3 + y**3 * z + y, z, y, darboux_degree=1, darboux_budget=2)


def test_external_seam(monkeypatch):
    monkeypatch.delenv("SFUNC3D_EXTERNAL_SOLVER", raising=False)
    assert external_solver_from_env() is None
    monkeypatch.setenv("SFUNC3D_EXTERNAL_SOLVER", "1")
    assert isinstance(external_solver_from_env(), SympyDsolveAdapter)
    H = SympyDsolveAdapter().first_integral(z / y, z, y)
    assert H is not None and annihilates(H, z / y, y, z) is not None


def test_x_is_inert():
    sol = first_integral(x * z / y, z, y)
    assert annihilates(sol.H, x * z / y, y, z) == "proved"
