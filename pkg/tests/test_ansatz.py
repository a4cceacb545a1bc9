import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from sfunc3d import kernel
from sfunc3d.ansatz import (TrivialKernelError, ansatz_triple, build_ansatz, determining_identity, linear_stage,
                            n_coefficients, solve_linear_stage)
from sfunc3d.system import parse_system

x, y, z, s = sp.symbols("x y z s")


@pytest.mark.parametrize("d, n", [(0, 1), (3, 20), (4, 35)])
def test_build_ansatz_counts(d, n):
    a = build_ansatz(d, "m")
    assert len(a.coeff_symbols) == n == n_coefficients(d) == (d + 1) * (d + 2) * (d + 3) // 6
    assert kernel.total_degree(a.expr, (x, y, z)) == d


def test_build_ansatz_deterministic():
    assert build_ansatz(2, "p") == build_ansatz(2, "p")
    assert [c.name for c in build_ansatz(1, "p").coeff_symbols] == ["p_0", "p_1", "p_2", "p_3"]


def test_lorenz_unknown_count(lorenz):
    M, N, P = ansatz_triple(lorenz, 4, 3)
    assert len(M.coeff_symbols + N.coeff_symbols + P.coeff_symbols) == 90


def test_toy_identity_vanishes_on_known_triple(toy):
    P, N, M = -x * z, x * y, z * (y + x * z)
    e = P * (toy.g - z * toy.f) + N * toy.h - toy.f * M
    assert kernel.is_zero(e)


def test_trivial_identity_shape(trivial):
    M, N, P = ansatz_triple(trivial, 1, 0)
    eqs = determining_identity(trivial, M, N, P)
    expected = kernel.collect_coefficients(P.expr * (1 - z) - M.expr, (x, y, z))
    assert eqs == expected


def test_trivial_kernel_at_2_2_1(trivial):
    (M, N, P), fams = linear_stage(trivial, 2, 1)
    assert len(fams) == 1
    fam = fams[0]
    # N entirely free; M = P (1 - z); the P coefficients stay free
    assert set(N.coeff_symbols) <= set(fam.free_unknowns)
    assert set(P.coeff_symbols) <= set(fam.free_unknowns)
    assert kernel.is_zero(fam.apply(M.expr) - P.expr * (1 - z))


def test_single_equation_no_split():
    m0, n0 = sp.symbols("m_0 n_0")
    fams = solve_linear_stage({(0, 0, 0): m0 - s * n0}, [m0, n0], [s], (0, 0, 0))
    assert len(fams) == 1
    assert fams[0].substitutions == {m0: s * n0}
    assert fams[0].free_unknowns == [n0]
    assert fams[0].case_conditions == []


def test_case_split_records_both_sides():
    m0, n0 = sp.symbols("m_0 n_0")
    fams = solve_linear_stage({(0, 0, 0): s * m0}, [m0, n0], [s], (0, 0, 0))
    assert len(fams) == 2
    nonzero = [f for f in fams if f.case_conditions]
    zero = [f for f in fams if f.param_relations]
    assert nonzero[0].case_conditions == [s] and nonzero[0].substitutions == {m0: 0}
    assert zero[0].param_values == {s: 0} and set(zero[0].free_unknowns) == {m0, n0}


def test_case_split_drops_trivial_side():
    m0, n0 = sp.symbols("m_0 n_0")
    fams = solve_linear_stage({(0, 0, 0): s * m0 - n0, (1, 0, 0): s * m0}, [m0, n0], [s], (0, 0, 0))
    assert [f.param_values for f in fams] == [{s: 0}]


def test_trivial_kernel_raises():
    m0, n0 = sp.symbols("m_0 n_0")
    with pytest.raises(TrivialKernelError):
        solve_linear_stage({(0, 0, 0): m0, (1, 0, 0): n0}, [m0, n0], [], (0, 0, 0))


def test_families_satisfy_identity(lorenz):
    (M, N, P), fams = linear_stage(lorenz, 2, 1)
    for fam in fams:
        e = determining_identity(lorenz, M, N, P)
        for c in e.values():
            assert kernel.is_zero(fam.apply(c))


@given(st.integers(-5, 5).filter(bool), st.integers(1, 4))
def test_solution_space_homogeneous(toy, num, den):
    (M, N, P), fams = linear_stage(toy, 2, 1)
    fam = fams[0]
    lam = sp.Rational(num, den)
    vals = {u: sp.Integer(i % 3 - 1) for i, u in enumerate(fam.free_unknowns)}
    Ms, Ns, Ps = (fam.apply(a.expr).xreplace(vals) for a in (M, N, P))
    e = lam * Ps * (toy.g - z * toy.f) + lam * Ns * toy.h - toy.f * lam * Ms
    assert kernel.is_zero(e)


def test_printed_sign_differs(lorenz):
    M, N, P = ansatz_triple(lorenz, 1, 1)
    plus = determining_identity(lorenz, M, N, P)
    minus = determining_identity(lorenz, M, N, P, p_sign=-1)
    assert plus != minus
