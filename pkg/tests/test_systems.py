import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfpwl.builtins import OCEAN_BEB, canard5d, ocean, ocean_general
from sfpwl.errors import ConfigError, ContinuityError
from sfpwl.linalg import charpoly_coeffs, eigenvalues, match_eigenvalues
from sfpwl.systems import (
    GeneralPwlSystem,
    PiecewiseSmoothSystem,
    PlacementRule,
    SfocfSystem,
    SlowFastPwlSystem,
    assemble_general,
    assemble_sfocf_matrix,
    check_continuity,
    linearize_at_beb,
    random_continuous_pwl,
    sfocf_matrix,
    split_slow_fast,
    straighten,
)


def _slow_fast(rng, n=4, k=2, eps=0.1):
    U_L = rng.standard_normal((k, n))
    V_L = rng.standard_normal((n - k, n))
    U_R, V_R = U_L.copy(), V_L.copy()
    U_R[:, 0] += rng.standard_normal(k)
    V_R[:, 0] += rng.standard_normal(n - k)
    return SlowFastPwlSystem(k, U_L, U_R, V_L, V_R, rng.standard_normal(k),
                             rng.standard_normal(n - k), eps, 0.3)


def test_assemble_eps_zero_kills_slow_rows(rng):
    sf = _slow_fast(rng, eps=0.0)
    gen = assemble_general(sf)
    assert np.all(gen.P_L[2:] == 0) and np.all(gen.P_R[2:] == 0) and np.all(gen.c[2:] == 0)


def test_assemble_eps_one_stacks(rng):
    sf = _slow_fast(rng, n=3, k=2, eps=1.0)
    gen = assemble_general(sf)
    np.testing.assert_array_equal(gen.P_L, np.vstack([sf.U_L, sf.V_L]))
    np.testing.assert_array_equal(gen.c, np.r_[sf.q, sf.r])


def test_split_inverts_assemble(rng):
    sf = _slow_fast(rng, eps=0.05)
    back = split_slow_fast(assemble_general(sf), sf.k, sf.epsilon)
    np.testing.assert_allclose(back.V_R, sf.V_R, rtol=1e-14)
    np.testing.assert_allclose(back.r, sf.r, rtol=1e-14)


def test_slow_fast_rejects_discontinuity(rng):
    sf = _slow_fast(rng)
    V_R = sf.V_R.copy()
    V_R[0, 2] += 1.0
    with pytest.raises(ContinuityError):
        SlowFastPwlSystem(sf.k, sf.U_L, sf.U_R, sf.V_L, V_R, sf.q, sf.r, sf.epsilon)


def test_slow_fast_rejects_bad_k(rng):
    with pytest.raises(ConfigError):
        SlowFastPwlSystem(3, np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
                          np.zeros(3), np.zeros(0), 0.1)


def test_continuity_examples(rng):
    P_L = rng.standard_normal((4, 4))
    P_R = P_L.copy()
    P_R[:, 0] += rng.standard_normal(4)
    assert check_continuity(P_L, P_R).passed
    assert check_continuity(P_L, P_L.copy()).passed
    bad = P_R.copy()
    bad[2, 1] += 1e-6
    rep = check_continuity(P_L, bad)
    assert not rep.passed
    assert rep.location == (2, 1)
    assert rep.max_violation == pytest.approx(1e-6, rel=1e-6)


def test_general_rejects_discontinuous(rng):
    P_L = rng.standard_normal((3, 3))
    with pytest.raises(ContinuityError):
        GeneralPwlSystem(P_L, P_L + 1.0, np.ones(3))


def test_sfocf_matrix_by_hand():
    s = SfocfSystem(1, [2.0], [2.0], [3.0], [3.0], 0.1)
    np.testing.assert_allclose(assemble_sfocf_matrix(s, "L"), [[-2.0, 1.0], [-0.3, 0.0]])


def test_sfocf_matrix_eps_zero_block_triangular():
    C = sfocf_matrix([1.0, 2.0], [3.0, 4.0, 5.0], 0.0)
    assert np.all(C[2:, :] == 0)
    assert C[1, 2] == 1.0


def test_canard_spectrum_splits():
    s = canard5d(0.05)
    spec = eigenvalues(s.matrix("L")).eigenvalues
    expected = np.r_[[-0.6, -0.2 + 1j, -0.2 - 1j], 0.05 * np.array([-3 + 1j, -3 - 1j])]
    a, b = match_eigenvalues(expected, spec)
    np.testing.assert_allclose(a, b, atol=1e-10)


@given(st.integers(1, 4), st.integers(1, 4), st.floats(1e-3, 1.0), st.integers(0, 2**31 - 1))
def test_charpoly_of_sfocf_matrix(k, m, eps, seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(-2, 2, k), r.uniform(-2, 2, m)
    C = sfocf_matrix(a, b, eps)
    expected = np.r_[a, b * eps ** np.arange(1, m + 1)]
    np.testing.assert_allclose(charpoly_coeffs(C), expected, atol=1e-10 * max(1, np.max(np.abs(a))) ** (k + m))


def test_placement_rule_limits():
    rule = PlacementRule([-1.0], [-2.0], [-3.0], [-4.0])
    a_L, a_R, b_L, b_R = rule(0.0)
    np.testing.assert_allclose([a_L[0], b_L[0], a_R[0], b_R[0]], [1.0, 2.0, 3.0, 12.0])
    a_L, _, b_L, _ = rule(0.1)
    np.testing.assert_allclose([a_L[0], b_L[0]], [1.2, 2.0])


def test_placement_rule_exact_spectrum():
    rule = PlacementRule([-1.0, -2.0], [-1 + 1j, -1 - 1j], [-0.5, -4.0], [0.3, -0.7])
    for eps in (0.3, 0.01):
        a_L, _, b_L, _ = rule(eps)
        spec = eigenvalues(sfocf_matrix(a_L, b_L, eps)).eigenvalues
        exp = np.r_[-1.0, -2.0, eps * np.array([-1 + 1j, -1 - 1j])]
        a, b = match_eigenvalues(exp, spec)
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_limit_coefficients_warns_without_rule():
    s = SfocfSystem(1, [1.0], [1.0], [2.0], [3.0], 0.1)
    with pytest.warns(UserWarning, match="epsilon-rule"):
        s.limit_coefficients()


def test_at_reevaluates_rule():
    s = canard5d(0.05)
    s2 = s.at(0.01)
    assert s2.epsilon == 0.01
    np.testing.assert_allclose(s2.a_L, s.rule(0.01)[0])


def _quadratic():
    f = lambda z, p: np.array([z[0] ** 2])  # noqa: E731
    return PiecewiseSmoothSystem(1, f, f, lambda z, p: z[0] - 1.0, {})


def test_linearize_quadratic():
    lin = linearize_at_beb(_quadratic(), [1.0], step=1e-5)
    assert abs(lin.jac_left[0, 0] - 2.0) < 1e-9
    assert abs(lin.jac_right[0, 0] - 2.0) < 1e-9


def test_linearize_rejects_off_manifold():
    with pytest.raises(ConfigError, match="switching manifold"):
        linearize_at_beb(_quadratic(), [1.5])


def _affine_ps(gen: GeneralPwlSystem):
    return PiecewiseSmoothSystem(
        gen.n,
        lambda z, p: gen.P_L @ z + gen.c * p["mu"],
        lambda z, p: gen.P_R @ z + gen.c * p["mu"],
        lambda z, p: z[0],
        {"mu": 0.0},
        bifurcation_parameter="mu",
    )


def test_linearize_affine_exact(rng):
    gen = random_continuous_pwl(4, rng)
    lin = linearize_at_beb(_affine_ps(gen), np.zeros(4))
    np.testing.assert_allclose(lin.jac_left, gen.P_L, atol=1e-8)
    np.testing.assert_allclose(lin.jac_right, gen.P_R, atol=1e-8)
    np.testing.assert_allclose(lin.forcing_direction, gen.c, atol=1e-8)


def test_straighten_affine_is_identity(rng):
    gen = random_continuous_pwl(3, rng)
    ps = _affine_ps(gen)
    back, T = straighten(linearize_at_beb(ps, np.zeros(3)), k=1)
    np.testing.assert_allclose(T, np.eye(3))
    np.testing.assert_allclose(back.P_L, gen.P_L, atol=1e-8)
    np.testing.assert_allclose(back.c, gen.c, atol=1e-8)


def test_ocean_linearization_eigenvalues():
    lin = linearize_at_beb(ocean(), OCEAN_BEB)
    # fast eigenvalue and eps-scaled slow eigenvalues of the left piece
    expected = np.array([-0.988875, -0.01 * 2.10770, -0.01 * 0.00479788])
    got = np.sort(eigenvalues(lin.jac_left).eigenvalues.real)
    np.testing.assert_allclose(got, np.sort(expected), rtol=1e-4)


def test_ocean_straightened_slow_rows_are_order_eps():
    gen, _ = ocean_general()
    assert np.max(np.abs(gen.P_L[1:])) < 0.05
    assert np.max(np.abs(gen.P_L[0])) > 0.5
    assert check_continuity(gen).passed


def test_ocean_continuity_on_switching_surface():
    ps = ocean(lambda0=0.003)
    pts = np.array([[x, x, m] for x in np.linspace(0.5, 1.5, 5) for m in (0.8, 1.2)])
    assert ps.continuity_defect(pts) < 1e-12
