import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfpwl.builtins import canard5d, ocean_reduced_coefficients, ocean_sfocf, stable3d
from sfpwl.errors import SingularLayerError, SpectralGapError
from sfpwl.linalg import (
    charpoly_coeffs,
    companion_from_coeffs,
    eigenvalues,
    match_eigenvalues,
    poly_from_roots,
)
from sfpwl.simulate import PwlPropagator
from sfpwl.slowfast import (
    LayerSystem,
    ProbeConfig,
    ReducedSystem,
    classify_2d,
    classify_matrix,
    critical_manifold,
    critical_tangent_basis,
    eigen_factorization_check,
    eigen_placement,
    homogeneity_check,
    invariant_subspace,
    layer_system,
    locate_class_change,
    reduced_system,
    slow_manifolds,
    stability_probe,
    subspace_distance,
)
from sfpwl.systems import SfocfSystem

SMALL_PROBE = ProbeConfig(points_per_radius=20, samples=200)


def _layer(a_L, a_R):
    return LayerSystem(len(a_L), companion_from_coeffs(a_L), companion_from_coeffs(a_R))


def _same(a, b, atol):
    x, y = match_eigenvalues(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    np.testing.assert_allclose(x, y, atol=atol)


# layer system and critical manifold

def test_layer_scalar():
    s = SfocfSystem(1, [2.0], [3.0], [1.0], [1.0], 0.1)
    ls = layer_system(s, warn=False)
    assert ls.A_L.tolist() == [[-2.0]]


def test_layer_canard_spectra():
    ls = layer_system(canard5d())
    sL, sR = ls.spectra()
    _same(sL.eigenvalues, [-0.6, -0.2 + 1j, -0.2 - 1j], 1e-12)
    _same(sR.eigenvalues, [-3.0, -0.1 + 5j, -0.1 - 5j], 1e-12)


def test_layer_is_companion(rng):
    a_L, a_R = rng.standard_normal(4), rng.standard_normal(4)
    s = SfocfSystem(4, a_L, a_R, [1.0], [2.0], 0.1)
    ls = layer_system(s, warn=False)
    np.testing.assert_array_equal(ls.A_L, companion_from_coeffs(a_L))
    np.testing.assert_array_equal(ls.a_R, a_R)


def test_critical_manifold_scalar():
    H = critical_manifold(_layer([2.0], [3.0]))
    np.testing.assert_allclose(H(np.array([-1.0, 0.0, 1.2])).ravel(), [-0.5, 0.0, 0.4])


def test_critical_manifold_singular():
    with pytest.raises(SingularLayerError):
        critical_manifold(_layer([1.0, 0.0], [1.0, 1.0]))


def test_critical_manifold_warns_if_not_hurwitz():
    with pytest.warns(UserWarning, match="Hurwitz"):
        critical_manifold(_layer([-1.0], [1.0]))


def _hurwitz_coeffs(r, k):
    roots = []
    while len(roots) < k:
        if k - len(roots) >= 2 and r.random() < 0.5:
            x, y = -r.uniform(0.1, 3), r.uniform(0.1, 3)
            roots += [x + 1j * y, x - 1j * y]
        else:
            roots.append(-r.uniform(0.1, 3))
    return poly_from_roots(roots)


@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_equilibrium_and_sign_property(k, seed):
    r = np.random.default_rng(seed)
    ls = _layer(_hurwitz_coeffs(r, k), _hurwitz_coeffs(r, k))
    H = critical_manifold(ls)
    assert H.det_L > 0 and H.det_R > 0
    np.testing.assert_array_equal(H(np.array(0.0)), np.zeros(k))
    fld = ls.field
    for y1 in np.linspace(-3, 3, 13):
        x = H(np.array(y1))
        side = 0 if y1 <= 0 else 1
        assert np.max(np.abs(fld(y1).rhs(x, side))) <= 1e-12 * max(1.0, abs(y1))


# reduced system

def test_reduced_ocean():
    A, b, delta = 1.1, 1.0, 0.01
    a, bL, bR = ocean_reduced_coefficients(A, b, delta)
    s = SfocfSystem(1, a, a, bL, bR, 0.01)
    rs = reduced_system(s, warn=False)
    np.testing.assert_allclose(charpoly_coeffs(rs.B_L), [1 + A, b * delta], atol=1e-14)
    np.testing.assert_allclose(charpoly_coeffs(rs.B_R), [1 - A, b * delta], atol=1e-14)


def test_reduced_ocean_from_model():
    rs = reduced_system(ocean_sfocf())
    np.testing.assert_allclose(rs.B_L, [[-2.1, 1.0], [-0.01, 0.0]], atol=1e-12)
    np.testing.assert_allclose(rs.B_R, [[0.1, 1.0], [-0.01, 0.0]], atol=1e-12)


def test_reduced_zero_b_is_shift():
    s = SfocfSystem(1, [1.0], [2.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.1)
    rs = reduced_system(s, warn=False)
    np.testing.assert_array_equal(rs.B_L, np.eye(3, k=1))


def test_reduced_canard_spectra():
    rs = reduced_system(canard5d())
    sL, sR = rs.spectra()
    _same(sL.eigenvalues, [-3 + 1j, -3 - 1j], 1e-12)
    _same(sR.eigenvalues, [1 + 2j, 1 - 2j], 1e-12)


def test_reduced_rhs_switches_on_y1():
    rs = ReducedSystem(2, np.eye(2), -np.eye(2), 0.5)
    out = rs.rhs(np.array([[-1.0, 2.0], [1.0, 2.0]]))
    np.testing.assert_allclose(out, [[-1.0, 2.5], [-1.0, -1.5]])


# placement and factorisation

def test_placement_hand_example():
    s = eigen_placement([-1.0], [-2.0], [-1.0], [-2.0], 0.1)
    assert s.a_L[0] == pytest.approx(1.2)
    assert s.b_L[0] == pytest.approx(2.0)


@given(st.floats(1e-3, 0.5), st.integers(0, 2**31 - 1))
def test_placement_reproduces_spectrum(eps, seed):
    r = np.random.default_rng(seed)
    fast = -r.uniform(0.5, 3, 2)
    slow = [complex(-r.uniform(0.5, 2), r.uniform(0.2, 2))]
    slow = slow + [np.conj(slow[0])]
    s = eigen_placement(fast, slow, fast, slow, eps)
    _same(eigenvalues(s.matrix("R")).eigenvalues, np.r_[fast, eps * np.array(slow)], 1e-8)


def test_placement_canard_figure_spectrum():
    s = eigen_placement((-0.6, -0.2 + 1j, -0.2 - 1j), (-3 + 1j, -3 - 1j),
                        (-3.0, -0.1 + 5j, -0.1 - 5j), (1 + 2j, 1 - 2j), 0.05)
    _same(eigenvalues(s.matrix("L")).eigenvalues,
          [-0.6, -0.2 + 1j, -0.2 - 1j, 0.05 * (-3 + 1j), 0.05 * (-3 - 1j)], 1e-10)
    _same(eigenvalues(s.matrix("R")).eigenvalues,
          [-3.0, -0.1 + 5j, -0.1 - 5j, 0.05 * (1 + 2j), 0.05 * (1 - 2j)], 1e-10)


def test_factorization_canard_slopes():
    rep = eigen_factorization_check(canard5d(), [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    assert rep.passed, rep.to_dict()


def test_factorization_constant_coefficients_converge():
    s = SfocfSystem(2, [3.0, 2.0], [4.0, 3.0], [1.0, 0.5], [2.0, 1.0], 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = eigen_factorization_check(s, [1e-2, 1e-3, 1e-4])
    assert rep.fast_error["L"][-1] < rep.fast_error["L"][0]
    assert rep.fast_error["L"][-1] < 1e-3


def test_factorization_following_placement_rule_is_exact():
    rep = eigen_factorization_check(canard5d(), [1e-1, 1e-2], use_rule=True)
    assert max(np.max(v) for v in rep.fast_error.values()) < 1e-10


# stability probe and homogeneity

def test_probe_scalar_stable():
    rep = stability_probe(_layer([1.0], [2.0]), SMALL_PROBE)
    assert rep.verdict == "stable-evidence"
    assert rep.beta_hat == pytest.approx(1.0, rel=0.05)


def test_probe_canard_unstable():
    rep = stability_probe(layer_system(canard5d()), ProbeConfig(points_per_radius=40))
    assert rep.verdict == "unstable-witness"
    assert rep.witness is not None


def test_probe_not_hurwitz_inconclusive():
    rep = stability_probe(_layer([-1.0], [2.0]), SMALL_PROBE)
    assert rep.verdict == "inconclusive"


@pytest.mark.parametrize("seed", [1, 2])
def test_probe_planar_stable_and_envelope(seed):
    r = np.random.default_rng(seed)
    ls = _layer(_hurwitz_coeffs(r, 2), _hurwitz_coeffs(r, 2))
    rep = stability_probe(ls, SMALL_PROBE)
    assert rep.verdict == "stable-evidence"
    # the fitted envelope bounds every sampled orbit
    H = critical_manifold(ls)
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal((30, 2))
    times = np.linspace(0, rep.horizon, 50)
    for y1 in (-1.0, 0.0, 1.0):
        Hy = H(np.array(y1))
        traj = PwlPropagator(ls.field(y1), max_step=0.05).sample(Hy + x0, times)
        ratio = np.linalg.norm(traj - Hy, axis=2) / np.linalg.norm(x0, axis=1)
        assert np.all(ratio <= 1.05 * rep.alpha_hat * np.exp(-rep.beta_hat * times)[:, None] + 1e-9)


def test_homogeneity_canard():
    rep = homogeneity_check(layer_system(canard5d()), draws=15)
    assert rep.passed, rep.to_dict()


# classification

def test_classify_ocean_focus_and_node():
    for A, label, pred in ((1.1, "repelling focus", "Hopf-like"), (1.3, "repelling node", "no limit cycle")):
        a, bL, bR = ocean_reduced_coefficients(A, 1.0, 0.01)
        rs = reduced_system(SfocfSystem(1, a, a, bL, bR, 0.01), warn=False)
        c = classify_2d(rs)
        assert c["R"].label == label
        assert c["L"].label == "attracting node"
        assert pred in c["prediction"]


def test_classify_borderline():
    c = classify_matrix(companion_from_coeffs([2.0, 1.0]))
    assert c.label == "attracting degenerate node"
    assert c.borderline


def test_classify_saddle():
    assert classify_matrix(companion_from_coeffs([0.5, -1.0])).label == "saddle"


def test_classify_needs_2d():
    with pytest.raises(ValueError):
        classify_2d(reduced_system(SfocfSystem(1, [1.0], [1.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 0.1), warn=False))


def test_class_change_at_one_plus_two_sqrt_bdelta():
    def fam(A):
        a, bL, bR = ocean_reduced_coefficients(A, 1.0, 0.01)
        return reduced_system(SfocfSystem(1, a, a, bL, bR, 0.01), warn=False)
    assert locate_class_change(fam, 1.1, 1.3) == pytest.approx(1.2, abs=1e-10)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-2, 1e2))
def test_classification_invariant_under_time_rescaling(p1, p2, c):
    B = companion_from_coeffs([p1, p2])
    a, b = classify_matrix(B), classify_matrix(c * B)
    if not (a.borderline or b.borderline):
        assert a.label == b.label


# slow manifolds

@given(st.floats(0.5, 3), st.floats(-2, 2), st.floats(1e-3, 0.05))
def test_slow_eigenvector_two_by_two(a, b, eps):
    s = SfocfSystem(1, [a], [a], [b], [b], eps)
    V = slow_manifolds(s).basis_L
    mu = 0.5 * (-a + np.sqrt(a * a - 4 * eps * b))
    v = np.array([1.0, mu + a])
    assert subspace_distance(V, v[:, None]) < 1e-10


def test_invariant_subspace_known_basis(rng):
    T = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    D = np.diag([-0.01, -0.02, -3.0, -4.0])
    C = T @ D @ np.linalg.inv(T)
    V, res, _ = invariant_subspace(C, 2)
    assert subspace_distance(V, T[:, :2]) < 1e-10
    assert res < 1e-12


def test_spectral_gap_error():
    with pytest.raises(SpectralGapError):
        invariant_subspace(np.diag([-1.0, -2.0]), 1)


def test_slow_manifold_tends_to_critical_tangent():
    eps_grid = np.array([1e-2, 1e-3, 1e-4])
    s0 = stable3d()
    cm = critical_manifold(layer_system(s0))
    dist = []
    for eps in eps_grid:
        pair = slow_manifolds(s0.at(eps))
        dist.append(subspace_distance(pair.basis_L, critical_tangent_basis(cm, "L", 2)))
    slope = np.polyfit(np.log(eps_grid), np.log(dist), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.2)
