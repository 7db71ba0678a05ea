import numpy as np
import pytest
from scipy.linalg import expm

from sfpwl.builtins import canard5d, stable3d, stable3d_region
from sfpwl.errors import DivergenceError, HypothesisViolation
from sfpwl.experiments import (
    TrappingRegion,
    check_strong_trapping,
    invariance_experiment,
    limit_cycle_bounds,
    perturbation_bound_experiment,
    piece_equilibria,
    reduced_vs_full_comparison,
    sweep,
    tube_initial_states,
)
from sfpwl.simulate import IntegratorConfig, PwlPropagator, integrate
from sfpwl.slowfast import (
    ProbeConfig,
    ReducedSystem,
    critical_manifold,
    layer_system,
    reduced_system,
)
from sfpwl.systems import AffinePwlField, SfocfSystem

SMALL_PROBE = ProbeConfig(points_per_radius=20, samples=200)


def _scalar(mL, mR, b=0.0):
    return AffinePwlField([[mL]], [b], [[mR]], [b])


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(transient_fraction=1.0)


@pytest.mark.parametrize("method", ["RK45", "exact"])
def test_exponential_decay(method):
    cfg = IntegratorConfig(horizon=5.0, method=method)
    traj = integrate(_scalar(-1.0, -1.0), [1.0], cfg)
    assert np.all(np.diff(traj.times) > 0)
    np.testing.assert_allclose(traj.states[:, 0], np.exp(-traj.times), rtol=1e-7)


def test_no_crossing_single_piece():
    traj = integrate(_scalar(-1.0, -2.0), [-1.0], IntegratorConfig(horizon=10.0))
    assert traj.events == []
    assert set(traj.sides.tolist()) == {0}


def test_event_consistency():
    # a stable system with rotation so the orbit crosses repeatedly
    P = np.array([[-0.1, 1.0, 0.0], [-1.0, -0.1, 0.0], [0.0, 0.0, -1.0]])
    P_R = P.copy()
    P_R[:, 0] += [0.3, -0.5, 0.2]
    fld = AffinePwlField(P, np.zeros(3), P_R, np.zeros(3))
    cfg = IntegratorConfig(horizon=30.0, event_tol=1e-10)
    traj = integrate(fld, [1.0, 0.5, 0.2], cfg)
    assert len(traj.events) > 5
    for ev in traj.events:
        scale = max(1.0, np.linalg.norm(ev.state))
        assert abs(fld.switch(ev.state)) <= cfg.event_tol * scale
        np.testing.assert_allclose(fld.rhs(ev.state, 0), fld.rhs(ev.state, 1), atol=1e-9 * scale)
    dirs = [ev.direction for ev in traj.events]
    assert all(a == -b for a, b in zip(dirs, dirs[1:]))


def test_time_reversal_on_a_piece():
    M = np.array([[-1.0, 2.0], [-2.0, -1.0]])
    fwd = integrate(AffinePwlField(M, np.zeros(2), M, np.zeros(2)), [-5.0, 0.3],
                    IntegratorConfig(horizon=0.5, rel_tol=1e-10, abs_tol=1e-13))
    back = integrate(AffinePwlField(-M, np.zeros(2), -M, np.zeros(2)), fwd.states[-1],
                     IntegratorConfig(horizon=0.5, rel_tol=1e-10, abs_tol=1e-13))
    assert fwd.events == []
    np.testing.assert_allclose(back.states[-1], [-5.0, 0.3], rtol=10 * 1e-10 * 10)


def test_determinism():
    s = canard5d()
    z0 = np.r_[critical_manifold(layer_system(s))(np.array(0.2)), 0.2, 0.0]
    cfg = IntegratorConfig(horizon=50.0, max_step=0.5)
    a, b = integrate(s, z0, cfg), integrate(s, z0, cfg)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)


def test_exact_matches_rk(rng):
    s = stable3d(0.05)
    z0 = np.array([0.3, -0.4, 0.5])
    rk = integrate(s, z0, IntegratorConfig(horizon=30.0, rel_tol=1e-11, abs_tol=1e-13))
    ex = integrate(s, z0, IntegratorConfig(horizon=30.0, method="exact"))
    np.testing.assert_allclose(ex.states[-1], rk.states[-1], atol=1e-8)
    assert len(ex.events) == len(rk.events)


def test_canard_bounded_at_moderate_eps():
    s = canard5d(0.05)
    z0 = np.r_[critical_manifold(layer_system(s))(np.array(0.2)), 0.2, 0.0]
    traj = integrate(s, z0, IntegratorConfig(horizon=500.0, rel_tol=1e-8, max_step=0.5))
    assert not traj.diverged
    assert np.max(np.abs(traj.states)) < 10
    # the slow variable oscillates across the switching surface
    assert traj.states[:, 3].min() < 0 < traj.states[:, 3].max()


def test_divergence_reported():
    cfg = IntegratorConfig(horizon=100.0, divergence_norm=1e6)
    traj = integrate(_scalar(1.0, 1.0), [1.0], cfg)
    assert traj.diverged
    with pytest.raises(DivergenceError) as info:
        integrate(_scalar(1.0, 1.0), [1.0], cfg, raise_on_divergence=True)
    assert info.value.escape_time == pytest.approx(np.log(1e6), rel=1e-3)


def test_cycle_bounds_of_stable_equilibrium():
    cb = limit_cycle_bounds(_scalar(-1.0, -2.0, 1.0), [3.0], 0, IntegratorConfig(horizon=60.0))
    assert cb.min == pytest.approx(0.5, abs=1e-8) and cb.max == pytest.approx(0.5, abs=1e-8)
    assert cb.converged


def test_cycle_bounds_reduced_ocean_like():
    # attracting node on the left, repelling focus on the right, mu = 1
    rs = ReducedSystem(2, np.array([[-2.1, 1.0], [-0.01, 0.0]]), np.array([[0.1, 1.0], [-0.01, 0.0]]), 1.0)
    cb = limit_cycle_bounds(rs, [0.0, 0.0], 0, IntegratorConfig(horizon=4000.0, method="exact"))
    assert cb.converged
    assert cb.max - cb.min > 1.0


def test_sweep_stable_linear_equilibrium_branch():
    fam = lambda mu: ReducedSystem(1, np.array([[-1.0]]), np.array([[-2.0]]), mu)  # noqa: E731
    res = sweep(fam, "mu", np.linspace(-1, 1, 5), IntegratorConfig(horizon=40.0))
    rows = res.rows()
    assert len(rows) == 5
    eq = np.where(np.isnan(res.column("eq_L")), res.column("eq_R"), res.column("eq_L"))
    np.testing.assert_allclose(eq, [-1.0, -0.5, 0.0, 0.25, 0.5])
    np.testing.assert_allclose(res.column("cycle_max") - res.column("cycle_min"), 0.0, atol=1e-6)


def test_sweep_rejects_unsorted():
    with pytest.raises(ValueError):
        sweep(lambda v: None, "mu", [1.0, 0.0])


def test_piece_equilibria_admissibility():
    fld = _scalar(-1.0, -2.0, 1.0)
    eqs, adm, stab = piece_equilibria(fld)
    assert adm == {"L": False, "R": True}
    assert eqs["R"][0] == pytest.approx(0.5)
    assert stab["R"]


def test_trapping_contraction_and_rotation():
    ball = TrappingRegion("ball", np.zeros(2), extents=[1.0])
    contraction = ReducedSystem(2, -np.eye(2), -np.eye(2))
    rep = check_strong_trapping(contraction, ball)
    assert rep.passed and rep.worst_margin == pytest.approx(-1.0)
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = check_strong_trapping(ReducedSystem(2, rot, rot), ball)
    assert not rep.passed
    assert abs(rep.worst_margin) < 1e-12


def test_trapping_box_corners_checked():
    box = TrappingRegion("box", np.zeros(2), extents=[1.0, 1.0])
    Y, N = box.boundary(400)
    assert Y.shape == N.shape and np.all(np.linalg.norm(N, axis=1) == 1.0)
    assert check_strong_trapping(ReducedSystem(2, -np.eye(2), -np.eye(2)), box).passed


def test_stable3d_ellipsoid_trapping():
    rs = reduced_system(stable3d())
    assert check_strong_trapping(rs.with_mu(0.5), stable3d_region()).passed


def test_region_validation():
    with pytest.raises(ValueError):
        TrappingRegion("ball", [0.0], extents=[-1.0])
    with pytest.raises(ValueError):
        TrappingRegion("ellipsoid", [0.0, 0.0], matrix=[[1.0, 0.0], [0.0, -1.0]])


def test_interior_samples_inside(rng):
    reg = stable3d_region()
    assert np.all(reg.contains(reg.sample_interior(rng, 500)))


def test_invariance_stable_example():
    rep = invariance_experiment(stable3d(), stable3d_region(), M=1.0, N=10.0, eps_grid=[0.01],
                                samples=30, probe=SMALL_PROBE)
    assert rep.passed, rep.to_dict()


def test_invariance_refuses_canard():
    reg = TrappingRegion("ball", np.zeros(2), extents=[1.0])
    with pytest.raises(HypothesisViolation, match="refused"):
        invariance_experiment(canard5d(), reg, 1.0, 10.0, [0.01], samples=5, probe=SMALL_PROBE)


def test_invariance_small_N_reports_violations():
    rep = invariance_experiment(stable3d(), stable3d_region(), M=1.0, N=0.5, eps_grid=[0.05],
                                samples=20, probe=SMALL_PROBE, horizon_slow=2.0)
    assert rep.violations[0] > 0
    assert rep.exits[0.05]


def test_perturbation_linear_oracle():
    # one-piece family C(eps) = C(0) + eps D: both pieces share coefficients
    s = SfocfSystem(1, [1.0], [1.0], [2.0, 1.0], [2.0, 1.0], 0.05, 0.0)
    z0 = np.array([[0.3, -0.2, 0.4]])
    T = 3.0
    rep = perturbation_bound_experiment(s, z0, T, [0.0, 0.05, 0.01], points=300)
    assert rep.K_hat[0] == 0.0
    times = np.linspace(0, T, 301)[1:]
    for eps, k in zip(rep.eps[1:], rep.K_hat[1:]):
        Ce, C0 = s.at(eps).matrix("L"), s.at(0.0).matrix("L")
        d = [np.linalg.norm((expm(Ce * t) - expm(C0 * t)) @ z0[0]) / (eps * t) for t in times]
        assert k == pytest.approx(max(d), rel=1e-6)


def test_perturbation_canard_bounded():
    s = canard5d()
    Z0 = tube_initial_states(s, TrappingRegion("ball", np.zeros(2), extents=[0.5]), 5, seed=1)
    rep = perturbation_bound_experiment(s, Z0, 5.0, [0.05, 0.02, 0.01])
    assert rep.passed, rep.to_dict()


def test_reduced_vs_full_first_order():
    rep = reduced_vs_full_comparison(stable3d(), [0.5, 0.3], [0.04, 0.02, 0.01, 0.005])
    assert rep.slope == pytest.approx(1.0, abs=0.2)
    assert reduced_vs_full_comparison(stable3d(), [0.5, 0.3], [0.0]).discrepancy == [0.0]


def test_propagator_sample_matches_expm():
    M = np.array([[-0.5, 1.0], [-1.0, -0.5]])
    fld = AffinePwlField(M, np.zeros(2), M, np.zeros(2))
    out = PwlPropagator(fld).sample([[1.0, 0.0]], [0.0, 1.0, 2.5])
    for i, t in enumerate([0.0, 1.0, 2.5]):
        np.testing.assert_allclose(out[i, 0], expm(M * t) @ [1.0, 0.0], atol=1e-12)
