"""Trajectory products and numerical experiments on top of the simulator.

Covers limit-cycle bounds, parameter sweeps, strong trapping regions of
the reduced system, forward invariance of the tube ``Omega_{eps N}``
around the critical manifold, the linear-in-time perturbation bound and
the comparison of full and reduced slow dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import fsolve

from .errors import DivergenceError, HypothesisViolation, NumericalFailure
from .simulate import IntegratorConfig, PwlPropagator, integrate, parallel_map
from .slowfast import (
    ProbeConfig,
    critical_manifold,
    layer_system,
    reduced_system,
    stability_probe,
)
from .systems import LEFT, RIGHT, AffinePwlField, SfocfSystem

# --------------------------------------------------------------------------
# limit cycles and sweeps


@dataclass
class CycleBounds:
    min: float
    max: float
    converged: bool
    window: tuple
    diverged: bool = False

    @property
    def amplitude(self) -> float:
        return self.max - self.min


def _window_extrema(traj, t0, t1, index, points):
    sel = (traj.times >= t0) & (traj.times <= t1)
    vals = traj.states[sel, index]
    if traj.segments:
        grid = np.linspace(t0, t1, points)
        vals = np.r_[vals, traj.dense(grid)[:, index]]
    return float(np.min(vals)), float(np.max(vals))


def limit_cycle_bounds(system, z0, index: int, cfg: IntegratorConfig | None = None) -> CycleBounds:
    """Min and max of ``z[index]`` after discarding the transient.

    The retained window is split in two halves; the bounds count as
    converged when both halves agree to ``cfg.cycle_rtol`` relative to
    the amplitude (or to the observable's size for equilibria).
    """
    cfg = cfg or IntegratorConfig()
    traj = integrate(system, z0, cfg)
    t_start = traj.times[0]
    if traj.diverged:
        raise DivergenceError("orbit diverged while computing cycle bounds",
                              escape_time=traj.diagnostics.get("escape_time"), state=traj.states[-1])
    t_end = traj.times[-1]
    ta = t_start + cfg.transient_fraction * (t_end - t_start)
    tm = 0.5 * (ta + t_end)
    lo1, hi1 = _window_extrema(traj, ta, tm, index, cfg.dense_points)
    lo2, hi2 = _window_extrema(traj, tm, t_end, index, cfg.dense_points)
    lo, hi = min(lo1, lo2), max(hi1, hi2)
    scale = max(hi - lo, 1e-6 * max(1.0, abs(0.5 * (hi + lo))))
    conv = abs(lo1 - lo2) <= cfg.cycle_rtol * scale and abs(hi1 - hi2) <= cfg.cycle_rtol * scale
    return CycleBounds(lo, hi, bool(conv), (float(ta), float(t_end)))


@dataclass
class SweepPoint:
    value: float
    equilibria: dict              # side -> state or None
    admissible: dict              # side -> bool
    stable: dict                  # side -> bool or None
    cycle_min: float | None = None
    cycle_max: float | None = None
    converged: bool = False
    error: str | None = None

    def to_row(self, index):
        def comp(side):
            e = self.equilibria.get(side)
            return float(e[index]) if e is not None and self.admissible.get(side) else float("nan")
        return {
            "value": self.value,
            "eq_L": comp("L"), "eq_R": comp("R"),
            "eq_L_stable": self.stable.get("L"), "eq_R_stable": self.stable.get("R"),
            "cycle_min": float("nan") if self.cycle_min is None else self.cycle_min,
            "cycle_max": float("nan") if self.cycle_max is None else self.cycle_max,
            "converged": self.converged, "error": self.error or "",
        }


@dataclass
class SweepResult:
    parameter: str
    grid: np.ndarray
    points: list
    observable: int
    transient_fraction: float
    horizon: float

    def rows(self):
        return [p.to_row(self.observable) for p in self.points]

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows()], dtype=float)


def _jacobian(fun, z, step=1e-7):
    n = z.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step * max(1.0, abs(z[j]))
        J[:, j] = (fun(z + e) - fun(z - e)) / (2 * e[j])
    return J


def piece_equilibria(system, guess=None, tol: float = 1e-10):
    """Equilibria of both pieces with admissibility and linear stability.

    Affine pieces are solved exactly; smooth pieces by Newton iteration
    from ``guess``. A piece's equilibrium is admissible when it lies on
    that piece's side of the switching surface (weak inequality).
    """
    fld = system.field() if hasattr(system, "field") else system
    eqs, adm, stab = {}, {}, {}
    for side, tag in ((LEFT, "L"), (RIGHT, "R")):
        if getattr(fld, "is_affine", False):
            M, b = fld.M[side], fld.b[side]
            try:
                z = np.linalg.solve(M, -b)
            except np.linalg.LinAlgError:
                eqs[tag], adm[tag], stab[tag] = None, False, None
                continue
            J = M
        else:
            g = np.zeros(fld.n) if guess is None else np.asarray(guess, dtype=float)
            fun = lambda u, s=side: fld.rhs(u, s)  # noqa: E731
            z, info, ier, _ = fsolve(fun, g, full_output=True, xtol=1e-13)
            if ier != 1 or np.linalg.norm(fun(z)) > tol * max(1.0, np.linalg.norm(z)):
                eqs[tag], adm[tag], stab[tag] = None, False, None
                continue
            J = _jacobian(fun, z)
        h = fld.switch(z)
        ok = h <= tol if side == LEFT else h >= -tol
        eqs[tag] = z
        adm[tag] = bool(ok)
        stab[tag] = bool(np.max(np.linalg.eigvals(J).real) < 0)
    return eqs, adm, stab


def _sweep_point(args):
    family, value, index, cfg, guess, kick = args
    system = family(value)
    try:
        eqs, adm, stab = piece_equilibria(system, guess)
    except Exception as exc:  # recorded per point, the sweep continues
        return SweepPoint(value, {}, {}, {}, error=f"equilibrium: {exc}")
    pt = SweepPoint(value, eqs, adm, stab)
    start = None
    for tag in ("L", "R"):
        if adm.get(tag):
            start = eqs[tag].copy()
            break
    if start is None:
        start = np.asarray(guess if guess is not None else np.zeros(system.field().n), dtype=float).copy()
    start[index] += kick * max(1.0, abs(start[index]))
    try:
        cb = limit_cycle_bounds(system, start, index, cfg)
        pt.cycle_min, pt.cycle_max, pt.converged = cb.min, cb.max, cb.converged
    except (NumericalFailure, ValueError) as exc:
        pt.error = f"{type(exc).__name__}: {exc}"
    return pt


def sweep(family, parameter: str, grid, cfg: IntegratorConfig | None = None, index: int = 0,
          guess=None, kick: float = 1e-4) -> SweepResult:
    """Equilibria and limit-cycle bounds along a parameter grid.

    ``family(value)`` builds the system for one grid value. Each point
    starts from the admissible equilibrium perturbed by ``kick`` in the
    observed component. Points run through ``parallel_map``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or not np.all(np.isfinite(grid)) or np.any(np.diff(grid) < 0):
        raise ValueError("sweep grid must be finite and sorted")
    cfg = cfg or IntegratorConfig()
    pts = parallel_map(_sweep_point, [(family, float(v), index, cfg, guess, kick) for v in grid])
    return SweepResult(parameter, grid, pts, index, cfg.transient_fraction, cfg.horizon)


# --------------------------------------------------------------------------
# trapping regions


@dataclass(frozen=True, eq=False)
class TrappingRegion:
    """Compact region in the slow variables.

    ``box``: ``|y_i - c_i| <= extents_i``; ``ball``: ``|y - c| <= extents[0]``;
    ``ellipsoid``: ``(y - c)^T P (y - c) <= 1`` with symmetric positive
    definite ``matrix``.
    """

    shape: str
    center: np.ndarray
    extents: np.ndarray | None = None
    matrix: np.ndarray | None = None
    density: int = 10_000

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.shape in ("box", "ball"):
            e = np.atleast_1d(np.asarray(self.extents, dtype=float))
            if self.shape == "box" and e.shape != c.shape:
                raise ValueError("box extents must match the center's dimension")
            if np.any(e <= 0):
                raise ValueError("extents must be positive")
            object.__setattr__(self, "extents", e)
        elif self.shape == "ellipsoid":
            P = np.asarray(self.matrix, dtype=float)
            if P.shape != (c.size, c.size) or not np.allclose(P, P.T) or np.min(np.linalg.eigvalsh(P)) <= 0:
                raise ValueError("ellipsoid matrix must be symmetric positive definite")
            object.__setattr__(self, "matrix", P)
        else:
            raise ValueError(f"unknown region shape {self.shape!r}")

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, Y, slack: float = 0.0) -> np.ndarray:
        D = np.atleast_2d(Y) - self.center
        if self.shape == "box":
            return np.all(np.abs(D) <= self.extents * (1 + slack), axis=1)
        if self.shape == "ball":
            return np.linalg.norm(D, axis=1) <= self.extents[0] * (1 + slack)
        return np.einsum("ij,jk,ik->i", D, self.matrix, D) <= (1 + slack) ** 2

    def sample_interior(self, rng, count: int) -> np.ndarray:
        d = self.dim
        if self.shape == "box":
            return self.center + self.extents * rng.uniform(-1, 1, (count, d))
        u = rng.standard_normal((count, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u *= rng.uniform(0, 1, (count, 1)) ** (1.0 / d)
        if self.shape == "ball":
            return self.center + self.extents[0] * u
        L = np.linalg.cholesky(self.matrix)
        return self.center + np.linalg.solve(L.T, u.T).T

    def boundary(self, count: int | None = None):
        """Boundary samples with outward unit normals; returns ``(points, normals)``.

        Box samples on edges carry every adjacent face normal (one row per
        face), so corners must be inward for all of them.
        """
        count = count or self.density
        d = self.dim
        if self.shape == "box":
            per = max(2, int(round((count / (2 * d)) ** (1.0 / max(1, d - 1))))) if d > 1 else 1
            pts, nrm = [], []
            axes = [np.linspace(-1, 1, per)] * (d - 1)
            grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d - 1, -1).T if d > 1 else np.zeros((1, 0))
            for i in range(d):
                for sgn in (-1.0, 1.0):
                    U = np.empty((grid.shape[0], d))
                    U[:, i] = sgn
                    U[:, [j for j in range(d) if j != i]] = grid
                    pts.append(self.center + U * self.extents)
                    n = np.zeros((grid.shape[0], d))
                    n[:, i] = sgn
                    nrm.append(n)
            return np.vstack(pts), np.vstack(nrm)
        if d == 2:
            th = np.linspace(0, 2 * np.pi, count, endpoint=False)
            u = np.c_[np.cos(th), np.sin(th)]
        else:
            u = np.random.default_rng(0).standard_normal((count, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        if self.shape == "ball":
            return self.center + self.extents[0] * u, u
        L = np.linalg.cholesky(self.matrix)
        Y = np.linalg.solve(L.T, u.T).T
        n = Y @ self.matrix
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return self.center + Y, n

    def to_dict(self):
        out = {"shape": self.shape, "center": self.center.tolist()}
        if self.extents is not None:
            out["extents"] = self.extents.tolist()
        if self.matrix is not None:
            out["matrix"] = self.matrix.tolist()
        return out


@dataclass
class TrappingReport:
    passed: bool
    worst_margin: float
    worst_point: np.ndarray
    samples: int
    margin: float

    def to_dict(self):
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "worst_point": self.worst_point.tolist(), "samples": self.samples,
                "required_margin": self.margin}


def check_strong_trapping(rs, region: TrappingRegion, margin: float = 0.0,
                          samples: int | None = None) -> TrappingReport:
    """Strict inward flow of the reduced field on the region's boundary.

    The worst margin is the largest value of ``n . dy/dtau`` over the
    samples; the region passes when it is below ``-margin``.
    """
    Y, N = region.boundary(samples)
    F = rs.rhs(Y) if hasattr(rs, "rhs") else np.array([rs(y) for y in Y])
    dots = np.einsum("ij,ij->i", N, F)
    j = int(np.argmax(dots))
    worst = float(dots[j])
    return TrappingReport(bool(worst < -margin), worst, Y[j].copy(), Y.shape[0], margin)


# --------------------------------------------------------------------------
# experiments near the critical manifold


def _tube_samples(s: SfocfSystem, H, region, rng, count, radius):
    Y = region.sample_interior(rng, count)
    u = rng.standard_normal((count, s.k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    X = H(Y[:, 0]) + radius * u
    return np.hstack([X, Y])


def check_hypotheses(s: SfocfSystem, region: TrappingRegion, probe: ProbeConfig | None = None):
    """Reasons why the invariance theorem does not apply (empty when it does)."""
    reasons = []
    rs = reduced_system(s, warn=False)
    tr = check_strong_trapping(rs, region)
    if not tr.passed:
        reasons.append(f"region is not strongly trapping (worst margin {tr.worst_margin:.3g})")
    rep = stability_probe(layer_system(s, warn=False), probe)
    if rep.verdict != "stable-evidence":
        reasons.append(f"critical manifold stability probe: {rep.verdict} ({rep.reason})")
    return reasons


@dataclass
class InvarianceReport:
    eps: list
    violations: list
    min_N: list
    exits: dict
    M: float
    N: float
    samples: int
    horizon_slow: float
    hypotheses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v == 0 for v in self.violations)

    def to_dict(self):
        return {"eps": self.eps, "violations": self.violations, "min_N": self.min_N,
                "M": self.M, "N": self.N, "samples": self.samples,
                "horizon_slow": self.horizon_slow, "hypothesis_failures": self.hypotheses,
                "exits": {str(k): v for k, v in self.exits.items()}, "passed": self.passed}


def _tube_run(s, H, region, Z0, t_end, max_step, N):
    prop = PwlPropagator(s.field(), max_step=max_step)
    k = s.k
    worst = np.zeros(Z0.shape[0])
    left_region = np.zeros(Z0.shape[0], dtype=bool)
    exit_state = [None] * Z0.shape[0]
    Z, S = Z0.copy(), prop.sides(Z0)
    nsteps = max(1, int(np.ceil(t_end / prop.max_step)))
    dt = t_end / nsteps
    for _ in range(nsteps + 1):
        X, Y = Z[:, :k], Z[:, k:]
        dist = np.linalg.norm(X - H(Y[:, 0]), axis=1) / s.epsilon
        worst = np.maximum(worst, dist)
        out = ~region.contains(Y, slack=1e-12)
        bad = (out | (dist > N)) & np.array([e is None for e in exit_state])
        for j in np.flatnonzero(bad):
            exit_state[j] = Z[j].copy()
        left_region |= out
        Z, S = prop._advance(Z, S, dt)
    return worst, left_region, exit_state


def invariance_experiment(s: SfocfSystem, region: TrappingRegion, M: float, N: float, eps_grid,
                          samples: int = 100, seed: int = 0, horizon_slow: float = 10.0,
                          override: bool = False, probe: ProbeConfig | None = None) -> InvarianceReport:
    """Sample ``Omega_{eps M}``, integrate to ``horizon_slow / eps`` and check ``Omega_{eps N}``.

    ``s`` is a family: ``s.at(eps)`` gives the system at each grid value.
    The empirical smallest admissible ``N`` is the largest observed
    ``|x - H(y_1)| / eps`` over orbits that keep ``y`` in the region.
    """
    reasons = check_hypotheses(s, region, probe)
    if reasons and not override:
        raise HypothesisViolation("invariance experiment refused: " + "; ".join(reasons))
    rng = np.random.default_rng(seed)
    eps_out, viol, min_n, exits = [], [], [], {}
    for eps in eps_grid:
        se = s.at(float(eps))
        H = critical_manifold(layer_system(se, warn=False))
        Z0 = _tube_samples(se, H, region, rng, samples, eps * M)
        rho = max(np.max(np.abs(np.linalg.eigvals(se.matrix(side)))) for side in (LEFT, RIGHT))
        worst, left_region, ex = _tube_run(se, H, region, Z0, horizon_slow / eps, 0.25 / rho, N)
        bad = left_region | (worst > N)
        eps_out.append(float(eps))
        viol.append(int(bad.sum()))
        stay = ~left_region
        min_n.append(float(np.max(worst[stay])) if np.any(stay) else float("inf"))
        exits[float(eps)] = [ex[j].tolist() for j in np.flatnonzero(bad)[:10]]
    return InvarianceReport(eps_out, viol, min_n, exits, float(M), float(N), samples,
                            float(horizon_slow), reasons)


def _zero_eps_field(s: SfocfSystem) -> AffinePwlField:
    s0 = s.at(0.0)
    g = np.zeros(s.n)
    return AffinePwlField(s0.matrix(LEFT), g, s0.matrix(RIGHT), g)


@dataclass
class PerturbationReport:
    eps: list
    K_hat: list
    T: float

    @property
    def ratio(self) -> float:
        k = [v for v in self.K_hat if v > 0]
        return max(k) / min(k) if k else float("nan")

    @property
    def passed(self) -> bool:
        return np.isfinite(self.ratio) and self.ratio < 5

    def to_dict(self):
        return {"eps": self.eps, "K_hat": self.K_hat, "T": self.T, "ratio": self.ratio,
                "passed": bool(self.passed)}


def perturbation_bound_experiment(s: SfocfSystem, Z0, T: float, eps_grid, points: int = 200) -> PerturbationReport:
    """Largest ``|phi_t(z; eps) - phi_t(z; 0)| / (eps t)`` over ``t`` in ``(0, T]``.

    At ``eps = 0`` the statistic is defined as 0 (identical flows).
    """
    Z0 = np.atleast_2d(np.asarray(Z0, dtype=float))
    times = np.linspace(0.0, T, points + 1)[1:]
    k_hat = []
    for eps in eps_grid:
        eps = float(eps)
        if eps == 0:
            k_hat.append(0.0)
            continue
        se = s.at(eps)
        p_eps = PwlPropagator(se.field())
        p_0 = PwlPropagator(_zero_eps_field(se))
        A = p_eps.sample(Z0, times)
        B = p_0.sample(Z0, times)
        d = np.linalg.norm(A - B, axis=2) / (eps * times[:, None])
        k_hat.append(float(np.max(d)))
    return PerturbationReport([float(e) for e in eps_grid], k_hat, float(T))


def tube_initial_states(s: SfocfSystem, region: TrappingRegion, count: int, radius: float = 1.0,
                        seed: int = 0) -> np.ndarray:
    """Initial states in ``Omega_radius``: ``y`` in the region, ``x`` within ``radius`` of ``H(y_1)``."""
    rng = np.random.default_rng(seed)
    H = critical_manifold(layer_system(s, warn=False))
    Y = region.sample_interior(rng, count)
    u = rng.standard_normal((count, s.k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u *= rng.uniform(0, 1, (count, 1)) ** (1.0 / s.k)
    return np.hstack([H(Y[:, 0]) + radius * u, Y])


@dataclass
class ComparisonReport:
    eps: list
    discrepancy: list
    slope: float
    tau_end: float

    def to_dict(self):
        return {"eps": self.eps, "discrepancy": self.discrepancy, "slope": self.slope,
                "tau_end": self.tau_end}


def reduced_vs_full_comparison(s: SfocfSystem, y0, eps_grid, tau_end: float = 5.0,
                               points: int = 400) -> ComparisonReport:
    """Sup-norm gap between full and reduced slow trajectories on ``[0, tau_end]``.

    Both start from the same slow state with ``x = H(y_1)``.
    """
    y0 = np.asarray(y0, dtype=float)
    taus = np.linspace(0.0, tau_end, points + 1)
    rs = reduced_system(s, warn=False)
    Yr = PwlPropagator(rs.field()).sample(y0[None, :], taus)[:, 0, :]
    gaps = []
    for eps in eps_grid:
        eps = float(eps)
        if eps == 0:
            gaps.append(0.0)
            continue
        se = s.at(eps)
        H = critical_manifold(layer_system(se, warn=False))
        z0 = np.r_[H(np.array(y0[0])), y0]
        Zf = PwlPropagator(se.field()).sample(z0[None, :], taus / eps)[:, 0, :]
        gaps.append(float(np.max(np.linalg.norm(Zf[:, s.k:] - Yr, axis=1))))
    e = np.array([float(v) for v in eps_grid])
    g = np.array(gaps)
    ok = (e > 0) & (g > 0)
    slope = float(np.polyfit(np.log(e[ok]), np.log(g[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return ComparisonReport([float(v) for v in e], gaps, slope, float(tau_end))
