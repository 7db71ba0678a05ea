"""Singular limit structures of an SFOCF system.

With ``eps -> 0`` the fast block obeys the layer equations
``x' = A_X x + e_k y_1`` (switching on ``x_1``), whose equilibria form
the piecewise-linear critical manifold ``x = H(y_1)``. On the slow time
``tau = eps t`` the slow variables follow the reduced system
``dy/dtau = B_X y + e_{n-k} mu`` (switching on ``y_1``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import SingularLayerError, SpectralGapError
from .linalg import (
    Spectrum,
    companion_from_coeffs,
    eigenvalues,
    match_eigenvalues,
    poly_from_roots,
)
from .simulate import IntegratorConfig, PwlPropagator, integrate
from .systems import (
    LEFT,
    RIGHT,
    AffinePwlField,
    PlacementRule,
    SfocfSystem,
    sfocf_matrix,
)

BORDERLINE_RTOL = 64 * np.finfo(float).eps


def _e(m, i):
    v = np.zeros(m)
    v[i] = 1.0
    return v


# --------------------------------------------------------------------------
# layer equations and critical manifold


@dataclass(frozen=True, eq=False)
class LayerSystem:
    k: int
    A_L: np.ndarray
    A_R: np.ndarray

    @property
    def a_L(self) -> np.ndarray:
        return -self.A_L[:, 0]

    @property
    def a_R(self) -> np.ndarray:
        return -self.A_R[:, 0]

    def matrix(self, side) -> np.ndarray:
        return self.A_L if side in (LEFT, "L") else self.A_R

    def spectra(self):
        return eigenvalues(self.A_L), eigenvalues(self.A_R)

    def is_hurwitz(self) -> bool:
        return all(sp.is_hurwitz() for sp in self.spectra())

    def field(self, y1: float = 0.0) -> AffinePwlField:
        g = _e(self.k, self.k - 1) * float(y1)
        return AffinePwlField(self.A_L, g, self.A_R, g)


def layer_system(s: SfocfSystem, warn: bool = True) -> LayerSystem:
    a_L, a_R, _, _ = s.limit_coefficients(warn=warn)
    return LayerSystem(s.k, companion_from_coeffs(a_L), companion_from_coeffs(a_R))


@dataclass(frozen=True, eq=False)
class CriticalManifold:
    branch_L: np.ndarray
    branch_R: np.ndarray
    det_L: float
    det_R: float

    def __call__(self, y1):
        """``H(y_1)``; vectorised over an array of ``y_1`` values (rows)."""
        y = np.asarray(y1, dtype=float)
        out = np.where(y[..., None] <= 0, self.branch_L, self.branch_R) * y[..., None]
        return out

    def tangent(self, side) -> np.ndarray:
        return self.branch_L if side in (LEFT, "L") else self.branch_R


def critical_manifold(ls: LayerSystem) -> CriticalManifold:
    branches, dets = [], []
    for A in (ls.A_L, ls.A_R):
        a = -A[:, 0]
        if a[-1] == 0:
            raise SingularLayerError("layer matrix is singular (a_k(0) = 0)")
        branches.append(np.r_[1.0, a[:-1]] / a[-1])
        dets.append(float(a[-1]))
    hurwitz = ls.is_hurwitz()
    if not hurwitz:
        warnings.warn("a layer matrix is not Hurwitz; H is defined but need not attract",
                      stacklevel=2)
    else:
        assert min(dets) > 0, "Hurwitz layer matrices must have a_k(0) > 0"
    return CriticalManifold(branches[0], branches[1], dets[0], dets[1])


# --------------------------------------------------------------------------
# reduced system


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    m: int
    B_L: np.ndarray
    B_R: np.ndarray
    mu: float = 0.0

    def matrix(self, side) -> np.ndarray:
        return self.B_L if side in (LEFT, "L") else self.B_R

    def spectra(self):
        return eigenvalues(self.B_L), eigenvalues(self.B_R)

    def forcing(self) -> np.ndarray:
        return _e(self.m, self.m - 1) * self.mu

    def field(self) -> AffinePwlField:
        g = self.forcing()
        return AffinePwlField(self.B_L, g, self.B_R, g)

    def rhs(self, Y) -> np.ndarray:
        """Reduced vector field at rows of ``Y`` (slow time)."""
        Y = np.atleast_2d(Y)
        left = Y[:, 0] <= 0
        out = np.where(left[:, None], Y @ self.B_L.T, Y @ self.B_R.T)
        return out + self.forcing()

    def with_mu(self, mu: float) -> "ReducedSystem":
        return ReducedSystem(self.m, self.B_L, self.B_R, mu)


def reduced_system(s: SfocfSystem, warn: bool = True) -> ReducedSystem:
    a_L, a_R, b_L, b_R = s.limit_coefficients(warn=warn)
    B = []
    for a, b in ((a_L, b_L), (a_R, b_R)):
        if a[-1] == 0:
            raise SingularLayerError("layer matrix is singular (a_k(0) = 0)")
        B.append(companion_from_coeffs(b / a[-1]))
    return ReducedSystem(s.m, B[0], B[1], s.mu)


def reduced_from_eigenvalues(nu_L, nu_R, mu: float = 0.0) -> ReducedSystem:
    """Reduced system whose companion matrices have the given spectra."""
    B_L = companion_from_coeffs(poly_from_roots(nu_L))
    B_R = companion_from_coeffs(poly_from_roots(nu_R))
    return ReducedSystem(B_L.shape[0], B_L, B_R, mu)


# --------------------------------------------------------------------------
# eigenvalue placement and the factorisation diagnostic


def _roots(v):
    return np.asarray(v.eigenvalues if isinstance(v, Spectrum) else v, dtype=complex)


def eigen_placement(fast_L, slow_L, fast_R, slow_R, epsilon: float, mu: float = 0.0,
                    tol: float = 1e-8) -> SfocfSystem:
    """SFOCF system whose pieces have eigenvalues ``fast_X`` and ``epsilon * slow_X``.

    The returned system carries the placement rule, so it can be
    re-evaluated at other epsilon values and its epsilon -> 0 limit is
    exact. The placement is checked by recomputing the eigenvalues.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rule = PlacementRule(_roots(fast_L), _roots(slow_L), _roots(fast_R), _roots(slow_R))
    a_L, a_R, b_L, b_R = rule(epsilon)
    coeffs = np.r_[a_L, a_R, b_L, b_R]
    if not np.all(np.isfinite(coeffs)):
        raise OverflowError("placed coefficients overflow")
    sys = SfocfSystem(rule.k, a_L, a_R, b_L, b_R, epsilon, mu, rule=rule)
    for side in (LEFT, RIGHT):
        target = np.r_[rule.fast[side], epsilon * rule.slow[side]]
        got = eigenvalues(sys.matrix(side)).eigenvalues
        a, b = match_eigenvalues(got, target)
        err = np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(target))))
        if err > tol:
            raise ArithmeticError(f"placed eigenvalues reproduced only to {err:.3g}")
    return sys


@dataclass
class FactorizationReport:
    eps: np.ndarray
    fast_error: dict
    slow_error: dict
    fast_slope: dict
    slow_slope: dict
    ambiguous: dict
    frozen: bool

    @property
    def passed(self) -> bool:
        return all(abs(self.fast_slope[s] - 1) <= 0.3 and abs(self.slow_slope[s] - 2) <= 0.3
                   for s in ("L", "R"))

    def to_dict(self):
        return {"eps": self.eps.tolist(), "frozen_coefficients": self.frozen,
                "fast_error": {k: v.tolist() for k, v in self.fast_error.items()},
                "slow_error": {k: v.tolist() for k, v in self.slow_error.items()},
                "fast_slope": self.fast_slope, "slow_slope": self.slow_slope,
                "ambiguous": {k: v.tolist() for k, v in self.ambiguous.items()},
                "passed": self.passed}


def _slope(eps, err):
    ok = err > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[ok]), np.log(err[ok]), 1)[0])


def eigen_factorization_check(s: SfocfSystem, eps_grid, use_rule: bool = False) -> FactorizationReport:
    """Compare ``eig(C_X(eps))`` with ``eig(A_X)`` and ``eps * eig(B_X)``.

    By default the coefficients are frozen at their eps -> 0 limits, so
    the eps-dependence sits only in the sparsity pattern; with
    ``use_rule=True`` the system's own eps-rule is followed instead.
    """
    eps_grid = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    ls = layer_system(s)
    rs = reduced_system(s, warn=False)
    limits = s.limit_coefficients(warn=False)
    fe, se, amb = {}, {}, {}
    for side, tag in ((LEFT, "L"), (RIGHT, "R")):
        lam = eigenvalues(ls.matrix(side)).eigenvalues
        nu = eigenvalues(rs.matrix(side)).eigenvalues
        fast_err, slow_err, flags = [], [], []
        for eps in eps_grid:
            if use_rule:
                co = s.coefficients_at(eps)
            else:
                co = limits
            a, b = (co[0], co[2]) if side == LEFT else (co[1], co[3])
            got = eigenvalues(sfocf_matrix(a, b, eps)).eigenvalues
            target = np.r_[lam, eps * nu]
            t_sorted, g_matched = match_eigenvalues(target, got)
            # match_eigenvalues keeps the target order, which lists fast values first
            is_fast = np.arange(target.size) < lam.size
            d = np.abs(t_sorted - g_matched)
            fast_err.append(float(np.max(d[is_fast])))
            slow_err.append(float(np.max(d[~is_fast])))
            gap = float(np.min(np.abs(lam[:, None] - eps * nu[None, :])))
            flags.append(gap <= 2 * float(np.max(d)))
        fe[tag] = np.array(fast_err)
        se[tag] = np.array(slow_err)
        amb[tag] = np.array(flags)
    fs = {t: _slope(eps_grid, fe[t]) for t in fe}
    ss = {t: _slope(eps_grid, se[t]) for t in se}
    return FactorizationReport(eps_grid, fe, se, fs, ss, amb, not use_rule)


def slow_eigenvalues(s: SfocfSystem):
    """``(fast, slow / eps)`` eigenvalue groups of each piece, split by magnitude."""
    out = {}
    for side, tag in ((LEFT, "L"), (RIGHT, "R")):
        w = eigenvalues(s.matrix(side)).eigenvalues
        order = np.argsort(np.abs(w), kind="stable")
        slow = w[order[: s.m]]
        fast = w[order[s.m:]]
        out[tag] = (Spectrum(np.sort_complex(fast)), Spectrum(np.sort_complex(slow / s.epsilon)))
    return out


# --------------------------------------------------------------------------
# numerical stability probe of the critical manifold


@dataclass(frozen=True)
class ProbeConfig:
    points_per_radius: int = 200
    radii: tuple = (0.1, 1.0, 10.0, 100.0)
    y1_values: tuple = (-1.0, 0.0, 1.0)
    horizon_factor: float = 50.0
    divergence: float = 1e6
    samples: int = 400
    seed: int = 0


@dataclass
class StabilityReport:
    verdict: str
    alpha_hat: float
    beta_hat: float
    witness: np.ndarray | None
    samples: int
    witness_y1: float | None = None
    reason: str = ""
    horizon: float = 0.0
    per_y1: dict = field(default_factory=dict)

    def to_dict(self):
        return {"verdict": self.verdict, "alpha_hat": self.alpha_hat, "beta_hat": self.beta_hat,
                "witness": None if self.witness is None else self.witness.tolist(),
                "witness_y1": self.witness_y1, "samples": self.samples, "reason": self.reason,
                "horizon": self.horizon, "per_y1": self.per_y1,
                "note": "stable-evidence is numerical evidence on a finite sample, not a proof"}


def _sphere(rng, n, k):
    u = rng.standard_normal((n, k))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def stability_probe(ls: LayerSystem, cfg: ProbeConfig | None = None) -> StabilityReport:
    """Sample the layer flow around ``H(y_1)`` and look for escape or decay.

    Distances are taken relative to the initial distance, which by
    homogeneity of the layer flow makes large radii as informative as
    small ones about the dynamics near the switching surface.
    """
    cfg = cfg or ProbeConfig()
    specs = ls.spectra()
    max_re = max(sp.max_real for sp in specs)
    nsamp = len(cfg.y1_values) * len(cfg.radii) * cfg.points_per_radius
    if max_re >= 0:
        return StabilityReport("inconclusive", float("nan"), float("nan"), None, 0,
                               reason=f"layer matrices not Hurwitz (max Re = {max_re:.3g})")
    H = critical_manifold(ls)
    T = cfg.horizon_factor / abs(max_re)
    times = np.linspace(0.0, T, cfg.samples + 1)
    rng = np.random.default_rng(cfg.seed)
    k = ls.k
    beta = np.inf
    rows = []      # (y1, x0, times, rel distances, usable count)
    per = {}
    for y1 in cfg.y1_values:
        Hy = H(np.array(y1))
        X0 = np.vstack([Hy + r * _sphere(rng, cfg.points_per_radius, k) for r in cfg.radii])
        d0 = np.linalg.norm(X0 - Hy, axis=1)
        prop = PwlPropagator(ls.field(y1), max_step=0.5 / max(np.max(np.abs(sp.eigenvalues)) for sp in specs))
        Z, S = X0.copy(), prop.sides(X0)
        rel = np.full((times.size, Z.shape[0]), np.nan)
        rel[0] = 1.0
        floor = 1e-12 * max(1.0, float(np.linalg.norm(Hy))) / d0
        live = np.ones(Z.shape[0], dtype=bool)
        diverged = np.zeros(Z.shape[0], dtype=bool)
        for i in range(1, times.size):
            if not np.any(live):
                break
            Z[live], S[live] = prop.advance(Z[live], S[live], times[i] - times[i - 1])
            r = np.linalg.norm(Z - Hy, axis=1) / d0
            rel[i, live] = r[live]
            diverged |= live & (r > cfg.divergence)
            live &= ~diverged & (r > floor)
        per[str(y1)] = {"diverged": int(diverged.sum()), "max_final_ratio": float(np.nanmax(rel[-1])) if np.any(np.isfinite(rel[-1])) else None}
        if np.any(diverged):
            j = int(np.flatnonzero(diverged)[0])
            return StabilityReport("unstable-witness", float("nan"), float("nan"), X0[j].copy(),
                                   Z.shape[0], witness_y1=float(y1), horizon=T, per_y1=per,
                                   reason=f"distance to H grew by more than {cfg.divergence:g}")
        rows.append((rel, floor))
    # envelope fit: beta from the second half of each orbit's usable samples
    undecayed = 0
    for rel, floor in rows:
        for j in range(rel.shape[1]):
            r = rel[:, j]
            usable = np.isfinite(r) & (r > floor[j] if np.ndim(floor) else r > floor)
            idx = np.flatnonzero(usable)
            if idx.size < 4:
                continue
            half = idx[idx.size // 2:]
            slope = np.polyfit(times[half], np.log(r[half]), 1)[0]
            beta = min(beta, -slope)
            if r[idx[-1]] > 1e-3 and idx[-1] == times.size - 1:
                undecayed += 1
    if not np.isfinite(beta) or beta <= 0 or undecayed:
        return StabilityReport("inconclusive", float("nan"), float(beta), None, nsamp, horizon=T,
                               per_y1=per, reason=f"{undecayed} orbits did not decay within the horizon")
    alpha = 1.0
    for rel, floor in rows:
        with np.errstate(invalid="ignore"):
            env = rel * np.exp(beta * times)[:, None]
        alpha = max(alpha, float(np.nanmax(env)))
    return StabilityReport("stable-evidence", alpha, float(beta), None, nsamp, horizon=T, per_y1=per)


@dataclass
class HomogeneityReport:
    max_error_xi: float
    max_error_y1: float
    tolerance: float
    draws: int

    @property
    def passed(self) -> bool:
        return max(self.max_error_xi, self.max_error_y1) <= self.tolerance

    def to_dict(self):
        return {"max_error_xi": self.max_error_xi, "max_error_y1": self.max_error_y1,
                "tolerance": self.tolerance, "draws": self.draws, "passed": self.passed}


def homogeneity_check(ls: LayerSystem, draws: int = 100, seed: int = 0,
                      cfg: IntegratorConfig | None = None, t_max: float = 10.0) -> HomogeneityReport:
    """Check ``xi phi_t(x; 0) = phi_t(xi x; 0)`` and ``phi_t(x; y1) = y1 phi_t(x / y1; 1)``.

    Errors are relative to the size of the compared states; the tolerance
    is ten times the integrator's relative tolerance.
    """
    cfg = cfg or IntegratorConfig(rel_tol=1e-9, abs_tol=1e-14)
    rng = np.random.default_rng(seed)
    f0, f1 = ls.field(0.0), ls.field(1.0)
    e_xi = e_y = 0.0

    def end(fld, x, t):
        return integrate(fld, x, IntegratorConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                                                   max_step=cfg.max_step, horizon=t)).states[-1]

    for _ in range(draws):
        x = rng.standard_normal(ls.k)
        xi = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        y1 = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        t = float(rng.uniform(0.1, t_max))
        a = xi * end(f0, x, t)
        b = end(f0, xi * x, t)
        e_xi = max(e_xi, float(np.linalg.norm(a - b)) / max(np.linalg.norm(a), 1e-300))
        c = end(ls.field(y1), x, t)
        d = y1 * end(f1, x / y1, t)
        e_y = max(e_y, float(np.linalg.norm(c - d)) / max(np.linalg.norm(c), 1e-300))
    return HomogeneityReport(e_xi, e_y, 10 * cfg.rel_tol, draws)


# --------------------------------------------------------------------------
# two-dimensional reduced systems


@dataclass(frozen=True)
class PieceClass:
    label: str            # e.g. "repelling focus", "attracting node", "saddle"
    trace: float
    det: float
    discriminant: float
    borderline: bool

    @property
    def attracting(self) -> bool:
        return self.label.startswith("attracting")

    def to_dict(self):
        return {"label": self.label, "trace": self.trace, "det": self.det,
                "discriminant": self.discriminant, "borderline": self.borderline}


def classify_matrix(B) -> PieceClass:
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2):
        raise ValueError("classification needs a 2x2 matrix")
    tr = float(np.trace(B))
    det = float(B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0])
    disc = tr * tr - 4.0 * det
    scale = tr * tr + 4.0 * abs(det)
    border = abs(disc) <= BORDERLINE_RTOL * max(scale, np.finfo(float).tiny)
    if det < 0:
        return PieceClass("saddle", tr, det, disc, abs(det) <= BORDERLINE_RTOL * max(scale, 1e-300))
    if tr == 0 or abs(tr) <= BORDERLINE_RTOL * np.sqrt(max(abs(det), 1e-300)):
        return PieceClass("center", tr, det, disc, True)
    kind = "node" if disc >= 0 else "focus"
    if border:
        kind = "degenerate node"
    stab = "attracting" if tr < 0 else "repelling"
    return PieceClass(f"{stab} {kind}", tr, det, disc, bool(border))


def _predict(cl: PieceClass, cr: PieceClass) -> str:
    pair = (cl, cr)
    if any(c.label == "saddle" for c in pair):
        return "saddle piece: no Hopf-like prediction"
    if any(c.label.startswith("repelling") and "node" in c.label for c in pair):
        return "no limit cycle is created locally"
    att = [c for c in pair if c.attracting]
    rep_focus = [c for c in pair if c.label == "repelling focus"]
    if att and rep_focus:
        return "Hopf-like bifurcation creating a small amplitude oscillation"
    if len(att) == 2:
        return "equilibrium persists through the bifurcation"
    return "not covered by the classification"


def classify_2d(rs: ReducedSystem) -> dict:
    if rs.m != 2:
        raise ValueError(f"classification needs a two-dimensional reduced system (m = {rs.m})")
    cl, cr = classify_matrix(rs.B_L), classify_matrix(rs.B_R)
    return {"L": cl, "R": cr, "prediction": _predict(cl, cr)}


def locate_class_change(family, lo: float, hi: float, side: str = "R", tol: float = 1e-12,
                        max_iter: int = 200) -> float:
    """Bisect for the parameter at which the class label of ``side`` changes.

    ``family(p)`` returns a 2x2 matrix or a ReducedSystem.
    """
    def label(p):
        obj = family(p)
        B = obj.matrix(side) if isinstance(obj, ReducedSystem) else obj
        return classify_matrix(B).label
    la, lb = label(lo), label(hi)
    if la == lb:
        raise ValueError(f"no class change on [{lo}, {hi}] ({la!r} at both ends)")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        lm = label(mid)
        if lm == la:
            lo = mid
        elif lm == lb:
            hi = mid
        else:
            # borderline label at the flip itself
            return mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# linear slow manifolds


@dataclass(frozen=True, eq=False)
class SlowManifoldPair:
    basis_L: np.ndarray
    basis_R: np.ndarray
    anchor_L: np.ndarray | None
    anchor_R: np.ndarray | None
    residual_L: float
    residual_R: float
    gap_L: float
    gap_R: float


def invariant_subspace(C, count: int, gap: float = 5.0):
    """Orthonormal basis for the ``count`` smallest-magnitude eigenvalues of ``C``."""
    n = C.shape[0]
    w = eigenvalues(C).eigenvalues
    mags = np.sort(np.abs(w))
    small, big = mags[count - 1], mags[count] if count < n else np.inf
    ratio = big / small if small > 0 else np.inf
    if ratio < gap:
        raise SpectralGapError(f"fast/slow magnitude ratio {ratio:.3g} below required {gap:g}")
    thresh = np.sqrt(small * big) if np.isfinite(big) and small > 0 else 0.5 * (small + big) if np.isfinite(big) else np.inf
    T, Z, sdim = sla.schur(C, output="real", sort=lambda re, im: np.hypot(re, im) <= thresh)
    if sdim != count:
        raise SpectralGapError(f"Schur reordering selected {sdim} eigenvalues, expected {count}")
    V = Z[:, :count]
    R = C @ V - V @ (V.T @ C @ V)
    res = float(np.linalg.norm(R, 2)) / max(1.0, float(np.linalg.norm(C, 2)))
    return V, res, float(ratio)


def slow_manifolds(s: SfocfSystem, gap: float = 5.0, tol: float = 1e-10) -> SlowManifoldPair:
    if not s.epsilon > 0:
        raise ValueError("slow manifolds need epsilon > 0")
    out = []
    g = s.forcing()
    for side in (LEFT, RIGHT):
        C = s.matrix(side)
        V, res, ratio = invariant_subspace(C, s.m, gap)
        if res > tol:
            raise ArithmeticError(f"invariant subspace residual {res:.3g} exceeds {tol:g}")
        try:
            anchor = -np.linalg.solve(C, g)
        except np.linalg.LinAlgError:
            anchor = None
        out.append((V, anchor, res, ratio))
    (VL, aL, rL, gL), (VR, aR, rR, gR) = out
    return SlowManifoldPair(VL, VR, aL, aR, rL, rR, gL, gR)


def critical_tangent_basis(cm: CriticalManifold, side, m: int) -> np.ndarray:
    """Orthonormal basis of the critical-manifold branch as an (n-k)-plane in ``(x, y)``."""
    h = cm.tangent(side)
    k = h.size
    Bm = np.zeros((k + m, m))
    Bm[:k, 0] = h
    Bm[k:, :] = np.eye(m)
    q, _ = np.linalg.qr(Bm)
    return q


def subspace_distance(U, V) -> float:
    """Sine of the largest principal angle between two column spaces."""
    Qu, _ = np.linalg.qr(U)
    Qv, _ = np.linalg.qr(V)
    # the residual of projecting V onto U avoids the cancellation in sqrt(1 - cos^2)
    return float(np.linalg.norm(Qv - Qu @ (Qu.T @ Qv), 2))


__all__ = [
    "LayerSystem", "CriticalManifold", "ReducedSystem", "StabilityReport", "SlowManifoldPair",
    "FactorizationReport", "ProbeConfig", "HomogeneityReport", "PieceClass",
    "layer_system", "critical_manifold", "reduced_system", "reduced_from_eigenvalues",
    "eigen_placement", "eigen_factorization_check", "slow_eigenvalues", "stability_probe",
    "homogeneity_check", "classify_matrix", "classify_2d", "locate_class_change",
    "slow_manifolds", "invariant_subspace", "critical_tangent_basis", "subspace_distance",
]
