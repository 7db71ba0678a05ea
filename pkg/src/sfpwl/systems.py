"""Two-piece continuous systems and their vector fields.

Every PWL representation here switches on its first state coordinate;
the smooth (nonlinear) systems switch on an arbitrary function ``h``.
Systems expose ``field()``, which returns an object understood by the
simulator: ``n``, ``side(z)``, ``rhs(z, side)`` and ``switch(z)``, with
``side`` being 0 (left, ``switch <= 0``) or 1 (right).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, ContinuityError
from .linalg import poly_from_roots

LEFT, RIGHT = 0, 1
CONTINUITY_ATOL = 1e-12
SMOOTH_CONTINUITY_RTOL = 1e-8


# --------------------------------------------------------------------------
# vector fields


class AffinePwlField:
    """``z' = M_X z + b_X`` with X chosen by the sign of ``z[index]``."""

    def __init__(self, M_L, b_L, M_R, b_R, index: int = 0):
        self.M = (np.asarray(M_L, dtype=float), np.asarray(M_R, dtype=float))
        self.b = (np.asarray(b_L, dtype=float), np.asarray(b_R, dtype=float))
        self.index = index
        self.n = self.M[0].shape[0]

    is_affine = True

    def switch(self, z) -> float:
        return z[self.index]

    def switch_gradient(self, z=None) -> np.ndarray:
        g = np.zeros(self.n)
        g[self.index] = 1.0
        return g

    def rhs(self, z, side: int) -> np.ndarray:
        return self.M[side] @ z + self.b[side]

    def side(self, z) -> int:
        s = z[self.index]
        if s < 0:
            return LEFT
        if s > 0:
            return RIGHT
        # on the boundary both pieces agree; go where the flow points
        return RIGHT if self.rhs(z, LEFT)[self.index] > 0 else LEFT

    def __call__(self, t, z):
        return self.rhs(z, self.side(z))


class SmoothPwField:
    """Field of a :class:`PiecewiseSmoothSystem` with parameters bound."""

    is_affine = False

    def __init__(self, system: "PiecewiseSmoothSystem", params: Mapping[str, float] | None = None):
        self.system = system
        self.params = dict(system.parameters if params is None else params)
        self.n = system.n

    def switch(self, z) -> float:
        return float(self.system.h(z, self.params))

    def switch_gradient(self, z) -> np.ndarray:
        if self.system.grad_h is not None:
            return np.asarray(self.system.grad_h(z, self.params), dtype=float)
        return _fd_gradient(lambda u: self.system.h(u, self.params), np.asarray(z, float), 1e-7)

    def rhs(self, z, side: int) -> np.ndarray:
        f = self.system.f_left if side == LEFT else self.system.f_right
        return np.asarray(f(z, self.params), dtype=float)

    def side(self, z) -> int:
        s = self.switch(z)
        if s < 0:
            return LEFT
        if s > 0:
            return RIGHT
        return RIGHT if self.switch_gradient(z) @ self.rhs(z, LEFT) > 0 else LEFT

    def __call__(self, t, z):
        return self.rhs(z, self.side(z))


def _fd_gradient(fun, z, step):
    g = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = step
        g[i] = (fun(z + e) - fun(z - e)) / (2 * step)
    return g


# --------------------------------------------------------------------------
# continuity


@dataclass(frozen=True)
class ContinuityReport:
    passed: bool
    max_violation: float
    location: tuple[int, int] | None
    tolerance: float

    def __bool__(self):
        return self.passed


def check_continuity(sys_or_PL, P_R=None, tol: float = CONTINUITY_ATOL) -> ContinuityReport:
    """Columns 2..n of ``P_L`` and ``P_R`` must agree entrywise.

    Accepts a :class:`GeneralPwlSystem` or the two matrices. The
    tolerance is absolute for O(1) matrices and scales with the largest
    entry otherwise.
    """
    if P_R is None:
        P_L, P_R = sys_or_PL.P_L, sys_or_PL.P_R
    else:
        P_L = sys_or_PL
    P_L = np.asarray(P_L, dtype=float)
    P_R = np.asarray(P_R, dtype=float)
    if P_L.shape != P_R.shape:
        raise ConfigError("piece matrices differ in shape")
    scale = max(1.0, float(np.max(np.abs(P_L))), float(np.max(np.abs(P_R))))
    diff = np.abs(P_L[:, 1:] - P_R[:, 1:])
    if diff.size == 0:
        return ContinuityReport(True, 0.0, None, tol * scale)
    i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
    worst = float(diff[i, j])
    return ContinuityReport(worst <= tol * scale, worst, (int(i), int(j) + 1), tol * scale)


# --------------------------------------------------------------------------
# PWL system types


@dataclass(frozen=True, eq=False)
class GeneralPwlSystem:
    """``z' = P_X z + c mu_tilde`` switching on ``z_1``."""

    P_L: np.ndarray
    P_R: np.ndarray
    c: np.ndarray
    mu_tilde: float = 0.0

    def __post_init__(self):
        P_L = np.array(self.P_L, dtype=float)
        P_R = np.array(self.P_R, dtype=float)
        c = np.array(self.c, dtype=float).reshape(-1)
        if P_L.ndim != 2 or P_L.shape[0] != P_L.shape[1]:
            raise ConfigError(f"P_L must be square, got {P_L.shape}")
        if P_R.shape != P_L.shape or c.shape != (P_L.shape[0],):
            raise ConfigError("inconsistent dimensions for P_L, P_R, c")
        if not (np.all(np.isfinite(P_L)) and np.all(np.isfinite(P_R)) and np.all(np.isfinite(c))):
            raise ConfigError("non-finite entries")
        rep = check_continuity(P_L, P_R)
        if not rep.passed:
            raise ContinuityError(
                f"P_L and P_R differ outside the first column: |diff| = {rep.max_violation:.3g} "
                f"at entry {rep.location}"
            )
        object.__setattr__(self, "P_L", P_L)
        object.__setattr__(self, "P_R", P_R)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "mu_tilde", float(self.mu_tilde))

    @property
    def n(self) -> int:
        return self.P_L.shape[0]

    def matrix(self, side) -> np.ndarray:
        return self.P_L if _side(side) == LEFT else self.P_R

    def field(self) -> AffinePwlField:
        b = self.c * self.mu_tilde
        return AffinePwlField(self.P_L, b, self.P_R, b)


@dataclass(frozen=True, eq=False)
class SlowFastPwlSystem:
    """Block form with fast rows ``U_X`` and slow rows ``eps V_X``."""

    k: int
    U_L: np.ndarray
    U_R: np.ndarray
    V_L: np.ndarray
    V_R: np.ndarray
    q: np.ndarray
    r: np.ndarray
    epsilon: float
    mu_tilde: float = 0.0

    def __post_init__(self):
        arr = {name: np.atleast_2d(np.array(getattr(self, name), dtype=float))
               for name in ("U_L", "U_R", "V_L", "V_R")}
        q = np.array(self.q, dtype=float).reshape(-1)
        r = np.array(self.r, dtype=float).reshape(-1)
        k = int(self.k)
        n = arr["U_L"].shape[1]
        if not 1 <= k <= n - 1:
            raise ConfigError(f"need 1 <= k <= n-1, got k={k}, n={n}")
        if arr["U_L"].shape != (k, n) or arr["U_R"].shape != (k, n):
            raise ConfigError("U_L, U_R must be k x n")
        if arr["V_L"].shape != (n - k, n) or arr["V_R"].shape != (n - k, n):
            raise ConfigError("V_L, V_R must be (n-k) x n")
        if q.shape != (k,) or r.shape != (n - k,):
            raise ConfigError("q must have length k and r length n-k")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        for name, a in arr.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        # raises ContinuityError when the stacked matrices are discontinuous
        assemble_general(self)

    @property
    def n(self) -> int:
        return self.U_L.shape[1]


def assemble_general(sf: SlowFastPwlSystem) -> GeneralPwlSystem:
    """Stack ``P_X = [U_X; eps V_X]`` and ``c = [q; eps r]``."""
    eps = sf.epsilon
    P_L = np.vstack([sf.U_L, eps * sf.V_L])
    P_R = np.vstack([sf.U_R, eps * sf.V_R])
    c = np.concatenate([sf.q, eps * sf.r])
    return GeneralPwlSystem(P_L, P_R, c, sf.mu_tilde)


def split_slow_fast(gen: GeneralPwlSystem, k: int, epsilon: float) -> SlowFastPwlSystem:
    """Inverse of :func:`assemble_general` for ``epsilon > 0``."""
    if epsilon <= 0:
        raise ConfigError("splitting needs epsilon > 0")
    return SlowFastPwlSystem(
        k, gen.P_L[:k], gen.P_R[:k], gen.P_L[k:] / epsilon, gen.P_R[k:] / epsilon,
        gen.c[:k], gen.c[k:] / epsilon, epsilon, gen.mu_tilde,
    )


# --------------------------------------------------------------------------
# slow-fast observer canonical form


class PlacementRule:
    """Coefficients ``a(eps), b(eps)`` placing eigenvalues at ``fast`` and ``eps*slow``.

    With ``F(l) = l^k + f_1 l^(k-1) + ... + f_k`` built from the fast
    eigenvalues and ``S`` likewise from the slow ones, the placed
    polynomial is ``F(l) * (l^m + eps s_1 l^(m-1) + ... + eps^m s_m)``.
    Matching coefficients gives

        a_i(eps) = sum_{l=0..i} f_{i-l} eps^l s_l
        b_j(eps) = sum_{l=j..m} f_{k+j-l} eps^(l-j) s_l

    which stays finite at ``eps = 0`` (no division by ``eps^j``).
    """

    def __init__(self, fast_L, slow_L, fast_R, slow_R):
        self.fast = (np.asarray(fast_L, dtype=complex), np.asarray(fast_R, dtype=complex))
        self.slow = (np.asarray(slow_L, dtype=complex), np.asarray(slow_R, dtype=complex))
        self.k = len(self.fast[0])
        self.m = len(self.slow[0])
        if len(self.fast[1]) != self.k or len(self.slow[1]) != self.m:
            raise ConfigError("both sides need the same numbers of fast and slow eigenvalues")
        self._f = tuple(np.r_[1.0, poly_from_roots(f)] for f in self.fast)
        self._s = tuple(np.r_[1.0, poly_from_roots(s)] for s in self.slow)

    def side_coefficients(self, side: int, eps: float):
        f, s = self._f[side], self._s[side]
        k, m = self.k, self.m
        a = np.array([sum(f[i - l] * eps**l * s[l] for l in range(0, min(i, m) + 1))
                      for i in range(1, k + 1)])
        b = np.array([sum(f[k + j - l] * eps ** (l - j) * s[l]
                          for l in range(j, m + 1) if 0 <= k + j - l <= k)
                      for j in range(1, m + 1)])
        return a, b

    def __call__(self, eps: float):
        a_L, b_L = self.side_coefficients(LEFT, eps)
        a_R, b_R = self.side_coefficients(RIGHT, eps)
        return a_L, a_R, b_L, b_R

    def to_dict(self):
        enc = lambda v: [[float(z.real), float(z.imag)] for z in v]  # noqa: E731
        return {"fast_L": enc(self.fast[0]), "slow_L": enc(self.slow[0]),
                "fast_R": enc(self.fast[1]), "slow_R": enc(self.slow[1])}


@dataclass(frozen=True, eq=False)
class SfocfSystem:
    """Slow-fast observer canonical form.

    Coefficients are stored as evaluated at ``epsilon``. ``rule``
    optionally maps any epsilon to ``(a_L, a_R, b_L, b_R)`` so that
    epsilon sweeps and the epsilon -> 0 limit are available; without a
    rule the coefficients are treated as constant in epsilon.
    """

    k: int
    a_L: np.ndarray
    a_R: np.ndarray
    b_L: np.ndarray
    b_R: np.ndarray
    epsilon: float
    mu: float = 0.0
    rule: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = [np.atleast_1d(np.array(getattr(self, nm), dtype=float)) for nm in ("a_L", "a_R", "b_L", "b_R")]
        k = int(self.k)
        if vals[0].shape != (k,) or vals[1].shape != (k,):
            raise ConfigError("a_L, a_R must have length k")
        if vals[2].shape != vals[3].shape or vals[2].ndim != 1 or vals[2].size < 1:
            raise ConfigError("b_L, b_R must have equal length n-k >= 1")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        for nm, v in zip(("a_L", "a_R", "b_L", "b_R"), vals):
            if not np.all(np.isfinite(v)):
                raise ConfigError(f"{nm} has non-finite entries")
            object.__setattr__(self, nm, v)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def n(self) -> int:
        return self.k + self.b_L.size

    @property
    def m(self) -> int:
        return self.b_L.size

    def coefficients(self, side):
        side = _side(side)
        return (self.a_L, self.b_L) if side == LEFT else (self.a_R, self.b_R)

    def coefficients_at(self, eps: float):
        if self.rule is None:
            return self.a_L, self.a_R, self.b_L, self.b_R
        return tuple(np.asarray(v, dtype=float) for v in self.rule(eps))

    def at(self, eps: float) -> "SfocfSystem":
        """The same family evaluated at another epsilon."""
        a_L, a_R, b_L, b_R = self.coefficients_at(eps)
        return replace(self, a_L=a_L, a_R=a_R, b_L=b_L, b_R=b_R, epsilon=eps)

    def limit_coefficients(self, warn: bool = True):
        """Coefficients at epsilon = 0 (stored values when no rule is known)."""
        if self.rule is None:
            if warn and self.epsilon != 0:
                warnings.warn(
                    "no epsilon-rule supplied; using coefficients stored at "
                    f"epsilon={self.epsilon:g} as their epsilon -> 0 limit",
                    stacklevel=3,
                )
            return self.a_L, self.a_R, self.b_L, self.b_R
        return self.coefficients_at(0.0)

    def matrix(self, side) -> np.ndarray:
        a, b = self.coefficients(side)
        return sfocf_matrix(a, b, self.epsilon)

    def forcing(self) -> np.ndarray:
        g = np.zeros(self.n)
        g[-1] = self.epsilon * self.mu
        return g

    def field(self) -> AffinePwlField:
        g = self.forcing()
        return AffinePwlField(self.matrix(LEFT), g, self.matrix(RIGHT), g)


def sfocf_matrix(a, b, eps: float) -> np.ndarray:
    """``C_X(eps)``: first column ``(-a; -eps b)``, superdiagonal 1 (fast rows) / eps (slow rows)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    k, m = a.size, b.size
    n = k + m
    C = np.zeros((n, n))
    C[:k, 0] = -a
    C[k:, 0] = -eps * b
    sup = np.r_[np.ones(k), np.full(m - 1, eps)]
    C[np.arange(n - 1), np.arange(1, n)] = sup
    return C


def assemble_sfocf_matrix(s: SfocfSystem, side) -> np.ndarray:
    return s.matrix(side)


def _side(side) -> int:
    if side in (LEFT, "L", "l", "left"):
        return LEFT
    if side in (RIGHT, "R", "r", "right"):
        return RIGHT
    raise ValueError(f"unknown side {side!r}")


# --------------------------------------------------------------------------
# piecewise-smooth systems and their linearisation


@dataclass(frozen=True, eq=False)
class PiecewiseSmoothSystem:
    """``z' = f_left(z)`` where ``h(z) <= 0`` and ``f_right(z)`` where ``h(z) >= 0``.

    The callables take ``(z, params)``; ``bifurcation_parameter`` names the
    entry of ``params`` playing the role of ``mu_tilde``.
    """

    n: int
    f_left: Callable
    f_right: Callable
    h: Callable
    parameters: Mapping[str, float]
    grad_h: Callable | None = None
    bifurcation_parameter: str | None = None
    k: int | None = None
    name: str = ""

    def field(self, **overrides) -> SmoothPwField:
        params = dict(self.parameters)
        params.update(overrides)
        return SmoothPwField(self, params)

    def with_parameters(self, **overrides) -> "PiecewiseSmoothSystem":
        params = dict(self.parameters)
        params.update(overrides)
        return replace(self, parameters=params)

    def continuity_defect(self, points) -> float:
        """Largest relative mismatch of the two pieces at sample points."""
        worst = 0.0
        for z in np.atleast_2d(points):
            fl = np.asarray(self.f_left(z, self.parameters), dtype=float)
            fr = np.asarray(self.f_right(z, self.parameters), dtype=float)
            scale = max(1.0, float(np.max(np.abs(fl))))
            worst = max(worst, float(np.max(np.abs(fl - fr))) / scale)
        return worst


@dataclass(frozen=True, eq=False)
class BebLinearization:
    jac_left: np.ndarray
    jac_right: np.ndarray
    beb_point: np.ndarray
    forcing_direction: np.ndarray
    grad_h: np.ndarray

    @property
    def n(self) -> int:
        return self.jac_left.shape[0]


def default_fd_step(point) -> float:
    return max(1e-6, 1e-6 * float(np.linalg.norm(point)))


def linearize_at_beb(ps: PiecewiseSmoothSystem, point, step: float | None = None,
                     param: str | None = None, tol: float = 1e-8) -> BebLinearization:
    """Central finite-difference Jacobians of both pieces at a boundary equilibrium."""
    z0 = np.asarray(point, dtype=float)
    if z0.shape != (ps.n,) or not np.all(np.isfinite(z0)):
        raise ConfigError("point must be a finite vector of the system dimension")
    params = dict(ps.parameters)
    h0 = float(ps.h(z0, params))
    if abs(h0) > tol * max(1.0, float(np.linalg.norm(z0))):
        raise ConfigError(f"point is not on the switching manifold (h = {h0:.3g})")
    fl0 = np.asarray(ps.f_left(z0, params), dtype=float)
    fr0 = np.asarray(ps.f_right(z0, params), dtype=float)
    if not (np.all(np.isfinite(fl0)) and np.all(np.isfinite(fr0))):
        raise ConfigError("non-finite vector field at the point")
    scale = max(1.0, float(np.max(np.abs(fl0))))
    if np.max(np.abs(fl0 - fr0)) > SMOOTH_CONTINUITY_RTOL * scale:
        raise ContinuityError("pieces disagree at the linearisation point")
    step = default_fd_step(z0) if step is None else float(step)

    def jac(f):
        J = np.empty((ps.n, ps.n))
        for j in range(ps.n):
            e = np.zeros(ps.n)
            e[j] = step
            J[:, j] = (np.asarray(f(z0 + e, params)) - np.asarray(f(z0 - e, params))) / (2 * step)
        return J

    J_L, J_R = jac(ps.f_left), jac(ps.f_right)
    if not (np.all(np.isfinite(J_L)) and np.all(np.isfinite(J_R))):
        raise ConfigError("non-finite Jacobian")
    param = param or ps.bifurcation_parameter
    if param is None:
        forcing = np.zeros(ps.n)
    else:
        hp = max(1e-6, 1e-6 * abs(params[param]))
        up, dn = dict(params), dict(params)
        up[param] += hp
        dn[param] -= hp
        forcing = (np.asarray(ps.f_left(z0, up)) - np.asarray(ps.f_left(z0, dn))) / (2 * hp)
    if ps.grad_h is not None:
        g = np.asarray(ps.grad_h(z0, params), dtype=float)
    else:
        g = _fd_gradient(lambda u: ps.h(u, params), z0, step)
    return BebLinearization(J_L, J_R, z0, forcing, g)


def straighten(lin: BebLinearization, k: int | None = None):
    """Change coordinates so the linearised switching surface is ``z_1 = 0``.

    The new first coordinate is ``grad_h . (z - z_beb)``; the fast
    variable with the largest ``|dh/dx_i|`` (among the first ``k``) is
    moved to the front and replaced. Column mismatches beyond the first,
    which for finite-difference Jacobians are of truncation size, are
    averaged away so that the result is exactly continuous.

    Returns ``(system, T)`` where ``z_new = T (z - z_beb)``.
    """
    n = lin.n
    g = np.asarray(lin.grad_h, dtype=float)
    kk = n if k is None else k
    i = int(np.argmax(np.abs(g[:kk])))
    if g[i] == 0:
        raise ConfigError("switching surface is tangent to every fast direction")
    perm = np.r_[i, [j for j in range(n) if j != i]]
    Pm = np.eye(n)[perm]
    T = Pm.copy()
    T[0] = g
    Tinv = np.linalg.inv(T)
    P_L = T @ lin.jac_left @ Tinv
    P_R = T @ lin.jac_right @ Tinv
    rep = check_continuity(P_L, P_R, tol=SMOOTH_CONTINUITY_RTOL)
    if not rep.passed:
        raise ContinuityError(
            f"linearised pieces are not continuous across h = 0 (defect {rep.max_violation:.3g})"
        )
    avg = 0.5 * (P_L[:, 1:] + P_R[:, 1:])
    P_L[:, 1:] = avg
    P_R[:, 1:] = avg
    c = T @ lin.forcing_direction
    return GeneralPwlSystem(P_L, P_R, c, 0.0), T


def random_continuous_pwl(n: int, rng: np.random.Generator, scale: float = 1.0) -> GeneralPwlSystem:
    """``P_R = P_L + xi e_1^T`` with Gaussian ``P_L``, ``xi`` and ``c``."""
    P_L = scale * rng.standard_normal((n, n))
    xi = scale * rng.standard_normal(n)
    P_R = P_L.copy()
    P_R[:, 0] += xi
    c = rng.standard_normal(n)
    return GeneralPwlSystem(P_L, P_R, c, float(rng.standard_normal()))

