"""Built-in example systems.

``canard5d`` is a five-dimensional SFOCF system with three fast and two
slow variables whose eigenvalues are placed so that the reduced system
has a stable limit cycle while ``H(0)`` is an unstable equilibrium of
the layer equations. ``ocean`` is the three-variable thermohaline
circulation model with a BEB at ``(1, 1, 1)`` when ``lambda0 = 0``.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ConfigError
from .linalg import rcond
from .systems import (
    PiecewiseSmoothSystem,
    PlacementRule,
    SfocfSystem,
    linearize_at_beb,
    random_continuous_pwl,
    straighten,
)
from .transform import observability_rows, to_sfocf

CANARD_FAST_L = (-0.6, -0.2 + 1j, -0.2 - 1j)
CANARD_FAST_R = (-3.0, -0.1 + 5j, -0.1 - 5j)
CANARD_SLOW_L = (-3 + 1j, -3 - 1j)
CANARD_SLOW_R = (1 + 2j, 1 - 2j)

OCEAN_DEFAULTS = {"eps": 0.01, "A": 1.1, "a": 1.0, "b": 1.0, "delta": 0.01, "lambda0": 0.0}
OCEAN_BEB = np.array([1.0, 1.0, 1.0])


def canard_rule() -> PlacementRule:
    return PlacementRule(CANARD_FAST_L, CANARD_SLOW_L, CANARD_FAST_R, CANARD_SLOW_R)


def canard5d(epsilon: float = 0.05, mu: float = 1.0) -> SfocfSystem:
    rule = canard_rule()
    a_L, a_R, b_L, b_R = rule(epsilon)
    return SfocfSystem(3, a_L, a_R, b_L, b_R, epsilon, mu, rule=rule)


# ocean circulation model; state (x, y, mu), switching on h = x - y


def _ocean(z, p, sign):
    x, y, m = z
    q = sign * (x - y)          # |x - y| on the respective piece
    eps, A = p["eps"], p["A"]
    return np.array([
        (1.0 - x) - eps * A * x * q,
        eps * (m - y - A * y * q),
        eps * p["delta"] * (p["lambda0"] + p["a"] * x - p["b"] * y),
    ])


def ocean_left(z, p):
    return _ocean(z, p, -1.0)


def ocean_right(z, p):
    return _ocean(z, p, 1.0)


def ocean_h(z, p):
    return z[0] - z[1]


def ocean_grad_h(z, p):
    return np.array([1.0, -1.0, 0.0])


def ocean(**params) -> PiecewiseSmoothSystem:
    unknown = set(params) - set(OCEAN_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown ocean parameters: {sorted(unknown)}")
    p = dict(OCEAN_DEFAULTS)
    p.update({k: float(v) for k, v in params.items()})
    return PiecewiseSmoothSystem(3, ocean_left, ocean_right, ocean_h, p, grad_h=ocean_grad_h,
                                 bifurcation_parameter="lambda0", k=1, name="ocean")


def ocean_general(**params):
    """Straightened linearisation at the BEB; returns ``(GeneralPwlSystem, T)``.

    The bifurcation parameter ``lambda0`` enters as ``mu_tilde``.
    """
    ps = ocean(**params)
    lin = linearize_at_beb(ps, OCEAN_BEB)
    gen, T = straighten(lin, k=1)
    return replace(gen, mu_tilde=ps.parameters["lambda0"]), T


class OceanRule:
    """Epsilon-rule for the ocean SFOCF coefficients.

    For ``eps > 0`` the model is re-linearised numerically; at ``eps = 0``
    the known limits ``a(0) = 1``, ``b^L(0) = (1 + A, b delta)``,
    ``b^R(0) = (1 - A, b delta)`` are returned.
    """

    def __init__(self, **params):
        self.params = {k: v for k, v in params.items() if k != "eps"}

    def __call__(self, eps: float):
        if eps == 0:
            p = dict(OCEAN_DEFAULTS)
            p.update(self.params)
            a, b_L, b_R = ocean_reduced_coefficients(p["A"], p["b"], p["delta"])
            return a, a.copy(), b_L, b_R
        s = _ocean_sfocf_raw(eps=eps, **self.params)
        return s.a_L, s.a_R, s.b_L, s.b_R


def _ocean_sfocf_raw(**params) -> SfocfSystem:
    gen, _ = ocean_general(**params)
    return to_sfocf(gen, k=1, epsilon=ocean(**params).parameters["eps"])


def ocean_sfocf(**params) -> SfocfSystem:
    """SFOCF of the straightened ocean linearisation, carrying an :class:`OceanRule`."""
    return replace(_ocean_sfocf_raw(**params), rule=OceanRule(**params))


def ocean_reduced_coefficients(A: float = 1.1, b: float = 1.0, delta: float = 0.01):
    """Limits ``a(0)``, ``b^L(0)``, ``b^R(0)`` of the ocean linearisation."""
    return np.array([1.0]), np.array([1.0 + A, b * delta]), np.array([1.0 - A, b * delta])


def random4d(seed: int = 0, min_rcond: float = 1e-6, n: int = 4):
    """Seeded random continuous PWL system whose Phi is well conditioned."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        sys = random_continuous_pwl(n, rng)
        if rcond(observability_rows(sys.P_L)) > min_rcond:
            return sys
    raise ConfigError("could not draw a transformable random system")





STABLE_FAST_L, STABLE_FAST_R = (-1.0,), (-2.0,)
STABLE_SLOW_L, STABLE_SLOW_R = (-1.0, -2.0), (-1 + 1j, -1 - 1j)


def stable3d(epsilon: float = 0.01, mu: float = 0.5) -> SfocfSystem:
    """One fast and two slow variables with a globally stable critical manifold.

    The reduced pieces share a quadratic Lyapunov function, so large
    ellipsoids around the origin are strongly trapping.
    """
    rule = PlacementRule(STABLE_FAST_L, STABLE_SLOW_L, STABLE_FAST_R, STABLE_SLOW_R)
    a_L, a_R, b_L, b_R = rule(epsilon)
    return SfocfSystem(1, a_L, a_R, b_L, b_R, epsilon, mu, rule=rule)


def stable3d_region(level: float = 2.0):
    """Ellipsoid ``y^T P y <= level^2`` from a common Lyapunov matrix of the reduced pieces."""
    from scipy.linalg import solve_continuous_lyapunov

    from .experiments import TrappingRegion
    from .slowfast import reduced_system

    rs = reduced_system(stable3d(), warn=False)
    B = 0.1 * rs.B_L + 0.9 * rs.B_R
    P = solve_continuous_lyapunov(B.T, -np.eye(2))
    return TrappingRegion("ellipsoid", np.zeros(2), matrix=P / level**2)
BUILTINS = ("canard5d", "ocean", "random4d", "stable3d")


class OceanFamily:
    """Picklable map from one ocean parameter value to the model."""

    def __init__(self, parameter: str, **base):
        if parameter not in OCEAN_DEFAULTS:
            raise ConfigError(f"unknown ocean parameter {parameter!r}")
        self.parameter = parameter
        self.base = base

    def __call__(self, value: float) -> PiecewiseSmoothSystem:
        params = dict(self.base)
        params[self.parameter] = value
        return ocean(**params)


class SfocfFamily:
    """Picklable map from ``mu`` or ``eps`` to an SFOCF system."""

    def __init__(self, system: SfocfSystem, parameter: str = "mu"):
        if parameter not in ("mu", "eps"):
            raise ConfigError("SFOCF systems can be swept in 'mu' or 'eps'")
        self.system = system
        self.parameter = parameter

    def __call__(self, value: float) -> SfocfSystem:
        if self.parameter == "mu":
            return replace(self.system, mu=value)
        return self.system.at(value)
