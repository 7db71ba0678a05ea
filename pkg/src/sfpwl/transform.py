"""Coordinate changes to observer canonical form and its slow-fast variant.

For ``z' = P_X z + c mu_tilde`` with ``P_L``, ``P_R`` differing only in
their first column, ``z = Q z_tilde + d mu_tilde`` with ``Q = Psi Phi``
turns both pieces into companion matrices driven through ``e_n``. The
slow-fast variant conjugates further by ``E = diag(I_k, 1, eps, ...,
eps^(n-k-1))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SingularPhiError, VerificationError, ZeroForcingError
from .linalg import charpoly_coeffs, companion_from_coeffs, rcond, shift_matrix
from .systems import (
    LEFT,
    RIGHT,
    AffinePwlField,
    GeneralPwlSystem,
    SfocfSystem,
    SlowFastPwlSystem,
    assemble_general,
    sfocf_matrix,
)

PHI_RCOND_MIN = 1e-10
S_RTOL = 1e-10
RESIDUAL_RTOL = 1e-8
ILL_CONDITIONED = 1e6


@dataclass(frozen=True, eq=False)
class OcfTransform:
    Psi: np.ndarray
    Phi: np.ndarray
    Q: np.ndarray
    d: np.ndarray
    s: float
    p_L: np.ndarray
    p_R: np.ndarray
    rcond_phi: float
    cond_Q: float

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def lu(self):
        return sla.lu_factor(self.Q)

    def conjugate(self, P) -> np.ndarray:
        """``Q P Q^{-1}`` via a linear solve (no explicit inverse)."""
        QP = self.Q @ P
        # X Q = QP  <=>  Q^T X^T = (QP)^T
        return sla.lu_solve(sla.lu_factor(self.Q.T), QP.T).T

    def solve(self, v) -> np.ndarray:
        return sla.lu_solve(self.lu(), v)

    def forward(self, z_tilde, mu_tilde) -> np.ndarray:
        """``z = Q z_tilde + d mu_tilde`` for a state or for rows of states."""
        z = np.asarray(z_tilde, dtype=float)
        return z @ self.Q.T + float(mu_tilde) * self.d


@dataclass(frozen=True, eq=False)
class OcfSystem:
    p_L: np.ndarray
    p_R: np.ndarray
    mu: float = 0.0

    @property
    def n(self) -> int:
        return len(self.p_L)

    def matrix(self, side) -> np.ndarray:
        return companion_from_coeffs(self.p_L if side in (LEFT, "L") else self.p_R)

    def field(self) -> AffinePwlField:
        g = np.zeros(self.n)
        g[-1] = self.mu
        return AffinePwlField(self.matrix(LEFT), g, self.matrix(RIGHT), g)


@dataclass(frozen=True)
class ScalingMatrix:
    """``E(eps)``: identity on the fast block, ``diag(1, eps, ..., eps^(n-k-1))`` on the slow block."""

    n: int
    k: int
    epsilon: float

    def diagonal(self) -> np.ndarray:
        m = self.n - self.k
        return np.r_[np.ones(self.k), float(self.epsilon) ** np.arange(m)]

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal())

    def inverse(self) -> np.ndarray:
        if self.epsilon == 0 and self.n - self.k > 1:
            raise ZeroDivisionError("E(0) is singular")
        return np.diag(1.0 / self.diagonal())


def toeplitz_psi(p) -> np.ndarray:
    """Unit lower-triangular Toeplitz matrix with first column ``(1, p_1, ..., p_{n-1})``."""
    p = np.asarray(p, dtype=float)
    return sla.toeplitz(np.r_[1.0, p[:-1]], np.r_[1.0, np.zeros(p.size - 1)])


def observability_rows(P) -> np.ndarray:
    """Rows ``e_1^T P^i`` for ``i = 0..n-1``."""
    n = P.shape[0]
    Phi = np.empty((n, n))
    row = np.zeros(n)
    row[0] = 1.0
    for i in range(n):
        Phi[i] = row
        row = row @ P
    return Phi


def build_ocf_transform(sys: GeneralPwlSystem) -> OcfTransform:
    P_L = sys.P_L
    n = sys.n
    p_L = charpoly_coeffs(P_L)
    p_R = charpoly_coeffs(sys.P_R)
    Psi = toeplitz_psi(p_L)
    Phi = observability_rows(P_L)
    rc = rcond(Phi)
    if rc < PHI_RCOND_MIN:
        raise SingularPhiError(
            f"Phi is singular (rcond = {rc:.3g}); system not transformable by this construction"
        )
    Q = Psi @ Phi
    Qc = Q @ sys.c
    d = shift_matrix(n).T @ Qc
    s = float(Qc[-1])
    if abs(s) <= S_RTOL * np.linalg.norm(Q, 2) * np.linalg.norm(sys.c):
        raise ZeroForcingError("s = e_n^T Q c vanishes: the parameter does not unfold the BEB")
    return OcfTransform(Psi, Phi, Q, d, s, p_L, p_R, rc, float(np.linalg.cond(Q)))


def _tol(t: OcfTransform) -> float:
    return RESIDUAL_RTOL * max(1.0, t.cond_Q)


def _rel(x, scale) -> float:
    return float(np.max(np.abs(x))) / max(1.0, float(scale))


def to_ocf(sys: GeneralPwlSystem, t: OcfTransform | None = None, verify: bool = True) -> OcfSystem:
    t = build_ocf_transform(sys) if t is None else t
    if verify:
        rep = verify_transform_identities(sys, t)
        if not rep.passed:
            name, val = rep.worst()
            raise VerificationError(f"OCF identity {name} violated: residual {val:.3g} > {rep.tolerance:.3g}")
    return OcfSystem(t.p_L, t.p_R, t.s * sys.mu_tilde)


@dataclass
class IdentityReport:
    residuals: dict
    tolerance: float
    cond_Q: float
    rcond_phi: float
    ill_conditioned: bool

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals.values())

    def worst(self):
        name = max(self.residuals, key=self.residuals.get)
        return name, self.residuals[name]

    def to_dict(self):
        return {"residuals": dict(self.residuals), "tolerance": self.tolerance,
                "cond_Q": self.cond_Q, "rcond_phi": self.rcond_phi,
                "ill_conditioned": self.ill_conditioned, "passed": self.passed}


def verify_transform_identities(sys: GeneralPwlSystem, t: OcfTransform) -> IdentityReport:
    """Residuals of the identities behind the OCF construction.

    All residuals are max-abs entries divided by the natural scale of the
    identity, so they are comparable against ``1e-8 * cond(Q)``.
    """
    n = sys.n
    J = shift_matrix(n)
    e1 = np.eye(n)[0]
    en = np.eye(n)[-1]
    Q, P_L = t.Q, sys.P_L
    nQ = np.linalg.norm(Q, np.inf)
    res = {}

    lhs = J @ Q - Q @ P_L
    res["shift_commutator"] = _rel(lhs - np.outer(t.p_L, e1), nQ * max(1.0, np.linalg.norm(P_L, np.inf)))

    acc = np.eye(n) * t.p_L[-1]
    Pk = np.eye(n)
    for i in range(n - 1, 0, -1):
        Pk = Pk @ P_L
        acc = acc + t.p_L[i - 1] * Pk
    Pk = Pk @ P_L
    ch = Pk + acc
    res["cayley_hamilton"] = _rel(ch, max(1.0, np.linalg.norm(P_L, np.inf)) ** n)

    e1Qinv = sla.lu_solve(sla.lu_factor(Q.T), e1)
    res["first_row_inverse"] = _rel(e1Qinv - e1, 1.0)
    res["first_row_Q"] = _rel(Q[0] - e1, 1.0)
    res["first_entry_d"] = abs(float(t.d[0])) / max(1.0, float(np.max(np.abs(t.d))))

    Qc = Q @ sys.c
    for tag, P, p in (("L", P_L, t.p_L), ("R", sys.P_R, t.p_R)):
        C = t.conjugate(P)
        res[f"companion_{tag}"] = _rel(C - companion_from_coeffs(p), max(1.0, np.linalg.norm(C, np.inf)))
        forcing = (Qc - C @ t.d) / t.s
        res[f"forcing_{tag}"] = _rel(forcing - en, max(1.0, np.linalg.norm(C, np.inf) * np.max(np.abs(t.d)) / abs(t.s)))
    return IdentityReport(res, _tol(t), t.cond_Q, t.rcond_phi, 1.0 / t.rcond_phi > ILL_CONDITIONED)


@dataclass(frozen=True, eq=False)
class SfocfTransform:
    ocf: OcfTransform
    E: ScalingMatrix
    pattern_residual: float
    forcing_residual: float

    def forward(self, z_tilde, mu_tilde) -> np.ndarray:
        """``z = E^{-1} (Q z_tilde + d mu_tilde)`` for a state or rows of states."""
        return self.ocf.forward(z_tilde, mu_tilde) / self.E.diagonal()

    def backward(self, z, mu_tilde) -> np.ndarray:
        zz = np.atleast_2d(np.asarray(z, dtype=float))
        rhs = zz * self.E.diagonal()[None, :] - float(mu_tilde) * self.ocf.d[None, :]
        out = sla.lu_solve(self.ocf.lu(), rhs.T).T
        return out[0] if np.ndim(z) == 1 else out


def sfocf_pattern_residual(C, k: int, eps: float) -> float:
    """Largest entry outside the first column that deviates from the SFOCF pattern."""
    n = C.shape[0]
    template = sfocf_matrix(np.zeros(k), np.zeros(n - k), eps)
    off = C[:, 1:] - template[:, 1:]
    return float(np.max(np.abs(off))) / max(1.0, float(np.max(np.abs(C))))


def to_sfocf(sys, k: int | None = None, epsilon: float | None = None,
             return_transform: bool = False, tol: float = RESIDUAL_RTOL):
    """Transform a slow-fast PWL system into SFOCF coordinates.

    ``sys`` may be a :class:`SlowFastPwlSystem` or a
    :class:`GeneralPwlSystem` together with ``k`` and ``epsilon``.
    """
    if isinstance(sys, SlowFastPwlSystem):
        k, epsilon = sys.k, sys.epsilon
        gen = assemble_general(sys)
    else:
        if k is None or epsilon is None:
            raise ValueError("k and epsilon are required for a general PWL system")
        gen = sys
    n = gen.n
    if epsilon <= 0:
        raise ValueError("the SFOCF transform needs epsilon > 0 (E(0) is singular)")
    t = build_ocf_transform(gen)
    E = ScalingMatrix(n, k, epsilon)
    Ed = E.diagonal()
    coeffs = {}
    worst = 0.0
    fres = 0.0
    Qc = t.Q @ gen.c
    en = np.eye(n)[-1]
    for side, P in ((LEFT, gen.P_L), (RIGHT, gen.P_R)):
        Cq = t.conjugate(P)
        C = (Cq * Ed[None, :]) / Ed[:, None]   # E^{-1} Cq E
        worst = max(worst, sfocf_pattern_residual(C, k, epsilon))
        a = -C[:k, 0]
        b = -C[k:, 0] / epsilon
        coeffs[side] = (a, b)
        g = epsilon ** (n - k) / t.s * ((Qc - Cq @ t.d) / Ed)
        fres = max(fres, float(np.max(np.abs(g - epsilon * en))) / max(epsilon, 1e-300))
    limit = tol * max(1.0, t.cond_Q)
    if worst > limit:
        raise VerificationError(f"SFOCF sparsity pattern residual {worst:.3g} exceeds {limit:.3g}")
    s_sys = SfocfSystem(k, coeffs[LEFT][0], coeffs[RIGHT][0], coeffs[LEFT][1], coeffs[RIGHT][1],
                        epsilon, t.s * gen.mu_tilde / epsilon ** (n - k))
    if return_transform:
        return s_sys, SfocfTransform(t, E, worst, fres)
    return s_sys
