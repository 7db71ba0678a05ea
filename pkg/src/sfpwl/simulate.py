"""Event-detecting integration of two-piece systems.

``integrate`` runs an adaptive Runge-Kutta pair one piece at a time and
stops at every crossing of the switching surface, localising it with a
root find on the dense output; the next segment restarts with the other
piece. ``PwlPropagator`` is the exact alternative for affine pieces: it
advances whole ensembles with matrix exponentials and locates crossings
by safeguarded Newton iteration on the closed-form solution.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import DivergenceError, StepSizeError
from .systems import LEFT, RIGHT

WORKERS_ENV = "SFPWL_WORKERS"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    event_tol: float = 1e-10
    horizon: float = 100.0
    transient_fraction: float = 0.5
    method: str = "RK45"
    divergence_norm: float = 1e8
    max_events: int = 200_000
    dense_points: int = 4001
    cycle_rtol: float = 1e-3

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.transient_fraction < 1:
            raise ValueError("transient_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class Event:
    time: float
    state: np.ndarray
    direction: int          # +1: left -> right, -1: right -> left
    grazing: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    sides: np.ndarray
    events: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    segments: list = field(default_factory=list, repr=False)

    @property
    def diverged(self) -> bool:
        return bool(self.diagnostics.get("diverged", False))

    def dense(self, t) -> np.ndarray:
        """Evaluate the piecewise dense output at times inside the horizon."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.states.shape[1]))
        starts = np.array([seg[0] for seg in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.segments[j][2](t[sel]).T
        return out


class _Constant:
    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def __call__(self, t):
        t = np.atleast_1d(t)
        return np.repeat(self.z[:, None], t.size, axis=1)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; uses processes when ``SFPWL_WORKERS`` > 1."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _initial_side(fld, z):
    return fld.side(z)


def integrate(system, z0, cfg: IntegratorConfig | None = None, t0: float = 0.0,
              raise_on_divergence: bool = False) -> Trajectory:
    """Integrate a two-piece system from ``z0`` over ``[t0, t0 + cfg.horizon]``.

    ``system`` is anything with a ``field()`` method or a field object
    itself. With ``cfg.method == "exact"`` affine systems are propagated
    in closed form.
    """
    cfg = cfg or IntegratorConfig()
    fld = system.field() if hasattr(system, "field") else system
    z = np.array(z0, dtype=float)
    if z.shape != (fld.n,) or not np.all(np.isfinite(z)):
        raise ValueError("initial state must be a finite vector of the system dimension")
    if cfg.method == "exact":
        return _integrate_exact(fld, z, cfg, t0, raise_on_divergence)

    t_end = t0 + cfg.horizon
    side = _initial_side(fld, z)
    times, states, sides, events, segments = [np.array([t0])], [z[None, :]], [np.array([side])], [], []
    diag = {"nfev": 0, "steps": 0, "segments": 0, "grazing": 0, "diverged": False}
    t = t0

    def blowup(tt, zz):
        return np.linalg.norm(zz) - cfg.divergence_norm
    blowup.terminal = True

    while t < t_end:
        s = side
        ev = lambda tt, zz: fld.switch(zz)  # noqa: E731
        ev.terminal = True
        # leaving the left piece means switch rises through zero
        ev.direction = 1.0 if s == LEFT else -1.0
        sol = solve_ivp(lambda tt, zz: fld.rhs(zz, s), (t, t_end), z, method=cfg.method,
                        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
                        events=(ev, blowup), dense_output=True)
        diag["nfev"] += sol.nfev
        diag["steps"] += max(0, sol.t.size - 1)
        diag["segments"] += 1
        if sol.status == -1:
            raise StepSizeError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
        t_new = float(sol.t[-1])
        segments.append((t, t_new, sol.sol, s))
        times.append(sol.t[1:])
        states.append(sol.y[:, 1:].T)
        sides.append(np.full(sol.t.size - 1, s))
        z = sol.y[:, -1].copy()
        t = t_new
        if sol.status == 1 and sol.t_events[1].size:
            diag["diverged"] = True
            diag["escape_time"] = t
            if raise_on_divergence:
                raise DivergenceError(f"state norm exceeded {cfg.divergence_norm:g} at t={t:.6g}",
                                      escape_time=t, state=z)
            break
        if sol.status == 1 and sol.t_events[0].size:
            new_side = RIGHT if s == LEFT else LEFT
            slope = fld.switch_gradient(z) @ fld.rhs(z, s)
            scale = max(1.0, float(np.linalg.norm(fld.rhs(z, s))))
            graze = abs(slope) <= 1e-9 * scale
            diag["grazing"] += int(graze)
            events.append(Event(t, z.copy(), 1 if new_side == RIGHT else -1, graze))
            side = new_side
            if len(events) >= cfg.max_events:
                diag["truncated"] = True
                break
            if graze:
                # step through with the piece the flow actually enters
                side = fld.side(z + 1e-9 * scale * fld.rhs(z, s))
            if np.linalg.norm(fld.rhs(z, s)) <= cfg.abs_tol:
                # resting on a boundary equilibrium: further crossings would only chatter
                diag["boundary_equilibrium"] = True
                times.append(np.array([t_end]))
                states.append(z[None, :])
                sides.append(np.array([side]))
                segments.append((t, t_end, _Constant(z), side))
                break
    traj = Trajectory(np.concatenate(times), np.vstack(states), np.concatenate(sides), events, diag, segments)
    return traj


# --------------------------------------------------------------------------
# exact propagation for affine pieces


class _Piece:
    """Closed-form flow of ``z' = M z + b``."""

    def __init__(self, M, b):
        self.M = np.asarray(M, dtype=float)
        self.b = np.asarray(b, dtype=float)
        n = self.M.shape[0]
        zs, *_ = np.linalg.lstsq(self.M, -self.b, rcond=None)
        consistent = np.linalg.norm(self.M @ zs + self.b) <= 1e-10 * max(1.0, np.linalg.norm(self.b))
        w, V = np.linalg.eig(self.M)
        good = consistent and np.linalg.cond(V) < 1e8
        self.spectral = bool(good)
        if self.spectral:
            self.zstar = zs
            self.w = w
            self.V = V
            self.Vinv = np.linalg.inv(V)
        else:
            aug = np.zeros((n + 1, n + 1))
            aug[:n, :n] = self.M
            aug[:n, n] = self.b
            self.aug = aug
        self.n = n

    def flow(self, Z, s):
        """States after times ``s`` (one per row of ``Z``)."""
        Z = np.atleast_2d(Z)
        s = np.broadcast_to(np.asarray(s, dtype=float), (Z.shape[0],))
        if self.spectral:
            coef = (Z - self.zstar) @ self.Vinv.T
            coef = coef * np.exp(np.outer(s, self.w))
            return self.zstar + np.real(coef @ self.V.T)
        out = np.empty_like(Z)
        for i in range(Z.shape[0]):
            E = sla.expm(self.aug * s[i])
            out[i] = E[:self.n, :self.n] @ Z[i] + E[:self.n, self.n]
        return out

    def rate(self, Z):
        return Z @ self.M.T + self.b


class PwlPropagator:
    """Exact ensemble propagation of an :class:`~sfpwl.systems.AffinePwlField`."""

    def __init__(self, fld, max_step: float | None = None, newton_tol: float = 1e-13):
        if not getattr(fld, "is_affine", False):
            raise TypeError("exact propagation needs affine pieces")
        self.fld = fld
        self.pieces = (_Piece(fld.M[0], fld.b[0]), _Piece(fld.M[1], fld.b[1]))
        self.idx = fld.index
        rho = max(np.max(np.abs(np.linalg.eigvals(M))) for M in fld.M)
        default = 0.1 / rho if rho > 0 else 1.0
        self.max_step = default if max_step is None else float(max_step)
        self.newton_tol = newton_tol
        self.crossings = 0

    def sides(self, Z) -> np.ndarray:
        s = Z[:, self.idx]
        out = (s > 0).astype(int)
        on = s == 0
        if np.any(on):
            out[on] = (self.pieces[0].rate(Z[on])[:, self.idx] > 0).astype(int)
        return out

    def _advance(self, Z, S, dt):
        """Advance every row by ``dt`` honouring crossings; ``S`` holds current sides."""
        remaining = np.full(Z.shape[0], float(dt))
        Z = Z.copy()
        S = S.copy()
        active = remaining > 0
        guard = 0
        while np.any(active):
            guard += 1
            if guard > 10_000:
                raise StepSizeError("too many crossings within one propagation step")
            ia = np.flatnonzero(active)
            Znew = np.empty((ia.size, Z.shape[1]))
            for side in (LEFT, RIGHT):
                sel = S[ia] == side
                if np.any(sel):
                    Znew[sel] = self.pieces[side].flow(Z[ia[sel]], remaining[ia[sel]])
            h = Znew[:, self.idx]
            crossed = np.where(S[ia] == LEFT, h > 0, h < 0)
            done = ia[~crossed]
            Z[done] = Znew[~crossed]
            remaining[done] = 0.0
            if np.any(crossed):
                ic = ia[crossed]
                tc = self._locate(Z[ic], S[ic], remaining[ic])
                for side in (LEFT, RIGHT):
                    sel = S[ic] == side
                    if np.any(sel):
                        Z[ic[sel]] = self.pieces[side].flow(Z[ic[sel]], tc[sel])
                Z[ic, self.idx] = 0.0
                S[ic] = 1 - S[ic]
                remaining[ic] -= tc
                self.crossings += ic.size
            active = remaining > 1e-15 * max(1.0, dt)
        return Z, S

    def _locate(self, Z, S, hi):
        """First time in ``(0, hi]`` at which the switching coordinate vanishes.

        Bisection keeps a bracket; Newton steps accelerate it when they
        stay inside the bracket.
        """
        lo = np.zeros(Z.shape[0])
        hi = hi.copy()
        sign0 = np.where(S == LEFT, -1.0, 1.0)
        t = 0.5 * (lo + hi)
        for _ in range(100):
            val = np.empty(Z.shape[0])
            der = np.empty(Z.shape[0])
            for side in (LEFT, RIGHT):
                sel = S == side
                if np.any(sel):
                    Zt = self.pieces[side].flow(Z[sel], t[sel])
                    val[sel] = Zt[:, self.idx]
                    der[sel] = self.pieces[side].rate(Zt)[:, self.idx]
            zero = np.abs(val) <= 1e-15 * np.maximum(1.0, np.abs(Z[:, self.idx]))
            same = (val * sign0 > 0) & ~zero
            lo = np.where(same, t, lo)
            hi = np.where(same | zero, hi, t)
            hi = np.where(zero, t, hi)
            if np.all(zero | (hi - lo <= self.newton_tol * np.maximum(1.0, hi))):
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = t - val / der
            ok = np.isfinite(tn) & (tn > lo) & (tn < hi)
            t = np.where(zero, t, np.where(ok, tn, 0.5 * (lo + hi)))
        return hi

    def advance(self, Z, S, dt: float):
        """Advance rows ``Z`` (sides ``S``) by ``dt`` in sub-steps of at most ``max_step``."""
        nsub = max(1, int(np.ceil(dt / self.max_step)))
        h = dt / nsub
        for _ in range(nsub):
            Z, S = self._advance(Z, S, h)
        return Z, S

    def propagate(self, Z0, t_end: float, observer=None, sample_dt: float | None = None,
                  stop=None):
        """Propagate rows of ``Z0`` to ``t_end``.

        ``observer(t, Z, S)`` is called after every step of size at most
        ``sample_dt`` (default ``max_step``). ``stop(Z)`` may return a
        boolean mask of rows to freeze (e.g. diverged ones).
        """
        Z = np.atleast_2d(np.array(Z0, dtype=float))
        S = self.sides(Z)
        dt = min(self.max_step, sample_dt or self.max_step)
        nsteps = max(1, int(np.ceil(t_end / dt)))
        dt = t_end / nsteps
        frozen = np.zeros(Z.shape[0], dtype=bool)
        if observer is not None:
            observer(0.0, Z, S)
        for i in range(1, nsteps + 1):
            live = ~frozen
            if not np.any(live):
                break
            Z[live], S[live] = self._advance(Z[live], S[live], dt)
            if observer is not None:
                observer(i * dt, Z, S)
            if stop is not None:
                frozen |= np.asarray(stop(Z), dtype=bool)
        return Z, S

    def sample(self, Z0, times):
        """States at the given increasing times; shape ``(len(times), N, n)``."""
        times = np.asarray(times, dtype=float)
        Z = np.atleast_2d(np.array(Z0, dtype=float))
        S = self.sides(Z)
        out = np.empty((times.size,) + Z.shape)
        t = 0.0
        for i, ti in enumerate(times):
            while t < ti:
                h = min(self.max_step, ti - t)
                Z, S = self._advance(Z, S, h)
                t = ti if ti - t <= self.max_step else t + h
            out[i] = Z
        return out


def _integrate_exact(fld, z, cfg, t0, raise_on_divergence):
    prop = PwlPropagator(fld, max_step=min(cfg.max_step, 1e300) if np.isfinite(cfg.max_step) else None)
    n_out = max(2, cfg.dense_points)
    times = t0 + np.linspace(0.0, cfg.horizon, n_out)
    Z = z[None, :].copy()
    S = prop.sides(Z)
    states = [Z[0].copy()]
    sides = [int(S[0])]
    events = []
    diag = {"diverged": False, "method": "exact"}
    for i in range(1, n_out):
        h_total = times[i] - times[i - 1]
        nsub = max(1, int(np.ceil(h_total / prop.max_step)))
        for _ in range(nsub):
            before = prop.crossings
            Zb, Sb = Z.copy(), S.copy()
            Z, S = prop._advance(Z, S, h_total / nsub)
            if prop.crossings != before:
                # re-locate for the record; the state itself is already exact
                tc = prop._locate(Zb, Sb, np.array([h_total / nsub]))
                zc = prop.pieces[int(Sb[0])].flow(Zb, tc)[0]
                zc[prop.idx] = 0.0
                events.append(Event(float(times[i - 1] + tc[0]), zc, 1 if S[0] == RIGHT else -1))
        states.append(Z[0].copy())
        sides.append(int(S[0]))
        if np.linalg.norm(Z[0]) > cfg.divergence_norm:
            diag["diverged"] = True
            diag["escape_time"] = float(times[i])
            if raise_on_divergence:
                raise DivergenceError("state norm exceeded the divergence bound",
                                      escape_time=float(times[i]), state=Z[0])
            times = times[: i + 1]
            break
    traj = Trajectory(times[: len(states)], np.array(states), np.array(sides), events, diag)
    return traj
