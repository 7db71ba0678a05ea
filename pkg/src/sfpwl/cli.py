"""Command-line front end.

Every command reads a system from ``--config PATH`` or ``--builtin NAME``,
writes CSV/JSON files into ``--out`` and finishes with ``manifest.json``.
Exit codes: 0 success, 2 hypothesis violation, 3 numerical failure,
4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import builtins as bi
from .config import SystemConfig, builtin_config
from .errors import ConfigError, HypothesisViolation, NumericalFailure
from .experiments import (
    check_strong_trapping,
    invariance_experiment,
    perturbation_bound_experiment,
    sweep,
    tube_initial_states,
)
from .linalg import eigenvalues
from .simulate import IntegratorConfig, integrate
from .slowfast import (
    ProbeConfig,
    classify_2d,
    critical_manifold,
    eigen_factorization_check,
    homogeneity_check,
    layer_system,
    reduced_system,
    slow_eigenvalues,
    stability_probe,
)
from .systems import SfocfSystem, SlowFastPwlSystem, assemble_general
from .transform import (
    build_ocf_transform,
    to_ocf,
    to_sfocf,
    verify_transform_identities,
)

log = logging.getLogger("sfpwl")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4
DEFAULT_EPS_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


# --------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


class Output:
    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        self.files = []

    def path(self, name):
        return os.path.join(self.dir, name)

    def json(self, name, data):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.files.append(name)
        log.info("wrote %s", self.path(name))

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(name)
        log.info("wrote %s", self.path(name))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _spectrum(M):
    return eigenvalues(M).eigenvalues


# --------------------------------------------------------------------------
# system resolution


def _load(args) -> SystemConfig:
    if bool(args.config) == bool(args.builtin):
        raise ConfigError("give exactly one of --config or --builtin")
    cfg = SystemConfig.load(args.config) if args.config else builtin_config(args.builtin, args.seed)
    return cfg.with_overrides(eps=args.eps, mu=args.mu)


def _as_sfocf(cfg: SystemConfig) -> SfocfSystem:
    sys_ = cfg.build()
    if isinstance(sys_, SfocfSystem):
        return sys_
    if cfg.kind == "piecewise-smooth-builtin":
        return bi.ocean_sfocf(**cfg.parameters)
    if isinstance(sys_, SlowFastPwlSystem):
        return to_sfocf(sys_)
    k, eps = cfg.parameters.get("k"), cfg.parameters.get("eps")
    if k is None or eps is None:
        raise ConfigError("general-pwl systems need parameters.k and parameters.eps for SFOCF analysis")
    return to_sfocf(sys_, k=int(k), epsilon=float(eps))


def _integrator(args, default_method="RK45", **kw) -> IntegratorConfig:
    opts = dict(kw)
    opts["method"] = args.method or default_method
    if args.rtol is not None:
        opts["rel_tol"] = args.rtol
    if args.atol is not None:
        opts["abs_tol"] = args.atol
    if getattr(args, "t_end", None) is not None:
        opts["horizon"] = args.t_end
    return IntegratorConfig(**opts)


# --------------------------------------------------------------------------
# commands


def cmd_transform(args, cfg: SystemConfig, out: Output):
    sys_ = cfg.build()
    report = {"system": cfg.name or cfg.kind}
    if isinstance(sys_, SfocfSystem):
        report.update({"form": "sfocf", "identity": True, "k": sys_.k, "epsilon": sys_.epsilon,
                       "a_L": sys_.a_L, "a_R": sys_.a_R, "b_L": sys_.b_L, "b_R": sys_.b_R, "mu": sys_.mu,
                       "note": "system is already in SFOCF; the transform is the identity"})
        out.json("transform.json", report)
        return
    if cfg.kind == "piecewise-smooth-builtin":
        gen, T = bi.ocean_general(**cfg.parameters)
        report["straightening"] = T
        k, eps = 1, cfg.parameters["eps"]
    elif isinstance(sys_, SlowFastPwlSystem):
        gen, k, eps = assemble_general(sys_), sys_.k, sys_.epsilon
    else:
        gen = sys_
        k, eps = cfg.parameters.get("k"), cfg.parameters.get("eps")
    t = build_ocf_transform(gen)
    ident = verify_transform_identities(gen, t)
    ocf = to_ocf(gen, t, verify=False)
    report.update({"p_L": ocf.p_L, "p_R": ocf.p_R, "mu_ocf": ocf.mu, "Q": t.Q, "Psi": t.Psi, "Phi": t.Phi,
                   "d": t.d, "s": t.s, "cond_Q": t.cond_Q, "rcond_Phi": t.rcond_phi,
                   "identities": ident.to_dict()})
    if k is not None and eps:
        s, st = to_sfocf(gen, k=int(k), epsilon=float(eps), return_transform=True)
        report["sfocf"] = {"k": s.k, "epsilon": s.epsilon, "a_L": s.a_L, "a_R": s.a_R,
                           "b_L": s.b_L, "b_R": s.b_R, "mu": s.mu,
                           "pattern_residual": st.pattern_residual, "forcing_residual": st.forcing_residual}
    out.json("transform.json", report)
    if not ident.passed:
        name, val = ident.worst()
        raise NumericalFailure(f"identity {name} residual {val:.3g} exceeds {ident.tolerance:.3g}")


def cmd_analyze(args, cfg: SystemConfig, out: Output):
    s = _as_sfocf(cfg)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ls = layer_system(s)
        cm = critical_manifold(ls)
        rs = reduced_system(s, warn=False)
    notes += [str(w.message) for w in caught]
    groups = slow_eigenvalues(s)
    report = {
        "system": cfg.name or cfg.kind, "n": s.n, "k": s.k, "epsilon": s.epsilon, "mu": s.mu,
        "coefficients": {"a_L": s.a_L, "a_R": s.a_R, "b_L": s.b_L, "b_R": s.b_R},
        "layer": {"A_L": ls.A_L, "A_R": ls.A_R, "spectrum_L": _spectrum(ls.A_L), "spectrum_R": _spectrum(ls.A_R),
                  "hurwitz": ls.is_hurwitz()},
        "critical_manifold": {"branch_L": cm.branch_L, "branch_R": cm.branch_R,
                              "det_L": cm.det_L, "det_R": cm.det_R},
        "reduced": {"B_L": rs.B_L, "B_R": rs.B_R, "spectrum_L": _spectrum(rs.B_L), "spectrum_R": _spectrum(rs.B_R)},
        "full_spectrum": {tag: {"fast": g[0].eigenvalues, "slow_over_eps": g[1].eigenvalues}
                          for tag, g in groups.items()},
    }
    if rs.m == 2:
        cl = classify_2d(rs)
        report["classification"] = {"L": cl["L"].to_dict(), "R": cl["R"].to_dict(), "prediction": cl["prediction"]}
    if s.rule is not None or args.eps_grid:
        grid = args.eps_grid or DEFAULT_EPS_GRID
        report["factorization"] = eigen_factorization_check(s, grid).to_dict()
    report["notes"] = notes
    out.json("analyze.json", report)
    y = np.linspace(-1.0, 1.0, 201)
    H = cm(y)
    out.csv("critical_manifold.csv", ["y1"] + [f"x{i + 1}" for i in range(s.k)],
            [[yy, *h] for yy, h in zip(y, H)])


def _default_start(cfg, sys_):
    if isinstance(sys_, SfocfSystem):
        H = critical_manifold(layer_system(sys_, warn=False))
        y = np.zeros(sys_.m)
        y[0] = 0.2
        return np.r_[H(np.array(y[0])), y]
    if cfg.kind == "piecewise-smooth-builtin":
        return bi.OCEAN_BEB + np.array([0.0, 1e-3, 0.0])
    z = np.zeros(sys_.n)
    z[0] = 0.1
    return z


def cmd_simulate(args, cfg: SystemConfig, out: Output):
    sys_ = cfg.build()
    ocean = cfg.kind == "piecewise-smooth-builtin"
    icfg = _integrator(args, "LSODA" if ocean else "RK45",
                       horizon=args.t_end or (4e5 if ocean else 2000.0),
                       rel_tol=1e-9, abs_tol=1e-12 if ocean else 1e-11,
                       max_step=args.max_step or (np.inf if ocean else 0.5))
    z0 = np.asarray(args.z0, dtype=float) if args.z0 else _default_start(cfg, sys_)
    traj = integrate(sys_, z0, icfg)
    n = z0.size
    stride = max(1, int(np.ceil(traj.times.size / args.max_rows))) if args.max_rows else 1
    rows = [[t, *z, int(sd)] for t, z, sd in zip(traj.times[::stride], traj.states[::stride], traj.sides[::stride])]
    out.csv("trajectory.csv", ["t"] + [f"z{i + 1}" for i in range(n)] + ["piece"], rows)
    out.csv("events.csv", ["t"] + [f"z{i + 1}" for i in range(n)] + ["direction", "grazing"],
            [[e.time, *e.state, e.direction, int(e.grazing)] for e in traj.events])
    summary = {"z0": z0, "horizon": icfg.horizon, "method": icfg.method, "events": len(traj.events),
               "diverged": traj.diverged, "escape_time": traj.diagnostics.get("escape_time"),
               "max_norm": float(np.max(np.linalg.norm(traj.states, axis=1))),
               "final_state": traj.states[-1], "diagnostics": traj.diagnostics}
    out.json("simulate.json", summary)


def _family(cfg: SystemConfig, param: str):
    if cfg.kind == "piecewise-smooth-builtin":
        return bi.OceanFamily(param, **{k: v for k, v in cfg.parameters.items() if k != param})
    sys_ = cfg.build()
    if isinstance(sys_, SfocfSystem):
        return bi.SfocfFamily(sys_, param)
    raise ConfigError("sweeps are available for SFOCF systems and the ocean model")


def cmd_sweep(args, cfg: SystemConfig, out: Output):
    if args.param is None or args.from_ is None or args.to is None:
        raise ConfigError("sweep needs --param, --from and --to")
    ocean = cfg.kind == "piecewise-smooth-builtin"
    grid = np.linspace(args.from_, args.to, args.points)
    icfg = _integrator(args, "LSODA" if ocean else "RK45", horizon=args.t_end or (4e5 if ocean else 500.0),
                       rel_tol=1e-9, abs_tol=1e-12 if ocean else 1e-11)
    if args.index is not None:
        index = args.index
    else:
        # observe ybar for the ocean model and y_1 for SFOCF systems
        index = 1 if ocean else cfg.build().k
    res = sweep(_family(cfg, args.param), args.param, grid, icfg, index=index,
                guess=bi.OCEAN_BEB if ocean else None)
    rows = res.rows()
    header = list(rows[0].keys())
    out.csv("sweep.csv", header, [[r[h] for h in header] for r in rows])
    out.json("sweep.json", {"parameter": args.param, "observable_index": index, "points": len(grid),
                            "transient_fraction": res.transient_fraction, "horizon": res.horizon,
                            "errors": sum(1 for r in rows if r["error"])})


def cmd_invariance(args, cfg: SystemConfig, out: Output):
    s = _as_sfocf(cfg)
    region = cfg.trapping_region()
    if region is None:
        raise ConfigError("invariance needs a trapping region in the config ('region')")
    eps_grid = args.eps_grid or (0.01, 0.005, 0.002)
    tr = check_strong_trapping(reduced_system(s, warn=False), region)
    rep = invariance_experiment(s, region, args.M, args.N, eps_grid, samples=args.samples,
                                seed=args.seed, override=args.override)
    Z0 = tube_initial_states(s, region, args.samples, seed=args.seed)
    pb = perturbation_bound_experiment(s, Z0, args.T, eps_grid)
    out.json("invariance.json", {"trapping": tr.to_dict(), "invariance": rep.to_dict(),
                                 "perturbation": pb.to_dict()})
    out.csv("invariance.csv", ["eps", "violations", "min_N", "K_hat"],
            [[e, v, m, k] for e, v, m, k in zip(rep.eps, rep.violations, rep.min_N, pb.K_hat)])


def cmd_stability(args, cfg: SystemConfig, out: Output):
    s = _as_sfocf(cfg)
    ls = layer_system(s, warn=False)
    rep = stability_probe(ls, ProbeConfig(points_per_radius=args.points_per_radius, seed=args.seed))
    hom = homogeneity_check(ls, draws=args.draws, seed=args.seed)
    out.json("stability.json", {"probe": rep.to_dict(), "homogeneity": hom.to_dict()})


COMMANDS = {
    "transform": cmd_transform,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "invariance": cmd_invariance,
    "stability": cmd_stability,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfpwl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("system")
    src.add_argument("--config", help="system config JSON")
    src.add_argument("--builtin", choices=bi.BUILTINS, help="built-in system")
    src.add_argument("--eps", type=float, help="override epsilon")
    src.add_argument("--mu", type=float, help="override the unfolding parameter (mu, mu_tilde or lambda0)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")
    integ = common.add_argument_group("integration")
    integ.add_argument("--method", choices=["RK45", "DOP853", "LSODA", "Radau", "exact"])
    integ.add_argument("--rtol", type=float)
    integ.add_argument("--atol", type=float)
    integ.add_argument("--t-end", type=float)

    sub.add_parser("transform", parents=[common], help="OCF/SFOCF coefficients and identity residuals")
    a = sub.add_parser("analyze", parents=[common], help="critical manifold, reduced system, classification")
    a.add_argument("--eps-grid", type=float, nargs="+")
    s = sub.add_parser("simulate", parents=[common], help="integrate one orbit")
    s.add_argument("--z0", type=float, nargs="+")
    s.add_argument("--max-step", type=float)
    s.add_argument("--max-rows", type=int, default=200_000, help="thin trajectory.csv to at most this many rows")
    w = sub.add_parser("sweep", parents=[common], help="equilibria and limit-cycle bounds along a parameter")
    w.add_argument("--param")
    w.add_argument("--from", dest="from_", type=float)
    w.add_argument("--to", type=float)
    w.add_argument("--points", type=int, default=60)
    w.add_argument("--index", type=int, help="observed state component (0-based)")
    i = sub.add_parser("invariance", parents=[common], help="forward invariance and perturbation bound")
    i.add_argument("--eps-grid", type=float, nargs="+")
    i.add_argument("--M", type=float, default=1.0)
    i.add_argument("--N", type=float, default=10.0)
    i.add_argument("--samples", type=int, default=100)
    i.add_argument("--T", type=float, default=5.0, help="horizon of the perturbation bound")
    i.add_argument("--override", action="store_true", help="run even if hypotheses fail")
    t = sub.add_parser("stability", parents=[common], help="stability probe of the critical manifold")
    t.add_argument("--points-per-radius", type=int, default=200)
    t.add_argument("--draws", type=int, default=100)
    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="output directory (default: the recorded one)")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return replay(args.manifest, args.out)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = _now()
    out = Output(args.out)
    try:
        cfg = _load(args)
        cfg.save(out.path("config.json"))
        out.files.append("config.json")
        COMMANDS[args.command](args, cfg, out)
        code = EXIT_OK
        error = None
    except HypothesisViolation as exc:
        code, error = EXIT_HYPOTHESIS, f"{type(exc).__name__}: {exc}"
    except NumericalFailure as exc:
        code, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    except (ConfigError, ValueError) as exc:
        code, error = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except ArithmeticError as exc:
        code, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    if error:
        print(f"error: {error}", file=sys.stderr)
    manifest = {
        "command": args.command, "argv": argv, "config_hash": cfg.hash() if "cfg" in locals() else None,
        "seed": args.seed, "version": __version__, "started": started, "finished": _now(),
        "exit_code": code, "error": error,
        "outputs": {name: _sha256(out.path(name)) for name in out.files},
        "workers": os.environ.get("SFPWL_WORKERS", "1"),
    }
    with open(out.path("manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


def replay(manifest_path, out_dir=None) -> int:
    """Re-run the command recorded in a manifest, optionally into another directory."""
    with open(manifest_path) as fh:
        man = json.load(fh)
    argv = list(man["argv"])
    if out_dir is not None:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = out_dir
        else:
            argv += ["--out", out_dir]
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
