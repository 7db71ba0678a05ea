"""Empirical epsilon below which the canard orbit escapes to infinity.

Bisects on log(eps) between a bounded and a diverging run from the same
initial condition. The boundary depends on the start point and horizon;
it is an observation, not a derived constant.
"""
import os

import numpy as np
from _common import parser, write_csv, write_json

from sfpwl.builtins import canard5d
from sfpwl.simulate import IntegratorConfig, integrate
from sfpwl.slowfast import critical_manifold, layer_system


def escapes(eps, t_end):
    s = canard5d(eps, 1.0)
    H = critical_manifold(layer_system(s))
    z0 = np.r_[H(np.array(0.2)), 0.2, 0.0]
    tr = integrate(s, z0, IntegratorConfig(horizon=t_end, rel_tol=1e-8, max_step=0.5, divergence_norm=1e6))
    return tr.diverged, tr.diagnostics.get("escape_time")


def main():
    p = parser(__doc__.splitlines()[0], "results/canard")
    p.add_argument("--lo", type=float, default=0.005)
    p.add_argument("--hi", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=2000.0)
    p.add_argument("--iters", type=int, default=8)
    args = p.parse_args()

    lo, hi = args.lo, args.hi
    rows = []
    for eps in (lo, hi):
        d, te = escapes(eps, args.t_end)
        rows.append([eps, int(d), te])
    if not (rows[0][1] and not rows[1][1]):
        raise SystemExit("need a diverging run at --lo and a bounded run at --hi")
    for _ in range(args.iters):
        mid = float(np.sqrt(lo * hi))
        d, te = escapes(mid, args.t_end)
        rows.append([mid, int(d), te])
        lo, hi = (mid, hi) if d else (lo, mid)
    write_csv(os.path.join(args.out, "eps_boundary.csv"), ["eps", "diverged", "escape_time"], rows)
    write_json(os.path.join(args.out, "eps_boundary.json"),
               {"diverges_at": lo, "bounded_at": hi, "horizon": args.t_end})


if __name__ == "__main__":
    main()
