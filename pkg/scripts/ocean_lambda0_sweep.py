"""Bifurcation diagram of the ocean model in lambda0 (equilibria and cycle bounds of ybar)."""
import os

import numpy as np
from _common import parser, write_csv, write_json

from sfpwl.builtins import OCEAN_BEB, OceanFamily
from sfpwl.experiments import limit_cycle_bounds, sweep
from sfpwl.simulate import IntegratorConfig, integrate

CFG = IntegratorConfig(method="LSODA", rel_tol=1e-9, abs_tol=1e-12, horizon=4e5)


def main():
    p = parser(__doc__.splitlines()[0], "results/ocean")
    p.add_argument("--from", dest="lo", type=float, default=-0.004)
    p.add_argument("--to", dest="hi", type=float, default=0.001)
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--A", type=float, default=1.1)
    args = p.parse_args()

    fam = OceanFamily("lambda0", A=args.A)
    res = sweep(fam, "lambda0", np.linspace(args.lo, args.hi, args.points), CFG, index=1, guess=OCEAN_BEB)
    rows = res.rows()
    header = list(rows[0])
    write_csv(os.path.join(args.out, "lambda0_sweep.csv"), header, [[r[h] for h in header] for r in rows])

    # the stable cycle at lambda0 = -0.001, last part of the orbit
    sys_ = fam(-0.001)
    start = OCEAN_BEB + np.array([0.0, 1e-3, 0.0])
    tr = integrate(sys_, start, CFG)
    t = np.linspace(0.9 * CFG.horizon, CFG.horizon, 5001)
    Z = tr.dense(t)
    write_csv(os.path.join(args.out, "cycle_lambda0_-0.001.csv"), ["t", "xbar", "ybar", "mubar"],
              [[ti, *zi] for ti, zi in zip(t, Z)])
    cb = limit_cycle_bounds(sys_, start, 1, CFG)
    write_json(os.path.join(args.out, "lambda0_sweep.json"),
               {"A": args.A, "points": args.points, "cycle_at_-0.001": [cb.min, cb.max],
                "converged": cb.converged})


if __name__ == "__main__":
    main()
