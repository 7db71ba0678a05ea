"""Limit-cycle bounds of the two-dimensional reduced ocean system as mu varies."""
import os

import numpy as np
from _common import parser, write_csv, write_json

from sfpwl.builtins import ocean_sfocf
from sfpwl.experiments import sweep
from sfpwl.simulate import IntegratorConfig, PwlPropagator
from sfpwl.slowfast import classify_2d, reduced_system


def main():
    p = parser(__doc__.splitlines()[0], "results/ocean")
    p.add_argument("--from", dest="lo", type=float, default=-1.0)
    p.add_argument("--to", dest="hi", type=float, default=1.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--A", type=float, default=1.1)
    args = p.parse_args()

    rs = reduced_system(ocean_sfocf(A=args.A))
    # crossings are far apart on the slow time scale, so unit sub-steps suffice
    cfg = IntegratorConfig(method="exact", horizon=6000.0, max_step=1.0)
    res = sweep(rs.with_mu, "mu", np.linspace(args.lo, args.hi, args.points), cfg, index=0)
    rows = res.rows()
    header = list(rows[0])
    write_csv(os.path.join(args.out, "reduced_mu_sweep.csv"), header, [[r[h] for h in header] for r in rows])

    taus = np.linspace(3000.0, 3600.0, 6001)
    Y = PwlPropagator(rs.with_mu(1.0).field()).sample([[0.1, 0.0]], taus)[:, 0, :]
    write_csv(os.path.join(args.out, "reduced_cycle_mu_1.csv"), ["tau", "y1", "y2"],
              [[t, *y] for t, y in zip(taus, Y)])
    cl = classify_2d(rs)
    write_json(os.path.join(args.out, "reduced_mu_sweep.json"),
               {"A": args.A, "B_L": rs.B_L.tolist(), "B_R": rs.B_R.tolist(),
                "classification": {"L": cl["L"].label, "R": cl["R"].label, "prediction": cl["prediction"]}})


if __name__ == "__main__":
    main()
