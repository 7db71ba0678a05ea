"""Cycle amplitude of the ocean model as A varies at lambda0 = -0.001."""
import os

import numpy as np
from _common import parser, write_csv, write_json

from sfpwl.builtins import OCEAN_BEB, OceanFamily
from sfpwl.experiments import sweep
from sfpwl.simulate import IntegratorConfig

CFG = IntegratorConfig(method="LSODA", rel_tol=1e-9, abs_tol=1e-12, horizon=4e5)


def main():
    p = parser(__doc__.splitlines()[0], "results/ocean")
    p.add_argument("--from", dest="lo", type=float, default=1.0)
    p.add_argument("--to", dest="hi", type=float, default=1.3)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--lambda0", type=float, default=-0.001)
    p.add_argument("--threshold", type=float, default=1e-3, help="amplitude counted as a cycle")
    args = p.parse_args()

    grid = np.linspace(args.lo, args.hi, args.points)
    res = sweep(OceanFamily("A", lambda0=args.lambda0), "A", grid, CFG, index=1, guess=OCEAN_BEB)
    rows = res.rows()
    header = list(rows[0]) + ["amplitude"]
    table = [[r[h] for h in header[:-1]] + [r["cycle_max"] - r["cycle_min"]] for r in rows]
    write_csv(os.path.join(args.out, "amplitude_sweep.csv"), header, table)
    amp = np.array([row[-1] for row in table])
    conv = np.array([r["converged"] for r in rows])
    hit = conv & (amp > args.threshold)
    write_json(os.path.join(args.out, "amplitude_sweep.json"),
               {"lambda0": args.lambda0, "threshold": args.threshold,
                "onset_A": float(grid[np.argmax(hit)]) if hit.any() else None})


if __name__ == "__main__":
    main()
