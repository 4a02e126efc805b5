"""Write the located zeros and contour polylines of a reference problem as JSON for plotting.

    python3 scripts/dump_geometry.py third_order out.json [rho]
"""

import json
import sys

from utm.problems import heat_dirichlet, multipoint_diffusion, third_order_example
from utm.solver import ProblemInstance, prepare

PROBLEMS = {"third_order": third_order_example, "heat": heat_dirichlet, "multipoint": multipoint_diffusion}


def main(name: str, out: str, rho: str = "30") -> None:
    rp = PROBLEMS[name]()
    prob = prepare(ProblemInstance(rp.op, rp.B, rp.ctx.pkg, rp.ctx, rp.Q))
    data = {
        "problem": name,
        "epsilon": prob.params.epsilon,
        "R": prob.params.R,
        "zeros": [{"value": [z.value.real, z.value.imag], "multiplicity": z.multiplicity} for z in prob.zeros.zeros],
        "contours": [pl for r in range(prob.m) for pl in prob.contours(r, False, True).polylines(float(rho))],
    }
    with open(out, "w") as fh:
        json.dump(data, fh)
    print(f"{len(data['zeros'])} zeros, {len(data['contours'])} polylines -> {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
