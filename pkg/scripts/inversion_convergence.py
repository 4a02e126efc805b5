"""Print how the inverse-of-forward error shrinks with the truncation radius.

    python3 scripts/inversion_convergence.py [third_order|heat|multipoint]
"""

import sys

import numpy as np

from utm.problems import heat_dirichlet, multipoint_diffusion, third_order_example
from utm.solver import ProblemInstance, SolverConfig, verify_inversion

PROBLEMS = {"third_order": third_order_example, "heat": heat_dirichlet, "multipoint": multipoint_diffusion}


def main(name: str = "third_order") -> None:
    rp = PROBLEMS[name]()
    prob = ProblemInstance(rp.op, rp.B, rp.ctx.pkg, rp.ctx, rp.Q)
    rep = verify_inversion(prob, rp.Q, np.linspace(0.1, 0.9, 17), SolverConfig(schedule=(12.5, 25, 50, 100, 200, 400)))
    print(f"{'rho':>8} {'sup error':>12} {'ratio':>8}")
    sup = rep.trace.max(axis=(1, 2))
    for k, (rho, e) in enumerate(zip(rep.rho, sup)):
        ratio = "" if k == 0 else f"{sup[k - 1] / e:8.2f}"
        print(f"{rho:8.1f} {e:12.3e} {ratio}")
    print("monotone" if rep.monotone else "not monotone")


if __name__ == "__main__":
    main(*sys.argv[1:])
