"""Write the reference problem specs used by the command line examples."""

import json
from pathlib import Path

import numpy as np

from utm.cli import ProblemSpecFile, write_spec

OUT = Path(__file__).resolve().parent.parent / "specs"
X21 = tuple(float(v) for v in np.linspace(0, 1, 21))
SIN_PI = (((-0.5j,), 1j * np.pi), ((0.5j,), -1j * np.pi))


def third_order() -> ProblemSpecFile:
    return ProblemSpecFile(
        intervals=1, order=3, omega=((0, 1),), a=(-1j,),
        boundary=((1, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0), (0, 0, 0, 0, 1, 0)),
        adjoint_forms=((1, 0, 0, 0, 0, 0), (0, 0, 0, 1, 0, 0), (0, 1, 0, 0, 0, 0)),
        initial=((((0, 1, -2, 1), 0),),),
        x=X21, t=(0.0, 0.01, 0.1),
    )


def heat() -> ProblemSpecFile:
    return ProblemSpecFile(
        intervals=1, order=2, omega=((0,),), a=(1.0,),
        boundary=((1, 0, 0, 0), (0, 0, 1, 0)),
        initial=(SIN_PI,),
        x=X21, t=(0.05,),
    )


def multipoint() -> ProblemSpecFile:
    u = np.polynomial.Polynomial([81.0, -36.0, -3.0, 2.0])
    q2 = u(np.polynomial.Polynomial([1.0, 2.0])).coef
    return ProblemSpecFile(
        intervals=2, order=2, omega=((0,), (0,)), a=(1.0, 0.25),
        boundary=((0, 1, 0, -1, 0, 0, 0, 0), (0, 0, 0, 0, 0, 0, 1, 0),
                  (0, 0, 1, 0, -1, 0, 0, 0), (0, 0, 0, 2, 0, -1, 0, 0)),
        initial=(((tuple(u.coef), 0),), ((tuple(q2), 0),)),
        x=X21, t=(0.05,),
    )


def _canon(spec: ProblemSpecFile) -> ProblemSpecFile:
    """Coerce every number to the types the reader produces."""
    return ProblemSpecFile.from_json(spec.to_json())


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name, make in [("third_order", third_order), ("heat", heat), ("multipoint", multipoint)]:
        write_spec(_canon(make()), OUT / f"{name}.json")
    # rows 1 and 2 are parallel; written raw because reading it must fail
    data = _canon(heat()).to_json()
    data["boundary"] = [[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], [[2.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]]
    (OUT / "rank_deficient.json").write_text(json.dumps(data) + "\n")
    print(f"wrote specs to {OUT}")
