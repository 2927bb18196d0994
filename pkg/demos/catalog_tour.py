"""Tour the whole catalog: convexity, minima, and how flows end.

For every row this prints the minimal point of rho, the smallest Hessian
eigenvalue over random interior samples, and what happens to a cascade
started near the minimum. Rows whose face flows leave their face are
reported instead of hidden: their listed multiplicities are not symmetric
under reflection in a horizontal wall, so the reduced field on that wall has
a normal component.
"""

import numpy as np

from chamberflow import InvariantError, cascade, chamber, hessian_rho, minimal_point
from chamberflow.rootsys import default_specs

rng = np.random.default_rng(1)
print(f"{'row':28s} {'minimal point':>26s} {'min eig':>9s}  cascade")
for spec in default_specs():
    ch = chamber(spec)
    w0 = minimal_point(spec)
    eig = min(np.linalg.eigvalsh(hessian_rho(spec, Y))[0] for Y in ch.sample(50, rng))
    try:
        res = cascade(spec, w0 + np.array([0.01, 0.004]))
        ends = "vertex" if res.events and res.events[-1].stratum_dim == 0 else res.terminal.kind
        how = f"{len(res)} collapse(s), ends at {ends}"
    except InvariantError as exc:
        how = "face flow not tangent: " + str(exc).split(": ", 2)[-1][:40]
    print(f"{spec.name:28s} ({w0[0]:+.8f}, {w0[1]:+.8f}) {eig:9.3f}  {how}")
