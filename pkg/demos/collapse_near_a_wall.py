"""Watch a principal orbit collapse onto a focal orbit.

The flow starts on the symmetry axis of the smallest catalog row, a triangle
with one vertical and two horizontal roots. The orbit hits the alpha wall in
finite time; near the wall the squared distance shrinks linearly, and the
slope of that line gives the type-I constant.
"""

import math

import numpy as np

from chamberflow import cascade, chamber, get_spec, integrate, minimal_point

spec = get_spec("rho1-SU3-SO3")
ch = chamber(spec)
print(spec.label)
for k in range(len(ch.constraints)):
    print("   ", ch.describe(k))

w0 = minimal_point(spec)
print(f"\nrho is smallest at {w0}, exactly (pi/6, 0) = ({math.pi / 6:.16f}, 0)")

traj, ev = integrate(spec, [math.pi / 12, 0.0])
print(f"\nfrom (pi/12, 0): collapse at T ~ {ev.T_est:.9f} onto {ev.limit}")
print(f"  {traj.stats['accepted']} accepted steps, {traj.stats['rejected']} rejected")

# the last few samples: margin^2 / (T - t) should settle at 2 m |alpha|^2 = 8
t = np.array(traj.t)
d = np.array([ch.min_margin(Y) for Y in traj.Y])
print("\n  T - t          margin^2/(T - t)")
for k in range(-40, -1, 8):
    print(f"  {ev.T_est - t[k]:.3e}      {d[k] ** 2 / (ev.T_est - t[k]):.6f}")
print(f"fitted rate {ev.blowup_rate_est:.6f}; type-I estimate {ev.type_I_est:.6f} vs {ev.type_I_theory}")

# off the axis the orbit first lands on the facet, then slides to a vertex
res = cascade(spec, [math.pi / 12, 0.01])
print("\ncascade from (pi/12, 0.01):")
for k, e in enumerate(res, 1):
    print(f"  step {k}: reach dim-{e.stratum_dim} face at {np.round(e.limit, 12)} (after {e.T_est:.6f} in that stage)")
