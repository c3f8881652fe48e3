"""Boussinesq run with buoyancy F = (0, theta) and the a priori growth envelopes.

Run: python3 demos/boussinesq_cascade.py
"""
import numpy as np

from frac_boussinesq import Grid, IntegratorConfig, SourceFunction, SpectralField, lp_norm, solve_boussinesq
from frac_boussinesq import harness as H
from frac_boussinesq.initial_data import random_field

grid = Grid(128)
traj = solve_boussinesq(SpectralField.zeros(grid), random_field(grid, seed=0), SourceFunction.linear(),
                        1.5, IntegratorConfig(dt=0.01, t_end=2.0))

print("   t   ||omega||_inf   ||grad v||_inf   ||theta||_inf")
for i in range(0, len(traj), len(traj) // 8):
    s = traj.states[i]
    print(f"{s.t:4.2f}   {lp_norm(s.omega, np.inf):13.4f}   {s.grad_v_linf:14.4f}   "
          f"{lp_norm(s.theta, np.inf):13.4f}")

rep = H.track_apriori_cascade(traj)
print(f"\nsingle-exponential envelope constant C0 = {rep.fitted['C0']:.3f} (threshold 50)")
print(f"grad v against C0 e^(e^(C0 t)): worst ratio {rep.stat('gradv_envelope_ratio'):.3f}")
print(f"fitted log growth rate of the first group: {rep.fitted['growth_rate']:+.3f}")
print(f"overall status: {rep.status}")
