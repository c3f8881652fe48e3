"""Transport-diffusion with a shear flow: maximum principle and dyadic smoothing.

Run: python3 demos/transport_smoothing.py
"""
import math

import numpy as np

from frac_boussinesq import Grid, IntegratorConfig, lp_norm, solve_transport_diffusion
from frac_boussinesq import harness as H
from frac_boussinesq.initial_data import random_field, shear_velocity

grid = Grid(128)
theta0 = random_field(grid, seed=3)
traj = solve_transport_diffusion(theta0, shear_velocity(grid), None, 1.5,
                                 IntegratorConfig(dt=0.01, t_end=1.0))
print(f"{len(traj)} snapshots up to t = {traj.times[-1]}")

for i in range(0, len(traj), len(traj) // 5):
    s = traj.states[i]
    print(f"t={s.t:5.2f}  ||theta||_inf={lp_norm(s.theta, np.inf):.4f}  ||theta||_2={lp_norm(s.theta, 2):.4f}")

rep = H.check_max_principle(traj)
print(f"\nmaximum principle: {rep.status}, worst L^inf ratio {rep.stat('linf_ratio'):.4f}, "
      f"dissipation identity residual {rep.stat('identity_residual'):.1e}")

for rho in (1.0, 2.0, math.inf):
    rep = H.check_smoothing_lr(traj, r=2.0, rho=rho)
    print(f"dyadic smoothing rho={rho}: worst ratio {rep.stat('ratio'):.3f}")

rep = H.check_smoothing_linf(traj)
print(f"L^inf smoothing: worst ratio {rep.stat('ratio'):.3f}, trend in q {rep.fitted['ratio_slope']:+.4f}")
