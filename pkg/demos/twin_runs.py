"""Perturb the initial temperature and watch the two solutions separate.

Halving the perturbation should halve the response while the system is linear.

Run: python3 demos/twin_runs.py
"""
from frac_boussinesq import Grid, IntegratorConfig, SourceFunction, SpectralField, solve_boussinesq
from frac_boussinesq import harness as H
from frac_boussinesq.initial_data import random_field
from frac_boussinesq.solvers import twin_run_stability

grid = Grid(128)
w0, t0 = SpectralField.zeros(grid), random_field(grid, seed=0)
pert = random_field(grid, seed=3)
F = SourceFunction.linear()
cfg = IntegratorConfig(dt=0.01, t_end=0.5)

base = solve_boussinesq(w0, t0, F, 1.5, cfg)
full = twin_run_stability((w0, t0), (w0, t0 + pert * 1e-4), F, 1.5, cfg, base_run=base)
half = twin_run_stability((w0, t0), (w0, t0 + pert * 5e-5), F, 1.5, cfg, base_run=base)

for t in (0.1, 0.25, 0.5):
    print(f"t={t:4.2f}  response(delta)={full.response_at(t):.3e}  "
          f"response(delta/2)={half.response_at(t):.3e}  ratio={full.response_at(t) / half.response_at(t):.4f}")

rep = H.check_twin_stability(full, half)
print(f"\nfitted envelope A e^(B t) delta0 with A={full.fit_A:.3f}, B={full.fit_B:+.3f}")
print(f"Gronwall constant {full.gronwall_C:.3f}; status {rep.status}")
